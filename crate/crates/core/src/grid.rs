//! Periodic spectral grid: the truncation of R^d to the box [-L, L)^d with
//! N collocation points per axis and the matching wavenumber lattice.

use std::sync::Arc;

use rustfft::{Fft, FftDirection, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Grid parameters in serializable form (manifests, dump headers).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridParams {
    pub dim: usize,
    pub n_per_axis: usize,
    pub half_width: f64,
}

/// Immutable uniform grid on [-L, L)^dim. Wavenumbers are xi_m = pi*m/L for
/// m in [-N/2, N/2), stored in FFT bin order (0, 1, .., N/2-1, -N/2, .., -1)
/// so frequency-space buffers index directly.
pub struct SpectralGrid {
    dim: usize,
    n_per_axis: usize,
    half_width: f64,
    wavenumbers: Vec<f64>,
    axis_coords: Vec<f64>,
    xi_sq: Vec<f64>,
    fft_fwd: Arc<dyn Fft<f64>>,
    fft_inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for SpectralGrid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralGrid")
            .field("dim", &self.dim)
            .field("n_per_axis", &self.n_per_axis)
            .field("half_width", &self.half_width)
            .finish()
    }
}

impl SpectralGrid {
    pub fn new(dim: usize, n_per_axis: usize, half_width: f64) -> Result<Arc<Self>> {
        if !(1..=3).contains(&dim) {
            return Err(Error::invalid(format!("dim must be 1, 2 or 3, got {dim}")));
        }
        if n_per_axis < 8 || !n_per_axis.is_power_of_two() {
            return Err(Error::invalid(format!(
                "n_per_axis must be a power of two >= 8, got {n_per_axis}"
            )));
        }
        if !(half_width > 0.0) || !half_width.is_finite() {
            return Err(Error::invalid(format!(
                "half_width must be positive, got {half_width}"
            )));
        }

        let n = n_per_axis;
        let base = std::f64::consts::PI / half_width;
        let wavenumbers: Vec<f64> = (0..n)
            .map(|i| {
                let m = if i < n / 2 { i as isize } else { i as isize - n as isize };
                base * m as f64
            })
            .collect();
        let h = 2.0 * half_width / n as f64;
        let axis_coords: Vec<f64> = (0..n).map(|j| -half_width + j as f64 * h).collect();

        let total = n.pow(dim as u32);
        let mut xi_sq = vec![0.0f64; total];
        for (idx, slot) in xi_sq.iter_mut().enumerate() {
            let mut rem = idx;
            let mut acc = 0.0;
            for _ in 0..dim {
                let xi = wavenumbers[rem % n];
                rem /= n;
                acc += xi * xi;
            }
            *slot = acc;
        }

        let mut planner = FftPlanner::new();
        let fft_fwd = planner.plan_fft(n, FftDirection::Forward);
        let fft_inv = planner.plan_fft(n, FftDirection::Inverse);

        Ok(Arc::new(SpectralGrid {
            dim,
            n_per_axis,
            half_width,
            wavenumbers,
            axis_coords,
            xi_sq,
            fft_fwd,
            fft_inv,
        }))
    }

    pub fn from_params(p: GridParams) -> Result<Arc<Self>> {
        SpectralGrid::new(p.dim, p.n_per_axis, p.half_width)
    }

    pub fn params(&self) -> GridParams {
        GridParams {
            dim: self.dim,
            n_per_axis: self.n_per_axis,
            half_width: self.half_width,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_per_axis(&self) -> usize {
        self.n_per_axis
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn total_points(&self) -> usize {
        self.n_per_axis.pow(self.dim as u32)
    }

    /// Grid spacing h = 2L/N.
    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.n_per_axis as f64
    }

    /// h^dim, the physical-space cell measure.
    pub fn cell_measure(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// Per-axis wavenumbers in FFT bin order.
    pub fn wavenumbers(&self) -> &[f64] {
        &self.wavenumbers
    }

    /// Per-axis collocation coordinates -L + j*h.
    pub fn axis_coords(&self) -> &[f64] {
        &self.axis_coords
    }

    /// |xi|^2 for every lattice point, row-major.
    pub fn xi_sq(&self) -> &[f64] {
        &self.xi_sq
    }

    /// Largest |xi| representable on the lattice (box corner).
    pub fn max_wavenumber(&self) -> f64 {
        let edge = std::f64::consts::PI * (self.n_per_axis / 2) as f64 / self.half_width;
        edge * (self.dim as f64).sqrt()
    }

    /// Decompose a row-major index into per-axis bins (first axis slowest).
    pub fn bins_of(&self, mut idx: usize) -> [usize; 3] {
        let n = self.n_per_axis;
        let mut out = [0usize; 3];
        for axis in (0..self.dim).rev() {
            out[axis] = idx % n;
            idx /= n;
        }
        out
    }

    /// Physical coordinates of a row-major index (first `dim` entries valid).
    pub fn coords_of(&self, idx: usize) -> [f64; 3] {
        let bins = self.bins_of(idx);
        let mut out = [0.0f64; 3];
        for axis in 0..self.dim {
            out[axis] = self.axis_coords[bins[axis]];
        }
        out
    }

    /// Wavenumber vector of a row-major index (first `dim` entries valid).
    pub fn freq_of(&self, idx: usize) -> [f64; 3] {
        let bins = self.bins_of(idx);
        let mut out = [0.0f64; 3];
        for axis in 0..self.dim {
            out[axis] = self.wavenumbers[bins[axis]];
        }
        out
    }

    pub(crate) fn fft_plan(&self, dir: FftDirection) -> &Arc<dyn Fft<f64>> {
        match dir {
            FftDirection::Forward => &self.fft_fwd,
            FftDirection::Inverse => &self.fft_inv,
        }
    }

    /// Structural compatibility; separately constructed grids with identical
    /// parameters are interchangeable.
    pub fn same_layout(&self, other: &SpectralGrid) -> bool {
        self.dim == other.dim
            && self.n_per_axis == other.n_per_axis
            && self.half_width == other.half_width
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wavenumbers_d1_unit_spacing() {
        // L = pi makes xi_m = m
        let g = SpectralGrid::new(1, 8, std::f64::consts::PI).unwrap();
        let mut w: Vec<f64> = g.wavenumbers().to_vec();
        w.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let expect = [-4.0, -3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0];
        for (a, b) in w.iter().zip(expect.iter()) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn wavenumbers_d1_half_spacing() {
        // L = 2pi halves the lattice spacing
        let g = SpectralGrid::new(1, 8, 2.0 * std::f64::consts::PI).unwrap();
        let mut w: Vec<f64> = g.wavenumbers().to_vec();
        w.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let expect = [-2.0, -1.5, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5];
        for (a, b) in w.iter().zip(expect.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn corner_magnitude_d2() {
        let g = SpectralGrid::new(2, 8, std::f64::consts::PI).unwrap();
        assert_eq!(g.total_points(), 64);
        let max = g.xi_sq().iter().cloned().fold(0.0f64, f64::max).sqrt();
        assert!((max - 4.0 * 2.0f64.sqrt()).abs() < 1e-12);
        assert!((g.max_wavenumber() - 4.0 * 2.0f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn zero_mode_once_per_axis() {
        let g = SpectralGrid::new(1, 16, 3.0).unwrap();
        let zeros = g.wavenumbers().iter().filter(|&&w| w == 0.0).count();
        assert_eq!(zeros, 1);
        assert!(g.spacing() > 0.0);
        let bound = std::f64::consts::PI * 16.0 / (2.0 * 3.0);
        assert!(g.wavenumbers().iter().all(|w| w.abs() <= bound + 1e-12));
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(SpectralGrid::new(0, 8, 1.0).is_err());
        assert!(SpectralGrid::new(4, 8, 1.0).is_err());
        assert!(SpectralGrid::new(1, 12, 1.0).is_err());
        assert!(SpectralGrid::new(1, 4, 1.0).is_err());
        assert!(SpectralGrid::new(1, 8, 0.0).is_err());
        assert!(SpectralGrid::new(1, 8, -2.0).is_err());
    }

    #[test]
    fn row_major_decomposition() {
        let g = SpectralGrid::new(2, 8, 1.0).unwrap();
        let idx = 3 * 8 + 5;
        assert_eq!(g.bins_of(idx)[..2], [3, 5]);
        let c = g.coords_of(idx);
        assert!((c[0] - g.axis_coords()[3]).abs() < 1e-15);
        assert!((c[1] - g.axis_coords()[5]).abs() < 1e-15);
    }
}
