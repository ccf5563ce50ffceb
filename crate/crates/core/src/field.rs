//! Complex amplitude fields on a spectral grid, the unitary DFT between
//! physical and frequency space, and the discrete norms.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::FftDirection;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::SpectralGrid;

/// Which representation the stored amplitudes are in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Space {
    Physical,
    Frequency,
}

/// Norm selector. `L2` is the discrete (h^d sum) L2 norm, valid in either
/// space by Parseval. `Lr` evaluates in physical space, `Hs`/`HlogS` in
/// frequency space; the field is transformed internally when tagged the
/// other way.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormKind {
    L2,
    Lr(f64),
    Hs(f64),
    HlogS(f64),
}

/// One complex amplitude per grid point, row-major, tagged with its space.
#[derive(Clone)]
pub struct ComplexField {
    grid: Arc<SpectralGrid>,
    values: Vec<Complex64>,
    space: Space,
}

impl std::fmt::Debug for ComplexField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ComplexField")
            .field("grid", &self.grid)
            .field("space", &self.space)
            .field("len", &self.values.len())
            .finish()
    }
}

impl ComplexField {
    pub fn new(grid: Arc<SpectralGrid>, values: Vec<Complex64>, space: Space) -> Result<Self> {
        if values.len() != grid.total_points() {
            return Err(Error::invalid(format!(
                "value count {} does not match grid total {}",
                values.len(),
                grid.total_points()
            )));
        }
        Ok(ComplexField { grid, values, space })
    }

    pub fn zeros(grid: Arc<SpectralGrid>, space: Space) -> Self {
        let n = grid.total_points();
        ComplexField {
            grid,
            values: vec![Complex64::new(0.0, 0.0); n],
            space,
        }
    }

    /// Sample a physical-space function; the closure receives the point
    /// coordinates (first `dim` entries meaningful).
    pub fn from_fn_physical(
        grid: Arc<SpectralGrid>,
        mut f: impl FnMut(&[f64]) -> Complex64,
    ) -> Self {
        let dim = grid.dim();
        let values = (0..grid.total_points())
            .map(|idx| {
                let c = grid.coords_of(idx);
                f(&c[..dim])
            })
            .collect();
        ComplexField {
            grid,
            values,
            space: Space::Physical,
        }
    }

    /// Build a frequency-space field; the closure receives the wavenumber
    /// vector of each lattice point.
    pub fn from_fn_frequency(
        grid: Arc<SpectralGrid>,
        mut f: impl FnMut(&[f64]) -> Complex64,
    ) -> Self {
        let dim = grid.dim();
        let values = (0..grid.total_points())
            .map(|idx| {
                let xi = grid.freq_of(idx);
                f(&xi[..dim])
            })
            .collect();
        ComplexField {
            grid,
            values,
            space: Space::Frequency,
        }
    }

    pub fn grid(&self) -> &Arc<SpectralGrid> {
        &self.grid
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub(crate) fn into_parts(self) -> (Arc<SpectralGrid>, Vec<Complex64>, Space) {
        (self.grid, self.values, self.space)
    }

    pub(crate) fn from_parts(grid: Arc<SpectralGrid>, values: Vec<Complex64>, space: Space) -> Self {
        ComplexField { grid, values, space }
    }

    /// Unitary DFT, physical -> frequency.
    pub fn forward_transform(&self) -> Result<ComplexField> {
        if self.space != Space::Physical {
            return Err(Error::WrongSpace {
                expected: Space::Physical,
                found: self.space,
            });
        }
        let mut values = self.values.clone();
        transform_inplace(&self.grid, &mut values, FftDirection::Forward);
        Ok(ComplexField {
            grid: self.grid.clone(),
            values,
            space: Space::Frequency,
        })
    }

    /// Unitary DFT, frequency -> physical.
    pub fn inverse_transform(&self) -> Result<ComplexField> {
        if self.space != Space::Frequency {
            return Err(Error::WrongSpace {
                expected: Space::Frequency,
                found: self.space,
            });
        }
        let mut values = self.values.clone();
        transform_inplace(&self.grid, &mut values, FftDirection::Inverse);
        Ok(ComplexField {
            grid: self.grid.clone(),
            values,
            space: Space::Physical,
        })
    }

    /// A physical-space copy (no-op clone when already physical).
    pub fn to_physical(&self) -> ComplexField {
        match self.space {
            Space::Physical => self.clone(),
            Space::Frequency => self.inverse_transform().expect("tag checked"),
        }
    }

    /// A frequency-space copy (no-op clone when already frequency).
    pub fn to_frequency(&self) -> ComplexField {
        match self.space {
            Space::Frequency => self.clone(),
            Space::Physical => self.forward_transform().expect("tag checked"),
        }
    }

    pub fn norm(&self, kind: NormKind) -> Result<f64> {
        match kind {
            NormKind::L2 => Ok(self.l2_norm()),
            NormKind::Lr(r) => {
                if !(r >= 1.0) {
                    return Err(Error::invalid(format!("Lr norm needs r >= 1, got {r}")));
                }
                let phys = self.to_physical();
                Ok(lr_of(&phys.values, self.grid.cell_measure(), r))
            }
            NormKind::Hs(s) => {
                if !(s >= 0.0) {
                    return Err(Error::invalid(format!("Hs norm needs s >= 0, got {s}")));
                }
                let freq = self.to_frequency();
                // (pi/L)^d against continuum-normalized coefficients reduces
                // to h^d against unitary ones, which keeps Hs(0) == L2 exact.
                let w = self.grid.cell_measure();
                let xi_sq = self.grid.xi_sq();
                let mut acc = 0.0f64;
                for (v, &x2) in freq.values.iter().zip(xi_sq) {
                    acc += (1.0 + x2).powf(s) * v.norm_sqr();
                }
                Ok((w * acc).sqrt())
            }
            NormKind::HlogS(s) => {
                if !(s >= 0.0) {
                    return Err(Error::invalid(format!("HlogS norm needs s >= 0, got {s}")));
                }
                let freq = self.to_frequency();
                let w = self.grid.cell_measure();
                let xi_sq = self.grid.xi_sq();
                let mut acc = 0.0f64;
                for (v, &x2) in freq.values.iter().zip(xi_sq) {
                    let lg = (2.0 + x2.sqrt()).ln();
                    acc += lg.powf(2.0 * s) * v.norm_sqr();
                }
                Ok((w * acc).sqrt())
            }
        }
    }

    /// Discrete L2 norm (h^d sum), identical in both spaces by Parseval.
    pub fn l2_norm(&self) -> f64 {
        let sum: f64 = self.values.iter().map(|v| v.norm_sqr()).sum();
        (self.grid.cell_measure() * sum).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    pub fn scaled(&self, c: Complex64) -> ComplexField {
        let values = self.values.iter().map(|v| v * c).collect();
        ComplexField {
            grid: self.grid.clone(),
            values,
            space: self.space,
        }
    }

    /// L2 distance to another field in the same space on the same grid.
    pub fn l2_gap(&self, other: &ComplexField) -> Result<f64> {
        if !self.grid.same_layout(other.grid()) {
            return Err(Error::GridMismatch);
        }
        if self.space != other.space {
            return Err(Error::WrongSpace {
                expected: self.space,
                found: other.space,
            });
        }
        let sum: f64 = self
            .values
            .iter()
            .zip(other.values.iter())
            .map(|(a, b)| (a - b).norm_sqr())
            .sum();
        Ok((self.grid.cell_measure() * sum).sqrt())
    }
}

fn lr_of(values: &[Complex64], cell: f64, r: f64) -> f64 {
    if r.is_infinite() {
        return values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    }
    if r == 2.0 {
        let sum: f64 = values.iter().map(|v| v.norm_sqr()).sum();
        return (cell * sum).sqrt();
    }
    let sum: f64 = values.iter().map(|v| v.norm().powf(r)).sum();
    (cell * sum).powf(1.0 / r)
}

/// In-place unitary DFT along every axis of the row-major buffer.
pub(crate) fn transform_inplace(grid: &SpectralGrid, values: &mut [Complex64], dir: FftDirection) {
    transform_unscaled(grid, values, dir);
    let scale = (values.len() as f64).sqrt().recip();
    for v in values.iter_mut() {
        *v *= scale;
    }
}

/// The raw transform without the 1/sqrt(total) factor. The integrator folds
/// the exact power-of-two 1/total into its multiplier tables instead: the
/// unitary factor 1/sqrt(2^m) is irrational for odd m and rounding it twice
/// per step biases the mass by ~1e-16 each step.
pub(crate) fn transform_unscaled(grid: &SpectralGrid, values: &mut [Complex64], dir: FftDirection) {
    let n = grid.n_per_axis();
    let dim = grid.dim();
    let total = values.len();
    debug_assert_eq!(total, grid.total_points());
    let fft = grid.fft_plan(dir).clone();
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];

    // last axis is contiguous
    for row in values.chunks_exact_mut(n) {
        fft.process_with_scratch(row, &mut scratch);
    }
    // remaining axes via strided gather
    let mut lane = vec![Complex64::new(0.0, 0.0); n];
    for axis in (0..dim.saturating_sub(1)).rev() {
        let stride = n.pow((dim - 1 - axis) as u32);
        let block = stride * n;
        for base in (0..total).step_by(block) {
            for off in 0..stride {
                for (j, slot) in lane.iter_mut().enumerate() {
                    *slot = values[base + off + j * stride];
                }
                fft.process_with_scratch(&mut lane, &mut scratch);
                for (j, slot) in lane.iter().enumerate() {
                    values[base + off + j * stride] = *slot;
                }
            }
        }
    }
}
