//! Initial data constructors: smooth Gaussians, exact plane waves,
//! randomized rough data with a prescribed Sobolev ceiling, and the radial
//! datum with logarithmic spectral decay.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{ComplexField, Space};
use crate::flows::chi;
use crate::grid::SpectralGrid;
use crate::rng::Rng;

/// Serializable description of an initial datum; grid binding happens at
/// realization time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataSpec {
    Gaussian { width: f64, amplitude: f64 },
    PlaneWave { mode: Vec<i64>, amplitude: f64 },
    HsRough { s: f64, seed: u64, normalization: f64 },
    PhiAlpha { alpha: f64, normalization: f64 },
}

impl DataSpec {
    pub fn realize(&self, grid: &Arc<SpectralGrid>) -> Result<ComplexField> {
        match self {
            DataSpec::Gaussian { width, amplitude } => gaussian(grid, *width, *amplitude),
            DataSpec::PlaneWave { mode, amplitude } => plane_wave(grid, mode, *amplitude),
            DataSpec::HsRough { s, seed, normalization } => {
                hs_rough(grid, *s, *seed, *normalization)
            }
            DataSpec::PhiAlpha { alpha, normalization } => {
                phi_alpha(grid, *alpha, *normalization)
            }
        }
    }

    /// Rough data gets the looser reference-oracle gap ceiling.
    pub fn is_rough(&self) -> bool {
        matches!(self, DataSpec::HsRough { .. } | DataSpec::PhiAlpha { .. })
    }

    pub fn label(&self) -> String {
        match self {
            DataSpec::Gaussian { width, amplitude } => format!("gaussian(w={width},A={amplitude})"),
            DataSpec::PlaneWave { mode, amplitude } => format!("plane_wave(m={mode:?},A={amplitude})"),
            DataSpec::HsRough { s, seed, .. } => format!("hs_rough(s={s},seed={seed})"),
            DataSpec::PhiAlpha { alpha, .. } => format!("phi_alpha(alpha={alpha})"),
        }
    }
}

/// A exp(-|x|^2 / w^2) sampled on the grid.
pub fn gaussian(grid: &Arc<SpectralGrid>, width: f64, amplitude: f64) -> Result<ComplexField> {
    if !(width > 0.0) {
        return Err(Error::invalid(format!("gaussian width must be positive, got {width}")));
    }
    let inv_w2 = 1.0 / (width * width);
    Ok(ComplexField::from_fn_physical(grid.clone(), |x| {
        let r2: f64 = x.iter().map(|c| c * c).sum();
        Complex64::new(amplitude * (-r2 * inv_w2).exp(), 0.0)
    }))
}

fn mode_wavenumber(grid: &SpectralGrid, mode: &[i64]) -> Result<Vec<f64>> {
    if mode.len() != grid.dim() {
        return Err(Error::invalid(format!(
            "mode has {} components for a {}-d grid",
            mode.len(),
            grid.dim()
        )));
    }
    let half = (grid.n_per_axis() / 2) as i64;
    for &m in mode {
        if m < -half || m >= half {
            return Err(Error::invalid(format!(
                "mode component {m} outside representable range [{}, {})",
                -half, half
            )));
        }
    }
    let base = std::f64::consts::PI / grid.half_width();
    Ok(mode.iter().map(|&m| base * m as f64).collect())
}

/// A e^{i k.x} with k = pi*mode/L on the grid's wavenumber lattice.
pub fn plane_wave(grid: &Arc<SpectralGrid>, mode: &[i64], amplitude: f64) -> Result<ComplexField> {
    let k = mode_wavenumber(grid, mode)?;
    Ok(ComplexField::from_fn_physical(grid.clone(), |x| {
        let phase: f64 = x.iter().zip(&k).map(|(xi, ki)| xi * ki).sum();
        Complex64::from_polar(amplitude, phase)
    }))
}

/// Exact solution A e^{i(k.x - (|k|^2 + lambda A^p) t)} for constant-modulus
/// plane-wave data (A > 0); verified by substitution since |u| = A.
pub fn exact_plane_wave(
    grid: &Arc<SpectralGrid>,
    mode: &[i64],
    amplitude: f64,
    lambda: f64,
    p: f64,
    t: f64,
) -> Result<ComplexField> {
    if !(amplitude > 0.0) {
        return Err(Error::invalid(format!(
            "plane-wave oracle needs a positive amplitude, got {amplitude}"
        )));
    }
    let k = mode_wavenumber(grid, mode)?;
    let k_sq: f64 = k.iter().map(|ki| ki * ki).sum();
    let rate = k_sq + lambda * amplitude.powf(p);
    Ok(ComplexField::from_fn_physical(grid.clone(), |x| {
        let phase: f64 = x.iter().zip(&k).map(|(xi, ki)| xi * ki).sum();
        Complex64::from_polar(amplitude, phase - rate * t)
    }))
}

/// Spectrum magnitude of the rough family: (1+|xi|)^{-(s+d/2)} log(2+|xi|)^{-1}.
/// The extra log factor keeps the datum inside H^s itself, not just H^{s-eps}.
pub fn hs_rough_spectrum(s: f64, dim: usize, r: f64) -> f64 {
    (1.0 + r).powf(-(s + dim as f64 / 2.0)) / (2.0 + r).ln()
}

/// Real-valued randomized datum lying in H^s and escaping every H^{s+delta}
/// under grid refinement: formula magnitudes, uniform random phases,
/// conjugate-symmetric spectrum, L2-normalized.
pub fn hs_rough(
    grid: &Arc<SpectralGrid>,
    s: f64,
    seed: u64,
    normalization: f64,
) -> Result<ComplexField> {
    hs_rough_hat(grid, s, seed, normalization)?.inverse_transform()
}

/// The frequency-space state of [`hs_rough`] before the inverse transform.
pub fn hs_rough_hat(
    grid: &Arc<SpectralGrid>,
    s: f64,
    seed: u64,
    normalization: f64,
) -> Result<ComplexField> {
    if !(s >= 0.0) {
        return Err(Error::invalid(format!("hs_rough needs s >= 0, got {s}")));
    }
    if !(normalization > 0.0) {
        return Err(Error::invalid("normalization must be positive".to_string()));
    }
    let n = grid.n_per_axis();
    let dim = grid.dim();
    let total = grid.total_points();
    let mut rng = Rng::new(seed).fork("hs_rough");
    let mut hat = vec![Complex64::new(0.0, 0.0); total];

    for idx in 0..total {
        let mirror = mirror_index(grid, idx);
        if idx > mirror {
            continue;
        }
        let rho = hs_rough_spectrum(s, dim, grid.xi_sq()[idx].sqrt());
        if idx == mirror {
            // self-conjugate bins (0 and Nyquist per axis) stay real
            hat[idx] = Complex64::new(rho, 0.0);
        } else {
            let theta = rng.range(0.0, 2.0 * std::f64::consts::PI);
            hat[idx] = Complex64::from_polar(rho, theta);
            hat[mirror] = Complex64::from_polar(rho, -theta);
        }
    }
    let _ = n;

    normalized_from_spectrum(grid, hat, normalization)
}

/// Radial datum with purely logarithmic spectral decay margin:
/// spectrum C (1+|xi|)^{-d/2} log(2+|xi|)^{-(1+alpha)/2}, C fixed by the
/// requested L2 norm.
pub fn phi_alpha(grid: &Arc<SpectralGrid>, alpha: f64, normalization: f64) -> Result<ComplexField> {
    phi_alpha_hat(grid, alpha, normalization)?.inverse_transform()
}

/// The frequency-space state of [`phi_alpha`] before the inverse transform.
pub fn phi_alpha_hat(
    grid: &Arc<SpectralGrid>,
    alpha: f64,
    normalization: f64,
) -> Result<ComplexField> {
    if !(alpha > 0.0) {
        return Err(Error::invalid(format!("phi_alpha needs alpha > 0, got {alpha}")));
    }
    if !(normalization > 0.0) {
        return Err(Error::invalid("normalization must be positive".to_string()));
    }
    let dim = grid.dim();
    let hat: Vec<Complex64> = grid
        .xi_sq()
        .iter()
        .map(|&x2| Complex64::new(phi_alpha_spectrum(alpha, dim, x2.sqrt()), 0.0))
        .collect();
    normalized_from_spectrum(grid, hat, normalization)
}

/// (1+r)^{-d/2} log(2+r)^{-(1+alpha)/2}, the radial spectrum profile.
pub fn phi_alpha_spectrum(alpha: f64, dim: usize, r: f64) -> f64 {
    (1.0 + r).powf(-(dim as f64) / 2.0) * (2.0 + r).ln().powf(-(1.0 + alpha) / 2.0)
}

fn normalized_from_spectrum(
    grid: &Arc<SpectralGrid>,
    hat: Vec<Complex64>,
    normalization: f64,
) -> Result<ComplexField> {
    let freq = ComplexField::new(grid.clone(), hat, Space::Frequency)?;
    let cur = freq.l2_norm();
    if cur == 0.0 {
        return Err(Error::invalid("spectrum is identically zero".to_string()));
    }
    Ok(freq.scaled(Complex64::new(normalization / cur, 0.0)))
}

fn mirror_index(grid: &SpectralGrid, idx: usize) -> usize {
    let n = grid.n_per_axis();
    let bins = grid.bins_of(idx);
    let mut out = 0usize;
    for &b in bins.iter().take(grid.dim()) {
        let mb = if b == 0 { 0 } else { n - b };
        out = out * n + mb;
    }
    out
}

/// Relative filter tail ||phi_alpha - P(s) phi_alpha|| / ||phi_alpha|| of the
/// continuum datum, by radial quadrature of the spectrum formula with the
/// slowly convergent far tail closed analytically. This is the R^d value;
/// lattices truncate the reservoir and report a steeper decay instead.
pub fn phi_alpha_tail_fraction(dim: usize, alpha: f64, scale: f64) -> Result<f64> {
    const R_SPLIT: f64 = 1e12;
    let (num, den) = phi_alpha_tail_parts(dim, alpha, scale, R_SPLIT)?;
    // beyond R_SPLIT the integrand is log(r)^-(1+alpha)/r to relative
    // accuracy O(d/R), and the filter complement is identically 1 there
    let closure = R_SPLIT.ln().powf(-alpha) / alpha;
    Ok(((num + closure) / (den + closure)).sqrt())
}

/// Same quadrature with the spectrum truncated at |xi| = r_max, matching a
/// finite lattice.
pub fn phi_alpha_tail_fraction_to(
    dim: usize,
    alpha: f64,
    scale: f64,
    r_max: f64,
) -> Result<f64> {
    let (num, den) = phi_alpha_tail_parts(dim, alpha, scale, r_max)?;
    Ok((num / den).sqrt())
}

fn phi_alpha_tail_parts(dim: usize, alpha: f64, scale: f64, r_max: f64) -> Result<(f64, f64)> {
    if !(1..=3).contains(&dim) {
        return Err(Error::invalid(format!("dim must be 1..=3, got {dim}")));
    }
    if !(alpha > 0.0) || !(scale > 0.0) || !(r_max > 0.0) {
        return Err(Error::invalid("alpha, scale and r_max must be positive".to_string()));
    }
    let root = scale.sqrt();
    let d = dim as f64;
    // integrate rho^2 r^(d-1) dr in u = ln(1+r)
    let u_max = (1.0 + r_max).ln();
    let steps = 1 << 19;
    let du = u_max / steps as f64;
    let integrand = |u: f64, filtered: bool| -> f64 {
        let r = u.exp_m1();
        let rho = phi_alpha_spectrum(alpha, dim, r);
        let cut = if filtered {
            let c = 1.0 - chi(root * r);
            c * c
        } else {
            1.0
        };
        cut * rho * rho * r.powf(d - 1.0) * u.exp()
    };
    let simpson = |filtered: bool| -> f64 {
        let mut acc = integrand(0.0, filtered) + integrand(u_max, filtered);
        for i in 1..steps {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * integrand(i as f64 * du, filtered);
        }
        acc * du / 3.0
    };
    Ok((simpson(true), simpson(false)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::NormKind;
    use crate::flows::{apply_filter, FilterKernel};
    use std::f64::consts::PI;

    fn grid(dim: usize, n: usize, l: f64) -> Arc<SpectralGrid> {
        SpectralGrid::new(dim, n, l).unwrap()
    }

    #[test]
    fn gaussian_norm_and_center() {
        let g = grid(1, 1024, 16.0);
        let f = gaussian(&g, 1.0, 1.0).unwrap();
        assert!((f.l2_norm() - (PI / 2.0).powf(0.25)).abs() < 1e-6);
        // value at x = 0 is the amplitude
        let idx0 = (0..g.total_points())
            .find(|&i| g.coords_of(i)[0] == 0.0)
            .unwrap();
        assert!((f.values()[idx0] - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        assert!(gaussian(&g, 0.0, 1.0).is_err());
    }

    #[test]
    fn gaussian_spectrum_even() {
        let g = grid(1, 256, 12.0);
        let f = gaussian(&g, 1.3, 0.7).unwrap();
        let hat = f.forward_transform().unwrap();
        for idx in 0..g.total_points() {
            let m = super::mirror_index(&g, idx);
            let a = hat.values()[idx];
            let b = hat.values()[m];
            assert!((a - b).norm() <= 1e-12 * hat.max_abs());
        }
    }

    #[test]
    fn plane_wave_matches_oracle_at_t0() {
        let g = grid(1, 32, PI);
        let a = plane_wave(&g, &[2], 1.0).unwrap();
        let b = exact_plane_wave(&g, &[2], 1.0, 1.0, 2.0, 0.0).unwrap();
        assert!(a.l2_gap(&b).unwrap() < 1e-14);
    }

    #[test]
    fn plane_wave_oracle_phase_rate() {
        // k=2, A=1, lambda=1, p=2: phase rate |k|^2 + lambda A^p = 5
        let g = grid(1, 32, PI);
        let u1 = exact_plane_wave(&g, &[2], 1.0, 1.0, 2.0, 1.0).unwrap();
        let expect = plane_wave(&g, &[2], 1.0)
            .unwrap()
            .scaled(Complex64::from_polar(1.0, -5.0));
        assert!(u1.l2_gap(&expect).unwrap() < 1e-12);

        // k=0, lambda=-1: pure rotation e^{it}
        let u2 = exact_plane_wave(&g, &[0], 1.0, -1.0, 2.0, 0.7).unwrap();
        let expect2 = plane_wave(&g, &[0], 1.0)
            .unwrap()
            .scaled(Complex64::from_polar(1.0, 0.7));
        assert!(u2.l2_gap(&expect2).unwrap() < 1e-12);
    }

    #[test]
    fn plane_wave_mode_validation() {
        let g = grid(1, 8, PI);
        assert!(plane_wave(&g, &[4], 1.0).is_err()); // N/2 not representable
        assert!(plane_wave(&g, &[-4], 1.0).is_ok());
        assert!(plane_wave(&g, &[1, 1], 1.0).is_err()); // dim mismatch
        assert!(exact_plane_wave(&g, &[1], 0.0, 1.0, 2.0, 0.1).is_err());
    }

    #[test]
    fn hs_rough_normalization_and_determinism() {
        let g = grid(1, 256, 8.0);
        let a = hs_rough(&g, 0.5, 42, 1.0).unwrap();
        let b = hs_rough(&g, 0.5, 42, 1.0).unwrap();
        assert_eq!(a.values(), b.values());
        assert!((a.norm(NormKind::L2).unwrap() - 1.0).abs() < 1e-12);
        assert!((a.norm(NormKind::Hs(0.0)).unwrap() - 1.0).abs() < 1e-12);
        let c = hs_rough(&g, 0.5, 43, 1.0).unwrap();
        assert!(a.l2_gap(&c).unwrap() > 1e-3);
    }

    #[test]
    fn hs_rough_is_real() {
        let g = grid(2, 32, 4.0);
        let f = hs_rough(&g, 1.0, 7, 2.0).unwrap();
        let max_im = f.values().iter().map(|v| v.im.abs()).fold(0.0, f64::max);
        assert!(max_im <= 1e-12 * f.max_abs());
    }

    #[test]
    fn hs_rough_spectrum_matches_formula() {
        let g = grid(1, 128, 6.0);
        let hat = hs_rough_hat(&g, 0.5, 11, 1.0).unwrap();
        // pick the realized normalization constant off the DC bin
        let rho0 = hs_rough_spectrum(0.5, 1, 0.0);
        let c = hat.values()[0].re / rho0;
        for idx in 0..g.total_points() {
            let r = g.xi_sq()[idx].sqrt();
            let expect = c * hs_rough_spectrum(0.5, 1, r);
            let got = hat.values()[idx].norm();
            assert!(
                (got - expect).abs() <= 1e-14 * expect.max(1e-300),
                "idx {idx}: {got} vs {expect}"
            );
        }
    }

    #[test]
    fn hs_rough_escapes_higher_sobolev() {
        // H^{s+1/2} mass grows under grid doubling while H^s stays put;
        // a small box pushes the lattice ceiling high enough that the
        // log-damped growth is past its slow start
        let mut prev_hs = None;
        let mut prev_up = None;
        for n in [256usize, 512, 1024] {
            let g = grid(1, n, 0.5);
            let f = hs_rough(&g, 0.5, 3, 1.0).unwrap();
            let hs = f.norm(NormKind::Hs(0.5)).unwrap();
            let up = f.norm(NormKind::Hs(1.0)).unwrap();
            if let (Some(ph), Some(pu)) = (prev_hs, prev_up) {
                let hs_ratio: f64 = hs / ph;
                let up_ratio: f64 = up / pu;
                assert!(up_ratio > 1.2, "H^{{s+1/2}} ratio {up_ratio} at n={n}");
                assert!(hs_ratio < 1.1, "H^s ratio {hs_ratio} at n={n}");
            }
            prev_hs = Some(hs);
            prev_up = Some(up);
        }
    }

    #[test]
    fn phi_alpha_radial_symmetry_orbit() {
        let g = grid(2, 32, 4.0);
        let f = phi_alpha(&g, 1.0, 1.0).unwrap();
        let n = g.n_per_axis();
        // dihedral orbit of (i,j): swaps and reflections share |x|
        for (i, j) in [(3usize, 7usize), (5, 12), (1, 9)] {
            let v = f.values()[i * n + j];
            let orbit = [
                (j, i),
                ((n - i) % n, j),
                (i, (n - j) % n),
                ((n - i) % n, (n - j) % n),
                ((n - j) % n, i),
            ];
            for (a, b) in orbit {
                let w = f.values()[a * n + b];
                assert!((v - w).norm() <= 1e-12 * f.max_abs(), "({i},{j}) vs ({a},{b})");
            }
        }
    }

    #[test]
    fn phi_alpha_spectrum_matches_formula() {
        let g = grid(2, 32, 3.0);
        let hat = phi_alpha_hat(&g, 1.5, 2.0).unwrap();
        let c = hat.values()[0].re / phi_alpha_spectrum(1.5, 2, 0.0);
        for idx in 0..g.total_points() {
            let r = g.xi_sq()[idx].sqrt();
            let expect = c * phi_alpha_spectrum(1.5, 2, r);
            assert!((hat.values()[idx].re - expect).abs() <= 1e-14 * expect.max(1e-300));
            assert!(hat.values()[idx].im.abs() <= 1e-14 * expect.max(1e-300));
        }
    }

    #[test]
    fn phi_alpha_log_sobolev_bounded_under_doubling() {
        // with the log-weighted norm the mass settles for s below alpha
        let alpha = 1.0;
        for s in [0.4, 0.75] {
            let mut prev = None;
            for n in [128usize, 256, 512, 1024] {
                let g = grid(1, n, 8.0);
                let f = phi_alpha(&g, alpha, 1.0).unwrap();
                let v = f.norm(NormKind::HlogS(s * alpha)).unwrap();
                if let Some(p) = prev {
                    let ratio: f64 = v / p;
                    assert!(ratio < 1.15, "s={s}: ratio {ratio} at n={n}");
                }
                prev = Some(v);
            }
        }
    }

    #[test]
    fn phi_alpha_grid_tail_decreases_and_tracks_quadrature() {
        let g = grid(2, 512, PI);
        let f = phi_alpha(&g, 1.0, 1.0).unwrap();
        // lattice radius where the square truncation starts to bite
        let inscribed = PI * (g.n_per_axis() / 2) as f64 / g.half_width();
        let mut prev = f64::INFINITY;
        for s in [1e-1, 3e-2, 1e-2] {
            let k = FilterKernel::new(g.clone(), s).unwrap();
            let tail = apply_filter(&f, &k).unwrap().l2_gap(&f).unwrap();
            assert!(tail < prev, "tail not decreasing at s={s}");
            prev = tail;
            // against the truncation-matched quadrature (square lattice vs
            // disk leaves a corner discrepancy, hence the loose band)
            let oracle = phi_alpha_tail_fraction_to(2, 1.0, s, inscribed).unwrap();
            assert!(
                (tail - oracle).abs() / oracle < 0.25,
                "s={s}: grid {tail} vs quadrature {oracle}"
            );
        }
    }

    #[test]
    fn phi_alpha_tail_slope_follows_log_decay() {
        // || phi_alpha - P(s) phi_alpha || = C (-log s)^(-alpha/2)
        // asymptotically; over s in [1e-4, 1e-1] the smooth shell and the
        // log reservoir shift the finite-range fit to about -0.37 (d=1) /
        // -0.35 (d=2). Pin those values: they regression-protect the
        // quadrature, and the asymptotic -1/2 is only approached for
        // -log s beyond any sweepable range.
        let expect = [(1usize, -0.369), (2usize, -0.353)];
        for (dim, pinned) in expect {
            let mut xs = Vec::new();
            let mut ys = Vec::new();
            let mut prev = 0.0;
            for i in 0..13 {
                let s = 1e-4 * (1e3f64).powf(i as f64 / 12.0);
                let tail = phi_alpha_tail_fraction(dim, 1.0, s).unwrap();
                assert!(tail > prev, "tail must grow with s");
                prev = tail;
                xs.push((-s.ln()).ln());
                ys.push(tail.ln());
            }
            let slope = slope_of(&xs, &ys);
            assert!(
                (slope - pinned).abs() <= 0.02,
                "d={dim}: slope {slope} vs pinned {pinned}"
            );
        }
    }

    fn slope_of(xs: &[f64], ys: &[f64]) -> f64 {
        let n = xs.len() as f64;
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let num: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let den: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
        num / den
    }

    #[test]
    fn data_spec_realize_round_trip() {
        let g = grid(1, 64, 4.0);
        let spec = DataSpec::HsRough { s: 0.5, seed: 5, normalization: 1.0 };
        let json = serde_json::to_string(&spec).unwrap();
        let back: DataSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(spec, back);
        let a = spec.realize(&g).unwrap();
        let b = back.realize(&g).unwrap();
        assert_eq!(a.values(), b.values());
        assert!(spec.is_rough());
        assert!(!DataSpec::Gaussian { width: 1.0, amplitude: 1.0 }.is_rough());
    }
}
