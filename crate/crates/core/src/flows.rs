//! The two exact flows of the split equation and the smooth frequency
//! filter: S(t) multiplies frequencies by exp(-i t |xi|^2), N(t) rotates
//! each amplitude by exp(-i t lambda |u|^p), and P(s) multiplies the
//! spectrum by chi(sqrt(s) xi).

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::{ComplexField, Space};
use crate::grid::SpectralGrid;

/// Smooth radial cutoff: 1 on [0,1], 0 on [2,inf), exp-mollifier bridge in
/// between (symmetric about r = 3/2, so chi(3/2) = 1/2).
pub fn chi(r: f64) -> f64 {
    debug_assert!(r >= 0.0);
    if r <= 1.0 {
        1.0
    } else if r >= 2.0 {
        0.0
    } else {
        let a = bump(2.0 - r);
        let b = bump(r - 1.0);
        a / (a + b)
    }
}

fn bump(t: f64) -> f64 {
    if t > 0.0 {
        (-1.0 / t).exp()
    } else {
        0.0
    }
}

/// Precomputed multiplier chi(sqrt(scale) |xi|) on a grid's frequency lattice.
#[derive(Clone)]
pub struct FilterKernel {
    grid: Arc<SpectralGrid>,
    scale: f64,
    weights: Vec<f64>,
}

impl FilterKernel {
    pub fn new(grid: Arc<SpectralGrid>, scale: f64) -> Result<Self> {
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::invalid(format!(
                "filter scale must be positive, got {scale}"
            )));
        }
        let root = scale.sqrt();
        let weights = grid.xi_sq().iter().map(|&x2| chi(root * x2.sqrt())).collect();
        Ok(FilterKernel { grid, scale, weights })
    }

    pub fn grid(&self) -> &Arc<SpectralGrid> {
        &self.grid
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// True when the pass ball covers the whole lattice.
    pub fn is_all_pass(&self) -> bool {
        self.weights.iter().all(|&w| w == 1.0)
    }
}

/// Pointwise spectral multiply by the kernel weights; the output carries the
/// input's space tag.
pub fn apply_filter(f: &ComplexField, kernel: &FilterKernel) -> Result<ComplexField> {
    if !f.grid().same_layout(kernel.grid()) {
        return Err(Error::GridMismatch);
    }
    match f.space() {
        Space::Frequency => {
            let mut out = f.clone();
            for (v, &w) in out.values_mut().iter_mut().zip(kernel.weights()) {
                *v *= w;
            }
            Ok(out)
        }
        Space::Physical => {
            let mut hat = f.forward_transform()?;
            for (v, &w) in hat.values_mut().iter_mut().zip(kernel.weights()) {
                *v *= w;
            }
            hat.inverse_transform()
        }
    }
}

/// Exact linear propagator S(t): frequency multiply by exp(-i t |xi|^2).
/// Defined for both signs of t; the output keeps the input's space tag.
pub fn linear_flow(f: &ComplexField, t: f64) -> ComplexField {
    let apply = |hat: &mut ComplexField| {
        let xi_sq = hat.grid().clone();
        let xi_sq = xi_sq.xi_sq();
        for (v, &x2) in hat.values_mut().iter_mut().zip(xi_sq) {
            *v *= Complex64::from_polar(1.0, -t * x2);
        }
    };
    match f.space() {
        Space::Frequency => {
            let mut hat = f.clone();
            apply(&mut hat);
            hat
        }
        Space::Physical => {
            let mut hat = f.forward_transform().expect("tag checked");
            apply(&mut hat);
            hat.inverse_transform().expect("tag checked")
        }
    }
}

/// Exact nonlinear propagator N(t): u -> exp(-i t lambda |u|^p) u, pointwise
/// in physical space.
pub fn nonlinear_flow(f: &ComplexField, t: f64, lambda: f64, p: f64) -> Result<ComplexField> {
    if f.space() != Space::Physical {
        return Err(Error::WrongSpace {
            expected: Space::Physical,
            found: f.space(),
        });
    }
    if !(p > 0.0) {
        return Err(Error::invalid(format!("nonlinearity exponent p must be positive, got {p}")));
    }
    let mut out = f.clone();
    nonlinear_inplace(out.values_mut(), t, lambda, p);
    Ok(out)
}

pub(crate) fn nonlinear_inplace(values: &mut [Complex64], t: f64, lambda: f64, p: f64) {
    if t == 0.0 {
        return;
    }
    let half_p = 0.5 * p;
    for v in values.iter_mut() {
        let m2 = v.norm_sqr();
        let amp_p = if p == 2.0 { m2 } else { m2.powf(half_p) };
        *v *= Complex64::from_polar(1.0, -t * lambda * amp_p);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::NormKind;
    use crate::rng::Rng;
    use std::f64::consts::PI;

    fn grid1(n: usize, l: f64) -> Arc<SpectralGrid> {
        SpectralGrid::new(1, n, l).unwrap()
    }

    fn mode(grid: &Arc<SpectralGrid>, k: f64) -> ComplexField {
        ComplexField::from_fn_physical(grid.clone(), |x| Complex64::new(0.0, k * x[0]).exp())
    }

    fn random_field(grid: &Arc<SpectralGrid>, seed: u64) -> ComplexField {
        let mut rng = Rng::new(seed);
        let values = (0..grid.total_points())
            .map(|_| Complex64::new(rng.range(-1.0, 1.0), rng.range(-1.0, 1.0)))
            .collect();
        ComplexField::new(grid.clone(), values, Space::Physical).unwrap()
    }

    #[test]
    fn chi_plateau_support_midpoint() {
        assert_eq!(chi(0.0), 1.0);
        assert_eq!(chi(0.5), 1.0);
        assert_eq!(chi(1.0), 1.0);
        assert_eq!(chi(2.0), 0.0);
        assert_eq!(chi(2.7), 0.0);
        assert!((chi(1.5) - 0.5).abs() < 1e-15);
        // monotone on the bridge
        let mut prev = 1.0;
        for i in 0..=100 {
            let r = 1.0 + i as f64 / 100.0;
            let c = chi(r);
            assert!(c <= prev + 1e-15);
            assert!((0.0..=1.0).contains(&c));
            prev = c;
        }
    }

    #[test]
    fn kernel_weights_follow_chi() {
        let g = grid1(8, PI);
        let k = FilterKernel::new(g.clone(), 1.0).unwrap();
        for (idx, &w) in k.weights().iter().enumerate() {
            let xi = g.freq_of(idx)[0].abs();
            assert_eq!(w, chi(xi));
        }
        // |xi| <= 1 passes untouched
        for (idx, &w) in k.weights().iter().enumerate() {
            if g.freq_of(idx)[0].abs() <= 1.0 {
                assert_eq!(w, 1.0);
            }
        }
    }

    #[test]
    fn kernel_all_pass_when_wider_than_grid() {
        let g = grid1(8, PI);
        // pass radius 1/sqrt(s) beyond max |xi| = 4
        let k = FilterKernel::new(g, 1.0 / 64.0).unwrap();
        assert!(k.is_all_pass());
    }

    #[test]
    fn kernel_support_boundary() {
        let g = grid1(8, PI);
        let k = FilterKernel::new(g.clone(), 4.0).unwrap();
        let idx1 = (0..g.total_points())
            .find(|&i| (g.freq_of(i)[0] - 1.0).abs() < 1e-12)
            .unwrap();
        assert_eq!(k.weights()[idx1], 0.0); // chi(2) = 0
    }

    #[test]
    fn kernel_rejects_bad_scale() {
        let g = grid1(8, 1.0);
        assert!(FilterKernel::new(g.clone(), 0.0).is_err());
        assert!(FilterKernel::new(g, -1.0).is_err());
    }

    #[test]
    fn filter_annihilates_stopped_mode() {
        let g = grid1(8, PI);
        let k = FilterKernel::new(g.clone(), 4.0).unwrap(); // kills |xi| >= 1
        let f = mode(&g, 2.0);
        let out = apply_filter(&f, &k).unwrap();
        assert!(out.max_abs() < 1e-13);
    }

    #[test]
    fn filter_transparent_in_pass_ball() {
        let g = grid1(64, PI);
        let k = FilterKernel::new(g.clone(), 1e-4).unwrap(); // pass radius 100
        let f = random_field(&g, 5);
        let out = apply_filter(&f, &k).unwrap();
        let rel = out.l2_gap(&f).unwrap() / f.l2_norm();
        assert!(rel <= 1e-13);
    }

    #[test]
    fn filter_never_increases_l2() {
        let g = grid1(64, 2.0);
        let k = FilterKernel::new(g.clone(), 0.05).unwrap();
        for seed in 0..20 {
            let f = random_field(&g, seed);
            let out = apply_filter(&f, &k).unwrap();
            assert!(out.l2_norm() <= f.l2_norm() * (1.0 + 1e-14));
        }
    }

    #[test]
    fn filter_grid_mismatch() {
        let g1 = grid1(8, 1.0);
        let g2 = grid1(16, 1.0);
        let k = FilterKernel::new(g2, 1.0).unwrap();
        let f = ComplexField::zeros(g1, Space::Physical);
        assert!(matches!(apply_filter(&f, &k), Err(Error::GridMismatch)));
    }

    #[test]
    fn filters_commute_and_idempotent_outside_shell() {
        let g = grid1(32, PI);
        let ka = FilterKernel::new(g.clone(), 0.3).unwrap();
        let kb = FilterKernel::new(g.clone(), 0.9).unwrap();
        let f = random_field(&g, 11).to_frequency();
        let ab = apply_filter(&apply_filter(&f, &ka).unwrap(), &kb).unwrap();
        let ba = apply_filter(&apply_filter(&f, &kb).unwrap(), &ka).unwrap();
        assert!(ab.l2_gap(&ba).unwrap() <= 1e-15 * f.l2_norm());
        // double application only moves the transition shell
        let once = apply_filter(&f, &ka).unwrap();
        let twice = apply_filter(&once, &ka).unwrap();
        for (idx, (a, b)) in once.values().iter().zip(twice.values()).enumerate() {
            let r = ka.scale().sqrt() * g.xi_sq()[idx].sqrt();
            if !(1.0..2.0).contains(&r) {
                assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn linear_flow_zero_time_is_identity() {
        let g = grid1(32, 1.5);
        let f = random_field(&g, 2);
        let out = linear_flow(&f, 0.0);
        let rel = out.l2_gap(&f).unwrap() / f.l2_norm();
        assert!(rel <= 1e-13);
    }

    #[test]
    fn linear_flow_phase_on_mode() {
        // e^{i2x}: |xi|^2 = 4 so S(0.1) multiplies by e^{-0.4 i}
        let g = grid1(16, PI);
        let f = mode(&g, 2.0);
        let out = linear_flow(&f, 0.1);
        let expect = f.scaled(Complex64::from_polar(1.0, -0.4));
        assert!(out.l2_gap(&expect).unwrap() < 1e-12);
    }

    #[test]
    fn linear_flow_unitary_group() {
        let g = grid1(64, 3.0);
        let f = random_field(&g, 8);
        let fwd = linear_flow(&f, 0.37);
        assert!((fwd.l2_norm() - f.l2_norm()).abs() <= 1e-13 * f.l2_norm());
        let back = linear_flow(&fwd, -0.37);
        assert!(back.l2_gap(&f).unwrap() / f.l2_norm() <= 1e-12);
        // group law
        let ab = linear_flow(&linear_flow(&f, 0.2), 0.3);
        let once = linear_flow(&f, 0.5);
        assert!(ab.l2_gap(&once).unwrap() / f.l2_norm() <= 1e-12);
    }

    #[test]
    fn filter_commutes_with_linear_flow() {
        let g = grid1(32, 2.0);
        let k = FilterKernel::new(g.clone(), 0.2).unwrap();
        let f = random_field(&g, 21).to_frequency();
        let a = apply_filter(&linear_flow(&f, 0.4), &k).unwrap();
        let b = linear_flow(&apply_filter(&f, &k).unwrap(), 0.4);
        assert!(a.l2_gap(&b).unwrap() <= 1e-15 * f.l2_norm());
    }

    #[test]
    fn nonlinear_flow_zero_time_and_constant_field() {
        let g = grid1(16, 1.0);
        let f = random_field(&g, 4);
        let id = nonlinear_flow(&f, 0.0, 1.0, 2.0).unwrap();
        assert_eq!(id.values(), f.values());

        // u = 1, lambda = 1, p = 2, t = pi: exp(-i pi) = -1
        let ones = ComplexField::from_fn_physical(g, |_| Complex64::new(1.0, 0.0));
        let out = nonlinear_flow(&ones, PI, 1.0, 2.0).unwrap();
        for v in out.values() {
            assert!((v + Complex64::new(1.0, 0.0)).norm() < 1e-14);
        }
    }

    #[test]
    fn nonlinear_flow_pure_phase() {
        let g = grid1(64, 2.0);
        let f = random_field(&g, 6);
        let out = nonlinear_flow(&f, 0.7, -1.0, 1.5).unwrap();
        for (a, b) in out.values().iter().zip(f.values()) {
            assert!((a.norm() - b.norm()).abs() <= 1e-15 * b.norm().max(1e-300));
        }
        assert!((out.l2_norm() - f.l2_norm()).abs() <= 1e-13 * f.l2_norm());
    }

    #[test]
    fn nonlinear_flow_group_law() {
        let g = grid1(32, 1.0);
        let f = random_field(&g, 10);
        let two = nonlinear_flow(&nonlinear_flow(&f, 0.25, 1.0, 2.0).unwrap(), 0.25, 1.0, 2.0)
            .unwrap();
        let one = nonlinear_flow(&f, 0.5, 1.0, 2.0).unwrap();
        assert!(two.l2_gap(&one).unwrap() / f.l2_norm() <= 1e-13);
    }

    #[test]
    fn nonlinear_flow_rejects_frequency_input() {
        let g = grid1(8, 1.0);
        let f = ComplexField::zeros(g, Space::Frequency);
        assert!(matches!(
            nonlinear_flow(&f, 0.1, 1.0, 2.0),
            Err(Error::WrongSpace { .. })
        ));
    }

    #[test]
    fn mass_conserved_by_both_flows() {
        let g = grid1(128, 4.0);
        let f = random_field(&g, 13);
        let m = f.norm(NormKind::L2).unwrap();
        let s = linear_flow(&f, 0.123);
        let n = nonlinear_flow(&f, 0.123, -1.0, 2.5).unwrap();
        assert!((s.l2_norm() - m).abs() <= 1e-13 * m);
        assert!((n.l2_norm() - m).abs() <= 1e-13 * m);
    }
}
