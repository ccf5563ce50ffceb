//! Error measurement and diagnostics: admissible-pair arithmetic, discrete
//! space-time norms, convergence-order fitting, the radial-data error bound
//! evaluator, and the pointwise mean-value constants.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{ComplexField, NormKind};
use crate::flows::{apply_filter, FilterKernel};
use crate::split::Trajectory;

const PAIR_TOL: f64 = 1e-9;

/// Exponent pair (q, r) with 2/q + d/r = d/2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdmissiblePair {
    pub q: f64,
    pub r: f64,
    pub dim: usize,
}

/// Schrodinger admissibility: 2/q + d/r = d/2 with 2 <= q, r <= infinity,
/// excluding (q, r, d) = (2, inf, 2).
pub fn admissible_check(q: f64, r: f64, d: usize) -> bool {
    if !(q >= 2.0 - PAIR_TOL) || !(r >= 2.0 - PAIR_TOL) {
        return false;
    }
    let lhs = inv(q) * 2.0 + inv(r) * d as f64;
    if (lhs - d as f64 / 2.0).abs() > PAIR_TOL {
        return false;
    }
    !((q - 2.0).abs() <= PAIR_TOL && r.is_infinite() && d == 2)
}

/// Extended range available for radial data in d >= 2:
/// 2/q + (2d-1)/r <= (2d-1)/2, q >= 2, minus the endpoint
/// (q, r) = (2, (4d-2)/(2d-3)).
pub fn radial_range_check(q: f64, r: f64, d: usize) -> bool {
    if d < 2 {
        return false;
    }
    if !(q >= 2.0 - PAIR_TOL) || !(r >= 2.0 - PAIR_TOL) {
        return false;
    }
    let m = (2 * d - 1) as f64;
    if inv(q) * 2.0 + inv(r) * m > m / 2.0 + PAIR_TOL {
        return false;
    }
    let r_end = (4 * d - 2) as f64 / (2 * d - 3) as f64;
    !((q - 2.0).abs() <= PAIR_TOL && (r - r_end).abs() <= PAIR_TOL)
}

fn inv(x: f64) -> f64 {
    if x.is_infinite() {
        0.0
    } else {
        1.0 / x
    }
}

/// The pair with 1/r0 = 1/(p+2), 1/q0 = dp/(4(p+2)).
pub fn q0r0(d: usize, p: f64) -> Result<AdmissiblePair> {
    check_subcritical(d, p)?;
    let pair = AdmissiblePair {
        q: 4.0 * (p + 2.0) / (d as f64 * p),
        r: p + 2.0,
        dim: d,
    };
    debug_assert!(admissible_check(pair.q, pair.r, d));
    Ok(pair)
}

/// The pair with 1/r1 = (p+1)/(2(2p+1)), 1/q1 = dp/(4(2p+1)).
pub fn q1r1(d: usize, p: f64) -> Result<AdmissiblePair> {
    check_subcritical(d, p)?;
    let pair = AdmissiblePair {
        q: 4.0 * (2.0 * p + 1.0) / (d as f64 * p),
        r: 2.0 * (2.0 * p + 1.0) / (p + 1.0),
        dim: d,
    };
    debug_assert!(admissible_check(pair.q, pair.r, d));
    Ok(pair)
}

fn check_subcritical(d: usize, p: f64) -> Result<()> {
    if !(1..=3).contains(&d) {
        return Err(Error::invalid(format!("dimension must be 1..=3, got {d}")));
    }
    if !(p > 0.0 && p < 4.0 / d as f64) {
        return Err(Error::invalid(format!(
            "mass-subcritical range needs 0 < p < {}, got {p}",
            4.0 / d as f64
        )));
    }
    Ok(())
}

/// Discrete space-time norm (tau sum over snapshots in the interval of the
/// Lr norm to the q-th power)^(1/q); sup over snapshots for q = infinity.
/// Requires a snapshot at every step multiple inside the interval.
pub fn discrete_strichartz_norm(
    traj: &Trajectory,
    q: f64,
    r: f64,
    interval: (f64, f64),
) -> Result<f64> {
    if !(q >= 1.0) {
        return Err(Error::invalid(format!("q must be >= 1, got {q}")));
    }
    let (t0, t1) = interval;
    if !(t1 >= t0) {
        return Err(Error::invalid(format!("empty interval ({t0}, {t1})")));
    }
    let tau = traj.config().tau;
    let tol = 1e-9 * t1.abs().max(1.0);
    let inside: Vec<&(f64, ComplexField)> = traj
        .snapshots()
        .iter()
        .filter(|(t, _)| *t >= t0 - tol && *t <= t1 + tol)
        .collect();
    let lo = (t0 / tau - 1e-9).ceil().max(0.0) as u64;
    let hi_f = (t1 / tau + 1e-9).floor();
    let expected = if hi_f < lo as f64 { 0 } else { hi_f as u64 - lo + 1 };
    if inside.len() as u64 != expected.min(traj.config().n_steps() + 1) {
        return Err(Error::Schedule(format!(
            "strichartz norm over [{t0}, {t1}] needs every step snapshot: have {}, expected {}",
            inside.len(),
            expected
        )));
    }
    if inside.is_empty() {
        return Ok(0.0);
    }
    if q.is_infinite() {
        let mut sup = 0.0f64;
        for (_, f) in inside {
            sup = sup.max(f.norm(NormKind::Lr(r))?);
        }
        Ok(sup)
    } else {
        let mut acc = 0.0f64;
        for (_, f) in inside {
            acc += f.norm(NormKind::Lr(r))?.powf(q);
        }
        Ok((tau * acc).powf(1.0 / q))
    }
}

/// Max over shared snapshot times of the L2 gap between two trajectories.
pub fn measure_error(scheme: &Trajectory, reference: &Trajectory) -> Result<f64> {
    if !scheme.grid().same_layout(reference.grid()) {
        return Err(Error::GridMismatch);
    }
    let mut worst: Option<f64> = None;
    let mut j = 0usize;
    for (t, f) in scheme.snapshots() {
        let tol = 1e-9 * t.abs().max(1.0);
        while j < reference.snapshots().len() && reference.snapshots()[j].0 < t - tol {
            j += 1;
        }
        if j < reference.snapshots().len() && (reference.snapshots()[j].0 - t).abs() <= tol {
            let gap = f.l2_gap(&reference.snapshots()[j].1)?;
            worst = Some(worst.map_or(gap, |w: f64| w.max(gap)));
        }
    }
    worst.ok_or_else(|| Error::Schedule("no shared snapshot times".to_string()))
}

/// Convergence study over a decreasing tau sweep.
#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    pub scheme: String,
    pub data_label: String,
    pub taus: Vec<f64>,
    pub errors: Vec<f64>,
    pub oracle_gap: f64,
    pub mass_drifts: Vec<f64>,
    pub fitted_order: f64,
    pub fit_residual: f64,
    /// taus dropped as pre-asymptotic before the final fit
    pub excluded_taus: Vec<f64>,
}

/// Least-squares slope of ln(error) against ln(tau). When the rms residual
/// exceeds 0.1 the coarsest point is treated as pre-asymptotic and dropped
/// (while at least four points remain), recording each exclusion.
pub fn fit_order(taus: &[f64], errors: &[f64]) -> Result<(f64, f64, Vec<usize>)> {
    if taus.len() != errors.len() || taus.len() < 2 {
        return Err(Error::invalid(
            "order fit needs at least two (tau, error) points".to_string(),
        ));
    }
    if taus.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::invalid("taus must be strictly decreasing".to_string()));
    }
    if errors.iter().any(|&e| !(e > 0.0)) {
        return Err(Error::invalid("errors must be positive for a log-log fit".to_string()));
    }
    let mut start = 0usize;
    let mut excluded = Vec::new();
    loop {
        let xs: Vec<f64> = taus[start..].iter().map(|t| t.ln()).collect();
        let ys: Vec<f64> = errors[start..].iter().map(|e| e.ln()).collect();
        let (slope, residual) = least_squares(&xs, &ys);
        if residual > 0.1 && taus.len() - start > 4 {
            excluded.push(start);
            start += 1;
            continue;
        }
        return Ok((slope, residual, excluded));
    }
}

fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        num += (x - mx) * (y - my);
        den += (x - mx) * (x - mx);
    }
    let slope = num / den;
    let icept = my - slope * mx;
    let mut ss = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        let r = y - (icept + slope * x);
        ss += r * r;
    }
    (slope, (ss / n).sqrt())
}

/// User-supplied stand-ins for the non-explicit constants in the radial
/// error bound.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BoundConstants {
    pub c: f64,
    pub c_exp: f64,
}

impl Default for BoundConstants {
    fn default() -> Self {
        BoundConstants { c: 1.0, c_exp: 1.0 }
    }
}

/// Evaluate the radial-data error bound shape
/// C exp(C T m^(4p/(4-dp))) ( ||phi - P(tt)phi|| + tt^((4-dp)/8) T m^Cexp
///   + (tau/tt)^(1/2) (m + m^(p+1)) )        with m = ||phi||_L2.
pub fn radial_error_bound(
    phi: &ComplexField,
    tau: f64,
    tilde_tau: f64,
    horizon: f64,
    p: f64,
    constants: BoundConstants,
) -> Result<f64> {
    let d = phi.grid().dim();
    if !(0.0 < tau && tau <= tilde_tau && tilde_tau < 1.0) {
        return Err(Error::invalid(format!(
            "bound needs 0 < tau <= tilde_tau < 1, got tau={tau}, tilde_tau={tilde_tau}"
        )));
    }
    check_subcritical(d, p)?;
    if !(horizon >= 0.0) {
        return Err(Error::invalid(format!("horizon must be >= 0, got {horizon}")));
    }
    let m = phi.l2_norm();
    let kernel = FilterKernel::new(phi.grid().clone(), tilde_tau)?;
    let tail = apply_filter(phi, &kernel)?.l2_gap(phi)?;
    let eps0 = (4.0 - d as f64 * p) / 8.0;
    let growth = (constants.c * horizon * m.powf(4.0 * p / (4.0 - d as f64 * p))).exp();
    Ok(constants.c
        * growth
        * (tail + tilde_tau.powf(eps0) * horizon * m.powf(constants.c_exp)
            + (tau / tilde_tau).sqrt() * (m + m.powf(p + 1.0))))
}

/// Worst relative mass deviation across a run. Unfiltered schemes are held
/// to the t=0 mass; the filtered scheme is non-increasing, so only rises
/// above the running envelope count.
pub fn mass_drift(traj: &Trajectory) -> f64 {
    let masses = traj.step_masses();
    if masses.is_empty() || masses[0] == 0.0 {
        return 0.0;
    }
    let m0 = masses[0];
    match traj.config().scheme {
        crate::split::Scheme::FilteredLie => {
            let mut envelope = m0;
            let mut worst = 0.0f64;
            for &m in masses {
                worst = worst.max((m - envelope) / m0);
                envelope = envelope.min(m);
            }
            worst.max(0.0)
        }
        _ => masses
            .iter()
            .map(|&m| (m - m0).abs() / m0)
            .fold(0.0, f64::max),
    }
}

/// Fitted pointwise constants for the two mean-value inequalities on the
/// quotient D_tau v = (exp(-i tau lambda |v|^p) - 1)/tau v:
///   |D v - D w|            <= c1 |v - w| (|v|^p + |w|^p)
///   |D v + i lambda |v|^p v| <= c2 tau |v|^(2p+1)
/// over a deterministic low-discrepancy cloud with |v|, |w| <= 10,
/// tau in (0,1), both signs of lambda.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct MvtConstants {
    pub c_lipschitz: f64,
    pub c_consistency: f64,
    pub samples: usize,
}

pub fn mvt_constants(p: f64, n_samples: usize) -> Result<MvtConstants> {
    if !(p > 0.0) {
        return Err(Error::invalid(format!("p must be positive, got {p}")));
    }
    // Kronecker sequence on (0,1)^5; a prefix stays a low-discrepancy set,
    // so doubling the cloud only refines it
    const ALPHAS: [f64; 5] = [
        0.6180339887498949,  // frac(phi)
        0.4142135623730951,  // frac(sqrt 2)
        0.7320508075688772,  // frac(sqrt 3)
        0.2360679774997896,  // frac(sqrt 5)
        0.6457513110645906,  // frac(sqrt 7)
    ];
    let coord = |i: usize, k: usize| ((i + 1) as f64 * ALPHAS[k]).fract();

    let mut c1 = 0.0f64;
    let mut c2 = 0.0f64;
    for i in 0..n_samples {
        let av = 10.0 * coord(i, 0);
        let tv = std::f64::consts::TAU * coord(i, 1);
        let aw = 10.0 * coord(i, 2);
        let tw = std::f64::consts::TAU * coord(i, 3);
        let tau = coord(i, 4).clamp(1e-6, 1.0 - 1e-6);
        let v = num_complex::Complex64::from_polar(av, tv);
        let w = num_complex::Complex64::from_polar(aw, tw);
        for lambda in [1.0f64, -1.0] {
            // e^{-i theta} - 1 = -2i sin(theta/2) e^{-i theta/2}: stable for
            // small phase angles where the naive subtraction cancels
            let dq = |z: num_complex::Complex64| {
                let theta = tau * lambda * z.norm().powf(p);
                let h = 0.5 * theta;
                num_complex::Complex64::new(0.0, -2.0 * h.sin() / tau)
                    * num_complex::Complex64::from_polar(1.0, -h)
                    * z
            };
            let denom1 = (v - w).norm() * (v.norm().powf(p) + w.norm().powf(p));
            if denom1 > 1e-9 {
                c1 = c1.max((dq(v) - dq(w)).norm() / denom1);
            }
            if v.norm() > 1e-6 {
                // D v + i lambda |v|^p v = (v/tau) ((cos t - 1) + i(t - sin t))
                let theta = tau * lambda * v.norm().powf(p);
                let one_minus_cos = 2.0 * (0.5 * theta).sin().powi(2);
                let lhs = (one_minus_cos.powi(2) + theta_minus_sin(theta).powi(2)).sqrt()
                    * v.norm()
                    / tau;
                c2 = c2.max(lhs / (tau * v.norm().powf(2.0 * p + 1.0)));
            }
        }
    }
    Ok(MvtConstants {
        c_lipschitz: c1,
        c_consistency: c2,
        samples: n_samples,
    })
}

fn theta_minus_sin(theta: f64) -> f64 {
    if theta.abs() < 1e-3 {
        let t2 = theta * theta;
        theta * t2 / 6.0 * (1.0 - t2 / 20.0 * (1.0 - t2 / 42.0))
    } else {
        theta - theta.sin()
    }
}
