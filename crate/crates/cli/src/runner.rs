//! Experiment orchestration for the simulate / converge / verify commands.

use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use nls_core::{
    evolve, exact_plane_wave, fio, fit_order, mass_drift, measure_error, reference_solution,
    ComplexField, ConvergenceReport, DataSpec, Error as CoreError, Scheme, SpectralGrid,
    SplitConfig, Trajectory,
};

use crate::config::ExperimentConfig;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;
pub const EXIT_ORACLE: i32 = 4;

pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn config(msg: impl Into<String>) -> Self {
        Failure { code: EXIT_CONFIG, message: msg.into() }
    }

    fn from_core(err: CoreError) -> Self {
        let code = match err {
            CoreError::NonFinite { .. } => EXIT_NUMERIC,
            _ => EXIT_CONFIG,
        };
        Failure { code, message: err.to_string() }
    }
}

type RunResult<T> = std::result::Result<T, Failure>;

fn base_split_config(cfg: &ExperimentConfig, scheme: Scheme, tau: f64) -> RunResult<SplitConfig> {
    let mut sc = SplitConfig::new(scheme, cfg.lambda, cfg.p, tau, cfg.horizon)
        .map_err(Failure::from_core)?
        .with_filter_rule(cfg.filter_rule)
        .map_err(Failure::from_core)?;
    if let Some(tt) = cfg.tilde_tau {
        sc = sc.with_tilde_tau(tt).map_err(Failure::from_core)?;
    }
    Ok(sc)
}

fn realize_data(cfg: &ExperimentConfig) -> RunResult<(std::sync::Arc<SpectralGrid>, ComplexField)> {
    let grid = SpectralGrid::from_params(cfg.grid).map_err(Failure::from_core)?;
    let phi = cfg.data.realize(&grid).map_err(Failure::from_core)?;
    Ok((grid, phi))
}

pub fn cmd_simulate(cfg: &ExperimentConfig, out: &Path) -> RunResult<()> {
    if !fio::dir_writable(out) {
        return Err(Failure::config(format!("output directory {} is not writable", out.display())));
    }
    let (grid, phi) = realize_data(cfg)?;
    let mut sc = base_split_config(cfg, cfg.scheme, cfg.tau)?;
    if sc.n_steps() > 0 {
        let stride = (sc.n_steps() as usize / (cfg.snapshots - 1)).max(1) as u64;
        sc = sc.with_snapshot_stride(stride).map_err(Failure::from_core)?;
    }
    let traj = evolve(&phi, &sc).map_err(Failure::from_core)?;

    let oracle_error = match &cfg.data {
        DataSpec::PlaneWave { mode, amplitude } => {
            let mut worst = 0.0f64;
            for (t, f) in traj.snapshots() {
                let truth = exact_plane_wave(&grid, mode, *amplitude, cfg.lambda, cfg.p, *t)
                    .map_err(Failure::from_core)?;
                worst = worst.max(f.l2_gap(&truth).map_err(Failure::from_core)?);
            }
            Some(worst)
        }
        _ => None,
    };

    let manifest = fio::export_trajectory(out, &traj, cfg.scheme.name(), oracle_error)
        .map_err(Failure::from_core)?;
    println!("wrote {}", manifest.display());
    Ok(())
}

struct Cell {
    error: f64,
    drift: f64,
}

pub fn cmd_converge(cfg: &ExperimentConfig, out: &Path, schemes: &[Scheme]) -> RunResult<()> {
    if !fio::dir_writable(out) {
        return Err(Failure::config(format!("output directory {} is not writable", out.display())));
    }
    let taus = cfg
        .sweep_taus
        .clone()
        .ok_or_else(|| Failure::config("converge needs a sweep (sweep.tau_start/sweep.count or sweep.taus)"))?;
    if taus.len() < 4 {
        return Err(Failure::config("converge needs a sweep of at least 4 taus"));
    }

    if let Some(order) = cfg.synthetic_order {
        // harness self-test: planted errors, no evolution
        for &scheme in schemes {
            let errors: Vec<f64> = taus.iter().map(|t| 0.37 * t.powf(order)).collect();
            let drifts = vec![0.0; taus.len()];
            let report = assemble_report(scheme, cfg, &taus, &errors, &drifts, 0.0)?;
            write_report(out, cfg, &report, &[])?;
        }
        return Ok(());
    }

    let (_grid, phi) = realize_data(cfg)?;

    // shared snapshot schedule: multiples of the coarsest tau, which every
    // finer tau in a geometric sweep also hits
    let coarse = base_split_config(cfg, Scheme::Strang, taus[0])?;
    let stride = (coarse.n_steps() as usize / (cfg.snapshots - 1)).max(1) as u64;
    let times: Vec<f64> = (0..=coarse.n_steps())
        .step_by(stride as usize)
        .chain(std::iter::once(coarse.n_steps()))
        .map(|k| k as f64 * taus[0])
        .collect();

    let finest = base_split_config(cfg, Scheme::Strang, *taus.last().unwrap())?
        .with_snapshot_times(&times)
        .map_err(|e| Failure::config(format!("snapshot times incompatible with sweep: {e}")))?;
    let reference = reference_solution(&phi, &finest, cfg.reference_refinement, cfg.gap_ceiling)
        .map_err(Failure::from_core)?;
    let self_gap = reference.oracle_self_gap().unwrap_or(0.0);

    // independent (scheme, tau) cells on a bounded worker pool
    let mut jobs = Vec::new();
    for &scheme in schemes {
        for &tau in &taus {
            jobs.push((scheme, tau));
        }
    }
    let slots: Mutex<Vec<Option<RunResult<Cell>>>> = Mutex::new((0..jobs.len()).map(|_| None).collect());
    let next = AtomicUsize::new(0);
    let workers = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
        .min(jobs.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= jobs.len() {
                    break;
                }
                let (scheme, tau) = jobs[i];
                let res = run_cell(cfg, scheme, tau, &phi, &times, &reference);
                slots.lock().unwrap()[i] = Some(res);
            });
        }
    });
    let results = slots.into_inner().unwrap();

    let mut exit_oracle = false;
    for (si, &scheme) in schemes.iter().enumerate() {
        let mut errors = Vec::new();
        let mut drifts = Vec::new();
        for ti in 0..taus.len() {
            let cell = results[si * taus.len() + ti]
                .as_ref()
                .expect("worker filled every slot");
            match cell {
                Ok(c) => {
                    errors.push(c.error);
                    drifts.push(c.drift);
                }
                Err(f) => return Err(Failure { code: f.code, message: f.message.clone() }),
            }
        }
        let report = assemble_report(scheme, cfg, &taus, &errors, &drifts, self_gap)?;
        // a point is untrustworthy when the oracle's own error is above the
        // ceiling or not dominated by the measured error
        let flagged: Vec<bool> = errors
            .iter()
            .map(|&e| self_gap > cfg.gap_ceiling || e < 10.0 * self_gap)
            .collect();
        if flagged.iter().filter(|&&f| f).count() * 2 > taus.len() {
            exit_oracle = true;
        }
        write_report(out, cfg, &report, &flagged)?;
    }

    if exit_oracle {
        return Err(Failure {
            code: EXIT_ORACLE,
            message: format!(
                "oracle self-gap {self_gap:.3e} leaves more than half the sweep unresolved"
            ),
        });
    }
    Ok(())
}

fn run_cell(
    cfg: &ExperimentConfig,
    scheme: Scheme,
    tau: f64,
    phi: &ComplexField,
    times: &[f64],
    reference: &Trajectory,
) -> RunResult<Cell> {
    let sc = base_split_config(cfg, scheme, tau)?
        .with_snapshot_times(times)
        .map_err(|e| Failure::config(format!("snapshot times incompatible with tau {tau}: {e}")))?;
    let traj = evolve(phi, &sc).map_err(Failure::from_core)?;
    let error = measure_error(&traj, reference).map_err(Failure::from_core)?;
    Ok(Cell { error, drift: mass_drift(&traj) })
}

fn assemble_report(
    scheme: Scheme,
    cfg: &ExperimentConfig,
    taus: &[f64],
    errors: &[f64],
    drifts: &[f64],
    self_gap: f64,
) -> RunResult<ConvergenceReport> {
    let (order, residual, excluded_idx) =
        fit_order(taus, errors).map_err(Failure::from_core)?;
    Ok(ConvergenceReport {
        scheme: scheme.name().to_string(),
        data_label: cfg.data.label(),
        taus: taus.to_vec(),
        errors: errors.to_vec(),
        oracle_gap: self_gap,
        mass_drifts: drifts.to_vec(),
        fitted_order: order,
        fit_residual: residual,
        excluded_taus: excluded_idx.iter().map(|&i| taus[i]).collect(),
    })
}

fn write_report(
    out: &Path,
    cfg: &ExperimentConfig,
    report: &ConvergenceReport,
    flagged: &[bool],
) -> RunResult<()> {
    let csv_path = out.join(format!("converge_{}.csv", report.scheme));
    let mut csv = String::from("# nls-csv v1\ntau,error,oracle_gap,mass_drift,fitted_order\n");
    let last = report.taus.len() - 1;
    for i in 0..report.taus.len() {
        let order = if i == last {
            format!("{:e}", report.fitted_order)
        } else {
            String::new()
        };
        csv.push_str(&format!(
            "{:e},{:e},{:e},{:e},{order}\n",
            report.taus[i], report.errors[i], report.oracle_gap, report.mass_drifts[i]
        ));
    }
    std::fs::write(&csv_path, csv).map_err(|e| Failure::config(format!("{}: {e}", csv_path.display())))?;

    let json_path = out.join(format!("converge_{}.json", report.scheme));
    let body = serde_json::json!({
        "schema": "nls-json v1",
        "report": report,
        "grid": cfg.grid,
        "data": cfg.data,
        "lambda": cfg.lambda,
        "p": cfg.p,
        "horizon": cfg.horizon,
        "seed": cfg.seed,
        "gap_ceiling": cfg.gap_ceiling,
        "reference_refinement": cfg.reference_refinement,
        "flagged": flagged,
    });
    let text = serde_json::to_string_pretty(&body)
        .map_err(|e| Failure::config(format!("report serialization: {e}")))?;
    std::fs::write(&json_path, text)
        .map_err(|e| Failure::config(format!("{}: {e}", json_path.display())))?;
    println!("wrote {} and {}", csv_path.display(), json_path.display());
    Ok(())
}

pub fn cmd_verify(suites: &[String], seed: u64) -> RunResult<()> {
    let mut all_pass = true;
    for name in suites {
        let outcome = nls_core::run_suite(name, seed).map_err(Failure::from_core)?;
        let line = serde_json::json!({
            "suite": outcome.suite,
            "pass": outcome.pass,
            "metrics": outcome.metrics.iter().cloned().collect::<std::collections::BTreeMap<String, f64>>(),
            "detail": outcome.detail,
        });
        println!("{line}");
        all_pass &= outcome.pass;
    }
    if all_pass {
        Ok(())
    } else {
        Err(Failure { code: 1, message: "one or more verify suites failed".to_string() })
    }
}
