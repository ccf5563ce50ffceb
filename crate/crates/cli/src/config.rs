//! Flat key=value experiment configs with dotted namespaces. Lines are
//! `key = value`, `#` starts a comment; the full grammar is in the README.

use std::collections::BTreeMap;
use std::path::PathBuf;

use nls_core::{DataSpec, FilterRule, GridParams, Scheme};

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "config: {}", self.0)
    }
}

type Result<T> = std::result::Result<T, ConfigError>;

fn err<T>(msg: impl Into<String>) -> Result<T> {
    Err(ConfigError(msg.into()))
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub grid: GridParams,
    pub data: DataSpec,
    pub scheme: Scheme,
    pub lambda: f64,
    pub p: f64,
    pub tau: f64,
    pub horizon: f64,
    pub filter_rule: FilterRule,
    pub tilde_tau: Option<f64>,
    /// Target snapshot count per run (including t = 0).
    pub snapshots: usize,
    pub sweep_taus: Option<Vec<f64>>,
    pub synthetic_order: Option<f64>,
    pub reference_refinement: u32,
    pub gap_ceiling: f64,
    pub seed: u64,
    pub out_dir: Option<PathBuf>,
}

pub fn parse_config(text: &str, seed_override: Option<u64>) -> Result<ExperimentConfig> {
    let mut map: BTreeMap<String, String> = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(i) => &raw[..i],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return err(format!("line {}: expected key = value, got '{line}'", lineno + 1));
        };
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if map.insert(key.clone(), value).is_some() {
            return err(format!("line {}: duplicate key '{key}'", lineno + 1));
        }
    }
    build(&map, seed_override)
}

fn build(map: &BTreeMap<String, String>, seed_override: Option<u64>) -> Result<ExperimentConfig> {
    let mut seen: std::collections::BTreeSet<&str> = std::collections::BTreeSet::new();
    let get = |key: &str| map.get(key).map(|s| s.as_str());
    let mut take = |key: &'static str| {
        seen.insert(key);
        get(key)
    };

    let dim = parse_num::<usize>(take("grid.dim"), "grid.dim")?.unwrap_or(1);
    let n = parse_num::<usize>(take("grid.n"), "grid.n")?
        .ok_or_else(|| ConfigError("missing grid.n".to_string()))?;
    let half_width = parse_num::<f64>(take("grid.half_width"), "grid.half_width")?
        .ok_or_else(|| ConfigError("missing grid.half_width".to_string()))?;
    let grid = GridParams { dim, n_per_axis: n, half_width };

    let seed = seed_override
        .or(parse_num::<u64>(take("seed"), "seed")?)
        .unwrap_or(7);

    let kind = take("data.kind").unwrap_or("gaussian");
    let norm = parse_num::<f64>(take("data.normalization"), "data.normalization")?.unwrap_or(1.0);
    let data = match kind {
        "gaussian" => DataSpec::Gaussian {
            width: parse_num::<f64>(take("data.width"), "data.width")?.unwrap_or(1.0),
            amplitude: parse_num::<f64>(take("data.amplitude"), "data.amplitude")?.unwrap_or(1.0),
        },
        "plane_wave" => {
            let mode_str = take("data.mode").unwrap_or("1");
            let mode: std::result::Result<Vec<i64>, _> =
                mode_str.split(',').map(|s| s.trim().parse::<i64>()).collect();
            DataSpec::PlaneWave {
                mode: mode.map_err(|e| ConfigError(format!("data.mode: {e}")))?,
                amplitude: parse_num::<f64>(take("data.amplitude"), "data.amplitude")?
                    .unwrap_or(1.0),
            }
        }
        "hs_rough" => DataSpec::HsRough {
            s: parse_num::<f64>(take("data.s"), "data.s")?
                .ok_or_else(|| ConfigError("hs_rough needs data.s".to_string()))?,
            seed,
            normalization: norm,
        },
        "phi_alpha" => DataSpec::PhiAlpha {
            alpha: parse_num::<f64>(take("data.alpha"), "data.alpha")?
                .ok_or_else(|| ConfigError("phi_alpha needs data.alpha".to_string()))?,
            normalization: norm,
        },
        other => return err(format!("unknown data.kind '{other}'")),
    };

    let scheme: Scheme = take("split.scheme")
        .unwrap_or("strang")
        .parse()
        .map_err(|e| ConfigError(format!("{e}")))?;
    let lambda = parse_num::<f64>(take("split.lambda"), "split.lambda")?.unwrap_or(1.0);
    let p = parse_num::<f64>(take("split.p"), "split.p")?.unwrap_or(2.0);
    let tau = parse_num::<f64>(take("split.tau"), "split.tau")?.unwrap_or(1.0 / 64.0);
    let horizon = parse_num::<f64>(take("split.horizon"), "split.horizon")?.unwrap_or(1.0);
    let filter_rule = match take("split.filter_rule") {
        None | Some("tau") => FilterRule::StepSize,
        Some(spec) => match spec.split_once(':') {
            Some(("fixed", v)) => FilterRule::Fixed {
                scale: parse_str::<f64>(v, "split.filter_rule")?,
            },
            Some(("power", v)) => FilterRule::Power {
                epsilon: parse_str::<f64>(v, "split.filter_rule")?,
            },
            Some(("log", v)) => FilterRule::Log {
                alpha: parse_str::<f64>(v, "split.filter_rule")?,
            },
            _ => return err(format!("bad split.filter_rule '{spec}' (tau | fixed:S | power:EPS | log:ALPHA)")),
        },
    };
    let tilde_tau = parse_num::<f64>(take("split.tilde_tau"), "split.tilde_tau")?;
    let snapshots = parse_num::<usize>(take("split.snapshots"), "split.snapshots")?.unwrap_or(17);
    if snapshots < 2 {
        return err("split.snapshots must be at least 2");
    }

    let sweep_taus = match take("sweep.taus") {
        Some(list) => {
            let taus: std::result::Result<Vec<f64>, _> =
                list.split(',').map(|s| s.trim().parse::<f64>()).collect();
            Some(taus.map_err(|e| ConfigError(format!("sweep.taus: {e}")))?)
        }
        None => {
            let start = parse_num::<f64>(take("sweep.tau_start"), "sweep.tau_start")?;
            let factor = parse_num::<f64>(take("sweep.factor"), "sweep.factor")?;
            let count = parse_num::<usize>(take("sweep.count"), "sweep.count")?;
            match (start, factor, count) {
                (Some(start), factor, Some(count)) => {
                    let factor = factor.unwrap_or(0.5);
                    if !(factor > 0.0 && factor < 1.0) {
                        return err("sweep.factor must lie in (0, 1)");
                    }
                    Some((0..count).map(|i| start * factor.powi(i as i32)).collect())
                }
                (None, None, None) => None,
                _ => return err("geometric sweep needs sweep.tau_start and sweep.count"),
            }
        }
    };
    if let Some(taus) = &sweep_taus {
        let positive = taus.iter().all(|&t| t.is_finite() && t > 0.0);
        if taus.windows(2).any(|w| w[1] >= w[0]) || !positive {
            return err("sweep taus must be positive and strictly decreasing");
        }
    }

    let synthetic_order = parse_num::<f64>(take("sweep.synthetic_order"), "sweep.synthetic_order")?;
    let reference_refinement =
        parse_num::<u32>(take("reference.refinement"), "reference.refinement")?.unwrap_or(3);
    let gap_ceiling = parse_num::<f64>(take("reference.gap_ceiling"), "reference.gap_ceiling")?
        .unwrap_or(if data.is_rough() { 1e-4 } else { 1e-8 });
    let out_dir = take("output.dir").map(PathBuf::from);

    for key in map.keys() {
        if !seen.contains(key.as_str()) {
            return err(format!("unknown key '{key}'"));
        }
    }

    Ok(ExperimentConfig {
        grid,
        data,
        scheme,
        lambda,
        p,
        tau,
        horizon,
        filter_rule,
        tilde_tau,
        snapshots,
        sweep_taus,
        synthetic_order,
        reference_refinement,
        gap_ceiling,
        seed,
        out_dir,
    })
}

fn parse_num<T: std::str::FromStr>(value: Option<&str>, key: &str) -> Result<Option<T>>
where
    T::Err: std::fmt::Display,
{
    match value {
        None => Ok(None),
        Some(v) => parse_str(v, key).map(Some),
    }
}

fn parse_str<T: std::str::FromStr>(value: &str, key: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse::<T>()
        .map_err(|e| ConfigError(format!("{key}: {e} (got '{value}')")))
}
