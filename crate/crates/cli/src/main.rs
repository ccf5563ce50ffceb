//! `nls`: batch driver for split-step NLS experiments.
//!
//! Subcommands: `simulate` (one run, field dumps + manifest), `converge`
//! (tau sweep against a fine reference, CSV + JSON), `verify` (named check
//! suites). Exit codes: 0 ok, 2 config/usage, 3 non-finite state, 4 oracle
//! not trusted over half the sweep.

mod config;
mod runner;

use std::path::PathBuf;
use std::process::ExitCode;

use nls_core::Scheme;
use runner::{EXIT_CONFIG, EXIT_OK};

const USAGE: &str = "\
usage:
  nls simulate --config PATH --out DIR [--seed N]
  nls converge --config PATH --out DIR [--schemes lie,strang,filtered_lie] [--seed N]
  nls verify   --suite NAME[,NAME...] [--seed N]
suites: mass, duhamel, bernstein, mvt, plane_wave, pairs (or 'all')";

struct Args {
    command: String,
    config: Option<PathBuf>,
    out: Option<PathBuf>,
    schemes: Option<String>,
    suite: Option<String>,
    seed: Option<u64>,
}

fn parse_args(argv: &[String]) -> Result<Args, String> {
    let mut it = argv.iter();
    let command = it.next().ok_or_else(|| USAGE.to_string())?.clone();
    let mut args = Args {
        command,
        config: None,
        out: None,
        schemes: None,
        suite: None,
        seed: None,
    };
    while let Some(flag) = it.next() {
        let mut value = || {
            it.next()
                .cloned()
                .ok_or_else(|| format!("flag {flag} needs a value"))
        };
        match flag.as_str() {
            "--config" => args.config = Some(PathBuf::from(value()?)),
            "--out" => args.out = Some(PathBuf::from(value()?)),
            "--schemes" => args.schemes = Some(value()?),
            "--suite" => args.suite = Some(value()?),
            "--seed" => {
                args.seed = Some(value()?.parse().map_err(|e| format!("--seed: {e}"))?)
            }
            other => return Err(format!("unknown flag '{other}'\n{USAGE}")),
        }
    }
    Ok(args)
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().skip(1).collect();
    let args = match parse_args(&argv) {
        Ok(a) => a,
        Err(msg) => {
            eprintln!("{msg}");
            return ExitCode::from(EXIT_CONFIG as u8);
        }
    };
    let code = dispatch(&args);
    if code == EXIT_OK {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(code as u8)
    }
}

fn dispatch(args: &Args) -> i32 {
    match args.command.as_str() {
        "simulate" | "converge" => {
            let Some(config_path) = &args.config else {
                eprintln!("{} needs --config\n{USAGE}", args.command);
                return EXIT_CONFIG;
            };
            let text = match std::fs::read_to_string(config_path) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("cannot read {}: {e}", config_path.display());
                    return EXIT_CONFIG;
                }
            };
            let cfg = match config::parse_config(&text, args.seed) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("{e}");
                    return EXIT_CONFIG;
                }
            };
            let Some(out) = args.out.clone().or(cfg.out_dir.clone()) else {
                eprintln!("{} needs --out or output.dir\n{USAGE}", args.command);
                return EXIT_CONFIG;
            };
            let result = if args.command == "simulate" {
                runner::cmd_simulate(&cfg, &out)
            } else {
                let schemes = match parse_schemes(args.schemes.as_deref(), cfg.scheme) {
                    Ok(s) => s,
                    Err(e) => {
                        eprintln!("{e}");
                        return EXIT_CONFIG;
                    }
                };
                runner::cmd_converge(&cfg, &out, &schemes)
            };
            match result {
                Ok(()) => EXIT_OK,
                Err(f) => {
                    eprintln!("{}", f.message);
                    f.code
                }
            }
        }
        "verify" => {
            let suites: Vec<String> = match args.suite.as_deref() {
                None | Some("all") => nls_core::SUITES.iter().map(|s| s.to_string()).collect(),
                Some(list) => list.split(',').map(|s| s.trim().to_string()).collect(),
            };
            match runner::cmd_verify(&suites, args.seed.unwrap_or(7)) {
                Ok(()) => EXIT_OK,
                Err(f) => {
                    eprintln!("{}", f.message);
                    f.code
                }
            }
        }
        other => {
            eprintln!("unknown command '{other}'\n{USAGE}");
            EXIT_CONFIG
        }
    }
}

fn parse_schemes(spec: Option<&str>, default: Scheme) -> Result<Vec<Scheme>, String> {
    match spec {
        None => Ok(vec![default]),
        Some(list) => list
            .split(',')
            .map(|s| s.trim().parse::<Scheme>().map_err(|e| e.to_string()))
            .collect(),
    }
}
