use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use adaftrl::error::{Error, Result};
use adaftrl::experiment::{
    replay, run, sweep, to_json_pretty, verify, write_run, write_sweep, ExperimentConfig, RunOptions, Suite,
    VerifyOptions,
};

#[derive(Parser)]
#[command(name = "adaftrl", version, about = "Adaptive FTRL / mirror-descent experiments with regret accounting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Output directory (overrides the config's `out`; default `out`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Certificate tolerance (default: the config's, or 1e-9 for `verify`).
    #[arg(long, global = true)]
    tol: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run every seed of a config; writes seed-<s>.csv ledgers and report.json.
    Run { config: PathBuf },
    /// Run a config's grid; writes sweep.csv and sweep.json.
    Sweep { config: PathBuf },
    /// Run a property suite: bregman, solvers, decomposition, bounds, nonconvex, lemmas or all.
    Verify {
        suite: String,
        /// Base seed of the randomized instances.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Instances per property (bregman, lemmas; a tenth for nonconvex).
        #[arg(long)]
        instances: Option<usize>,
        /// Randomized learner runs (decomposition).
        #[arg(long)]
        runs: Option<usize>,
    },
    /// Recompute a ledger CSV from its x_t and g_t columns and require identical output.
    Replay {
        config: PathBuf,
        csv: PathBuf,
        /// Seed of the ledger (default: parsed from a seed-<s>.csv file name).
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn out_dir(cli: &Cli, cfg: &ExperimentConfig) -> PathBuf {
    cli.out.clone().or_else(|| cfg.out.clone()).unwrap_or_else(|| PathBuf::from("out"))
}

fn check_tol(tol: Option<f64>) -> Result<()> {
    match tol {
        Some(t) if !(t.is_finite() && t > 0.0) => Err(Error::InvalidParameter(format!("--tol {t} must be positive"))),
        _ => Ok(()),
    }
}

fn seed_from_name(path: &Path) -> Option<u64> {
    path.file_stem()?.to_str()?.strip_prefix("seed-")?.parse().ok()
}

fn paths(v: &[PathBuf]) -> Vec<String> {
    v.iter().map(|p| p.display().to_string()).collect()
}

/// Run the command; failures after artifacts were written are returned as `Err`.
fn execute(cli: &Cli) -> Result<serde_json::Value> {
    check_tol(cli.tol)?;
    let opts = RunOptions { jobs: cli.jobs, tol: cli.tol };
    match &cli.command {
        Command::Run { config } => {
            let cfg = ExperimentConfig::load(config)?;
            let outcome = run(&cfg, &opts)?;
            let written = write_run(&outcome, &out_dir(cli, &cfg))?;
            let r = &outcome.report;
            for b in &r.bounds {
                eprintln!(
                    "{:<24} regret {:>14.6} ± {:<10.3e} bound {:>14.6}  {}",
                    b.name,
                    b.empirical_mean,
                    b.empirical_se,
                    b.bound_mean,
                    if b.holds { "holds" } else { "VIOLATED" }
                );
            }
            r.check()?;
            Ok(json!({ "name": r.name, "regret_mean": r.regret_mean, "regret_se": r.regret_se, "written": paths(&written) }))
        }
        Command::Sweep { config } => {
            let cfg = ExperimentConfig::load(config)?;
            let rep = sweep(&cfg, &opts)?;
            let written = write_sweep(&rep, &out_dir(cli, &cfg))?;
            eprint!("{}", rep.to_csv());
            if let Some(e) = rep.failures().into_iter().next() {
                return Err(e);
            }
            Ok(json!({ "name": rep.name, "cells": rep.rows.len(), "written": paths(&written) }))
        }
        Command::Verify { suite, seed, instances, runs } => {
            let suites: Vec<Suite> = if suite == "all" { Suite::ALL.to_vec() } else { vec![suite.parse()?] };
            let mut vo = VerifyOptions { seed: *seed, jobs: cli.jobs, ..Default::default() };
            if let Some(t) = cli.tol {
                vo.tol = t;
            }
            if let Some(n) = instances {
                vo.instances = *n;
            }
            if let Some(n) = runs {
                vo.runs = *n;
            }
            let mut reports = Vec::new();
            for s in suites {
                let rep = verify(s, &vo)?;
                for p in &rep.properties {
                    eprintln!(
                        "{} {:<14} {:<36} {:>6}/{:<6} worst slack {:.3e}",
                        if p.passed { "PASS" } else { "FAIL" },
                        s.name(),
                        p.name,
                        p.passed_instances,
                        p.instances,
                        p.worst_slack
                    );
                }
                reports.push(rep);
            }
            let failed: Vec<String> = reports
                .iter()
                .flat_map(|r| r.properties.iter().filter(|p| !p.passed).map(move |p| format!("{}/{}", r.suite, p.name)))
                .collect();
            println!("{}", to_json_pretty(&reports).trim_end());
            if !failed.is_empty() {
                return Err(Error::CertificateFailed(format!("properties failed: {}", failed.join(", "))));
            }
            Ok(serde_json::Value::Null)
        }
        Command::Replay { config, csv, seed } => {
            let cfg = ExperimentConfig::load(config)?;
            let seed = seed.or_else(|| seed_from_name(csv)).ok_or_else(|| {
                Error::InvalidConfig("cannot infer the seed from the file name; pass --seed".into())
            })?;
            let text = std::fs::read_to_string(csv)?;
            let rep = replay(&cfg, seed, &text)?;
            Ok(json!({ "replayed": csv.display().to_string(), "seed": rep.seed, "rows": rep.rows }))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidConfig(_) | Error::InvalidParameter(_) | Error::Io(_) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(v) => {
            if !v.is_null() {
                println!("{}", serde_json::to_string_pretty(&v).expect("json"));
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            let err = json!({ "error": { "kind": e.kind(), "message": e.to_string() } });
            eprintln!("{}", serde_json::to_string(&err).expect("json"));
            ExitCode::from(exit_code(&e))
        }
    }
}
