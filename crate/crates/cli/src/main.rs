//! `misspec`: evaluate instance files, run verification reports, sample datasets
//! and print the regime table.
//!
//! Exit codes: 0 on success, 1 when a verification report fails, 2 on any error.
//! Errors are written to stderr as a single JSON line.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use misspec::bounds::{self, approx_ratio};
use misspec::estimators;
use misspec::io::{parse_instance, render_instance, write_dataset};
use misspec::verify::{self, Params};
use misspec::{Error, NormKind, ProblemInstance};
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "misspec", version, about = "Linear off-policy evaluation under misspecification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate an estimator on an instance file.
    Eval {
        file: PathBuf,
        #[arg(long, value_enum, default_value_t = Norm::L2mu)]
        norm: Norm,
        #[arg(long, value_enum, default_value_t = Estimator::Lstd)]
        estimator: Estimator,
    },
    /// Run a named verification report.
    Verify {
        #[arg(value_parser = clap::builder::PossibleValuesParser::new(verify::IDS))]
        id: String,
        /// Comma-separated `key=value` overrides, e.g. `x=2,y=0.25`.
        #[arg(long, value_parser = parse_params, default_value = "")]
        params: Params,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Check this instance file instead of the generated one (thm35 only).
        #[arg(long)]
        instance: Option<PathBuf>,
    },
    /// Draw an aliased dataset from an instance.
    Sample {
        file: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate the regime table on an instance.
    Table {
        file: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Norm {
    L2mu,
    Linf,
}

impl From<Norm> for NormKind {
    fn from(n: Norm) -> Self {
        match n {
            Norm::L2mu => NormKind::L2mu,
            Norm::Linf => NormKind::Linf,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Estimator {
    Lstd,
    Bayes,
    BayesProj,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug)]
enum Failure {
    Lib(Error),
    Io(String, std::io::Error),
    Output(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl Failure {
    fn to_json(&self) -> Value {
        let (kind, message) = match self {
            Failure::Lib(e) => (e.kind(), e.to_string()),
            Failure::Io(path, e) => ("io", format!("{path}: {e}")),
            Failure::Output(msg) => ("output", msg.clone()),
        };
        json!({ "error": { "kind": kind, "message": message } })
    }
}

fn parse_params(s: &str) -> Result<Params, String> {
    let mut out = Params::new();
    for pair in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (k, v) = pair.split_once('=').ok_or_else(|| format!("expected key=value, found '{pair}'"))?;
        let v: f64 = v.trim().parse().map_err(|_| format!("value of '{k}' is not a number: '{v}'"))?;
        out.insert(k.trim().to_string(), v);
    }
    Ok(out)
}

fn load(path: &Path) -> Result<ProblemInstance, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Io(path.display().to_string(), e))?;
    Ok(parse_instance(&text)?)
}

fn eval(inst: &ProblemInstance, norm: NormKind, estimator: Estimator) -> Result<Value, Failure> {
    let (name, candidate, theta) = match estimator {
        Estimator::Lstd => {
            let lv = estimators::lstd_population(inst)?;
            ("lstd", lv.realized, Some(lv.theta))
        }
        Estimator::Bayes => ("bayes", estimators::bayes_abstraction(inst)?.composed, None),
        Estimator::BayesProj => {
            let lv = estimators::projected_bayes(inst)?.linear_value;
            ("bayes-proj", lv.realized, Some(lv.theta))
        }
    };
    let ratio = approx_ratio(inst, &candidate, norm)?;
    let report = match bounds::bound_report(inst) {
        Ok(r) => Some(r),
        Err(Error::AMatrixSingular(_)) => None,
        Err(e) => return Err(e.into()),
    };
    Ok(json!({
        "estimator": name,
        "norm": norm,
        "candidate": candidate.as_slice(),
        "theta": theta.as_ref().map(|t| t.as_slice()),
        "ratio": ratio,
        "bounds": report,
    }))
}

fn table_csv(cells: &[bounds::RegimeCell]) -> Result<String, Failure> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let out = |e: csv::Error| Failure::Output(e.to_string());
    w.write_record(["regime", "norm", "formula", "value", "exact", "applies"]).map_err(out)?;
    for c in cells {
        let norm = match c.norm {
            NormKind::L2mu => "l2mu",
            NormKind::Linf => "linf",
        };
        w.write_record([
            c.regime.label(),
            norm,
            c.formula,
            &c.value.to_string(),
            &c.exact.to_string(),
            &c.applies.to_string(),
        ])
        .map_err(out)?;
    }
    let bytes = w.into_inner().map_err(|e| Failure::Output(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Failure::Output(e.to_string()))
}

fn to_line(v: &impl serde::Serialize) -> Result<String, Failure> {
    serde_json::to_string(v).map(|s| s + "\n").map_err(|e| Failure::Output(e.to_string()))
}

/// Runs one command and returns its stdout text and exit code.
fn execute(cmd: Command) -> Result<(String, u8), Failure> {
    match cmd {
        Command::Eval { file, norm, estimator } => {
            let inst = load(&file)?;
            Ok((to_line(&eval(&inst, norm.into(), estimator)?)?, 0))
        }
        Command::Verify { id, params, seed, instance } => {
            let given = instance.as_deref().map(load).transpose()?;
            let report = verify::run_with_instance(&id, &params, seed, given.as_ref())?;
            let code = if report.pass { 0 } else { 1 };
            Ok((to_line(&report)?, code))
        }
        Command::Sample { file, n, seed, out } => {
            let inst = load(&file)?;
            let text = write_dataset(&estimators::sample_dataset(&inst, n, seed));
            match out {
                Some(path) => {
                    fs::write(&path, text).map_err(|e| Failure::Io(path.display().to_string(), e))?;
                    Ok((String::new(), 0))
                }
                None => Ok((text, 0)),
            }
        }
        Command::Table { file, format } => {
            let inst = load(&file)?;
            let cells = bounds::regime_table(&inst)?;
            let text = match format {
                Format::Csv => table_csv(&cells)?,
                Format::Json => to_line(&json!({ "instance": render_instance(&inst), "cells": cells }))?,
            };
            Ok((text, 0))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ");
            eprintln!("{}", json!({ "error": { "kind": "usage", "message": first } }));
            return ExitCode::from(2);
        }
    };
    match execute(cli.command) {
        Ok((stdout, code)) => {
            print!("{stdout}");
            ExitCode::from(code)
        }
        Err(f) => {
            eprintln!("{}", f.to_json());
            ExitCode::from(2)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn params_parse_pairs_and_infinity() {
        let p = parse_params("x=2, y=0.25,z=inf").unwrap();
        assert_eq!(p["x"], 2.0);
        assert_eq!(p["y"], 0.25);
        assert!(p["z"].is_infinite());
        assert!(parse_params("").unwrap().is_empty());
        assert!(parse_params("x").is_err());
        assert!(parse_params("x=abc").is_err());
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
