use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use hetero_doa::config::load_spec;
use hetero_doa::crlb::{closed_form_deviations, crlb_report, FimMethod};
use hetero_doa::experiment::{
    rmse_sweep, run_trial, write_csv, Execution, ExperimentSpec, Method, SweepRow, SweepVar,
};

mod plot;

#[derive(Parser)]
#[command(version, about = "Monte Carlo DOA experiments for H²AD-FD receivers")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(clap::Args)]
struct SpecArgs {
    /// TOML experiment file; Table I defaults otherwise.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_parser = parse_sweep)]
    sweep: Option<SweepVar>,
    /// Comma-separated sweep values.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    values: Option<Vec<f64>>,
    /// Comma-separated methods.
    #[arg(long, value_delimiter = ',', value_parser = parse_method)]
    methods: Option<Vec<Method>>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// External FD estimator, invoked as `CMD FEATURES ESTIMATE`.
    #[arg(long)]
    estimator_cmd: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    snr: Option<f64>,
    #[arg(long)]
    snapshots: Option<usize>,
}

#[derive(Subcommand)]
enum Cmd {
    /// RMSE sweep written as CSV.
    Sweep {
        #[command(flatten)]
        spec: SpecArgs,
        /// CSV destination; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// SVG plot of RMSE and CRLB curves.
        #[arg(long)]
        plot: Option<PathBuf>,
        /// Run trials on one thread.
        #[arg(long)]
        serial: bool,
    },
    /// One trial printed as JSON.
    Trial {
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long, value_parser = parse_method, default_value = "comd-rootmusic")]
        method: Method,
        /// Sweep value; the first configured value when omitted.
        #[arg(long, allow_negative_numbers = true)]
        value: Option<f64>,
        #[arg(long, default_value_t = 0)]
        index: usize,
    },
    /// FIMs and CRLBs at the configured operating point, printed as JSON.
    Crlb {
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long, allow_negative_numbers = true)]
        theta: Option<f64>,
        #[arg(long, value_enum, default_value_t = FimChoice::Numeric)]
        fim: FimChoice,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum FimChoice {
    Numeric,
    Exact,
    ClosedForm,
}

fn parse_sweep(s: &str) -> Result<SweepVar, String> {
    s.parse().map_err(|e: hetero_doa::Error| e.to_string())
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: hetero_doa::Error| e.to_string())
}

impl SpecArgs {
    fn build(&self, need_sweep: bool) -> Result<ExperimentSpec> {
        let mut spec = match &self.config {
            Some(path) => load_spec(path).with_context(|| format!("loading {}", path.display()))?,
            None => {
                let sweep = match self.sweep {
                    Some(s) => s,
                    None if need_sweep => bail!("--sweep is required without --config"),
                    None => SweepVar::Snr,
                };
                let values = match &self.values {
                    Some(v) => v.clone(),
                    None if need_sweep => bail!("--values is required without --config"),
                    None => vec![0.0],
                };
                ExperimentSpec::table_one(sweep, values)
            }
        };
        if let Some(s) = self.sweep {
            spec.sweep = s;
        }
        if let Some(v) = &self.values {
            spec.values = v.clone();
        }
        if let Some(m) = &self.methods {
            spec.methods = m.clone();
        }
        if let Some(t) = self.trials {
            spec.trials = t;
        }
        if let Some(s) = self.seed {
            spec.master_seed = s;
        }
        if let Some(c) = &self.estimator_cmd {
            spec.estimator_command = Some(c.clone());
        }
        if let Some(s) = self.snr {
            spec.snr_db = s;
        }
        if let Some(l) = self.snapshots {
            spec.snapshots = l;
        }
        spec.validate()?;
        Ok(spec)
    }
}

fn emit_csv(rows: &[SweepRow], out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => {
            let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
            write_csv(rows, BufWriter::new(file))?;
        }
        None => write_csv(rows, io::stdout().lock())?,
    }
    Ok(())
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Cmd::Sweep { spec, out, plot, serial } => {
            let spec = spec.build(true)?;
            let exec = if serial { Execution::Serial } else { Execution::Parallel };
            let rows = rmse_sweep(&spec, exec)?;
            emit_csv(&rows, out.as_deref())?;
            if let Some(path) = plot {
                plot::rmse_svg(&rows, spec.sweep, &path)?;
            }
        }
        Cmd::Trial { spec, method, value, index } => {
            let mut spec = spec.build(false)?;
            if method.needs_estimator() && !spec.methods.contains(&method) {
                spec.methods.push(method);
            }
            let value = value.unwrap_or(spec.values[0]);
            print_json(&run_trial(&spec, method, value, index)?)?;
        }
        Cmd::Crlb { spec, theta, fim } => {
            let spec = spec.build(false)?;
            let theta = theta.unwrap_or(spec.theta0_deg);
            let method = match fim {
                FimChoice::Numeric => FimMethod::Numeric,
                FimChoice::Exact => FimMethod::Exact,
                FimChoice::ClosedForm => FimMethod::ClosedForm,
            };
            let report = crlb_report(&spec.config, theta, spec.snr_db, spec.snapshots, method)?;
            let deviations = closed_form_deviations(&spec.config, theta, spec.snr_db, spec.snapshots)?;
            print_json(&serde_json::json!({
                "theta_deg": theta,
                "snr_db": spec.snr_db,
                "snapshots": spec.snapshots,
                "report": report,
                "total_std_deg": report.total_std_deg(),
                "closed_form_deviations": deviations,
            }))?;
        }
    }
    Ok(())
}
