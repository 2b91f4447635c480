//! `scatter-kalman <forward|synth|reconstruct|equivalence|sweep> --config <path> --out <dir>`
//!
//! Every subcommand writes its artifacts plus a `manifest.toml` with the
//! resolved configuration into `--out`. Failures exit nonzero and print one
//! line `error: kind=<kind> message="<text>"` to standard error; whatever
//! was written before the failure stays, and the manifest says `FAILED`.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::Parser;
use rayon::prelude::*;

use crate::config::{parse_config, RunConfig};
use crate::experiments::{
    equivalence_harness, run_reconstruction_with, synthesize_measurements, ScenarioConfig,
};
use crate::filters::MeasurementSet;
use crate::forward::ForwardModel;
use crate::grid::MediumField;
use crate::io::{
    complex_table, field_to_csv, field_to_pgm, mse_csv, sweep_summary_csv, timing_csv, write_file, SummaryRow,
};
use crate::{Error, Result};

/// Command line of the `scatter-kalman` binary.
#[derive(Debug, Clone, Parser)]
#[command(
    name = "scatter-kalman",
    version,
    about = "Inverse medium scattering with Kalman-type reconstructions"
)]
pub struct Invocation {
    #[arg(value_enum)]
    pub subcommand: SubcommandName,
    /// Scenario file (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long)]
    pub out: PathBuf,
    /// Override a config key, `key=value` or `section.key=value`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SubcommandName {
    /// Solve the forward problem for the true contrast and write the fields.
    Forward,
    /// Write synthetic (optionally noisy) far-field measurements.
    Synth,
    /// Run one reconstruction and write its error history and estimates.
    Reconstruct,
    /// Check the Kalman / full-data equivalences and report deviations.
    Equivalence,
    /// Run every (axis value, algorithm) cell of a sweep.
    Sweep,
}

impl SubcommandName {
    pub fn name(&self) -> &'static str {
        match self {
            SubcommandName::Forward => "forward",
            SubcommandName::Synth => "synth",
            SubcommandName::Reconstruct => "reconstruct",
            SubcommandName::Equivalence => "equivalence",
            SubcommandName::Sweep => "sweep",
        }
    }
}

/// Parses arguments, runs, reports errors; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let invocation = match Invocation::try_parse_from(args) {
        Ok(inv) => inv,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(&invocation) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", error_line(&e));
            match e {
                Error::Config { .. } | Error::ConfigParse(_) => 2,
                _ => 1,
            }
        }
    }
}

/// `error: kind=<kind> message="<text>"` with quotes and newlines escaped.
pub fn error_line(e: &Error) -> String {
    let message = e.to_string().replace('\\', "\\\\").replace('"', "\\\"").replace('\n', "\\n");
    format!("error: kind={} message=\"{}\"", e.kind(), message)
}

pub fn run(invocation: &Invocation) -> Result<()> {
    let config = parse_config(&invocation.config, &invocation.overrides)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = invocation.workers {
        if n == 0 {
            return Err(Error::config("workers", "must be at least 1"));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| Error::Internal(e.to_string()))?;
    pool.install(|| execute(invocation.subcommand, &config, &invocation.out))
}

/// Runs one subcommand with an already parsed configuration.
pub fn execute(subcommand: SubcommandName, config: &RunConfig, out: &Path) -> Result<()> {
    create_dir(out)?;
    let mut manifest = Manifest::start(subcommand, config);
    let result = match subcommand {
        SubcommandName::Forward => cmd_forward(config, out),
        SubcommandName::Synth => cmd_synth(config, out),
        SubcommandName::Reconstruct => cmd_reconstruct(config, out),
        SubcommandName::Equivalence => cmd_equivalence(config, out),
        SubcommandName::Sweep => cmd_sweep(config, out),
    };
    manifest.finish(result.as_ref().err());
    let written = manifest.write(out);
    result.and(written)
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

struct Manifest {
    subcommand: &'static str,
    config: String,
    seed: u64,
    started: u64,
    finished: u64,
    error: Option<(String, String)>,
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

impl Manifest {
    fn start(subcommand: SubcommandName, config: &RunConfig) -> Self {
        Manifest {
            subcommand: subcommand.name(),
            config: config.to_toml(),
            seed: config.scenario.seed,
            started: unix_now(),
            finished: 0,
            error: None,
        }
    }

    fn finish(&mut self, error: Option<&Error>) {
        self.finished = unix_now();
        self.error = error.map(|e| (e.kind().to_string(), e.to_string()));
    }

    fn render(&self) -> String {
        let mut run = toml::Table::new();
        let status = if self.error.is_some() { "FAILED" } else { "OK" };
        run.insert("status".into(), status.into());
        run.insert("subcommand".into(), self.subcommand.into());
        run.insert("version".into(), env!("CARGO_PKG_VERSION").into());
        run.insert("seed".into(), toml::Value::Integer(self.seed as i64));
        run.insert("started_unix".into(), toml::Value::Integer(self.started as i64));
        run.insert("finished_unix".into(), toml::Value::Integer(self.finished as i64));
        if let Some((kind, message)) = &self.error {
            run.insert("error_kind".into(), kind.as_str().into());
            run.insert("error".into(), message.as_str().into());
        }
        let mut doc = toml::Table::new();
        doc.insert("run".into(), toml::Value::Table(run));
        format!("{doc}\n{}", self.config)
    }

    fn write(&self, out: &Path) -> Result<()> {
        write_file(&out.join("manifest.toml"), &self.render())
    }
}

fn synthesize(scenario: &ScenarioConfig) -> Result<(ForwardModel, MediumField, MeasurementSet)> {
    let model = scenario.forward_model()?;
    let q_true = scenario.true_contrast()?;
    let data = synthesize_measurements(&q_true, scenario, &model)?;
    Ok((model, q_true, data))
}

fn write_field(out: &Path, stem: &str, field: &MediumField) -> Result<()> {
    write_file(&out.join(format!("{stem}.csv")), &field_to_csv(field))?;
    write_file(&out.join(format!("{stem}.pgm")), &field_to_pgm(field))
}

/// Far field `u_inf(xhat_j, theta_n)` and total field `u(y_c, theta_n)`
/// of the true contrast, long format with one-based indices.
fn cmd_forward(config: &RunConfig, out: &Path) -> Result<()> {
    let scenario = &config.scenario;
    let model = scenario.forward_model()?;
    let q_true = scenario.true_contrast()?;
    write_field(out, "true_contrast", &q_true)?;
    let directions = scenario.direction_set()?;
    let lin = model.linearize(&q_true)?;
    let per_direction: Vec<Result<_>> = (0..directions.len())
        .into_par_iter()
        .map(|n| {
            let u = lin.total_field(directions.get(n)).map_err(|e| e.at_direction(n + 1))?;
            let far = lin.far_field(directions.get(n)).map_err(|e| e.at_direction(n + 1))?;
            Ok((u, far))
        })
        .collect();
    let per_direction = per_direction.into_iter().collect::<Result<Vec<_>>>()?;
    let far_rows = per_direction.iter().enumerate().flat_map(|(n, (_, far))| {
        far.values().iter().enumerate().map(move |(j, v)| (format!("{},{}", n + 1, j + 1), *v))
    });
    write_file(&out.join("far_field.csv"), &complex_table("direction,observation", far_rows))?;
    let total_rows = per_direction.iter().enumerate().flat_map(|(n, (u, _))| {
        u.values().iter().enumerate().map(move |(c, v)| (format!("{},{}", n + 1, c), *v))
    });
    write_file(&out.join("total_field.csv"), &complex_table("direction,cell", total_rows))
}

fn measurement_table(data: &MeasurementSet) -> String {
    let rows = data.data.iter().enumerate().flat_map(|(n, far)| {
        far.values().iter().enumerate().map(move |(j, v)| (format!("{},{}", n + 1, j + 1), *v))
    });
    complex_table("direction,observation", rows)
}

fn cmd_synth(config: &RunConfig, out: &Path) -> Result<()> {
    let (_, q_true, data) = synthesize(&config.scenario)?;
    write_field(out, "true_contrast", &q_true)?;
    write_file(&out.join("measurements.csv"), &measurement_table(&data))
}

/// Runs one reconstruction into `out` and returns its summary row data.
fn reconstruct_into(
    config: &RunConfig,
    scenario: &ScenarioConfig,
    prepared: &(ForwardModel, MediumField, MeasurementSet),
    out: &Path,
) -> (Vec<crate::experiments::IterationRecord>, Result<()>) {
    let (model, q_true, data) = prepared;
    let snapshot_dir = out.join("snapshots");
    let setup = || -> Result<()> {
        create_dir(out)?;
        write_field(out, "true_contrast", q_true)?;
        if config.output.snapshots {
            create_dir(&snapshot_dir)?;
        }
        Ok(())
    };
    if let Err(e) = setup() {
        return (Vec::new(), Err(e));
    }
    let history = run_reconstruction_with(scenario, data, q_true, model, |record, q| {
        if config.output.snapshots {
            write_field(&snapshot_dir, &format!("iter_{:03}", record.iteration), q)?;
        }
        Ok(())
    });
    let history = match history {
        Ok(h) => h,
        Err(e) => return (Vec::new(), Err(e)),
    };
    let written = (|| -> Result<()> {
        write_file(&out.join("mse.csv"), &mse_csv(&history.records, config.output.record_wall_time))?;
        write_file(&out.join("timing.csv"), &timing_csv(&history.records))?;
        write_field(out, "final_estimate", &history.final_estimate)
    })();
    let result = match (history.failure, written) {
        (Some(e), _) => Err(e),
        (None, w) => w,
    };
    (history.records, result)
}

fn cmd_reconstruct(config: &RunConfig, out: &Path) -> Result<()> {
    let prepared = synthesize(&config.scenario)?;
    reconstruct_into(config, &config.scenario, &prepared, out).1
}

fn cmd_equivalence(config: &RunConfig, out: &Path) -> Result<()> {
    let report = equivalence_harness(config.scale, config.scenario.seed)?;
    let mut text = String::from("check,index,relative_deviation\n");
    for (alpha, dev) in &report.linear {
        text.push_str(&format!("linear_alpha,{alpha},{dev:e}\n"));
    }
    for (i, dev) in &report.nonlinear {
        text.push_str(&format!("nonlinear_outer,{i},{dev:e}\n"));
    }
    write_file(&out.join("equivalence.csv"), &text)?;
    println!(
        "scale={} max_linear={:e} max_nonlinear={:e}",
        report.scale,
        report.max_linear(),
        report.max_nonlinear()
    );
    Ok(())
}

fn cmd_sweep(config: &RunConfig, out: &Path) -> Result<()> {
    let sweep = config
        .sweep
        .as_ref()
        .ok_or_else(|| Error::config("axis", "the sweep subcommand needs a [sweep] section"))?;
    let failures = Mutex::new(Vec::new());
    let rows: Vec<Vec<SummaryRow>> = sweep
        .values
        .par_iter()
        .map(|&value| {
            let fail_all = |e: Error| -> Vec<SummaryRow> {
                let status = format!("FAILED:{}", e.kind());
                failures.lock().expect("poisoned").push(e);
                sweep
                    .algorithms
                    .iter()
                    .map(|a| SummaryRow::from_records(value, a.name(), &[], &status))
                    .collect()
            };
            let base = match sweep.axis.apply(&config.scenario, value) {
                Ok(b) => b,
                Err(e) => return fail_all(e),
            };
            let prepared = match synthesize(&base) {
                Ok(p) => p,
                Err(e) => return fail_all(e),
            };
            sweep
                .algorithms
                .par_iter()
                .map(|&algorithm| {
                    let scenario = ScenarioConfig { algorithm, ..base.clone() };
                    let dir = out.join(format!("{}_{}", sweep.axis, value)).join(algorithm.name());
                    let cell_config = RunConfig {
                        scenario: scenario.clone(),
                        sweep: None,
                        ..config.clone()
                    };
                    let (records, result) = reconstruct_into(&cell_config, &scenario, &prepared, &dir);
                    let mut manifest = Manifest::start(SubcommandName::Reconstruct, &cell_config);
                    manifest.finish(result.as_ref().err());
                    let result = result.and(manifest.write(&dir));
                    match result {
                        Ok(()) => SummaryRow::from_records(value, algorithm.name(), &records, "ok"),
                        Err(e) => {
                            let row = SummaryRow::from_records(value, algorithm.name(), &records, &format!("FAILED:{}", e.kind()));
                            failures.lock().expect("poisoned").push(e);
                            row
                        }
                    }
                })
                .collect()
        })
        .collect();
    let rows: Vec<SummaryRow> = rows.into_iter().flatten().collect();
    write_file(&out.join("sweep_summary.csv"), &sweep_summary_csv(sweep.axis.name(), &rows))?;
    let failures = failures.into_inner().expect("poisoned");
    match failures.len() {
        0 => Ok(()),
        n => Err(Error::Internal(format!(
            "{n} of {} sweep cells failed, first: {}",
            rows.len(),
            failures[0]
        ))),
    }
}
