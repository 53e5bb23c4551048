//! CSV and JSON output files.
//!
//! Floats are written with Rust's shortest round-trip formatting, so every
//! value parses back to the identical `f64`.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use dfsmc_core::rad_to_deg;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::experiment::{ExperimentOutput, SweepReport, TrialOutcome};

/// Noise model recorded alongside every result.
pub const SNR_DEFINITION: &str =
    "noise variance = P_s * 10^(-SNR/10), P_s = E|s|^2 = 3 (signal mean sqrt(2)*j, unit variance)";

#[derive(Serialize)]
struct Summary<'a> {
    generator: &'static str,
    snr_definition: &'static str,
    config: &'a ExperimentConfig,
    sweep: &'a SweepReport,
}

pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

fn join(values: &[f64]) -> String {
    values.iter().map(|&v| fmt_f64(v)).collect::<Vec<_>>().join(";")
}

fn csv_writer(path: &Path) -> io::Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).map_err(io::Error::other)
}

fn finish(mut w: csv::Writer<fs::File>) -> io::Result<()> {
    w.flush()
}

/// `spectrum_<method>_<trial>.csv`, with the sweep point index inserted
/// (`spectrum_<method>_s<point>_<trial>.csv`) when sweeping.
pub fn spectrum_file_name(prefix: &str, o: &TrialOutcome, sweeping: bool) -> String {
    let r = &o.report;
    if sweeping {
        format!("{prefix}_{}_s{}_{}.csv", r.method, r.point, r.trial)
    } else {
        format!("{prefix}_{}_{}.csv", r.method, r.trial)
    }
}

/// Writes every output file into `dir` (created if missing) and returns
/// the paths written.
pub fn write_outputs(out: &ExperimentOutput, dir: &Path) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let sweeping = out.config.sweep.is_some();

    let path = dir.join("trials.csv");
    write_trials(&path, &out.outcomes)?;
    written.push(path);

    if out.config.write_spectra {
        for o in &out.outcomes {
            let path = dir.join(spectrum_file_name("spectrum", o, sweeping));
            write_spectrum(&path, o, out.config.grid.min_deg, out.config.grid.step_deg)?;
            written.push(path);
        }
    }
    if out.config.write_traces {
        for o in out.outcomes.iter().filter(|o| o.trace.is_some()) {
            let path = dir.join(spectrum_file_name("trace", o, sweeping));
            write_trace(&path, o)?;
            written.push(path);
        }
    }
    if out.config.write_timing {
        let path = dir.join("timing.csv");
        write_timing(&path, &out.outcomes)?;
        written.push(path);
    }

    let path = dir.join("summary.json");
    let summary = Summary {
        generator: concat!("dfsmc ", env!("CARGO_PKG_VERSION")),
        snr_definition: SNR_DEFINITION,
        config: &out.config,
        sweep: &out.sweep,
    };
    let mut text = serde_json::to_string_pretty(&summary).map_err(io::Error::other)?;
    text.push('\n');
    fs::write(&path, text)?;
    written.push(path);
    Ok(written)
}

fn write_trials(path: &Path, outcomes: &[TrialOutcome]) -> io::Result<()> {
    let mut w = csv_writer(path)?;
    let rows = outcomes.iter().map(|o| {
        let r = &o.report;
        [
            r.point.to_string(),
            r.sweep_value.map(fmt_f64).unwrap_or_default(),
            r.trial.to_string(),
            r.seed.to_string(),
            r.method.to_string(),
            join(&r.truth_deg),
            join(&r.picked_deg),
            fmt_f64(r.e1_deg),
        ]
    });
    w.write_record([
        "point",
        "sweep_value",
        "trial",
        "seed",
        "method",
        "truth_deg",
        "picked_deg",
        "e1_deg",
    ])?;
    for row in rows {
        w.write_record(&row)?;
    }
    finish(w)
}

fn write_spectrum(path: &Path, o: &TrialOutcome, min_deg: f64, step_deg: f64) -> io::Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["grid_deg", "offset_deg", "power"])?;
    for (u, (&p, &nu)) in o.spectrum.power.iter().zip(&o.spectrum.offsets).enumerate() {
        let grid_deg = min_deg + u as f64 * step_deg;
        w.write_record([fmt_f64(grid_deg), fmt_f64(rad_to_deg(nu)), fmt_f64(p)])?;
    }
    finish(w)
}

fn write_trace(path: &Path, o: &TrialOutcome) -> io::Result<()> {
    let trace = o.trace.as_ref().expect("filtered");
    let mut w = csv_writer(path)?;
    w.write_record([
        "iteration",
        "phase",
        "alpha_n",
        "spectrum_change",
        "coupling_residual",
        "offgrid_residual",
    ])?;
    let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
    for rec in &trace.records {
        w.write_record([
            rec.iteration.to_string(),
            rec.phase.as_str().to_string(),
            fmt_f64(rec.alpha_n),
            fmt_f64(rec.spectrum_change),
            opt(rec.coupling_residual),
            opt(rec.offgrid_residual),
        ])?;
    }
    finish(w)
}

fn write_timing(path: &Path, outcomes: &[TrialOutcome]) -> io::Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["point", "trial", "method", "wall_time_s"])?;
    for o in outcomes {
        let r = &o.report;
        w.write_record([
            r.point.to_string(),
            r.trial.to_string(),
            r.method.to_string(),
            fmt_f64(r.wall_time_s),
        ])?;
    }
    finish(w)
}

/// Plain-text table of `e₂` and median `e₁` per method and sweep point.
pub fn render_table(report: &SweepReport) -> String {
    let mut s = String::new();
    let axis = report.axis.map(|a| a.name()).unwrap_or("-");
    s.push_str(&format!(
        "{:<28} {:>12} {:>12} {:>14}\n",
        "method", axis, "e2_deg", "median_e1_deg"
    ));
    for m in &report.methods {
        for (i, (e2, e1)) in m.e2_deg.iter().zip(&m.median_e1_deg).enumerate() {
            let point = report.values.get(i).map(|v| fmt_f64(*v)).unwrap_or_else(|| "-".into());
            s.push_str(&format!("{:<28} {:>12} {:>12.4} {:>14.4}\n", m.label, point, e2, e1));
        }
    }
    s.push_str(&format!("trials per point: {}\n", report.trials));
    s
}
