//! Output files of a run: waveforms, event log, summary, effective config
//! and comparison tables.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::breaker::Event;
use crate::error::{Result, SimError};
use crate::network::BreakerDesign;
use crate::scenario::{
    compute_metrics, Comparison, MetricInputs, Metrics, Probe, RelayTrip, SimulationResult,
};

pub const WAVEFORMS: &str = "waveforms.csv";
pub const EVENTS: &str = "events.jsonl";
pub const SUMMARY: &str = "summary.json";
pub const CONFIG: &str = "config.toml";
pub const COMPARE: &str = "compare.md";

fn io_err(path: &Path, e: impl std::fmt::Display) -> SimError {
    SimError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

/// Contents of summary.json.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub breaker_design: BreakerDesign,
    pub metrics: Metrics,
    pub first_trip: Option<f64>,
    pub trips: Vec<RelayTrip>,
    pub faulted_lines: Vec<usize>,
    /// Column names the metrics were computed from.
    pub metric_inputs: MetricInputs,
}

impl Summary {
    pub fn of(result: &SimulationResult) -> Self {
        Summary {
            breaker_design: result.config.breaker_design,
            metrics: result.metrics,
            first_trip: result.first_trip(),
            trips: result.trips.clone(),
            faulted_lines: result.faulted_lines.clone(),
            metric_inputs: result.metric_inputs.clone(),
        }
    }
}

/// Time column: fixed nine decimals. Samples sit on a whole-nanosecond
/// grid, so the text parses back to the same double.
fn format_time(t: f64) -> String {
    format!("{t:.9}")
}

/// Writes `time,<probe>...` with one row per sample. Values use the
/// shortest text that parses back to the identical double.
pub fn write_waveforms(result: &SimulationResult, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    let mut header = vec!["time".to_string()];
    header.extend(result.probes.iter().map(|p| p.name.clone()));
    w.write_record(&header).map_err(|e| io_err(path, e))?;
    let mut row = Vec::with_capacity(header.len());
    for (k, &t) in result.times.iter().enumerate() {
        row.clear();
        row.push(format_time(t));
        row.extend(result.probes.iter().map(|p| p.values[k].to_string()));
        w.write_record(&row).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Parsed waveforms.csv.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveforms {
    pub times: Vec<f64>,
    pub probes: Vec<Probe>,
}

impl Waveforms {
    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.probes
            .iter()
            .find(|p| p.name == name)
            .map(|p| p.values.as_slice())
    }
}

pub fn read_waveforms(path: &Path) -> Result<Waveforms> {
    let mut r = csv::Reader::from_path(path).map_err(|e| io_err(path, e))?;
    let header = r.headers().map_err(|e| io_err(path, e))?.clone();
    let mut times = Vec::new();
    let mut probes: Vec<Probe> = header
        .iter()
        .skip(1)
        .map(|name| Probe {
            name: name.to_string(),
            values: Vec::new(),
        })
        .collect();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| io_err(path, e))?;
        let num = |s: &str| {
            s.parse::<f64>()
                .map_err(|e| io_err(path, format!("row {}: {e}", line + 2)))
        };
        times.push(num(&rec[0])?);
        for (p, field) in probes.iter_mut().zip(rec.iter().skip(1)) {
            p.values.push(num(field)?);
        }
    }
    Ok(Waveforms { times, probes })
}

pub fn write_events(events: &[Event], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    for e in events {
        let line = serde_json::to_string(e).map_err(|e| io_err(path, e))?;
        writeln!(w, "{line}").map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

pub fn read_events(path: &Path) -> Result<Vec<Event>> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut out = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| io_err(path, e))?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line).map_err(|e| io_err(path, e))?);
        }
    }
    Ok(out)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| io_err(path, e))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

/// Writes waveforms.csv, events.jsonl, summary.json and config.toml into
/// `dir`, creating it if needed. Returns the written paths.
pub fn write_outputs(result: &SimulationResult, dir: &Path) -> Result<Vec<PathBuf>> {
    ensure_dir(dir)?;
    let paths: Vec<PathBuf> = [WAVEFORMS, EVENTS, SUMMARY, CONFIG]
        .iter()
        .map(|f| dir.join(f))
        .collect();
    write_waveforms(result, &paths[0])?;
    write_events(&result.events, &paths[1])?;
    let summary =
        serde_json::to_string_pretty(&Summary::of(result)).map_err(|e| io_err(&paths[2], e))?;
    write_text(&paths[2], &(summary + "\n"))?;
    write_text(&paths[3], &crate::config::to_toml(&result.config)?)?;
    Ok(paths)
}

pub fn read_summary(path: &Path) -> Result<Summary> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| io_err(path, e))
}

/// Metrics recomputed from the files in an output directory.
pub fn recompute_from_dir(dir: &Path) -> Result<Metrics> {
    let w = read_waveforms(&dir.join(WAVEFORMS))?;
    let s = read_summary(&dir.join(SUMMARY))?;
    compute_metrics(
        &w.times,
        &|name| w.column(name).map(<[f64]>::to_vec),
        &s.metric_inputs,
    )
}

fn cell(x: Option<f64>, unit: &str) -> String {
    match x {
        None => "n/a".into(),
        Some(v) if unit == "s" => format!("{:.3} ms", v * 1e3),
        Some(v) if unit == "A" => format!("{:.1} kA", v / 1e3),
        Some(v) if unit == "J" => format!("{:.3} MJ", v / 1e6),
        Some(v) if unit == "V" => format!("{:.1} kV", v / 1e3),
        Some(v) => format!("{v} {unit}"),
    }
}

/// Markdown table of a comparison.
pub fn comparison_markdown(c: &Comparison) -> String {
    let (a, b) = (format!("{:?}", c.a_design), format!("{:?}", c.b_design));
    let mut s = format!("# {a} vs {b}\n\n| Metric | {a} | {b} |\n|---|---|---|\n");
    for r in &c.rows {
        s += &format!(
            "| {} | {} | {} |\n",
            r.label,
            cell(r.a, &r.unit),
            cell(r.b, &r.unit)
        );
    }
    s += "\n";
    match c.main_breaker_stress_ratio {
        Some(x) => s += &format!("- Main-breaker stress ratio ({b} / {a}): {x:.3}\n"),
        None => s += "- Main-breaker stress ratio: n/a\n",
    }
    match c.interruption_time_difference {
        Some(x) => {
            s += &format!(
                "- Interruption-time difference ({a} - {b}): {:.3} ms\n",
                x * 1e3
            )
        }
        None => s += "- Interruption-time difference: n/a\n",
    }
    s += &format!(
        "- MOV energy difference ({a} - {b}): {:.3} MJ\n",
        c.mov_energy_difference / 1e6
    );
    s
}

/// Writes compare.md and compare.json.
pub fn write_comparison(c: &Comparison, dir: &Path) -> Result<()> {
    ensure_dir(dir)?;
    write_text(&dir.join(COMPARE), &comparison_markdown(c))?;
    let json = serde_json::to_string_pretty(c).map_err(|e| io_err(dir, e))?;
    write_text(&dir.join("compare.json"), &(json + "\n"))
}

/// Writes sweep.csv (one row per value) and a subdirectory of full
/// outputs per run.
pub fn write_sweep(
    path: &str,
    values: &[f64],
    results: &[SimulationResult],
    dir: &Path,
) -> Result<()> {
    ensure_dir(dir)?;
    let table = dir.join("sweep.csv");
    let mut w = csv::Writer::from_path(&table).map_err(|e| io_err(&table, e))?;
    w.write_record([
        path,
        "first_trip",
        "interruption_time",
        "peak_fault_current",
        "max_main_breaker_current",
        "mov_energy",
        "min_bus_voltage",
    ])
    .map_err(|e| io_err(&table, e))?;
    let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
    for (k, (v, r)) in values.iter().zip(results).enumerate() {
        let m = &r.metrics;
        w.write_record([
            v.to_string(),
            opt(r.first_trip()),
            opt(m.interruption_time),
            opt(m.peak_fault_current),
            opt(m.max_main_breaker_current),
            m.mov_energy.to_string(),
            m.min_bus_voltage.to_string(),
        ])
        .map_err(|e| io_err(&table, e))?;
        write_outputs(r, &dir.join(format!("run{k:03}")))?;
    }
    w.flush().map_err(|e| io_err(&table, e))
}
