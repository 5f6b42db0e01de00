//! Run directories, CSV reports, summaries and provisioning savings.
//!
//! Layout of a run directory:
//!
//! ```text
//! run.json                     full result minus latency samples
//! topology.json                broker plan
//! deadletter.log               one JSON dead letter per line
//! metrics/latency_samples.csv  raw latencies (input of `report`)
//! metrics/*.csv                derived series (output of `report`)
//! summary.json                 medians, means, maxima, percentiles
//! store/                       optional event store segments
//! ```

use super::stats::{max, mean, median, percentiles, Percentiles};
use crate::broker::DeadLetter;
use crate::engine::{LatencySample, Provisioning, RunResult};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Corrupt { path: PathBuf, message: String },
    #[error("runs are not comparable: {0}")]
    Mismatch(String),
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> ReportError + '_ {
    move |source| ReportError::Io { path: path.to_path_buf(), source }
}

fn corrupt(path: &Path, message: impl ToString) -> ReportError {
    ReportError::Corrupt { path: path.to_path_buf(), message: message.to_string() }
}

/// Fractional savings of `auto` relative to `fixed` per resource.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Savings {
    pub cpu: f64,
    pub memory: f64,
}

/// `1 - ∫auto / ∫fixed` over equally long per-second series.
pub fn integral_savings(auto: &[f64], fixed: &[f64]) -> Result<f64, ReportError> {
    if auto.len() != fixed.len() {
        return Err(ReportError::Mismatch(format!("{} vs {} seconds", auto.len(), fixed.len())));
    }
    let a: f64 = auto.iter().sum();
    let f: f64 = fixed.iter().sum();
    if f <= 0.0 {
        return Err(ReportError::Mismatch("reference run requested no resources".into()));
    }
    Ok(1.0 - a / f)
}

/// Requested CPU and memory savings over the scenario duration.
pub fn savings(auto: &RunResult, fixed: &RunResult) -> Result<Savings, ReportError> {
    if auto.config.duration != fixed.config.duration {
        return Err(ReportError::Mismatch(format!(
            "durations {} and {}",
            auto.config.duration, fixed.config.duration
        )));
    }
    let (a, f) = (auto.scenario_seconds(), fixed.scenario_seconds());
    Ok(Savings {
        cpu: integral_savings(&auto.resources.requested_cpu[..a], &fixed.resources.requested_cpu[..f])?,
        memory: integral_savings(&auto.resources.requested_memory[..a], &fixed.resources.requested_memory[..f])?,
    })
}

/// Latency percentiles per service.
pub fn response_time(result: &RunResult) -> BTreeMap<String, Percentiles> {
    result
        .latency
        .iter()
        .filter_map(|(k, v)| {
            let l: Vec<f64> = v.iter().map(|s| s.latency).collect();
            percentiles(&l).map(|p| (k.clone(), p))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SeriesStats {
    pub median: f64,
    pub mean: f64,
    pub max: f64,
}

impl SeriesStats {
    pub fn of(values: &[f64]) -> Self {
        SeriesStats {
            median: median(values).unwrap_or(0.0),
            mean: mean(values).unwrap_or(0.0),
            max: max(values).unwrap_or(0.0),
        }
    }
}

/// Headline numbers of a run; per-second statistics cover `[0, duration)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub summary_hash: String,
    pub seed: u64,
    pub neighborhoods: u32,
    pub provisioning: String,
    pub duration: f64,
    pub seconds: usize,
    pub cloudevents_per_second: SeriesStats,
    pub mqtt_per_second: SeriesStats,
    pub pods: SeriesStats,
    pub requested_cpu: SeriesStats,
    pub requested_memory: SeriesStats,
    pub used_cpu: SeriesStats,
    pub used_memory: SeriesStats,
    /// CPU-seconds requested over the scenario.
    pub requested_cpu_integral: f64,
    /// Byte-seconds requested over the scenario.
    pub requested_memory_integral: f64,
    pub latency: BTreeMap<String, Percentiles>,
    pub generated_events: u64,
    pub store_appended: u64,
    pub dead_letters: u64,
}

fn as_f64(v: &[u64]) -> Vec<f64> {
    v.iter().map(|&x| x as f64).collect()
}

fn product(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x * y).collect()
}

pub fn summarize(r: &RunResult) -> Summary {
    let d = r.scenario_seconds();
    let res = &r.resources;
    let used_cpu = product(&res.requested_cpu, &res.used_cpu_fraction);
    let used_memory = product(&res.requested_memory, &res.used_memory_fraction);
    Summary {
        summary_hash: r.summary_hash.clone(),
        seed: r.config.seed,
        neighborhoods: r.config.neighborhoods,
        provisioning: r.config.provisioning.label(),
        duration: r.config.duration,
        seconds: r.seconds,
        cloudevents_per_second: SeriesStats::of(&as_f64(&r.broker.cloudevents_per_second[..d])),
        mqtt_per_second: SeriesStats::of(&as_f64(&r.broker.mqtt_per_second[..d])),
        pods: SeriesStats::of(&res.pods[..d]),
        requested_cpu: SeriesStats::of(&res.requested_cpu[..d]),
        requested_memory: SeriesStats::of(&res.requested_memory[..d]),
        used_cpu: SeriesStats::of(&used_cpu[..d]),
        used_memory: SeriesStats::of(&used_memory[..d]),
        requested_cpu_integral: res.requested_cpu[..d].iter().sum(),
        requested_memory_integral: res.requested_memory[..d].iter().sum(),
        latency: response_time(r),
        generated_events: r.generated.total,
        store_appended: r.store.appended,
        dead_letters: r.dead_letter_count,
    }
}

fn create(path: &Path) -> Result<fs::File, ReportError> {
    fs::File::create(path).map_err(io(path))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>, ReportError> {
    Ok(csv::Writer::from_writer(create(path)?))
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> ReportError + '_ {
    move |e| corrupt(path, e)
}

fn write_rows<I, R>(path: &Path, header: &[String], rows: I) -> Result<(), ReportError>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv_writer(path)?;
    w.write_record(header).map_err(csv_err(path))?;
    for row in rows {
        w.write_record(row).map_err(csv_err(path))?;
    }
    w.flush().map_err(io(path))
}

fn strings(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), ReportError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| corrupt(path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(io(path))
}

/// Writes the raw artifacts of a run, then its report.
pub fn write_run(dir: &Path, r: &RunResult) -> Result<Summary, ReportError> {
    let metrics = dir.join("metrics");
    fs::create_dir_all(&metrics).map_err(io(&metrics))?;
    write_json(&dir.join("run.json"), r)?;
    write_json(&dir.join("topology.json"), &r.topology)?;
    let log = dir.join("deadletter.log");
    let mut f = std::io::BufWriter::new(create(&log)?);
    for d in &r.dead_letters {
        let line = serde_json::to_string(d).map_err(|e| corrupt(&log, e))?;
        writeln!(f, "{line}").map_err(io(&log))?;
    }
    f.flush().map_err(io(&log))?;
    let samples = metrics.join("latency_samples.csv");
    write_rows(
        &samples,
        &strings(&["service", "time", "latency"]),
        r.latency.iter().flat_map(|(k, v)| {
            v.iter().map(move |s| vec![k.clone(), s.time.to_string(), s.latency.to_string()])
        }),
    )?;
    write_report(dir)
}

/// Loads a run directory and checks it against its summary hash.
pub fn read_run(dir: &Path) -> Result<RunResult, ReportError> {
    let path = dir.join("run.json");
    let text = fs::read_to_string(&path).map_err(io(&path))?;
    let mut r: RunResult = serde_json::from_str(&text).map_err(|e| corrupt(&path, e))?;

    let samples = dir.join("metrics").join("latency_samples.csv");
    let mut rd = csv::Reader::from_path(&samples).map_err(csv_err(&samples))?;
    for rec in rd.records() {
        let rec = rec.map_err(csv_err(&samples))?;
        let field = |i: usize| rec.get(i).ok_or_else(|| corrupt(&samples, "short row"));
        let num = |i: usize| -> Result<f64, ReportError> {
            field(i)?.parse().map_err(|e| corrupt(&samples, format!("{e}")))
        };
        let s = LatencySample { time: num(1)?, latency: num(2)? };
        r.latency.entry(field(0)?.to_string()).or_default().push(s);
    }
    for s in &r.services {
        r.latency.entry(s.name.clone()).or_default();
    }

    let log = dir.join("deadletter.log");
    let f = fs::File::open(&log).map_err(io(&log))?;
    for line in BufReader::new(f).lines() {
        let line = line.map_err(io(&log))?;
        if !line.trim().is_empty() {
            let d: DeadLetter = serde_json::from_str(&line).map_err(|e| corrupt(&log, e))?;
            r.dead_letters.push(d);
        }
    }
    let hash = r.compute_hash();
    if hash != r.summary_hash {
        return Err(corrupt(dir, format!("summary hash mismatch: recorded {}, computed {hash}", r.summary_hash)));
    }
    Ok(r)
}

/// Regenerates `metrics/*.csv` and `summary.json` from a run directory.
pub fn write_report(dir: &Path) -> Result<Summary, ReportError> {
    let r = read_run(dir)?;
    let m = dir.join("metrics");
    fs::create_dir_all(&m).map_err(io(&m))?;
    let secs = 0..r.seconds;
    let res = &r.resources;
    let b = &r.broker;

    write_rows(
        &m.join("events_per_second.csv"),
        &strings(&["second", "cloudevents", "mqtt"]),
        secs.clone().map(|t| vec![t.to_string(), b.cloudevents_per_second[t].to_string(), b.mqtt_per_second[t].to_string()]),
    )?;
    write_rows(
        &m.join("events_by_type.csv"),
        &strings(&["second", "type", "count"]),
        secs.clone().flat_map(|t| {
            b.cloudevents_by_type_per_second.iter().map(move |(ty, v)| vec![t.to_string(), ty.clone(), v[t].to_string()])
        }),
    )?;
    let mut header = strings(&["second", "total"]);
    header.extend(r.services.iter().map(|s| s.name.clone()));
    write_rows(
        &m.join("pods.csv"),
        &header,
        secs.clone().map(|t| {
            let mut row = vec![t.to_string(), res.pods[t].to_string()];
            row.extend(r.services.iter().map(|s| s.usage.replicas[t].to_string()));
            row
        }),
    )?;
    write_rows(
        &m.join("cpu.csv"),
        &strings(&["second", "requested_cpu", "used_cpu_fraction", "used_cpu"]),
        secs.clone().map(|t| {
            let (req, frac) = (res.requested_cpu[t], res.used_cpu_fraction[t]);
            vec![t.to_string(), req.to_string(), frac.to_string(), (req * frac).to_string()]
        }),
    )?;
    write_rows(
        &m.join("memory.csv"),
        &strings(&["second", "requested_memory_bytes", "used_memory_fraction", "used_memory_bytes"]),
        secs.clone().map(|t| {
            let (req, frac) = (res.requested_memory[t], res.used_memory_fraction[t]);
            vec![t.to_string(), req.to_string(), frac.to_string(), (req * frac).to_string()]
        }),
    )?;
    write_rows(
        &m.join("queue_depths.csv"),
        &strings(&["second", "queue", "max_depth"]),
        secs.clone().flat_map(|t| {
            b.queues.iter().map(move |(q, s)| vec![t.to_string(), q.clone(), s.depth_per_second[t].to_string()])
        }),
    )?;
    write_rows(
        &m.join("scaling_trace.csv"),
        &strings(&["time", "service", "ready", "cold_starting", "buffered", "desired"]),
        r.trace.iter().map(|row| {
            vec![
                row.time.to_string(),
                row.service.clone(),
                row.ready.to_string(),
                row.cold_starting.to_string(),
                row.buffered.to_string(),
                row.desired.to_string(),
            ]
        }),
    )?;
    let summary = summarize(&r);
    write_rows(
        &m.join("latency_percentiles.csv"),
        &strings(&["service", "count", "p50", "p90", "p95", "p99"]),
        summary.latency.iter().map(|(k, p)| {
            vec![k.clone(), p.count.to_string(), p.p50.to_string(), p.p90.to_string(), p.p95.to_string(), p.p99.to_string()]
        }),
    )?;
    write_json(&dir.join("summary.json"), &summary)?;
    Ok(summary)
}

/// Event-store history of one key as CSV (`sequence,time,payload`).
pub fn export_history(
    store: &crate::store::EventStore,
    interface: &str,
    instance: &str,
    out: &mut dyn Write,
) -> Result<usize, ReportError> {
    let q = crate::store::RangeQuery::key(interface, instance, f64::NEG_INFINITY, f64::INFINITY, usize::MAX);
    let events = store.range_all(q).map_err(|e| corrupt(Path::new(interface), e))?;
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| corrupt(Path::new("history"), e);
    w.write_record(["sequence", "time", "payload"]).map_err(err)?;
    for e in &events {
        w.write_record([e.sequence.to_string(), e.time.to_string(), String::from_utf8_lossy(&e.payload).into_owned()])
            .map_err(err)?;
    }
    w.flush().map_err(|e| corrupt(Path::new("history"), e))?;
    Ok(events.len())
}

/// One-line comparison of two runs; savings when one side is auto and
/// the other fixed.
pub fn compare(a: &RunResult, b: &RunResult) -> Result<String, ReportError> {
    let (sa, sb) = (summarize(a), summarize(b));
    let mut out = format!(
        "A {}: median events/s {}, mean pods {:.2}, cpu-s {:.1}\nB {}: median events/s {}, mean pods {:.2}, cpu-s {:.1}\n",
        sa.provisioning,
        sa.cloudevents_per_second.median,
        sa.pods.mean,
        sa.requested_cpu_integral,
        sb.provisioning,
        sb.cloudevents_per_second.median,
        sb.pods.mean,
        sb.requested_cpu_integral,
    );
    let pair = match (a.config.provisioning, b.config.provisioning) {
        (Provisioning::Auto, Provisioning::Fixed { .. }) => Some((a, b)),
        (Provisioning::Fixed { .. }, Provisioning::Auto) => Some((b, a)),
        _ => None,
    };
    if let Some((auto, fixed)) = pair {
        let s = savings(auto, fixed)?;
        out.push_str(&format!("cpu savings {:.1}%\nmemory savings {:.1}%\n", s.cpu * 100.0, s.memory * 100.0));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integral_ratios() {
        let f = vec![16.0; 10];
        assert_eq!(integral_savings(&f, &f).unwrap(), 0.0);
        assert_eq!(integral_savings(&[8.0; 10], &f).unwrap(), 0.5);
        assert!(integral_savings(&[1.0], &f).is_err());
    }
}
