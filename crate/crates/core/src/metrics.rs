//! Aggregation of epoch records into hit-rate and gain-multiplier
//! statistics, and their CSV/JSON output.
//!
//! Record CSV columns, one row per client per epoch:
//!
//! ```text
//! policy,epoch,client_id,server_id,b_baseline_mbps,b_achieved_mbps,gain_mbps,gamma
//! ```
//!
//! `server_id` is empty for clients left on their direct path and `gamma` is
//! empty for clients without a usable candidate.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::sim::{EpochRecord, Policy};

pub const CSV_HEADER: [&str; 8] = [
    "policy",
    "epoch",
    "client_id",
    "server_id",
    "b_baseline_mbps",
    "b_achieved_mbps",
    "gain_mbps",
    "gamma",
];

/// achieved / baseline. A zero baseline has no meaningful ratio.
pub fn gain_multiplier(b_achieved: f64, b_baseline: f64) -> Result<f64> {
    if !(b_achieved.is_finite() && b_achieved >= 0.0 && b_baseline.is_finite()) {
        return Err(Error::Validation(format!(
            "gain multiplier inputs must be finite and non-negative: {b_achieved}, {b_baseline}"
        )));
    }
    if b_baseline <= 0.0 {
        return Err(Error::DeadDirectPath);
    }
    Ok(b_achieved / b_baseline)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CdfPoint {
    pub value: f64,
    /// Share of samples ≤ `value`.
    pub fraction: f64,
}

/// Empirical CDF: one point per distinct value, ascending.
pub fn cdf(values: &[f64]) -> Result<Vec<CdfPoint>> {
    if values.is_empty() {
        return Err(Error::Empty("cdf"));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::Validation("cdf input contains NaN".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut points: Vec<CdfPoint> = Vec::new();
    for (i, v) in sorted.iter().enumerate() {
        let fraction = (i + 1) as f64 / n;
        match points.last_mut() {
            Some(last) if last.value == *v => last.fraction = fraction,
            _ => points.push(CdfPoint {
                value: *v,
                fraction,
            }),
        }
    }
    Ok(points)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub count: usize,
    pub min: f64,
    pub mean: f64,
    pub max: f64,
}

impl Stats {
    /// All zeros for an empty sample.
    pub fn of(values: &[f64]) -> Stats {
        if values.is_empty() {
            return Stats::default();
        }
        let sum: f64 = values.iter().sum();
        Stats {
            count: values.len(),
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            mean: sum / values.len() as f64,
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    if v.len() % 2 == 1 {
        v[mid]
    } else {
        (v[mid - 1] + v[mid]) / 2.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochObjective {
    pub epoch: u64,
    pub objective_mbps: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicySummary {
    pub policy: Policy,
    pub epochs: usize,
    /// Client-epoch records.
    pub client_records: usize,
    /// Records with at least one candidate and a positive best rate.
    pub gamma_records: usize,
    pub mean_gamma: f64,
    pub median_gamma: f64,
    /// Share of `gamma_records` where a best-rate option was chosen.
    pub frac_gamma_one: f64,
    /// Multipliers of clients that had at least one candidate.
    pub multiplier: Stats,
    /// Multipliers of every client with a live direct path.
    pub multiplier_all: Stats,
    /// Records excluded from multipliers for a zero baseline.
    pub dead_direct_path: usize,
    pub gamma_cdf: Vec<CdfPoint>,
    pub multiplier_cdf: Vec<CdfPoint>,
    /// Total gain per epoch.
    pub objective_series: Vec<EpochObjective>,
}

pub fn summarize<S: Scalar>(policy: Policy, records: &[EpochRecord<S>]) -> PolicySummary {
    let mut gammas = Vec::new();
    let mut hits = 0usize;
    let mut multipliers = Vec::new();
    let mut multipliers_all = Vec::new();
    let mut dead = 0usize;
    let mut client_records = 0usize;
    for rec in records {
        for c in &rec.clients {
            client_records += 1;
            if let Some(g) = &c.gamma {
                gammas.push(g.as_f64());
                if c.best_hit {
                    hits += 1;
                }
            }
            match gain_multiplier(c.b_achieved_mbps.as_f64(), c.b_baseline_mbps.as_f64()) {
                Ok(m) => {
                    multipliers_all.push(m);
                    if c.candidates > 0 {
                        multipliers.push(m);
                    }
                }
                Err(_) => dead += 1,
            }
        }
    }
    let mean = |v: &[f64]| Stats::of(v).mean;
    PolicySummary {
        policy,
        epochs: records.len(),
        client_records,
        gamma_records: gammas.len(),
        mean_gamma: mean(&gammas),
        median_gamma: median(&gammas),
        frac_gamma_one: if gammas.is_empty() {
            0.0
        } else {
            hits as f64 / gammas.len() as f64
        },
        multiplier: Stats::of(&multipliers),
        multiplier_all: Stats::of(&multipliers_all),
        dead_direct_path: dead,
        gamma_cdf: cdf(&gammas).unwrap_or_default(),
        multiplier_cdf: cdf(&multipliers).unwrap_or_default(),
        objective_series: records
            .iter()
            .map(|r| EpochObjective {
                epoch: r.epoch,
                objective_mbps: r.plan.objective_mbps.as_f64(),
            })
            .collect(),
    }
}

/// One CSV row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecordRow {
    pub policy: Policy,
    pub epoch: u64,
    pub client_id: String,
    pub server_id: Option<String>,
    pub b_baseline_mbps: f64,
    pub b_achieved_mbps: f64,
    pub gain_mbps: f64,
    pub gamma: Option<f64>,
}

pub fn record_rows<S: Scalar>(records: &[EpochRecord<S>]) -> Vec<RecordRow> {
    records
        .iter()
        .flat_map(|r| {
            r.clients.iter().map(move |c| RecordRow {
                policy: r.policy,
                epoch: r.epoch,
                client_id: c.client_id.to_string(),
                server_id: c.server_id.as_ref().map(|s| s.to_string()),
                b_baseline_mbps: c.b_baseline_mbps.as_f64(),
                b_achieved_mbps: c.b_achieved_mbps.as_f64(),
                gain_mbps: c.gain_mbps.as_f64(),
                gamma: c.gamma.as_ref().map(Scalar::as_f64),
            })
        })
        .collect()
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SummaryReport {
    pub policies: Vec<PolicySummary>,
    pub rows: Vec<RecordRow>,
}

impl SummaryReport {
    pub fn from_runs<S: Scalar>(runs: &[(Policy, Vec<EpochRecord<S>>)]) -> Self {
        SummaryReport {
            policies: runs.iter().map(|(p, r)| summarize(*p, r)).collect(),
            rows: runs.iter().flat_map(|(_, r)| record_rows(r)).collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    /// Per-client rows only.
    Csv,
    /// The whole report.
    Json,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_owned(),
        source,
    }
}

pub fn emit_report(report: &SummaryReport, format: ReportFormat, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut out = BufWriter::new(file);
    match format {
        ReportFormat::Csv => {
            write_rows_csv(&report.rows, &mut out).map_err(|source| Error::Csv {
                path: path.to_owned(),
                source,
            })?
        }
        ReportFormat::Json => {
            serde_json::to_writer_pretty(&mut out, report).map_err(|source| Error::Json {
                path: path.to_owned(),
                source,
            })?;
            out.write_all(b"\n").map_err(io_err(path))?;
        }
    }
    out.flush().map_err(io_err(path))
}

pub fn write_rows_csv<W: Write>(rows: &[RecordRow], out: W) -> std::result::Result<(), csv::Error> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(out);
    w.write_record(CSV_HEADER)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// `value,fraction` rows.
pub fn write_cdf_csv(points: &[CdfPoint], path: &Path) -> Result<()> {
    let wrap = |source| Error::Csv {
        path: path.to_owned(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(wrap)?;
    w.write_record(["value", "fraction"]).map_err(wrap)?;
    for p in points {
        w.write_record([p.value.to_string(), p.fraction.to_string()])
            .map_err(wrap)?;
    }
    w.flush().map_err(io_err(path))
}

pub fn load_report_json(path: &Path) -> Result<SummaryReport> {
    let file = File::open(path).map_err(io_err(path))?;
    serde_json::from_reader(std::io::BufReader::new(file)).map_err(|source| Error::Json {
        path: path.to_owned(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn multiplier_examples() {
        assert_eq!(gain_multiplier(8.0, 8.0).unwrap(), 1.0);
        assert_eq!(gain_multiplier(16.0, 8.0).unwrap(), 2.0);
        assert!(matches!(
            gain_multiplier(3.0, 0.0),
            Err(Error::DeadDirectPath)
        ));
        assert!(gain_multiplier(f64::NAN, 1.0).is_err());
    }

    fn pts(v: &[(f64, f64)]) -> Vec<CdfPoint> {
        v.iter()
            .map(|&(value, fraction)| CdfPoint { value, fraction })
            .collect()
    }

    #[test]
    fn cdf_examples() {
        assert_eq!(cdf(&[1.0, 1.0, 1.0]).unwrap(), pts(&[(1.0, 1.0)]));
        assert_eq!(cdf(&[1.0, 2.0]).unwrap(), pts(&[(1.0, 0.5), (2.0, 1.0)]));
        assert_eq!(
            cdf(&[3.0, 1.0, 2.0]).unwrap(),
            cdf(&[1.0, 2.0, 3.0]).unwrap()
        );
        assert!(matches!(cdf(&[]), Err(Error::Empty(_))));
        assert!(cdf(&[f64::NAN]).is_err());
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert_eq!(median(&[]), 0.0);
    }

    fn sample_report() -> SummaryReport {
        SummaryReport {
            policies: vec![],
            rows: vec![
                RecordRow {
                    policy: Policy::BassGreedy,
                    epoch: 0,
                    client_id: "c0000".into(),
                    server_id: Some("s001".into()),
                    b_baseline_mbps: 1.25,
                    b_achieved_mbps: 4.1,
                    gain_mbps: 4.1 - 1.25,
                    gamma: Some(1.0),
                },
                RecordRow {
                    policy: Policy::Random,
                    epoch: 3,
                    client_id: "c0001".into(),
                    server_id: None,
                    b_baseline_mbps: 0.3,
                    b_achieved_mbps: 0.3,
                    gain_mbps: 0.0,
                    gamma: None,
                },
            ],
        }
    }

    #[test]
    fn csv_header_and_empty_fields() {
        let mut buf = Vec::new();
        write_rows_csv(&sample_report().rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "policy,epoch,client_id,server_id,b_baseline_mbps,b_achieved_mbps,gain_mbps,gamma"
        );
        assert_eq!(
            lines.next().unwrap(),
            "bass_greedy,0,c0000,s001,1.25,4.1,2.8499999999999996,1.0"
        );
        assert_eq!(lines.next().unwrap(), "random,3,c0001,,0.3,0.3,0.0,");

        let mut empty = Vec::new();
        write_rows_csv(&[], &mut empty).unwrap();
        assert_eq!(empty.iter().filter(|&&b| b == b'\n').count(), 1);
    }

    #[test]
    fn emit_is_deterministic_and_json_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let r = sample_report();
        for (fmt, name) in [(ReportFormat::Csv, "a.csv"), (ReportFormat::Json, "a.json")] {
            let p1 = dir.path().join(name);
            let p2 = dir.path().join(format!("again-{name}"));
            emit_report(&r, fmt, &p1).unwrap();
            emit_report(&r, fmt, &p2).unwrap();
            assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
        }
        assert_eq!(load_report_json(&dir.path().join("a.json")).unwrap(), r);
    }

    #[test]
    fn emit_reports_path_on_io_error() {
        let err = emit_report(
            &sample_report(),
            ReportFormat::Csv,
            Path::new("/nonexistent-dir/x.csv"),
        )
        .unwrap_err();
        assert!(err.to_string().contains("/nonexistent-dir/x.csv"));
    }

    proptest! {
        #[test]
        fn cdf_monotone_and_ends_at_one(values in prop::collection::vec(-1e3f64..1e3, 1..60)) {
            let points = cdf(&values).unwrap();
            prop_assert_eq!(points.last().unwrap().fraction, 1.0);
            for w in points.windows(2) {
                prop_assert!(w[0].value < w[1].value);
                prop_assert!(w[0].fraction < w[1].fraction);
            }
            prop_assert!(points.iter().all(|p| p.fraction > 0.0 && p.fraction <= 1.0));
        }
    }
}
