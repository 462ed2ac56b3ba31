//! CSV output: metric rows with a `#`-prefixed metadata header carrying the
//! tool version, seed, config hash, and the full config echo, so every file
//! can be reproduced from its own header.
//!
//! Floats are serialized with 17 significant digits, which round-trips f64
//! bit-exactly.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::harness::MetricSeries;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Column order of experiment result files. Fixed; documented in the README.
pub const RESULT_COLUMNS: [&str; 10] = [
    "experiment",
    "sweep_value",
    "averaged",
    "slot",
    "agent",
    "expected_reward",
    "realized_reward",
    "action",
    "qos",
    "conjecture",
];

/// One output row: one (slot, agent) pair of one (possibly averaged) series.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub experiment: String,
    pub sweep_value: Option<f64>,
    pub averaged: bool,
    pub slot: u64,
    pub agent: usize,
    pub expected_reward: f64,
    pub realized_reward: f64,
    pub action: f64,
    pub qos: f64,
    pub conjecture: f64,
}

/// 17-significant-digit scientific notation; parses back to the same bits.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// FNV-1a over the canonical config bytes. Stable across platforms and
/// releases, unlike the std hasher.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf29ce484222325;
    for b in bytes {
        hash ^= *b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

/// File header: everything needed to re-run the experiment.
#[derive(Debug, Clone)]
pub struct Metadata {
    pub seed: u64,
    pub config_json: String,
    pub extra: Vec<(String, String)>,
}

impl Metadata {
    pub fn new(seed: u64, config_json: String) -> Self {
        Metadata {
            seed,
            config_json,
            extra: Vec::new(),
        }
    }

    pub fn with(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.extra.push((key.into(), value.into()));
        self
    }

    fn lines(&self) -> Vec<String> {
        let mut out = vec![
            format!("# cogmesh {TOOL_VERSION}"),
            format!("# seed = {}", self.seed),
            format!(
                "# config_hash = {:016x}",
                fnv1a64(self.config_json.as_bytes())
            ),
        ];
        for (k, v) in &self.extra {
            out.push(format!("# {k} = {v}"));
        }
        out.push(format!("# config = {}", self.config_json));
        out
    }
}

/// Writes a CSV file with the metadata header followed by arbitrary records.
pub fn write_csv_records<I>(
    path: &Path,
    meta: &Metadata,
    columns: &[&str],
    rows: I,
) -> Result<()>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let display = path.display().to_string();
    let file = File::create(path).map_err(|e| Error::io(display.clone(), e))?;
    let mut buf = BufWriter::new(file);
    for line in meta.lines() {
        writeln!(buf, "{line}").map_err(|e| Error::io(display.clone(), e))?;
    }
    let mut writer = csv::Writer::from_writer(buf);
    writer
        .write_record(columns)
        .map_err(|e| Error::io(display.clone(), std::io::Error::other(e)))?;
    for row in rows {
        writer
            .write_record(&row)
            .map_err(|e| Error::io(display.clone(), std::io::Error::other(e)))?;
    }
    writer
        .flush()
        .map_err(|e| Error::io(display.clone(), e))?;
    Ok(())
}

fn optional_float(v: &Option<f64>) -> String {
    v.map(fmt_float).unwrap_or_default()
}

/// Writes experiment result rows in the fixed column order.
pub fn write_results_csv(path: &Path, meta: &Metadata, rows: &[ResultRow]) -> Result<()> {
    write_csv_records(
        path,
        meta,
        &RESULT_COLUMNS,
        rows.iter().map(|r| {
            vec![
                r.experiment.clone(),
                optional_float(&r.sweep_value),
                r.averaged.to_string(),
                r.slot.to_string(),
                r.agent.to_string(),
                fmt_float(r.expected_reward),
                fmt_float(r.realized_reward),
                fmt_float(r.action),
                fmt_float(r.qos),
                fmt_float(r.conjecture),
            ]
        }),
    )
}

/// Flattens a metric series into result rows, one per (slot, agent).
pub fn rows_from_series(
    experiment: &str,
    sweep_value: Option<f64>,
    series: &MetricSeries,
) -> Vec<ResultRow> {
    let averaged = series.episodes > 1;
    let mut rows = Vec::with_capacity(series.episode_length * series.num_agents);
    for slot in 0..series.episode_length {
        for agent in 0..series.num_agents {
            let k = series.idx(slot, agent);
            rows.push(ResultRow {
                experiment: experiment.to_string(),
                sweep_value,
                averaged,
                slot: slot as u64,
                agent,
                expected_reward: series.expected[k],
                realized_reward: series.realized[k],
                action: series.action[k],
                qos: series.qos[k],
                conjecture: series.conjecture[k],
            });
        }
    }
    rows
}

/// Reads back a result file: the metadata lines and the parsed rows.
pub fn read_results_csv(path: &Path) -> Result<(Vec<String>, Vec<ResultRow>)> {
    let display = path.display().to_string();
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::io(display.clone(), e))?;
    let mut metadata = Vec::new();
    let mut body = String::new();
    for line in text.lines() {
        if line.starts_with('#') && body.is_empty() {
            metadata.push(line.to_string());
        } else {
            body.push_str(line);
            body.push('\n');
        }
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(body.as_bytes());
    let parse_f64 = |s: &str, what: &str| -> Result<f64> {
        s.parse::<f64>()
            .map_err(|e| Error::Domain(format!("bad {what} field `{s}`: {e}")))
    };
    let mut rows = Vec::new();
    for record in reader.records() {
        let record =
            record.map_err(|e| Error::io(display.clone(), std::io::Error::other(e)))?;
        let sweep_value = if record[1].is_empty() {
            None
        } else {
            Some(parse_f64(&record[1], "sweep_value")?)
        };
        rows.push(ResultRow {
            experiment: record[0].to_string(),
            sweep_value,
            averaged: &record[2] == "true",
            slot: record[3]
                .parse()
                .map_err(|e| Error::Domain(format!("bad slot: {e}")))?,
            agent: record[4]
                .parse()
                .map_err(|e| Error::Domain(format!("bad agent: {e}")))?,
            expected_reward: parse_f64(&record[5], "expected_reward")?,
            realized_reward: parse_f64(&record[6], "realized_reward")?,
            action: parse_f64(&record[7], "action")?,
            qos: parse_f64(&record[8], "qos")?,
            conjecture: parse_f64(&record[9], "conjecture")?,
        });
    }
    Ok((metadata, rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_round_trips_bit_exactly() {
        for x in [
            0.0,
            -0.0,
            1.0,
            0.1,
            1.0 / 3.0,
            2.2250738585072014e-308,
            1.7976931348623157e308,
            -123456.789e-12,
            f64::MIN_POSITIVE,
        ] {
            let s = fmt_float(x);
            let y: f64 = s.parse().unwrap();
            assert_eq!(x.to_bits(), y.to_bits(), "{s}");
        }
    }

    #[test]
    fn fnv_hash_is_stable() {
        // Reference value of the empty input per the FNV-1a specification.
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), fnv1a64(b"a"));
        assert_ne!(fnv1a64(b"a"), fnv1a64(b"b"));
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.csv");
        let rows = vec![
            ResultRow {
                experiment: "demo".into(),
                sweep_value: Some(0.5),
                averaged: true,
                slot: 0,
                agent: 0,
                expected_reward: 1.0 / 3.0,
                realized_reward: 0.0,
                action: 1.0,
                qos: 1.0,
                conjecture: 0.25,
            },
            ResultRow {
                experiment: "demo".into(),
                sweep_value: None,
                averaged: false,
                slot: 1,
                agent: 1,
                expected_reward: 9.87654321e6,
                realized_reward: 1.23e-7,
                action: 0.0,
                qos: 0.0,
                conjecture: 1.0,
            },
        ];
        let meta = Metadata::new(7, "{}".into()).with("episodes", "2");
        write_results_csv(&path, &meta, &rows).unwrap();
        let (metadata, parsed) = read_results_csv(&path).unwrap();
        assert_eq!(parsed, rows);
        assert!(metadata.iter().any(|l| l.contains("seed = 7")));
        assert!(metadata.iter().any(|l| l.contains("config_hash")));
    }

    #[test]
    fn empty_series_yields_header_only_body() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.csv");
        let meta = Metadata::new(1, "{}".into());
        write_results_csv(&path, &meta, &[]).unwrap();
        let (metadata, rows) = read_results_csv(&path).unwrap();
        assert!(rows.is_empty());
        assert!(!metadata.is_empty());
        let text = std::fs::read_to_string(&path).unwrap();
        let non_comment: Vec<&str> = text
            .lines()
            .filter(|l| !l.starts_with('#') && !l.is_empty())
            .collect();
        assert_eq!(non_comment, vec![RESULT_COLUMNS.join(",")]);
    }
}
