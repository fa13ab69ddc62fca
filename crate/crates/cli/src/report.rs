use std::fmt::Write as _;

use serde::Serialize;
use tvor_core::numeric::round_significant;
use tvor_core::model::ScoreReport;

/// Significant digits for scores in reports.
pub const SCORE_DIGITS: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Serialize)]
struct ScoreRow<'a> {
    label: &'a str,
    #[serde(rename = "N")]
    size: u64,
    dtv: u64,
    predicted: Option<f64>,
    score: f64,
    rank: usize,
    method: String,
}

fn round(x: f64) -> f64 {
    round_significant(x, SCORE_DIGITS)
}

pub fn scores(reports: &[ScoreReport], format: Format) -> String {
    match format {
        Format::Json => {
            let rows: Vec<ScoreRow> = reports
                .iter()
                .map(|r| ScoreRow {
                    label: &r.label,
                    size: r.size,
                    dtv: r.dtv,
                    predicted: r.predicted.map(round),
                    score: round(r.score),
                    rank: r.rank,
                    method: r.method.to_string(),
                })
                .collect();
            serde_json::to_string_pretty(&rows).expect("rows serialise") + "\n"
        }
        Format::Csv => {
            let mut out = String::from("label,N,dtv,predicted,score,rank,method\n");
            for r in reports {
                let predicted = r.predicted.map(|p| round(p).to_string()).unwrap_or_default();
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{}",
                    csv_field(&r.label),
                    r.size,
                    r.dtv,
                    predicted,
                    round(r.score),
                    r.rank,
                    r.method
                );
            }
            out
        }
    }
}

pub fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}

const TEXT_COLUMNS: [&str; 3] = ["label", "method", "source"];

/// CSV with a header row, or a JSON array of objects keyed by the header.
pub fn table(header: &[&str], rows: &[Vec<String>], format: Format) -> String {
    match format {
        Format::Csv => {
            let mut out = header.join(",");
            out.push('\n');
            for row in rows {
                out.push_str(&row.iter().map(|f| csv_field(f)).collect::<Vec<_>>().join(","));
                out.push('\n');
            }
            out
        }
        Format::Json => {
            let items: Vec<serde_json::Value> = rows
                .iter()
                .map(|row| {
                    let obj = header
                        .iter()
                        .zip(row)
                        .map(|(k, v)| {
                            let value = (!TEXT_COLUMNS.contains(k))
                                .then(|| v.parse::<f64>().ok())
                                .flatten()
                                .filter(|x| x.is_finite())
                                .and_then(|x| serde_json::Number::from_f64(x).map(serde_json::Value::Number))
                                .unwrap_or_else(|| serde_json::Value::String(v.clone()));
                            (k.to_string(), value)
                        })
                        .collect();
                    serde_json::Value::Object(obj)
                })
                .collect();
            serde_json::to_string_pretty(&items).expect("rows serialise") + "\n"
        }
    }
}
