//! File formats.
//!
//! * Histogram CSV: header `bin,count`, then one `index,count` row per bin
//!   with indices `0..n`. A headerless list of counts (comma, whitespace or
//!   newline separated) is also accepted.
//! * Value files: one integer per line, optionally under a single header line.
//! * Record files: `value,group` rows for partition analysis.
//! * Monte Carlo tables: `N,mean,std,trials`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Result, TvorError};
use crate::hist::{histogram_from_values, Histogram};
use crate::model::{McRow, McTable};

pub const HISTOGRAM_HEADER: &str = "bin,count";
pub const MC_TABLE_HEADER: &str = "N,mean,std,trials";

fn io_err(path: &Path, e: impl std::fmt::Display) -> TvorError {
    TvorError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

fn parse_err(path: &Path, line: usize, msg: impl std::fmt::Display) -> TvorError {
    TvorError::Parse(format!("{}:{}: {}", path.display(), line, msg))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| io_err(path, e))
}

/// File stem used as the histogram label.
pub fn label_for(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum CountLayout {
    Canonical,
    Plain,
}

fn parse_count(token: &str, path: &Path, line: usize) -> Result<u64> {
    let t = token.trim();
    if t.starts_with('-') {
        return Err(parse_err(path, line, format!("negative count `{t}`")));
    }
    t.parse::<u64>()
        .map_err(|_| parse_err(path, line, format!("`{t}` is not a non-negative integer count")))
}

fn parse_histogram_text(text: &str, path: &Path) -> Result<(Histogram, CountLayout)> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());
    let Some((first_no, first)) = lines.next() else {
        return Err(parse_err(path, 1, "file is empty"));
    };
    let mut counts = Vec::new();
    let layout = if first.replace(' ', "").eq_ignore_ascii_case(HISTOGRAM_HEADER) {
        for (no, line) in lines {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 2 {
                return Err(parse_err(path, no, format!("expected `bin,count`, found `{line}`")));
            }
            let bin: usize = fields[0]
                .trim()
                .parse()
                .map_err(|_| parse_err(path, no, format!("bad bin index `{}`", fields[0].trim())))?;
            if bin != counts.len() {
                return Err(parse_err(
                    path,
                    no,
                    format!("expected bin {} but found {bin}; bins must be 0, 1, 2, ... in order", counts.len()),
                ));
            }
            counts.push(parse_count(fields[1], path, no)?);
        }
        CountLayout::Canonical
    } else {
        for (no, line) in std::iter::once((first_no, first)).chain(lines) {
            for token in line.split(|c: char| c == ',' || c.is_whitespace()).filter(|t| !t.is_empty()) {
                counts.push(parse_count(token, path, no)?);
            }
        }
        CountLayout::Plain
    };
    if counts.is_empty() {
        return Err(parse_err(path, first_no, "no bins"));
    }
    Ok((Histogram::new(counts)?.with_label(label_for(path)), layout))
}

/// Reads one histogram file; the label is the file stem.
pub fn read_histogram(path: &Path) -> Result<Histogram> {
    Ok(parse_histogram_text(&read_text(path)?, path)?.0)
}

/// Canonical CSV text of a histogram.
pub fn histogram_to_csv(h: &Histogram) -> String {
    let mut out = String::with_capacity(8 * h.bins() + 16);
    out.push_str(HISTOGRAM_HEADER);
    out.push('\n');
    for (i, c) in h.counts().iter().enumerate() {
        let _ = writeln!(out, "{i},{c}");
    }
    out
}

pub fn write_histogram(path: &Path, h: &Histogram) -> Result<()> {
    fs::write(path, histogram_to_csv(h)).map_err(|e| io_err(path, e))
}

/// Expands directories (non-recursively, sorted, skipping hidden files) and
/// keeps plain paths as given.
pub fn expand_inputs(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut entries: Vec<PathBuf> = fs::read_dir(p)
                .map_err(|e| io_err(p, e))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|e| e.is_file())
                .filter(|e| !e.file_name().is_some_and(|n| n.to_string_lossy().starts_with('.')))
                .collect();
            entries.sort();
            out.extend(entries);
        } else if p.exists() {
            out.push(p.clone());
        } else {
            return Err(io_err(p, "no such file or directory"));
        }
    }
    if out.is_empty() {
        return Err(TvorError::InvalidParameter("no inputs".into()));
    }
    Ok(out)
}

/// Reads histogram files (or directories of them) and checks they share `n`.
pub fn read_histograms(paths: &[PathBuf]) -> Result<Vec<Histogram>> {
    let files = expand_inputs(paths)?;
    let mut hists: Vec<Histogram> = Vec::with_capacity(files.len());
    let mut first_layout: Option<(CountLayout, &Path)> = None;
    for f in &files {
        let (h, layout) = parse_histogram_text(&read_text(f)?, f)?;
        match first_layout {
            None => first_layout = Some((layout, f)),
            Some((l, first)) if l != layout => {
                return Err(TvorError::Parse(format!(
                    "mixed formats: {} is {} but {} is {}",
                    first.display(),
                    describe(l),
                    f.display(),
                    describe(layout)
                )));
            }
            _ => {}
        }
        if let Some(prev) = hists.first() {
            if prev.bins() != h.bins() {
                return Err(TvorError::BinMismatch {
                    expected: prev.bins(),
                    found: h.bins(),
                    context: Some(format!("{} vs {}", files[0].display(), f.display())),
                });
            }
        }
        hists.push(h);
    }
    Ok(hists)
}

fn describe(l: CountLayout) -> &'static str {
    match l {
        CountLayout::Canonical => "a `bin,count` CSV",
        CountLayout::Plain => "a plain list of counts",
    }
}

/// Integer values, one per line; a single non-numeric first line is taken
/// as a header.
pub fn read_values(path: &Path) -> Result<Vec<i64>> {
    let text = read_text(path)?;
    let mut values = Vec::new();
    let mut seen_data = false;
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        match t.parse::<i64>() {
            Ok(v) => {
                values.push(v);
                seen_data = true;
            }
            Err(_) if !seen_data && i == 0 => {}
            Err(_) => return Err(parse_err(path, i + 1, format!("`{t}` is not an integer"))),
        }
    }
    Ok(values)
}

/// Labelled value lists from files or directories.
pub fn read_value_lists(paths: &[PathBuf]) -> Result<Vec<(String, Vec<i64>)>> {
    expand_inputs(paths)?
        .iter()
        .map(|f| Ok((label_for(f), read_values(f)?)))
        .collect()
}

/// Per-value histograms over `range`, or over the global min/max of all
/// non-empty lists.
pub fn value_lists_to_histograms(
    lists: &[(String, Vec<i64>)],
    range: Option<(i64, i64)>,
) -> Result<(Vec<Histogram>, (i64, i64))> {
    let (lo, hi) = match range {
        Some(r) => r,
        None => {
            let (lo, hi) = lists
                .iter()
                .flat_map(|(_, v)| v.iter())
                .fold((i64::MAX, i64::MIN), |(lo, hi), &v| (lo.min(v), hi.max(v)));
            if lo > hi {
                return Err(TvorError::NoValuesInRange);
            }
            (lo, hi)
        }
    };
    let hists = lists
        .iter()
        .map(|(label, values)| {
            let kept: Vec<i64> = values.iter().copied().filter(|v| (lo..=hi).contains(v)).collect();
            if kept.len() < values.len() {
                log::warn!("{label}: {} values outside [{lo}, {hi}] ignored", values.len() - kept.len());
            }
            Ok(histogram_from_values(&kept, lo, hi)?.with_label(label.clone()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((hists, (lo, hi)))
}

/// `value,group` rows; a first line that does not start with an integer is a
/// header.
pub fn read_records(path: &Path) -> Result<Vec<(i64, String)>> {
    let text = read_text(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        let Some((value, group)) = t.split_once(',') else {
            return Err(parse_err(path, i + 1, format!("expected `value,group`, found `{t}`")));
        };
        match value.trim().parse::<i64>() {
            Ok(v) => out.push((v, group.trim().to_owned())),
            Err(_) if i == 0 => {}
            Err(_) => return Err(parse_err(path, i + 1, format!("`{}` is not an integer", value.trim()))),
        }
    }
    Ok(out)
}

pub fn mc_table_to_csv(table: &McTable) -> String {
    let mut out = String::from(MC_TABLE_HEADER);
    out.push('\n');
    for (n, row) in &table.rows {
        let _ = writeln!(out, "{n},{},{},{}", row.mean, row.std, row.trials);
    }
    out
}

pub fn write_mc_table(path: &Path, table: &McTable) -> Result<()> {
    fs::write(path, mc_table_to_csv(table)).map_err(|e| io_err(path, e))
}

pub fn read_mc_table(path: &Path) -> Result<McTable> {
    let text = read_text(path)?;
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, h)) if h.trim().replace(' ', "") == MC_TABLE_HEADER => {}
        Some((i, h)) => {
            return Err(parse_err(path, i + 1, format!("expected header `{MC_TABLE_HEADER}`, found `{}`", h.trim())))
        }
        None => return Err(parse_err(path, 1, "file is empty")),
    }
    let mut table = McTable {
        source: path.display().to_string(),
        ..Default::default()
    };
    for (i, line) in lines {
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        let bad = |what: &str| parse_err(path, i + 1, format!("bad {what} in `{}`", line.trim()));
        if f.len() != 4 {
            return Err(bad("column count"));
        }
        let n: u64 = f[0].parse().map_err(|_| bad("N"))?;
        let mean: f64 = f[1].parse().map_err(|_| bad("mean"))?;
        let std: f64 = f[2].parse().map_err(|_| bad("std"))?;
        let trials: usize = f[3].parse().map_err(|_| bad("trials"))?;
        if !(std >= 0.0) || !mean.is_finite() {
            return Err(bad("statistics"));
        }
        if table.rows.insert(n, McRow { mean, std, trials }).is_some() {
            return Err(parse_err(path, i + 1, format!("duplicate N {n}")));
        }
    }
    if table.rows.is_empty() {
        return Err(TvorError::DegenerateTable(format!("{} has no rows", path.display())));
    }
    Ok(table)
}
