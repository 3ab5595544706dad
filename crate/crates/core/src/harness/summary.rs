//! Mean ± population standard deviation of per-seed average rewards.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::runner::StepRow;
use crate::env::Pattern;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryCell {
    pub algorithm: String,
    pub pattern: String,
    pub mean: f64,
    pub std: f64,
    pub seeds: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Summary {
    pub cells: Vec<SummaryCell>,
}

/// Population mean and standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn pattern_rank(name: &str) -> (usize, String) {
    let rank = Pattern::ALL
        .iter()
        .position(|p| p.name() == name)
        .unwrap_or(Pattern::ALL.len());
    (rank, name.to_string())
}

impl Summary {
    /// Aggregates `(algorithm, pattern, per-seed average)` triples.
    pub fn from_seed_means<I>(entries: I) -> Self
    where
        I: IntoIterator<Item = (String, String, f64)>,
    {
        let mut groups: BTreeMap<(String, (usize, String)), Vec<f64>> = BTreeMap::new();
        for (algorithm, pattern, value) in entries {
            groups
                .entry((algorithm, pattern_rank(&pattern)))
                .or_default()
                .push(value);
        }
        let cells = groups
            .into_iter()
            .map(|((algorithm, (_, pattern)), values)| {
                let (mean, std) = mean_std(&values);
                SummaryCell {
                    algorithm,
                    pattern,
                    mean,
                    std,
                    seeds: values.len(),
                }
            })
            .collect();
        Self { cells }
    }

    pub fn cell(&self, algorithm: &str, pattern: &str) -> Option<&SummaryCell> {
        self.cells
            .iter()
            .find(|c| c.algorithm == algorithm && c.pattern == pattern)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let io = |e: csv::Error| Error::Io(e.into());
        for c in &self.cells {
            w.serialize(c).map_err(io)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Algorithms as rows, patterns as columns, `mean ± std` with two
    /// decimals. Cells without data read `n/a`.
    pub fn to_text(&self) -> String {
        let mut algorithms: Vec<&str> = Vec::new();
        let mut patterns: Vec<&str> = Vec::new();
        for c in &self.cells {
            if !algorithms.contains(&c.algorithm.as_str()) {
                algorithms.push(&c.algorithm);
            }
            if !patterns.contains(&c.pattern.as_str()) {
                patterns.push(&c.pattern);
            }
        }
        patterns.sort_by_key(|p| pattern_rank(p));
        let grid: Vec<Vec<String>> = algorithms
            .iter()
            .map(|a| {
                patterns
                    .iter()
                    .map(|p| match self.cell(a, p) {
                        Some(c) => format!("{:.2} ± {:.2}", c.mean, c.std),
                        None => "n/a".into(),
                    })
                    .collect()
            })
            .collect();
        let first = algorithms
            .iter()
            .map(|a| a.chars().count())
            .chain(["algorithm".len()])
            .max()
            .unwrap_or(0);
        let widths: Vec<usize> = patterns
            .iter()
            .enumerate()
            .map(|(j, p)| {
                grid.iter()
                    .map(|row| row[j].chars().count())
                    .chain([p.chars().count()])
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let pad = |s: &str, w: usize| format!("{s}{}", " ".repeat(w - s.chars().count()));
        let mut out = String::new();
        let _ = write!(out, "{}", pad("algorithm", first));
        for (p, &w) in patterns.iter().zip(&widths) {
            let _ = write!(out, "  {}", pad(p, w));
        }
        out.push('\n');
        for (a, row) in algorithms.iter().zip(&grid) {
            let _ = write!(out, "{}", pad(a, first));
            for (cell, &w) in row.iter().zip(&widths) {
                let _ = write!(out, "  {}", pad(cell, w));
            }
            out.push('\n');
        }
        out
    }
}

/// Reads every `<dir>/<pattern>/*.csv` step log (skipping event logs) and
/// summarizes per (algorithm, pattern).
pub fn summarize_dir(dir: &Path) -> Result<Summary> {
    let mut entries = Vec::new();
    let mut subdirs: Vec<_> = fs::read_dir(dir)?
        .collect::<std::io::Result<Vec<_>>>()?
        .into_iter()
        .map(|e| e.path())
        .filter(|p| p.is_dir())
        .collect();
    subdirs.sort();
    for sub in subdirs {
        let pattern = sub
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        let mut files: Vec<_> = fs::read_dir(&sub)?
            .collect::<std::io::Result<Vec<_>>>()?
            .into_iter()
            .map(|e| e.path())
            .filter(|p| {
                let name = p.file_name().map(|n| n.to_string_lossy()).unwrap_or_default();
                name.ends_with(".csv") && !name.ends_with(".events.csv")
            })
            .collect();
        files.sort();
        for file in files {
            for ((algorithm, _seed), (sum, n)) in seed_sums(&file)? {
                entries.push((algorithm, pattern.clone(), sum / n as f64));
            }
        }
    }
    if entries.is_empty() {
        return Err(Error::invalid(format!("no step logs found under {}", dir.display())));
    }
    Ok(Summary::from_seed_means(entries))
}

type SeedSums = BTreeMap<(String, u64), (f64, usize)>;

fn seed_sums(path: &Path) -> Result<SeedSums> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::Io(e.into()))?;
    let mut sums = SeedSums::new();
    for (i, row) in rdr.deserialize::<StepRow>().enumerate() {
        let row = row.map_err(|e| {
            Error::format(format!("{} line {}", path.display(), i + 2), e.to_string())
        })?;
        let slot = sums.entry((row.algorithm, row.seed)).or_insert((0.0, 0));
        slot.0 += row.reward;
        slot.1 += 1;
    }
    Ok(sums)
}
