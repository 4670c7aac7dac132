use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::eval::StrategyOutcome;
use crate::{Error, Result};

pub const AE_TABLE_FILE: &str = "ae_table.csv";
pub const PER_CLASS_FILE: &str = "per_class.csv";
pub const PREDICTIONS_FILE: &str = "predictions.csv";
pub const INSPECTION_FILE: &str = "inspection.csv";
pub const REPORT_FILE: &str = "report.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetAe {
    pub dataset: String,
    pub n: usize,
    pub errors: usize,
    pub ae: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AeRow {
    pub strategy: String,
    pub n: usize,
    pub errors: usize,
    pub conflicts: usize,
    pub ae: f64,
    pub per_dataset: Vec<DatasetAe>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassRow {
    pub strategy: String,
    pub dataset: String,
    pub class: String,
    pub n: usize,
    pub errors: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub seed: u64,
    pub config_hash: String,
    pub rows: Vec<AeRow>,
    pub per_class: Vec<ClassRow>,
}

impl EvalReport {
    pub fn row(&self, strategy: &str) -> Option<&AeRow> {
        self.rows.iter().find(|r| r.strategy == strategy)
    }
}

impl AeRow {
    pub fn dataset(&self, id: &str) -> Option<&DatasetAe> {
        self.per_dataset.iter().find(|d| d.dataset == id)
    }
}

pub fn build_report(outcomes: &[StrategyOutcome], seed: u64, config_hash: &str) -> Result<EvalReport> {
    let mut rows = Vec::with_capacity(outcomes.len());
    let mut per_class = Vec::new();
    for o in outcomes {
        if o.samples.is_empty() {
            return Err(Error::EmptyTestSet);
        }
        let mut datasets: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
        let mut classes: BTreeMap<(&str, &str), (usize, usize)> = BTreeMap::new();
        for s in &o.samples {
            let miss = usize::from(!s.correct);
            let d = datasets.entry(&s.dataset).or_default();
            d.0 += 1;
            d.1 += miss;
            let c = classes.entry((&s.dataset, &s.label)).or_default();
            c.0 += 1;
            c.1 += miss;
        }
        let n = o.samples.len();
        let errors = o.samples.iter().filter(|s| !s.correct).count();
        rows.push(AeRow {
            strategy: o.name.clone(),
            n,
            errors,
            conflicts: o.samples.iter().filter(|s| s.conflict).count(),
            ae: errors as f64 / n as f64,
            per_dataset: datasets
                .into_iter()
                .map(|(d, (n, e))| DatasetAe {
                    dataset: d.to_string(),
                    n,
                    errors: e,
                    ae: e as f64 / n as f64,
                })
                .collect(),
        });
        per_class.extend(classes.into_iter().map(|((d, c), (n, e))| ClassRow {
            strategy: o.name.clone(),
            dataset: d.to_string(),
            class: c.to_string(),
            n,
            errors: e,
        }));
    }
    Ok(EvalReport {
        seed,
        config_hash: config_hash.to_string(),
        rows,
        per_class,
    })
}

fn pct(x: f64) -> String {
    format!("{x:.6}")
}

/// Writes the report files into `dir` and returns their paths. The
/// inspection file is written only when a flagged id is present.
pub fn write_report(report: &EvalReport, outcomes: &[StrategyOutcome], flags: &[String], dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();

    let datasets: Vec<String> = {
        let mut v: Vec<String> = report
            .rows
            .iter()
            .flat_map(|r| r.per_dataset.iter().map(|d| d.dataset.clone()))
            .collect();
        v.sort();
        v.dedup();
        v
    };
    let path = dir.join(AE_TABLE_FILE);
    let mut w = writer(&path)?;
    let mut header = vec!["strategy".to_string(), "overall".into()];
    header.extend(datasets.iter().cloned());
    header.extend(["n".into(), "errors".into(), "conflicts".into()]);
    write_row(&mut w, &path, &header)?;
    for r in &report.rows {
        let mut row = vec![r.strategy.clone(), pct(r.ae)];
        row.extend(datasets.iter().map(|d| r.dataset(d).map(|d| pct(d.ae)).unwrap_or_default()));
        row.extend([r.n.to_string(), r.errors.to_string(), r.conflicts.to_string()]);
        write_row(&mut w, &path, &row)?;
    }
    finish(w, &path)?;
    written.push(path);

    let path = dir.join(PER_CLASS_FILE);
    let mut w = writer(&path)?;
    write_row(&mut w, &path, &["strategy", "dataset", "class", "n", "errors", "error_rate"])?;
    for c in &report.per_class {
        let rate = pct(c.errors as f64 / c.n as f64);
        write_row(
            &mut w,
            &path,
            &[
                &c.strategy,
                &c.dataset,
                &c.class,
                &c.n.to_string(),
                &c.errors.to_string(),
                &rate,
            ],
        )?;
    }
    finish(w, &path)?;
    written.push(path);

    let path = dir.join(PREDICTIONS_FILE);
    let mut w = writer(&path)?;
    write_row(
        &mut w,
        &path,
        &[
            "strategy",
            "id",
            "dataset",
            "label",
            "soft_label",
            "decision",
            "correct",
            "conflict",
            "members",
            "fused",
        ],
    )?;
    for o in outcomes {
        for s in &o.samples {
            write_row(
                &mut w,
                &path,
                &[
                    o.name.as_str(),
                    &s.id,
                    &s.dataset,
                    &s.label,
                    &s.soft_label,
                    s.decision.as_deref().unwrap_or(""),
                    if s.correct { "1" } else { "0" },
                    if s.conflict { "1" } else { "0" },
                    &s.members.join(" | "),
                    &s.fused,
                ],
            )?;
        }
    }
    finish(w, &path)?;
    written.push(path);

    let flagged: Vec<(&str, &super::eval::SampleOutcome)> = outcomes
        .iter()
        .flat_map(|o| {
            o.samples
                .iter()
                .filter(|s| flags.contains(&s.id))
                .map(move |s| (o.name.as_str(), s))
        })
        .collect();
    if !flagged.is_empty() {
        let path = dir.join(INSPECTION_FILE);
        let mut w = writer(&path)?;
        write_row(&mut w, &path, &["id", "strategy", "source", "mass"])?;
        for (name, s) in flagged {
            for (k, m) in s.members.iter().enumerate() {
                write_row(&mut w, &path, &[s.id.as_str(), name, &format!("classifier {}", k + 1), m])?;
            }
            write_row(&mut w, &path, &[s.id.as_str(), name, "fused", &s.fused])?;
        }
        finish(w, &path)?;
        written.push(path);
    }

    let path = dir.join(REPORT_FILE);
    fs::write(&path, serde_json::to_string_pretty(report)? + "\n").map_err(|e| Error::io(&path, e))?;
    written.push(path);
    Ok(written)
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).map_err(|e| csv_err(path, e))
}

fn write_row<S: AsRef<[u8]>>(w: &mut csv::Writer<fs::File>, path: &Path, row: &[S]) -> Result<()> {
    w.write_record(row).map_err(|e| csv_err(path, e))
}

fn finish(mut w: csv::Writer<fs::File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::InvalidConfig(format!("{}: {other:?}", path.display())),
    }
}
