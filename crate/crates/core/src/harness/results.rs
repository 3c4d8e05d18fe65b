use std::path::Path;

use serde::{Deserialize, Serialize};

use super::run::RunRecord;
use crate::error::Result;

/// One row of `results.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub geometry: String,
    #[serde(rename = "Re")]
    pub re: f64,
    pub kappa: f64,
    pub vpd: usize,
    pub mesh_id: usize,
    pub seed: usize,
    pub e_sbi: Option<f64>,
    pub e_mri: Option<f64>,
    pub n_elements: Option<usize>,
    pub theta_true: Option<f64>,
    pub theta_star: Option<f64>,
    pub iterations: Option<usize>,
    pub noise_seed: u64,
    pub status: String,
}

impl ResultRow {
    pub fn from_record(r: &RunRecord) -> Self {
        let o = r.outputs.as_ref();
        let status = match &r.failure {
            None => "ok".to_string(),
            Some(f) => format!("failed:{}", f.stage),
        };
        Self {
            geometry: r.geometry.clone(),
            re: r.cell.re,
            kappa: r.cell.kappa,
            vpd: r.cell.vpd,
            mesh_id: r.cell.mesh,
            seed: r.cell.seed_index,
            e_sbi: o.map(|o| o.e_sbi),
            e_mri: o.map(|o| o.e_mri),
            n_elements: r.n_elements,
            theta_true: r.theta_true,
            theta_star: o.map(|o| o.theta_star),
            iterations: o.map(|o| o.iterations),
            noise_seed: r.noise_seed,
            status,
        }
    }

    pub fn ok(&self) -> bool {
        self.status == "ok"
    }
}

pub fn write_rows(path: &Path, rows: &[ResultRow]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    w.write_record([
        "geometry", "Re", "kappa", "vpd", "mesh_id", "seed", "e_sbi", "e_mri", "n_elements", "theta_true",
        "theta_star", "iterations", "noise_seed", "status",
    ])?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Results in the order given (callers pass cell order).
pub fn write_results(path: &Path, records: &[RunRecord]) -> Result<()> {
    let rows: Vec<ResultRow> = records.iter().map(ResultRow::from_record).collect();
    write_rows(path, &rows)
}

pub fn read_results(path: &Path) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for row in r.deserialize() {
        out.push(row?);
    }
    Ok(out)
}

/// Mean and sample standard deviation over the successful seeds of a cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub geometry: String,
    #[serde(rename = "Re")]
    pub re: f64,
    pub kappa: f64,
    pub vpd: usize,
    pub mesh_id: usize,
    pub n: usize,
    pub e_sbi_mean: f64,
    pub e_sbi_std: f64,
    pub e_mri_mean: f64,
    pub e_mri_std: f64,
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let m = v.iter().sum::<f64>() / n;
    let s = if v.len() > 1 {
        (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (m, s)
}

/// Groups rows by cell (ignoring the seed), keeping first-seen order.
pub fn summarize(rows: &[ResultRow]) -> Vec<SummaryRow> {
    let mut keys: Vec<(String, u64, u64, usize, usize)> = Vec::new();
    let mut groups: Vec<Vec<&ResultRow>> = Vec::new();
    for r in rows {
        let k = (r.geometry.clone(), r.re.to_bits(), r.kappa.to_bits(), r.vpd, r.mesh_id);
        match keys.iter().position(|x| *x == k) {
            Some(i) => groups[i].push(r),
            None => {
                keys.push(k);
                groups.push(vec![r]);
            }
        }
    }
    groups
        .into_iter()
        .map(|g| {
            let ok: Vec<&&ResultRow> = g.iter().filter(|r| r.ok()).collect();
            let sbi: Vec<f64> = ok.iter().filter_map(|r| r.e_sbi).collect();
            let mri: Vec<f64> = ok.iter().filter_map(|r| r.e_mri).collect();
            let (sm, ss) = mean_std(&sbi);
            let (mm, ms) = mean_std(&mri);
            SummaryRow {
                geometry: g[0].geometry.clone(),
                re: g[0].re,
                kappa: g[0].kappa,
                vpd: g[0].vpd,
                mesh_id: g[0].mesh_id,
                n: ok.len(),
                e_sbi_mean: sm,
                e_sbi_std: ss,
                e_mri_mean: mm,
                e_mri_std: ms,
            }
        })
        .collect()
}

pub fn write_summary(path: &Path, records: &[RunRecord]) -> Result<()> {
    let rows: Vec<ResultRow> = records.iter().map(ResultRow::from_record).collect();
    let mut w = csv::Writer::from_path(path)?;
    for s in summarize(&rows) {
        w.serialize(s)?;
    }
    w.flush()?;
    Ok(())
}

/// Wall-clock times, kept apart from the reproducible results.
pub fn write_timings(path: &Path, records: &[RunRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["cell", "mri_seconds", "sbi_seconds", "total_seconds"])?;
    for r in records {
        w.write_record([
            r.cell.id(),
            r.timings.mri_seconds.to_string(),
            r.timings.sbi_seconds.to_string(),
            r.timings.total_seconds.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
