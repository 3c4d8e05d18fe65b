use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::Cell;
use super::results::{read_results, summarize, SummaryRow};
use crate::error::{Error, Result};
use crate::profile::WssProfile;

/// Figure families that can be exported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Family {
    Vpd,
    Re,
    Kappa,
    Mesh,
    Scatter,
    All,
}

/// Noise levels and grids of the wall scatter comparison, at Re = 1000.
pub const SCATTER_KAPPA: [f64; 3] = [0.05, 0.10, 0.15];
pub const SCATTER_VPD: [usize; 3] = [9, 15, 28];
pub const SCATTER_RE: f64 = 1000.0;

/// Least-squares line `y = slope·x + intercept` and its R².
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<LinearFit> {
    let n = x.len();
    if n < 2 || n != y.len() {
        return None;
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Some(LinearFit {
        slope,
        intercept: my - slope * mx,
        r2,
    })
}

#[derive(Serialize)]
struct VpdRow {
    #[serde(rename = "Re")]
    re: f64,
    kappa: f64,
    vpd: usize,
    e_sbi: f64,
    e_mri: f64,
}

#[derive(Serialize)]
struct ReRow {
    vpd: usize,
    kappa: f64,
    #[serde(rename = "Re")]
    re: f64,
    e_sbi: f64,
    e_mri: f64,
}

#[derive(Serialize)]
struct KappaRow {
    #[serde(rename = "Re")]
    re: f64,
    vpd: usize,
    kappa: f64,
    e_sbi: f64,
    e_mri: f64,
}

#[derive(Serialize)]
struct FitRow {
    method: &'static str,
    #[serde(rename = "Re")]
    re: f64,
    vpd: usize,
    slope: f64,
    intercept: f64,
    r2: f64,
}

#[derive(Serialize)]
struct MeshRow {
    #[serde(rename = "Re")]
    re: f64,
    vpd: usize,
    kappa: f64,
    mesh_id: usize,
    e_sbi: f64,
    e_mri: f64,
}

fn write_csv<T: Serialize>(path: &Path, header: &[&str], rows: &[T]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn sorted(mut v: Vec<&SummaryRow>, key: impl Fn(&SummaryRow) -> (f64, f64, f64)) -> Vec<&SummaryRow> {
    v.sort_by(|a, b| {
        let (ka, kb) = (key(a), key(b));
        ka.0.total_cmp(&kb.0)
            .then(ka.1.total_cmp(&kb.1))
            .then(ka.2.total_cmp(&kb.2))
    });
    v
}

/// Writes the plot-data files of `family` from `<dir>/results.csv` into
/// `<dir>/plots`, plus a plotting script. Returns the files written.
pub fn export_plots(dir: &Path, family: Family) -> Result<Vec<PathBuf>> {
    let results = dir.join("results.csv");
    let rows = if results.exists() { read_results(&results)? } else { Vec::new() };
    let summary = summarize(&rows);
    let fine = summary.iter().map(|s| s.mesh_id).max();
    let on_fine: Vec<&SummaryRow> = summary.iter().filter(|s| Some(s.mesh_id) == fine).collect();
    let pdir = dir.join("plots");
    std::fs::create_dir_all(&pdir)?;
    let mut written = Vec::new();
    let want = |f: Family| family == f || family == Family::All;

    if want(Family::Vpd) {
        let p = pdir.join("error_vs_vpd.csv");
        let v: Vec<VpdRow> = sorted(on_fine.clone(), |s| (s.re, s.kappa, s.vpd as f64))
            .into_iter()
            .map(|s| VpdRow {
                re: s.re,
                kappa: s.kappa,
                vpd: s.vpd,
                e_sbi: s.e_sbi_mean,
                e_mri: s.e_mri_mean,
            })
            .collect();
        write_csv(&p, &["Re", "kappa", "vpd", "e_sbi", "e_mri"], &v)?;
        written.push(p);
    }
    if want(Family::Re) {
        let p = pdir.join("error_vs_re.csv");
        let v: Vec<ReRow> = sorted(on_fine.clone(), |s| (s.vpd as f64, s.kappa, s.re))
            .into_iter()
            .map(|s| ReRow {
                vpd: s.vpd,
                kappa: s.kappa,
                re: s.re,
                e_sbi: s.e_sbi_mean,
                e_mri: s.e_mri_mean,
            })
            .collect();
        write_csv(&p, &["vpd", "kappa", "Re", "e_sbi", "e_mri"], &v)?;
        written.push(p);
    }
    if want(Family::Kappa) {
        let p = pdir.join("error_vs_kappa.csv");
        let s = sorted(on_fine.clone(), |s| (s.re, s.vpd as f64, s.kappa));
        let v: Vec<KappaRow> = s
            .iter()
            .map(|s| KappaRow {
                re: s.re,
                vpd: s.vpd,
                kappa: s.kappa,
                e_sbi: s.e_sbi_mean,
                e_mri: s.e_mri_mean,
            })
            .collect();
        write_csv(&p, &["Re", "vpd", "kappa", "e_sbi", "e_mri"], &v)?;
        written.push(p);
        // one fitted line per (method, Re, VPD) series
        let mut fits = Vec::new();
        let mut series: Vec<(f64, usize)> = s.iter().map(|r| (r.re, r.vpd)).collect();
        series.dedup();
        for (re, vpd) in series {
            let pts: Vec<&&SummaryRow> = s.iter().filter(|r| r.re == re && r.vpd == vpd).collect();
            let x: Vec<f64> = pts.iter().map(|r| r.kappa).collect();
            for (method, y) in [
                ("sbi", pts.iter().map(|r| r.e_sbi_mean).collect::<Vec<_>>()),
                ("mri", pts.iter().map(|r| r.e_mri_mean).collect()),
            ] {
                if let Some(f) = linear_fit(&x, &y) {
                    fits.push(FitRow {
                        method,
                        re,
                        vpd,
                        slope: f.slope,
                        intercept: f.intercept,
                        r2: f.r2,
                    });
                }
            }
        }
        let p = pdir.join("error_vs_kappa_fit.csv");
        write_csv(&p, &["method", "Re", "vpd", "slope", "intercept", "r2"], &fits)?;
        written.push(p);
    }
    if want(Family::Mesh) {
        let p = pdir.join("error_vs_mesh.csv");
        let all: Vec<&SummaryRow> = summary.iter().collect();
        let mut v: Vec<MeshRow> = sorted(all, |s| (s.re, s.vpd as f64, s.kappa))
            .into_iter()
            .map(|s| MeshRow {
                re: s.re,
                vpd: s.vpd,
                kappa: s.kappa,
                mesh_id: s.mesh_id,
                e_sbi: s.e_sbi_mean,
                e_mri: s.e_mri_mean,
            })
            .collect();
        v.sort_by(|a, b| {
            (a.re, a.vpd, a.kappa)
                .partial_cmp(&(b.re, b.vpd, b.kappa))
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.mesh_id.cmp(&b.mesh_id))
        });
        write_csv(&p, &["Re", "vpd", "kappa", "mesh_id", "e_sbi", "e_mri"], &v)?;
        written.push(p);
    }
    if want(Family::Scatter) {
        if let Some(mesh) = fine {
            for kappa in SCATTER_KAPPA {
                for vpd in SCATTER_VPD {
                    let cell = Cell {
                        re: SCATTER_RE,
                        kappa,
                        vpd,
                        mesh,
                        seed_index: 0,
                    };
                    let cdir = dir.join("cells").join(cell.id());
                    if !cdir.join("sbi_wss.csv").exists() {
                        continue;
                    }
                    let p = pdir.join(format!("scatter_k{:02}_n{}.csv", (kappa * 100.0).round() as i64, vpd));
                    write_scatter(&cdir, &p)?;
                    written.push(p);
                }
            }
        }
    }
    let script = pdir.join("plot_figures.py");
    std::fs::write(&script, PLOT_SCRIPT)?;
    written.push(script);
    Ok(written)
}

fn write_scatter(cdir: &Path, path: &Path) -> Result<()> {
    let truth = WssProfile::read_csv(cdir.join("truth_wss.csv"))?;
    let mri = WssProfile::read_csv(cdir.join("mri_wss.csv"))?;
    let sbi = WssProfile::read_csv(cdir.join("sbi_wss.csv"))?;
    if truth.len() != mri.len() || truth.len() != sbi.len() {
        return Err(Error::ProfileMismatch);
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["true_wss", "mri_wss", "sbi_wss"])?;
    for k in 0..truth.len() {
        w.write_record([truth.wss[k].to_string(), mri.wss[k].to_string(), sbi.wss[k].to_string()])?;
    }
    w.flush()?;
    Ok(())
}

const PLOT_SCRIPT: &str = r#"# Plots the exported error families. Needs pandas and matplotlib.
import glob
import os
import sys

import matplotlib.pyplot as plt
import pandas as pd

here = sys.argv[1] if len(sys.argv) > 1 else os.path.dirname(os.path.abspath(__file__))


def lines(df, x, group, panel, name):
    if df.empty:
        return
    panels = sorted(df[panel].unique())
    fig, axes = plt.subplots(2, len(panels), figsize=(3 * len(panels), 5), squeeze=False)
    for j, p in enumerate(panels):
        sub = df[df[panel] == p]
        for g, d in sub.groupby(group):
            axes[0][j].plot(d[x], d["e_sbi"], "o-", label=f"{group}={g}")
            axes[1][j].plot(d[x], d["e_mri"], "o-", label=f"{group}={g}")
        axes[0][j].set_title(f"{panel}={p}")
        axes[1][j].set_xlabel(x)
    axes[0][0].set_ylabel("SBI error (%)")
    axes[1][0].set_ylabel("MRI error (%)")
    axes[0][-1].legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(os.path.join(here, name))


def read(name):
    path = os.path.join(here, name)
    return pd.read_csv(path) if os.path.exists(path) else pd.DataFrame()


lines(read("error_vs_vpd.csv"), "vpd", "Re", "kappa", "error_vs_vpd.png")
lines(read("error_vs_re.csv"), "Re", "kappa", "vpd", "error_vs_re.png")
lines(read("error_vs_kappa.csv"), "kappa", "vpd", "Re", "error_vs_kappa.png")

mesh = read("error_vs_mesh.csv")
if not mesh.empty:
    for re, d in mesh.groupby("Re"):
        fig, ax = plt.subplots(1, d["vpd"].nunique(), figsize=(12, 3), squeeze=False)
        for j, (vpd, dv) in enumerate(d.groupby("vpd")):
            for k, dk in dv.groupby("kappa"):
                ax[0][j].plot(dk["mesh_id"], dk["e_sbi"], "o-", label=f"kappa={k}")
            ax[0][j].set_title(f"Re={re}, vpd={vpd}")
        ax[0][-1].legend(fontsize=7)
        fig.tight_layout()
        fig.savefig(os.path.join(here, f"error_vs_mesh_re{int(re)}.png"))

files = sorted(glob.glob(os.path.join(here, "scatter_*.csv")))
if files:
    fig, axes = plt.subplots(1, len(files), figsize=(2.5 * len(files), 2.8), squeeze=False)
    for ax, f in zip(axes[0], files):
        d = pd.read_csv(f)
        ax.plot(d["true_wss"], d["mri_wss"], ".", ms=3, label="MRI")
        ax.plot(d["true_wss"], d["sbi_wss"], ".", ms=3, label="SBI")
        lim = max(d.max())
        ax.plot([0, lim], [0, lim], "k-", lw=0.5)
        ax.set_title(os.path.basename(f)[8:-4], fontsize=8)
    axes[0][0].legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(os.path.join(here, "scatter.png"))
"#;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fit_recovers_a_line() {
        let x = [0.0, 0.05, 0.1, 0.15, 0.2];
        let y: Vec<f64> = x.iter().map(|v| 3.0 + 40.0 * v).collect();
        let f = linear_fit(&x, &y).unwrap();
        assert!((f.slope - 40.0).abs() < 1e-12 && (f.intercept - 3.0).abs() < 1e-12);
        assert!((f.r2 - 1.0).abs() < 1e-12);
        assert!(linear_fit(&[1.0], &[1.0]).is_none());
    }

    #[test]
    fn empty_results_give_headers_only() {
        let dir = tempfile::tempdir().unwrap();
        let files = export_plots(dir.path(), Family::All).unwrap();
        let vpd = std::fs::read_to_string(dir.path().join("plots/error_vs_vpd.csv")).unwrap();
        assert_eq!(vpd, "Re,kappa,vpd,e_sbi,e_mri\n");
        let k = std::fs::read_to_string(dir.path().join("plots/error_vs_kappa.csv")).unwrap();
        assert_eq!(k, "Re,vpd,kappa,e_sbi,e_mri\n");
        assert!(files.iter().any(|f| f.ends_with("plot_figures.py")));
    }
}
