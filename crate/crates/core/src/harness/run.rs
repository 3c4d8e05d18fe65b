use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{noise_seed, Cell, SweepConfig};
use crate::error::{Error, Result};
use crate::fem::{compute_wss, reynolds_to_theta, solve_steady_ns, FlowSolution, FlowSpace, FluidProps};
use crate::geometry::Geometry;
use crate::mesh::{elevate_order, generate_mesh, DistMeshOptions};
use crate::metrics::{build_gamma, ErrorReport};
use crate::mri::{add_noise, PsfOperator, VoxelData, VoxelGrid};
use crate::mri_wss::mri_wss_profile;
use crate::profile::{Method, WallSample, WssProfile};
use crate::sbi::{optimize, sbi_wss, SbiProblem, Termination};

type Shared<T> = std::result::Result<Arc<T>, String>;

/// The true flow at one Reynolds number and what is derived from it.
#[derive(Debug)]
pub struct Truth {
    pub theta: f64,
    pub solution: FlowSolution,
    pub wss: WssProfile,
    pub peak_speed: f64,
    /// Noise-free voxel data per VPD.
    pub clean: BTreeMap<usize, Shared<VoxelData>>,
}

/// Shared, read-only state of a sweep: meshes, true flows, point-spread
/// operators and Newton starting states.
#[derive(Debug)]
pub struct Study {
    pub cfg: SweepConfig,
    pub geometry: Geometry,
    pub geometry_id: String,
    pub gamma: Vec<WallSample>,
    pub spaces: BTreeMap<usize, Shared<FlowSpace>>,
    pub truth: BTreeMap<u64, Shared<Truth>>,
    pub psf: BTreeMap<(usize, usize), Shared<PsfOperator>>,
    /// Converged states on each reconstruction mesh at Re = 100·3^k.
    pub ladder: BTreeMap<usize, Vec<(f64, Arc<Vec<f64>>)>>,
}

fn share<T>(r: Result<T>) -> Shared<T> {
    r.map(Arc::new).map_err(|e| e.to_string())
}

fn get<T>(m: &Shared<T>) -> Result<Arc<T>> {
    m.clone().map_err(Error::Upstream)
}

/// Cubic mesh of `geometry` with mesh size `h` and its FE space.
pub fn build_space(geometry: &Geometry, h: f64) -> Result<FlowSpace> {
    let linear = generate_mesh(geometry, h, &DistMeshOptions::default())?;
    let mesh = elevate_order(&linear, geometry, 3)?;
    FlowSpace::new(Arc::new(mesh), geometry.clone())
}

impl Study {
    /// Builds everything `cells` need. Configuration problems are errors;
    /// numerical failures are kept and reported by the affected cells.
    pub fn prepare(cfg: &SweepConfig, base_dir: &Path, cells: &[Cell]) -> Result<Self> {
        cfg.validate()?;
        let geometry = cfg.geometry.load(base_dir).map_err(|e| Error::Config(e.to_string()))?;
        let geometry_id = cfg.geometry_id(&geometry);
        let gamma = build_gamma(&geometry, &cfg.scan_region, cfg.wall_samples)?;
        let diameter = geometry.diameter();
        // validate the grids up front so bad regions are config errors
        for &vpd in &cfg.vpd {
            VoxelGrid::new(cfg.scan_region, vpd, diameter, &geometry)?;
        }
        let props = cfg.fluid;

        let mut targets: Vec<usize> = cells.iter().map(|c| c.mesh).collect();
        targets.push(cfg.truth_mesh);
        targets.sort_unstable();
        targets.dedup();
        let spaces: BTreeMap<usize, Shared<FlowSpace>> = targets
            .par_iter()
            .map(|&n| (n, share(build_space(&geometry, cfg.mesh_size(n, &geometry)))))
            .collect();

        let mut res: Vec<f64> = cells.iter().map(|c| c.re).collect();
        res.sort_by(f64::total_cmp);
        res.dedup();
        let mut vpds: Vec<usize> = cells.iter().map(|c| c.vpd).collect();
        vpds.sort_unstable();
        vpds.dedup();

        let mut pairs: Vec<(usize, usize)> = cells.iter().map(|c| (c.mesh, c.vpd)).collect();
        pairs.extend(vpds.iter().map(|&v| (cfg.truth_mesh, v)));
        pairs.sort_unstable();
        pairs.dedup();
        let psf: BTreeMap<(usize, usize), Shared<PsfOperator>> = pairs
            .par_iter()
            .map(|&(m, v)| {
                let op = get(&spaces[&m]).and_then(|space| {
                    let grid = VoxelGrid::new(cfg.scan_region, v, diameter, &geometry)?;
                    PsfOperator::new(&space.mesh, &grid)
                });
                ((m, v), share(op))
            })
            .collect();

        let truth: BTreeMap<u64, Shared<Truth>> = res
            .par_iter()
            .map(|&re| {
                let t = (|| {
                    let space = get(&spaces[&cfg.truth_mesh])?;
                    let theta = reynolds_to_theta(re, diameter, &props)?;
                    let solution = solve_steady_ns(&space, &props, theta, &cfg.solver, None)?;
                    let wss = compute_wss(&solution, &gamma, Method::Truth)?;
                    let clean = vpds
                        .iter()
                        .map(|&v| {
                            let d = get(&psf[&(cfg.truth_mesh, v)]).map(|op| VoxelData {
                                grid: op.grid.clone(),
                                values: op.apply(&solution.coeffs),
                                kappa: 0.0,
                                seed: None,
                            });
                            (v, d.map(Arc::new).map_err(|e| e.to_string()))
                        })
                        .collect();
                    Ok(Truth {
                        theta,
                        peak_speed: solution.peak_speed(),
                        solution,
                        wss,
                        clean,
                    })
                })();
                (re.to_bits(), share(t))
            })
            .collect();

        let re_max = res.iter().copied().fold(0.0, f64::max);
        let ladder = targets
            .par_iter()
            .filter(|n| cells.iter().any(|c| c.mesh == **n))
            .map(|&n| {
                let mut states = Vec::new();
                if let Ok(space) = &spaces[&n] {
                    let mut re = 100.0;
                    let mut prev: Option<Vec<f64>> = None;
                    while re <= 1.5 * re_max.max(100.0) {
                        let Ok(theta) = reynolds_to_theta(re, diameter, &props) else { break };
                        match solve_steady_ns(space, &props, theta, &cfg.solver, prev.as_deref()) {
                            Ok(s) => {
                                prev = Some(s.coeffs.clone());
                                states.push((theta, Arc::new(s.coeffs)));
                            }
                            Err(_) => break,
                        }
                        re *= 3.0;
                    }
                }
                (n, states)
            })
            .collect();

        Ok(Self {
            cfg: cfg.clone(),
            geometry,
            geometry_id,
            gamma,
            spaces,
            truth,
            psf,
            ladder,
        })
    }

    pub fn props(&self) -> FluidProps {
        self.cfg.fluid
    }

    /// Ladder state with θ closest to `theta`.
    fn warm_start(&self, mesh: usize, theta: f64) -> Option<Arc<Vec<f64>>> {
        self.ladder
            .get(&mesh)?
            .iter()
            .min_by(|a, b| (a.0 - theta).abs().total_cmp(&(b.0 - theta).abs()))
            .map(|(_, s)| Arc::clone(s))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutputs {
    pub e_sbi: f64,
    pub e_mri: f64,
    pub theta_star: f64,
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
    pub termination: Termination,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub stage: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub mri_seconds: f64,
    pub sbi_seconds: f64,
    pub total_seconds: f64,
}

/// Inputs, outputs and artifacts of one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub geometry: String,
    pub cell: Cell,
    pub master_seed: u64,
    pub noise_seed: u64,
    pub theta_true: Option<f64>,
    pub peak_speed: Option<f64>,
    pub n_elements: Option<usize>,
    pub outputs: Option<RunOutputs>,
    pub failure: Option<Failure>,
    pub artifacts: Vec<PathBuf>,
    pub timings: Timings,
    /// Resolved configuration of the sweep this cell belongs to.
    pub config: SweepConfig,
}

impl RunRecord {
    pub fn ok(&self) -> bool {
        self.failure.is_none()
    }
}

/// Everything computed for one cell, before artifacts are written.
#[derive(Debug, Clone)]
pub struct CellProducts {
    pub clean: Arc<VoxelData>,
    pub noisy: VoxelData,
    pub truth: WssProfile,
    pub mri: WssProfile,
    pub sbi: WssProfile,
    pub report: ErrorReport,
    pub sbi_result: crate::sbi::SbiResult,
}

struct Staged {
    stage: &'static str,
    err: Error,
}

trait StageExt<T> {
    fn stage(self, stage: &'static str) -> std::result::Result<T, Staged>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: &'static str) -> std::result::Result<T, Staged> {
        self.map_err(|err| Staged { stage, err })
    }
}

/// Truth → PSF → noise → MRI WSS → SBI → SBI WSS → metrics for one cell.
/// `out` receives the cell's artifacts when given.
pub fn run_single(study: &Study, cell: Cell, out: Option<&Path>) -> RunRecord {
    let start = Instant::now();
    let cfg = &study.cfg;
    let seed = noise_seed(cfg.master_seed, &study.geometry_id, cell.vpd, cell.seed_index);
    let mut rec = RunRecord {
        geometry: study.geometry_id.clone(),
        cell,
        master_seed: cfg.master_seed,
        noise_seed: seed,
        theta_true: None,
        peak_speed: None,
        n_elements: None,
        outputs: None,
        failure: None,
        artifacts: Vec::new(),
        timings: Timings::default(),
        config: cfg.clone(),
    };
    let result = run_stages(study, cell, seed, &mut rec);
    match result {
        Ok(products) => {
            let r = &products.sbi_result.report;
            rec.outputs = Some(RunOutputs {
                e_sbi: products.report.e_sbi,
                e_mri: products.report.e_mri,
                theta_star: r.theta_star,
                cost: r.cost,
                iterations: r.iterations,
                converged: r.converged,
                termination: r.termination,
            });
            if !r.converged {
                rec.failure = Some(Failure {
                    stage: "sbi".into(),
                    message: format!("optimizer stopped without converging ({:?})", r.termination),
                });
            }
            rec.timings.total_seconds = start.elapsed().as_secs_f64();
            if let Some(dir) = out {
                if let Err(e) = write_cell(dir, study, &products, &mut rec) {
                    rec.failure = Some(Failure {
                        stage: "io".into(),
                        message: e.to_string(),
                    });
                }
            }
        }
        Err(Staged { stage, err }) => {
            rec.failure = Some(Failure {
                stage: stage.into(),
                message: err.to_string(),
            });
            rec.timings.total_seconds = start.elapsed().as_secs_f64();
            if let Some(dir) = out {
                let _ = write_record(&dir.join("cells").join(cell.id()), &mut rec);
            }
        }
    }
    rec
}

/// The cell computation without artifact output.
pub fn compute_cell(study: &Study, cell: Cell) -> Result<CellProducts> {
    let cfg = &study.cfg;
    let seed = noise_seed(cfg.master_seed, &study.geometry_id, cell.vpd, cell.seed_index);
    let mut rec = RunRecord {
        geometry: study.geometry_id.clone(),
        cell,
        master_seed: cfg.master_seed,
        noise_seed: seed,
        theta_true: None,
        peak_speed: None,
        n_elements: None,
        outputs: None,
        failure: None,
        artifacts: Vec::new(),
        timings: Timings::default(),
        config: cfg.clone(),
    };
    run_stages(study, cell, seed, &mut rec).map_err(|s| s.err)
}

fn run_stages(study: &Study, cell: Cell, seed: u64, rec: &mut RunRecord) -> std::result::Result<CellProducts, Staged> {
    let cfg = &study.cfg;
    let props = study.props();
    let truth = study
        .truth
        .get(&cell.re.to_bits())
        .ok_or_else(|| Error::InvalidArgument(format!("Re = {} was not prepared", cell.re)))
        .and_then(get)
        .stage("truth")?;
    rec.theta_true = Some(truth.theta);
    rec.peak_speed = Some(truth.peak_speed);
    let clean = truth
        .clean
        .get(&cell.vpd)
        .ok_or_else(|| Error::InvalidArgument(format!("VPD = {} was not prepared", cell.vpd)))
        .and_then(|d| d.clone().map_err(Error::Upstream))
        .stage("psf")?;
    let noisy = add_noise(&clean, cell.kappa, seed, truth.peak_speed).stage("noise")?;

    let t = Instant::now();
    let mri = mri_wss_profile(&noisy, &study.gamma, &props).stage("mri_wss")?;
    rec.timings.mri_seconds = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let space = study
        .spaces
        .get(&cell.mesh)
        .ok_or_else(|| Error::InvalidArgument(format!("mesh {} was not prepared", cell.mesh)))
        .and_then(get)
        .stage("mesh")?;
    rec.n_elements = Some(space.mesh.n_elements());
    let psf = study
        .psf
        .get(&(cell.mesh, cell.vpd))
        .ok_or_else(|| Error::InvalidArgument("point-spread operator was not prepared".into()))
        .and_then(get)
        .stage("psf")?;
    let mut problem = SbiProblem::new(space, props, psf, noisy.clone(), cfg.optimizer, cfg.solver).stage("sbi")?;
    problem.warm_start = study.warm_start(cell.mesh, problem.theta0);
    let sbi_result = optimize(&problem).stage("sbi")?;
    rec.timings.sbi_seconds = t.elapsed().as_secs_f64();
    let sbi = sbi_wss(&sbi_result, &study.gamma).stage("sbi_wss")?;
    let report = ErrorReport::new(&truth.wss, &mri, &sbi, cfg.quad_order).stage("metrics")?;
    Ok(CellProducts {
        clean,
        noisy,
        truth: truth.wss.clone(),
        mri,
        sbi,
        report,
        sbi_result,
    })
}

fn write_cell(dir: &Path, study: &Study, p: &CellProducts, rec: &mut RunRecord) -> Result<()> {
    let cdir = dir.join("cells").join(rec.cell.id());
    std::fs::create_dir_all(&cdir)?;
    let mut put = |name: &str| {
        let path = cdir.join(name);
        rec.artifacts.push(path.clone());
        path
    };
    p.truth.write_csv(put("truth_wss.csv"))?;
    p.mri.write_csv(put("mri_wss.csv"))?;
    p.sbi.write_csv(put("sbi_wss.csv"))?;
    p.clean.write(put("voxels_clean.txt"))?;
    p.noisy.write(put("voxels.txt"))?;
    std::fs::write(put("sbi_report.json"), p.sbi_result.report.to_json()?)?;
    if study.cfg.save_solutions {
        p.sbi_result.solution.write(put("sbi_solution.json"))?;
    }
    write_record(&cdir, rec)
}

fn write_record(cdir: &Path, rec: &mut RunRecord) -> Result<()> {
    std::fs::create_dir_all(cdir)?;
    let path = cdir.join("record.json");
    rec.artifacts.push(path.clone());
    std::fs::write(path, serde_json::to_string_pretty(rec)?)?;
    Ok(())
}

/// Outcome of a sweep.
#[derive(Debug)]
pub struct SweepOutcome {
    pub records: Vec<RunRecord>,
    pub results_csv: Option<PathBuf>,
}

impl SweepOutcome {
    pub fn failures(&self) -> usize {
        self.records.iter().filter(|r| !r.ok()).count()
    }
}

/// Runs `cells` (all cells of the config when `None`) on a pool of
/// `cfg.workers` threads. Rows are written in cell order.
pub fn run_sweep(cfg: &SweepConfig, base_dir: &Path, cells: Option<Vec<Cell>>, write: bool) -> Result<SweepOutcome> {
    let cells = cells.unwrap_or_else(|| cfg.cells());
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    pool.install(|| {
        let study = Study::prepare(cfg, base_dir, &cells)?;
        let out = if write {
            std::fs::create_dir_all(&cfg.output_dir)?;
            std::fs::write(cfg.output_dir.join("config.toml"), cfg.to_toml()?)?;
            write_shared(&study, &cfg.output_dir)?;
            Some(cfg.output_dir.as_path())
        } else {
            None
        };
        let records: Vec<RunRecord> = cells.par_iter().map(|&c| run_single(&study, c, out)).collect();
        let results_csv = if write {
            let path = cfg.output_dir.join("results.csv");
            super::results::write_results(&path, &records)?;
            super::results::write_summary(&cfg.output_dir.join("summary.csv"), &records)?;
            super::results::write_timings(&cfg.output_dir.join("timings.csv"), &records)?;
            Some(path)
        } else {
            None
        };
        Ok(SweepOutcome { records, results_csv })
    })
}

/// Meshes, Γ and (optionally) the true flows.
fn write_shared(study: &Study, dir: &Path) -> Result<()> {
    let mdir = dir.join("meshes");
    std::fs::create_dir_all(&mdir)?;
    for (n, s) in &study.spaces {
        if let Ok(space) = s {
            space.mesh.write(mdir.join(format!("mesh_{n}.txt")))?;
        }
    }
    if study.cfg.save_solutions {
        let tdir = dir.join("truth");
        std::fs::create_dir_all(&tdir)?;
        for t in study.truth.values().flatten() {
            let re = crate::fem::theta_to_reynolds(t.theta, study.geometry.diameter(), &study.props());
            t.solution.write(tdir.join(format!("solution_re{}.json", re.round())))?;
        }
    }
    Ok(())
}
