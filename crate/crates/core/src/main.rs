use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use wss_sbi::harness::{export_plots, run_checks, run_sweep, Cell, Family, SweepConfig};
use wss_sbi::Error;

/// Wall shear stress from synthetic MRI: voxel postprocessing versus
/// simulation-based imaging.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    /// Output directory (overrides the config file).
    #[arg(long, short, global = true)]
    output_dir: Option<PathBuf>,
    /// Worker threads, 0 for all cores (overrides the config file).
    #[arg(long, short, global = true)]
    workers: Option<usize>,
    /// Master seed (overrides the config file).
    #[arg(long, short, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one cell of the study.
    Run {
        /// Config file supplying everything but the cell.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 1000.0)]
        re: f64,
        /// Noise level as a fraction of the peak speed.
        #[arg(long, default_value_t = 0.2)]
        kappa: f64,
        #[arg(long, default_value_t = 9)]
        vpd: usize,
        /// Target element count of the reconstruction mesh.
        #[arg(long, default_value_t = 1590)]
        mesh: usize,
        #[arg(long, default_value_t = 0)]
        seed_index: usize,
    },
    /// Run every cell of a config file.
    Sweep {
        config: PathBuf,
        /// Realizations per cell (overrides the config file).
        #[arg(long)]
        seeds: Option<usize>,
    },
    /// Write plot data from the results in the output directory.
    Export {
        #[arg(long, value_enum, default_value = "all")]
        family: Family,
    },
    /// Run the quick oracle checks.
    Verify,
}

fn load(path: Option<&PathBuf>) -> Result<(SweepConfig, PathBuf), Error> {
    match path {
        Some(p) => {
            let base = p.parent().map(PathBuf::from).unwrap_or_default();
            Ok((SweepConfig::read(p)?, base))
        }
        None => Ok((SweepConfig::default(), PathBuf::from("."))),
    }
}

fn apply_globals(cli: &Cli, cfg: &mut SweepConfig) {
    if let Some(d) = &cli.output_dir {
        cfg.output_dir = d.clone();
    }
    if let Some(w) = cli.workers {
        cfg.workers = w;
    }
    if let Some(s) = cli.seed {
        cfg.master_seed = s;
    }
}

fn sweep(cli: &Cli, mut cfg: SweepConfig, base: PathBuf, cells: Option<Vec<Cell>>) -> Result<ExitCode, Error> {
    apply_globals(cli, &mut cfg);
    cfg.validate()?;
    let outcome = run_sweep(&cfg, &base, cells, true)?;
    for r in &outcome.records {
        match (&r.outputs, &r.failure) {
            (_, Some(f)) => println!("{}  failed at {}: {}", r.cell.id(), f.stage, f.message),
            (Some(o), None) => println!(
                "{}  e_sbi {:.3}%  e_mri {:.3}%  theta* {:.6}",
                r.cell.id(),
                o.e_sbi,
                o.e_mri,
                o.theta_star
            ),
            (None, None) => {}
        }
    }
    if let Some(p) = &outcome.results_csv {
        println!("results: {}", p.display());
    }
    Ok(if outcome.failures() > 0 { ExitCode::from(1) } else { ExitCode::SUCCESS })
}

fn execute(cli: &Cli) -> Result<ExitCode, Error> {
    match &cli.command {
        Command::Run {
            config,
            re,
            kappa,
            vpd,
            mesh,
            seed_index,
        } => {
            let (mut cfg, base) = load(config.as_ref())?;
            cfg.reynolds = vec![*re];
            cfg.kappa = vec![*kappa];
            cfg.vpd = vec![*vpd];
            cfg.sbi_meshes = vec![*mesh];
            cfg.seeds = seed_index + 1;
            let cell = Cell {
                re: *re,
                kappa: *kappa,
                vpd: *vpd,
                mesh: *mesh,
                seed_index: *seed_index,
            };
            sweep(cli, cfg, base, Some(vec![cell]))
        }
        Command::Sweep { config, seeds } => {
            let (mut cfg, base) = load(Some(config))?;
            if let Some(s) = seeds {
                cfg.seeds = *s;
            }
            sweep(cli, cfg, base, None)
        }
        Command::Export { family } => {
            let dir = cli.output_dir.clone().unwrap_or_else(|| PathBuf::from("out"));
            for p in export_plots(&dir, *family)? {
                println!("{}", p.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify => {
            let checks = run_checks();
            for c in &checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            Ok(if checks.iter().all(|c| c.passed) { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(code) => code,
        Err(e @ Error::Config(_)) => {
            eprintln!("config error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
