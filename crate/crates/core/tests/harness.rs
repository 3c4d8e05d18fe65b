use std::path::Path;

use wss_sbi::harness::{
    export_plots, read_results, run_single, run_sweep, Cell, Family, Study, SweepConfig,
};

fn small(dir: &Path) -> SweepConfig {
    SweepConfig {
        reynolds: vec![100.0],
        kappa: vec![0.0, 0.1],
        vpd: vec![3],
        sbi_meshes: vec![368],
        truth_mesh: 368,
        seeds: 2,
        master_seed: 9,
        output_dir: dir.to_path_buf(),
        workers: 1,
        ..SweepConfig::default()
    }
}

#[test]
fn sweep_writes_reproducible_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let a = small(&tmp.path().join("a"));
    let out = run_sweep(&a, Path::new("."), None, true).unwrap();
    assert_eq!(out.records.len(), 4);
    assert_eq!(out.failures(), 0);
    let rows = read_results(&out.results_csv.unwrap()).unwrap();
    assert_eq!(rows.len(), 4);
    // inverse crime: same mesh, no noise
    for r in rows.iter().filter(|r| r.kappa == 0.0) {
        assert!(r.e_sbi.unwrap() < 0.1, "{:?}", r);
    }
    // noise draws are shared across kappa, distinct across seeds
    assert_eq!(rows[0].noise_seed, rows[2].noise_seed);
    assert_ne!(rows[2].noise_seed, rows[3].noise_seed);

    // a second run with another worker count gives the same bytes
    let b = SweepConfig {
        output_dir: tmp.path().join("b"),
        workers: 2,
        ..a.clone()
    };
    run_sweep(&b, Path::new("."), None, true).unwrap();
    let ra = std::fs::read(tmp.path().join("a/results.csv")).unwrap();
    let rb = std::fs::read(tmp.path().join("b/results.csv")).unwrap();
    assert_eq!(ra, rb);

    // a cell run on its own matches its row in the sweep
    let cell = Cell {
        re: 100.0,
        kappa: 0.1,
        vpd: 3,
        mesh: 368,
        seed_index: 1,
    };
    let c = SweepConfig {
        output_dir: tmp.path().join("c"),
        kappa: vec![0.1],
        ..a.clone()
    };
    let single = run_sweep(&c, Path::new("."), Some(vec![cell]), true).unwrap();
    let row = &read_results(&single.results_csv.unwrap()).unwrap()[0];
    assert_eq!(row, &rows[3]);

    // every record echoes its inputs and lists existing artifacts
    let rec = &out.records[3];
    assert_eq!(rec.config, a);
    assert!(rec.artifacts.iter().all(|p| p.exists()));
    let text = std::fs::read_to_string(tmp.path().join("a/cells").join(cell.id()).join("record.json")).unwrap();
    assert!(text.contains("\"noise_seed\""));

    let summary = std::fs::read_to_string(tmp.path().join("a/summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 3);

    let files = export_plots(&tmp.path().join("a"), Family::All).unwrap();
    let kappa = std::fs::read_to_string(tmp.path().join("a/plots/error_vs_kappa.csv")).unwrap();
    assert!(kappa.starts_with("Re,vpd,kappa,e_sbi,e_mri\n"));
    assert_eq!(kappa.lines().count(), 3);
    let fit = std::fs::read_to_string(tmp.path().join("a/plots/error_vs_kappa_fit.csv")).unwrap();
    assert_eq!(fit.lines().count(), 3);
    assert!(files.iter().any(|f| f.ends_with("plot_figures.py")));
}

#[test]
fn failures_are_recorded_not_fatal() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small(tmp.path());
    let cells = vec![Cell {
        re: 100.0,
        kappa: 0.0,
        vpd: 3,
        mesh: 368,
        seed_index: 0,
    }];
    let study = Study::prepare(&cfg, Path::new("."), &cells).unwrap();
    // Re 700 was never prepared
    let rec = run_single(
        &study,
        Cell {
            re: 700.0,
            ..cells[0]
        },
        Some(tmp.path()),
    );
    let f = rec.failure.as_ref().unwrap();
    assert_eq!(f.stage, "truth");
    assert!(rec.outputs.is_none());
    assert!(rec.artifacts.iter().any(|p| p.ends_with("record.json")));
}

#[test]
fn invalid_configs_are_config_errors() {
    let cfg = SweepConfig {
        vpd: vec![],
        ..SweepConfig::default()
    };
    assert!(matches!(
        run_sweep(&cfg, Path::new("."), None, false),
        Err(wss_sbi::Error::Config(_))
    ));
    let poly = SweepConfig::from_toml("[geometry]\nkind = \"polyline\"\npath = \"missing.txt\"\n").unwrap();
    assert!(matches!(
        Study::prepare(&poly, Path::new("."), &[]),
        Err(wss_sbi::Error::Config(_))
    ));
}
