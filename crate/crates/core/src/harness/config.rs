use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fem::{FluidProps, SolverOptions};
use crate::geometry::{Geometry, GeometrySpec, PolylineGeometry};
use crate::metrics::{DEFAULT_QUAD_ORDER, DEFAULT_SAMPLES};
use crate::mri::ScanRegion;
use crate::sbi::OptimizerSettings;

/// Element counts of the three reconstruction meshes and the mesh sizes
/// that produce them on the default vessel.
pub const STENOSIS_MESHES: [(usize, f64); 3] = [(368, 0.123), (766, 0.088), (1590, 0.063)];

/// Domain source in the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum GeometryConfig {
    Channel(GeometrySpec),
    /// Outline file: `x y` per line plus a `tags` section.
    Polyline { path: PathBuf },
}

impl Default for GeometryConfig {
    fn default() -> Self {
        GeometryConfig::Channel(GeometrySpec::stenosis())
    }
}

impl GeometryConfig {
    pub fn load(&self, base: &Path) -> Result<Geometry> {
        match self {
            GeometryConfig::Channel(g) => {
                g.validate()?;
                Ok(Geometry::Channel(*g))
            }
            GeometryConfig::Polyline { path } => {
                let p = if path.is_absolute() { path.clone() } else { base.join(path) };
                Ok(Geometry::Polyline(PolylineGeometry::read(p)?))
            }
        }
    }
}

/// A full sweep description. Every field has a default, so an empty file
/// is the full stenosis study at one seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub geometry: GeometryConfig,
    pub scan_region: ScanRegion,
    pub fluid: FluidProps,
    pub reynolds: Vec<f64>,
    /// Noise levels as fractions of the peak speed.
    pub kappa: Vec<f64>,
    pub vpd: Vec<usize>,
    /// Target element counts of the reconstruction meshes.
    pub sbi_meshes: Vec<usize>,
    /// Target element count of the mesh carrying the true flow.
    pub truth_mesh: usize,
    /// Mesh size per target element count; missing entries are derived
    /// from the domain area.
    pub mesh_sizes: Vec<(usize, f64)>,
    pub seeds: usize,
    pub master_seed: u64,
    pub wall_samples: usize,
    pub quad_order: usize,
    pub solver: SolverOptions,
    pub optimizer: OptimizerSettings,
    pub output_dir: PathBuf,
    /// Worker threads, 0 for all cores.
    pub workers: usize,
    /// Keep the reconstructed flow of every cell.
    pub save_solutions: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            geometry: GeometryConfig::default(),
            scan_region: ScanRegion::stenosis_default(),
            fluid: FluidProps::blood(),
            reynolds: vec![100.0, 500.0, 1000.0],
            kappa: vec![0.0, 0.05, 0.10, 0.15, 0.20],
            vpd: vec![3, 9, 15, 28],
            sbi_meshes: vec![368, 766, 1590],
            truth_mesh: 1590,
            mesh_sizes: STENOSIS_MESHES.to_vec(),
            seeds: 1,
            master_seed: 0,
            wall_samples: DEFAULT_SAMPLES,
            quad_order: DEFAULT_QUAD_ORDER,
            solver: SolverOptions::default(),
            optimizer: OptimizerSettings::default(),
            output_dir: PathBuf::from("out"),
            workers: 0,
            save_solutions: false,
        }
    }
}

/// One point of the sweep grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub re: f64,
    pub kappa: f64,
    pub vpd: usize,
    /// Target element count of the reconstruction mesh.
    pub mesh: usize,
    /// Realization index within the cell.
    pub seed_index: usize,
}

impl Cell {
    /// Directory name, unique within a sweep.
    pub fn id(&self) -> String {
        format!(
            "re{}_k{:03}_n{}_m{}_s{}",
            self.re,
            (self.kappa * 100.0).round() as i64,
            self.vpd,
            self.mesh,
            self.seed_index
        )
    }
}

impl SweepConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if self.reynolds.is_empty() || self.kappa.is_empty() || self.vpd.is_empty() || self.sbi_meshes.is_empty() {
            return bad("reynolds, kappa, vpd and sbi_meshes must be non-empty");
        }
        if self.reynolds.iter().any(|&r| !(r > 0.0 && r.is_finite())) {
            return bad("Reynolds numbers must be positive");
        }
        if self.kappa.iter().any(|&k| !(0.0..=1.0).contains(&k)) {
            return bad("kappa must lie in [0, 1]");
        }
        if self.vpd.contains(&0) || self.sbi_meshes.contains(&0) || self.truth_mesh == 0 {
            return bad("voxel and element counts must be positive");
        }
        if self.seeds == 0 {
            return bad("seeds must be at least 1");
        }
        if self.wall_samples < 2 || self.quad_order == 0 {
            return bad("need at least two wall samples and a positive quadrature order");
        }
        if self.mesh_sizes.iter().any(|&(_, h)| !(h > 0.0)) {
            return bad("mesh sizes must be positive");
        }
        self.scan_region.validate()?;
        FluidProps::new(self.fluid.rho0, self.fluid.nu).map_err(|e| Error::Config(e.to_string()))?;
        if let GeometryConfig::Channel(g) = &self.geometry {
            g.validate().map_err(|e| Error::Config(e.to_string()))?;
        }
        Ok(())
    }

    /// Cells in sorted order: Re, κ, VPD, mesh, seed.
    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for &re in &self.reynolds {
            for &kappa in &self.kappa {
                for &vpd in &self.vpd {
                    for &mesh in &self.sbi_meshes {
                        for seed_index in 0..self.seeds {
                            out.push(Cell {
                                re,
                                kappa,
                                vpd,
                                mesh,
                                seed_index,
                            });
                        }
                    }
                }
            }
        }
        out
    }

    /// Mesh size for a target element count.
    pub fn mesh_size(&self, target: usize, geometry: &Geometry) -> f64 {
        if let Some(&(_, h)) = self.mesh_sizes.iter().find(|(n, _)| *n == target) {
            return h;
        }
        // calibrated on the default vessel: N ≈ C·area/h²
        let (n0, h0) = STENOSIS_MESHES[2];
        let c = n0 as f64 * h0 * h0 / GeometrySpec::stenosis().area_exact();
        (c * geometry.area() / target as f64).sqrt()
    }

    /// Stable identifier of the domain, used in seeds and result rows.
    pub fn geometry_id(&self, geometry: &Geometry) -> String {
        match geometry {
            Geometry::Channel(g) if *g == GeometrySpec::stenosis() => "stenosis".into(),
            Geometry::Channel(g) => format!(
                "channel_b{}_c{}_s{}_a{}_x{}_{}",
                g.b0, g.center, g.sigma_g, g.area, g.x_min, g.x_max
            ),
            Geometry::Polyline(p) => {
                let mut h = Sha256::new();
                for v in &p.vertices {
                    h.update(v[0].to_le_bytes());
                    h.update(v[1].to_le_bytes());
                }
                let d = h.finalize();
                format!("polyline_{:02x}{:02x}{:02x}{:02x}", d[0], d[1], d[2], d[3])
            }
        }
    }
}

/// Noise seed of one realization. It depends on the master seed, the
/// domain, the voxel grid and the realization index only, so every Re, κ
/// and reconstruction mesh sees the same standard-normal draws.
pub fn noise_seed(master: u64, geometry_id: &str, vpd: usize, seed_index: usize) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update(geometry_id.as_bytes());
    h.update((vpd as u64).to_le_bytes());
    h.update((seed_index as u64).to_le_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("32-byte digest"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_the_full_stenosis_sweep() {
        let c = SweepConfig::from_toml("").unwrap();
        assert_eq!(c, SweepConfig::default());
        assert_eq!(c.cells().len(), 180);
    }

    #[test]
    fn config_round_trip_and_errors() {
        let c = SweepConfig {
            seeds: 3,
            kappa: vec![0.2],
            ..SweepConfig::default()
        };
        assert_eq!(SweepConfig::from_toml(&c.to_toml().unwrap()).unwrap(), c);
        assert!(SweepConfig::from_toml("kappa = [1.5]").is_err());
        assert!(SweepConfig::from_toml("seeds = 0").is_err());
        assert!(SweepConfig::from_toml("vpd = []").is_err());
        assert!(SweepConfig::from_toml("bogus = 1").is_err());
        let p = SweepConfig::from_toml("reynolds = [1000.0]\n[geometry]\nkind = \"channel\"\nb0 = 0.3\ncenter = 3.0\nsigma_g = 0.6\narea = 0.0\nx_min = 0.0\nx_max = 6.0\n").unwrap();
        assert!(matches!(p.geometry, GeometryConfig::Channel(g) if g.area == 0.0));
    }

    #[test]
    fn seeds_are_stable_and_distinct() {
        let a = noise_seed(1, "stenosis", 9, 0);
        assert_eq!(a, noise_seed(1, "stenosis", 9, 0));
        assert_ne!(a, noise_seed(1, "stenosis", 9, 1));
        assert_ne!(a, noise_seed(1, "stenosis", 3, 0));
        assert_ne!(a, noise_seed(2, "stenosis", 9, 0));
    }

    #[test]
    fn mesh_sizes_follow_the_table_then_area() {
        let c = SweepConfig::default();
        let g = Geometry::Channel(GeometrySpec::stenosis());
        assert_eq!(c.mesh_size(766, &g), 0.088);
        let h = c.mesh_size(6360, &g);
        assert!((h - 0.0315).abs() < 1e-3, "{h}");
    }
}
