//! Synthetic MRI: voxel grids, the point-spread sampling operator and noise.

mod noise;
mod psf;

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use noise::add_noise;
pub use psf::{psf_weight, sinc, smoothed_box, PsfOperator};

use crate::error::{Error, Result};
use crate::geometry::{Geometry, Point};

/// Axis-aligned scan rectangle (cm).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanRegion {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl ScanRegion {
    /// `x ∈ [1.5, 4.5]`, `y ∈ [−0.3, 0.3]`: the stenosis bump and its
    /// shoulders.
    pub fn stenosis_default() -> Self {
        Self {
            x_min: 1.5,
            x_max: 4.5,
            y_min: -0.3,
            y_max: 0.3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = [self.x_min, self.x_max, self.y_min, self.y_max].iter().all(|v| v.is_finite())
            && self.x_min < self.x_max
            && self.y_min < self.y_max;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("degenerate scan region {self:?}")))
        }
    }
}

/// Uniform voxel lattice over a scan region, row-major (`i = iy·nx + ix`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoxelGrid {
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    pub dy: f64,
    pub region: ScanRegion,
    /// Centroid of voxel (0, 0).
    pub origin: Point,
    /// Voxel carries data (`α_i = 1`).
    pub alpha: Vec<bool>,
}

impl VoxelGrid {
    /// Square voxels of side `diameter / vpd`; the voxel counts are the
    /// region extents rounded to whole voxels, centred in the region. The
    /// mask marks voxels whose rectangle meets the domain.
    pub fn new(region: ScanRegion, vpd: usize, diameter: f64, geometry: &Geometry) -> Result<Self> {
        region.validate()?;
        if vpd == 0 {
            return Err(Error::Config("voxels per diameter must be positive".into()));
        }
        let d = diameter / vpd as f64;
        let nx = (((region.x_max - region.x_min) / d).round() as usize).max(1);
        let ny = (((region.y_max - region.y_min) / d).round() as usize).max(1);
        let cx = 0.5 * (region.x_min + region.x_max);
        let cy = 0.5 * (region.y_min + region.y_max);
        let origin = [cx - 0.5 * (nx - 1) as f64 * d, cy - 0.5 * (ny - 1) as f64 * d];
        let mut grid = Self {
            nx,
            ny,
            dx: d,
            dy: d,
            region,
            origin,
            alpha: Vec::new(),
        };
        grid.alpha = (0..grid.len())
            .map(|i| {
                let (lo, hi) = grid.voxel_rect(i);
                rect_meets_domain(geometry, lo, hi)
            })
            .collect();
        Ok(grid)
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.nx + ix
    }

    pub fn centroid(&self, i: usize) -> Point {
        let (ix, iy) = (i % self.nx, i / self.nx);
        [self.origin[0] + ix as f64 * self.dx, self.origin[1] + iy as f64 * self.dy]
    }

    pub fn voxel_rect(&self, i: usize) -> (Point, Point) {
        let c = self.centroid(i);
        (
            [c[0] - 0.5 * self.dx, c[1] - 0.5 * self.dy],
            [c[0] + 0.5 * self.dx, c[1] + 0.5 * self.dy],
        )
    }

    pub fn n_masked(&self) -> usize {
        self.alpha.iter().filter(|&&a| a).count()
    }

    /// Voxels per diameter implied by the spacing.
    pub fn vpd(&self, diameter: f64) -> f64 {
        diameter / self.dy
    }
}

/// Whether the open rectangle `(lo, hi)` meets the domain interior.
pub fn rect_meets_domain(geometry: &Geometry, lo: Point, hi: Point) -> bool {
    match geometry {
        Geometry::Channel(g) => {
            let a = lo[0].max(g.x_min);
            let b = hi[0].min(g.x_max);
            if a >= b {
                return false;
            }
            // the half-width is quasi-convex, so its maximum is at an end
            let ymax = g.y(a).max(g.y(b));
            ymax > lo[1].max(-hi[1])
        }
        Geometry::Polyline(g) => {
            let inside = |p: Point| p[0] > lo[0] && p[0] < hi[0] && p[1] > lo[1] && p[1] < hi[1];
            if g.vertices.iter().any(|&v| inside(v)) {
                return true;
            }
            let corners = [lo, [hi[0], lo[1]], hi, [lo[0], hi[1]]];
            if corners.iter().any(|&c| g.contains(c)) {
                return true;
            }
            (0..g.vertices.len()).any(|k| {
                let (a, b) = g.segment(k);
                (0..4).any(|m| segments_cross(a, b, corners[m], corners[(m + 1) % 4]))
            })
        }
    }
}

fn segments_cross(a: Point, b: Point, c: Point, d: Point) -> bool {
    let orient = |p: Point, q: Point, r: Point| (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0]);
    let (d1, d2) = (orient(c, d, a), orient(c, d, b));
    let (d3, d4) = (orient(a, b, c), orient(a, b, d));
    d1 * d2 < 0.0 && d3 * d4 < 0.0
}

/// Per-voxel velocity samples on a grid (cm/s).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoxelData {
    pub grid: VoxelGrid,
    pub values: Vec<[f64; 2]>,
    /// Noise level as a fraction of the peak speed (0 for clean data).
    pub kappa: f64,
    pub seed: Option<u64>,
}

impl VoxelData {
    pub fn masked(&self) -> impl Iterator<Item = (usize, [f64; 2])> + '_ {
        self.values
            .iter()
            .enumerate()
            .filter(|(i, _)| self.grid.alpha[*i])
            .map(|(i, &v)| (i, v))
    }

    pub fn to_text(&self) -> String {
        let g = &self.grid;
        let mut s = String::new();
        writeln!(s, "wss-voxels 1").unwrap();
        writeln!(s, "nx {}", g.nx).unwrap();
        writeln!(s, "ny {}", g.ny).unwrap();
        writeln!(s, "dx {:.17e}", g.dx).unwrap();
        writeln!(s, "dy {:.17e}", g.dy).unwrap();
        writeln!(s, "origin {:.17e} {:.17e}", g.origin[0], g.origin[1]).unwrap();
        let r = &g.region;
        writeln!(s, "region {:.17e} {:.17e} {:.17e} {:.17e}", r.x_min, r.x_max, r.y_min, r.y_max).unwrap();
        writeln!(s, "kappa {:.17e}", self.kappa).unwrap();
        match self.seed {
            Some(seed) => writeln!(s, "seed {seed}").unwrap(),
            None => writeln!(s, "seed none").unwrap(),
        }
        writeln!(s, "data").unwrap();
        for (v, &a) in self.values.iter().zip(&g.alpha) {
            writeln!(s, "{:.17e} {:.17e} {}", v[0], v[1], u8::from(a)).unwrap();
        }
        s
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_text(&std::fs::read_to_string(path)?).map_err(|m| Error::parse(path, m))
    }

    pub fn from_text(text: &str) -> std::result::Result<Self, String> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        if lines.next() != Some("wss-voxels 1") {
            return Err("missing wss-voxels header".into());
        }
        let mut header = std::collections::HashMap::new();
        for l in lines.by_ref() {
            if l == "data" {
                break;
            }
            let (k, v) = l.split_once(' ').ok_or_else(|| format!("bad header line {l:?}"))?;
            header.insert(k.to_string(), v.trim().to_string());
        }
        let get = |k: &str| header.get(k).ok_or_else(|| format!("missing header field {k}"));
        let floats = |k: &str| -> std::result::Result<Vec<f64>, String> {
            get(k)?
                .split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|e| format!("{k}: {e}")))
                .collect()
        };
        let nx: usize = get("nx")?.parse().map_err(|e| format!("nx: {e}"))?;
        let ny: usize = get("ny")?.parse().map_err(|e| format!("ny: {e}"))?;
        let dx = floats("dx")?.first().copied().ok_or("dx")?;
        let dy = floats("dy")?.first().copied().ok_or("dy")?;
        let o = floats("origin")?;
        let r = floats("region")?;
        if o.len() != 2 || r.len() != 4 {
            return Err("origin needs 2 values and region 4".into());
        }
        let kappa = floats("kappa")?.first().copied().ok_or("kappa")?;
        let seed = match get("seed")?.as_str() {
            "none" => None,
            s => Some(s.parse::<u64>().map_err(|e| format!("seed: {e}"))?),
        };
        let mut values = Vec::with_capacity(nx * ny);
        let mut alpha = Vec::with_capacity(nx * ny);
        for l in lines {
            let f: Vec<&str> = l.split_whitespace().collect();
            if f.len() != 3 {
                return Err(format!("bad voxel line {l:?}"));
            }
            let u: f64 = f[0].parse().map_err(|_| format!("bad value in {l:?}"))?;
            let v: f64 = f[1].parse().map_err(|_| format!("bad value in {l:?}"))?;
            alpha.push(match f[2] {
                "0" => false,
                "1" => true,
                _ => return Err(format!("bad mask flag in {l:?}")),
            });
            values.push([u, v]);
        }
        if values.len() != nx * ny {
            return Err(format!("expected {} voxels, found {}", nx * ny, values.len()));
        }
        Ok(Self {
            grid: VoxelGrid {
                nx,
                ny,
                dx,
                dy,
                region: ScanRegion {
                    x_min: r[0],
                    x_max: r[1],
                    y_min: r[2],
                    y_max: r[3],
                },
                origin: [o[0], o[1]],
                alpha,
            },
            values,
            kappa,
            seed,
        })
    }

    /// Plot-friendly CSV: `ix iy x y u v alpha`.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::WriterBuilder::new().delimiter(b' ').from_path(path)?;
        w.write_record(["ix", "iy", "x", "y", "u", "v", "alpha"])?;
        for (i, v) in self.values.iter().enumerate() {
            let c = self.grid.centroid(i);
            w.write_record([
                (i % self.grid.nx).to_string(),
                (i / self.grid.nx).to_string(),
                c[0].to_string(),
                c[1].to_string(),
                v[0].to_string(),
                v[1].to_string(),
                u8::from(self.grid.alpha[i]).to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::GeometrySpec;

    fn stenosis() -> Geometry {
        Geometry::Channel(GeometrySpec::stenosis())
    }

    #[test]
    fn grid_layout() {
        let g = VoxelGrid::new(ScanRegion::stenosis_default(), 3, 0.6, &stenosis()).unwrap();
        assert_eq!((g.nx, g.ny), (15, 3));
        assert!((g.dx - 0.2).abs() < 1e-15);
        let c = g.centroid(g.index(0, 0));
        assert!((c[0] - 1.6).abs() < 1e-12 && (c[1] + 0.2).abs() < 1e-12);
        let c = g.centroid(g.len() - 1);
        assert!((c[0] - 4.4).abs() < 1e-12 && (c[1] - 0.2).abs() < 1e-12);
        assert_eq!(g.n_masked(), g.len());
    }

    #[test]
    fn mask_matches_dense_point_oracle() {
        let geo = stenosis();
        let region = ScanRegion {
            x_min: 1.5,
            x_max: 4.5,
            y_min: -0.45,
            y_max: 0.45,
        };
        let g = VoxelGrid::new(region, 9, 0.6, &geo).unwrap();
        let spec = GeometrySpec::stenosis();
        for i in 0..g.len() {
            let (lo, hi) = g.voxel_rect(i);
            let n = 60;
            let mut hit = false;
            for a in 0..=n {
                for b in 0..=n {
                    let p = [
                        lo[0] + (hi[0] - lo[0]) * a as f64 / n as f64,
                        lo[1] + (hi[1] - lo[1]) * b as f64 / n as f64,
                    ];
                    hit |= p[1].abs() < spec.y(p[0]);
                }
            }
            assert_eq!(hit, g.alpha[i], "voxel {i} {lo:?} {hi:?} {}", spec.y(lo[0]).max(spec.y(hi[0])));
        }
        assert!(g.n_masked() < g.len());
    }

    #[test]
    fn voxel_text_round_trip() {
        let g = VoxelGrid::new(ScanRegion::stenosis_default(), 3, 0.6, &stenosis()).unwrap();
        let values = (0..g.len()).map(|i| [i as f64 / 7.0, -(i as f64).sqrt()]).collect();
        let d = VoxelData {
            grid: g,
            values,
            kappa: 0.05,
            seed: Some(42),
        };
        assert_eq!(VoxelData::from_text(&d.to_text()).unwrap(), d);
        assert!(VoxelData::from_text("wss-voxels 1\nnx 1\n").is_err());
    }
}
