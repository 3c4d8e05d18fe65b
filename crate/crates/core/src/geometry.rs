//! Vessel geometry: the parametric stenotic channel and user-supplied
//! polyline outlines.
//!
//! The channel occupies `{(x, s·y(x)) : x ∈ [x_min, x_max], |s| ≤ 1}` with the
//! half-width profile
//!
//! ```text
//! y(x) = B0 − A / √(2π σ²) · exp(−(x − c)² / (2σ²))
//! ```
//!
//! i.e. a straight channel of half-width `B0` narrowed by a Gaussian bump of
//! area parameter `A` centred at `c`. The left end is the inflow boundary, the
//! right end the outflow boundary, and the two curves `(x, ±y(x))` the walls.

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::GaussLegendre;

pub type Point = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryTag {
    Wall,
    Inflow,
    Outflow,
}

impl BoundaryTag {
    pub fn as_str(self) -> &'static str {
        match self {
            BoundaryTag::Wall => "wall",
            BoundaryTag::Inflow => "inflow",
            BoundaryTag::Outflow => "outflow",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "wall" => Some(BoundaryTag::Wall),
            "inflow" => Some(BoundaryTag::Inflow),
            "outflow" => Some(BoundaryTag::Outflow),
            _ => None,
        }
    }
}

impl fmt::Display for BoundaryTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WallSide {
    Top,
    Bottom,
}

impl WallSide {
    /// `+1` for the top wall, `-1` for the bottom wall.
    pub fn sign(self) -> f64 {
        match self {
            WallSide::Top => 1.0,
            WallSide::Bottom => -1.0,
        }
    }
}

/// Parametric stenotic channel (lengths in cm, `area` in cm²).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometrySpec {
    pub b0: f64,
    pub center: f64,
    pub sigma_g: f64,
    pub area: f64,
    pub x_min: f64,
    pub x_max: f64,
}

/// Closest wall point to a query point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WallProjection {
    pub point: Point,
    /// Axial coordinate of the wall point.
    pub x: f64,
    pub side: WallSide,
    /// Arc length measured along the wall from `x_min`.
    pub arc_length: f64,
}

impl GeometrySpec {
    pub fn new(b0: f64, center: f64, sigma_g: f64, area: f64, x_min: f64, x_max: f64) -> Result<Self> {
        let spec = Self {
            b0,
            center,
            sigma_g,
            area,
            x_min,
            x_max,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// The 2D stenotic vessel studied throughout: B0 = 0.3, c = 3,
    /// σ = 0.6, A = 0.18 on `x ∈ [0, 6]`.
    pub fn stenosis() -> Self {
        Self {
            b0: 0.3,
            center: 3.0,
            sigma_g: 0.6,
            area: 0.18,
            x_min: 0.0,
            x_max: 6.0,
        }
    }

    /// Straight channel of half-width `b0` (no bump).
    pub fn straight(b0: f64, x_min: f64, x_max: f64) -> Self {
        Self {
            b0,
            center: 0.5 * (x_min + x_max),
            sigma_g: 1.0,
            area: 0.0,
            x_min,
            x_max,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.b0, self.center, self.sigma_g, self.area, self.x_min, self.x_max]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidGeometry("non-finite parameter".into()));
        }
        if self.b0 <= 0.0 {
            return Err(Error::InvalidGeometry(format!("B0 = {} must be positive", self.b0)));
        }
        if self.sigma_g <= 0.0 {
            return Err(Error::InvalidGeometry(format!("sigma_g = {} must be positive", self.sigma_g)));
        }
        if self.area < 0.0 {
            return Err(Error::InvalidGeometry(format!("A = {} must be non-negative", self.area)));
        }
        if self.x_min >= self.x_max {
            return Err(Error::InvalidGeometry(format!(
                "empty channel extent [{}, {}]",
                self.x_min, self.x_max
            )));
        }
        if self.throat_half_width() <= 0.0 {
            return Err(Error::InvalidGeometry(format!(
                "throat half-width {} is not positive (walls intersect)",
                self.throat_half_width()
            )));
        }
        Ok(())
    }

    /// Vessel diameter `D = 2 B0` used for the Reynolds number and VPD.
    pub fn diameter(&self) -> f64 {
        2.0 * self.b0
    }

    /// Peak depth of the bump, `A / √(2π σ²)`.
    pub fn bump_depth(&self) -> f64 {
        self.area / (2.0 * PI * self.sigma_g * self.sigma_g).sqrt()
    }

    pub fn throat_half_width(&self) -> f64 {
        self.b0 - self.bump_depth()
    }

    fn check_x(&self, x: f64) -> Result<()> {
        let tol = 1e-12 * (self.x_max - self.x_min);
        if x < self.x_min - tol || x > self.x_max + tol || !x.is_finite() {
            return Err(Error::OutsideDomain {
                x,
                x_min: self.x_min,
                x_max: self.x_max,
            });
        }
        Ok(())
    }

    /// `y(x)`, the wall half-width at axial position `x`.
    pub fn half_width(&self, x: f64) -> Result<f64> {
        self.check_x(x)?;
        Ok(self.y(x))
    }

    fn gauss(&self, x: f64) -> f64 {
        let z = (x - self.center) / self.sigma_g;
        (-0.5 * z * z).exp()
    }

    /// Unchecked half-width; defined for every real `x`.
    pub fn y(&self, x: f64) -> f64 {
        self.b0 - self.bump_depth() * self.gauss(x)
    }

    /// `y'(x)`.
    pub fn dy(&self, x: f64) -> f64 {
        let s2 = self.sigma_g * self.sigma_g;
        self.bump_depth() * self.gauss(x) * (x - self.center) / s2
    }

    /// `y''(x)`.
    pub fn d2y(&self, x: f64) -> f64 {
        let s2 = self.sigma_g * self.sigma_g;
        let u = x - self.center;
        self.bump_depth() * self.gauss(x) * (1.0 - u * u / s2) / s2
    }

    pub fn wall_point(&self, x: f64, side: WallSide) -> Point {
        [x, side.sign() * self.y(x)]
    }

    /// Unit tangent of the wall curve, oriented along increasing `x`.
    pub fn wall_tangent(&self, x: f64, side: WallSide) -> Result<Point> {
        self.check_x(x)?;
        let d = side.sign() * self.dy(x);
        let n = (1.0 + d * d).sqrt();
        Ok([1.0 / n, d / n])
    }

    /// Outward unit normal of the wall curve `(x, ±y(x))`.
    pub fn wall_normal(&self, x: f64, side: WallSide) -> Result<Point> {
        self.check_x(x)?;
        let s = side.sign();
        let d = self.dy(x);
        let n = (1.0 + d * d).sqrt();
        // top: (−y', 1)/n ; bottom: (−y', −1)/n
        Ok([-d / n, s / n])
    }

    /// Length of one wall between axial positions `a` and `b`.
    pub fn wall_arc_length(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        let gl = GaussLegendre::new(10);
        let panels = (((b - a) / (0.1 * self.sigma_g)).ceil() as usize).max(4);
        gl.integrate_composite(a, b, panels, |x| {
            let d = self.dy(x);
            (1.0 + d * d).sqrt()
        })
    }

    /// Axial coordinate on one wall whose arc length from `a` equals `s`.
    pub fn axial_at_arc_length(&self, a: f64, s: f64) -> f64 {
        let mut x = a + s;
        for _ in 0..60 {
            let f = self.wall_arc_length(a, x) - s;
            let d = self.dy(x);
            let step = f / (1.0 + d * d).sqrt();
            x -= step;
            if step.abs() < 1e-15 * (1.0 + x.abs()) {
                break;
            }
        }
        x
    }

    /// Exact area `∫ 2 y(x) dx` of the channel.
    pub fn area_exact(&self) -> f64 {
        let erf_arg = |x: f64| (x - self.center) / (self.sigma_g * 2f64.sqrt());
        let bump = self.area * (erf(erf_arg(self.x_max)) - erf(erf_arg(self.x_min)));
        2.0 * self.b0 * (self.x_max - self.x_min) - bump
    }

    /// Closest-point projection onto the wall on the side of `p`
    /// (top for `p[1] ≥ 0`).
    pub fn project_to_wall(&self, p: Point) -> Result<WallProjection> {
        let side = if p[1] >= 0.0 { WallSide::Top } else { WallSide::Bottom };
        self.project_to_side(p, side)
    }

    pub fn project_to_side(&self, p: Point, side: WallSide) -> Result<WallProjection> {
        let s = side.sign();
        // minimise ½[(x − p1)² + (s y(x) − p2)²]
        let grad = |x: f64| (x - p[0]) + (s * self.y(x) - p[1]) * s * self.dy(x);
        let mut x = p[0].clamp(self.x_min, self.x_max);
        let mut residual = grad(x).abs();
        let mut converged = residual < 1e-15;
        for _ in 0..100 {
            if converged {
                break;
            }
            let d = self.dy(x);
            let hess = 1.0 + d * d + (s * self.y(x) - p[1]) * s * self.d2y(x);
            let g = grad(x);
            let step = if hess > 0.1 { g / hess } else { g };
            let mut next = x - step;
            if !next.is_finite() {
                break;
            }
            next = next.clamp(self.x_min, self.x_max);
            let moved = (next - x).abs();
            x = next;
            residual = grad(x).abs();
            if moved < 1e-16 * (1.0 + x.abs()) || residual < 1e-15 {
                converged = true;
            }
            // pinned against the channel end with the minimiser outside
            if (x == self.x_min && grad(x) > 0.0) || (x == self.x_max && grad(x) < 0.0) {
                converged = true;
            }
        }
        if !converged && residual > 1e-10 {
            return Err(Error::Projection { residual });
        }
        Ok(WallProjection {
            point: self.wall_point(x, side),
            x,
            side,
            arc_length: self.wall_arc_length(self.x_min, x),
        })
    }

    /// Approximate signed distance (negative inside).
    pub fn signed_distance(&self, p: Point) -> f64 {
        let d_in = self.x_min - p[0];
        let d_out = p[0] - self.x_max;
        let x = p[0].clamp(self.x_min, self.x_max);
        let slope = self.dy(x);
        let d_wall = (p[1].abs() - self.y(x)) / (1.0 + slope * slope).sqrt();
        d_in.max(d_out).max(d_wall)
    }
}

/// Error function: Maclaurin series below 3, continued fraction above.
fn erf(x: f64) -> f64 {
    if x < 0.0 {
        return -erf(-x);
    }
    if x < 3.0 {
        // Maclaurin series
        let mut sum = x;
        let mut term = x;
        let x2 = x * x;
        let mut n = 0.0;
        loop {
            n += 1.0;
            term *= -x2 / n;
            let add = term / (2.0 * n + 1.0);
            sum += add;
            if add.abs() < 1e-17 * sum.abs() {
                break;
            }
        }
        2.0 / PI.sqrt() * sum
    } else {
        // continued fraction for erfc
        let mut f = 0.0;
        for k in (1..60).rev() {
            f = (k as f64 / 2.0) / (x + f);
        }
        1.0 - (-x * x).exp() / PI.sqrt() / (x + f)
    }
}

/// A closed polygonal outline with per-segment boundary tags. Segment `k`
/// joins vertex `k` to vertex `k + 1` (wrapping around).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolylineGeometry {
    pub vertices: Vec<Point>,
    pub tags: Vec<BoundaryTag>,
}

impl PolylineGeometry {
    pub fn new(vertices: Vec<Point>, tags: Vec<BoundaryTag>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::InvalidGeometry("polyline needs at least 3 vertices".into()));
        }
        if tags.len() != vertices.len() {
            return Err(Error::InvalidGeometry("one tag per segment required".into()));
        }
        let mut g = Self { vertices, tags };
        if g.signed_area() < 0.0 {
            // store counter-clockwise
            g.vertices.reverse();
            let n = g.tags.len();
            // segment k (v_k → v_{k+1}) becomes segment n − 2 − k after reversal
            let old = g.tags.clone();
            for k in 0..n {
                g.tags[(2 * n - 2 - k) % n] = old[k];
            }
        }
        if !g.tags.contains(&BoundaryTag::Inflow) {
            return Err(Error::InvalidGeometry("polyline has no inflow segment".into()));
        }
        Ok(g)
    }

    /// Reads the plain-text outline: one `x y` pair per line, then an
    /// optional `tags` section of `<segment> <wall|inflow|outflow>` lines.
    /// Untagged segments are walls. `#` starts a comment.
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text).map_err(|msg| Error::parse(path, msg))
    }

    pub fn parse(text: &str) -> std::result::Result<Self, String> {
        let mut vertices = Vec::new();
        let mut tagged = Vec::new();
        let mut in_tags = false;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if line.eq_ignore_ascii_case("tags") || line.eq_ignore_ascii_case("[tags]") {
                in_tags = true;
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 2 {
                return Err(format!("line {}: expected two fields", lineno + 1));
            }
            if in_tags {
                let seg: usize = fields[0]
                    .parse()
                    .map_err(|_| format!("line {}: bad segment index", lineno + 1))?;
                let tag = BoundaryTag::parse(fields[1])
                    .ok_or_else(|| format!("line {}: unknown tag {:?}", lineno + 1, fields[1]))?;
                tagged.push((seg, tag));
            } else {
                let x: f64 = fields[0].parse().map_err(|_| format!("line {}: bad x", lineno + 1))?;
                let y: f64 = fields[1].parse().map_err(|_| format!("line {}: bad y", lineno + 1))?;
                vertices.push([x, y]);
            }
        }
        let mut tags = vec![BoundaryTag::Wall; vertices.len()];
        for (seg, tag) in tagged {
            if seg >= tags.len() {
                return Err(format!("segment index {seg} out of range"));
            }
            tags[seg] = tag;
        }
        Self::new(vertices, tags).map_err(|e| e.to_string())
    }

    pub fn segment(&self, k: usize) -> (Point, Point) {
        let n = self.vertices.len();
        (self.vertices[k], self.vertices[(k + 1) % n])
    }

    pub fn signed_area(&self) -> f64 {
        let n = self.vertices.len();
        (0..n)
            .map(|k| {
                let a = self.vertices[k];
                let b = self.vertices[(k + 1) % n];
                a[0] * b[1] - b[0] * a[1]
            })
            .sum::<f64>()
            * 0.5
    }

    /// Closest point on segment `k` and its distance.
    pub fn closest_on_segment(&self, k: usize, p: Point) -> (Point, f64) {
        let (a, b) = self.segment(k);
        let ab = [b[0] - a[0], b[1] - a[1]];
        let len2 = ab[0] * ab[0] + ab[1] * ab[1];
        let t = (((p[0] - a[0]) * ab[0] + (p[1] - a[1]) * ab[1]) / len2).clamp(0.0, 1.0);
        let q = [a[0] + t * ab[0], a[1] + t * ab[1]];
        (q, ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt())
    }

    pub fn nearest_segment(&self, p: Point) -> (usize, Point, f64) {
        (0..self.vertices.len())
            .map(|k| {
                let (q, d) = self.closest_on_segment(k, p);
                (k, q, d)
            })
            .min_by(|a, b| a.2.total_cmp(&b.2))
            .expect("non-empty polyline")
    }

    pub fn contains(&self, p: Point) -> bool {
        let n = self.vertices.len();
        let mut inside = false;
        for k in 0..n {
            let a = self.vertices[k];
            let b = self.vertices[(k + 1) % n];
            if (a[1] > p[1]) != (b[1] > p[1]) {
                let x = a[0] + (p[1] - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
                if p[0] < x {
                    inside = !inside;
                }
            }
        }
        inside
    }

    pub fn signed_distance(&self, p: Point) -> f64 {
        let (_, _, d) = self.nearest_segment(p);
        if self.contains(p) {
            -d
        } else {
            d
        }
    }

    /// Outward normal of segment `k` (the outline is counter-clockwise).
    pub fn segment_normal(&self, k: usize) -> Point {
        let (a, b) = self.segment(k);
        let t = [b[0] - a[0], b[1] - a[1]];
        let l = (t[0] * t[0] + t[1] * t[1]).sqrt();
        [t[1] / l, -t[0] / l]
    }

    pub fn inflow_segment(&self) -> usize {
        self.tags
            .iter()
            .position(|&t| t == BoundaryTag::Inflow)
            .expect("validated at construction")
    }

    /// Maximal runs of consecutive wall segments, in outline order.
    pub fn wall_chains(&self) -> Vec<Vec<usize>> {
        let n = self.tags.len();
        let start = self.tags.iter().position(|&t| t != BoundaryTag::Wall).unwrap_or(0);
        let mut chains = Vec::new();
        let mut cur = Vec::new();
        for i in 0..n {
            let k = (start + 1 + i) % n;
            if self.tags[k] == BoundaryTag::Wall {
                cur.push(k);
            } else if !cur.is_empty() {
                chains.push(std::mem::take(&mut cur));
            }
        }
        if !cur.is_empty() {
            chains.push(cur);
        }
        chains
    }
}

/// Any domain the pipeline can mesh and solve on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Geometry {
    Channel(GeometrySpec),
    Polyline(PolylineGeometry),
}

impl Geometry {
    pub fn signed_distance(&self, p: Point) -> f64 {
        match self {
            Geometry::Channel(g) => g.signed_distance(p),
            Geometry::Polyline(g) => g.signed_distance(p),
        }
    }

    pub fn bounding_box(&self) -> (Point, Point) {
        match self {
            Geometry::Channel(g) => ([g.x_min, -g.b0], [g.x_max, g.b0]),
            Geometry::Polyline(g) => {
                let mut lo = [f64::INFINITY; 2];
                let mut hi = [f64::NEG_INFINITY; 2];
                for v in &g.vertices {
                    for d in 0..2 {
                        lo[d] = lo[d].min(v[d]);
                        hi[d] = hi[d].max(v[d]);
                    }
                }
                (lo, hi)
            }
        }
    }

    /// Points that must appear as mesh vertices: the corners, plus evenly
    /// spaced points on the straight inflow and outflow sections of a
    /// channel (spacing close to `h`).
    pub fn fixed_points(&self, h: f64) -> Vec<Point> {
        match self {
            Geometry::Channel(g) => {
                let mut out = Vec::new();
                for x in [g.x_min, g.x_max] {
                    let top = g.y(x);
                    let n = ((2.0 * top / h).round() as usize).max(1);
                    for k in 0..=n {
                        out.push([x, -top + 2.0 * top * k as f64 / n as f64]);
                    }
                }
                out
            }
            Geometry::Polyline(g) => g.vertices.clone(),
        }
    }

    /// Whether `p` lies on a boundary section whose mesh vertices are all
    /// fixed points (the channel ends).
    pub fn on_fixed_section(&self, p: Point, tol: f64) -> bool {
        match self {
            Geometry::Channel(g) => p[0] <= g.x_min + tol || p[0] >= g.x_max - tol,
            Geometry::Polyline(_) => false,
        }
    }

    /// Characteristic vessel diameter.
    pub fn diameter(&self) -> f64 {
        match self {
            Geometry::Channel(g) => g.diameter(),
            Geometry::Polyline(g) => {
                let (a, b) = g.segment(g.inflow_segment());
                ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt()
            }
        }
    }

    /// Tag of the boundary edge between two boundary vertices.
    pub fn classify_edge(&self, a: Point, b: Point) -> BoundaryTag {
        match self {
            Geometry::Channel(g) => {
                let h = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
                let tol = 1e-6 * h.max(1e-12);
                if (a[0] - g.x_min).abs() < tol && (b[0] - g.x_min).abs() < tol {
                    BoundaryTag::Inflow
                } else if (a[0] - g.x_max).abs() < tol && (b[0] - g.x_max).abs() < tol {
                    BoundaryTag::Outflow
                } else {
                    BoundaryTag::Wall
                }
            }
            Geometry::Polyline(g) => {
                let m = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
                let (k, _, _) = g.nearest_segment(m);
                g.tags[k]
            }
        }
    }

    /// Move a point that left the domain back onto the boundary.
    pub fn pull_inside(&self, p: Point) -> Point {
        match self {
            Geometry::Channel(g) => {
                let mut q = p;
                q[0] = q[0].clamp(g.x_min, g.x_max);
                let y = g.y(q[0]);
                if q[1].abs() > y {
                    if let Ok(pr) = g.project_to_wall(q) {
                        q = pr.point;
                    } else {
                        q[1] = q[1].signum() * y;
                    }
                }
                q
            }
            Geometry::Polyline(g) => {
                if g.contains(p) {
                    p
                } else {
                    g.nearest_segment(p).1
                }
            }
        }
    }

    /// Projection of a boundary point onto the boundary part carrying `tag`.
    pub fn snap(&self, p: Point, tag: BoundaryTag) -> Result<Point> {
        match self {
            Geometry::Channel(g) => match tag {
                BoundaryTag::Wall => Ok(g.project_to_wall(p)?.point),
                BoundaryTag::Inflow => Ok([g.x_min, p[1]]),
                BoundaryTag::Outflow => Ok([g.x_max, p[1]]),
            },
            Geometry::Polyline(g) => {
                let best = (0..g.vertices.len())
                    .filter(|&k| g.tags[k] == tag)
                    .map(|k| g.closest_on_segment(k, p))
                    .min_by(|a, b| a.1.total_cmp(&b.1));
                Ok(best.map(|(q, _)| q).unwrap_or(p))
            }
        }
    }

    pub fn area(&self) -> f64 {
        match self {
            Geometry::Channel(g) => g.area_exact(),
            Geometry::Polyline(g) => g.signed_area().abs(),
        }
    }

    /// Prescribed inflow velocity at a point of the inflow boundary for peak
    /// speed `theta`: a parabola vanishing at the ends of the inflow segment,
    /// directed into the domain.
    pub fn inflow_velocity(&self, p: Point, theta: f64) -> [f64; 2] {
        match self {
            Geometry::Channel(g) => crate::fem::inflow_profile(p[1], theta, g.b0),
            Geometry::Polyline(g) => {
                let k = g.inflow_segment();
                let (a, b) = g.segment(k);
                let ab = [b[0] - a[0], b[1] - a[1]];
                let len2 = ab[0] * ab[0] + ab[1] * ab[1];
                let t = (((p[0] - a[0]) * ab[0] + (p[1] - a[1]) * ab[1]) / len2).clamp(0.0, 1.0);
                let r = 2.0 * t - 1.0;
                let n = g.segment_normal(k);
                let mag = theta * (1.0 - r) * (1.0 + r);
                [-n[0] * mag, -n[1] * mag]
            }
        }
    }

    pub fn as_channel(&self) -> Option<&GeometrySpec> {
        match self {
            Geometry::Channel(g) => Some(g),
            Geometry::Polyline(_) => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vessel() -> GeometrySpec {
        GeometrySpec::stenosis()
    }

    #[test]
    fn throat_half_width_closed_form() {
        let g = vessel();
        let expected = 0.3 - 0.18 / (0.6 * (2.0 * PI).sqrt());
        assert!((g.half_width(3.0).unwrap() - expected).abs() < 1e-15);
        // the quoted value is good to about five digits
        assert!((g.half_width(3.0).unwrap() - 0.180316).abs() < 2e-5);
    }

    #[test]
    fn half_width_one_sigma_from_center() {
        let g = vessel();
        let expected = 0.3 - 0.18 / (0.6 * (2.0 * PI).sqrt()) * (-0.5f64).exp();
        for x in [2.4, 3.6] {
            let y = g.half_width(x).unwrap();
            assert!((y - expected).abs() < 1e-15);
            assert!((y - 0.227395).abs() < 2e-5);
        }
    }

    #[test]
    fn no_bump_gives_b0() {
        let g = GeometrySpec::straight(0.3, 0.0, 6.0);
        for x in [0.0, 1.3, 3.0, 6.0] {
            assert_eq!(g.half_width(x).unwrap(), 0.3);
        }
    }

    #[test]
    fn half_width_rejects_points_outside_extent() {
        let g = vessel();
        assert!(matches!(g.half_width(-0.1), Err(Error::OutsideDomain { .. })));
        assert!(matches!(g.half_width(6.5), Err(Error::OutsideDomain { .. })));
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(GeometrySpec::new(0.0, 3.0, 0.6, 0.18, 0.0, 6.0).is_err());
        assert!(GeometrySpec::new(0.3, 3.0, 0.0, 0.18, 0.0, 6.0).is_err());
        assert!(GeometrySpec::new(0.3, 3.0, 0.6, -1.0, 0.0, 6.0).is_err());
        assert!(GeometrySpec::new(0.3, 3.0, 0.6, 0.18, 6.0, 0.0).is_err());
        // bump deeper than the channel
        assert!(GeometrySpec::new(0.3, 3.0, 0.6, 0.5, 0.0, 6.0).is_err());
        assert!(GeometrySpec::new(0.3, 3.0, 0.6, 0.18, 0.0, 6.0).is_ok());
    }

    #[test]
    fn derivative_matches_central_differences() {
        let g = vessel();
        for &x in &[1.0, 2.4, 2.9, 3.3, 4.1] {
            let exact = g.dy(x);
            let mut errs = Vec::new();
            for h in [1e-3, 1e-4] {
                let fd = (g.y(x + h) - g.y(x - h)) / (2.0 * h);
                errs.push((fd - exact).abs());
            }
            // O(h²): a tenfold step reduction cuts the error ~100×
            assert!(errs[0] < 1e-6, "x={x} err={}", errs[0]);
            assert!(errs[1] < errs[0] / 50.0 || errs[1] < 1e-11, "x={x} {errs:?}");
            let fd2 = (g.dy(x + 1e-5) - g.dy(x - 1e-5)) / 2e-5;
            assert!((fd2 - g.d2y(x)).abs() < 1e-7);
        }
    }

    #[test]
    fn normals_on_flat_and_symmetric_points() {
        let flat = GeometrySpec::straight(0.3, 0.0, 6.0);
        assert_eq!(flat.wall_normal(2.0, WallSide::Top).unwrap(), [0.0, 1.0]);
        assert_eq!(flat.wall_normal(2.0, WallSide::Bottom).unwrap(), [0.0, -1.0]);
        let n = vessel().wall_normal(3.0, WallSide::Top).unwrap();
        assert_eq!(n, [0.0, 1.0]);
    }

    #[test]
    fn normal_orthogonal_to_finite_difference_tangent() {
        let g = vessel();
        for side in [WallSide::Top, WallSide::Bottom] {
            for &x in &[0.5, 2.2, 2.75, 3.4, 5.0] {
                let n = g.wall_normal(x, side).unwrap();
                let h = 1e-6;
                let a = g.wall_point(x - h, side);
                let b = g.wall_point(x + h, side);
                let t = [b[0] - a[0], b[1] - a[1]];
                let tl = (t[0] * t[0] + t[1] * t[1]).sqrt();
                let dot = (n[0] * t[0] + n[1] * t[1]) / tl;
                assert!(dot.abs() < 1e-8, "x={x} dot={dot}");
                assert!(((n[0] * n[0] + n[1] * n[1]).sqrt() - 1.0).abs() < 1e-15);
                let ta = g.wall_tangent(x, side).unwrap();
                assert!((n[0] * ta[0] + n[1] * ta[1]).abs() < 1e-14);
                // outward: points away from the centreline
                assert!(n[1] * side.sign() > 0.0);
            }
        }
    }

    #[test]
    fn projection_fixed_point_and_symmetry() {
        let g = vessel();
        let p = g.wall_point(2.3, WallSide::Top);
        let pr = g.project_to_wall(p).unwrap();
        assert!((pr.point[0] - p[0]).abs() < 1e-14 && (pr.point[1] - p[1]).abs() < 1e-14);

        let pr = g.project_to_wall([3.0, 0.25]).unwrap();
        assert!((pr.x - 3.0).abs() < 1e-14);
        assert!((pr.point[1] - g.y(3.0)).abs() < 1e-15);
    }

    #[test]
    fn projection_satisfies_optimality_and_is_idempotent() {
        let g = vessel();
        let mut state = 0x1234_5678_9abc_def0u64;
        let mut uniform = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..200 {
            let x = 0.3 + 5.4 * uniform();
            let side = if uniform() < 0.5 { WallSide::Top } else { WallSide::Bottom };
            let off = (uniform() - 0.5) * 0.2;
            let w = g.wall_point(x, side);
            let n = g.wall_normal(x, side).unwrap();
            let p = [w[0] + off * n[0] + 0.01 * (uniform() - 0.5), w[1] + off * n[1]];
            let pr = g.project_to_side(p, side).unwrap();
            assert!((pr.point[1] - side.sign() * g.y(pr.x)).abs() < 1e-12);
            let t = g.wall_tangent(pr.x, side).unwrap();
            let r = (p[0] - pr.point[0]) * t[0] + (p[1] - pr.point[1]) * t[1];
            assert!(r.abs() < 1e-10, "residual {r}");
            let again = g.project_to_side(pr.point, side).unwrap();
            let moved = ((again.point[0] - pr.point[0]).powi(2) + (again.point[1] - pr.point[1]).powi(2)).sqrt();
            assert!(moved < 1e-12);
        }
    }

    #[test]
    fn erf_reference_values() {
        assert!((erf(0.5) - 0.520_499_877_813_046_5).abs() < 1e-15);
        assert!((erf(2.0) - 0.995_322_265_018_952_7).abs() < 1e-15);
        assert!((erf(3.5) - 0.999_999_256_901_627_7).abs() < 1e-15);
        assert!((erf(-1.0) + 0.842_700_792_949_714_9).abs() < 1e-15);
    }

    #[test]
    fn polyline_parse_and_orientation() {
        let text = "\
# an L-free rectangle drawn clockwise
0 0.3
4 0.3
4 -0.3
0 -0.3
tags
3 inflow
1 outflow
";
        let g = PolylineGeometry::parse(text).unwrap();
        assert!(g.signed_area() > 0.0);
        let k = g.inflow_segment();
        let (a, b) = g.segment(k);
        assert_eq!(a[0], 0.0);
        assert_eq!(b[0], 0.0);
        let out = g.tags.iter().position(|&t| t == BoundaryTag::Outflow).unwrap();
        let (a, b) = g.segment(out);
        assert_eq!((a[0], b[0]), (4.0, 4.0));
        assert_eq!(g.wall_chains().len(), 2);
        assert!(g.contains([1.0, 0.0]));
        assert!(!g.contains([1.0, 0.5]));
        let n = g.segment_normal(k);
        assert!((n[0] + 1.0).abs() < 1e-15);
        let geo = Geometry::Polyline(g);
        let v = geo.inflow_velocity([0.0, 0.0], 2.0);
        assert!((v[0] - 2.0).abs() < 1e-14 && v[1].abs() < 1e-14);
    }
}
