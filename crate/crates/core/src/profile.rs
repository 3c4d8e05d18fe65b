//! Wall samples and wall-shear-stress profiles along the comparison curve Γ.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point;

/// Which reconstruction produced a profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Truth,
    Mri,
    Sbi,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Truth => "truth",
            Method::Mri => "mri",
            Method::Sbi => "sbi",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "truth" => Some(Method::Truth),
            "mri" => Some(Method::Mri),
            "sbi" => Some(Method::Sbi),
            _ => None,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A point on the exact wall with its outward unit normal and arc length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WallSample {
    pub s: f64,
    pub point: Point,
    pub normal: Point,
}

/// σ_wss (Pa) at each wall sample.
#[derive(Debug, Clone, PartialEq)]
pub struct WssProfile {
    pub method: Method,
    pub samples: Vec<WallSample>,
    pub wss: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    s: f64,
    x: f64,
    y: f64,
    nx: f64,
    ny: f64,
    wss: f64,
    method: Method,
}

impl WssProfile {
    pub fn new(method: Method, samples: Vec<WallSample>, wss: Vec<f64>) -> Result<Self> {
        if samples.len() != wss.len() {
            return Err(Error::InvalidArgument(format!(
                "{} samples but {} values",
                samples.len(),
                wss.len()
            )));
        }
        if samples.windows(2).any(|w| !(w[1].s > w[0].s)) {
            return Err(Error::InvalidArgument("arc lengths must be strictly increasing".into()));
        }
        Ok(Self { method, samples, wss })
    }

    pub fn len(&self) -> usize {
        self.wss.len()
    }

    pub fn is_empty(&self) -> bool {
        self.wss.is_empty()
    }

    pub fn arc_lengths(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.s).collect()
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::WriterBuilder::new().delimiter(b' ').from_path(path)?;
        for (smp, &wss) in self.samples.iter().zip(&self.wss) {
            w.serialize(Row {
                s: smp.s,
                x: smp.point[0],
                y: smp.point[1],
                nx: smp.normal[0],
                ny: smp.normal[1],
                wss,
                method: self.method,
            })?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut r = csv::ReaderBuilder::new().delimiter(b' ').from_path(path)?;
        let mut samples = Vec::new();
        let mut wss = Vec::new();
        let mut method = None;
        for row in r.deserialize() {
            let row: Row = row?;
            if *method.get_or_insert(row.method) != row.method {
                return Err(Error::parse(path, "mixed methods in one profile"));
            }
            samples.push(WallSample {
                s: row.s,
                point: [row.x, row.y],
                normal: [row.nx, row.ny],
            });
            wss.push(row.wss);
        }
        let method = method.ok_or_else(|| Error::parse(path, "empty profile"))?;
        Self::new(method, samples, wss)
    }
}
