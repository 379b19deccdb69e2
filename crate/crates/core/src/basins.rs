//! Basins of attraction on a square grid of starting points.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functions::Objective;
use crate::numerics::distance;
use crate::optimizers::{minimize, OptimizerConfig, Trace};

pub type Rgb = [u8; 3];

pub const BLACK: Rgb = [0, 0, 0];
pub const BLUE: Rgb = [0, 0, 255];
pub const CYAN: Rgb = [0, 255, 255];
pub const GREEN: Rgb = [0, 200, 0];
pub const RED: Rgb = [255, 0, 0];
pub const YELLOW: Rgb = [255, 255, 0];
pub const MAGENTA: Rgb = [255, 0, 255];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Attractor {
    pub point: Vec<f64>,
    pub label: String,
    pub color: Rgb,
}

impl Attractor {
    pub fn new(point: Vec<f64>, label: impl Into<String>, color: Rgb) -> Self {
        Self {
            point,
            label: label.into(),
            color,
        }
    }
}

fn default_classify_tol() -> f64 {
    1e-5
}

fn default_resolution() -> usize {
    201
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasinGrid {
    pub center: [f64; 2],
    pub half_width: f64,
    #[serde(default = "default_resolution")]
    pub resolution: usize,
    #[serde(default)]
    pub attractors: Vec<Attractor>,
    #[serde(default = "default_classify_tol")]
    pub classify_tol: f64,
    #[serde(default)]
    pub unresolved_color: Rgb,
}

impl BasinGrid {
    pub fn new(center: [f64; 2], half_width: f64, resolution: usize) -> Result<Self> {
        let grid = Self {
            center,
            half_width,
            resolution,
            attractors: Vec::new(),
            classify_tol: default_classify_tol(),
            unresolved_color: BLACK,
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn with_attractor(mut self, point: Vec<f64>, label: impl Into<String>, color: Rgb) -> Result<Self> {
        self.attractors.push(Attractor::new(point, label, color));
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.resolution < 2 {
            return Err(Error::InvalidParameter("grid resolution must be >= 2".into()));
        }
        if !(self.half_width > 0.0 && self.half_width.is_finite()) {
            return Err(Error::InvalidParameter("grid half width must be positive".into()));
        }
        if !(self.classify_tol > 0.0) {
            return Err(Error::InvalidParameter("classify_tol must be positive".into()));
        }
        for (i, a) in self.attractors.iter().enumerate() {
            if a.point.len() != 2 {
                return Err(Error::DimensionMismatch {
                    expected: 2,
                    got: a.point.len(),
                });
            }
            if self.attractors[..i].iter().any(|b| b.label == a.label) {
                return Err(Error::InvalidParameter(format!("duplicate attractor label {}", a.label)));
            }
        }
        Ok(())
    }

    pub fn cell_width(&self) -> f64 {
        2.0 * self.half_width / self.resolution as f64
    }

    /// Center of the cell in `row` (0 = top, largest y) and `col`.
    pub fn cell_center(&self, row: usize, col: usize) -> [f64; 2] {
        let w = self.cell_width();
        [
            self.center[0] - self.half_width + (col as f64 + 0.5) * w,
            self.center[1] + self.half_width - (row as f64 + 0.5) * w,
        ]
    }

    /// Index of the first attractor within `classify_tol` of `x`.
    pub fn classify(&self, x: &[f64]) -> Option<usize> {
        self.attractors
            .iter()
            .position(|a| distance(&a.point, x) <= self.classify_tol)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelField {
    pub resolution: usize,
    /// Row-major, row 0 at the top. `None` is unresolved.
    pub labels: Vec<Option<usize>>,
    pub iterations: Vec<usize>,
    pub endpoints: Vec<Vec<f64>>,
    /// Whether the run from each cell met its gradient tolerance.
    pub converged: Vec<bool>,
}

impl LabelField {
    pub fn get(&self, row: usize, col: usize) -> Option<usize> {
        self.labels[row * self.resolution + col]
    }

    /// Classifies every endpoint again against `grid`'s attractors.
    pub fn relabel(&mut self, grid: &BasinGrid) {
        for (label, end) in self.labels.iter_mut().zip(&self.endpoints) {
            *label = if end.iter().all(|v| v.is_finite()) { grid.classify(end) } else { None };
        }
    }
}

/// Colors handed out to discovered attractors, in order.
pub const PALETTE: [Rgb; 8] = [BLUE, CYAN, GREEN, RED, YELLOW, MAGENTA, [255, 128, 0], [128, 128, 255]];

/// Distinct converged endpoints in cell order, merging any within `tol` of
/// one already found.
pub fn discover_attractors(field: &LabelField, tol: f64) -> Vec<Vec<f64>> {
    let mut found: Vec<Vec<f64>> = Vec::new();
    for (end, ok) in field.endpoints.iter().zip(&field.converged) {
        if *ok && end.iter().all(|v| v.is_finite()) && found.iter().all(|p| distance(p, end) > tol) {
            found.push(end.clone());
        }
    }
    found
}

/// Runs `run` from every cell center, on `workers` threads (all cores if
/// `None`). The result does not depend on the thread count.
pub fn rasterize_with<F>(grid: &BasinGrid, workers: Option<usize>, run: F) -> Result<LabelField>
where
    F: Fn(&[f64]) -> Result<Trace> + Sync,
{
    grid.validate()?;
    let n = grid.resolution;
    let cell = |i: usize| {
        let x = grid.cell_center(i / n, i % n);
        match run(&x) {
            Ok(t) => {
                let end = t.endpoint().to_vec();
                let label = if end.iter().all(|v| v.is_finite()) { grid.classify(&end) } else { None };
                (label, t.iterations(), end, t.termination.converged())
            }
            Err(_) => (None, 0, x.to_vec(), false),
        }
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    let cells: Vec<_> = pool.install(|| (0..n * n).into_par_iter().map(cell).collect());
    let mut field = LabelField {
        resolution: n,
        labels: Vec::with_capacity(n * n),
        iterations: Vec::with_capacity(n * n),
        endpoints: Vec::with_capacity(n * n),
        converged: Vec::with_capacity(n * n),
    };
    for (label, iters, end, ok) in cells {
        field.labels.push(label);
        field.iterations.push(iters);
        field.endpoints.push(end);
        field.converged.push(ok);
    }
    Ok(field)
}

/// [`rasterize_with`] using [`minimize`] on `obj`.
pub fn rasterize(
    obj: &dyn Objective,
    cfg: &OptimizerConfig,
    grid: &BasinGrid,
    workers: Option<usize>,
) -> Result<LabelField> {
    if obj.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            got: obj.dim(),
        });
    }
    cfg.validate(2)?;
    rasterize_with(grid, workers, |x| minimize(obj, x, cfg, None))
}

/// Binary PPM (P6) with one pixel per cell.
pub fn ppm_bytes(field: &LabelField, grid: &BasinGrid) -> Vec<u8> {
    let n = field.resolution;
    let mut out = format!("P6\n{n} {n}\n255\n").into_bytes();
    out.reserve(3 * n * n);
    for label in &field.labels {
        let c = label.map_or(grid.unresolved_color, |i| grid.attractors[i].color);
        out.extend_from_slice(&c);
    }
    out
}

pub fn write_ppm(field: &LabelField, grid: &BasinGrid, path: &Path) -> Result<()> {
    std::fs::write(path, ppm_bytes(field, grid))?;
    Ok(())
}

/// Row-major label matrix; unresolved cells are `-1`.
pub fn labels_csv(field: &LabelField) -> String {
    let mut s = String::new();
    for row in field.labels.chunks(field.resolution) {
        let line: Vec<String> = row
            .iter()
            .map(|l| l.map_or("-1".to_string(), |i| i.to_string()))
            .collect();
        s.push_str(&line.join(","));
        s.push('\n');
    }
    s
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelCount {
    /// Attractor label, or `"unresolved"`.
    pub label: String,
    pub count: usize,
    pub fraction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BasinStats {
    /// One entry per attractor in grid order, then the unresolved cells.
    pub counts: Vec<LabelCount>,
}

impl BasinStats {
    pub fn fraction(&self, label: &str) -> f64 {
        self.counts
            .iter()
            .find(|c| c.label == label)
            .map_or(0.0, |c| c.fraction)
    }

    pub fn count(&self, label: &str) -> usize {
        self.counts
            .iter()
            .find(|c| c.label == label)
            .map_or(0, |c| c.count)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("label,count,fraction\n");
        for c in &self.counts {
            let _ = writeln!(s, "{},{},{}", c.label, c.count, c.fraction);
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(self.to_csv().as_bytes())?;
        Ok(())
    }
}

pub const UNRESOLVED: &str = "unresolved";

pub fn basin_stats(field: &LabelField, grid: &BasinGrid) -> BasinStats {
    let total = field.labels.len() as f64;
    let mut counts = vec![0usize; grid.attractors.len() + 1];
    for l in &field.labels {
        counts[l.unwrap_or(grid.attractors.len())] += 1;
    }
    let names = grid
        .attractors
        .iter()
        .map(|a| a.label.clone())
        .chain(std::iter::once(UNRESOLVED.to_string()));
    BasinStats {
        counts: names
            .zip(counts)
            .map(|(label, count)| LabelCount {
                label,
                count,
                fraction: count as f64 / total,
            })
            .collect(),
    }
}
