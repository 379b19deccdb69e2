//! Dense symmetric linear algebra and finite differences.
//!
//! Everything here is sized for the tiny problems the optimizers see (mostly
//! dimension 2), so the eigensolver is a plain cyclic Jacobi iteration.

use crate::error::{Error, Result};

/// Relative off-diagonal tolerance for the Jacobi sweeps.
const JACOBI_TOL: f64 = 1e-14;
const JACOBI_MAX_SWEEPS: usize = 100;

/// Default relative step for central-difference gradients.
pub const FD_GRADIENT_STEP: f64 = 1e-6;
/// Default relative step for central-difference Hessians.
pub const FD_HESSIAN_STEP: f64 = 1e-4;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// A dense symmetric matrix. Writes go through [`SymMatrix::set`], which
/// updates both triangles, so `m[(i, j)] == m[(j, i)]` always holds exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    dim: usize,
    entries: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "SymMatrix needs dim >= 1");
        Self {
            dim,
            entries: vec![0.0; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m.set(i, i, d);
        }
        m
    }

    /// Builds from the upper triangle of `f(i, j)` for `i <= j`.
    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in i..dim {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    /// Builds from full rows; the rows must already be exactly symmetric.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        if dim == 0 {
            return Err(Error::InvalidParameter("empty matrix".into()));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: row.len(),
                });
            }
            for j in 0..i {
                if row[j] != rows[j][i] {
                    return Err(Error::InvalidParameter(format!(
                        "matrix not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(Self::from_fn(dim, |i, j| rows[i][j]))
    }

    /// Symmetrizes an arbitrary square matrix as (M + Mᵀ)/2.
    pub fn symmetrized(rows: &[Vec<f64>]) -> Self {
        Self::from_fn(rows.len(), |i, j| 0.5 * (rows[i][j] + rows[j][i]))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.dim + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.entries[i * self.dim + j] = v;
        self.entries[j * self.dim + i] = v;
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.entries.iter().all(|v| v.is_finite())
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.entries.chunks(self.dim).map(<[f64]>::to_vec).collect()
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        self.entries.chunks(self.dim).map(|row| dot(row, v)).collect()
    }

    /// `self + s * I`.
    pub fn shifted(&self, s: f64) -> Self {
        let mut m = self.clone();
        for i in 0..self.dim {
            m.entries[i * self.dim + i] += s;
        }
        m
    }

    /// `self * a`.
    pub fn scaled(&self, a: f64) -> Self {
        Self {
            dim: self.dim,
            entries: self.entries.iter().map(|v| v * a).collect(),
        }
    }

    /// `self + a * u vᵀ + a * v uᵀ` (symmetric rank-two update).
    pub fn add_sym_outer(&mut self, a: f64, u: &[f64], v: &[f64]) {
        for i in 0..self.dim {
            for j in i..self.dim {
                let add = a * (u[i] * v[j] + v[i] * u[j]);
                let cur = self.get(i, j);
                self.set(i, j, cur + add);
            }
        }
    }

    /// `self + a * u uᵀ`.
    pub fn add_outer(&mut self, a: f64, u: &[f64]) {
        self.add_sym_outer(0.5 * a, u, u);
    }

    /// `self + other * a`.
    pub fn add_scaled(&mut self, a: f64, other: &SymMatrix) {
        for (x, y) in self.entries.iter_mut().zip(&other.entries) {
            *x += a * y;
        }
    }
}

impl std::ops::Index<(usize, usize)> for SymMatrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.entries[i * self.dim + j]
    }
}

/// Eigenvalues in descending order with matching orthonormal eigenvectors.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub eigenvalues: Vec<f64>,
    /// Row-major `dim × dim`; column `k` is the eigenvector of `eigenvalues[k]`.
    pub eigenvectors: Vec<Vec<f64>>,
}

impl EigenDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Column `k` of the eigenvector matrix.
    pub fn vector(&self, k: usize) -> Vec<f64> {
        self.eigenvectors.iter().map(|row| row[k]).collect()
    }

    /// U·diag(λ)·Uᵀ.
    pub fn reconstruct(&self) -> SymMatrix {
        let n = self.dim();
        SymMatrix::from_fn(n, |i, j| {
            (0..n)
                .map(|k| self.eigenvectors[i][k] * self.eigenvalues[k] * self.eigenvectors[j][k])
                .sum()
        })
    }
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
pub fn jacobi_eigen(m: &SymMatrix) -> Result<EigenDecomposition> {
    if !m.is_finite() {
        return Err(Error::NonFiniteMatrix);
    }
    let n = m.dim();
    let mut a = m.rows();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();

    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut off = 0.0;
        let mut diag = 0.0;
        for (i, row) in a.iter().enumerate() {
            for (j, x) in row.iter().enumerate() {
                if i == j {
                    diag += x * x;
                } else {
                    off += x * x;
                }
            }
        }
        if off.sqrt() <= JACOBI_TOL * (1.0 + diag.sqrt()) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p][q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let vkp = row[p];
                    let vkq = row[q];
                    row[p] = c * vkp - s * vkq;
                    row[q] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    // stable: equal eigenvalues keep their rotation order
    order.sort_by(|&i, &j| a[j][j].total_cmp(&a[i][i]));
    let eigenvalues = order.iter().map(|&k| a[k][k]).collect();
    let eigenvectors = v
        .iter()
        .map(|row| order.iter().map(|&k| row[k]).collect())
        .collect();
    Ok(EigenDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

fn steps(x: &[f64], step: Option<f64>, default: f64) -> Vec<f64> {
    match step {
        Some(h) => vec![h; x.len()],
        None => x.iter().map(|xi| default * (1.0 + xi.abs())).collect(),
    }
}

/// Central-difference gradient. With `step = None` coordinate `i` uses
/// `1e-6·(1+|xᵢ|)`.
pub fn fd_gradient<F>(f: F, x: &[f64], step: Option<f64>) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> f64,
{
    let h = steps(x, step, FD_GRADIENT_STEP);
    let mut probe = x.to_vec();
    let mut g = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        probe[i] = x[i] + h[i];
        let fp = f(&probe);
        probe[i] = x[i] - h[i];
        let fm = f(&probe);
        probe[i] = x[i];
        if !fp.is_finite() || !fm.is_finite() {
            return Err(Error::StencilCrossesWall);
        }
        g.push((fp - fm) / (2.0 * h[i]));
    }
    Ok(g)
}

/// Second-order central-difference Hessian, symmetrized. With `step = None`
/// coordinate `i` uses `1e-4·(1+|xᵢ|)`.
pub fn fd_hessian<F>(f: F, x: &[f64], step: Option<f64>) -> Result<SymMatrix>
where
    F: Fn(&[f64]) -> f64,
{
    let n = x.len();
    let h = steps(x, step, FD_HESSIAN_STEP);
    let mut probe = x.to_vec();
    let eval = |probe: &[f64]| {
        let v = f(probe);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::StencilCrossesWall)
        }
    };
    let f0 = eval(&probe)?;
    let mut m = SymMatrix::zeros(n);
    for i in 0..n {
        probe[i] = x[i] + h[i];
        let fp = eval(&probe)?;
        probe[i] = x[i] - h[i];
        let fm = eval(&probe)?;
        probe[i] = x[i];
        m.set(i, i, (fp - 2.0 * f0 + fm) / (h[i] * h[i]));
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let mut corner = |si: f64, sj: f64| {
                probe[i] = x[i] + si * h[i];
                probe[j] = x[j] + sj * h[j];
                let v = eval(&probe);
                probe[i] = x[i];
                probe[j] = x[j];
                v
            };
            let fpp = corner(1.0, 1.0)?;
            let fpm = corner(1.0, -1.0)?;
            let fmp = corner(-1.0, 1.0)?;
            let fmm = corner(-1.0, -1.0)?;
            m.set(i, j, (fpp - fpm - fmp + fmm) / (4.0 * h[i] * h[j]));
        }
    }
    Ok(m)
}

/// Every point `fd_hessian(f, x, step)` would evaluate besides `x`.
pub fn hessian_stencil(x: &[f64], step: Option<f64>) -> Vec<Vec<f64>> {
    let h = steps(x, step, FD_HESSIAN_STEP);
    let n = x.len();
    let mut pts = Vec::with_capacity(2 * n * n);
    for i in 0..n {
        for s in [1.0, -1.0] {
            let mut p = x.to_vec();
            p[i] += s * h[i];
            pts.push(p);
        }
        for j in (i + 1)..n {
            for (si, sj) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
                let mut p = x.to_vec();
                p[i] += si * h[i];
                p[j] += sj * h[j];
                pts.push(p);
            }
        }
    }
    pts
}

/// Every point `fd_gradient(f, x, step)` would evaluate.
pub fn gradient_stencil(x: &[f64], step: Option<f64>) -> Vec<Vec<f64>> {
    let h = steps(x, step, FD_GRADIENT_STEP);
    let mut pts = Vec::with_capacity(2 * x.len());
    for i in 0..x.len() {
        for s in [1.0, -1.0] {
            let mut p = x.to_vec();
            p[i] += s * h[i];
            pts.push(p);
        }
    }
    pts
}
