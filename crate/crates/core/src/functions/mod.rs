//! Objectives: the [`Objective`] trait, closure-backed objectives, the
//! `|F|²/2` construction for holomorphic `F`, and the built-in test problems.

mod complex;

use std::sync::Arc;

pub use complex::{
    bessel_j1, bessel_j1_derivatives, durand_kerner, example2_polynomial, poly_example2,
    BesselJ1, ComplexScalar, Holomorphic, HolomorphicFn, ModulusObjective, Polynomial,
};

use crate::error::{Error, Result};
use crate::numerics::{fd_gradient, fd_hessian, SymMatrix};

/// Value returned wherever an objective is infinite (on a pole, outside a
/// log's domain, at a pole of a meromorphic function). It compares greater
/// than every finite value, so it always fails a descent test.
pub const WALL: f64 = f64::INFINITY;

/// Maps NaN to [`WALL`] so that objective values never carry NaN.
#[inline]
pub fn sanitize(v: f64) -> f64 {
    if v.is_nan() {
        WALL
    } else {
        v
    }
}

/// A scalar cost function of a real vector.
///
/// `gradient` and `hessian` fall back to central differences of `value`;
/// implementors with closed forms override them and report it through
/// [`Objective::has_analytic_derivatives`].
pub trait Objective: Send + Sync {
    fn dim(&self) -> usize;

    fn name(&self) -> String;

    fn value(&self, x: &[f64]) -> f64;

    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        fd_gradient(|p| self.value(p), x, None)
    }

    fn hessian(&self, x: &[f64]) -> Result<SymMatrix> {
        fd_hessian(|p| self.value(p), x, None)
    }

    fn has_analytic_derivatives(&self) -> bool {
        false
    }

    /// True when `x` is an invalid starting point: on a pole set, or behind
    /// a constant wall.
    fn at_wall(&self, _x: &[f64]) -> bool {
        false
    }
}

pub type SharedObjective = Arc<dyn Objective>;

impl<T: Objective + ?Sized> Objective for Arc<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn name(&self) -> String {
        (**self).name()
    }
    fn value(&self, x: &[f64]) -> f64 {
        (**self).value(x)
    }
    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        (**self).gradient(x)
    }
    fn hessian(&self, x: &[f64]) -> Result<SymMatrix> {
        (**self).hessian(x)
    }
    fn has_analytic_derivatives(&self) -> bool {
        (**self).has_analytic_derivatives()
    }
    fn at_wall(&self, x: &[f64]) -> bool {
        (**self).at_wall(x)
    }
}

type ValueFn = dyn Fn(&[f64]) -> f64 + Send + Sync;
type GradientFn = dyn Fn(&[f64]) -> Vec<f64> + Send + Sync;
type HessianFn = dyn Fn(&[f64]) -> SymMatrix + Send + Sync;

/// An objective assembled from closures.
#[derive(Clone)]
pub struct FnObjective {
    name: String,
    dim: usize,
    value: Arc<ValueFn>,
    gradient: Option<Arc<GradientFn>>,
    hessian: Option<Arc<HessianFn>>,
}

impl FnObjective {
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        value: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            dim,
            value: Arc::new(value),
            gradient: None,
            hessian: None,
        }
    }

    pub fn with_gradient(
        mut self,
        gradient: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        self.gradient = Some(Arc::new(gradient));
        self
    }

    pub fn with_hessian(
        mut self,
        hessian: impl Fn(&[f64]) -> SymMatrix + Send + Sync + 'static,
    ) -> Self {
        self.hessian = Some(Arc::new(hessian));
        self
    }
}

impl std::fmt::Debug for FnObjective {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FnObjective")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("gradient", &self.gradient.is_some())
            .field("hessian", &self.hessian.is_some())
            .finish()
    }
}

impl Objective for FnObjective {
    fn dim(&self) -> usize {
        self.dim
    }

    fn name(&self) -> String {
        self.name.clone()
    }

    fn value(&self, x: &[f64]) -> f64 {
        sanitize((self.value)(x))
    }

    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        match &self.gradient {
            Some(g) => Ok(g(x)),
            None => fd_gradient(|p| self.value(p), x, None),
        }
    }

    fn hessian(&self, x: &[f64]) -> Result<SymMatrix> {
        match &self.hessian {
            Some(h) => Ok(h(x)),
            None => fd_hessian(|p| self.value(p), x, None),
        }
    }

    fn has_analytic_derivatives(&self) -> bool {
        self.gradient.is_some()
    }
}

/// `|F(x+iy)|²/2` as a two-dimensional objective.
pub fn modulus_objective<F: Holomorphic + 'static>(f: F) -> ModulusObjective {
    ModulusObjective::new(Arc::new(f))
}

/// Names accepted by [`builtin`].
pub const BUILTIN_NAMES: [&str; 7] = [
    "example1",
    "example2_modulus",
    "example3",
    "example4",
    "example6",
    "example7",
    "example8_modulus",
];

/// Looks up one of the built-in test objectives.
pub fn builtin(name: &str) -> Result<SharedObjective> {
    let obj: SharedObjective = match name {
        "example1" => Arc::new(example1()),
        "example2_modulus" => {
            Arc::new(modulus_objective(example2_polynomial()).named("example2_modulus"))
        }
        "example3" => Arc::new(example3()),
        "example4" => Arc::new(example4()),
        "example6" => Arc::new(example6()),
        "example7" => Arc::new(example7()),
        "example8_modulus" => Arc::new(modulus_objective(BesselJ1).named("example8_modulus")),
        _ => return Err(Error::UnknownBuiltin(name.to_string())),
    };
    Ok(obj)
}

/// `−x·y·e^{−x²−y²} + y²/2`: a saddle at the origin and two global minima.
pub fn example1() -> FnObjective {
    FnObjective::new("example1", 2, |p| {
        let (x, y) = (p[0], p[1]);
        -x * y * (-x * x - y * y).exp() + 0.5 * y * y
    })
    .with_gradient(|p| {
        let (x, y) = (p[0], p[1]);
        let e = (-x * x - y * y).exp();
        vec![
            -y * e * (1.0 - 2.0 * x * x),
            -x * e * (1.0 - 2.0 * y * y) + y,
        ]
    })
    .with_hessian(|p| {
        let (x, y) = (p[0], p[1]);
        let e = (-x * x - y * y).exp();
        let mut h = SymMatrix::zeros(2);
        h.set(0, 0, 2.0 * x * y * e * (3.0 - 2.0 * x * x));
        h.set(1, 1, 2.0 * x * y * e * (3.0 - 2.0 * y * y) + 1.0);
        h.set(0, 1, -(1.0 - 2.0 * x * x) * e * (1.0 - 2.0 * y * y));
        h
    })
}

/// Squared product over two curves and three points; its zero set has five
/// components. Derivatives by the product rule over the five factors.
pub fn example3() -> FnObjective {
    FnObjective::new("example3", 2, |p| example3_factors(p).iter().map(|f| f.0).product())
        .with_gradient(|p| {
            let fs = example3_factors(p);
            let mut g = vec![0.0; 2];
            for (i, fi) in fs.iter().enumerate() {
                let rest: f64 = fs.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, f)| f.0).product();
                g[0] += fi.1[0] * rest;
                g[1] += fi.1[1] * rest;
            }
            g
        })
        .with_hessian(|p| {
            let fs = example3_factors(p);
            let mut h = SymMatrix::zeros(2);
            for (i, fi) in fs.iter().enumerate() {
                let rest: f64 = fs.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, f)| f.0).product();
                h.add_scaled(rest, &fi.2);
                for (k, fk) in fs.iter().enumerate().filter(|(k, _)| *k != i) {
                    let rest: f64 = fs
                        .iter()
                        .enumerate()
                        .filter(|(j, _)| *j != i && *j != k)
                        .map(|(_, f)| f.0)
                        .product();
                    h.add_sym_outer(0.5 * rest, &fi.1, &fk.1);
                }
            }
            h
        })
}

/// Each factor of [`example3`] with its gradient and Hessian.
fn example3_factors(p: &[f64]) -> [(f64, [f64; 2], SymMatrix); 5] {
    let (x, y) = (p[0], p[1]);
    let c1 = y - x * x - 2.0;
    let c2 = y + x.powi(4) + 2.0;
    let square = |c: f64, dc: [f64; 2], hc: [f64; 3]| {
        let mut h = SymMatrix::zeros(2);
        h.set(0, 0, 2.0 * (dc[0] * dc[0] + c * hc[0]));
        h.set(1, 1, 2.0 * (dc[1] * dc[1] + c * hc[2]));
        h.set(0, 1, 2.0 * (dc[0] * dc[1] + c * hc[1]));
        (c * c, [2.0 * c * dc[0], 2.0 * c * dc[1]], h)
    };
    let dist2 = |a: f64, b: f64| {
        let v = (x - a).powi(2) + (y - b).powi(2);
        (v, [2.0 * (x - a), 2.0 * (y - b)], SymMatrix::from_diagonal(&[2.0, 2.0]))
    };
    [
        square(c1, [-2.0 * x, 1.0], [-2.0, 0.0, 0.0]),
        square(c2, [4.0 * x.powi(3), 1.0], [12.0 * x * x, 0.0, 0.0]),
        dist2(0.0, 1.0),
        dist2(1.0, -1.0),
        dist2(-1.0, 4.0),
    ]
}

/// `(y² − x³ + x)²`, vanishing on the two real components of `y² = x³ − x`.
pub fn example4() -> FnObjective {
    fn curve(x: f64, y: f64) -> f64 {
        y * y - x * x * x + x
    }
    FnObjective::new("example4", 2, |p| curve(p[0], p[1]).powi(2))
        .with_gradient(|p| {
            let (x, y) = (p[0], p[1]);
            let h = curve(x, y);
            vec![2.0 * h * (1.0 - 3.0 * x * x), 4.0 * h * y]
        })
        .with_hessian(|p| {
            let (x, y) = (p[0], p[1]);
            let h = curve(x, y);
            let hx = 1.0 - 3.0 * x * x;
            let hy = 2.0 * y;
            let mut m = SymMatrix::zeros(2);
            m.set(0, 0, 2.0 * (hx * hx + h * (-6.0 * x)));
            m.set(1, 1, 2.0 * (hy * hy + h * 2.0));
            m.set(0, 1, 2.0 * hx * hy);
            m
        })
}

/// The linear cost `−40x − 30y`.
pub fn example6() -> FnObjective {
    FnObjective::new("example6", 2, |p| -40.0 * p[0] - 30.0 * p[1])
        .with_gradient(|_| vec![-40.0, -30.0])
        .with_hessian(|_| SymMatrix::zeros(2))
}

/// The indefinite quadratic `−2(x−0.25)² + 2(y−0.5)²`.
pub fn example7() -> FnObjective {
    FnObjective::new("example7", 2, |p| {
        -2.0 * (p[0] - 0.25).powi(2) + 2.0 * (p[1] - 0.5).powi(2)
    })
    .with_gradient(|p| vec![-4.0 * (p[0] - 0.25), 4.0 * (p[1] - 0.5)])
    .with_hessian(|_| SymMatrix::from_diagonal(&[-4.0, 4.0]))
}
