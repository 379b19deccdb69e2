use std::sync::Arc;

use num_complex::Complex64;

use super::{sanitize, Objective, WALL};
use crate::error::{Error, Result};
use crate::numerics::{fd_gradient, fd_hessian, SymMatrix};

pub type ComplexScalar = Complex64;

/// A complex function of one complex variable, optionally with its first two
/// derivatives. Non-finite values mark poles.
pub trait Holomorphic: Send + Sync {
    fn name(&self) -> String;

    fn eval(&self, z: Complex64) -> Complex64;

    /// `(F(z), F'(z), F''(z))` when closed forms are registered.
    fn derivatives(&self, _z: Complex64) -> Option<(Complex64, Complex64, Complex64)> {
        None
    }
}

/// A holomorphic function given by closures.
pub struct HolomorphicFn<F> {
    name: String,
    f: F,
}

impl<F> HolomorphicFn<F>
where
    F: Fn(Complex64) -> Complex64 + Send + Sync,
{
    pub fn new(name: impl Into<String>, f: F) -> Self {
        Self {
            name: name.into(),
            f,
        }
    }
}

impl<F> Holomorphic for HolomorphicFn<F>
where
    F: Fn(Complex64) -> Complex64 + Send + Sync,
{
    fn name(&self) -> String {
        self.name.clone()
    }

    fn eval(&self, z: Complex64) -> Complex64 {
        (self.f)(z)
    }
}

/// Complex polynomial, coefficients from the highest degree down.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    pub coeffs: Vec<Complex64>,
}

impl Polynomial {
    pub fn new(coeffs: Vec<Complex64>) -> Result<Self> {
        let first = coeffs.iter().position(|c| *c != Complex64::new(0.0, 0.0));
        match first {
            Some(i) => Ok(Self {
                coeffs: coeffs[i..].to_vec(),
            }),
            None => Err(Error::InvalidParameter("zero polynomial".into())),
        }
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Horner evaluation.
    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
    }

    /// `(p, p', p'')` by a single Horner pass.
    pub fn eval_with_derivatives(&self, z: Complex64) -> (Complex64, Complex64, Complex64) {
        let zero = Complex64::new(0.0, 0.0);
        let (mut p, mut d1, mut d2) = (zero, zero, zero);
        for &c in &self.coeffs {
            d2 = d2 * z + d1;
            d1 = d1 * z + p;
            p = p * z + c;
        }
        (p, d1, 2.0 * d2)
    }
}

impl Holomorphic for Polynomial {
    fn name(&self) -> String {
        format!("poly{}", self.degree())
    }

    fn eval(&self, z: Complex64) -> Complex64 {
        Polynomial::eval(self, z)
    }

    fn derivatives(&self, z: Complex64) -> Option<(Complex64, Complex64, Complex64)> {
        Some(self.eval_with_derivatives(z))
    }
}

/// `z⁵ − 3i·z³ − (5+2i)·z² + 3z + 1`.
pub fn example2_polynomial() -> Polynomial {
    let c = Complex64::new;
    Polynomial {
        coeffs: vec![
            c(1.0, 0.0),
            c(0.0, 0.0),
            c(0.0, -3.0),
            c(-5.0, -2.0),
            c(3.0, 0.0),
            c(1.0, 0.0),
        ],
    }
}

pub fn poly_example2(z: Complex64) -> Complex64 {
    example2_polynomial().eval(z)
}

/// All roots of `p` by simultaneous Weierstrass (Durand–Kerner) iteration,
/// each then polished by a few Newton steps.
pub fn durand_kerner(p: &Polynomial) -> Vec<Complex64> {
    let n = p.degree();
    if n == 0 {
        return Vec::new();
    }
    let lead = p.coeffs[0];
    let monic: Vec<Complex64> = p.coeffs.iter().map(|c| c / lead).collect();
    let monic = Polynomial { coeffs: monic };
    let seed = Complex64::new(0.4, 0.9);
    let mut roots: Vec<Complex64> = (0..n).map(|k| seed.powu(k as u32)).collect();
    for _ in 0..2000 {
        let mut change: f64 = 0.0;
        for i in 0..n {
            let denom = (0..n)
                .filter(|&j| j != i)
                .fold(Complex64::new(1.0, 0.0), |acc, j| acc * (roots[i] - roots[j]));
            let delta = monic.eval(roots[i]) / denom;
            if delta.is_finite() {
                roots[i] -= delta;
                change = change.max(delta.norm());
            }
        }
        if change <= 1e-15 {
            break;
        }
    }
    for r in roots.iter_mut() {
        for _ in 0..3 {
            let (v, d, _) = p.eval_with_derivatives(*r);
            let step = v / d;
            if step.is_finite() {
                *r -= step;
            }
        }
    }
    roots
}

const BESSEL_BUDGET: f64 = 16.0;
const BESSEL_MAX_TERMS: usize = 60;

/// Bessel function of the first kind of order one, by its power series.
pub fn bessel_j1(z: Complex64) -> Result<Complex64> {
    bessel_j1_derivatives(z).map(|(j, _, _)| j)
}

/// `(J₁(z), J₁'(z), J₁''(z))` from the term-wise differentiated series.
///
/// With `w = z/2` and `cₖ = (−1)ᵏ/(k!(k+1)!)`:
/// `J₁ = Σ cₖ w^{2k+1}`, `J₁' = Σ cₖ (2k+1)/2 · w^{2k}`,
/// `J₁'' = Σ cₖ (2k+1)k/2 · w^{2k−1}`.
pub fn bessel_j1_derivatives(z: Complex64) -> Result<(Complex64, Complex64, Complex64)> {
    if !(z.norm() <= BESSEL_BUDGET) {
        return Err(Error::OutsideSeriesBudget(z.norm()));
    }
    let w = z / 2.0;
    let w2 = w * w;
    let zero = Complex64::new(0.0, 0.0);
    let (mut j, mut d1, mut d2) = (zero, zero, zero);
    let mut c = 1.0;
    // w^{2k}
    let mut pow = Complex64::new(1.0, 0.0);
    // w^{2k−2}, valid from k = 1
    let mut prev_pow = zero;
    for k in 0..=BESSEL_MAX_TERMS {
        let kf = k as f64;
        let t = c * pow * w;
        j += t;
        d1 += c * (2.0 * kf + 1.0) / 2.0 * pow;
        if k >= 1 {
            d2 += c * (2.0 * kf + 1.0) * kf / 2.0 * prev_pow * w;
        }
        // next coefficient and power
        let next_c = -c / ((kf + 1.0) * (kf + 2.0));
        prev_pow = pow;
        pow *= w2;
        let next = (next_c * pow * w).norm();
        let next_d = (next_c * pow).norm() * (2.0 * kf + 3.0);
        c = next_c;
        if next <= 1e-16 * (1.0 + j.norm()) && next_d <= 1e-16 * (1.0 + d1.norm() + d2.norm()) {
            break;
        }
    }
    Ok((j, d1, d2))
}

/// `J₁` as a [`Holomorphic`] function; outside the series budget it
/// evaluates to a non-finite value.
#[derive(Debug, Clone, Copy)]
pub struct BesselJ1;

impl Holomorphic for BesselJ1 {
    fn name(&self) -> String {
        "bessel_j1".into()
    }

    fn eval(&self, z: Complex64) -> Complex64 {
        bessel_j1(z).unwrap_or(Complex64::new(WALL, WALL))
    }

    fn derivatives(&self, z: Complex64) -> Option<(Complex64, Complex64, Complex64)> {
        bessel_j1_derivatives(z).ok()
    }
}

/// `f(x, y) = |F(x+iy)|²/2`.
///
/// With closed-form `F'` and `F''` the derivatives follow from the
/// Cauchy–Riemann equations:
/// `∇f = (Re(F̄F'), −Im(F̄F'))`,
/// `f_xx = |F'|² + Re(F̄F'')`, `f_yy = |F'|² − Re(F̄F'')`, `f_xy = −Im(F̄F'')`.
#[derive(Clone)]
pub struct ModulusObjective {
    name: String,
    inner: Arc<dyn Holomorphic>,
}

impl ModulusObjective {
    pub fn new(inner: Arc<dyn Holomorphic>) -> Self {
        let name = format!("modulus_{}", inner.name());
        Self { name, inner }
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn function(&self) -> &dyn Holomorphic {
        self.inner.as_ref()
    }
}

fn to_complex(x: &[f64]) -> Complex64 {
    Complex64::new(x[0], x[1])
}

impl Objective for ModulusObjective {
    fn dim(&self) -> usize {
        2
    }

    fn name(&self) -> String {
        self.name.clone()
    }

    fn value(&self, x: &[f64]) -> f64 {
        let v = self.inner.eval(to_complex(x));
        if !v.is_finite() {
            return WALL;
        }
        sanitize(0.5 * v.norm_sqr())
    }

    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        match self.inner.derivatives(to_complex(x)) {
            Some((f, d1, _)) => {
                let p = f.conj() * d1;
                Ok(vec![p.re, -p.im])
            }
            None => fd_gradient(|q| self.value(q), x, None),
        }
    }

    fn hessian(&self, x: &[f64]) -> Result<SymMatrix> {
        match self.inner.derivatives(to_complex(x)) {
            Some((f, d1, d2)) => {
                let a = d1.norm_sqr();
                let q = f.conj() * d2;
                let mut h = SymMatrix::zeros(2);
                h.set(0, 0, a + q.re);
                h.set(1, 1, a - q.re);
                h.set(0, 1, -q.im);
                Ok(h)
            }
            None => fd_hessian(|q| self.value(q), x, None),
        }
    }

    fn has_analytic_derivatives(&self) -> bool {
        self.inner.derivatives(Complex64::new(0.1, 0.1)).is_some()
    }
}
