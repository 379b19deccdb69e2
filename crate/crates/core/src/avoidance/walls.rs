use serde::{Deserialize, Serialize};

use super::sets::{AvoidanceSet, DistanceJet, Region};
use crate::error::{Error, Result};
use crate::functions::{sanitize, Objective, SharedObjective, WALL};
use crate::numerics::{distance, fd_gradient, fd_hessian, gradient_stencil, hessian_stencil, SymMatrix};

/// How a constant wall reports derivatives.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WallDerivatives {
    /// Use `f`'s derivatives when the whole finite-difference stencil around
    /// `x` is inside the region; otherwise difference the walled function
    /// itself, so the jump to `R` shows up in the gradient and Hessian.
    /// `step: None` uses the default relative steps of
    /// [`fd_gradient`] and [`fd_hessian`].
    Stencil { step: Option<f64> },
    /// `f`'s derivatives inside, zero outside. The wall then acts only
    /// through line-search value tests.
    Interior,
}

impl Default for WallDerivatives {
    fn default() -> Self {
        Self::Stencil { step: None }
    }
}

#[derive(Clone, Debug)]
pub enum Transform {
    Pole {
        set: AvoidanceSet,
        n: u32,
        gamma: f64,
    },
    ProductPole {
        points: Vec<Vec<f64>>,
        exponents: Vec<u32>,
    },
    Constant {
        region: Region,
        r: f64,
        derivatives: WallDerivatives,
    },
    PenaltyH1 {
        set: AvoidanceSet,
        epsilon: f64,
        gamma0: f64,
    },
    PenaltyH2 {
        set: AvoidanceSet,
        epsilon: f64,
        gamma0: f64,
    },
}

/// A base objective reshaped by a wall.
#[derive(Clone)]
pub struct TransformedObjective {
    base: SharedObjective,
    transform: Transform,
}

impl std::fmt::Debug for TransformedObjective {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TransformedObjective")
            .field("base", &self.base.name())
            .field("transform", &self.transform)
            .finish()
    }
}

/// `(f − γ)/d(x,A)^N`.
pub fn pole_wall(f: SharedObjective, set: AvoidanceSet, n: u32, gamma: f64) -> Result<TransformedObjective> {
    if n == 0 {
        return Err(Error::InvalidParameter("pole exponent must be >= 1".into()));
    }
    if !set.has_distance() {
        return Err(Error::NoDistance);
    }
    Ok(TransformedObjective {
        base: f,
        transform: Transform::Pole { set, n, gamma },
    })
}

/// `f / ∏ⱼ d(x,zⱼ)^{Nⱼ}`.
pub fn product_pole_wall(
    f: SharedObjective,
    points: Vec<Vec<f64>>,
    exponents: Vec<u32>,
) -> Result<TransformedObjective> {
    if points.is_empty() || points.len() != exponents.len() {
        return Err(Error::InvalidParameter(
            "product pole needs equally many points and exponents".into(),
        ));
    }
    if exponents.contains(&0) {
        return Err(Error::InvalidParameter("pole exponent must be >= 1".into()));
    }
    Ok(TransformedObjective {
        base: f,
        transform: Transform::ProductPole { points, exponents },
    })
}

/// `f` on `allowed`, the constant `R` elsewhere.
pub fn constant_wall(f: SharedObjective, allowed: Region, r: f64) -> Result<TransformedObjective> {
    constant_wall_with(f, allowed, r, WallDerivatives::default())
}

pub fn constant_wall_with(
    f: SharedObjective,
    allowed: Region,
    r: f64,
    derivatives: WallDerivatives,
) -> Result<TransformedObjective> {
    if !r.is_finite() {
        return Err(Error::InvalidParameter(format!("wall constant {r} must be finite")));
    }
    Ok(TransformedObjective {
        base: f,
        transform: Transform::Constant {
            region: allowed,
            r,
            derivatives,
        },
    })
}

/// `(f − γ₀) − ε·log d(x,A)`.
pub fn penalty_h1(f: SharedObjective, set: AvoidanceSet, epsilon: f64, gamma0: f64) -> Result<TransformedObjective> {
    check_penalty(&set, epsilon)?;
    Ok(TransformedObjective {
        base: f,
        transform: Transform::PenaltyH1 { set, epsilon, gamma0 },
    })
}

/// `log(f − γ₀) − ε·log d(x,A)`; the wall marker wherever `f ≤ γ₀`.
pub fn penalty_h2(f: SharedObjective, set: AvoidanceSet, epsilon: f64, gamma0: f64) -> Result<TransformedObjective> {
    check_penalty(&set, epsilon)?;
    Ok(TransformedObjective {
        base: f,
        transform: Transform::PenaltyH2 { set, epsilon, gamma0 },
    })
}

fn check_penalty(set: &AvoidanceSet, epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidParameter(format!("epsilon {epsilon} must be > 0")));
    }
    if !set.has_distance() {
        return Err(Error::NoDistance);
    }
    Ok(())
}

fn on_set() -> Error {
    Error::Precondition("derivative requested on the avoidance set".into())
}

impl TransformedObjective {
    pub fn base(&self) -> &SharedObjective {
        &self.base
    }

    pub fn transform(&self) -> &Transform {
        &self.transform
    }

    /// The allowed region of a constant wall.
    pub fn region(&self) -> Option<&Region> {
        match &self.transform {
            Transform::Constant { region, .. } => Some(region),
            _ => None,
        }
    }

    /// Product of `d(x,zⱼ)^{Nⱼ}`, multiplied in list order.
    fn product_denominator(points: &[Vec<f64>], exponents: &[u32], x: &[f64]) -> f64 {
        points
            .iter()
            .zip(exponents)
            .fold(1.0, |acc, (z, n)| acc * distance(x, z).powi(*n as i32))
    }

    fn jet(set: &AvoidanceSet, x: &[f64]) -> Result<DistanceJet> {
        let j = set.jet(x)?;
        if j.value == 0.0 {
            return Err(on_set());
        }
        Ok(j)
    }

    /// `∇L` and `∇²L` for `L = Σ Nⱼ log d(x,zⱼ)`.
    fn log_product_jet(points: &[Vec<f64>], exponents: &[u32], x: &[f64]) -> Result<(Vec<f64>, SymMatrix)> {
        let n = x.len();
        let mut gl = vec![0.0; n];
        let mut hl = SymMatrix::zeros(n);
        for (z, &e) in points.iter().zip(exponents) {
            let j = Self::jet(&AvoidanceSet::point(z.clone()), x)?;
            let e = e as f64;
            for i in 0..n {
                gl[i] += e * j.gradient[i] / j.value;
            }
            hl.add_scaled(e / j.value, &j.hessian);
            hl.add_outer(-e / (j.value * j.value), &j.gradient);
        }
        Ok((gl, hl))
    }
}

impl Objective for TransformedObjective {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn name(&self) -> String {
        let b = self.base.name();
        match &self.transform {
            Transform::Pole { n, gamma, .. } => format!("pole({b}, N={n}, gamma={gamma})"),
            Transform::ProductPole { points, .. } => format!("product_pole({b}, {} points)", points.len()),
            Transform::Constant { r, .. } => format!("constant_wall({b}, R={r})"),
            Transform::PenaltyH1 { epsilon, .. } => format!("h1({b}, eps={epsilon})"),
            Transform::PenaltyH2 { epsilon, .. } => format!("h2({b}, eps={epsilon})"),
        }
    }

    fn value(&self, x: &[f64]) -> f64 {
        match &self.transform {
            Transform::Pole { set, n, gamma } => {
                let d = set.distance(x).unwrap_or(0.0);
                if d == 0.0 {
                    return WALL;
                }
                sanitize((self.base.value(x) - gamma) / d.powi(*n as i32))
            }
            Transform::ProductPole { points, exponents } => {
                let p = Self::product_denominator(points, exponents, x);
                if p == 0.0 {
                    return WALL;
                }
                sanitize(self.base.value(x) / p)
            }
            Transform::Constant { region, r, .. } => {
                if region.contains(x) {
                    self.base.value(x)
                } else {
                    *r
                }
            }
            Transform::PenaltyH1 { set, epsilon, gamma0 } => {
                let d = set.distance(x).unwrap_or(0.0);
                if d == 0.0 {
                    return WALL;
                }
                sanitize((self.base.value(x) - gamma0) - epsilon * d.ln())
            }
            Transform::PenaltyH2 { set, epsilon, gamma0 } => {
                let d = set.distance(x).unwrap_or(0.0);
                let u = self.base.value(x) - gamma0;
                if d == 0.0 || !(u > 0.0) {
                    return WALL;
                }
                sanitize(u.ln() - epsilon * d.ln())
            }
        }
    }

    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        let n = x.len();
        match &self.transform {
            Transform::Pole { set, n: e, gamma } => {
                let j = Self::jet(set, x)?;
                let g = self.base.gradient(x)?;
                let u = self.base.value(x) - gamma;
                let e = *e as f64;
                let dn = j.value.powf(e);
                Ok((0..n)
                    .map(|i| g[i] / dn - e * u * j.gradient[i] / (dn * j.value))
                    .collect())
            }
            Transform::ProductPole { points, exponents } => {
                let p = Self::product_denominator(points, exponents, x);
                if p == 0.0 {
                    return Err(on_set());
                }
                let (gl, _) = Self::log_product_jet(points, exponents, x)?;
                let g = self.base.gradient(x)?;
                let f = self.base.value(x);
                Ok((0..n).map(|i| (g[i] - f * gl[i]) / p).collect())
            }
            Transform::Constant {
                region, derivatives, ..
            } => {
                let inside = region.contains(x);
                match derivatives {
                    WallDerivatives::Interior if inside => self.base.gradient(x),
                    WallDerivatives::Interior => Ok(vec![0.0; n]),
                    WallDerivatives::Stencil { step } => {
                        if inside && gradient_stencil(x, *step).iter().all(|p| region.contains(p)) {
                            self.base.gradient(x)
                        } else {
                            fd_gradient(|p| self.value(p), x, *step)
                        }
                    }
                }
            }
            Transform::PenaltyH1 { set, epsilon, .. } => {
                let j = Self::jet(set, x)?;
                let g = self.base.gradient(x)?;
                Ok((0..n).map(|i| g[i] - epsilon * j.gradient[i] / j.value).collect())
            }
            Transform::PenaltyH2 { set, epsilon, gamma0 } => {
                let j = Self::jet(set, x)?;
                let u = self.base.value(x) - gamma0;
                if !(u > 0.0) {
                    return Err(Error::StencilCrossesWall);
                }
                let g = self.base.gradient(x)?;
                Ok((0..n)
                    .map(|i| g[i] / u - epsilon * j.gradient[i] / j.value)
                    .collect())
            }
        }
    }

    fn hessian(&self, x: &[f64]) -> Result<SymMatrix> {
        match &self.transform {
            Transform::Pole { set, n: e, gamma } => {
                let j = Self::jet(set, x)?;
                let g = self.base.gradient(x)?;
                let hf = self.base.hessian(x)?;
                let u = self.base.value(x) - gamma;
                let e = *e as f64;
                let d = j.value;
                let dn = d.powf(e);
                let mut h = hf.scaled(1.0 / dn);
                h.add_sym_outer(-e / (dn * d), &g, &j.gradient);
                h.add_outer(e * (e + 1.0) * u / (dn * d * d), &j.gradient);
                h.add_scaled(-e * u / (dn * d), &j.hessian);
                Ok(h)
            }
            Transform::ProductPole { points, exponents } => {
                let p = Self::product_denominator(points, exponents, x);
                if p == 0.0 {
                    return Err(on_set());
                }
                let (gl, hl) = Self::log_product_jet(points, exponents, x)?;
                let g = self.base.gradient(x)?;
                let f = self.base.value(x);
                let mut h = self.base.hessian(x)?;
                h.add_sym_outer(-1.0, &g, &gl);
                h.add_outer(f, &gl);
                h.add_scaled(-f, &hl);
                Ok(h.scaled(1.0 / p))
            }
            Transform::Constant {
                region, derivatives, ..
            } => {
                let inside = region.contains(x);
                match derivatives {
                    WallDerivatives::Interior if inside => self.base.hessian(x),
                    WallDerivatives::Interior => Ok(SymMatrix::zeros(x.len())),
                    WallDerivatives::Stencil { step } => {
                        if inside && hessian_stencil(x, *step).iter().all(|p| region.contains(p)) {
                            self.base.hessian(x)
                        } else {
                            fd_hessian(|p| self.value(p), x, *step)
                        }
                    }
                }
            }
            Transform::PenaltyH1 { set, epsilon, .. } => {
                let j = Self::jet(set, x)?;
                let mut h = self.base.hessian(x)?;
                h.add_scaled(-epsilon / j.value, &j.hessian);
                h.add_outer(epsilon / (j.value * j.value), &j.gradient);
                Ok(h)
            }
            Transform::PenaltyH2 { set, epsilon, gamma0 } => {
                let j = Self::jet(set, x)?;
                let u = self.base.value(x) - gamma0;
                if !(u > 0.0) {
                    return Err(Error::StencilCrossesWall);
                }
                let g = self.base.gradient(x)?;
                let mut h = self.base.hessian(x)?.scaled(1.0 / u);
                h.add_outer(-1.0 / (u * u), &g);
                h.add_scaled(-epsilon / j.value, &j.hessian);
                h.add_outer(epsilon / (j.value * j.value), &j.gradient);
                Ok(h)
            }
        }
    }

    fn has_analytic_derivatives(&self) -> bool {
        self.base.has_analytic_derivatives()
    }

    fn at_wall(&self, x: &[f64]) -> bool {
        let v = self.value(x);
        match &self.transform {
            Transform::Constant { r, .. } => !(v < *r),
            _ => !v.is_finite() || self.base.at_wall(x),
        }
    }
}
