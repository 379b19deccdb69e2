//! Iterative minimizers. Every run records a full [`Trace`].
//!
//! The backtracking methods evaluate the objective they are given, walls
//! included, so a wall repels through the Armijo value test: a trial point
//! whose value is the wall marker or `R` never passes.

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::avoidance::Region;
use crate::error::{Error, Result};
use crate::functions::Objective;
use crate::numerics::{dot, jacobi_eigen, norm, SymMatrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Gradient descent with a fixed learning rate.
    Gd,
    /// Gradient descent with Armijo backtracking.
    Bgd,
    /// Backtracking New Q-Newton.
    Bnqn,
    /// Projected gradient descent.
    Pgd,
    /// The Backtracking New Q-Newton direction with a line search that also
    /// halves on constraint violation.
    ArmijoConstrained,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Gd,
        Method::Bgd,
        Method::Bnqn,
        Method::Pgd,
        Method::ArmijoConstrained,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Gd => "gd",
            Method::Bgd => "bgd",
            Method::Bnqn => "bnqn",
            Method::Pgd => "pgd",
            Method::ArmijoConstrained => "armijo-constrained",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown method `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub method: Method,
    pub learning_rate: f64,
    pub armijo_c: f64,
    pub armijo_beta: f64,
    pub initial_step: f64,
    /// Hessian shifts tried in order; `None` means `0, 1, …, dim`.
    pub delta_sequence: Option<Vec<f64>>,
    /// The shift is `δ·‖∇f‖^{1+alpha_exponent}`.
    pub alpha_exponent: f64,
    /// Upper bound on the direction length; `None` disables the cap.
    pub step_cap: Option<f64>,
    pub grad_tol: f64,
    pub max_iters: usize,
    pub max_halvings: u32,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            method: Method::Bnqn,
            learning_rate: 0.1,
            armijo_c: 1e-4,
            armijo_beta: 0.5,
            initial_step: 1.0,
            delta_sequence: None,
            alpha_exponent: 1.0,
            step_cap: Some(1.0),
            grad_tol: 1e-6,
            max_iters: 10_000,
            max_halvings: 60,
            seed: 0,
        }
    }
}

impl OptimizerConfig {
    pub fn with_method(method: Method) -> Self {
        Self {
            method,
            ..Self::default()
        }
    }

    pub fn deltas(&self, dim: usize) -> Vec<f64> {
        match &self.delta_sequence {
            Some(d) => d.clone(),
            None => (0..=dim).map(|j| j as f64).collect(),
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        if !(self.learning_rate > 0.0) {
            return bad("learning_rate must be > 0");
        }
        if !(self.armijo_c > 0.0 && self.armijo_c < 1.0) {
            return bad("armijo_c must lie in (0,1)");
        }
        if !(self.armijo_beta > 0.0 && self.armijo_beta < 1.0) {
            return bad("armijo_beta must lie in (0,1)");
        }
        if !(self.initial_step > 0.0) {
            return bad("initial_step must be > 0");
        }
        if !(self.alpha_exponent > 0.0) {
            return bad("alpha_exponent must be > 0");
        }
        if matches!(self.step_cap, Some(r) if !(r > 0.0)) {
            return bad("step_cap must be > 0");
        }
        if !(self.grad_tol > 0.0) {
            return bad("grad_tol must be > 0");
        }
        let mut d = self.deltas(dim);
        d.sort_by(f64::total_cmp);
        d.dedup();
        if d.len() < dim + 1 {
            return bad("delta_sequence needs at least dim+1 distinct entries");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    GradTol,
    MaxIters,
    StationaryStart,
    WallStart,
    LineSearchFailure,
    NonFinite,
}

impl Termination {
    /// The run stopped at a point where the gradient test passed.
    pub fn converged(self) -> bool {
        matches!(self, Termination::GradTol | Termination::StationaryStart)
    }
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Every iterate of a run. The four vectors have equal length;
/// `step_sizes[k]` is the step parameter that produced iterate `k` (zero
/// for the start).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub iterates: Vec<Vec<f64>>,
    pub values: Vec<f64>,
    pub grad_norms: Vec<f64>,
    pub step_sizes: Vec<f64>,
    pub termination: Termination,
}

impl Trace {
    fn start(x0: &[f64], value: f64) -> Self {
        Self {
            iterates: vec![x0.to_vec()],
            values: vec![value],
            grad_norms: vec![],
            step_sizes: vec![0.0],
            termination: Termination::MaxIters,
        }
    }

    fn push(&mut self, x: Vec<f64>, value: f64, step: f64) {
        self.iterates.push(x);
        self.values.push(value);
        self.step_sizes.push(step);
    }

    /// Ends the run with a gradient norm for the last iterate, if one is known.
    fn finish(mut self, termination: Termination) -> Self {
        if self.grad_norms.len() < self.iterates.len() {
            self.grad_norms.push(f64::NAN);
        }
        self.termination = termination;
        self
    }

    pub fn endpoint(&self) -> &[f64] {
        self.iterates.last().expect("trace holds the start point")
    }

    pub fn final_value(&self) -> f64 {
        *self.values.last().expect("trace holds the start value")
    }

    pub fn final_grad_norm(&self) -> f64 {
        *self.grad_norms.last().unwrap_or(&f64::NAN)
    }

    pub fn iterations(&self) -> usize {
        self.iterates.len() - 1
    }

    /// CSV with header `index,x0,..,value,grad_norm,step_size`, one row per
    /// iterate and a closing `termination,<reason>` line.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let dim = self.iterates[0].len();
        let coords: Vec<String> = (0..dim).map(|i| format!("x{i}")).collect();
        writeln!(w, "index,{},value,grad_norm,step_size", coords.join(","))?;
        for (k, x) in self.iterates.iter().enumerate() {
            let xs: Vec<String> = x.iter().map(|v| v.to_string()).collect();
            writeln!(
                w,
                "{k},{},{},{},{}",
                xs.join(","),
                self.values[k],
                self.grad_norms[k],
                self.step_sizes[k]
            )?;
        }
        writeln!(w, "termination,{}", self.termination)
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("CSV is ASCII")
    }
}

fn check_start(obj: &dyn Objective, x0: &[f64], cfg: &OptimizerConfig) -> Result<Option<Trace>> {
    if x0.len() != obj.dim() {
        return Err(Error::DimensionMismatch {
            expected: obj.dim(),
            got: x0.len(),
        });
    }
    cfg.validate(obj.dim())?;
    let v = obj.value(x0);
    if obj.at_wall(x0) || !v.is_finite() {
        return Ok(Some(Trace::start(x0, v).finish(Termination::WallStart)));
    }
    Ok(None)
}

/// The Backtracking New Q-Newton search direction `ŵ` at a point with
/// gradient `g` and Hessian `h`; the step is `x − κŵ`.
///
/// The first shift `δ` in the sequence that keeps every eigenvalue of
/// `h + δ‖g‖^{1+α}I` away from zero is used, and each eigencomponent of the
/// Newton step is divided by the absolute eigenvalue, so negative-curvature
/// directions are reflected into descent directions.
pub fn bnqn_direction(g: &[f64], h: &SymMatrix, cfg: &OptimizerConfig) -> Result<Vec<f64>> {
    let n = g.len();
    let eig = jacobi_eigen(h)?;
    let h_norm = eig.eigenvalues.iter().fold(0.0f64, |m, l| m.max(l.abs()));
    let threshold = 1e-12 * (1.0 + h_norm);
    let shift = norm(g).powf(1.0 + cfg.alpha_exponent);
    let vectors: Vec<Vec<f64>> = (0..n).map(|k| eig.vector(k)).collect();
    for delta in cfg.deltas(n) {
        let mu: Vec<f64> = eig.eigenvalues.iter().map(|l| l + delta * shift).collect();
        if mu.iter().any(|m| !(m.abs() > threshold)) {
            continue;
        }
        let mut w = vec![0.0; n];
        for (u, m) in vectors.iter().zip(&mu) {
            let c = dot(g, u) / m.abs();
            for i in 0..n {
                w[i] += c * u[i];
            }
        }
        if let Some(r) = cfg.step_cap {
            let len = norm(&w);
            if len > r {
                let s = r / len;
                w.iter_mut().for_each(|wi| *wi *= s);
            }
        }
        return Ok(w);
    }
    Err(Error::SingularShift)
}

fn gradient_norm(obj: &dyn Objective, x: &[f64]) -> Option<(Vec<f64>, f64)> {
    let g = obj.gradient(x).ok()?;
    let n = norm(&g);
    n.is_finite().then_some((g, n))
}

/// `x − κ·d`.
fn step(x: &[f64], d: &[f64], kappa: f64) -> Vec<f64> {
    x.iter().zip(d).map(|(a, b)| a - kappa * b).collect()
}

/// Halves `κ` until `accept(trial, value)` holds; `None` after the budget.
fn backtrack(
    obj: &dyn Objective,
    x: &[f64],
    d: &[f64],
    cfg: &OptimizerConfig,
    accept: impl Fn(&[f64], f64, f64) -> bool,
) -> Option<(Vec<f64>, f64, f64)> {
    let mut kappa = cfg.initial_step;
    for _ in 0..=cfg.max_halvings {
        let trial = step(x, d, kappa);
        let v = obj.value(&trial);
        if accept(&trial, v, kappa) {
            return Some((trial, v, kappa));
        }
        kappa *= cfg.armijo_beta;
    }
    None
}

/// Plain gradient descent `xₙ₊₁ = xₙ − lr·∇f(xₙ)`.
pub fn gradient_descent(obj: &dyn Objective, x0: &[f64], cfg: &OptimizerConfig) -> Result<Trace> {
    first_order(obj, x0, cfg, None)
}

/// Projected gradient descent `xₙ₊₁ = P(xₙ − lr·∇f(xₙ))`. The stopping test
/// uses the gradient mapping `‖x − P(x − lr·∇f)‖/lr`, which is `‖∇f‖` in the
/// interior.
pub fn projected_gd(
    obj: &dyn Objective,
    x0: &[f64],
    projector: &dyn Fn(&[f64]) -> Vec<f64>,
    cfg: &OptimizerConfig,
) -> Result<Trace> {
    first_order(obj, x0, cfg, Some(projector))
}

fn first_order(
    obj: &dyn Objective,
    x0: &[f64],
    cfg: &OptimizerConfig,
    projector: Option<&dyn Fn(&[f64]) -> Vec<f64>>,
) -> Result<Trace> {
    if let Some(t) = check_start(obj, x0, cfg)? {
        return Ok(t);
    }
    let lr = cfg.learning_rate;
    let mut trace = Trace::start(x0, obj.value(x0));
    let mut x = x0.to_vec();
    for k in 0.. {
        let Some((g, gn)) = gradient_norm(obj, &x) else {
            return Ok(trace.finish(Termination::NonFinite));
        };
        let next = match projector {
            Some(p) => p(&step(&x, &g, lr)),
            None => step(&x, &g, lr),
        };
        let measure = match projector {
            Some(_) => crate::numerics::distance(&x, &next) / lr,
            None => gn,
        };
        trace.grad_norms.push(measure);
        if measure <= cfg.grad_tol {
            return Ok(trace.finish(Termination::GradTol));
        }
        if k == cfg.max_iters {
            return Ok(trace.finish(Termination::MaxIters));
        }
        let v = obj.value(&next);
        if !v.is_finite() || next.iter().any(|c| !c.is_finite()) {
            return Ok(trace.finish(Termination::NonFinite));
        }
        trace.push(next.clone(), v, lr);
        x = next;
    }
    unreachable!()
}

/// Gradient descent with Armijo backtracking from `κ₀`.
pub fn backtracking_gd(obj: &dyn Objective, x0: &[f64], cfg: &OptimizerConfig) -> Result<Trace> {
    if let Some(t) = check_start(obj, x0, cfg)? {
        return Ok(t);
    }
    let mut trace = Trace::start(x0, obj.value(x0));
    let mut x = x0.to_vec();
    let mut fx = trace.values[0];
    for k in 0.. {
        let Some((g, gn)) = gradient_norm(obj, &x) else {
            return Ok(trace.finish(Termination::NonFinite));
        };
        trace.grad_norms.push(gn);
        if gn <= cfg.grad_tol {
            return Ok(trace.finish(Termination::GradTol));
        }
        if k == cfg.max_iters {
            return Ok(trace.finish(Termination::MaxIters));
        }
        let slope = gn * gn;
        let Some((next, v, kappa)) =
            backtrack(obj, &x, &g, cfg, |_, v, kappa| v <= fx - cfg.armijo_c * kappa * slope)
        else {
            return Ok(trace.finish(Termination::LineSearchFailure));
        };
        trace.push(next.clone(), v, kappa);
        x = next;
        fx = v;
    }
    unreachable!()
}

/// Backtracking New Q-Newton's method.
pub fn bnqn(obj: &dyn Objective, x0: &[f64], cfg: &OptimizerConfig) -> Result<Trace> {
    newton(obj, x0, cfg, None)
}

/// The BNQN direction with a line search that halves `κ` while either the
/// Armijo test or `constraint` fails. `obj` should be the unwalled function.
pub fn armijo_with_constraints(
    obj: &dyn Objective,
    x0: &[f64],
    constraint: &dyn Fn(&[f64]) -> bool,
    cfg: &OptimizerConfig,
) -> Result<Trace> {
    if !constraint(x0) {
        return Err(Error::Precondition("start violates the constraint".into()));
    }
    newton(obj, x0, cfg, Some(constraint))
}

fn newton(
    obj: &dyn Objective,
    x0: &[f64],
    cfg: &OptimizerConfig,
    constraint: Option<&dyn Fn(&[f64]) -> bool>,
) -> Result<Trace> {
    if let Some(t) = check_start(obj, x0, cfg)? {
        return Ok(t);
    }
    let mut trace = Trace::start(x0, obj.value(x0));
    let mut x = x0.to_vec();
    let mut fx = trace.values[0];
    for k in 0.. {
        let Some((g, gn)) = gradient_norm(obj, &x) else {
            return Ok(trace.finish(Termination::NonFinite));
        };
        trace.grad_norms.push(gn);
        if gn <= cfg.grad_tol {
            let t = if k == 0 {
                Termination::StationaryStart
            } else {
                Termination::GradTol
            };
            return Ok(trace.finish(t));
        }
        if k == cfg.max_iters {
            return Ok(trace.finish(Termination::MaxIters));
        }
        let Ok(h) = obj.hessian(&x) else {
            return Ok(trace.finish(Termination::NonFinite));
        };
        let w = match bnqn_direction(&g, &h, cfg) {
            Ok(w) => w,
            Err(Error::SingularShift) => return Ok(trace.finish(Termination::LineSearchFailure)),
            Err(_) => return Ok(trace.finish(Termination::NonFinite)),
        };
        let slope = dot(&w, &g);
        let Some((next, v, kappa)) = backtrack(obj, &x, &w, cfg, |trial, v, kappa| {
            v <= fx - cfg.armijo_c * kappa * slope && constraint.is_none_or(|c| c(trial))
        }) else {
            return Ok(trace.finish(Termination::LineSearchFailure));
        };
        trace.push(next.clone(), v, kappa);
        x = next;
        fx = v;
    }
    unreachable!()
}

/// Runs `cfg.method`. Projected descent and the constrained line search
/// need `region`; the other methods ignore it.
pub fn minimize(
    obj: &dyn Objective,
    x0: &[f64],
    cfg: &OptimizerConfig,
    region: Option<&Region>,
) -> Result<Trace> {
    match cfg.method {
        Method::Gd => gradient_descent(obj, x0, cfg),
        Method::Bgd => backtracking_gd(obj, x0, cfg),
        Method::Bnqn => bnqn(obj, x0, cfg),
        Method::Pgd => {
            let region = region.ok_or_else(|| Error::Config("pgd needs a region".into()))?;
            if region.project(x0).is_none() {
                return Err(Error::Config("pgd needs a projectable region".into()));
            }
            let p = |x: &[f64]| region.project(x).expect("checked projectable");
            projected_gd(obj, x0, &p, cfg)
        }
        Method::ArmijoConstrained => {
            let region =
                region.ok_or_else(|| Error::Config("armijo-constrained needs a region".into()))?;
            armijo_with_constraints(obj, x0, &|x| region.contains(x), cfg)
        }
    }
}
