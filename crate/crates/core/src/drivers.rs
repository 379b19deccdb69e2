//! Outer loops around the optimizers: the on-the-fly lower bound γ, rounds
//! of deflation by poles, component escape, constant-wall refinement and the
//! two feasibility procedures.

use std::io::{BufRead, Write};
use std::path::Path;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::avoidance::{
    constant_wall_with, pole_wall, product_pole_wall, AvoidanceSet, Predicate, Region,
    WallDerivatives,
};
use crate::error::{Error, Result};
use crate::functions::{FnObjective, Objective, SharedObjective};
use crate::numerics::distance;
use crate::optimizers::{bnqn, OptimizerConfig, Termination, Trace};

/// Draws a candidate start point.
pub type Sampler<'a> = dyn FnMut(&mut ChaCha8Rng) -> Vec<f64> + 'a;

/// Draws from `sampler` until `ok` accepts, at most 100 times.
pub fn draw_start(
    sampler: &mut Sampler<'_>,
    rng: &mut ChaCha8Rng,
    ok: impl Fn(&[f64]) -> bool,
) -> Result<Vec<f64>> {
    const DRAWS: usize = 100;
    for _ in 0..DRAWS {
        let x = sampler(rng);
        if ok(&x) {
            return Ok(x);
        }
    }
    Err(Error::NoFeasibleStart(DRAWS))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaRun {
    pub run: usize,
    /// γ used for this run's wall.
    pub gamma_used: f64,
    /// γ after the update.
    pub gamma: f64,
    pub start: Vec<f64>,
    pub endpoint: Vec<f64>,
    pub termination: Termination,
    /// Best base-objective point seen so far, over all runs.
    pub best_point: Vec<f64>,
    pub best_value: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GammaState {
    pub gamma: f64,
    pub history: Vec<GammaRun>,
}

impl GammaState {
    pub fn best(&self) -> Option<(&[f64], f64)> {
        self.history
            .last()
            .map(|r| (r.best_point.as_slice(), r.best_value))
    }
}

/// Repeatedly minimizes `(f − γ)/d(x,A)^N` from sampled starts, lowering γ
/// to the smallest base value met along each trace. With `restrict`, only
/// iterates inside it count and starts are drawn inside it.
#[allow(clippy::too_many_arguments)]
pub fn gamma_update_loop(
    f: SharedObjective,
    set: &AvoidanceSet,
    n: u32,
    gamma0: f64,
    runs: usize,
    sampler: &mut Sampler<'_>,
    restrict: Option<&Predicate>,
    cfg: &OptimizerConfig,
    rng: &mut ChaCha8Rng,
) -> Result<GammaState> {
    if runs == 0 {
        return Err(Error::InvalidParameter("runs must be >= 1".into()));
    }
    let inside = |x: &[f64]| restrict.is_none_or(|p| (p.0)(x));
    let mut state = GammaState {
        gamma: gamma0,
        history: Vec::with_capacity(runs),
    };
    let mut best: Option<(Vec<f64>, f64)> = None;
    for run in 0..runs {
        let gamma_used = state.gamma;
        let wall = pole_wall(f.clone(), set.clone(), n, gamma_used)?;
        let start = draw_start(sampler, rng, |x| {
            inside(x) && !wall.at_wall(x) && set.distance(x).is_ok_and(|d| d > 0.0)
        })?;
        let trace = bnqn(&wall, &start, cfg)?;
        for x in trace.iterates.iter().filter(|x| inside(x)) {
            let v = f.value(x);
            if best.as_ref().is_none_or(|(_, b)| v < *b) {
                best = Some((x.clone(), v));
            }
        }
        let (best_point, best_value) = best.clone().expect("the start is inside");
        state.gamma = state.gamma.min(best_value);
        state.history.push(GammaRun {
            run,
            gamma_used,
            gamma: state.gamma,
            start,
            endpoint: trace.endpoint().to_vec(),
            termination: trace.termination,
            best_point,
            best_value,
        });
    }
    Ok(state)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WallKind {
    /// `f / d(x, {z₁..zₖ})^N`
    Pole,
    /// `f / ∏ d(x, zⱼ)^N`
    ProductPole,
}

pub enum StartPolicy<'a> {
    Fixed(Vec<f64>),
    Sample(Box<Sampler<'a>>),
}

pub type Classifier<'a> = dyn Fn(&[f64]) -> Option<String> + 'a;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AvoidanceRound {
    pub round: usize,
    /// Points avoided during this round.
    pub avoid_set: Vec<Vec<f64>>,
    pub start: Vec<f64>,
    pub endpoint: Vec<f64>,
    pub base_value: f64,
    pub termination: Termination,
    /// Whether the endpoint was appended to the avoid set.
    pub accepted: bool,
    pub classification: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AvoidanceRoundLog {
    pub rounds: Vec<AvoidanceRound>,
}

impl AvoidanceRoundLog {
    /// Endpoints that were appended to the avoid set, in order.
    pub fn found(&self) -> Vec<Vec<f64>> {
        self.rounds
            .iter()
            .filter(|r| r.accepted)
            .map(|r| r.endpoint.clone())
            .collect()
    }
}

/// Settings shared by the deflation drivers.
pub struct RoundOptions<'a> {
    pub n: u32,
    pub rounds: usize,
    pub wall: WallKind,
    /// An endpoint joins the avoid set only if the run converged and the
    /// base value is at most this.
    pub accept_below: f64,
    pub classifier: Option<&'a Classifier<'a>>,
    /// Stop after the first accepted endpoint satisfying this.
    pub stop_when: Option<&'a dyn Fn(&[f64]) -> bool>,
    pub cfg: OptimizerConfig,
}

impl Default for RoundOptions<'_> {
    fn default() -> Self {
        Self {
            n: 2,
            rounds: 6,
            wall: WallKind::Pole,
            accept_below: 1e-8,
            classifier: None,
            stop_when: None,
            cfg: OptimizerConfig::default(),
        }
    }
}

fn walled(f: &SharedObjective, found: &[Vec<f64>], n: u32, kind: WallKind) -> Result<SharedObjective> {
    if found.is_empty() {
        return Ok(f.clone());
    }
    Ok(match kind {
        WallKind::Pole => Arc::new(pole_wall(f.clone(), AvoidanceSet::points(found.to_vec())?, n, 0.0)?),
        WallKind::ProductPole => Arc::new(product_pole_wall(f.clone(), found.to_vec(), vec![n; found.len()])?),
    })
}

fn run_rounds(
    f: &SharedObjective,
    mut found: Vec<Vec<f64>>,
    next_start: &mut dyn FnMut(&[Vec<f64>], &dyn Objective) -> Result<Vec<f64>>,
    opts: &RoundOptions<'_>,
) -> Result<AvoidanceRoundLog> {
    if opts.rounds == 0 {
        return Err(Error::InvalidParameter("rounds must be >= 1".into()));
    }
    let mut log = AvoidanceRoundLog::default();
    for round in 0..opts.rounds {
        let obj = walled(f, &found, opts.n, opts.wall)?;
        let start = next_start(&found, obj.as_ref())?;
        let trace = bnqn(obj.as_ref(), &start, &opts.cfg)?;
        let endpoint = trace.endpoint().to_vec();
        let base_value = f.value(&endpoint);
        let accepted = trace.termination.converged() && base_value <= opts.accept_below;
        log.rounds.push(AvoidanceRound {
            round,
            avoid_set: found.clone(),
            start,
            endpoint: endpoint.clone(),
            base_value,
            termination: trace.termination,
            accepted,
            classification: opts.classifier.and_then(|c| c(&endpoint)),
        });
        if accepted {
            found.push(endpoint.clone());
            if opts.stop_when.is_some_and(|s| s(&endpoint)) {
                break;
            }
        }
    }
    Ok(log)
}

/// Rounds of minimization, each with poles at every endpoint found so far.
pub fn avoid_iterate(
    f: SharedObjective,
    start: StartPolicy<'_>,
    opts: &RoundOptions<'_>,
    rng: &mut ChaCha8Rng,
) -> Result<AvoidanceRoundLog> {
    let mut start = start;
    let mut next = |_: &[Vec<f64>], obj: &dyn Objective| -> Result<Vec<f64>> {
        match &mut start {
            StartPolicy::Fixed(x) => Ok(x.clone()),
            StartPolicy::Sample(s) => draw_start(s.as_mut(), rng, |x| !obj.at_wall(x)),
        }
    };
    run_rounds(&f, Vec::new(), &mut next, opts)
}

/// Uniform perturbation of each coordinate by at most `offset`.
pub fn perturb(x: &[f64], offset: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    x.iter().map(|v| v + rng.gen_range(-offset..=offset)).collect()
}

/// Starts each round next to the most recently found point, with poles at
/// `seed_endpoint` and every later endpoint.
pub fn escape_component(
    f: SharedObjective,
    seed_endpoint: &[f64],
    offset: f64,
    opts: &RoundOptions<'_>,
    rng: &mut ChaCha8Rng,
) -> Result<AvoidanceRoundLog> {
    if !(offset > 0.0) {
        return Err(Error::InvalidParameter("offset must be > 0".into()));
    }
    let mut next = |found: &[Vec<f64>], obj: &dyn Objective| -> Result<Vec<f64>> {
        let anchor = found.last().expect("seeded").clone();
        let mut sampler = |r: &mut ChaCha8Rng| perturb(&anchor, offset, r);
        draw_start(&mut sampler, rng, |x| !obj.at_wall(x))
    };
    run_rounds(&f, vec![seed_endpoint.to_vec()], &mut next, opts)
}

/// Derivative steps tried in turn by [`refine_constant_wall`], coarse to fine.
pub const WALL_STEP_SCHEDULE: [Option<f64>; 5] = [Some(0.1), Some(0.01), Some(1e-3), Some(1e-4), None];

/// BNQN on a constant wall, restarted at each derivative step of `schedule`.
///
/// Coarse steps let the finite differences of the walled function see a
/// face from some distance, which turns the iterates along it; finer steps
/// then resolve the end point. Values are the same at every stage, so the
/// joined trace still descends.
pub fn refine_constant_wall(
    f: SharedObjective,
    region: &Region,
    r: f64,
    x0: &[f64],
    schedule: &[Option<f64>],
    cfg: &OptimizerConfig,
) -> Result<Trace> {
    if schedule.is_empty() {
        return Err(Error::InvalidParameter("empty derivative schedule".into()));
    }
    let mut joined: Option<Trace> = None;
    for step in schedule {
        let wall = constant_wall_with(f.clone(), region.clone(), r, WallDerivatives::Stencil { step: *step })?;
        let start = joined.as_ref().map_or(x0.to_vec(), |t| t.endpoint().to_vec());
        let stage = bnqn(&wall, &start, cfg)?;
        let stop = matches!(stage.termination, Termination::WallStart | Termination::NonFinite);
        joined = Some(match joined {
            None => stage,
            Some(mut t) => {
                t.iterates.extend(stage.iterates.into_iter().skip(1));
                t.values.extend(stage.values.into_iter().skip(1));
                t.grad_norms.truncate(t.grad_norms.len() - 1);
                t.grad_norms.extend(stage.grad_norms);
                t.step_sizes.extend(stage.step_sizes.into_iter().skip(1));
                t.termination = match stage.termination {
                    Termination::StationaryStart => Termination::GradTol,
                    other => other,
                };
                t
            }
        });
        if stop {
            break;
        }
    }
    Ok(joined.expect("schedule is nonempty"))
}

/// A scalar constraint function.
pub type Constraint = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Outcome of a feasibility search.
#[derive(Clone, Debug)]
pub struct FeasibilityReport {
    pub feasible: bool,
    /// The `x` part of the final iterate.
    pub point: Vec<f64>,
    /// Slack variables (empty for the indicator method).
    pub slack: Vec<f64>,
    /// Final value of the least-squares objective.
    pub residual: f64,
    pub trace: Option<Trace>,
}

/// Success threshold on the least-squares objective.
pub const FEASIBILITY_TOL: f64 = 1e-12;

/// Finds `x` with `hᵢ(x) = 0` for the equalities and `gⱼ(x) ≤ 0` for the
/// inequalities by minimizing `½Σhᵢ² + ½Σ(gⱼ + yⱼ²)²` over `(x, y)`.
pub fn feasibility_slack(
    equalities: Vec<Constraint>,
    inequalities: Vec<Constraint>,
    x0: &[f64],
    cfg: &OptimizerConfig,
) -> Result<FeasibilityReport> {
    let n = x0.len();
    let m = inequalities.len();
    let (eq, ineq) = (equalities.clone(), inequalities.clone());
    let objective = FnObjective::new("feasibility_slack", n + m, move |z| {
        let (x, y) = z.split_at(n);
        let a: f64 = eq.iter().map(|h| h(x).powi(2)).sum();
        let b: f64 = ineq.iter().zip(y).map(|(g, s)| (g(x) + s * s).powi(2)).sum();
        0.5 * (a + b)
    });
    let mut z0 = x0.to_vec();
    z0.extend(inequalities.iter().map(|g| (-g(x0)).max(0.0).sqrt()));
    let trace = bnqn(&objective, &z0, cfg)?;
    let z = trace.endpoint();
    let residual = trace.final_value();
    Ok(FeasibilityReport {
        feasible: residual <= FEASIBILITY_TOL,
        point: z[..n].to_vec(),
        slack: z[n..].to_vec(),
        residual,
        trace: Some(trace),
    })
}

/// Finds `x` with `hᵢ(x) = 0` inside `allowed` by minimizing `Σhᵢ²` walled
/// to `m` outside the region. The start must be inside.
pub fn feasibility_indicator(
    equalities: Vec<Constraint>,
    allowed: Region,
    m: f64,
    x0: &[f64],
    cfg: &OptimizerConfig,
) -> Result<FeasibilityReport> {
    if !allowed.contains(x0) {
        return Ok(FeasibilityReport {
            feasible: false,
            point: x0.to_vec(),
            slack: vec![],
            residual: f64::INFINITY,
            trace: None,
        });
    }
    if equalities.is_empty() {
        return Ok(FeasibilityReport {
            feasible: true,
            point: x0.to_vec(),
            slack: vec![],
            residual: 0.0,
            trace: None,
        });
    }
    let eq = equalities.clone();
    let base = FnObjective::new("feasibility_indicator", x0.len(), move |x| {
        eq.iter().map(|h| h(x).powi(2)).sum()
    });
    let trace = refine_constant_wall(Arc::new(base), &allowed, m, x0, &WALL_STEP_SCHEDULE, cfg)?;
    let residual = trace.final_value();
    Ok(FeasibilityReport {
        feasible: residual <= FEASIBILITY_TOL && allowed.contains(trace.endpoint()),
        point: trace.endpoint().to_vec(),
        slack: vec![],
        residual,
        trace: Some(trace),
    })
}

/// One line of a driver log file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
pub enum LogRecord {
    GammaRun(GammaRun),
    AvoidanceRound(AvoidanceRound),
}

impl GammaState {
    pub fn records(&self) -> Vec<LogRecord> {
        self.history.iter().cloned().map(LogRecord::GammaRun).collect()
    }
}

impl AvoidanceRoundLog {
    pub fn records(&self) -> Vec<LogRecord> {
        self.rounds.iter().cloned().map(LogRecord::AvoidanceRound).collect()
    }
}

/// Writes one JSON object per line.
pub fn write_log<W: Write>(records: &[LogRecord], mut w: W) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn write_log_file(records: &[LogRecord], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_log(records, std::io::BufWriter::new(file))
}

pub fn read_log<R: BufRead>(r: R) -> Result<Vec<LogRecord>> {
    let mut out = Vec::new();
    for line in r.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line)?);
    }
    Ok(out)
}

/// Distance from `x` to the nearest point of `points`.
pub fn nearest(points: &[Vec<f64>], x: &[f64]) -> f64 {
    points.iter().map(|p| distance(p, x)).fold(f64::INFINITY, f64::min)
}
