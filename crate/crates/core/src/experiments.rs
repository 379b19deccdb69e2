//! The nine shipped experiments. Parameters live in `presets/exampleN.json`;
//! this module runs them, writes their artifacts and checks their outcomes.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::avoidance::{AvoidanceSet, Predicate, Region};
use crate::basins::{basin_stats, labels_csv, rasterize_with, write_ppm, BasinGrid, BasinStats, LabelField};
use crate::config::{ConstantDerivatives, ObjectiveSpec, Outputs, RunSpec, StartSpec, WallSpec};
use crate::drivers::{
    avoid_iterate, escape_component, gamma_update_loop, write_log_file, AvoidanceRoundLog, GammaState,
    LogRecord, RoundOptions, StartPolicy, WallKind,
};
use crate::error::{Error, Result};
use crate::functions::{durand_kerner, Polynomial};
use crate::numerics::distance;
use crate::optimizers::{bnqn, minimize, Method, OptimizerConfig, Termination, Trace};

const PRESETS: [&str; 9] = [
    include_str!("../../../presets/example1.json"),
    include_str!("../../../presets/example2.json"),
    include_str!("../../../presets/example3.json"),
    include_str!("../../../presets/example4.json"),
    include_str!("../../../presets/example5.json"),
    include_str!("../../../presets/example6.json"),
    include_str!("../../../presets/example7.json"),
    include_str!("../../../presets/example8.json"),
    include_str!("../../../presets/example9.json"),
];

/// The shipped JSON for example `n` (1..=9).
pub fn preset_source(n: usize) -> Result<&'static str> {
    n.checked_sub(1)
        .and_then(|i| PRESETS.get(i))
        .copied()
        .ok_or_else(|| Error::Config(format!("no example {n}; expected 1..=9")))
}

pub fn preset(n: usize) -> Result<Preset> {
    Preset::from_json(preset_source(n)?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "experiment", rename_all = "snake_case")]
pub enum Preset {
    Basins(BasinPreset),
    Deflation(DeflationPreset),
    Escape(EscapePreset),
    Gamma(GammaPreset),
    ConstantWall(ConstantWallPreset),
    Compare(ComparePreset),
}

impl Preset {
    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("presets serialize")
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasinRun {
    pub name: String,
    #[serde(default)]
    pub wall: WallSpec,
    /// Labels of grid attractors to put poles at, with exponent `n`.
    #[serde(default)]
    pub avoid: Vec<String>,
    #[serde(default = "two")]
    pub n: u32,
    /// Overrides the grid's tolerance, for walls that shift the minimizers.
    #[serde(default)]
    pub classify_tol: Option<f64>,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
}

fn two() -> u32 {
    2
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasinPreset {
    pub objective: ObjectiveSpec,
    pub grid: BasinGrid,
    /// Replace each attractor by the nearest root of the polynomial objective.
    #[serde(default)]
    pub polish_attractors: bool,
    pub runs: Vec<BasinRun>,
}

/// The band `|y − Σ cᵢ xⁱ| ≤ tol` around a graph.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveBand {
    pub poly: Vec<f64>,
    pub tol: f64,
}

impl CurveBand {
    /// `y − p(x)`.
    pub fn offset(&self, x: &[f64]) -> f64 {
        x[1] - self.poly.iter().rev().fold(0.0, |acc, c| acc * x[0] + c)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.offset(x).abs() <= self.tol
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeflationPreset {
    pub objective: ObjectiveSpec,
    pub start: Vec<f64>,
    pub n: u32,
    pub rounds: usize,
    pub walls: Vec<WallKind>,
    pub accept_below: f64,
    /// Stop once an accepted endpoint leaves this band.
    #[serde(default)]
    pub stop_off: Option<CurveBand>,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EscapePreset {
    pub objective: ObjectiveSpec,
    /// Start of the plain run that locates a first component.
    pub seed_start: Vec<f64>,
    /// Point the escape rounds start beside.
    pub seed_endpoint: Vec<f64>,
    pub exponents: Vec<u32>,
    pub rounds: usize,
    pub offset: f64,
    pub accept_below: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SamplerSpec {
    Uniform {
        lower: Vec<f64>,
        upper: Vec<f64>,
    },
    /// `(x, −x − e)` with `x` and `e` uniform on their intervals.
    BelowAntiDiagonal {
        x: [f64; 2],
        offset: [f64; 2],
    },
}

impl SamplerSpec {
    pub fn draw(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        match self {
            Self::Uniform { lower, upper } => lower.iter().zip(upper).map(|(l, u)| rng.gen_range(*l..*u)).collect(),
            Self::BelowAntiDiagonal { x, offset } => {
                let x0 = rng.gen_range(x[0]..x[1]);
                let e = rng.gen_range(offset[0]..offset[1]);
                vec![x0, -x0 - e]
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GammaPreset {
    pub objective: ObjectiveSpec,
    pub set: AvoidanceSet,
    pub n: u32,
    pub gamma0: f64,
    pub runs: usize,
    pub sampler: SamplerSpec,
    #[serde(default)]
    pub restrict: Option<Region>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantWallPreset {
    pub objective: ObjectiveSpec,
    pub region: Region,
    pub r: f64,
    #[serde(default)]
    pub derivatives: ConstantDerivatives,
    pub starts: Vec<Vec<f64>>,
    /// Extra starts drawn uniformly from this box, kept if inside the region.
    #[serde(default)]
    pub random_starts: usize,
    #[serde(default)]
    pub random_box: Option<[Vec<f64>; 2]>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComparePreset {
    pub objective: ObjectiveSpec,
    pub region: Region,
    pub r: f64,
    #[serde(default)]
    pub derivatives: ConstantDerivatives,
    pub start: Vec<f64>,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
}

/// Wall choices accepted on the command line.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WallChoice {
    Pole,
    Product,
    Constant,
    H1,
    H2,
    None,
}

impl FromStr for WallChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "pole" => Self::Pole,
            "product" => Self::Product,
            "constant" => Self::Constant,
            "h1" => Self::H1,
            "h2" => Self::H2,
            "none" => Self::None,
            _ => return Err(Error::Config(format!("unknown wall {s}"))),
        })
    }
}

impl fmt::Display for WallChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Pole => "pole",
            Self::Product => "product",
            Self::Constant => "constant",
            Self::H1 => "h1",
            Self::H2 => "h2",
            Self::None => "none",
        })
    }
}

impl WallChoice {
    fn matches(self, wall: &WallSpec, avoid: bool) -> bool {
        match (self, wall) {
            (Self::Pole, WallSpec::Pole { .. }) => true,
            (Self::Pole, WallSpec::None) => avoid,
            (Self::Product, WallSpec::ProductPole { .. }) => true,
            (Self::Constant, WallSpec::Constant { .. }) => true,
            (Self::H1, WallSpec::H1 { .. }) | (Self::H2, WallSpec::H2 { .. }) => true,
            (Self::None, WallSpec::None) => !avoid,
            _ => false,
        }
    }
}

/// Command-line adjustments to a preset. Fields a preset has no use for are
/// rejected.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub method: Option<Method>,
    pub wall: Option<WallChoice>,
    pub n: Option<u32>,
    pub r: Option<f64>,
    pub gamma: Option<f64>,
    pub epsilon: Option<f64>,
    pub start: Option<Vec<f64>>,
    pub seed: Option<u64>,
    /// `(center, half_width, resolution)`
    pub grid: Option<([f64; 2], f64, usize)>,
    pub workers: Option<usize>,
}

impl Overrides {
    fn reject(&self, example: usize, names: &[&str]) -> Result<()> {
        let set = [
            ("--method", self.method.is_some()),
            ("--wall", self.wall.is_some()),
            ("--N", self.n.is_some()),
            ("--R", self.r.is_some()),
            ("--gamma", self.gamma.is_some()),
            ("--epsilon", self.epsilon.is_some()),
            ("--start", self.start.is_some()),
            ("--grid", self.grid.is_some()),
        ];
        for (flag, given) in set {
            if given && names.contains(&flag) {
                return Err(Error::Config(format!("{flag} does not apply to example {example}")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Self {
            name: name.into(),
            passed,
            detail,
        }
    }
}

#[derive(Clone, Debug)]
pub struct BasinResult {
    pub name: String,
    pub grid: BasinGrid,
    pub field: LabelField,
    pub stats: BasinStats,
}

#[derive(Clone, Debug)]
pub struct NamedRun {
    pub name: String,
    pub start: Vec<f64>,
    pub trace: Trace,
}

#[derive(Clone, Debug)]
pub enum Outcome {
    Basins(Vec<BasinResult>),
    Deflation(Vec<(WallKind, AvoidanceRoundLog)>),
    Escape {
        seed_run: Trace,
        logs: Vec<(u32, AvoidanceRoundLog)>,
    },
    Gamma(GammaState),
    Runs(Vec<NamedRun>),
}

impl Outcome {
    /// Whether any optimizer run ended with a non-finite value.
    pub fn any_nonfinite(&self) -> bool {
        let nf = |t: &Termination| *t == Termination::NonFinite;
        match self {
            Self::Basins(_) => false,
            Self::Deflation(logs) => logs.iter().any(|(_, l)| l.rounds.iter().any(|r| nf(&r.termination))),
            Self::Escape { seed_run, logs } => {
                nf(&seed_run.termination) || logs.iter().any(|(_, l)| l.rounds.iter().any(|r| nf(&r.termination)))
            }
            Self::Gamma(g) => g.history.iter().any(|r| nf(&r.termination)),
            Self::Runs(runs) => runs.iter().any(|r| nf(&r.trace.termination)),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ExampleReport {
    pub example: usize,
    pub outcome: Outcome,
    pub checks: Vec<Check>,
    pub summary: Vec<String>,
    pub written: Vec<PathBuf>,
}

impl ExampleReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Runs example `n` with `overrides`, writing artifacts under `out` when
/// given.
pub fn run_example(n: usize, overrides: &Overrides, out: Option<&Path>) -> Result<ExampleReport> {
    run_preset(n, preset(n)?, overrides, out)
}

/// Runs a preset as example `n`; `n` selects the checks and file names.
pub fn run_preset(n: usize, preset: Preset, ov: &Overrides, out: Option<&Path>) -> Result<ExampleReport> {
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
    }
    let tag = format!("example{n}");
    let mut written = Vec::new();
    let outcome = match preset {
        Preset::Basins(p) => run_basins(n, p, ov, out, &tag, &mut written)?,
        Preset::Deflation(p) => run_deflation(n, p, ov, out, &tag, &mut written)?,
        Preset::Escape(p) => run_escape(n, p, ov, out, &tag, &mut written)?,
        Preset::Gamma(p) => run_gamma(n, p, ov, out, &tag, &mut written)?,
        Preset::ConstantWall(p) => run_constant(n, p, ov, out, &tag, &mut written)?,
        Preset::Compare(p) => run_compare(n, p, ov, out, &tag, &mut written)?,
    };
    let checks = checks(n, &outcome);
    let summary = summarize(&outcome);
    Ok(ExampleReport {
        example: n,
        outcome,
        checks,
        summary,
        written,
    })
}

fn with_method(cfg: &OptimizerConfig, ov: &Overrides) -> OptimizerConfig {
    let mut cfg = cfg.clone();
    if let Some(m) = ov.method {
        cfg.method = m;
    }
    if let Some(s) = ov.seed {
        cfg.seed = s;
    }
    cfg
}

fn write_trace(trace: &Trace, out: Option<&Path>, name: &str, written: &mut Vec<PathBuf>) -> Result<()> {
    if let Some(dir) = out {
        let path = dir.join(format!("{name}.csv"));
        std::fs::write(&path, trace.to_csv())?;
        written.push(path);
    }
    Ok(())
}

fn write_records(records: &[LogRecord], out: Option<&Path>, name: &str, written: &mut Vec<PathBuf>) -> Result<()> {
    if let Some(dir) = out {
        let path = dir.join(format!("{name}.jsonl"));
        write_log_file(records, &path)?;
        written.push(path);
    }
    Ok(())
}

fn polish(grid: &mut BasinGrid, objective: &ObjectiveSpec) -> Result<()> {
    let ObjectiveSpec::Polynomial { coefficients } = objective else {
        return Err(Error::Config("polish_attractors needs a polynomial objective".into()));
    };
    let p = Polynomial::new(coefficients.iter().map(|c| Complex64::new(c[0], c[1])).collect())?;
    let roots = durand_kerner(&p);
    for a in &mut grid.attractors {
        let z = Complex64::new(a.point[0], a.point[1]);
        let best = roots
            .iter()
            .min_by(|u, v| (*u - z).norm().total_cmp(&(*v - z).norm()))
            .expect("degree >= 1");
        a.point = vec![best.re, best.im];
    }
    Ok(())
}

fn run_basins(
    example: usize,
    mut p: BasinPreset,
    ov: &Overrides,
    out: Option<&Path>,
    tag: &str,
    written: &mut Vec<PathBuf>,
) -> Result<Outcome> {
    ov.reject(example, &["--R", "--start"])?;
    if let Some((center, half_width, resolution)) = ov.grid {
        p.grid.center = center;
        p.grid.half_width = half_width;
        p.grid.resolution = resolution;
    }
    p.grid.validate()?;
    if p.polish_attractors {
        polish(&mut p.grid, &p.objective)?;
    }
    let base = p.objective.build()?;
    let mut runs = p.runs;
    if let Some(w) = ov.wall {
        runs.retain(|r| w.matches(&r.wall, !r.avoid.is_empty()));
    }
    if let Some(m) = ov.method {
        if runs.iter().any(|r| r.optimizer.method == m) {
            runs.retain(|r| r.optimizer.method == m);
        } else {
            runs.iter_mut().for_each(|r| r.optimizer.method = m);
        }
    }
    if runs.is_empty() {
        return Err(Error::Config(format!("no run of example {example} matches the filters")));
    }
    if let Some(eps) = ov.epsilon {
        for r in &mut runs {
            if let WallSpec::H1 { epsilon, .. } | WallSpec::H2 { epsilon, .. } = &mut r.wall {
                *epsilon = eps;
            }
        }
        // Runs that differed only in ε collapse to one.
        let mut seen: Vec<(WallSpec, OptimizerConfig)> = Vec::new();
        runs.retain(|r| {
            let key = (r.wall.clone(), r.optimizer.clone());
            let fresh = !seen.contains(&key);
            seen.push(key);
            fresh
        });
    }
    let mut results = Vec::new();
    for mut run in runs {
        if let Some(n) = ov.n {
            run.n = n;
            if let WallSpec::Pole { n: wn, .. } = &mut run.wall {
                *wn = n;
            }
        }
        if let Some(g) = ov.gamma {
            match &mut run.wall {
                WallSpec::Pole { gamma, .. } => *gamma = g,
                WallSpec::H1 { gamma0, .. } | WallSpec::H2 { gamma0, .. } => *gamma0 = g,
                _ => {}
            }
        }
        let wall = if run.avoid.is_empty() {
            run.wall.clone()
        } else {
            if run.wall != WallSpec::None {
                return Err(Error::Config(format!("run {} sets both wall and avoid", run.name)));
            }
            let points = run
                .avoid
                .iter()
                .map(|label| {
                    p.grid
                        .attractors
                        .iter()
                        .find(|a| &a.label == label)
                        .map(|a| a.point.clone())
                        .ok_or_else(|| Error::Config(format!("unknown attractor {label}")))
                })
                .collect::<Result<Vec<_>>>()?;
            WallSpec::Pole {
                set: AvoidanceSet::points(points)?,
                n: run.n,
                gamma: 0.0,
            }
        };
        let obj = wall.apply(base.clone())?;
        let cfg = with_method(&run.optimizer, ov);
        cfg.validate(2)?;
        let mut grid = p.grid.clone();
        if let Some(tol) = run.classify_tol {
            grid.classify_tol = tol;
        }
        let field = rasterize_with(&grid, ov.workers, |x| minimize(obj.as_ref(), x, &cfg, None))?;
        let stats = basin_stats(&field, &grid);
        if let Some(dir) = out {
            let stem = format!("{tag}_{}", run.name);
            let ppm = dir.join(format!("{stem}.ppm"));
            write_ppm(&field, &grid, &ppm)?;
            let stats_path = dir.join(format!("{stem}_stats.csv"));
            stats.write_csv(&stats_path)?;
            let labels = dir.join(format!("{stem}_labels.csv"));
            std::fs::write(&labels, labels_csv(&field))?;
            let palette = dir.join(format!("{stem}_palette.json"));
            std::fs::write(&palette, serde_json::to_string_pretty(&grid)?)?;
            written.extend([ppm, stats_path, labels, palette]);
        }
        results.push(BasinResult {
            name: run.name,
            grid,
            field,
            stats,
        });
    }
    Ok(Outcome::Basins(results))
}

fn run_deflation(
    example: usize,
    mut p: DeflationPreset,
    ov: &Overrides,
    out: Option<&Path>,
    tag: &str,
    written: &mut Vec<PathBuf>,
) -> Result<Outcome> {
    ov.reject(example, &["--R", "--gamma", "--epsilon", "--grid"])?;
    if let Some(s) = &ov.start {
        p.start = s.clone();
    }
    if let Some(n) = ov.n {
        p.n = n;
    }
    match ov.wall {
        None => {}
        Some(WallChoice::Pole) => p.walls = vec![WallKind::Pole],
        Some(WallChoice::Product) => p.walls = vec![WallKind::ProductPole],
        Some(w) => return Err(Error::Config(format!("--wall {w} does not apply to example {example}"))),
    }
    let f = p.objective.build()?;
    let band = p.stop_off.clone();
    let stop = move |x: &[f64]| band.as_ref().is_some_and(|b| !b.contains(x));
    let mut logs = Vec::new();
    for kind in p.walls {
        let opts = RoundOptions {
            n: p.n,
            rounds: p.rounds,
            wall: kind,
            accept_below: p.accept_below,
            classifier: None,
            stop_when: Some(&stop),
            cfg: with_method(&p.optimizer, ov),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(ov.seed.unwrap_or(0));
        let log = avoid_iterate(f.clone(), StartPolicy::Fixed(p.start.clone()), &opts, &mut rng)?;
        let name = match kind {
            WallKind::Pole => "pole",
            WallKind::ProductPole => "product",
        };
        write_records(&log.records(), out, &format!("{tag}_{name}"), written)?;
        logs.push((kind, log));
    }
    Ok(Outcome::Deflation(logs))
}

fn run_escape(
    example: usize,
    mut p: EscapePreset,
    ov: &Overrides,
    out: Option<&Path>,
    tag: &str,
    written: &mut Vec<PathBuf>,
) -> Result<Outcome> {
    ov.reject(example, &["--wall", "--R", "--gamma", "--epsilon", "--grid"])?;
    if let Some(s) = &ov.start {
        p.seed_endpoint = s.clone();
    }
    if let Some(n) = ov.n {
        p.exponents = vec![n];
    }
    let f = p.objective.build()?;
    let cfg = with_method(&p.optimizer, ov);
    let seed_run = bnqn(f.as_ref(), &p.seed_start, &cfg)?;
    write_trace(&seed_run, out, &format!("{tag}_seed_run"), written)?;
    let mut logs = Vec::new();
    for &n in &p.exponents {
        let opts = RoundOptions {
            n,
            rounds: p.rounds,
            accept_below: p.accept_below,
            cfg: cfg.clone(),
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(ov.seed.unwrap_or(p.seed));
        let log = escape_component(f.clone(), &p.seed_endpoint, p.offset, &opts, &mut rng)?;
        write_records(&log.records(), out, &format!("{tag}_n{n}"), written)?;
        logs.push((n, log));
    }
    Ok(Outcome::Escape { seed_run, logs })
}

fn run_gamma(
    example: usize,
    mut p: GammaPreset,
    ov: &Overrides,
    out: Option<&Path>,
    tag: &str,
    written: &mut Vec<PathBuf>,
) -> Result<Outcome> {
    ov.reject(example, &["--wall", "--R", "--epsilon", "--start", "--grid"])?;
    if let Some(n) = ov.n {
        p.n = n;
    }
    if let Some(g) = ov.gamma {
        p.gamma0 = g;
    }
    let f = p.objective.build()?;
    let restrict = p.restrict.clone().map(|r| Predicate::new(move |x| r.contains(x)));
    let sampler_spec = p.sampler.clone();
    let mut sampler = move |r: &mut ChaCha8Rng| sampler_spec.draw(r);
    let mut rng = ChaCha8Rng::seed_from_u64(ov.seed.unwrap_or(p.seed));
    let state = gamma_update_loop(
        f,
        &p.set,
        p.n,
        p.gamma0,
        p.runs,
        &mut sampler,
        restrict.as_ref(),
        &with_method(&p.optimizer, ov),
        &mut rng,
    )?;
    write_records(&state.records(), out, tag, written)?;
    Ok(Outcome::Gamma(state))
}

fn constant_spec(
    objective: &ObjectiveSpec,
    region: &Region,
    r: f64,
    derivatives: &ConstantDerivatives,
    cfg: &OptimizerConfig,
    start: &[f64],
    ov: &Overrides,
) -> Result<RunSpec> {
    let wall = match ov.wall {
        None | Some(WallChoice::Constant) => WallSpec::Constant {
            region: region.clone(),
            r: ov.r.unwrap_or(r),
            derivatives: derivatives.clone(),
        },
        Some(WallChoice::None) => WallSpec::None,
        Some(w) => return Err(Error::Config(format!("--wall {w} does not apply to constant-wall examples"))),
    };
    Ok(RunSpec {
        objective: objective.clone(),
        wall,
        optimizer: with_method(cfg, ov),
        region: Some(region.clone()),
        start: StartSpec::Fixed { point: start.to_vec() },
        outputs: Outputs::default(),
        seed: ov.seed.unwrap_or(0),
    })
}

fn run_constant(
    example: usize,
    p: ConstantWallPreset,
    ov: &Overrides,
    out: Option<&Path>,
    tag: &str,
    written: &mut Vec<PathBuf>,
) -> Result<Outcome> {
    ov.reject(example, &["--N", "--gamma", "--epsilon", "--grid"])?;
    let mut starts = p.starts.clone();
    let mut random = p.random_starts;
    if let Some(s) = &ov.start {
        starts = vec![s.clone()];
        random = 0;
    }
    if random > 0 {
        let [lower, upper] = p
            .random_box
            .clone()
            .ok_or_else(|| Error::Config("random_starts needs random_box".into()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(ov.seed.unwrap_or(p.seed));
        let sampler = SamplerSpec::Uniform { lower, upper };
        let mut drawn = 0;
        let mut tries = 0;
        while drawn < random {
            tries += 1;
            if tries > 100 * random {
                return Err(Error::NoFeasibleStart(100 * random));
            }
            let x = sampler.draw(&mut rng);
            if p.region.contains(&x) {
                starts.push(x);
                drawn += 1;
            }
        }
    }
    let mut runs = Vec::new();
    for (i, x0) in starts.iter().enumerate() {
        let spec = constant_spec(&p.objective, &p.region, p.r, &p.derivatives, &p.optimizer, x0, ov)?;
        let trace = spec.run()?;
        let name = if i < p.starts.len() || ov.start.is_some() {
            format!("start{i}")
        } else {
            format!("random{}", i - p.starts.len())
        };
        if i < p.starts.len() || ov.start.is_some() {
            write_trace(&trace, out, &format!("{tag}_{name}"), written)?;
        }
        runs.push(NamedRun {
            name,
            start: x0.clone(),
            trace,
        });
    }
    Ok(Outcome::Runs(runs))
}

fn run_compare(
    example: usize,
    p: ComparePreset,
    ov: &Overrides,
    out: Option<&Path>,
    tag: &str,
    written: &mut Vec<PathBuf>,
) -> Result<Outcome> {
    ov.reject(example, &["--N", "--gamma", "--epsilon", "--grid", "--method"])?;
    let start = ov.start.clone().unwrap_or(p.start.clone());
    let walled = constant_spec(&p.objective, &p.region, p.r, &p.derivatives, &p.optimizer, &start, ov)?;
    let wall_trace = walled.run()?;
    write_trace(&wall_trace, out, &format!("{tag}_constant_wall"), written)?;
    let constrained = RunSpec {
        wall: WallSpec::None,
        optimizer: OptimizerConfig {
            method: Method::ArmijoConstrained,
            ..walled.optimizer.clone()
        },
        ..walled
    };
    let constrained_trace = constrained.run()?;
    write_trace(&constrained_trace, out, &format!("{tag}_armijo_constrained"), written)?;
    Ok(Outcome::Runs(vec![
        NamedRun {
            name: "constant_wall".into(),
            start: start.clone(),
            trace: wall_trace,
        },
        NamedRun {
            name: "armijo_constrained".into(),
            start,
            trace: constrained_trace,
        },
    ]))
}

fn fmt_point(x: &[f64]) -> String {
    let parts: Vec<String> = x.iter().map(|v| format!("{v:.8}")).collect();
    format!("({})", parts.join(", "))
}

fn summarize(outcome: &Outcome) -> Vec<String> {
    let mut lines = Vec::new();
    match outcome {
        Outcome::Basins(results) => {
            for r in results {
                let parts: Vec<String> = r
                    .stats
                    .counts
                    .iter()
                    .map(|c| format!("{} {:.4}", c.label, c.fraction))
                    .collect();
                lines.push(format!("{}: {}", r.name, parts.join(", ")));
            }
        }
        Outcome::Deflation(logs) => {
            for (kind, log) in logs {
                for r in &log.rounds {
                    lines.push(format!(
                        "{kind:?} round {}: {} f={:.3e} {}{}",
                        r.round,
                        fmt_point(&r.endpoint),
                        r.base_value,
                        r.termination,
                        if r.accepted { "" } else { " (not accepted)" }
                    ));
                }
            }
        }
        Outcome::Escape { seed_run, logs } => {
            lines.push(format!("seed run: {} {}", fmt_point(seed_run.endpoint()), seed_run.termination));
            for (n, log) in logs {
                for r in &log.rounds {
                    lines.push(format!(
                        "N={n} round {}: {} f={:.3e} {}",
                        r.round,
                        fmt_point(&r.endpoint),
                        r.base_value,
                        r.termination
                    ));
                }
            }
        }
        Outcome::Gamma(state) => {
            for r in &state.history {
                lines.push(format!(
                    "run {}: gamma {:.10} best {} {}",
                    r.run,
                    r.gamma,
                    fmt_point(&r.best_point),
                    r.termination
                ));
            }
        }
        Outcome::Runs(runs) => {
            for r in runs {
                lines.push(format!(
                    "{} from {}: {} value {:.10} {} after {} iterations",
                    r.name,
                    fmt_point(&r.start),
                    fmt_point(r.trace.endpoint()),
                    r.trace.final_value(),
                    r.trace.termination,
                    r.trace.iterations()
                ));
            }
        }
    }
    lines
}

/// Critical points and minimum of the Example 1 objective.
#[allow(clippy::approx_constant)]
pub const EXAMPLE1_MINIMIZER: [f64; 2] = [0.7071067, 0.3128011];
pub const EXAMPLE1_MINIMUM: f64 = -0.0727279;
pub const EXAMPLE1_GAMMA: f64 = -0.0727280;
#[allow(clippy::approx_constant)]
pub const EXAMPLE5_BEST: [f64; 2] = [-0.70710678, -0.31280114];
pub const EXAMPLE7_MINIMIZER: [f64; 2] = [0.0, 0.5];
pub const EXAMPLE8_ROOTS: [[f64; 2]; 3] = [[0.0, 0.0], [3.83170597, 0.0], [-3.83170597, 0.0]];
#[allow(clippy::approx_constant)]
pub const EXAMPLE9_TARGET: [f64; 2] = [-0.70710678, -0.31280116];
pub const EXAMPLE9_BOUNDARY_VALUE: f64 = 0.276581;

/// Distance to `C₁ = {y² = x³ − x, x ≤ 0}`, by dense sampling.
pub fn distance_to_c1(x: &[f64]) -> f64 {
    const SAMPLES: usize = 20_000;
    (0..=SAMPLES)
        .map(|i| {
            let u = -1.0 + i as f64 / SAMPLES as f64;
            let v = (u * u * u - u).max(0.0).sqrt();
            distance(x, &[u, v]).min(distance(x, &[u, -v]))
        })
        .fold(f64::INFINITY, f64::min)
}

fn checks(example: usize, outcome: &Outcome) -> Vec<Check> {
    let mut out = Vec::new();
    match (example, outcome) {
        (1, Outcome::Basins(results)) => {
            for r in results.iter().filter(|r| r.name == "G_bnqn") {
                let frac = r.stats.fraction("p2") + r.stats.fraction("p3");
                out.push(Check::new(
                    "G with BNQN: p2 + p3 fraction >= 0.95",
                    frac >= 0.95,
                    format!("{frac:.4}"),
                ));
            }
        }
        (2, Outcome::Basins(results)) => {
            let labels = ["p1", "p2", "p3", "p4", "p5"];
            for r in results {
                if r.name == "f" {
                    let counts: Vec<usize> = labels.iter().map(|l| r.stats.count(l)).collect();
                    out.push(Check::new(
                        "raw f reaches all five roots",
                        counts.iter().all(|c| *c > 0),
                        format!("{counts:?}"),
                    ));
                    out.push(Check::new(
                        "p3 has the smallest basin",
                        counts[2] == *counts.iter().min().expect("five"),
                        format!("{counts:?}"),
                    ));
                }
                if r.name == "G1" {
                    let avoided: usize = ["p1", "p2", "p4", "p5"].iter().map(|l| r.stats.count(l)).sum();
                    out.push(Check::new("G1 labels no avoided root", avoided == 0, format!("{avoided} cells")));
                }
            }
        }
        (3, Outcome::Deflation(logs)) => {
            for (kind, log) in logs {
                let off = |x: &[f64]| x[1] - x[0] * x[0] - 2.0;
                match kind {
                    WallKind::Pole => {
                        let hit = log
                            .rounds
                            .iter()
                            .position(|r| r.accepted && off(&r.endpoint) < -1e-3 && r.base_value <= 1e-6);
                        out.push(Check::new(
                            "pole rounds leave y > x^2 + 2",
                            hit.is_some(),
                            format!("round {hit:?}"),
                        ));
                    }
                    WallKind::ProductPole => {
                        let hit = log.rounds.iter().position(|r| distance(&r.endpoint, &[-1.0, 4.0]) <= 1e-3);
                        let below = log.rounds.iter().filter(|r| off(&r.endpoint) < -1e-6).count();
                        out.push(Check::new(
                            "product rounds reach (-1, 4) staying above y = x^2 + 2",
                            hit.is_some() && below == 0,
                            format!("round {hit:?}, {below} endpoints below"),
                        ));
                    }
                }
            }
        }
        (4, Outcome::Escape { logs, .. }) => {
            for (n, log) in logs {
                let curve = |x: &[f64]| (x[1] * x[1] - x[0].powi(3) + x[0]).abs();
                if *n >= 4 {
                    let hit = log.rounds.iter().position(|r| r.endpoint[0] >= 0.9 && curve(&r.endpoint) <= 1e-6);
                    out.push(Check::new(
                        &format!("N={n} escapes to C2"),
                        hit.is_some(),
                        format!("round {hit:?}"),
                    ));
                } else {
                    let far = log
                        .rounds
                        .iter()
                        .map(|r| distance_to_c1(&r.endpoint))
                        .fold(0.0, f64::max);
                    out.push(Check::new(
                        &format!("N={n} stays within 0.2 of C1"),
                        far <= 0.2,
                        format!("max distance {far:.4}"),
                    ));
                }
            }
        }
        (5, Outcome::Gamma(state)) => {
            let gammas: Vec<f64> = state.history.iter().map(|r| r.gamma).collect();
            let monotone = gammas.windows(2).all(|w| w[1] <= w[0]);
            let last = *gammas.last().unwrap_or(&f64::NAN);
            let best = state.best().map(|b| b.0.to_vec()).unwrap_or_default();
            out.push(Check::new("gamma non-increasing", monotone, format!("{gammas:?}")));
            out.push(Check::new(
                "gamma within 1e-4 of -0.0727280",
                (last - EXAMPLE1_GAMMA).abs() <= 1e-4,
                format!("{last:.10}"),
            ));
            out.push(Check::new(
                "best point within 1e-3 of the minimizer",
                best.len() == 2 && distance(&best, &EXAMPLE5_BEST) <= 1e-3,
                fmt_point(&best),
            ));
        }
        (6, Outcome::Runs(runs)) => {
            let best = runs.iter().map(|r| r.trace.final_value()).fold(f64::INFINITY, f64::min);
            out.push(Check::new("best value <= -390", best <= -390.0, format!("{best:.6}")));
            let below = runs.iter().all(|r| r.trace.values.iter().all(|v| *v < 1000.0));
            out.push(Check::new("every value < 1000", below, String::new()));
        }
        (7, Outcome::Runs(runs)) => {
            for r in runs {
                let e = r.trace.endpoint();
                let ok = distance(e, &EXAMPLE7_MINIMIZER) <= 1e-2 && (r.trace.final_value() + 0.125).abs() <= 1e-3;
                out.push(Check::new(
                    &format!("{} ends near (0, 0.5) with value -0.125", fmt_point(&r.start)),
                    ok,
                    format!("{} {:.8}", fmt_point(e), r.trace.final_value()),
                ));
            }
        }
        (8, Outcome::Runs(runs)) => {
            let near = |e: &[f64], tol: f64| EXAMPLE8_ROOTS.iter().any(|r| distance(e, r) <= tol);
            for r in runs.iter().filter(|r| r.name.starts_with("start")) {
                out.push(Check::new(
                    &format!("{} converges to a root", fmt_point(&r.start)),
                    near(r.trace.endpoint(), 1e-5),
                    fmt_point(r.trace.endpoint()),
                ));
            }
            let outside = runs
                .iter()
                .filter(|r| r.trace.endpoint().iter().any(|v| v.abs() > 5.0))
                .count();
            let stray = runs
                .iter()
                .filter(|r| r.trace.termination.converged() && !near(r.trace.endpoint(), 1e-4))
                .count();
            out.push(Check::new("no endpoint outside the box", outside == 0, format!("{outside}")));
            out.push(Check::new("every converged endpoint is a root", stray == 0, format!("{stray}")));
        }
        (9, Outcome::Runs(runs)) => {
            for r in runs {
                let e = r.trace.endpoint();
                if r.name == "constant_wall" {
                    let d = distance(e, &EXAMPLE9_TARGET);
                    out.push(Check::new(
                        "constant wall ends within 1e-4 of the minimizer in S",
                        d <= 1e-4,
                        format!("{} distance {d:.3e}", fmt_point(e)),
                    ));
                } else {
                    let v = r.trace.final_value();
                    out.push(Check::new(
                        "constrained line search ends on x + y = 0 with value 0.276581",
                        (e[0] + e[1]).abs() <= 1e-3 && (v - EXAMPLE9_BOUNDARY_VALUE).abs() <= 1e-3,
                        format!("{} value {v:.8}", fmt_point(e)),
                    ));
                }
            }
        }
        _ => {}
    }
    out
}

/// Renders one line per γ run or deflation round found in `records`.
pub fn report(records: &[LogRecord]) -> Vec<String> {
    let mut lines = Vec::new();
    let mut last_gamma: Option<f64> = None;
    let mut monotone = true;
    for r in records {
        match r {
            LogRecord::GammaRun(g) => {
                if last_gamma.is_some_and(|prev| g.gamma > prev) {
                    monotone = false;
                }
                last_gamma = Some(g.gamma);
                lines.push(format!(
                    "gamma run {}: {:.10} -> {:.10}, best {} ({})",
                    g.run,
                    g.gamma_used,
                    g.gamma,
                    fmt_point(&g.best_point),
                    g.termination
                ));
            }
            LogRecord::AvoidanceRound(a) => lines.push(format!(
                "round {}: {} avoided, endpoint {} f={:.3e} {}{}",
                a.round,
                a.avoid_set.len(),
                fmt_point(&a.endpoint),
                a.base_value,
                a.termination,
                if a.accepted { ", accepted" } else { "" }
            )),
        }
    }
    if last_gamma.is_some() {
        lines.push(format!("gamma history {}", if monotone { "non-increasing" } else { "NOT monotone" }));
    }
    lines
}
