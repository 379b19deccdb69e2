//! Run specifications: one optimizer run on an optionally walled objective,
//! stored as JSON.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::avoidance::{
    constant_wall_with, penalty_h1, penalty_h2, pole_wall, product_pole_wall, AvoidanceSet, Region,
    WallDerivatives,
};
use crate::drivers::{refine_constant_wall, WALL_STEP_SCHEDULE};
use crate::error::{Error, Result};
use crate::functions::{builtin, modulus_objective, Objective, Polynomial, SharedObjective};
use crate::optimizers::{minimize, Method, OptimizerConfig, Trace};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObjectiveSpec {
    Builtin { name: String },
    /// `|p(x+iy)|²/2`, coefficients as `[re, im]` from the highest degree.
    Polynomial { coefficients: Vec<[f64; 2]> },
}

impl ObjectiveSpec {
    pub fn builtin(name: &str) -> Self {
        Self::Builtin { name: name.into() }
    }

    pub fn build(&self) -> Result<SharedObjective> {
        match self {
            Self::Builtin { name } => builtin(name),
            Self::Polynomial { coefficients } => {
                let p = Polynomial::new(coefficients.iter().map(|c| Complex64::new(c[0], c[1])).collect())?;
                Ok(Arc::new(modulus_objective(p)))
            }
        }
    }
}

/// How a constant wall is differentiated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum ConstantDerivatives {
    Interior,
    Stencil { step: Option<f64> },
    /// Restart BNQN through a coarse-to-fine list of derivative steps.
    Refine { steps: Vec<Option<f64>> },
}

impl Default for ConstantDerivatives {
    fn default() -> Self {
        Self::Refine {
            steps: WALL_STEP_SCHEDULE.to_vec(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum WallSpec {
    #[default]
    None,
    Pole {
        set: AvoidanceSet,
        n: u32,
        #[serde(default)]
        gamma: f64,
    },
    ProductPole {
        points: Vec<Vec<f64>>,
        exponents: Vec<u32>,
    },
    Constant {
        region: Region,
        r: f64,
        #[serde(default)]
        derivatives: ConstantDerivatives,
    },
    H1 {
        set: AvoidanceSet,
        epsilon: f64,
        #[serde(default)]
        gamma0: f64,
    },
    H2 {
        set: AvoidanceSet,
        epsilon: f64,
        #[serde(default)]
        gamma0: f64,
    },
}

impl WallSpec {
    /// The walled objective. Refined constant walls are built with the
    /// finest step of their schedule.
    pub fn apply(&self, f: SharedObjective) -> Result<SharedObjective> {
        Ok(match self {
            Self::None => f,
            Self::Pole { set, n, gamma } => Arc::new(pole_wall(f, set.clone(), *n, *gamma)?),
            Self::ProductPole { points, exponents } => {
                Arc::new(product_pole_wall(f, points.clone(), exponents.clone())?)
            }
            Self::Constant { region, r, derivatives } => {
                let d = match derivatives {
                    ConstantDerivatives::Interior => WallDerivatives::Interior,
                    ConstantDerivatives::Stencil { step } => WallDerivatives::Stencil { step: *step },
                    ConstantDerivatives::Refine { steps } => WallDerivatives::Stencil {
                        step: steps.last().copied().flatten(),
                    },
                };
                Arc::new(constant_wall_with(f, region.clone(), *r, d)?)
            }
            Self::H1 { set, epsilon, gamma0 } => Arc::new(penalty_h1(f, set.clone(), *epsilon, *gamma0)?),
            Self::H2 { set, epsilon, gamma0 } => Arc::new(penalty_h2(f, set.clone(), *epsilon, *gamma0)?),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StartSpec {
    Fixed { point: Vec<f64> },
    /// Uniform in the box, redrawn (at most 100 times) off the wall.
    Uniform { lower: Vec<f64>, upper: Vec<f64> },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    #[serde(default)]
    pub trace: Option<PathBuf>,
    #[serde(default)]
    pub image: Option<PathBuf>,
    #[serde(default)]
    pub log: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub objective: ObjectiveSpec,
    #[serde(default)]
    pub wall: WallSpec,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    /// Feasible set for projected descent and the constrained line search.
    #[serde(default)]
    pub region: Option<Region>,
    pub start: StartSpec,
    #[serde(default)]
    pub outputs: Outputs,
    #[serde(default)]
    pub seed: u64,
}

impl RunSpec {
    pub fn from_json(s: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(s)?;
        Ok(spec)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("run specs serialize")
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn objective(&self) -> Result<SharedObjective> {
        self.wall.apply(self.objective.build()?)
    }

    /// The constraint region: `region`, else a constant wall's region.
    pub fn constraint(&self) -> Option<&Region> {
        match (&self.region, &self.wall) {
            (Some(r), _) => Some(r),
            (None, WallSpec::Constant { region, .. }) => Some(region),
            _ => None,
        }
    }

    pub fn start_point(&self, obj: &dyn Objective) -> Result<Vec<f64>> {
        match &self.start {
            StartSpec::Fixed { point } => Ok(point.clone()),
            StartSpec::Uniform { lower, upper } => {
                if lower.len() != upper.len() || lower.iter().zip(upper).any(|(l, u)| !(l < u)) {
                    return Err(Error::Config("uniform start needs lower < upper".into()));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                let mut sampler = |r: &mut ChaCha8Rng| {
                    lower.iter().zip(upper).map(|(l, u)| r.gen_range(*l..*u)).collect::<Vec<f64>>()
                };
                crate::drivers::draw_start(&mut sampler, &mut rng, |x| !obj.at_wall(x))
            }
        }
    }

    /// Runs the optimizer once.
    pub fn run(&self) -> Result<Trace> {
        let base = self.objective.build()?;
        let obj = self.wall.apply(base.clone())?;
        let x0 = self.start_point(obj.as_ref())?;
        if x0.len() != obj.dim() {
            return Err(Error::DimensionMismatch {
                expected: obj.dim(),
                got: x0.len(),
            });
        }
        self.optimizer.validate(obj.dim())?;
        match &self.wall {
            WallSpec::Constant {
                region,
                r,
                derivatives: ConstantDerivatives::Refine { steps },
            } if self.optimizer.method == Method::Bnqn => {
                refine_constant_wall(base, region, *r, &x0, steps, &self.optimizer)
            }
            _ => minimize(obj.as_ref(), &x0, &self.optimizer, self.constraint()),
        }
    }
}
