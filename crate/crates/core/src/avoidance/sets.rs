use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{distance, dot, norm, SymMatrix};

/// A closed set to be avoided, together with its distance function.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AvoidanceSet {
    FinitePoints {
        points: Vec<Vec<f64>>,
    },
    /// `{x : ⟨a,x⟩ = b}` with distance `s·|⟨a,x⟩ − b|`. A missing scale means
    /// `1/|a|`, the Euclidean distance.
    Hyperplane {
        normal: Vec<f64>,
        offset: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        scale: Option<f64>,
    },
    /// The topological boundary of an axis-aligned box.
    BoxBoundary {
        lower: Vec<f64>,
        upper: Vec<f64>,
    },
    /// Everything outside `region`. Membership only: no distance.
    RegionComplement {
        region: Region,
    },
    Union {
        members: Vec<AvoidanceSet>,
    },
}

/// Distance to a set with its first and second derivatives, taken on the
/// smooth piece selected at `x`.
#[derive(Clone, Debug)]
pub struct DistanceJet {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub hessian: SymMatrix,
}

impl AvoidanceSet {
    pub fn points(points: Vec<Vec<f64>>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidParameter(
                "FinitePoints needs at least one point".into(),
            ));
        }
        let dim = points[0].len();
        if let Some(p) = points.iter().find(|p| p.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: p.len(),
            });
        }
        Ok(Self::FinitePoints { points })
    }

    pub fn point(p: Vec<f64>) -> Self {
        Self::FinitePoints { points: vec![p] }
    }

    pub fn hyperplane(normal: Vec<f64>, offset: f64) -> Result<Self> {
        if !(norm(&normal) > 0.0) {
            return Err(Error::InvalidParameter("hyperplane normal is zero".into()));
        }
        Ok(Self::Hyperplane {
            normal,
            offset,
            scale: None,
        })
    }

    /// Hyperplane with an explicit distance scale `s > 0`.
    pub fn scaled_hyperplane(normal: Vec<f64>, offset: f64, scale: f64) -> Result<Self> {
        if !(scale > 0.0) {
            return Err(Error::InvalidParameter(format!("scale {scale} must be > 0")));
        }
        let mut set = Self::hyperplane(normal, offset)?;
        if let Self::Hyperplane { scale: s, .. } = &mut set {
            *s = Some(scale);
        }
        Ok(set)
    }

    pub fn box_boundary(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                expected: lower.len(),
                got: upper.len(),
            });
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l < u)) {
            return Err(Error::InvalidParameter("box needs lower < upper".into()));
        }
        Ok(Self::BoxBoundary { lower, upper })
    }

    pub fn complement(region: Region) -> Self {
        Self::RegionComplement { region }
    }

    pub fn union(members: Vec<AvoidanceSet>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::InvalidParameter("empty union".into()));
        }
        Ok(Self::Union { members })
    }

    /// Appends a point to a `FinitePoints` set.
    pub fn with_point(&self, p: Vec<f64>) -> Result<Self> {
        match self {
            Self::FinitePoints { points } => {
                let mut points = points.clone();
                points.push(p);
                Self::points(points)
            }
            _ => Err(Error::InvalidParameter(
                "only FinitePoints sets grow by points".into(),
            )),
        }
    }

    pub fn has_distance(&self) -> bool {
        match self {
            Self::RegionComplement { .. } => false,
            Self::Union { members } => members.iter().all(Self::has_distance),
            _ => true,
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Self::RegionComplement { region } => !region.contains(x),
            Self::Union { members } => members.iter().any(|m| m.contains(x)),
            _ => self.distance(x).map(|d| d == 0.0).unwrap_or(false),
        }
    }

    pub fn distance(&self, x: &[f64]) -> Result<f64> {
        Ok(match self {
            Self::FinitePoints { points } => points
                .iter()
                .map(|p| distance(x, p))
                .fold(f64::INFINITY, f64::min),
            Self::Hyperplane {
                normal,
                offset,
                scale,
            } => {
                let s = scale.unwrap_or_else(|| 1.0 / norm(normal));
                s * (dot(normal, x) - offset).abs()
            }
            Self::BoxBoundary { lower, upper } => box_distance(lower, upper, x).0,
            Self::RegionComplement { .. } => return Err(Error::NoDistance),
            Self::Union { members } => {
                let mut best = f64::INFINITY;
                for m in members {
                    best = best.min(m.distance(x)?);
                }
                best
            }
        })
    }

    /// Distance with derivatives. Ties go to the lowest-index point or
    /// member; on the set itself the derivatives are not meaningful.
    pub fn jet(&self, x: &[f64]) -> Result<DistanceJet> {
        let n = x.len();
        match self {
            Self::FinitePoints { points } => {
                let (mut best, mut k) = (f64::INFINITY, 0);
                for (i, p) in points.iter().enumerate() {
                    let d = distance(x, p);
                    if d < best {
                        best = d;
                        k = i;
                    }
                }
                let g: Vec<f64> = x.iter().zip(&points[k]).map(|(a, b)| (a - b) / best).collect();
                let mut h = SymMatrix::identity(n);
                h.add_outer(-1.0, &g);
                Ok(DistanceJet {
                    value: best,
                    hessian: h.scaled(1.0 / best),
                    gradient: g,
                })
            }
            Self::Hyperplane {
                normal,
                offset,
                scale,
            } => {
                let s = scale.unwrap_or_else(|| 1.0 / norm(normal));
                let r = dot(normal, x) - offset;
                let sign = if r < 0.0 { -1.0 } else { 1.0 };
                Ok(DistanceJet {
                    value: s * r.abs(),
                    gradient: normal.iter().map(|a| s * sign * a).collect(),
                    hessian: SymMatrix::zeros(n),
                })
            }
            Self::BoxBoundary { lower, upper } => {
                let (d, outside) = box_distance(lower, upper, x);
                if !outside {
                    // Nearest face: coordinate i at its lower or upper bound.
                    let mut g = vec![0.0; n];
                    let (mut best, mut face) = (f64::INFINITY, (0, 1.0));
                    for i in 0..n {
                        let lo = x[i] - lower[i];
                        let hi = upper[i] - x[i];
                        if lo < best {
                            best = lo;
                            face = (i, 1.0);
                        }
                        if hi < best {
                            best = hi;
                            face = (i, -1.0);
                        }
                    }
                    g[face.0] = face.1;
                    return Ok(DistanceJet {
                        value: d,
                        gradient: g,
                        hessian: SymMatrix::zeros(n),
                    });
                }
                let v: Vec<f64> = (0..n).map(|i| x[i] - x[i].clamp(lower[i], upper[i])).collect();
                let g: Vec<f64> = v.iter().map(|vi| vi / d).collect();
                let active: Vec<f64> = v.iter().map(|vi| if *vi != 0.0 { 1.0 } else { 0.0 }).collect();
                let mut h = SymMatrix::from_diagonal(&active);
                h.add_outer(-1.0, &g);
                Ok(DistanceJet {
                    value: d,
                    gradient: g,
                    hessian: h.scaled(1.0 / d),
                })
            }
            Self::RegionComplement { .. } => Err(Error::NoDistance),
            Self::Union { members } => {
                let mut best: Option<DistanceJet> = None;
                for m in members {
                    let j = m.jet(x)?;
                    if best.as_ref().is_none_or(|b| j.value < b.value) {
                        best = Some(j);
                    }
                }
                best.ok_or_else(|| Error::InvalidParameter("empty union".into()))
            }
        }
    }
}

/// Returns the distance to the box boundary and whether `x` is outside.
fn box_distance(lower: &[f64], upper: &[f64], x: &[f64]) -> (f64, bool) {
    let outside = x.iter().zip(lower.iter().zip(upper)).any(|(v, (l, u))| v < l || v > u);
    if outside {
        let d2: f64 = x
            .iter()
            .zip(lower.iter().zip(upper))
            .map(|(v, (l, u))| (v - v.clamp(*l, *u)).powi(2))
            .sum();
        (d2.sqrt(), true)
    } else {
        let d = x
            .iter()
            .zip(lower.iter().zip(upper))
            .map(|(v, (l, u))| (v - l).min(u - v))
            .fold(f64::INFINITY, f64::min);
        (d, false)
    }
}

/// The closed half-space `⟨a,x⟩ ≤ b`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HalfSpace {
    pub normal: Vec<f64>,
    pub bound: f64,
}

impl HalfSpace {
    pub fn new(normal: Vec<f64>, bound: f64) -> Self {
        Self { normal, bound }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        dot(&self.normal, x) <= self.bound
    }

    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        let excess = dot(&self.normal, x) - self.bound;
        if excess <= 0.0 {
            return x.to_vec();
        }
        let t = excess / dot(&self.normal, &self.normal);
        x.iter().zip(&self.normal).map(|(xi, ai)| xi - t * ai).collect()
    }
}

pub type PredicateFn = dyn Fn(&[f64]) -> bool + Send + Sync;

/// A membership predicate that is not expressible as a polyhedron or box.
#[derive(Clone)]
pub struct Predicate(pub Arc<PredicateFn>);

impl Predicate {
    pub fn new(f: impl Fn(&[f64]) -> bool + Send + Sync + 'static) -> Self {
        Self(Arc::new(f))
    }
}

/// Predicates compare equal only when they share the same closure.
impl PartialEq for Predicate {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }
}

impl fmt::Debug for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Predicate(..)")
    }
}

/// An allowed region. Closed polyhedra and boxes serialize; predicates do not.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Region {
    Polyhedron { half_spaces: Vec<HalfSpace> },
    Box { lower: Vec<f64>, upper: Vec<f64> },
    #[serde(skip)]
    Predicate(Predicate),
}

impl Region {
    pub fn half_space(normal: Vec<f64>, bound: f64) -> Self {
        Self::Polyhedron {
            half_spaces: vec![HalfSpace::new(normal, bound)],
        }
    }

    pub fn polyhedron(half_spaces: Vec<HalfSpace>) -> Self {
        Self::Polyhedron { half_spaces }
    }

    pub fn predicate(f: impl Fn(&[f64]) -> bool + Send + Sync + 'static) -> Self {
        Self::Predicate(Predicate::new(f))
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Self::Polyhedron { half_spaces } => half_spaces.iter().all(|h| h.contains(x)),
            Self::Box { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper))
                .all(|(v, (l, u))| *l <= *v && *v <= *u),
            Self::Predicate(p) => (p.0)(x),
        }
    }

    /// Euclidean projection onto the region. Closed form for one half-space
    /// and for boxes, Dykstra's alternating projections for polyhedra.
    /// Predicates have no projection.
    pub fn project(&self, x: &[f64]) -> Option<Vec<f64>> {
        match self {
            Self::Box { lower, upper } => Some(
                x.iter()
                    .zip(lower.iter().zip(upper))
                    .map(|(v, (l, u))| v.clamp(*l, *u))
                    .collect(),
            ),
            Self::Polyhedron { half_spaces } if half_spaces.len() == 1 => {
                Some(half_spaces[0].project(x))
            }
            Self::Polyhedron { half_spaces } => Some(dykstra(half_spaces, x)),
            Self::Predicate(_) => None,
        }
    }
}

fn dykstra(half_spaces: &[HalfSpace], x: &[f64]) -> Vec<f64> {
    let mut y = x.to_vec();
    let mut corrections = vec![vec![0.0; x.len()]; half_spaces.len()];
    for _ in 0..10_000 {
        let start = y.clone();
        for (h, c) in half_spaces.iter().zip(corrections.iter_mut()) {
            let shifted: Vec<f64> = y.iter().zip(c.iter()).map(|(a, b)| a + b).collect();
            let p = h.project(&shifted);
            for i in 0..y.len() {
                c[i] = shifted[i] - p[i];
            }
            y = p;
        }
        if distance(&start, &y) <= 1e-15 * (1.0 + norm(&y)) {
            break;
        }
    }
    y
}

/// Relaxes the equality `p(x) = 0` into the two inequalities `p(x) ≥ −ε` and
/// `p(x) ≤ ε`.
pub fn equality_relaxation(
    p: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    epsilon: f64,
) -> Result<(Predicate, Predicate)> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidParameter(format!("epsilon {epsilon} must be > 0")));
    }
    let p = Arc::new(p);
    let q = Arc::clone(&p);
    Ok((
        Predicate::new(move |x| p(x) >= -epsilon),
        Predicate::new(move |x| q(x) <= epsilon),
    ))
}
