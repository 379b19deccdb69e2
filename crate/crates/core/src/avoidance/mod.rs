//! Avoidance sets and the wall transforms built on them.

mod sets;
mod walls;

pub use sets::{equality_relaxation, AvoidanceSet, DistanceJet, HalfSpace, Predicate, PredicateFn, Region};
pub use walls::{
    constant_wall, constant_wall_with, penalty_h1, penalty_h2, pole_wall, product_pole_wall,
    Transform, TransformedObjective, WallDerivatives,
};
