pub mod avoidance;
pub mod basins;
pub mod config;
pub mod drivers;
pub mod error;
pub mod experiments;
pub mod functions;
pub mod numerics;
pub mod optimizers;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/objectives.md")]
    mod objectives {}
    #[doc = include_str!("../../../book/src/optimizers.md")]
    mod optimizers {}
    #[doc = include_str!("../../../book/src/walls.md")]
    mod walls {}
    #[doc = include_str!("../../../book/src/drivers.md")]
    mod drivers {}
    #[doc = include_str!("../../../book/src/basins.md")]
    mod basins {}
    #[doc = include_str!("../../../book/src/configs.md")]
    mod configs {}
}
