//! Probabilistic regression trees with missing-covariate support.

pub mod cart;
pub mod data;
pub mod error;
pub mod estimation;
pub mod io;
pub mod kernels;
pub mod simbench;
pub mod tree;

pub use data::{Dataset, Observation};
pub use error::{Error, Result};
pub use estimation::{fit, ControlParams, FitResult, ProxyCrit};
pub use kernels::{KernelFamily, KernelSpec};
pub use tree::{compute_p, predict, FillType, Matrix, PrTree, Region};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/kernels.md")]
    mod kernels {}
    #[doc = include_str!("../../../book/src/trees.md")]
    mod trees {}
    #[doc = include_str!("../../../book/src/fitting.md")]
    mod fitting {}
    #[doc = include_str!("../../../book/src/cart.md")]
    mod cart {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/files.md")]
    mod files {}
}
