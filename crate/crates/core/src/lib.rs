//! Simulation of finite-outcome quantum measurements by randomized
//! projective measurements, with independently checkable certificates.

pub mod error;
pub mod finegrain;
pub mod linalg;
pub mod naimark;
pub mod noisysim;
pub mod partition;
pub mod pipeline;
pub mod povm;
pub mod random;
pub mod sampler_apps;
pub mod tol;

pub use error::{Error, Result};
pub use linalg::{Matrix, C64};
pub use povm::{Povm, SpWitness, StochasticMap};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/measurements.md")]
    mod measurements {}
    #[doc = include_str!("../../../book/src/finegraining.md")]
    mod finegraining {}
    #[doc = include_str!("../../../book/src/partitions.md")]
    mod partitions {}
    #[doc = include_str!("../../../book/src/dilations.md")]
    mod dilations {}
    #[doc = include_str!("../../../book/src/noisy.md")]
    mod noisy {}
    #[doc = include_str!("../../../book/src/certificates.md")]
    mod certificates {}
    #[doc = include_str!("../../../book/src/sampling.md")]
    mod sampling {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
