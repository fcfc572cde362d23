//! Exact simulation of one-dimensional diffusions and diffusion bridges by
//! retrospective rejection sampling, with Brownian, Bessel and layered
//! Brownian-bridge candidates.

#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![cfg_attr(test, allow(clippy::excessive_precision))]

pub mod bessel;
pub mod brownian;
pub mod engine;
pub mod error;
pub mod layered;
pub mod model;
pub(crate) mod path;
pub mod quad;
pub mod real;
pub mod rng;
pub mod series;
pub mod special;
pub mod stats;

pub use error::{Error, Result};
pub use real::Real;

/// Scalar used by the samplers and the engine; the model and special-function
/// layers accept any [`Real`].
pub type Scalar = f64;
pub type Order = bessel::BesselOrder<Scalar>;
pub type Discrete = bessel::BesselDiscrete<Scalar>;
pub type Growth = model::GrowthModel<Scalar>;
pub type GrowthParams = model::GrowthModelParams<Scalar>;
pub type BrownianOrBessel = model::Candidate<Scalar>;
