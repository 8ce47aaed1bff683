//! Simulation, latent filtering, estimation and identifiability diagnostics
//! for four nonlinear time-series families:
//!
//! - AGARCH(1,1) with power 2,
//! - smooth-transition GARCH, STGARCH(p,q,d),
//! - integer-valued threshold GARCH (INTGARCH) and general Poisson autoregressions,
//! - multiple-regime smooth transition autoregression, STAR(p).
//!
//! The central object is the latent filter `h_t(θ)` (conditional variance,
//! intensity or mean) evaluated on a fixed observed series. Two parameter
//! points are observationally equivalent when their latent paths coincide;
//! [`ident`] searches for such points and classifies what it finds.

pub mod error;
pub mod estimate;
pub mod filter;
pub mod ident;
pub mod mixture;
pub mod model;
pub mod optim;
pub mod quadrature;
pub mod rng;
pub mod simulate;
pub mod space;
pub mod stationarity;

pub use error::{Error, ErrorKind, Result};
pub use model::{
    AgarchParams, Family, InnovationSpec, IntgarchParams, ModelParams, ParamDoc, StarParams,
    StgarchParams,
};
