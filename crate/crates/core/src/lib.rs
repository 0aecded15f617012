//! Rate-splitting multigroup multicast beamforming for overloaded
//! multicarrier downlinks.
//!
//! The crate is organised bottom-up:
//!
//! * [`model`]: dimensions, channels, power budgets, precoders, persistence.
//! * [`channel`]: seeded i.i.d. `CN(0, 1)` channel draws.
//! * [`rates`]: SINRs, rates, MMSE equalizers, MSEs and WMMSE weights.
//! * [`conic`]: the second-order-cone precoder step and the SDR feasibility
//!   test, plus an interior-point backend.
//! * [`rs_wmmse`]: the alternating optimization with and without rate splitting.
//! * [`baselines`]: SDR max-min-fair beamforming and TDM (feature `sdp`).
//! * [`dof`]: analytic and empirical degrees of freedom.
//! * [`harness`]: Monte-Carlo experiments and CSV results (feature `harness`).

#[cfg(feature = "sdp")]
use openblas_src as _;

#[cfg(feature = "sdp")]
pub mod baselines;
pub mod channel;
pub mod conic;
pub mod dof;
pub mod error;
#[cfg(feature = "harness")]
pub mod harness;
pub mod model;
pub mod rates;
pub mod rs_wmmse;

pub use error::{Error, Result};
