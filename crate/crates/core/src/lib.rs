//! Kriging surrogate models of time-variant dynamical-system responses built
//! on functional dimension reduction (KFDR), plus the forward and inverse
//! uncertainty-quantification machinery that consumes them.
//!
//! Pipeline:
//!
//! 1. center the training curves and project them onto a Fourier or cubic
//!    B-spline basis with a roughness penalty ([`smoothing`]),
//! 2. solve the functional eigenproblem in the basis space and keep the
//!    leading latent functions ([`fpca`]),
//! 3. fit one ordinary Kriging model with a nugget per latent score
//!    ([`kriging`]), assembled into a [`surrogate::LatentSurrogate`],
//! 4. push input distributions through the surrogate or calibrate inputs
//!    against observed curves ([`uq`]).
//!
//! [`bench`] holds the Duffing and Bouc-Wen oscillators used for validation.

pub mod basis;
pub mod bench;
pub mod ensemble;
pub mod error;
pub mod fpca;
pub mod io;
pub mod kriging;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod rng;
pub mod sampling;
pub mod smoothing;
pub mod study;
pub mod surrogate;
pub mod uq;

pub use ensemble::{ResponseEnsemble, TimeGrid};
pub use error::{Error, Result};
pub use rng::RandomSource;
