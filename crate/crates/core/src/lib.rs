//! Joint statistics of smeared wave amplitudes and photon counts for the
//! vacuum and single-photon states of a paraxial beam.
//!
//! A detector is reduced to three scalars: the vacuum amplitude width
//! `sigma`, the overlap `s` of the photon profile with the smearing function,
//! and the click probability `P`. Every distribution, correlation and
//! mutual-information value in the crate is a function of these.
//!
//! ```
//! use wavepart::{dists::MixedJointPdf, info, model::DetectorParams};
//!
//! let p = DetectorParams::real(1.0, 0.5, 0.4).unwrap();
//! let joint = MixedJointPdf::single(p.sigma, 0.5, 0.4).unwrap();
//! assert!(joint.density(0.0, 1).unwrap() > 0.0);
//! let i = info::mutual_info_wc(0.5, 0.4).unwrap();
//! assert!(i > 0.01);
//! ```
//!
//! Modules:
//! * [`model`]: beam, detector geometry and the derived scalars.
//! * [`dists`]: closed-form densities, masses, moments and correlations.
//! * [`info`]: entropies and mutual information.
//! * [`sampler`]: seeded exact samplers and empirical estimators.
//! * [`gridfock`]: a lattice Fock-space oracle for the operator algebra.
//! * [`config`]: JSON experiment descriptions.

pub mod config;
pub mod dists;
pub mod error;
pub mod gridfock;
pub mod info;
pub mod model;
pub mod numeric;
pub mod sampler;

pub use error::{Error, Result};
pub use model::DetectorParams;
pub use num_complex::Complex64;
