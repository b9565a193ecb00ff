//! Exceptional points of the driven, dissipative two-level Bloch generator.
//!
//! The crate is organised bottom-up:
//!
//! - [`bloch`]: the 3×3 rotating-frame generator, its closed-form spectrum and
//!   the analytic degeneracy conditions.
//! - [`expm`]: matrix exponentials that stay accurate on defective matrices.
//! - [`propagator`]: polarization time series from the Bloch equation and from
//!   explicit mode sets, plus measurement noise.
//! - [`harminv`]: harmonic inversion (matrix pencil) and its confluent
//!   extension for polynomial-in-time amplitudes.
//! - [`locate`]: EP2 scans, valley ascend and the (p, q) root search for EP3.
//! - [`estimator`]: inversion of a located EP3 into system parameters.

pub mod bloch;
pub mod cubic;
pub mod error;
pub mod estimator;
pub mod expm;
pub mod harminv;
pub mod locate;
mod linalg;
mod optim;
pub mod propagator;

pub use num_complex::Complex64 as C64;

pub use bloch::{
    auxiliaries, build_matrix, char_coeffs, classify_region, discriminant_pq,
    eigenvalues_closed_form, ep3_locus, rates_to_controls, CharCoeffs, ControlParams,
    EpAuxiliaries, GeneratorMatrix, RateParams, Region, SpectrumTriple,
};
pub use error::{Error, Result};
pub use estimator::{
    branch_probe, estimate_at_ep3, gamma_from_frequencies, planted_pipeline, OffsetAxis, PhysicalParams,
    PlantedSetup,
};
pub use harminv::{
    extended_invert, frequency_gap_scan, standard_invert, InversionConfig, InversionReport,
};
pub use locate::{
    evaluate_f, root_search_pq, scan_ep2, seed_interior, valley_ascend, EpReport, Objective,
    ObjectiveMode, SearchTrace,
};
pub use propagator::{
    add_noise, expm_apply, simulate, synthesize, BlochState, Mode, ModeSet, TimeSeries,
};
