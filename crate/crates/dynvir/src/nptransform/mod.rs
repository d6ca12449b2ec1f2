//! Noise-preserving trajectory transformations: iterated-integral words and
//! their shuffle algebra, the generators `L_{n,(n₁…n_p)}^{ȧ,(a₁…a_p)}` with
//! their brackets, force changes, and finite Schrödinger-Virasoro maps.
//!
//! Time functions are [`TimePoly`] values. A letter stores the integrand
//! weight `ȧᵢ` rather than `aᵢ`; antiderivatives are taken to vanish at `t = 0`.

mod force;
mod generator;
mod path;
mod sv;
mod words;

use thiserror::Error;

pub use crate::boson::TimePoly;
pub use force::{
    delayed_force_change, force_change, simultaneous_force_change, single_particle_force_change, ForceChange,
};
pub use generator::{
    apply_np_transform, elementary_bracket, noise_condition_residual, numeric_commutator,
    numeric_commutator_richardson, NPElement, NPGenerator,
};
pub use path::{ParticleHistory, SampledPath};
pub use sv::{finite_sv_transform, proper_time, sv_bracket, AffineField, FiniteSv, SvGenerator};
pub use words::{evaluate_iterated, evaluate_iterated_with, shuffle_product, IIWord, Letter, Quadrature, WordSum};

#[derive(Debug, Error)]
pub enum NpError {
    #[error("a path needs dt > 0 and at least 3 finite samples")]
    InvalidPath,
    #[error("history of {len} values does not split into {n} particles")]
    HistoryShape { len: usize, n: usize },
    #[error("slot {slot} is outside a history of {slots} slots")]
    SlotOutOfRange { slot: usize, slots: usize },
    #[error("leading exponent {0} is below -1")]
    Exponent(i32),
    #[error("particles {i} and {j} are closer than the minimum gap")]
    Coincident { i: usize, j: usize },
    #[error("time change must vanish at t = 0, got {0}")]
    NotAnchored(f64),
    #[error("time change is not increasing near t = {0}")]
    NonMonotone(f64),
    #[error("vector field is outside the X/Y span")]
    OutsideSpan,
}
