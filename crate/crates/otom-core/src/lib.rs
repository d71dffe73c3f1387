//! Builds the out-of-time-order matrix (OTOM) — the Choi state of an
//! out-of-time-order quantum process — for arbitrary system–probe unitaries,
//! and computes its information-theoretic chaos signatures (QMI, CQMI,
//! logarithmic negativity, the Δ metric).
//!
//! Conventions used throughout (also recorded in CLI output metadata):
//! - all logarithms/entropies are base 2 (bits);
//! - Heisenberg frame for the evolved butterfly generator: Z_t = U_t† (σ_z ⊗ 1) U_t
//!   (calibrated against the direct operator composition, see `otom` tests);
//! - OTOM wire order is [a_i, b_o, b_i, c_o];
//! - entanglement measure is logarithmic negativity across (a_i b_o : b_i c_o).

pub mod error;
pub mod experiments;
pub mod infotheory;
pub mod kicked_rotor;
pub mod otom;
pub mod quantum;
pub mod tensor;

pub use error::{Error, Result};
