//! Measurement-based quantum computing with two-dot spin-parity measurements
//! on singlet-triplet encoded quantum-dot qubits.
//!
//! The crate is organised around the pipeline from abstract joint-Pauli
//! measurement sequences down to six-dot device schedules:
//!
//! - [`pauli`] — exact algebra of Pauli words, parity projectors and the
//!   tunable non-Pauli projector. Everything else is built on top of it.
//! - [`sequencer`] — validates measurement sequences against the
//!   non-commutation rule and derives the induced data-qubit gate, both in
//!   closed form and by a brute-force projector-product oracle.
//! - [`spin`] — exact pure-state simulation of quantum-dot spins: exchange
//!   phase pulses, the three spin-parity measurement types, singlet
//!   re-initialisation, and logical decoding with leakage accounting.
//! - [`protocols`] — the gate protocols themselves: the measurement-based
//!   Hadamard, the exact entangling gate, and the asymmetric entangling gate
//!   with repeat-measurement recovery and Pauli-frame tracking.
//! - [`noise`] — seeded Monte Carlo over exchange-pulse and readout errors,
//!   producing measurement-count, infidelity and leakage distributions.
//! - [`device`] — compiles protocols to six-dot schedules for the four-sensor
//!   and two-sensor (linear) layouts, inserting SWAP chains where needed, and
//!   verifies schedule/abstract equivalence under shared randomness.
//! - [`cli`] — the command implementations behind the `spinparity` binary.

pub mod cli;
pub mod device;
pub mod noise;
pub mod pauli;
pub mod protocols;
pub mod sequencer;
pub mod spin;

pub use pauli::{
    parity_projector, pauli_product, pw_projector, strings_commute, PauliAxis, PauliString,
    PhasePower,
};
pub use sequencer::{
    classify_clifford, derive_sequence_oracle, derive_single_qubit_closed_form,
    enumerate_valid_single_qubit_gates, validate_sequence, MeasurementSequence, OutcomeVector,
};
pub use spin::{AsymMode, LogicalLayout, SpinRegister};

pub use protocols::{
    entangling_protocol_asym, entangling_protocol_exact, hadamard_protocol, PauliFrame,
    ProtocolTrace,
};
pub use noise::{run_ensemble, run_trial, ErrorModel, Histogram, TrialResult};
pub use device::{compile, simulate_schedule, verify_equivalence, DeviceLayout, Schedule};
