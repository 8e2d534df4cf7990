//! The measurement-based gate protocols on singlet-triplet encoded qubits.
//!
//! Three protocols are implemented on top of [`crate::spin`]:
//!
//! - [`hadamard_protocol`] — one data qubit plus one ancilla (four dots):
//!   π/2 pulses on both pairs, one exact spin-parity measurement on the inner
//!   dot pair, a singlet-triplet readout of the ancilla, and an
//!   outcome-dependent closing pulse. Up to the tracked Pauli-x correction the
//!   data qubit ends in `H|ψ⟩`.
//! - [`entangling_protocol_exact`] — two data qubits and a middle ancilla
//!   (six dots), using exact spin-parity measurements. Up to tracked
//!   corrections it applies the maximally entangling unitary of
//!   [`ideal_entangling_output`], taking `|00⟩ → (|00⟩ − |11⟩)/√2`.
//! - [`entangling_protocol_asym`] — the same gate with asymmetric spin-parity
//!   measurements only, plus the repeat-measurement recovery: a singlet
//!   outcome on the first entangling measurement triggers π-pulse/measure
//!   cycles until the pair comes back aligned, and an aligned outcome on the
//!   disentangling measurement triggers one swap-then-measure repeat. With
//!   [`FinalStep::Reinit`] the second parity and the disentangling
//!   measurement are replaced by singlet re-initialisation, which locks their
//!   outcomes and empties the Pauli frame.
//!
//! Outcome-dependent Pauli corrections are tracked classically in a
//! [`PauliFrame`] and applied to decoded logical states, never as physical
//! pulses. Every step of a run is recorded in a [`ProtocolTrace`] whose JSON
//! shape is stable.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::spin::{
    AsymMode, LogicalLayout, MeasRecord, MeasureDriver, PairSubspace, SpinError, SpinRegister,
};

const PI: f64 = std::f64::consts::PI;
const HALF_PI: f64 = std::f64::consts::FRAC_PI_2;
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Default cap on entangling repeat cycles; the tail decays as (1/3)^n so 64
/// cycles are unreachable in practice and indicate forced outcomes.
pub const DEFAULT_REPEAT_CAP: usize = 64;

/// Input leakage above this aborts a protocol run.
pub const INPUT_LEAKAGE_TOL: f64 = 1e-10;

/// Standard six-dot roles: Q1 = (D1,D2), ancilla = (D3,D4), Q2 = (D5,D6).
pub const Q1_PAIR: (usize, usize) = (0, 1);
pub const ANCILLA_PAIR: (usize, usize) = (2, 3);
pub const Q2_PAIR: (usize, usize) = (4, 5);

#[derive(Debug, Error, PartialEq)]
pub enum ProtocolError {
    #[error("input state leaks outside the logical subspace (weight {0:.3e})")]
    InputLeakage(f64),
    #[error("entangling repeat cap of {0} exceeded")]
    RepeatCapExceeded(usize),
    #[error(transparent)]
    Spin(#[from] SpinError),
}

/// Whether the second parity and the disentangling step are measured or
/// locked by singlet re-initialisation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum FinalStep {
    #[default]
    Measure,
    Reinit,
}

/// Options for the asymmetric entangling protocol.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymOptions {
    pub mode: AsymMode,
    pub final_step: FinalStep,
    pub repeat_cap: usize,
}

impl Default for AsymOptions {
    fn default() -> Self {
        AsymOptions {
            mode: AsymMode::ProjectiveRenormalized,
            final_step: FinalStep::Measure,
            repeat_cap: DEFAULT_REPEAT_CAP,
        }
    }
}

/// Pauli correction bits for one logical qubit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FrameBits {
    pub x: u8,
    pub z: u8,
}

/// Classical record of outcome-dependent Pauli corrections, one entry per
/// logical qubit (powers modulo 2).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PauliFrame {
    pub qubits: Vec<FrameBits>,
}

impl PauliFrame {
    pub fn identity(n_qubits: usize) -> Self {
        PauliFrame { qubits: vec![FrameBits::default(); n_qubits] }
    }

    pub fn is_identity(&self) -> bool {
        self.qubits.iter().all(|q| q.x == 0 && q.z == 0)
    }

    /// Apply the frame to logical amplitudes (X then Z per qubit; the global
    /// phase of the order choice is immaterial).
    pub fn apply(&self, amps: &[Complex64]) -> Vec<Complex64> {
        let k = self.qubits.len();
        assert_eq!(amps.len(), 1usize << k, "frame/state qubit count mismatch");
        let mut out = amps.to_vec();
        for (q, bits) in self.qubits.iter().enumerate() {
            if bits.x == 1 {
                out = apply_logical_pauli(&out, k, q, 'X');
            }
            if bits.z == 1 {
                out = apply_logical_pauli(&out, k, q, 'Z');
            }
        }
        out
    }
}

/// Apply a single-qubit Pauli to a logical amplitude vector over k qubits
/// (qubit 0 most significant).
pub fn apply_logical_pauli(amps: &[Complex64], k: usize, qubit: usize, axis: char) -> Vec<Complex64> {
    let dim = amps.len();
    let sh = k - 1 - qubit;
    let mut out = vec![ZERO; dim];
    for b in 0..dim {
        let bit = (b >> sh) & 1;
        let flip = b ^ (1 << sh);
        match axis {
            'I' => out[b] += amps[b],
            'X' => out[flip] += amps[b],
            'Y' => out[flip] += amps[b] * Complex64::new(0.0, if bit == 0 { 1.0 } else { -1.0 }),
            'Z' => out[b] += amps[b] * Complex64::new(if bit == 0 { 1.0 } else { -1.0 }, 0.0),
            other => panic!("not a pauli axis: {other}"),
        }
    }
    out
}

/// Kind tag of a trace step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepKind {
    Pulse,
    Measurement,
    Reinit,
}

/// One recorded step of a protocol run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceStep {
    pub kind: StepKind,
    pub dots: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub angle: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub meas: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub outcome: Option<u8>,
    /// Probability of outcome 0 at decision time (diagnostics).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p0: Option<f64>,
    pub repeat_index: usize,
    /// Data-qubit leakage weight after this step.
    pub leakage: f64,
}

/// Recorded protocol outcomes; entries are `None` for steps replaced by
/// re-initialisation (or absent from the protocol).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordedOutcomes {
    pub s1: Option<u8>,
    pub s2: Option<u8>,
    pub s3: Option<u8>,
}

/// Ordered record of one protocol execution.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProtocolTrace {
    pub steps: Vec<TraceStep>,
    pub outcomes: RecordedOutcomes,
    pub n_measurements: usize,
    pub n_pulses: usize,
    pub frame: PauliFrame,
    pub entangling_repeats: usize,
    pub disentangling_repeats: usize,
}

impl ProtocolTrace {
    fn new(n_logical: usize) -> Self {
        ProtocolTrace {
            steps: Vec::new(),
            outcomes: RecordedOutcomes::default(),
            n_measurements: 0,
            n_pulses: 0,
            frame: PauliFrame::identity(n_logical),
            entangling_repeats: 0,
            disentangling_repeats: 0,
        }
    }
}

/// Step executor binding a register, a driver and the trace together.
struct Exec<'a> {
    reg: &'a mut SpinRegister,
    driver: &'a mut dyn MeasureDriver,
    trace: ProtocolTrace,
    data_layout: LogicalLayout,
}

impl<'a> Exec<'a> {
    fn new(
        reg: &'a mut SpinRegister,
        driver: &'a mut dyn MeasureDriver,
        data_pairs: Vec<(usize, usize)>,
    ) -> Result<Self, ProtocolError> {
        let data_layout = LogicalLayout::new(data_pairs)?;
        let n = data_layout.n_qubits();
        Ok(Exec { reg, driver, trace: ProtocolTrace::new(n), data_layout })
    }

    fn leakage(&self) -> f64 {
        self.reg.leakage_weight(&self.data_layout).unwrap_or(1.0)
    }

    fn pulse(&mut self, pair: (usize, usize), nominal: f64, repeat_index: usize) -> Result<(), ProtocolError> {
        let angle = self.driver.pulse_angle(nominal);
        self.reg.exchange_pulse(pair, angle)?;
        self.trace.n_pulses += 1;
        let leakage = self.leakage();
        self.trace.steps.push(TraceStep {
            kind: StepKind::Pulse,
            dots: vec![pair.0, pair.1],
            angle: Some(angle),
            meas: None,
            label: None,
            outcome: None,
            p0: None,
            repeat_index,
            leakage,
        });
        Ok(())
    }

    fn measure(
        &mut self,
        pair: (usize, usize),
        kind: MeasKind,
        label: &str,
        repeat_index: usize,
    ) -> Result<MeasRecord, ProtocolError> {
        let rec = match kind {
            MeasKind::ParityExact => self.reg.measure_parity_exact(pair, self.driver)?,
            MeasKind::ParityAsym(mode) => self.reg.measure_parity_asym(pair, self.driver, mode)?,
            MeasKind::SingletTriplet => self.reg.measure_st(pair, self.driver)?,
        };
        self.trace.n_measurements += 1;
        let leakage = self.leakage();
        self.trace.steps.push(TraceStep {
            kind: StepKind::Measurement,
            dots: vec![pair.0, pair.1],
            angle: None,
            meas: Some(kind.name().to_string()),
            label: Some(label.to_string()),
            outcome: Some(rec.recorded),
            p0: Some(rec.p0),
            repeat_index,
            leakage,
        });
        Ok(rec)
    }

    /// Renormalized singlet re-initialisation: project the pair onto |S⟩.
    /// Locks the step's outcome to "singlet found" without a classical record.
    fn reinit(&mut self, pair: (usize, usize), label: &str) -> Result<(), ProtocolError> {
        self.reg.project_pair(pair, PairSubspace::Singlet, None)?;
        let leakage = self.leakage();
        self.trace.steps.push(TraceStep {
            kind: StepKind::Reinit,
            dots: vec![pair.0, pair.1],
            angle: None,
            meas: None,
            label: Some(label.to_string()),
            outcome: None,
            p0: None,
            repeat_index: 0,
            leakage,
        });
        Ok(())
    }

    fn check_input_leakage(&self) -> Result<(), ProtocolError> {
        let leak = self.leakage();
        if leak > INPUT_LEAKAGE_TOL {
            return Err(ProtocolError::InputLeakage(leak));
        }
        Ok(())
    }
}

#[derive(Clone, Copy)]
enum MeasKind {
    ParityExact,
    ParityAsym(AsymMode),
    SingletTriplet,
}

impl MeasKind {
    fn name(self) -> &'static str {
        match self {
            MeasKind::ParityExact => "parity_exact",
            MeasKind::ParityAsym(_) => "parity_asym",
            MeasKind::SingletTriplet => "st",
        }
    }
}

fn sign(bit: u8) -> f64 {
    if bit & 1 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Measurement-based Hadamard on one data qubit.
///
/// Expects the data pair in the logical subspace and the ancilla pair in
/// |+⟩. Records the frame `X^{s1+s2}`; the frame-corrected output is `H|ψ⟩`
/// up to global phase, and the run is leakage-free throughout.
pub fn hadamard_protocol(
    reg: &mut SpinRegister,
    data: (usize, usize),
    ancilla: (usize, usize),
    driver: &mut dyn MeasureDriver,
) -> Result<ProtocolTrace, ProtocolError> {
    let mut ex = Exec::new(reg, driver, vec![data])?;
    ex.check_input_leakage()?;

    ex.pulse(data, HALF_PI, 0)?;
    ex.pulse(ancilla, HALF_PI, 0)?;
    let s1 = ex.measure((data.1, ancilla.0), MeasKind::ParityExact, "s1", 0)?.recorded;
    let s2 = ex.measure(ancilla, MeasKind::SingletTriplet, "s2", 0)?.recorded;
    // Closing pulse sign: +(−1)^{s1+s2}π/2 under this crate's exchange
    // convention e^{iθ}|S⟩⟨S| + Π_T.
    ex.pulse(data, sign(s1 + s2) * HALF_PI, 0)?;

    ex.trace.outcomes = RecordedOutcomes { s1: Some(s1), s2: Some(s2), s3: None };
    ex.trace.frame.qubits[0].x = (s1 + s2) & 1;
    Ok(ex.trace)
}

/// Exact-measurement entangling gate on two data qubits around a middle
/// ancilla initialised to |S⟩.
///
/// Frame: `X^{1−s2}` on q1 and `X^{s2 XNOR s3}` on q2 (the disentangling
/// outcome enters in the triplet=0 convention). The frame-corrected output is
/// [`ideal_entangling_output`] of the input, and the ancilla pair factorises
/// exactly after the final measurement.
pub fn entangling_protocol_exact(
    reg: &mut SpinRegister,
    q1: (usize, usize),
    ancilla: (usize, usize),
    q2: (usize, usize),
    driver: &mut dyn MeasureDriver,
) -> Result<ProtocolTrace, ProtocolError> {
    let mut ex = Exec::new(reg, driver, vec![q1, q2])?;
    ex.check_input_leakage()?;

    ex.pulse(q1, HALF_PI, 0)?;
    let s1 = ex.measure((q1.1, ancilla.0), MeasKind::ParityExact, "s1", 0)?.recorded;
    ex.pulse(ancilla, sign(s1) * HALF_PI, 0)?;
    let s2 = ex.measure((ancilla.1, q2.0), MeasKind::ParityExact, "s2", 0)?.recorded;
    ex.pulse(q1, sign(s2) * HALF_PI, 0)?;
    let s3 = ex.measure(ancilla, MeasKind::SingletTriplet, "s3", 0)?.recorded;

    ex.trace.outcomes = RecordedOutcomes { s1: Some(s1), s2: Some(s2), s3: Some(s3) };
    ex.trace.frame.qubits[0].x = 1 - s2;
    ex.trace.frame.qubits[1].x = u8::from(s2 == s3);
    Ok(ex.trace)
}

/// Asymmetric-measurement entangling gate with repeat-measurement recovery.
///
/// A singlet record on the first entangling measurement starts π-pulse/
/// re-measure cycles on the same inter-qubit pair until the record comes back
/// aligned. With [`FinalStep::Measure`], an aligned record on the
/// disentangling measurement triggers one swap-then-measure repeat, after
/// which the singlet record is certain; the frame is `X^{1−s2}` on both
/// qubits. With [`FinalStep::Reinit`], the second parity and the
/// disentangling measurement are replaced by singlet re-initialisation,
/// locking both outcomes; no frame correction remains.
pub fn entangling_protocol_asym(
    reg: &mut SpinRegister,
    q1: (usize, usize),
    ancilla: (usize, usize),
    q2: (usize, usize),
    driver: &mut dyn MeasureDriver,
    opts: &AsymOptions,
) -> Result<ProtocolTrace, ProtocolError> {
    let meas = MeasKind::ParityAsym(opts.mode);
    let mut ex = Exec::new(reg, driver, vec![q1, q2])?;
    ex.check_input_leakage()?;

    ex.pulse(q1, HALF_PI, 0)?;
    let s1 = ex.measure((q1.1, ancilla.0), meas, "s1", 0)?.recorded;

    if s1 == 1 {
        // Singlet found: recover by π pulses on Q1 and re-measurement of the
        // same inter-qubit pair until the aligned record returns.
        let mut recovered = false;
        for k in 1..=opts.repeat_cap {
            ex.pulse(q1, PI, k)?;
            let r = ex.measure((q1.1, ancilla.0), meas, "s1_repeat", k)?.recorded;
            ex.trace.entangling_repeats += 1;
            if r == 0 {
                recovered = true;
                break;
            }
        }
        if !recovered {
            return Err(ProtocolError::RepeatCapExceeded(opts.repeat_cap));
        }
    }

    ex.pulse(ancilla, sign(s1) * HALF_PI, 0)?;

    match opts.final_step {
        FinalStep::Measure => {
            let s2 = ex.measure((ancilla.1, q2.0), meas, "s2", 0)?.recorded;
            ex.pulse(q1, sign(s1 + s2) * HALF_PI, 0)?;
            let s3 = ex.measure(ancilla, meas, "s3", 0)?.recorded;
            if s3 == 0 {
                // Aligned ancilla: swap one ancilla dot with a Q2 dot and
                // measure once more; the singlet outcome is then certain.
                ex.pulse((ancilla.1, q2.0), PI, 1)?;
                ex.measure(ancilla, meas, "s3_repeat", 1)?;
                ex.trace.disentangling_repeats = 1;
            }
            ex.trace.outcomes = RecordedOutcomes { s1: Some(s1), s2: Some(s2), s3: Some(s3) };
            ex.trace.frame.qubits[0].x = 1 - s2;
            ex.trace.frame.qubits[1].x = 1 - s2;
        }
        FinalStep::Reinit => {
            // Initialisation-by-decay locks the second parity and the
            // disentangling outcomes to the singlet; no corrections remain.
            ex.reinit((ancilla.1, q2.0), "s2_reinit")?;
            ex.pulse(q1, sign(s1 + 1) * HALF_PI, 0)?;
            ex.reinit(ancilla, "s3_reinit")?;
            ex.trace.outcomes = RecordedOutcomes { s1: Some(s1), s2: None, s3: None };
        }
    }
    Ok(ex.trace)
}

/// Repeat requirements by recorded outcome triple: the entangling repeat
/// column is `s1 = 1`; the disentangling column keys the first disentangling
/// record in the singlet-triplet convention (1 = triplet found = repeated).
/// Rows `(s1, 0, 0)` have measurement probability zero and return `None`.
pub fn required_repeats(s1: u8, s2: u8, s3: u8) -> (bool, Option<bool>) {
    let entangling = s1 & 1 == 1;
    let disentangling = match (s2 & 1, s3 & 1) {
        (0, 0) => None,
        (0, 1) => Some(s1 & 1 == 1), // (1,0,1) kept as tabulated; see tests
        (1, 0) => Some(false),
        (1, 1) => Some(true),
        _ => unreachable!(),
    };
    (entangling, disentangling)
}

/// Reference output of the entangling protocols for given outcome labels:
/// the gate chain CNOT, X and H on q1, CNOT, then the outcome corrections
/// `X^{1−s2}` on q1 and `X^{|s2−s3|}` on q2.
pub fn expected_corrected_output(input: &[Complex64], s2: u8, s3: u8) -> Vec<Complex64> {
    assert_eq!(input.len(), 4);
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let cnot = |v: &[Complex64]| vec![v[0], v[1], v[3], v[2]];
    let mut v = cnot(input);
    v = apply_logical_pauli(&v, 2, 0, 'X');
    let h1 = vec![
        (v[0] + v[2]) * r,
        (v[1] + v[3]) * r,
        (v[0] - v[2]) * r,
        (v[1] - v[3]) * r,
    ];
    let mut v = cnot(&h1);
    if (1 - (s2 & 1)) == 1 {
        v = apply_logical_pauli(&v, 2, 0, 'X');
    }
    if (s2 & 1) != (s3 & 1) {
        v = apply_logical_pauli(&v, 2, 1, 'X');
    }
    v
}

/// The corrections-free entangling gate output: `expected_corrected_output`
/// at locked outcomes s2 = s3 = 1. Maps |00⟩ → (|00⟩−|11⟩)/√2.
pub fn ideal_entangling_output(input: &[Complex64]) -> Vec<Complex64> {
    expected_corrected_output(input, 1, 1)
}

/// Reference output of the Hadamard protocol: `X^{s1+s2} H |ψ⟩`.
pub fn hadamard_output(input: &[Complex64], s1: u8, s2: u8) -> Vec<Complex64> {
    assert_eq!(input.len(), 2);
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let mut v = vec![(input[0] + input[1]) * r, (input[0] - input[1]) * r];
    if (s1 + s2) & 1 == 1 {
        v = apply_logical_pauli(&v, 1, 0, 'X');
    }
    v
}

/// Six-dot register: Q1 and Q2 carry an arbitrary two-qubit logical state,
/// the middle ancilla pair is |S⟩.
pub fn two_qubit_register(logical: &[Complex64]) -> Result<SpinRegister, SpinError> {
    assert_eq!(logical.len(), 4);
    let one = Complex64::new(1.0, 0.0);
    let mut terms: Vec<(Complex64, SpinRegister)> = Vec::new();
    for (m, &c) in logical.iter().enumerate() {
        if c.norm_sqr() < 1e-30 {
            continue;
        }
        let q1 = basis_pair(m >> 1 & 1);
        let q2 = basis_pair(m & 1);
        let reg = SpinRegister::product_of_pairs(
            6,
            &[
                (Q1_PAIR, q1),
                (ANCILLA_PAIR, crate::spin::pair_amplitudes(one, ZERO)),
                (Q2_PAIR, q2),
            ],
        )?;
        terms.push((c, reg));
    }
    let refs: Vec<(Complex64, &SpinRegister)> = terms.iter().map(|(c, r)| (*c, r)).collect();
    SpinRegister::superpose(&refs)
}

/// Four-dot register: data pair carries (a, b) in the logical basis, ancilla
/// pair in the given state.
pub fn one_qubit_register(
    a: Complex64,
    b: Complex64,
    ancilla: [Complex64; 4],
) -> Result<SpinRegister, SpinError> {
    SpinRegister::product_of_pairs(
        4,
        &[((0, 1), crate::spin::pair_amplitudes(a, b)), ((2, 3), ancilla)],
    )
}

fn basis_pair(bit: usize) -> [Complex64; 4] {
    let one = Complex64::new(1.0, 0.0);
    if bit == 0 {
        crate::spin::pair_amplitudes(one, ZERO)
    } else {
        crate::spin::pair_amplitudes(ZERO, one)
    }
}

/// Data layout of the six-dot protocols.
pub fn data_layout() -> LogicalLayout {
    LogicalLayout::new(vec![Q1_PAIR, Q2_PAIR]).expect("disjoint pairs")
}
