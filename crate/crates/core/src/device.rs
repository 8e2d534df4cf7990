//! Six-dot device schedules: compilation of the asymmetric entangling
//! protocol onto sensor layouts, schedule execution, and schedule/abstract
//! equivalence checking.
//!
//! Two layouts are supported. The four-sensor layout reads every measurement
//! directly: M3 (coupled to D3) serves the first entangling parity and the
//! disentangling step, M4 (coupled to D4) the second parity, M1/M2 the outer
//! dots. The two-sensor linear layout has only M1 (D1) and M2 (D6), so the
//! compiler inserts exchange-π SWAP chains that move the measured pair next
//! to a sensor: contents D1↔D3 around the first parity (read via M1),
//! contents D4↔D6 around the second (read via M2), and a final chain that
//! exchanges qubit Q2 with the ancilla (contents D3↔D6 and D4↔D5) so the
//! disentangling step and its swap-then-measure repeat both sit under M2.
//! The first two chains are restored after their measurement windows; the
//! final chain is not, and the schedule's `output_pairs` records where the
//! data qubits end up.
//!
//! Inserted SWAPs are exact two-spin swaps (θ = π exchange), so a schedule
//! consumes the same measurement draws in the same order as the abstract
//! protocol: with a shared random stream the two runs realise identical
//! outcomes and identical corrected logical outputs. Singlet
//! re-initialisations are detuning operations and need no sensor, so the
//! reinit variant compiles without the second and third chains.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::noise::random_logical;
use crate::protocols::{
    data_layout, entangling_protocol_asym, two_qubit_register, AsymOptions, FinalStep, FrameBits,
    PauliFrame, ProtocolError, ProtocolTrace, RecordedOutcomes, StepKind, TraceStep,
    ANCILLA_PAIR, DEFAULT_REPEAT_CAP, Q1_PAIR, Q2_PAIR,
};
use crate::spin::{
    state_fidelity, AsymMode, IdealDriver, LogicalLayout, MeasureDriver, SpinError, SpinRegister,
};

const PI: f64 = std::f64::consts::PI;
const HALF_PI: f64 = std::f64::consts::FRAC_PI_2;

#[derive(Debug, Error, PartialEq)]
pub enum DeviceError {
    #[error("unsupported protocol {0:?}")]
    UnsupportedProtocol(String),
    #[error("layout has no sensor coupled to dot {0}")]
    MissingSensor(usize),
    #[error("conditional references unmeasured outcome {0:?}")]
    UnknownOutcome(String),
    #[error("repeat block {0:?} exceeded its cap of {1}")]
    RepeatCapExceeded(String, usize),
    #[error(transparent)]
    Spin(#[from] SpinError),
    #[error("protocol error: {0}")]
    Protocol(String),
}

impl From<ProtocolError> for DeviceError {
    fn from(e: ProtocolError) -> Self {
        DeviceError::Protocol(e.to_string())
    }
}

/// Sensor bookkeeping: an id and the dot it is coupled to. No readout
/// physics is modelled.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sensor {
    pub id: String,
    pub coupled_dot: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LayoutVariant {
    Ideal,
    Linear,
}

/// A six-dot device: D1..D6 as dots 0..5 plus its sensing dots.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeviceLayout {
    pub variant: LayoutVariant,
    pub sensors: Vec<Sensor>,
}

impl DeviceLayout {
    /// Four sensors: M1↔D1, M2↔D6, M3↔D3, M4↔D4.
    pub fn ideal() -> Self {
        DeviceLayout {
            variant: LayoutVariant::Ideal,
            sensors: vec![
                Sensor { id: "M1".into(), coupled_dot: 0 },
                Sensor { id: "M2".into(), coupled_dot: 5 },
                Sensor { id: "M3".into(), coupled_dot: 2 },
                Sensor { id: "M4".into(), coupled_dot: 3 },
            ],
        }
    }

    /// Two outer sensors only: M1↔D1, M2↔D6.
    pub fn linear() -> Self {
        DeviceLayout {
            variant: LayoutVariant::Linear,
            sensors: vec![
                Sensor { id: "M1".into(), coupled_dot: 0 },
                Sensor { id: "M2".into(), coupled_dot: 5 },
            ],
        }
    }

    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "ideal" => Some(DeviceLayout::ideal()),
            "linear" => Some(DeviceLayout::linear()),
            _ => None,
        }
    }

    /// Sensor coupled to the given dot.
    pub fn sensor_at(&self, dot: usize) -> Option<&Sensor> {
        self.sensors.iter().find(|s| s.coupled_dot == dot)
    }

    fn require_sensor(&self, dot: usize) -> Result<String, DeviceError> {
        self.sensor_at(dot).map(|s| s.id.clone()).ok_or(DeviceError::MissingSensor(dot))
    }
}

/// Protocols the compiler accepts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProtocolKind {
    EntanglingAsym,
}

/// Outcome-dependent pulse angle: `base · (−1)^{Σ recorded[label]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngleSpec {
    pub base: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sign_outcomes: Vec<String>,
}

impl AngleSpec {
    fn fixed(base: f64) -> Self {
        AngleSpec { base, sign_outcomes: vec![] }
    }

    fn signed(base: f64, labels: &[&str]) -> Self {
        AngleSpec { base, sign_outcomes: labels.iter().map(|s| s.to_string()).collect() }
    }

    fn resolve(&self, outcomes: &HashMap<String, u8>) -> Result<f64, DeviceError> {
        let mut angle = self.base;
        for label in &self.sign_outcomes {
            let bit = outcomes.get(label).ok_or_else(|| DeviceError::UnknownOutcome(label.clone()))?;
            if bit & 1 == 1 {
                angle = -angle;
            }
        }
        Ok(angle)
    }
}

/// Execution predicate over previously recorded outcomes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Cond {
    OutcomeEq { label: String, value: u8 },
}

impl Cond {
    fn holds(&self, outcomes: &HashMap<String, u8>) -> Result<bool, DeviceError> {
        match self {
            Cond::OutcomeEq { label, value } => outcomes
                .get(label)
                .map(|b| b == value)
                .ok_or_else(|| DeviceError::UnknownOutcome(label.clone())),
        }
    }
}

/// One schedule step. Measurement kinds mirror the spin-level operations;
/// `Reinit` is a detuning operation and carries no sensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "kebab-case")]
pub enum Step {
    Pulse {
        dots: (usize, usize),
        angle: AngleSpec,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cond: Option<Cond>,
        /// Compiler tag; SWAP-chain pulses carry `swap:<chain>` tags.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tag: Option<String>,
    },
    ParityMeas {
        dots: (usize, usize),
        sensor: String,
        label: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cond: Option<Cond>,
    },
    StMeas {
        dots: (usize, usize),
        sensor: String,
        label: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cond: Option<Cond>,
    },
    Reinit {
        dots: (usize, usize),
        label: String,
    },
    /// Run `body` up to `cap` times until the body's measurement `label`
    /// records `exit_value`. Entered only when `cond` holds.
    RepeatUntil {
        label: String,
        exit_value: u8,
        cap: usize,
        body: Vec<Step>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cond: Option<Cond>,
    },
}

/// A compiled device schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub protocol: ProtocolKind,
    pub layout: LayoutVariant,
    pub final_step: FinalStep,
    pub asym_mode: AsymMode,
    pub n_dots: usize,
    pub steps: Vec<Step>,
    /// Physical dot pairs holding (Q1, Q2) when the schedule ends.
    pub output_pairs: Vec<(usize, usize)>,
}

impl Schedule {
    /// Pauli frame implied by the recorded outcomes, matching the abstract
    /// protocol's rule.
    pub fn frame(&self, outcomes: &HashMap<String, u8>) -> PauliFrame {
        let mut frame = PauliFrame::identity(2);
        if self.final_step == FinalStep::Measure {
            if let Some(&s2) = outcomes.get("s2") {
                frame.qubits[0] = FrameBits { x: 1 - (s2 & 1), z: 0 };
                frame.qubits[1] = FrameBits { x: 1 - (s2 & 1), z: 0 };
            }
        }
        frame
    }

    /// Count of pulses tagged as part of a given SWAP chain.
    pub fn swap_pulses_tagged(&self, tag_prefix: &str) -> usize {
        fn walk(steps: &[Step], prefix: &str, acc: &mut usize) {
            for s in steps {
                match s {
                    Step::Pulse { tag: Some(t), .. } if t.starts_with(prefix) => *acc += 1,
                    Step::RepeatUntil { body, .. } => walk(body, prefix, acc),
                    _ => {}
                }
            }
        }
        let mut n = 0;
        walk(&self.steps, tag_prefix, &mut n);
        n
    }

    /// All distinct SWAP-chain tags in order of first appearance.
    pub fn swap_chain_tags(&self) -> Vec<String> {
        fn walk(steps: &[Step], acc: &mut Vec<String>) {
            for s in steps {
                match s {
                    Step::Pulse { tag: Some(t), .. } if t.starts_with("swap:") => {
                        if !acc.contains(t) {
                            acc.push(t.clone());
                        }
                    }
                    Step::RepeatUntil { body, .. } => walk(body, acc),
                    _ => {}
                }
            }
        }
        let mut tags = Vec::new();
        walk(&self.steps, &mut tags);
        tags
    }
}

/// Adjacent-swap realisation of a contents-exchange between two (possibly
/// non-adjacent) dots of a linear array.
fn exchange_chain(a: usize, b: usize, tag: &str) -> Vec<Step> {
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    // Walk the content at `lo` up to `hi`, then the displaced ones back.
    let mut pulses: Vec<(usize, usize)> = Vec::new();
    for d in lo..hi {
        pulses.push((d, d + 1));
    }
    for d in (lo..hi - 1).rev() {
        pulses.push((d, d + 1));
    }
    pulses
        .into_iter()
        .map(|dots| Step::Pulse {
            dots,
            angle: AngleSpec::fixed(PI),
            cond: None,
            tag: Some(tag.to_string()),
        })
        .collect()
}

/// Compile a protocol onto a device layout.
pub fn compile(
    kind: ProtocolKind,
    layout: &DeviceLayout,
    final_step: FinalStep,
    asym_mode: AsymMode,
) -> Result<Schedule, DeviceError> {
    let ProtocolKind::EntanglingAsym = kind;
    match layout.variant {
        LayoutVariant::Ideal => compile_ideal(layout, final_step, asym_mode),
        LayoutVariant::Linear => compile_linear(layout, final_step, asym_mode),
    }
}

fn compile_ideal(
    layout: &DeviceLayout,
    final_step: FinalStep,
    asym_mode: AsymMode,
) -> Result<Schedule, DeviceError> {
    let m3 = layout.require_sensor(2)?;
    let m4 = layout.require_sensor(3)?;
    let mut steps = vec![
        Step::Pulse { dots: Q1_PAIR, angle: AngleSpec::fixed(HALF_PI), cond: None, tag: None },
        Step::ParityMeas { dots: (1, 2), sensor: m3.clone(), label: "s1".into(), cond: None },
        Step::RepeatUntil {
            label: "s1_repeat".into(),
            exit_value: 0,
            cap: DEFAULT_REPEAT_CAP,
            cond: Some(Cond::OutcomeEq { label: "s1".into(), value: 1 }),
            body: vec![
                Step::Pulse { dots: Q1_PAIR, angle: AngleSpec::fixed(PI), cond: None, tag: None },
                Step::ParityMeas {
                    dots: (1, 2),
                    sensor: m3.clone(),
                    label: "s1_repeat".into(),
                    cond: None,
                },
            ],
        },
        Step::Pulse {
            dots: ANCILLA_PAIR,
            angle: AngleSpec::signed(HALF_PI, &["s1"]),
            cond: None,
            tag: None,
        },
    ];
    match final_step {
        FinalStep::Measure => {
            steps.extend([
                Step::ParityMeas { dots: (3, 4), sensor: m4, label: "s2".into(), cond: None },
                Step::Pulse {
                    dots: Q1_PAIR,
                    angle: AngleSpec::signed(HALF_PI, &["s1", "s2"]),
                    cond: None,
                    tag: None,
                },
                Step::ParityMeas { dots: (2, 3), sensor: m3.clone(), label: "s3".into(), cond: None },
                Step::Pulse {
                    dots: (3, 4),
                    angle: AngleSpec::fixed(PI),
                    cond: Some(Cond::OutcomeEq { label: "s3".into(), value: 0 }),
                    tag: None,
                },
                Step::ParityMeas {
                    dots: (2, 3),
                    sensor: m3,
                    label: "s3_repeat".into(),
                    cond: Some(Cond::OutcomeEq { label: "s3".into(), value: 0 }),
                },
            ]);
        }
        FinalStep::Reinit => {
            steps.extend([
                Step::Reinit { dots: (3, 4), label: "s2_reinit".into() },
                Step::Pulse {
                    dots: Q1_PAIR,
                    angle: AngleSpec::signed(-HALF_PI, &["s1"]),
                    cond: None,
                    tag: None,
                },
                Step::Reinit { dots: ANCILLA_PAIR, label: "s3_reinit".into() },
            ]);
        }
    }
    Ok(Schedule {
        protocol: ProtocolKind::EntanglingAsym,
        layout: LayoutVariant::Ideal,
        final_step,
        asym_mode,
        n_dots: 6,
        steps,
        output_pairs: vec![Q1_PAIR, Q2_PAIR],
    })
}

fn compile_linear(
    layout: &DeviceLayout,
    final_step: FinalStep,
    asym_mode: AsymMode,
) -> Result<Schedule, DeviceError> {
    let m1 = layout.require_sensor(0)?;
    let m2 = layout.require_sensor(5)?;

    // Chain 1: contents D1↔D3, so the first parity pair (contents of D2, D3)
    // sits on physical dots (0,1) under M1. Q1's own dots end on (2,1).
    let mut steps = vec![Step::Pulse {
        dots: Q1_PAIR,
        angle: AngleSpec::fixed(HALF_PI),
        cond: None,
        tag: None,
    }];
    steps.extend(exchange_chain(0, 2, "swap:first-parity:in"));
    steps.push(Step::ParityMeas { dots: (0, 1), sensor: m1.clone(), label: "s1".into(), cond: None });
    steps.push(Step::RepeatUntil {
        label: "s1_repeat".into(),
        exit_value: 0,
        cap: DEFAULT_REPEAT_CAP,
        cond: Some(Cond::OutcomeEq { label: "s1".into(), value: 1 }),
        body: vec![
            Step::Pulse { dots: (1, 2), angle: AngleSpec::fixed(PI), cond: None, tag: None },
            Step::ParityMeas { dots: (0, 1), sensor: m1, label: "s1_repeat".into(), cond: None },
        ],
    });
    steps.extend(exchange_chain(0, 2, "swap:first-parity:out"));
    steps.push(Step::Pulse {
        dots: ANCILLA_PAIR,
        angle: AngleSpec::signed(HALF_PI, &["s1"]),
        cond: None,
        tag: None,
    });

    match final_step {
        FinalStep::Measure => {
            // Chain 2: contents D4↔D6; the second parity pair (contents of
            // D4, D5) sits on (4,5) under M2.
            steps.extend(exchange_chain(3, 5, "swap:second-parity:in"));
            steps.push(Step::ParityMeas {
                dots: (4, 5),
                sensor: m2.clone(),
                label: "s2".into(),
                cond: None,
            });
            steps.extend(exchange_chain(3, 5, "swap:second-parity:out"));
            steps.push(Step::Pulse {
                dots: Q1_PAIR,
                angle: AngleSpec::signed(HALF_PI, &["s1", "s2"]),
                cond: None,
                tag: None,
            });
            // Chain 3: exchange qubit Q2 with the ancilla (contents D3↔D6 and
            // D4↔D5). The ancilla pair lands on (4,5) under M2 with the
            // repeat's swap partner adjacent on dot 3; not restored.
            steps.extend(exchange_chain(2, 5, "swap:ancilla-q2-exchange"));
            steps.extend(exchange_chain(3, 4, "swap:ancilla-q2-exchange"));
            steps.push(Step::ParityMeas {
                dots: (4, 5),
                sensor: m2.clone(),
                label: "s3".into(),
                cond: None,
            });
            steps.push(Step::Pulse {
                dots: (3, 4),
                angle: AngleSpec::fixed(PI),
                cond: Some(Cond::OutcomeEq { label: "s3".into(), value: 0 }),
                tag: None,
            });
            steps.push(Step::ParityMeas {
                dots: (4, 5),
                sensor: m2,
                label: "s3_repeat".into(),
                cond: Some(Cond::OutcomeEq { label: "s3".into(), value: 0 }),
            });
            Ok(Schedule {
                protocol: ProtocolKind::EntanglingAsym,
                layout: LayoutVariant::Linear,
                final_step,
                asym_mode,
                n_dots: 6,
                // Chain 3 maps the block D3..D6 to dots 5,4,3,2, so the
                // Q2 contents (D5, D6) finish on physical dots (3, 2).
                steps,
                output_pairs: vec![Q1_PAIR, (3, 2)],
            })
        }
        FinalStep::Reinit => {
            // Re-initialisations are detuning operations on adjacent pairs;
            // no sensor and hence no swap chain is needed.
            steps.push(Step::Reinit { dots: (3, 4), label: "s2_reinit".into() });
            steps.push(Step::Pulse {
                dots: Q1_PAIR,
                angle: AngleSpec::signed(-HALF_PI, &["s1"]),
                cond: None,
                tag: None,
            });
            steps.push(Step::Reinit { dots: ANCILLA_PAIR, label: "s3_reinit".into() });
            Ok(Schedule {
                protocol: ProtocolKind::EntanglingAsym,
                layout: LayoutVariant::Linear,
                final_step,
                asym_mode,
                n_dots: 6,
                steps,
                output_pairs: vec![Q1_PAIR, Q2_PAIR],
            })
        }
    }
}

/// Execute a schedule on a register, resolving conditionals against realised
/// outcomes. Returns the trace (with the frame implied by the schedule's
/// outcome rule) and the recorded outcome map.
pub fn simulate_schedule(
    schedule: &Schedule,
    reg: &mut SpinRegister,
    driver: &mut dyn MeasureDriver,
) -> Result<(ProtocolTrace, HashMap<String, u8>), DeviceError> {
    let mut outcomes: HashMap<String, u8> = HashMap::new();
    let mut trace = ProtocolTrace {
        steps: Vec::new(),
        outcomes: RecordedOutcomes::default(),
        n_measurements: 0,
        n_pulses: 0,
        frame: PauliFrame::identity(2),
        entangling_repeats: 0,
        disentangling_repeats: 0,
    };
    // Track compiler-inserted swaps so data-qubit leakage stays meaningful.
    let mut perm: Vec<usize> = (0..schedule.n_dots).collect(); // abstract dot -> physical dot
    run_steps(schedule, &schedule.steps, reg, driver, &mut outcomes, &mut trace, &mut perm)?;

    trace.outcomes = RecordedOutcomes {
        s1: outcomes.get("s1").copied(),
        s2: outcomes.get("s2").copied(),
        s3: outcomes.get("s3").copied(),
    };
    trace.entangling_repeats = trace
        .steps
        .iter()
        .filter(|s| s.label.as_deref() == Some("s1_repeat"))
        .count();
    trace.disentangling_repeats = trace
        .steps
        .iter()
        .filter(|s| s.label.as_deref() == Some("s3_repeat"))
        .count();
    trace.frame = schedule.frame(&outcomes);
    Ok((trace, outcomes))
}

#[allow(clippy::too_many_arguments)]
fn run_steps(
    schedule: &Schedule,
    steps: &[Step],
    reg: &mut SpinRegister,
    driver: &mut dyn MeasureDriver,
    outcomes: &mut HashMap<String, u8>,
    trace: &mut ProtocolTrace,
    perm: &mut Vec<usize>,
) -> Result<(), DeviceError> {
    for step in steps {
        match step {
            Step::Pulse { dots, angle, cond, tag } => {
                if let Some(c) = cond {
                    if !c.holds(outcomes)? {
                        continue;
                    }
                }
                let nominal = angle.resolve(outcomes)?;
                let applied = driver.pulse_angle(nominal);
                reg.exchange_pulse(*dots, applied)?;
                trace.n_pulses += 1;
                if tag.as_deref().map_or(false, |t| t.starts_with("swap:")) {
                    // Exact SWAP: update the abstract→physical map.
                    for p in perm.iter_mut() {
                        if *p == dots.0 {
                            *p = dots.1;
                        } else if *p == dots.1 {
                            *p = dots.0;
                        }
                    }
                }
                let leakage = current_leakage(reg, perm);
                trace.steps.push(TraceStep {
                    kind: StepKind::Pulse,
                    dots: vec![dots.0, dots.1],
                    angle: Some(applied),
                    meas: None,
                    label: tag.clone(),
                    outcome: None,
                    p0: None,
                    repeat_index: 0,
                    leakage,
                });
            }
            Step::ParityMeas { dots, sensor, label, cond } => {
                if let Some(c) = cond {
                    if !c.holds(outcomes)? {
                        continue;
                    }
                }
                let rec = reg.measure_parity_asym(*dots, driver, schedule.asym_mode)?;
                outcomes.insert(label.clone(), rec.recorded);
                trace.n_measurements += 1;
                let leakage = current_leakage(reg, perm);
                trace.steps.push(TraceStep {
                    kind: StepKind::Measurement,
                    dots: vec![dots.0, dots.1],
                    angle: None,
                    meas: Some(format!("parity_asym[{sensor}]")),
                    label: Some(label.clone()),
                    outcome: Some(rec.recorded),
                    p0: Some(rec.p0),
                    repeat_index: 0,
                    leakage,
                });
            }
            Step::StMeas { dots, sensor, label, cond } => {
                if let Some(c) = cond {
                    if !c.holds(outcomes)? {
                        continue;
                    }
                }
                let rec = reg.measure_st(*dots, driver)?;
                outcomes.insert(label.clone(), rec.recorded);
                trace.n_measurements += 1;
                let leakage = current_leakage(reg, perm);
                trace.steps.push(TraceStep {
                    kind: StepKind::Measurement,
                    dots: vec![dots.0, dots.1],
                    angle: None,
                    meas: Some(format!("st[{sensor}]")),
                    label: Some(label.clone()),
                    outcome: Some(rec.recorded),
                    p0: Some(rec.p0),
                    repeat_index: 0,
                    leakage,
                });
            }
            Step::Reinit { dots, label } => {
                reg.project_pair(*dots, crate::spin::PairSubspace::Singlet, None)?;
                let leakage = current_leakage(reg, perm);
                trace.steps.push(TraceStep {
                    kind: StepKind::Reinit,
                    dots: vec![dots.0, dots.1],
                    angle: None,
                    meas: None,
                    label: Some(label.clone()),
                    outcome: None,
                    p0: None,
                    repeat_index: 0,
                    leakage,
                });
            }
            Step::RepeatUntil { label, exit_value, cap, body, cond } => {
                if let Some(c) = cond {
                    if !c.holds(outcomes)? {
                        continue;
                    }
                }
                let mut done = false;
                for _ in 0..*cap {
                    run_steps(schedule, body, reg, driver, outcomes, trace, perm)?;
                    let bit = outcomes
                        .get(label)
                        .ok_or_else(|| DeviceError::UnknownOutcome(label.clone()))?;
                    if bit == exit_value {
                        done = true;
                        break;
                    }
                }
                if !done {
                    return Err(DeviceError::RepeatCapExceeded(label.clone(), *cap));
                }
            }
        }
    }
    Ok(())
}

fn current_leakage(reg: &SpinRegister, perm: &[usize]) -> f64 {
    let q1 = (perm[Q1_PAIR.0], perm[Q1_PAIR.1]);
    let q2 = (perm[Q2_PAIR.0], perm[Q2_PAIR.1]);
    LogicalLayout::new(vec![q1, q2])
        .ok()
        .and_then(|l| reg.leakage_weight(&l).ok())
        .unwrap_or(1.0)
}

/// Shared-seed equivalence of a compiled schedule against the abstract
/// protocol: over `n_seeds` noiseless runs with identical random streams and
/// random logical inputs, returns the maximum `1 − fidelity` between the two
/// corrected logical outputs. Outcome streams and measurement counts must
/// match exactly.
pub fn verify_equivalence(
    kind: ProtocolKind,
    layout: &DeviceLayout,
    final_step: FinalStep,
    n_seeds: u64,
) -> Result<f64, DeviceError> {
    let schedule = compile(kind, layout, final_step, AsymMode::ProjectiveRenormalized)?;
    let opts = AsymOptions {
        mode: AsymMode::ProjectiveRenormalized,
        final_step,
        repeat_cap: DEFAULT_REPEAT_CAP,
    };
    let mut max_dev = 0.0f64;
    for seed in 0..n_seeds {
        let mut rng = crate::noise::trial_rng(seed, 0);
        let input = random_logical(&mut rng, 4);

        let mut reg_a = two_qubit_register(&input)?;
        let mut drv_a = IdealDriver::new(rng.clone());
        let trace_a =
            entangling_protocol_asym(&mut reg_a, Q1_PAIR, ANCILLA_PAIR, Q2_PAIR, &mut drv_a, &opts)?;
        let dec_a = reg_a.decode_logical(&data_layout())?;
        let corrected_a = trace_a.frame.apply(&dec_a.amplitudes);

        let mut reg_s = two_qubit_register(&input)?;
        let mut drv_s = IdealDriver::new(rng);
        let (trace_s, _) = simulate_schedule(&schedule, &mut reg_s, &mut drv_s)?;
        let out_layout = LogicalLayout::new(schedule.output_pairs.clone())?;
        let dec_s = reg_s.decode_logical(&out_layout)?;
        let corrected_s = trace_s.frame.apply(&dec_s.amplitudes);

        if trace_a.outcomes != trace_s.outcomes {
            return Err(DeviceError::Protocol(format!(
                "outcome streams diverged at seed {seed}: {:?} vs {:?}",
                trace_a.outcomes, trace_s.outcomes
            )));
        }
        if trace_a.n_measurements != trace_s.n_measurements {
            return Err(DeviceError::Protocol(format!(
                "measurement counts diverged at seed {seed}: {} vs {}",
                trace_a.n_measurements, trace_s.n_measurements
            )));
        }
        let fid = state_fidelity(&corrected_a, &corrected_s)?;
        max_dev = max_dev.max(1.0 - fid);
    }
    Ok(max_dev)
}
