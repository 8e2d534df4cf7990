//! Command implementations behind the `spinparity` binary.
//!
//! Commands: `validate` and `derive` for measurement sequences, `run` for
//! single seeded protocol executions, `montecarlo` for noise ensembles, and
//! `compile` for six-dot device schedules. Every command is deterministic
//! under a fixed `--seed`; all randomness flows from that one flag.
//!
//! Parameters may come from a JSON config file (`--config`) whose keys mirror
//! the flags; explicit flags override file values and unknown keys are
//! rejected. Outputs embed the effective configuration, and re-running with
//! that configuration reproduces the outputs byte for byte.
//!
//! Exit codes: 0 success (including completed analyses of invalid-but-
//! parseable sequences), 1 runtime simulation failure, 2 usage, config or
//! parse errors.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::device::{compile, verify_equivalence, DeviceLayout, ProtocolKind};
use crate::noise::{
    baseline_phase_gate, export_histogram, run_ensemble, ErrorModel, ExchangeErrorMode,
    ReadoutErrorMode, TrialInput,
};
use crate::protocols::{
    data_layout, entangling_protocol_asym, entangling_protocol_exact, hadamard_protocol,
    ideal_entangling_output, one_qubit_register, two_qubit_register, AsymOptions, FinalStep,
    ProtocolTrace, ANCILLA_PAIR, DEFAULT_REPEAT_CAP, Q1_PAIR, Q2_PAIR,
};
use crate::sequencer::{
    derive_sequence_oracle, derive_single_qubit_closed_form, pauli_correction, validate_sequence,
    GateKind, MeasurementSequence, OutcomeVector, StepRole,
};
use crate::spin::{
    amps_to_json, state_fidelity, AsymMode, IdealDriver, LogicalLayout, PairSpec, SpinRegister,
};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Simulator and verification toolkit for measurement-based quantum
/// computation with spin-parity measurements on singlet-triplet qubits.
#[derive(Parser, Debug)]
#[command(name = "spinparity", version, about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Check a measurement sequence against the selection rule.
    Validate {
        /// Sequence text, e.g. "IZI -> ZXI -> IZX -> IXI".
        #[arg(long)]
        sequence: String,
    },
    /// Derive the data-qubit gate induced by a measurement sequence.
    Derive {
        #[arg(long)]
        sequence: String,
        /// Outcome bits, one per step (default all zero), e.g. "0101".
        #[arg(long)]
        outcomes: Option<String>,
    },
    /// Run one seeded protocol execution and print its trace.
    Run(RunArgs),
    /// Monte Carlo ensemble of the asymmetric entangling gate.
    Montecarlo(McArgs),
    /// Compile the entangling protocol to a six-dot device schedule.
    Compile(CompileArgs),
}

#[derive(Args, Debug, Default)]
pub struct RunArgs {
    /// hadamard | entangling-exact | entangling-asym
    #[arg(long)]
    pub protocol: Option<String>,
    /// Logical input: 0,1,+,-,+i,-i or phase:<rad> (one qubit);
    /// 00,01,10,11 or random (two qubits).
    #[arg(long)]
    pub input: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_parser = parse_asym_mode)]
    pub asym_model: Option<AsymMode>,
    #[arg(long, value_parser = parse_final_step)]
    pub final_step: Option<FinalStep>,
    /// Write the JSON report here as well as to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON config file with the same keys as the flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug, Default)]
pub struct McArgs {
    #[arg(long)]
    pub trials: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub ej_max: Option<f64>,
    #[arg(long)]
    pub em_max: Option<f64>,
    /// Input spec: 00,01,10,11 or random.
    #[arg(long)]
    pub input: Option<String>,
    #[arg(long, value_parser = parse_asym_mode)]
    pub asym_model: Option<AsymMode>,
    #[arg(long, value_parser = parse_final_step)]
    pub final_step: Option<FinalStep>,
    /// leak | flip
    #[arg(long, value_parser = parse_readout_mode)]
    pub readout_model: Option<ReadoutErrorMode>,
    /// multiplicative | additive
    #[arg(long, value_parser = parse_exchange_mode)]
    pub exchange_model: Option<ExchangeErrorMode>,
    /// Also run the single-phase-gate baseline with the same error draw.
    #[arg(long)]
    pub baseline: bool,
    /// Output directory for CSV/JSON artifacts.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug, Default)]
pub struct CompileArgs {
    /// Only "entangling-asym" is compilable.
    #[arg(long)]
    pub protocol: Option<String>,
    /// ideal | linear
    #[arg(long)]
    pub layout: Option<String>,
    #[arg(long, value_parser = parse_final_step)]
    pub final_step: Option<FinalStep>,
    /// Write the schedule JSON here (stdout otherwise).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Run this many shared-seed equivalence checks after compiling.
    #[arg(long)]
    pub verify: Option<u64>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

fn parse_asym_mode(s: &str) -> Result<AsymMode, String> {
    match s {
        "renormalized" => Ok(AsymMode::ProjectiveRenormalized),
        "reset" => Ok(AsymMode::ResetChannel),
        other => Err(format!("unknown asym model {other:?} (renormalized|reset)")),
    }
}

fn parse_final_step(s: &str) -> Result<FinalStep, String> {
    match s {
        "measure" => Ok(FinalStep::Measure),
        "reinit" => Ok(FinalStep::Reinit),
        other => Err(format!("unknown final step {other:?} (measure|reinit)")),
    }
}

fn parse_readout_mode(s: &str) -> Result<ReadoutErrorMode, String> {
    match s {
        "leak" => Ok(ReadoutErrorMode::AmplitudeLeak),
        "flip" => Ok(ReadoutErrorMode::RecordFlip),
        other => Err(format!("unknown readout model {other:?} (leak|flip)")),
    }
}

fn parse_exchange_mode(s: &str) -> Result<ExchangeErrorMode, String> {
    match s {
        "multiplicative" => Ok(ExchangeErrorMode::Multiplicative),
        "additive" => Ok(ExchangeErrorMode::Additive),
        other => Err(format!("unknown exchange model {other:?} (multiplicative|additive)")),
    }
}

/// Config-file schema; keys mirror the flags and unknown keys are rejected.
#[derive(Debug, Default, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FileConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub protocol: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ej_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub em_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub asym_model: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_step: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub readout_model: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exchange_model: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub layout: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub baseline: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verify: Option<u64>,
}

#[derive(Debug)]
pub enum CliError {
    /// Parse/usage/config problems → exit 2.
    Usage(String),
    /// Simulation failures → exit 1.
    Runtime(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

fn load_config(path: &Option<PathBuf>) -> Result<FileConfig, CliError> {
    match path {
        None => Ok(FileConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Usage(format!("cannot read config {p:?}: {e}")))?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::Usage(format!("bad config {p:?}: {e}")))
        }
    }
}

/// Entry point; returns the process exit code.
pub fn run() -> i32 {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            match &e {
                CliError::Usage(msg) | CliError::Runtime(msg) => eprintln!("error: {msg}"),
            }
            e.code()
        }
    }
}

fn dispatch(cmd: Command) -> Result<i32, CliError> {
    match cmd {
        Command::Validate { sequence } => cmd_validate(&sequence),
        Command::Derive { sequence, outcomes } => cmd_derive(&sequence, outcomes.as_deref()),
        Command::Run(args) => cmd_run(args),
        Command::Montecarlo(args) => cmd_montecarlo(args),
        Command::Compile(args) => cmd_compile(args),
    }
}

fn parse_sequence(text: &str) -> Result<MeasurementSequence, CliError> {
    MeasurementSequence::parse(text).map_err(|e| CliError::Usage(format!("{e}")))
}

fn cmd_validate(sequence: &str) -> Result<i32, CliError> {
    let seq = parse_sequence(sequence)?;
    let violations = validate_sequence(&seq);
    let report = json!({
        "sequence": seq.to_string(),
        "valid": violations.is_empty(),
        "violations": violations.iter().map(|v| json!({
            "step": v.step,
            "previous": v.previous.to_string(),
            "current": v.current.to_string(),
        })).collect::<Vec<_>>(),
    });
    println!("{}", serde_json::to_string_pretty(&report).unwrap());
    Ok(if violations.is_empty() { 0 } else { 1 })
}

fn complex_json(z: Complex64) -> serde_json::Value {
    json!([z.re, z.im])
}

fn matrix_json(m: &crate::pauli::DenseOperator) -> serde_json::Value {
    let rows: Vec<Vec<serde_json::Value>> = (0..m.nrows())
        .map(|r| (0..m.ncols()).map(|c| complex_json(m[(r, c)])).collect())
        .collect();
    json!(rows)
}

fn cmd_derive(sequence: &str, outcomes: Option<&str>) -> Result<i32, CliError> {
    let seq = parse_sequence(sequence)?;
    let outcomes = match outcomes {
        Some(text) => OutcomeVector::parse(text).map_err(|e| CliError::Usage(format!("{e}")))?,
        None => OutcomeVector::zeros(seq.n_steps()),
    };
    let gate = derive_sequence_oracle(&seq, &outcomes)
        .map_err(|e| CliError::Usage(format!("{e}")))?;

    // Closed-form α, β are available for the Iμ → νξ → Iζ shape.
    let closed_form = if seq.n_steps() == 3 && seq.n_qubits() == 2 && seq.ancilla() == 1 {
        let data = seq.data_qubits()[0];
        let joint = &seq.steps()[1];
        if joint.weight() == 2 {
            derive_single_qubit_closed_form(
                seq.steps()[0].axis(1),
                joint.axis(data),
                joint.axis(1),
                seq.steps()[2].axis(1),
                &outcomes,
            )
            .ok()
        } else {
            None
        }
    } else {
        None
    };

    let two_qubit_label = if gate.matrix.nrows() == 4 && gate.kind == GateKind::Unitary {
        classify_cnot(&gate.matrix)
    } else {
        None
    };

    let report = json!({
        "sequence": seq.to_string(),
        "outcomes": outcomes.to_string(),
        "roles": (0..seq.n_steps()).map(|i| match seq.role(i) {
            StepRole::AncillaInit => "ancilla-init",
            StepRole::Joint => "joint",
            StepRole::AncillaDisentangle => "ancilla-disentangle",
        }).collect::<Vec<_>>(),
        "violations": validate_sequence(&seq).len(),
        "kind": match gate.kind {
            GateKind::Unitary => "unitary",
            GateKind::NonUnitary => "non-unitary",
            GateKind::Annihilating => "annihilating",
        },
        "unitary": gate.kind == GateKind::Unitary,
        "label": gate.label.map(|c| c.to_string()),
        "two_qubit_label": two_qubit_label,
        "alpha": closed_form.as_ref().and_then(|g| g.alpha),
        "beta": closed_form.as_ref().and_then(|g| g.beta).map(complex_json),
        "correction": gate.correction.map(|p| p.to_string()),
        "matrix": matrix_json(&gate.matrix),
    });
    println!("{}", serde_json::to_string_pretty(&report).unwrap());
    Ok(0)
}

/// Label a 4×4 unitary that equals CNOT up to a left Pauli word, in either
/// control orientation.
fn classify_cnot(u: &crate::pauli::DenseOperator) -> Option<String> {
    use nalgebra::DMatrix;
    let one = Complex64::new(1.0, 0.0);
    let cnot01 = DMatrix::from_fn(4, 4, |r, c| {
        let t = [0usize, 1, 3, 2][c];
        if r == t { one } else { ZERO }
    });
    let cnot10 = DMatrix::from_fn(4, 4, |r, c| {
        let t = [0usize, 3, 2, 1][c];
        if r == t { one } else { ZERO }
    });
    if let Some(p) = pauli_correction(u, &cnot01, 2) {
        return Some(if p.is_all_identity() { "CNOT".into() } else { format!("{p}·CNOT") });
    }
    if let Some(p) = pauli_correction(u, &cnot10, 2) {
        return Some(if p.is_all_identity() {
            "CNOT(reversed)".into()
        } else {
            format!("{p}·CNOT(reversed)")
        });
    }
    None
}

fn parse_single_qubit_input(s: &str) -> Result<(Complex64, Complex64), CliError> {
    let r = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let i = Complex64::new(0.0, 1.0);
    let one = Complex64::new(1.0, 0.0);
    match s {
        "0" => Ok((one, ZERO)),
        "1" => Ok((ZERO, one)),
        "+" => Ok((r, r)),
        "-" => Ok((r, -r)),
        "+i" => Ok((r, r * i)),
        "-i" => Ok((r, -r * i)),
        other => {
            if let Some(phi) = other.strip_prefix("phase:") {
                let phi: f64 = phi
                    .parse()
                    .map_err(|_| CliError::Usage(format!("bad phase angle {phi:?}")))?;
                Ok((r, Complex64::from_polar(std::f64::consts::FRAC_1_SQRT_2, phi)))
            } else {
                Err(CliError::Usage(format!(
                    "unknown single-qubit input {other:?} (0,1,+,-,+i,-i,phase:<rad>)"
                )))
            }
        }
    }
}

fn parse_two_qubit_input(s: &str, seed: u64) -> Result<Vec<Complex64>, CliError> {
    let one = Complex64::new(1.0, 0.0);
    match s {
        "00" | "01" | "10" | "11" => {
            let idx = usize::from_str_radix(s, 2).unwrap();
            let mut v = vec![ZERO; 4];
            v[idx] = one;
            Ok(v)
        }
        "random" => {
            let mut rng = crate::noise::trial_rng(seed, 0);
            Ok(crate::noise::random_logical(&mut rng, 4))
        }
        other => Err(CliError::Usage(format!(
            "unknown two-qubit input {other:?} (00,01,10,11,random)"
        ))),
    }
}

fn run_report(
    config: &FileConfig,
    trace: &ProtocolTrace,
    reg: &SpinRegister,
    layout: &LogicalLayout,
    target: &[Complex64],
) -> Result<serde_json::Value, CliError> {
    let dec = reg
        .decode_logical(layout)
        .map_err(|e| CliError::Runtime(format!("decode failed: {e}")))?;
    let corrected = trace.frame.apply(&dec.amplitudes);
    let fidelity = state_fidelity(&corrected, target)
        .map_err(|e| CliError::Runtime(format!("{e}")))?;
    Ok(json!({
        "config": config,
        "trace": trace,
        "final_logical": amps_to_json(&dec.amplitudes),
        "corrected_logical": amps_to_json(&corrected),
        "leakage": dec.leakage,
        "fidelity_vs_target": fidelity,
        "target": amps_to_json(target),
    }))
}

fn cmd_run(args: RunArgs) -> Result<i32, CliError> {
    let file = load_config(&args.config)?;
    let protocol = args
        .protocol
        .or(file.protocol.clone())
        .ok_or_else(|| CliError::Usage("missing --protocol".into()))?;
    let seed = args.seed.or(file.seed).unwrap_or(0);
    let asym_mode = args
        .asym_model
        .or(file.asym_model.as_deref().map(parse_asym_mode).transpose().map_err(CliError::Usage)?)
        .unwrap_or_default();
    let final_step = args
        .final_step
        .or(file.final_step.as_deref().map(parse_final_step).transpose().map_err(CliError::Usage)?)
        .unwrap_or_default();
    let input = args.input.or(file.input.clone()).unwrap_or_else(|| "0".into());

    let effective = FileConfig {
        protocol: Some(protocol.clone()),
        input: Some(input.clone()),
        seed: Some(seed),
        asym_model: Some(match asym_mode {
            AsymMode::ProjectiveRenormalized => "renormalized".into(),
            AsymMode::ResetChannel => "reset".into(),
        }),
        final_step: Some(match final_step {
            FinalStep::Measure => "measure".into(),
            FinalStep::Reinit => "reinit".into(),
        }),
        ..FileConfig::default()
    };

    let mut driver = IdealDriver::new(crate::noise::trial_rng(seed, 1));
    let report = match protocol.as_str() {
        "hadamard" => {
            let (a, b) = parse_single_qubit_input(&input)?;
            let mut reg = one_qubit_register(a, b, PairSpec::Plus.amplitudes())
                .map_err(|e| CliError::Runtime(format!("{e}")))?;
            let trace = hadamard_protocol(&mut reg, (0, 1), (2, 3), &mut driver)
                .map_err(|e| CliError::Runtime(format!("{e}")))?;
            let target = crate::protocols::hadamard_output(&[a, b], 0, 0);
            let layout = LogicalLayout::new(vec![(0, 1)]).unwrap();
            run_report(&effective, &trace, &reg, &layout, &target)?
        }
        "entangling-exact" | "entangling-asym" => {
            let logical = parse_two_qubit_input(&input, seed)?;
            let mut reg = two_qubit_register(&logical)
                .map_err(|e| CliError::Runtime(format!("{e}")))?;
            let trace = if protocol == "entangling-exact" {
                entangling_protocol_exact(&mut reg, Q1_PAIR, ANCILLA_PAIR, Q2_PAIR, &mut driver)
            } else {
                let opts = AsymOptions { mode: asym_mode, final_step, repeat_cap: DEFAULT_REPEAT_CAP };
                entangling_protocol_asym(&mut reg, Q1_PAIR, ANCILLA_PAIR, Q2_PAIR, &mut driver, &opts)
            }
            .map_err(|e| CliError::Runtime(format!("{e}")))?;
            let target = ideal_entangling_output(&logical);
            run_report(&effective, &trace, &reg, &data_layout(), &target)?
        }
        other => return Err(CliError::Usage(format!("unknown protocol {other:?}"))),
    };

    let text = serde_json::to_string_pretty(&report).unwrap();
    println!("{text}");
    if let Some(path) = &args.out {
        std::fs::write(path, &text)
            .map_err(|e| CliError::Runtime(format!("cannot write {path:?}: {e}")))?;
    }
    Ok(0)
}

fn cmd_montecarlo(args: McArgs) -> Result<i32, CliError> {
    let file = load_config(&args.config)?;
    let trials = args.trials.or(file.trials).unwrap_or(10_000);
    let seed = args.seed.or(file.seed).unwrap_or(0);
    let ej_max = args.ej_max.or(file.ej_max).unwrap_or(0.0);
    let em_max = args.em_max.or(file.em_max).unwrap_or(0.0);
    let asym_mode = args
        .asym_model
        .or(file.asym_model.as_deref().map(parse_asym_mode).transpose().map_err(CliError::Usage)?)
        .unwrap_or_default();
    let final_step = args
        .final_step
        .or(file.final_step.as_deref().map(parse_final_step).transpose().map_err(CliError::Usage)?)
        .unwrap_or_default();
    let readout_mode = args
        .readout_model
        .or(file.readout_model.as_deref().map(parse_readout_mode).transpose().map_err(CliError::Usage)?)
        .unwrap_or_default();
    let exchange_mode = args
        .exchange_model
        .or(file.exchange_model.as_deref().map(parse_exchange_mode).transpose().map_err(CliError::Usage)?)
        .unwrap_or_default();
    let input_text = args.input.or(file.input.clone()).unwrap_or_else(|| "00".into());
    let baseline = args.baseline || file.baseline.unwrap_or(false);

    let input = match input_text.as_str() {
        "00" | "01" | "10" | "11" => TrialInput::Basis(usize::from_str_radix(&input_text, 2).unwrap()),
        "random" => TrialInput::Random,
        other => return Err(CliError::Usage(format!("unknown input {other:?}"))),
    };
    let model = ErrorModel {
        ej_max,
        em_max,
        seed,
        asym_mode,
        final_step,
        readout_mode,
        exchange_mode,
        repeat_cap: DEFAULT_REPEAT_CAP,
    };
    model.validate().map_err(|e| CliError::Usage(format!("{e}")))?;

    let result = run_ensemble(trials, &input, &model)
        .map_err(|e| CliError::Runtime(format!("{e}")))?;

    let effective = FileConfig {
        trials: Some(trials),
        seed: Some(seed),
        ej_max: Some(ej_max),
        em_max: Some(em_max),
        input: Some(input_text.clone()),
        asym_model: Some(match asym_mode {
            AsymMode::ProjectiveRenormalized => "renormalized".into(),
            AsymMode::ResetChannel => "reset".into(),
        }),
        final_step: Some(match final_step {
            FinalStep::Measure => "measure".into(),
            FinalStep::Reinit => "reinit".into(),
        }),
        readout_model: Some(match readout_mode {
            ReadoutErrorMode::AmplitudeLeak => "leak".into(),
            ReadoutErrorMode::RecordFlip => "flip".into(),
        }),
        exchange_model: Some(match exchange_mode {
            ExchangeErrorMode::Multiplicative => "multiplicative".into(),
            ExchangeErrorMode::Additive => "additive".into(),
        }),
        baseline: Some(baseline),
        ..FileConfig::default()
    };

    let summary = json!({
        "config": effective,
        "summary": result.summary,
    });

    if let Some(dir) = &args.out {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Runtime(format!("cannot create {dir:?}: {e}")))?;
        export_histogram(&result.measurement_counts, &dir.join("measurement_counts.csv"))
            .map_err(|e| CliError::Runtime(format!("{e}")))?;
        export_histogram(&result.infidelity, &dir.join("infidelity.csv"))
            .map_err(|e| CliError::Runtime(format!("{e}")))?;
        export_histogram(&result.leakage_log10, &dir.join("leakage_log10.csv"))
            .map_err(|e| CliError::Runtime(format!("{e}")))?;
        std::fs::write(
            dir.join("summary.json"),
            serde_json::to_string_pretty(&summary).unwrap(),
        )
        .map_err(|e| CliError::Runtime(format!("{e}")))?;
        let trials_json = serde_json::to_string(&result.trials).unwrap();
        std::fs::write(dir.join("trials.json"), trials_json)
            .map_err(|e| CliError::Runtime(format!("{e}")))?;
        if baseline {
            let (_, hist) = baseline_phase_gate(trials, &model)
                .map_err(|e| CliError::Runtime(format!("{e}")))?;
            export_histogram(&hist, &dir.join("baseline_infidelity.csv"))
                .map_err(|e| CliError::Runtime(format!("{e}")))?;
        }
    }
    println!("{}", serde_json::to_string_pretty(&summary).unwrap());
    Ok(0)
}

fn cmd_compile(args: CompileArgs) -> Result<i32, CliError> {
    let file = load_config(&args.config)?;
    let protocol = args
        .protocol
        .or(file.protocol.clone())
        .unwrap_or_else(|| "entangling-asym".into());
    if protocol != "entangling-asym" {
        return Err(CliError::Usage(format!(
            "unsupported protocol {protocol:?}; only entangling-asym compiles to a schedule"
        )));
    }
    let layout_name = args
        .layout
        .or(file.layout.clone())
        .ok_or_else(|| CliError::Usage("missing --layout (ideal|linear)".into()))?;
    let layout = DeviceLayout::by_name(&layout_name)
        .ok_or_else(|| CliError::Usage(format!("unknown layout {layout_name:?}")))?;
    let final_step = args
        .final_step
        .or(file.final_step.as_deref().map(parse_final_step).transpose().map_err(CliError::Usage)?)
        .unwrap_or_default();
    let verify = args.verify.or(file.verify);

    let schedule = compile(
        ProtocolKind::EntanglingAsym,
        &layout,
        final_step,
        AsymMode::ProjectiveRenormalized,
    )
    .map_err(|e| CliError::Usage(format!("{e}")))?;

    let max_deviation = match verify {
        Some(n) if n > 0 => Some(
            verify_equivalence(ProtocolKind::EntanglingAsym, &layout, final_step, n)
                .map_err(|e| CliError::Runtime(format!("{e}")))?,
        ),
        _ => None,
    };

    let report = json!({
        "config": FileConfig {
            protocol: Some(protocol),
            layout: Some(layout_name),
            final_step: Some(match final_step {
                FinalStep::Measure => "measure".into(),
                FinalStep::Reinit => "reinit".into(),
            }),
            verify,
            ..FileConfig::default()
        },
        "schedule": schedule,
        "max_deviation": max_deviation,
    });
    let text = serde_json::to_string_pretty(&report).unwrap();
    if let Some(path) = &args.out {
        std::fs::write(path, &text)
            .map_err(|e| CliError::Runtime(format!("cannot write {path:?}: {e}")))?;
        // Keep stdout small when writing to a file: config + verification.
        println!(
            "{}",
            serde_json::to_string_pretty(&json!({
                "written": path,
                "max_deviation": max_deviation,
            }))
            .unwrap()
        );
    } else {
        println!("{text}");
    }
    Ok(0)
}
