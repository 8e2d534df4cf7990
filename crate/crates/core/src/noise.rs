//! Seeded Monte Carlo over exchange-pulse and readout errors for the
//! asymmetric entangling gate.
//!
//! Each trial derives its own random stream from `(seed, trial_index)` via
//! the ChaCha12 stream mechanism, so ensembles are reproducible and trials
//! could be evaluated in any order. Within a trial the draw order is fixed:
//! random inputs first, then per pulse one exchange-error draw (when
//! `ej_max > 0`), and per measurement one outcome draw followed by one
//! readout-error draw (when `em_max > 0`), plus a flip draw in record-flip
//! mode.
//!
//! Two readout-error models are available. The default deforms the applied
//! projection, admitting `ε_M × Π_opposite` amplitude next to the recorded
//! outcome — every measurement leaves a small residue in the wrong subspace,
//! which is what builds the two-peaked leakage distribution (repeat-free
//! runs pick up residues of residues, repeat runs touch the leaked subspace
//! directly). The alternative flips the classical record with probability
//! `|ε_M|` while the physical projection stands; it corrupts the repeat
//! decisions instead and leaves flip-free runs exactly clean.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::protocols::{
    data_layout, entangling_protocol_asym, ideal_entangling_output, two_qubit_register,
    AsymOptions, FinalStep, DEFAULT_REPEAT_CAP,
};
use crate::spin::{AsymMode, Decision, MeasureDriver, SpinRegister};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Error, PartialEq)]
pub enum NoiseError {
    #[error("error magnitude {0} outside [0, 0.5]")]
    MagnitudeOutOfRange(f64),
    #[error("ensemble needs at least one trial")]
    EmptyEnsemble,
    #[error("histogram write failed: {0}")]
    Io(String),
}

/// How readout infidelity acts on the state and the record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ReadoutErrorMode {
    /// Project onto the recorded outcome plus `ε_M` amplitude of the opposite
    /// outcome's subspace (imperfect extinction).
    #[default]
    AmplitudeLeak,
    /// Flip the classical record with probability `|ε_M|`; the projection
    /// itself stands.
    RecordFlip,
}

/// How the exchange-pulse error enters the angle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ExchangeErrorMode {
    /// θ → θ(1 + ε_J)
    #[default]
    Multiplicative,
    /// θ → θ + ε_J
    Additive,
}

/// Error magnitudes, model switches and the ensemble seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ErrorModel {
    /// Maximum relative exchange-pulse error; ε_J ~ U[−ej_max, ej_max].
    pub ej_max: f64,
    /// Maximum readout error magnitude; ε_M ~ U[−em_max, em_max].
    pub em_max: f64,
    pub seed: u64,
    pub asym_mode: AsymMode,
    pub final_step: FinalStep,
    pub readout_mode: ReadoutErrorMode,
    pub exchange_mode: ExchangeErrorMode,
    pub repeat_cap: usize,
}

impl Default for ErrorModel {
    fn default() -> Self {
        ErrorModel {
            ej_max: 0.0,
            em_max: 0.0,
            seed: 0,
            asym_mode: AsymMode::ProjectiveRenormalized,
            final_step: FinalStep::Measure,
            readout_mode: ReadoutErrorMode::AmplitudeLeak,
            exchange_mode: ExchangeErrorMode::Multiplicative,
            repeat_cap: DEFAULT_REPEAT_CAP,
        }
    }
}

impl ErrorModel {
    pub fn validate(&self) -> Result<(), NoiseError> {
        for m in [self.ej_max, self.em_max] {
            if !(0.0..=0.5).contains(&m) {
                return Err(NoiseError::MagnitudeOutOfRange(m));
            }
        }
        Ok(())
    }

    fn options(&self) -> AsymOptions {
        AsymOptions {
            mode: self.asym_mode,
            final_step: self.final_step,
            repeat_cap: self.repeat_cap,
        }
    }
}

/// Driver applying the error model on top of Born-sampled outcomes. With both
/// magnitudes zero it consumes exactly the same draws as the ideal driver.
pub struct NoisyDriver<R: Rng> {
    pub rng: R,
    model: ErrorModel,
}

impl<R: Rng> NoisyDriver<R> {
    pub fn new(rng: R, model: ErrorModel) -> Self {
        NoisyDriver { rng, model }
    }

    fn uniform_symmetric(&mut self, max: f64) -> f64 {
        (self.rng.gen::<f64>() * 2.0 - 1.0) * max
    }
}

impl<R: Rng> MeasureDriver for NoisyDriver<R> {
    fn pulse_angle(&mut self, nominal: f64) -> f64 {
        if self.model.ej_max == 0.0 {
            return nominal;
        }
        let eps = self.uniform_symmetric(self.model.ej_max);
        match self.model.exchange_mode {
            ExchangeErrorMode::Multiplicative => nominal * (1.0 + eps),
            ExchangeErrorMode::Additive => nominal + eps,
        }
    }

    fn decide_binary(&mut self, p0: f64) -> Decision {
        let u: f64 = self.rng.gen();
        let physical = u8::from(u >= p0);
        if self.model.em_max == 0.0 {
            return Decision { physical, recorded: physical, leak: 0.0 };
        }
        let eps = self.uniform_symmetric(self.model.em_max);
        match self.model.readout_mode {
            ReadoutErrorMode::AmplitudeLeak => {
                Decision { physical, recorded: physical, leak: eps }
            }
            ReadoutErrorMode::RecordFlip => {
                let flip: f64 = self.rng.gen();
                let recorded = if flip < eps.abs() { 1 - physical } else { physical };
                Decision { physical, recorded, leak: 0.0 }
            }
        }
    }

    fn choose_hidden(&mut self, weights: &[f64]) -> usize {
        let total: f64 = weights.iter().sum();
        let u: f64 = self.rng.gen::<f64>() * total;
        let mut acc = 0.0;
        for (i, w) in weights.iter().enumerate() {
            acc += w;
            if u < acc {
                return i;
            }
        }
        weights.len() - 1
    }
}

/// Input state of a trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrialInput {
    /// Two-qubit logical basis state 0..=3.
    Basis(usize),
    /// Fresh random logical state per trial, drawn from the trial stream.
    Random,
}

/// Outcome of one Monte Carlo trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial_index: u64,
    pub n_measurements: usize,
    pub n_pulses: usize,
    pub infidelity: f64,
    pub leakage: f64,
    pub entangling_repeats: usize,
    pub disentangling_repeats: usize,
    /// Error message for aborted runs; such trials are counted, not dropped.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failed: Option<String>,
}

/// Per-trial random stream: one master seed, the trial index as the ChaCha12
/// stream number. Serial and parallel evaluation orders agree by
/// construction.
pub fn trial_rng(seed: u64, trial_index: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(trial_index);
    rng
}

fn gaussian<R: Rng>(rng: &mut R) -> f64 {
    // Box-Muller; draws exactly two uniforms.
    let u1: f64 = rng.gen::<f64>().max(1e-300);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Haar-style random logical state over `dim` basis states.
pub fn random_logical<R: Rng>(rng: &mut R, dim: usize) -> Vec<Complex64> {
    let mut v: Vec<Complex64> = (0..dim)
        .map(|_| Complex64::new(gaussian(rng), gaussian(rng)))
        .collect();
    let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    for z in &mut v {
        *z /= n;
    }
    v
}

fn input_state(input: &TrialInput, rng: &mut ChaCha12Rng) -> Vec<Complex64> {
    match input {
        TrialInput::Basis(i) => {
            let mut v = vec![ZERO; 4];
            v[*i & 3] = Complex64::new(1.0, 0.0);
            v
        }
        TrialInput::Random => random_logical(rng, 4),
    }
}

/// Run one seeded trial of the asymmetric entangling gate under the error
/// model. Infidelity compares the frame-corrected logical output against the
/// corrections-free gate output for the same input; leakage is the weight
/// outside the data qubits' logical subspace.
pub fn run_trial(input: &TrialInput, model: &ErrorModel, trial_index: u64) -> TrialResult {
    let mut rng = trial_rng(model.seed, trial_index);
    let logical_input = input_state(input, &mut rng);
    let target = ideal_entangling_output(&logical_input);

    let failed = |msg: String| TrialResult {
        trial_index,
        n_measurements: 0,
        n_pulses: 0,
        infidelity: 1.0,
        leakage: 1.0,
        entangling_repeats: 0,
        disentangling_repeats: 0,
        failed: Some(msg),
    };

    let mut reg = match two_qubit_register(&logical_input) {
        Ok(r) => r,
        Err(e) => return failed(e.to_string()),
    };
    let mut driver = NoisyDriver::new(rng, *model);
    let trace = match entangling_protocol_asym(
        &mut reg,
        crate::protocols::Q1_PAIR,
        crate::protocols::ANCILLA_PAIR,
        crate::protocols::Q2_PAIR,
        &mut driver,
        &model.options(),
    ) {
        Ok(t) => t,
        Err(e) => return failed(e.to_string()),
    };

    // fidelity(frame(decoded), target) = fidelity(decoded, frame(target));
    // Pauli frames are self-inverse up to phase.
    let framed_target = trace.frame.apply(&target);
    let (fidelity, leakage) = match reg.logical_overlap(&data_layout(), &framed_target) {
        Ok(fl) => fl,
        Err(e) => return failed(e.to_string()),
    };

    TrialResult {
        trial_index,
        n_measurements: trace.n_measurements,
        n_pulses: trace.n_pulses,
        infidelity: (1.0 - fidelity).max(0.0),
        leakage,
        entangling_repeats: trace.entangling_repeats,
        disentangling_repeats: trace.disentangling_repeats,
        failed: None,
    }
}

/// Binned counts with explicit edges; raw values live in the trial list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub scale: HistScale,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HistScale {
    Linear,
    Log10,
}

impl Histogram {
    /// Unit-width integer bins spanning the observed range.
    pub fn integer(values: impl IntoIterator<Item = usize>) -> Histogram {
        let vals: Vec<usize> = values.into_iter().collect();
        if vals.is_empty() {
            return Histogram { bin_edges: vec![], counts: vec![], scale: HistScale::Linear };
        }
        let lo = *vals.iter().min().unwrap();
        let hi = *vals.iter().max().unwrap();
        let mut counts = vec![0u64; hi - lo + 1];
        for v in &vals {
            counts[v - lo] += 1;
        }
        let bin_edges = (lo..=hi + 1).map(|b| b as f64 - 0.5).collect();
        Histogram { bin_edges, counts, scale: HistScale::Linear }
    }

    /// Logarithmic bins over [10^lo_exp, 10^hi_exp] with `per_decade` bins
    /// per decade; values at or below the floor land in the first bin, values
    /// above the ceiling in the last.
    pub fn log10(values: &[f64], lo_exp: i32, hi_exp: i32, per_decade: usize) -> Histogram {
        let n_bins = ((hi_exp - lo_exp) as usize) * per_decade;
        let mut counts = vec![0u64; n_bins];
        let step = 1.0 / per_decade as f64;
        for &v in values {
            let idx = if v <= 10f64.powi(lo_exp) {
                0
            } else {
                let exp = v.log10();
                let i = ((exp - lo_exp as f64) / step).floor() as i64;
                i.clamp(0, n_bins as i64 - 1) as usize
            };
            counts[idx] += 1;
        }
        let bin_edges = (0..=n_bins)
            .map(|i| 10f64.powf(lo_exp as f64 + i as f64 * step))
            .collect();
        Histogram { bin_edges, counts, scale: HistScale::Log10 }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// CSV rendering with 17-significant-digit decimal formatting; identical
    /// runs produce byte-identical output.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_lo,bin_hi,count\n");
        for (i, c) in self.counts.iter().enumerate() {
            out.push_str(&format!(
                "{:.16e},{:.16e},{}\n",
                self.bin_edges[i],
                self.bin_edges[i + 1],
                c
            ));
        }
        out
    }
}

/// Write a histogram as CSV (`bin_lo,bin_hi,count`).
pub fn export_histogram(h: &Histogram, path: &std::path::Path) -> Result<(), NoiseError> {
    std::fs::write(path, h.to_csv()).map_err(|e| NoiseError::Io(e.to_string()))
}

/// Ensemble summary for the JSON artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean_measurements: f64,
    pub median_infidelity: f64,
    pub median_leakage: f64,
    pub failed_trials: usize,
}

/// All artifacts of one Monte Carlo ensemble.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnsembleResult {
    pub trials: Vec<TrialResult>,
    pub measurement_counts: Histogram,
    pub infidelity: Histogram,
    pub leakage_log10: Histogram,
    pub summary: Summary,
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    if values.is_empty() {
        return f64::NAN;
    }
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Run `n_trials` seeded trials; the result is a pure function of
/// `(model, input, n_trials)`.
pub fn run_ensemble(
    n_trials: u64,
    input: &TrialInput,
    model: &ErrorModel,
) -> Result<EnsembleResult, NoiseError> {
    model.validate()?;
    if n_trials == 0 {
        return Err(NoiseError::EmptyEnsemble);
    }
    let trials: Vec<TrialResult> = (0..n_trials).map(|i| run_trial(input, model, i)).collect();
    let ok: Vec<&TrialResult> = trials.iter().filter(|t| t.failed.is_none()).collect();
    let failed_trials = trials.len() - ok.len();

    let measurement_counts = Histogram::integer(ok.iter().map(|t| t.n_measurements));
    let mut infid: Vec<f64> = ok.iter().map(|t| t.infidelity).collect();
    let mut leak: Vec<f64> = ok.iter().map(|t| t.leakage).collect();
    let infidelity = Histogram::log10(&infid, -16, 0, 4);
    let leakage_log10 = Histogram::log10(&leak, -16, 0, 4);
    let mean_measurements =
        ok.iter().map(|t| t.n_measurements as f64).sum::<f64>() / ok.len().max(1) as f64;
    let summary = Summary {
        mean_measurements,
        median_infidelity: median(&mut infid),
        median_leakage: median(&mut leak),
        failed_trials,
    };
    Ok(EnsembleResult { trials, measurement_counts, infidelity, leakage_log10, summary })
}

/// Baseline: a single exchange phase gate of random angle θ ∈ [0, 2π) on a
/// random phase-sensitive input `(|0⟩ + e^{iφ}|1⟩)/√2`, φ ∈ [0, 2π), with
/// the same exchange-error draw. Phase gates are exact on z-eigenstates
/// whatever the angle error, so the benchmark samples the equal-superposition
/// family the gate actually acts on. Returns the per-trial infidelities and
/// their histogram.
pub fn baseline_phase_gate(
    n_trials: u64,
    model: &ErrorModel,
) -> Result<(Vec<f64>, Histogram), NoiseError> {
    model.validate()?;
    if n_trials == 0 {
        return Err(NoiseError::EmptyEnsemble);
    }
    let layout = crate::spin::LogicalLayout::new(vec![(0, 1)]).expect("single pair");
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let mut infidelities = Vec::with_capacity(n_trials as usize);
    for i in 0..n_trials {
        let mut rng = trial_rng(model.seed, i);
        let phi: f64 = rng.gen::<f64>() * 2.0 * std::f64::consts::PI;
        let state = [Complex64::new(r, 0.0), Complex64::from_polar(r, phi)];
        let theta: f64 = rng.gen::<f64>() * 2.0 * std::f64::consts::PI;
        let mut driver = NoisyDriver::new(rng, *model);
        let applied = driver.pulse_angle(theta);

        let amps = crate::spin::pair_amplitudes(state[0], state[1]);
        let mut ideal = SpinRegister::product_of_pairs(2, &[((0, 1), amps)]).expect("valid pair");
        let mut noisy = ideal.clone();
        ideal.exchange_pulse((0, 1), theta).expect("valid pair");
        noisy.exchange_pulse((0, 1), applied).expect("valid pair");
        let target = ideal.decode_logical(&layout).expect("logical input").amplitudes;
        let (fid, _) = noisy.logical_overlap(&layout, &target).expect("logical input");
        infidelities.push((1.0 - fid).max(0.0));
    }
    let hist = Histogram::log10(&infidelities, -16, 0, 4);
    Ok((infidelities, hist))
}
