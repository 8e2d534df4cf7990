//! Exact algebra of Pauli words, joint-parity projectors, and the tunable
//! non-Pauli projector.
//!
//! Conventions used throughout the crate:
//!
//! - A [`PauliString`] of length N names the observable `⊗_i σ_{ν_i}` with
//!   position 0 the *leftmost* (most significant) tensor factor.
//! - A parity projector for outcome bit `s` is `(I + (−1)^s ⊗σ_ν) / 2`, i.e.
//!   the normalising constant is fixed to 1/2 so both outcomes are orthogonal
//!   projectors that sum to the identity.
//! - Single-Pauli products are tracked as `σ_a σ_b = i^k σ_c` with the phase
//!   exponent `k` kept modulo 4 ([`PhasePower`]); products like `σ_x σ_z`
//!   carry `k = 3`, never a lossy ±1 sign.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

/// Dense complex operator; dimensions in this crate never exceed 2^8.
pub type DenseOperator = DMatrix<Complex64>;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I_UNIT: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PauliError {
    #[error("pauli string must be non-empty")]
    Empty,
    #[error("pauli string length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("all-identity string is not a valid measurement")]
    AllIdentity,
    #[error("invalid pauli character {0:?}")]
    InvalidChar(char),
}

/// Single-site Pauli axis; `I` means "no measurement on this qubit".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PauliAxis {
    I,
    X,
    Y,
    Z,
}

impl PauliAxis {
    pub const NON_IDENTITY: [PauliAxis; 3] = [PauliAxis::X, PauliAxis::Y, PauliAxis::Z];
    pub const ALL: [PauliAxis; 4] = [PauliAxis::I, PauliAxis::X, PauliAxis::Y, PauliAxis::Z];

    /// 2×2 matrix of this axis.
    pub fn matrix(self) -> DenseOperator {
        let m = match self {
            PauliAxis::I => [[ONE, ZERO], [ZERO, ONE]],
            PauliAxis::X => [[ZERO, ONE], [ONE, ZERO]],
            PauliAxis::Y => [[ZERO, -I_UNIT], [I_UNIT, ZERO]],
            PauliAxis::Z => [[ONE, ZERO], [ZERO, -ONE]],
        };
        DMatrix::from_fn(2, 2, |r, c| m[r][c])
    }

    pub fn is_identity(self) -> bool {
        self == PauliAxis::I
    }

    pub fn from_char(c: char) -> Result<Self, PauliError> {
        match c.to_ascii_uppercase() {
            'I' | '0' => Ok(PauliAxis::I),
            'X' => Ok(PauliAxis::X),
            'Y' => Ok(PauliAxis::Y),
            'Z' => Ok(PauliAxis::Z),
            other => Err(PauliError::InvalidChar(other)),
        }
    }

    pub fn as_char(self) -> char {
        match self {
            PauliAxis::I => 'I',
            PauliAxis::X => 'X',
            PauliAxis::Y => 'Y',
            PauliAxis::Z => 'Z',
        }
    }
}

impl fmt::Display for PauliAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_char())
    }
}

/// Power of the imaginary unit, kept modulo 4.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct PhasePower(u8);

impl PhasePower {
    pub fn new(k: i64) -> Self {
        PhasePower(k.rem_euclid(4) as u8)
    }

    pub fn exponent(self) -> u8 {
        self.0
    }

    /// i^k as a complex number: 1, i, −1, −i.
    pub fn as_complex(self) -> Complex64 {
        match self.0 {
            0 => ONE,
            1 => I_UNIT,
            2 => -ONE,
            _ => -I_UNIT,
        }
    }
}

impl std::ops::Mul for PhasePower {
    type Output = PhasePower;
    fn mul(self, rhs: PhasePower) -> PhasePower {
        PhasePower::new(self.0 as i64 + rhs.0 as i64)
    }
}

/// Product of two single-site Paulis: `σ_a σ_b = i^k σ_c`.
///
/// `k = 0` whenever `a = b` or either factor is the identity.
pub fn pauli_product(a: PauliAxis, b: PauliAxis) -> (PhasePower, PauliAxis) {
    use PauliAxis::*;
    match (a, b) {
        (I, other) => (PhasePower::new(0), other),
        (other, I) => (PhasePower::new(0), other),
        (x, y) if x == y => (PhasePower::new(0), I),
        (X, Y) => (PhasePower::new(1), Z),
        (Y, X) => (PhasePower::new(3), Z),
        (Y, Z) => (PhasePower::new(1), X),
        (Z, Y) => (PhasePower::new(3), X),
        (Z, X) => (PhasePower::new(1), Y),
        (X, Z) => (PhasePower::new(3), Y),
        _ => unreachable!(),
    }
}

/// A length-N word over {I, X, Y, Z} naming a joint-Pauli observable.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PauliString(Vec<PauliAxis>);

impl PauliString {
    pub fn new(axes: Vec<PauliAxis>) -> Result<Self, PauliError> {
        if axes.is_empty() {
            return Err(PauliError::Empty);
        }
        Ok(PauliString(axes))
    }

    /// Single non-identity axis at `site`, identity elsewhere.
    pub fn single(n: usize, site: usize, axis: PauliAxis) -> Result<Self, PauliError> {
        let mut axes = vec![PauliAxis::I; n];
        axes[site] = axis;
        PauliString::new(axes)
    }

    pub fn identity(n: usize) -> Result<Self, PauliError> {
        PauliString::new(vec![PauliAxis::I; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn axes(&self) -> &[PauliAxis] {
        &self.0
    }

    pub fn axis(&self, i: usize) -> PauliAxis {
        self.0[i]
    }

    pub fn is_all_identity(&self) -> bool {
        self.0.iter().all(|a| a.is_identity())
    }

    /// Number of non-identity sites.
    pub fn weight(&self) -> usize {
        self.0.iter().filter(|a| !a.is_identity()).count()
    }

    /// Indices of non-identity sites.
    pub fn support(&self) -> Vec<usize> {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, a)| !a.is_identity())
            .map(|(i, _)| i)
            .collect()
    }

    pub fn commutes_with(&self, other: &PauliString) -> Result<bool, PauliError> {
        strings_commute(self, other)
    }

    /// Dense 2^N × 2^N matrix, position 0 as the most significant factor.
    pub fn matrix(&self) -> DenseOperator {
        let mut m = DMatrix::from_element(1, 1, ONE);
        for axis in &self.0 {
            m = m.kronecker(&axis.matrix());
        }
        m
    }

    /// Site-wise product with phase: `self · other = i^k (result)`.
    pub fn product(&self, other: &PauliString) -> Result<(PhasePower, PauliString), PauliError> {
        if self.len() != other.len() {
            return Err(PauliError::LengthMismatch(self.len(), other.len()));
        }
        let mut phase = PhasePower::new(0);
        let mut axes = Vec::with_capacity(self.len());
        for (&a, &b) in self.0.iter().zip(other.0.iter()) {
            let (k, c) = pauli_product(a, b);
            phase = phase * k;
            axes.push(c);
        }
        Ok((phase, PauliString(axes)))
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for a in &self.0 {
            write!(f, "{}", a.as_char())?;
        }
        Ok(())
    }
}

impl FromStr for PauliString {
    type Err = PauliError;
    fn from_str(s: &str) -> Result<Self, PauliError> {
        let axes = s
            .trim()
            .chars()
            .map(PauliAxis::from_char)
            .collect::<Result<Vec<_>, _>>()?;
        PauliString::new(axes)
    }
}

/// Two Pauli words commute iff the number of sites where both are non-identity
/// and unequal is even.
pub fn strings_commute(p: &PauliString, q: &PauliString) -> Result<bool, PauliError> {
    if p.len() != q.len() {
        return Err(PauliError::LengthMismatch(p.len(), q.len()));
    }
    let anticommuting_sites = p
        .0
        .iter()
        .zip(q.0.iter())
        .filter(|(&a, &b)| !a.is_identity() && !b.is_identity() && a != b)
        .count();
    Ok(anticommuting_sites % 2 == 0)
}

/// Joint-parity projector `(I^{⊗N} + (−1)^s ⊗σ_{ν_i}) / 2` for outcome `s`.
///
/// The two outcomes are orthogonal projectors summing to the identity. The
/// all-identity word is rejected: it is not a measurement.
pub fn parity_projector(nu: &PauliString, outcome: u8) -> Result<DenseOperator, PauliError> {
    if nu.is_all_identity() {
        return Err(PauliError::AllIdentity);
    }
    let dim = 1usize << nu.len();
    let sign = if outcome & 1 == 0 { ONE } else { -ONE };
    let mut m = nu.matrix() * sign;
    for i in 0..dim {
        m[(i, i)] += ONE;
    }
    Ok(m * Complex64::new(0.5, 0.0))
}

/// Tunable non-Pauli projector
/// `(I + (−1)^s e^{iθσ_z/2} σ_x e^{−iθσ_z/2}) / 2`.
///
/// The conjugated observable is `cos θ σ_x − sin θ σ_y`, so this is a rank-1
/// projector for every θ, reducing to the σ_x projector at θ = 0.
pub fn pw_projector(theta: f64, outcome: u8) -> DenseOperator {
    let sign = if outcome & 1 == 0 { 1.0 } else { -1.0 };
    let e = Complex64::from_polar(1.0, theta);
    let mut m = DMatrix::from_element(2, 2, ZERO);
    m[(0, 0)] = ONE;
    m[(1, 1)] = ONE;
    m[(0, 1)] = sign * e;
    m[(1, 0)] = sign * e.conj();
    m * Complex64::new(0.5, 0.0)
}

/// Max-norm distance from hermiticity.
pub fn hermiticity_defect(m: &DenseOperator) -> f64 {
    (m - m.adjoint()).iter().map(|c| c.norm()).fold(0.0, f64::max)
}

/// Max-norm distance from idempotence (`M² = M`).
pub fn idempotence_defect(m: &DenseOperator) -> f64 {
    (m * m - m).iter().map(|c| c.norm()).fold(0.0, f64::max)
}

/// Max-norm distance of `M·M†` from the identity.
pub fn unitarity_defect(m: &DenseOperator) -> f64 {
    let mut p = m * m.adjoint();
    for i in 0..p.nrows() {
        p[(i, i)] -= ONE;
    }
    p.iter().map(|c| c.norm()).fold(0.0, f64::max)
}

/// Global-phase-insensitive distance: `max |A − e^{iφ}B|` with φ chosen to
/// maximise `|tr(B†A)|`.
pub fn phase_aligned_distance(a: &DenseOperator, b: &DenseOperator) -> f64 {
    let t: Complex64 = (b.adjoint() * a).trace();
    let phase = if t.norm() < 1e-300 { ONE } else { t / t.norm() };
    (a - b * phase).iter().map(|c| c.norm()).fold(0.0, f64::max)
}
