//! Exact integer support for the log-spectrum cavity: primes, trial-division
//! factorization, and the occupation-label <-> integer bijection.
//!
//! Everything here is deliberately brute force. This module is the oracle
//! that the cavity spectrum rests on, so transparency beats speed.

use std::error::Error;
use std::fmt;

/// Upper limit accepted by [`primes_up_to`]; the sieve allocates one byte
/// per candidate.
pub const SIEVE_CAP: u64 = 100_000_000;

#[derive(Debug, Clone, PartialEq)]
pub enum NumTheoryError {
    /// `primes_up_to` needs q_max >= 2.
    BelowTwo { value: u64 },
    /// Labels are positive integers; 0 has no factorization.
    ZeroLabel,
    /// Reconstructed integer exceeds u64.
    Overflow,
    /// Factor list violates the label invariants.
    BadFactorList { reason: &'static str },
    /// Sieve request above [`SIEVE_CAP`].
    SieveLimit { requested: u64 },
    /// Mode-sum energy disagrees with ln N beyond tolerance.
    ModeSumMismatch { n: u64, mode_sum: f64, direct: f64 },
}

impl fmt::Display for NumTheoryError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::BelowTwo { value } => write!(f, "need an integer >= 2, got {value}"),
            Self::ZeroLabel => write!(f, "labels are positive integers; got 0"),
            Self::Overflow => write!(f, "label does not fit in u64"),
            Self::BadFactorList { reason } => write!(f, "invalid factor list: {reason}"),
            Self::SieveLimit { requested } => {
                write!(f, "sieve limit {requested} exceeds cap {SIEVE_CAP}")
            }
            Self::ModeSumMismatch { n, mode_sum, direct } => write!(
                f,
                "mode-sum energy {mode_sum} disagrees with ln({n}) = {direct}"
            ),
        }
    }
}

impl Error for NumTheoryError {}

/// Multiset of (prime, exponent) pairs identifying one occupation-number
/// basis state. The empty list is the vacuum, integer 1.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FockLabel {
    factors: Vec<(u64, u32)>,
}

impl FockLabel {
    pub fn vacuum() -> Self {
        FockLabel { factors: Vec::new() }
    }

    /// Validates that primes are strictly increasing, exponents nonzero,
    /// and every base actually prime.
    pub fn new(factors: Vec<(u64, u32)>) -> Result<Self, NumTheoryError> {
        let mut last = 1u64;
        for &(q, m) in &factors {
            if m == 0 {
                return Err(NumTheoryError::BadFactorList { reason: "zero exponent" });
            }
            if q <= last {
                return Err(NumTheoryError::BadFactorList {
                    reason: "primes not strictly increasing",
                });
            }
            if !is_prime(q) {
                return Err(NumTheoryError::BadFactorList { reason: "base is not prime" });
            }
            last = q;
        }
        Ok(FockLabel { factors })
    }

    pub fn factors(&self) -> &[(u64, u32)] {
        &self.factors
    }

    pub fn is_vacuum(&self) -> bool {
        self.factors.is_empty()
    }

    /// Largest prime mode occupied, `None` for the vacuum.
    pub fn max_prime(&self) -> Option<u64> {
        self.factors.last().map(|&(q, _)| q)
    }
}

fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    if n % 2 == 0 {
        return n == 2;
    }
    if n % 3 == 0 {
        return n == 3;
    }
    let mut d = 5u64;
    while d * d <= n {
        if n % d == 0 || n % (d + 2) == 0 {
            return false;
        }
        d += 6;
    }
    true
}

/// All primes <= q_max in ascending order, by sieve of Eratosthenes.
pub fn primes_up_to(q_max: u64) -> Result<Vec<u64>, NumTheoryError> {
    if q_max < 2 {
        return Err(NumTheoryError::BelowTwo { value: q_max });
    }
    if q_max > SIEVE_CAP {
        return Err(NumTheoryError::SieveLimit { requested: q_max });
    }
    let limit = q_max as usize;
    let mut composite = vec![false; limit + 1];
    let mut primes = Vec::new();
    for p in 2..=limit {
        if composite[p] {
            continue;
        }
        primes.push(p as u64);
        let mut multiple = p * p;
        while multiple <= limit {
            composite[multiple] = true;
            multiple += p;
        }
    }
    Ok(primes)
}

/// Trial-division factorization of n >= 1. Round-trips exactly with
/// [`integer_from_fock_label`].
pub fn fock_label_from_integer(n: u64) -> Result<FockLabel, NumTheoryError> {
    if n == 0 {
        return Err(NumTheoryError::ZeroLabel);
    }
    let mut rest = n;
    let mut factors = Vec::new();
    let mut push = |q: u64, rest: &mut u64| {
        let mut m = 0u32;
        while *rest % q == 0 {
            *rest /= q;
            m += 1;
        }
        if m > 0 {
            factors.push((q, m));
        }
    };
    push(2, &mut rest);
    push(3, &mut rest);
    let mut d = 5u64;
    while d * d <= rest {
        push(d, &mut rest);
        push(d + 2, &mut rest);
        d += 6;
    }
    if rest > 1 {
        factors.push((rest, 1));
    }
    Ok(FockLabel { factors })
}

/// Product of q_i^{m_i} in exact integer arithmetic.
pub fn integer_from_fock_label(label: &FockLabel) -> Result<u64, NumTheoryError> {
    let mut acc: u64 = 1;
    for &(q, m) in label.factors() {
        for _ in 0..m {
            acc = acc.checked_mul(q).ok_or(NumTheoryError::Overflow)?;
        }
    }
    Ok(acc)
}

/// Energy of the label-N eigenstate, omega * ln N, computed as the
/// occupied-mode sum omega * sum m_i ln q_i and cross-checked against
/// the direct logarithm to 1e-12 relative.
pub fn cavity_energy(n: u64, omega: f64) -> Result<f64, NumTheoryError> {
    let label = fock_label_from_integer(n)?;
    let mode_sum: f64 = label
        .factors()
        .iter()
        .map(|&(q, m)| f64::from(m) * (q as f64).ln())
        .sum();
    let direct = (n as f64).ln();
    if (mode_sum - direct).abs() > 1e-12 * direct.max(1.0) {
        return Err(NumTheoryError::ModeSumMismatch { n, mode_sum, direct });
    }
    Ok(omega * mode_sum)
}
