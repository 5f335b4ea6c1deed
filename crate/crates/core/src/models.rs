//! Constructors for the five computation models: single-bit preparation,
//! the two Grover-style search generators, the driven directory lookup, the
//! log-spectrum cavity, and the Shor phase register.
//!
//! Where the dynamics is confined to a two-dimensional invariant subspace
//! (both search generators) a closed-form reduction is provided that is
//! valid for sizes far beyond what the dense engines can hold.

use std::error::Error;
use std::fmt;

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::eigh;
use crate::numtheory::{self, NumTheoryError};
use crate::qcore::{HamiltonianSpec, QcoreError, RankTwoForm, StateVector};
use crate::C64;

/// Basis tag used by bit-register models.
pub const COMPUTATIONAL_TAG: &str = "computational-n";
/// Basis tag for directory labels.
pub const DIRECTORY_TAG: &str = "directory-labels";
/// Basis tag for the truncated cavity sector.
pub const FOCK_TAG: &str = "fock-window";

/// Largest exponent the phase-register model accepts; 2^14 equals the
/// dense engine cap.
pub const MAX_PHASE_QBITS: u32 = 14;
/// Ceiling on directory/cavity coupling strength relative to E_max.
pub const MAX_COUPLING_FRACTION: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub enum ModelError {
    SizeTooSmall { size: u64 },
    SizeOverflow { qbits: u32 },
    TargetOutOfRange { target: u64, size: u64 },
    NonPositiveEnergy { value: f64 },
    NonPositiveTime { value: f64 },
    /// Directory spectra must be nondegenerate.
    DegenerateSpectrum,
    NegativeEnergy { value: f64 },
    /// Directory spectra are anchored at zero ground energy.
    GroundEnergyNonzero { value: f64 },
    CouplingTooStrong { fraction: f64, max: f64 },
    BadWindow { lo: u64, hi: u64 },
    /// A window label needs a cavity mode the model does not include.
    PrimeOutOfRange { label: u64, prime: u64, q_max: u64 },
    TooManyQbits { qbits: u32, max: u32 },
    PhaseOutOfRange { alpha: f64 },
    MaskOutOfRange { mask: u64, bits: u32 },
    NumTheory(NumTheoryError),
    Engine(QcoreError),
}

impl fmt::Display for ModelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::SizeTooSmall { size } => write!(f, "search space needs size >= 2, got {size}"),
            Self::SizeOverflow { qbits } => {
                write!(f, "2^{qbits} does not fit the size type")
            }
            Self::TargetOutOfRange { target, size } => {
                write!(f, "target index {target} out of range for size {size}")
            }
            Self::NonPositiveEnergy { value } => {
                write!(f, "energy scale must be positive and finite, got {value}")
            }
            Self::NonPositiveTime { value } => {
                write!(f, "time budget must be positive and finite, got {value}")
            }
            Self::DegenerateSpectrum => write!(f, "directory energies must be distinct"),
            Self::NegativeEnergy { value } => {
                write!(f, "directory energies must be nonnegative, got {value}")
            }
            Self::GroundEnergyNonzero { value } => {
                write!(f, "first directory energy must be 0, got {value}")
            }
            Self::CouplingTooStrong { fraction, max } => {
                write!(f, "coupling fraction {fraction} exceeds {max}")
            }
            Self::BadWindow { lo, hi } => {
                write!(f, "window [{lo}, {hi}] invalid; need 2 <= lo <= hi")
            }
            Self::PrimeOutOfRange { label, prime, q_max } => write!(
                f,
                "label {label} has prime factor {prime} above the mode cutoff {q_max}"
            ),
            Self::TooManyQbits { qbits, max } => {
                write!(f, "{qbits} q-bits exceeds the supported maximum {max}")
            }
            Self::PhaseOutOfRange { alpha } => {
                write!(f, "phase {alpha} outside [0, 2*pi)")
            }
            Self::MaskOutOfRange { mask, bits } => {
                write!(f, "flip mask {mask:#x} has bits above position {bits}")
            }
            Self::NumTheory(e) => write!(f, "{e}"),
            Self::Engine(e) => write!(f, "{e}"),
        }
    }
}

impl Error for ModelError {
    fn source(&self) -> Option<&(dyn Error + 'static)> {
        match self {
            Self::NumTheory(e) => Some(e),
            Self::Engine(e) => Some(e),
            _ => None,
        }
    }
}

impl From<NumTheoryError> for ModelError {
    fn from(e: NumTheoryError) -> Self {
        ModelError::NumTheory(e)
    }
}

impl From<QcoreError> for ModelError {
    fn from(e: QcoreError) -> Self {
        ModelError::Engine(e)
    }
}

/// Which of the two search generators to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroverVariant {
    /// scale * (|x><x| + |in><in|)
    H1,
    /// i * scale * (|x><in| - |in><x|)
    H2,
}

impl fmt::Display for GroverVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::H1 => write!(f, "h1"),
            Self::H2 => write!(f, "h2"),
        }
    }
}

/// Unstructured search over `size` labels with one marked target.
/// `size` need not be a power of two; the bit-register constructor is a
/// convenience.
#[derive(Debug, Clone, PartialEq)]
pub struct GroverModel {
    size: u64,
    qbits: Option<u32>,
    energy: f64,
    variant: GroverVariant,
    target_index: u64,
}

impl GroverModel {
    pub fn from_size(size: u64, energy: f64, variant: GroverVariant) -> Result<Self, ModelError> {
        if size < 2 {
            return Err(ModelError::SizeTooSmall { size });
        }
        if !energy.is_finite() || energy <= 0.0 {
            return Err(ModelError::NonPositiveEnergy { value: energy });
        }
        Ok(GroverModel { size, qbits: None, energy, variant, target_index: 0 })
    }

    pub fn from_qbits(qbits: u32, energy: f64, variant: GroverVariant) -> Result<Self, ModelError> {
        if qbits == 0 || qbits >= 64 {
            return Err(ModelError::SizeOverflow { qbits });
        }
        let mut m = Self::from_size(1u64 << qbits, energy, variant)?;
        m.qbits = Some(qbits);
        Ok(m)
    }

    pub fn with_target(mut self, target_index: u64) -> Result<Self, ModelError> {
        if target_index >= self.size {
            return Err(ModelError::TargetOutOfRange { target: target_index, size: self.size });
        }
        self.target_index = target_index;
        Ok(self)
    }

    pub fn size(&self) -> u64 {
        self.size
    }

    pub fn qbits(&self) -> Option<u32> {
        self.qbits
    }

    pub fn energy(&self) -> f64 {
        self.energy
    }

    pub fn variant(&self) -> GroverVariant {
        self.variant
    }

    pub fn target_index(&self) -> u64 {
        self.target_index
    }

    fn usize_size(&self) -> Result<usize, ModelError> {
        usize::try_from(self.size).map_err(|_| ModelError::SizeOverflow { qbits: 64 })
    }

    /// Uniform superposition over all labels.
    pub fn initial_state(&self) -> Result<StateVector, ModelError> {
        Ok(StateVector::uniform(self.usize_size()?, COMPUTATIONAL_TAG)?)
    }

    /// The marked basis state.
    pub fn target_state(&self) -> Result<StateVector, ModelError> {
        Ok(StateVector::basis_state(
            self.usize_size()?,
            self.target_index as usize,
            COMPUTATIONAL_TAG,
        )?)
    }
}

/// Rank-two search generator acting on the full label space. Memory is
/// O(size); use [`grover_reduced`] beyond that.
pub fn build_grover(model: &GroverModel) -> Result<HamiltonianSpec, ModelError> {
    let u = model.target_state()?;
    let v = model.initial_state()?;
    let form = match model.variant {
        GroverVariant::H1 => RankTwoForm::Sum,
        GroverVariant::H2 => RankTwoForm::CommutatorLike,
    };
    Ok(HamiltonianSpec::rank_two(u, v, model.energy, form)?)
}

/// Closed form of the search dynamics on span{target, initial}, exact for
/// any size. Overlap a = size^{-1/2} fixes everything.
#[derive(Debug, Clone, PartialEq)]
pub struct GroverReduced {
    variant: GroverVariant,
    size: u64,
    energy: f64,
    /// a = <target|initial> = size^{-1/2}
    pub overlap_a: f64,
    /// b = sqrt(1 - a^2)
    pub orthogonal_b: f64,
    /// Exact eigenvalue gap on the invariant plane.
    pub gap: f64,
    /// First time the target population peaks (exactly 1 for both forms).
    pub flip_time: f64,
    /// Energy spread of the initial state under this generator.
    pub initial_spread: f64,
}

impl GroverReduced {
    /// Target population |<target|psi(t)>|^2.
    pub fn probability(&self, t: f64) -> f64 {
        let a = self.overlap_a;
        match self.variant {
            GroverVariant::H1 => {
                let th = self.energy * a * t;
                let (s, c) = th.sin_cos();
                s * s + a * a * c * c
            }
            GroverVariant::H2 => {
                let s = (self.energy * self.orthogonal_b * t + a.asin()).sin();
                s * s
            }
        }
    }

    /// |<initial|psi(t)>|, the survival amplitude magnitude.
    pub fn initial_overlap_magnitude(&self, t: f64) -> f64 {
        let a = self.overlap_a;
        match self.variant {
            GroverVariant::H1 => {
                let th = self.energy * a * t;
                let (s, c) = th.sin_cos();
                (c * c + a * a * s * s).sqrt()
            }
            GroverVariant::H2 => (self.energy * self.orthogonal_b * t).cos().abs(),
        }
    }

    pub fn variant(&self) -> GroverVariant {
        self.variant
    }

    pub fn size(&self) -> u64 {
        self.size
    }

    pub fn energy(&self) -> f64 {
        self.energy
    }

    /// Gap value commonly quoted for this construction. For the sum form
    /// it is scale/sqrt(size), half the exact reduced-space gap; for the
    /// commutator form it is the exact large-size limit 2*scale.
    pub fn quoted_gap(&self) -> f64 {
        match self.variant {
            GroverVariant::H1 => self.energy * self.overlap_a,
            GroverVariant::H2 => 2.0 * self.energy,
        }
    }

    /// Flip time commonly quoted for this construction. For the sum form
    /// it coincides with the exact value; for the commutator form it is
    /// pi/(4*scale), half the exact large-size limit.
    pub fn quoted_flip_time(&self) -> f64 {
        match self.variant {
            GroverVariant::H1 => self.flip_time,
            GroverVariant::H2 => std::f64::consts::PI / (4.0 * self.energy),
        }
    }

    /// Exact large-size limit of the flip time; none for the sum form,
    /// whose flip time grows without bound.
    pub fn limit_flip_time(&self) -> Option<f64> {
        match self.variant {
            GroverVariant::H1 => None,
            GroverVariant::H2 => Some(std::f64::consts::PI / (2.0 * self.energy)),
        }
    }
}

/// Exact two-level reduction of a search model; valid for sizes beyond the
/// dense cap because only the scalar overlap enters.
pub fn grover_reduced(model: &GroverModel) -> Result<GroverReduced, ModelError> {
    if model.size < 2 {
        return Err(ModelError::SizeTooSmall { size: model.size });
    }
    let a = 1.0 / (model.size as f64).sqrt();
    let b = (1.0 - a * a).sqrt();
    let e = model.energy;
    let (gap, flip_time, initial_spread) = match model.variant {
        GroverVariant::H1 => {
            (2.0 * e * a, std::f64::consts::FRAC_PI_2 / (e * a), e * a * b)
        }
        GroverVariant::H2 => {
            let flip = (std::f64::consts::FRAC_PI_2 - a.asin()) / (e * b);
            (2.0 * e * b, flip, e * b)
        }
    };
    Ok(GroverReduced {
        variant: model.variant,
        size: model.size,
        energy: e,
        overlap_a: a,
        orthogonal_b: b,
        gap,
        flip_time,
        initial_spread,
    })
}

/// Label directory with a nondegenerate spectrum anchored at zero and a
/// seeded random Hermitian perturbation driven at a tunable frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectoryModel {
    energies: Vec<f64>,
    coupling_fraction: f64,
    drive_frequency: f64,
    seed: u64,
}

impl DirectoryModel {
    pub fn new(
        energies: Vec<f64>,
        coupling_fraction: f64,
        drive_frequency: f64,
        seed: u64,
    ) -> Result<Self, ModelError> {
        if energies.is_empty() {
            return Err(ModelError::Engine(QcoreError::ZeroDimension));
        }
        if energies.iter().any(|e| !e.is_finite()) {
            return Err(ModelError::Engine(QcoreError::NonFinite));
        }
        if energies[0] != 0.0 {
            return Err(ModelError::GroundEnergyNonzero { value: energies[0] });
        }
        if let Some(&bad) = energies.iter().find(|&&e| e < 0.0) {
            return Err(ModelError::NegativeEnergy { value: bad });
        }
        let mut sorted = energies.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(ModelError::DegenerateSpectrum);
        }
        if !(0.0..=MAX_COUPLING_FRACTION).contains(&coupling_fraction) {
            return Err(ModelError::CouplingTooStrong {
                fraction: coupling_fraction,
                max: MAX_COUPLING_FRACTION,
            });
        }
        if !drive_frequency.is_finite() || drive_frequency < 0.0 {
            return Err(ModelError::Engine(QcoreError::NonFinite));
        }
        Ok(DirectoryModel { energies, coupling_fraction, drive_frequency, seed })
    }

    /// Spectrum E_j = j/(N-1) * e_max for j = 0..N-1.
    pub fn equally_spaced(
        n: usize,
        e_max: f64,
        coupling_fraction: f64,
        drive_frequency: f64,
        seed: u64,
    ) -> Result<Self, ModelError> {
        if n < 2 {
            return Err(ModelError::SizeTooSmall { size: n as u64 });
        }
        if !e_max.is_finite() || e_max <= 0.0 {
            return Err(ModelError::NonPositiveEnergy { value: e_max });
        }
        let energies = (0..n)
            .map(|j| e_max * j as f64 / (n - 1) as f64)
            .collect();
        Self::new(energies, coupling_fraction, drive_frequency, seed)
    }

    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn max_energy(&self) -> f64 {
        self.energies.iter().fold(0.0f64, |a, &e| a.max(e))
    }

    pub fn coupling_fraction(&self) -> f64 {
        self.coupling_fraction
    }

    pub fn drive_frequency(&self) -> f64 {
        self.drive_frequency
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Ground label state, the search's starting point.
    pub fn initial_state(&self) -> Result<StateVector, ModelError> {
        Ok(StateVector::basis_state(self.len(), 0, DIRECTORY_TAG)?)
    }

    pub fn target_state(&self, index: usize) -> Result<StateVector, ModelError> {
        Ok(StateVector::basis_state(self.len(), index, DIRECTORY_TAG)?)
    }
}

/// Seeded Hermitized-Gaussian matrix with spectral norm exactly
/// `fraction * e_max`; zero fraction short-circuits to the zero matrix.
fn random_hermitian(n: usize, seed: u64, norm_target: f64) -> Result<Array2<C64>, ModelError> {
    let mut m = Array2::<C64>::zeros((n, n));
    if norm_target > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for i in 0..n {
            for j in 0..n {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                m[[i, j]] = C64::new(re, im);
            }
        }
        let mut h = Array2::<C64>::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                h[[i, j]] = (m[[i, j]] + m[[j, i]].conj()) * 0.5;
            }
        }
        let norm = eigh::operator_norm(&h).map_err(QcoreError::from)?;
        if norm > 0.0 {
            let s = norm_target / norm;
            h.mapv_inplace(|z| z * s);
        }
        m = h;
    }
    Ok(m)
}

/// H(t) = Diagonal(E_j) + cos(Omega t) V with V seeded random Hermitian of
/// norm fraction * E_max.
pub fn build_directory(model: &DirectoryModel) -> Result<HamiltonianSpec, ModelError> {
    let n = model.len();
    let h0 = HamiltonianSpec::diagonal(model.energies.clone(), DIRECTORY_TAG)?;
    let norm_target = model.coupling_fraction * model.max_energy();
    let v = random_hermitian(n, model.seed, norm_target)?;
    let v = HamiltonianSpec::dense_hermitian(v, DIRECTORY_TAG)?;
    Ok(HamiltonianSpec::driven(h0, v, model.drive_frequency)?)
}

/// Truncated occupation sector of the log-spectrum cavity: a contiguous
/// integer window plus the vacuum.
#[derive(Debug, Clone, PartialEq)]
pub struct CavityModel {
    omega: f64,
    q_max: u64,
    window: (u64, u64),
    coupling: f64,
    drive_frequency: f64,
}

impl CavityModel {
    pub fn new(
        omega: f64,
        q_max: u64,
        window: (u64, u64),
        coupling: f64,
        drive_frequency: f64,
    ) -> Result<Self, ModelError> {
        if !omega.is_finite() || omega <= 0.0 {
            return Err(ModelError::NonPositiveEnergy { value: omega });
        }
        if q_max < 2 {
            return Err(ModelError::NumTheory(NumTheoryError::BelowTwo { value: q_max }));
        }
        let (lo, hi) = window;
        if lo < 2 || hi < lo {
            return Err(ModelError::BadWindow { lo, hi });
        }
        if !coupling.is_finite() || coupling < 0.0 {
            return Err(ModelError::Engine(QcoreError::NonFinite));
        }
        if !drive_frequency.is_finite() || drive_frequency < 0.0 {
            return Err(ModelError::Engine(QcoreError::NonFinite));
        }
        Ok(CavityModel { omega, q_max, window, coupling, drive_frequency })
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn q_max(&self) -> u64 {
        self.q_max
    }

    pub fn window(&self) -> (u64, u64) {
        self.window
    }

    pub fn coupling(&self) -> f64 {
        self.coupling
    }

    pub fn drive_frequency(&self) -> f64 {
        self.drive_frequency
    }

    /// Drive frequency resonant with a given label's transition from the
    /// vacuum: omega * ln(label).
    pub fn resonant_frequency(&self, label: u64) -> Result<f64, ModelError> {
        Ok(numtheory::cavity_energy(label, self.omega)?)
    }
}

/// The materialized window sector: labels (vacuum first), their energies,
/// and the driven Hamiltonian with the star-shaped vacuum coupling.
#[derive(Debug, Clone)]
pub struct CavityWindow {
    labels: Vec<u64>,
    energies: Vec<f64>,
    driven: HamiltonianSpec,
}

impl CavityWindow {
    /// Basis labels; index 0 is the vacuum label 1, the rest the window in
    /// increasing integer order.
    pub fn labels(&self) -> &[u64] {
        &self.labels
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn driven(&self) -> &HamiltonianSpec {
        &self.driven
    }

    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    pub fn index_of_label(&self, label: u64) -> Option<usize> {
        self.labels.iter().position(|&l| l == label)
    }

    /// Vacuum state, the initial condition for every cavity run.
    pub fn initial_state(&self) -> Result<StateVector, ModelError> {
        Ok(StateVector::basis_state(self.dim(), 0, FOCK_TAG)?)
    }

    pub fn state_for_label(&self, label: u64) -> Result<StateVector, ModelError> {
        let idx = self
            .index_of_label(label)
            .ok_or(ModelError::BadWindow { lo: label, hi: label })?;
        Ok(StateVector::basis_state(self.dim(), idx, FOCK_TAG)?)
    }
}

/// Builds the vacuum-plus-window sector. Every window label must factor
/// entirely below the mode cutoff; energies are occupied-mode sums, so the
/// label -> energy map is strictly increasing by construction (integer
/// labels increase and ln is monotone).
pub fn build_cavity_window(model: &CavityModel) -> Result<CavityWindow, ModelError> {
    let (lo, hi) = model.window;
    let mut labels = vec![1u64];
    let mut energies = vec![0.0f64];
    for label in lo..=hi {
        let decomposition = numtheory::fock_label_from_integer(label)?;
        if let Some(p) = decomposition.max_prime() {
            if p > model.q_max {
                return Err(ModelError::PrimeOutOfRange {
                    label,
                    prime: p,
                    q_max: model.q_max,
                });
            }
        }
        labels.push(label);
        energies.push(numtheory::cavity_energy(label, model.omega)?);
    }
    let dim = labels.len();
    let h0 = HamiltonianSpec::diagonal(energies.clone(), FOCK_TAG)?;
    let mut v = Array2::<C64>::zeros((dim, dim));
    for k in 1..dim {
        v[[0, k]] = C64::new(model.coupling, 0.0);
        v[[k, 0]] = C64::new(model.coupling, 0.0);
    }
    let v = HamiltonianSpec::dense_hermitian(v, FOCK_TAG)?;
    let driven = HamiltonianSpec::driven(h0, v, model.drive_frequency)?;
    Ok(CavityWindow { labels, energies, driven })
}

/// Phase register: n bits, energy unit omega, controlled phase alpha.
#[derive(Debug, Clone, PartialEq)]
pub struct ShorPhaseModel {
    qbits: u32,
    omega: f64,
    alpha: f64,
}

impl ShorPhaseModel {
    pub fn new(qbits: u32, omega: f64, alpha: f64) -> Result<Self, ModelError> {
        if qbits == 0 || qbits > MAX_PHASE_QBITS {
            return Err(ModelError::TooManyQbits { qbits, max: MAX_PHASE_QBITS });
        }
        if !omega.is_finite() || omega <= 0.0 {
            return Err(ModelError::NonPositiveEnergy { value: omega });
        }
        if !alpha.is_finite() || !(0.0..std::f64::consts::TAU).contains(&alpha) {
            return Err(ModelError::PhaseOutOfRange { alpha });
        }
        Ok(ShorPhaseModel { qbits, omega, alpha })
    }

    pub fn qbits(&self) -> u32 {
        self.qbits
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn dim(&self) -> usize {
        1usize << self.qbits
    }
}

/// Everything needed to run the phase-kick: the generator, the time it
/// must act, and the exact input/output pair.
#[derive(Debug, Clone)]
pub struct ShorPhaseBuild {
    pub h: HamiltonianSpec,
    /// Time the generator must act: alpha / omega.
    pub t_n: f64,
    pub input: StateVector,
    pub target: StateVector,
}

/// Diagonal generator with energy omega * index; evolving the uniform
/// input for t_n = alpha/omega imprints e^{-i alpha k} on every amplitude.
pub fn build_shor_phase(model: &ShorPhaseModel) -> Result<ShorPhaseBuild, ModelError> {
    let dim = model.dim();
    let energies: Vec<f64> = (0..dim).map(|k| model.omega * k as f64).collect();
    let h = HamiltonianSpec::diagonal(energies, COMPUTATIONAL_TAG)?;
    let input = StateVector::uniform(dim, COMPUTATIONAL_TAG)?;
    let scale = 1.0 / (dim as f64).sqrt();
    let target_amps: Vec<C64> = (0..dim)
        .map(|k| C64::from_polar(scale, -model.alpha * k as f64))
        .collect();
    let target = StateVector::new(target_amps, COMPUTATIONAL_TAG)?;
    Ok(ShorPhaseBuild { h, t_n: model.alpha / model.omega, input, target })
}

/// Mean energy of the uniform input under the phase-register generator:
/// omega * (2^{n-1} - 1/2).
pub fn shor_average_energy(qbits: u32, omega: f64) -> Result<f64, ModelError> {
    if qbits == 0 {
        return Err(ModelError::TooManyQbits { qbits, max: MAX_PHASE_QBITS });
    }
    if !omega.is_finite() || omega <= 0.0 {
        return Err(ModelError::NonPositiveEnergy { value: omega });
    }
    Ok(omega * ((1u64 << (qbits - 1)) as f64 - 0.5))
}

/// Register preparation: rotate each masked bit to its flipped state in
/// exactly the time budget.
#[derive(Debug, Clone, PartialEq)]
pub struct PrepModel {
    qbits: u32,
    flip_mask: u64,
    time_budget: f64,
}

impl PrepModel {
    pub fn new(qbits: u32, flip_mask: u64, time_budget: f64) -> Result<Self, ModelError> {
        if qbits == 0 || qbits > 64 {
            return Err(ModelError::TooManyQbits { qbits, max: 64 });
        }
        if qbits < 64 && (flip_mask >> qbits) != 0 {
            return Err(ModelError::MaskOutOfRange { mask: flip_mask, bits: qbits });
        }
        if !time_budget.is_finite() || time_budget <= 0.0 {
            return Err(ModelError::NonPositiveTime { value: time_budget });
        }
        Ok(PrepModel { qbits, flip_mask, time_budget })
    }

    pub fn qbits(&self) -> u32 {
        self.qbits
    }

    pub fn flip_mask(&self) -> u64 {
        self.flip_mask
    }

    pub fn time_budget(&self) -> f64 {
        self.time_budget
    }

    pub fn flipped_bits(&self) -> u32 {
        self.flip_mask.count_ones()
    }
}

/// Per-bit transverse generators and the exact spread-time total.
#[derive(Debug, Clone)]
pub struct PrepBuild {
    /// One 2x2 generator per flipped bit, in ascending bit order.
    pub schedule: Vec<HamiltonianSpec>,
    /// Rotation rate pi / time_budget shared by all flipped bits.
    pub rabi_rate: f64,
    /// Sum over flipped bits of (per-bit spread) * time_budget; each term
    /// is exactly pi/2.
    pub total_spread_time_product: f64,
}

/// Each flipped bit evolves under (rabi/2) * sigma_x, reaching the
/// orthogonal bit state exactly at the time budget. The spread in the
/// starting bit state is rabi/2, so spread * time = pi/2 per bit.
pub fn build_prep(model: &PrepModel) -> Result<PrepBuild, ModelError> {
    let rabi = std::f64::consts::PI / model.time_budget;
    let half = C64::new(rabi / 2.0, 0.0);
    let zero = C64::new(0.0, 0.0);
    let mut schedule = Vec::with_capacity(model.flipped_bits() as usize);
    for bit in 0..model.qbits {
        if model.flip_mask & (1u64 << bit) == 0 {
            continue;
        }
        let m = ndarray::array![[zero, half], [half, zero]];
        schedule.push(HamiltonianSpec::dense_hermitian(m, COMPUTATIONAL_TAG)?);
    }
    let total = model.flipped_bits() as f64 * std::f64::consts::FRAC_PI_2;
    Ok(PrepBuild { schedule, rabi_rate: rabi, total_spread_time_product: total })
}
