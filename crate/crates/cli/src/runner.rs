//! Subcommand execution: resolve layered settings, run the model, and
//! assemble the output document.
//!
//! Exit policy: bad or missing settings exit 2; a numerical contract
//! breaking at runtime (norm drift, no flip, a violated bound) exits 3.
//! Bound-suite violations still write their table first so the failing
//! cases are inspectable.

use std::collections::BTreeMap;
use std::error::Error;
use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::path::PathBuf;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use qaction_core::models::COMPUTATIONAL_TAG;
use qaction_core::{
    build_cavity_window, build_directory, build_grover, build_prep, build_shor_phase,
    check_speed_limit, directory_search_time, energy_moments, evolve_static, grover_reduced,
    hypothesis_table, inner_product, peak_time,
    run_resonance_scan, shor_average_energy, standard_suite, AnalysisError, C64, CavityModel,
    DirectoryModel, GroverModel, GroverVariant, HamiltonianSpec, ModelError, PerturbationError,
    PrepModel, QcoreError, ScanConfig, ShorPhaseModel, StateVector, StaticEvolver, StepControl,
};

use crate::config::{
    check_known_keys, load_kv_file, parse_alpha, parse_engine, parse_format, parse_mask,
    parse_time_window, parse_window, CavityArgs, Cli, Command, DirectoryArgs, Engine, Format,
    GroverArgs, Layers, PrepArgs, ShorArgs,
};
use crate::output::{fmt_f64, resolve_out_path, write_document, Document, Field};
use crate::sweep;

const ORTHOGONALITY_THRESHOLD: f64 = 1e-6;
const BOUND_SLACK: f64 = 1e-6;

#[derive(Debug)]
pub enum RunError {
    /// Rejected before any dynamics ran; exit 2.
    Config(String),
    /// A numerical invariant failed during the run; exit 3.
    Contract(String),
    /// Output plumbing failed; exit 2.
    Io(String),
}

impl RunError {
    pub fn config(msg: impl Into<String>) -> Self {
        RunError::Config(msg.into())
    }

    pub fn contract(msg: impl Into<String>) -> Self {
        RunError::Contract(msg.into())
    }

    pub fn io(msg: impl Into<String>) -> Self {
        RunError::Io(msg.into())
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            RunError::Config(_) | RunError::Io(_) => 2,
            RunError::Contract(_) => 3,
        }
    }
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Config(m) => write!(f, "config: {m}"),
            RunError::Contract(m) => write!(f, "contract violation: {m}"),
            RunError::Io(m) => write!(f, "io: {m}"),
        }
    }
}

impl Error for RunError {}

impl From<QcoreError> for RunError {
    fn from(e: QcoreError) -> Self {
        match &e {
            QcoreError::InvalidTrace { .. }
            | QcoreError::NoFlip { .. }
            | QcoreError::ImaginaryResidue { .. }
            | QcoreError::Eigensolver(_) => RunError::contract(e.to_string()),
            _ => RunError::config(e.to_string()),
        }
    }
}

impl From<ModelError> for RunError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Engine(inner) => inner.into(),
            other => RunError::config(other.to_string()),
        }
    }
}

impl From<PerturbationError> for RunError {
    fn from(e: PerturbationError) -> Self {
        match e {
            PerturbationError::InvalidDynamics { .. } | PerturbationError::ProbabilityBound { .. } => {
                RunError::contract(e.to_string())
            }
            PerturbationError::Engine(inner) => inner.into(),
            other => RunError::config(other.to_string()),
        }
    }
}

impl From<AnalysisError> for RunError {
    fn from(e: AnalysisError) -> Self {
        match e {
            AnalysisError::NoDiscrimination { .. } => RunError::contract(e.to_string()),
            AnalysisError::Engine(inner) => inner.into(),
            AnalysisError::Model(inner) => inner.into(),
            AnalysisError::Perturbation(inner) => inner.into(),
            other => RunError::config(other.to_string()),
        }
    }
}

/// Rows plus everything the document embeds around them.
pub struct RunOutcome {
    pub config: Vec<(String, String)>,
    pub notes: Vec<String>,
    pub rows: Vec<Vec<Field>>,
    pub fit: Vec<(String, Field)>,
    /// Deferred contract failure: the table is written first, then the
    /// process exits 3.
    pub post: Option<RunError>,
}

impl RunOutcome {
    fn new(config: Vec<(String, String)>, notes: Vec<String>, rows: Vec<Vec<Field>>) -> Self {
        RunOutcome { config, notes, rows, fit: Vec::new(), post: None }
    }
}

pub fn dispatch(cli: Cli) -> Result<String, RunError> {
    let file = match &cli.config {
        Some(p) => load_kv_file(p)?,
        None => BTreeMap::new(),
    };
    check_known_keys(&file, known_keys(&cli.command))?;

    let layers = Layers::none(&file);
    let format = match layers.pick::<String>("format", &cli.format)? {
        Some(s) => parse_format(&s)?,
        None => Format::Csv,
    };
    let out: Option<PathBuf> = match &cli.out {
        Some(p) => Some(p.clone()),
        None => file.get("out").map(PathBuf::from),
    };
    let seed = layers.pick::<u64>("seed", &cli.seed)?;

    let (name, columns, mut outcome) = match &cli.command {
        Command::Prep(a) => {
            let cfg = resolve_prep(a, &layers)?;
            ("prep".to_owned(), prep_columns(), run_prep(&cfg)?)
        }
        Command::GroverH1(a) => {
            let cfg = resolve_grover(GroverVariant::H1, a, &layers)?;
            ("grover-h1".to_owned(), grover_columns(), run_grover(&cfg)?)
        }
        Command::GroverH2(a) => {
            let cfg = resolve_grover(GroverVariant::H2, a, &layers)?;
            ("grover-h2".to_owned(), grover_columns(), run_grover(&cfg)?)
        }
        Command::Directory(a) => {
            let cfg = resolve_directory(a, &layers, seed)?;
            ("directory".to_owned(), directory_columns(), run_directory(&cfg)?)
        }
        Command::Cavity(a) => {
            let cfg = resolve_cavity(a, &layers, seed)?;
            ("cavity".to_owned(), cavity_columns(), run_cavity(&cfg)?)
        }
        Command::ShorPhase(a) => {
            let cfg = resolve_shor(a, &layers)?;
            ("shor-phase".to_owned(), shor_columns(), run_shor(&cfg)?)
        }
        Command::BoundSuite(a) => {
            let cases = layers.pick::<u64>("cases", &a.cases)?.unwrap_or(200);
            let max_dim = layers.pick::<usize>("max-dim", &a.max_dim)?.unwrap_or(64);
            let seed = seed
                .ok_or_else(|| RunError::config("bound-suite draws random cases; set --seed"))?;
            let cfg = BoundConfig { cases, max_dim, seed };
            ("bound-suite".to_owned(), bound_columns(), run_bound_suite(&cfg)?)
        }
        Command::Hypothesis(_) => ("hypothesis".to_owned(), hypothesis_columns(), run_hypothesis()?),
        Command::Sweep(a) => sweep::run_sweep(a, &file, seed)?,
    };

    outcome.config.push(("format".into(), format.extension().into()));

    let doc = Document {
        command: name.clone(),
        config: outcome.config,
        notes: outcome.notes,
        fit: outcome.fit,
        columns,
        rows: outcome.rows,
    };
    let path = resolve_out_path(&out, &name, format);
    write_document(&doc, format, &path)?;
    if let Some(post) = outcome.post {
        return Err(post);
    }
    Ok(format!("wrote {} ({} rows)", path.display(), doc.rows.len()))
}

fn known_keys(command: &Command) -> &'static [&'static str] {
    const PREP: &[&str] = &["n", "mask", "budget"];
    const GROVER: &[&str] = &["N", "E", "target", "engine", "peak-window", "horizon"];
    const DIRECTORY: &[&str] =
        &["N", "e-max", "eps", "omega", "target", "horizon", "steps-per-period", "dominance"];
    const CAVITY: &[&str] = &[
        "omega",
        "q-max",
        "window",
        "target",
        "coupling",
        "drive",
        "horizon",
        "steps-per-period",
        "dominance",
    ];
    const SHOR: &[&str] = &["n", "omega", "alpha"];
    const BOUND: &[&str] = &["cases", "max-dim"];
    const NONE: &[&str] = &[];
    const SWEEP_GROVER: &[&str] =
        &["N", "E", "target", "engine", "peak-window", "horizon", "grid", "fit-x", "fit-y"];
    const SWEEP_DIRECTORY: &[&str] = &[
        "N",
        "e-max",
        "eps",
        "omega",
        "target",
        "horizon",
        "steps-per-period",
        "dominance",
        "grid",
        "fit-x",
        "fit-y",
    ];
    const SWEEP_CAVITY: &[&str] = &[
        "omega",
        "q-max",
        "window",
        "target",
        "coupling",
        "drive",
        "horizon",
        "steps-per-period",
        "dominance",
        "grid",
        "fit-x",
        "fit-y",
    ];
    const SWEEP_SHOR: &[&str] = &["n", "omega", "alpha", "grid", "fit-x", "fit-y"];
    match command {
        Command::Prep(_) => PREP,
        Command::GroverH1(_) | Command::GroverH2(_) => GROVER,
        Command::Directory(_) => DIRECTORY,
        Command::Cavity(_) => CAVITY,
        Command::ShorPhase(_) => SHOR,
        Command::BoundSuite(_) => BOUND,
        Command::Hypothesis(_) => NONE,
        Command::Sweep(s) => match s.target {
            crate::config::SweepTarget::GroverH1(_) | crate::config::SweepTarget::GroverH2(_) => {
                SWEEP_GROVER
            }
            crate::config::SweepTarget::Directory(_) => SWEEP_DIRECTORY,
            crate::config::SweepTarget::Cavity(_) => SWEEP_CAVITY,
            crate::config::SweepTarget::ShorPhase(_) => SWEEP_SHOR,
        },
    }
}

fn cols(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| (*s).to_owned()).collect()
}

pub struct PrepConfig {
    pub n: u32,
    pub mask: u64,
    pub budget: f64,
}

pub fn resolve_prep(a: &PrepArgs, l: &Layers) -> Result<PrepConfig, RunError> {
    let n = l.require::<u32>("n", &a.n)?;
    let mask = match l.pick::<String>("mask", &a.mask)? {
        Some(s) => parse_mask(&s)?,
        None if n >= 64 => u64::MAX,
        None => (1u64 << n) - 1,
    };
    let budget = l.pick::<f64>("budget", &a.budget)?.unwrap_or(1.0);
    Ok(PrepConfig { n, mask, budget })
}

pub fn prep_columns() -> Vec<String> {
    cols(&["bit", "rabi_rate", "duration", "spread", "product", "flip_fidelity"])
}

pub fn run_prep(c: &PrepConfig) -> Result<RunOutcome, RunError> {
    let model = PrepModel::new(c.n, c.mask, c.budget)?;
    let build = build_prep(&model)?;
    let mut rows = Vec::new();
    let mut schedule = build.schedule.iter();
    for bit in 0..c.n {
        if c.mask & (1u64 << bit) == 0 {
            continue;
        }
        let h = schedule.next().expect("one generator per flipped bit");
        let psi0 = StateVector::basis_state(2, 0, h.basis_tag())?;
        let (_, spread) = energy_moments(&psi0, h)?;
        let ev = StaticEvolver::new(h)?;
        let psi_t = ev.state_at(&psi0, c.budget)?;
        let fidelity = psi_t.amplitudes()[1].norm_sqr();
        rows.push(vec![
            Field::U64(u64::from(bit)),
            Field::F64(build.rabi_rate),
            Field::F64(c.budget),
            Field::F64(spread),
            Field::F64(spread * c.budget),
            Field::F64(fidelity),
        ]);
    }
    let config = vec![
        ("n".into(), c.n.to_string()),
        ("mask".into(), format!("{:#x}", c.mask)),
        ("budget".into(), format!("{}", c.budget)),
    ];
    let notes = vec![format!(
        "total spread-time product {} over {} flipped bits",
        fmt_f64(build.total_spread_time_product),
        model.flipped_bits()
    )];
    Ok(RunOutcome::new(config, notes, rows))
}

pub struct GroverConfig {
    pub variant: GroverVariant,
    pub size: u64,
    pub energy: f64,
    pub target: u64,
    pub engine: Engine,
    pub peak_window: Option<(f64, f64)>,
    pub horizon: Option<f64>,
}

pub fn resolve_grover(
    variant: GroverVariant,
    a: &GroverArgs,
    l: &Layers,
) -> Result<GroverConfig, RunError> {
    let size = l.require::<u64>("N", &a.size)?;
    let energy = l.pick::<f64>("E", &a.energy)?.unwrap_or(1.0);
    let target = l.pick::<u64>("target", &a.target)?.unwrap_or(0);
    let engine = match l.pick::<String>("engine", &a.engine)? {
        Some(s) => parse_engine(&s)?,
        None => Engine::Full,
    };
    let peak_window = match l.pick::<String>("peak-window", &a.peak_window)? {
        Some(s) => Some(parse_time_window(&s)?),
        None => None,
    };
    let horizon = l.pick::<f64>("horizon", &a.horizon)?;
    Ok(GroverConfig { variant, size, energy, target, engine, peak_window, horizon })
}

pub fn grover_columns() -> Vec<String> {
    cols(&[
        "N",
        "E",
        "variant",
        "gap_exact",
        "gap_quoted",
        "flip_time_exact",
        "flip_time_quoted",
        "t_star",
        "peak_probability",
        "initial_spread",
        "t_perp",
        "bound",
        "bound_satisfied",
    ])
}

pub fn run_grover(c: &GroverConfig) -> Result<RunOutcome, RunError> {
    let model = GroverModel::from_size(c.size, c.energy, c.variant)?.with_target(c.target)?;
    let reduced = grover_reduced(&model)?;
    let flip = reduced.flip_time;
    let window = c.peak_window.unwrap_or((0.5 * flip, 1.5 * flip));
    let horizon = c.horizon.unwrap_or(2.2 * flip);

    // Uniform probe grid, then the rotation's quarter-period multiples:
    // the overlap's only possible zeros sit there, and detection needs a
    // sample inside the dip before bisection can refine it.
    let quarter = FRAC_PI_2 / (c.energy * reduced.orthogonal_b);
    let mut times: Vec<f64> = (0..=600).map(|i| horizon * i as f64 / 600.0).collect();
    let mut k = 1.0;
    while k * quarter < horizon {
        times.push(k * quarter);
        k += 1.0;
    }
    times.sort_by(|x, y| x.partial_cmp(y).expect("finite probe times"));
    times.dedup();

    let (t_star, peak, spread, t_perp, bound, satisfied) = match c.engine {
        Engine::Full => {
            let h = build_grover(&model)?;
            let psi0 = model.initial_state()?;
            let target = model.target_state()?;
            let ev = StaticEvolver::new(&h)?;
            let (t_star, peak) = peak_time(
                |t| {
                    let psi = ev.state_at(&psi0, t).expect("finite probe time");
                    inner_product(&target, &psi).expect("matching bases").norm_sqr()
                },
                window,
            )?;
            let trace = ev.trace(&psi0, None, &times, false)?;
            let check = check_speed_limit(&trace, &psi0, &h)?;
            (t_star, peak, check.spread, check.t_perp, check.bound, check.satisfied)
        }
        Engine::Reduced => {
            let (t_star, peak) = peak_time(|t| reduced.probability(t), window)?;
            let t_perp = first_crossing(
                |t| reduced.initial_overlap_magnitude(t),
                &times,
                ORTHOGONALITY_THRESHOLD,
            );
            let spread = reduced.initial_spread;
            let bound = FRAC_PI_2 / spread;
            let satisfied = t_perp.is_none_or(|t| t >= bound * (1.0 - BOUND_SLACK));
            (t_star, peak, spread, t_perp, bound, satisfied)
        }
    };

    let config = vec![
        ("N".into(), c.size.to_string()),
        ("E".into(), format!("{}", c.energy)),
        ("target".into(), c.target.to_string()),
        ("engine".into(), c.engine.to_string()),
        ("peak-window".into(), format!("{}:{}", window.0, window.1)),
        ("horizon".into(), format!("{horizon}")),
    ];
    let notes = vec![match c.variant {
        GroverVariant::H1 => "two-level gap is twice the commonly quoted E/sqrt(N); \
                              the flip time matches the quoted pi*sqrt(N)/(2E)"
            .to_owned(),
        GroverVariant::H2 => "flip time approaches pi/(2E), twice the commonly quoted \
                              pi/(4E); the gap approaches the quoted 2E"
            .to_owned(),
    }];
    let rows = vec![vec![
        Field::U64(c.size),
        Field::F64(c.energy),
        Field::Str(c.variant.to_string()),
        Field::F64(reduced.gap),
        Field::F64(reduced.quoted_gap()),
        Field::F64(flip),
        Field::F64(reduced.quoted_flip_time()),
        Field::F64(t_star),
        Field::F64(peak),
        Field::F64(spread),
        Field::OptF64(t_perp),
        Field::F64(bound),
        Field::Bool(satisfied),
    ]];
    Ok(RunOutcome::new(config, notes, rows))
}

pub struct DirectoryConfig {
    pub size: usize,
    pub e_max: f64,
    pub eps: f64,
    pub omega: f64,
    pub target: usize,
    pub seed: u64,
    pub horizon: f64,
    pub steps_per_period: u32,
    pub dominance: f64,
}

pub fn resolve_directory(
    a: &DirectoryArgs,
    l: &Layers,
    seed: Option<u64>,
) -> Result<DirectoryConfig, RunError> {
    let size = l.require::<usize>("N", &a.size)?;
    if size < 2 {
        return Err(RunError::config(format!("directory needs N >= 2, got {size}")));
    }
    let e_max = l.pick::<f64>("e-max", &a.e_max)?.unwrap_or(1.0);
    let eps = l.pick::<f64>("eps", &a.eps)?.unwrap_or(0.01);
    let target = l.pick::<usize>("target", &a.target)?.unwrap_or(size / 2);
    let omega = l
        .pick::<f64>("omega", &a.omega)?
        .unwrap_or(e_max * target as f64 / (size - 1) as f64);
    let seed =
        seed.ok_or_else(|| RunError::config("directory draws a random coupling; set --seed"))?;
    let horizon = l.pick::<f64>("horizon", &a.horizon)?.unwrap_or(32.0 * size as f64 / e_max);
    let steps_per_period =
        l.pick::<u32>("steps-per-period", &a.steps_per_period)?.unwrap_or(40);
    let dominance = l.pick::<f64>("dominance", &a.dominance)?.unwrap_or(10.0);
    Ok(DirectoryConfig {
        size,
        e_max,
        eps,
        omega,
        target,
        seed,
        horizon,
        steps_per_period,
        dominance,
    })
}

pub fn directory_columns() -> Vec<String> {
    cols(&[
        "N",
        "e_max",
        "eps",
        "omega",
        "target",
        "seed",
        "horizon",
        "steps_per_period",
        "dominance",
        "discrimination_time",
        "nearest_gap",
        "time_gap_product",
        "peak_target_population",
        "waiting_estimate",
        "warnings",
    ])
}

pub fn run_directory(c: &DirectoryConfig) -> Result<RunOutcome, RunError> {
    let model = DirectoryModel::equally_spaced(c.size, c.e_max, c.eps, c.omega, c.seed)?;
    let driven = build_directory(&model)?;
    let scan_cfg = ScanConfig {
        horizon: c.horizon,
        step_control: StepControl {
            steps_per_period: c.steps_per_period,
            record_stride: 1,
            record_populations: true,
        },
        dominance_threshold: c.dominance,
    };
    let scan = run_resonance_scan(&driven, c.target, &scan_cfg)?;
    let peak_pop = scan
        .populations
        .iter()
        .map(|row| row[c.target])
        .fold(0.0f64, f64::max);
    let estimate = directory_search_time(c.size as u64, c.e_max)?;

    let config = vec![
        ("N".into(), c.size.to_string()),
        ("e-max".into(), format!("{}", c.e_max)),
        ("eps".into(), format!("{}", c.eps)),
        ("omega".into(), format!("{}", c.omega)),
        ("target".into(), c.target.to_string()),
        ("seed".into(), c.seed.to_string()),
        ("horizon".into(), format!("{}", c.horizon)),
        ("steps-per-period".into(), c.steps_per_period.to_string()),
        ("dominance".into(), format!("{}", c.dominance)),
    ];
    let notes: Vec<String> = scan.warnings.iter().map(|w| w.to_string()).collect();
    let rows = vec![vec![
        Field::U64(c.size as u64),
        Field::F64(c.e_max),
        Field::F64(c.eps),
        Field::F64(c.omega),
        Field::U64(c.target as u64),
        Field::U64(c.seed),
        Field::F64(c.horizon),
        Field::U64(u64::from(c.steps_per_period)),
        Field::F64(c.dominance),
        Field::OptF64(scan.discrimination_time),
        Field::F64(scan.nearest_gap),
        Field::OptF64(scan.time_gap_product),
        Field::F64(peak_pop),
        Field::F64(estimate),
        Field::U64(scan.warnings.len() as u64),
    ]];
    Ok(RunOutcome::new(config, notes, rows))
}

pub struct CavityConfig {
    pub omega: f64,
    pub q_max: u64,
    pub window: (u64, u64),
    pub target: u64,
    pub coupling: f64,
    pub drive: Option<f64>,
    pub horizon: Option<f64>,
    pub steps_per_period: u32,
    pub dominance: f64,
    pub seed: Option<u64>,
}

pub fn resolve_cavity(
    a: &CavityArgs,
    l: &Layers,
    seed: Option<u64>,
) -> Result<CavityConfig, RunError> {
    let omega = l.pick::<f64>("omega", &a.omega)?.unwrap_or(1.0);
    let window = match l.pick::<String>("window", &a.window)? {
        Some(s) => parse_window(&s)?,
        None => return Err(RunError::config("missing required setting `window`")),
    };
    let q_max = l.pick::<u64>("q-max", &a.q_max)?.unwrap_or(window.1);
    let target = l.require::<u64>("target", &a.target)?;
    let coupling = l.pick::<f64>("coupling", &a.coupling)?.unwrap_or(1e-3 * omega);
    let drive = l.pick::<f64>("drive", &a.drive)?;
    let horizon = l.pick::<f64>("horizon", &a.horizon)?;
    let steps_per_period =
        l.pick::<u32>("steps-per-period", &a.steps_per_period)?.unwrap_or(40);
    let dominance = l.pick::<f64>("dominance", &a.dominance)?.unwrap_or(10.0);
    Ok(CavityConfig {
        omega,
        q_max,
        window,
        target,
        coupling,
        drive,
        horizon,
        steps_per_period,
        dominance,
        seed,
    })
}

pub fn cavity_columns() -> Vec<String> {
    cols(&[
        "omega",
        "q_max",
        "window_lo",
        "window_hi",
        "target",
        "coupling",
        "drive_frequency",
        "horizon",
        "steps_per_period",
        "dominance",
        "dim",
        "target_energy",
        "discrimination_time",
        "nearest_gap",
        "time_gap_product",
        "peak_target_population",
    ])
}

pub fn run_cavity(c: &CavityConfig) -> Result<RunOutcome, RunError> {
    let probe = CavityModel::new(c.omega, c.q_max, c.window, c.coupling, 0.0)?;
    let drive = match c.drive {
        Some(d) => d,
        None => probe.resonant_frequency(c.target)?,
    };
    let model = CavityModel::new(c.omega, c.q_max, c.window, c.coupling, drive)?;
    let win = build_cavity_window(&model)?;
    let target_idx = win.index_of_label(c.target).ok_or_else(|| {
        RunError::config(format!(
            "target {} outside window {}:{}",
            c.target, c.window.0, c.window.1
        ))
    })?;
    let target_energy = win.energies()[target_idx];
    let nearest_gap = win
        .energies()
        .iter()
        .enumerate()
        .filter(|&(k, _)| k != target_idx)
        .map(|(_, &e)| (e - target_energy).abs())
        .fold(f64::INFINITY, f64::min);
    let horizon = c.horizon.unwrap_or(8.0 / nearest_gap);

    let scan_cfg = ScanConfig {
        horizon,
        step_control: StepControl {
            steps_per_period: c.steps_per_period,
            record_stride: 1,
            record_populations: true,
        },
        dominance_threshold: c.dominance,
    };
    let scan = run_resonance_scan(win.driven(), target_idx, &scan_cfg)?;
    let peak_pop = scan
        .populations
        .iter()
        .map(|row| row[target_idx])
        .fold(0.0f64, f64::max);

    let mut config = vec![
        ("omega".into(), format!("{}", c.omega)),
        ("q-max".into(), c.q_max.to_string()),
        ("window".into(), format!("{}:{}", c.window.0, c.window.1)),
        ("target".into(), c.target.to_string()),
        ("coupling".into(), format!("{}", c.coupling)),
        ("drive".into(), format!("{drive}")),
        ("horizon".into(), format!("{horizon}")),
        ("steps-per-period".into(), c.steps_per_period.to_string()),
        ("dominance".into(), format!("{}", c.dominance)),
    ];
    if let Some(seed) = c.seed {
        config.push(("seed".into(), seed.to_string()));
    }
    let notes: Vec<String> = scan.warnings.iter().map(|w| w.to_string()).collect();
    let rows = vec![vec![
        Field::F64(c.omega),
        Field::U64(c.q_max),
        Field::U64(c.window.0),
        Field::U64(c.window.1),
        Field::U64(c.target),
        Field::F64(c.coupling),
        Field::F64(drive),
        Field::F64(horizon),
        Field::U64(u64::from(c.steps_per_period)),
        Field::F64(c.dominance),
        Field::U64(win.dim() as u64),
        Field::F64(target_energy),
        Field::OptF64(scan.discrimination_time),
        Field::F64(scan.nearest_gap),
        Field::OptF64(scan.time_gap_product),
        Field::F64(peak_pop),
    ]];
    Ok(RunOutcome::new(config, notes, rows))
}

pub struct ShorConfig {
    pub n: u32,
    pub omega: f64,
    pub alpha: f64,
    pub alpha_raw: String,
}

pub fn resolve_shor(a: &ShorArgs, l: &Layers) -> Result<ShorConfig, RunError> {
    let n = l.require::<u32>("n", &a.n)?;
    let omega = l.pick::<f64>("omega", &a.omega)?.unwrap_or(1.0);
    let alpha_raw = l.pick::<String>("alpha", &a.alpha)?.unwrap_or_else(|| "pi".to_owned());
    let alpha = parse_alpha(&alpha_raw)?;
    Ok(ShorConfig { n, omega, alpha, alpha_raw })
}

pub fn shor_columns() -> Vec<String> {
    cols(&[
        "n",
        "omega",
        "alpha",
        "dim",
        "t_n",
        "fidelity",
        "mean_energy",
        "mean_energy_closed_form",
        "spread",
        "mean_excess",
        "action",
        "state_count",
        "ratio",
    ])
}

pub fn run_shor(c: &ShorConfig) -> Result<RunOutcome, RunError> {
    let model = ShorPhaseModel::new(c.n, c.omega, c.alpha)?;
    let build = build_shor_phase(&model)?;
    let ev = StaticEvolver::new(&build.h)?;
    let psi_t = ev.state_at(&build.input, build.t_n)?;
    let fidelity = inner_product(&build.target, &psi_t)?.norm_sqr();
    let (mean, spread) = energy_moments(&build.input, &build.h)?;
    let closed_form = shor_average_energy(c.n, c.omega)?;
    let mean_excess = mean - ev.eigenvalues()[0];
    let action = mean_excess * build.t_n;
    let states = 1u64 << c.n;
    let ratio = action / states as f64;

    let config = vec![
        ("n".into(), c.n.to_string()),
        ("omega".into(), format!("{}", c.omega)),
        ("alpha".into(), c.alpha_raw.clone()),
        ("alpha-value".into(), format!("{}", c.alpha)),
    ];
    let rows = vec![vec![
        Field::U64(u64::from(c.n)),
        Field::F64(c.omega),
        Field::F64(c.alpha),
        Field::U64(model.dim() as u64),
        Field::F64(build.t_n),
        Field::F64(fidelity),
        Field::F64(mean),
        Field::F64(closed_form),
        Field::F64(spread),
        Field::F64(mean_excess),
        Field::F64(action),
        Field::U64(states),
        Field::F64(ratio),
    ]];
    Ok(RunOutcome::new(config, Vec::new(), rows))
}

pub struct BoundConfig {
    pub cases: u64,
    pub max_dim: usize,
    pub seed: u64,
}

pub fn bound_columns() -> Vec<String> {
    cols(&["case", "dim", "structured", "spread", "t_perp", "bound", "satisfied"])
}

pub fn run_bound_suite(c: &BoundConfig) -> Result<RunOutcome, RunError> {
    if c.max_dim < 2 {
        return Err(RunError::config(format!("max-dim must be at least 2, got {}", c.max_dim)));
    }
    if c.cases == 0 {
        return Err(RunError::config("cases must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
    let mut rows = Vec::with_capacity(c.cases as usize);
    let mut violations = 0u64;
    for case in 0..c.cases {
        let dim = rng.random_range(2..=c.max_dim);
        let structured = case % 2 == 0;
        let (h, psi0) = if structured {
            // Two-eigenstate superposition of a random diagonal spectrum:
            // the orthogonality time saturates the bound exactly.
            let mut energies: Vec<f64> = (0..dim).map(|_| rng.random()).collect();
            let (i, j) = loop {
                let i = rng.random_range(0..dim);
                let j = rng.random_range(0..dim);
                if i != j && (energies[i] - energies[j]).abs() >= 1e-3 {
                    break (i, j);
                }
                energies = (0..dim).map(|_| rng.random()).collect();
            };
            let h = HamiltonianSpec::diagonal(energies, COMPUTATIONAL_TAG)?;
            let mut amps = vec![C64::new(0.0, 0.0); dim];
            let w = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
            amps[i] = w;
            amps[j] = w;
            (h, StateVector::new(amps, COMPUTATIONAL_TAG)?)
        } else {
            let mut raw = Array2::<C64>::zeros((dim, dim));
            for a in 0..dim {
                for b in 0..dim {
                    let re: f64 = rng.sample(StandardNormal);
                    let im: f64 = rng.sample(StandardNormal);
                    raw[[a, b]] = C64::new(re, im);
                }
            }
            let mut herm = Array2::<C64>::zeros((dim, dim));
            for a in 0..dim {
                for b in 0..dim {
                    herm[[a, b]] = (raw[[a, b]] + raw[[b, a]].conj()) * 0.5;
                }
            }
            let h = HamiltonianSpec::dense_hermitian(herm, COMPUTATIONAL_TAG)?;
            let amps: Vec<C64> = (0..dim)
                .map(|_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
                .collect();
            (h, StateVector::new(amps, COMPUTATIONAL_TAG)?)
        };

        let (_, spread) = energy_moments(&psi0, &h)?;
        if spread <= f64::EPSILON {
            rows.push(vec![
                Field::U64(case),
                Field::U64(dim as u64),
                Field::Bool(structured),
                Field::F64(spread),
                Field::OptF64(None),
                Field::F64(f64::INFINITY),
                Field::Bool(true),
            ]);
            continue;
        }
        let bound = FRAC_PI_2 / spread;
        let horizon = 3.0 * bound;
        let mut times: Vec<f64> = (0..=200).map(|k| horizon * k as f64 / 200.0).collect();
        if structured {
            // The overlap dip is one grid-width wide at the tolerance;
            // sample its center so detection can bracket it.
            times.push(bound);
            times.sort_by(|x, y| x.partial_cmp(y).expect("finite times"));
            times.dedup();
        }
        let trace = evolve_static(&psi0, &h, &times, None)?;
        let check = check_speed_limit(&trace, &psi0, &h)?;
        if !check.satisfied {
            violations += 1;
        }
        rows.push(vec![
            Field::U64(case),
            Field::U64(dim as u64),
            Field::Bool(structured),
            Field::F64(check.spread),
            Field::OptF64(check.t_perp),
            Field::F64(check.bound),
            Field::Bool(check.satisfied),
        ]);
    }

    let config = vec![
        ("cases".into(), c.cases.to_string()),
        ("max-dim".into(), c.max_dim.to_string()),
        ("seed".into(), c.seed.to_string()),
    ];
    let notes = vec![
        "even cases superpose two eigenstates of a random diagonal spectrum (bound \
         saturated); odd cases draw dense Hermitian generators with random states"
            .to_owned(),
    ];
    let post = (violations > 0).then(|| {
        RunError::contract(format!(
            "orthogonality-time bound violated in {violations} of {} cases",
            c.cases
        ))
    });
    Ok(RunOutcome { config, notes, rows, fit: Vec::new(), post })
}

pub fn hypothesis_columns() -> Vec<String> {
    cols(&["model", "size", "t_c", "headline_energy", "action", "classical_complexity", "ratio"])
}

pub fn run_hypothesis() -> Result<RunOutcome, RunError> {
    let reports = standard_suite()?;
    let table = hypothesis_table(&reports)?;
    let mut notes: Vec<String> = Vec::new();
    for report in &reports {
        for note in &report.notes {
            if !notes.contains(note) {
                notes.push(note.clone());
            }
        }
    }
    notes.extend(table.notes().iter().cloned());
    let rows = table
        .rows()
        .iter()
        .map(|r| {
            vec![
                Field::Str(r.model.to_string()),
                Field::U64(r.size),
                Field::F64(r.t_c),
                Field::F64(r.headline_energy),
                Field::F64(r.action),
                Field::U64(r.classical_complexity),
                Field::F64(r.ratio),
            ]
        })
        .collect();
    let config = vec![("suite".into(), "standard".into())];
    Ok(RunOutcome::new(config, notes, rows))
}

/// First probe time along `times` where `f` drops to `threshold` or
/// below, bisected against `f` between the bracketing samples.
fn first_crossing<F: Fn(f64) -> f64>(f: F, times: &[f64], threshold: f64) -> Option<f64> {
    let hit = times.iter().position(|&t| f(t) <= threshold)?;
    if hit == 0 {
        return Some(times[0]);
    }
    let mut lo = times[hit - 1];
    let mut hi = times[hit];
    while hi - lo > 1e-9 * hi.abs().max(f64::MIN_POSITIVE) {
        let mid = 0.5 * (lo + hi);
        if f(mid) <= threshold {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(hi)
}
