//! Argument parsing and config resolution.
//!
//! Every run is described by a flat set of `key = value` settings. Values
//! come from three layers, strongest first: a sweep override, command-line
//! flags, and an optional config file (`--config`). File keys use the same
//! names as the long flags. Anything still unset falls back to the
//! documented default.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use crate::runner::RunError;

pub const GLOBAL_KEYS: &[&str] = &["seed", "format", "out"];

#[derive(Parser, Debug)]
#[command(name = "qaction", version, about = "Continuous-time quantum model runner")]
pub struct Cli {
    /// Flat key=value file supplying defaults for any flag of the chosen
    /// subcommand.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Output file. Relative paths resolve against QACTION_OUT_DIR when it
    /// is set; the default name is <command>.<format>.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Output format: csv or json.
    #[arg(long, global = true)]
    pub format: Option<String>,

    /// RNG seed. Mandatory for models that draw random numbers.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Rotate register bits to a target pattern and report per-bit
    /// spread-time products.
    Prep(PrepArgs),
    /// Sum-form search generator: measured flip time, peak probability,
    /// speed-limit check.
    GroverH1(GroverArgs),
    /// Commutator-form search generator: same measurements as grover-h1.
    GroverH2(GroverArgs),
    /// Driven level directory: resonance scan and discrimination time.
    Directory(DirectoryArgs),
    /// Driven factor-log cavity window: resonance scan around one label.
    Cavity(CavityArgs),
    /// Diagonal phase register: fidelity and mean-energy measurements.
    ShorPhase(ShorArgs),
    /// Random-case orthogonality-time bound checks.
    BoundSuite(BoundArgs),
    /// Fixed five-model action/complexity table.
    Hypothesis(HypothesisArgs),
    /// Run one subcommand over a grid of one parameter and fit the result.
    Sweep(SweepArgs),
}

#[derive(Args, Debug, Clone)]
pub struct PrepArgs {
    /// Register width in bits (1..=64).
    #[arg(long)]
    pub n: Option<u32>,
    /// Bits to flip, decimal or 0x-hex. Default: all n bits.
    #[arg(long)]
    pub mask: Option<String>,
    /// Time budget per rotation.
    #[arg(long)]
    pub budget: Option<f64>,
}

#[derive(Args, Debug, Clone)]
pub struct GroverArgs {
    /// Search-space size (labels, not bits).
    #[arg(long = "N")]
    pub size: Option<u64>,
    /// Energy scale of the generator.
    #[arg(long = "E")]
    pub energy: Option<f64>,
    /// Marked label.
    #[arg(long)]
    pub target: Option<u64>,
    /// full (dense evolution) or reduced (two-level closed form).
    #[arg(long)]
    pub engine: Option<String>,
    /// Peak search window lo:hi in absolute time. Default brackets the
    /// closed-form flip time.
    #[arg(long = "peak-window")]
    pub peak_window: Option<String>,
    /// Orthogonality probe horizon. Default 2.2x the closed-form flip time.
    #[arg(long)]
    pub horizon: Option<f64>,
}

#[derive(Args, Debug, Clone)]
pub struct DirectoryArgs {
    /// Number of directory labels.
    #[arg(long = "N")]
    pub size: Option<usize>,
    /// Top of the equally spaced spectrum.
    #[arg(long = "e-max")]
    pub e_max: Option<f64>,
    /// Coupling norm as a fraction of e-max.
    #[arg(long)]
    pub eps: Option<f64>,
    /// Drive frequency. Default: the target's transition energy.
    #[arg(long)]
    pub omega: Option<f64>,
    /// Target label index. Default N/2.
    #[arg(long)]
    pub target: Option<usize>,
    /// Scan horizon. Default 32*N/e-max.
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Integrator steps per drive period (>= 40).
    #[arg(long = "steps-per-period")]
    pub steps_per_period: Option<u32>,
    /// Population ratio that counts as discrimination.
    #[arg(long)]
    pub dominance: Option<f64>,
}

#[derive(Args, Debug, Clone)]
pub struct CavityArgs {
    /// Cavity frequency unit.
    #[arg(long)]
    pub omega: Option<f64>,
    /// Largest mode index kept; must cover every prime factor in the
    /// window. Default: the window's upper edge.
    #[arg(long = "q-max")]
    pub q_max: Option<u64>,
    /// Label window lo:hi (inclusive), vacuum adjoined automatically.
    #[arg(long)]
    pub window: Option<String>,
    /// Target label inside the window.
    #[arg(long)]
    pub target: Option<u64>,
    /// Drive coupling magnitude. Default 1e-3 * omega.
    #[arg(long)]
    pub coupling: Option<f64>,
    /// Drive frequency. Default: the target label's energy.
    #[arg(long)]
    pub drive: Option<f64>,
    /// Scan horizon. Default 8 / nearest competitor gap.
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Integrator steps per drive period (>= 40).
    #[arg(long = "steps-per-period")]
    pub steps_per_period: Option<u32>,
    /// Population ratio that counts as discrimination.
    #[arg(long)]
    pub dominance: Option<f64>,
}

#[derive(Args, Debug, Clone)]
pub struct ShorArgs {
    /// Register width in bits.
    #[arg(long)]
    pub n: Option<u32>,
    /// Level spacing of the phase register.
    #[arg(long)]
    pub omega: Option<f64>,
    /// Phase per level: a float, "pi", "<x>pi", or "pi/<x>".
    #[arg(long)]
    pub alpha: Option<String>,
}

#[derive(Args, Debug, Clone)]
pub struct BoundArgs {
    /// Number of random cases.
    #[arg(long)]
    pub cases: Option<u64>,
    /// Largest state dimension drawn.
    #[arg(long = "max-dim")]
    pub max_dim: Option<usize>,
}

#[derive(Args, Debug, Clone)]
pub struct HypothesisArgs {}

#[derive(Args, Debug, Clone)]
pub struct SweepArgs {
    /// Grid spec "key=v1,v2,...". The key must be the subcommand's size
    /// parameter (N, target, or n).
    #[arg(long, global = true)]
    pub grid: Option<String>,
    /// Abscissa transform for the fit: raw, sqrt, log2, or inv.
    #[arg(long = "fit-x", global = true)]
    pub fit_x: Option<String>,
    /// Result column fitted against the transformed parameter.
    #[arg(long = "fit-y", global = true)]
    pub fit_y: Option<String>,
    #[command(subcommand)]
    pub target: SweepTarget,
}

#[derive(Subcommand, Debug, Clone)]
pub enum SweepTarget {
    /// Sweep the search-space size N
    GroverH1(GroverArgs),
    /// Sweep the search-space size N
    GroverH2(GroverArgs),
    /// Sweep the directory size N (per-cell seed = base seed + index)
    Directory(DirectoryArgs),
    /// Sweep the target label
    Cavity(CavityArgs),
    /// Sweep the register width n
    ShorPhase(ShorArgs),
}

impl SweepTarget {
    pub fn name(&self) -> &'static str {
        match self {
            SweepTarget::GroverH1(_) => "grover-h1",
            SweepTarget::GroverH2(_) => "grover-h2",
            SweepTarget::Directory(_) => "directory",
            SweepTarget::Cavity(_) => "cavity",
            SweepTarget::ShorPhase(_) => "shor-phase",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Engine {
    Full,
    Reduced,
}

impl Display for Engine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Engine::Full => write!(f, "full"),
            Engine::Reduced => write!(f, "reduced"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitX {
    Raw,
    Sqrt,
    Log2,
    Inv,
}

impl FitX {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            FitX::Raw => x,
            FitX::Sqrt => x.sqrt(),
            FitX::Log2 => x.log2(),
            FitX::Inv => 1.0 / x,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            FitX::Raw => "raw",
            FitX::Sqrt => "sqrt",
            FitX::Log2 => "log2",
            FitX::Inv => "inv",
        }
    }
}

/// File-backed defaults plus an optional sweep override, consulted by key.
pub struct Layers<'a> {
    pub file: &'a BTreeMap<String, String>,
    pub over: Option<(&'a str, &'a str)>,
}

impl<'a> Layers<'a> {
    pub fn none(file: &'a BTreeMap<String, String>) -> Self {
        Layers { file, over: None }
    }

    /// Resolves one key: override beats the flag, the flag beats the file.
    pub fn pick<T>(&self, key: &str, flag: &Option<T>) -> Result<Option<T>, RunError>
    where
        T: FromStr + Clone,
        <T as FromStr>::Err: Display,
    {
        if let Some((k, v)) = self.over {
            if k == key {
                return parse_value(key, v).map(Some);
            }
        }
        if let Some(v) = flag {
            return Ok(Some(v.clone()));
        }
        match self.file.get(key) {
            Some(v) => parse_value(key, v).map(Some),
            None => Ok(None),
        }
    }

    pub fn require<T>(&self, key: &str, flag: &Option<T>) -> Result<T, RunError>
    where
        T: FromStr + Clone,
        <T as FromStr>::Err: Display,
    {
        self.pick(key, flag)?
            .ok_or_else(|| RunError::config(format!("missing required setting `{key}`")))
    }
}

pub fn parse_value<T>(key: &str, raw: &str) -> Result<T, RunError>
where
    T: FromStr,
    <T as FromStr>::Err: Display,
{
    raw.trim()
        .parse()
        .map_err(|e| RunError::config(format!("bad value for `{key}`: {e}")))
}

/// Loads a flat key=value file. `#` starts a comment; blank lines are
/// skipped.
pub fn load_kv_file(path: &PathBuf) -> Result<BTreeMap<String, String>, RunError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| RunError::config(format!("cannot read config {}: {e}", path.display())))?;
    let mut map = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(RunError::config(format!(
                "config line {} is not `key = value`: {line:?}",
                lineno + 1
            )));
        };
        let key = key.trim().to_owned();
        let value = value.trim().to_owned();
        if key.is_empty() {
            return Err(RunError::config(format!("config line {} has an empty key", lineno + 1)));
        }
        if map.insert(key.clone(), value).is_some() {
            return Err(RunError::config(format!("config repeats key `{key}`")));
        }
    }
    Ok(map)
}

/// Rejects file keys that no layer of the active subcommand would read.
pub fn check_known_keys(
    file: &BTreeMap<String, String>,
    known: &[&str],
) -> Result<(), RunError> {
    for key in file.keys() {
        if !known.contains(&key.as_str()) && !GLOBAL_KEYS.contains(&key.as_str()) {
            return Err(RunError::config(format!("unknown config key `{key}`")));
        }
    }
    Ok(())
}

pub fn parse_format(raw: &str) -> Result<Format, RunError> {
    match raw {
        "csv" => Ok(Format::Csv),
        "json" => Ok(Format::Json),
        other => Err(RunError::config(format!("format must be csv or json, got `{other}`"))),
    }
}

pub fn parse_engine(raw: &str) -> Result<Engine, RunError> {
    match raw {
        "full" => Ok(Engine::Full),
        "reduced" => Ok(Engine::Reduced),
        other => Err(RunError::config(format!("engine must be full or reduced, got `{other}`"))),
    }
}

pub fn parse_fit_x(raw: &str) -> Result<FitX, RunError> {
    match raw {
        "raw" => Ok(FitX::Raw),
        "sqrt" => Ok(FitX::Sqrt),
        "log2" => Ok(FitX::Log2),
        "inv" => Ok(FitX::Inv),
        other => Err(RunError::config(format!(
            "fit-x must be raw, sqrt, log2, or inv, got `{other}`"
        ))),
    }
}

/// Mask values accept decimal or 0x-prefixed hex.
pub fn parse_mask(raw: &str) -> Result<u64, RunError> {
    let raw = raw.trim();
    let parsed = if let Some(hex) = raw.strip_prefix("0x").or_else(|| raw.strip_prefix("0X")) {
        u64::from_str_radix(hex, 16)
    } else {
        raw.parse()
    };
    parsed.map_err(|e| RunError::config(format!("bad mask `{raw}`: {e}")))
}

/// "lo:hi" with integer ends.
pub fn parse_window(raw: &str) -> Result<(u64, u64), RunError> {
    let Some((lo, hi)) = raw.split_once(':') else {
        return Err(RunError::config(format!("window must be lo:hi, got `{raw}`")));
    };
    let lo = parse_value::<u64>("window", lo)?;
    let hi = parse_value::<u64>("window", hi)?;
    Ok((lo, hi))
}

/// "lo:hi" with float ends.
pub fn parse_time_window(raw: &str) -> Result<(f64, f64), RunError> {
    let Some((lo, hi)) = raw.split_once(':') else {
        return Err(RunError::config(format!("peak-window must be lo:hi, got `{raw}`")));
    };
    let lo = parse_value::<f64>("peak-window", lo)?;
    let hi = parse_value::<f64>("peak-window", hi)?;
    Ok((lo, hi))
}

/// Accepts "pi", "<x>pi", "pi/<x>", or a plain float.
pub fn parse_alpha(raw: &str) -> Result<f64, RunError> {
    let raw = raw.trim();
    if let Ok(v) = raw.parse::<f64>() {
        return Ok(v);
    }
    if raw == "pi" {
        return Ok(std::f64::consts::PI);
    }
    if let Some(den) = raw.strip_prefix("pi/") {
        let den: f64 = parse_value("alpha", den)?;
        return Ok(std::f64::consts::PI / den);
    }
    if let Some(coeff) = raw.strip_suffix("pi") {
        let coeff: f64 = parse_value("alpha", coeff)?;
        return Ok(coeff * std::f64::consts::PI);
    }
    Err(RunError::config(format!(
        "alpha must be a float, \"pi\", \"<x>pi\", or \"pi/<x>\", got `{raw}`"
    )))
}
