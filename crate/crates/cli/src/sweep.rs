//! One-parameter sweeps: run a subcommand over a value grid, mark failed
//! cells without aborting, and fit the chosen result column against the
//! transformed parameter. Cells are isolated; when a base seed is given,
//! cell i runs with seed base + i.

use std::collections::BTreeMap;

use qaction_core::GroverVariant;

use crate::config::{parse_fit_x, FitX, Layers, SweepArgs, SweepTarget};
use crate::output::Field;
use crate::runner::{
    cavity_columns, directory_columns, grover_columns, resolve_cavity, resolve_directory,
    resolve_grover, resolve_shor, run_cavity, run_directory, run_grover, run_shor, shor_columns,
    RunError, RunOutcome,
};

struct GridSpec {
    key: String,
    values: Vec<String>,
}

fn parse_grid(raw: &str) -> Result<GridSpec, RunError> {
    let Some((key, values)) = raw.split_once('=') else {
        return Err(RunError::config(format!("grid must be key=v1,v2,..., got `{raw}`")));
    };
    let key = key.trim().to_owned();
    if key.is_empty() {
        return Err(RunError::config("grid key is empty"));
    }
    let values: Vec<String> = values
        .split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(String::from)
        .collect();
    if values.is_empty() {
        return Err(RunError::config("grid has no values"));
    }
    Ok(GridSpec { key, values })
}

fn swept_key(target: &SweepTarget) -> &'static str {
    match target {
        SweepTarget::GroverH1(_) | SweepTarget::GroverH2(_) | SweepTarget::Directory(_) => "N",
        SweepTarget::Cavity(_) => "target",
        SweepTarget::ShorPhase(_) => "n",
    }
}

fn default_fit_y(target: &SweepTarget) -> &'static str {
    match target {
        SweepTarget::GroverH1(_) | SweepTarget::GroverH2(_) => "t_star",
        SweepTarget::Directory(_) | SweepTarget::Cavity(_) => "discrimination_time",
        SweepTarget::ShorPhase(_) => "action",
    }
}

fn push_given<T: std::fmt::Display>(out: &mut Vec<(String, String)>, key: &str, v: &Option<T>) {
    if let Some(x) = v {
        out.push((key.to_owned(), x.to_string()));
    }
}

/// Template settings exactly as the caller gave them; resolved per-cell
/// values (seeds, resonance defaults) live in the row columns instead.
fn explicit_template(target: &SweepTarget) -> Vec<(String, String)> {
    let mut out = Vec::new();
    match target {
        SweepTarget::GroverH1(a) | SweepTarget::GroverH2(a) => {
            push_given(&mut out, "N", &a.size);
            push_given(&mut out, "E", &a.energy);
            push_given(&mut out, "target", &a.target);
            push_given(&mut out, "engine", &a.engine);
            push_given(&mut out, "peak-window", &a.peak_window);
            push_given(&mut out, "horizon", &a.horizon);
        }
        SweepTarget::Directory(a) => {
            push_given(&mut out, "N", &a.size);
            push_given(&mut out, "e-max", &a.e_max);
            push_given(&mut out, "eps", &a.eps);
            push_given(&mut out, "omega", &a.omega);
            push_given(&mut out, "target", &a.target);
            push_given(&mut out, "horizon", &a.horizon);
            push_given(&mut out, "steps-per-period", &a.steps_per_period);
            push_given(&mut out, "dominance", &a.dominance);
        }
        SweepTarget::Cavity(a) => {
            push_given(&mut out, "omega", &a.omega);
            push_given(&mut out, "q-max", &a.q_max);
            push_given(&mut out, "window", &a.window);
            push_given(&mut out, "target", &a.target);
            push_given(&mut out, "coupling", &a.coupling);
            push_given(&mut out, "drive", &a.drive);
            push_given(&mut out, "horizon", &a.horizon);
            push_given(&mut out, "steps-per-period", &a.steps_per_period);
            push_given(&mut out, "dominance", &a.dominance);
        }
        SweepTarget::ShorPhase(a) => {
            push_given(&mut out, "n", &a.n);
            push_given(&mut out, "omega", &a.omega);
            push_given(&mut out, "alpha", &a.alpha);
        }
    }
    out
}

fn run_cell(
    target: &SweepTarget,
    layers: &Layers,
    cell_seed: Option<u64>,
) -> Result<RunOutcome, RunError> {
    match target {
        SweepTarget::GroverH1(a) => run_grover(&resolve_grover(GroverVariant::H1, a, layers)?),
        SweepTarget::GroverH2(a) => run_grover(&resolve_grover(GroverVariant::H2, a, layers)?),
        SweepTarget::Directory(a) => run_directory(&resolve_directory(a, layers, cell_seed)?),
        SweepTarget::Cavity(a) => run_cavity(&resolve_cavity(a, layers, cell_seed)?),
        SweepTarget::ShorPhase(a) => run_shor(&resolve_shor(a, layers)?),
    }
}

fn numeric(field: &Field) -> Option<f64> {
    match field {
        Field::F64(v) | Field::OptF64(Some(v)) => Some(*v),
        Field::U64(v) => Some(*v as f64),
        _ => None,
    }
}

pub fn run_sweep(
    args: &SweepArgs,
    file: &BTreeMap<String, String>,
    base_seed: Option<u64>,
) -> Result<(String, Vec<String>, RunOutcome), RunError> {
    let base = Layers::none(file);
    let grid_raw = base
        .pick::<String>("grid", &args.grid)?
        .ok_or_else(|| RunError::config("sweep requires --grid key=v1,v2,..."))?;
    let grid = parse_grid(&grid_raw)?;
    let expected = swept_key(&args.target);
    if grid.key != expected {
        return Err(RunError::config(format!(
            "sweep over {} varies `{expected}`, not `{}`",
            args.target.name(),
            grid.key
        )));
    }
    if matches!(args.target, SweepTarget::Directory(_)) && base_seed.is_none() {
        return Err(RunError::config("directory sweeps draw random couplings; set --seed"));
    }
    let fit_x = match base.pick::<String>("fit-x", &args.fit_x)? {
        Some(s) => parse_fit_x(&s)?,
        None => FitX::Raw,
    };
    let fit_y = base
        .pick::<String>("fit-y", &args.fit_y)?
        .unwrap_or_else(|| default_fit_y(&args.target).to_owned());

    let model_cols = match &args.target {
        SweepTarget::GroverH1(_) | SweepTarget::GroverH2(_) => grover_columns(),
        SweepTarget::Directory(_) => directory_columns(),
        SweepTarget::Cavity(_) => cavity_columns(),
        SweepTarget::ShorPhase(_) => shor_columns(),
    };
    let y_idx = model_cols.iter().position(|c| *c == fit_y).ok_or_else(|| {
        RunError::config(format!(
            "fit-y column `{fit_y}` is not produced by {}",
            args.target.name()
        ))
    })?;

    let mut columns = vec!["index".to_owned(), grid.key.clone(), "status".to_owned(), "error".to_owned()];
    columns.extend(model_cols.iter().cloned());

    let mut rows = Vec::with_capacity(grid.values.len());
    let mut notes: Vec<String> = Vec::new();
    let mut xs: Vec<f64> = Vec::new();
    let mut ys: Vec<f64> = Vec::new();
    for (index, value) in grid.values.iter().enumerate() {
        let layers = Layers { file, over: Some((grid.key.as_str(), value.as_str())) };
        let cell_seed = base_seed.map(|s| s + index as u64);
        match run_cell(&args.target, &layers, cell_seed) {
            Ok(outcome) => {
                let row = outcome
                    .rows
                    .into_iter()
                    .next()
                    .expect("sweepable runs produce one row");
                if let (Ok(x), Some(y)) = (value.parse::<f64>(), numeric(&row[y_idx])) {
                    xs.push(fit_x.apply(x));
                    ys.push(y);
                }
                for note in outcome.notes {
                    let tagged = format!("cell {index}: {note}");
                    if !notes.contains(&tagged) {
                        notes.push(tagged);
                    }
                }
                let mut full = vec![
                    Field::U64(index as u64),
                    Field::Str(value.clone()),
                    Field::Str("ok".to_owned()),
                    Field::Empty,
                ];
                full.extend(row);
                rows.push(full);
            }
            Err(e) => {
                let mut full = vec![
                    Field::U64(index as u64),
                    Field::Str(value.clone()),
                    Field::Str("failed".to_owned()),
                    Field::Str(e.to_string()),
                ];
                full.extend(std::iter::repeat_with(|| Field::Empty).take(model_cols.len()));
                rows.push(full);
            }
        }
    }

    let mut fit: Vec<(String, Field)> = vec![
        ("x-transform".to_owned(), Field::Str(fit_x.label().to_owned())),
        ("y-column".to_owned(), Field::Str(fit_y.clone())),
        ("points".to_owned(), Field::U64(xs.len() as u64)),
    ];
    match (affine_fit(&xs, &ys), origin_fit(&xs, &ys)) {
        (Some((slope, intercept, r2)), Some((oslope, or2))) => {
            fit.push(("slope".to_owned(), Field::F64(slope)));
            fit.push(("intercept".to_owned(), Field::F64(intercept)));
            fit.push(("r2".to_owned(), Field::F64(r2)));
            fit.push(("origin-slope".to_owned(), Field::F64(oslope)));
            fit.push(("origin-r2".to_owned(), Field::F64(or2)));
        }
        _ => notes.push("fit skipped: fewer than two usable points".to_owned()),
    }

    let mut config = vec![
        ("model".to_owned(), args.target.name().to_owned()),
        ("grid".to_owned(), grid_raw.clone()),
        ("fit-x".to_owned(), fit_x.label().to_owned()),
        ("fit-y".to_owned(), fit_y),
    ];
    if let Some(s) = base_seed {
        config.push(("seed-base".to_owned(), s.to_string()));
    }
    for (k, v) in explicit_template(&args.target) {
        if k != grid.key {
            config.push((format!("template.{k}"), v));
        }
    }

    let name = format!("sweep-{}", args.target.name());
    let outcome = RunOutcome { config, notes, rows, fit, post: None };
    Ok((name, columns, outcome))
}

/// Least-squares line y = intercept + slope * x; r2 uses the centered
/// total sum of squares.
fn affine_fit(xs: &[f64], ys: &[f64]) -> Option<(f64, f64, f64)> {
    let n = xs.len();
    if n < 2 {
        return None;
    }
    let nf = n as f64;
    let sx: f64 = xs.iter().sum();
    let sy: f64 = ys.iter().sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| x * y).sum();
    let denom = nf * sxx - sx * sx;
    if denom.abs() < f64::EPSILON * nf * sxx.abs().max(1.0) {
        return None;
    }
    let slope = (nf * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / nf;
    let r2 = r_squared(xs, ys, |x| intercept + slope * x);
    Some((slope, intercept, r2))
}

/// Least-squares line through the origin; r2 shares the centered
/// convention so the two fits are directly comparable.
fn origin_fit(xs: &[f64], ys: &[f64]) -> Option<(f64, f64)> {
    if xs.len() < 2 {
        return None;
    }
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    if sxx <= 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| x * y).sum();
    let slope = sxy / sxx;
    Some((slope, r_squared(xs, ys, |x| slope * x)))
}

fn r_squared<F: Fn(f64) -> f64>(xs: &[f64], ys: &[f64], predict: F) -> f64 {
    let mean = ys.iter().sum::<f64>() / ys.len() as f64;
    let ss_res: f64 = xs.iter().zip(ys).map(|(&x, &y)| (y - predict(x)).powi(2)).sum();
    let ss_tot: f64 = ys.iter().map(|&y| (y - mean).powi(2)).sum();
    if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else if ss_res < f64::EPSILON {
        1.0
    } else {
        0.0
    }
}
