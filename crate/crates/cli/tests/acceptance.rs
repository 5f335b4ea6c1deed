//! The acceptance gate. Twelve numbered checks, each printing one
//! PASS/FAIL line with its measured figures and elapsed time (visible
//! under --nocapture; a FAIL also panics with the same line). Tolerances
//! are pinned as consts next to the check that uses them.
//!
//! Check 05 is expected red: the first-order resonant estimate carries a
//! structural factor-2 error against the exact driven dynamics, so the
//! 20% band it is held to here cannot be met. The check states the
//! formula's actual accuracy in its output rather than widening the band.

use qaction_core::{
    build_cavity_window, build_directory, build_grover, build_prep, build_shor_phase,
    cavity_energy, energy_moments, evolve_driven, first_order_probability,
    fock_label_from_integer, grover_reduced, hypothesis_table, inner_product,
    integer_from_fock_label, run_resonance_scan, shor_average_energy, standard_suite, C64,
    CavityModel, DirectoryModel, GroverModel, GroverVariant, HamiltonianSpec, ModelId, PrepModel,
    ScanConfig, ShorPhaseModel, StateVector, StaticEvolver, StepControl,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI, TAU};
use std::path::PathBuf;
use std::process::Command;
use std::sync::{Arc, Mutex, OnceLock};
use std::time::Instant;

fn verdict(id: u32, started: Instant, pass: bool, detail: &str) {
    let state = if pass { "PASS" } else { "FAIL" };
    let line = format!(
        "criterion {id:02}: {state}; {detail} ({:.1}s)",
        started.elapsed().as_secs_f64()
    );
    println!("{line}");
    assert!(pass, "{line}");
}

/// Full-space evolvers are the expensive part (dense eigensolve at
/// N = 4096); checks 01 and 02 share them through this cache.
fn grover_evolver(variant: GroverVariant, size: u64) -> Arc<StaticEvolver> {
    static CACHE: OnceLock<Mutex<HashMap<(bool, u64), Arc<StaticEvolver>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut map = cache.lock().unwrap();
    let key = (variant == GroverVariant::H2, size);
    if let Some(ev) = map.get(&key) {
        return Arc::clone(ev);
    }
    let model = GroverModel::from_size(size, 1.0, variant).unwrap();
    let h = build_grover(&model).unwrap();
    let ev = Arc::new(StaticEvolver::new(&h).unwrap());
    map.insert(key, Arc::clone(&ev));
    ev
}

/// Least squares through the origin; r2 uses the centered total sum of
/// squares so a constant fit scores zero.
fn origin_fit(points: &[(f64, f64)]) -> (f64, f64) {
    let sxy: f64 = points.iter().map(|(x, y)| x * y).sum();
    let sxx: f64 = points.iter().map(|(x, _)| x * x).sum();
    let slope = sxy / sxx;
    let mean_y = points.iter().map(|(_, y)| y).sum::<f64>() / points.len() as f64;
    let ss_res: f64 = points.iter().map(|(x, y)| (y - slope * x).powi(2)).sum();
    let ss_tot: f64 = points.iter().map(|(_, y)| (y - mean_y).powi(2)).sum();
    (slope, 1.0 - ss_res / ss_tot)
}

fn coefficient_of_variation(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    var.sqrt() / mean
}

const FLIP_TIME_REL_TOL: f64 = 5e-3;
const PEAK_PROBABILITY_MIN: f64 = 0.999;

#[test]
fn criterion_01_flip_time_scaling() {
    let started = Instant::now();
    let mut worst_rel = 0.0f64;
    let mut min_peak = 1.0f64;
    for size in [4u64, 16, 64, 256, 1024, 4096] {
        let model = GroverModel::from_size(size, 1.0, GroverVariant::H1).unwrap();
        let ev = grover_evolver(GroverVariant::H1, size);
        let psi0 = model.initial_state().unwrap();
        let target = model.target_state().unwrap();
        let predicted = PI * (size as f64).sqrt() / 2.0;

        let n = 3000usize;
        let times: Vec<f64> = (0..=n)
            .map(|i| 1.5 * predicted * i as f64 / n as f64)
            .collect();
        let trace = ev.trace(&psi0, Some(&target), &times, false).unwrap();
        let probs: Vec<f64> = trace.overlaps().iter().map(|z| z.norm_sqr()).collect();
        let (i, &peak) = probs
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap();
        // parabola through the three samples around the grid maximum
        let t_star = if i == 0 || i == n {
            times[i]
        } else {
            let denom = probs[i - 1] - 2.0 * probs[i] + probs[i + 1];
            let h = 1.5 * predicted / n as f64;
            if denom == 0.0 {
                times[i]
            } else {
                times[i] + 0.5 * h * (probs[i - 1] - probs[i + 1]) / denom
            }
        };
        worst_rel = worst_rel.max((t_star - predicted).abs() / predicted);
        min_peak = min_peak.min(peak);
    }
    let pass = worst_rel <= FLIP_TIME_REL_TOL && min_peak >= PEAK_PROBABILITY_MIN;
    verdict(
        1,
        started,
        pass,
        &format!(
            "full-space flip time within {:.4}% of pi sqrt(N)/(2E) over N in 4..4096 \
             (tol 0.5%), min peak {min_peak:.6} (floor {PEAK_PROBABILITY_MIN})",
            100.0 * worst_rel
        ),
    );
}

const CROSS_VALIDATION_ABS_TOL: f64 = 1e-8;

#[test]
fn criterion_02_engine_cross_validation() {
    let started = Instant::now();
    let mut worst = 0.0f64;
    for variant in [GroverVariant::H1, GroverVariant::H2] {
        for size in [16u64, 256, 4096] {
            let model = GroverModel::from_size(size, 1.0, variant).unwrap();
            let reduced = grover_reduced(&model).unwrap();
            let ev = grover_evolver(variant, size);
            let psi0 = model.initial_state().unwrap();
            let target = model.target_state().unwrap();
            let times: Vec<f64> = (0..200)
                .map(|i| 2.0 * reduced.flip_time * i as f64 / 199.0)
                .collect();
            let trace = ev.trace(&psi0, Some(&target), &times, false).unwrap();
            for (z, &t) in trace.overlaps().iter().zip(&times) {
                worst = worst.max((z.norm_sqr() - reduced.probability(t)).abs());
            }
        }
    }
    verdict(
        2,
        started,
        worst <= CROSS_VALIDATION_ABS_TOL,
        &format!(
            "full-space vs rank-2 curves agree to {worst:.2e} pointwise \
             (tol {CROSS_VALIDATION_ABS_TOL:.0e}; 200 points, both variants, N in 16/256/4096)"
        ),
    );
}

const H2_FLIP_ABS_TOL: f64 = 1e-6;
const H2_FLIP_CV_MAX: f64 = 0.02;

#[test]
fn criterion_03_commutator_form_gap_and_flip() {
    let started = Instant::now();
    let mut flips = Vec::with_capacity(4033);
    let mut worst_gap_excess = 0.0f64;
    let mut worst_flip_err = 0.0f64;
    let mut factor_two = true;
    for size in 64u64..=4096 {
        let model = GroverModel::from_size(size, 1.0, GroverVariant::H2).unwrap();
        let r = grover_reduced(&model).unwrap();
        let a = 1.0 / (size as f64).sqrt();
        let b = (1.0 - 1.0 / size as f64).sqrt();
        // gap -> 2E with the finite-size deficit bounded by 2E/N
        worst_gap_excess = worst_gap_excess.max((r.gap - 2.0).abs() * size as f64 / 2.0);
        let oracle = (FRAC_PI_2 - a.asin()) / b;
        worst_flip_err = worst_flip_err.max((r.flip_time - oracle).abs());
        factor_two &= (r.limit_flip_time().unwrap() - 2.0 * r.quoted_flip_time()).abs() <= 1e-12;
        flips.push(r.flip_time);
    }
    let cv = coefficient_of_variation(&flips);
    let pass = worst_gap_excess <= 1.0
        && worst_flip_err <= H2_FLIP_ABS_TOL
        && cv < H2_FLIP_CV_MAX
        && factor_two;
    verdict(
        3,
        started,
        pass,
        &format!(
            "gap deficit <= 2E/N (worst {worst_gap_excess:.3} of the allowance), flip time \
             matches (pi/2 - asin a)/(E b) to {worst_flip_err:.1e} with CV {:.2}% over \
             N in 64..4096; the large-N flip pi/(2E) is twice the commonly quoted pi/(4E)",
            100.0 * cv
        ),
    );
}

const DIRECTORY_R2_MIN: f64 = 0.95;

#[test]
fn criterion_04_directory_linear_scaling() {
    let started = Instant::now();
    let e_max = 1.0;
    let mut points = Vec::new();
    let mut measured = Vec::new();
    for n in [8usize, 16, 32, 64, 128] {
        let target = n / 2;
        let omega = e_max * target as f64 / (n - 1) as f64;
        let model = DirectoryModel::equally_spaced(n, e_max, 0.01, omega, 1000).unwrap();
        let driven = build_directory(&model).unwrap();
        let config = ScanConfig {
            horizon: 32.0 * n as f64 / e_max,
            step_control: StepControl { record_populations: true, ..StepControl::default() },
            dominance_threshold: 10.0,
        };
        let scan = run_resonance_scan(&driven, target, &config).unwrap();
        let t_disc = scan
            .discrimination_time
            .unwrap_or_else(|| panic!("no discrimination at N = {n}"));
        points.push((n as f64, t_disc));
        measured.push(format!("{t_disc:.1}"));
    }
    let (slope, r2) = origin_fit(&points);
    verdict(
        4,
        started,
        r2 >= DIRECTORY_R2_MIN,
        &format!(
            "discrimination times [{}] vs N in 8..128: through-origin slope {slope:.2}, \
             r2 {r2:.4} (floor {DIRECTORY_R2_MIN}); equal spacing, eps 0.01, seed 1000",
            measured.join(", ")
        ),
    );
}

const FIRST_ORDER_REL_TOL: f64 = 0.20;
const PERTURBATIVE_CEILING: f64 = 0.1;

#[test]
fn criterion_05_first_order_estimate_validity() {
    let started = Instant::now();
    let v = 0.01;
    let tag = "two-level";
    let h0 = HamiltonianSpec::diagonal(vec![0.0, 1.0], tag).unwrap();
    let mut m = ndarray::Array2::<C64>::zeros((2, 2));
    m[[0, 1]] = C64::new(v, 0.0);
    m[[1, 0]] = C64::new(v, 0.0);
    let pert = HamiltonianSpec::dense_hermitian(m, tag).unwrap();
    let driven = HamiltonianSpec::driven(h0, pert, 1.0).unwrap();
    let psi0 = StateVector::basis_state(2, 0, tag).unwrap();
    let control = StepControl { record_populations: true, ..StepControl::default() };
    // horizon reaches the top of the perturbative window: exact
    // sin^2(vt/2) = 0.1 at t ~ 64
    let trace = evolve_driven(&psi0, &driven, 70.0, &control, None).unwrap();
    assert!(trace.is_valid());

    let mut worst_rel = 0.0f64;
    let mut ratios = Vec::new();
    for (k, &t) in trace.times().iter().enumerate() {
        if t <= 0.0 {
            continue;
        }
        let exact = trace.populations().unwrap()[k][1];
        if exact > PERTURBATIVE_CEILING {
            break;
        }
        // resonant reading of the estimate: the level pair is driven at
        // its own splitting, so the formula runs at zero detuning
        let printed = first_order_probability(C64::new(v, 0.0), 1.0, 1.0, t).unwrap();
        worst_rel = worst_rel.max((printed - exact).abs() / exact);
        ratios.push(printed / exact);
    }
    ratios.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = ratios[ratios.len() / 2];
    verdict(
        5,
        started,
        worst_rel <= FIRST_ORDER_REL_TOL,
        &format!(
            "resonant estimate |v|^2 t^2 / 2 deviates up to {:.0}% from the exact driven \
             population over the p <= 0.1 window (tol 20%); estimate/exact spans \
             {:.2}..{:.2}, median {median:.2}",
            100.0 * worst_rel,
            ratios.first().unwrap(),
            ratios.last().unwrap()
        ),
    );
}

const BIJECTION_LIMIT: u64 = 1_000_000;
const SPACING_LIMIT: u64 = 100_000;

#[test]
fn criterion_06_label_bijection_and_spacing() {
    let started = Instant::now();
    for n in 1..=BIJECTION_LIMIT {
        let label = fock_label_from_integer(n).unwrap();
        assert_eq!(integer_from_fock_label(&label).unwrap(), n, "round trip broke at {n}");
    }
    let mut worst_lo = f64::INFINITY;
    let mut worst_hi = 0.0f64;
    let mut pass = true;
    for n in 2..=SPACING_LIMIT {
        let spacing = cavity_energy(n + 1, 1.0).unwrap() - cavity_energy(n, 1.0).unwrap();
        let lo = 1.0 / (n + 1) as f64;
        let hi = 1.0 / n as f64;
        pass &= spacing >= lo && spacing <= hi;
        worst_lo = worst_lo.min(spacing * (n + 1) as f64);
        worst_hi = worst_hi.max(spacing * n as f64);
    }
    verdict(
        6,
        started,
        pass,
        &format!(
            "label <-> integer identity on 1..=10^6; spacing/bound ratios stay in \
             [{worst_lo:.4}, {worst_hi:.4}] of [omega/(N+1), omega/N] for N in 2..=10^5"
        ),
    );
}

const SELECTION_CV_MAX: f64 = 0.30;

#[test]
fn criterion_07_selection_time_scaling() {
    let started = Instant::now();
    let omega = 1.0;
    let mut products = Vec::new();
    let mut times = Vec::new();
    for target_label in [20u64, 40, 60, 80, 100] {
        let window = (target_label - 5, target_label + 5);
        let probe = CavityModel::new(omega, 105, window, 1e-3 * omega, 0.0).unwrap();
        let drive = probe.resonant_frequency(target_label).unwrap();
        let model = CavityModel::new(omega, 105, window, 1e-3 * omega, drive).unwrap();
        let sector = build_cavity_window(&model).unwrap();
        let target = sector.index_of_label(target_label).unwrap();
        let e_t = sector.energies()[target];
        let gap = sector
            .energies()
            .iter()
            .enumerate()
            .filter(|&(k, _)| k != target)
            .map(|(_, &e)| (e - e_t).abs())
            .fold(f64::INFINITY, f64::min);
        let config = ScanConfig {
            horizon: 8.0 / gap,
            step_control: StepControl { record_populations: true, ..StepControl::default() },
            dominance_threshold: 10.0,
        };
        let scan = run_resonance_scan(sector.driven(), target, &config).unwrap();
        let t_disc = scan
            .discrimination_time
            .unwrap_or_else(|| panic!("no discrimination at label {target_label}"));
        products.push(t_disc * gap);
        times.push(format!("{t_disc:.0}"));
    }
    let cv = coefficient_of_variation(&products);
    verdict(
        7,
        started,
        cv < SELECTION_CV_MAX,
        &format!(
            "selection times [{}] for labels 20..100; time * nearest-gap constant to \
             CV {:.2}% (ceiling 30%), so the time itself grows with the label",
            times.join(", "),
            100.0 * cv
        ),
    );
}

const PHASE_FIDELITY_SLACK: f64 = 1e-10;
const PHASE_MEAN_REL_TOL: f64 = 1e-12;

#[test]
fn criterion_08_phase_register_exactness() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(20260815);
    let omega = 1.0;
    let mut min_fidelity = 1.0f64;
    let mut worst_mean_rel = 0.0f64;
    let mut worst_ratio = (0.0f64, f64::INFINITY);
    for n in 1u32..=10 {
        let closed_mean = shor_average_energy(n, omega).unwrap();
        for _ in 0..20 {
            let alpha: f64 = rng.random_range(0.0..TAU);
            let model = ShorPhaseModel::new(n, omega, alpha).unwrap();
            let build = build_shor_phase(&model).unwrap();
            let ev = StaticEvolver::new(&build.h).unwrap();
            let out = ev.state_at(&build.input, build.t_n).unwrap();
            min_fidelity = min_fidelity.min(inner_product(&build.target, &out).unwrap().norm_sqr());
            let (mean, _) = energy_moments(&build.input, &build.h).unwrap();
            worst_mean_rel = worst_mean_rel.max((mean - closed_mean).abs() / closed_mean);
        }
        // at alpha = pi the action is pi (2^{n-1} - 1/2) on the nose
        let model = ShorPhaseModel::new(n, omega, PI).unwrap();
        let build = build_shor_phase(&model).unwrap();
        let ev = StaticEvolver::new(&build.h).unwrap();
        let (mean, _) = energy_moments(&build.input, &build.h).unwrap();
        let excess = mean - ev.eigenvalues()[0];
        let action = excess * build.t_n;
        let expected = PI * ((1u64 << (n - 1)) as f64 - 0.5);
        assert!((action - expected).abs() <= 1e-12 * expected);
        let ratio = action / (1u64 << n) as f64;
        worst_ratio = (worst_ratio.0.max(ratio), worst_ratio.1.min(ratio));
    }
    let pass = min_fidelity >= 1.0 - PHASE_FIDELITY_SLACK
        && worst_mean_rel <= PHASE_MEAN_REL_TOL
        && worst_ratio.1 >= FRAC_PI_4 - 1e-15
        && worst_ratio.0 <= FRAC_PI_2 + 1e-15;
    verdict(
        8,
        started,
        pass,
        &format!(
            "200 random phases over n in 1..10: fidelity >= 1 - {:.1e}, mean energy matches \
             omega (2^(n-1) - 1/2) to {worst_mean_rel:.1e}; alpha = pi action/2^n in \
             [{:.4}, {:.4}], inside [pi/4, pi/2]",
            1.0 - min_fidelity,
            worst_ratio.1,
            worst_ratio.0
        ),
    );
}

const SPEED_LIMIT_CASES: usize = 200;

#[test]
fn criterion_09_speed_limit_suite() {
    let started = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("bound.csv");
    let out = Command::new(env!("CARGO_BIN_EXE_qaction"))
        .args([
            "bound-suite",
            "--cases",
            &SPEED_LIMIT_CASES.to_string(),
            "--max-dim",
            "64",
            "--seed",
            "90210",
            "--out",
            out_path.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    // exit 3 marks bound violations; the table is still written
    let clean_exit = out.status.code() == Some(0);

    let text = std::fs::read_to_string(&out_path).unwrap();
    let mut rows = 0usize;
    let mut orthogonalizing = 0usize;
    let mut violations = 0usize;
    let mut header: Vec<&str> = Vec::new();
    for line in text.lines().filter(|l| !l.starts_with('#')) {
        if header.is_empty() {
            header = line.split(',').collect();
            continue;
        }
        rows += 1;
        let field = |name: &str| {
            let idx = header.iter().position(|h| *h == name).unwrap();
            line.split(',').nth(idx).unwrap().to_owned()
        };
        if field("satisfied") != "true" {
            violations += 1;
        }
        let t_perp = field("t_perp");
        if t_perp.is_empty() {
            continue;
        }
        orthogonalizing += 1;
        // recheck the bound from the raw columns, not the tool's verdict
        let t: f64 = t_perp.parse().unwrap();
        let bound: f64 = field("bound").parse().unwrap();
        if t < bound * (1.0 - 1e-6) {
            violations += 1;
        }
    }
    let pass = clean_exit && rows == SPEED_LIMIT_CASES && violations == 0;
    verdict(
        9,
        started,
        pass,
        &format!(
            "{rows} random static cases (dims 2..=64), {orthogonalizing} orthogonalizing: \
             {violations} bound violations at slack 1e-6"
        ),
    );
}

const PREP_EXACT_TOL: f64 = 1e-12;
const MC_TARGETS: usize = 1000;

#[test]
fn criterion_10_preparation_products() {
    let started = Instant::now();
    let n = 16u32;
    let model = PrepModel::new(n, u64::from(u16::MAX), 1.0).unwrap();
    let build = build_prep(&model).unwrap();
    let mut worst = 0.0f64;
    for h in &build.schedule {
        let zero = StateVector::basis_state(2, 0, h.basis_tag()).unwrap();
        let (_, spread) = energy_moments(&zero, h).unwrap();
        worst = worst.max((spread * 1.0 - FRAC_PI_2).abs());
    }
    let exact_ok = worst <= PREP_EXACT_TOL
        && (build.total_spread_time_product - f64::from(n) * FRAC_PI_2).abs() <= PREP_EXACT_TOL;

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut total = 0.0f64;
    for _ in 0..MC_TARGETS {
        let mask = u64::from(rng.random::<u16>());
        let model = PrepModel::new(n, mask, 1.0).unwrap();
        total += build_prep(&model).unwrap().total_spread_time_product;
    }
    let mean = total / MC_TARGETS as f64;
    let expected = f64::from(n) / 2.0 * FRAC_PI_2;
    // binomial bit count: sigma of the sample mean is (pi/2) sqrt(n/4/M)
    let three_sigma = 3.0 * FRAC_PI_2 * (f64::from(n) / 4.0 / MC_TARGETS as f64).sqrt();
    let mc_ok = (mean - expected).abs() <= three_sigma;
    verdict(
        10,
        started,
        exact_ok && mc_ok,
        &format!(
            "per-bit spread*time off pi/2 by {worst:.1e} (tol 1e-12); {MC_TARGETS}-target \
             mean {mean:.4} vs (n/2)(pi/2) = {expected:.4}, window {three_sigma:.4}"
        ),
    );
}

const RATIO_FLOOR: f64 = 0.5;
const SEARCH_RATIO_SPREAD_MAX: f64 = 0.25;

#[test]
fn criterion_11_action_ratio_table() {
    let started = Instant::now();
    let reports = standard_suite().unwrap();
    let table = hypothesis_table(&reports).unwrap();
    let min_ratio = table.rows().iter().map(|r| r.ratio).fold(f64::INFINITY, f64::min);
    let search: Vec<f64> = table
        .rows()
        .iter()
        .filter(|r| r.model == ModelId::GroverH1)
        .map(|r| r.ratio)
        .collect();
    let mean = search.iter().sum::<f64>() / search.len() as f64;
    let spread = (search.iter().fold(0.0f64, |a, &v| a.max(v))
        - search.iter().fold(f64::INFINITY, |a, &v| a.min(v)))
        / mean;
    // the separation claim is asymptotic; the table only has to say so
    let flagged = table.notes().iter().any(|n| n.contains("asymptotic"));
    let pass = min_ratio >= RATIO_FLOOR
        && search.len() == 3
        && spread < SEARCH_RATIO_SPREAD_MAX
        && flagged;
    verdict(
        11,
        started,
        pass,
        &format!(
            "all seven action/complexity ratios >= {min_ratio:.3} (floor 0.5); search ratios \
             spread {:.1}% over N in 16/256/4096 (ceiling 25%); asymptotic caveat noted",
            100.0 * spread
        ),
    );
}

#[test]
fn criterion_12_deterministic_outputs() {
    let started = Instant::now();
    let golden_dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden");
    let configs: [(&str, &[&str]); 3] = [
        ("grover_h1_n16.csv", &["grover-h1", "--N", "16", "--E", "1"]),
        (
            "shor_phase_n3.json",
            &["shor-phase", "--n", "3", "--omega", "1", "--alpha", "pi", "--format", "json"],
        ),
        ("directory_n8.csv", &["directory", "--N", "8", "--seed", "1000"]),
    ];
    let dir = tempfile::tempdir().unwrap();
    let mut pass = true;
    for (golden_name, args) in configs {
        let golden = std::fs::read(golden_dir.join(golden_name)).unwrap();
        for rerun in 0..2 {
            let out_path = dir.path().join(format!("{rerun}-{golden_name}"));
            let out = Command::new(env!("CARGO_BIN_EXE_qaction"))
                .args(args)
                .arg("--out")
                .arg(&out_path)
                .output()
                .unwrap();
            assert!(out.status.success(), "{golden_name} rerun {rerun} failed");
            pass &= std::fs::read(&out_path).unwrap() == golden;
        }
    }
    verdict(
        12,
        started,
        pass,
        "three representative configs rerun twice each, byte-identical to the stored outputs",
    );
}
