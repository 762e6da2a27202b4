//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::process::ExitCode;

use elastic_enhancement::cli::{curve_rows, uniform_grid, CurveMethod};
use elastic_enhancement::critical::{eta_critical, FminInverter};
use elastic_enhancement::enhancement::{
    approx_large_kappa, enhancement_exact, repr_large_kappa, repr_small_kappa, series_small_kappa,
    slope_at_origin,
};
use elastic_enhancement::rmtsim::{
    delay_stats_from_records, enhancement_from_records, mean_s_and_transmission, mean_s_self_consistent,
    realization_rng, sample_spectrum, simulate, solve_g, Ensemble, ScatteringModel,
};
use elastic_enhancement::{Chaoticity, QuadratureConfig, Result};

// Tolerances.
const TOL_REGULAR: f64 = 1e-8;
const TOL_GUE: f64 = 1e-8;
const TOL_SLOPE: f64 = 0.02;
const TOL_REPR_SMALL: f64 = 1e-5;
const TOL_REPR_LARGE: f64 = 1e-4;
const TOL_SERIES: f64 = 1e-3;
const TOL_LARGE_KAPPA: f64 = 0.01;
const RETURN_LEVEL: f64 = 1.99;
const TOL_ROUND_TRIP: f64 = 1e-3;
const Z_MAX: f64 = 3.0;
const SIGMA_MAX: f64 = 0.05;
const UNITARITY_MAX: f64 = 1e-10;
const RESIDUAL_MAX: f64 = 1e-12;

// Monte Carlo setup.
const SEED_ENHANCEMENT: u64 = 7;
const SEED_WEAK: u64 = 10;
const SEED_SELF_CONSISTENT: u64 = 12;
const MC_REALIZATIONS: usize = 2000;
const WEAK_REALIZATIONS: usize = 1000;
const SELF_CONSISTENT_SPECTRA: usize = 400;
const WEAK_X: f64 = 0.01;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

fn gue_closed_form(eta: f64) -> f64 {
    1.0 + (1.0 - (-eta).exp()) / eta
}

fn c1_regular(cfg: &QuadratureConfig) -> Result<Outcome> {
    let mut worst: f64 = 0.0;
    for eta in [0.1, 1.0, 10.0, 100.0] {
        let f = enhancement_exact(eta, Chaoticity::REGULAR, cfg)?.f;
        worst = worst.max((f - 2.0).abs());
    }
    Ok(Outcome::new(
        worst <= TOL_REGULAR,
        format!("max |F(eta|0) - 2| = {worst:.1e}"),
    ))
}

fn c2_gue(cfg: &QuadratureConfig) -> Result<Outcome> {
    let mut worst: f64 = 0.0;
    for eta in [0.01, 0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 50.0, 100.0] {
        let f = enhancement_exact(eta, Chaoticity::Infinite, cfg)?.f;
        worst = worst.max((f - gue_closed_form(eta)).abs());
    }
    Ok(Outcome::new(
        worst <= TOL_GUE,
        format!("max |F(eta|inf) - closed form| = {worst:.1e}"),
    ))
}

fn c3_slope(cfg: &QuadratureConfig) -> Result<Outcome> {
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for kappa in [0.5, 5.0, 50.0]
        .map(Chaoticity::Finite)
        .into_iter()
        .chain([Chaoticity::Infinite])
    {
        let slope = slope_at_origin(kappa, cfg)?;
        worst = worst.max((slope + 0.5).abs());
        parts.push(format!("{kappa}: {slope:.5}"));
    }
    Ok(Outcome::new(
        worst <= TOL_SLOPE,
        format!("dF/deta(0+) [{}]", parts.join(", ")),
    ))
}

fn c4_representations(cfg: &QuadratureConfig) -> Result<Outcome> {
    let (mut small, mut large): (f64, f64) = (0.0, 0.0);
    for k in [0.5, 5.0, 50.0] {
        let kappa = Chaoticity::Finite(k);
        for eta in [0.5, 1.0, 2.0, 5.0] {
            let exact = enhancement_exact(eta, kappa, cfg)?.f;
            small = small.max((repr_small_kappa(eta, kappa, cfg)?.f - exact).abs());
            large = large.max((repr_large_kappa(eta, kappa, cfg)?.f - exact).abs());
        }
    }
    Ok(Outcome::new(
        small <= TOL_REPR_SMALL && large <= TOL_REPR_LARGE,
        format!("max deviation small-kappa {small:.1e}, large-kappa {large:.1e}"),
    ))
}

fn c5_series(cfg: &QuadratureConfig) -> Result<Outcome> {
    let (eta, k) = (2.0, 0.1);
    let exact = enhancement_exact(eta, Chaoticity::Finite(k), cfg)?.f;
    let errors = (1..=3)
        .map(|order| Ok((series_small_kappa(eta, k, order)?.f - exact).abs()))
        .collect::<Result<Vec<_>>>()?;
    let decreasing = errors.windows(2).all(|w| w[1] < w[0]);
    Ok(Outcome::new(
        errors[2] <= TOL_SERIES && decreasing,
        format!(
            "errors by order {:.2e}, {:.2e}, {:.2e}",
            errors[0], errors[1], errors[2]
        ),
    ))
}

fn c6_large_kappa(cfg: &QuadratureConfig) -> Result<Outcome> {
    let kappa = Chaoticity::Finite(50.0);
    let mut worst: f64 = 0.0;
    for eta in uniform_grid(0.2, 5.0, 20).unwrap() {
        let exact = enhancement_exact(eta, kappa, cfg)?.f;
        worst = worst.max((approx_large_kappa(eta, kappa)?.f - exact).abs());
    }
    Ok(Outcome::new(
        worst <= TOL_LARGE_KAPPA,
        format!("max deviation at kappa=50: {worst:.2e}"),
    ))
}

fn c7_curves(cfg: &QuadratureConfig) -> Result<Outcome> {
    let grid = uniform_grid(0.0, 12.0, 241).unwrap();
    let step = grid[1] - grid[0];
    let mut pass = true;
    let mut parts = Vec::new();
    for k in [0.5, 5.0, 50.0] {
        let kappa = Chaoticity::Finite(k);
        let rows = curve_rows(&[kappa], &grid, CurveMethod::Exact, cfg).unwrap();
        let f: Vec<f64> = rows.iter().filter(|r| r.method == "exact").map(|r| r.f).collect();
        let starts_at_two = f[0] == 2.0;
        // Chord slopes from the origin, extrapolated to zero step.
        let chord = |i: usize| (f[i] - 2.0) / grid[i];
        let initial_slope = 2.0 * chord(1) - chord(2);
        let tangent = (initial_slope + 0.5).abs() <= TOL_SLOPE;
        let (i_min, &f_curve) = f.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).unwrap();
        let interior = i_min > 0 && i_min + 1 < f.len();
        let eta_end = (50.0 * k).max(100.0);
        let f_end = enhancement_exact(eta_end, kappa, cfg)?.f;
        let returns = f_end > RETURN_LEVEL;
        let cp = eta_critical(kappa, cfg)?;
        let consistent =
            (cp.eta_c - grid[i_min]).abs() <= step && f_curve >= cp.f_min && f_curve - cp.f_min <= 1e-3;
        let ok = starts_at_two && tangent && interior && returns && consistent;
        pass &= ok;
        parts.push(format!(
            "kappa={k}: start={starts_at_two} slope {initial_slope:.4} min at {:.2} (eta_c {:.4}, {}) F({eta_end})={f_end:.4}{}",
            grid[i_min],
            cp.eta_c,
            if consistent { "consistent" } else { "inconsistent" },
            if returns { "" } else { " < 1.99" }
        ));
    }
    Ok(Outcome::new(pass, parts.join("; ")))
}

fn c8_round_trip(cfg: &QuadratureConfig) -> Result<Outcome> {
    let inverter = FminInverter::new(cfg)?;
    let mut worst: f64 = 0.0;
    for k in [0.5, 5.0, 50.0] {
        let f_min = eta_critical(Chaoticity::Finite(k), cfg)?.f_min;
        let back = inverter.invert(f_min)?.as_f64();
        worst = worst.max((back / k - 1.0).abs());
    }
    Ok(Outcome::new(
        worst <= TOL_ROUND_TRIP,
        format!("max relative kappa error {worst:.1e}"),
    ))
}

struct GueRun {
    f: f64,
    f_err: f64,
    f_var_q: f64,
    f_var_q_err: f64,
}

fn c9_monte_carlo() -> Result<(Outcome, GueRun)> {
    let eta = 1.0;
    let mut pass = true;
    let mut parts = Vec::new();
    let mut gue = None;
    for (ensemble, reference) in [
        (Ensemble::Gue, gue_closed_form(eta)),
        (Ensemble::PoissonDiagonal, 2.0),
    ] {
        let model = ScatteringModel::with_eta(200, 20, eta, 1.0, ensemble)?;
        let records = simulate(&model, MC_REALIZATIONS, SEED_ENHANCEMENT)?;
        let est = enhancement_from_records(&records, SEED_ENHANCEMENT)?;
        let z = est.f.z_score(reference);
        pass &= z.abs() <= Z_MAX && est.f.std_error <= SIGMA_MAX && est.max_unitarity_deficit < UNITARITY_MAX;
        parts.push(format!(
            "{}: F={:.4}±{:.4} ref {reference:.4} z={z:+.2} deficit {:.1e}",
            ensemble.name(),
            est.f.value,
            est.f.std_error,
            est.max_unitarity_deficit
        ));
        if ensemble == Ensemble::Gue {
            let delay = delay_stats_from_records(&records, &model, SEED_ENHANCEMENT)?;
            gue = Some(GueRun {
                f: est.f.value,
                f_err: est.f.std_error,
                f_var_q: delay.f_from_var_q.value,
                f_var_q_err: delay.f_from_var_q.std_error,
            });
        }
    }
    Ok((Outcome::new(pass, parts.join("; ")), gue.unwrap()))
}

fn c10_weak_coupling() -> Result<Outcome> {
    let x = WEAK_X;
    let model = ScatteringModel::with_x(200, 20, x, 1.0, Ensemble::Gue)?;
    let est = mean_s_and_transmission(&model, WEAK_REALIZATIONS, SEED_WEAK)?;
    let s_ref = (1.0 - x) / (1.0 + x);
    let t_ref = 4.0 * x / ((1.0 + x) * (1.0 + x));
    let s_gap = (est.s_aa_re.value - s_ref).abs();
    let t_gap = (est.transmission.value - t_ref).abs();
    let s_tol = Z_MAX * est.s_aa_re.std_error + x * x;
    let t_tol = Z_MAX * est.transmission.std_error + 10.0 * x * x;
    Ok(Outcome::new(
        s_gap <= s_tol && t_gap <= t_tol,
        format!(
            "<S>={:.5} vs {s_ref:.5} (|d|={s_gap:.1e} tol {s_tol:.1e}); T={:.5} vs {t_ref:.5} (|d|={t_gap:.1e} tol {t_tol:.1e})",
            est.s_aa_re.value, est.transmission.value
        ),
    ))
}

fn c11_delay_time(run: &GueRun) -> Outcome {
    let sigma = run.f_err.hypot(run.f_var_q_err);
    let gap = (run.f_var_q - run.f).abs();
    Outcome::new(
        gap <= Z_MAX * sigma,
        format!(
            "F from var Q {:.4}±{:.4} vs F {:.4}±{:.4} ({:.2} combined sigma)",
            run.f_var_q,
            run.f_var_q_err,
            run.f,
            run.f_err,
            gap / sigma
        ),
    )
}

fn c12_self_consistent() -> Result<Outcome> {
    let x = WEAK_X;
    let model = ScatteringModel::with_x(1000, 100, x, 1.0, Ensemble::PoissonDiagonal)?;
    let mut rng = realization_rng(SEED_SELF_CONSISTENT, u64::MAX);
    let spectrum = sample_spectrum(model.ensemble, model.n_levels, model.mean_spacing, &mut rng)?;
    let single = solve_g(&spectrum, model.gamma, model.channel_ratio(), model.energy, 1e-13)?;
    let sc = mean_s_self_consistent(&model, SELF_CONSISTENT_SPECTRA, SEED_SELF_CONSISTENT, 1e-13)?;
    let s_ref = (1.0 - x) / (1.0 + x);
    let gap = (sc.s_re.value - s_ref).abs();
    let tol = Z_MAX * sc.s_re.std_error + x * x;
    let residual = single.residual.max(sc.max_residual);
    Ok(Outcome::new(
        residual < RESIDUAL_MAX && gap <= tol,
        format!(
            "residual {residual:.1e}; <S>={:.5}±{:.5} vs {s_ref:.5} (|d|={gap:.1e} tol {tol:.1e})",
            sc.s_re.value, sc.s_re.std_error
        ),
    ))
}

fn report(id: usize, name: &str, outcome: Result<Outcome>) -> bool {
    let outcome = outcome.unwrap_or_else(|e| Outcome::new(false, format!("error: {e}")));
    println!(
        "{} [{id:>2}] {name}: {}",
        if outcome.pass { "PASS" } else { "FAIL" },
        outcome.detail
    );
    outcome.pass
}

fn main() -> ExitCode {
    let cfg = QuadratureConfig::default();
    let mut passed = vec![
        report(1, "regular limit", c1_regular(&cfg)),
        report(2, "GUE limit", c2_gue(&cfg)),
        report(3, "universal initial slope", c3_slope(&cfg)),
        report(4, "alternative representations", c4_representations(&cfg)),
        report(5, "small-kappa series", c5_series(&cfg)),
        report(6, "large-kappa approximation", c6_large_kappa(&cfg)),
        report(7, "enhancement curves", c7_curves(&cfg)),
        report(8, "F_min inversion round trip", c8_round_trip(&cfg)),
    ];
    let (c9, gue) = match c9_monte_carlo() {
        Ok((outcome, run)) => (Ok(outcome), Some(run)),
        Err(e) => (Err(e), None),
    };
    passed.push(report(9, "Monte Carlo enhancement factor", c9));
    passed.push(report(
        10,
        "weak-coupling mean S and transmission",
        c10_weak_coupling(),
    ));
    passed.push(match gue {
        Some(run) => report(11, "delay-time variance", Ok(c11_delay_time(&run))),
        None => report(11, "delay-time variance", Ok(Outcome::new(false, "no GUE run"))),
    });
    passed.push(report(12, "self-consistent mean S", c12_self_consistent()));

    let n_pass = passed.iter().filter(|&&p| p).count();
    println!("acceptance: {n_pass}/{} criteria passed", passed.len());
    if n_pass == passed.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
