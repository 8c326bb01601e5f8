//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on
//! any failure. Run with `cargo test -p idm-odds-core --test acceptance`.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use idm_odds::analytic::reconstruct_incidence;
use idm_odds::estimator::{fit, FitConfig};
use idm_odds::io::{table_from_csv, REFERENCE_TABLE_CSV};
use idm_odds::simulator::{calibrate_births, cross_section, replicate_study, run_simulation, REFERENCE_ALIVE};
use idm_odds::{
    Analytic, GompertzParams, IncidenceSpec, MortalityRatioParams, MortalitySpec, OddsMethod,
    QuadratureConfig, RateModel, SimConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

const TRUE_GAMMA: [f64; 3] = [0.04, 5.0, 1.0];

fn a1_reference_fit() -> Outcome {
    let start = Instant::now();
    let table = table_from_csv(REFERENCE_TABLE_CSV, 100.0).unwrap();
    let fit = match fit(&table, &FitConfig::new(RateModel::reference())) {
        Ok(f) => f,
        Err(e) => return outcome(false, format!("fit failed: {e}")),
    };
    let elapsed = start.elapsed();
    let g = fit.gamma_hat;
    let target = [0.0330, 3.06, 1.01];
    let tol = [0.005, 0.5, 0.05];
    let expected_ci = [[-0.0127, 0.0787], [-5.70, 11.8], [0.625, 1.39]];
    let mut pass = fit.converged && elapsed < Duration::from_secs(60);
    pass &= (0..3).all(|j| (g[j] - target[j]).abs() <= tol[j]);
    let Some(ci) = fit.ci95 else {
        return outcome(false, format!("no intervals, gamma_hat={g:?}"));
    };
    let mut worst: f64 = 0.0;
    for j in 0..3 {
        let half = 0.5 * (expected_ci[j][1] - expected_ci[j][0]);
        for e in 0..2 {
            worst = worst.max((ci[j][e] - expected_ci[j][e]).abs() / half);
        }
        pass &= ci[j][0] <= TRUE_GAMMA[j] && TRUE_GAMMA[j] <= ci[j][1];
    }
    pass &= worst <= 0.15;
    outcome(
        pass,
        format!(
            "gamma_hat=({:.4}, {:.3}, {:.4}) worst CI endpoint offset {:.1}% of half-width, {:.1}s",
            g[0],
            g[1],
            g[2],
            100.0 * worst,
            elapsed.as_secs_f64()
        ),
    )
}

fn agree(x: f64, reference: f64, rel: f64, abs: f64) -> bool {
    (x - reference).abs() <= (rel * reference.abs()).max(abs)
}

fn a2_formula_triangle() -> Outcome {
    let start = Instant::now();
    let model = RateModel::reference();
    let an = Analytic::new(&model);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    let mut failures = 0;
    for _ in 0..200 {
        let t = rng.random_range(50.0..150.0);
        let a = rng.random_range(0.0..100.0);
        let p = an.odds_pseudo(t, a).unwrap().odds;
        let k = an.odds_keiding(t, a).unwrap().odds;
        let c = an.prevalence(t, a, OddsMethod::CohortRatio).unwrap().odds;
        for other in [k, c] {
            if !agree(other, p, 1e-6, 1e-10) {
                failures += 1;
            }
            if p.abs() > 1e-10 {
                worst = worst.max((other - p).abs() / p.abs());
            }
        }
    }

    let mut worst_special: f64 = 0.0;
    let mut special_failures = 0;
    for _ in 0..50 {
        let incidence = IncidenceSpec::ExponentialFirstOrder {
            k0: rng.random_range(-9.0..-5.0),
            k1: rng.random_range(0.0..0.06),
            k2: rng.random_range(-0.02..0.02),
        };
        let ratio = MortalityRatioParams::new(
            rng.random_range(0.0..0.05),
            rng.random_range(0.0..10.0),
            rng.random_range(0.5..2.0),
        );
        let m = RateModel::new(incidence, MortalitySpec::Gompertz(GompertzParams::reference()), ratio).unwrap();
        let an = Analytic::new(&m).with_quadrature(QuadratureConfig::tight());
        let t = rng.random_range(50.0..150.0);
        let a = rng.random_range(1.0..100.0);
        let p = an.odds_pseudo(t, a).unwrap().odds;
        let s = an.odds_convolution_special(t, a).unwrap().odds;
        let rel = (s - p).abs() / p.abs();
        worst_special = worst_special.max(rel);
        if rel > 1e-10 {
            special_failures += 1;
        }
    }
    let elapsed = start.elapsed();
    outcome(
        failures == 0 && special_failures == 0 && elapsed < Duration::from_secs(30),
        format!(
            "triangle: {failures} misses, worst rel {worst:.2e}; special case: {special_failures} misses, worst rel {worst_special:.2e}; {:.1}s",
            elapsed.as_secs_f64()
        ),
    )
}

fn a3_constant_incidence() -> Outcome {
    let mut worst: f64 = 0.0;
    for c in [0.001, 0.01, 0.05] {
        let m = RateModel::new(
            IncidenceSpec::Constant { rate: c },
            MortalitySpec::Gompertz(GompertzParams::reference()),
            MortalityRatioParams::new(0.0, 0.0, 1.0),
        )
        .unwrap();
        let an = Analytic::new(&m);
        for a in [10.0, 50.0, 90.0] {
            let p = an.odds_pseudo(100.0, a).unwrap().prevalence;
            worst = worst.max((p - (1.0 - (-c * a).exp())).abs());
        }
    }
    outcome(worst <= 1e-8, format!("worst abs error {worst:.2e}"))
}

fn richardson(residual: impl Fn(f64) -> f64) -> f64 {
    residual(0.1) / residual(0.05)
}

fn a4_pde_consistency() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let model = RateModel::reference();
    let an = Analytic::new(&model).with_quadrature(QuadratureConfig::tight());
    let constant_ratio = model.with_ratio(MortalityRatioParams::new(0.0, 5.0, 2.0)).unwrap();
    let an_odds = Analytic::new(&constant_ratio).with_quadrature(QuadratureConfig::tight());
    let mut ratios = Vec::new();
    for _ in 0..10 {
        let t = rng.random_range(80.0..120.0);
        let a = rng.random_range(40.0..90.0);
        ratios.push(richardson(|h| an.pde_residual_prevalence(t, a, h).unwrap()));
        ratios.push(richardson(|h| an_odds.pde_residual_odds(t, a, h).unwrap()));
    }
    let inside = ratios.iter().filter(|r| (3.5..=4.5).contains(*r)).count();
    let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    outcome(
        inside == ratios.len(),
        format!("{inside}/{} ratios in [3.5, 4.5], range [{lo:.3}, {hi:.3}]", ratios.len()),
    )
}

fn reference_sim_config(model: &RateModel) -> SimConfig {
    let base = SimConfig::default();
    let births = calibrate_births(model, &base, REFERENCE_ALIVE).unwrap();
    SimConfig {
        births_per_year: births,
        ..base
    }
}

fn a5_recovery() -> Outcome {
    let start = Instant::now();
    let model = RateModel::reference();
    let config = SimConfig {
        rng_seed: 500,
        ..reference_sim_config(&model)
    };
    let tables = replicate_study(&model, &config, 20).unwrap();
    let fit_config = FitConfig::new(model.clone());
    let mut covered = [0usize; 3];
    let mut estimates = Vec::new();
    let mut errors = 0;
    for table in &tables {
        match fit(table, &fit_config) {
            Ok(f) => {
                if let Some(ci) = f.ci95 {
                    for j in 0..3 {
                        if ci[j][0] <= TRUE_GAMMA[j] && TRUE_GAMMA[j] <= ci[j][1] {
                            covered[j] += 1;
                        }
                    }
                }
                estimates.push(f.gamma_hat);
            }
            Err(_) => errors += 1,
        }
    }
    let n = estimates.len() as f64;
    let mut pass = errors == 0 && covered.iter().all(|c| *c >= 15);
    let mut bias = [0.0; 3];
    let mut spread = [0.0; 3];
    for j in 0..3 {
        let mean = estimates.iter().map(|g| g[j]).sum::<f64>() / n;
        let sd = (estimates.iter().map(|g| (g[j] - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        bias[j] = (mean - TRUE_GAMMA[j]) / (sd / n.sqrt());
        spread[j] = sd;
        pass &= bias[j].abs() < 3.0;
    }
    let elapsed = start.elapsed();
    pass &= elapsed < Duration::from_secs(15 * 60);
    outcome(
        pass,
        format!(
            "coverage {covered:?}/20, (mean - true)/SE = ({:.2}, {:.2}, {:.2}), replicate SD ({:.3}, {:.2}, {:.3}), {errors} fit errors, {:.0}s",
            bias[0],
            bias[1],
            bias[2],
            spread[0],
            spread[1],
            spread[2],
            elapsed.as_secs_f64()
        ),
    )
}

fn a6_simulator_fidelity() -> Outcome {
    let model = RateModel::reference();
    let config = SimConfig {
        rng_seed: 600,
        ..reference_sim_config(&model)
    };
    let ledger = run_simulation(&model, &config).unwrap();
    let table = cross_section(&ledger, &config);
    let an = Analytic::new(&model);
    let z99 = 2.575_829_303_548_901;
    let mut inside = 0;
    for row in &table.rows {
        let p = an.odds_pseudo(100.0, row.group().midpoint()).unwrap().prevalence;
        let n = row.n as f64;
        let band = z99 * (p * (1.0 - p) / n).sqrt();
        if (row.c as f64 / n - p).abs() <= band {
            inside += 1;
        }
    }
    let (alive, _) = table.totals();
    let alive_ok = (alive as f64 - REFERENCE_ALIVE).abs() <= 3.0 * REFERENCE_ALIVE.sqrt();
    outcome(
        inside >= 10 && alive_ok,
        format!(
            "{inside}/{} groups inside 99% band, alive {alive} (births/year {:.2})",
            table.rows.len(),
            config.births_per_year
        ),
    )
}

fn a7_incidence_reconstruction() -> Outcome {
    let model = RateModel::reference();
    let an = Analytic::new(&model).with_quadrature(QuadratureConfig::tight());
    let h = 0.5;
    let ages: Vec<f64> = (0..=110).map(|k| 35.0 + h * k as f64).collect();
    let earlier = an.cross_section(100.0, &ages, OddsMethod::PseudoConvolution).unwrap();
    let later = an.cross_section(100.0 + h, &ages, OddsMethod::PseudoConvolution).unwrap();
    let estimates = reconstruct_incidence(
        &earlier,
        &later,
        |t, a| an.effective_mortality_m1star(t, a),
        |t, a| model.mortality_healthy(t, a),
    )
    .unwrap();
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for e in estimates.iter().filter(|e| (40.0..=90.0).contains(&e.a)) {
        let truth = (e.a - 30.0) / 3000.0;
        worst = worst.max((e.incidence - truth).abs() / truth);
        checked += 1;
    }
    outcome(
        checked > 90 && worst <= 0.02,
        format!("{checked} ages checked, worst rel error {:.3}%", 100.0 * worst),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, &str, fn() -> Outcome); 7] = [
        ("A1", "reference estimates and intervals", a1_reference_fit),
        ("A2", "formula triangle", a2_formula_triangle),
        ("A3", "constant-incidence closed form", a3_constant_incidence),
        ("A4", "transport-equation consistency", a4_pde_consistency),
        ("A5", "statistical recovery", a5_recovery),
        ("A6", "simulator fidelity", a6_simulator_fidelity),
        ("A7", "incidence reconstruction", a7_incidence_reconstruction),
    ];
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| a.starts_with('A'))
        .collect();
    let mut failed = 0;
    for (id, name, run) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| f == id) {
            continue;
        }
        let result = run();
        let status = if result.pass { "PASS" } else { "FAIL" };
        println!("{status} {id} {name}: {}", result.detail);
        if !result.pass {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
