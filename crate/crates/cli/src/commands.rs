use std::path::PathBuf;

use idm_odds::analytic::reconstruct_incidence;
use idm_odds::estimator::fit;
use idm_odds::io::{
    curve_to_csv, fit_to_json, fit_to_estimates_csv, ledger_to_csv, table_from_csv, table_to_csv,
    REFERENCE_TABLE_CSV,
};
use idm_odds::simulator::{calibrate_births, cross_section, run_simulation};
use idm_odds::{Analytic, Error, GroupEvaluation, IncidenceSpec, OddsMethod, QuadratureConfig, RateModel};
use serde::Serialize;
use serde_json::json;

use crate::config::{Format, RunConfig};
use crate::output::OutputSet;
use crate::CliError;

pub struct Context {
    pub config: RunConfig,
    pub config_bytes: Vec<u8>,
    pub output_dir: PathBuf,
}

impl Context {
    fn outputs(&self, command: &str) -> Result<OutputSet, CliError> {
        OutputSet::new(&self.output_dir, command, &self.config_bytes)
    }

    fn model(&self) -> Result<RateModel, CliError> {
        self.config.model().map_err(|e| CliError::Input(format!("config: {e}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum MethodChoice {
    Analytic,
    Keiding,
    Cohort,
    All,
}

pub struct EvaluateArgs {
    pub t: f64,
    pub age_min: f64,
    pub age_max: f64,
    pub step: f64,
    pub method: MethodChoice,
}

pub fn evaluate(ctx: &Context, args: &EvaluateArgs) -> Result<(), CliError> {
    if !(args.step > 0.0 && args.age_min >= 0.0 && args.age_min <= args.age_max) {
        return Err(CliError::Input(
            "need step > 0 and 0 <= age-min <= age-max".into(),
        ));
    }
    let model = ctx.model()?;
    let an = Analytic::new(&model).with_quadrature(ctx.config.quadrature);
    let n = ((args.age_max - args.age_min) / args.step + 1e-9).floor() as usize;
    let ages: Vec<f64> = (0..=n).map(|k| args.age_min + k as f64 * args.step).collect();

    let mut methods = vec![("odds_analytic", OddsMethod::PseudoConvolution)];
    if matches!(args.method, MethodChoice::Keiding | MethodChoice::All) {
        methods.push(("odds_keiding", OddsMethod::Keiding));
    }
    if matches!(args.method, MethodChoice::Cohort | MethodChoice::All) {
        methods.push(("odds_cohort", OddsMethod::CohortRatio));
    }
    let curves = methods
        .iter()
        .map(|(_, m)| an.curve(args.t, &ages, *m))
        .collect::<Result<Vec<_>, Error>>()?;
    let columns: Vec<(&str, &[_])> = methods
        .iter()
        .zip(&curves)
        .map(|((name, _), c)| (*name, c.as_slice()))
        .collect();
    let mut out = ctx.outputs("evaluate")?;
    let path = out.write("evaluate.csv", &curve_to_csv(&columns)?)?;
    out.finish()?;
    println!("wrote {} ({} ages)", path.display(), ages.len());
    Ok(())
}

pub struct SimulateArgs {
    pub seed: Option<u64>,
    pub replicates: Option<usize>,
    pub births_per_year: Option<f64>,
    pub ledger: bool,
}

pub fn simulate(ctx: &Context, args: &SimulateArgs) -> Result<(), CliError> {
    let section = &ctx.config.simulation;
    let model = ctx.model()?;
    let seed = args.seed.unwrap_or(section.rng_seed);
    let replicates = args.replicates.unwrap_or(section.replicates);
    if replicates == 0 {
        return Err(CliError::Input("--replicates must be at least 1".into()));
    }
    let births = match args.births_per_year.or(section.births_per_year) {
        Some(b) => b,
        None => calibrate_births(&model, &ctx.config.sim_config(1.0, seed), section.target_alive)?,
    };
    let write_ledger = args.ledger || section.write_ledger;
    let mut out = ctx.outputs("simulate")?;
    let mut tables = Vec::new();
    for i in 0..replicates {
        let rep_seed = seed.wrapping_add(i as u64);
        let cfg = ctx.config.sim_config(births, rep_seed);
        cfg.validate().map_err(|e| CliError::Input(format!("config: {e}")))?;
        let ledger = run_simulation(&model, &cfg)?;
        let table = cross_section(&ledger, &cfg);
        let (n, c) = table.totals();
        if ctx.config.output.wants(Format::Csv) {
            out.write(&format!("table_{:03}.csv", i + 1), &table_to_csv(&table))?;
        }
        if write_ledger {
            out.write(&format!("ledger_{:03}.csv", i + 1), &ledger_to_csv(&ledger))?;
        }
        println!("replicate {} (seed {rep_seed}): {n} alive, {c} diseased", i + 1);
        out.seeds.push(rep_seed);
        tables.push(json!({ "seed": rep_seed, "table": table }));
    }
    if ctx.config.output.wants(Format::Json) {
        let doc = json!({ "births_per_year": births, "replicates": tables });
        out.write("tables.json", &pretty(&doc)?)?;
    }
    out.finish()
}

pub struct FitArgs {
    pub data: Option<PathBuf>,
    pub group_evaluation: Option<GroupEvaluation>,
}

pub fn fit_command(ctx: &Context, args: &FitArgs) -> Result<(), CliError> {
    let t = ctx.config.simulation.cross_section_time;
    let text = match &args.data {
        Some(path) => std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?,
        None => REFERENCE_TABLE_CSV.to_string(),
    };
    let source = args
        .data
        .as_ref()
        .map_or("bundled reference table".to_string(), |p| p.display().to_string());
    let table = table_from_csv(&text, t).map_err(|e| CliError::Input(format!("{source}: {e}")))?;
    let mut cfg = ctx
        .config
        .fit_config()
        .map_err(|e| CliError::Input(format!("config: {e}")))?;
    if let Some(mode) = args.group_evaluation {
        cfg.group_evaluation = mode;
    }
    let result = fit(&table, &cfg)?;
    let input = ctx.config.fit.true_gamma;
    let mut out = ctx.outputs("fit")?;
    if ctx.config.output.wants(Format::Json) {
        out.write("fit.json", &fit_to_json(&result, input)?)?;
    }
    if ctx.config.output.wants(Format::Csv) {
        out.write("estimates.csv", &fit_to_estimates_csv(&result, input))?;
    }
    out.finish()?;
    let g = result.gamma_hat;
    println!("gamma_hat = ({}, {}, {}), loglik = {}", g[0], g[1], g[2], result.loglik);
    if let Some(ci) = result.ci95 {
        for (j, c) in ci.iter().enumerate() {
            println!("gamma{} 95% CI [{}, {}]", j + 1, c[0], c[1]);
        }
    }
    if !result.diagnostics.at_bound.is_empty() {
        eprintln!("warning: estimate on a bound for components {:?}", result.diagnostics.at_bound);
    }
    if !result.diagnostics.unidentifiable.is_empty() {
        eprintln!("warning: flat likelihood along components {:?}", result.diagnostics.unidentifiable);
    }
    if !result.converged {
        return Err(CliError::NotConverged("simplex search did not converge".into()));
    }
    Ok(())
}

pub struct CrosscheckArgs {
    pub t: f64,
    pub age: f64,
    pub h: f64,
}

#[derive(Serialize)]
struct Convergence {
    residual_h: f64,
    residual_half_h: f64,
    richardson_ratio: Option<f64>,
    within_bounds: bool,
}

fn convergence(residual: impl Fn(f64) -> idm_odds::Result<f64>, h: f64) -> idm_odds::Result<Convergence> {
    let r1 = residual(h)?;
    let r2 = residual(0.5 * h)?;
    let ratio = (r2 != 0.0).then(|| r1 / r2);
    Ok(Convergence {
        residual_h: r1,
        residual_half_h: r2,
        richardson_ratio: ratio,
        within_bounds: ratio.is_none_or(|r| (3.5..=4.5).contains(&r)),
    })
}

fn rel_dev(x: f64, reference: f64) -> f64 {
    if x == reference {
        0.0
    } else {
        (x - reference).abs() / reference.abs().max(1e-300)
    }
}

pub fn crosscheck(ctx: &Context, args: &CrosscheckArgs) -> Result<(), CliError> {
    let (t, a, h) = (args.t, args.age, args.h);
    if !(h > 0.0 && a >= h) {
        return Err(CliError::Input("need 0 < h <= age".into()));
    }
    let model = ctx.model()?;
    let quad = QuadratureConfig::tight();
    let an = Analytic::new(&model).with_quadrature(quad);

    let pseudo = an.odds_pseudo(t, a)?.odds;
    let keiding = an.odds_keiding(t, a)?.odds;
    let cohort = an.prevalence(t, a, OddsMethod::CohortRatio)?.odds;
    let close = |x: f64| (x - pseudo).abs() <= (1e-6 * pseudo.abs()).max(1e-10);
    let triangle = json!({
        "odds_pseudo_convolution": pseudo,
        "odds_keiding": keiding,
        "odds_cohort_ratio": cohort,
        "keiding_rel_deviation": rel_dev(keiding, pseudo),
        "cohort_rel_deviation": rel_dev(cohort, pseudo),
        "within_tolerance": close(keiding) && close(cohort),
    });

    let prevalence_pde = convergence(|h| an.pde_residual_prevalence(t, a, h), h)?;
    let odds_pde = match convergence(|h| an.pde_residual_odds(t, a, h), h) {
        Ok(c) => serde_json::to_value(c).map_err(|e| CliError::Numerical(e.to_string()))?,
        Err(Error::Precondition(msg)) => {
            eprintln!("note: odds equation skipped: {msg}");
            json!({ "skipped": msg })
        }
        Err(e) => return Err(e.into()),
    };

    let special = match model.incidence {
        IncidenceSpec::ExponentialFirstOrder { .. } => {
            let s = an.odds_convolution_special(t, a)?.odds;
            let dev = rel_dev(s, pseudo);
            json!({ "odds_special": s, "rel_deviation": dev, "within_tolerance": dev <= 1e-10 })
        }
        _ => json!({ "skipped": "requires exponential first-order incidence" }),
    };

    let gap = 0.5;
    let lo = (a - 10.0).max(0.0);
    let ages: Vec<f64> = (0..=42).map(|k| lo + gap * k as f64).collect();
    let earlier = an.cross_section(t, &ages, OddsMethod::PseudoConvolution)?;
    let later = an.cross_section(t + gap, &ages, OddsMethod::PseudoConvolution)?;
    let estimates = reconstruct_incidence(
        &earlier,
        &later,
        |t, a| an.effective_mortality_m1star(t, a),
        |t, a| model.mortality_healthy(t, a),
    )?;
    let (mut max_rel, mut max_abs_where_zero) = (0.0f64, 0.0f64);
    for e in &estimates {
        let truth = model.incidence(e.t, e.a)?;
        if truth > 0.0 {
            max_rel = max_rel.max((e.incidence - truth).abs() / truth);
        } else {
            max_abs_where_zero = max_abs_where_zero.max(e.incidence.abs());
        }
    }
    let reconstruction = json!({
        "cross_section_gap": gap,
        "ages": [ages[0], ages[ages.len() - 1]],
        "max_rel_error": max_rel,
        "max_abs_error_where_incidence_is_zero": max_abs_where_zero,
        "within_tolerance": max_rel <= 0.02,
    });

    let doc = json!({
        "t": t,
        "age": a,
        "h": h,
        "formula_triangle": triangle,
        "prevalence_equation": prevalence_pde,
        "odds_equation": odds_pde,
        "exponential_special_case": special,
        "incidence_reconstruction": reconstruction,
    });
    let mut out = ctx.outputs("crosscheck")?;
    let path = out.write("crosscheck.json", &pretty(&doc)?)?;
    out.finish()?;
    println!("wrote {}", path.display());
    Ok(())
}

fn pretty(v: &serde_json::Value) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| CliError::Numerical(e.to_string()))?;
    s.push('\n');
    Ok(s)
}
