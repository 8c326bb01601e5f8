//! Browser bindings: odds curves, a small simulated study and a fit.

use idm_odds::estimator::fit;
use idm_odds::io::{fit_to_json, table_from_csv, table_to_csv, REFERENCE_TABLE_CSV};
use idm_odds::simulator::{cross_section, run_simulation};
use idm_odds::{
    Analytic, FitConfig, IncidenceSpec, MortalityRatioParams, OddsMethod, RateModel, SimConfig,
};
use wasm_bindgen::prelude::*;

fn js(e: idm_odds::Error) -> JsError {
    JsError::new(&e.to_string())
}

fn model_with(gamma: [f64; 3], incidence_denominator: f64) -> Result<RateModel, JsError> {
    let base = RateModel::reference();
    RateModel::new(
        IncidenceSpec::PositivePartLinear {
            onset_age: 30.0,
            denominator: incidence_denominator,
        },
        base.m0,
        MortalityRatioParams::from_array(gamma),
    )
    .map_err(js)
}

/// Prevalence odds at time `t` for `ages_from, ages_from + step, ..., ages_to`
/// under the reference incidence shape and Gompertz mortality. Returns the
/// ages followed by the odds, as one flat array of length `2n`.
#[wasm_bindgen]
pub fn odds_curve(
    gamma1: f64,
    gamma2: f64,
    gamma3: f64,
    incidence_denominator: f64,
    t: f64,
    ages_from: f64,
    ages_to: f64,
    step: f64,
) -> Result<Vec<f64>, JsError> {
    if !(step > 0.0 && ages_from >= 0.0 && ages_from <= ages_to) {
        return Err(JsError::new("need step > 0 and 0 <= from <= to"));
    }
    let model = model_with([gamma1, gamma2, gamma3], incidence_denominator)?;
    let n = ((ages_to - ages_from) / step + 1e-9).floor() as usize;
    let ages: Vec<f64> = (0..=n).map(|k| ages_from + k as f64 * step).collect();
    let curve = Analytic::new(&model)
        .curve(t, &ages, OddsMethod::PseudoConvolution)
        .map_err(js)?;
    let mut out = ages;
    out.extend(curve.iter().map(|r| r.odds));
    Ok(out)
}

/// Simulated current-status table (CSV) at time 100 with the reference age
/// groups.
#[wasm_bindgen]
pub fn simulate_table(
    gamma1: f64,
    gamma2: f64,
    gamma3: f64,
    incidence_denominator: f64,
    births_per_year: f64,
    seed: u64,
) -> Result<String, JsError> {
    let model = model_with([gamma1, gamma2, gamma3], incidence_denominator)?;
    let config = SimConfig {
        births_per_year,
        rng_seed: seed,
        ..SimConfig::default()
    };
    let ledger = run_simulation(&model, &config).map_err(js)?;
    Ok(table_to_csv(&cross_section(&ledger, &config)))
}

/// Fits the mortality ratio to a table in `k,age_lo,age_hi,n,c` layout and
/// returns the result as JSON.
#[wasm_bindgen]
pub fn fit_table(csv: &str, incidence_denominator: f64) -> Result<String, JsError> {
    let table = table_from_csv(csv, 100.0).map_err(js)?;
    let model = model_with(MortalityRatioParams::reference().as_array(), incidence_denominator)?;
    let result = fit(&table, &FitConfig::new(model)).map_err(js)?;
    fit_to_json(&result, None).map_err(js)
}

/// The bundled reference table.
#[wasm_bindgen]
pub fn reference_table() -> String {
    REFERENCE_TABLE_CSV.to_string()
}
