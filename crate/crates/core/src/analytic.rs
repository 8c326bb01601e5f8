//! Closed-form population functions of the illness-death model and the
//! prevalence-odds formulas built on them.
//!
//! Three independent routes give the prevalence odds at `(t, a)`:
//!
//! * [`Analytic::odds_pseudo`]: the incidence along the characteristic,
//!   integrated against the weight `Y_{t,a}(delta) = exp(M0 + I - M1)`;
//! * [`Analytic::odds_keiding`]: a ratio of the birth-cohort integral over
//!   onset age `y` and the healthy survivor function at age `a`;
//! * [`Analytic::total_cases`] / [`Analytic::survival_healthy`]: the
//!   solutions of the balance equations themselves.
//!
//! Exponents are accumulated as one sum before exponentiating.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{integrate_with_breaks, QuadratureConfig};
use crate::rate_model::{IncidenceSpec, RateModel};

/// Size of the healthy newborn cohort as a function of birth time.
#[derive(Clone)]
pub struct CohortBaseline {
    s0: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl CohortBaseline {
    pub fn constant(size: f64) -> Self {
        Self {
            s0: Arc::new(move |_| size),
        }
    }

    pub fn from_fn(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self { s0: Arc::new(f) }
    }

    pub fn at(&self, birth_time: f64) -> Result<f64> {
        let v = (self.s0)(birth_time);
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::Domain(format!(
                "cohort baseline must be positive, got {v} at birth time {birth_time}"
            )));
        }
        Ok(v)
    }
}

impl Default for CohortBaseline {
    fn default() -> Self {
        Self::constant(1.0)
    }
}

impl fmt::Debug for CohortBaseline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("CohortBaseline(..)")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OddsMethod {
    PseudoConvolution,
    Keiding,
    CohortRatio,
    ConvolutionSpecial,
}

impl fmt::Display for OddsMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OddsMethod::PseudoConvolution => "pseudo_convolution",
            OddsMethod::Keiding => "keiding",
            OddsMethod::CohortRatio => "cohort_ratio",
            OddsMethod::ConvolutionSpecial => "convolution_special",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PrevalenceResult {
    pub t: f64,
    pub a: f64,
    pub odds: f64,
    pub prevalence: f64,
    pub method: OddsMethod,
}

impl PrevalenceResult {
    fn from_odds(t: f64, a: f64, odds: f64, method: OddsMethod) -> Self {
        Self {
            t,
            a,
            odds,
            prevalence: odds / (1.0 + odds),
            method,
        }
    }
}

/// Values along one characteristic `t - a = birth_time`.
#[derive(Debug, Clone, PartialEq)]
pub struct CharacteristicGrid {
    pub birth_time: f64,
    pub ages: Vec<f64>,
    pub values: Vec<f64>,
}

/// Prevalence at a set of ages observed at one calendar time.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossSection {
    pub time: f64,
    pub ages: Vec<f64>,
    pub prevalence: Vec<f64>,
}

impl CrossSection {
    fn prevalence_at(&self, age: f64) -> Option<f64> {
        let n = self.ages.len();
        if n == 0 || age < self.ages[0] - 1e-9 || age > self.ages[n - 1] + 1e-9 {
            return None;
        }
        let hi = self.ages.partition_point(|x| *x < age - 1e-9);
        if hi < n && (self.ages[hi] - age).abs() <= 1e-9 {
            return Some(self.prevalence[hi]);
        }
        if hi == 0 || hi == n {
            return None;
        }
        let lo = hi - 1;
        let w = (age - self.ages[lo]) / (self.ages[hi] - self.ages[lo]);
        Some(self.prevalence[lo] * (1.0 - w) + self.prevalence[hi] * w)
    }
}

/// One reconstructed incidence value, located at the midpoint of the
/// characteristic segment joining the two cross-sections.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IncidenceEstimate {
    pub t: f64,
    pub a: f64,
    pub incidence: f64,
}

/// Evaluator for the population functions of one rate model.
#[derive(Debug, Clone)]
pub struct Analytic<'m> {
    model: &'m RateModel,
    baseline: CohortBaseline,
    quad: QuadratureConfig,
}

impl<'m> Analytic<'m> {
    pub fn new(model: &'m RateModel) -> Self {
        Self {
            model,
            baseline: CohortBaseline::default(),
            quad: QuadratureConfig::default(),
        }
    }

    pub fn with_baseline(mut self, baseline: CohortBaseline) -> Self {
        self.baseline = baseline;
        self
    }

    pub fn with_quadrature(mut self, quad: QuadratureConfig) -> Self {
        self.quad = quad;
        self
    }

    pub fn model(&self) -> &RateModel {
        self.model
    }

    pub fn quadrature(&self) -> &QuadratureConfig {
        &self.quad
    }

    fn check_age(a: f64) -> Result<()> {
        if !(a >= 0.0 && a.is_finite()) {
            return Err(Error::Domain(format!("age must be finite and >= 0, got {a}")));
        }
        Ok(())
    }

    /// Breakpoints of the incidence in `delta` for the characteristic
    /// ending at `(t, a)` and running back `span` years.
    fn delta_breaks(&self, t: f64, a: f64, span: f64) -> Vec<f64> {
        self.model.incidence.kinks(t, a, span)
    }

    /// Healthy cumulative exit hazard from birth to age `a` for the cohort
    /// passing through `(t, a)`.
    fn birth_hazard(&self, t: f64, a: f64) -> Result<f64> {
        self.model.healthy_exit_hazard(t, a, a, &self.quad)
    }

    /// `M_{t,a}(y)`: probability that a member of the cohort born at `t - a`
    /// is still alive and healthy at age `y`.
    pub fn survivor_function_m(&self, t: f64, a: f64, y: f64) -> Result<f64> {
        Self::check_age(a)?;
        if !(0.0..=a).contains(&y) {
            return Err(Error::Domain(format!("survivor age {y} must lie in [0, {a}]")));
        }
        let h = self.model.healthy_exit_hazard(t - a + y, y, y, &self.quad)?;
        Ok((-h).exp())
    }

    /// `S(t, a)`: healthy persons aged `a` at time `t`.
    pub fn survival_healthy(&self, t: f64, a: f64) -> Result<f64> {
        Self::check_age(a)?;
        Ok(self.baseline.at(t - a)? * (-self.birth_hazard(t, a)?).exp())
    }

    /// Case density without the `S0` factor and exponent kept in one sum.
    fn case_density_unit(&self, t: f64, a: f64, d: f64) -> Result<f64> {
        let onset_t = t - d;
        let onset_a = a - d;
        let inc = self.model.incidence_at(onset_t, onset_a);
        if inc == 0.0 {
            return Ok(0.0);
        }
        let exponent = self.model.healthy_exit_hazard(onset_t, onset_a, onset_a, &self.quad)?
            + self.model.diseased_hazard(t, a, d, &self.quad)?;
        Ok(inc * (-exponent).exp())
    }

    /// `C(t, a, d)`: density of cases aged `a` at time `t` with duration `d`.
    pub fn case_density(&self, t: f64, a: f64, d: f64) -> Result<f64> {
        Self::check_age(a)?;
        if !(0.0..=a).contains(&d) {
            return Err(Error::Domain(format!("duration {d} must lie in [0, {a}]")));
        }
        Ok(self.baseline.at(t - a)? * self.case_density_unit(t, a, d)?)
    }

    fn integrate_cases<F: Fn(f64) -> f64>(&self, t: f64, a: f64, weight: F) -> Result<f64> {
        let breaks = self.delta_breaks(t, a, a);
        let failure = std::cell::Cell::new(None);
        let v = integrate_with_breaks(
            |d| match self.case_density_unit(t, a, d) {
                Ok(c) => c * weight(d),
                Err(e) => {
                    failure.set(Some(e));
                    0.0
                }
            },
            0.0,
            a,
            &breaks,
            &self.quad,
        )?;
        match failure.into_inner() {
            Some(e) => Err(e),
            None => Ok(v),
        }
    }

    /// `C*(t, a)`: all cases aged `a` at time `t`.
    pub fn total_cases(&self, t: f64, a: f64) -> Result<f64> {
        Self::check_age(a)?;
        if a == 0.0 {
            return Ok(0.0);
        }
        Ok(self.baseline.at(t - a)? * self.integrate_cases(t, a, |_| 1.0)?)
    }

    /// `m1*(t, a)`: mortality of the diseased averaged over the duration
    /// distribution; zero where there are no cases.
    pub fn effective_mortality_m1star(&self, t: f64, a: f64) -> Result<f64> {
        Self::check_age(a)?;
        if a == 0.0 {
            return Ok(0.0);
        }
        let cases = self.integrate_cases(t, a, |_| 1.0)?;
        if cases <= 0.0 {
            return Ok(0.0);
        }
        let m0 = self.model.mortality_healthy(t, a);
        let weighted = self.integrate_cases(t, a, |d| self.model.ratio.value(d))?;
        Ok(m0 * weighted / cases)
    }

    /// Prevalence odds from the birth-cohort representation.
    pub fn odds_keiding(&self, t: f64, a: f64) -> Result<PrevalenceResult> {
        Self::check_age(a)?;
        if a == 0.0 {
            return Ok(PrevalenceResult::from_odds(t, a, 0.0, OddsMethod::Keiding));
        }
        let birth = t - a;
        let breaks: Vec<f64> = self
            .delta_breaks(t, a, a)
            .into_iter()
            .map(|d| a - d)
            .collect();
        let failure = std::cell::Cell::new(None);
        let numerator = integrate_with_breaks(
            |y| {
                let inc = self.model.incidence_at(birth + y, y);
                if inc == 0.0 {
                    return 0.0;
                }
                let exponent = self
                    .model
                    .healthy_exit_hazard(birth + y, y, y, &self.quad)
                    .and_then(|h| Ok(h + self.model.diseased_hazard(t, a, a - y, &self.quad)?));
                match exponent {
                    Ok(e) => inc * (-e).exp(),
                    Err(err) => {
                        failure.set(Some(err));
                        0.0
                    }
                }
            },
            0.0,
            a,
            &breaks,
            &self.quad,
        )?;
        if let Some(e) = failure.into_inner() {
            return Err(e);
        }
        let denominator = (-self.birth_hazard(t, a)?).exp();
        Ok(PrevalenceResult::from_odds(
            t,
            a,
            numerator / denominator,
            OddsMethod::Keiding,
        ))
    }

    /// `Y_{t,a}(delta)`, the weight of incidence `delta` years in the past.
    pub fn y_weight(&self, t: f64, a: f64, delta: f64) -> Result<f64> {
        Self::check_age(a)?;
        if !(0.0..=a).contains(&delta) {
            return Err(Error::Domain(format!("delta {delta} must lie in [0, {a}]")));
        }
        self.y_weight_unchecked(t, a, delta)
    }

    fn y_weight_unchecked(&self, t: f64, a: f64, delta: f64) -> Result<f64> {
        let exponent = self.model.healthy_exit_hazard(t, a, delta, &self.quad)?
            - self.model.diseased_hazard(t, a, delta, &self.quad)?;
        Ok(exponent.exp())
    }

    fn integrate_against_y<F: Fn(f64) -> f64>(&self, t: f64, a: f64, kernel: F) -> Result<f64> {
        let breaks = self.delta_breaks(t, a, a);
        let failure = std::cell::Cell::new(None);
        let v = integrate_with_breaks(
            |d| {
                let k = kernel(d);
                if k == 0.0 {
                    return 0.0;
                }
                match self.y_weight_unchecked(t, a, d) {
                    Ok(y) => k * y,
                    Err(e) => {
                        failure.set(Some(e));
                        0.0
                    }
                }
            },
            0.0,
            a,
            &breaks,
            &self.quad,
        )?;
        match failure.into_inner() {
            Some(e) => Err(e),
            None => Ok(v),
        }
    }

    /// Prevalence odds as the pseudo-convolution of incidence and `Y`.
    pub fn odds_pseudo(&self, t: f64, a: f64) -> Result<PrevalenceResult> {
        Self::check_age(a)?;
        if a == 0.0 {
            return Ok(PrevalenceResult::from_odds(t, a, 0.0, OddsMethod::PseudoConvolution));
        }
        let odds = self.integrate_against_y(t, a, |d| self.model.incidence_at(t - d, a - d))?;
        Ok(PrevalenceResult::from_odds(t, a, odds, OddsMethod::PseudoConvolution))
    }

    /// Prevalence odds for exponential first-order incidence, with the
    /// incidence factored as `i*(t, a) * Exp(t - delta)`.
    pub fn odds_convolution_special(&self, t: f64, a: f64) -> Result<PrevalenceResult> {
        let IncidenceSpec::ExponentialFirstOrder { k0, k1, k2 } = self.model.incidence else {
            return Err(Error::VariantMismatch {
                expected: "exponential first-order",
            });
        };
        Self::check_age(a)?;
        if a == 0.0 {
            return Ok(PrevalenceResult::from_odds(t, a, 0.0, OddsMethod::ConvolutionSpecial));
        }
        let i_star = (k0 + k1 * a - k1 * t).exp();
        let kernel = |d: f64| ((k1 + k2) * (t - d)).exp();
        let conv = self.integrate_against_y(t, a, kernel)?;
        Ok(PrevalenceResult::from_odds(
            t,
            a,
            i_star * conv,
            OddsMethod::ConvolutionSpecial,
        ))
    }

    fn odds_cohort(&self, t: f64, a: f64) -> Result<PrevalenceResult> {
        let s = self.survival_healthy(t, a)?;
        let c = self.total_cases(t, a)?;
        Ok(PrevalenceResult {
            t,
            a,
            odds: c / s,
            prevalence: c / (s + c),
            method: OddsMethod::CohortRatio,
        })
    }

    pub fn prevalence(&self, t: f64, a: f64, method: OddsMethod) -> Result<PrevalenceResult> {
        match method {
            OddsMethod::PseudoConvolution => self.odds_pseudo(t, a),
            OddsMethod::Keiding => self.odds_keiding(t, a),
            OddsMethod::CohortRatio => self.odds_cohort(t, a),
            OddsMethod::ConvolutionSpecial => self.odds_convolution_special(t, a),
        }
    }

    /// Evaluates [`Analytic::prevalence`] over a set of ages at time `t`.
    pub fn curve(&self, t: f64, ages: &[f64], method: OddsMethod) -> Result<Vec<PrevalenceResult>> {
        crate::par::map(ages, |a| self.prevalence(t, *a, method))
    }

    pub fn cross_section(&self, t: f64, ages: &[f64], method: OddsMethod) -> Result<CrossSection> {
        let values = self.curve(t, ages, method)?;
        Ok(CrossSection {
            time: t,
            ages: ages.to_vec(),
            prevalence: values.iter().map(|r| r.prevalence).collect(),
        })
    }

    /// Values along the characteristic with the given birth time.
    pub fn along_characteristic(
        &self,
        birth_time: f64,
        ages: &[f64],
        method: OddsMethod,
    ) -> Result<CharacteristicGrid> {
        if ages.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Domain("characteristic ages must be strictly increasing".into()));
        }
        let values = crate::par::map(ages, |a| {
            self.prevalence(birth_time + a, *a, method).map(|r| r.prevalence)
        })?;
        Ok(CharacteristicGrid {
            birth_time,
            ages: ages.to_vec(),
            values,
        })
    }

    fn check_step(a: f64, h: f64) -> Result<()> {
        if !(h > 0.0 && a >= h) {
            return Err(Error::Domain(format!("step must satisfy 0 < h <= a, got h={h}, a={a}")));
        }
        Ok(())
    }

    /// Central-difference residual of the prevalence transport equation
    /// with the duration-averaged mortality `m1*`.
    pub fn pde_residual_prevalence(&self, t: f64, a: f64, h: f64) -> Result<f64> {
        Self::check_step(a, h)?;
        let p = |t, a| self.odds_pseudo(t, a).map(|r| r.prevalence);
        let derivative = (p(t + h, a + h)? - p(t - h, a - h)?) / (2.0 * h);
        let here = p(t, a)?;
        let inc = self.model.incidence_at(t, a);
        let m0 = self.model.mortality_healthy(t, a);
        let m1star = self.effective_mortality_m1star(t, a)?;
        Ok(derivative - (1.0 - here) * (inc - here * (m1star - m0)))
    }

    /// Central-difference residual of the odds transport equation. Only
    /// valid when mortality of the diseased does not depend on duration.
    pub fn pde_residual_odds(&self, t: f64, a: f64, h: f64) -> Result<f64> {
        if self.model.ratio.gamma1 != 0.0 {
            return Err(Error::Precondition(
                "the odds equation needs duration-independent m1 (gamma1 = 0)".into(),
            ));
        }
        Self::check_step(a, h)?;
        let odds = |t, a| self.odds_pseudo(t, a).map(|r| r.odds);
        let derivative = (odds(t + h, a + h)? - odds(t - h, a - h)?) / (2.0 * h);
        let here = odds(t, a)?;
        let inc = self.model.incidence_at(t, a);
        let m0 = self.model.mortality_healthy(t, a);
        let m1 = m0 * self.model.ratio.gamma3;
        Ok(derivative - ((inc - (m1 - m0)) * here + inc))
    }
}

/// Recovers incidence from two prevalence cross-sections `h` years apart.
///
/// For each age `a` of the earlier section, the prevalence change along the
/// characteristic to `(t + h, a + h)` is combined with the mortality
/// functions at the segment midpoint. The later section is interpolated
/// linearly when `a + h` is not one of its ages.
pub fn reconstruct_incidence(
    earlier: &CrossSection,
    later: &CrossSection,
    m1star: impl Fn(f64, f64) -> Result<f64>,
    m0: impl Fn(f64, f64) -> f64,
) -> Result<Vec<IncidenceEstimate>> {
    if earlier.ages != later.ages
        || earlier.prevalence.len() != earlier.ages.len()
        || later.prevalence.len() != later.ages.len()
    {
        return Err(Error::Domain("cross-sections must share the same age vector".into()));
    }
    let h = later.time - earlier.time;
    if !(h > 0.0) {
        return Err(Error::Domain("later cross-section must follow the earlier one".into()));
    }
    let mut out = Vec::with_capacity(earlier.ages.len());
    for (a, p_early) in earlier.ages.iter().zip(&earlier.prevalence) {
        let Some(p_late) = later.prevalence_at(a + h) else {
            continue;
        };
        if *p_early >= 1.0 || p_late >= 1.0 {
            return Err(Error::Domain(format!("prevalence reaches 1 near age {a}")));
        }
        let tm = earlier.time + 0.5 * h;
        let am = a + 0.5 * h;
        let p = 0.5 * (p_early + p_late);
        let derivative = (p_late - p_early) / h;
        let incidence = derivative / (1.0 - p) + p * (m1star(tm, am)? - m0(tm, am));
        out.push(IncidenceEstimate {
            t: tm,
            a: am,
            incidence,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rate_model::{GompertzParams, MortalityRatioParams, MortalitySpec};

    fn zero_model() -> RateModel {
        RateModel::new(
            IncidenceSpec::Constant { rate: 0.0 },
            MortalitySpec::Constant { rate: 0.0 },
            MortalityRatioParams::new(0.0, 0.0, 1.0),
        )
        .unwrap()
    }

    fn constant_incidence(c: f64) -> RateModel {
        RateModel::new(
            IncidenceSpec::Constant { rate: c },
            MortalitySpec::Gompertz(GompertzParams::reference()),
            MortalityRatioParams::new(0.0, 5.0, 1.0),
        )
        .unwrap()
    }

    #[test]
    fn survivor_function_edges() {
        let m = RateModel::reference();
        let an = Analytic::new(&m);
        assert_eq!(an.survivor_function_m(100.0, 60.0, 0.0).unwrap(), 1.0);
        let v = an.survivor_function_m(100.0, 60.0, 30.0).unwrap();
        assert!(v > 0.0 && v < 1.0);
        // cohort born at 40, from age 0 to 30: only m0 acts
        let h = m.cumulative_m0(70.0, 30.0, 30.0).unwrap();
        assert!((v - (-h).exp()).abs() < 1e-15);
        assert!(an.survivor_function_m(100.0, 60.0, 61.0).is_err());

        let z = zero_model();
        let an = Analytic::new(&z);
        assert_eq!(an.survivor_function_m(100.0, 60.0, 45.0).unwrap(), 1.0);
        assert_eq!(an.survival_healthy(100.0, 80.0).unwrap(), 1.0);
    }

    #[test]
    fn survival_healthy_initial_condition() {
        let m = RateModel::reference();
        let an = Analytic::new(&m).with_baseline(CohortBaseline::from_fn(|b| 100.0 + b));
        assert_eq!(an.survival_healthy(50.0, 0.0).unwrap(), 150.0);
        let m_val = Analytic::new(&m).survivor_function_m(100.0, 60.0, 60.0).unwrap();
        let s = Analytic::new(&m).survival_healthy(100.0, 60.0).unwrap();
        assert_eq!(s, m_val);
    }

    #[test]
    fn baseline_must_be_positive() {
        let m = RateModel::reference();
        let an = Analytic::new(&m).with_baseline(CohortBaseline::constant(0.0));
        assert!(an.survival_healthy(100.0, 50.0).is_err());
    }

    #[test]
    fn case_density_initial_conditions() {
        let m = RateModel::reference();
        let an = Analytic::new(&m);
        // disease only after birth
        assert_eq!(an.case_density(100.0, 60.0, 60.0).unwrap(), 0.0);
        let s = an.survival_healthy(100.0, 60.0).unwrap();
        let c0 = an.case_density(100.0, 60.0, 0.0).unwrap();
        assert!((c0 - m.incidence(100.0, 60.0).unwrap() * s).abs() < 1e-18);
        assert!(an.case_density(100.0, 60.0, 10.0).unwrap() > 0.0);
    }

    #[test]
    fn total_cases_edges() {
        let m = RateModel::reference();
        let an = Analytic::new(&m);
        assert_eq!(an.total_cases(100.0, 0.0).unwrap(), 0.0);
        let z = zero_model();
        assert_eq!(Analytic::new(&z).total_cases(100.0, 70.0).unwrap(), 0.0);
    }

    #[test]
    fn m1star_cases() {
        let m = RateModel::reference();
        let an = Analytic::new(&m);
        assert_eq!(an.effective_mortality_m1star(100.0, 0.0).unwrap(), 0.0);
        let v = an.effective_mortality_m1star(100.0, 60.0).unwrap();
        let m0 = m.mortality_healthy(100.0, 60.0);
        // R ranges over [1, 26] for durations in [0, 30]
        let r_max = m.mortality_ratio(30.0).unwrap();
        assert!(v > m0 && v < r_max * m0);
        // oracle: every inner hazard by quadrature
        let quad = QuadratureConfig { closed_form_hazards: false, ..QuadratureConfig::tight() };
        let slow = Analytic::new(&m).with_quadrature(quad).effective_mortality_m1star(100.0, 60.0).unwrap();
        assert!((v - slow).abs() < 1e-7 * v);
        assert!((v / m0 - 3.5935).abs() < 1e-3);

        let flat = m.with_ratio(MortalityRatioParams::new(0.0, 5.0, 1.6)).unwrap();
        let v = Analytic::new(&flat).effective_mortality_m1star(100.0, 60.0).unwrap();
        assert!((v - 1.6 * m0).abs() <= 4.0 * f64::EPSILON * v);
    }

    #[test]
    fn odds_at_age_zero_and_without_incidence() {
        let m = RateModel::reference();
        let an = Analytic::new(&m);
        assert_eq!(an.odds_keiding(100.0, 0.0).unwrap().odds, 0.0);
        assert_eq!(an.odds_pseudo(100.0, 0.0).unwrap().odds, 0.0);
        let z = zero_model();
        let an = Analytic::new(&z);
        assert_eq!(an.odds_keiding(100.0, 50.0).unwrap().odds, 0.0);
        assert_eq!(an.odds_pseudo(100.0, 50.0).unwrap().odds, 0.0);
    }

    #[test]
    fn constant_incidence_closed_form() {
        for c in [0.001, 0.01, 0.05] {
            let m = constant_incidence(c);
            let an = Analytic::new(&m);
            for a in [10.0, 50.0, 90.0] {
                let r = an.odds_pseudo(100.0, a).unwrap();
                assert!((r.odds - (c * a).exp_m1()).abs() <= 1e-8 * (c * a).exp());
                assert!((r.prevalence - (1.0 - (-c * a).exp())).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn keiding_near_first_age_group() {
        let m = RateModel::reference();
        let an = Analytic::new(&m);
        let v = an.odds_keiding(100.0, 42.5).unwrap().odds;
        // same size as the empirical odds of the youngest group, 283 / 9575
        assert!(v > 0.02 && v < 0.035, "{v}");
    }

    #[test]
    fn prevalence_identity() {
        let m = RateModel::reference();
        let an = Analytic::new(&m);
        for method in [OddsMethod::PseudoConvolution, OddsMethod::Keiding, OddsMethod::CohortRatio] {
            let r = an.prevalence(100.0, 62.5, method).unwrap();
            assert!((r.prevalence - r.odds / (1.0 + r.odds)).abs() <= 2.0 * f64::EPSILON);
            assert!(r.prevalence > 0.12 && r.prevalence < 0.16, "{method}: {}", r.prevalence);
        }
    }

    #[test]
    fn convolution_special_requires_exponential() {
        let m = RateModel::reference();
        let err = Analytic::new(&m).odds_convolution_special(100.0, 50.0).unwrap_err();
        assert!(matches!(err, Error::VariantMismatch { .. }));
    }

    #[test]
    fn convolution_special_without_slopes_is_constant_incidence() {
        let c: f64 = 0.004;
        let exp = RateModel::new(
            IncidenceSpec::ExponentialFirstOrder { k0: c.ln(), k1: 0.0, k2: 0.0 },
            MortalitySpec::Gompertz(GompertzParams::reference()),
            MortalityRatioParams::reference(),
        )
        .unwrap();
        let cst = RateModel::new(
            IncidenceSpec::Constant { rate: c },
            MortalitySpec::Gompertz(GompertzParams::reference()),
            MortalityRatioParams::reference(),
        )
        .unwrap();
        let a = Analytic::new(&exp).odds_convolution_special(100.0, 70.0).unwrap().odds;
        let b = Analytic::new(&cst).odds_pseudo(100.0, 70.0).unwrap().odds;
        assert!((a - b).abs() <= 1e-12 * b);
    }

    #[test]
    fn odds_residual_needs_flat_ratio() {
        let m = RateModel::reference();
        let err = Analytic::new(&m).pde_residual_odds(100.0, 60.0, 0.1).unwrap_err();
        assert!(matches!(err, Error::Precondition(_)));
    }

    #[test]
    fn residuals_vanish_without_rates() {
        let z = zero_model();
        let an = Analytic::new(&z);
        assert_eq!(an.pde_residual_prevalence(100.0, 60.0, 0.1).unwrap(), 0.0);
        assert_eq!(an.pde_residual_odds(100.0, 60.0, 0.1).unwrap(), 0.0);
        assert!(an.pde_residual_odds(100.0, 0.05, 0.1).is_err());
    }

    #[test]
    fn reconstruct_from_zero_prevalence() {
        let ages: Vec<f64> = (0..10).map(|k| 40.0 + k as f64 * 0.5).collect();
        let zero = |time| CrossSection {
            time,
            ages: ages.clone(),
            prevalence: vec![0.0; ages.len()],
        };
        let est = reconstruct_incidence(&zero(100.0), &zero(100.5), |_, _| Ok(0.01), |_, _| 0.01).unwrap();
        assert_eq!(est.len(), ages.len() - 1);
        assert!(est.iter().all(|e| e.incidence == 0.0));
    }

    #[test]
    fn reconstruct_rejects_mismatch_and_certainty() {
        let a = CrossSection { time: 0.0, ages: vec![1.0, 2.0], prevalence: vec![0.1, 0.2] };
        let b = CrossSection { time: 1.0, ages: vec![1.0, 3.0], prevalence: vec![0.1, 0.2] };
        assert!(reconstruct_incidence(&a, &b, |_, _| Ok(0.0), |_, _| 0.0).is_err());
        let c = CrossSection { time: 1.0, ages: vec![1.0, 2.0], prevalence: vec![0.1, 1.0] };
        assert!(reconstruct_incidence(&a, &c, |_, _| Ok(0.0), |_, _| 0.0).is_err());
    }

    #[test]
    fn characteristic_grid() {
        let m = RateModel::reference();
        let an = Analytic::new(&m);
        let g = an.along_characteristic(40.0, &[35.0, 50.0, 60.0], OddsMethod::PseudoConvolution).unwrap();
        assert!(g.values.windows(2).all(|w| w[0] < w[1]));
        assert!(an.along_characteristic(40.0, &[50.0, 35.0], OddsMethod::Keiding).is_err());
    }
}
