//! Transition rates of the illness-death model and their cumulative
//! integrals along characteristics of the Lexis plane.
//!
//! All cumulative quantities take a point `(t, a)` and a length `delta` and
//! integrate the rate along the 45° line ending there, i.e. over
//! `(t - delta + tau, a - delta + tau)` for `tau` in `[0, delta]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{integrate_with_breaks, QuadratureConfig};

/// Gompertz intensity `exp(xi1 + xi2 * a + xi3 * t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GompertzParams {
    pub xi1: f64,
    pub xi2: f64,
    pub xi3: f64,
}

impl GompertzParams {
    pub fn new(xi1: f64, xi2: f64, xi3: f64) -> Result<Self> {
        let p = Self { xi1, xi2, xi3 };
        p.validate()?;
        Ok(p)
    }

    /// Parameters used in the reference simulation study.
    pub fn reference() -> Self {
        Self {
            xi1: -10.7,
            xi2: 0.1,
            xi3: 0.998f64.ln(),
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.xi1.is_finite() && self.xi2.is_finite() && self.xi3.is_finite()) {
            return Err(Error::Config("Gompertz parameters must be finite".into()));
        }
        if self.xi2 + self.xi3 == 0.0 {
            return Err(Error::Config(
                "Gompertz slopes must not cancel (xi2 + xi3 = 0)".into(),
            ));
        }
        Ok(())
    }

    /// Slope of the log-hazard along a characteristic.
    fn drift(&self) -> f64 {
        self.xi2 + self.xi3
    }
}

/// Mortality of the healthy population.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum MortalitySpec {
    Gompertz(GompertzParams),
    /// Time- and age-independent hazard; `rate = 0` switches mortality off.
    Constant { rate: f64 },
}

/// Rectangular `(t, a)` grid of incidence rates, row-major in time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TabulatedGrid {
    pub times: Vec<f64>,
    pub ages: Vec<f64>,
    /// `rates[i][j]` is the rate at `(times[i], ages[j])`.
    pub rates: Vec<Vec<f64>>,
}

impl TabulatedGrid {
    fn validate(&self) -> Result<()> {
        let ascending = |v: &[f64]| v.windows(2).all(|w| w[0] < w[1]);
        if self.times.is_empty() || self.ages.is_empty() {
            return Err(Error::Config("tabulated incidence grid is empty".into()));
        }
        if !ascending(&self.times) || !ascending(&self.ages) {
            return Err(Error::Config(
                "tabulated grid axes must be strictly increasing".into(),
            ));
        }
        if self.rates.len() != self.times.len()
            || self.rates.iter().any(|r| r.len() != self.ages.len())
        {
            return Err(Error::Config("tabulated rates do not match grid shape".into()));
        }
        if self
            .rates
            .iter()
            .flatten()
            .any(|r| !(r.is_finite() && *r >= 0.0))
        {
            return Err(Error::Config("tabulated rates must be finite and >= 0".into()));
        }
        Ok(())
    }

    /// Bilinear interpolation, clamped to the grid.
    pub fn rate(&self, t: f64, a: f64) -> f64 {
        let (i0, i1, wt) = bracket(&self.times, t);
        let (j0, j1, wa) = bracket(&self.ages, a);
        let r = &self.rates;
        let lo = r[i0][j0] * (1.0 - wa) + r[i0][j1] * wa;
        let hi = r[i1][j0] * (1.0 - wa) + r[i1][j1] * wa;
        lo * (1.0 - wt) + hi * wt
    }
}

fn bracket(axis: &[f64], x: f64) -> (usize, usize, f64) {
    let n = axis.len();
    if n == 1 || x <= axis[0] {
        return (0, 0, 0.0);
    }
    if x >= axis[n - 1] {
        return (n - 1, n - 1, 0.0);
    }
    let hi = axis.partition_point(|v| *v <= x);
    let lo = hi - 1;
    (lo, hi, (x - axis[lo]) / (axis[hi] - axis[lo]))
}

/// Incidence rate family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum IncidenceSpec {
    /// `(a - onset_age)_+ / denominator`.
    PositivePartLinear { onset_age: f64, denominator: f64 },
    /// `exp(k0 + k1 * a + k2 * t)`.
    ExponentialFirstOrder { k0: f64, k1: f64, k2: f64 },
    Constant { rate: f64 },
    Tabulated(TabulatedGrid),
}

impl IncidenceSpec {
    pub fn reference() -> Self {
        IncidenceSpec::PositivePartLinear {
            onset_age: 30.0,
            denominator: 3000.0,
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            IncidenceSpec::PositivePartLinear {
                onset_age,
                denominator,
            } => {
                if !onset_age.is_finite() || !(denominator.is_finite() && *denominator > 0.0) {
                    return Err(Error::Config(
                        "positive-part incidence needs finite onset age and denominator > 0"
                            .into(),
                    ));
                }
            }
            IncidenceSpec::ExponentialFirstOrder { k0, k1, k2 } => {
                if !(k0.is_finite() && k1.is_finite() && k2.is_finite()) {
                    return Err(Error::Config("exponential incidence parameters must be finite".into()));
                }
            }
            IncidenceSpec::Constant { rate } => {
                if !(rate.is_finite() && *rate >= 0.0) {
                    return Err(Error::Config("constant incidence must be finite and >= 0".into()));
                }
            }
            IncidenceSpec::Tabulated(grid) => grid.validate()?,
        }
        Ok(())
    }

    fn rate(&self, t: f64, a: f64) -> f64 {
        match self {
            IncidenceSpec::PositivePartLinear {
                onset_age,
                denominator,
            } => (a - onset_age).max(0.0) / denominator,
            IncidenceSpec::ExponentialFirstOrder { k0, k1, k2 } => (k0 + k1 * a + k2 * t).exp(),
            IncidenceSpec::Constant { rate } => *rate,
            IncidenceSpec::Tabulated(grid) => grid.rate(t, a),
        }
    }

    /// True when the rate is identically zero.
    pub fn is_zero(&self) -> bool {
        match self {
            IncidenceSpec::Constant { rate } => *rate == 0.0,
            IncidenceSpec::Tabulated(g) => g.rates.iter().flatten().all(|r| *r == 0.0),
            _ => false,
        }
    }

    /// Values of `delta` in `[0, delta_max]` at which the rate along the
    /// characteristic ending at `(t, a)` has a kink.
    pub fn kinks(&self, t: f64, a: f64, delta_max: f64) -> Vec<f64> {
        let in_range = |d: &f64| *d > 0.0 && *d < delta_max;
        match self {
            IncidenceSpec::PositivePartLinear { onset_age, .. } => {
                std::iter::once(a - onset_age).filter(in_range).collect()
            }
            IncidenceSpec::Tabulated(grid) => {
                let mut v: Vec<f64> = grid
                    .ages
                    .iter()
                    .map(|g| a - g)
                    .chain(grid.times.iter().map(|g| t - g))
                    .filter(in_range)
                    .collect();
                v.sort_by(f64::total_cmp);
                v
            }
            _ => Vec::new(),
        }
    }
}

/// Quadratic mortality rate ratio `R(d) = gamma1 * (d - gamma2)^2 + gamma3`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MortalityRatioParams {
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma3: f64,
}

impl MortalityRatioParams {
    pub fn new(gamma1: f64, gamma2: f64, gamma3: f64) -> Self {
        Self {
            gamma1,
            gamma2,
            gamma3,
        }
    }

    /// Input of the reference simulation study.
    pub fn reference() -> Self {
        Self::new(0.04, 5.0, 1.0)
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.gamma1, self.gamma2, self.gamma3]
    }

    pub fn from_array(g: [f64; 3]) -> Self {
        Self::new(g[0], g[1], g[2])
    }

    #[inline]
    pub fn value(&self, d: f64) -> f64 {
        let x = d - self.gamma2;
        self.gamma1 * x * x + self.gamma3
    }

    /// Smallest value of `R` on `[0, max_duration]`.
    pub fn min_on(&self, max_duration: f64) -> f64 {
        let ends = self.value(0.0).min(self.value(max_duration));
        if self.gamma1 > 0.0 {
            ends.min(self.value(self.gamma2.clamp(0.0, max_duration)))
        } else {
            ends
        }
    }

    fn is_duration_independent(&self) -> bool {
        self.gamma1 == 0.0
    }

    /// `R` expanded as `c2 d^2 + c1 d + c0`.
    fn monomial(&self) -> [f64; 3] {
        let g1 = self.gamma1;
        let g2 = self.gamma2;
        [g1 * g2 * g2 + self.gamma3, -2.0 * g1 * g2, g1]
    }
}

pub const DEFAULT_MAX_DURATION: f64 = 100.0;

/// The full set of illness-death transition rates.
#[derive(Debug, Clone, PartialEq)]
pub struct RateModel {
    pub incidence: IncidenceSpec,
    pub m0: MortalitySpec,
    pub ratio: MortalityRatioParams,
    pub max_duration: f64,
    /// Used where a cumulative hazard has no closed form.
    pub quadrature: QuadratureConfig,
}

impl RateModel {
    pub fn new(
        incidence: IncidenceSpec,
        m0: MortalitySpec,
        ratio: MortalityRatioParams,
    ) -> Result<Self> {
        Self::with_max_duration(incidence, m0, ratio, DEFAULT_MAX_DURATION)
    }

    pub fn with_max_duration(
        incidence: IncidenceSpec,
        m0: MortalitySpec,
        ratio: MortalityRatioParams,
        max_duration: f64,
    ) -> Result<Self> {
        incidence.validate()?;
        match &m0 {
            MortalitySpec::Gompertz(p) => p.validate()?,
            MortalitySpec::Constant { rate } => {
                if !(rate.is_finite() && *rate >= 0.0) {
                    return Err(Error::Config("constant mortality must be finite and >= 0".into()));
                }
            }
        }
        let model = Self {
            incidence,
            m0,
            ratio,
            max_duration,
            quadrature: QuadratureConfig {
                rel_tol: 1e-12,
                abs_tol: 1e-15,
                max_subdivisions: 400,
                closed_form_hazards: true,
            },
        };
        model.check_ratio(&ratio)?;
        Ok(model)
    }

    /// The rate model of the reference simulation study.
    pub fn reference() -> Self {
        Self::new(
            IncidenceSpec::reference(),
            MortalitySpec::Gompertz(GompertzParams::reference()),
            MortalityRatioParams::reference(),
        )
        .expect("reference parameters are valid")
    }

    fn check_ratio(&self, ratio: &MortalityRatioParams) -> Result<()> {
        let g = ratio.as_array();
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("mortality ratio parameters must be finite".into()));
        }
        if !(self.max_duration.is_finite() && self.max_duration > 0.0) {
            return Err(Error::Config("max_duration must be positive".into()));
        }
        let min = ratio.min_on(self.max_duration);
        if min <= 0.0 {
            return Err(Error::Domain(format!(
                "mortality ratio not positive on [0, {}] (minimum {min})",
                self.max_duration
            )));
        }
        Ok(())
    }

    /// Copy of this model with a different mortality ratio.
    pub fn with_ratio(&self, ratio: MortalityRatioParams) -> Result<Self> {
        self.check_ratio(&ratio)?;
        let mut m = self.clone();
        m.ratio = ratio;
        Ok(m)
    }

    pub fn incidence(&self, t: f64, a: f64) -> Result<f64> {
        if a < 0.0 || a.is_nan() {
            return Err(Error::Domain(format!("incidence needs age >= 0, got {a}")));
        }
        Ok(self.incidence.rate(t, a))
    }

    #[inline]
    pub(crate) fn incidence_at(&self, t: f64, a: f64) -> f64 {
        self.incidence.rate(t, a)
    }

    #[inline]
    pub fn mortality_healthy(&self, t: f64, a: f64) -> f64 {
        match &self.m0 {
            MortalitySpec::Gompertz(p) => (p.xi1 + p.xi2 * a + p.xi3 * t).exp(),
            MortalitySpec::Constant { rate } => *rate,
        }
    }

    pub fn mortality_ratio(&self, d: f64) -> Result<f64> {
        if d < 0.0 || d.is_nan() {
            return Err(Error::Domain(format!("duration must be >= 0, got {d}")));
        }
        let r = self.ratio.value(d);
        if r <= 0.0 {
            return Err(Error::Domain(format!("mortality ratio R({d}) = {r} is not positive")));
        }
        Ok(r)
    }

    pub fn mortality_diseased(&self, t: f64, a: f64, d: f64) -> Result<f64> {
        if d > a {
            return Err(Error::Domain(format!("duration {d} exceeds age {a}")));
        }
        Ok(self.mortality_healthy(t, a) * self.mortality_ratio(d)?)
    }

    #[inline]
    pub(crate) fn m1_at(&self, t: f64, a: f64, d: f64) -> f64 {
        self.mortality_healthy(t, a) * self.ratio.value(d)
    }

    fn check_span(a: f64, delta: f64) -> Result<()> {
        if !(delta >= 0.0 && delta <= a) {
            return Err(Error::Domain(format!(
                "characteristic length {delta} must lie in [0, age = {a}]"
            )));
        }
        Ok(())
    }

    /// `M0(t, a, delta)`: cumulative healthy mortality along the characteristic.
    pub fn cumulative_m0(&self, t: f64, a: f64, delta: f64) -> Result<f64> {
        Self::check_span(a, delta)?;
        Ok(self.cum_m0(t, a, delta))
    }

    pub(crate) fn cum_m0(&self, t: f64, a: f64, delta: f64) -> f64 {
        if delta == 0.0 {
            return 0.0;
        }
        match &self.m0 {
            MortalitySpec::Gompertz(p) => {
                let b = p.drift();
                self.mortality_healthy(t - delta, a - delta) * (b * delta).exp_m1() / b
            }
            MortalitySpec::Constant { rate } => rate * delta,
        }
    }

    /// `I(t, a, delta)`: cumulative incidence hazard along the characteristic.
    pub fn cumulative_incidence_hazard(&self, t: f64, a: f64, delta: f64) -> Result<f64> {
        Self::check_span(a, delta)?;
        self.cum_incidence(t, a, delta)
    }

    pub(crate) fn cum_incidence(&self, t: f64, a: f64, delta: f64) -> Result<f64> {
        if delta == 0.0 {
            return Ok(0.0);
        }
        Ok(match &self.incidence {
            IncidenceSpec::PositivePartLinear {
                onset_age,
                denominator,
            } => {
                let start = a - delta;
                if a <= *onset_age {
                    0.0
                } else if start >= *onset_age {
                    (delta * (start - onset_age) + 0.5 * delta * delta) / denominator
                } else {
                    let above = a - onset_age;
                    0.5 * above * above / denominator
                }
            }
            IncidenceSpec::ExponentialFirstOrder { k1, k2, .. } => {
                let k = k1 + k2;
                let start = self.incidence_at(t - delta, a - delta);
                if k == 0.0 {
                    start * delta
                } else {
                    start * (k * delta).exp_m1() / k
                }
            }
            IncidenceSpec::Constant { rate } => rate * delta,
            IncidenceSpec::Tabulated(_) => self.integrate_along(t, a, delta, |s, x| {
                self.incidence_at(s, x)
            })?,
        })
    }

    /// Cumulative hazard of leaving the healthy state, `M0 + I`.
    pub(crate) fn cum_healthy_exit(&self, t: f64, a: f64, delta: f64) -> Result<f64> {
        Ok(self.cum_m0(t, a, delta) + self.cum_incidence(t, a, delta)?)
    }

    /// `M1(t, a, d) = int_0^d m1(t - d + tau, a - d + tau, tau) dtau`: the
    /// cumulative mortality of a case of duration `d` observed at `(t, a)`.
    pub fn cumulative_m1(&self, t: f64, a: f64, d: f64) -> Result<f64> {
        Self::check_span(a, d)?;
        Ok(self.cum_m1(t, a, d))
    }

    pub(crate) fn cum_m1(&self, t: f64, a: f64, d: f64) -> f64 {
        if d == 0.0 {
            return 0.0;
        }
        if self.ratio.is_duration_independent() {
            return self.cum_m0(t, a, d) * self.ratio.gamma3;
        }
        let [c0, c1, c2] = self.ratio.monomial();
        match &self.m0 {
            MortalitySpec::Gompertz(p) => {
                let moments = exp_moments(p.drift(), d);
                self.mortality_healthy(t - d, a - d)
                    * (c0 * moments[0] + c1 * moments[1] + c2 * moments[2])
            }
            MortalitySpec::Constant { rate } => {
                rate * (c0 * d + c1 * d * d / 2.0 + c2 * d * d * d / 3.0)
            }
        }
    }

    /// Numerical integral of `rate(t', a')` along the characteristic.
    pub(crate) fn integrate_along<F: Fn(f64, f64) -> f64>(
        &self,
        t: f64,
        a: f64,
        delta: f64,
        rate: F,
    ) -> Result<f64> {
        let t0 = t - delta;
        let a0 = a - delta;
        let breaks: Vec<f64> = self
            .incidence
            .kinks(t, a, delta)
            .into_iter()
            .map(|k| delta - k)
            .collect();
        integrate_with_breaks(
            |tau| rate(t0 + tau, a0 + tau),
            0.0,
            delta,
            &breaks,
            &self.quadrature,
        )
    }

    /// Healthy-exit cumulative hazard honoring the quadrature switch.
    pub(crate) fn healthy_exit_hazard(&self, t: f64, a: f64, delta: f64, cfg: &QuadratureConfig) -> Result<f64> {
        if cfg.closed_form_hazards {
            self.cum_healthy_exit(t, a, delta)
        } else {
            self.integrate_along(t, a, delta, |s, x| {
                self.mortality_healthy(s, x) + self.incidence_at(s, x)
            })
        }
    }

    pub(crate) fn diseased_hazard(&self, t: f64, a: f64, d: f64, cfg: &QuadratureConfig) -> Result<f64> {
        if cfg.closed_form_hazards {
            Ok(self.cum_m1(t, a, d))
        } else {
            let t0 = t - d;
            let a0 = a - d;
            integrate_with_breaks(
                |tau| self.m1_at(t0 + tau, a0 + tau, tau),
                0.0,
                d,
                &[],
                &self.quadrature,
            )
        }
    }
}

/// `[int_0^d e^{b x} dx, int_0^d x e^{b x} dx, int_0^d x^2 e^{b x} dx]`.
fn exp_moments(b: f64, d: f64) -> [f64; 3] {
    let z = b * d;
    if z.abs() <= 1.0 {
        // series in z avoids the cancellation of the recurrence
        let mut out = [0.0; 3];
        for (n, slot) in out.iter_mut().enumerate() {
            let mut term = 1.0;
            let mut sum = 0.0;
            for k in 0..60 {
                let contrib = term / (n + k + 1) as f64;
                sum += contrib;
                if contrib.abs() < 1e-18 * sum.abs() {
                    break;
                }
                term *= z / (k + 1) as f64;
            }
            *slot = sum * d.powi(n as i32 + 1);
        }
        out
    } else {
        let e = z.exp();
        let j0 = z.exp_m1() / b;
        let j1 = (d * e - j0) / b;
        let j2 = (d * d * e - 2.0 * j1) / b;
        [j0, j1, j2]
    }
}
