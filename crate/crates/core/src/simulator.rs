//! Individual-level simulation of the illness-death model on the Lexis
//! plane and aggregation into current-status tables.
//!
//! Event times are drawn exactly by inverting the closed-form cumulative
//! hazards: a standard exponential variate `E` is drawn and the age `x`
//! with `H(x) = E` is located by safeguarded Newton iteration. Every
//! individual owns an RNG stream derived from the seed and its index, so
//! results do not depend on scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::analytic::Analytic;
use crate::error::{Error, Result};
use crate::quadrature::{integrate, QuadratureConfig};
use crate::rate_model::RateModel;

/// Alive count in ages 40–95 at the cross-section of the reference study.
pub const REFERENCE_ALIVE: f64 = 74_388.0;

const ROOT_TOL: f64 = 1e-10;

/// Half-open age interval `[lo, hi)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgeGroup {
    pub lo: f64,
    pub hi: f64,
}

impl AgeGroup {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn contains(&self, age: f64) -> bool {
        age >= self.lo && age < self.hi
    }
}

/// The eleven five-year groups 40–44 … 90–94.
pub fn reference_age_groups() -> Vec<AgeGroup> {
    (0..11)
        .map(|k| AgeGroup::new(40.0 + 5.0 * k as f64, 45.0 + 5.0 * k as f64))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub births_per_year: f64,
    /// `[t_min, t_max]` of birth times.
    pub birth_window: [f64; 2],
    pub cross_section_time: f64,
    pub age_groups: Vec<AgeGroup>,
    pub rng_seed: u64,
    pub max_age: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            births_per_year: 1000.0,
            birth_window: [0.0, 65.0],
            cross_section_time: 100.0,
            age_groups: reference_age_groups(),
            rng_seed: 1,
            max_age: 110.0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.births_per_year > 0.0 && self.births_per_year.is_finite()) {
            return bad("births_per_year must be positive");
        }
        let [t_min, t_max] = self.birth_window;
        if !(t_min < t_max) {
            return bad("birth window must satisfy t_min < t_max");
        }
        if !(self.max_age > 0.0) {
            return bad("max_age must be positive");
        }
        if self.age_groups.is_empty() {
            return bad("at least one age group is required");
        }
        if self.age_groups.iter().any(|g| !(g.lo >= 0.0 && g.lo < g.hi)) {
            return bad("age groups need 0 <= lo < hi");
        }
        if self.age_groups.windows(2).any(|w| w[1].lo < w[0].hi) {
            return bad("age groups must be ascending and disjoint");
        }
        let youngest = self.age_groups[0].lo;
        let oldest = self.age_groups[self.age_groups.len() - 1].hi;
        let t = self.cross_section_time;
        if t - t_max > youngest || t - t_min < oldest {
            return bad("birth window does not cover every age group at the cross-section");
        }
        if oldest > self.max_age {
            return bad("age groups extend beyond max_age");
        }
        Ok(())
    }

    /// Number of individuals the birth process produces.
    pub fn total_births(&self) -> u64 {
        self.birth_slots().map(|(_, _, n)| n).sum()
    }

    /// `(start, length, count)` per birth year of the window.
    fn birth_slots(&self) -> impl Iterator<Item = (f64, f64, u64)> + '_ {
        let [t_min, t_max] = self.birth_window;
        let span = t_max - t_min;
        let years = span.ceil() as u64;
        let b = self.births_per_year;
        (0..years).map(move |j| {
            let start = j as f64;
            let end = (start + 1.0).min(span);
            let count = (b * end).floor() as u64 - (b * start).floor() as u64;
            (t_min + start, end - start, count)
        })
    }
}

/// One simulated life course. Absent times mean the event did not happen
/// before `max_age`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LifeRecord {
    pub birth_time: f64,
    pub onset_time: Option<f64>,
    pub death_time: Option<f64>,
}

impl LifeRecord {
    /// State at calendar time `t`: `None` if not yet born, dead, or past
    /// the censoring age; otherwise whether the person is diseased.
    pub fn status_at(&self, t: f64, max_age: f64) -> Option<bool> {
        if t < self.birth_time || t - self.birth_time > max_age {
            return None;
        }
        if self.death_time.is_some_and(|d| d <= t) {
            return None;
        }
        Some(self.onset_time.is_some_and(|o| o <= t))
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PopulationLedger {
    pub records: Vec<LifeRecord>,
}

impl PopulationLedger {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgeGroupRow {
    pub k: usize,
    pub age_lo: f64,
    pub age_hi: f64,
    pub n: u64,
    pub c: u64,
}

impl AgeGroupRow {
    pub fn group(&self) -> AgeGroup {
        AgeGroup::new(self.age_lo, self.age_hi)
    }
}

/// Aggregated current-status data: persons alive and persons diseased per
/// age group at one cross-section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgeGroupTable {
    pub cross_section_time: f64,
    pub rows: Vec<AgeGroupRow>,
}

impl AgeGroupTable {
    pub fn new(cross_section_time: f64, rows: Vec<AgeGroupRow>) -> Result<Self> {
        let table = Self {
            cross_section_time,
            rows,
        };
        table.validate()?;
        Ok(table)
    }

    pub fn validate(&self) -> Result<()> {
        for r in &self.rows {
            if r.c > r.n {
                return Err(Error::Config(format!(
                    "group {}: more cases ({}) than persons ({})",
                    r.k, r.c, r.n
                )));
            }
            if !(r.age_lo < r.age_hi) {
                return Err(Error::Config(format!("group {}: empty age interval", r.k)));
            }
        }
        Ok(())
    }

    /// Column sums `(n, c)`.
    pub fn totals(&self) -> (u64, u64) {
        self.rows
            .iter()
            .fold((0, 0), |(n, c), r| (n + r.n, c + r.c))
    }

    /// The reference study's cross-section.
    pub fn reference() -> Self {
        const ALIVE: [u64; 11] = [9858, 9786, 9597, 9328, 8857, 8040, 6873, 5329, 3706, 2104, 910];
        const CASES: [u64; 11] = [283, 501, 781, 1145, 1228, 1347, 1240, 997, 679, 370, 164];
        let rows = reference_age_groups()
            .iter()
            .enumerate()
            .map(|(i, g)| AgeGroupRow {
                k: i + 1,
                age_lo: g.lo,
                age_hi: g.hi,
                n: ALIVE[i],
                c: CASES[i],
            })
            .collect();
        Self {
            cross_section_time: 100.0,
            rows,
        }
    }
}

/// Solves `cumulative(x) = target` on `[0, upper]` for an increasing
/// cumulative hazard with derivative `rate`. Requires `cumulative(upper) >= target`.
fn invert_cumulative(
    cumulative: impl Fn(f64) -> Result<f64>,
    rate: impl Fn(f64) -> f64,
    target: f64,
    upper: f64,
) -> Result<f64> {
    let mut lo = 0.0;
    let mut hi = upper;
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let g = cumulative(x)? - target;
        if g > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let slope = rate(x);
        let newton = if slope > 0.0 { x - g / slope } else { f64::NAN };
        let next = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - x).abs() <= ROOT_TOL || hi - lo <= ROOT_TOL {
            return Ok(next);
        }
        x = next;
    }
    Err(Error::RootFinding(format!(
        "no convergence inverting cumulative hazard at target {target}"
    )))
}

/// Draws one life course for a person born at `birth_time`.
pub fn sample_life<R: Rng + ?Sized>(
    model: &RateModel,
    birth_time: f64,
    max_age: f64,
    rng: &mut R,
) -> Result<LifeRecord> {
    let s = birth_time;
    let healthy_exit = |x: f64| model.cum_healthy_exit(s + x, x, x);
    let healthy_rate = |x: f64| model.incidence_at(s + x, x) + model.mortality_healthy(s + x, x);

    let mut record = LifeRecord {
        birth_time,
        onset_time: None,
        death_time: None,
    };
    let e1: f64 = rng.sample(Exp1);
    if healthy_exit(max_age)? < e1 {
        return Ok(record);
    }
    let x = invert_cumulative(healthy_exit, healthy_rate, e1, max_age)?;
    let inc = model.incidence_at(s + x, x);
    let m0 = model.mortality_healthy(s + x, x);
    let u: f64 = rng.random();
    if u * (inc + m0) >= inc {
        record.death_time = Some(s + x);
        return Ok(record);
    }
    record.onset_time = Some(s + x);

    let onset = s + x;
    let remaining = max_age - x;
    let diseased_exit = |d: f64| Ok(model.cum_m1(onset + d, x + d, d));
    let diseased_rate = |d: f64| model.m1_at(onset + d, x + d, d);
    let e2: f64 = rng.sample(Exp1);
    if diseased_exit(remaining)? < e2 {
        return Ok(record);
    }
    let d = invert_cumulative(diseased_exit, diseased_rate, e2, remaining)?;
    record.death_time = Some(onset + d);
    Ok(record)
}

fn individual_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Simulates every birth of the configured window.
pub fn run_simulation(model: &RateModel, config: &SimConfig) -> Result<PopulationLedger> {
    config.validate()?;
    let mut slots = Vec::with_capacity(config.total_births() as usize);
    for (start, len, count) in config.birth_slots() {
        slots.extend(std::iter::repeat_n((start, len), count as usize));
    }
    let indexed: Vec<(u64, (f64, f64))> = slots
        .into_iter()
        .enumerate()
        .map(|(i, s)| (i as u64, s))
        .collect();
    let records = crate::par::map(&indexed, |(index, (start, len))| {
        let mut rng = individual_rng(config.rng_seed, *index);
        let birth = start + len * rng.random::<f64>();
        sample_life(model, birth, config.max_age, &mut rng)
    })?;
    Ok(PopulationLedger { records })
}

/// Counts persons alive and diseased per age group at the cross-section.
pub fn cross_section(ledger: &PopulationLedger, config: &SimConfig) -> AgeGroupTable {
    let t = config.cross_section_time;
    let mut rows: Vec<AgeGroupRow> = config
        .age_groups
        .iter()
        .enumerate()
        .map(|(i, g)| AgeGroupRow {
            k: i + 1,
            age_lo: g.lo,
            age_hi: g.hi,
            n: 0,
            c: 0,
        })
        .collect();
    for rec in &ledger.records {
        let Some(diseased) = rec.status_at(t, config.max_age) else {
            continue;
        };
        let age = t - rec.birth_time;
        if let Some(row) = rows.iter_mut().find(|r| r.group().contains(age)) {
            row.n += 1;
            row.c += u64::from(diseased);
        }
    }
    AgeGroupTable {
        cross_section_time: t,
        rows,
    }
}

/// Independent replicates with seeds `rng_seed + i`.
pub fn replicate_study(
    model: &RateModel,
    config: &SimConfig,
    n_replicates: usize,
) -> Result<Vec<AgeGroupTable>> {
    if n_replicates == 0 {
        return Err(Error::Config("at least one replicate is required".into()));
    }
    (0..n_replicates as u64)
        .map(|i| {
            let cfg = SimConfig {
                rng_seed: config.rng_seed.wrapping_add(i),
                ..config.clone()
            };
            run_simulation(model, &cfg).map(|ledger| cross_section(&ledger, &cfg))
        })
        .collect()
}

/// Expected number alive within the age groups at the cross-section per
/// unit birth rate.
pub fn expected_alive_per_birth(model: &RateModel, config: &SimConfig) -> Result<f64> {
    let analytic = Analytic::new(model);
    let t = config.cross_section_time;
    let quad = QuadratureConfig {
        rel_tol: 1e-9,
        ..QuadratureConfig::default()
    };
    let mut total = 0.0;
    for g in &config.age_groups {
        let failure = std::cell::Cell::new(None);
        let v = integrate(
            |a| {
                let alive = analytic
                    .survival_healthy(t, a)
                    .and_then(|s| Ok(s + analytic.total_cases(t, a)?));
                alive.unwrap_or_else(|e| {
                    failure.set(Some(e));
                    0.0
                })
            },
            g.lo,
            g.hi,
            &quad,
        )?;
        if let Some(e) = failure.into_inner() {
            return Err(e);
        }
        total += v;
    }
    Ok(total)
}

/// Birth rate whose expected alive count in the age groups equals `target`.
pub fn calibrate_births(model: &RateModel, config: &SimConfig, target: f64) -> Result<f64> {
    let per_birth = expected_alive_per_birth(model, config)?;
    if !(per_birth > 0.0) {
        return Err(Error::Domain("nobody survives into the age groups".into()));
    }
    Ok(target / per_birth)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rate_model::{IncidenceSpec, MortalityRatioParams, MortalitySpec};

    fn zero_model() -> RateModel {
        RateModel::new(
            IncidenceSpec::Constant { rate: 0.0 },
            MortalitySpec::Constant { rate: 0.0 },
            MortalityRatioParams::new(0.0, 0.0, 1.0),
        )
        .unwrap()
    }

    #[test]
    fn zero_rates_censor_everyone() {
        let mut rng = individual_rng(3, 0);
        let rec = sample_life(&zero_model(), 10.0, 110.0, &mut rng).unwrap();
        assert_eq!(rec.onset_time, None);
        assert_eq!(rec.death_time, None);
    }

    #[test]
    fn inversion_hits_target() {
        let m = RateModel::reference();
        let s = 20.0;
        let target = 1.3;
        let x = invert_cumulative(
            |x| m.cum_healthy_exit(s + x, x, x),
            |x| m.incidence_at(s + x, x) + m.mortality_healthy(s + x, x),
            target,
            110.0,
        )
        .unwrap();
        assert!((m.cum_healthy_exit(s + x, x, x).unwrap() - target).abs() < 1e-9);
    }

    #[test]
    fn single_birth() {
        let cfg = SimConfig {
            births_per_year: 1.0 / 65.0,
            ..SimConfig::default()
        };
        let ledger = run_simulation(&RateModel::reference(), &cfg).unwrap();
        assert_eq!(ledger.len(), 1);
    }

    #[test]
    fn birth_counts_follow_rate() {
        let cfg = SimConfig {
            births_per_year: 12.5,
            ..SimConfig::default()
        };
        assert_eq!(cfg.total_births(), (12.5f64 * 65.0).floor() as u64);
        let ledger = run_simulation(&RateModel::reference(), &cfg).unwrap();
        assert!(ledger
            .records
            .iter()
            .all(|r| r.birth_time >= 0.0 && r.birth_time < 65.0));
    }

    #[test]
    fn same_seed_same_ledger() {
        let cfg = SimConfig {
            births_per_year: 40.0,
            ..SimConfig::default()
        };
        let m = RateModel::reference();
        assert_eq!(run_simulation(&m, &cfg).unwrap(), run_simulation(&m, &cfg).unwrap());
    }

    #[test]
    fn config_validation() {
        let mut cfg = SimConfig::default();
        cfg.births_per_year = 0.0;
        assert!(cfg.validate().is_err());
        let mut cfg = SimConfig::default();
        cfg.birth_window = [30.0, 65.0];
        assert!(cfg.validate().is_err());
        let mut cfg = SimConfig::default();
        cfg.age_groups = vec![AgeGroup::new(50.0, 55.0), AgeGroup::new(40.0, 45.0)];
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn empty_ledger_gives_zero_table() {
        let t = cross_section(&PopulationLedger::default(), &SimConfig::default());
        assert_eq!(t.rows.len(), 11);
        assert_eq!(t.totals(), (0, 0));
    }

    #[test]
    fn single_diseased_individual() {
        let ledger = PopulationLedger {
            records: vec![LifeRecord {
                birth_time: 59.0,
                onset_time: Some(95.0),
                death_time: Some(120.0),
            }],
        };
        let t = cross_section(&ledger, &SimConfig::default());
        assert_eq!((t.rows[0].n, t.rows[0].c), (1, 1));
        assert_eq!(t.totals(), (1, 1));
    }

    #[test]
    fn status_respects_death_and_censoring() {
        let rec = LifeRecord {
            birth_time: 0.0,
            onset_time: Some(50.0),
            death_time: Some(60.0),
        };
        assert_eq!(rec.status_at(40.0, 110.0), Some(false));
        assert_eq!(rec.status_at(55.0, 110.0), Some(true));
        assert_eq!(rec.status_at(60.0, 110.0), None);
        let censored = LifeRecord {
            birth_time: 0.0,
            onset_time: None,
            death_time: None,
        };
        assert_eq!(censored.status_at(111.0, 110.0), None);
    }

    #[test]
    fn reference_table_totals() {
        let t = AgeGroupTable::reference();
        assert_eq!(t.totals(), (74_388, 8_735));
    }

    #[test]
    fn replicates_are_seeded() {
        let cfg = SimConfig {
            births_per_year: 200.0,
            ..SimConfig::default()
        };
        let m = RateModel::reference();
        let reps = replicate_study(&m, &cfg, 2).unwrap();
        let single = cross_section(&run_simulation(&m, &cfg).unwrap(), &cfg);
        assert_eq!(reps[0], single);
        assert_ne!(reps[0], reps[1]);
        assert!(replicate_study(&m, &cfg, 0).is_err());
    }
}
