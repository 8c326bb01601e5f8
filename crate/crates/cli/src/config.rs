//! The JSON run configuration.

use std::path::PathBuf;

use idm_odds::estimator::FitConfig;
use idm_odds::optim::{HessianStep, SimplexTolerances};
use idm_odds::rate_model::DEFAULT_MAX_DURATION;
use idm_odds::simulator::{reference_age_groups, REFERENCE_ALIVE};
use idm_odds::{
    AgeGroup, GroupEvaluation, IncidenceSpec, MortalityRatioParams, MortalitySpec,
    QuadratureConfig, RateModel, SimConfig,
};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub incidence: IncidenceSpec,
    pub m0: MortalitySpec,
    pub ratio: MortalityRatioParams,
    #[serde(default = "default_max_duration")]
    pub max_duration: f64,
    /// Tolerances of the analytic evaluations (`evaluate`, `crosscheck`).
    #[serde(default)]
    pub quadrature: QuadratureConfig,
    #[serde(default)]
    pub simulation: SimulationSection,
    #[serde(default)]
    pub fit: FitSection,
    #[serde(default)]
    pub output: OutputSection,
}

fn default_max_duration() -> f64 {
    DEFAULT_MAX_DURATION
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationSection {
    /// Calibrated to `target_alive` when absent.
    pub births_per_year: Option<f64>,
    pub target_alive: f64,
    pub birth_window: [f64; 2],
    pub cross_section_time: f64,
    pub age_groups: Vec<AgeGroup>,
    pub rng_seed: u64,
    pub max_age: f64,
    pub replicates: usize,
    pub write_ledger: bool,
}

impl Default for SimulationSection {
    fn default() -> Self {
        let sim = SimConfig::default();
        Self {
            births_per_year: None,
            target_alive: REFERENCE_ALIVE,
            birth_window: sim.birth_window,
            cross_section_time: sim.cross_section_time,
            age_groups: reference_age_groups(),
            rng_seed: sim.rng_seed,
            max_age: sim.max_age,
            replicates: 1,
            write_ledger: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct FitSection {
    pub bounds: [[f64; 2]; 3],
    pub initial_points: Vec<[f64; 3]>,
    pub free: [bool; 3],
    pub tolerances: SimplexTolerances,
    pub restarts: usize,
    pub group_evaluation: GroupEvaluation,
    pub hessian_step: HessianStep,
    pub include_binomial_constant: bool,
    pub quadrature: QuadratureConfig,
    /// Known simulation input, echoed in the results table.
    pub true_gamma: Option<[f64; 3]>,
}

impl Default for FitSection {
    fn default() -> Self {
        let f = FitConfig::new(RateModel::reference());
        Self {
            bounds: f.bounds,
            initial_points: f.initial_points,
            free: f.free,
            tolerances: f.tolerances,
            restarts: f.restarts,
            group_evaluation: f.group_evaluation,
            hessian_step: f.hessian_step,
            include_binomial_constant: f.include_binomial_constant,
            quadrature: f.quadrature,
            true_gamma: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub directory: PathBuf,
    pub formats: Vec<Format>,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            directory: PathBuf::from("out"),
            formats: vec![Format::Csv, Format::Json],
        }
    }
}

impl OutputSection {
    pub fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }
}

impl RunConfig {
    /// The reference study configuration.
    pub fn reference() -> Self {
        let m = RateModel::reference();
        Self {
            incidence: m.incidence,
            m0: m.m0,
            ratio: m.ratio,
            max_duration: DEFAULT_MAX_DURATION,
            quadrature: QuadratureConfig::default(),
            simulation: SimulationSection::default(),
            fit: FitSection {
                true_gamma: Some(MortalityRatioParams::reference().as_array()),
                ..FitSection::default()
            },
            output: OutputSection::default(),
        }
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: Self = serde_json::from_str(text)
            .map_err(|e| CliError::Input(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks everything that can be checked before computing.
    pub fn validate(&self) -> Result<(), CliError> {
        let input = |e: idm_odds::Error| CliError::Input(format!("config: {e}"));
        self.model().map_err(input)?;
        self.quadrature.validate().map_err(input)?;
        let sim = &self.simulation;
        if let Some(b) = sim.births_per_year {
            if !(b > 0.0 && b.is_finite()) {
                return Err(CliError::Input("config: births_per_year must be positive".into()));
            }
        }
        if !(sim.target_alive > 0.0) {
            return Err(CliError::Input("config: target_alive must be positive".into()));
        }
        if sim.replicates == 0 {
            return Err(CliError::Input("config: replicates must be at least 1".into()));
        }
        self.sim_config(1.0, sim.rng_seed).validate().map_err(input)?;
        self.fit_config().and_then(|f| f.validate()).map_err(input)?;
        if self.output.formats.is_empty() {
            return Err(CliError::Input("config: output.formats must not be empty".into()));
        }
        Ok(())
    }

    pub fn model(&self) -> idm_odds::Result<RateModel> {
        RateModel::with_max_duration(self.incidence.clone(), self.m0, self.ratio, self.max_duration)
    }

    pub fn sim_config(&self, births_per_year: f64, seed: u64) -> SimConfig {
        let s = &self.simulation;
        SimConfig {
            births_per_year,
            birth_window: s.birth_window,
            cross_section_time: s.cross_section_time,
            age_groups: s.age_groups.clone(),
            rng_seed: seed,
            max_age: s.max_age,
        }
    }

    pub fn fit_config(&self) -> idm_odds::Result<FitConfig> {
        let f = &self.fit;
        Ok(FitConfig {
            bounds: f.bounds,
            initial_points: f.initial_points.clone(),
            free: f.free,
            tolerances: f.tolerances,
            restarts: f.restarts,
            group_evaluation: f.group_evaluation,
            hessian_step: f.hessian_step,
            include_binomial_constant: f.include_binomial_constant,
            quadrature: f.quadrature,
            ..FitConfig::new(self.model()?)
        })
    }
}
