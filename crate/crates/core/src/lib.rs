//! Prevalence odds of chronic diseases in the illness-death model.
//!
//! The crate evaluates the prevalence odds implied by incidence and
//! mortality rates ([`analytic`]), simulates aggregated current-status data
//! on the Lexis plane ([`simulator`]) and recovers the duration-dependent
//! mortality ratio from such data by binomial maximum likelihood
//! ([`estimator`]).

pub mod analytic;
pub mod error;
pub mod estimator;
pub mod io;
pub mod optim;
mod par;
pub mod quadrature;
pub mod rate_model;
pub mod simulator;

pub use analytic::{Analytic, CohortBaseline, OddsMethod, PrevalenceResult};
pub use error::{Error, Result};
pub use estimator::{fit, log_likelihood, FitConfig, FitResult, GroupEvaluation};
pub use quadrature::QuadratureConfig;
pub use rate_model::{
    GompertzParams, IncidenceSpec, MortalityRatioParams, MortalitySpec, RateModel,
};
pub use simulator::{AgeGroup, AgeGroupTable, LifeRecord, PopulationLedger, SimConfig};
