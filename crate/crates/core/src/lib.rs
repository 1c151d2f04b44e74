//! Power optimization of a bistable piezo-magneto-elastic energy harvester.
//!
//! The harvester model is integrated with fixed-step RK4, its steady-state
//! voltage is screened by the 0-1 test for chaos, and the mean output power
//! is maximized over a design box by the cross-entropy method on a
//! chaos-penalized objective. An exhaustive grid search gives reference
//! optima.
//!
//! All numerics are generic over [`Scalar`] (`f32` or `f64`); the aliases at
//! the crate root fix the scalar to `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chaos01;
pub mod cross_entropy;
pub mod dynamics;
pub mod error;
pub mod grid_search;
pub mod objective;
pub mod scalar;

pub use chaos01::{classify, correlation_k, msd, msd_fast, translation_vars, Test01Config, Test01Result};
pub use cross_entropy::{
    mle_update, optimize, sample_truncated_gaussian, select_elite, smooth_update, smoothing_beta, CEConfig, CEState,
    LevelRecord, OptimizationResult,
};
pub use dynamics::{add_noise, integrate_rk4, mean_power, rhs, HarvesterParams, InitialState, SimConfig, TimeSeries};
pub use error::{Error, Result};
pub use grid_search::{exhaustive_search, GridField, GridOutcome, GridSpec};
pub use objective::{
    penalize, DesignSpace, Evaluation, FnObjective, HarvesterObjective, Objective, ParamField, PenaltyConfig, RawScore,
    DIVERGED_POWER,
};
pub use scalar::Scalar;

pub type Params = HarvesterParams<f64>;
pub type State = InitialState<f64>;
pub type Sim = SimConfig<f64>;
pub type Series = TimeSeries<f64>;
pub type Test01 = Test01Config<f64>;
pub type Penalty = PenaltyConfig<f64>;
pub type Space = DesignSpace<f64>;
pub type Harvester = HarvesterObjective<f64>;
pub type CrossEntropy = CEConfig<f64>;
pub type Optimum = OptimizationResult<f64>;
