//! Data-driven synthesis of nonlinear feedback controllers from plant
//! input-output records.
//!
//! The pipeline: excite a plant and record input-output data
//! ([`plant`]), invert the reference model over the recorded output to pose a
//! regression problem ([`vrft`]), fit a dictionary-parameterized static
//! controller map by least squares or L1-regularized coordinate descent
//! ([`solvers`]), and judge the fitted controller in closed loop against the
//! desired response ([`closed_loop`]).
//!
//! All value types are immutable after construction and freely shareable;
//! the one stateful object is [`closed_loop::Controller`], which owns its
//! integrator state during a simulation.

pub mod closed_loop;
pub mod error;
pub mod lti;
pub mod nonlin;
pub mod plant;
pub mod solvers;
pub mod vrft;

pub use closed_loop::{
    desired_response, eval_reference, mr_cost, simulate_closed_loop, ClosedLoopResult, Controller,
    DIVERGENCE_LIMIT,
};
pub use error::{Error, Result};
pub use lti::{filter, settling_time, Signal, TransferFunction};
pub use nonlin::{static_map, Dictionary, DictionaryKind, PiecewiseAffineMap};
pub use plant::{
    benchmark_nonlinearity, derive_seed, excitation_filter, gen_input, simulate_plant,
    HammersteinPlant, InputKind, NoiseSpec,
};
pub use solvers::{
    lasso_cd, lasso_cd_with, ols_solve, soft_threshold, ControllerParams, LassoOptions,
    ObjectiveScaling, SolveDiagnostics,
};
pub use vrft::{build_regression, virtual_reference, vrft_cost, Dataset, RegressionProblem};
