//! Equilibria of an interbank network in which banks choose cash reserves
//! and cross-holdings of each other's risky projects under liquidity shocks.
//!
//! [`decentralized`] solves each bank's selfish problem in closed form,
//! [`centralized`] solves the social planner's problem, [`welfare`] compares
//! them and [`simulate`] checks both against exact Monte Carlo.
//! [`extensions`] holds three variants of the selfish model.

// `!(x > 0.0)` guards reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod centralized;
pub mod config;
pub mod decentralized;
pub mod error;
pub mod extensions;
pub mod fixtures;
pub mod model;
pub mod numerics;
#[cfg(any(test, feature = "testing"))]
pub mod oracle;
pub mod shock_dist;
pub mod simulate;
pub mod welfare;

pub use centralized::{
    check_uniqueness_conditions, optimal_c_given_w, optimal_w_given_c, solve_centralized, solve_centralized_with,
    solve_planner_bank, value_centralized, BcdInit, BcdSettings, PlannerBankSolution, UniquenessCheck,
};
pub use config::{config_json, parse_config};
pub use decentralized::{solve_cash, solve_decentralized, solve_weight, value_decentralized};
pub use error::{Error, Result};
pub use extensions::{
    solve_ext_endogenous_eta, solve_ext_liquidity_loss, solve_ext_partial_bond, EndogenousEtaResult, ExtensionResult,
    Regime,
};
pub use model::{
    gamma_loss, sharpe_like_ratio, validate_system, Allocation, BankParams, Diagnostics, Drift, EquilibriumResult,
    FocResidual, SystemParams, Violation,
};
pub use numerics::{find_root_bracketed, lambert_w0, lambert_wm1};
pub use shock_dist::{DensityCheck, ShockDistribution};
pub use simulate::{
    empirical_shortage_rate, estimate_value_mc, simulate_paths, simulate_paths_with, McEstimate, SimulationBatch,
    SimulationPath, SimulationSummary,
};
pub use welfare::{
    asymptotic_rates_report, planner_cash_bounds_exponential, planner_cash_bounds_power, replicate, replication_eta,
    welfare_gap, welfare_ratio, wr_limit_identical, BoundContext, RateRow, RatioMode,
};
