//! Reference parameter sets used by tests, benches and the example configs.

use crate::model::{BankParams, SystemParams};
use crate::shock_dist::ShockDistribution;

/// Heterogeneous five-bank network, `r = 0.05`.
pub fn five_bank() -> SystemParams {
    let rows: [(f64, f64, f64, f64, f64, f64); 5] = [
        (0.009, 0.2, 0.5, 0.04, 0.5, 2.0),
        (0.010, 0.3, 0.6, 0.08, 1.7, 1.0 / 0.6),
        (0.015, 0.9, 0.7, 0.12, 1.0, 1.0 / 0.7),
        (0.013, 0.6, 0.4, 0.05, 0.3, 0.5),
        (0.013, 0.82, 0.9, 0.02, 0.87, 1.0 / 2.4),
    ];
    SystemParams {
        r: 0.05,
        horizon: 1.0,
        banks: rows
            .iter()
            .map(|&(mu, phi, eta, theta, gamma, lambda)| BankParams {
                mu,
                phi,
                eta,
                theta,
                gamma,
                shock: ShockDistribution::exponential(lambda),
            })
            .collect(),
        initial_wealth: vec![1.0; 5],
    }
}

/// Log-utility bank with unit-mean exponential shocks, paired with [`REFERENCE_R`].
pub fn reference_bank() -> BankParams {
    BankParams {
        mu: 0.045,
        phi: 0.4,
        eta: 0.5,
        theta: 0.1,
        gamma: 1.0,
        shock: ShockDistribution::exponential(1.0),
    }
}

pub const REFERENCE_R: f64 = 0.01;

/// `n` identical [`reference_bank`]s.
pub fn reference_system(n: usize) -> SystemParams {
    SystemParams::identical(reference_bank(), n, REFERENCE_R, 1.0)
}

/// Bank for the endogenous self-investment variant (its `eta` is not used there).
pub fn endogenous_eta_bank() -> BankParams {
    BankParams {
        mu: 0.045,
        phi: 0.8,
        eta: 0.5,
        theta: 0.1,
        gamma: 1.0,
        shock: ShockDistribution::exponential(1.0),
    }
}

pub const ENDOGENOUS_ETA_R: f64 = 0.013;

/// Bank for the partially liquid bond variant.
pub fn partial_bond_bank() -> BankParams {
    BankParams {
        mu: 0.045,
        phi: 0.4,
        eta: 0.3,
        theta: 0.1,
        gamma: 1.0,
        shock: ShockDistribution::exponential(1.0),
    }
}

pub const PARTIAL_BOND_R: f64 = 0.03;

pub fn partial_bond_system(n: usize) -> SystemParams {
    SystemParams::identical(partial_bond_bank(), n, PARTIAL_BOND_R, 1.0)
}
