//! Each bank's selfish optimum: cash is a dominant strategy and weights
//! depend only on the target bank's cash.

use crate::error::{domain, Error, Result};
use crate::model::{
    bank_drift, big_gamma, check_solvable, Allocation, BankParams, Diagnostics, Drift, EquilibriumResult,
    FocResidual, SystemParams, LOG_BRANCH,
};

/// Relative gap kept below the admissibility bound `1/φ`.
pub const WEIGHT_CAP_MARGIN: f64 = 1e-12;

/// Optimal cash fraction `ĉ` of a bank facing rate `r`.
///
/// Ties at `r/(θΓ) = f(0)` resolve to the corner `0`.
pub fn solve_cash(bank: &BankParams, r: f64) -> Result<f64> {
    if !(r >= 0.0) {
        return domain(format!("r must be >= 0, got {r}"));
    }
    let loss = bank.theta * big_gamma(bank.eta, bank.gamma);
    if loss == 0.0 {
        return Ok(0.0);
    }
    if r == 0.0 {
        return Err(Error::InfiniteCash);
    }
    cash_at_level(bank, r / loss)
}

/// `f⁻¹(level)`, or the corner when the level is at or above `f(0)`.
pub(crate) fn cash_at_level(bank: &BankParams, level: f64) -> Result<f64> {
    if level >= bank.shock.density(0.0) {
        return Ok(0.0);
    }
    match bank.shock.pdf_inverse(level) {
        Ok(c) => Ok(c),
        Err(Error::NoPreimage { .. }) => Ok(0.0),
        Err(e) => Err(e),
    }
}

/// Optimal weight an investor with risk aversion `gamma_i` places on `target`
/// when the target holds cash `c_target`.
pub fn solve_weight(gamma_i: f64, target: &BankParams, c_target: f64) -> Result<f64> {
    let q = target.phi * target.theta * target.shock.ccdf(c_target)? / target.mu;
    if q >= 1.0 {
        return Ok(0.0);
    }
    // 1 - q^(1/γ) without cancellation for q near 1.
    Ok((-(q.ln() / gamma_i).exp_m1() / target.phi).min(weight_cap(target)))
}

/// Largest weight the solvers return on `target`'s project; keeps `1 - φw`
/// representable when the target's shortage probability underflows.
pub fn weight_cap(target: &BankParams) -> f64 {
    (1.0 - WEIGHT_CAP_MARGIN) / target.phi
}

/// Cash part of the bank's separable objective.
pub fn cash_objective(bank: &BankParams, r: f64, c: f64) -> f64 {
    -r * c - bank.theta * bank.shock.tail(c) * big_gamma(bank.eta, bank.gamma)
}

/// Weight part of the investor's objective for one target project.
pub fn weight_objective(gamma_i: f64, target: &BankParams, c_target: f64, w: f64) -> f64 {
    target.mu * w - target.theta * target.shock.tail(c_target) * big_gamma(target.phi * w, gamma_i)
}

pub fn solve_decentralized(system: &SystemParams) -> Result<EquilibriumResult> {
    check_solvable(system)?;
    let cash = system
        .banks
        .iter()
        .map(|b| solve_cash(b, system.r))
        .collect::<Result<Vec<_>>>()?;
    let n = system.n();
    let mut off = vec![vec![0.0; n]; n];
    for (i, row) in off.iter_mut().enumerate() {
        for (j, w) in row.iter_mut().enumerate() {
            if i != j {
                *w = solve_weight(system.banks[i].gamma, &system.banks[j], cash[j])?;
            }
        }
    }
    let allocation = Allocation::from_fn(system, cash, |i, j| off[i][j]);
    Ok(assemble(system, allocation))
}

fn assemble(system: &SystemParams, allocation: Allocation) -> EquilibriumResult {
    let n = system.n();
    let drifts = (0..n).map(|i| bank_drift(system, &allocation, i)).collect();
    let foc_residuals = (0..n).map(|i| residuals(system, &allocation, i)).collect();
    EquilibriumResult {
        core_members: allocation.core_members(),
        drift: Drift::PerBank(drifts),
        diagnostics: Diagnostics {
            foc_residuals,
            bcd_iterations: vec![0; n],
            uniqueness_ok: true,
            assumption_violations: Vec::new(),
            candidate_objectives: Vec::new(),
            non_unique: Vec::new(),
        },
        allocation,
    }
}

fn residuals(system: &SystemParams, a: &Allocation, i: usize) -> FocResidual {
    let b = &system.banks[i];
    let c = a.cash[i];
    let cash = if c > 0.0 {
        system.r - b.theta * b.shock.density(c) * big_gamma(b.eta, b.gamma)
    } else {
        0.0
    };
    let weight = (0..system.n())
        .filter(|&j| j != i && a.weights[i][j] > 0.0)
        .map(|j| {
            let t = &system.banks[j];
            let w = a.weights[i][j];
            (t.mu - t.phi * t.theta * t.shock.tail(a.cash[j]) * (1.0 - t.phi * w).powf(-b.gamma)).abs()
        })
        .fold(0.0, f64::max);
    FocResidual { cash, weight }
}

/// `V_i(t, x)` at the decentralized optimum.
pub fn value_decentralized(
    system: &SystemParams,
    result: &EquilibriumResult,
    bank: usize,
    t: f64,
    x: f64,
) -> Result<f64> {
    if t > system.horizon {
        return domain(format!("t = {t} beyond horizon {}", system.horizon));
    }
    if !(x > 0.0) {
        return domain(format!("wealth must be > 0, got {x}"));
    }
    let j = result.bank_drifts()[bank];
    let g = system.banks[bank].gamma;
    let tau = system.horizon - t;
    Ok(if (g - 1.0).abs() < LOG_BRANCH {
        tau * j + x.ln()
    } else {
        ((1.0 - g) * tau * j).exp() * x.powf(1.0 - g) / (1.0 - g)
    })
}
