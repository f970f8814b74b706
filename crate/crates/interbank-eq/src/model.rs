//! Parameter and allocation types, the CRRA utility-loss function and
//! system validation.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::shock_dist::ShockDistribution;

/// Threshold on `|γ - 1|` below which the logarithmic branch of [`gamma_loss`] is used.
pub const LOG_BRANCH: f64 = 1e-12;
/// Up to this `|γ - 1|` a second-order expansion replaces the power branch.
const SERIES_BRANCH: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BankParams {
    /// Excess drift of the bank's project.
    pub mu: f64,
    /// Fraction of an investment in this project lost on a shortage.
    pub phi: f64,
    /// Fraction of own wealth lost on a shortage.
    pub eta: f64,
    /// Arrival rate of liquidity shocks.
    pub theta: f64,
    /// Relative risk aversion.
    pub gamma: f64,
    pub shock: ShockDistribution,
}

impl BankParams {
    pub fn is_log_utility(&self) -> bool {
        (self.gamma - 1.0).abs() < LOG_BRANCH
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub r: f64,
    pub horizon: f64,
    pub banks: Vec<BankParams>,
    pub initial_wealth: Vec<f64>,
}

impl SystemParams {
    /// `n` copies of `bank`, unit initial wealth.
    pub fn identical(bank: BankParams, n: usize, r: f64, horizon: f64) -> Self {
        SystemParams {
            r,
            horizon,
            banks: vec![bank; n],
            initial_wealth: vec![1.0; n],
        }
    }

    pub fn n(&self) -> usize {
        self.banks.len()
    }

    pub fn require_log_utility(&self) -> Result<()> {
        match self.banks.iter().position(|b| !b.is_log_utility()) {
            Some(i) => Err(Error::UnsupportedUtility {
                bank: i,
                gamma: self.banks[i].gamma,
            }),
            None => Ok(()),
        }
    }
}

/// Cash fractions and the full `n x n` investment matrix. The diagonal
/// holds the fixed self-investment `η_i/φ_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    pub cash: Vec<f64>,
    pub weights: Vec<Vec<f64>>,
}

impl Allocation {
    /// Builds an allocation from off-diagonal weights `w(i, j)`.
    pub fn from_fn(system: &SystemParams, cash: Vec<f64>, w: impl Fn(usize, usize) -> f64) -> Self {
        let n = system.n();
        let weights = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        if i == j {
                            system.banks[i].eta / system.banks[i].phi
                        } else {
                            w(i, j)
                        }
                    })
                    .collect()
            })
            .collect();
        Allocation { cash, weights }
    }

    pub fn n(&self) -> usize {
        self.cash.len()
    }

    /// Total interbank investment of bank `i`, excluding its own project.
    pub fn interbank_total(&self, i: usize) -> f64 {
        (0..self.n()).filter(|&j| j != i).map(|j| self.weights[i][j]).sum()
    }

    /// Banks whose project receives positive investment from some other bank.
    pub fn core_members(&self) -> Vec<usize> {
        let n = self.n();
        (0..n)
            .filter(|&j| (0..n).any(|i| i != j && self.weights[i][j] > 0.0))
            .collect()
    }

    /// Nominal exposure of `i` to `j` at wealth `x_i`.
    pub fn nominal(&self, i: usize, j: usize, wealth_i: f64) -> f64 {
        wealth_i * self.weights[i][j]
    }

    pub fn check_admissible(&self, system: &SystemParams) -> Result<()> {
        let n = system.n();
        if self.cash.len() != n || self.weights.len() != n || self.weights.iter().any(|row| row.len() != n) {
            return domain(format!("allocation shape does not match a {n}-bank system"));
        }
        for i in 0..n {
            if !(self.cash[i] >= 0.0) {
                return domain(format!("bank {}: cash {} < 0", i + 1, self.cash[i]));
            }
            for j in 0..n {
                let w = self.weights[i][j];
                let cap = 1.0 / system.banks[j].phi;
                if i == j {
                    continue;
                }
                if !(w >= 0.0 && w < cap) {
                    return domain(format!("w[{}][{}] = {w} outside [0, {cap})", i + 1, j + 1));
                }
            }
        }
        Ok(())
    }
}

/// Drift coefficient of the value function.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Drift {
    PerBank(Vec<f64>),
    Planner(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct FocResidual {
    /// Cash first-order condition; 0 at a corner.
    pub cash: f64,
    /// Largest weight first-order condition over the bank's positive weights.
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct Diagnostics {
    pub foc_residuals: Vec<FocResidual>,
    pub bcd_iterations: Vec<usize>,
    pub uniqueness_ok: bool,
    pub assumption_violations: Vec<String>,
    /// Per bank, objective of each candidate the planner compared.
    pub candidate_objectives: Vec<Vec<f64>>,
    /// Banks with two near-equal optima at distinct controls.
    pub non_unique: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriumResult {
    pub allocation: Allocation,
    pub drift: Drift,
    pub core_members: Vec<usize>,
    pub diagnostics: Diagnostics,
}

impl EquilibriumResult {
    /// Per-bank drifts; panics on a planner result.
    pub fn bank_drifts(&self) -> &[f64] {
        match &self.drift {
            Drift::PerBank(v) => v,
            Drift::Planner(_) => panic!("planner result has no per-bank drift"),
        }
    }

    pub fn planner_drift(&self) -> f64 {
        match self.drift {
            Drift::Planner(j) => j,
            Drift::PerBank(_) => panic!("decentralized result has no planner drift"),
        }
    }
}

/// Utility loss `Γ(δ;γ)` from losing fraction `δ` of wealth under CRRA `γ`.
pub fn gamma_loss(delta: f64, gamma: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&delta) {
        return domain(format!("loss fraction must lie in [0, 1), got {delta}"));
    }
    if !(gamma > 0.0) {
        return domain(format!("risk aversion must be > 0, got {gamma}"));
    }
    Ok(big_gamma(delta, gamma))
}

pub(crate) fn big_gamma(delta: f64, gamma: f64) -> f64 {
    let l = (-delta).ln_1p();
    let eps = 1.0 - gamma;
    if eps.abs() < LOG_BRANCH {
        -l
    } else if eps.abs() < SERIES_BRANCH {
        let el = eps * l;
        -l * (1.0 + el / 2.0 + el * el / 6.0)
    } else {
        -(eps * l).exp_m1() / eps
    }
}

/// CRRA utility.
pub fn utility(x: f64, gamma: f64) -> f64 {
    if (gamma - 1.0).abs() < LOG_BRANCH {
        x.ln()
    } else {
        x.powf(1.0 - gamma) / (1.0 - gamma)
    }
}

/// `μ/(φ θ F̄(c))`; above 1 exactly when the project attracts outside investors.
pub fn sharpe_like_ratio(bank: &BankParams, c: f64) -> Result<f64> {
    let tail = bank.shock.ccdf(c)?;
    Ok(bank.mu / (bank.phi * bank.theta * tail))
}

/// Drift coefficient `J_i` of bank `i` under an arbitrary allocation.
///
/// The value function is `(T-t) J + log x` for log utility and
/// `exp((1-γ)(T-t) J) x^(1-γ)/(1-γ)` otherwise.
pub fn bank_drift(system: &SystemParams, alloc: &Allocation, i: usize) -> f64 {
    let b = &system.banks[i];
    let mut j = growth_rate(system, alloc, i) - b.theta * b.shock.tail(alloc.cash[i]) * big_gamma(b.eta, b.gamma);
    for (k, other) in system.banks.iter().enumerate() {
        if k == i || alloc.weights[i][k] == 0.0 {
            continue;
        }
        j -= other.theta * other.shock.tail(alloc.cash[k]) * big_gamma(other.phi * alloc.weights[i][k], b.gamma);
    }
    j
}

/// Deterministic growth rate of bank `i`'s wealth between shortages.
pub fn growth_rate(system: &SystemParams, alloc: &Allocation, i: usize) -> f64 {
    let b = &system.banks[i];
    let interbank: f64 = (0..system.n())
        .filter(|&k| k != i)
        .map(|k| alloc.weights[i][k] * system.banks[k].mu)
        .sum();
    (1.0 - alloc.cash[i]) * system.r + interbank + b.eta * b.mu / b.phi
}

/// A single failed invariant. `bank` is 0-based; `Display` is 1-based.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub bank: Option<usize>,
    pub field: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.bank {
            Some(b) => write!(f, "bank {}: {}: {}", b + 1, self.field, self.message),
            None => write!(f, "{}: {}", self.field, self.message),
        }
    }
}

/// Every violated parameter invariant; empty when the system is valid.
pub fn validate_system(params: &SystemParams) -> Vec<Violation> {
    violations(params, false)
}

/// Solvers also admit `η = 0`, which the replication map produces.
pub(crate) fn check_solvable(params: &SystemParams) -> Result<()> {
    let v = violations(params, true);
    if v.is_empty() {
        Ok(())
    } else {
        Err(Error::Invalid(v))
    }
}

fn violations(params: &SystemParams, allow_zero_eta: bool) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |bank: Option<usize>, field: &str, message: String| {
        out.push(Violation {
            bank,
            field: field.to_string(),
            message,
        })
    };
    if params.n() < 2 {
        push(None, "n", format!("need at least 2 banks, got {}", params.n()));
    }
    if !(params.r >= 0.0 && params.r.is_finite()) {
        push(None, "r", format!("must be >= 0, got {}", params.r));
    }
    if !(params.horizon > 0.0 && params.horizon.is_finite()) {
        push(None, "horizon", format!("must be > 0, got {}", params.horizon));
    }
    if params.initial_wealth.len() != params.n() {
        push(
            None,
            "initial_wealth",
            format!("{} entries for {} banks", params.initial_wealth.len(), params.n()),
        );
    }
    for (i, &x) in params.initial_wealth.iter().enumerate() {
        if !(x > 0.0 && x.is_finite()) {
            push(Some(i), "x0_wealth", format!("must be > 0, got {x}"));
        }
    }
    for (i, b) in params.banks.iter().enumerate() {
        if !(b.mu > 0.0 && b.mu.is_finite()) {
            push(Some(i), "mu", format!("must be > 0, got {}", b.mu));
        }
        if !(b.phi > 0.0 && b.phi < 1.0) {
            push(Some(i), "phi", format!("must lie in (0, 1), got {}", b.phi));
        }
        let eta_ok = if allow_zero_eta {
            b.eta >= 0.0 && b.eta < 1.0
        } else {
            b.eta > 0.0 && b.eta < 1.0
        };
        if !eta_ok {
            push(Some(i), "eta", format!("must lie in (0, 1), got {}", b.eta));
        }
        if !(b.theta > 0.0 && b.theta.is_finite()) {
            push(Some(i), "theta", format!("must be > 0, got {}", b.theta));
        }
        if !(b.gamma > 0.0 && b.gamma.is_finite()) {
            push(Some(i), "gamma", format!("must be > 0, got {}", b.gamma));
        }
        if let Some(msg) = b.shock.validate() {
            push(Some(i), "shock", msg);
        }
    }
    out
}
