//! Welfare comparisons between the two equilibria, large-`n` bounds on the
//! planner's cash, and the self-investment requirement that makes selfish
//! banks hold the planner's cash.

use rayon::prelude::*;
use serde::Serialize;

use crate::centralized::{solve_centralized, solve_planner_bank, BcdSettings};
use crate::decentralized::{solve_cash, solve_decentralized, solve_weight};
use crate::error::{domain, Error, Result};
use crate::model::{big_gamma, BankParams, EquilibriumResult, SystemParams};
use crate::shock_dist::ShockDistribution;

/// Weight every investor places on project `i` (common under log utility).
fn project_weight(result: &EquilibriumResult, i: usize) -> f64 {
    let n = result.allocation.n();
    result.allocation.weights[(i + 1) % n][i]
}

fn check_pair(system: &SystemParams, dec: &EquilibriumResult, cent: &EquilibriumResult, t: f64) -> Result<()> {
    system.require_log_utility()?;
    let n = system.n();
    if dec.allocation.n() != n || cent.allocation.n() != n {
        return domain("results do not belong to this system");
    }
    if t > system.horizon {
        return domain(format!("t = {t} beyond horizon {}", system.horizon));
    }
    Ok(())
}

/// `V(t, x) - Σ V_i(t, x_i)`, which does not depend on wealths.
pub fn welfare_gap(system: &SystemParams, dec: &EquilibriumResult, cent: &EquilibriumResult, t: f64) -> Result<f64> {
    check_pair(system, dec, cent, t)?;
    let n = system.n();
    let m = (n - 1) as f64;
    let r = system.r;
    let per_bank: f64 = (0..n)
        .map(|i| {
            let b = &system.banks[i];
            let (c_hat, c_star) = (dec.allocation.cash[i], cent.allocation.cash[i]);
            let (w_hat, w_star) = (project_weight(dec, i), project_weight(cent, i));
            let ge = big_gamma(b.eta, 1.0);
            let loss = |c: f64, w: f64| {
                let tail = b.shock.tail(c);
                if tail == 0.0 {
                    0.0
                } else {
                    b.theta * tail * (ge + m * big_gamma(b.phi * w, 1.0))
                }
            };
            -r * (c_star - c_hat) + m * b.mu * (w_star - w_hat) + loss(c_hat, w_hat) - loss(c_star, w_star)
        })
        .sum();
    Ok((system.horizon - t) * per_bank)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum RatioMode {
    /// `J_C / Σ J_i`; wealth terms ignored.
    DriftOnly,
    /// Full value functions at the given wealths.
    AtWealths(Vec<f64>),
}

/// Planner value over summed individual values.
pub fn welfare_ratio(
    system: &SystemParams,
    dec: &EquilibriumResult,
    cent: &EquilibriumResult,
    t: f64,
    mode: &RatioMode,
) -> Result<f64> {
    check_pair(system, dec, cent, t)?;
    let jc = cent.planner_drift();
    let js: f64 = dec.bank_drifts().iter().sum();
    let (num, den) = match mode {
        RatioMode::DriftOnly => (jc, js),
        RatioMode::AtWealths(x) => {
            if x.len() != system.n() || x.iter().any(|&v| !(v > 0.0)) {
                return domain("need one positive wealth per bank");
            }
            let logs: f64 = x.iter().map(|v| v.ln()).sum();
            let tau = system.horizon - t;
            (tau * jc + logs, tau * js + logs)
        }
    };
    if !(den > 0.0) {
        return Err(Error::IllDefinedRatio { denominator: den });
    }
    Ok(num / den)
}

/// `q = φθF̄(ĉ)/μ` of a log-utility bank.
fn decentralized_q(bank: &BankParams, r: f64) -> Result<f64> {
    if !bank.is_log_utility() {
        return Err(Error::UnsupportedUtility { bank: 0, gamma: bank.gamma });
    }
    let c_hat = solve_cash(bank, r)?;
    Ok(bank.phi * bank.theta * bank.shock.tail(c_hat) / bank.mu)
}

/// Limit of the drift-only welfare ratio for `n` identical core banks as `n → ∞`.
pub fn wr_limit_identical(bank: &BankParams, r: f64) -> Result<f64> {
    let q = decentralized_q(bank, r)?;
    if q >= 1.0 {
        return Err(Error::NotApplicable("periphery bank has no interbank investors".into()));
    }
    Ok(wr_limit_from_q(q))
}

/// `1/(1 + q(ln q - 1))`.
pub fn wr_limit_from_q(q: f64) -> f64 {
    if q == 0.0 {
        return 1.0;
    }
    1.0 / (1.0 + q * (q.ln() - 1.0))
}

/// System-wide constant entering the upper bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundContext {
    pub r: f64,
    /// `max_i {ĉ_i + (θ_i/r) F̄_i(ĉ_i) [1 + Γ(η_i;1) + Γ(φ_i ŵ_i;1)]}`.
    pub k: f64,
}

impl BoundContext {
    pub fn from_banks(banks: &[BankParams], r: f64) -> Result<Self> {
        let mut k = f64::NEG_INFINITY;
        for b in banks {
            let c = solve_cash(b, r)?;
            let w = solve_weight(1.0, b, c)?;
            let tail = b.shock.tail(c);
            k = k.max(c + b.theta / r * tail * (1.0 + big_gamma(b.eta, 1.0) + big_gamma(b.phi * w, 1.0)));
        }
        Ok(BoundContext { r, k })
    }

    pub fn from_system(system: &SystemParams) -> Result<Self> {
        Self::from_banks(&system.banks, system.r)
    }
}

/// Bounds on the planner's cash for exponential shocks; `None` marks an
/// inactive bound (non-positive log argument at this `n`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExponentialCashBounds {
    pub simple_lb: Option<f64>,
    pub refined_lb: Option<f64>,
    pub refined_ub: Option<f64>,
    pub c_u: f64,
    pub d: f64,
}

struct CoreTerms {
    gamma_eta: f64,
    gamma_w: f64,
}

fn core_terms(bank: &BankParams, r: f64) -> Result<CoreTerms> {
    if !bank.is_log_utility() {
        return Err(Error::UnsupportedUtility { bank: 0, gamma: bank.gamma });
    }
    let c_hat = solve_cash(bank, r)?;
    let w_hat = solve_weight(1.0, bank, c_hat)?;
    if w_hat <= 0.0 {
        return Err(Error::NotApplicable(
            "periphery bank: the planner keeps the decentralized cash for every n".into(),
        ));
    }
    Ok(CoreTerms {
        gamma_eta: big_gamma(bank.eta, 1.0),
        gamma_w: big_gamma(bank.phi * w_hat, 1.0),
    })
}

fn positive_log(x: f64) -> Option<f64> {
    (x > 0.0 && x.is_finite()).then(|| x.ln())
}

pub fn planner_cash_bounds_exponential(bank: &BankParams, ctx: &BoundContext, n: usize) -> Result<ExponentialCashBounds> {
    let lambda = match bank.shock {
        ShockDistribution::Exponential { lambda } => lambda,
        _ => return Err(Error::NotApplicable("exponential bounds need exponential shocks".into())),
    };
    let CoreTerms { gamma_eta, gamma_w } = core_terms(bank, ctx.r)?;
    let (r, theta) = (ctx.r, bank.theta);
    let m = (n - 1) as f64;
    let scale = theta * m / (lambda * r);

    let simple_lb = positive_log(scale * gamma_w).map(|l| lambda * l);
    let refined_lb = if n >= 2 {
        positive_log(scale * ((m).ln() - (gamma_eta / gamma_w).ln())).map(|l| lambda * l)
    } else {
        None
    };
    let sharpe = bank.phi * theta / bank.mu;
    let d = gamma_eta - sharpe.min(1.0).ln() + 1.0 / lambda;
    let c_u = gamma_eta + ((theta * d * ctx.k / (lambda * r)) / sharpe).max(1.0).ln() + 3.0;
    let refined_ub = positive_log(scale * c_u * (n as f64).ln()).map(|l| lambda * l);

    if simple_lb.is_none() && refined_lb.is_none() && refined_ub.is_none() {
        return Err(Error::BoundNotActive(format!("n = {n} too small")));
    }
    Ok(ExponentialCashBounds {
        simple_lb,
        refined_lb,
        refined_ub,
        c_u,
        d,
    })
}

/// Bounds on the planner's cash for power-law shocks, growing like
/// `[(n-1) ln n]^α`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerCashBounds {
    pub simple_lb: Option<f64>,
    pub lb: Option<f64>,
    pub ub: Option<f64>,
    /// `[(n-1) ln n]^α`.
    pub rate: f64,
    /// Set when `x0 < 1`, outside the regime the bounds were derived for.
    pub small_offset_warning: bool,
}

pub fn planner_cash_bounds_power(bank: &BankParams, ctx: &BoundContext, n: usize) -> Result<PowerCashBounds> {
    let (alpha, x0) = match bank.shock {
        ShockDistribution::PowerLaw { alpha, x0 } => (alpha, x0),
        _ => return Err(Error::NotApplicable("power bounds need power-law shocks".into())),
    };
    let CoreTerms { gamma_eta, gamma_w } = core_terms(bank, ctx.r)?;
    let (r, theta) = (ctx.r, bank.theta);
    let a = 1.0 / alpha;
    let kappa = (a - 1.0) * x0.powf(a - 1.0);
    let m = (n - 1) as f64;
    let nl = n as f64;

    let root = |x: f64| (x > 0.0 && x.is_finite()).then(|| x.powf(alpha) - x0);
    let simple_lb = root(kappa * theta * m * gamma_w / r);
    let c_l = (bank.phi * theta * x0.powf(a - 1.0) / bank.mu) * (kappa * theta * gamma_w / r).powf(alpha - 1.0);
    let lb = if n >= 2 {
        root(kappa * theta * m * ((1.0 - alpha) * m.ln() - c_l.ln()) / r)
    } else {
        None
    };
    let d_p = gamma_eta
        + (-(bank.phi * theta / bank.mu).ln()).max(0.0)
        + (a - 1.0) * (ctx.k / x0).ln_1p()
        + 2.0 * (a - 1.0);
    let c_u = (kappa * theta * d_p / r).powf(alpha);
    let ub = (n >= 3).then(|| c_u * (m * nl.ln()).powf(alpha) - x0);

    if simple_lb.is_none() && lb.is_none() && ub.is_none() {
        return Err(Error::BoundNotActive(format!("n = {n} too small")));
    }
    Ok(PowerCashBounds {
        simple_lb,
        lb,
        ub,
        rate: (m * nl.ln()).powf(alpha),
        small_offset_warning: x0 < 1.0,
    })
}

/// One row of the large-`n` rate table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateRow {
    pub n: usize,
    pub c_star: f64,
    pub ccdf_c_star: f64,
    pub w_star: f64,
    /// `1/φ - w*`, computed as `θF̄(c*)/μ` to avoid cancellation.
    pub gap_to_cap: f64,
    /// `(n-1) F̄(c*) Γ(φw*;1)`.
    pub sys_loss: f64,
}

/// Planner solutions for `n` identical copies of `bank` across `n_list`.
pub fn asymptotic_rates_report(bank: &BankParams, n_list: &[usize], r: f64) -> Result<Vec<RateRow>> {
    if !bank.is_log_utility() {
        return Err(Error::UnsupportedUtility { bank: 0, gamma: bank.gamma });
    }
    n_list
        .par_iter()
        .map(|&n| {
            if n < 2 {
                return domain(format!("n must be >= 2, got {n}"));
            }
            let s = solve_planner_bank(bank, n, r, &BcdSettings::default())?;
            let tail = bank.shock.tail(s.cash);
            let q = bank.phi * bank.theta * tail / bank.mu;
            let sys_loss = if tail == 0.0 || s.weight == 0.0 {
                0.0
            } else {
                (n - 1) as f64 * tail * -q.ln()
            };
            Ok(RateRow {
                n,
                c_star: s.cash,
                ccdf_c_star: tail,
                w_star: s.weight,
                gap_to_cap: if s.weight > 0.0 { bank.theta * tail / bank.mu } else { 1.0 / bank.phi },
                sys_loss,
            })
        })
        .collect()
}

pub const RATES_CSV_HEADER: &str = "n,c_star,ccdf_c_star,w_star,sys_loss";

pub fn rates_csv(rows: &[RateRow]) -> String {
    let mut out = String::from(RATES_CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!("{},{:?},{:?},{:?},{:?}\n", r.n, r.c_star, r.ccdf_c_star, r.w_star, r.sys_loss));
    }
    out
}

/// Self-investment fractions `η^D` that make each selfish bank hold the
/// planner's cash `c*(η^C)`.
///
/// `cent` must be the planner's solution of `system` with `η` replaced by `eta_c`.
pub fn replication_eta(system: &SystemParams, cent: &EquilibriumResult, eta_c: &[f64]) -> Result<Vec<f64>> {
    let n = system.n();
    if eta_c.len() != n || cent.allocation.n() != n {
        return domain("need one eta_C per bank");
    }
    (0..n)
        .map(|i| {
            let b = &system.banks[i];
            let ec = eta_c[i];
            if !(0.0..1.0).contains(&ec) {
                return domain(format!("bank {}: eta_C = {ec} outside [0, 1)", i + 1));
            }
            let w = project_weight(cent, i);
            if w == 0.0 {
                return Ok(ec);
            }
            let log_keep = (-ec).ln_1p() + (n - 1) as f64 * (-b.phi * w).ln_1p();
            let eta_d = -log_keep.exp_m1();
            if !(eta_d < 1.0) {
                return Err(Error::DegenerateRequirement { bank: i });
            }
            Ok(eta_d)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Replication {
    pub eta_c: Vec<f64>,
    pub eta_d: Vec<f64>,
    /// Planner's cash under `η^C`.
    pub planner_cash: Vec<f64>,
    /// Selfish cash under `η^D`.
    pub replicated_cash: Vec<f64>,
    /// `|ĉ_i(η^D) - c*_i(η^C)|`.
    pub residuals: Vec<f64>,
}

/// Solves the planner under `eta_c`, maps to `η^D` and verifies by re-solving
/// the decentralized problem.
pub fn replicate(system: &SystemParams, eta_c: &[f64]) -> Result<Replication> {
    if eta_c.len() != system.n() {
        return domain("need one eta_C per bank");
    }
    let mut with_c = system.clone();
    for (b, &e) in with_c.banks.iter_mut().zip(eta_c) {
        b.eta = e;
    }
    let cent = solve_centralized(&with_c)?;
    let eta_d = replication_eta(&with_c, &cent, eta_c)?;
    let mut with_d = system.clone();
    for (b, &e) in with_d.banks.iter_mut().zip(&eta_d) {
        b.eta = e;
    }
    let dec = solve_decentralized(&with_d)?;
    let residuals = (0..system.n())
        .map(|i| (dec.allocation.cash[i] - cent.allocation.cash[i]).abs())
        .collect();
    Ok(Replication {
        eta_c: eta_c.to_vec(),
        eta_d,
        planner_cash: cent.allocation.cash.clone(),
        replicated_cash: dec.allocation.cash,
        residuals,
    })
}
