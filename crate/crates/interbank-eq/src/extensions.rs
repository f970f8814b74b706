//! Three variants of the decentralized model: shocks below the cash buffer
//! still cost wealth, the bond is partly liquid, and each bank chooses its
//! own self-investment.

use serde::Serialize;

use crate::decentralized::{cash_at_level, solve_cash, solve_weight, weight_cap};
use crate::error::{domain, Error, Result};
use crate::model::{big_gamma, check_solvable, Allocation, BankParams, SystemParams};
use crate::numerics::integrate;
use crate::shock_dist::ShockDistribution;

pub use crate::numerics::{find_root_bracketed, lambert_w0, lambert_wm1};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Regime {
    Interior,
    Corner,
    /// Positive bond position, which supplies liquidity.
    LongBond,
    /// Bond position at or below zero.
    ShortBond,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtensionResult {
    pub allocation: Allocation,
    pub regimes: Vec<Regime>,
    pub foc_residuals: Vec<f64>,
    /// Each bank's drift `J_i` under the variant's dynamics.
    pub objectives: Vec<f64>,
    /// Best-response rounds (partial bond only).
    pub iterations: usize,
}

fn require_log(system: &SystemParams) -> Result<()> {
    check_solvable(system)?;
    system.require_log_utility()
}

// ---------------------------------------------------------------------------
// Loss on every shock

/// Distance kept from the `c = 1 - η` singularity.
pub const LOSS_EDGE: f64 = 1e-9;
const LOSS_SCAN: usize = 2000;
const QUAD_TOL: f64 = 1e-12;

/// Cash FOC when shocks below the buffer are paid out of cash.
pub fn liquidity_loss_foc(bank: &BankParams, r: f64, c: f64) -> f64 {
    let (f, tail) = (bank.shock.density(c), bank.shock.tail(c));
    let left = 1.0 - bank.eta - c;
    -r - bank.theta * f * left.ln() - bank.theta * tail / left + bank.theta * f * (-c).ln_1p()
}

/// Cash part of the objective, including `θ∫₀^c f(u) ln(1-u) du`.
pub fn liquidity_loss_objective(bank: &BankParams, r: f64, c: f64) -> f64 {
    let paid = integrate(|u| bank.shock.density(u) * (-u).ln_1p(), 0.0, c, QUAD_TOL);
    -r * c + bank.theta * bank.shock.tail(c) * (1.0 - bank.eta - c).ln() + bank.theta * paid
}

/// Optimal cash of one bank and whether it is interior.
pub fn liquidity_loss_cash(bank: &BankParams, r: f64) -> Result<(f64, Regime)> {
    let top = 1.0 - bank.eta - LOSS_EDGE;
    if !(top > 0.0) {
        return domain("needs eta < 1");
    }
    let foc = |c: f64| liquidity_loss_foc(bank, r, c);
    // Every downward crossing of the FOC is a local maximum.
    let mut best = (0.0, liquidity_loss_objective(bank, r, 0.0), Regime::Corner);
    let h = top / LOSS_SCAN as f64;
    let mut prev = foc(0.0);
    for k in 1..=LOSS_SCAN {
        let x = if k == LOSS_SCAN { top } else { h * k as f64 };
        let g = foc(x);
        if prev > 0.0 && g <= 0.0 {
            let c = find_root_bracketed(foc, x - h, x, 1e-15)?;
            let v = liquidity_loss_objective(bank, r, c);
            if v > best.1 {
                best = (c, v, Regime::Interior);
            }
        }
        prev = g;
    }
    Ok((best.0, best.2))
}

pub fn solve_ext_liquidity_loss(system: &SystemParams) -> Result<ExtensionResult> {
    require_log(system)?;
    let n = system.n();
    let r = system.r;
    let mut cash = Vec::with_capacity(n);
    let mut regimes = Vec::with_capacity(n);
    for b in &system.banks {
        let (c, reg) = liquidity_loss_cash(b, r)?;
        cash.push(c);
        regimes.push(reg);
    }
    let w: Vec<f64> = (0..n)
        .map(|j| solve_weight(1.0, &system.banks[j], cash[j]))
        .collect::<Result<_>>()?;
    let allocation = Allocation::from_fn(system, cash.clone(), |_, j| w[j]);
    let foc_residuals = (0..n)
        .map(|i| match regimes[i] {
            Regime::Interior => liquidity_loss_foc(&system.banks[i], r, cash[i]).abs(),
            _ => liquidity_loss_foc(&system.banks[i], r, 0.0).max(0.0),
        })
        .collect();
    let objectives = (0..n)
        .map(|i| {
            let b = &system.banks[i];
            let others: f64 = (0..n)
                .filter(|&j| j != i)
                .map(|j| {
                    let t = &system.banks[j];
                    w[j] * t.mu + t.theta * t.shock.tail(cash[j]) * (-t.phi * w[j]).ln_1p()
                })
                .sum();
            r + b.eta * b.mu / b.phi + liquidity_loss_objective(b, r, cash[i]) + others
        })
        .collect();
    Ok(ExtensionResult {
        allocation,
        regimes,
        foc_residuals,
        objectives,
        iterations: 0,
    })
}

// ---------------------------------------------------------------------------
// Partially liquid bond

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PartialBondSettings {
    /// Convergence threshold on the largest control change of a best-response round.
    pub tol: f64,
    pub max_rounds: usize,
    /// Weight on the new best response in each round.
    pub damping: f64,
}

impl Default for PartialBondSettings {
    fn default() -> Self {
        PartialBondSettings {
            tol: 1e-12,
            max_rounds: 2000,
            damping: 0.5,
        }
    }
}

/// What bank `i` sees of another bank's project.
#[derive(Clone, Copy)]
struct Exposure {
    mu: f64,
    phi: f64,
    theta: f64,
    /// `F̄_j` at the target's effective liquidity.
    tail: f64,
}

impl Exposure {
    /// Weight solving `μ - ν = φθF̄/(1 - φw)`, floored at zero.
    fn weight(&self, nu: f64) -> f64 {
        let excess = self.mu - nu;
        if !(excess > 0.0) {
            return 0.0;
        }
        let q = self.phi * self.theta * self.tail / excess;
        if q >= 1.0 {
            0.0
        } else {
            ((1.0 - q) / self.phi).min((1.0 - 1e-12) / self.phi)
        }
    }

    /// Weight FOC with shadow cost `ν`.
    fn residual(&self, w: f64, nu: f64) -> f64 {
        let g = self.mu - nu - self.phi * self.theta * self.tail / (1.0 - self.phi * w);
        if w > 0.0 {
            g.abs()
        } else {
            g.max(0.0)
        }
    }
}

#[derive(Debug, Clone)]
struct BondCandidate {
    cash: f64,
    weights: Vec<f64>,
    regime: Regime,
    residual: f64,
}

struct BondProblem<'a> {
    bank: &'a BankParams,
    r: f64,
    alpha: f64,
    targets: Vec<Exposure>,
}

impl BondProblem<'_> {
    fn gamma_eta(&self) -> f64 {
        big_gamma(self.bank.eta, 1.0)
    }

    /// Marginal shortage cost `θΓf(e)` of liquidity `e`.
    fn marginal(&self, e: f64) -> f64 {
        self.bank.theta * self.gamma_eta() * self.bank.shock.density(e.max(0.0))
    }

    fn objective(&self, c: f64, w: &[f64]) -> f64 {
        let s: f64 = w.iter().sum();
        let e = c + self.alpha * (1.0 - c - s).max(0.0);
        let own = self.bank.theta * self.gamma_eta() * self.bank.shock.tail(e);
        let others: f64 = self
            .targets
            .iter()
            .zip(w)
            .map(|(t, &wj)| wj * t.mu + if t.tail == 0.0 { 0.0 } else { t.theta * t.tail * (-t.phi * wj).ln_1p() })
            .sum();
        -self.r * c - own + others
    }

    fn weights_at(&self, nu: f64) -> Vec<f64> {
        self.targets.iter().map(|t| t.weight(nu)).collect()
    }

    fn weight_residual(&self, w: &[f64], nu: f64) -> f64 {
        self.targets.iter().zip(w).map(|(t, &x)| t.residual(x, nu)).fold(0.0, f64::max)
    }

    /// Bond position short or flat: the unchanged closed form.
    fn short_bond(&self) -> Result<Option<BondCandidate>> {
        let c = solve_cash(self.bank, self.r)?;
        let w = self.weights_at(0.0);
        let s: f64 = w.iter().sum();
        if 1.0 - c - s > 0.0 {
            return Ok(None);
        }
        let cash_res = if c > 0.0 { (-self.r + self.marginal(c)).abs() } else { 0.0 };
        Ok(Some(BondCandidate {
            residual: cash_res.max(self.weight_residual(&w, 0.0)),
            cash: c,
            weights: w,
            regime: Regime::ShortBond,
        }))
    }

    /// Bond position strictly long, cash interior or at zero.
    fn long_bond(&self) -> Result<Option<BondCandidate>> {
        let (r, a) = (self.r, self.alpha);
        let ge = self.gamma_eta();
        let level = r / (self.bank.theta * ge * (1.0 - a));
        let e_star = if ge == 0.0 { 0.0 } else { cash_at_level(self.bank, level)? };
        let nu = a * r / (1.0 - a);
        let w = self.weights_at(nu);
        let s: f64 = w.iter().sum();
        let c = (e_star - a * (1.0 - s)) / (1.0 - a);
        if c >= 0.0 {
            if 1.0 - s - e_star <= 0.0 {
                return Ok(None);
            }
            let e = c + a * (1.0 - c - s);
            let cash_res = (-r + (1.0 - a) * self.marginal(e)).abs();
            return Ok(Some(BondCandidate {
                residual: cash_res.max(self.weight_residual(&w, a * self.marginal(e))),
                cash: c,
                weights: w,
                regime: Regime::LongBond,
            }));
        }
        if a == 0.0 {
            return Ok(None);
        }
        // Cash at zero: the shadow price p = Ψ'(α(1 - S(p))) is the unknown.
        let sum_at = |p: f64| self.weights_at(a * p).iter().sum::<f64>();
        let h = |p: f64| p - self.marginal(a * (1.0 - sum_at(p)).max(0.0));
        let p_hi = self.targets.iter().map(|t| t.mu / a).fold(0.0, f64::max) + self.marginal(a) + 1.0;
        let p = if h(0.0) >= 0.0 { 0.0 } else { find_root_bracketed(h, 0.0, p_hi, 1e-16)? };
        let w = self.weights_at(a * p);
        let s: f64 = w.iter().sum();
        if !(1.0 - s > 0.0) || -r + (1.0 - a) * p > 1e-12 {
            return Ok(None);
        }
        Ok(Some(BondCandidate {
            residual: self.weight_residual(&w, a * self.marginal(a * (1.0 - s))),
            cash: 0.0,
            weights: w,
            regime: Regime::LongBond,
        }))
    }

    /// Bond position exactly zero, `c = 1 - S`.
    fn kink(&self) -> Result<BondCandidate> {
        let nu_at = |s: f64| self.marginal(1.0 - s) - self.r;
        let k = |s: f64| s - self.weights_at(nu_at(s)).iter().sum::<f64>();
        let nu = if k(1.0) > 0.0 {
            let s = if k(0.0) >= 0.0 { 0.0 } else { find_root_bracketed(k, 0.0, 1.0, 1e-16)? };
            nu_at(s)
        } else {
            // c = 0 binds; the multiplier on Σw = 1 exceeds ν(1).
            let lo = nu_at(1.0);
            let hi = self.targets.iter().map(|t| t.mu).fold(f64::NEG_INFINITY, f64::max);
            let g = |nu: f64| self.weights_at(nu).iter().sum::<f64>() - 1.0;
            if g(lo) <= 0.0 {
                lo
            } else {
                find_root_bracketed(g, lo, hi, 1e-16)?
            }
        };
        let w = self.weights_at(nu);
        let sum: f64 = w.iter().sum();
        let mut c = (1.0 - sum).max(0.0);
        while 1.0 - c - sum > 0.0 {
            c = c.next_up();
        }
        Ok(BondCandidate {
            residual: self.weight_residual(&w, nu),
            cash: c,
            weights: w,
            regime: Regime::ShortBond,
        })
    }

    fn best_response(&self) -> Result<(BondCandidate, f64)> {
        let mut cands: Vec<BondCandidate> = Vec::with_capacity(3);
        cands.extend(self.short_bond()?);
        cands.extend(self.long_bond()?);
        cands.push(self.kink()?);
        let mut best = 0;
        let mut best_val = self.objective(cands[0].cash, &cands[0].weights);
        for (k, cand) in cands.iter().enumerate().skip(1) {
            let v = self.objective(cand.cash, &cand.weights);
            if v > best_val {
                (best, best_val) = (k, v);
            }
        }
        Ok((cands.swap_remove(best), best_val))
    }
}

fn effective_liquidity(alpha: f64, c: f64, w_row: &[f64], i: usize) -> f64 {
    let s: f64 = w_row.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, x)| x).sum();
    c + alpha * (1.0 - c - s).max(0.0)
}

pub fn solve_ext_partial_bond(system: &SystemParams, alpha: f64) -> Result<ExtensionResult> {
    solve_ext_partial_bond_with(system, alpha, &PartialBondSettings::default())
}

/// Nash equilibrium when a long bond position covers fraction `alpha` of its
/// value in a shock, found by damped best-response iteration from the base
/// model's allocation.
pub fn solve_ext_partial_bond_with(
    system: &SystemParams,
    alpha: f64,
    settings: &PartialBondSettings,
) -> Result<ExtensionResult> {
    require_log(system)?;
    if !(0.0..1.0).contains(&alpha) {
        return domain(format!("alpha must lie in [0, 1), got {alpha}"));
    }
    let n = system.n();
    let r = system.r;
    let mut cash: Vec<f64> = system.banks.iter().map(|b| solve_cash(b, r)).collect::<Result<_>>()?;
    let base_w: Vec<f64> = (0..n)
        .map(|j| solve_weight(1.0, &system.banks[j], cash[j]))
        .collect::<Result<_>>()?;
    let mut w: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 0.0 } else { base_w[j] }).collect())
        .collect();

    for round in 1..=settings.max_rounds {
        let eff: Vec<f64> = (0..n).map(|j| effective_liquidity(alpha, cash[j], &w[j], j)).collect();
        let mut next_c = vec![0.0; n];
        let mut next_w = vec![vec![0.0; n]; n];
        let mut regimes = Vec::with_capacity(n);
        let mut residuals = Vec::with_capacity(n);
        let mut objectives = Vec::with_capacity(n);
        for i in 0..n {
            let bank = &system.banks[i];
            let others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            let problem = BondProblem {
                bank,
                r,
                alpha,
                targets: others
                    .iter()
                    .map(|&j| {
                        let t = &system.banks[j];
                        Exposure {
                            mu: t.mu,
                            phi: t.phi,
                            theta: t.theta,
                            tail: t.shock.tail(eff[j]),
                        }
                    })
                    .collect(),
            };
            let (cand, val) = problem.best_response()?;
            next_c[i] = cand.cash;
            for (k, &j) in others.iter().enumerate() {
                next_w[i][j] = cand.weights[k].min(weight_cap(&system.banks[j]));
            }
            regimes.push(cand.regime);
            residuals.push(cand.residual);
            objectives.push(r + bank.eta * bank.mu / bank.phi + val);
        }
        let mut change = 0.0f64;
        for i in 0..n {
            change = change.max((next_c[i] - cash[i]).abs());
            for j in 0..n {
                change = change.max((next_w[i][j] - w[i][j]).abs());
            }
        }
        if change <= settings.tol {
            let allocation = Allocation::from_fn(system, next_c, |i, j| next_w[i][j]);
            return Ok(ExtensionResult {
                allocation,
                regimes,
                foc_residuals: residuals,
                objectives,
                iterations: round,
            });
        }
        let d = settings.damping;
        for i in 0..n {
            cash[i] += d * (next_c[i] - cash[i]);
            for j in 0..n {
                w[i][j] += d * (next_w[i][j] - w[i][j]);
            }
        }
    }
    let mut last = cash.clone();
    last.extend(w.iter().flatten());
    Err(Error::NonConvergence {
        what: "partial-bond best response".into(),
        iterations: settings.max_rounds,
        last: Some(last),
    })
}

// ---------------------------------------------------------------------------
// Endogenous self-investment

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EtaCandidate {
    pub cash: f64,
    pub eta: f64,
    pub objective: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EndogenousEtaResult {
    /// Interior local maximum, when one exists.
    pub interior: Option<EtaCandidate>,
    /// Zero cash with the matching self-investment.
    pub corner: EtaCandidate,
    /// Stationary point separating the two maxima (a local minimum).
    pub separating_min: Option<EtaCandidate>,
    pub chosen: Regime,
    /// Corner and interior are both local maxima.
    pub multiple_optima: bool,
    /// Cash and self-investment FOC residuals at the interior point.
    pub foc_residuals: Option<(f64, f64)>,
}

/// `η̂(c) = (1 - φθF̄(c)/μ)₊`.
pub fn endogenous_eta(bank: &BankParams, c: f64) -> f64 {
    (1.0 - bank.phi * bank.theta * bank.shock.tail(c) / bank.mu).max(0.0)
}

/// Objective with the self-investment chosen optimally for cash `c`.
pub fn endogenous_eta_objective(bank: &BankParams, r: f64, c: f64) -> f64 {
    let eta = endogenous_eta(bank, c);
    let tail = bank.shock.tail(c);
    let shock = if tail == 0.0 { 0.0 } else { bank.theta * tail * (-eta).ln_1p() };
    (1.0 - c) * r + eta * bank.mu / bank.phi + shock
}

fn eta_candidate(bank: &BankParams, r: f64, c: f64) -> EtaCandidate {
    EtaCandidate {
        cash: c,
        eta: endogenous_eta(bank, c),
        objective: endogenous_eta_objective(bank, r, c),
    }
}

/// Both FOCs at `(c, η)`.
pub fn endogenous_eta_residuals(bank: &BankParams, r: f64, c: f64, eta: f64) -> (f64, f64) {
    let cash = -r - bank.theta * bank.shock.density(c) * (-eta).ln_1p();
    let own = bank.mu / bank.phi - bank.theta * bank.shock.tail(c) / (1.0 - eta);
    (cash, own)
}

/// Both local optima when a bank also picks its stake in its own project.
///
/// Stationary points satisfy `ln(1 - η) = W(-rλφ/μ)`; the lower branch gives
/// the interior maximum and the principal branch the minimum between it and
/// the corner.
pub fn solve_ext_endogenous_eta(bank: &BankParams, r: f64) -> Result<EndogenousEtaResult> {
    if !bank.is_log_utility() {
        return Err(Error::UnsupportedUtility { bank: 0, gamma: bank.gamma });
    }
    let lambda = match bank.shock {
        ShockDistribution::Exponential { lambda } => lambda,
        _ => return Err(Error::NotApplicable("closed form needs exponential shocks".into())),
    };
    if !(r > 0.0) {
        return domain(format!("r must be > 0, got {r}"));
    }
    let corner = eta_candidate(bank, r, 0.0);
    let x = -r * lambda * bank.phi / bank.mu;
    let stationary = |w: f64| -> Option<EtaCandidate> {
        let c = -lambda * (-r * lambda / (bank.theta * w)).ln();
        (c > 0.0 && c.is_finite())
            .then(|| eta_candidate(bank, r, c))
            .filter(|k| k.eta > 0.0)
    };
    let (interior, separating_min) = if x >= crate::numerics::NEG_INV_E {
        (stationary(lambert_wm1(x)?), stationary(lambert_w0(x)?))
    } else {
        (None, None)
    };
    let corner_slope = -r - bank.theta * bank.shock.density(0.0) * (-corner.eta).ln_1p();
    let corner_is_max = corner_slope <= 0.0;
    let chosen = match interior {
        Some(k) if k.objective > corner.objective => Regime::Interior,
        _ => Regime::Corner,
    };
    Ok(EndogenousEtaResult {
        interior,
        corner,
        separating_min,
        chosen,
        multiple_optima: interior.is_some() && corner_is_max,
        foc_residuals: interior.map(|k| endogenous_eta_residuals(bank, r, k.cash, k.eta)),
    })
}
