//! The planner's optimum for log-utility systems. The objective separates
//! into one `(c_i, w_·i)` subproblem per bank, each solved by block
//! coordinate descent plus explicit comparison against alternative fixed
//! points.

use rayon::prelude::*;
use serde::Serialize;

use crate::decentralized::{cash_at_level, solve_cash, weight_cap};
use crate::error::{domain, Error, Result};
use crate::model::{
    big_gamma, check_solvable, Allocation, BankParams, Diagnostics, Drift, EquilibriumResult, FocResidual,
    SystemParams,
};

/// Tails below this are treated as exactly zero in `F̄ · Γ` products.
const TAIL_FLOOR: f64 = 1e-300;
/// Candidates closer than this in objective are considered tied.
const TIE_OBJECTIVE: f64 = 1e-8;
/// Tied candidates farther apart than this in controls signal multiplicity.
const DISTINCT_CONTROLS: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BcdInit {
    FromDecentralized,
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BcdSettings {
    pub tol: f64,
    pub max_iter: usize,
    pub init: BcdInit,
}

impl Default for BcdSettings {
    fn default() -> Self {
        BcdSettings {
            tol: 1e-12,
            max_iter: 10_000,
            init: BcdInit::FromDecentralized,
        }
    }
}

/// Maximizer of the planner's `w`-subproblem for bank `i`'s project at cash `c`.
pub fn optimal_w_given_c(bank: &BankParams, c: f64, _n: usize) -> Result<f64> {
    let q = bank.phi * bank.theta * bank.shock.ccdf(c)? / bank.mu;
    Ok(if q <= 1.0 { (1.0 - q) / bank.phi } else { 0.0 })
}

/// Maximizer of the planner's `c`-subproblem given the common weight `w`
/// other banks place on this bank's project.
pub fn optimal_c_given_w(bank: &BankParams, w: f64, n: usize, r: f64) -> Result<f64> {
    if !(w >= 0.0 && w < 1.0 / bank.phi) {
        return domain(format!("weight {w} outside [0, {})", 1.0 / bank.phi));
    }
    let loss = bank.theta * (big_gamma(bank.eta, 1.0) + (n - 1) as f64 * big_gamma(bank.phi * w, 1.0));
    if loss == 0.0 {
        return Ok(0.0);
    }
    if r == 0.0 {
        return Err(Error::InfiniteCash);
    }
    cash_at_level(bank, r / loss)
}

/// The planner's objective restricted to bank `i`'s controls (constant terms dropped).
pub fn planner_objective(bank: &BankParams, c: f64, w: f64, n: usize, r: f64) -> f64 {
    let m = (n - 1) as f64;
    let tail = bank.shock.tail(c);
    let shock_cost = if tail < TAIL_FLOOR {
        0.0
    } else {
        bank.theta * tail * (big_gamma(bank.eta, 1.0) + m * big_gamma(bank.phi * w, 1.0))
    };
    -r * c + m * bank.mu * w - shock_cost
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CandidateSource {
    /// Block coordinate descent from the configured start.
    Bcd,
    /// Block coordinate descent from weights just under the cap.
    BcdFromAbove,
    /// The decentralized cash with no investment in the project.
    Corner,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Candidate {
    pub source: CandidateSource,
    pub cash: f64,
    pub weight: f64,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlannerBankSolution {
    pub cash: f64,
    /// Weight every other bank places on this bank's project.
    pub weight: f64,
    pub objective: f64,
    /// Iterations of the primary descent run.
    pub iterations: usize,
    pub residuals: FocResidual,
    pub candidates: Vec<Candidate>,
    pub non_unique: bool,
}

fn bcd(bank: &BankParams, n: usize, r: f64, c0: f64, s: &BcdSettings) -> Result<(f64, f64, usize)> {
    let mut c = c0;
    let mut w = optimal_w_given_c(bank, c, n)?;
    for it in 1..=s.max_iter {
        let c_next = optimal_c_given_w(bank, w, n, r)?;
        let w_next = optimal_w_given_c(bank, c_next, n)?.min(weight_cap(bank));
        let step = (c_next - c).abs().max((w_next - w).abs());
        c = c_next;
        w = w_next;
        if step < s.tol {
            return Ok((c, w, it));
        }
    }
    Err(Error::NonConvergence {
        what: "planner block coordinate descent".into(),
        iterations: s.max_iter,
        last: Some(vec![c, w]),
    })
}

pub fn solve_planner_bank(bank: &BankParams, n: usize, r: f64, settings: &BcdSettings) -> Result<PlannerBankSolution> {
    if !(settings.tol > 0.0) || settings.max_iter == 0 {
        return domain("BCD settings need tol > 0 and max_iter >= 1");
    }
    if !(r > 0.0) {
        return Err(Error::InfiniteCash);
    }
    let c_hat = solve_cash(bank, r)?;
    let start = match settings.init {
        BcdInit::FromDecentralized => c_hat,
        BcdInit::Zero => 0.0,
    };
    let (c, w, iterations) = bcd(bank, n, r, start, settings)?;
    let h = |c, w| planner_objective(bank, c, w, n, r);
    let mut candidates = vec![Candidate {
        source: CandidateSource::Bcd,
        cash: c,
        weight: w,
        objective: h(c, w),
    }];
    let top = optimal_c_given_w(bank, weight_cap(bank), n, r)?;
    if let Ok((ca, wa, _)) = bcd(bank, n, r, top, settings) {
        candidates.push(Candidate {
            source: CandidateSource::BcdFromAbove,
            cash: ca,
            weight: wa,
            objective: h(ca, wa),
        });
    }
    candidates.push(Candidate {
        source: CandidateSource::Corner,
        cash: c_hat,
        weight: 0.0,
        objective: h(c_hat, 0.0),
    });

    let mut best = candidates[0];
    for cand in &candidates[1..] {
        if cand.objective > best.objective {
            best = *cand;
        }
    }
    let non_unique = candidates.iter().enumerate().any(|(k, a)| {
        candidates[k + 1..].iter().any(|b| {
            (a.objective - b.objective).abs() < TIE_OBJECTIVE
                && (a.cash - b.cash).abs().max((a.weight - b.weight).abs()) > DISTINCT_CONTROLS
        })
    });
    Ok(PlannerBankSolution {
        cash: best.cash,
        weight: best.weight,
        objective: best.objective,
        iterations,
        residuals: planner_residuals(bank, best.cash, best.weight, n, r),
        candidates,
        non_unique,
    })
}

/// First-order residuals of the planner's subproblem at `(c, w)`.
pub fn planner_residuals(bank: &BankParams, c: f64, w: f64, n: usize, r: f64) -> FocResidual {
    let m = (n - 1) as f64;
    let cash = if c > 0.0 {
        r - bank.theta * bank.shock.density(c) * (big_gamma(bank.eta, 1.0) + m * big_gamma(bank.phi * w, 1.0))
    } else {
        0.0
    };
    let weight = if w > 0.0 {
        (bank.mu - bank.phi * bank.theta * bank.shock.tail(c) / (1.0 - bank.phi * w)).abs()
    } else {
        0.0
    };
    FocResidual { cash, weight }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UniquenessCheck {
    pub density_ok: bool,
    pub gamma_ok: bool,
    /// `F̄⁻¹(μ/(φθ))`, or 0 when that ratio is at least 1.
    pub c_tilde: f64,
    pub gamma_eta: f64,
    /// The smaller of the two thresholds `Γ(η;1)` must exceed.
    pub threshold: f64,
}

/// Sufficient conditions for the planner's subproblem of this bank to have a unique solution.
pub fn check_uniqueness_conditions(bank: &BankParams, n: usize, r: f64) -> UniquenessCheck {
    let m = (n - 1) as f64;
    let d = &bank.shock;
    let ratio = bank.mu / (bank.phi * bank.theta);
    let c_tilde = if ratio < 1.0 { d.ccdf_inverse(ratio).unwrap_or(0.0) } else { 0.0 };
    let (a, b) = if c_tilde == 0.0 {
        let log_term = (bank.phi * bank.theta / bank.mu).ln();
        let (f0, fp0) = (d.density(0.0), d.slope(0.0));
        (m * (log_term - f0 * f0 / fp0), r / (bank.theta * f0) + m * log_term)
    } else {
        let (f, fp) = (d.density(c_tilde), d.slope(c_tilde));
        (-m * bank.phi * bank.theta * f * f / (bank.mu * fp), r / (bank.theta * f))
    };
    let gamma_eta = big_gamma(bank.eta, 1.0);
    let threshold = a.min(b);
    UniquenessCheck {
        density_ok: d.check_density_condition().holds,
        gamma_ok: gamma_eta > threshold,
        c_tilde,
        gamma_eta,
        threshold,
    }
}

pub fn solve_centralized(system: &SystemParams) -> Result<EquilibriumResult> {
    solve_centralized_with(system, &BcdSettings::default())
}

pub fn solve_centralized_with(system: &SystemParams, settings: &BcdSettings) -> Result<EquilibriumResult> {
    check_solvable(system)?;
    system.require_log_utility()?;
    if !(system.r > 0.0) {
        return Err(Error::InfiniteCash);
    }
    let n = system.n();
    let per_bank = system
        .banks
        .par_iter()
        .map(|b| solve_planner_bank(b, n, system.r, settings))
        .collect::<Result<Vec<_>>>()?;
    let checks: Vec<UniquenessCheck> = system
        .banks
        .iter()
        .map(|b| check_uniqueness_conditions(b, n, system.r))
        .collect();

    let cash = per_bank.iter().map(|s| s.cash).collect();
    let allocation = Allocation::from_fn(system, cash, |_, j| per_bank[j].weight);
    let drift = centralized_drift(system, &allocation);
    let mut violations = Vec::new();
    for (i, c) in checks.iter().enumerate() {
        if !c.density_ok {
            violations.push(format!("bank {}: density condition fails", i + 1));
        }
        if !c.gamma_ok {
            violations.push(format!(
                "bank {}: Gamma(eta;1) = {} does not exceed {}",
                i + 1,
                c.gamma_eta,
                c.threshold
            ));
        }
    }
    Ok(EquilibriumResult {
        core_members: allocation.core_members(),
        drift: Drift::Planner(drift),
        diagnostics: Diagnostics {
            foc_residuals: per_bank.iter().map(|s| s.residuals).collect(),
            bcd_iterations: per_bank.iter().map(|s| s.iterations).collect(),
            uniqueness_ok: violations.is_empty() && per_bank.iter().all(|s| !s.non_unique),
            assumption_violations: violations,
            candidate_objectives: per_bank
                .iter()
                .map(|s| s.candidates.iter().map(|c| c.objective).collect())
                .collect(),
            non_unique: (0..n).filter(|&i| per_bank[i].non_unique).collect(),
        },
        allocation,
    })
}

/// Planner drift `J_C` of a log-utility system whose weights on each
/// project are common across investors.
pub fn centralized_drift(system: &SystemParams, a: &Allocation) -> f64 {
    let n = system.n();
    (0..n)
        .map(|i| {
            let b = &system.banks[i];
            // Common weight on project i; any investor's entry will do.
            let w = a.weights[(i + 1) % n][i];
            system.r + b.eta * b.mu / b.phi + planner_objective(b, a.cash[i], w, n, system.r)
        })
        .sum()
}

/// `V(t, x)` at the planner's optimum.
pub fn value_centralized(system: &SystemParams, result: &EquilibriumResult, t: f64, wealths: &[f64]) -> Result<f64> {
    if t > system.horizon {
        return domain(format!("t = {t} beyond horizon {}", system.horizon));
    }
    if wealths.len() != system.n() || wealths.iter().any(|&x| !(x > 0.0)) {
        return domain("need one positive wealth per bank");
    }
    Ok((system.horizon - t) * result.planner_drift() + wealths.iter().map(|x| x.ln()).sum::<f64>())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decentralized::{solve_decentralized, value_decentralized};
    use crate::fixtures;
    use crate::oracle::planner_grid_oracle;
    use crate::shock_dist::ShockDistribution;
    use proptest::prelude::*;

    const C_HAT: f64 = 1.9360721724123814;
    // Planner fixed points for n identical reference banks, 40-digit root finding.
    const C_STAR_2: f64 = 3.8395571080112318;
    const W_STAR_2: f64 = 2.4522152826727395;
    const C_STAR_3: f64 = 4.622_366_014_748_044;

    #[test]
    fn block_updates() {
        let b = fixtures::reference_bank();
        assert!((optimal_w_given_c(&b, C_HAT, 2).unwrap() - 2.179_401_102_024_675).abs() < 1e-13);
        let w0 = optimal_w_given_c(&b, 0.0, 2).unwrap();
        assert!((w0 - 2.5 * (1.0 - 0.04 / 0.045)).abs() < 1e-15);
        let closed = BankParams { mu: 0.01, ..b };
        assert_eq!(optimal_w_given_c(&closed, 0.0, 2).unwrap(), 0.0);
        assert_eq!(optimal_c_given_w(&b, 0.0, 2, 0.01).unwrap(), solve_cash(&b, 0.01).unwrap());
        let c = optimal_c_given_w(&b, 2.179399, 2, 0.01).unwrap();
        assert!((c - 3.313092982848681).abs() < 1e-12);
        assert!(planner_residuals(&b, c, 2.179399, 2, 0.01).cash.abs() < 1e-10);
        let big = optimal_c_given_w(&b, (1.0 - 1e-12) / b.phi, 2, 0.01).unwrap();
        assert!(big.is_finite() && big > 5.0);
        assert_eq!(optimal_c_given_w(&b, 1.0, 2, 0.0), Err(Error::InfiniteCash));
    }

    #[test]
    fn reference_pair_fixed_point() {
        let b = fixtures::reference_bank();
        let s = solve_planner_bank(&b, 2, 0.01, &BcdSettings::default()).unwrap();
        assert!((s.cash - C_STAR_2).abs() < 1e-10);
        assert!((s.weight - W_STAR_2).abs() < 1e-10);
        assert!(s.cash > C_HAT);
        assert!(s.iterations < 200);
        assert!(s.residuals.cash.abs() < 1e-9 && s.residuals.weight < 1e-9);
        assert!(!s.non_unique);
        let (c, w, _) = planner_grid_oracle(&b, 2, 0.01, 400);
        assert!((c - s.cash).abs() < 1e-5 && (w - s.weight).abs() < 1e-5);
        let z = solve_planner_bank(&b, 3, 0.01, &BcdSettings { init: BcdInit::Zero, ..Default::default() }).unwrap();
        assert!((z.cash - C_STAR_3).abs() < 1e-10);
    }

    #[test]
    fn periphery_bank_keeps_decentralized_cash() {
        let b = BankParams { mu: 0.001, ..fixtures::reference_bank() };
        let s = solve_planner_bank(&b, 4, 0.01, &BcdSettings::default()).unwrap();
        assert_eq!(s.cash, solve_cash(&b, 0.01).unwrap());
        assert_eq!(s.weight, 0.0);
    }

    #[test]
    fn bounded_iterations_are_reported() {
        let b = fixtures::reference_bank();
        let tight = BcdSettings { max_iter: 2, ..Default::default() };
        assert!(matches!(solve_planner_bank(&b, 2, 0.01, &tight), Err(Error::NonConvergence { .. })));
    }

    #[test]
    fn uniqueness_conditions() {
        let b = fixtures::reference_bank();
        let u = check_uniqueness_conditions(&b, 2, 0.01);
        assert_eq!(u.c_tilde, 0.0);
        // min{ln(8/9) + 1, 0.1 + ln(8/9)}
        assert!((u.threshold - (0.1 + (0.04f64 / 0.045).ln())).abs() < 1e-15);
        assert!(u.gamma_ok && u.density_ok);
        let high = BankParams { eta: 1.0 - 1e-15, ..b };
        assert!(check_uniqueness_conditions(&high, 50, 0.01).gamma_ok);
        let core = BankParams { mu: 0.02, phi: 0.4, theta: 0.1, ..b };
        let u = check_uniqueness_conditions(&core, 10, 0.01);
        assert!(u.c_tilde > 0.0);
        assert!(!check_uniqueness_conditions(&BankParams { eta: 1e-9, ..core }, 10, 0.01).gamma_ok);
    }

    #[test]
    fn centralized_system() {
        let sys = fixtures::reference_system(3);
        let res = solve_centralized(&sys).unwrap();
        let a = &res.allocation;
        for i in 0..3 {
            assert!((a.cash[i] - C_STAR_3).abs() < 1e-10);
            for j in 0..3 {
                if i != j {
                    assert_eq!(a.weights[i][j], a.weights[0][1]);
                }
            }
        }
        assert!(res.diagnostics.uniqueness_ok);
        let summed: f64 = (0..3).map(|i| crate::model::bank_drift(&sys, a, i)).sum();
        assert!((res.planner_drift() - summed).abs() < 1e-13);
        let dec = solve_decentralized(&sys).unwrap();
        let v = value_centralized(&sys, &res, 0.0, &[1.0; 3]).unwrap();
        let vi: f64 = (0..3).map(|i| value_decentralized(&sys, &dec, i, 0.0, 1.0).unwrap()).sum();
        assert!(v > vi);
    }

    #[test]
    fn planner_refuses_power_utility() {
        assert!(matches!(
            solve_centralized(&fixtures::five_bank()),
            Err(Error::UnsupportedUtility { bank: 0, .. })
        ));
    }

    #[test]
    fn all_periphery_matches_decentralized() {
        let b = BankParams { mu: 0.002, ..fixtures::reference_bank() };
        let sys = SystemParams::identical(b, 4, 0.01, 1.0);
        let cent = solve_centralized(&sys).unwrap();
        let dec = solve_decentralized(&sys).unwrap();
        assert_eq!(cent.allocation, dec.allocation);
        assert!(cent.core_members.is_empty());
    }

    #[test]
    fn value_function_terminal_and_scaling() {
        let sys = fixtures::reference_system(2);
        let res = solve_centralized(&sys).unwrap();
        let x = [1.3, 0.7];
        assert!((value_centralized(&sys, &res, 1.0, &x).unwrap() - (1.3f64.ln() + 0.7f64.ln())).abs() < 1e-15);
        let base = value_centralized(&sys, &res, 0.2, &x).unwrap();
        let scaled = value_centralized(&sys, &res, 0.2, &[2.6, 1.4]).unwrap();
        assert!((scaled - base - 2.0 * 2f64.ln()).abs() < 1e-14);
        assert!(value_centralized(&sys, &res, 1.1, &x).is_err());
    }

    fn log_bank() -> impl Strategy<Value = BankParams> {
        (0.01f64..0.08, 0.1f64..0.9, 0.2f64..0.9, 0.02f64..0.3, 0.3f64..3.0).prop_map(|(mu, phi, eta, theta, lambda)| {
            BankParams {
                mu,
                phi,
                eta,
                theta,
                gamma: 1.0,
                shock: ShockDistribution::exponential(lambda),
            }
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn planner_dominates_decentralized(b in log_bank(), n in 2usize..8, r in 0.002f64..0.05) {
            let s = solve_planner_bank(&b, n, r, &BcdSettings::default()).unwrap();
            let c_hat = solve_cash(&b, r).unwrap();
            let w_hat = crate::decentralized::solve_weight(1.0, &b, c_hat).unwrap();
            prop_assert!(s.cash >= c_hat - 1e-12);
            prop_assert!(s.weight >= w_hat - 1e-12);
            for cand in &s.candidates {
                prop_assert!(s.objective >= cand.objective);
            }
        }

        #[test]
        fn bcd_objective_never_decreases(b in log_bank(), n in 2usize..8, r in 0.002f64..0.05) {
            let h = |c, w| planner_objective(&b, c, w, n, r);
            let mut c = solve_cash(&b, r).unwrap();
            let mut w = optimal_w_given_c(&b, c, n).unwrap();
            let mut prev = h(c, w);
            for _ in 0..30 {
                c = optimal_c_given_w(&b, w, n, r).unwrap();
                let mid = h(c, w);
                w = optimal_w_given_c(&b, c, n).unwrap();
                let now = h(c, w);
                prop_assert!(mid >= prev - 1e-14 * prev.abs().max(1.0));
                prop_assert!(now >= mid - 1e-14 * mid.abs().max(1.0));
                prev = now;
            }
        }
    }
}
