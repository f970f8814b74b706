//! Brute-force grid oracles. Slow and independent of the closed forms; used
//! to cross-check the solvers.

use crate::decentralized::{cash_objective, weight_objective};
use crate::model::{bank_drift, big_gamma, Allocation, BankParams, SystemParams};
use crate::shock_dist::ShockDistribution;

const GOLDEN: f64 = 0.618_033_988_749_894_8;

/// Maximizer of `f` on `[lo, hi]`: a uniform grid of `points` followed by
/// golden-section refinement on the two cells around the best grid point.
pub fn maximize_1d<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, points: usize) -> f64 {
    if hi <= lo {
        return lo;
    }
    let points = points.max(3);
    let h = (hi - lo) / (points - 1) as f64;
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for k in 0..points {
        let v = f(lo + h * k as f64);
        if v > best_val {
            best_val = v;
            best = k;
        }
    }
    let a = lo + h * best.saturating_sub(1) as f64;
    let b = (lo + h * (best + 1) as f64).min(hi);
    golden(&f, a, b)
}

fn golden<F: Fn(f64) -> f64>(f: &F, mut a: f64, mut b: f64) -> f64 {
    let mut x1 = b - GOLDEN * (b - a);
    let mut x2 = a + GOLDEN * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..200 {
        if b - a <= 1e-15 * (1.0 + a.abs().max(b.abs())) {
            break;
        }
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + GOLDEN * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - GOLDEN * (b - a);
            f1 = f(x1);
        }
    }
    let mid = 0.5 * (a + b);
    // The bracket may end on an endpoint optimum.
    [a, mid, b]
        .into_iter()
        .max_by(|x, y| f(*x).total_cmp(&f(*y)))
        .unwrap_or(mid)
}

/// One bank's row of the decentralized optimum found by grid search.
#[derive(Debug, Clone, PartialEq)]
pub struct BruteForceRow {
    pub cash: f64,
    /// Full row including the fixed diagonal.
    pub weights: Vec<f64>,
    /// Drift coefficient `J_i` at the argmax.
    pub objective: f64,
}

/// Upper end of the cash search: cash beyond `θΓ/r` loses more carry than
/// any shock can cost.
fn cash_ceiling(bank: &BankParams, r: f64) -> f64 {
    let loss = bank.theta * big_gamma(bank.eta, bank.gamma);
    if r > 0.0 {
        loss / r
    } else {
        1e3 * bank.shock.scale()
    }
}

/// Grid-searches bank `i`'s separable objective; every bank's cash is
/// searched as well since the weights depend on it.
pub fn brute_force_bank_objective(system: &SystemParams, i: usize, grid_resolution: usize) -> BruteForceRow {
    let r = system.r;
    let cash: Vec<f64> = system
        .banks
        .iter()
        .map(|b| maximize_1d(|c| cash_objective(b, r, c), 0.0, cash_ceiling(b, r), grid_resolution))
        .collect();
    let gi = system.banks[i].gamma;
    let weights: Vec<f64> = (0..system.n())
        .map(|j| {
            if j == i {
                system.banks[i].eta / system.banks[i].phi
            } else {
                let t = &system.banks[j];
                let cap = (1.0 - 1e-12) / t.phi;
                maximize_1d(|w| weight_objective(gi, t, cash[j], w), 0.0, cap, grid_resolution)
            }
        })
        .collect();
    let row = weights.clone();
    let alloc = Allocation::from_fn(system, cash.clone(), |a, b| if a == i { row[b] } else { 0.0 });
    BruteForceRow {
        cash: cash[i],
        objective: bank_drift(system, &alloc, i),
        weights,
    }
}

fn lambda_of(bank: &BankParams) -> f64 {
    match bank.shock {
        ShockDistribution::Exponential { lambda } => lambda,
        ShockDistribution::PowerLaw { .. } => panic!("planner oracle handles exponential shocks only"),
    }
}

/// Planner's per-bank optimum `(c, w, h)` for exponential shocks, from a
/// `grid x grid` search over `(c, w)` followed by nested golden-section
/// refinement. The objective is written out here independently of the solver.
pub fn planner_grid_oracle(bank: &BankParams, n: usize, r: f64, grid: usize) -> (f64, f64, f64) {
    let m = (n - 1) as f64;
    let c_hi = (m * bank.mu / bank.phi + bank.theta * big_gamma(bank.eta, 1.0)) / r;
    let w_hi = (1.0 - 1e-10) / bank.phi;
    let ge = -(-bank.eta).ln_1p();
    let h = |c: f64, w: f64| {
        let tail = (-c / lambda_of(bank)).exp();
        let shock_cost = if tail == 0.0 { 0.0 } else { bank.theta * tail * (ge - m * (-bank.phi * w).ln_1p()) };
        -r * c + m * bank.mu * w - shock_cost
    };
    let (dc, dw) = (c_hi / (grid - 1) as f64, w_hi / (grid - 1) as f64);
    let (mut bc, mut bv) = (0, f64::NEG_INFINITY);
    for a in 0..grid {
        for b in 0..grid {
            let v = h(dc * a as f64, dw * b as f64);
            if v > bv {
                (bc, bv) = (a, v);
            }
        }
    }
    // The w-subproblem is strictly concave for fixed c, so the inner search
    // may use the full interval once the outer bracket is local.
    let inner = |c: f64| golden(&|w| h(c, w), 0.0, w_hi);
    let profile = |c: f64| h(c, inner(c));
    let c_lo = dc * bc.saturating_sub(2) as f64;
    let c_top = (dc * (bc + 2) as f64).min(c_hi);
    let c = golden(&profile, c_lo, c_top);
    let w = inner(c);
    (c, w, h(c, w))
}
