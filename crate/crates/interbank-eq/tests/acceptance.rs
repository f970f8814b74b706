//! Acceptance criteria. Each test prints one PASS/FAIL line (bypassing output
//! capture) and then asserts, so a failing criterion fails the suite.

mod common;

use std::time::{Duration, Instant};

use common::{report, Draw};
use interbank_eq::centralized::check_uniqueness_conditions;
use interbank_eq::extensions::{endogenous_eta_objective, liquidity_loss_cash, liquidity_loss_foc};
use interbank_eq::oracle::{brute_force_bank_objective, maximize_1d, planner_grid_oracle};
use interbank_eq::*;
use interbank_eq::{fixtures, model::BankParams};

fn within(t: Instant, limit: u64) -> (bool, Duration) {
    let e = t.elapsed();
    (e < Duration::from_secs(limit), e)
}

/// Column weight every investor puts on project `i`.
fn weight_on(result: &EquilibriumResult, i: usize) -> f64 {
    let n = result.allocation.n();
    result.allocation.weights[(i + 1) % n][i]
}

fn planner_systems() -> Vec<SystemParams> {
    let mut d = Draw::new(202);
    let sizes = [2usize, 3, 5];
    let mut out: Vec<SystemParams> = sizes.iter().map(|&n| fixtures::reference_system(n)).collect();
    let mut k = 0;
    while out.len() < sizes.len() + 20 {
        let n = sizes[k % 3];
        let sys = d.system(n, true);
        let ok = sys.banks.iter().all(|b| {
            let u = check_uniqueness_conditions(b, n, sys.r);
            u.density_ok && u.gamma_ok
        });
        if ok {
            out.push(sys);
            k += 1;
        }
    }
    out
}

#[test]
fn criterion_01_decentralized_closed_form_vs_oracle() {
    let t = Instant::now();
    let mut d = Draw::new(101);
    let mut systems = vec![fixtures::five_bank()];
    for _ in 0..50 {
        let n = d.int(2, 6);
        systems.push(d.system(n, false));
    }
    let (mut dc, mut dw) = (0.0f64, 0.0f64);
    for sys in &systems {
        assert!(validate_system(sys).is_empty());
        let dec = solve_decentralized(sys).unwrap();
        for i in 0..sys.n() {
            let row = brute_force_bank_objective(sys, i, 2000);
            dc = dc.max((row.cash - dec.allocation.cash[i]).abs());
            for j in (0..sys.n()).filter(|&j| j != i) {
                dw = dw.max((row.weights[j] - dec.allocation.weights[i][j]).abs());
            }
        }
    }
    let (fast, e) = within(t, 10);
    let pass = dc < 1e-6 && dw < 1e-6 && fast;
    report(
        "1 decentralized vs grid oracle",
        pass,
        &format!("{} systems, max |dc| = {dc:.2e}, max |dw| = {dw:.2e}, {e:.2?}", systems.len()),
    );
    assert!(pass);
}

#[test]
fn criterion_02_planner_bcd_vs_oracle() {
    let t = Instant::now();
    let systems = planner_systems();
    let (mut dc, mut dw, mut res, mut iters) = (0.0f64, 0.0f64, 0.0f64, 0usize);
    for sys in &systems {
        let n = sys.n();
        let cent = solve_centralized(sys).unwrap();
        for i in 0..n {
            let (c, w, _) = planner_grid_oracle(&sys.banks[i], n, sys.r, 400);
            dc = dc.max((c - cent.allocation.cash[i]).abs());
            dw = dw.max((w - weight_on(&cent, i)).abs());
            let r = cent.diagnostics.foc_residuals[i];
            res = res.max(r.cash.abs()).max(r.weight.abs());
            iters = iters.max(cent.diagnostics.bcd_iterations[i]);
        }
    }
    let (fast, e) = within(t, 60);
    let pass = dc < 1e-4 && dw < 1e-4 && res < 1e-9 && iters < 200 && fast;
    report(
        "2 planner BCD vs 2-D oracle",
        pass,
        &format!(
            "{} systems, max |dc| = {dc:.2e}, max |dw| = {dw:.2e}, FOC {res:.2e}, {iters} BCD iterations, {e:.2?}",
            systems.len()
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_03_planner_dominates() {
    let mut systems = planner_systems();
    systems.extend((2..=10).map(fixtures::reference_system));
    let mut d = Draw::new(303);
    for _ in 0..30 {
        let n = d.int(2, 6);
        systems.push(d.system(n, true));
    }
    let mut bad = Vec::new();
    let mut min_core_gap = f64::INFINITY;
    for (k, sys) in systems.iter().enumerate() {
        let dec = solve_decentralized(sys).unwrap();
        let cent = solve_centralized(sys).unwrap();
        for i in 0..sys.n() {
            if cent.allocation.cash[i] < dec.allocation.cash[i] || weight_on(&cent, i) < weight_on(&dec, i) {
                bad.push(format!("system {k} bank {}", i + 1));
            }
        }
        let gap = welfare_gap(sys, &dec, &cent, 0.0).unwrap();
        let core = !dec.core_members.is_empty() || !cent.core_members.is_empty();
        if gap < -1e-12 || (core && gap <= 0.0) {
            bad.push(format!("system {k} gap {gap:e}"));
        }
        if core {
            min_core_gap = min_core_gap.min(gap);
        }
    }
    let pass = bad.is_empty();
    report(
        "3 planner holds more cash and weight, welfare gap >= 0",
        pass,
        &format!("{} systems, smallest gap with a core {min_core_gap:.3e}, violations {bad:?}", systems.len()),
    );
    assert!(pass);
}

fn mc_system() -> SystemParams {
    let mut sys = fixtures::reference_system(3);
    sys.initial_wealth = vec![1.0, 2.5, 0.4];
    sys
}

#[test]
fn criterion_04_monte_carlo_values() {
    let t = Instant::now();
    let sys = mc_system();
    let dec = solve_decentralized(&sys).unwrap();
    let cent = solve_centralized(&sys).unwrap();
    let bd = simulate_paths(&sys, &dec.allocation, 100_000, 20_240_401, false).unwrap();
    let bc = simulate_paths(&sys, &cent.allocation, 100_000, 20_240_402, false).unwrap();
    let mut details = Vec::new();
    let mut pass = true;
    for i in 0..3 {
        let acc = &bd.summary.banks[i].log_wealth;
        let want = value_decentralized(&sys, &dec, i, 0.0, sys.initial_wealth[i]).unwrap();
        let z = (acc.mean - want).abs() / acc.std_error();
        pass &= z < 3.0;
        details.push(format!("bank {} z = {z:.2}", i + 1));
    }
    let acc = &bc.summary.sum_log_wealth;
    let want = value_centralized(&sys, &cent, 0.0, &sys.initial_wealth).unwrap();
    let z = (acc.mean - want).abs() / acc.std_error();
    pass &= z < 3.0;
    details.push(format!("planner z = {z:.2}"));
    let (fast, e) = within(t, 120);
    pass &= fast;
    report("4 Monte Carlo matches value functions", pass, &format!("{}, {e:.2?}", details.join(", ")));
    assert!(pass);
}

#[test]
fn criterion_05_thinning_rate() {
    let sys = mc_system();
    let mut pass = true;
    let mut details = Vec::new();
    for (label, alloc) in [
        ("dec", solve_decentralized(&sys).unwrap().allocation),
        ("cent", solve_centralized(&sys).unwrap().allocation),
    ] {
        let batch = simulate_paths(&sys, &alloc, 100_000, 55, false).unwrap();
        for (i, est) in empirical_shortage_rate(&batch).iter().enumerate() {
            let b = &sys.banks[i];
            let want = b.theta * b.shock.ccdf(alloc.cash[i]).unwrap();
            let z = (est.mean - want).abs() / est.std_error;
            pass &= z < 4.0;
            details.push(format!("{label} bank {} z = {z:.2}", i + 1));
        }
    }
    report("5 shortage rate equals thinned intensity", pass, &details.join(", "));
    assert!(pass);
}

#[test]
fn criterion_06_welfare_ratio_limit() {
    let t = Instant::now();
    let bank = fixtures::reference_bank();
    let limit = wr_limit_identical(&bank, fixtures::REFERENCE_R).unwrap();
    let mut min_wr = f64::INFINITY;
    let mut wr200 = 0.0;
    for n in 2..=200 {
        let sys = fixtures::reference_system(n);
        let dec = solve_decentralized(&sys).unwrap();
        let cent = solve_centralized(&sys).unwrap();
        let wr = welfare_ratio(&sys, &dec, &cent, 0.0, &RatioMode::DriftOnly).unwrap();
        min_wr = min_wr.min(wr);
        wr200 = wr;
    }
    let rel = (wr200 - limit).abs() / limit;
    let rel_stated = (wr200 - 1.643790).abs() / 1.643790;
    let (fast, e) = within(t, 30);
    let pass = rel < 0.02 && min_wr > 1.0 && fast;
    report(
        "6 welfare ratio approaches its limit",
        pass,
        &format!(
            "WR(200) = {wr200:.6}, limit = {limit:.10} (off {:.2}%; {:.2}% from 1.643790), min WR = {min_wr:.4}, {e:.2?}",
            100.0 * rel,
            100.0 * rel_stated
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_07_asymptotic_rates() {
    let bank = fixtures::reference_bank();
    let r = fixtures::REFERENCE_R;
    let ns = [100usize, 1_000, 10_000, 100_000];
    let rows = asymptotic_rates_report(&bank, &ns, r).unwrap();
    let spread = |v: &[f64]| v.iter().cloned().fold(0.0, f64::max) / v.iter().cloned().fold(f64::INFINITY, f64::min);
    let nl = |n: usize| n as f64 * (n as f64).ln();
    let tails: Vec<f64> = rows.iter().map(|x| nl(x.n) * x.ccdf_c_star).collect();
    let gaps: Vec<f64> = rows.iter().map(|x| nl(x.n) * x.gap_to_cap).collect();
    let loss: Vec<f64> = rows.iter().map(|x| x.sys_loss).collect();
    let ctx = BoundContext::from_banks(&[bank], r).unwrap();
    let mut sandwich = true;
    for row in &rows {
        let b = planner_cash_bounds_exponential(&bank, &ctx, row.n).unwrap();
        for lb in [b.simple_lb, b.refined_lb].into_iter().flatten() {
            sandwich &= lb <= row.c_star;
        }
        if let Some(ub) = b.refined_ub {
            sandwich &= row.c_star <= ub;
        }
    }
    let (st, sg, sl) = (spread(&tails), spread(&gaps), spread(&loss));
    let pass = st < 3.0 && sg < 3.0 && sl < 2.0 && sandwich;
    report(
        "7 asymptotic rates and cash bounds",
        pass,
        &format!("spreads: n log n F(c*) {st:.3}, n log n (1/phi - w*) {sg:.3}, system loss {sl:.3}; bounds hold: {sandwich}"),
    );
    assert!(pass);
}

#[test]
fn criterion_08_replication() {
    let mut d = Draw::new(808);
    let (mut solved, mut degenerate, mut worst) = (0, 0, 0.0f64);
    while solved < 20 {
        let n = d.int(2, 5);
        let sys = d.system(n, true);
        let eta_c: Vec<f64> = (0..n).map(|_| d.range(0.1, 0.8)).collect();
        match replicate(&sys, &eta_c) {
            Ok(rep) => {
                worst = rep.residuals.iter().cloned().fold(worst, f64::max);
                solved += 1;
            }
            Err(Error::DegenerateRequirement { .. }) => degenerate += 1,
            Err(e) => panic!("{e}"),
        }
    }
    let pass = worst < 1e-8;
    report(
        "8 replication reproduces planner cash",
        pass,
        &format!("20 systems, max residual {worst:.2e} ({degenerate} skipped: requirement rounds to eta = 1)"),
    );
    assert!(pass);
}

#[test]
fn criterion_09_extensions() {
    // (a) endogenous self-investment
    let b = fixtures::endogenous_eta_bank();
    let r = fixtures::ENDOGENOUS_ETA_R;
    let res = solve_ext_endogenous_eta(&b, r).unwrap();
    let interior = res.interior.unwrap();
    let oracle = maximize_1d(|c| endogenous_eta_objective(&b, r, c), 0.01, 10.0, 100_000);
    let da = (oracle - interior.cash).abs();
    let pass_a = da < 1e-5 && res.multiple_optima;
    report(
        "9a endogenous eta closed form",
        pass_a,
        &format!(
            "interior c = {:.10}, grid oracle off by {da:.2e}, two optima: {}",
            interior.cash, res.multiple_optima
        ),
    );

    // (b) partially liquid bond
    let mut base_gap = 0.0f64;
    for n in [2, 3, 6] {
        let sys = fixtures::partial_bond_system(n);
        let base = solve_decentralized(&sys).unwrap().allocation;
        let ext = solve_ext_partial_bond(&sys, 0.0).unwrap().allocation;
        for i in 0..n {
            base_gap = base_gap.max((base.cash[i] - ext.cash[i]).abs());
            for j in 0..n {
                base_gap = base_gap.max((base.weights[i][j] - ext.weights[i][j]).abs());
            }
        }
    }
    let sys6 = fixtures::partial_bond_system(6);
    let base6 = solve_decentralized(&sys6).unwrap().allocation;
    let mut outcomes = Vec::new();
    let mut coincide = true;
    for k in 1..=9 {
        let alpha = k as f64 / 10.0;
        match solve_ext_partial_bond(&sys6, alpha) {
            Ok(ext) => {
                let gap = (0..6)
                    .map(|i| {
                        let w = (0..6).map(|j| (ext.allocation.weights[i][j] - base6.weights[i][j]).abs());
                        w.fold((ext.allocation.cash[i] - base6.cash[i]).abs(), f64::max)
                    })
                    .fold(0.0, f64::max);
                coincide &= gap < 1e-9;
                outcomes.push(format!("{alpha}: {gap:.0e}"));
            }
            Err(e) => {
                coincide = false;
                outcomes.push(format!("{alpha}: {e}"));
            }
        }
    }
    let pass_b = base_gap < 1e-12 && coincide;
    report(
        "9b partial bond",
        pass_b,
        &format!("alpha = 0 gap {base_gap:.0e}; n = 6 gap to base by alpha [{}]", outcomes.join("; ")),
    );

    // (c) loss on every shock
    let mut worst_foc = 0.0f64;
    let mut worst_rel = 0.0f64;
    for (eta, lambdas) in [(0.5, [0.005, 0.01, 0.02]), (0.3, [0.01, 0.02, 0.05])] {
        let mut sys = fixtures::reference_system(3);
        for (bank, &lambda) in sys.banks.iter_mut().zip(&lambdas) {
            *bank = BankParams {
                eta,
                shock: ShockDistribution::exponential(lambda),
                ..*bank
            };
        }
        let ext = solve_ext_liquidity_loss(&sys).unwrap();
        for (i, bank) in sys.banks.iter().enumerate() {
            assert_eq!(ext.regimes[i], Regime::Interior);
            let (c, _) = liquidity_loss_cash(bank, sys.r).unwrap();
            worst_foc = worst_foc.max(liquidity_loss_foc(bank, sys.r, c).abs());
            let base = solve_cash(bank, sys.r).unwrap();
            worst_rel = worst_rel.max((c - base).abs() / base);
        }
    }
    let pass_c = worst_foc < 1e-10 && worst_rel < 0.05;
    report(
        "9c loss on every shock",
        pass_c,
        &format!("max FOC residual {worst_foc:.2e}, max relative gap to base cash {:.2}% (mean shock <= 0.05)", 100.0 * worst_rel),
    );

    let pass = pass_a && pass_b && pass_c;
    report("9 extensions", pass, &format!("a: {pass_a}, b: {pass_b}, c: {pass_c}"));
    assert!(pass);
}

#[test]
fn criterion_10_determinism() {
    let sys = mc_system();
    let dec = solve_decentralized(&sys).unwrap();
    let runs: Vec<SimulationBatch> = [1, 4, 8]
        .iter()
        .map(|&w| simulate_paths_with(&sys, &dec.allocation, 20_000, 77, false, Some(w)).unwrap())
        .collect();
    let pass = runs.windows(2).all(|p| p[0] == p[1]);
    report(
        "10 determinism across 1, 4 and 8 workers",
        pass,
        &format!("mean log wealth bank 1 = {:?}", runs[0].summary.banks[0].log_wealth.mean),
    );
    assert!(pass);
}
