//! Exact event-driven Monte Carlo of the wealth dynamics.
//!
//! Between shocks wealth grows deterministically, so paths are simulated
//! shock by shock with no time discretization. Log-wealth is tracked to keep
//! long horizons representable.
//!
//! Path `k` draws from `ChaCha8Rng::seed_from_u64(seed)` on stream `k`
//! (rand_chacha 0.9.0). Paths are grouped into fixed chunks of
//! [`CHUNK_PATHS`] whose summaries are merged in chunk order, so results do
//! not depend on the number of worker threads.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::model::{growth_rate, utility, Allocation, SystemParams};

pub const CHUNK_PATHS: usize = 1024;

/// Environment variable consulted when no worker count is given.
pub const THREADS_ENV: &str = "INTERBANK_EQ_THREADS";

/// Uniform on the open interval `(0, 1)` from the top 53 bits.
fn open_uniform(rng: &mut ChaCha8Rng) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Running mean and variance, mergeable in a fixed order.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Welford {
    pub count: u64,
    pub mean: f64,
    m2: f64,
}

impl Welford {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(&mut self, o: &Welford) {
        if o.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *o;
            return;
        }
        let n = (self.count + o.count) as f64;
        let d = o.mean - self.mean;
        self.mean += d * o.count as f64 / n;
        self.m2 += o.m2 + d * d * self.count as f64 * o.count as f64 / n;
        self.count += o.count;
    }

    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    pub fn std_error(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            (self.variance() / self.count as f64).sqrt()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShockEvent {
    pub time: f64,
    pub bank: usize,
    pub shock_size: f64,
    pub shortage: bool,
    /// Wealth of the shocked bank right after the event.
    pub wealth_after: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationPath {
    pub path_id: u64,
    pub events: Vec<ShockEvent>,
    pub terminal_wealths: Vec<f64>,
    pub log_terminal: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BankSummary {
    pub log_wealth: Welford,
    pub utility: Welford,
    /// Shortages per path.
    pub shortages: Welford,
    pub shocks: u64,
    /// `count[k]` paths saw exactly `k` shock arrivals.
    pub shock_count_hist: Vec<u64>,
}

impl BankSummary {
    fn new() -> Self {
        BankSummary {
            log_wealth: Welford::default(),
            utility: Welford::default(),
            shortages: Welford::default(),
            shocks: 0,
            shock_count_hist: Vec::new(),
        }
    }

    fn merge(&mut self, o: &BankSummary) {
        self.log_wealth.merge(&o.log_wealth);
        self.utility.merge(&o.utility);
        self.shortages.merge(&o.shortages);
        self.shocks += o.shocks;
        if self.shock_count_hist.len() < o.shock_count_hist.len() {
            self.shock_count_hist.resize(o.shock_count_hist.len(), 0);
        }
        for (a, b) in self.shock_count_hist.iter_mut().zip(&o.shock_count_hist) {
            *a += b;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationSummary {
    pub banks: Vec<BankSummary>,
    /// `Σ_i log X_T^i` per path.
    pub sum_log_wealth: Welford,
    /// System log-wealth lost per shortage event.
    pub system_drop: Welford,
    pub min_terminal_wealth: f64,
    /// Utility exponents the utility accumulators were computed with.
    pub gammas: Vec<f64>,
}

impl SimulationSummary {
    fn new(gammas: Vec<f64>) -> Self {
        SimulationSummary {
            banks: (0..gammas.len()).map(|_| BankSummary::new()).collect(),
            sum_log_wealth: Welford::default(),
            system_drop: Welford::default(),
            min_terminal_wealth: f64::INFINITY,
            gammas,
        }
    }

    fn merge(&mut self, o: &SimulationSummary) {
        for (a, b) in self.banks.iter_mut().zip(&o.banks) {
            a.merge(b);
        }
        self.sum_log_wealth.merge(&o.sum_log_wealth);
        self.system_drop.merge(&o.system_drop);
        self.min_terminal_wealth = self.min_terminal_wealth.min(o.min_terminal_wealth);
    }

    pub fn total_shortages(&self) -> f64 {
        self.banks.iter().map(|b| b.shortages.mean * b.shortages.count as f64).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationBatch {
    pub seed: u64,
    pub n_paths: usize,
    pub horizon: f64,
    pub summary: SimulationSummary,
    pub paths: Option<Vec<SimulationPath>>,
}

/// Everything one path needs, precomputed from the system and allocation.
struct Dynamics<'a> {
    system: &'a SystemParams,
    alloc: &'a Allocation,
    growth: Vec<f64>,
    /// `log(1 - φ_j w_ij)` at `[j][i]`, with `log(1 - η_j)` on the diagonal.
    log_hit: Vec<Vec<f64>>,
}

impl<'a> Dynamics<'a> {
    fn new(system: &'a SystemParams, alloc: &'a Allocation) -> Self {
        let n = system.n();
        let growth = (0..n).map(|i| growth_rate(system, alloc, i)).collect();
        let log_hit = (0..n)
            .map(|j| {
                let b = &system.banks[j];
                (0..n)
                    .map(|i| {
                        if i == j {
                            (-b.eta).ln_1p()
                        } else {
                            (-b.phi * alloc.weights[i][j]).ln_1p()
                        }
                    })
                    .collect()
            })
            .collect();
        Dynamics {
            system,
            alloc,
            growth,
            log_hit,
        }
    }

    fn run(&self, path_id: u64, seed: u64, acc: &mut SimulationSummary, keep: bool) -> Option<SimulationPath> {
        let sys = self.system;
        let n = sys.n();
        let horizon = sys.horizon;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(path_id);
        let mut arrival: Vec<f64> = sys
            .banks
            .iter()
            .map(|b| {
                if b.theta > 0.0 {
                    -open_uniform(&mut rng).ln() / b.theta
                } else {
                    f64::INFINITY
                }
            })
            .collect();
        let mut lw: Vec<f64> = sys.initial_wealth.iter().map(|x| x.ln()).collect();
        let mut now = 0.0;
        let mut shocks = vec![0usize; n];
        let mut shortages = vec![0u32; n];
        let mut events = Vec::new();
        loop {
            let (j, t) = arrival
                .iter()
                .copied()
                .enumerate()
                .fold((usize::MAX, f64::INFINITY), |best, (k, t)| if t < best.1 { (k, t) } else { best });
            if j == usize::MAX || t > horizon {
                break;
            }
            for (l, g) in lw.iter_mut().zip(&self.growth) {
                *l += g * (t - now);
            }
            now = t;
            let bank = &sys.banks[j];
            let zeta = bank.shock.sample(open_uniform(&mut rng)).unwrap_or(f64::INFINITY);
            let shortage = zeta > self.alloc.cash[j];
            shocks[j] += 1;
            if shortage {
                shortages[j] += 1;
                let mut drop = 0.0;
                for (l, h) in lw.iter_mut().zip(&self.log_hit[j]) {
                    *l += h;
                    drop -= h;
                }
                acc.system_drop.push(drop);
            }
            if keep {
                events.push(ShockEvent {
                    time: t,
                    bank: j,
                    shock_size: zeta,
                    shortage,
                    wealth_after: lw[j].exp(),
                });
            }
            arrival[j] = t - open_uniform(&mut rng).ln() / bank.theta;
        }
        let mut sum_log = 0.0;
        let mut terminal = Vec::with_capacity(if keep { n } else { 0 });
        for i in 0..n {
            let l = lw[i] + self.growth[i] * (horizon - now);
            lw[i] = l;
            let x = l.exp();
            acc.min_terminal_wealth = acc.min_terminal_wealth.min(x);
            let b = &mut acc.banks[i];
            b.log_wealth.push(l);
            b.utility.push(utility(x, sys.banks[i].gamma));
            b.shortages.push(shortages[i] as f64);
            b.shocks += shocks[i] as u64;
            if b.shock_count_hist.len() <= shocks[i] {
                b.shock_count_hist.resize(shocks[i] + 1, 0);
            }
            b.shock_count_hist[shocks[i]] += 1;
            sum_log += l;
            if keep {
                terminal.push(x);
            }
        }
        acc.sum_log_wealth.push(sum_log);
        keep.then_some(SimulationPath {
            path_id,
            events,
            terminal_wealths: terminal,
            log_terminal: lw,
        })
    }
}

fn worker_count(workers: Option<usize>) -> Option<usize> {
    workers.or_else(|| std::env::var(THREADS_ENV).ok()?.parse().ok()).filter(|&k| k > 0)
}

pub fn simulate_paths(
    system: &SystemParams,
    alloc: &Allocation,
    n_paths: usize,
    seed: u64,
    store_full: bool,
) -> Result<SimulationBatch> {
    simulate_paths_with(system, alloc, n_paths, seed, store_full, None)
}

/// As [`simulate_paths`] on `workers` threads; `None` reads [`THREADS_ENV`]
/// and otherwise uses the global pool.
pub fn simulate_paths_with(
    system: &SystemParams,
    alloc: &Allocation,
    n_paths: usize,
    seed: u64,
    store_full: bool,
    workers: Option<usize>,
) -> Result<SimulationBatch> {
    if system.initial_wealth.len() != system.n() || system.initial_wealth.iter().any(|&x| !(x > 0.0)) {
        return domain("need one positive initial wealth per bank");
    }
    if !(system.horizon >= 0.0 && system.horizon.is_finite()) {
        return domain(format!("horizon must be finite and >= 0, got {}", system.horizon));
    }
    alloc.check_admissible(system)?;
    let dynamics = Dynamics::new(system, alloc);
    let gammas: Vec<f64> = system.banks.iter().map(|b| b.gamma).collect();
    let chunks = n_paths.div_ceil(CHUNK_PATHS);
    let run_chunk = |k: usize| {
        let mut acc = SimulationSummary::new(gammas.clone());
        let mut paths = Vec::new();
        let end = ((k + 1) * CHUNK_PATHS).min(n_paths);
        for p in k * CHUNK_PATHS..end {
            if let Some(path) = dynamics.run(p as u64, seed, &mut acc, store_full) {
                paths.push(path);
            }
        }
        (acc, paths)
    };
    let parts: Vec<(SimulationSummary, Vec<SimulationPath>)> = match worker_count(workers) {
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .map_err(|e| Error::Domain(format!("thread pool: {e}")))?
            .install(|| (0..chunks).into_par_iter().map(run_chunk).collect()),
        None => (0..chunks).into_par_iter().map(run_chunk).collect(),
    };
    let mut summary = SimulationSummary::new(gammas);
    let mut paths = store_full.then(Vec::new);
    for (acc, p) in parts {
        summary.merge(&acc);
        if let Some(all) = paths.as_mut() {
            all.extend(p);
        }
    }
    Ok(SimulationBatch {
        seed,
        n_paths,
        horizon: system.horizon,
        summary,
        paths,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
}

/// Sample mean and standard error of each bank's terminal utility.
pub fn estimate_value_mc(batch: &SimulationBatch, system: &SystemParams) -> Result<Vec<McEstimate>> {
    let s = &batch.summary;
    let gammas: Vec<f64> = system.banks.iter().map(|b| b.gamma).collect();
    if gammas != s.gammas {
        return domain("batch was simulated for different utilities");
    }
    if batch.n_paths > 0 && !(s.min_terminal_wealth > 0.0) {
        return Err(Error::InvariantBreach(format!(
            "terminal wealth {} is not positive",
            s.min_terminal_wealth
        )));
    }
    Ok(s.banks
        .iter()
        .map(|b| McEstimate {
            mean: b.utility.mean,
            std_error: b.utility.std_error(),
        })
        .collect())
}

/// Shortages per unit time per bank, with their standard errors.
pub fn empirical_shortage_rate(batch: &SimulationBatch) -> Vec<McEstimate> {
    let h = batch.horizon;
    batch
        .summary
        .banks
        .iter()
        .map(|b| {
            if h == 0.0 {
                McEstimate { mean: 0.0, std_error: 0.0 }
            } else {
                McEstimate {
                    mean: b.shortages.mean / h,
                    std_error: b.shortages.std_error() / h,
                }
            }
        })
        .collect()
}

pub const PATH_CSV_HEADER: &str = "path_id,time,bank,shock_size,shortage,wealth_after";

/// One row per shock event; banks are 1-based.
pub fn paths_csv(paths: &[SimulationPath]) -> String {
    let mut out = String::from(PATH_CSV_HEADER);
    out.push('\n');
    for p in paths {
        for e in &p.events {
            out.push_str(&format!(
                "{},{:?},{},{:?},{},{:?}\n",
                p.path_id,
                e.time,
                e.bank + 1,
                e.shock_size,
                e.shortage,
                e.wealth_after
            ));
        }
    }
    out
}
