#![allow(dead_code)]

use std::io::Write;

use interbank_eq::{BankParams, ShockDistribution, SystemParams};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Draw(ChaCha8Rng);

impl Draw {
    pub fn new(seed: u64) -> Self {
        Draw(ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn unit(&mut self) -> f64 {
        ((self.0.next_u64() >> 11) as f64 + 0.5) / (1u64 << 53) as f64
    }

    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit()
    }

    pub fn int(&mut self, lo: usize, hi: usize) -> usize {
        lo + (self.0.next_u64() % (hi - lo + 1) as u64) as usize
    }

    /// Log-utility bank with exponential shocks.
    pub fn log_bank(&mut self) -> BankParams {
        BankParams {
            mu: self.range(0.01, 0.06),
            phi: self.range(0.2, 0.8),
            eta: self.range(0.1, 0.8),
            theta: self.range(0.03, 0.2),
            gamma: 1.0,
            shock: ShockDistribution::exponential(self.range(0.5, 2.0)),
        }
    }

    /// Any valid bank: mixed utilities and shock families.
    pub fn any_bank(&mut self) -> BankParams {
        let mut b = self.log_bank();
        if self.unit() < 0.5 {
            b.gamma = self.range(0.4, 3.0);
        }
        if self.unit() < 0.4 {
            b.shock = ShockDistribution::power_law(self.range(0.25, 0.6), self.range(0.5, 2.0));
        }
        b
    }

    pub fn system(&mut self, n: usize, log_only: bool) -> SystemParams {
        let banks = (0..n).map(|_| if log_only { self.log_bank() } else { self.any_bank() }).collect();
        SystemParams {
            r: self.range(0.005, 0.05),
            horizon: 1.0,
            banks,
            initial_wealth: (0..n).map(|_| self.range(0.5, 2.0)).collect(),
        }
    }
}

/// Writes past the test harness's output capture so the line always shows.
pub fn report(label: &str, pass: bool, detail: &str) {
    let status = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "[{status}] {label}: {detail}");
}
