//! Liquidity-shock laws: tail, density, density slope and the inverses the
//! solvers need.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Relative slack above `f(0)` that still counts as `f(0)` in [`ShockDistribution::pdf_inverse`].
pub const CORNER_CLAMP: f64 = 1e-12;

/// Number of grid points in [`ShockDistribution::check_density_condition`].
const DENSITY_GRID: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ShockDistribution {
    /// Mean `lambda`.
    Exponential { lambda: f64 },
    /// Density `(1/alpha - 1) x0^(1/alpha - 1) / (x + x0)^(1/alpha)`, `alpha` in (0, 1).
    #[serde(rename = "power")]
    PowerLaw { alpha: f64, x0: f64 },
}

/// Outcome of checking `f/F̄ + 3f'/f - f''/f' < 0` on `[0, ∞)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DensityCheck {
    pub holds: bool,
    /// Supremum of the analytic expression over `x >= 0`.
    pub analytic_sup: f64,
    /// Largest value seen on the cross-check grid over `[0, 20 * scale]`.
    pub grid_max: f64,
}

impl ShockDistribution {
    pub fn exponential(lambda: f64) -> Self {
        ShockDistribution::Exponential { lambda }
    }

    pub fn power_law(alpha: f64, x0: f64) -> Self {
        ShockDistribution::PowerLaw { alpha, x0 }
    }

    /// `None` when the parameters are admissible, else a reason.
    pub fn validate(&self) -> Option<String> {
        match *self {
            ShockDistribution::Exponential { lambda } => {
                (!(lambda > 0.0 && lambda.is_finite())).then(|| format!("lambda must be > 0, got {lambda}"))
            }
            ShockDistribution::PowerLaw { alpha, x0 } => {
                if !(alpha > 0.0 && alpha < 1.0) {
                    Some(format!("alpha must lie in (0, 1), got {alpha}"))
                } else if !(x0 > 0.0 && x0.is_finite()) {
                    Some(format!("x0 must be > 0, got {x0}"))
                } else {
                    None
                }
            }
        }
    }

    /// Natural length scale: the mean when it exists, `x0` otherwise.
    pub fn scale(&self) -> f64 {
        match *self {
            ShockDistribution::Exponential { lambda } => lambda,
            ShockDistribution::PowerLaw { alpha, x0 } => {
                let a = 1.0 / alpha;
                if a > 2.0 {
                    x0 / (a - 2.0)
                } else {
                    x0
                }
            }
        }
    }

    pub fn ccdf(&self, x: f64) -> Result<f64> {
        check_x(x)?;
        Ok(self.tail(x))
    }

    pub fn pdf(&self, x: f64) -> Result<f64> {
        check_x(x)?;
        Ok(self.density(x))
    }

    pub fn pdf_derivative(&self, x: f64) -> Result<f64> {
        check_x(x)?;
        Ok(self.slope(x))
    }

    pub fn pdf_second_derivative(&self, x: f64) -> Result<f64> {
        check_x(x)?;
        Ok(self.curvature(x))
    }

    /// Shock size at which the density equals `y`.
    ///
    /// Levels slightly above `f(0)` (within [`CORNER_CLAMP`] relative) map to 0;
    /// anything larger has no preimage and the caller must take the corner.
    pub fn pdf_inverse(&self, y: f64) -> Result<f64> {
        if !(y > 0.0) {
            return domain(format!("density level must be > 0, got {y}"));
        }
        let f0 = self.density(0.0);
        if y >= f0 {
            if y <= f0 * (1.0 + CORNER_CLAMP) {
                return Ok(0.0);
            }
            return Err(Error::NoPreimage { level: y, f0 });
        }
        let log_ratio = (f0 / y).ln();
        Ok(match *self {
            ShockDistribution::Exponential { lambda } => lambda * log_ratio,
            ShockDistribution::PowerLaw { alpha, x0 } => x0 * (alpha * log_ratio).exp_m1(),
        })
    }

    /// Same as [`pdf_inverse`](Self::pdf_inverse) but by bisection on the density
    /// alone, for laws without a closed-form inverse.
    pub fn pdf_inverse_bisect(&self, y: f64) -> Result<f64> {
        if !(y > 0.0) {
            return domain(format!("density level must be > 0, got {y}"));
        }
        let f0 = self.density(0.0);
        if y >= f0 {
            if y <= f0 * (1.0 + CORNER_CLAMP) {
                return Ok(0.0);
            }
            return Err(Error::NoPreimage { level: y, f0 });
        }
        invert_decreasing(|x| self.density(x), y, self.scale())
    }

    /// `F̄⁻¹(p)` for `p` in (0, 1].
    pub fn ccdf_inverse(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p <= 1.0) {
            return domain(format!("tail probability must lie in (0, 1], got {p}"));
        }
        Ok(self.tail_inverse(p))
    }

    /// Inverse-CDF draw from a uniform in the open unit interval.
    pub fn sample(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return domain(format!("uniform must lie in (0, 1), got {u}"));
        }
        Ok(self.tail_inverse(u))
    }

    /// Closed form of `f/F̄ + 3f'/f - f''/f'` at `x`.
    pub fn density_condition(&self, x: f64) -> Result<f64> {
        check_x(x)?;
        Ok(match *self {
            ShockDistribution::Exponential { lambda } => -1.0 / lambda,
            ShockDistribution::PowerLaw { alpha, x0 } => -1.0 / (alpha * (x + x0)),
        })
    }

    pub fn check_density_condition(&self) -> DensityCheck {
        // Exponential: constant -1/λ. Power: -a/(x+x0) increases to 0 but never reaches it.
        let analytic_sup = match *self {
            ShockDistribution::Exponential { lambda } => -1.0 / lambda,
            ShockDistribution::PowerLaw { .. } => 0.0,
        };
        let hi = 20.0 * self.scale();
        let grid_max = (0..DENSITY_GRID)
            .map(|k| {
                let x = hi * k as f64 / (DENSITY_GRID - 1) as f64;
                let (f, fp, fpp) = (self.density(x), self.slope(x), self.curvature(x));
                f / self.tail(x) + 3.0 * fp / f - fpp / fp
            })
            .fold(f64::NEG_INFINITY, f64::max);
        DensityCheck {
            holds: grid_max < 0.0 && analytic_sup <= 0.0,
            analytic_sup,
            grid_max,
        }
    }

    pub(crate) fn tail(&self, x: f64) -> f64 {
        match *self {
            ShockDistribution::Exponential { lambda } => (-x / lambda).exp(),
            ShockDistribution::PowerLaw { alpha, x0 } => {
                let a = 1.0 / alpha;
                (-(a - 1.0) * (x / x0).ln_1p()).exp()
            }
        }
    }

    pub(crate) fn density(&self, x: f64) -> f64 {
        match *self {
            ShockDistribution::Exponential { lambda } => (-x / lambda).exp() / lambda,
            ShockDistribution::PowerLaw { alpha, x0 } => {
                let a = 1.0 / alpha;
                (a - 1.0) / x0 * (-a * (x / x0).ln_1p()).exp()
            }
        }
    }

    pub(crate) fn slope(&self, x: f64) -> f64 {
        match *self {
            ShockDistribution::Exponential { lambda } => -(-x / lambda).exp() / (lambda * lambda),
            ShockDistribution::PowerLaw { alpha, x0 } => {
                let a = 1.0 / alpha;
                -a * (a - 1.0) / (x0 * x0) * (-(a + 1.0) * (x / x0).ln_1p()).exp()
            }
        }
    }

    pub(crate) fn curvature(&self, x: f64) -> f64 {
        match *self {
            ShockDistribution::Exponential { lambda } => (-x / lambda).exp() / lambda.powi(3),
            ShockDistribution::PowerLaw { alpha, x0 } => {
                let a = 1.0 / alpha;
                a * (a + 1.0) * (a - 1.0) / x0.powi(3) * (-(a + 2.0) * (x / x0).ln_1p()).exp()
            }
        }
    }

    fn tail_inverse(&self, p: f64) -> f64 {
        match *self {
            ShockDistribution::Exponential { lambda } => -lambda * p.ln(),
            ShockDistribution::PowerLaw { alpha, x0 } => {
                let a = 1.0 / alpha;
                x0 * (-p.ln() / (a - 1.0)).exp_m1()
            }
        }
    }
}

fn check_x(x: f64) -> Result<()> {
    if x >= 0.0 {
        Ok(())
    } else {
        domain(format!("shock size must be >= 0, got {x}"))
    }
}

/// Solves `g(x) = target` for a decreasing `g` with `g(0) >= target`, by
/// doubling the bracket `[0, 2^k scale]` and bisecting.
pub fn invert_decreasing<G: Fn(f64) -> f64>(g: G, target: f64, scale: f64) -> Result<f64> {
    if g(0.0) < target {
        return domain(format!("target {target} above g(0)"));
    }
    let mut hi = scale.max(f64::MIN_POSITIVE);
    let mut doublings = 0;
    while g(hi) > target {
        hi *= 2.0;
        doublings += 1;
        if doublings > 2000 || !hi.is_finite() {
            return Err(Error::NonConvergence {
                what: "bracket expansion".into(),
                iterations: doublings,
                last: Some(vec![hi]),
            });
        }
    }
    let mut lo = 0.0;
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
