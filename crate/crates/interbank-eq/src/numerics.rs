//! Scalar root finding, adaptive quadrature and the real Lambert W branches.

use crate::error::{domain, Error, Result};

const MAX_BRENT_ITER: usize = 200;

/// Root of `f` on `[a, b]` by Brent's method (inverse quadratic and secant
/// steps guarded by bisection).
///
/// Stops once `|f(x)| <= tol` or the bracket is narrower than `tol (1 + |x|)`.
pub fn find_root_bracketed<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    if !(a < b) {
        return domain(format!("need a < b, got [{a}, {b}]"));
    }
    let (mut a, mut b) = (a, b);
    let (mut fa, mut fb) = (f(a), f(b));
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() || fa.is_nan() || fb.is_nan() {
        return Err(Error::NoBracket { a, b, fa, fb });
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..MAX_BRENT_ITER {
        if fb.signum() == fc.signum() {
            (c, fc) = (a, fa);
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            (a, fa) = (b, fb);
            (b, fb) = (c, fc);
            (c, fc) = (a, fa);
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * tol * (1.0 + b.abs());
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb.abs() <= tol {
            return Ok(b);
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            if 2.0 * p < (3.0 * xm * q - (tol1 * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        (a, fa) = (b, fb);
        b += if d.abs() > tol1 { d } else { tol1.copysign(xm) };
        fb = f(b);
    }
    Err(Error::NonConvergence {
        what: "bracketed root".into(),
        iterations: MAX_BRENT_ITER,
        last: Some(vec![b]),
    })
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
// Gauss weights for XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(mid);
    let mut kron = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for k in 0..7 {
        let dx = half * XGK[k];
        let s = f(mid - dx) + f(mid + dx);
        kron += WGK[k] * s;
        if k % 2 == 1 {
            gauss += WG[k / 2] * s;
        }
    }
    (kron * half, ((kron - gauss) * half).abs())
}

/// `∫_a^b f` by adaptive Gauss-Kronrod (7/15) bisection to absolute tolerance `tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
        let (v, err) = gk15(f, a, b);
        if err <= tol || depth == 0 || b - a <= 1e-14 * (1.0 + a.abs()) {
            return v;
        }
        let m = 0.5 * (a + b);
        rec(f, a, m, 0.5 * tol, depth - 1) + rec(f, m, b, 0.5 * tol, depth - 1)
    }
    if a == b {
        return 0.0;
    }
    rec(&f, a, b, tol, 40)
}

/// Branch point of the real Lambert W function.
pub const NEG_INV_E: f64 = -0.367_879_441_171_442_33;

fn halley(x: f64, mut w: f64) -> f64 {
    for _ in 0..50 {
        let ew = w.exp();
        let g = w * ew - x;
        let wp1 = w + 1.0;
        if wp1 == 0.0 {
            break;
        }
        let step = g / (ew * wp1 - (w + 2.0) * g / (2.0 * wp1));
        w -= step;
        if step.abs() <= 1e-15 * (1.0 + w.abs()) {
            break;
        }
    }
    w
}

/// Series about the branch point in `p = sqrt(2(e x + 1))`; `sign` picks the branch.
fn branch_series(x: f64, sign: f64) -> f64 {
    let p = sign * (2.0 * (std::f64::consts::E * x + 1.0)).max(0.0).sqrt();
    -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p
}

/// Principal branch `W₀(x) ≥ -1` of the inverse of `w e^w`.
pub fn lambert_w0(x: f64) -> Result<f64> {
    if !(x >= NEG_INV_E) || x.is_infinite() {
        return domain(format!("Lambert W0 needs x >= -1/e, got {x}"));
    }
    if x == NEG_INV_E {
        return Ok(-1.0);
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    let w0 = if x < -0.25 {
        branch_series(x, 1.0)
    } else if x < 3.0 {
        x.ln_1p()
    } else {
        let l1 = x.ln();
        let l2 = l1.ln();
        l1 - l2 + l2 / l1
    };
    Ok(halley(x, w0))
}

/// Lower branch `W₋₁(x) ≤ -1`, defined for `x ∈ [-1/e, 0)`.
pub fn lambert_wm1(x: f64) -> Result<f64> {
    if !(NEG_INV_E..0.0).contains(&x) {
        return domain(format!("Lambert W-1 needs -1/e <= x < 0, got {x}"));
    }
    if x == NEG_INV_E {
        return Ok(-1.0);
    }
    let w0 = if x < -0.25 {
        branch_series(x, -1.0)
    } else {
        let l1 = (-x).ln();
        let l2 = (-l1).ln();
        l1 - l2 + l2 / l1
    };
    Ok(halley(x, w0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bisect<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64) -> f64 {
        let fa = f(a);
        for _ in 0..60 {
            let m = 0.5 * (a + b);
            if f(m).signum() == fa.signum() {
                a = m;
            } else {
                b = m;
            }
        }
        0.5 * (a + b)
    }

    #[test]
    fn brent_examples() {
        let r = find_root_bracketed(|x| x * x - 2.0, 1.0, 2.0, 1e-14).unwrap();
        assert!((r - std::f64::consts::SQRT_2).abs() < 1e-13);
        assert!(find_root_bracketed(|x| x, -1.0, 1.0, 1e-14).unwrap().abs() < 1e-14);
        assert!(matches!(
            find_root_bracketed(|x| x * x + 1.0, -1.0, 1.0, 1e-12),
            Err(Error::NoBracket { .. })
        ));
        assert!(find_root_bracketed(|x| x, 1.0, 1.0, 1e-12).is_err());
    }

    #[test]
    fn brent_matches_bisection_on_random_cubics() {
        use rand_chacha::rand_core::{RngCore, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mut unif = || (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        for _ in 0..100 {
            // x^3 + a x + b with a >= 0 is increasing: one root, so the two must agree.
            let (a, b) = (3.0 * unif(), 10.0 * unif() - 5.0);
            let p = |x: f64| (x * x + a) * x + b;
            let x = find_root_bracketed(p, -3.0, 3.0, 1e-14).unwrap();
            let y = bisect(p, -3.0, 3.0);
            assert!((x - y).abs() < 1e-13 * (1.0 + y.abs()), "{x} {y}");
        }
    }

    #[test]
    fn quadrature() {
        let v = integrate(|x| x.exp(), 0.0, 1.0, 1e-13);
        assert!((v - (std::f64::consts::E - 1.0)).abs() < 1e-13);
        let v = integrate(|u| (-u).exp() * (-u).ln_1p(), 0.0, 0.9, 1e-12);
        // ∫_0^0.9 e^-u ln(1-u) du, 30 digits.
        assert!((v - -0.358_013_116_581_574_5).abs() < 1e-12, "{v}");
        assert_eq!(integrate(|x| x, 2.0, 2.0, 1e-12), 0.0);
    }

    #[test]
    fn lambert_examples() {
        assert_eq!(lambert_w0(0.0).unwrap(), 0.0);
        assert!((lambert_w0(std::f64::consts::E).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(lambert_w0(NEG_INV_E).unwrap(), -1.0);
        assert_eq!(lambert_wm1(NEG_INV_E).unwrap(), -1.0);
        assert!(lambert_w0(-0.4).is_err());
        assert!(lambert_wm1(0.0).is_err());
        // W-1(-0.231111...) from the endogenous self-investment example.
        let x = -0.013 * 0.8 / 0.045;
        assert!((lambert_wm1(x).unwrap() - -2.296_044_576_931_846).abs() < 1e-14);
        assert!((lambert_w0(x).unwrap() - -0.317_463_148_490_377_56).abs() < 1e-15);
    }

    #[test]
    fn lambert_round_trip_grid() {
        let check = |x: f64, w: f64| assert!((w * w.exp() - x).abs() < 1e-13 * (1.0 + x.abs()), "x={x} w={w}");
        for k in 0..10_000 {
            let t = k as f64 / 9_999.0;
            let x = 10f64.powf(-12.0 + 24.0 * t);
            check(x, lambert_w0(x).unwrap());
            let y = NEG_INV_E * 10f64.powf(-12.0 * t);
            let w = lambert_w0(y).unwrap();
            assert!(w >= -1.0);
            check(y, w);
            let v = lambert_wm1(y).unwrap();
            assert!(v <= -1.0);
            check(y, v);
        }
        check(NEG_INV_E + 1e-17, lambert_w0(NEG_INV_E + 1e-17).unwrap());
    }

    proptest! {
        #[test]
        fn lambert_monotone(a in -0.3678f64..50.0, b in -0.3678f64..50.0) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(lambert_w0(lo).unwrap() <= lambert_w0(hi).unwrap());
        }
    }
}
