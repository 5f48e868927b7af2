use std::f64::consts::E;

use crate::error::{Error, Result};

const INV_E: f64 = 1.0 / E;

/// Lower branch `W_{-1}` of the Lambert W function on `[-1/e, 0)`.
pub fn lambert_w_minus1(x: f64) -> Result<f64> {
    if !(-INV_E..0.0).contains(&x) {
        return Err(Error::OutOfDomain {
            value: x,
            domain: "[-1/e, 0)",
        });
    }
    let branch_gap = 1.0 + E * x;
    if branch_gap <= 1e-15 {
        return Ok(-1.0);
    }
    let mut w = if branch_gap < 0.25 {
        // series around the branch point in p = -sqrt(2(1 + e x))
        let p = -(2.0 * branch_gap).sqrt();
        -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p
    } else {
        let l1 = (-x).ln();
        l1 - (-l1).ln()
    };
    for _ in 0..100 {
        let ew = w.exp();
        let f = w * ew - x;
        let wp1 = w + 1.0;
        if wp1.abs() < 1e-300 {
            break;
        }
        let step = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1));
        let next = (w - step).min(-1.0);
        let done = (next - w).abs() <= 1e-16 * w.abs();
        w = next;
        if done {
            break;
        }
    }
    Ok(w)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalvingThreshold {
    /// `e^{-c W_{-1}(-ε)}`, where `n = (ln n / (cε))^c` holds with equality.
    pub exact: f64,
    /// `(4/ε · ln(4/ε))^c`.
    pub sufficient: f64,
}

/// Smallest `n` from which `n >= (ln n / (cε))^c` holds, and the closed
/// form sufficient bound.
pub fn halving_threshold(epsilon: f64, c: u32) -> Result<HalvingThreshold> {
    if c == 0 {
        return Err(Error::InvalidParameter("c must be at least 1".into()));
    }
    let cf = c as f64;
    let top = (-cf).exp();
    if !(epsilon > 0.0 && epsilon <= top * (1.0 + 1e-15)) {
        return Err(Error::OutOfDomain {
            value: epsilon,
            domain: "(0, e^-c]",
        });
    }
    let w = lambert_w_minus1((-epsilon).max(-INV_E))?;
    let four = 4.0 / epsilon;
    Ok(HalvingThreshold {
        exact: (-cf * w).exp(),
        sufficient: (four * four.ln()).powf(cf),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn branch_point() {
        assert_eq!(lambert_w_minus1(-INV_E).unwrap(), -1.0);
    }

    #[test]
    fn constructed_fixed_point() {
        let x = -2.0 * (-2.0f64).exp();
        assert!((lambert_w_minus1(x).unwrap() + 2.0).abs() < 1e-12);
    }

    #[test]
    fn residual_at_minus_a_tenth() {
        let w = lambert_w_minus1(-0.1).unwrap();
        assert!((w * w.exp() + 0.1).abs() <= 1e-12);
        assert!(w <= -1.0);
    }

    #[test]
    fn domain_errors() {
        assert!(lambert_w_minus1(0.0).is_err());
        assert!(lambert_w_minus1(-0.5).is_err());
        assert!(lambert_w_minus1(f64::NAN).is_err());
        assert!(halving_threshold(0.5, 1).is_err());
        assert!(halving_threshold(0.1, 0).is_err());
    }

    #[test]
    fn residual_over_the_domain() {
        let mut prev = -1.0;
        for i in 1..=4000 {
            let t = i as f64 / 4000.0;
            // dense near both ends
            let x = -INV_E * (1.0 - t).powi(3).max(1e-300);
            let x = if x == 0.0 { -1e-300 } else { x };
            let w = lambert_w_minus1(x).unwrap();
            assert!((w * w.exp() - x).abs() <= 1e-12, "x={x} w={w}");
            assert!(w <= prev + 1e-12);
            prev = w;
        }
    }

    #[test]
    fn threshold_branch_point_arithmetic() {
        let t = halving_threshold(INV_E, 1).unwrap();
        assert!((t.exact - E).abs() < 1e-9);
        assert!((t.sufficient - 4.0 * E * (4.0 * E).ln()).abs() < 1e-9);
        assert!(t.sufficient > t.exact);
    }

    #[test]
    fn threshold_plug_back_and_sufficiency() {
        for c in 1..=3u32 {
            let cf = c as f64;
            for j in 0..40 {
                let eps = (-cf).exp() * 0.8f64.powi(j);
                let t = halving_threshold(eps, c).unwrap();
                let rhs = (t.exact.ln() / (cf * eps)).powf(cf);
                assert!((t.exact - rhs).abs() <= 1e-8 * t.exact, "c={c} eps={eps}");
                assert!(t.exact <= t.sufficient);
                let n = t.sufficient;
                assert!(n >= (n.ln() / (cf * eps)).powf(cf));
            }
        }
    }
}
