//! Special functions behind the oscillator wavefunctions and closed-form
//! Wigner functions.
//!
//! Polynomials are evaluated by upward three-term recurrence. Normalisation
//! constants go through [`log_factorial`] so nothing overflows for the
//! supported orders.

use crate::error::{Error, Result};

/// Largest polynomial order accepted by the evaluators.
pub const MAX_ORDER: u32 = 64;

/// Largest argument accepted by [`log_factorial`].
pub const MAX_LOG_FACTORIAL: u64 = 1_000_000;

// Below this, ln(n!) is summed directly; above, Stirling's series is used.
const LOG_FACTORIAL_SERIES_FROM: u64 = 256;

fn check_order(what: &str, n: u32) -> Result<()> {
    if n > MAX_ORDER {
        return Err(Error::Domain(format!(
            "{what} = {n} exceeds supported maximum {MAX_ORDER}"
        )));
    }
    Ok(())
}

/// Physicists' Hermite polynomial `H_n(x)`.
pub fn hermite_phys(n: u32, x: f64) -> Result<f64> {
    check_order("Hermite order", n)?;
    if !x.is_finite() {
        return Err(Error::Domain(format!("Hermite argument {x} is not finite")));
    }
    Ok(hermite_unchecked(n, x))
}

pub(crate) fn hermite_unchecked(n: u32, x: f64) -> f64 {
    let mut prev = 1.0;
    if n == 0 {
        return prev;
    }
    let mut cur = 2.0 * x;
    for k in 1..n {
        let next = 2.0 * x * cur - 2.0 * f64::from(k) * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Associated Laguerre polynomial `L_n^k(x)` for `x >= 0`.
pub fn assoc_laguerre(n: u32, k: u32, x: f64) -> Result<f64> {
    check_order("Laguerre order", n)?;
    check_order("Laguerre parameter", k)?;
    if !(x >= 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!(
            "Laguerre argument {x} must be finite and non-negative"
        )));
    }
    Ok(laguerre_unchecked(n, k, x))
}

pub(crate) fn laguerre_unchecked(n: u32, k: u32, x: f64) -> f64 {
    let k = f64::from(k);
    let mut prev = 1.0;
    if n == 0 {
        return prev;
    }
    let mut cur = 1.0 + k - x;
    for j in 1..n {
        let j = f64::from(j);
        let next = ((2.0 * j + 1.0 + k - x) * cur - (j + k) * prev) / (j + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// `ln(n!)`, accurate to about 1e-12 relative over the supported range.
pub fn log_factorial(n: u64) -> Result<f64> {
    if n > MAX_LOG_FACTORIAL {
        return Err(Error::Domain(format!(
            "log_factorial argument {n} exceeds {MAX_LOG_FACTORIAL}"
        )));
    }
    Ok(log_factorial_unchecked(n))
}

pub(crate) fn log_factorial_unchecked(n: u64) -> f64 {
    if n < LOG_FACTORIAL_SERIES_FROM {
        // exact summation, in order
        return (2..=n).map(|k| (k as f64).ln()).sum();
    }
    let x = (n + 1) as f64;
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    // Stirling series for ln Γ(x)
    let series =
        inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 * (1.0 / 1260.0 - inv2 * (1.0 / 1680.0))));
    (x - 0.5) * x.ln() - x + 0.5 * (2.0 * std::f64::consts::PI).ln() + series
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hermite_low_orders() {
        assert_eq!(hermite_phys(0, 3.7).unwrap(), 1.0);
        assert_eq!(hermite_phys(1, 2.0).unwrap(), 4.0);
        // H_3(x) = 8x^3 - 12x
        assert_eq!(hermite_phys(3, 1.0).unwrap(), -4.0);
        let x: f64 = 0.37;
        let h3 = 8.0 * x.powi(3) - 12.0 * x;
        assert!((hermite_phys(3, x).unwrap() - h3).abs() < 1e-14);
    }

    #[test]
    fn hermite_rejects_bad_input() {
        assert!(matches!(hermite_phys(65, 0.0), Err(Error::Domain(_))));
        assert!(matches!(hermite_phys(2, f64::NAN), Err(Error::Domain(_))));
        assert!(hermite_phys(64, 1.0).is_ok());
    }

    #[test]
    fn laguerre_low_orders() {
        for k in [0, 3, 17] {
            assert_eq!(assoc_laguerre(0, k, 5.0).unwrap(), 1.0);
        }
        assert_eq!(assoc_laguerre(1, 0, 2.0).unwrap(), -1.0);
        // L_2^1(x) = x^2/2 - 3x + 3
        let expanded = |x: f64| x * x / 2.0 - 3.0 * x + 3.0;
        assert!((assoc_laguerre(2, 1, 1.0).unwrap() - 0.5).abs() < 1e-15);
        assert!((assoc_laguerre(2, 1, 2.7).unwrap() - expanded(2.7)).abs() < 1e-13);
    }

    #[test]
    fn laguerre_rejects_bad_input() {
        assert!(assoc_laguerre(2, 0, -0.1).is_err());
        assert!(assoc_laguerre(65, 0, 1.0).is_err());
        assert!(assoc_laguerre(1, 65, 1.0).is_err());
    }

    #[test]
    fn log_factorial_values() {
        assert_eq!(log_factorial(0).unwrap(), 0.0);
        assert_eq!(log_factorial(1).unwrap(), 0.0);
        let direct: f64 = (1..=10).map(|k| (k as f64).ln()).sum();
        assert!((log_factorial(10).unwrap() - 15.104412573075516).abs() < 1e-13);
        assert!((direct - 15.104412573075516).abs() < 1e-13);
        assert!(log_factorial(MAX_LOG_FACTORIAL + 1).is_err());
    }

    #[test]
    fn log_factorial_exact_up_to_20() {
        let mut fact: u64 = 1;
        for n in 0..=20u64 {
            if n > 0 {
                fact *= n;
            }
            let got = log_factorial(n).unwrap().exp();
            let rel = (got - fact as f64).abs() / fact as f64;
            assert!(rel < 1e-12, "n = {n}: rel err {rel:e}");
        }
    }

    #[test]
    fn log_factorial_series_joins_summation() {
        // Both branches evaluated at the switch-over point.
        let n = LOG_FACTORIAL_SERIES_FROM;
        let summed: f64 = (2..=n).map(|k| (k as f64).ln()).sum();
        let series = log_factorial_unchecked(n);
        assert!(((summed - series) / summed).abs() < 1e-13);
        // ln(10^6 !) from lgamma tables: 12815518.384658169
        let big = log_factorial(1_000_000).unwrap();
        assert!(((big - 12_815_518.384_658_169) / big).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn hermite_recurrence_residual(x in -10.0f64..10.0, n in 1u32..20) {
            let hm = hermite_phys(n - 1, x).unwrap();
            let h = hermite_phys(n, x).unwrap();
            let hp = hermite_phys(n + 1, x).unwrap();
            let scale = hp.abs().max((2.0 * x * h).abs()).max((2.0 * f64::from(n) * hm).abs()).max(1.0);
            let residual = hp - 2.0 * x * h + 2.0 * f64::from(n) * hm;
            prop_assert!(residual.abs() / scale < 1e-9);
        }

        #[test]
        fn laguerre_ode_residual(x in 0.05f64..20.0, n in 1u32..20, k in 0u32..6) {
            // x y'' + (k + 1 - x) y' + n y = 0, with
            // y' = -L_{n-1}^{k+1}, y'' = L_{n-2}^{k+2}.
            let y = assoc_laguerre(n, k, x).unwrap();
            let dy = -assoc_laguerre(n - 1, k + 1, x).unwrap();
            let d2y = if n >= 2 { assoc_laguerre(n - 2, k + 2, x).unwrap() } else { 0.0 };
            let terms = [x * d2y, (f64::from(k) + 1.0 - x) * dy, f64::from(n) * y];
            let scale = terms.iter().fold(1.0f64, |m, t| m.max(t.abs()));
            let residual: f64 = terms.iter().sum();
            prop_assert!(residual.abs() / scale < 1e-8);
        }
    }
}
