//! Per-pair phase-space kernels `D_ij(q, p)` for one mode.
//!
//! Every distribution here is a sesquilinear form in the state, so for
//! `ψ = Σ c_i ψ_i` the total is `Σ_ij c_i c_j* D_ij`. Conventions:
//!
//! * Wigner: `W_ij = (1/π) ∫ ψ_i(q+y) ψ_j*(q−y) e^{−2ipy} dy`
//! * Husimi: `Q_ij = (1/π) ⟨α|ψ_i⟩⟨ψ_j|α⟩`, `α = (q + ip)/√2`
//! * Kirkwood: `K_ij = (2π)^{−1/2} ψ_i(q) φ_j*(p) e^{−iqp}`; the Rivier
//!   distribution is its real part.

use std::f64::consts::{FRAC_1_PI, PI};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::phasespace::grid::ModeGrid;
use crate::specialfn::{laguerre_unchecked, log_factorial_unchecked, MAX_ORDER};
use crate::states::Primitive;

// Half-width of the coherent-state Gaussian e^{-(x-q)^2/2} and of its
// Fourier transform, past which both are below 1e-17.
const COHERENT_SUPPORT: f64 = 9.0;

const POINTWISE_AGREEMENT: f64 = 1e-10;

fn check_point(q: f64, p: f64) -> Result<()> {
    if q.is_finite() && p.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "phase-space point ({q}, {p}) is not finite"
        )))
    }
}

/// Closed-form Fock cross-Wigner function `W_mn(q, p)`.
pub fn cross_wigner_fock_closed(m: u32, n: u32, q: f64, p: f64) -> Result<Complex64> {
    if m > MAX_ORDER || n > MAX_ORDER {
        return Err(Error::Domain(format!(
            "occupations ({m}, {n}) exceed {MAX_ORDER}"
        )));
    }
    check_point(q, p)?;
    Ok(wigner_fock_closed(m, n, q, p))
}

// m >= n:
// W_mn = (−1)^n/π · sqrt(n!/m!) · (√2 (q − ip))^{m−n} · e^{−ρ} · L_n^{m−n}(2ρ)
pub(crate) fn wigner_fock_closed(m: u32, n: u32, q: f64, p: f64) -> Complex64 {
    if m < n {
        return wigner_fock_closed(n, m, q, p).conj();
    }
    let rho = q * q + p * p;
    let k = m - n;
    let sign = if n.is_multiple_of(2) { 1.0 } else { -1.0 };
    let lag = laguerre_unchecked(n, k, 2.0 * rho);
    let radial = sign
        * FRAC_1_PI
        * lag
        * (0.5 * (log_factorial_unchecked(n.into()) - log_factorial_unchecked(m.into())) - rho)
            .exp();
    if k == 0 {
        return Complex64::new(radial, 0.0);
    }
    let z = Complex64::new(q, -p) * std::f64::consts::SQRT_2;
    z.powu(k) * radial
}

/// Wigner kernel of two primitives sharing one squeeze, from the Fock
/// closed form at the scaled point `(e^r q, e^{−r} p)`.
#[inline]
fn wigner_same_squeeze(a: &Primitive, b: &Primitive, q: f64, p: f64) -> Complex64 {
    let r = a.r();
    if r == 0.0 {
        wigner_fock_closed(a.n(), b.n(), q, p)
    } else {
        wigner_fock_closed(a.n(), b.n(), r.exp() * q, (-r).exp() * p)
    }
}

/// Lattice spacing for the Wigner y-integral; resolves the product's
/// band limit plus the phase at |p| ≤ `p_abs`.
fn wigner_step(a: &Primitive, b: &Primitive, p_abs: f64) -> f64 {
    2.0 * PI / (2.0 * p_abs + a.momentum_support() + b.momentum_support())
}

fn wigner_range(a: &Primitive, b: &Primitive, q: f64) -> Option<(f64, f64)> {
    let (la, lb) = (a.position_support(), b.position_support());
    let lo = (-la - q).max(q - lb);
    let hi = (la - q).min(q + lb);
    (hi > lo).then_some((lo, hi))
}

fn wigner_lattice(a: &Primitive, b: &Primitive, q: f64, p: f64, h: f64) -> Complex64 {
    let Some((lo, hi)) = wigner_range(a, b, q) else {
        return Complex64::new(0.0, 0.0);
    };
    let (l0, l1) = ((lo / h).ceil() as i64, (hi / h).floor() as i64);
    let mut acc = Complex64::new(0.0, 0.0);
    for l in l0..=l1 {
        let y = l as f64 * h;
        acc += a.psi(q + y) * b.psi(q - y) * Complex64::from_polar(1.0, -2.0 * p * y);
    }
    acc * (h * FRAC_1_PI)
}

/// Cross-Wigner function of two primitives by direct quadrature of the
/// Wigner transform. The lattice is checked against one at half spacing.
pub fn cross_wigner_numeric(a: &Primitive, b: &Primitive, q: f64, p: f64) -> Result<Complex64> {
    a.validate()?;
    b.validate()?;
    check_point(q, p)?;
    let h = wigner_step(a, b, p.abs());
    let coarse = wigner_lattice(a, b, q, p, h);
    let fine = wigner_lattice(a, b, q, p, 0.5 * h);
    let residual = (coarse - fine).norm();
    if residual > POINTWISE_AGREEMENT * fine.norm().max(1.0) {
        return Err(Error::Numerical {
            message: format!("Wigner quadrature at ({q}, {p}) not converged"),
            achieved: residual,
        });
    }
    Ok(fine)
}

/// `⟨α|n⟩ = e^{−|α|²/2} (α*)^n / sqrt(n!)`.
#[inline]
fn coherent_fock_overlap(n: u32, q: f64, p: f64) -> Complex64 {
    let alpha_conj = Complex64::new(q, -p) * std::f64::consts::FRAC_1_SQRT_2;
    let log_mag = -0.25 * (q * q + p * p) - 0.5 * log_factorial_unchecked(n.into());
    if n == 0 {
        return Complex64::new(log_mag.exp(), 0.0);
    }
    alpha_conj.powu(n) * log_mag.exp()
}

fn coherent_step(prim: &Primitive, p_abs: f64) -> f64 {
    2.0 * PI / (p_abs + prim.momentum_support() + COHERENT_SUPPORT)
}

// ⟨α|ψ⟩ = π^{−1/4} e^{iqp/2} ∫ e^{−(x−q)²/2} ψ(x) e^{−ipx} dx
fn coherent_lattice(prim: &Primitive, q: f64, p: f64, h: f64) -> Complex64 {
    let l = prim.position_support();
    let lo = (q - COHERENT_SUPPORT).max(-l);
    let hi = (q + COHERENT_SUPPORT).min(l);
    if hi <= lo {
        return Complex64::new(0.0, 0.0);
    }
    let (l0, l1) = ((lo / h).ceil() as i64, (hi / h).floor() as i64);
    let mut acc = Complex64::new(0.0, 0.0);
    for k in l0..=l1 {
        let x = k as f64 * h;
        let d = x - q;
        acc += (-0.5 * d * d).exp() * prim.psi(x) * Complex64::from_polar(1.0, -p * x);
    }
    acc * Complex64::from_polar(h * PI.powf(-0.25), 0.5 * q * p)
}

/// Coherent-state overlap `⟨α|prim⟩` at `α = (q + ip)/√2`.
pub fn coherent_overlap(prim: &Primitive, q: f64, p: f64) -> Result<Complex64> {
    prim.validate()?;
    check_point(q, p)?;
    if !prim.is_squeezed() {
        return Ok(coherent_fock_overlap(prim.n(), q, p));
    }
    let h = coherent_step(prim, p.abs());
    let coarse = coherent_lattice(prim, q, p, h);
    let fine = coherent_lattice(prim, q, p, 0.5 * h);
    let residual = (coarse - fine).norm();
    if residual > POINTWISE_AGREEMENT * fine.norm().max(1.0) {
        return Err(Error::Numerical {
            message: format!("coherent overlap at ({q}, {p}) not converged"),
            achieved: residual,
        });
    }
    Ok(fine)
}

/// Quadrature route for `⟨α|prim⟩`, used to cross-check the Fock closed form.
pub fn coherent_overlap_numeric(prim: &Primitive, q: f64, p: f64) -> Result<Complex64> {
    prim.validate()?;
    check_point(q, p)?;
    Ok(coherent_lattice(
        prim,
        q,
        p,
        0.5 * coherent_step(prim, p.abs()),
    ))
}

/// Husimi density per `dq dp`. With `α = (q + ip)/√2` the area element is
/// `d²α = dq dp / 2`, so `(1/π) d²α` becomes `1/(2π)` here.
pub const HUSIMI_PREFACTOR: f64 = 0.5 * FRAC_1_PI;

/// Husimi pair kernel `⟨α|ψ_i⟩⟨ψ_j|α⟩ / 2π`.
pub fn husimi_term(a: &Primitive, b: &Primitive, q: f64, p: f64) -> Result<Complex64> {
    Ok(coherent_overlap(a, q, p)? * coherent_overlap(b, q, p)?.conj() * HUSIMI_PREFACTOR)
}

/// Kirkwood pair kernel `(2π)^{−1/2} ψ_i(q) φ_j*(p) e^{−iqp}`; the Rivier
/// pair term is the real part of `c_i c_j* K_ij + c_j c_i* K_ji`.
pub fn rivier_term(a: &Primitive, b: &Primitive, q: f64, p: f64) -> Result<Complex64> {
    a.validate()?;
    b.validate()?;
    check_point(q, p)?;
    Ok(kirkwood(a, b, q, p))
}

#[inline]
fn kirkwood(a: &Primitive, b: &Primitive, q: f64, p: f64) -> Complex64 {
    a.psi(q) * b.phi(p).conj() * Complex64::from_polar((2.0 * PI).powf(-0.5), -q * p)
}

/// Wigner kernel at one point, using the closed form when both
/// primitives share a squeeze and quadrature otherwise.
pub fn wigner_term(a: &Primitive, b: &Primitive, q: f64, p: f64) -> Result<Complex64> {
    a.validate()?;
    b.validate()?;
    check_point(q, p)?;
    if a.r() == b.r() {
        Ok(wigner_same_squeeze(a, b, q, p))
    } else {
        cross_wigner_numeric(a, b, q, p)
    }
}

/// Wigner kernel on a whole grid.
pub fn wigner_grid(a: &Primitive, b: &Primitive, grid: &ModeGrid) -> Vec<Complex64> {
    let np = grid.p.n;
    let mut out = vec![Complex64::new(0.0, 0.0); grid.len()];
    if a.r() == b.r() {
        out.par_chunks_mut(np).enumerate().for_each(|(iq, row)| {
            let q = grid.q.value(iq);
            for (ip, v) in row.iter_mut().enumerate() {
                *v = wigner_same_squeeze(a, b, q, grid.p.value(ip));
            }
        });
        return out;
    }
    let h = wigner_step(a, b, grid.p.abs_max());
    out.par_chunks_mut(np).enumerate().for_each(|(iq, row)| {
        let q = grid.q.value(iq);
        let Some((lo, hi)) = wigner_range(a, b, q) else {
            return;
        };
        let (l0, l1) = ((lo / h).ceil() as i64, (hi / h).floor() as i64);
        let y0 = l0 as f64 * h;
        let weights: Vec<f64> = (l0..=l1)
            .map(|l| {
                let y = l as f64 * h;
                a.psi(q + y) * b.psi(q - y)
            })
            .collect();
        for (ip, v) in row.iter_mut().enumerate() {
            let p = grid.p.value(ip);
            *v = rotating_sum(&weights, -2.0 * p * y0, -2.0 * p * h) * (h * FRAC_1_PI);
        }
    });
    out
}

/// `Σ_l w_l e^{i(θ0 + l·dθ)}`, phases advanced by complex recurrence.
#[inline]
fn rotating_sum(weights: &[f64], theta0: f64, dtheta: f64) -> Complex64 {
    let step = Complex64::from_polar(1.0, dtheta);
    let mut phase = Complex64::from_polar(1.0, theta0);
    let mut acc = Complex64::new(0.0, 0.0);
    for &w in weights {
        acc += phase * w;
        phase *= step;
    }
    acc
}

/// `⟨α|prim⟩` on a whole grid.
pub fn coherent_overlap_grid(prim: &Primitive, grid: &ModeGrid) -> Vec<Complex64> {
    let np = grid.p.n;
    let mut out = vec![Complex64::new(0.0, 0.0); grid.len()];
    if !prim.is_squeezed() {
        out.par_chunks_mut(np).enumerate().for_each(|(iq, row)| {
            let q = grid.q.value(iq);
            for (ip, v) in row.iter_mut().enumerate() {
                *v = coherent_fock_overlap(prim.n(), q, grid.p.value(ip));
            }
        });
        return out;
    }
    let h = coherent_step(prim, grid.p.abs_max());
    let l = prim.position_support();
    let norm = h * PI.powf(-0.25);
    out.par_chunks_mut(np).enumerate().for_each(|(iq, row)| {
        let q = grid.q.value(iq);
        let lo = (q - COHERENT_SUPPORT).max(-l);
        let hi = (q + COHERENT_SUPPORT).min(l);
        if hi <= lo {
            return;
        }
        let (l0, l1) = ((lo / h).ceil() as i64, (hi / h).floor() as i64);
        let x0 = l0 as f64 * h;
        let weights: Vec<f64> = (l0..=l1)
            .map(|k| {
                let x = k as f64 * h;
                let d = x - q;
                (-0.5 * d * d).exp() * prim.psi(x)
            })
            .collect();
        for (ip, v) in row.iter_mut().enumerate() {
            let p = grid.p.value(ip);
            *v = rotating_sum(&weights, -p * x0, -p * h) * Complex64::from_polar(norm, 0.5 * q * p);
        }
    });
    out
}

/// Kirkwood kernel on a whole grid.
pub fn kirkwood_grid(a: &Primitive, b: &Primitive, grid: &ModeGrid) -> Vec<Complex64> {
    let psi: Vec<f64> = grid.q.values().map(|q| a.psi(q)).collect();
    let phi: Vec<Complex64> = grid.p.values().map(|p| b.phi(p).conj()).collect();
    let scale = (2.0 * PI).powf(-0.5);
    let np = grid.p.n;
    let mut out = vec![Complex64::new(0.0, 0.0); grid.len()];
    out.par_chunks_mut(np).enumerate().for_each(|(iq, row)| {
        let q = grid.q.value(iq);
        for (ip, v) in row.iter_mut().enumerate() {
            let p = grid.p.value(ip);
            *v = psi[iq] * phi[ip] * Complex64::from_polar(scale, -q * p);
        }
    });
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn fock(n: u32) -> Primitive {
        Primitive::fock(n).unwrap()
    }

    #[test]
    fn vacuum_peaks() {
        let v = cross_wigner_numeric(&fock(0), &fock(0), 0.0, 0.0).unwrap();
        assert!((v.re - FRAC_1_PI).abs() < 1e-14 && v.im.abs() < 1e-15);
        let h = husimi_term(&fock(0), &fock(0), 0.0, 0.0).unwrap();
        assert!((h.re - 0.5 * FRAC_1_PI).abs() < 1e-15);
    }

    #[test]
    fn fock_one_matches_single_mode_factor() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let (q, p) = (rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
            let numeric = cross_wigner_numeric(&fock(1), &fock(1), q, p).unwrap();
            let expect = 2.0 / PI * (q * q + p * p - 0.5) * (-q * q - p * p).exp();
            assert!((numeric.re - expect).abs() < 1e-8 && numeric.im.abs() < 1e-8);
        }
    }

    #[test]
    fn closed_form_at_origin() {
        for n in 0..6u32 {
            let sign = if n.is_multiple_of(2) { 1.0 } else { -1.0 };
            let closed = cross_wigner_fock_closed(n, n, 0.0, 0.0).unwrap();
            assert!((closed.re - sign / PI).abs() < 1e-14);
            let numeric = cross_wigner_numeric(&fock(n), &fock(n), 0.0, 0.0).unwrap();
            assert!((closed - numeric).norm() < 1e-8);
        }
        let closed = cross_wigner_fock_closed(0, 2, 0.0, 0.0).unwrap();
        let numeric = cross_wigner_numeric(&fock(0), &fock(2), 0.0, 0.0).unwrap();
        assert!((closed - numeric).norm() < 1e-8);
    }

    #[test]
    fn zero_one_cross_term_structure() {
        // W_01 = (√2/π)(q + ip) e^{−q²−p²}
        for &(q, p) in &[(0.3, -0.8), (1.1, 0.4), (-0.5, -0.5)] {
            let w = cross_wigner_fock_closed(0, 1, q, p).unwrap();
            let expect = Complex64::new(q, p) * (2f64.sqrt() / PI) * (-q * q - p * p).exp();
            assert!((w - expect).norm() < 1e-15);
        }
    }

    #[test]
    fn closed_and_numeric_agree_randomly() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let (m, n) = (rng.random_range(0..=4u32), rng.random_range(0..=4u32));
            let (q, p) = (rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0));
            let closed = cross_wigner_fock_closed(m, n, q, p).unwrap();
            let numeric = cross_wigner_numeric(&fock(m), &fock(n), q, p).unwrap();
            assert!((closed - numeric).norm() < 1e-8, "({m},{n}) at ({q},{p})");
        }
    }

    #[test]
    fn closed_form_rejects_large_orders() {
        assert!(cross_wigner_fock_closed(65, 0, 0.0, 0.0).is_err());
        assert!(cross_wigner_fock_closed(0, 0, f64::NAN, 0.0).is_err());
    }

    #[test]
    fn squeezing_covariance_of_numeric_kernel() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for &n in &[0u32, 1, 2] {
            for &r in &[0.5, 1.0, -0.7] {
                let sq = Primitive::squeezed(n, r).unwrap();
                for _ in 0..10 {
                    let (q, p) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
                    let numeric = cross_wigner_numeric(&sq, &sq, q, p).unwrap();
                    let scaled =
                        cross_wigner_fock_closed(n, n, r.exp() * q, (-r).exp() * p).unwrap();
                    assert!((numeric - scaled).norm() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn coherent_overlap_routes_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..40 {
            let n = rng.random_range(0..=4u32);
            let (q, p) = (rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
            let closed = coherent_overlap(&fock(n), q, p).unwrap();
            let numeric = coherent_overlap_numeric(&fock(n), q, p).unwrap();
            assert!((closed - numeric).norm() < 1e-12, "n={n} ({q},{p})");
        }
    }

    #[test]
    fn husimi_diagonal_closed_form() {
        for n in 0..4u32 {
            for &(q, p) in &[(0.0, 0.0), (1.0, -2.0), (2.5, 0.3)] {
                let h = husimi_term(&fock(n), &fock(n), q, p).unwrap();
                let a2: f64 = 0.5 * (q * q + p * p);
                let fact: f64 = (1..=n).map(f64::from).product();
                let expect = (-a2).exp() * a2.powi(n as i32) / fact / (2.0 * PI);
                assert!((h.re - expect).abs() < 1e-15 && h.im.abs() < 1e-15);
                assert!(h.re >= 0.0);
            }
        }
    }

    #[test]
    fn rivier_vacuum_diagonal() {
        let k = rivier_term(&fock(0), &fock(0), 0.0, 0.0).unwrap();
        let expect = (2.0 * PI).powf(-0.5) * PI.powf(-0.5);
        assert!((k.re - expect).abs() < 1e-15);
        let (q, p) = (0.7, -1.3);
        let k = rivier_term(&fock(0), &fock(0), q, p).unwrap();
        let expect = (2.0 * PI).powf(-0.5) * fock(0).psi(q) * fock(0).psi(p) * (q * p).cos();
        assert!((k.re - expect).abs() < 1e-15);
    }

    #[test]
    fn grid_evaluators_match_pointwise() {
        let grid = ModeGrid::symmetric(4.0, 33).unwrap();
        let a = fock(1);
        let b = Primitive::squeezed(0, 0.8).unwrap();
        let w = wigner_grid(&a, &b, &grid);
        let c = coherent_overlap_grid(&b, &grid);
        let k = kirkwood_grid(&a, &b, &grid);
        for (idx, (q, p)) in grid.points().enumerate().step_by(37) {
            assert!((w[idx] - cross_wigner_numeric(&a, &b, q, p).unwrap()).norm() < 1e-12);
            assert!((c[idx] - coherent_overlap(&b, q, p).unwrap()).norm() < 1e-12);
            assert!((k[idx] - rivier_term(&a, &b, q, p).unwrap()).norm() < 1e-15);
        }
    }
}
