//! Integration engines.
//!
//! Phase-space grids use composite trapezoid weights on uniform axes (for
//! the rapidly decaying integrands here this coincides with the midpoint
//! sum `Σ v·Δq·Δp` away from the boundary). All reductions run in a fixed
//! index order with compensated accumulation, so results do not depend on
//! the number of worker threads.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::phasespace::grid::ModeGrid;

/// Upper bound on product-grid points accepted by the streamed 4D integral.
pub const MAX_4D_POINTS: u128 = 400_000_000;

/// Maximum number of resolution doublings accepted by [`refine_until`].
pub const MAX_REFINE_LEVELS: usize = 6;

const ROWS_PER_TILE: usize = 32;
const BLOCK: usize = 16;

/// Outcome of a refinement-controlled integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureResult {
    pub value: f64,
    pub error_estimate: f64,
    pub levels_used: usize,
}

/// Neumaier (improved Kahan) accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct Compensated {
    sum: f64,
    carry: f64,
}

impl Compensated {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

impl std::iter::FromIterator<f64> for Compensated {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = Compensated::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

/// Compensated sum in iteration order.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    values.into_iter().collect::<Compensated>().value()
}

/// Blocked sum: plain accumulation inside blocks of 16, compensated across
/// blocks. Order is fixed by the slice layout.
#[inline]
fn blocked_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut acc = Compensated::new();
    let mut partial = 0.0;
    let mut count = 0;
    for v in values {
        partial += v;
        count += 1;
        if count == BLOCK {
            acc.add(partial);
            partial = 0.0;
            count = 0;
        }
    }
    acc.add(partial);
    acc.value()
}

/// Weighted sum of `values` over a single-mode grid.
pub fn integrate_2d(values: &[f64], grid: &ModeGrid) -> Result<f64> {
    check_len(values.len(), grid.len())?;
    let wq = grid.q.weights();
    let wp = grid.p.weights();
    let np = wp.len();
    let rows = values
        .chunks_exact(np)
        .zip(&wq)
        .map(|(row, &w)| w * compensated_sum(row.iter().zip(&wp).map(|(v, wp)| v * wp)));
    Ok(compensated_sum(rows))
}

/// Weighted sum of `|values|` over a single-mode grid.
pub fn integrate_2d_abs(values: &[f64], grid: &ModeGrid) -> Result<f64> {
    check_len(values.len(), grid.len())?;
    let wq = grid.q.weights();
    let wp = grid.p.weights();
    let np = wp.len();
    let rows = values
        .chunks_exact(np)
        .zip(&wq)
        .map(|(row, &w)| w * compensated_sum(row.iter().zip(&wp).map(|(v, wp)| v.abs() * wp)));
    Ok(compensated_sum(rows))
}

fn check_len(got: usize, expected: usize) -> Result<()> {
    if got != expected {
        return Err(Error::ShapeMismatch { expected, got });
    }
    Ok(())
}

/// Integrate `f` on `grid0`, doubling the per-axis resolution until two
/// successive levels agree to within `tol`.
pub fn refine_until<F>(
    f: F,
    grid0: &ModeGrid,
    tol: f64,
    max_levels: usize,
) -> Result<QuadratureResult>
where
    F: Fn(f64, f64) -> f64 + Sync,
{
    if !(tol > 0.0) {
        return Err(Error::Invalid(format!("tolerance {tol} must be positive")));
    }
    if max_levels == 0 || max_levels > MAX_REFINE_LEVELS {
        return Err(Error::Invalid(format!(
            "max_levels {max_levels} must be in 1..={MAX_REFINE_LEVELS}"
        )));
    }
    let mut grid = grid0.clone();
    let mut previous = integrate_fn(&f, &grid);
    if max_levels == 1 {
        return Err(Error::Numerical {
            message: format!("single level {previous} gives no convergence estimate"),
            achieved: f64::INFINITY,
        });
    }
    for level in 2..=max_levels {
        grid = grid.refined();
        let current = integrate_fn(&f, &grid);
        let diff = (current - previous).abs();
        if diff < tol {
            return Ok(QuadratureResult {
                value: current,
                error_estimate: diff,
                levels_used: level,
            });
        }
        if level == max_levels {
            return Err(Error::Numerical {
                message: format!(
                    "no convergence after {max_levels} levels: last values {previous} and {current}"
                ),
                achieved: diff,
            });
        }
        previous = current;
    }
    unreachable!("loop returns on its final level")
}

fn integrate_fn<F>(f: &F, grid: &ModeGrid) -> f64
where
    F: Fn(f64, f64) -> f64 + Sync,
{
    let wq = grid.q.weights();
    let wp = grid.p.weights();
    let ps: Vec<f64> = grid.p.values().collect();
    let rows: Vec<f64> = (0..grid.q.n)
        .into_par_iter()
        .map(|iq| {
            let q = grid.q.value(iq);
            wq[iq] * compensated_sum(ps.iter().zip(&wp).map(|(&p, w)| f(q, p) * w))
        })
        .collect();
    compensated_sum(rows)
}

/// `∫|g| · ∫|h|` for a 4D integrand that is exactly the product `g ⊗ h`.
pub fn abs_integral_separable(
    g: &[f64],
    h: &[f64],
    grid1: &ModeGrid,
    grid2: &ModeGrid,
) -> Result<f64> {
    Ok(integrate_2d_abs(g, grid1)? * integrate_2d_abs(h, grid2)?)
}

/// One separable contribution `coeff · g(q₁,p₁) · h(q₂,p₂)` to a 4D integrand.
#[derive(Debug, Clone, Copy)]
pub struct SeparableProduct<'a> {
    pub coeff: f64,
    pub g: &'a [f64],
    pub h: &'a [f64],
}

/// `∫ |Σ_k c_k g_k ⊗ h_k| dq₁dp₁dq₂dp₂` without materialising the 4D array.
///
/// The outer `(q₁,p₁)` points are cut into fixed tiles; each tile streams
/// the inner grid against a cached, weight-scaled copy of the `h` factors.
/// Tile sums are combined in index order.
pub fn abs_integral_4d_streamed(
    terms: &[SeparableProduct<'_>],
    grid1: &ModeGrid,
    grid2: &ModeGrid,
) -> Result<f64> {
    let n1 = grid1.len();
    let n2 = grid2.len();
    let points = n1 as u128 * n2 as u128;
    if points > MAX_4D_POINTS {
        return Err(Error::ResourceLimit {
            points,
            budget: MAX_4D_POINTS,
        });
    }
    for t in terms {
        check_len(t.g.len(), n1)?;
        check_len(t.h.len(), n2)?;
    }
    if terms.is_empty() {
        return Ok(0.0);
    }

    let nt = terms.len();
    let w1 = grid1.point_weights();
    let w2 = grid2.point_weights();
    // inner factor rows, interleaved by term: cache[k2 * nt + s]
    let mut cache = vec![0.0; n2 * nt];
    for (k2, row) in cache.chunks_exact_mut(nt).enumerate() {
        for (slot, t) in row.iter_mut().zip(terms) {
            *slot = w2[k2] * t.h[k2];
        }
    }

    let tiles: Vec<f64> = (0..n1)
        .collect::<Vec<_>>()
        .par_chunks(ROWS_PER_TILE)
        .map(|rows| {
            let mut alpha = vec![0.0; nt];
            let mut acc = Compensated::new();
            for &k1 in rows {
                let mut any = false;
                for (a, t) in alpha.iter_mut().zip(terms) {
                    *a = t.coeff * t.g[k1];
                    any |= *a != 0.0;
                }
                if !any || w1[k1] == 0.0 {
                    continue;
                }
                acc.add(w1[k1] * inner_abs(&alpha, &cache));
            }
            acc.value()
        })
        .collect();
    Ok(compensated_sum(tiles))
}

fn inner_abs(alpha: &[f64], cache: &[f64]) -> f64 {
    match alpha.len() {
        1 => inner_abs_fixed::<1>(alpha, cache),
        2 => inner_abs_fixed::<2>(alpha, cache),
        3 => inner_abs_fixed::<3>(alpha, cache),
        4 => inner_abs_fixed::<4>(alpha, cache),
        5 => inner_abs_fixed::<5>(alpha, cache),
        6 => inner_abs_fixed::<6>(alpha, cache),
        7 => inner_abs_fixed::<7>(alpha, cache),
        8 => inner_abs_fixed::<8>(alpha, cache),
        nt => blocked_sum(
            cache
                .chunks_exact(nt)
                .map(|row| row.iter().zip(alpha).map(|(h, a)| h * a).sum::<f64>().abs()),
        ),
    }
}

#[inline]
fn inner_abs_fixed<const T: usize>(alpha: &[f64], cache: &[f64]) -> f64 {
    let alpha: [f64; T] = alpha.try_into().expect("term count matches");
    blocked_sum(cache.chunks_exact(T).map(|row| {
        let mut v = 0.0;
        for s in 0..T {
            v += alpha[s] * row[s];
        }
        v.abs()
    }))
}

/// Signed 4D integral of `Σ_k c_k g_k ⊗ h_k`; every term factorises.
pub fn integral_separable_sum(
    terms: &[SeparableProduct<'_>],
    grid1: &ModeGrid,
    grid2: &ModeGrid,
) -> Result<f64> {
    let mut acc = Compensated::new();
    for t in terms {
        acc.add(t.coeff * integrate_2d(t.g, grid1)? * integrate_2d(t.h, grid2)?);
    }
    Ok(acc.value())
}

// Gauss–Kronrod 7/15 abscissae and weights on [-1, 1].
const GK_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const KRONROD_WEIGHTS: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const GAUSS_WEIGHTS: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error.total_cmp(&other.error) == Ordering::Equal
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Panel {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * KRONROD_WEIGHTS[7];
    let mut gauss = fc * GAUSS_WEIGHTS[3];
    for j in 0..7 {
        let dx = half * GK_NODES[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod += KRONROD_WEIGHTS[j] * pair;
        if j % 2 == 1 {
            gauss += GAUSS_WEIGHTS[j / 2] * pair;
        }
    }
    Panel {
        a,
        b,
        value: kronrod * half,
        error: ((kronrod - gauss) * half).abs(),
    }
}

/// Globally adaptive Gauss–Kronrod (7/15) quadrature of `f` on `[a, b]`.
///
/// The interval is first split into `initial_panels` equal pieces so that
/// narrow features are seen; the panel with the largest error estimate is
/// then bisected until the summed estimate drops below `tol`.
pub fn adaptive_gk15<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    tol: f64,
    initial_panels: usize,
) -> Result<(f64, f64)> {
    const MAX_PANELS: usize = 200_000;
    let initial = initial_panels.max(1);
    let width = (b - a) / initial as f64;
    let mut heap: BinaryHeap<Panel> = (0..initial)
        .map(|k| {
            let lo = a + width * k as f64;
            let hi = if k + 1 == initial {
                b
            } else {
                a + width * (k + 1) as f64
            };
            gk15(&f, lo, hi)
        })
        .collect();
    loop {
        let error: f64 = heap.iter().map(|p| p.error).sum();
        if error <= tol {
            let mut panels = heap.into_vec();
            panels.sort_by(|x, y| x.a.total_cmp(&y.a));
            return Ok((compensated_sum(panels.iter().map(|p| p.value)), error));
        }
        if heap.len() >= MAX_PANELS {
            return Err(Error::Numerical {
                message: format!("adaptive quadrature did not reach tolerance {tol:e}"),
                achieved: error,
            });
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        heap.push(gk15(&f, worst.a, mid));
        heap.push(gk15(&f, mid, worst.b));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phasespace::grid::{Axis, ModeGrid};
    use std::f64::consts::PI;

    fn square(half: f64, n: usize) -> ModeGrid {
        ModeGrid::symmetric(half, n).unwrap()
    }

    #[test]
    fn area_of_unit_square() {
        let g = square(1.0, 17);
        let ones = vec![1.0; g.len()];
        assert!((integrate_2d(&ones, &g).unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let g = square(1.0, 17);
        let err = integrate_2d(&[1.0; 3], &g).unwrap_err();
        assert_eq!(
            err,
            Error::ShapeMismatch {
                expected: 289,
                got: 3
            }
        );
    }

    #[test]
    fn gaussian_converges_quickly() {
        let g0 = square(7.0, 33);
        let res = refine_until(|q, p| (-q * q - p * p).exp() / PI, &g0, 1e-6, 6).unwrap();
        assert!(res.levels_used <= 3);
        assert!((res.value - 1.0).abs() < 1e-6);
        assert!(res.error_estimate >= 0.0);
    }

    #[test]
    fn forced_non_convergence() {
        // |W| of Fock 1 has a kink on the circle q² + p² = 1/2.
        let f = |q: f64, p: f64| {
            let rho = q * q + p * p;
            ((2.0 * rho - 1.0) * (-rho).exp() / PI).abs()
        };
        let err = refine_until(f, &square(7.0, 33), 1e-15, 2).unwrap_err();
        assert!(matches!(err, Error::Numerical { .. }));
        assert!(refine_until(f, &square(7.0, 33), 1e-6, 7).is_err());
        assert!(refine_until(f, &square(7.0, 33), 0.0, 3).is_err());
    }

    #[test]
    fn separable_degenerate_cases() {
        let g = square(6.0, 41);
        let vac: Vec<f64> = g
            .points()
            .map(|(q, p)| (-q * q - p * p).exp() / PI)
            .collect();
        let zero = vec![0.0; g.len()];
        let v = abs_integral_separable(&vac, &vac, &g, &g).unwrap();
        assert!((v - 1.0).abs() < 1e-10);
        assert_eq!(abs_integral_separable(&vac, &zero, &g, &g).unwrap(), 0.0);
    }

    #[test]
    fn streamed_single_term_matches_separable() {
        let g = square(6.0, 41);
        let f1: Vec<f64> = g
            .points()
            .map(|(q, p)| {
                let rho = q * q + p * p;
                (2.0 * rho - 1.0) * (-rho).exp() / PI
            })
            .collect();
        let vac: Vec<f64> = g
            .points()
            .map(|(q, p)| (-q * q - p * p).exp() / PI)
            .collect();
        let streamed = abs_integral_4d_streamed(
            &[SeparableProduct {
                coeff: 1.0,
                g: &f1,
                h: &vac,
            }],
            &g,
            &g,
        )
        .unwrap();
        let sep = abs_integral_separable(&f1, &vac, &g, &g).unwrap();
        assert!((streamed - sep).abs() < 1e-12, "{streamed} vs {sep}");
    }

    #[test]
    fn streamed_respects_budget() {
        let big = ModeGrid::new(
            Axis::new(-1.0, 1.0, 200).unwrap(),
            Axis::new(-1.0, 1.0, 200).unwrap(),
        )
        .unwrap();
        let zeros = vec![0.0; big.len()];
        let small = square(1.0, 16);
        let err = abs_integral_4d_streamed(
            &[SeparableProduct {
                coeff: 1.0,
                g: &zeros,
                h: &zeros,
            }],
            &big,
            &big,
        )
        .unwrap_err();
        assert!(matches!(err, Error::ResourceLimit { .. }));
        assert!(abs_integral_4d_streamed(&[], &small, &small).unwrap() == 0.0);
    }

    #[test]
    fn gauss_kronrod_integrates_narrow_gaussian() {
        let s = 5.0f64.exp();
        let (v, err) = adaptive_gk15(|x| (-(s * x).powi(2)).exp(), -8.0, 8.0, 1e-12, 1200).unwrap();
        assert!((v - PI.sqrt() / s).abs() < 1e-12);
        assert!(err <= 1e-12);
    }

    #[test]
    fn compensated_beats_naive() {
        let mut xs = vec![1.0];
        xs.extend(std::iter::repeat_n(1e-16, 10_000));
        let naive: f64 = xs.iter().sum();
        let comp = compensated_sum(xs.iter().copied());
        assert_eq!(naive, 1.0);
        assert!((comp - (1.0 + 1e-12)).abs() < 1e-15);
    }
}
