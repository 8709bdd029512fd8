//! Term-pair decomposition `f = Σ_{i≤j} f_ij` of a distribution.
//!
//! Diagonal terms are `|c_i|² Re D_ii`; off-diagonal terms merge both
//! orderings into one real grid, `Re(c_i c_j* D_ij + c_j c_i* D_ji)`.
//! Two-mode terms are never stored as 4D arrays: each is a short list of
//! real products of per-mode factor grids.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::{FRAC_1_PI, PI};

use num_complex::Complex64;

use super::grid::{ModeGrid, PhaseGrid};
use super::kernels::{
    coherent_overlap, coherent_overlap_grid, kirkwood_grid, wigner_grid, wigner_term,
    HUSIMI_PREFACTOR,
};
use super::Representation;
use crate::error::{Error, Result};
use crate::quadrature::{integral_separable_sum, integrate_2d, Compensated, SeparableProduct};
use crate::states::{Primitive, SingleModeState, State, TwoModeState};

/// Allowed deviation of the total integral from 1 before the grid is
/// declared too small for the state.
pub const COVERAGE_TOL: f64 = 1e-3;

/// `coeff · F₁[mode1] ⊗ F₂[mode2]`, indices into the table's factor banks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FactorProduct {
    pub coeff: f64,
    pub mode1: usize,
    pub mode2: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TermValues {
    /// Row-major values on the single-mode grid.
    Dense(Vec<f64>),
    /// Sum of real separable products on the two-mode grid.
    Separable(Vec<FactorProduct>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairTerm {
    pub i: usize,
    pub j: usize,
    pub values: TermValues,
}

impl PairTerm {
    pub fn is_diagonal(&self) -> bool {
        self.i == self.j
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TermTable {
    representation: Representation,
    grid: PhaseGrid,
    pairs: Vec<PairTerm>,
    factors: [Vec<Vec<f64>>; 2],
}

impl TermTable {
    pub fn representation(&self) -> Representation {
        self.representation
    }

    pub fn grid(&self) -> &PhaseGrid {
        &self.grid
    }

    pub fn pairs(&self) -> &[PairTerm] {
        &self.pairs
    }

    pub fn mode_count(&self) -> usize {
        self.grid.mode_count()
    }

    /// Factor grid `idx` of `mode` (two-mode tables only).
    pub fn factor(&self, mode: usize, idx: usize) -> &[f64] {
        &self.factors[mode][idx]
    }

    pub fn factor_count(&self, mode: usize) -> usize {
        self.factors[mode].len()
    }

    /// Resolve products into slices for the quadrature routines.
    pub fn separable<'a>(&'a self, products: &[FactorProduct]) -> Vec<SeparableProduct<'a>> {
        products
            .iter()
            .map(|p| SeparableProduct {
                coeff: p.coeff,
                g: &self.factors[0][p.mode1],
                h: &self.factors[1][p.mode2],
            })
            .collect()
    }

    /// All pair products of a two-mode table merged into one list.
    pub fn total_products(&self) -> Vec<FactorProduct> {
        merge_products(self.pairs.iter().flat_map(|pair| match &pair.values {
            TermValues::Separable(products) => products.clone(),
            TermValues::Dense(_) => Vec::new(),
        }))
    }

    /// Pointwise sum of all pair terms (single-mode tables only).
    pub fn total_dense(&self) -> Option<Vec<f64>> {
        let mut total: Option<Vec<f64>> = None;
        for pair in &self.pairs {
            let TermValues::Dense(values) = &pair.values else {
                return None;
            };
            match total.as_mut() {
                None => total = Some(values.clone()),
                Some(t) => t.iter_mut().zip(values).for_each(|(a, b)| *a += b),
            }
        }
        total
    }

    /// Value of one pair term at a two-mode grid point `(k1, k2)`.
    pub fn separable_value(&self, products: &[FactorProduct], k1: usize, k2: usize) -> f64 {
        products
            .iter()
            .map(|p| p.coeff * self.factors[0][p.mode1][k1] * self.factors[1][p.mode2][k2])
            .sum()
    }

    /// Signed integral of one pair term.
    pub fn pair_integral(&self, pair: &PairTerm) -> Result<f64> {
        match &pair.values {
            TermValues::Dense(values) => integrate_2d(values, self.grid.mode(0)),
            TermValues::Separable(products) => integral_separable_sum(
                &self.separable(products),
                self.grid.mode(0),
                self.grid.mode(1),
            ),
        }
    }

    /// Same table restricted to every other grid node along each axis.
    pub fn coarsened(&self) -> Option<TermTable> {
        let modes = self.grid.modes();
        let coarse: Vec<ModeGrid> = modes.iter().map(|g| g.coarsened()).collect::<Option<_>>()?;
        let grid = match coarse.as_slice() {
            [g] => PhaseGrid::single(g.clone()),
            [g1, g2] => PhaseGrid::two(g1.clone(), g2.clone()),
            _ => return None,
        };
        let pairs = self
            .pairs
            .iter()
            .map(|pair| {
                let values = match &pair.values {
                    TermValues::Dense(v) => TermValues::Dense(modes[0].subsample(v)?),
                    TermValues::Separable(p) => TermValues::Separable(p.clone()),
                };
                Some(PairTerm {
                    i: pair.i,
                    j: pair.j,
                    values,
                })
            })
            .collect::<Option<Vec<_>>>()?;
        let mut factors: [Vec<Vec<f64>>; 2] = [Vec::new(), Vec::new()];
        for (mode, bank) in self.factors.iter().enumerate() {
            for f in bank {
                factors[mode].push(modes[mode].subsample(f)?);
            }
        }
        Some(TermTable {
            representation: self.representation,
            grid,
            pairs,
            factors,
        })
    }

    /// `∫ f_total`, summed pair by pair.
    pub fn total_integral(&self) -> Result<f64> {
        let mut acc = Compensated::new();
        for pair in &self.pairs {
            acc.add(self.pair_integral(pair)?);
        }
        Ok(acc.value())
    }
}

fn merge_products(products: impl IntoIterator<Item = FactorProduct>) -> Vec<FactorProduct> {
    let mut merged: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for p in products {
        *merged.entry((p.mode1, p.mode2)).or_insert(0.0) += p.coeff;
    }
    merged
        .into_iter()
        .filter(|&(_, c)| c != 0.0)
        .map(|((mode1, mode2), coeff)| FactorProduct {
            coeff,
            mode1,
            mode2,
        })
        .collect()
}

/// Distinct primitives of one mode plus their pair kernels on a grid.
struct ModeKernels<'g> {
    rep: Representation,
    grid: &'g ModeGrid,
    prims: Vec<Primitive>,
    coherent: HashMap<usize, Vec<Complex64>>,
    kernels: HashMap<(usize, usize), Vec<Complex64>>,
}

impl<'g> ModeKernels<'g> {
    fn new<'a>(
        rep: Representation,
        grid: &'g ModeGrid,
        prims: impl IntoIterator<Item = &'a Primitive>,
    ) -> Self {
        let mut distinct: Vec<Primitive> = Vec::new();
        for p in prims {
            let p = p.canonical();
            if !distinct.contains(&p) {
                distinct.push(p);
            }
        }
        Self {
            rep,
            grid,
            prims: distinct,
            coherent: HashMap::new(),
            kernels: HashMap::new(),
        }
    }

    fn index(&self, prim: &Primitive) -> usize {
        let p = prim.canonical();
        self.prims
            .iter()
            .position(|x| *x == p)
            .expect("primitive registered at construction")
    }

    fn coherent(&mut self, a: usize) -> &Vec<Complex64> {
        let (grid, prim) = (self.grid, self.prims[a]);
        self.coherent
            .entry(a)
            .or_insert_with(|| coherent_overlap_grid(&prim, grid))
    }

    /// Kernel key actually stored and whether the requested one is its
    /// complex conjugate.
    fn canonical_key(&self, a: usize, b: usize) -> ((usize, usize), bool) {
        if self.rep.is_hermitian() && a > b {
            ((b, a), true)
        } else {
            ((a, b), false)
        }
    }

    fn ensure(&mut self, a: usize, b: usize) -> ((usize, usize), bool) {
        let (key, conj) = self.canonical_key(a, b);
        if !self.kernels.contains_key(&key) {
            let (x, y) = (self.prims[key.0], self.prims[key.1]);
            let values = match self.rep {
                Representation::Wigner => wigner_grid(&x, &y, self.grid),
                Representation::Rivier => kirkwood_grid(&x, &y, self.grid),
                Representation::Husimi => {
                    let ax = self.coherent(key.0).clone();
                    let ay = self.coherent(key.1);
                    ax.iter()
                        .zip(ay)
                        .map(|(u, v)| u * v.conj() * HUSIMI_PREFACTOR)
                        .collect()
                }
            };
            self.kernels.insert(key, values);
        }
        (key, conj)
    }

    /// `Re(z · D_ab)` at every grid point.
    fn real_part_scaled(&mut self, a: usize, b: usize, z: Complex64) -> Vec<f64> {
        let (key, conj) = self.ensure(a, b);
        let z = if conj { z.conj() } else { z };
        // Re(z · conj(D)) = Re(conj(z) · D)
        self.kernels[&key].iter().map(|d| (z * d).re).collect()
    }
}

/// Per-mode factor bank: real and imaginary parts of pair kernels.
struct FactorBank<'g> {
    kernels: ModeKernels<'g>,
    bank: Vec<Vec<f64>>,
    parts: HashMap<(usize, usize), (Option<usize>, Option<usize>)>,
}

/// Signed reference to a factor grid.
type PartRef = Option<(usize, f64)>;

impl<'g> FactorBank<'g> {
    fn new(kernels: ModeKernels<'g>) -> Self {
        Self {
            kernels,
            bank: Vec::new(),
            parts: HashMap::new(),
        }
    }

    fn store(&mut self, values: Vec<f64>) -> Option<usize> {
        if values.iter().all(|v| *v == 0.0) {
            return None;
        }
        self.bank.push(values);
        Some(self.bank.len() - 1)
    }

    /// `(Re D_ab, Im D_ab)` as signed factor references.
    fn parts(&mut self, a: usize, b: usize) -> (PartRef, PartRef) {
        let (key, conj) = self.kernels.ensure(a, b);
        if !self.parts.contains_key(&key) {
            let kernel = &self.kernels.kernels[&key];
            let re: Vec<f64> = kernel.iter().map(|d| d.re).collect();
            let im: Vec<f64> = kernel.iter().map(|d| d.im).collect();
            let re = self.store(re);
            let im = self.store(im);
            self.parts.insert(key, (re, im));
        }
        let (re, im) = self.parts[&key];
        let im_sign = if conj { -1.0 } else { 1.0 };
        (re.map(|i| (i, 1.0)), im.map(|i| (i, im_sign)))
    }
}

/// Products for `Re(z · A ⊗ B)` with `A`, `B` complex factor grids:
/// `Re z (Ar Br − Ai Bi) − Im z (Ar Bi + Ai Br)`.
fn complex_product_terms(
    z: Complex64,
    a: (PartRef, PartRef),
    b: (PartRef, PartRef),
) -> Vec<FactorProduct> {
    let (ar, ai) = a;
    let (br, bi) = b;
    let mut out = Vec::with_capacity(4);
    let mut push = |c: f64, x: PartRef, y: PartRef| {
        if c == 0.0 {
            return;
        }
        if let (Some((i, sx)), Some((j, sy))) = (x, y) {
            out.push(FactorProduct {
                coeff: c * sx * sy,
                mode1: i,
                mode2: j,
            });
        }
    };
    push(z.re, ar, br);
    push(-z.re, ai, bi);
    push(-z.im, ar, bi);
    push(-z.im, ai, br);
    out
}

fn check_finite(values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFinite {
            value: values[index],
            index,
        }),
        None => Ok(()),
    }
}

fn single_table(
    state: &SingleModeState,
    rep: Representation,
    grid: &ModeGrid,
) -> Result<TermTable> {
    let mut kernels = ModeKernels::new(rep, grid, state.primitives());
    let terms = state.terms();
    let mut pairs = Vec::new();
    for i in 0..terms.len() {
        for j in i..terms.len() {
            let (ci, pi) = terms[i];
            let (cj, pj) = terms[j];
            let (a, b) = (kernels.index(&pi), kernels.index(&pj));
            let values = if i == j {
                kernels.real_part_scaled(a, a, Complex64::new(ci.norm_sqr(), 0.0))
            } else {
                let z = ci * cj.conj();
                let mut v = kernels.real_part_scaled(a, b, z);
                let w = kernels.real_part_scaled(b, a, z.conj());
                v.iter_mut().zip(&w).for_each(|(x, y)| *x += y);
                v
            };
            check_finite(&values)?;
            pairs.push(PairTerm {
                i,
                j,
                values: TermValues::Dense(values),
            });
        }
    }
    Ok(TermTable {
        representation: rep,
        grid: PhaseGrid::single(grid.clone()),
        pairs,
        factors: [Vec::new(), Vec::new()],
    })
}

fn two_mode_table(
    state: &TwoModeState,
    rep: Representation,
    first: &ModeGrid,
    second: &ModeGrid,
) -> Result<TermTable> {
    let mut banks = [
        FactorBank::new(ModeKernels::new(rep, first, state.mode_primitives(0))),
        FactorBank::new(ModeKernels::new(rep, second, state.mode_primitives(1))),
    ];
    let terms = state.terms();
    let mut pairs = Vec::new();
    for i in 0..terms.len() {
        for j in i..terms.len() {
            let (ci, ai, bi) = terms[i];
            let (cj, aj, bj) = terms[j];
            let (a1, a2) = (banks[0].kernels.index(&ai), banks[0].kernels.index(&aj));
            let (b1, b2) = (banks[1].kernels.index(&bi), banks[1].kernels.index(&bj));
            let mut products = Vec::new();
            if i == j {
                let z = Complex64::new(ci.norm_sqr(), 0.0);
                let fa = banks[0].parts(a1, a1);
                let fb = banks[1].parts(b1, b1);
                products.extend(complex_product_terms(z, fa, fb));
            } else {
                let z = ci * cj.conj();
                let fa = banks[0].parts(a1, a2);
                let fb = banks[1].parts(b1, b2);
                products.extend(complex_product_terms(z, fa, fb));
                let fa = banks[0].parts(a2, a1);
                let fb = banks[1].parts(b2, b1);
                products.extend(complex_product_terms(z.conj(), fa, fb));
            }
            pairs.push(PairTerm {
                i,
                j,
                values: TermValues::Separable(merge_products(products)),
            });
        }
    }
    let [bank1, bank2] = banks;
    for f in bank1.bank.iter().chain(&bank2.bank) {
        check_finite(f)?;
    }
    Ok(TermTable {
        representation: rep,
        grid: PhaseGrid::two(first.clone(), second.clone()),
        pairs,
        factors: [bank1.bank, bank2.bank],
    })
}

/// Decompose `state` in representation `rep` on `grid` without the
/// support-coverage check.
pub fn build_term_table_unchecked(
    state: &State,
    rep: Representation,
    grid: &PhaseGrid,
) -> Result<TermTable> {
    match (state, grid.mode_count()) {
        (State::Single(s), 1) => single_table(s, rep, grid.mode(0)),
        (State::Two(s), 2) => two_mode_table(s, rep, grid.mode(0), grid.mode(1)),
        (s, m) => Err(Error::Invalid(format!(
            "{}-mode state on a {m}-mode grid",
            s.modes()
        ))),
    }
}

/// Decompose a normalised `state` into pair terms on `grid`.
///
/// Fails with [`Error::SupportCoverage`] when the total integral differs
/// from 1 by more than [`COVERAGE_TOL`].
pub fn build_term_table(state: &State, rep: Representation, grid: &PhaseGrid) -> Result<TermTable> {
    let table = build_term_table_unchecked(state, rep, grid)?;
    let integral = table.total_integral()?;
    if !((integral - 1.0).abs() <= COVERAGE_TOL) {
        return Err(Error::SupportCoverage { integral });
    }
    Ok(table)
}

/// Total distribution evaluated straight from the superposed state, not
/// through the pair decomposition. `point` is `[q, p]` or `[q₁, p₁, q₂, p₂]`.
pub fn direct_total(state: &State, rep: Representation, point: &[f64]) -> Result<f64> {
    match (state, point) {
        (State::Single(s), &[q, p]) => direct_single(s, rep, q, p),
        (State::Two(s), &[q1, p1, q2, p2]) => direct_two(s, rep, q1, p1, q2, p2),
        _ => Err(Error::Invalid(
            "point dimension does not match the state".into(),
        )),
    }
}

fn direct_single(state: &SingleModeState, rep: Representation, q: f64, p: f64) -> Result<f64> {
    match rep {
        Representation::Wigner => {
            let (mut support, mut band) = (0.0f64, 0.0f64);
            for prim in state.primitives() {
                support = support.max(prim.position_support());
                band = band.max(prim.momentum_support());
            }
            let h = 0.5 * PI / (p.abs() + band);
            let reach = support + q.abs();
            let count = (reach / h).ceil() as i64;
            let mut acc = Compensated::new();
            let mut acc_im = Compensated::new();
            for l in -count..=count {
                let y = l as f64 * h;
                let v = state.psi(q + y)
                    * state.psi(q - y).conj()
                    * Complex64::from_polar(1.0, -2.0 * p * y);
                acc.add(v.re);
                acc_im.add(v.im);
            }
            Ok(acc.value() * h * FRAC_1_PI)
        }
        Representation::Husimi => {
            let mut amp = Complex64::new(0.0, 0.0);
            for (c, prim) in state.terms() {
                amp += c * coherent_overlap(prim, q, p)?;
            }
            Ok(amp.norm_sqr() * HUSIMI_PREFACTOR)
        }
        Representation::Rivier => {
            let k = state.psi(q)
                * state.phi(p).conj()
                * Complex64::from_polar((2.0 * PI).powf(-0.5), -q * p);
            Ok(k.re)
        }
    }
}

fn direct_two(
    state: &TwoModeState,
    rep: Representation,
    q1: f64,
    p1: f64,
    q2: f64,
    p2: f64,
) -> Result<f64> {
    match rep {
        Representation::Wigner => {
            let mut total = Complex64::new(0.0, 0.0);
            for (ci, ai, bi) in state.terms() {
                for (cj, aj, bj) in state.terms() {
                    total += ci
                        * cj.conj()
                        * wigner_term(ai, aj, q1, p1)?
                        * wigner_term(bi, bj, q2, p2)?;
                }
            }
            Ok(total.re)
        }
        Representation::Husimi => {
            let mut amp = Complex64::new(0.0, 0.0);
            for (c, a, b) in state.terms() {
                amp += c * coherent_overlap(a, q1, p1)? * coherent_overlap(b, q2, p2)?;
            }
            Ok(amp.norm_sqr() * HUSIMI_PREFACTOR * HUSIMI_PREFACTOR)
        }
        Representation::Rivier => {
            let mut psi = Complex64::new(0.0, 0.0);
            let mut phi = Complex64::new(0.0, 0.0);
            for (c, a, b) in state.terms() {
                psi += c * a.psi(q1) * b.psi(q2);
                phi += c * a.phi(p1) * b.phi(p2);
            }
            let k =
                psi * phi.conj() * Complex64::from_polar(1.0 / (2.0 * PI), -(q1 * p1 + q2 * p2));
            Ok(k.re)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phasespace::grid::GridSpec;
    use crate::states::CoeffConvention;

    fn single_grid(state: &SingleModeState) -> PhaseGrid {
        PhaseGrid::single(
            GridSpec::default()
                .resolve_mode(1, state.primitives())
                .unwrap(),
        )
    }

    #[test]
    fn vacuum_has_one_diagonal_term() {
        let s = SingleModeState::fock(0).unwrap();
        let state = State::Single(s.clone());
        let grid = single_grid(&s);
        for rep in Representation::ALL {
            let t = build_term_table(&state, rep, &grid).unwrap();
            assert_eq!(t.pairs().len(), 1);
            assert!(t.pairs()[0].is_diagonal());
            assert_eq!(
                t.total_dense().unwrap(),
                match &t.pairs()[0].values {
                    TermValues::Dense(v) => v.clone(),
                    _ => unreachable!(),
                }
            );
        }
    }

    #[test]
    fn decomposition_matches_direct_total() {
        let s = SingleModeState::psi_01r(0.5, 0.7, CoeffConvention::Sqrt).unwrap();
        let state = State::Single(s.clone());
        let grid = PhaseGrid::single(ModeGrid::symmetric(6.0, 41).unwrap());
        for rep in Representation::ALL {
            let t = build_term_table_unchecked(&state, rep, &grid).unwrap();
            let total = t.total_dense().unwrap();
            for (idx, (q, p)) in grid.mode(0).points().enumerate().step_by(13) {
                let direct = direct_total(&state, rep, &[q, p]).unwrap();
                assert!(
                    (direct - total[idx]).abs() < 1e-10,
                    "{rep} ({q},{p}): {direct} vs {}",
                    total[idx]
                );
            }
        }
    }

    #[test]
    fn two_mode_decomposition_matches_direct_total() {
        let s = TwoModeState::entangled(1, 2, 0.6).unwrap();
        let state = State::Two(s);
        let g = ModeGrid::symmetric(5.0, 21).unwrap();
        let grid = PhaseGrid::two(g.clone(), g.clone());
        for rep in Representation::ALL {
            let t = build_term_table_unchecked(&state, rep, &grid).unwrap();
            let products = t.total_products();
            for k1 in (0..g.len()).step_by(29) {
                for k2 in (0..g.len()).step_by(31) {
                    let pts: Vec<(f64, f64)> = g.points().collect();
                    let (q1, p1) = pts[k1];
                    let (q2, p2) = pts[k2];
                    let direct = direct_total(&state, rep, &[q1, p1, q2, p2]).unwrap();
                    let table = t.separable_value(&products, k1, k2);
                    assert!((direct - table).abs() < 1e-10, "{rep}");
                }
            }
        }
    }

    #[test]
    fn small_grid_fails_coverage() {
        let s = SingleModeState::fock(2).unwrap();
        let grid = PhaseGrid::single(ModeGrid::symmetric(1.0, 21).unwrap());
        let err = build_term_table(&State::Single(s), Representation::Wigner, &grid).unwrap_err();
        assert!(matches!(err, Error::SupportCoverage { .. }));
    }

    #[test]
    fn mismatched_modes_rejected() {
        let s = SingleModeState::fock(0).unwrap();
        let g = ModeGrid::symmetric(5.0, 21).unwrap();
        let grid = PhaseGrid::two(g.clone(), g);
        assert!(build_term_table(&State::Single(s), Representation::Wigner, &grid).is_err());
    }

    #[test]
    fn husimi_diagonals_nonnegative() {
        let s = SingleModeState::psi_01r(0.7, 1.2, CoeffConvention::Sqrt).unwrap();
        let grid = single_grid(&s);
        let t = build_term_table(&State::Single(s), Representation::Husimi, &grid).unwrap();
        for pair in t.pairs().iter().filter(|p| p.is_diagonal()) {
            let TermValues::Dense(v) = &pair.values else {
                unreachable!()
            };
            assert!(v.iter().all(|x| *x >= -1e-14));
        }
    }
}
