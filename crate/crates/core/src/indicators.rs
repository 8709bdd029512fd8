//! Non-classicality indicators and the parameter sweeps built on them.
//!
//! * `δ = ∫|f| − ∫f` over the total distribution.
//! * `η = Σ_ij ∫(|f_ij| − f_ij) / Σ_ij ∫(|f_ij| + f_ij)` over pair terms.
//! * Von Neumann entropy of the reduced state of a two-mode Fock
//!   superposition.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phasespace::grid::{GridSpec, PhaseGrid};
use crate::phasespace::table::{build_term_table, TermTable, TermValues, COVERAGE_TOL};
use crate::phasespace::Representation;
use crate::quadrature::{
    abs_integral_4d_streamed, integral_separable_sum, integrate_2d, integrate_2d_abs, Compensated,
};
use crate::states::{CoeffConvention, SingleModeState, State, TwoModeState};

const DEGENERATE_DENOMINATOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndicatorResult {
    pub value: f64,
    /// Richardson estimate from the grid with every other node dropped.
    pub error_estimate: f64,
    /// `∫ f_total`; should be close to 1.
    pub norm_check: f64,
    pub representation: Representation,
    /// False when `norm_check` is more than 1e-3 away from 1.
    pub valid: bool,
}

impl IndicatorResult {
    fn new(
        value: f64,
        coarse: Option<f64>,
        norm_check: f64,
        representation: Representation,
    ) -> Self {
        Self {
            value,
            error_estimate: coarse.map_or(0.0, |c| (value - c).abs() / 3.0),
            norm_check,
            representation,
            valid: (norm_check - 1.0).abs() <= COVERAGE_TOL,
        }
    }
}

/// `(∫|f|, ∫f)` for one term of a table.
fn abs_and_signed(table: &TermTable, values: &TermValues) -> Result<(f64, f64)> {
    match values {
        TermValues::Dense(v) => {
            let grid = table.grid().mode(0);
            Ok((integrate_2d_abs(v, grid)?, integrate_2d(v, grid)?))
        }
        TermValues::Separable(products) => {
            let (g1, g2) = (table.grid().mode(0), table.grid().mode(1));
            let resolved = table.separable(products);
            let signed = integral_separable_sum(&resolved, g1, g2)?;
            let abs = match resolved.as_slice() {
                [] => 0.0,
                // single products factorise exactly
                [p] => p.coeff.abs() * integrate_2d_abs(p.g, g1)? * integrate_2d_abs(p.h, g2)?,
                _ => abs_integral_4d_streamed(&resolved, g1, g2)?,
            };
            Ok((abs, signed))
        }
    }
}

fn delta_parts(table: &TermTable) -> Result<(f64, f64)> {
    let total = if table.mode_count() == 1 {
        TermValues::Dense(
            table
                .total_dense()
                .ok_or_else(|| Error::Invalid("single-mode table with separable terms".into()))?,
        )
    } else {
        TermValues::Separable(table.total_products())
    };
    let (abs, signed) = abs_and_signed(table, &total)?;
    Ok((abs - signed, signed))
}

/// Negativity indicator `δ = ∫|f| − ∫f` of the total distribution.
pub fn delta_indicator(table: &TermTable) -> Result<IndicatorResult> {
    let (value, norm) = delta_parts(table)?;
    let coarse = match table.coarsened() {
        Some(c) => Some(delta_parts(&c)?.0),
        None => None,
    };
    Ok(IndicatorResult::new(
        value,
        coarse,
        norm,
        table.representation(),
    ))
}

fn eta_parts(table: &TermTable) -> Result<(f64, f64)> {
    let mut numerator = Compensated::new();
    let mut denominator = Compensated::new();
    let mut norm = Compensated::new();
    for pair in table.pairs() {
        let (abs, signed) = abs_and_signed(table, &pair.values)?;
        numerator.add(abs - signed);
        denominator.add(abs + signed);
        norm.add(signed);
    }
    let denominator = denominator.value();
    if !(denominator >= DEGENERATE_DENOMINATOR) {
        return Err(Error::DegenerateIndicator(denominator));
    }
    Ok((numerator.value() / denominator, norm.value()))
}

/// Interference indicator `η` over the table's pair terms.
pub fn eta_indicator(table: &TermTable) -> Result<IndicatorResult> {
    let (value, norm) = eta_parts(table)?;
    let coarse = match table.coarsened() {
        Some(c) => Some(eta_parts(&c)?.0),
        None => None,
    };
    Ok(IndicatorResult::new(
        value,
        coarse,
        norm,
        table.representation(),
    ))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum LogBase {
    #[default]
    #[serde(rename = "2")]
    Two,
    #[serde(rename = "e")]
    E,
}

impl std::str::FromStr for LogBase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "2" => Ok(LogBase::Two),
            "e" => Ok(LogBase::E),
            other => Err(Error::Invalid(format!(
                "entropy base must be '2' or 'e', got '{other}'"
            ))),
        }
    }
}

impl std::fmt::Display for LogBase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            LogBase::Two => "2",
            LogBase::E => "e",
        })
    }
}

/// Entanglement entropy of a two-mode Fock superposition, from the
/// singular values of its coefficient matrix `C[n₁][n₂]`.
pub fn von_neumann_entropy(state: &TwoModeState, base: LogBase) -> Result<f64> {
    let mut rows: Vec<u32> = Vec::new();
    let mut cols: Vec<u32> = Vec::new();
    for (_, a, b) in state.terms() {
        if a.is_squeezed() || b.is_squeezed() {
            return Err(Error::Unsupported(
                "entropy needs Fock ⊗ Fock terms; squeezed primitive present".into(),
            ));
        }
        if !rows.contains(&a.n()) {
            rows.push(a.n());
        }
        if !cols.contains(&b.n()) {
            cols.push(b.n());
        }
    }
    let mut coeffs = DMatrix::<Complex64>::zeros(rows.len(), cols.len());
    for (c, a, b) in state.terms() {
        let i = rows
            .iter()
            .position(|&n| n == a.n())
            .expect("row label collected");
        let j = cols
            .iter()
            .position(|&n| n == b.n())
            .expect("column label collected");
        coeffs[(i, j)] += c;
    }
    let singular = coeffs.singular_values();
    let total: f64 = singular.iter().map(|s| s * s).sum();
    if total < DEGENERATE_DENOMINATOR {
        return Err(Error::DegenerateState { norm: total.sqrt() });
    }
    let entropy: f64 = singular
        .iter()
        .map(|s| s * s / total)
        .filter(|&l| l > 0.0)
        .map(|l| -l * l.ln())
        .sum();
    Ok(match base {
        LogBase::E => entropy,
        LogBase::Two => entropy / std::f64::consts::LN_2,
    })
}

/// Grid for `state` from user overrides, auto-scaled for squeezing.
pub fn resolve_grid(state: &State, spec: &GridSpec) -> Result<PhaseGrid> {
    Ok(match state {
        State::Single(s) => PhaseGrid::single(spec.resolve_mode(1, s.primitives())?),
        State::Two(s) => PhaseGrid::two(
            spec.resolve_mode(2, s.mode_primitives(0))?,
            spec.resolve_mode(2, s.mode_primitives(1))?,
        ),
    })
}

/// Indicators of one state in one representation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RepValues {
    pub representation: Representation,
    pub delta: Option<IndicatorResult>,
    pub eta: IndicatorResult,
}

/// Build the table and evaluate `η` (and `δ` when `with_delta`).
pub fn evaluate(
    state: &State,
    rep: Representation,
    grid: &PhaseGrid,
    with_delta: bool,
) -> Result<RepValues> {
    let table = build_term_table(state, rep, grid)?;
    let delta = if with_delta {
        Some(delta_indicator(&table)?)
    } else {
        None
    };
    Ok(RepValues {
        representation: rep,
        delta,
        eta: eta_indicator(&table)?,
    })
}

/// One row of a parameter sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    /// `a²` for entangled sweeps, `r` for squeezing sweeps.
    pub param: f64,
    /// Amplitude `a` of squeezing sweeps.
    pub amplitude: Option<f64>,
    pub values: Vec<RepValues>,
    pub entropy: Option<f64>,
}

/// `a|low, high⟩ + sqrt(1 − a²)|high, low⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntangledFamily {
    pub n_low: u32,
    pub n_high: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SqueezedFamily {
    /// `c₀|0⟩ + a|0, r⟩`
    Psi00r,
    /// `c₀|0⟩ + a|1, r⟩`
    Psi01r,
}

impl SqueezedFamily {
    pub fn state(&self, a: f64, r: f64, convention: CoeffConvention) -> Result<SingleModeState> {
        match self {
            SqueezedFamily::Psi00r => SingleModeState::psi_00r(a, r, convention),
            SqueezedFamily::Psi01r => SingleModeState::psi_01r(a, r, convention),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepOptions {
    pub grid: GridSpec,
    pub convention: CoeffConvention,
    pub entropy_base: LogBase,
    pub swap_modes: bool,
}

fn check_increasing(name: &str, values: &[f64]) -> Result<()> {
    if values.is_empty() {
        return Err(Error::Invalid(format!("no {name} values to sweep")));
    }
    if values.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Invalid(format!(
            "{name} values must be strictly increasing"
        )));
    }
    Ok(())
}

/// Sweep `a²` for an entangled family. `δ` is reported for Wigner and
/// Rivier, `η` for every requested representation.
pub fn sweep_a(
    family: EntangledFamily,
    a_sq_values: &[f64],
    reps: &[Representation],
    opts: &SweepOptions,
) -> Result<Vec<SweepRow>> {
    check_increasing("a²", a_sq_values)?;
    if let Some(bad) = a_sq_values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::Invalid(format!("a² = {bad} outside [0, 1]")));
    }
    if !(family.n_low < family.n_high && family.n_high <= 4) {
        return Err(Error::Invalid(format!(
            "entangled family needs n_low < n_high <= 4, got ({}, {})",
            family.n_low, family.n_high
        )));
    }
    a_sq_values
        .par_iter()
        .map(|&a_sq| {
            let mut two = TwoModeState::entangled(family.n_low, family.n_high, a_sq.sqrt())?;
            if opts.swap_modes {
                two = two.swap_modes();
            }
            let entropy = von_neumann_entropy(&two, opts.entropy_base)?;
            let state = State::Two(two);
            let grid = resolve_grid(&state, &opts.grid)?;
            let values = reps
                .iter()
                .map(|&rep| evaluate(&state, rep, &grid, rep != Representation::Husimi))
                .collect::<Result<Vec<_>>>()?;
            Ok(SweepRow {
                param: a_sq,
                amplitude: None,
                values,
                entropy: Some(entropy),
            })
        })
        .collect()
}

/// Sweep `r` for each amplitude `a` of a squeezed family. Rows are grouped
/// by `a` (in the order given) with `r` increasing inside each group.
pub fn sweep_r(
    family: SqueezedFamily,
    r_values: &[f64],
    a_values: &[f64],
    rep: Representation,
    opts: &SweepOptions,
) -> Result<Vec<SweepRow>> {
    check_increasing("r", r_values)?;
    if a_values.is_empty() {
        return Err(Error::Invalid("no amplitude values to sweep".into()));
    }
    if let Some(bad) = r_values.iter().find(|v| !(0.0..=2.0).contains(*v)) {
        return Err(Error::Invalid(format!("r = {bad} outside [0, 2]")));
    }
    if let Some(bad) = a_values.iter().find(|v| !(**v > 0.0 && **v < 1.0)) {
        return Err(Error::Invalid(format!("a = {bad} outside (0, 1)")));
    }
    let jobs: Vec<(f64, f64)> = a_values
        .iter()
        .flat_map(|&a| r_values.iter().map(move |&r| (a, r)))
        .collect();
    jobs.par_iter()
        .map(|&(a, r)| {
            let state = State::Single(family.state(a, r, opts.convention)?);
            let grid = resolve_grid(&state, &opts.grid)?;
            Ok(SweepRow {
                param: r,
                amplitude: Some(a),
                values: vec![evaluate(&state, rep, &grid, true)?],
                entropy: None,
            })
        })
        .collect()
}
