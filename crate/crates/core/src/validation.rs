//! Invariant suites behind the `validate` command.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::indicators::{delta_indicator, eta_indicator, resolve_grid};
use crate::phasespace::kernels::{cross_wigner_fock_closed, cross_wigner_numeric};
use crate::phasespace::table::{build_term_table_unchecked, direct_total, TermTable, TermValues};
use crate::phasespace::{GridSpec, Representation};
use crate::quadrature::MAX_4D_POINTS;
use crate::states::{CoeffConvention, Primitive, SingleModeState, State, TwoModeState};

pub const NORMALIZATION_TOL: f64 = 1e-4;
pub const MARGINAL_TOL: f64 = 1e-4;
pub const COMPLETENESS_TOL: f64 = 1e-10;
pub const CLOSED_FORM_TOL: f64 = 1e-8;
pub const POSITIVITY_TOL: f64 = 1e-14;
pub const ETA_SLACK: f64 = 1e-9;
pub const GRID_HALVING_TOL: f64 = 2e-3;

const CLOSED_FORM_SAMPLES: usize = 100;
const CLOSED_FORM_SEED: u64 = 0x5eed;
/// Node stride used when comparing decompositions against direct sums.
const COMPLETENESS_STRIDE: usize = 10;
const COMPLETENESS_SAMPLES_4D: usize = 60;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    /// Worst observed deviation (or value, for range checks).
    pub worst: f64,
    pub tolerance: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<CheckResult>,
    pub all_passed: bool,
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(
                f,
                "{} {:<28} worst={:.3e} tol={:.1e}  {}",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.worst,
                c.tolerance,
                c.detail
            )?;
        }
        write!(
            f,
            "{}",
            if self.all_passed {
                "all checks passed"
            } else {
                "some checks failed"
            }
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationOptions {
    /// Grid overrides for the per-state checks. Grid halving always uses
    /// its own fixed resolutions.
    pub grid: GridSpec,
    pub reps: Vec<Representation>,
    pub convention: CoeffConvention,
    /// Thread count compared against a single-threaded run.
    pub threads: usize,
    pub grid_halving: bool,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        Self {
            grid: GridSpec::default(),
            reps: Representation::ALL.to_vec(),
            convention: CoeffConvention::default(),
            threads: std::thread::available_parallelism()
                .map_or(2, |n| n.get())
                .max(2),
            grid_halving: true,
        }
    }
}

/// States every per-state check runs over.
pub fn suite_states(convention: CoeffConvention) -> Result<Vec<(String, State)>> {
    let bell = 0.5f64.sqrt();
    Ok(vec![
        ("fock0".into(), State::Single(SingleModeState::fock(0)?)),
        ("fock1".into(), State::Single(SingleModeState::fock(1)?)),
        ("fock2".into(), State::Single(SingleModeState::fock(2)?)),
        (
            "squeezed(1,0.5)".into(),
            State::Single(SingleModeState::from_primitive(Primitive::squeezed(
                1, 0.5,
            )?)?),
        ),
        (
            "psi00r(0.5,1)".into(),
            State::Single(SingleModeState::psi_00r(0.5, 1.0, convention)?),
        ),
        (
            "psi01r(0.5,1)".into(),
            State::Single(SingleModeState::psi_01r(0.5, 1.0, convention)?),
        ),
        (
            "entangled01".into(),
            State::Two(TwoModeState::entangled(0, 1, bell)?),
        ),
        (
            "entangled12".into(),
            State::Two(TwoModeState::entangled(1, 2, bell)?),
        ),
    ])
}

struct Worst {
    value: f64,
    at: String,
}

impl Worst {
    fn new() -> Self {
        Self {
            value: 0.0,
            at: String::new(),
        }
    }

    fn update(&mut self, value: f64, at: impl FnOnce() -> String) {
        if !(value <= self.value) {
            self.value = value;
            self.at = at();
        }
    }

    fn check(self, name: &str, tolerance: f64) -> CheckResult {
        CheckResult {
            name: name.into(),
            passed: self.value <= tolerance,
            worst: self.value,
            tolerance,
            detail: if self.at.is_empty() {
                String::new()
            } else {
                format!("at {}", self.at)
            },
        }
    }
}

fn failed(name: &str, tolerance: f64, err: &Error) -> CheckResult {
    CheckResult {
        name: name.into(),
        passed: false,
        worst: f64::NAN,
        tolerance,
        detail: err.to_string(),
    }
}

struct Tables {
    entries: Vec<(String, State, TermTable)>,
}

impl Tables {
    fn build(states: &[(String, State)], reps: &[Representation], grid: &GridSpec) -> Result<Self> {
        let mut entries = Vec::new();
        for (name, state) in states {
            let phase_grid = resolve_grid(state, grid)?;
            for &rep in reps {
                let table = build_term_table_unchecked(state, rep, &phase_grid)?;
                entries.push((format!("{name}/{rep}"), state.clone(), table));
            }
        }
        Ok(Self { entries })
    }
}

fn normalization(tables: &Tables) -> Result<CheckResult> {
    let mut worst = Worst::new();
    for (name, _, table) in &tables.entries {
        let integral = table.total_integral()?;
        worst.update((integral - 1.0).abs(), || {
            format!("{name} (integral {integral:.9})")
        });
    }
    Ok(worst.check("normalization", NORMALIZATION_TOL))
}

fn wigner_marginals(tables: &Tables) -> Result<CheckResult> {
    let mut worst = Worst::new();
    for (name, state, table) in &tables.entries {
        let (State::Single(s), Representation::Wigner) = (state, table.representation()) else {
            continue;
        };
        let grid = table.grid().mode(0);
        let total = table
            .total_dense()
            .ok_or_else(|| Error::Invalid("single-mode table without dense terms".into()))?;
        let weights = grid.p.weights();
        let np = grid.p.n;
        for iq in 0..grid.q.n {
            let q = grid.q.value(iq);
            let column: f64 = total[iq * np..(iq + 1) * np]
                .iter()
                .zip(&weights)
                .map(|(v, w)| v * w)
                .sum();
            let density = s.psi(q).norm_sqr();
            worst.update((column - density).abs(), || format!("{name} q={q:.3}"));
        }
    }
    Ok(worst.check("wigner marginals", MARGINAL_TOL))
}

fn completeness(tables: &Tables) -> Result<CheckResult> {
    let mut worst = Worst::new();
    for (name, state, table) in &tables.entries {
        let rep = table.representation();
        if table.mode_count() == 1 {
            let grid = table.grid().mode(0);
            let total = table
                .total_dense()
                .ok_or_else(|| Error::Invalid("single-mode table without dense terms".into()))?;
            for iq in (0..grid.q.n).step_by(COMPLETENESS_STRIDE) {
                for ip in (0..grid.p.n).step_by(COMPLETENESS_STRIDE) {
                    let (q, p) = (grid.q.value(iq), grid.p.value(ip));
                    let direct = direct_total(state, rep, &[q, p])?;
                    let err = (direct - total[grid.index(iq, ip)]).abs();
                    worst.update(err, || format!("{name} ({q:.3},{p:.3})"));
                }
            }
        } else {
            let (g1, g2) = (table.grid().mode(0), table.grid().mode(1));
            let products = table.total_products();
            let mut rng = ChaCha8Rng::seed_from_u64(CLOSED_FORM_SEED);
            for _ in 0..COMPLETENESS_SAMPLES_4D {
                let (k1, k2) = (rng.random_range(0..g1.len()), rng.random_range(0..g2.len()));
                let (iq1, ip1) = (k1 / g1.p.n, k1 % g1.p.n);
                let (iq2, ip2) = (k2 / g2.p.n, k2 % g2.p.n);
                let point = [
                    g1.q.value(iq1),
                    g1.p.value(ip1),
                    g2.q.value(iq2),
                    g2.p.value(ip2),
                ];
                let direct = direct_total(state, rep, &point)?;
                let err = (direct - table.separable_value(&products, k1, k2)).abs();
                worst.update(err, || format!("{name} {point:.3?}"));
            }
        }
    }
    Ok(worst.check("decomposition completeness", COMPLETENESS_TOL))
}

fn closed_vs_numeric() -> Result<CheckResult> {
    let mut worst = Worst::new();
    let mut rng = ChaCha8Rng::seed_from_u64(CLOSED_FORM_SEED);
    for _ in 0..CLOSED_FORM_SAMPLES {
        let (m, n) = (rng.random_range(0..=4u32), rng.random_range(0..=4u32));
        let (q, p) = (rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0));
        let closed = cross_wigner_fock_closed(m, n, q, p)?;
        let numeric = cross_wigner_numeric(&Primitive::fock(m)?, &Primitive::fock(n)?, q, p)?;
        worst.update((closed - numeric).norm(), || {
            format!("W_{m}{n}({q:.3},{p:.3})")
        });
    }
    Ok(worst.check("closed-form vs numeric", CLOSED_FORM_TOL))
}

fn husimi_positivity(tables: &Tables) -> CheckResult {
    // tracks the most negative value seen, as a positive number
    let mut worst = Worst::new();
    for (name, _, table) in &tables.entries {
        if table.representation() != Representation::Husimi {
            continue;
        }
        for pair in table.pairs().iter().filter(|p| p.is_diagonal()) {
            match &pair.values {
                TermValues::Dense(v) => {
                    let min = v.iter().copied().fold(f64::INFINITY, f64::min);
                    worst.update(-min, || format!("{name} f_{}{}", pair.i + 1, pair.j + 1));
                }
                TermValues::Separable(products) => {
                    // diagonal Husimi terms are one non-negative product
                    for prod in products {
                        let g = table.factor(0, prod.mode1);
                        let h = table.factor(1, prod.mode2);
                        let gmin = g.iter().copied().fold(f64::INFINITY, f64::min);
                        let hmin = h.iter().copied().fold(f64::INFINITY, f64::min);
                        let gmax = g.iter().copied().fold(0.0, f64::max);
                        let hmax = h.iter().copied().fold(0.0, f64::max);
                        let low = (prod.coeff * gmin * hmax)
                            .min(prod.coeff * gmax * hmin)
                            .min(prod.coeff * gmin * hmin);
                        worst.update(-low.min(0.0), || {
                            format!("{name} f_{}{}", pair.i + 1, pair.j + 1)
                        });
                    }
                }
            }
        }
    }
    worst.check("husimi positivity", POSITIVITY_TOL)
}

fn eta_range(tables: &Tables) -> Result<CheckResult> {
    let mut worst = Worst::new();
    for (name, _, table) in &tables.entries {
        let eta = eta_indicator(table)?.value;
        let outside = (-eta).max(eta - 1.0).max(0.0);
        worst.update(outside, || format!("{name} (eta {eta:.6})"));
    }
    let mut check = worst.check("eta in [0,1]", ETA_SLACK);
    if check.detail.is_empty() {
        check.detail = "all inside".into();
    }
    Ok(check)
}

fn determinism(threads: usize) -> Result<CheckResult> {
    let state = State::Two(TwoModeState::entangled(1, 2, 0.5f64.sqrt())?);
    let grid = resolve_grid(&state, &GridSpec::default())?;
    let run = |n: usize| -> Result<(f64, f64)> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Invalid(format!("thread pool: {e}")))?;
        pool.install(|| {
            let table = build_term_table_unchecked(&state, Representation::Wigner, &grid)?;
            Ok((delta_indicator(&table)?.value, eta_indicator(&table)?.value))
        })
    };
    let (a, b) = (run(1)?, run(threads)?);
    let same = a.0.to_bits() == b.0.to_bits() && a.1.to_bits() == b.1.to_bits();
    Ok(CheckResult {
        name: "determinism".into(),
        passed: same,
        worst: if same {
            0.0
        } else {
            (a.0 - b.0).abs().max((a.1 - b.1).abs())
        },
        tolerance: 0.0,
        detail: format!("1 vs {threads} threads, entangled12 wigner"),
    })
}

/// Largest odd point count whose two-mode product grid fits the 4D budget.
pub fn max_two_mode_points() -> usize {
    let mut n = 1usize;
    while ((n + 2) as u128).pow(4) <= MAX_4D_POINTS {
        n += 2;
    }
    n
}

fn grid_halving(states: &[(String, State)]) -> Result<CheckResult> {
    let coarse_points = 121;
    let jobs: Vec<(String, State, usize)> = states
        .iter()
        .map(|(name, state)| {
            let fine = match state {
                State::Single(_) => 161,
                State::Two(_) => max_two_mode_points().min(161),
            };
            (name.clone(), state.clone(), fine)
        })
        .collect();
    let diffs = jobs
        .par_iter()
        .map(|(name, state, fine)| {
            let delta_at = |points: usize| -> Result<f64> {
                let spec = GridSpec::new(None, Some(points));
                let grid = resolve_grid(state, &spec)?;
                delta_indicator(&build_term_table_unchecked(
                    state,
                    Representation::Wigner,
                    &grid,
                )?)
                .map(|r| r.value)
            };
            Ok((
                name.clone(),
                *fine,
                (delta_at(coarse_points)? - delta_at(*fine)?).abs(),
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut worst = Worst::new();
    for (name, fine, d) in diffs {
        worst.update(d, || format!("{name} ({coarse_points} vs {fine} points)"));
    }
    Ok(worst.check("grid halving (delta)", GRID_HALVING_TOL))
}

/// Run every check. Errors inside a check mark it failed instead of
/// aborting the whole report.
pub fn run_validation(opts: &ValidationOptions) -> Result<ValidationReport> {
    let states = suite_states(opts.convention)?;
    let mut checks = Vec::new();
    match Tables::build(&states, &opts.reps, &opts.grid) {
        Ok(tables) => {
            checks.push(
                normalization(&tables)
                    .unwrap_or_else(|e| failed("normalization", NORMALIZATION_TOL, &e)),
            );
            if opts.reps.contains(&Representation::Wigner) {
                checks.push(
                    wigner_marginals(&tables)
                        .unwrap_or_else(|e| failed("wigner marginals", MARGINAL_TOL, &e)),
                );
            }
            checks
                .push(completeness(&tables).unwrap_or_else(|e| {
                    failed("decomposition completeness", COMPLETENESS_TOL, &e)
                }));
            if opts.reps.contains(&Representation::Husimi) {
                checks.push(husimi_positivity(&tables));
            }
            checks
                .push(eta_range(&tables).unwrap_or_else(|e| failed("eta in [0,1]", ETA_SLACK, &e)));
        }
        Err(e) => checks.push(failed("term tables", 0.0, &e)),
    }
    checks.push(
        closed_vs_numeric()
            .unwrap_or_else(|e| failed("closed-form vs numeric", CLOSED_FORM_TOL, &e)),
    );
    checks.push(determinism(opts.threads).unwrap_or_else(|e| failed("determinism", 0.0, &e)));
    if opts.grid_halving {
        checks.push(
            grid_halving(&states)
                .unwrap_or_else(|e| failed("grid halving (delta)", GRID_HALVING_TOL, &e)),
        );
    }
    let all_passed = checks.iter().all(|c| c.passed);
    Ok(ValidationReport { checks, all_passed })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn budget_bound_point_count() {
        let n = max_two_mode_points();
        assert_eq!(n, 141);
        assert!((n as u128).pow(4) <= MAX_4D_POINTS && ((n + 2) as u128).pow(4) > MAX_4D_POINTS);
    }

    #[test]
    fn closed_form_check_passes() {
        let c = closed_vs_numeric().unwrap();
        assert!(c.passed, "{c:?}");
    }

    #[test]
    fn coarse_grid_fails_normalization() {
        let opts = ValidationOptions {
            grid: GridSpec::new(None, Some(16)),
            grid_halving: false,
            ..Default::default()
        };
        let report = run_validation(&opts).unwrap();
        assert!(!report.all_passed);
        let norm = report
            .checks
            .iter()
            .find(|c| c.name == "normalization")
            .unwrap();
        assert!(!norm.passed, "{norm:?}");
    }
}
