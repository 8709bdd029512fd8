use std::fmt::Write as _;
use std::path::Path;

use psnci_core::phasespace::grid::{Axis, ModeGrid};
use psnci_core::validation::{run_validation, ValidationOptions};
use psnci_core::{
    build_term_table, delta_indicator, eta_indicator, resolve_grid, sweep_a, sweep_r,
    von_neumann_entropy, GridSpec, PhaseGrid, State, StateSpec, SweepOptions, SweepRow, TermTable,
    TermValues,
};
use serde_json::{json, Value};

use crate::args::{
    Cli, Command, CommonArgs, DistArgs, IndicatorArgs, StateArg, SweepAArgs, SweepRArgs,
    ValidateArgs,
};
use crate::output::{emit, fmt_num, fmt_opt, write_sidecar};
use crate::{CliError, CliResult};

pub fn dispatch(cli: &Cli) -> CliResult<()> {
    let common = &cli.common;
    match &cli.command {
        Command::Dist(a) => dist(common, a),
        Command::Indicator(a) => indicator(common, a),
        Command::SweepA(a) => sweep_a_cmd(common, a),
        Command::SweepR(a) => sweep_r_cmd(common, a),
        Command::Entropy(a) => entropy(common, a),
        Command::Validate(a) => validate(common, a),
    }
}

fn grid_spec(common: &CommonArgs) -> GridSpec {
    GridSpec::new(common.extent, common.points.map(|n| n as usize))
}

fn common_json(common: &CommonArgs) -> Value {
    json!({
        "extent": common.extent,
        "points": common.points,
        "tol": common.tol,
        "coeff_convention": common.coeff_convention,
        "entropy_base": common.entropy_base,
        "threads": common.threads,
    })
}

fn config_json(command: &str, common: &CommonArgs, extra: Value) -> Value {
    let mut config = json!({
        "tool": "psnci",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "options": common_json(common),
    });
    if let (Value::Object(map), Value::Object(more)) = (&mut config, extra) {
        map.extend(more);
    }
    config
}

fn axis_json(axis: &Axis) -> Value {
    json!({ "min": axis.min, "max": axis.max, "points": axis.n })
}

fn grid_json(grid: &PhaseGrid) -> Value {
    Value::Array(
        grid.modes()
            .iter()
            .map(|m| json!({ "q": axis_json(&m.q), "p": axis_json(&m.p) }))
            .collect(),
    )
}

/// Read the state from inline JSON or a file, returning the description as given
/// and the normalised state.
fn load_state(arg: &StateArg) -> CliResult<(StateSpec, State)> {
    let text = if arg.state.trim_start().starts_with('{') {
        arg.state.clone()
    } else {
        std::fs::read_to_string(&arg.state)
            .map_err(|e| CliError::Usage(format!("cannot read state file '{}': {e}", arg.state)))?
    };
    let spec: StateSpec = serde_json::from_str(&text)
        .map_err(|e| CliError::Usage(format!("invalid state JSON: {e}")))?;
    let state = spec.to_state()?.normalize()?;
    Ok((spec, state))
}

fn check_tol(tol: Option<f64>, results: &[(String, f64)]) -> CliResult<()> {
    let Some(tol) = tol else { return Ok(()) };
    match results.iter().find(|(_, e)| !(*e <= tol)) {
        Some((what, e)) => Err(CliError::Numerical(format!(
            "{what}: error estimate {e:.3e} exceeds --tol {tol:.3e}"
        ))),
        None => Ok(()),
    }
}

fn pair_label(n_terms: usize, i: usize, j: usize) -> String {
    if n_terms < 10 {
        format!("f_{}{}", i + 1, j + 1)
    } else {
        format!("f_{}_{}", i + 1, j + 1)
    }
}

fn term_count(table: &TermTable) -> usize {
    table.pairs().iter().map(|p| p.j + 1).max().unwrap_or(0)
}

/// Diagonal pairs first, then off-diagonal ones, each in index order.
fn ordered_pairs(table: &TermTable) -> Vec<usize> {
    let pairs = table.pairs();
    let mut order: Vec<usize> = (0..pairs.len())
        .filter(|&k| pairs[k].is_diagonal())
        .collect();
    order.extend((0..pairs.len()).filter(|&k| !pairs[k].is_diagonal()));
    order
}

fn single_mode_csv(table: &TermTable) -> CliResult<String> {
    let grid: &ModeGrid = table.grid().mode(0);
    let total = table
        .total_dense()
        .ok_or_else(|| CliError::Numerical("single-mode table without dense terms".into()))?;
    let order = ordered_pairs(table);
    let n_terms = term_count(table);
    let columns: Vec<&[f64]> = order
        .iter()
        .map(|&k| match &table.pairs()[k].values {
            TermValues::Dense(v) => Ok(v.as_slice()),
            TermValues::Separable(_) => Err(CliError::Numerical(
                "single-mode table without dense terms".into(),
            )),
        })
        .collect::<CliResult<_>>()?;
    let mut out = String::from("q,p,f_total");
    for &k in &order {
        let pair = &table.pairs()[k];
        write!(out, ",{}", pair_label(n_terms, pair.i, pair.j)).expect("writing to a String");
    }
    out.push('\n');
    for iq in 0..grid.q.n {
        for ip in 0..grid.p.n {
            let idx = grid.index(iq, ip);
            write!(
                out,
                "{},{},{}",
                fmt_num(grid.q.value(iq)),
                fmt_num(grid.p.value(ip)),
                fmt_num(total[idx])
            )
            .expect("writing to a String");
            for col in &columns {
                write!(out, ",{}", fmt_num(col[idx])).expect("writing to a String");
            }
            out.push('\n');
        }
    }
    Ok(out)
}

/// Per-mode factor grids; the 4D terms are listed separately as products.
fn two_mode_csv(table: &TermTable) -> String {
    let width = table.factor_count(0).max(table.factor_count(1));
    let mut out = String::from("mode,q,p");
    for k in 0..width {
        write!(out, ",g_{}", k + 1).expect("writing to a String");
    }
    out.push('\n');
    for mode in 0..2 {
        let grid = table.grid().mode(mode);
        let count = table.factor_count(mode);
        for iq in 0..grid.q.n {
            for ip in 0..grid.p.n {
                let idx = grid.index(iq, ip);
                write!(
                    out,
                    "{},{},{}",
                    mode + 1,
                    fmt_num(grid.q.value(iq)),
                    fmt_num(grid.p.value(ip))
                )
                .expect("writing to a String");
                for k in 0..width {
                    out.push(',');
                    if k < count {
                        out.push_str(&fmt_num(table.factor(mode, k)[idx]));
                    }
                }
                out.push('\n');
            }
        }
    }
    out
}

fn product_json(table: &TermTable) -> Value {
    let n_terms = term_count(table);
    Value::Array(
        ordered_pairs(table)
            .into_iter()
            .map(|k| {
                let pair = &table.pairs()[k];
                let products = match &pair.values {
                    TermValues::Separable(ps) => ps
                        .iter()
                        .map(|p| json!({ "coeff": p.coeff, "mode1": p.mode1 + 1, "mode2": p.mode2 + 1 }))
                        .collect(),
                    TermValues::Dense(_) => Vec::new(),
                };
                json!({ "term": pair_label(n_terms, pair.i, pair.j), "products": products })
            })
            .collect(),
    )
}

fn dist(common: &CommonArgs, a: &DistArgs) -> CliResult<()> {
    let (spec, state) = load_state(&a.state)?;
    let grid = resolve_grid(&state, &grid_spec(common))?;
    let table = build_term_table(&state, a.rep, &grid)?;
    let norm = table.total_integral()?;
    let mut extra = json!({ "state": spec, "rep": a.rep, "grid": grid_json(&grid) });
    let body = match state {
        State::Single(_) => single_mode_csv(&table)?,
        State::Two(_) => {
            extra["factor_products"] = product_json(&table);
            two_mode_csv(&table)
        }
    };
    let out = common.out.as_deref();
    emit(out, &body)?;
    write_sidecar(out, &config_json("dist", common, extra.clone()))?;
    let line = format!("norm_check {}", fmt_num(norm));
    if out.is_some() {
        println!("{line}");
    } else {
        eprintln!("{line}");
        if let Some(products) = extra.get("factor_products") {
            eprintln!(
                "{}",
                serde_json::to_string(products).map_err(|e| CliError::Io(e.to_string()))?
            );
        }
    }
    Ok(())
}

fn indicator(common: &CommonArgs, a: &IndicatorArgs) -> CliResult<()> {
    let (spec, state) = load_state(&a.state)?;
    let grid = resolve_grid(&state, &grid_spec(common))?;
    let mut results = Vec::new();
    let mut errors = Vec::new();
    for &rep in &a.reps {
        let table = build_term_table(&state, rep, &grid)?;
        let delta = delta_indicator(&table)?;
        let eta = eta_indicator(&table)?;
        errors.push((format!("{rep} delta"), delta.error_estimate));
        errors.push((format!("{rep} eta"), eta.error_estimate));
        results.push(json!({
            "rep": rep,
            "delta": delta.value,
            "delta_err": delta.error_estimate,
            "eta": eta.value,
            "eta_err": eta.error_estimate,
            "norm_check": delta.norm_check,
            "valid": delta.valid,
        }));
    }
    let report = json!({
        "config": config_json("indicator", common, json!({ "state": spec, "reps": a.reps, "grid": grid_json(&grid) })),
        "results": results,
    });
    let mut text =
        serde_json::to_string_pretty(&report).map_err(|e| CliError::Io(e.to_string()))?;
    text.push('\n');
    emit(common.out.as_deref(), &text)?;
    check_tol(common.tol, &errors)
}

const SWEEP_HEADER: &str = "param,rep,delta,eta,entropy,norm_check,err_est";

fn sweep_csv(rows: &[SweepRow], with_amplitude: bool) -> String {
    let mut out = String::from(SWEEP_HEADER);
    if with_amplitude {
        out.push_str(",a");
    }
    out.push('\n');
    for row in rows {
        for v in &row.values {
            let err = v.delta.map_or(v.eta.error_estimate, |d| {
                d.error_estimate.max(v.eta.error_estimate)
            });
            write!(
                out,
                "{},{},{},{},{},{},{}",
                fmt_num(row.param),
                v.representation,
                fmt_opt(v.delta.map(|d| d.value)),
                fmt_num(v.eta.value),
                fmt_opt(row.entropy),
                fmt_num(v.eta.norm_check),
                fmt_num(err)
            )
            .expect("writing to a String");
            if with_amplitude {
                write!(out, ",{}", fmt_opt(row.amplitude)).expect("writing to a String");
            }
            out.push('\n');
        }
    }
    out
}

fn sweep_errors(rows: &[SweepRow]) -> Vec<(String, f64)> {
    rows.iter()
        .flat_map(|row| {
            row.values.iter().flat_map(move |v| {
                let at = format!("{} at param {}", v.representation, fmt_num(row.param));
                let mut e = vec![(format!("{at} eta"), v.eta.error_estimate)];
                if let Some(d) = v.delta {
                    e.push((format!("{at} delta"), d.error_estimate));
                }
                e
            })
        })
        .collect()
}

fn linspace(lo: f64, hi: f64, steps: usize) -> Vec<f64> {
    if steps == 1 {
        return vec![lo];
    }
    (0..steps)
        .map(|k| {
            if k + 1 == steps {
                hi
            } else {
                lo + (hi - lo) * k as f64 / (steps - 1) as f64
            }
        })
        .collect()
}

fn sweep_options(common: &CommonArgs, swap_modes: bool) -> SweepOptions {
    SweepOptions {
        grid: grid_spec(common),
        convention: common.coeff_convention,
        entropy_base: common.entropy_base,
        swap_modes,
    }
}

fn finish_sweep(
    common: &CommonArgs,
    command: &str,
    rows: &[SweepRow],
    with_amplitude: bool,
    extra: Value,
) -> CliResult<()> {
    let out = common.out.as_deref();
    emit(out, &sweep_csv(rows, with_amplitude))?;
    write_sidecar(out, &config_json(command, common, extra))?;
    check_tol(common.tol, &sweep_errors(rows))
}

fn sweep_a_cmd(common: &CommonArgs, a: &SweepAArgs) -> CliResult<()> {
    let a_sq = match &a.a2 {
        Some(values) => values.clone(),
        None => linspace(0.0, 1.0, a.steps as usize),
    };
    let rows = sweep_a(
        a.family,
        &a_sq,
        &a.reps,
        &sweep_options(common, a.swap_modes),
    )?;
    let extra = json!({
        "family": format!("entangled{}{}", a.family.n_low, a.family.n_high),
        "a2": a_sq,
        "reps": a.reps,
        "swap_modes": a.swap_modes,
    });
    finish_sweep(common, "sweep-a", &rows, false, extra)
}

fn sweep_r_cmd(common: &CommonArgs, a: &SweepRArgs) -> CliResult<()> {
    if !(a.rmax > 0.0) {
        return Err(CliError::Usage(format!(
            "--rmax must be positive, got {}",
            a.rmax
        )));
    }
    let r = linspace(0.0, a.rmax, a.steps as usize);
    let rows = sweep_r(a.family, &r, &a.a, a.rep, &sweep_options(common, false))?;
    let extra = json!({ "family": a.family, "r": r, "a": a.a, "rep": a.rep });
    finish_sweep(common, "sweep-r", &rows, true, extra)
}

fn entropy(common: &CommonArgs, a: &StateArg) -> CliResult<()> {
    let (spec, state) = load_state(a)?;
    let State::Two(two) = &state else {
        return Err(CliError::Usage("entropy needs a two-mode state".into()));
    };
    let value = von_neumann_entropy(two, common.entropy_base)?;
    let report = json!({
        "config": config_json("entropy", common, json!({ "state": spec })),
        "entropy": value,
        "base": common.entropy_base,
    });
    let mut text =
        serde_json::to_string_pretty(&report).map_err(|e| CliError::Io(e.to_string()))?;
    text.push('\n');
    Ok(emit(common.out.as_deref(), &text)?)
}

fn validate(common: &CommonArgs, a: &ValidateArgs) -> CliResult<()> {
    let mut opts = ValidationOptions {
        grid: grid_spec(common),
        reps: a.reps.clone(),
        convention: common.coeff_convention,
        grid_halving: !a.skip_grid_halving,
        ..Default::default()
    };
    if let Some(n) = common.threads {
        opts.threads = (n as usize).max(2);
    }
    let report = run_validation(&opts)?;
    println!("{report}");
    if let Some(path) = common.out.as_deref() {
        write_validation_json(path, common, a, &report)?;
    }
    if report.all_passed {
        Ok(())
    } else {
        Err(CliError::ValidationFailed)
    }
}

fn write_validation_json(
    path: &Path,
    common: &CommonArgs,
    a: &ValidateArgs,
    report: &psnci_core::validation::ValidationReport,
) -> CliResult<()> {
    let value = json!({
        "config": config_json("validate", common, json!({ "reps": a.reps, "grid_halving": !a.skip_grid_halving })),
        "report": report,
    });
    let mut text = serde_json::to_string_pretty(&value).map_err(|e| CliError::Io(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linspace_endpoints() {
        assert_eq!(linspace(0.0, 1.0, 1), vec![0.0]);
        let v = linspace(0.0, 2.0, 9);
        assert_eq!(v.len(), 9);
        assert_eq!(v[8], 2.0);
        assert_eq!(v[1], 0.25);
        assert_eq!(linspace(0.0, 1.0, 21)[10], 0.5);
    }

    #[test]
    fn pair_labels() {
        assert_eq!(pair_label(3, 0, 1), "f_12");
        assert_eq!(pair_label(12, 9, 10), "f_10_11");
    }
}
