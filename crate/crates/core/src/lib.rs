//! Phase-space distributions (Wigner, Husimi, Rivier) for superpositions
//! of Fock and squeezed-Fock states, with the negativity indicator `δ`,
//! the interference indicator `η`, and entanglement entropy.
//!
//! ```
//! use psnci_core::{delta_indicator, build_term_table, resolve_grid, GridSpec, Representation, SingleModeState, State};
//!
//! let state = State::Single(SingleModeState::fock(1).unwrap());
//! let grid = resolve_grid(&state, &GridSpec::default()).unwrap();
//! let table = build_term_table(&state, Representation::Wigner, &grid).unwrap();
//! let delta = delta_indicator(&table).unwrap();
//! assert!((delta.value - 0.42612).abs() < 1e-3);
//! ```

// `!(x > y)` comparisons are used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod indicators;
pub mod phasespace;
pub mod quadrature;
pub mod specialfn;
pub mod states;
pub mod validation;

pub use error::{Error, Result};
pub use indicators::{
    delta_indicator, eta_indicator, evaluate, resolve_grid, sweep_a, sweep_r, von_neumann_entropy,
    EntangledFamily, IndicatorResult, LogBase, RepValues, SqueezedFamily, SweepOptions, SweepRow,
};
pub use phasespace::{
    build_term_table, direct_total, Axis, GridSpec, ModeGrid, PairTerm, PhaseGrid, Representation,
    TermTable, TermValues,
};
pub use quadrature::QuadratureResult;
pub use states::{CoeffConvention, Primitive, SingleModeState, State, StateSpec, TwoModeState};
