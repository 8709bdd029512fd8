//! Wigner, Husimi and Rivier distributions on phase-space grids.

pub mod grid;
pub mod kernels;
pub mod table;

use serde::{Deserialize, Serialize};

use crate::error::Error;

pub use grid::{Axis, GridSpec, ModeGrid, PhaseGrid};
pub use kernels::{
    coherent_overlap, cross_wigner_fock_closed, cross_wigner_numeric, husimi_term, rivier_term,
    wigner_term, HUSIMI_PREFACTOR,
};
pub use table::{build_term_table, direct_total, FactorProduct, PairTerm, TermTable, TermValues};

/// Phase-space representation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Representation {
    Wigner,
    Husimi,
    Rivier,
}

impl Representation {
    pub const ALL: [Representation; 3] = [
        Representation::Wigner,
        Representation::Husimi,
        Representation::Rivier,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Representation::Wigner => "wigner",
            Representation::Husimi => "husimi",
            Representation::Rivier => "rivier",
        }
    }

    /// `D_ji = conj(D_ij)` holds for this representation.
    pub fn is_hermitian(&self) -> bool {
        !matches!(self, Representation::Rivier)
    }
}

impl std::fmt::Display for Representation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Representation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s.trim().to_ascii_lowercase().as_str() {
            "wigner" => Ok(Representation::Wigner),
            "husimi" => Ok(Representation::Husimi),
            "rivier" => Ok(Representation::Rivier),
            other => Err(Error::Invalid(format!("unknown representation '{other}'"))),
        }
    }
}
