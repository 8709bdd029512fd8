//! Finite superpositions of Fock and squeezed-Fock states.
//!
//! Units are dimensionless oscillator units (ħ = m = ω = 1). A squeeze
//! `r > 0` contracts the position wavefunction: `ψ(q) → e^{r/2} ψ(e^r q)`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::adaptive_gk15;
use crate::specialfn::{hermite_phys, log_factorial_unchecked, MAX_ORDER};

/// Largest accepted |r|.
pub const MAX_SQUEEZE: f64 = 5.0;

/// Absolute tolerance of [`overlap`] between primitives.
pub const OVERLAP_TOL: f64 = 1e-10;

const NORM_FLOOR: f64 = 1e-12;

// ψ_n(x) beyond the turning point √(2n+1) by this margin is below 1e-17.
const SUPPORT_MARGIN: f64 = 8.5;

/// A single-mode basis state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Primitive {
    Fock {
        n: u32,
    },
    #[serde(rename = "squeezed")]
    SqueezedFock {
        n: u32,
        r: f64,
    },
}

impl Primitive {
    pub fn fock(n: u32) -> Result<Self> {
        let p = Primitive::Fock { n };
        p.validate()?;
        Ok(p)
    }

    pub fn squeezed(n: u32, r: f64) -> Result<Self> {
        let p = Primitive::SqueezedFock { n, r };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n() > MAX_ORDER {
            return Err(Error::Domain(format!(
                "occupation {} exceeds supported maximum {MAX_ORDER}",
                self.n()
            )));
        }
        let r = self.r();
        if !r.is_finite() || r.abs() > MAX_SQUEEZE {
            return Err(Error::Domain(format!(
                "squeezing {r} outside [-{MAX_SQUEEZE}, {MAX_SQUEEZE}]"
            )));
        }
        Ok(())
    }

    pub fn n(&self) -> u32 {
        match *self {
            Primitive::Fock { n } | Primitive::SqueezedFock { n, .. } => n,
        }
    }

    /// Squeezing parameter; zero for plain Fock states.
    pub fn r(&self) -> f64 {
        match *self {
            Primitive::Fock { .. } => 0.0,
            Primitive::SqueezedFock { r, .. } => r,
        }
    }

    pub fn is_squeezed(&self) -> bool {
        self.r() != 0.0
    }

    /// Position wavefunction. Real for every primitive.
    #[inline]
    pub fn psi(&self, q: f64) -> f64 {
        let r = self.r();
        if r == 0.0 {
            fock_psi_unchecked(self.n(), q)
        } else {
            (0.5 * r).exp() * fock_psi_unchecked(self.n(), r.exp() * q)
        }
    }

    /// Momentum wavefunction `φ(p) = (2π)^{-1/2} ∫ ψ(q) e^{-iqp} dq`.
    pub fn phi(&self, p: f64) -> Complex64 {
        let r = self.r();
        let n = self.n();
        let magnitude = if r == 0.0 {
            fock_psi_unchecked(n, p)
        } else {
            (-0.5 * r).exp() * fock_psi_unchecked(n, (-r).exp() * p)
        };
        minus_i_pow(n) * magnitude
    }

    /// Half-width beyond which `|ψ(q)|` is negligible.
    pub fn position_support(&self) -> f64 {
        (f64::from(2 * self.n() + 1).sqrt() + SUPPORT_MARGIN) * (-self.r()).exp()
    }

    /// Half-width beyond which `|φ(p)|` is negligible.
    pub fn momentum_support(&self) -> f64 {
        (f64::from(2 * self.n() + 1).sqrt() + SUPPORT_MARGIN) * self.r().exp()
    }

    /// Same state with `r = 0` spelled as a plain Fock state.
    pub fn canonical(&self) -> Self {
        if self.r() == 0.0 {
            Primitive::Fock { n: self.n() }
        } else {
            *self
        }
    }
}

/// `(-i)^n`.
pub(crate) fn minus_i_pow(n: u32) -> Complex64 {
    match n % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, -1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, 1.0),
    }
}

/// Harmonic-oscillator eigenfunction `ψ_n(q)`.
pub fn fock_psi(n: u32, q: f64) -> Result<f64> {
    if n > MAX_ORDER {
        return Err(Error::Domain(format!("occupation {n} exceeds {MAX_ORDER}")));
    }
    if !q.is_finite() {
        return Err(Error::Domain(format!("position {q} is not finite")));
    }
    Ok(fock_psi_unchecked(n, q))
}

/// `e^{r/2} ψ_n(e^r q)`, the position-squeezed number state.
pub fn squeezed_fock_psi(n: u32, r: f64, q: f64) -> Result<f64> {
    Primitive::squeezed(n, r)?;
    if !q.is_finite() {
        return Err(Error::Domain(format!("position {q} is not finite")));
    }
    Ok(Primitive::SqueezedFock { n, r }.psi(q))
}

/// Closed-form momentum wavefunction of a primitive.
pub fn momentum_wavefunction(prim: &Primitive, p: f64) -> Result<Complex64> {
    prim.validate()?;
    Ok(prim.phi(p))
}

// Normalised recurrence:
// ψ_{k+1} = sqrt(2/(k+1)) x ψ_k − sqrt(k/(k+1)) ψ_{k−1}.
#[inline]
pub(crate) fn fock_psi_unchecked(n: u32, x: f64) -> f64 {
    if x.abs() > 40.0 {
        return 0.0;
    }
    let mut prev = PI.powf(-0.25) * (-0.5 * x * x).exp();
    if n == 0 {
        return prev;
    }
    let mut cur = std::f64::consts::SQRT_2 * x * prev;
    for k in 1..n {
        let k = f64::from(k);
        let next = (2.0 / (k + 1.0)).sqrt() * x * cur - (k / (k + 1.0)).sqrt() * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// `ψ_n(q)` from the Hermite polynomial and log-space normalisation.
pub fn fock_psi_from_hermite(n: u32, q: f64) -> Result<f64> {
    let h = hermite_phys(n, q)?;
    let log_norm =
        -0.25 * PI.ln() - 0.5 * (f64::from(n) * 2f64.ln() + log_factorial_unchecked(u64::from(n)));
    Ok(h * (log_norm - 0.5 * q * q).exp())
}

/// `⟨a|b⟩` for two primitives, by adaptive quadrature in position space.
pub fn primitive_overlap(a: &Primitive, b: &Primitive) -> Result<f64> {
    if a.canonical() == b.canonical() {
        return Ok(1.0);
    }
    // Same squeeze: the (unitary) squeeze preserves orthonormality.
    if a.r() == b.r() {
        return Ok(0.0);
    }
    // Opposite parity
    if (a.n() + b.n()) % 2 == 1 {
        return Ok(0.0);
    }
    let half = a.position_support().min(b.position_support());
    let narrowest = (-a.r().max(b.r()).max(0.0)).exp();
    let panels = ((2.0 * half / narrowest).ceil() as usize).max(16);
    let (value, _) = adaptive_gk15(|x| a.psi(x) * b.psi(x), -half, half, OVERLAP_TOL, panels)?;
    Ok(value)
}

/// Choice of the vacuum coefficient in the squeezed superpositions.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoeffConvention {
    /// `(1 - a²)|0⟩ + a|n, r⟩`, then renormalised.
    Printed,
    /// `sqrt(1 - a²)|0⟩ + a|n, r⟩`, then renormalised.
    #[default]
    Sqrt,
}

impl CoeffConvention {
    pub fn vacuum_coefficient(&self, a: f64) -> f64 {
        match self {
            CoeffConvention::Printed => 1.0 - a * a,
            CoeffConvention::Sqrt => (1.0 - a * a).sqrt(),
        }
    }
}

impl std::str::FromStr for CoeffConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "printed" => Ok(CoeffConvention::Printed),
            "sqrt" => Ok(CoeffConvention::Sqrt),
            other => Err(Error::Invalid(format!(
                "unknown coefficient convention '{other}'"
            ))),
        }
    }
}

impl std::fmt::Display for CoeffConvention {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CoeffConvention::Printed => "printed",
            CoeffConvention::Sqrt => "sqrt",
        })
    }
}

fn check_amplitude(c: Complex64) -> Result<()> {
    if c.re.is_finite() && c.im.is_finite() {
        Ok(())
    } else {
        Err(Error::Invalid(format!("amplitude {c} is not finite")))
    }
}

/// Superposition `Σ c_k |prim_k⟩` of one mode.
#[derive(Debug, Clone, PartialEq)]
pub struct SingleModeState {
    terms: Vec<(Complex64, Primitive)>,
}

impl SingleModeState {
    pub fn new(terms: Vec<(Complex64, Primitive)>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::Invalid("state has no terms".into()));
        }
        for (c, p) in &terms {
            check_amplitude(*c)?;
            p.validate()?;
        }
        Ok(Self { terms })
    }

    pub fn from_primitive(prim: Primitive) -> Result<Self> {
        Self::new(vec![(Complex64::new(1.0, 0.0), prim)])
    }

    pub fn fock(n: u32) -> Result<Self> {
        Self::from_primitive(Primitive::fock(n)?)
    }

    /// Normalised `c₀|0⟩ + a|n, r⟩` where `c₀` follows `convention`.
    pub fn vacuum_plus_squeezed(
        n: u32,
        a: f64,
        r: f64,
        convention: CoeffConvention,
    ) -> Result<Self> {
        if !(-1.0..=1.0).contains(&a) {
            return Err(Error::Invalid(format!("amplitude a = {a} outside [-1, 1]")));
        }
        Self::new(vec![
            (
                Complex64::new(convention.vacuum_coefficient(a), 0.0),
                Primitive::fock(0)?,
            ),
            (
                Complex64::new(a, 0.0),
                Primitive::squeezed(n, r)?.canonical(),
            ),
        ])?
        .normalize()
    }

    /// Normalised ψ_00r.
    pub fn psi_00r(a: f64, r: f64, convention: CoeffConvention) -> Result<Self> {
        Self::vacuum_plus_squeezed(0, a, r, convention)
    }

    /// Normalised ψ_01r.
    pub fn psi_01r(a: f64, r: f64, convention: CoeffConvention) -> Result<Self> {
        Self::vacuum_plus_squeezed(1, a, r, convention)
    }

    pub fn terms(&self) -> &[(Complex64, Primitive)] {
        &self.terms
    }

    pub fn primitives(&self) -> impl Iterator<Item = &Primitive> {
        self.terms.iter().map(|(_, p)| p)
    }

    /// `ψ(q) = Σ c_k ψ_k(q)`.
    pub fn psi(&self, q: f64) -> Complex64 {
        self.terms.iter().map(|(c, p)| c * p.psi(q)).sum()
    }

    pub fn phi(&self, p: f64) -> Complex64 {
        self.terms.iter().map(|(c, prim)| c * prim.phi(p)).sum()
    }

    pub fn norm_squared(&self) -> Result<f64> {
        Ok(overlap(self, self)?.re)
    }

    /// Divide all amplitudes by `sqrt(⟨ψ|ψ⟩)`.
    pub fn normalize(&self) -> Result<Self> {
        let norm = self.norm_squared()?.max(0.0).sqrt();
        if norm < NORM_FLOOR {
            return Err(Error::DegenerateState { norm });
        }
        Ok(Self {
            terms: self.terms.iter().map(|(c, p)| (c / norm, *p)).collect(),
        })
    }
}

/// `⟨s1|s2⟩`, including cross-overlaps of non-orthogonal primitives.
pub fn overlap(s1: &SingleModeState, s2: &SingleModeState) -> Result<Complex64> {
    let mut total = Complex64::new(0.0, 0.0);
    for (ci, pi) in s1.terms() {
        for (cj, pj) in s2.terms() {
            let o = primitive_overlap(pi, pj)?;
            if o != 0.0 {
                total += ci.conj() * cj * o;
            }
        }
    }
    Ok(total)
}

/// Two-mode term `amplitude · |mode1⟩ ⊗ |mode2⟩`.
pub type TwoModeTerm = (Complex64, Primitive, Primitive);

/// Superposition of two-mode product states.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoModeState {
    terms: Vec<TwoModeTerm>,
}

impl TwoModeState {
    pub fn new(terms: Vec<TwoModeTerm>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::Invalid("state has no terms".into()));
        }
        for (c, a, b) in &terms {
            check_amplitude(*c)?;
            a.validate()?;
            b.validate()?;
        }
        Ok(Self { terms })
    }

    /// `a|low, high⟩ + sqrt(1 - a²)|high, low⟩`, ket order (mode 1, mode 2).
    pub fn entangled(n_low: u32, n_high: u32, a: f64) -> Result<Self> {
        if !(-1.0..=1.0).contains(&a) {
            return Err(Error::Invalid(format!("amplitude a = {a} outside [-1, 1]")));
        }
        let b = (1.0 - a * a).sqrt();
        Self::new(vec![
            (
                Complex64::new(a, 0.0),
                Primitive::fock(n_low)?,
                Primitive::fock(n_high)?,
            ),
            (
                Complex64::new(b, 0.0),
                Primitive::fock(n_high)?,
                Primitive::fock(n_low)?,
            ),
        ])
    }

    pub fn terms(&self) -> &[TwoModeTerm] {
        &self.terms
    }

    /// Exchange the roles of the two modes.
    pub fn swap_modes(&self) -> Self {
        Self {
            terms: self.terms.iter().map(|&(c, a, b)| (c, b, a)).collect(),
        }
    }

    pub fn mode_primitives(&self, mode: usize) -> impl Iterator<Item = &Primitive> {
        self.terms
            .iter()
            .map(move |(_, a, b)| if mode == 0 { a } else { b })
    }

    pub fn norm_squared(&self) -> Result<f64> {
        let mut total = Complex64::new(0.0, 0.0);
        for (ci, ai, bi) in &self.terms {
            for (cj, aj, bj) in &self.terms {
                let o = primitive_overlap(ai, aj)? * primitive_overlap(bi, bj)?;
                if o != 0.0 {
                    total += ci.conj() * cj * o;
                }
            }
        }
        Ok(total.re)
    }

    pub fn normalize(&self) -> Result<Self> {
        let norm = self.norm_squared()?.max(0.0).sqrt();
        if norm < NORM_FLOOR {
            return Err(Error::DegenerateState { norm });
        }
        Ok(Self {
            terms: self
                .terms
                .iter()
                .map(|&(c, a, b)| (c / norm, a, b))
                .collect(),
        })
    }
}

/// A one- or two-mode state.
#[derive(Debug, Clone, PartialEq)]
pub enum State {
    Single(SingleModeState),
    Two(TwoModeState),
}

impl State {
    pub fn modes(&self) -> usize {
        match self {
            State::Single(_) => 1,
            State::Two(_) => 2,
        }
    }

    pub fn normalize(&self) -> Result<Self> {
        Ok(match self {
            State::Single(s) => State::Single(s.normalize()?),
            State::Two(s) => State::Two(s.normalize()?),
        })
    }

    pub fn from_spec(spec: &StateSpec) -> Result<Self> {
        spec.to_state()
    }
}

/// Text description of a state (JSON on the command line).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateSpec {
    pub modes: u8,
    pub terms: Vec<TermSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermSpec {
    pub amp_re: f64,
    #[serde(default)]
    pub amp_im: f64,
    pub mode1: PrimitiveSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode2: Option<PrimitiveSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PrimitiveKind {
    Fock,
    Squeezed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrimitiveSpec {
    #[serde(rename = "type")]
    pub kind: PrimitiveKind,
    pub n: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
}

impl PrimitiveSpec {
    fn to_primitive(self) -> Result<Primitive> {
        match (self.kind, self.r) {
            (PrimitiveKind::Fock, None) => Primitive::fock(self.n),
            (PrimitiveKind::Fock, Some(_)) => {
                Err(Error::Invalid("fock primitive takes no 'r'".into()))
            }
            (PrimitiveKind::Squeezed, Some(r)) => Primitive::squeezed(self.n, r),
            (PrimitiveKind::Squeezed, None) => {
                Err(Error::Invalid("squeezed primitive needs 'r'".into()))
            }
        }
    }

    fn from_primitive(p: &Primitive) -> Self {
        match *p {
            Primitive::Fock { n } => Self {
                kind: PrimitiveKind::Fock,
                n,
                r: None,
            },
            Primitive::SqueezedFock { n, r } => Self {
                kind: PrimitiveKind::Squeezed,
                n,
                r: Some(r),
            },
        }
    }
}

impl StateSpec {
    /// Build the state as written (no normalisation).
    pub fn to_state(&self) -> Result<State> {
        let amp = |t: &TermSpec| Complex64::new(t.amp_re, t.amp_im);
        match self.modes {
            1 => {
                let terms = self
                    .terms
                    .iter()
                    .map(|t| {
                        if t.mode2.is_some() {
                            return Err(Error::Invalid(
                                "single-mode state term has 'mode2'".into(),
                            ));
                        }
                        Ok((amp(t), t.mode1.to_primitive()?))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(State::Single(SingleModeState::new(terms)?))
            }
            2 => {
                let terms = self
                    .terms
                    .iter()
                    .map(|t| {
                        let second = t.mode2.ok_or_else(|| {
                            Error::Invalid("two-mode state term lacks 'mode2'".into())
                        })?;
                        Ok((amp(t), t.mode1.to_primitive()?, second.to_primitive()?))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(State::Two(TwoModeState::new(terms)?))
            }
            m => Err(Error::Invalid(format!("'modes' must be 1 or 2, got {m}"))),
        }
    }

    pub fn from_state(state: &State) -> Self {
        match state {
            State::Single(s) => Self {
                modes: 1,
                terms: s
                    .terms()
                    .iter()
                    .map(|(c, p)| TermSpec {
                        amp_re: c.re,
                        amp_im: c.im,
                        mode1: PrimitiveSpec::from_primitive(p),
                        mode2: None,
                    })
                    .collect(),
            },
            State::Two(s) => Self {
                modes: 2,
                terms: s
                    .terms()
                    .iter()
                    .map(|(c, a, b)| TermSpec {
                        amp_re: c.re,
                        amp_im: c.im,
                        mode1: PrimitiveSpec::from_primitive(a),
                        mode2: Some(PrimitiveSpec::from_primitive(b)),
                    })
                    .collect(),
            },
        }
    }
}
