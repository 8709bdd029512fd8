use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::states::Primitive;

/// Minimum number of points along any axis.
pub const MIN_POINTS: usize = 16;

/// Cap on points per axis after squeeze auto-scaling.
pub const MAX_SCALED_POINTS: usize = 4097;

pub const SINGLE_MODE_HALF_WIDTH: f64 = 7.0;
pub const SINGLE_MODE_POINTS: usize = 281;
pub const TWO_MODE_HALF_WIDTH: f64 = 6.0;
pub const TWO_MODE_POINTS: usize = 121;

/// Uniform axis with `n` nodes from `min` to `max` inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub n: usize,
}

impl Axis {
    pub fn new(min: f64, max: f64, n: usize) -> Result<Self> {
        if n < MIN_POINTS {
            return Err(Error::Invalid(format!(
                "axis needs at least {MIN_POINTS} points, got {n}"
            )));
        }
        if !(min.is_finite() && max.is_finite() && max > min) {
            return Err(Error::Invalid(format!(
                "axis bounds [{min}, {max}] are not increasing"
            )));
        }
        Ok(Self { min, max, n })
    }

    pub fn symmetric(half_width: f64, n: usize) -> Result<Self> {
        Self::new(-half_width, half_width, n)
    }

    pub fn step(&self) -> f64 {
        (self.max - self.min) / (self.n - 1) as f64
    }

    #[inline]
    pub fn value(&self, k: usize) -> f64 {
        if k + 1 == self.n {
            return self.max;
        }
        self.min + (self.max - self.min) * (k as f64 / (self.n - 1) as f64)
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(|k| self.value(k))
    }

    pub fn abs_max(&self) -> f64 {
        self.min.abs().max(self.max.abs())
    }

    /// Composite trapezoid weights.
    pub fn weights(&self) -> Vec<f64> {
        let h = self.step();
        let mut w = vec![h; self.n];
        w[0] *= 0.5;
        w[self.n - 1] *= 0.5;
        w
    }

    /// Same interval with the spacing halved.
    pub fn refined(&self) -> Self {
        Self {
            n: 2 * self.n - 1,
            ..*self
        }
    }

    /// Every other node (indices 0, 2, 4, ...), or `None` if too few remain.
    pub fn coarsened(&self) -> Option<Self> {
        let n = self.n.div_ceil(2);
        if n < MIN_POINTS {
            return None;
        }
        let max = self.value(2 * (n - 1));
        Some(Self {
            min: self.min,
            max,
            n,
        })
    }
}

/// The `(q, p)` plane of one mode. Values are stored row-major with `q`
/// as the slow index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeGrid {
    pub q: Axis,
    pub p: Axis,
}

impl ModeGrid {
    pub fn new(q: Axis, p: Axis) -> Result<Self> {
        Axis::new(q.min, q.max, q.n)?;
        Axis::new(p.min, p.max, p.n)?;
        Ok(Self { q, p })
    }

    pub fn symmetric(half_width: f64, n: usize) -> Result<Self> {
        let axis = Axis::symmetric(half_width, n)?;
        Ok(Self { q: axis, p: axis })
    }

    pub fn len(&self) -> usize {
        self.q.n * self.p.n
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_area(&self) -> f64 {
        self.q.step() * self.p.step()
    }

    #[inline]
    pub fn index(&self, iq: usize, ip: usize) -> usize {
        iq * self.p.n + ip
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        (0..self.q.n).flat_map(move |iq| {
            let q = self.q.value(iq);
            self.p.values().map(move |p| (q, p))
        })
    }

    /// Quadrature weight of every grid point, row-major.
    pub fn point_weights(&self) -> Vec<f64> {
        let wq = self.q.weights();
        let wp = self.p.weights();
        wq.iter()
            .flat_map(|a| wp.iter().map(move |b| a * b))
            .collect()
    }

    pub fn refined(&self) -> Self {
        Self {
            q: self.q.refined(),
            p: self.p.refined(),
        }
    }

    /// Grid made of every other node along both axes.
    pub fn coarsened(&self) -> Option<Self> {
        Some(Self {
            q: self.q.coarsened()?,
            p: self.p.coarsened()?,
        })
    }

    /// Restrict row-major `values` on `self` to [`Self::coarsened`].
    pub fn subsample(&self, values: &[f64]) -> Option<Vec<f64>> {
        let coarse = self.coarsened()?;
        let mut out = Vec::with_capacity(coarse.len());
        for iq in 0..coarse.q.n {
            for ip in 0..coarse.p.n {
                out.push(values[self.index(2 * iq, 2 * ip)]);
            }
        }
        Some(out)
    }
}

/// Grid for one or two modes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseGrid {
    modes: Vec<ModeGrid>,
}

impl PhaseGrid {
    pub fn single(grid: ModeGrid) -> Self {
        Self { modes: vec![grid] }
    }

    pub fn two(first: ModeGrid, second: ModeGrid) -> Self {
        Self {
            modes: vec![first, second],
        }
    }

    pub fn mode_count(&self) -> usize {
        self.modes.len()
    }

    pub fn mode(&self, k: usize) -> &ModeGrid {
        &self.modes[k]
    }

    pub fn modes(&self) -> &[ModeGrid] {
        &self.modes
    }
}

/// User-facing grid overrides. Unset fields take the per-mode-count
/// defaults; axes are then stretched for squeezed primitives.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub extent: Option<f64>,
    pub points: Option<usize>,
}

impl GridSpec {
    pub fn new(extent: Option<f64>, points: Option<usize>) -> Self {
        Self { extent, points }
    }

    /// Grid for one mode whose superposition uses `primitives`.
    ///
    /// A squeeze `r > 0` dilates momentum by `e^r`, `r < 0` dilates
    /// position by `e^{-r}`; the affected axis is widened by that factor
    /// and its point count grows with it so the spacing is kept.
    pub fn resolve_mode<'a, I>(&self, modes: usize, primitives: I) -> Result<ModeGrid>
    where
        I: IntoIterator<Item = &'a Primitive>,
    {
        let (half, n) = if modes == 1 {
            (SINGLE_MODE_HALF_WIDTH, SINGLE_MODE_POINTS)
        } else {
            (TWO_MODE_HALF_WIDTH, TWO_MODE_POINTS)
        };
        let half = self.extent.unwrap_or(half);
        let n = self.points.unwrap_or(n);
        if !(half > 0.0) {
            return Err(Error::Invalid(format!(
                "grid extent {half} must be positive"
            )));
        }
        let (mut r_max, mut r_min) = (0.0f64, 0.0f64);
        for prim in primitives {
            r_max = r_max.max(prim.r());
            r_min = r_min.min(prim.r());
        }
        let stretch = |factor: f64| -> Result<Axis> {
            let points = if factor > 1.0 {
                let scaled = ((n - 1) as f64 * factor).round() as usize + 1;
                scaled.min(MAX_SCALED_POINTS).max(n)
            } else {
                n
            };
            Axis::symmetric(half * factor, points)
        };
        ModeGrid::new(stretch((-r_min).exp())?, stretch(r_max.exp())?)
    }
}
