//! Convex piecewise-linear functions represented as a finite max of affine pieces.
//!
//! Under the quadratic cost `c(x, y) = ½‖x − y‖²` the λc-transform
//! `f^{λc}(x) = sup_y { f(y) − λ c(x, y) }` of `f = maxᵢ {⟨mᵢ, x⟩ + cᵢ}` keeps every
//! slope and bumps each intercept by `‖mᵢ‖² / (2λ)`. That identity is what makes
//! the robust computations in this crate finite-dimensional.

use serde::{Deserialize, Serialize};

use crate::envelope::{upper_envelope, Segment};
use crate::error::{Error, Result};

/// One affine function `x ↦ ⟨slope, x⟩ + intercept`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffinePiece {
    #[serde(rename = "m")]
    pub slope: Vec<f64>,
    #[serde(rename = "c")]
    pub intercept: f64,
}

impl AffinePiece {
    pub fn new(slope: Vec<f64>, intercept: f64) -> Self {
        Self { slope, intercept }
    }

    #[inline]
    pub fn value(&self, x: &[f64]) -> f64 {
        dot(&self.slope, x) + self.intercept
    }

    pub fn slope_norm_sq(&self) -> f64 {
        self.slope.iter().map(|m| m * m).sum()
    }

    fn is_finite(&self) -> bool {
        self.intercept.is_finite() && self.slope.iter().all(|m| m.is_finite())
    }
}

#[derive(Serialize, Deserialize)]
struct PwlRepr {
    dim: usize,
    pieces: Vec<AffinePiece>,
}

/// A convex piecewise-linear function `f(x) = maxᵢ {⟨mᵢ, x⟩ + cᵢ}` on `ℝᵈ`.
///
/// Immutable once built. The JSON form is `{"dim": d, "pieces": [{"m": [..], "c": ..}, ..]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PwlRepr", into = "PwlRepr")]
pub struct PwlConvex {
    dim: usize,
    pieces: Vec<AffinePiece>,
}

impl TryFrom<PwlRepr> for PwlConvex {
    type Error = Error;

    fn try_from(r: PwlRepr) -> Result<Self> {
        PwlConvex::new(r.dim, r.pieces)
    }
}

impl From<PwlConvex> for PwlRepr {
    fn from(f: PwlConvex) -> Self {
        PwlRepr {
            dim: f.dim,
            pieces: f.pieces,
        }
    }
}

impl PwlConvex {
    pub fn new(dim: usize, pieces: Vec<AffinePiece>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::ZeroDimension);
        }
        if pieces.is_empty() {
            return Err(Error::EmptyPieces);
        }
        for p in &pieces {
            if p.slope.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: p.slope.len(),
                });
            }
            if !p.is_finite() {
                return Err(Error::NonFinite("affine piece"));
            }
        }
        Ok(Self { dim, pieces })
    }

    /// Builds a one-dimensional function from `(slope, intercept)` pairs.
    pub fn from_lines(lines: &[(f64, f64)]) -> Result<Self> {
        Self::new(
            1,
            lines
                .iter()
                .map(|&(m, c)| AffinePiece::new(vec![m], c))
                .collect(),
        )
    }

    pub fn constant(dim: usize, value: f64) -> Result<Self> {
        Self::new(dim, vec![AffinePiece::new(vec![0.0; dim], value)])
    }

    /// `x ↦ (x − strike)⁺`
    pub fn call(strike: f64) -> Result<Self> {
        Self::from_lines(&[(1.0, -strike), (0.0, 0.0)])
    }

    /// `x ↦ (strike − x)⁺`
    pub fn put(strike: f64) -> Result<Self> {
        Self::from_lines(&[(-1.0, strike), (0.0, 0.0)])
    }

    /// `x ↦ max{x − K, K − x, 0}`
    pub fn straddle(strike: f64) -> Result<Self> {
        Self::from_lines(&[(1.0, -strike), (-1.0, strike), (0.0, 0.0)])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn pieces(&self) -> &[AffinePiece] {
        &self.pieces
    }

    pub fn len(&self) -> usize {
        self.pieces.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Lipschitz constant in the Euclidean norm, `maxᵢ ‖mᵢ‖`.
    pub fn lipschitz(&self) -> f64 {
        self.pieces
            .iter()
            .map(AffinePiece::slope_norm_sq)
            .fold(0.0, f64::max)
            .sqrt()
    }

    /// True when every piece has a zero slope, so the function is the constant `max cᵢ`.
    pub fn is_constant(&self) -> bool {
        self.pieces
            .iter()
            .all(|p| p.slope.iter().all(|&m| m == 0.0))
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        self.evaluate_with_index(x).map(|(v, _)| v)
    }

    /// Value and the index of the attaining piece; ties go to the lowest index.
    pub fn evaluate_with_index(&self, x: &[f64]) -> Result<(f64, usize)> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("evaluation point"));
        }
        Ok(self.argmax(x))
    }

    /// Unchecked evaluation for hot loops; `x.len()` must equal `dim`.
    #[inline]
    pub(crate) fn value_at(&self, x: &[f64]) -> f64 {
        self.argmax(x).0
    }

    #[inline]
    fn argmax(&self, x: &[f64]) -> (f64, usize) {
        let mut best = self.pieces[0].value(x);
        let mut idx = 0;
        for (i, p) in self.pieces.iter().enumerate().skip(1) {
            let v = p.value(x);
            if v > best {
                best = v;
                idx = i;
            }
        }
        (best, idx)
    }

    /// Pointwise sum, with pieces `(mᵢ + m'ⱼ, cᵢ + c'ⱼ)` over all pairs in row-major order.
    pub fn sum(&self, other: &PwlConvex) -> Result<PwlConvex> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: other.dim,
            });
        }
        let mut pieces = Vec::with_capacity(self.len() * other.len());
        for p in &self.pieces {
            for q in &other.pieces {
                let slope = p.slope.iter().zip(&q.slope).map(|(a, b)| a + b).collect();
                pieces.push(AffinePiece::new(slope, p.intercept + q.intercept));
            }
        }
        PwlConvex::new(self.dim, pieces)
    }

    /// `f + k`
    pub fn shift(&self, k: f64) -> PwlConvex {
        let mut out = self.clone();
        for p in &mut out.pieces {
            p.intercept += k;
        }
        out
    }

    /// `a·f` for `a ≥ 0` (a negative factor would break convexity).
    pub fn scale(&self, a: f64) -> Result<PwlConvex> {
        if !(a >= 0.0 && a.is_finite()) {
            return Err(Error::InvalidSpec(format!(
                "scale factor must be finite and >= 0, got {a}"
            )));
        }
        let mut out = self.clone();
        for p in &mut out.pieces {
            p.slope.iter_mut().for_each(|m| *m *= a);
            p.intercept *= a;
        }
        Ok(out)
    }

    /// `(f − alpha)⁺`, formed by shifting every intercept and appending the zero piece.
    pub fn excess_over(&self, alpha: f64) -> PwlConvex {
        let mut out = self.shift(-alpha);
        out.pieces.push(AffinePiece::new(vec![0.0; self.dim], 0.0));
        out
    }

    /// Closed-form λc-transform under the quadratic cost:
    /// each intercept gains `‖mᵢ‖² / (2λ)`, slopes are unchanged.
    ///
    /// Applied literally to the given piece list, redundant pieces included.
    pub fn lambda_c_transform(&self, lambda: f64) -> Result<PwlConvex> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidLambda(lambda));
        }
        let mut out = self.clone();
        let inv = 0.5 / lambda;
        for p in &mut out.pieces {
            p.intercept += p.slope_norm_sq() * inv;
        }
        Ok(out)
    }

    /// Drops pieces that never attain the maximum, leaving the function unchanged.
    ///
    /// Parallel pieces keep only the highest intercept (lowest index on ties). In one
    /// dimension redundancy is decided exactly from the upper envelope, and a piece
    /// that touches the envelope at a single kink is kept. In higher dimensions only
    /// the parallel test is applied.
    pub fn prune(&self) -> PwlConvex {
        let n = self.pieces.len();
        let mut keep = vec![true; n];
        for i in 0..n {
            for j in 0..n {
                if i == j || !keep[j] || self.pieces[i].slope != self.pieces[j].slope {
                    continue;
                }
                let (ci, cj) = (self.pieces[i].intercept, self.pieces[j].intercept);
                if cj > ci || (cj == ci && j < i) {
                    keep[i] = false;
                    break;
                }
            }
        }

        if self.dim == 1 {
            let slopes: Vec<f64> = self.pieces.iter().map(|p| p.slope[0]).collect();
            let intercepts: Vec<f64> = self.pieces.iter().map(|p| p.intercept).collect();
            let mut order = Vec::new();
            let mut segs: Vec<Segment> = Vec::new();
            upper_envelope(&slopes, &intercepts, &mut order, &mut segs);
            let mut on_envelope = vec![false; n];
            for s in &segs {
                on_envelope[s.line] = true;
            }
            for i in 0..n {
                if !keep[i] || on_envelope[i] {
                    continue;
                }
                let touches = segs.iter().skip(1).any(|s| {
                    let x = s.start;
                    let env = slopes[s.line] * x + intercepts[s.line];
                    let v = slopes[i] * x + intercepts[i];
                    v >= env - 1e-12 * (1.0 + env.abs())
                });
                keep[i] = touches;
            }
        }

        let pieces = self
            .pieces
            .iter()
            .zip(&keep)
            .filter(|(_, &k)| k)
            .map(|(p, _)| p.clone())
            .collect();
        PwlConvex {
            dim: self.dim,
            pieces,
        }
    }
}

/// `x ↦ ½‖x‖² + ⟨a, x⟩ + b`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraticAffine {
    pub a: Vec<f64>,
    pub b: f64,
}

impl QuadraticAffine {
    pub fn new(a: Vec<f64>, b: f64) -> Result<Self> {
        if a.is_empty() {
            return Err(Error::ZeroDimension);
        }
        if !b.is_finite() || a.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("quadratic-affine coefficients"));
        }
        Ok(Self { a, b })
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        0.5 * dot(x, x) + dot(&self.a, x) + self.b
    }

    /// Legendre transform `x ↦ ½‖x − a‖² − b`, returned in the same representation
    /// (linear coefficient `−a`, constant `½‖a‖² − b`).
    pub fn legendre(&self) -> QuadraticAffine {
        QuadraticAffine {
            a: self.a.iter().map(|v| -v).collect(),
            b: 0.5 * dot(&self.a, &self.a) - self.b,
        }
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Grid-search evaluations of the transform straight from its sup definition.
///
/// These exist to cross-check [`PwlConvex::lambda_c_transform`]; they share no code
/// with it beyond plain evaluation of `f`.
pub mod oracle {
    use super::*;

    /// Default search box per coordinate: `[xᵢ − R, xᵢ + R]` with `R = Lip(f)/λ + 1`.
    /// Any maximizer of `f(y) − λ c(x, y)` lies within `Lip(f)/λ` of `x`.
    pub fn default_box(f: &PwlConvex, lambda: f64, x: &[f64]) -> Vec<(f64, f64)> {
        let r = f.lipschitz() / lambda + 1.0;
        x.iter().map(|&xi| (xi - r, xi + r)).collect()
    }

    fn check(
        f: &PwlConvex,
        lambda: f64,
        x: &[f64],
        search_box: &[(f64, f64)],
        grid_n: usize,
    ) -> Result<()> {
        if !(lambda > 0.0) {
            return Err(Error::InvalidLambda(lambda));
        }
        if x.len() != f.dim() || search_box.len() != f.dim() {
            return Err(Error::DimensionMismatch {
                expected: f.dim(),
                got: if x.len() != f.dim() { x.len() } else { search_box.len() },
            });
        }
        if grid_n < 2 {
            return Err(Error::InvalidGrid("need at least 2 points per dimension".into()));
        }
        for &(lo, hi) in search_box {
            if !(lo < hi) {
                return Err(Error::DegenerateBox { lo, hi });
            }
        }
        Ok(())
    }

    /// Calls `visit` on every point of the tensor grid over `search_box`.
    fn for_each_point(search_box: &[(f64, f64)], grid_n: usize, mut visit: impl FnMut(&[f64])) {
        let d = search_box.len();
        let steps: Vec<f64> = search_box
            .iter()
            .map(|&(lo, hi)| (hi - lo) / (grid_n - 1) as f64)
            .collect();
        let mut idx = vec![0usize; d];
        let mut y: Vec<f64> = search_box.iter().map(|b| b.0).collect();
        loop {
            visit(&y);
            let mut k = d;
            loop {
                if k == 0 {
                    return;
                }
                k -= 1;
                idx[k] += 1;
                if idx[k] < grid_n {
                    y[k] = search_box[k].0 + idx[k] as f64 * steps[k];
                    break;
                }
                idx[k] = 0;
                y[k] = search_box[k].0;
            }
        }
    }

    /// `max over grid of f(y) − (λ/2)‖x − y‖²`.
    pub fn brute_force_lc(
        f: &PwlConvex,
        lambda: f64,
        x: &[f64],
        search_box: &[(f64, f64)],
        grid_n: usize,
    ) -> Result<f64> {
        check(f, lambda, x, search_box, grid_n)?;
        let mut best = f64::NEG_INFINITY;
        for_each_point(search_box, grid_n, |y| {
            let dist2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
            let v = f.value_at(y) - 0.5 * lambda * dist2;
            if v > best {
                best = v;
            }
        });
        Ok(best)
    }

    /// Route through the Legendre transform: `−(λ/2)‖x‖² + λ ψ*(x)` with
    /// `ψ(y) = ½‖y‖² − f(y)/λ` and `ψ*` taken as a grid sup.
    pub fn lc_via_legendre(
        f: &PwlConvex,
        lambda: f64,
        x: &[f64],
        search_box: &[(f64, f64)],
        grid_n: usize,
    ) -> Result<f64> {
        check(f, lambda, x, search_box, grid_n)?;
        let mut psi_star = f64::NEG_INFINITY;
        for_each_point(search_box, grid_n, |y| {
            let psi = 0.5 * dot(y, y) - f.value_at(y) / lambda;
            let v = dot(x, y) - psi;
            if v > psi_star {
                psi_star = v;
            }
        });
        Ok(-0.5 * lambda * dot(x, x) + lambda * psi_star)
    }

    /// Worst-case gap between the grid sup and the true sup.
    ///
    /// With the maximizer `y*` at distance at most `Lip/λ` from `x` and the nearest
    /// grid point within `e = (h/2)√d`, the objective drops by at most
    /// `2·Lip·e + (λ/2)e²`.
    pub fn grid_error_bound(f: &PwlConvex, lambda: f64, search_box: &[(f64, f64)], grid_n: usize) -> f64 {
        let h = search_box
            .iter()
            .map(|&(lo, hi)| (hi - lo) / (grid_n - 1) as f64)
            .fold(0.0, f64::max);
        let e = 0.5 * h * (search_box.len() as f64).sqrt();
        2.0 * f.lipschitz() * e + 0.5 * lambda * e * e
    }
}
