//! Baseline probability measures and the quadrature used to integrate against them.
//!
//! Two baselines are supported: finitely supported measures, integrated exactly, and
//! products of independent lognormals, integrated with a tensor trapezoid rule on a
//! truncated box. Quadrature weights carry the density, so a grid integral is
//! `Σ f(x)·w(x)` and approximates `∫ f dν₀`, not `∫ f dx`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::envelope::{upper_envelope, Segment};
use crate::error::{Error, Result};
use crate::normal;
use crate::pwl::PwlConvex;

/// Anything a payoff can be integrated against.
pub trait Expectation: Sync {
    fn dim(&self) -> usize;

    /// `∫ f dν` for a max-of-affine payoff.
    fn expect_pwl(&self, f: &PwlConvex) -> Result<f64>;

    /// `∫ f dν` for an arbitrary integrand.
    fn expect_fn(&self, f: &(dyn Fn(&[f64]) -> f64 + Sync)) -> Result<f64>;

    /// Mass seen by the integrator (below 1 for a truncated grid).
    fn total_mass(&self) -> f64;
}

fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

fn neumaier_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0_f64;
    let mut comp = 0.0_f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

// ---------------------------------------------------------------------------
// Discrete measures

/// Finitely supported probability measure on `ℝᵈ`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    dim: usize,
    atoms: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl DiscreteMeasure {
    /// Validates positivity, unit total mass (to 1e-12), a common dimension and distinct atoms.
    pub fn new(atoms: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidMeasure("no atoms".into()));
        }
        if atoms.len() != weights.len() {
            return Err(Error::InvalidMeasure(format!(
                "{} atoms but {} weights",
                atoms.len(),
                weights.len()
            )));
        }
        let dim = atoms[0].len();
        if dim == 0 {
            return Err(Error::ZeroDimension);
        }
        for a in &atoms {
            check_dim(dim, a.len())?;
            if a.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("atom"));
            }
        }
        if let Some(w) = weights.iter().find(|w| !(**w > 0.0) || !w.is_finite()) {
            return Err(Error::InvalidMeasure(format!("weight {w} is not positive")));
        }
        let total = neumaier_sum(weights.iter().copied());
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidMeasure(format!("weights sum to {total}, not 1")));
        }
        let mut order: Vec<usize> = (0..atoms.len()).collect();
        order.sort_by(|&i, &j| lex_cmp(&atoms[i], &atoms[j]));
        if order.windows(2).any(|w| atoms[w[0]] == atoms[w[1]]) {
            return Err(Error::InvalidMeasure("atoms are not distinct".into()));
        }
        Ok(Self { dim, atoms, weights })
    }

    /// Builds a one-dimensional measure from `(atom, weight)` pairs.
    pub fn from_points(points: &[(f64, f64)]) -> Result<Self> {
        Self::new(
            points.iter().map(|&(x, _)| vec![x]).collect(),
            points.iter().map(|&(_, w)| w).collect(),
        )
    }

    pub fn dirac(x: Vec<f64>) -> Result<Self> {
        Self::new(vec![x], vec![1.0])
    }

    pub fn atoms(&self) -> &[Vec<f64>] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn mean(&self) -> Vec<f64> {
        (0..self.dim)
            .map(|k| neumaier_sum(self.atoms.iter().zip(&self.weights).map(|(a, w)| a[k] * w)))
            .collect()
    }
}

fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(std::cmp::Ordering::Equal)
}

impl Expectation for DiscreteMeasure {
    fn dim(&self) -> usize {
        self.dim
    }

    fn expect_pwl(&self, f: &PwlConvex) -> Result<f64> {
        check_dim(self.dim, f.dim())?;
        Ok(neumaier_sum(
            self.atoms.iter().zip(&self.weights).map(|(a, w)| w * f.value_at(a)),
        ))
    }

    fn expect_fn(&self, f: &(dyn Fn(&[f64]) -> f64 + Sync)) -> Result<f64> {
        let mut terms = Vec::with_capacity(self.len());
        for (a, w) in self.atoms.iter().zip(&self.weights) {
            let v = f(a);
            if !v.is_finite() {
                return Err(Error::NonFiniteIntegrand);
            }
            terms.push(w * v);
        }
        Ok(neumaier_sum(terms))
    }

    fn total_mass(&self) -> f64 {
        1.0
    }
}

// ---------------------------------------------------------------------------
// Product lognormal

/// Independent lognormal coordinates: `ln Xₖ ~ N(mu[k], sigma[k]²)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductLognormal {
    mu: Vec<f64>,
    sigma: Vec<f64>,
}

impl ProductLognormal {
    pub fn new(mu: Vec<f64>, sigma: Vec<f64>) -> Result<Self> {
        if mu.is_empty() {
            return Err(Error::ZeroDimension);
        }
        check_dim(mu.len(), sigma.len())?;
        if mu.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("lognormal mu"));
        }
        if let Some(s) = sigma.iter().find(|s| !(**s > 0.0) || !s.is_finite()) {
            return Err(Error::InvalidMeasure(format!("sigma {s} must be > 0")));
        }
        Ok(Self { mu, sigma })
    }

    /// One-dimensional lognormal with mean `mean`: `mu = ln(mean) − σ²/2`.
    pub fn with_mean(mean: f64, sigma: f64) -> Result<Self> {
        if !(mean > 0.0) {
            return Err(Error::InvalidMeasure(format!("lognormal mean {mean} must be > 0")));
        }
        Self::new(vec![mean.ln() - 0.5 * sigma * sigma], vec![sigma])
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    fn check_index(&self, k: usize) -> Result<()> {
        if k >= self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: k + 1,
            });
        }
        Ok(())
    }

    /// `exp(μₖ + σₖ z_β)`
    pub fn quantile(&self, k: usize, beta: f64) -> Result<f64> {
        self.check_index(k)?;
        if !(beta > 0.0 && beta < 1.0) {
            return Err(Error::InvalidProbability(beta));
        }
        Ok((self.mu[k] + self.sigma[k] * normal::quantile(beta)).exp())
    }

    pub fn cdf(&self, k: usize, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        normal::cdf((x.ln() - self.mu[k]) / self.sigma[k])
    }

    pub fn density(&self, k: usize, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let s = self.sigma[k];
        normal::pdf((x.ln() - self.mu[k]) / s) / (x * s)
    }

    pub fn mean(&self, k: usize) -> f64 {
        (self.mu[k] + 0.5 * self.sigma[k] * self.sigma[k]).exp()
    }
}

/// Input form for baselines: `{"type": "lognormal", "mu": [..], "sigma": [..]}` or
/// `{"type": "discrete", "atoms": [[..]], "weights": [..]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum MeasureSpec {
    Lognormal { mu: Vec<f64>, sigma: Vec<f64> },
    Discrete { atoms: Vec<Vec<f64>>, weights: Vec<f64> },
}

impl MeasureSpec {
    pub fn discrete(&self) -> Result<DiscreteMeasure> {
        match self {
            MeasureSpec::Discrete { atoms, weights } => DiscreteMeasure::new(atoms.clone(), weights.clone()),
            MeasureSpec::Lognormal { .. } => Err(Error::InvalidMeasure("expected a discrete measure".into())),
        }
    }

    pub fn lognormal(&self) -> Result<ProductLognormal> {
        match self {
            MeasureSpec::Lognormal { mu, sigma } => ProductLognormal::new(mu.clone(), sigma.clone()),
            MeasureSpec::Discrete { .. } => Err(Error::InvalidMeasure("expected a lognormal measure".into())),
        }
    }

    /// Resolves to something integrable: discrete measures as-is, lognormals through a grid.
    pub fn baseline(&self, nodes_per_dim: usize, tail_mass: f64) -> Result<Baseline> {
        match self {
            MeasureSpec::Discrete { .. } => Ok(Baseline::Discrete(self.discrete()?)),
            MeasureSpec::Lognormal { .. } => {
                Ok(Baseline::Grid(QuadratureGrid::build(&self.lognormal()?, nodes_per_dim, tail_mass)?))
            }
        }
    }
}

impl From<&DiscreteMeasure> for MeasureSpec {
    fn from(m: &DiscreteMeasure) -> Self {
        MeasureSpec::Discrete {
            atoms: m.atoms.clone(),
            weights: m.weights.clone(),
        }
    }
}

/// A resolved baseline of either kind.
#[derive(Debug, Clone)]
pub enum Baseline {
    Grid(QuadratureGrid),
    Discrete(DiscreteMeasure),
}

impl Expectation for Baseline {
    fn dim(&self) -> usize {
        match self {
            Baseline::Grid(g) => g.dim(),
            Baseline::Discrete(m) => m.dim(),
        }
    }

    fn expect_pwl(&self, f: &PwlConvex) -> Result<f64> {
        match self {
            Baseline::Grid(g) => g.expect_pwl(f),
            Baseline::Discrete(m) => m.expect_pwl(f),
        }
    }

    fn expect_fn(&self, f: &(dyn Fn(&[f64]) -> f64 + Sync)) -> Result<f64> {
        match self {
            Baseline::Grid(g) => g.expect_fn(f),
            Baseline::Discrete(m) => m.expect_fn(f),
        }
    }

    fn total_mass(&self) -> f64 {
        match self {
            Baseline::Grid(g) => g.total_mass(),
            Baseline::Discrete(m) => m.total_mass(),
        }
    }
}

// ---------------------------------------------------------------------------
// Quadrature

pub const DEFAULT_TAIL_MASS: f64 = 1e-7;
pub const DEFAULT_NODES_1D: usize = 2001;
pub const DEFAULT_NODES_3D: usize = 201;

/// Default node count per dimension for a `dim`-dimensional grid.
pub fn default_nodes(dim: usize) -> usize {
    if dim <= 1 {
        DEFAULT_NODES_1D
    } else {
        DEFAULT_NODES_3D
    }
}

/// Tensor trapezoid grid whose weights include the marginal densities.
#[derive(Debug, Clone)]
pub struct QuadratureGrid {
    nodes: Vec<Vec<f64>>,
    trapezoid: Vec<Vec<f64>>,
    weights: Vec<Vec<f64>>,
    bounds: Vec<(f64, f64)>,
    // running sums of w and w·z along the last dimension, length n + 1
    prefix_mass: Vec<f64>,
    prefix_first: Vec<f64>,
}

impl QuadratureGrid {
    /// Uniform nodes on `[q(tail_mass), q(1 − tail_mass)]` in every dimension.
    pub fn build(m: &ProductLognormal, nodes_per_dim: usize, tail_mass: f64) -> Result<Self> {
        if nodes_per_dim < 2 {
            return Err(Error::InvalidGrid(format!(
                "need at least 2 nodes per dimension, got {nodes_per_dim}"
            )));
        }
        if !(tail_mass > 0.0 && tail_mass < 0.5) {
            return Err(Error::InvalidGrid(format!("tail mass {tail_mass} must lie in (0, 0.5)")));
        }
        let mut nodes = Vec::with_capacity(m.dim());
        let mut densities = Vec::with_capacity(m.dim());
        let mut bounds = Vec::with_capacity(m.dim());
        for k in 0..m.dim() {
            let lo = m.quantile(k, tail_mass)?;
            let hi = m.quantile(k, 1.0 - tail_mass)?;
            let h = (hi - lo) / (nodes_per_dim - 1) as f64;
            let xs: Vec<f64> = (0..nodes_per_dim)
                .map(|i| if i + 1 == nodes_per_dim { hi } else { lo + i as f64 * h })
                .collect();
            densities.push(xs.iter().map(|&x| m.density(k, x)).collect());
            nodes.push(xs);
            bounds.push((lo, hi));
        }
        Self::from_parts(nodes, densities, bounds)
    }

    /// Grid from explicit strictly increasing nodes and density values at those nodes.
    pub fn from_parts(nodes: Vec<Vec<f64>>, densities: Vec<Vec<f64>>, bounds: Vec<(f64, f64)>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::ZeroDimension);
        }
        check_dim(nodes.len(), densities.len())?;
        check_dim(nodes.len(), bounds.len())?;
        let mut trapezoid = Vec::with_capacity(nodes.len());
        let mut weights = Vec::with_capacity(nodes.len());
        for (xs, dens) in nodes.iter().zip(&densities) {
            check_dim(xs.len(), dens.len())?;
            if xs.len() < 2 {
                return Err(Error::InvalidGrid("need at least 2 nodes per dimension".into()));
            }
            if xs.windows(2).any(|w| !(w[0] < w[1])) || xs.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidGrid("nodes must be finite and strictly increasing".into()));
            }
            if dens.iter().any(|d| !(*d >= 0.0) || !d.is_finite()) {
                return Err(Error::InvalidGrid("density values must be finite and >= 0".into()));
            }
            let n = xs.len();
            let t: Vec<f64> = (0..n)
                .map(|i| {
                    let left = if i > 0 { xs[i] - xs[i - 1] } else { 0.0 };
                    let right = if i + 1 < n { xs[i + 1] - xs[i] } else { 0.0 };
                    0.5 * (left + right)
                })
                .collect();
            weights.push(t.iter().zip(dens).map(|(a, b)| a * b).collect::<Vec<f64>>());
            trapezoid.push(t);
        }
        let last = nodes.len() - 1;
        let mut prefix_mass = Vec::with_capacity(nodes[last].len() + 1);
        let mut prefix_first = Vec::with_capacity(nodes[last].len() + 1);
        let (mut s0, mut s1) = (0.0, 0.0);
        prefix_mass.push(0.0);
        prefix_first.push(0.0);
        for (z, w) in nodes[last].iter().zip(&weights[last]) {
            s0 += w;
            s1 += w * z;
            prefix_mass.push(s0);
            prefix_first.push(s1);
        }
        Ok(Self {
            nodes,
            trapezoid,
            weights,
            bounds,
            prefix_mass,
            prefix_first,
        })
    }

    pub fn dim(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self, k: usize) -> &[f64] {
        &self.nodes[k]
    }

    /// Plain 1-D trapezoid weights (no density).
    pub fn trapezoid_weights(&self, k: usize) -> &[f64] {
        &self.trapezoid[k]
    }

    /// Trapezoid weight times density value.
    pub fn weights(&self, k: usize) -> &[f64] {
        &self.weights[k]
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn len(&self) -> usize {
        self.nodes.iter().map(Vec::len).product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Tensor trapezoid sum `Σ f(x)·w(x)`, nested in lexicographic index order.
    ///
    /// The outer index is split across threads, but partial sums are combined in index
    /// order, so the result does not depend on the thread count.
    pub fn integrate(&self, f: &(dyn Fn(&[f64]) -> f64 + Sync)) -> Result<f64> {
        let d = self.dim();
        let partials: Vec<Result<f64>> = (0..self.nodes[0].len())
            .into_par_iter()
            .map_init(
                || vec![0.0; d],
                |x, i| {
                    x[0] = self.nodes[0][i];
                    self.integrate_from(1, x, f).map(|s| s * self.weights[0][i])
                },
            )
            .collect();
        let mut total = 0.0;
        for p in partials {
            total += p?;
        }
        Ok(total)
    }

    fn integrate_from(&self, k: usize, x: &mut [f64], f: &(dyn Fn(&[f64]) -> f64 + Sync)) -> Result<f64> {
        if k == self.dim() {
            let v = f(x);
            if !v.is_finite() {
                return Err(Error::NonFiniteIntegrand);
            }
            return Ok(v);
        }
        let mut sum = 0.0;
        for (&z, &w) in self.nodes[k].iter().zip(&self.weights[k]) {
            x[k] = z;
            sum += w * self.integrate_from(k + 1, x, f)?;
        }
        Ok(sum)
    }

    /// Trapezoid sum of `max_p (A_p + B_p z)` along the last dimension.
    ///
    /// The envelope in `z` has few breakpoints, so each stretch of nodes is summed in
    /// closed form from the running sums of `w` and `w·z`.
    fn line_sum(&self, slopes: &[f64], intercepts: &[f64], scratch: &mut Scratch) -> f64 {
        upper_envelope(slopes, intercepts, &mut scratch.order, &mut scratch.segments);
        let z = &self.nodes[self.dim() - 1];
        let n = z.len();
        let mut sum = 0.0;
        let segs = &scratch.segments;
        let mut a = 0;
        for (s, seg) in segs.iter().enumerate() {
            let b = match segs.get(s + 1) {
                Some(next) => a + z[a..].partition_point(|&v| v < next.start),
                None => n,
            };
            if b > a {
                let mass = self.prefix_mass[b] - self.prefix_mass[a];
                let first = self.prefix_first[b] - self.prefix_first[a];
                sum += intercepts[seg.line] * mass + slopes[seg.line] * first;
            }
            a = b;
        }
        sum
    }

    fn pwl_from(&self, k: usize, f: &PwlConvex, partial: &mut Vec<Vec<f64>>, scratch: &mut Scratch) -> f64 {
        let last = self.dim() - 1;
        if k == last {
            let slopes = std::mem::take(&mut scratch.slopes);
            let v = self.line_sum(&slopes, &partial[k], scratch);
            scratch.slopes = slopes;
            return v;
        }
        let mut sum = 0.0;
        for (&x, &w) in self.nodes[k].iter().zip(&self.weights[k]) {
            let (head, tail) = partial.split_at_mut(k + 1);
            for (p, (dst, src)) in tail[0].iter_mut().zip(&head[k]).enumerate() {
                *dst = src + f.pieces()[p].slope[k] * x;
            }
            sum += w * self.pwl_from(k + 1, f, partial, scratch);
        }
        sum
    }
}

#[derive(Default)]
struct Scratch {
    order: Vec<usize>,
    segments: Vec<Segment>,
    slopes: Vec<f64>,
}

impl Expectation for QuadratureGrid {
    fn dim(&self) -> usize {
        self.nodes.len()
    }

    fn expect_pwl(&self, f: &PwlConvex) -> Result<f64> {
        check_dim(self.dim(), f.dim())?;
        let d = self.dim();
        let last = d - 1;
        let slopes: Vec<f64> = f.pieces().iter().map(|p| p.slope[last]).collect();
        let intercepts: Vec<f64> = f.pieces().iter().map(|p| p.intercept).collect();
        let init = || {
            let scratch = Scratch {
                slopes: slopes.clone(),
                ..Scratch::default()
            };
            let mut partial = vec![vec![0.0; intercepts.len()]; d];
            partial[0].copy_from_slice(&intercepts);
            (scratch, partial)
        };
        if d == 1 {
            let (mut scratch, partial) = init();
            return Ok(self.line_sum(&slopes, &partial[0], &mut scratch));
        }
        let partials: Vec<f64> = (0..self.nodes[0].len())
            .into_par_iter()
            .map_init(init, |(scratch, partial), i| {
                let x = self.nodes[0][i];
                for (p, dst) in partial[1].iter_mut().enumerate() {
                    *dst = intercepts[p] + f.pieces()[p].slope[0] * x;
                }
                self.weights[0][i] * self.pwl_from(1, f, partial, scratch)
            })
            .collect();
        Ok(partials.iter().sum())
    }

    fn expect_fn(&self, f: &(dyn Fn(&[f64]) -> f64 + Sync)) -> Result<f64> {
        self.integrate(f)
    }

    fn total_mass(&self) -> f64 {
        self.weights.iter().map(|w| w.iter().sum::<f64>()).product()
    }
}

/// Undiscounted `∫ (x − strike)⁺ dν` for a one-dimensional baseline.
pub fn price_call(baseline: &dyn Expectation, strike: f64) -> Result<f64> {
    if !strike.is_finite() {
        return Err(Error::NonFinite("strike"));
    }
    check_dim(1, baseline.dim())?;
    baseline.expect_pwl(&PwlConvex::call(strike)?)
}

/// Undiscounted `∫ (strike − x)⁺ dν` for a one-dimensional baseline.
pub fn price_put(baseline: &dyn Expectation, strike: f64) -> Result<f64> {
    if !strike.is_finite() {
        return Err(Error::NonFinite("strike"));
    }
    check_dim(1, baseline.dim())?;
    baseline.expect_pwl(&PwlConvex::put(strike)?)
}

/// Grid nodes as atoms with weights `w(x) / Σ w`.
pub fn discrete_from_grid(grid: &QuadratureGrid) -> Result<DiscreteMeasure> {
    let total = grid.total_mass();
    let d = grid.dim();
    let n = grid.len();
    let mut atoms = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    let mut idx = vec![0usize; d];
    'outer: loop {
        let mut w = 1.0;
        let mut x = Vec::with_capacity(d);
        for k in 0..d {
            x.push(grid.nodes[k][idx[k]]);
            w *= grid.weights[k][idx[k]];
        }
        if w > 0.0 {
            atoms.push(x);
            weights.push(w / total);
        }
        let mut k = d;
        loop {
            if k == 0 {
                break 'outer;
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < grid.nodes[k].len() {
                break;
            }
            idx[k] = 0;
        }
    }
    // absorb the last rounding residue so the weights sum to one
    let residue = 1.0 - neumaier_sum(weights.iter().copied());
    if let Some(w) = weights.iter_mut().max_by(|a, b| a.total_cmp(b)) {
        *w += residue;
    }
    DiscreteMeasure::new(atoms, weights)
}
