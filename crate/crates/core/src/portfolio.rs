//! Three-asset portfolio: a share, a share with written ATM calls and a share with
//! written ATM puts, on independent lognormal underlyings.
//!
//! With option multiplier `a`, rate `r` and premiums `C₀`, `P₀` the per-asset payoffs are
//!
//! ```text
//! f_A(x) = x
//! f_B(x) = x + a (x − K₂)⁺ − a (1 + r) C₀
//! f_C(x) = x + a (K₃ − x)⁺ − a (1 + r) P₀
//! ```
//!
//! and `w₁f_A + w₂f_B + w₃f_C` is the maximum of four affine pieces.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{price_call, price_put, ProductLognormal, QuadratureGrid};
use crate::pwl::{AffinePiece, PwlConvex};
use crate::risk::{robust_es, EsTolerances, RobustEsProblem};

pub const DEFAULT_MULTIPLIER: f64 = 0.75;
pub const DEFAULT_RATE: f64 = 0.025;
pub const DEFAULT_MU: [f64; 3] = [0.0601, 0.0529, 0.0713];
pub const DEFAULT_SIGMA: [f64; 3] = [0.1836, 0.1198, 0.2167];
pub const DEFAULT_BETA: f64 = 0.95;
/// Nodes of the one-dimensional grid used to price premiums.
pub const DEFAULT_PRICING_NODES: usize = 20_001;

/// Measure under which option premiums are priced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PremiumMeasure {
    /// Lognormal with the same σ and forward `1 + r`.
    #[default]
    RiskNeutral,
    /// The lognormal used for the risk computation.
    Physical,
}

/// Weights, option terms and lognormal parameters of the three-asset portfolio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThreeAssetSpec {
    pub weights: [f64; 3],
    #[serde(default = "one")]
    pub strike_call: f64,
    #[serde(default = "one")]
    pub strike_put: f64,
    #[serde(default = "default_multiplier")]
    pub multiplier: f64,
    #[serde(default = "default_rate")]
    pub rate: f64,
    /// `(C₀, P₀)`; priced from the lognormals when absent.
    #[serde(default)]
    pub premiums: Option<(f64, f64)>,
    #[serde(default = "default_mu")]
    pub mu: [f64; 3],
    #[serde(default = "default_sigma")]
    pub sigma: [f64; 3],
}

fn one() -> f64 {
    1.0
}
fn default_multiplier() -> f64 {
    DEFAULT_MULTIPLIER
}
fn default_rate() -> f64 {
    DEFAULT_RATE
}
fn default_mu() -> [f64; 3] {
    DEFAULT_MU
}
fn default_sigma() -> [f64; 3] {
    DEFAULT_SIGMA
}

impl ThreeAssetSpec {
    /// ATM strikes of 1, multiplier 0.75, rate 2.5% and the default lognormal parameters.
    pub fn standard(w1: f64, w2: f64, w3: f64) -> Self {
        Self {
            weights: [w1, w2, w3],
            strike_call: 1.0,
            strike_put: 1.0,
            multiplier: DEFAULT_MULTIPLIER,
            rate: DEFAULT_RATE,
            premiums: None,
            mu: DEFAULT_MU,
            sigma: DEFAULT_SIGMA,
        }
    }

    pub fn with_premiums(mut self, call: f64, put: f64) -> Self {
        self.premiums = Some((call, put));
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidSpec(format!("weights {:?} must be >= 0", self.weights)));
        }
        let total: f64 = self.weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidSpec(format!("weights sum to {total}, not 1")));
        }
        for (name, k) in [("call strike", self.strike_call), ("put strike", self.strike_put)] {
            if !(k > 0.0) || !k.is_finite() {
                return Err(Error::InvalidSpec(format!("{name} {k} must be > 0")));
            }
        }
        if !self.multiplier.is_finite() || !self.rate.is_finite() || self.rate <= -1.0 {
            return Err(Error::InvalidSpec("multiplier and rate must be finite, rate > -1".into()));
        }
        if let Some((c, p)) = self.premiums {
            if !(c >= 0.0) || !(p >= 0.0) || !c.is_finite() || !p.is_finite() {
                return Err(Error::InvalidSpec(format!("premiums ({c}, {p}) must be finite and >= 0")));
            }
        }
        self.lognormal().map(|_| ())
    }

    /// Joint law of the three underlyings used for the risk computation.
    pub fn lognormal(&self) -> Result<ProductLognormal> {
        ProductLognormal::new(self.mu.to_vec(), self.sigma.to_vec())
    }

    /// One-dimensional law of underlying `k` for pricing.
    pub fn pricing_lognormal(&self, k: usize, measure: PremiumMeasure) -> Result<ProductLognormal> {
        let s = self.sigma[k];
        match measure {
            PremiumMeasure::RiskNeutral => ProductLognormal::with_mean(1.0 + self.rate, s),
            PremiumMeasure::Physical => ProductLognormal::new(vec![self.mu[k]], vec![s]),
        }
    }

    /// `(C₀, P₀)`: discounted expected call payoff on the second underlying and put payoff
    /// on the third.
    pub fn price_premiums(&self, measure: PremiumMeasure, nodes: usize) -> Result<(f64, f64)> {
        let discount = 1.0 / (1.0 + self.rate);
        let grid = |k: usize| -> Result<QuadratureGrid> {
            QuadratureGrid::build(&self.pricing_lognormal(k, measure)?, nodes, crate::measures::DEFAULT_TAIL_MASS)
        };
        let call = price_call(&grid(1)?, self.strike_call)? * discount;
        let put = price_put(&grid(2)?, self.strike_put)? * discount;
        Ok((call, put))
    }

    /// Copy with premiums filled in (kept if already set).
    pub fn resolve_premiums(&self, measure: PremiumMeasure, nodes: usize) -> Result<Self> {
        if self.premiums.is_some() {
            return Ok(self.clone());
        }
        let (c, p) = self.price_premiums(measure, nodes)?;
        Ok(self.clone().with_premiums(c, p))
    }

    /// The four-piece representation of `w₁f_A + w₂f_B + w₃f_C`.
    pub fn payoff(&self) -> Result<PwlConvex> {
        self.validate()?;
        let (c0, p0) = self
            .premiums
            .ok_or_else(|| Error::InvalidSpec("premiums are not set".into()))?;
        let [w1, w2, w3] = self.weights;
        let a = self.multiplier;
        let g = 1.0 + self.rate;
        let (k2, k3) = (self.strike_call, self.strike_put);
        let call_in = a * w2 * (-k2 - c0 * g);
        let call_out = a * w2 * (-c0 * g);
        let put_in = a * w3 * (k3 - p0 * g);
        let put_out = a * w3 * (-p0 * g);
        PwlConvex::new(
            3,
            vec![
                AffinePiece::new(vec![w1, (1.0 + a) * w2, (1.0 - a) * w3], call_in + put_in),
                AffinePiece::new(vec![w1, (1.0 + a) * w2, w3], call_in + put_out),
                AffinePiece::new(vec![w1, w2, (1.0 - a) * w3], call_out + put_in),
                AffinePiece::new(vec![w1, w2, w3], call_out + put_out),
            ],
        )
    }
}

/// Payoff less the initial unit received.
pub fn net_liability(payoff: &PwlConvex) -> PwlConvex {
    payoff.shift(-1.0)
}

/// Settings for the robust ES table over weight vectors and radii.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Table1Config {
    pub weights: Vec<[f64; 3]>,
    pub thetas: Vec<f64>,
    pub beta: f64,
    pub multiplier: f64,
    pub rate: f64,
    pub strike_call: f64,
    pub strike_put: f64,
    pub mu: [f64; 3],
    pub sigma: [f64; 3],
    pub premium_measure: PremiumMeasure,
    /// Overrides pricing when set.
    pub premiums: Option<(f64, f64)>,
    pub pricing_nodes: usize,
    pub nodes: usize,
    pub tail_mass: f64,
    pub tolerances: EsTolerances,
}

impl Default for Table1Config {
    fn default() -> Self {
        Self {
            weights: vec![[1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], [0.1, 0.8, 0.1], [0.1, 0.1, 0.8]],
            thetas: vec![0.0, 1.0],
            beta: DEFAULT_BETA,
            multiplier: DEFAULT_MULTIPLIER,
            rate: DEFAULT_RATE,
            strike_call: 1.0,
            strike_put: 1.0,
            mu: DEFAULT_MU,
            sigma: DEFAULT_SIGMA,
            premium_measure: PremiumMeasure::RiskNeutral,
            premiums: None,
            pricing_nodes: DEFAULT_PRICING_NODES,
            nodes: crate::measures::DEFAULT_NODES_3D,
            tail_mass: crate::measures::DEFAULT_TAIL_MASS,
            tolerances: EsTolerances::with_tol(1e-7),
        }
    }
}

impl Table1Config {
    pub fn spec(&self, w: [f64; 3]) -> ThreeAssetSpec {
        ThreeAssetSpec {
            weights: w,
            strike_call: self.strike_call,
            strike_put: self.strike_put,
            multiplier: self.multiplier,
            rate: self.rate,
            premiums: self.premiums,
            mu: self.mu,
            sigma: self.sigma,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.weights.is_empty() {
            return Err(Error::InvalidSpec("no weight vectors given".into()));
        }
        if self.thetas.is_empty() {
            return Err(Error::InvalidSpec("no theta values given".into()));
        }
        if let Some(t) = self.thetas.iter().find(|t| !(**t >= 0.0) || !t.is_finite()) {
            return Err(Error::InvalidTheta(*t));
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::InvalidProbability(self.beta));
        }
        for w in &self.weights {
            self.spec(*w).validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Table1Row {
    pub w1: f64,
    pub w2: f64,
    pub w3: f64,
    pub theta: f64,
    /// Robust ES of the net liability, in percent.
    pub robust_es_pct: f64,
    pub alpha: f64,
    pub lambda: Option<f64>,
    pub converged: bool,
}

/// Robust ES of the net liability for every weight vector and θ, in row order
/// (weights outer, θ inner). Rows are solved in parallel.
pub fn run_table1(cfg: &Table1Config) -> Result<Vec<Table1Row>> {
    cfg.validate()?;
    let base = cfg.spec(cfg.weights[0]).resolve_premiums(cfg.premium_measure, cfg.pricing_nodes)?;
    let premiums = base.premiums;
    let grid = QuadratureGrid::build(&base.lognormal()?, cfg.nodes, cfg.tail_mass)?;
    let jobs: Vec<([f64; 3], f64)> = cfg
        .weights
        .iter()
        .flat_map(|w| cfg.thetas.iter().map(move |t| (*w, *t)))
        .collect();
    jobs.par_iter()
        .map(|&(w, theta)| {
            let spec = ThreeAssetSpec { premiums, ..cfg.spec(w) };
            let liability = net_liability(&spec.payoff()?);
            let r = robust_es(&RobustEsProblem::new(&liability, &grid, theta, cfg.beta).with_tolerances(cfg.tolerances))?;
            Ok(Table1Row {
                w1: w[0],
                w2: w[1],
                w3: w[2],
                theta,
                robust_es_pct: 100.0 * r.value,
                alpha: r.alpha,
                lambda: r.lambda,
                converged: r.converged,
            })
        })
        .collect()
}
