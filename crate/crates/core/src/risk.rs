//! Expected Shortfall and its robust counterpart over a quadratic-transport ball.
//!
//! ES is computed from its minimization form `min_α { α + E(f − α)⁺ / (1 − β) }`. The
//! robust version replaces the expectation by the robust expected value of `(f − α)⁺`,
//! which the dual solver handles as an inner minimization over λ.

use serde::{Deserialize, Serialize};

use crate::duality::{robust_expected_value, DualSolver};
use crate::error::{Error, Result};
use crate::measures::{price_call, Expectation, ProductLognormal};
use crate::optimize::golden_section;
use crate::pwl::PwlConvex;

/// Solver settings for the α search and the inner λ search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EsTolerances {
    /// Final α bracket width relative to `v_max − v_min`.
    pub alpha_rel_tol: f64,
    pub alpha_max_iter: usize,
    /// Inner solver; keep its tolerance tighter than the outer one so the outer
    /// objective stays smooth.
    pub dual: DualSolver,
}

impl Default for EsTolerances {
    fn default() -> Self {
        Self {
            alpha_rel_tol: 1e-9,
            alpha_max_iter: 300,
            dual: DualSolver::with_tol(1e-10),
        }
    }
}

impl EsTolerances {
    /// Outer tolerance `tol`, inner ten times tighter.
    pub fn with_tol(tol: f64) -> Self {
        Self {
            alpha_rel_tol: tol,
            dual: DualSolver::with_tol(tol / 10.0),
            ..Self::default()
        }
    }
}

/// A robust ES problem: liability `payoff`, baseline, radius θ and level β.
#[derive(Clone, Copy)]
pub struct RobustEsProblem<'a> {
    pub payoff: &'a PwlConvex,
    pub baseline: &'a dyn Expectation,
    pub theta: f64,
    pub beta: f64,
    pub tolerances: EsTolerances,
}

impl<'a> RobustEsProblem<'a> {
    pub fn new(payoff: &'a PwlConvex, baseline: &'a dyn Expectation, theta: f64, beta: f64) -> Self {
        Self {
            payoff,
            baseline,
            theta,
            beta,
            tolerances: EsTolerances::default(),
        }
    }

    pub fn with_tolerances(mut self, tolerances: EsTolerances) -> Self {
        self.tolerances = tolerances;
        self
    }

    pub fn validate(&self) -> Result<()> {
        check_beta(self.beta)?;
        check_theta(self.theta)?;
        if self.payoff.dim() != self.baseline.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.baseline.dim(),
                got: self.payoff.dim(),
            });
        }
        Ok(())
    }
}

/// Result of an ES solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EsSolveReport {
    pub value: f64,
    /// Minimizing α; a VaR proxy.
    pub alpha: f64,
    /// Inner λ at α. `None` for θ = 0.
    pub lambda: Option<f64>,
    pub v_min: f64,
    pub v_max: f64,
    pub outer_evaluations: usize,
    pub inner_evaluations: usize,
    pub converged: bool,
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::InvalidProbability(beta));
    }
    Ok(())
}

fn check_theta(theta: f64) -> Result<()> {
    if !(theta >= 0.0) || !theta.is_finite() {
        return Err(Error::InvalidTheta(theta));
    }
    Ok(())
}

/// Interval `[v_min, v_max]` holding `VaR_β^ν(f)` for every ν within distance θ.
///
/// Markov's inequality gives `ν(|f| ≥ t) ≤ (∫|f|dν₀ + Lip(f)·W₂(ν, ν₀)) / t` with
/// `W₂ ≤ √(2θ)`. `t` doubles from 1 until the bound drops to `1 − β` (upper end) or to `β`
/// (lower end).
pub fn var_bounds(f: &PwlConvex, baseline: &dyn Expectation, theta: f64, beta: f64) -> Result<(f64, f64)> {
    check_beta(beta)?;
    check_theta(theta)?;
    if f.dim() != baseline.dim() {
        return Err(Error::DimensionMismatch {
            expected: baseline.dim(),
            got: f.dim(),
        });
    }
    let abs_mean = baseline.expect_fn(&|x: &[f64]| f.value_at(x).abs())?;
    let numerator = abs_mean + f.lipschitz() * (2.0 * theta).sqrt();
    let smallest_t = |level: f64| {
        let mut t = 1.0_f64;
        while numerator / t > level {
            t *= 2.0;
        }
        t
    };
    Ok((-smallest_t(beta), smallest_t(1.0 - beta)))
}

/// `α + (λθ + ∫((f − α)⁺)^{λc} dν₀) / (1 − β)`, the robust ES objective at fixed `(α, λ)`.
pub fn es_objective(
    f: &PwlConvex,
    baseline: &dyn Expectation,
    theta: f64,
    beta: f64,
    alpha: f64,
    lambda: f64,
) -> Result<f64> {
    check_beta(beta)?;
    let inner = crate::duality::dual_objective(&f.excess_over(alpha), baseline, theta, lambda)?;
    Ok(alpha + inner / (1.0 - beta))
}

fn alpha_tol(v_min: f64, v_max: f64, rel: f64) -> f64 {
    (rel * (v_max - v_min)).max(f64::EPSILON * v_max.abs().max(v_min.abs()))
}

/// Baseline ES: `min_α { α + E(f − α)⁺ / (1 − β) }` over `α ∈ [v_min, v_max]`.
pub fn es_nonrobust(f: &PwlConvex, baseline: &dyn Expectation, beta: f64) -> Result<f64> {
    es_nonrobust_report(f, baseline, beta, &EsTolerances::default()).map(|r| r.value)
}

pub fn es_nonrobust_report(
    f: &PwlConvex,
    baseline: &dyn Expectation,
    beta: f64,
    tol: &EsTolerances,
) -> Result<EsSolveReport> {
    let (v_min, v_max) = var_bounds(f, baseline, 0.0, beta)?;
    let objective = |alpha: f64| -> Result<f64> {
        Ok(alpha + baseline.expect_pwl(&f.excess_over(alpha))? / (1.0 - beta))
    };
    let m = golden_section(
        objective,
        v_min,
        v_max,
        alpha_tol(v_min, v_max, tol.alpha_rel_tol),
        tol.alpha_max_iter,
    )?;
    Ok(EsSolveReport {
        value: m.value,
        alpha: m.x,
        lambda: None,
        v_min,
        v_max,
        outer_evaluations: m.evaluations,
        inner_evaluations: 0,
        converged: m.converged,
    })
}

/// Robust ES: `min_α { α + RobustEV_θ((f − α)⁺) / (1 − β) }`, golden-section over α with
/// an inner golden-section over λ. θ = 0 falls back to [`es_nonrobust_report`].
pub fn robust_es(p: &RobustEsProblem<'_>) -> Result<EsSolveReport> {
    p.validate()?;
    let tol = &p.tolerances;
    if p.theta == 0.0 {
        return es_nonrobust_report(p.payoff, p.baseline, p.beta, tol);
    }
    let (v_min, v_max) = var_bounds(p.payoff, p.baseline, p.theta, p.beta)?;
    let mut inner_evaluations = 0;
    let mut inner_ok = true;
    let scale = 1.0 / (1.0 - p.beta);
    let mut objective = |alpha: f64| -> Result<f64> {
        let r = robust_expected_value(&p.payoff.excess_over(alpha), p.baseline, p.theta, &tol.dual)?;
        inner_evaluations += r.evaluations;
        inner_ok &= r.converged;
        Ok(alpha + r.value * scale)
    };
    let m = golden_section(
        &mut objective,
        v_min,
        v_max,
        alpha_tol(v_min, v_max, tol.alpha_rel_tol),
        tol.alpha_max_iter,
    )?;
    // re-solve at the winner to report its λ
    let at = robust_expected_value(&p.payoff.excess_over(m.x), p.baseline, p.theta, &tol.dual)?;
    Ok(EsSolveReport {
        value: m.x + at.value * scale,
        alpha: m.x,
        lambda: at.lambda,
        v_min,
        v_max,
        outer_evaluations: m.evaluations,
        inner_evaluations: inner_evaluations + at.evaluations,
        converged: m.converged && inner_ok && at.converged,
    })
}

/// Pieces of the analytic robust ES of a call on a one-dimensional lognormal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CallClosedForm {
    pub q_beta: f64,
    pub call_at_q: f64,
    pub correction: f64,
    pub value: f64,
}

/// `(q_β − k) + call(q_β)/(1 − β) + √(2θ/(1 − β))`.
///
/// `q_β` is the lognormal quantile and `call(q_β)` is priced against `pricing`, normally a
/// quadrature grid of the same lognormal. The minimizer has `α = q_β − k + √(θ/(2(1 − β)))`;
/// the formula is the robust ES whenever that α is nonnegative.
pub fn robust_es_call_closed_form(
    strike: f64,
    lognormal: &ProductLognormal,
    pricing: &dyn Expectation,
    theta: f64,
    beta: f64,
) -> Result<CallClosedForm> {
    check_beta(beta)?;
    check_theta(theta)?;
    if lognormal.dim() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: lognormal.dim(),
        });
    }
    let q_beta = lognormal.quantile(0, beta)?;
    let call_at_q = price_call(pricing, q_beta)?;
    let correction = (2.0 * theta / (1.0 - beta)).sqrt();
    Ok(CallClosedForm {
        q_beta,
        call_at_q,
        correction,
        value: (q_beta - strike) + call_at_q / (1.0 - beta) + correction,
    })
}

/// Distance of a call solve from its analytic first-order conditions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FirstOrderDiagnostics {
    pub lambda_expected: f64,
    pub lambda_error: f64,
    pub q_beta: f64,
    /// `|k + α* − 1/(2λ*) − q_β|`
    pub quantile_error: f64,
}

pub fn first_order_check(
    strike: f64,
    lognormal: &ProductLognormal,
    theta: f64,
    beta: f64,
    report: &EsSolveReport,
) -> Result<FirstOrderDiagnostics> {
    check_beta(beta)?;
    if !(theta > 0.0) || !theta.is_finite() {
        return Err(Error::InvalidTheta(theta));
    }
    let lambda = report
        .lambda
        .ok_or_else(|| Error::InvalidSpec("report carries no lambda".into()))?;
    let lambda_expected = ((1.0 - beta) / (2.0 * theta)).sqrt();
    let q_beta = lognormal.quantile(0, beta)?;
    Ok(FirstOrderDiagnostics {
        lambda_expected,
        lambda_error: (lambda - lambda_expected).abs(),
        q_beta,
        quantile_error: (strike + report.alpha - 0.5 / lambda - q_beta).abs(),
    })
}

/// Numerical coherence checks for the robust ES.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoherenceReport {
    /// `|ρ̃(f + k) − ρ̃(f) − k|`
    pub translation_error: f64,
    /// `(a, |ρ̃(a·f) − a·ρ̃(f)| / |a·ρ̃(f)|)` for each scale tested
    pub homogeneity_errors: Vec<(f64, f64)>,
    /// `max(0, ρ̃(f + g) − ρ̃(f) − ρ̃(g))`
    pub subadditivity_violation: f64,
}

pub fn coherence_suite(
    f: &PwlConvex,
    g: &PwlConvex,
    baseline: &dyn Expectation,
    theta: f64,
    beta: f64,
    shift: f64,
    tolerances: EsTolerances,
) -> Result<CoherenceReport> {
    let rho = |h: &PwlConvex| -> Result<f64> {
        robust_es(&RobustEsProblem::new(h, baseline, theta, beta).with_tolerances(tolerances)).map(|r| r.value)
    };
    let rf = rho(f)?;
    let translation_error = (rho(&f.shift(shift))? - rf - shift).abs();
    let mut homogeneity_errors = Vec::new();
    for a in [0.5, 2.0] {
        let scaled = rho(&f.scale(a)?)?;
        let denom = (a * rf).abs().max(f64::MIN_POSITIVE);
        homogeneity_errors.push((a, (scaled - a * rf).abs() / denom));
    }
    let subadditivity_violation = (rho(&f.sum(g)?)? - rf - rho(g)?).max(0.0);
    Ok(CoherenceReport {
        translation_error,
        homogeneity_errors,
        subadditivity_violation,
    })
}
