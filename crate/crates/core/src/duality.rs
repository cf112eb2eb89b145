//! Robust expected value `sup { ∫f dν : d_c(ν, ν₀) ≤ θ }` through its one-dimensional dual
//! `inf_{λ>0} { λθ + ∫ f^{λc} dν₀ }`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::Expectation;
use crate::optimize::golden_section_log;
use crate::pwl::PwlConvex;

/// Search settings for the outer minimization over λ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DualSolver {
    /// Initial bracket for λ.
    pub lambda_lo: f64,
    pub lambda_hi: f64,
    /// The bracket is widened tenfold while the minimum sits on an end, up to these limits.
    pub lambda_min: f64,
    pub lambda_max: f64,
    /// Final bracket width in `ln λ`.
    pub rel_tol: f64,
    pub max_iter: usize,
}

impl Default for DualSolver {
    fn default() -> Self {
        Self {
            lambda_lo: 1e-6,
            lambda_hi: 1e6,
            lambda_min: 1e-12,
            lambda_max: 1e12,
            rel_tol: 1e-8,
            max_iter: 200,
        }
    }
}

impl DualSolver {
    pub fn with_tol(rel_tol: f64) -> Self {
        Self {
            rel_tol,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = self.lambda_min > 0.0
            && self.lambda_min <= self.lambda_lo
            && self.lambda_lo < self.lambda_hi
            && self.lambda_hi <= self.lambda_max
            && self.lambda_max.is_finite();
        if !ok {
            return Err(Error::InvalidSpec(format!(
                "lambda bracket needs 0 < min <= lo < hi <= max < inf, got {} <= {} < {} <= {}",
                self.lambda_min, self.lambda_lo, self.lambda_hi, self.lambda_max
            )));
        }
        if !(self.rel_tol > 0.0) {
            return Err(Error::InvalidSpec(format!("tolerance must be > 0, got {}", self.rel_tol)));
        }
        Ok(())
    }
}

/// Outcome of [`robust_expected_value`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DualSolveReport {
    /// Minimizing λ. `None` for θ = 0, where the infimum is only approached as λ → ∞.
    pub lambda: Option<f64>,
    pub value: f64,
    pub evaluations: usize,
    /// Bracket of the final search.
    pub bracket: (f64, f64),
    /// False when the minimum still sat on an end of the widest allowed bracket.
    pub converged: bool,
}

impl DualSolveReport {
    /// Turns a non-converged report into [`Error::BracketFailure`].
    pub fn ensure_converged(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::BracketFailure {
                what: "lambda",
                lo: self.bracket.0,
                hi: self.bracket.1,
            })
        }
    }
}

fn check_theta(theta: f64) -> Result<()> {
    if !(theta >= 0.0) || !theta.is_finite() {
        return Err(Error::InvalidTheta(theta));
    }
    Ok(())
}

/// `λθ + ∫ f^{λc} dν₀`.
pub fn dual_objective(f: &PwlConvex, baseline: &dyn Expectation, theta: f64, lambda: f64) -> Result<f64> {
    check_theta(theta)?;
    let g = f.lambda_c_transform(lambda)?;
    Ok(lambda * theta + baseline.expect_pwl(&g)?)
}

/// Minimizes [`dual_objective`] over λ by golden-section search in `ln λ`.
pub fn robust_expected_value(
    f: &PwlConvex,
    baseline: &dyn Expectation,
    theta: f64,
    solver: &DualSolver,
) -> Result<DualSolveReport> {
    check_theta(theta)?;
    solver.validate()?;
    if theta == 0.0 {
        return Ok(DualSolveReport {
            lambda: None,
            value: baseline.expect_pwl(f)?,
            evaluations: 1,
            bracket: (f64::INFINITY, f64::INFINITY),
            converged: true,
        });
    }
    if f.is_constant() {
        // f^{λc} = f for every λ > 0, so the objective decreases to its value at λ = 0
        return Ok(DualSolveReport {
            lambda: Some(0.0),
            value: baseline.expect_pwl(f)?,
            evaluations: 1,
            bracket: (0.0, 0.0),
            converged: true,
        });
    }

    let objective = |lambda: f64| dual_objective(f, baseline, theta, lambda);
    let (mut lo, mut hi) = (solver.lambda_lo, solver.lambda_hi);
    let mut evaluations = 0;
    // how close (in ln λ) to an end counts as sitting on it
    let edge = (4.0 * solver.rel_tol).max(1e-12);
    loop {
        let m = golden_section_log(objective, lo, hi, solver.rel_tol, solver.max_iter)?;
        evaluations += m.evaluations;
        let at_lo = (m.x / lo).ln() <= edge;
        let at_hi = (hi / m.x).ln() <= edge;
        let can_lower = lo > solver.lambda_min;
        let can_raise = hi < solver.lambda_max;
        if at_lo && can_lower {
            hi = (lo * 10.0).min(hi);
            lo = (lo / 10.0).max(solver.lambda_min);
            continue;
        }
        if at_hi && can_raise {
            lo = (hi / 10.0).max(lo);
            hi = (hi * 10.0).min(solver.lambda_max);
            continue;
        }
        return Ok(DualSolveReport {
            lambda: Some(m.x),
            value: m.value,
            evaluations,
            bracket: (lo, hi),
            converged: m.converged && !at_lo && !at_hi,
        });
    }
}
