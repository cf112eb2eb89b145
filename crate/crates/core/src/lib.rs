//! Distributionally robust expected values and Expected Shortfall when the baseline
//! distribution may be perturbed within a quadratic-cost optimal transport ball.
//!
//! Payoffs are convex maxima of affine pieces ([`PwlConvex`]). For those the
//! `λc`-transform with `c(x, y) = ½‖x − y‖²` has a closed form, which turns the robust
//! problem into one-dimensional searches over quadrature integrals.

mod envelope;
pub mod duality;
pub mod error;
pub mod measures;
pub mod normal;
pub mod optimize;
pub mod portfolio;
pub mod pwl;
pub mod risk;
pub mod transport;

pub use duality::{dual_objective, robust_expected_value, DualSolveReport, DualSolver};
pub use error::{Error, Result};
pub use measures::{
    discrete_from_grid, price_call, price_put, Baseline, DiscreteMeasure, Expectation, MeasureSpec,
    ProductLognormal, QuadratureGrid,
};
pub use portfolio::{net_liability, run_table1, PremiumMeasure, Table1Config, Table1Row, ThreeAssetSpec};
pub use pwl::{AffinePiece, PwlConvex, QuadraticAffine};
pub use risk::{
    coherence_suite, es_nonrobust, first_order_check, robust_es, robust_es_call_closed_form, var_bounds,
    CallClosedForm, CoherenceReport, EsSolveReport, EsTolerances, FirstOrderDiagnostics, RobustEsProblem,
};
pub use transport::{dc_discrete, primal_robust_ev_oracle, quadratic_cost, Coupling, TransportSolution};
