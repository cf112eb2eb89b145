use proptest::prelude::*;
use wassrisk::duality::{dual_objective, robust_expected_value, DualSolver};
use wassrisk::measures::{price_call, price_put, DiscreteMeasure, Expectation, ProductLognormal, QuadratureGrid};
use wassrisk::portfolio::ThreeAssetSpec;
use wassrisk::pwl::oracle::{brute_force_lc, default_box, grid_error_bound, lc_via_legendre};
use wassrisk::pwl::{AffinePiece, PwlConvex};
use wassrisk::risk::{es_nonrobust, es_objective, robust_es, var_bounds, EsTolerances, RobustEsProblem};
use wassrisk::transport::{dc_discrete, default_candidate_support, primal_robust_ev_oracle};

fn pwl(dim: usize, max_pieces: usize) -> impl Strategy<Value = PwlConvex> {
    prop::collection::vec(
        (prop::collection::vec(-2.0..2.0f64, dim), -2.0..2.0f64),
        1..=max_pieces,
    )
    .prop_map(move |raw| {
        let pieces = raw.into_iter().map(|(m, c)| AffinePiece::new(m, c)).collect();
        PwlConvex::new(dim, pieces).unwrap()
    })
}

fn pwl_any_dim() -> impl Strategy<Value = (PwlConvex, Vec<f64>)> {
    (1usize..=3).prop_flat_map(|d| (pwl(d, 6), prop::collection::vec(-2.0..2.0f64, d)))
}

fn discrete_1d(max_atoms: usize) -> impl Strategy<Value = DiscreteMeasure> {
    prop::collection::btree_set(-300i32..300, 1..=max_atoms)
        .prop_flat_map(|atoms| {
            let n = atoms.len();
            (Just(atoms), prop::collection::vec(0.05..1.0f64, n))
        })
        .prop_map(|(atoms, raw)| {
            let total: f64 = raw.iter().sum();
            let mut w: Vec<f64> = raw.iter().map(|r| r / total).collect();
            let residue = 1.0 - w.iter().sum::<f64>();
            w[0] += residue;
            DiscreteMeasure::new(atoms.iter().map(|&a| vec![a as f64 / 100.0]).collect(), w).unwrap()
        })
}

fn lognormal_grid(sigma: f64, n: usize) -> QuadratureGrid {
    QuadratureGrid::build(&ProductLognormal::with_mean(1.0, sigma).unwrap(), n, 1e-7).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn transform_majorizes_and_decreases_in_lambda(
        (f, x) in pwl_any_dim(), l1 in 0.05..5.0f64, factor in 1.01..10.0f64,
    ) {
        let l2 = l1 * factor;
        let g1 = f.lambda_c_transform(l1).unwrap().evaluate(&x).unwrap();
        let g2 = f.lambda_c_transform(l2).unwrap().evaluate(&x).unwrap();
        let fx = f.evaluate(&x).unwrap();
        prop_assert!(g2 >= fx - 1e-12);
        prop_assert!(g1 >= g2 - 1e-12);
        let far = f.lambda_c_transform(1e12).unwrap().evaluate(&x).unwrap();
        prop_assert!((far - fx).abs() < 1e-10);
    }

    #[test]
    fn transform_is_cash_additive((f, x) in pwl_any_dim(), k in -5.0..5.0f64, l in 0.05..5.0f64) {
        let a = f.shift(k).lambda_c_transform(l).unwrap().evaluate(&x).unwrap();
        let b = f.lambda_c_transform(l).unwrap().evaluate(&x).unwrap() + k;
        prop_assert!((a - b).abs() < 1e-12 * (1.0 + b.abs()));
    }

    #[test]
    fn transform_matches_grid_oracles((f, x) in pwl_any_dim(), l in 0.3..5.0f64) {
        let n = match f.dim() { 1 => 4001, 2 => 301, _ => 61 };
        let bx = default_box(&f, l, &x);
        let exact = f.lambda_c_transform(l).unwrap().evaluate(&x).unwrap();
        let bound = grid_error_bound(&f, l, &bx, n);
        let brute = brute_force_lc(&f, l, &x, &bx, n).unwrap();
        let legendre = lc_via_legendre(&f, l, &x, &bx, n).unwrap();
        prop_assert!(brute <= exact + 1e-9 && exact - brute <= bound + 1e-9);
        prop_assert!((legendre - exact).abs() <= bound + 1e-9);
    }

    #[test]
    fn sum_then_prune_is_pointwise_sum(f in pwl(1, 5), g in pwl(1, 5), xs in prop::collection::vec(-5.0..5.0f64, 20)) {
        let s = f.sum(&g).unwrap();
        let p = s.prune();
        prop_assert!(p.len() <= s.len());
        for x in xs {
            let direct = f.evaluate(&[x]).unwrap() + g.evaluate(&[x]).unwrap();
            prop_assert!((p.evaluate(&[x]).unwrap() - direct).abs() < 1e-12 * (1.0 + direct.abs()));
        }
    }

    #[test]
    fn prune_preserves_values_in_3d(f in pwl(3, 6), xs in prop::collection::vec(prop::collection::vec(-3.0..3.0f64, 3), 20)) {
        let p = f.prune();
        for x in xs {
            prop_assert_eq!(p.evaluate(&x).unwrap(), f.evaluate(&x).unwrap());
        }
    }

    #[test]
    fn json_round_trip(f in pwl(2, 4)) {
        let back: PwlConvex = serde_json::from_str(&serde_json::to_string(&f).unwrap()).unwrap();
        prop_assert_eq!(back, f);
    }

    #[test]
    fn transport_symmetric_and_feasible(mu in discrete_1d(8), nu in discrete_1d(8)) {
        let a = dc_discrete(&mu, &nu).unwrap();
        let b = dc_discrete(&nu, &mu).unwrap();
        prop_assert!((a.value - b.value).abs() < 1e-10);
        prop_assert!(a.coupling.marginal_error() < 1e-12);
        prop_assert!((a.coupling.cost() - a.value).abs() < 1e-10);
        prop_assert!(a.min_reduced_cost() > -1e-10);
        prop_assert_eq!(dc_discrete(&mu, &mu).unwrap().value, 0.0);
    }

    #[test]
    fn transport_matches_sorted_coupling_in_1d(mu in discrete_1d(6), nu in discrete_1d(6)) {
        // in one dimension the monotone (quantile) coupling is optimal for convex costs
        let quantile = |m: &DiscreteMeasure, u: f64| {
            let mut acc = 0.0;
            for (a, w) in m.atoms().iter().zip(m.weights()) {
                acc += w;
                if u < acc { return a[0]; }
            }
            m.atoms().last().unwrap()[0]
        };
        let mut cuts: Vec<f64> = [mu.weights(), nu.weights()].iter().flat_map(|ws| {
            ws.iter().scan(0.0, |acc, w| { *acc += w; Some(*acc) }).collect::<Vec<_>>()
        }).collect();
        cuts.push(0.0);
        cuts.sort_by(f64::total_cmp);
        let mut oracle = 0.0;
        for w in cuts.windows(2) {
            let (lo, hi) = (w[0], w[1].min(1.0));
            if hi > lo {
                let u = 0.5 * (lo + hi);
                let d = quantile(&mu, u) - quantile(&nu, u);
                oracle += (hi - lo) * 0.5 * d * d;
            }
        }
        let v = dc_discrete(&mu, &nu).unwrap().value;
        prop_assert!((v - oracle).abs() < 1e-9 * (1.0 + oracle), "{} vs {}", v, oracle);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn dual_is_monotone_dominating_and_translation_invariant(
        f in pwl(1, 4), nu in discrete_1d(6), t1 in 0.0..1.0f64, dt in 0.0..1.0f64, k in -3.0..3.0f64,
    ) {
        let s = DualSolver::with_tol(1e-10);
        let plain = nu.expect_pwl(&f).unwrap();
        let r1 = robust_expected_value(&f, &nu, t1, &s).unwrap();
        let r2 = robust_expected_value(&f, &nu, t1 + dt, &s).unwrap();
        prop_assert!(r1.value >= plain - 1e-9);
        prop_assert!(r2.value >= r1.value - 1e-8);
        let shifted = robust_expected_value(&f.shift(k), &nu, t1, &s).unwrap();
        prop_assert!((shifted.value - r1.value - k).abs() < 1e-8 * (1.0 + r1.value.abs()));
    }

    #[test]
    fn dual_objective_is_convex_in_lambda(f in pwl(1, 4), theta in 0.01..2.0f64) {
        let g = lognormal_grid(0.25, 801);
        let ls: Vec<f64> = (0..50).map(|i| 10f64.powf(-2.0 + 4.0 * i as f64 / 49.0)).collect();
        let vs: Vec<f64> = ls.iter().map(|&l| dual_objective(&f, &g, theta, l).unwrap()).collect();
        for i in 1..49 {
            // second divided difference on the non-uniform λ grid
            let left = (vs[i] - vs[i - 1]) / (ls[i] - ls[i - 1]);
            let right = (vs[i + 1] - vs[i]) / (ls[i + 1] - ls[i]);
            prop_assert!(right - left >= -1e-9 * (1.0 + left.abs()), "at {}: {} {}", i, left, right);
        }
    }

    #[test]
    fn weak_duality_on_discrete_instances(f in pwl(1, 4), nu in discrete_1d(5), theta in 0.0..0.5f64) {
        let support = default_candidate_support(&nu, theta, 200);
        let primal = primal_robust_ev_oracle(&f, &nu, theta, &support).unwrap();
        let dual = robust_expected_value(&f, &nu, theta, &DualSolver::with_tol(1e-10)).unwrap();
        prop_assert!(primal.value <= dual.value + 1e-8, "{} > {}", primal.value, dual.value);
        prop_assert!(primal.budget_used <= theta + 1e-9);
    }

    #[test]
    fn es_objective_convex_along_each_axis(k in 0.7..1.3f64, theta in 0.01..1.0f64) {
        let g = lognormal_grid(0.2, 801);
        let f = PwlConvex::call(k).unwrap();
        let beta = 0.95;
        let alphas: Vec<f64> = (0..30).map(|i| -0.5 + 2.0 * i as f64 / 29.0).collect();
        let va: Vec<f64> = alphas.iter().map(|&a| es_objective(&f, &g, theta, beta, a, 0.7).unwrap()).collect();
        for w in va.windows(3) {
            prop_assert!(w[0] - 2.0 * w[1] + w[2] >= -1e-9);
        }
        let ls: Vec<f64> = (0..30).map(|i| 0.05 + 3.0 * i as f64 / 29.0).collect();
        let vl: Vec<f64> = ls.iter().map(|&l| es_objective(&f, &g, theta, beta, 0.3, l).unwrap()).collect();
        for w in vl.windows(3) {
            prop_assert!(w[0] - 2.0 * w[1] + w[2] >= -1e-9);
        }
    }

    #[test]
    fn robust_es_dominates_and_grows(k in 0.7..1.3f64, t1 in 0.0..0.5f64, dt in 0.0..0.5f64, b1 in 0.8..0.95f64, db in 0.0..0.04f64) {
        let g = lognormal_grid(0.2, 1001);
        let f = PwlConvex::call(k).unwrap();
        let tol = EsTolerances::with_tol(1e-9);
        let es = |t: f64, b: f64| robust_es(&RobustEsProblem::new(&f, &g, t, b).with_tolerances(tol)).unwrap().value;
        let base = es_nonrobust(&f, &g, b1).unwrap();
        let r1 = es(t1, b1);
        prop_assert!(r1 >= base - 1e-7);
        prop_assert!(es(t1 + dt, b1) >= r1 - 1e-7);
        prop_assert!(es(t1, b1 + db) >= r1 - 1e-7);
    }

    #[test]
    fn var_bounds_contain_worst_case_quantiles(f in pwl(1, 4), theta in 0.0..2.0f64, beta in 0.5..0.99f64) {
        let g = lognormal_grid(0.3, 801);
        let (lo, hi) = var_bounds(&f, &g, theta, beta).unwrap();
        let r = es_nonrobust(&f, &g, beta).unwrap();
        prop_assert!(lo < hi);
        prop_assert!(lo <= r + 1e-9);
        let (lo0, hi0) = var_bounds(&f, &g, 0.0, beta).unwrap();
        prop_assert!(lo <= lo0 && hi >= hi0);
    }

    #[test]
    fn three_asset_payoff_equals_asset_sum(
        raw in prop::collection::vec(0.0..1.0f64, 3), c0 in 0.0..0.2f64, p0 in 0.0..0.2f64,
        xs in prop::collection::vec(prop::collection::vec(0.2..2.5f64, 3), 50),
    ) {
        let total: f64 = raw.iter().sum::<f64>().max(1e-9);
        let mut w: Vec<f64> = raw.iter().map(|r| r / total).collect();
        if raw.iter().sum::<f64>() < 1e-9 { w = vec![1.0, 0.0, 0.0]; }
        w[0] = 1.0 - w[1] - w[2];
        prop_assume!(w[0] >= 0.0);
        let spec = ThreeAssetSpec::standard(w[0], w[1], w[2]).with_premiums(c0, p0);
        let f = spec.payoff().unwrap();
        for x in xs {
            let fa = x[0];
            let fb = x[1] + 0.75 * (x[1] - 1.0).max(0.0) - 0.75 * 1.025 * c0;
            let fc = x[2] + 0.75 * (1.0 - x[2]).max(0.0) - 0.75 * 1.025 * p0;
            let direct = w[0] * fa + w[1] * fb + w[2] * fc;
            prop_assert!((f.evaluate(&x).unwrap() - direct).abs() < 1e-12);
        }
    }
}

#[test]
fn quadrature_converges_at_second_order() {
    // endpoint truncation is held fixed, so the trapezoid error dominates the differences
    let m = ProductLognormal::with_mean(1.0, 0.3).unwrap();
    let at = |n: usize| QuadratureGrid::build(&m, n, 1e-3).unwrap().integrate(&|x| x[0] * x[0]).unwrap();
    let (a, b, c) = (at(51), at(101), at(201));
    let ratio = (a - b).abs() / (b - c).abs();
    assert!((ratio - 4.0).abs() < 0.5, "ratio {ratio}");
}

#[test]
fn call_price_convex_and_nonincreasing_in_strike() {
    let g = lognormal_grid(0.2, 2001);
    let ks: Vec<f64> = (0..60).map(|i| 0.4 + 0.02 * i as f64).collect();
    let cs: Vec<f64> = ks.iter().map(|&k| price_call(&g, k).unwrap()).collect();
    for w in cs.windows(2) {
        assert!(w[1] <= w[0] + 1e-15);
    }
    for w in cs.windows(3) {
        assert!(w[0] - 2.0 * w[1] + w[2] >= -1e-12);
    }
}

#[test]
fn put_call_parity_on_grid() {
    let g = lognormal_grid(0.25, 4001);
    let mean = g.integrate(&|x| x[0]).unwrap();
    for k in [0.6, 0.9, 1.0, 1.3] {
        let lhs = price_call(&g, k).unwrap() - price_put(&g, k).unwrap();
        assert!((lhs - (mean - k * g.total_mass())).abs() < 1e-12);
        assert!((lhs - (1.0 - k)).abs() < 1e-5);
    }
}

#[test]
fn nonrobust_alpha_is_the_quantile() {
    let m = ProductLognormal::with_mean(1.0, 0.2).unwrap();
    let g = QuadratureGrid::build(&m, 20_001, 1e-7).unwrap();
    let f = PwlConvex::from_lines(&[(1.0, 0.0)]).unwrap();
    let r = wassrisk::risk::es_nonrobust_report(&f, &g, 0.95, &EsTolerances::default()).unwrap();
    assert!((r.alpha - m.quantile(0, 0.95).unwrap()).abs() < 2e-4, "{}", r.alpha);
}

#[test]
fn robustification_correction_depends_on_payoff() {
    let m = ProductLognormal::with_mean(1.0, 0.2).unwrap();
    let g = QuadratureGrid::build(&m, 20_001, 1e-7).unwrap();
    let (theta, beta) = (0.1, 0.95);
    let q = m.quantile(0, beta).unwrap();
    let corr = (2.0 * theta / (1.0 - beta)).sqrt();
    let solve = |k: f64| {
        let f = PwlConvex::call(k).unwrap();
        let rob = robust_es(&RobustEsProblem::new(&f, &g, theta, beta)).unwrap().value;
        (rob - es_nonrobust(&f, &g, beta).unwrap(), rob)
    };
    let (low, _) = solve(1.0);
    assert!((low - corr).abs() < 1e-3 * corr, "{low} vs {corr}");
    // above the quantile but within reach of the closed form
    let k = q + 0.1;
    let (high, rob) = solve(k);
    let expected = (q - k) + corr + price_call(&g, q).unwrap() / (1.0 - beta) - price_call(&g, k).unwrap() / (1.0 - beta);
    assert!((high - expected).abs() < 1e-3 * corr, "{high} vs {expected}");
    assert!(rob > 0.0);
}
