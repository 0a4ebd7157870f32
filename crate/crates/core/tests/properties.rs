use gridcell::energy::{purchase_bounds, storage_update, EnergyDemand, StorageLevel};
use gridcell::geometry::{
    rho_min, success_probability, success_probability_closed_form, success_probability_quadrature, CoverageInputs,
    NetworkConfig,
};
use gridcell::montecarlo::grid::{torus_dist2, TorusGrid};
use gridcell::numerics::gaussian_tail;
use gridcell::policy::{dp_optimal_search, run_policy, DpOptions, Outlook, PurchaseRule};
use gridcell::Error;
use proptest::prelude::*;

const STEP: f64 = 1e-4;

fn cfg() -> NetworkConfig {
    NetworkConfig::default()
}

/// Outlooks with every demand below capacity.
fn outlooks(max_len: usize) -> impl Strategy<Value = Outlook> {
    (1..=max_len).prop_flat_map(|n| {
        (
            prop::collection::vec(0.02..0.2_f64, n),
            prop::collection::vec(0.0..0.25_f64, n),
            prop::collection::vec(0.5..3.0_f64, n),
        )
            .prop_map(|(e, l, a)| Outlook::from_demands(&e, &l, &a).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn success_grows_with_activity(lm in 1e-5..3e-3_f64, r1 in 0.01..1.0_f64, r2 in 0.01..1.0_f64) {
        let (lo, hi) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
        let p = |rho| success_probability(&cfg(), &CoverageInputs::new(rho, lm).unwrap()).unwrap();
        prop_assert!(p(lo) <= p(hi) + 1e-12);
    }

    #[test]
    fn closed_form_agrees_with_quadrature(lm in 1e-5..1e-2_f64, rho in 0.01..1.0_f64, beta in 0.5..8.0_f64) {
        let c = NetworkConfig { beta, ..cfg() };
        let inp = CoverageInputs::new(rho, lm).unwrap();
        let closed = success_probability_closed_form(&c, &inp).unwrap();
        let quad = success_probability_quadrature(&c, &inp).unwrap();
        prop_assert!((closed - quad).abs() <= 1e-6, "{closed} vs {quad}");
        prop_assert!((0.0..=1.0).contains(&closed));
    }

    #[test]
    fn threshold_is_the_coverage_boundary(lm in 1e-5..2.1e-3_f64) {
        match rho_min(&cfg(), lm) {
            Ok(r) => {
                let p = success_probability(&cfg(), &CoverageInputs::new(r, lm).unwrap()).unwrap();
                prop_assert!((p - 0.95).abs() <= 1e-6 || (r <= 1e-9 && p >= 0.95));
            }
            Err(Error::InfeasibleLoad { rho_min, .. }) => prop_assert!(rho_min > 1.0),
            Err(e) => prop_assert!(false, "{e}"),
        }
    }

    #[test]
    fn gaussian_tail_is_symmetric(x in -8.0..8.0_f64) {
        prop_assert!((gaussian_tail(x) + gaussian_tail(-x) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn storage_stays_within_capacity(b in 0.0..0.2_f64, l in 0.0..0.5_f64, g in 0.0..0.5_f64, e in 0.0..0.3_f64) {
        let before = StorageLevel::new(b, 0.2).unwrap();
        match storage_update(before, l, g, EnergyDemand::new(e).unwrap(), 0.2) {
            Ok(next) => prop_assert!((0.0..=0.2).contains(&next.value())),
            Err(Error::DemandViolation { shortfall }) => prop_assert!(b + l + g < e && shortfall > 0.0),
            Err(other) => prop_assert!(false, "{other}"),
        }
    }

    #[test]
    fn rules_respect_demand_and_bounds(outlook in outlooks(8)) {
        for rule in [PurchaseRule::Myopic, PurchaseRule::Suboptimal] {
            let s = run_policy(&cfg(), &outlook, rule).unwrap();
            for (k, h) in outlook.horizons.iter().enumerate() {
                let (g_min, g_max) = purchase_bounds(&outlook.state_at(k, s.storage[k]));
                prop_assert!(s.g[k] >= g_min - 1e-15 && s.g[k] <= g_max + 1e-12);
                prop_assert!(s.storage[k] + h.lambda_e + s.g[k] >= h.e_min - 1e-12);
                prop_assert!((0.0..=cfg().capacity).contains(&s.storage[k + 1]));
            }
        }
    }

    #[test]
    fn dp_bounds_the_rules(outlook in outlooks(4)) {
        let dp = dp_optimal_search(&cfg(), &outlook, &DpOptions { grid_step: STEP, budget: 400_000 }).unwrap();
        let floor = STEP * outlook.price().iter().sum::<f64>();
        let sub = run_policy(&cfg(), &outlook, PurchaseRule::Suboptimal).unwrap().total_cost;
        let myopic = run_policy(&cfg(), &outlook, PurchaseRule::Myopic).unwrap().total_cost;
        prop_assert!(dp.total_cost() <= sub + floor);
        prop_assert!(dp.total_cost() <= myopic + floor);
        for stage in &dp.value {
            prop_assert!(stage.windows(2).all(|w| w[1] <= w[0] + 1e-15));
        }
    }

    #[test]
    fn torus_distance_is_a_symmetric_metric(p in prop::array::uniform2(0.0..1000.0_f64), q in prop::array::uniform2(0.0..1000.0_f64)) {
        let d = torus_dist2(&p, &q, 1000.0);
        prop_assert_eq!(d, torus_dist2(&q, &p, 1000.0));
        prop_assert!(d <= 2.0 * 500.0 * 500.0 + 1e-9);
    }

    #[test]
    fn nearest_matches_linear_scan(points in prop::collection::vec(prop::array::uniform2(0.0..500.0_f64), 1..60), q in prop::array::uniform2(0.0..500.0_f64)) {
        let grid = TorusGrid::new(&points, None, 500.0);
        let (idx, d2) = grid.nearest(&q).unwrap();
        let best = points.iter().map(|p| torus_dist2(&q, p, 500.0)).fold(f64::INFINITY, f64::min);
        prop_assert_eq!(d2, best);
        prop_assert_eq!(torus_dist2(&q, &points[idx], 500.0), best);
    }
}
