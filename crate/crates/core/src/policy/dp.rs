//! Backward induction over a uniform storage grid.
//!
//! Each stage considers the no-overbuy purchase `g_min` (whose post-update
//! storage is snapped to the nearest grid point) and every larger purchase
//! that lands storage exactly on a grid point, up to `g_max`. The inner
//! minimisation over those landings is a range-minimum query, so a stage
//! costs `O(n log n)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{simulate_purchases, Outlook, Schedule};
use crate::error::{Error, Result};
use crate::geometry::NetworkConfig;

const LANDING_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DpOptions {
    /// Storage / purchase resolution (W/m²).
    pub grid_step: f64,
    /// Maximum storage cells times horizons.
    pub budget: usize,
}

impl Default for DpOptions {
    fn default() -> Self {
        Self { grid_step: 1e-4, budget: 400_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DpSolution {
    pub schedule: Schedule,
    /// Storage grid shared by every stage.
    pub grid: Vec<f64>,
    /// `value[k][j]`: minimum cost of horizons `k..T` from storage `grid[j]`;
    /// `value[T]` is identically zero.
    pub value: Vec<Vec<f64>>,
}

impl DpSolution {
    pub fn total_cost(&self) -> f64 {
        self.schedule.total_cost
    }
}

/// Sparse table answering leftmost-argmin queries on a fixed slice.
struct RangeMin<'a> {
    values: &'a [f64],
    levels: Vec<Vec<u32>>,
}

impl<'a> RangeMin<'a> {
    fn new(values: &'a [f64]) -> Self {
        let n = values.len();
        let mut levels = vec![(0..n as u32).collect::<Vec<_>>()];
        let mut width = 1;
        while 2 * width <= n {
            let prev = levels.last().expect("level 0 exists");
            let next = (0..=n - 2 * width)
                .map(|i| Self::pick(values, prev[i], prev[i + width]))
                .collect();
            levels.push(next);
            width *= 2;
        }
        Self { values, levels }
    }

    fn pick(values: &[f64], a: u32, b: u32) -> u32 {
        // Ties keep the smaller index.
        if values[b as usize] < values[a as usize] {
            b
        } else {
            a
        }
    }

    /// Leftmost index of the minimum on `lo..=hi`.
    fn argmin(&self, lo: usize, hi: usize) -> usize {
        let span = hi - lo + 1;
        let level = (usize::BITS - 1 - span.leading_zeros()) as usize;
        let row = &self.levels[level];
        Self::pick(self.values, row[lo], row[hi + 1 - (1 << level)]) as usize
    }
}

struct Stage<'a> {
    grid: &'a [f64],
    step: f64,
    capacity: f64,
    next_value: &'a [f64],
    ranking: RangeMin<'a>,
    price: f64,
    e_min: f64,
    lambda_e: f64,
    /// Remaining net demand, the upper purchase bound before clamping.
    need: f64,
}

impl Stage<'_> {
    fn snap(&self, b: f64) -> usize {
        ((b / self.step).round() as usize).min(self.grid.len() - 1)
    }

    /// `(cost-to-go, purchase)` from storage `b` (not necessarily on the grid).
    fn best(&self, b: f64) -> (f64, f64) {
        let net = b + self.lambda_e - self.e_min;
        let g_min = (-net).max(0.0);
        let g_max = self.need.max(g_min);
        let base = net.max(0.0).min(self.capacity);
        let mut best = (self.price * g_min + self.next_value[self.snap(base)], g_min);

        let lo = self.grid.partition_point(|&x| x <= base + LANDING_SLACK);
        let hi = self.grid.partition_point(|&x| x <= net + g_max + LANDING_SLACK);
        if lo < hi {
            let i = self.ranking.argmin(lo, hi - 1);
            let cost = self.ranking.values[i] - self.price * net;
            if cost < best.0 {
                best = (cost, self.grid[i] - net);
            }
        }
        best
    }
}

/// Exact optimum of the purchase problem on the storage grid, with the
/// schedule extracted forward from the empty store and costed exactly.
/// Ties go to the smaller purchase.
pub fn dp_optimal_search(cfg: &NetworkConfig, outlook: &Outlook, opts: &DpOptions) -> Result<DpSolution> {
    let step = opts.grid_step;
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::Validation(format!("grid step {step} must be positive")));
    }
    let capacity = cfg.capacity;
    let cells_f = (capacity / step - 1e-9).ceil() + 1.0;
    let horizons = outlook.len();
    let required_f = cells_f * horizons as f64;
    if required_f > opts.budget as f64 {
        let required = if required_f < usize::MAX as f64 { required_f as usize } else { usize::MAX };
        return Err(Error::BudgetExceeded { required, budget: opts.budget });
    }
    let cells = cells_f as usize;
    let grid: Vec<f64> = (0..cells).map(|j| (j as f64 * step).min(capacity)).collect();

    let e_min = outlook.e_min();
    let lambda_e = outlook.lambda_e();
    let price = outlook.price();
    let need: Vec<f64> = (0..horizons)
        .map(|k| e_min[k..].iter().sum::<f64>() - lambda_e[k..].iter().sum::<f64>())
        .collect();

    let mut value = vec![vec![0.0; cells]; horizons + 1];
    let mut weighted = vec![0.0; cells];
    for k in (0..horizons).rev() {
        let (head, tail) = value.split_at_mut(k + 1);
        let next_value = &tail[0];
        for (w, (&b, &j)) in weighted.iter_mut().zip(grid.iter().zip(next_value.iter())) {
            *w = price[k] * b + j;
        }
        let stage = Stage {
            grid: &grid,
            step,
            capacity,
            next_value,
            ranking: RangeMin::new(&weighted),
            price: price[k],
            e_min: e_min[k],
            lambda_e: lambda_e[k],
            need: need[k],
        };
        head[k].par_iter_mut().zip(grid.par_iter()).for_each(|(out, &b)| *out = stage.best(b).0);
    }

    let mut purchases = Vec::with_capacity(horizons);
    let mut b = 0.0_f64;
    for k in 0..horizons {
        for (w, (&x, &j)) in weighted.iter_mut().zip(grid.iter().zip(value[k + 1].iter())) {
            *w = price[k] * x + j;
        }
        let stage = Stage {
            grid: &grid,
            step,
            capacity,
            next_value: &value[k + 1],
            ranking: RangeMin::new(&weighted),
            price: price[k],
            e_min: e_min[k],
            lambda_e: lambda_e[k],
            need: need[k],
        };
        let g = stage.best(b).1;
        purchases.push(g);
        b = (b + lambda_e[k] + g - e_min[k]).clamp(0.0, capacity);
    }
    let schedule = simulate_purchases(cfg, outlook, &purchases)?;
    Ok(DpSolution { schedule, grid, value })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::{run_policy, PurchaseRule};

    fn hand(prices: [f64; 2]) -> Outlook {
        Outlook::from_demands(&[0.1, 0.12], &[0.02, 0.03], &prices).unwrap()
    }

    #[test]
    fn range_min_matches_brute_force() {
        let values = [3.0, 1.0, 4.0, 1.0, 5.0, 9.0, 2.0, 6.0, 5.0, 3.0, 5.0];
        let rm = RangeMin::new(&values);
        for lo in 0..values.len() {
            for hi in lo..values.len() {
                let brute = (lo..=hi).fold(lo, |best, i| if values[i] < values[best] { i } else { best });
                assert_eq!(rm.argmin(lo, hi), brute, "{lo}..={hi}");
            }
        }
    }

    #[test]
    fn hand_instance_overpurchases() {
        let cfg = NetworkConfig::default();
        let sol = dp_optimal_search(&cfg, &hand([1.0, 2.0]), &DpOptions::default()).unwrap();
        assert!((sol.total_cost() - 0.17).abs() <= 1e-4 * 3.0);
        assert!((sol.schedule.g[0] - 0.17).abs() <= 1e-4);
        assert!(sol.schedule.g[1].abs() <= 1e-4);
        let sol = dp_optimal_search(&cfg, &hand([2.0, 1.0]), &DpOptions::default()).unwrap();
        assert!((sol.schedule.g[0] - 0.08).abs() < 1e-12);
    }

    #[test]
    fn flat_prices_match_myopic() {
        let cfg = NetworkConfig::default();
        let o = Outlook::from_demands(&[0.1, 0.12, 0.09, 0.15], &[0.03, 0.0, 0.05, 0.01], &[1.0; 4]).unwrap();
        let sol = dp_optimal_search(&cfg, &o, &DpOptions::default()).unwrap();
        let my = run_policy(&cfg, &o, PurchaseRule::Myopic).unwrap();
        assert!((sol.total_cost() - my.total_cost).abs() <= 1e-4 * 4.0);
    }

    #[test]
    fn value_table_is_non_increasing_in_storage() {
        let cfg = NetworkConfig::default();
        let o = Outlook::from_demands(&[0.1, 0.14, 0.08], &[0.01, 0.05, 0.0], &[3.0, 1.0, 2.0]).unwrap();
        let sol = dp_optimal_search(&cfg, &o, &DpOptions { grid_step: 1e-3, budget: 10_000 }).unwrap();
        for stage in &sol.value {
            assert!(stage.windows(2).all(|w| w[1] <= w[0] + 1e-15));
        }
    }

    #[test]
    fn budget_guard() {
        let cfg = NetworkConfig::default();
        let err = dp_optimal_search(&cfg, &hand([1.0, 2.0]), &DpOptions { grid_step: 1e-6, budget: 1000 }).unwrap_err();
        assert_eq!(err, Error::BudgetExceeded { required: 400_002, budget: 1000 });
    }

    #[test]
    fn refinement_changes_cost_by_less_than_a_coarse_step() {
        let cfg = NetworkConfig::default();
        let o = Outlook::from_demands(&[0.1, 0.14, 0.08], &[0.01, 0.05, 0.0], &[3.0, 1.0, 2.0]).unwrap();
        let coarse = dp_optimal_search(&cfg, &o, &DpOptions { grid_step: 1e-3, budget: 1_000_000 }).unwrap();
        let fine = dp_optimal_search(&cfg, &o, &DpOptions { grid_step: 1e-4, budget: 1_000_000 }).unwrap();
        assert!((coarse.total_cost() - fine.total_cost()).abs() < 1e-3 * 6.0);
    }
}
