//! Linear BS power model, areal demand of the BS population and the
//! capacity-clamped storage recursion. Energy and power are interchangeable
//! because every horizon lasts one hour.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{avg_traffic_load, rho_min, NetworkConfig};
use crate::policy::SystemState;

/// Slack allowed on the demand constraint before a violation is reported;
/// absorbs rounding in `b + λ_e + G - E` when `G` is the exact myopic amount.
pub const DEMAND_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StorageLevel(f64);

impl StorageLevel {
    pub const EMPTY: StorageLevel = StorageLevel(0.0);

    pub fn new(b: f64, capacity: f64) -> Result<Self> {
        if !(b >= 0.0 && b <= capacity) {
            return Err(Error::Domain(format!("storage level {b} outside [0, {capacity}]")));
        }
        Ok(Self(b))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EnergyDemand(f64);

impl EnergyDemand {
    pub fn new(e: f64) -> Result<Self> {
        if !(e >= 0.0) || !e.is_finite() {
            return Err(Error::Domain(format!("energy demand {e} must be finite and >= 0")));
        }
        Ok(Self(e))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Mean power of an active BS serving `d` MTs on average.
pub fn active_bs_power(cfg: &NetworkConfig, d: f64) -> Result<f64> {
    if !(d >= 0.0) {
        return Err(Error::Domain(format!("traffic load {d} must be >= 0")));
    }
    Ok(cfg.p_a + cfg.p_b / cfg.mu * d)
}

pub fn inactive_bs_power(cfg: &NetworkConfig) -> f64 {
    cfg.p_s
}

/// `λ_B ρ (P_a - P_s) + λ_B P_s + P_B λ_m / μ`, per unit area.
pub fn areal_energy_demand(cfg: &NetworkConfig, rho: f64, lambda_m: f64) -> Result<EnergyDemand> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::Domain(format!("active probability {rho} outside [0, 1]")));
    }
    if !(lambda_m >= 0.0) {
        return Err(Error::Domain(format!("MT density {lambda_m} must be >= 0")));
    }
    let gap = cfg.p_a - cfg.p_s;
    EnergyDemand::new(cfg.lambda_b * rho * gap + cfg.lambda_b * cfg.p_s + cfg.p_b * lambda_m / cfg.mu)
}

/// Demand in the unsimplified form `λ_B ρ P_on(D) + λ_B (1-ρ) P_off`.
pub fn areal_energy_demand_from_powers(cfg: &NetworkConfig, rho: f64, lambda_m: f64) -> Result<f64> {
    let d = avg_traffic_load(lambda_m, cfg.lambda_b, rho)?;
    Ok(cfg.lambda_b * rho * active_bs_power(cfg, d)? + cfg.lambda_b * (1.0 - rho) * inactive_bs_power(cfg))
}

/// Demand at the smallest feasible active probability.
pub fn min_energy_demand(cfg: &NetworkConfig, lambda_m: f64) -> Result<EnergyDemand> {
    let rho = rho_min(cfg, lambda_m)?;
    areal_energy_demand(cfg, rho, lambda_m)
}

/// `min(b + λ_e + g - e, C)`; a negative balance is a policy bug and is rejected.
pub fn storage_update(b: StorageLevel, lambda_e: f64, g: f64, e: EnergyDemand, capacity: f64) -> Result<StorageLevel> {
    let balance = b.0 + lambda_e + g - e.0;
    if balance < -DEMAND_TOLERANCE {
        return Err(Error::DemandViolation { shortfall: -balance });
    }
    Ok(StorageLevel(balance.clamp(0.0, capacity)))
}

/// `(g_min, g_max)` for the state's current horizon; `g_max` never drops below `g_min`.
pub fn purchase_bounds(state: &SystemState) -> (f64, f64) {
    let e = &state.future_e_min;
    let l = &state.future_lambda_e;
    let g_min = (e[0] - state.b - l[0]).max(0.0);
    let g_max = (e.iter().sum::<f64>() - l.iter().sum::<f64>()).max(g_min);
    (g_min, g_max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn cfg() -> NetworkConfig {
        NetworkConfig::default()
    }

    #[test]
    fn bs_power_examples() {
        assert_eq!(active_bs_power(&cfg(), 0.0).unwrap(), 130.0);
        assert!((active_bs_power(&cfg(), 1.0).unwrap() - 223.896_713_615_023_47).abs() < 1e-10);
        let p = |d| active_bs_power(&cfg(), d).unwrap();
        assert_relative_eq!(p(6.0) - p(3.0), p(3.0) - p(0.0), max_relative = 1e-12);
        assert!(active_bs_power(&cfg(), -1.0).is_err());
        assert_eq!(inactive_bs_power(&cfg()), 75.0);
        assert!(inactive_bs_power(&cfg()) < p(0.0));
    }

    #[test]
    fn areal_demand_examples() {
        assert_relative_eq!(areal_energy_demand(&cfg(), 1.0, 0.0).unwrap().value(), 0.065, max_relative = 1e-14);
        assert_relative_eq!(areal_energy_demand(&cfg(), 0.0, 0.0).unwrap().value(), 0.0375, max_relative = 1e-14);
        let slope = areal_energy_demand(&cfg(), 0.7, 1e-3).unwrap().value()
            - areal_energy_demand(&cfg(), 0.2, 1e-3).unwrap().value();
        assert_relative_eq!(slope / 0.5, cfg().lambda_b * 55.0, max_relative = 1e-10);
    }

    #[test]
    fn simplified_demand_matches_power_form() {
        for rho in [0.05, 0.4, 1.0] {
            for lm in [0.0, 3e-4, 2e-3] {
                let simplified = areal_energy_demand(&cfg(), rho, lm).unwrap().value();
                let full = areal_energy_demand_from_powers(&cfg(), rho, lm).unwrap();
                assert_relative_eq!(simplified, full, max_relative = 1e-13);
            }
        }
    }

    #[test]
    fn min_demand_examples() {
        let cfg = cfg();
        let floor = min_energy_demand(&cfg, 0.0).unwrap().value();
        let rho0 = rho_min(&cfg, 0.0).unwrap();
        assert_relative_eq!(floor, cfg.lambda_b * rho0 * 55.0 + cfg.lambda_b * 75.0, max_relative = 1e-14);
        // Composed from the frozen exact threshold at lambda_m = 1.6e-3.
        let e = min_energy_demand(&cfg, 1.6e-3).unwrap().value();
        let expected = 5e-4 * 0.741_990_669_054_415_9 * 55.0 + 5e-4 * 75.0 + 20.0 * 1.6e-3 / 0.213;
        assert!((e - expected).abs() < 1e-12);
        assert!(matches!(min_energy_demand(&cfg, 4e-3), Err(Error::InfeasibleLoad { .. })));
    }

    #[test]
    fn storage_update_examples() {
        let e = |v| EnergyDemand::new(v).unwrap();
        let s = |v| StorageLevel::new(v, 0.2).unwrap();
        assert_eq!(storage_update(s(0.0), 0.0, 0.07, e(0.07), 0.2).unwrap().value(), 0.0);
        assert_relative_eq!(storage_update(s(0.1), 0.05, 0.02, e(0.07), 0.2).unwrap().value(), 0.10, max_relative = 1e-12);
        assert_eq!(storage_update(s(0.19), 0.1, 0.0, e(0.05), 0.2).unwrap().value(), 0.2);
        assert!(matches!(
            storage_update(s(0.0), 0.01, 0.0, e(0.05), 0.2),
            Err(Error::DemandViolation { .. })
        ));
    }

    #[test]
    fn purchase_bound_examples() {
        let state = SystemState::from_demands(1, 0.0, vec![0.02, 0.03], vec![1.0, 2.0], vec![0.1, 0.12]).unwrap();
        let (lo, hi) = purchase_bounds(&state);
        assert_relative_eq!(lo, 0.08, max_relative = 1e-12);
        assert_relative_eq!(hi, 0.17, max_relative = 1e-12);
        let rich = SystemState::from_demands(1, 0.1, vec![0.2, 0.3], vec![1.0, 2.0], vec![0.1, 0.12]).unwrap();
        assert_eq!(purchase_bounds(&rich), (0.0, 0.0));
    }
}
