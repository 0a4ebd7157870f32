//! Decision layer: active-probability schedule, myopic / two-horizon /
//! over-purchasing rules, forward simulation, and a storage-grid DP oracle.

use serde::{Deserialize, Serialize};

use crate::energy::{areal_energy_demand, min_energy_demand, purchase_bounds, storage_update, EnergyDemand, StorageLevel};
use crate::error::{Error, Result};
use crate::geometry::{rho_min, NetworkConfig};
use crate::numerics::compensated_sum;
use crate::scenario::HorizonProfile;

mod dp;

pub use dp::{dp_optimal_search, DpOptions, DpSolution};

/// DP state at the start of horizon `t` (1-based): storage plus the
/// remaining profile tail `t..=T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemState {
    pub t: usize,
    pub b: f64,
    pub future_lambda_e: Vec<f64>,
    pub future_price: Vec<f64>,
    /// `None` when minimum demands were supplied directly.
    pub future_lambda_m: Option<Vec<f64>>,
    pub future_e_min: Vec<f64>,
}

impl SystemState {
    pub fn new(cfg: &NetworkConfig, t: usize, b: f64, lambda_e: Vec<f64>, price: Vec<f64>, lambda_m: Vec<f64>) -> Result<Self> {
        let e_min = lambda_m
            .iter()
            .enumerate()
            .map(|(k, &lm)| min_energy_demand(cfg, lm).map(EnergyDemand::value).map_err(|e| e.at_horizon(t + k)))
            .collect::<Result<Vec<_>>>()?;
        let mut state = Self::from_demands(t, b, lambda_e, price, e_min)?;
        state.future_lambda_m = Some(lambda_m);
        Ok(state)
    }

    pub fn from_demands(t: usize, b: f64, lambda_e: Vec<f64>, price: Vec<f64>, e_min: Vec<f64>) -> Result<Self> {
        let n = e_min.len();
        if n == 0 || lambda_e.len() != n || price.len() != n {
            return Err(Error::Validation("state sequences must be non-empty and of equal length".into()));
        }
        if t == 0 {
            return Err(Error::Validation("horizon index is 1-based".into()));
        }
        if !(b >= 0.0) {
            return Err(Error::Validation(format!("storage level {b} must be >= 0")));
        }
        if price.iter().any(|&a| !(a > 0.0)) {
            return Err(Error::Validation("prices must be positive".into()));
        }
        if lambda_e.iter().chain(&e_min).any(|&x| !(x >= 0.0)) {
            return Err(Error::Validation("arrival rates and demands must be >= 0".into()));
        }
        Ok(Self { t, b, future_lambda_e: lambda_e, future_price: price, future_lambda_m: None, future_e_min: e_min })
    }

    /// Number of horizons left, including the current one.
    pub fn remaining(&self) -> usize {
        self.future_e_min.len()
    }

    fn future_need(&self) -> f64 {
        compensated_sum(self.future_e_min[1..].iter().copied()) - compensated_sum(self.future_lambda_e[1..].iter().copied())
    }
}

/// One horizon of a planning problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Horizon {
    pub t: usize,
    pub lambda_m: Option<f64>,
    pub rho: Option<f64>,
    pub e_min: f64,
    pub lambda_e: f64,
    pub price: f64,
}

/// Exogenous inputs over `T` consecutive horizons with the optimal active
/// probability and minimum demand already resolved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outlook {
    pub horizons: Vec<Horizon>,
}

impl Outlook {
    pub fn from_profiles(cfg: &NetworkConfig, profiles: &[HorizonProfile], lambda_m_all: f64) -> Result<Self> {
        let rhos = optimal_rho_schedule(cfg, profiles, lambda_m_all)?;
        let horizons = profiles
            .iter()
            .zip(rhos)
            .map(|(p, rho)| {
                let lambda_m = lambda_m_all * p.theta;
                Ok(Horizon {
                    t: p.t,
                    lambda_m: Some(lambda_m),
                    rho: Some(rho),
                    e_min: areal_energy_demand(cfg, rho, lambda_m)?.value(),
                    lambda_e: p.lambda_e,
                    price: p.price,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::checked(horizons)
    }

    pub fn from_demands(e_min: &[f64], lambda_e: &[f64], price: &[f64]) -> Result<Self> {
        if e_min.len() != lambda_e.len() || e_min.len() != price.len() {
            return Err(Error::Validation("demand, arrival and price sequences differ in length".into()));
        }
        let horizons = (0..e_min.len())
            .map(|k| Horizon { t: k + 1, lambda_m: None, rho: None, e_min: e_min[k], lambda_e: lambda_e[k], price: price[k] })
            .collect();
        Self::checked(horizons)
    }

    fn checked(horizons: Vec<Horizon>) -> Result<Self> {
        if horizons.is_empty() {
            return Err(Error::Validation("outlook needs at least one horizon".into()));
        }
        for h in &horizons {
            if !(h.price > 0.0) || !(h.lambda_e >= 0.0) || !(h.e_min >= 0.0) {
                return Err(Error::Validation(format!("horizon {} has a non-positive price or negative rate", h.t)));
            }
        }
        Ok(Self { horizons })
    }

    pub fn len(&self) -> usize {
        self.horizons.len()
    }

    pub fn is_empty(&self) -> bool {
        self.horizons.is_empty()
    }

    /// `len` consecutive horizons starting at 0-based position `start`.
    pub fn window(&self, start: usize, len: usize) -> Result<Self> {
        let end = start + len;
        if len == 0 || end > self.len() {
            return Err(Error::Validation(format!("window {start}+{len} outside {} horizons", self.len())));
        }
        Ok(Self { horizons: self.horizons[start..end].to_vec() })
    }

    /// Copy with horizon `k` (0-based) operated at `rho` instead of the optimum.
    pub fn with_rho(&self, cfg: &NetworkConfig, k: usize, rho: f64) -> Result<Self> {
        let mut out = self.clone();
        let h = out.horizons.get_mut(k).ok_or_else(|| Error::Validation(format!("no horizon at position {k}")))?;
        let lambda_m = h.lambda_m.ok_or_else(|| Error::Validation("outlook has no MT densities".into()))?;
        h.e_min = areal_energy_demand(cfg, rho, lambda_m)?.value();
        h.rho = Some(rho);
        Ok(out)
    }

    pub fn e_min(&self) -> Vec<f64> {
        self.horizons.iter().map(|h| h.e_min).collect()
    }

    pub fn lambda_e(&self) -> Vec<f64> {
        self.horizons.iter().map(|h| h.lambda_e).collect()
    }

    pub fn price(&self) -> Vec<f64> {
        self.horizons.iter().map(|h| h.price).collect()
    }

    /// State at 0-based position `k` with storage `b`.
    pub fn state_at(&self, k: usize, b: f64) -> SystemState {
        let tail = &self.horizons[k..];
        SystemState {
            t: k + 1,
            b,
            future_lambda_e: tail.iter().map(|h| h.lambda_e).collect(),
            future_price: tail.iter().map(|h| h.price).collect(),
            future_lambda_m: tail.iter().map(|h| h.lambda_m).collect(),
            future_e_min: tail.iter().map(|h| h.e_min).collect(),
        }
    }
}

/// Per-horizon decisions with the resulting storage path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub rho: Vec<Option<f64>>,
    pub g: Vec<f64>,
    /// `T + 1` levels, starting from the empty store.
    pub storage: Vec<f64>,
    pub total_cost: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PurchaseRule {
    Myopic,
    Suboptimal,
}

impl std::str::FromStr for PurchaseRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "myopic" => Ok(Self::Myopic),
            "suboptimal" => Ok(Self::Suboptimal),
            other => Err(Error::Validation(format!("unknown purchase rule '{other}'"))),
        }
    }
}

/// `ρ*(t) = ρ_min(λ_m^all θ(t))` for every horizon.
pub fn optimal_rho_schedule(cfg: &NetworkConfig, profiles: &[HorizonProfile], lambda_m_all: f64) -> Result<Vec<f64>> {
    profiles
        .iter()
        .map(|p| rho_min(cfg, lambda_m_all * p.theta).map_err(|e| e.at_horizon(p.t)))
        .collect()
}

pub fn myopic_purchase(e_min: EnergyDemand, b: StorageLevel, lambda_e: f64) -> f64 {
    (e_min.value() - b.value() - lambda_e).max(0.0)
}

fn myopic_for(state: &SystemState) -> f64 {
    purchase_bounds(state).0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenultimateCase {
    /// Storage alone covers both remaining demands net of renewables.
    LargeStorage,
    /// Final-horizon renewables cover the final demand.
    AmpleRenewables,
    /// Final price is not higher than the current one.
    PriceNotLower,
    /// Buy both horizons' net demand now at the cheaper price.
    OverPurchase,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenultimateDecision {
    pub g: f64,
    pub case: PenultimateCase,
}

/// Optimal purchase with exactly two horizons left.
pub fn optimal_purchase_penultimate(state: &SystemState, cfg: &NetworkConfig) -> Result<PenultimateDecision> {
    if state.remaining() != 2 {
        return Err(Error::PreconditionViolation(format!(
            "two horizons must remain, found {}",
            state.remaining()
        )));
    }
    let (e, l, a, b, c) = (&state.future_e_min, &state.future_lambda_e, &state.future_price, state.b, cfg.capacity);
    if !(l[0] < c + e[0] - b) {
        return Err(Error::PreconditionViolation(format!(
            "renewable arrival {} must stay below C + E_min - B = {}",
            l[0],
            c + e[0] - b
        )));
    }
    if !(c >= e[0].max(e[1])) {
        return Err(Error::PreconditionViolation(format!(
            "capacity {c} below the larger minimum demand {}",
            e[0].max(e[1])
        )));
    }
    let myopic = myopic_for(state);
    let both = e[1] + e[0] - l[0] - l[1];
    let case = if b >= both {
        PenultimateCase::LargeStorage
    } else if l[1] >= e[1] {
        PenultimateCase::AmpleRenewables
    } else if a[0] >= a[1] {
        PenultimateCase::PriceNotLower
    } else {
        PenultimateCase::OverPurchase
    };
    let g = match case {
        PenultimateCase::OverPurchase => both - b,
        _ => myopic,
    };
    Ok(PenultimateDecision { g, case })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuboptimalDecision {
    pub g: f64,
    /// The three over-purchase conditions; all false at the last horizon.
    pub conditions: [bool; 3],
    pub over_purchase: bool,
}

/// Over-purchase rule: buy ahead up to `ω(t) = min(Σ_{k>t}(E_min - λ_e), C)`
/// when storage cannot cover the future, the future needs energy, and the
/// current price is strictly the cheapest; otherwise myopic.
pub fn suboptimal_purchase(state: &SystemState, cfg: &NetworkConfig) -> SuboptimalDecision {
    let myopic = myopic_for(state);
    if state.remaining() == 1 {
        return SuboptimalDecision { g: myopic, conditions: [false; 3], over_purchase: false };
    }
    let (e, l, b, c) = (state.future_e_min[0], state.future_lambda_e[0], state.b, cfg.capacity);
    let need = state.future_need();
    let cheapest_future = state.future_price[1..].iter().copied().fold(f64::INFINITY, f64::min);
    let conditions = [
        (b - e + l).min(c) < need,
        need >= 0.0,
        state.future_price[0] < cheapest_future,
    ];
    if conditions.iter().all(|&x| x) {
        let omega = need.min(c);
        SuboptimalDecision { g: (omega + e - l - b).max(0.0), conditions, over_purchase: true }
    } else {
        SuboptimalDecision { g: myopic, conditions, over_purchase: false }
    }
}

/// Forward simulation from the empty store with a per-state decision rule.
pub fn simulate<F>(cfg: &NetworkConfig, outlook: &Outlook, mut decide: F) -> Result<Schedule>
where
    F: FnMut(&SystemState) -> Result<f64>,
{
    let mut b = StorageLevel::EMPTY;
    let mut storage = vec![b.value()];
    let mut g = Vec::with_capacity(outlook.len());
    for (k, h) in outlook.horizons.iter().enumerate() {
        let state = outlook.state_at(k, b.value());
        let purchase = decide(&state)?;
        b = storage_update(b, h.lambda_e, purchase, EnergyDemand::new(h.e_min)?, cfg.capacity)?;
        storage.push(b.value());
        g.push(purchase);
    }
    let total_cost = compensated_sum(outlook.horizons.iter().zip(&g).map(|(h, &g)| h.price * g));
    Ok(Schedule { rho: outlook.horizons.iter().map(|h| h.rho).collect(), g, storage, total_cost })
}

/// Simulates a fixed purchase sequence.
pub fn simulate_purchases(cfg: &NetworkConfig, outlook: &Outlook, purchases: &[f64]) -> Result<Schedule> {
    if purchases.len() != outlook.len() {
        return Err(Error::Validation("one purchase per horizon required".into()));
    }
    simulate(cfg, outlook, |s| Ok(purchases[s.t - 1]))
}

pub fn run_policy(cfg: &NetworkConfig, outlook: &Outlook, rule: PurchaseRule) -> Result<Schedule> {
    simulate(cfg, outlook, |s| {
        Ok(match rule {
            PurchaseRule::Myopic => myopic_for(s),
            PurchaseRule::Suboptimal => suboptimal_purchase(s, cfg).g,
        })
    })
}
