//! Horizon profiles (CSV or JSON), renewable prediction errors and the
//! error study that plans on perturbed forecasts but executes on the truth.

use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energy::{storage_update, EnergyDemand, StorageLevel};
use crate::error::{Error, Result};
use crate::geometry::NetworkConfig;
use crate::numerics::compensated_sum;
use crate::policy::{run_policy, suboptimal_purchase, Outlook, PurchaseRule};
use crate::rng::stream_rng;

/// Exogenous inputs of one horizon; `λ_m(t) = λ_m^all · θ(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HorizonProfile {
    pub t: usize,
    pub theta: f64,
    pub lambda_e: f64,
    pub price: f64,
}

impl HorizonProfile {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.theta) {
            return Err(Error::Validation(format!("horizon {}: theta {} outside [0, 1]", self.t, self.theta)));
        }
        if !(self.lambda_e >= 0.0) || !self.lambda_e.is_finite() {
            return Err(Error::Validation(format!("horizon {}: lambda_e {} must be >= 0", self.t, self.lambda_e)));
        }
        if !(self.price > 0.0) || !self.price.is_finite() {
            return Err(Error::Validation(format!("horizon {}: price {} must be > 0", self.t, self.price)));
        }
        Ok(())
    }
}

/// Loads a profile file; `.json` is read as a JSON array, anything else as CSV.
pub fn load_profiles(path: &Path) -> Result<Vec<HorizonProfile>> {
    let text = std::fs::read_to_string(path)?;
    match path.extension().and_then(|e| e.to_str()) {
        Some("json") => parse_profiles_json(&text),
        _ => parse_profiles_csv(&text),
    }
}

/// CSV with header `t,theta,lambda_e,price`; lines starting with `#` are comments.
pub fn parse_profiles_csv(text: &str) -> Result<Vec<HorizonProfile>> {
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(text.as_bytes());
    let header = reader.headers().map_err(csv_error)?.clone();
    let expected = ["t", "theta", "lambda_e", "price"];
    if header.is_empty() {
        return Err(Error::Parse { line: 1, message: "empty profile file".into() });
    }
    if header.iter().ne(expected) {
        return Err(Error::Parse { line: 1, message: format!("expected header {}", expected.join(",")) });
    }
    let mut rows = Vec::new();
    for record in reader.deserialize::<HorizonProfile>() {
        rows.push(record.map_err(csv_error)?);
    }
    if rows.is_empty() {
        return Err(Error::Parse { line: 2, message: "no profile rows".into() });
    }
    validate_profiles(rows)
}

pub fn parse_profiles_json(text: &str) -> Result<Vec<HorizonProfile>> {
    let rows: Vec<HorizonProfile> =
        serde_json::from_str(text).map_err(|e| Error::Parse { line: e.line() as u64, message: e.to_string() })?;
    if rows.is_empty() {
        return Err(Error::Parse { line: 1, message: "no profile rows".into() });
    }
    validate_profiles(rows)
}

fn csv_error(err: csv::Error) -> Error {
    let line = err.position().map(|p| p.line()).unwrap_or(0);
    Error::Parse { line, message: err.to_string() }
}

/// Sorts by `t` and checks field ranges and that `t` runs `1..=n` without gaps.
pub fn validate_profiles(mut rows: Vec<HorizonProfile>) -> Result<Vec<HorizonProfile>> {
    rows.sort_by_key(|p| p.t);
    for (k, p) in rows.iter().enumerate() {
        if p.t != k + 1 {
            let what = if k > 0 && rows[k - 1].t == p.t { "duplicate" } else { "missing or out-of-range" };
            return Err(Error::Validation(format!("{what} horizon index near t = {}", p.t)));
        }
        p.validate()?;
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorModel {
    /// Standard deviation of the additive Gaussian forecast error (W/m²).
    pub eta: f64,
    pub seed: u64,
}

impl ErrorModel {
    pub fn new(eta: f64, seed: u64) -> Result<Self> {
        if !(eta >= 0.0) || !eta.is_finite() {
            return Err(Error::Validation(format!("error std {eta} must be >= 0")));
        }
        Ok(Self { eta, seed })
    }
}

/// Draws one forecast error per horizon, in order.
pub fn draw_errors<R: Rng>(eta: f64, horizons: usize, rng: &mut R) -> Vec<f64> {
    if eta == 0.0 {
        return vec![0.0; horizons];
    }
    let normal = Normal::new(0.0, eta).expect("eta validated as finite and non-negative");
    (0..horizons).map(|_| normal.sample(rng)).collect()
}

/// `λ_e + Δ` clamped at zero, with `Δ` from stream 0 of the model's seed.
pub fn perturb_renewables(profiles: &[HorizonProfile], err: &ErrorModel) -> Vec<HorizonProfile> {
    let mut rng = stream_rng(err.seed, 0);
    let deltas = draw_errors(err.eta, profiles.len(), &mut rng);
    profiles
        .iter()
        .zip(deltas)
        .map(|(p, d)| HorizonProfile { lambda_e: (p.lambda_e + d).max(0.0), ..*p })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorStudy {
    pub error_free_cost: f64,
    pub mean_cost: f64,
    pub std_cost: f64,
    pub std_error: f64,
    pub realizations: usize,
    /// Horizons (summed over realizations) that needed an emergency top-up.
    pub top_ups: usize,
}

struct Realized {
    cost: f64,
    top_ups: usize,
}

fn execute_with_forecast(cfg: &NetworkConfig, truth: &Outlook, deltas: &[f64]) -> Result<Realized> {
    let mut forecast = truth.clone();
    for (h, d) in forecast.horizons.iter_mut().zip(deltas) {
        h.lambda_e = (h.lambda_e + d).max(0.0);
    }
    let mut b = StorageLevel::EMPTY;
    let mut costs = Vec::with_capacity(truth.len());
    let mut top_ups = 0;
    for (k, h) in truth.horizons.iter().enumerate() {
        let planned = suboptimal_purchase(&forecast.state_at(k, b.value()), cfg).g;
        let shortfall = h.e_min - b.value() - h.lambda_e - planned;
        let g = if shortfall > 0.0 {
            top_ups += 1;
            planned + shortfall
        } else {
            planned
        };
        b = storage_update(b, h.lambda_e, g, EnergyDemand::new(h.e_min)?, cfg.capacity)?;
        costs.push(h.price * g);
    }
    Ok(Realized { cost: compensated_sum(costs), top_ups })
}

/// Mean and spread of the total cost when the over-purchase rule plans on
/// noisy renewable forecasts. Realization `r` draws from stream `r` of the
/// seed, so a longer outlook reuses the same leading errors.
pub fn run_with_errors(cfg: &NetworkConfig, truth: &Outlook, err: &ErrorModel, n_realizations: usize) -> Result<ErrorStudy> {
    if n_realizations == 0 {
        return Err(Error::Validation("at least one realization required".into()));
    }
    let error_free_cost = run_policy(cfg, truth, PurchaseRule::Suboptimal)?.total_cost;
    let runs = (0..n_realizations)
        .into_par_iter()
        .map(|r| {
            let mut rng: ChaCha8Rng = stream_rng(err.seed, r as u64);
            let deltas = draw_errors(err.eta, truth.len(), &mut rng);
            execute_with_forecast(cfg, truth, &deltas)
        })
        .collect::<Result<Vec<_>>>()?;
    let n = n_realizations as f64;
    // Averaged as offsets from the error-free cost so that η = 0 reproduces it exactly.
    let mean_cost = error_free_cost + compensated_sum(runs.iter().map(|r| r.cost - error_free_cost)) / n;
    let var = if n_realizations > 1 {
        compensated_sum(runs.iter().map(|r| (r.cost - mean_cost).powi(2))) / (n - 1.0)
    } else {
        0.0
    };
    let std_cost = var.sqrt();
    Ok(ErrorStudy {
        error_free_cost,
        mean_cost,
        std_cost,
        std_error: std_cost / n.sqrt(),
        realizations: n_realizations,
        top_ups: runs.iter().map(|r| r.top_ups).sum(),
    })
}
