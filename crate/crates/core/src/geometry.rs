//! Stochastic-geometry quantities for a PPP downlink with random frequency
//! reuse: traffic load, band count, success probability and the minimum
//! active-operation probability that meets an outage target.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{bisect, integrate, scaled_gaussian_tail};

/// Static physical and network constants. Densities are per m², powers in W,
/// bandwidths in Hz, capacity in W/m² (one-hour horizons).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub lambda_b: f64,
    pub p_b: f64,
    pub alpha: f64,
    pub beta: f64,
    pub sigma2: f64,
    pub w_total: f64,
    pub b_chan: f64,
    pub epsilon: f64,
    pub mu: f64,
    pub p_a: f64,
    pub p_s: f64,
    pub capacity: f64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            lambda_b: 5e-4,
            p_b: 20.0,
            alpha: 4.0,
            beta: 2.0,
            sigma2: 1e-9,
            w_total: 19.98e6,
            b_chan: 180e3,
            epsilon: 0.05,
            mu: 0.213,
            p_a: 130.0,
            p_s: 75.0,
            capacity: 0.2,
        }
    }
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<()> {
        let checks: [(bool, &str); 11] = [
            (self.lambda_b > 0.0, "lambda_b > 0"),
            (self.p_b > 0.0, "p_b > 0"),
            (self.alpha > 2.0, "alpha > 2"),
            (self.beta > 0.0, "beta > 0"),
            (self.sigma2 >= 0.0, "sigma2 >= 0"),
            (self.b_chan > 0.0 && self.b_chan < self.w_total, "0 < b_chan < w_total"),
            (self.epsilon > 0.0 && self.epsilon < 1.0, "0 < epsilon < 1"),
            (self.mu > 0.0 && self.mu < 1.0, "0 < mu < 1"),
            (self.p_s > 0.0, "p_s > 0"),
            (self.p_a > self.p_s, "p_a > p_s"),
            (self.capacity > 0.0, "capacity > 0"),
        ];
        for (ok, what) in checks {
            let finite = [
                self.lambda_b, self.p_b, self.alpha, self.beta, self.sigma2, self.w_total,
                self.b_chan, self.epsilon, self.mu, self.p_a, self.p_s, self.capacity,
            ]
            .iter()
            .all(|v| v.is_finite());
            if !ok || !finite {
                return Err(Error::Validation(format!("network config violates {what}")));
            }
        }
        Ok(())
    }

    /// Noise-to-power ratio `βσ²/P_B` multiplying `x^{α/2}` in the success integral.
    fn noise_coefficient(&self) -> f64 {
        self.beta * self.sigma2 / self.p_b
    }
}

/// Per-horizon inputs to the coverage analysis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageInputs {
    pub rho: f64,
    pub lambda_m: f64,
}

impl CoverageInputs {
    pub fn new(rho: f64, lambda_m: f64) -> Result<Self> {
        if !(rho > 0.0 && rho <= 1.0) {
            return Err(Error::Domain(format!("active probability {rho} outside (0, 1]")));
        }
        if !(lambda_m >= 0.0) || !lambda_m.is_finite() {
            return Err(Error::Domain(format!("MT density {lambda_m} must be >= 0")));
        }
        Ok(Self { rho, lambda_m })
    }
}

/// Mean number of MTs served by an active BS.
pub fn avg_traffic_load(lambda_m: f64, lambda_b: f64, rho: f64) -> Result<f64> {
    if !(rho > 0.0) || !(lambda_b > 0.0) {
        return Err(Error::Domain(format!("traffic load needs rho > 0 and lambda_b > 0 (got {rho}, {lambda_b})")));
    }
    if !(lambda_m >= 0.0) {
        return Err(Error::Domain(format!("MT density {lambda_m} must be >= 0")));
    }
    Ok(lambda_m / (lambda_b * rho))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyReuse {
    /// Real-valued number of bands.
    pub bands: f64,
    /// Density of active BSs sharing one band.
    pub coband_density: f64,
}

pub fn num_bands(cfg: &NetworkConfig, rho: f64, lambda_m: f64) -> Result<FrequencyReuse> {
    if !(lambda_m > 0.0) {
        return Err(Error::Domain("band count is unbounded for zero MT density".into()));
    }
    let load = avg_traffic_load(lambda_m, cfg.lambda_b, rho)?;
    let bands = cfg.w_total / cfg.b_chan / load;
    Ok(FrequencyReuse { bands, coband_density: coband_density(cfg, lambda_m) })
}

/// `λ_m·B/W`; the active density cancels against the band count.
pub fn coband_density(cfg: &NetworkConfig, lambda_m: f64) -> f64 {
    lambda_m * cfg.b_chan / cfg.w_total
}

/// Interference factor `v = β^{2/α} ∫_{β^{-2/α}}^∞ du / (1 + u^{α/2})`.
/// Closed form at `α = 4`, quadrature otherwise.
pub fn interference_factor(beta: f64, alpha: f64) -> Result<f64> {
    check_interference_args(beta, alpha)?;
    if alpha == 4.0 {
        let s = beta.sqrt();
        Ok(s * (FRAC_PI_2 - (1.0 / s).atan()))
    } else {
        interference_factor_quadrature(beta, alpha)
    }
}

/// Quadrature route for `v` at any `α > 2`.
///
/// With `u = 1/s` and `s = w^m`, `m = 2/(α-2)`, the integral becomes
/// `m ∫_0^{β^{(α-2)/α}} dw / (1 + w^{α/(α-2)})`, smooth on a finite range.
pub fn interference_factor_quadrature(beta: f64, alpha: f64) -> Result<f64> {
    check_interference_args(beta, alpha)?;
    let m = 2.0 / (alpha - 2.0);
    let power = alpha / (alpha - 2.0);
    let upper = beta.powf((alpha - 2.0) / alpha);
    let q = integrate(|w: f64| 1.0 / (1.0 + w.powf(power)), &[0.0, upper], 1e-13, 0.0, 2000)?;
    Ok(beta.powf(2.0 / alpha) * m * q.value)
}

fn check_interference_args(beta: f64, alpha: f64) -> Result<()> {
    if !(alpha > 2.0) {
        return Err(Error::Domain(format!("path-loss exponent {alpha} must exceed 2")));
    }
    if !(beta > 0.0) {
        return Err(Error::Domain(format!("SINR threshold {beta} must be positive")));
    }
    Ok(())
}

/// Exponent coefficients `(πλ_Bρ, a, b)` of the success integral.
fn success_coefficients(cfg: &NetworkConfig, inp: &CoverageInputs) -> Result<(f64, f64, f64)> {
    let v = interference_factor(cfg.beta, cfg.alpha)?;
    let desired = PI * cfg.lambda_b * inp.rho;
    let a = desired + PI * coband_density(cfg, inp.lambda_m) * v;
    Ok((desired, a, cfg.noise_coefficient()))
}

/// Downlink success probability of the typical MT. Uses the closed form at
/// `α = 4` and adaptive quadrature of the general integral otherwise.
pub fn success_probability(cfg: &NetworkConfig, inp: &CoverageInputs) -> Result<f64> {
    if cfg.alpha == 4.0 {
        success_probability_closed_form(cfg, inp)
    } else {
        success_probability_quadrature(cfg, inp)
    }
}

/// `πλ_Bρ·√(π/b)·exp(Υ²/2)·Q(Υ)` with `Υ = a/√(2b)`, valid for `α = 4`.
pub fn success_probability_closed_form(cfg: &NetworkConfig, inp: &CoverageInputs) -> Result<f64> {
    if cfg.alpha != 4.0 {
        return Err(Error::UnsupportedRegime { alpha: cfg.alpha });
    }
    let (desired, a, b) = success_coefficients(cfg, inp)?;
    if b == 0.0 {
        return Ok(desired / a);
    }
    let upsilon = a / (2.0 * b).sqrt();
    Ok(desired * (PI / b).sqrt() * scaled_gaussian_tail(upsilon))
}

/// `πλ_Bρ ∫_0^∞ exp(-a x - b x^{α/2}) dx` by adaptive quadrature.
pub fn success_probability_quadrature(cfg: &NetworkConfig, inp: &CoverageInputs) -> Result<f64> {
    let (desired, a, b) = success_coefficients(cfg, inp)?;
    let half_alpha = 0.5 * cfg.alpha;
    // y = a·x gives (desired/a) ∫ exp(-y - c·y^{α/2}) dy.
    let c = b / a.powf(half_alpha);
    let exponent = |y: f64| y + c * y.powf(half_alpha);
    if c == 0.0 {
        return Ok(desired / a);
    }
    let point_where = |level: f64| -> Result<f64> {
        let mut hi = level;
        while exponent(hi) < level {
            hi *= 2.0;
        }
        bisect(|y| exponent(y) - level, 0.0, hi, hi * 1e-15)
    };
    let knee = point_where(1.0)?;
    let mut level = 60.0_f64;
    loop {
        let upper = point_where(level)?;
        let mut breaks = vec![0.0, 0.1 * knee, knee, 4.0 * knee];
        breaks.retain(|&p| p < upper);
        breaks.push(upper);
        let q = integrate(|y: f64| (-exponent(y)).exp(), &breaks, 1e-11, 0.0, 4000)?;
        let slope = 1.0 + c * half_alpha * upper.powf(half_alpha - 1.0);
        let tail_bound = (-level).exp() / slope;
        if tail_bound < 1e-12 * q.value {
            return Ok(desired / a * q.value);
        }
        level += 30.0;
        if level > 700.0 {
            return Err(Error::QuadratureNonConvergence { estimate: desired / a * q.value, error: tail_bound });
        }
    }
}

/// Root of `g·Q(g/√(2π)) = (1-ε)·exp(-g²/(4π))`.
///
/// This is the value of `g` at which the noise-limited success probability
/// `g·exp(g²/(4π))·Q(g/√(2π))` equals `1-ε`. The bracket starts at `[0, 8]`
/// and doubles its upper end until the sign changes.
pub fn solve_g0(epsilon: f64) -> Result<f64> {
    solve_g0_from(epsilon, 8.0)
}

pub(crate) fn solve_g0_from(epsilon: f64, initial_upper: f64) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::Domain(format!("outage {epsilon} outside (0, 1)")));
    }
    let scale = (2.0 * PI).sqrt();
    // Divided through by exp(-g²/(4π)) so both sides stay O(1).
    let residual = |g: f64| g * scaled_gaussian_tail(g / scale) - (1.0 - epsilon);
    let mut upper = initial_upper;
    while residual(upper) < 0.0 {
        upper *= 2.0;
        if upper > 1e8 {
            return Err(Error::RootNotBracketed { upper });
        }
    }
    bisect(residual, 0.0, upper, 1e-12)
}

/// The two single-regime thresholds: `(interference-limited, noise-limited)`.
pub fn rho_min_terms(cfg: &NetworkConfig, lambda_m: f64) -> Result<(f64, f64)> {
    if cfg.alpha != 4.0 {
        return Err(Error::UnsupportedRegime { alpha: cfg.alpha });
    }
    if !(lambda_m >= 0.0) {
        return Err(Error::Domain(format!("MT density {lambda_m} must be >= 0")));
    }
    let v = interference_factor(cfg.beta, cfg.alpha)?;
    let eps = cfg.epsilon;
    let interference = lambda_m * cfg.b_chan / (cfg.lambda_b * cfg.w_total) * v * (1.0 - eps) / eps;
    let g0 = solve_g0(eps)?;
    let noise = g0 * (cfg.beta * cfg.sigma2).sqrt() / (PI.powf(1.5) * cfg.lambda_b * cfg.p_b.sqrt());
    Ok((interference, noise))
}

/// Closed-form threshold: the larger of the interference-limited and
/// noise-limited thresholds. Exact when one regime alone limits coverage and
/// a lower bound on the true threshold otherwise. Not checked against 1.
pub fn rho_min_closed_form(cfg: &NetworkConfig, lambda_m: f64) -> Result<f64> {
    let (interference, noise) = rho_min_terms(cfg, lambda_m)?;
    Ok(interference.max(noise))
}

/// Smallest active probability with success probability `>= 1-ε` (`α = 4`).
///
/// Bisection of the closed-form success probability, bracketed below by
/// [`rho_min_closed_form`]. Fails with `InfeasibleLoad` carrying the
/// threshold when it exceeds one.
pub fn rho_min(cfg: &NetworkConfig, lambda_m: f64) -> Result<f64> {
    let lower = rho_min_closed_form(cfg, lambda_m)?;
    let target = 1.0 - cfg.epsilon;
    let gap = |rho: f64| -> f64 {
        let inp = CoverageInputs { rho, lambda_m };
        success_probability_closed_form(cfg, &inp).map(|p| p - target).unwrap_or(f64::NAN)
    };
    if lower > 0.0 && gap(lower) >= 0.0 {
        return if lower <= 1.0 { Ok(lower) } else { Err(Error::InfeasibleLoad { horizon: None, rho_min: lower }) };
    }
    let mut upper = lower.max(1.0);
    while gap(upper) < 0.0 {
        upper *= 2.0;
        if upper > 1e12 {
            return Err(Error::RootNotBracketed { upper });
        }
    }
    let root = bisect(gap, lower, upper, 1e-15)?;
    // The returned point must itself satisfy the target.
    let mut rho = root;
    while gap(rho) < 0.0 {
        rho = f64::from_bits(rho.to_bits() + 1);
    }
    if rho > 1.0 {
        return Err(Error::InfeasibleLoad { horizon: None, rho_min: rho });
    }
    Ok(rho)
}
