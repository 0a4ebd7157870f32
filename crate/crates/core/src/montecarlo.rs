//! Spatial Monte-Carlo on a toroidal square: PPP sampling, thinning,
//! nearest-active association, random band reuse with Rayleigh fading, and
//! the BS sleeping reference schemes.

use rand::Rng;
use rand_distr::{Distribution, Exp1, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energy::active_bs_power;
use crate::error::{Error, Result};
use crate::geometry::{num_bands, rho_min, success_probability, CoverageInputs, NetworkConfig};
use crate::numerics::compensated_sum;
use crate::rng::stream_rng;
use crate::scenario::HorizonProfile;

pub mod grid;

pub use grid::{torus_dist2, Point, TorusGrid};

/// Resampling attempts before giving up on a thinning with no active BS.
const MAX_RESAMPLES: usize = 1000;

/// Poisson count then i.i.d. uniform positions in `[0, window)²`.
pub fn sample_ppp<R: Rng>(intensity: f64, window: f64, rng: &mut R) -> Result<Vec<Point>> {
    if !(intensity >= 0.0) || !(window > 0.0) {
        return Err(Error::Domain(format!("PPP needs intensity >= 0 and window > 0 (got {intensity}, {window})")));
    }
    let mean = intensity * window * window;
    if mean == 0.0 {
        return Ok(Vec::new());
    }
    let count: f64 = Poisson::new(mean).map_err(|e| Error::Domain(e.to_string()))?.sample(rng);
    Ok((0..count as usize).map(|_| [rng.random::<f64>() * window, rng.random::<f64>() * window]).collect())
}

/// Integer band count used in simulation: `max(1, round(δ))`.
pub fn integer_bands(cfg: &NetworkConfig, rho: f64, lambda_m: f64) -> Result<usize> {
    if lambda_m == 0.0 {
        return Ok(1);
    }
    let delta = num_bands(cfg, rho, lambda_m)?.bands;
    Ok((delta.round() as usize).max(1))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkRealization {
    pub window: f64,
    pub bs_points: Vec<Point>,
    pub mt_points: Vec<Point>,
    pub bs_active: Vec<bool>,
    /// Band in `1..=bands` for active BSs.
    pub bs_band: Vec<Option<usize>>,
    pub bands: usize,
    /// Serving (nearest active) BS of each MT.
    pub association: Vec<usize>,
}

impl NetworkRealization {
    /// Thins, assigns bands and associates on given point sets.
    pub fn from_points<R: Rng>(
        bs_points: Vec<Point>,
        mt_points: Vec<Point>,
        rho: f64,
        bands: usize,
        window: f64,
        rng: &mut R,
    ) -> Result<Self> {
        if !(rho > 0.0 && rho <= 1.0) {
            return Err(Error::Domain(format!("active probability {rho} outside (0, 1]")));
        }
        let bs_active: Vec<bool> = bs_points.iter().map(|_| rho >= 1.0 || rng.random::<f64>() < rho).collect();
        if !bs_active.iter().any(|&a| a) {
            return Err(Error::NoActiveBs);
        }
        let bs_band = bs_active.iter().map(|&a| a.then(|| rng.random_range(1..=bands))).collect();
        let index = TorusGrid::new(&bs_points, Some(&bs_active), window);
        let association = mt_points
            .iter()
            .map(|m| index.nearest(m).expect("at least one active BS").0)
            .collect();
        Ok(Self { window, bs_points, mt_points, bs_active, bs_band, bands, association })
    }

    pub fn active_count(&self) -> usize {
        self.bs_active.iter().filter(|&&a| a).count()
    }

    /// MTs served by each BS.
    pub fn loads(&self) -> Vec<usize> {
        let mut loads = vec![0; self.bs_points.len()];
        for &b in &self.association {
            loads[b] += 1;
        }
        loads
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Realized<T> {
    pub value: T,
    /// Thinnings redrawn because no BS stayed active.
    pub discarded: usize,
}

/// Samples BSs at `λ_B` and MTs at `lambda_m`, thins at `rho` and assigns
/// `max(1, round(δ))` bands. Thinnings with no active BS are redrawn.
pub fn build_realization<R: Rng>(
    cfg: &NetworkConfig,
    rho: f64,
    lambda_m: f64,
    window: f64,
    rng: &mut R,
) -> Result<Realized<NetworkRealization>> {
    let bands = integer_bands(cfg, rho, lambda_m)?;
    for discarded in 0..MAX_RESAMPLES {
        let bs = sample_ppp(cfg.lambda_b, window, rng)?;
        let mts = sample_ppp(lambda_m, window, rng)?;
        match NetworkRealization::from_points(bs, mts, rho, bands, window, rng) {
            Ok(value) => return Ok(Realized { value, discarded }),
            Err(Error::NoActiveBs) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::NoActiveBs)
}

/// SINR of one MT's downlink with fresh Exp(1) fading on every link.
pub fn sinr_at_mt<R: Rng>(real: &NetworkRealization, mt: usize, cfg: &NetworkConfig, rng: &mut R) -> f64 {
    let m = &real.mt_points[mt];
    let serving = real.association[mt];
    let band = real.bs_band[serving];
    let path = |i: usize| torus_dist2(m, &real.bs_points[i], real.window).powf(-0.5 * cfg.alpha);
    let h: f64 = Exp1.sample(rng);
    let desired = cfg.p_b * path(serving) * h;
    let mut interference = 0.0;
    for (i, b) in real.bs_band.iter().enumerate() {
        if i != serving && *b == band && b.is_some() {
            let g: f64 = Exp1.sample(rng);
            interference += cfg.p_b * path(i) * g;
        }
    }
    desired / (interference + cfg.sigma2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuccessEstimate {
    pub fraction: f64,
    pub successes: u64,
    pub links: u64,
    pub realizations: usize,
    pub discarded: usize,
    /// Variance inflation from links sharing a realization (>= 1).
    pub design_effect: f64,
    /// 95% Wilson interval on the effective sample size.
    pub ci_low: f64,
    pub ci_high: f64,
}

impl SuccessEstimate {
    pub fn effective_links(&self) -> f64 {
        self.links as f64 / self.design_effect
    }

    /// Whether the estimate lies in the 95% binomial band around `p`.
    pub fn consistent_with(&self, p: f64) -> bool {
        let half = 1.959_963_984_540_054 * (p * (1.0 - p) / self.effective_links()).sqrt();
        (self.fraction - p).abs() <= half
    }
}

fn wilson(p: f64, n: f64) -> (f64, f64) {
    let z = 1.959_963_984_540_054_f64;
    let denom = 1.0 + z * z / n;
    let center = (p + z * z / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloOptions {
    pub window: f64,
    pub n_realizations: usize,
    pub seed: u64,
}

impl Default for MonteCarloOptions {
    fn default() -> Self {
        Self { window: 1000.0, n_realizations: 500, seed: 0 }
    }
}

/// Fraction of (MT, realization) links with `SINR >= β`.
pub fn empirical_success_probability(cfg: &NetworkConfig, rho: f64, lambda_m: f64, opts: &MonteCarloOptions) -> Result<SuccessEstimate> {
    if opts.n_realizations == 0 {
        return Err(Error::Validation("at least one realization required".into()));
    }
    let per_realization = (0..opts.n_realizations)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream_rng(opts.seed, r as u64);
            let real = build_realization(cfg, rho, lambda_m, opts.window, &mut rng)?;
            let hits = (0..real.value.mt_points.len())
                .filter(|&m| sinr_at_mt(&real.value, m, cfg, &mut rng) >= cfg.beta)
                .count() as u64;
            Ok((hits, real.value.mt_points.len() as u64, real.discarded))
        })
        .collect::<Result<Vec<_>>>()?;
    let successes: u64 = per_realization.iter().map(|r| r.0).sum();
    let links: u64 = per_realization.iter().map(|r| r.1).sum();
    let discarded = per_realization.iter().map(|r| r.2).sum();
    if links == 0 {
        return Err(Error::Validation("no MT links sampled".into()));
    }
    let p = successes as f64 / links as f64;
    let r = opts.n_realizations as f64;
    let design_effect = if opts.n_realizations > 1 && p > 0.0 && p < 1.0 {
        let mean_links = links as f64 / r;
        let between = compensated_sum(per_realization.iter().map(|&(s, n, _)| (s as f64 - p * n as f64).powi(2)));
        let var_cluster = between / (r * (r - 1.0) * mean_links * mean_links);
        (var_cluster / (p * (1.0 - p) / links as f64)).max(1.0)
    } else {
        1.0
    };
    let (ci_low, ci_high) = wilson(p, links as f64 / design_effect);
    Ok(SuccessEstimate { fraction: p, successes, links, realizations: opts.n_realizations, discarded, design_effect, ci_low, ci_high })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Proposed,
    NoCoordination,
    Cluster,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::Proposed, Scheme::Cluster, Scheme::NoCoordination];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Proposed => "proposed",
            Scheme::NoCoordination => "no_coordination",
            Scheme::Cluster => "cluster",
        }
    }
}

/// Which BSs are on and how many MTs each serves in one slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Activation {
    pub active: Vec<bool>,
    pub loads: Vec<usize>,
}

impl Activation {
    /// Total BS power (W) from the linear power model with realized loads.
    pub fn power(&self, cfg: &NetworkConfig) -> Result<f64> {
        let terms = self
            .active
            .iter()
            .zip(&self.loads)
            .map(|(&on, &load)| if on { active_bs_power(cfg, load as f64) } else { Ok(cfg.p_s) })
            .collect::<Result<Vec<_>>>()?;
        Ok(compensated_sum(terms))
    }

    /// Power per unit area of the window.
    pub fn areal_demand(&self, cfg: &NetworkConfig, window: f64) -> Result<f64> {
        Ok(self.power(cfg)? / (window * window))
    }
}

/// Loads under nearest-BS association over all BSs (Voronoi cells).
pub fn voronoi_loads(bs_points: &[Point], mt_points: &[Point], window: f64) -> Vec<usize> {
    let mut loads = vec![0; bs_points.len()];
    if bs_points.is_empty() {
        return loads;
    }
    let index = TorusGrid::new(bs_points, None, window);
    for m in mt_points {
        loads[index.nearest(m).expect("non-empty BS set").0] += 1;
    }
    loads
}

/// A BS is on iff its Voronoi cell holds at least one MT.
pub fn scheme_no_coordination(real: &NetworkRealization) -> Activation {
    let loads = voronoi_loads(&real.bs_points, &real.mt_points, real.window);
    Activation { active: loads.iter().map(|&l| l > 0).collect(), loads }
}

/// Greedy nearest-first pairing within `radius`; the lighter BS of each pair
/// sleeps (lower index on a tie) and hands its MTs to the partner, which is
/// on iff the merged load is positive. Unpaired BSs follow the
/// no-coordination rule.
pub fn scheme_cluster(real: &NetworkRealization, radius: f64) -> Result<Activation> {
    if !(radius > 0.0) {
        return Err(Error::Domain(format!("pairing radius {radius} must be positive")));
    }
    let mut loads = voronoi_loads(&real.bs_points, &real.mt_points, real.window);
    let mut pairs = TorusGrid::new(&real.bs_points, None, real.window).pairs_within(radius);
    pairs.sort_by(|a, b| a.2.total_cmp(&b.2).then(a.0.cmp(&b.0)).then(a.1.cmp(&b.1)));
    let mut paired = vec![false; real.bs_points.len()];
    let mut sleeping = vec![false; real.bs_points.len()];
    for (i, j, _) in pairs {
        if paired[i] || paired[j] {
            continue;
        }
        paired[i] = true;
        paired[j] = true;
        let (sleeper, keeper) = if loads[j] < loads[i] { (j, i) } else { (i, j) };
        loads[keeper] += loads[sleeper];
        loads[sleeper] = 0;
        sleeping[sleeper] = true;
    }
    let active = loads.iter().zip(&sleeping).map(|(&l, &s)| !s && l > 0).collect();
    Ok(Activation { active, loads })
}

/// Independent thinning at `rho` with nearest-active association.
pub fn scheme_proposed(real: &NetworkRealization) -> Activation {
    Activation { active: real.bs_active.clone(), loads: real.loads() }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchemeResult {
    pub scheme: Scheme,
    pub total_cost: f64,
    pub empirical_p_suc: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchemeSummary {
    pub scheme: Scheme,
    pub mean_cost: f64,
    pub std_error: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub realizations: usize,
    pub empirical_p_suc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeComparison {
    pub lambda_m_all: f64,
    pub summaries: Vec<SchemeSummary>,
    pub discarded: usize,
}

impl SchemeComparison {
    pub fn get(&self, scheme: Scheme) -> &SchemeSummary {
        self.summaries.iter().find(|s| s.scheme == scheme).expect("every scheme is summarised")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompareOptions {
    pub mc: MonteCarloOptions,
    pub pair_radius: f64,
    /// Upper bound on realizations times horizons.
    pub budget: usize,
}

impl Default for CompareOptions {
    fn default() -> Self {
        Self { mc: MonteCarloOptions::default(), pair_radius: 100.0, budget: 200_000 }
    }
}

/// Costs of the three schemes on one realization: BSs are drawn once, MTs
/// afresh each horizon, and every scheme sees the same points. Purchases
/// are myopic against each scheme's realized demand.
fn compare_once(
    cfg: &NetworkConfig,
    profiles: &[HorizonProfile],
    lambda_m_all: f64,
    rhos: &[f64],
    opts: &CompareOptions,
    r: u64,
) -> Result<([SchemeResult; 3], usize)> {
    let window = opts.mc.window;
    let mut rng = stream_rng(opts.mc.seed, r);
    let bs = sample_ppp(cfg.lambda_b, window, &mut rng)?;
    let mut storage = [0.0_f64; 3];
    let mut costs = [Vec::new(), Vec::new(), Vec::new()];
    let mut hits = 0_u64;
    let mut links = 0_u64;
    let mut discarded = 0;
    for (p, &rho) in profiles.iter().zip(rhos) {
        let lambda_m = lambda_m_all * p.theta;
        let mts = sample_ppp(lambda_m, window, &mut rng)?;
        let bands = integer_bands(cfg, rho, lambda_m)?;
        let real = loop {
            match NetworkRealization::from_points(bs.clone(), mts.clone(), rho, bands, window, &mut rng) {
                Ok(real) => break real,
                Err(Error::NoActiveBs) if discarded < MAX_RESAMPLES => discarded += 1,
                Err(e) => return Err(e),
            }
        };
        hits += (0..real.mt_points.len()).filter(|&m| sinr_at_mt(&real, m, cfg, &mut rng) >= cfg.beta).count() as u64;
        links += real.mt_points.len() as u64;
        let activations = [scheme_proposed(&real), scheme_cluster(&real, opts.pair_radius)?, scheme_no_coordination(&real)];
        for (s, act) in activations.iter().enumerate() {
            let e = act.areal_demand(cfg, window)?;
            let g = (e - storage[s] - p.lambda_e).max(0.0);
            storage[s] = (storage[s] + p.lambda_e + g - e).clamp(0.0, cfg.capacity);
            costs[s].push(p.price * g);
        }
    }
    let p_suc = (links > 0).then(|| hits as f64 / links as f64);
    let results = [0, 1, 2].map(|s| SchemeResult {
        scheme: Scheme::ALL[s],
        total_cost: compensated_sum(costs[s].iter().copied()),
        empirical_p_suc: if s == 0 { p_suc } else { None },
    });
    Ok((results, discarded))
}

/// Ensemble-average cost of the proposed, cluster and no-coordination
/// schemes over `profiles` at total MT density `lambda_m_all`.
pub fn compare_schemes(cfg: &NetworkConfig, profiles: &[HorizonProfile], lambda_m_all: f64, opts: &CompareOptions) -> Result<SchemeComparison> {
    if profiles.is_empty() {
        return Err(Error::Validation("at least one horizon required".into()));
    }
    let n = opts.mc.n_realizations;
    if n == 0 {
        return Err(Error::Validation("at least one realization required".into()));
    }
    let required = n.saturating_mul(profiles.len());
    if required > opts.budget {
        return Err(Error::BudgetExceeded { required, budget: opts.budget });
    }
    let rhos = profiles
        .iter()
        .map(|p| rho_min(cfg, lambda_m_all * p.theta).map_err(|e| e.at_horizon(p.t)))
        .collect::<Result<Vec<_>>>()?;
    let runs = (0..n as u64)
        .into_par_iter()
        .map(|r| compare_once(cfg, profiles, lambda_m_all, &rhos, opts, r))
        .collect::<Result<Vec<_>>>()?;
    let nf = n as f64;
    let summaries = Scheme::ALL
        .iter()
        .enumerate()
        .map(|(s, &scheme)| {
            let mean = compensated_sum(runs.iter().map(|r| r.0[s].total_cost)) / nf;
            let var = if n > 1 {
                compensated_sum(runs.iter().map(|r| (r.0[s].total_cost - mean).powi(2))) / (nf - 1.0)
            } else {
                0.0
            };
            let se = (var / nf).sqrt();
            let p_suc = (s == 0).then(|| compensated_sum(runs.iter().filter_map(|r| r.0[s].empirical_p_suc)) / nf);
            SchemeSummary {
                scheme,
                mean_cost: mean,
                std_error: se,
                ci_low: mean - 1.959_963_984_540_054 * se,
                ci_high: mean + 1.959_963_984_540_054 * se,
                realizations: n,
                empirical_p_suc: p_suc,
            }
        })
        .collect();
    Ok(SchemeComparison { lambda_m_all, summaries, discarded: runs.iter().map(|r| r.1).sum() })
}

/// Analytic success probability next to its Monte-Carlo estimate.
pub fn validate_success(cfg: &NetworkConfig, rho: f64, lambda_m: f64, opts: &MonteCarloOptions) -> Result<(f64, SuccessEstimate)> {
    let analytic = success_probability(cfg, &CoverageInputs::new(rho, lambda_m)?)?;
    Ok((analytic, empirical_success_probability(cfg, rho, lambda_m, opts)?))
}
