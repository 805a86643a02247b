//! Low-regret players from the EXP3 family.
//!
//! Each player keeps one exponential weight per arm, stored as its logarithm. The
//! pull distribution mixes the normalized weights with uniform exploration:
//! `p_k = (1 - gamma) * I_k / (K * mean(I)) + gamma / K`. That mapping is exposed on
//! its own as [`probability_from_average`] because strategic arms evaluate it with a
//! gossip estimate of `mean(I)` in place of the true one.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::RoundRecord;
use crate::topology::Graph;

/// Subtract the max log-weight every this many updates.
const RENORMALIZE_EVERY: u64 = 256;

/// Tolerance on `sum(p) = 1` when a distribution is handed to [`select_by_inverse_cdf`].
const SIMPLEX_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlayerError {
    #[error("invalid player config: {0}")]
    Config(String),
    #[error("probability vector is not on the simplex (sum {sum}, min {min})")]
    NotSimplex { sum: f64, min: f64 },
    #[error("reported value {0} outside [0, 1]")]
    ReportOutOfRange(f64),
    #[error("arm {arm} out of range for K={k}")]
    ArmOutOfRange { arm: usize, k: usize },
    #[error("pulled arm {0} had zero probability")]
    ZeroProbability(usize),
    #[error("round {round} is missing counterfactual offers")]
    MissingOffers { round: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Exp3,
    #[default]
    Exp3p,
}

/// User-facing player settings; unset fields are derived from `K`, `T` and `rho`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct PlayerSettings {
    #[serde(default)]
    pub algorithm: Algorithm,
    /// Failure probability; defaults to `1 / T^2`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    /// Regret level handed to the arms; defaults to `sqrt(T ln(K / rho))`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    /// Experimental: the player also learns from the reports of the pulled arm's neighbors.
    #[serde(default)]
    pub side_observation: bool,
}

/// Fully resolved player parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct PlayerConfig {
    pub algorithm: Algorithm,
    pub k: usize,
    pub horizon: u64,
    pub rho: f64,
    pub gamma: f64,
    pub eta: f64,
    /// EXP3.P bias; zero for EXP3.
    pub beta: f64,
    pub side_observation: bool,
    pub delta: f64,
}

/// `sqrt(T * ln(K / rho))`.
pub fn analytic_delta(horizon: u64, k: usize, rho: f64) -> f64 {
    (horizon as f64 * (k as f64 / rho).ln()).sqrt()
}

impl PlayerConfig {
    pub fn resolve(settings: &PlayerSettings, k: usize, horizon: u64) -> Result<Self, PlayerError> {
        if k == 0 {
            return Err(PlayerError::Config("K must be positive".into()));
        }
        if horizon == 0 {
            return Err(PlayerError::Config("horizon must be positive".into()));
        }
        let t = horizon as f64;
        let kf = k as f64;
        let ln_k = kf.ln();
        // 1/T^2, capped so a one-round run still has rho inside (0, 1).
        let rho = settings.rho.unwrap_or((1.0 / (t * t)).min(0.5));
        let (gamma, eta, beta) = match settings.algorithm {
            Algorithm::Exp3 => {
                let gamma = settings
                    .gamma
                    .unwrap_or_else(|| (kf * ln_k / ((std::f64::consts::E - 1.0) * t)).sqrt().min(1.0));
                let gamma = if k == 1 && settings.gamma.is_none() { 1.0 } else { gamma };
                let eta = settings.eta.unwrap_or(gamma / kf);
                (gamma, eta, settings.beta.unwrap_or(0.0))
            }
            Algorithm::Exp3p => {
                let gamma = settings
                    .gamma
                    .unwrap_or_else(|| (1.05 * (kf * ln_k / t).sqrt()).min(1.0));
                let gamma = if k == 1 && settings.gamma.is_none() { 1.0 } else { gamma };
                let eta = settings.eta.unwrap_or(0.95 * (ln_k / (t * kf)).sqrt());
                let beta = settings
                    .beta
                    .unwrap_or(((kf / rho).ln() / (t * kf)).sqrt());
                (gamma, eta, beta)
            }
        };
        let delta = settings.delta.unwrap_or_else(|| analytic_delta(horizon, k, rho));
        let config = Self {
            algorithm: settings.algorithm,
            k,
            horizon,
            rho,
            gamma,
            eta,
            beta,
            side_observation: settings.side_observation,
            delta,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), PlayerError> {
        let bad = |msg: String| Err(PlayerError::Config(msg));
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad(format!("gamma {} outside (0, 1]", self.gamma));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return bad(format!("rho {} outside (0, 1)", self.rho));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return bad(format!("delta {} must be positive", self.delta));
        }
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return bad(format!("eta {} must be nonnegative", self.eta));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return bad(format!("beta {} must be nonnegative", self.beta));
        }
        Ok(())
    }

    fn bias(&self) -> f64 {
        match self.algorithm {
            Algorithm::Exp3 => 0.0,
            Algorithm::Exp3p => self.beta,
        }
    }

    /// Log-weight increment for an arm with observation probability `prob`.
    ///
    /// `gain` is the observed report, or `None` when the arm went unobserved this round.
    pub fn estimator_increment(&self, gain: Option<f64>, prob: f64, own_prob: f64) -> f64 {
        let observed = gain.map_or(0.0, |x| x / prob);
        let bias = self.bias();
        let bias_term = if bias > 0.0 { bias / own_prob } else { 0.0 };
        self.eta * (observed + bias_term)
    }
}

/// The mixing map `(I_k, mean(I)) -> p_k`. `info` and `average` must share a scale.
pub fn probability_from_average(info: f64, average: f64, k: usize, gamma: f64) -> f64 {
    let kf = k as f64;
    (1.0 - gamma) * info / (kf * average) + gamma / kf
}

/// Pull distribution from log-weights, using a max-shift so it never overflows.
pub fn mix_probabilities(log_weights: &[f64], gamma: f64) -> Vec<f64> {
    let k = log_weights.len();
    let shift = log_weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let scaled: Vec<f64> = log_weights.iter().map(|w| (w - shift).exp()).collect();
    let total: f64 = scaled.iter().sum();
    let kf = k as f64;
    scaled
        .iter()
        .map(|e| (1.0 - gamma) * e / total + gamma / kf)
        .collect()
}

/// Inverse-CDF draw over ascending arm indices for a uniform `u` in `[0, 1)`.
pub fn select_by_inverse_cdf(p: &[f64], u: f64) -> Result<usize, PlayerError> {
    let sum: f64 = p.iter().sum();
    let min = p.iter().cloned().fold(f64::INFINITY, f64::min);
    if p.is_empty() || (sum - 1.0).abs() > SIMPLEX_TOL || min < 0.0 || !sum.is_finite() {
        return Err(PlayerError::NotSimplex { sum, min });
    }
    let mut cumulative = 0.0;
    for (k, &pk) in p.iter().enumerate() {
        cumulative += pk;
        if u < cumulative {
            return Ok(k);
        }
    }
    // Rounding left u above the final partial sum: take the last arm with mass.
    Ok(p.iter().rposition(|&v| v > 0.0).unwrap_or(p.len() - 1))
}

#[derive(Debug, Clone)]
pub struct PlayerState {
    log_weights: Vec<f64>,
    /// Total amount subtracted from every log-weight by renormalization.
    log_offset: f64,
    t: u64,
    rng: ChaCha8Rng,
}

impl PlayerState {
    pub fn new(config: &PlayerConfig, rng: ChaCha8Rng) -> Self {
        Self {
            log_weights: vec![0.0; config.k],
            log_offset: 0.0,
            t: 0,
            rng,
        }
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    /// Cumulative importance-weighted gains, `(log_weight + offset) / eta`.
    pub fn estimated_gains(&self, config: &PlayerConfig) -> Vec<f64> {
        self.log_weights
            .iter()
            .map(|w| if config.eta > 0.0 { (w + self.log_offset) / config.eta } else { 0.0 })
            .collect()
    }

    pub fn rounds_observed(&self) -> u64 {
        self.t
    }

    pub fn pull_probabilities(&self, config: &PlayerConfig) -> Vec<f64> {
        mix_probabilities(&self.log_weights, config.gamma)
    }

    pub fn select_arm(&mut self, p: &[f64]) -> Result<usize, PlayerError> {
        let u: f64 = self.rng.gen();
        select_by_inverse_cdf(p, u)
    }

    /// Standard bandit feedback: only the pulled arm's report is seen.
    pub fn observe(
        &mut self,
        config: &PlayerConfig,
        pulled: usize,
        x: f64,
        p: &[f64],
    ) -> Result<(), PlayerError> {
        self.check_feedback(config, pulled, x, p)?;
        for (k, w) in self.log_weights.iter_mut().enumerate() {
            let gain = (k == pulled).then_some(x);
            *w += config.estimator_increment(gain, p[k], p[k]);
        }
        self.finish_update();
        Ok(())
    }

    /// Side-observation feedback: every arm in the pulled arm's closed neighborhood
    /// reveals its offer. Each revealed gain is divided by the probability that the
    /// arm is observed, `sum_{j in N_l} p_j`.
    pub fn observe_with_neighbors(
        &mut self,
        config: &PlayerConfig,
        pulled: usize,
        offers: &[f64],
        p: &[f64],
        graph: &Graph,
    ) -> Result<(), PlayerError> {
        let x = *offers.get(pulled).ok_or(PlayerError::ArmOutOfRange {
            arm: pulled,
            k: offers.len(),
        })?;
        self.check_feedback(config, pulled, x, p)?;
        for l in 0..config.k {
            let observed = l == pulled || graph.has_edge(l, pulled);
            let gain = if observed {
                let o = offers[l];
                if !(0.0..=1.0).contains(&o) {
                    return Err(PlayerError::ReportOutOfRange(o));
                }
                Some(o)
            } else {
                None
            };
            let q = observation_probability(graph, p, l);
            self.log_weights[l] += config.estimator_increment(gain, q, p[l]);
        }
        self.finish_update();
        Ok(())
    }

    fn check_feedback(
        &self,
        config: &PlayerConfig,
        pulled: usize,
        x: f64,
        p: &[f64],
    ) -> Result<(), PlayerError> {
        if pulled >= config.k || p.len() != config.k {
            return Err(PlayerError::ArmOutOfRange {
                arm: pulled,
                k: config.k,
            });
        }
        if !(0.0..=1.0).contains(&x) {
            return Err(PlayerError::ReportOutOfRange(x));
        }
        if p[pulled] <= 0.0 {
            return Err(PlayerError::ZeroProbability(pulled));
        }
        Ok(())
    }

    fn finish_update(&mut self) {
        self.t += 1;
        if self.t % RENORMALIZE_EVERY == 0 {
            let shift = self.log_weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            for w in &mut self.log_weights {
                *w -= shift;
            }
            self.log_offset += shift;
        }
    }
}

/// Probability that arm `l` is revealed when the pulled arm is drawn from `p`.
pub fn observation_probability(graph: &Graph, p: &[f64], l: usize) -> f64 {
    p[l] + graph.neighbors(l).map(|j| p[j]).sum::<f64>()
}

/// `max_k sum_t x_{k,t} - sum_t x_{k_t,t}` over a history with full counterfactual offers.
pub fn regret(history: &[RoundRecord]) -> Result<f64, PlayerError> {
    let Some(first) = history.first() else {
        return Ok(0.0);
    };
    let k = first.offers.len();
    let mut per_arm = vec![0.0; k];
    let mut collected = 0.0;
    for rec in history {
        if rec.offers.len() != k || k == 0 {
            return Err(PlayerError::MissingOffers { round: rec.t });
        }
        for (acc, x) in per_arm.iter_mut().zip(&rec.offers) {
            *acc += x;
        }
        collected += rec.x;
    }
    let best = per_arm.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(best - collected)
}
