//! Strategic arms.
//!
//! An equilibrium arm keeps a private replica of the player's weight for itself,
//! gossips it with its neighbors to estimate the network average, turns that into an
//! estimate `p_hat` of its own pull probability and offers `theta * (1 - p_hat)`.
//! If its pull count ever drops below `t/K - B` it defects for good and reports its
//! full reward from then on.
//!
//! The deviant strategies are the concrete alternatives used by the Nash audit: they
//! misreport to the player, or lie in the gossip messages they send.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ledger::{settle, Ticks};
use crate::player::{probability_from_average, PlayerConfig};

/// Offset used by the over- and under-bidding deviations.
pub const BID_SHIFT: f64 = 0.1;

/// Factor applied by the inflating message deviation.
pub const INFLATE_FACTOR: f64 = 10.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ArmError {
    #[error("arm {0} has no probability estimate for this round")]
    MissingEstimate(usize),
    #[error("arm {arm} received non-positive consensus average {avg}")]
    NonPositiveAverage { arm: usize, avg: f64 },
    #[error("arm {0} probability estimate is zero")]
    ZeroEstimate(usize),
    #[error("invalid arm parameters: {0}")]
    Params(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    #[default]
    Equilibrium,
    /// Always reports the realized reward.
    Truthful,
    Overbid,
    Underbid,
    /// Equilibrium offers, but gossip messages are multiplied by [`INFLATE_FACTOR`].
    InflateMessage,
    /// Equilibrium offers, but gossip messages are replaced by zero.
    ZeroMessage,
}

impl Strategy {
    pub const DEVIATIONS: [Strategy; 5] = [
        Strategy::Truthful,
        Strategy::Overbid,
        Strategy::Underbid,
        Strategy::InflateMessage,
        Strategy::ZeroMessage,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Equilibrium => "equilibrium",
            Strategy::Truthful => "truthful",
            Strategy::Overbid => "overbid",
            Strategy::Underbid => "underbid",
            Strategy::InflateMessage => "inflate-message",
            Strategy::ZeroMessage => "zero-message",
        }
    }

    pub fn message_mode(self) -> MessageMode {
        match self {
            Strategy::InflateMessage => MessageMode::Inflate,
            Strategy::ZeroMessage => MessageMode::Zero,
            _ => MessageMode::Honest,
        }
    }

    /// Whether the arm runs the defection trigger of the equilibrium strategy.
    pub fn uses_defection(self) -> bool {
        matches!(
            self,
            Strategy::Equilibrium | Strategy::InflateMessage | Strategy::ZeroMessage
        )
    }
}

impl std::str::FromStr for Strategy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        [Strategy::Equilibrium]
            .into_iter()
            .chain(Strategy::DEVIATIONS)
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown strategy {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeviantOfferMode {
    AlwaysTruthful,
    Overbid,
    Underbid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MessageMode {
    Honest,
    Inflate,
    Zero,
}

pub fn corrupt_message(value: f64, mode: MessageMode) -> f64 {
    match mode {
        MessageMode::Honest => value,
        MessageMode::Inflate => value * INFLATE_FACTOR,
        MessageMode::Zero => 0.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmParams {
    pub index: usize,
    pub mu: f64,
    /// Defection slack `B`, in rounds.
    pub slack: f64,
    /// Offer scale `theta`.
    pub theta: f64,
}

impl ArmParams {
    pub fn validate(&self) -> Result<(), ArmError> {
        if !(0.0..=1.0).contains(&self.mu) {
            return Err(ArmError::Params(format!("mean {} outside [0, 1]", self.mu)));
        }
        if !(self.slack > 0.0) {
            return Err(ArmError::Params(format!("slack B = {} must be positive", self.slack)));
        }
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return Err(ArmError::Params(format!("theta {} outside (0, 1]", self.theta)));
        }
        Ok(())
    }
}

/// `7 * sqrt(K T delta)`.
pub fn default_slack(k: usize, horizon: u64, delta: f64) -> f64 {
    7.0 * (k as f64 * horizon as f64 * delta).sqrt()
}

/// `sqrt(K delta / T)`, capped at 1 for horizons too short for the formula.
pub fn default_theta(k: usize, horizon: u64, delta: f64) -> f64 {
    (k as f64 * delta / horizon as f64).sqrt().min(1.0)
}

/// `N_k < t/K - B`; a tie does not trigger.
pub fn below_fair_share(pull_count: u64, t: u64, k: usize, slack: f64) -> bool {
    (pull_count as f64) < t as f64 / k as f64 - slack
}

/// `Pr(I_k, avg)` clamped to `[gamma/K, 1]`; both arguments on the same scale.
pub fn estimate_probability(
    arm: usize,
    info: f64,
    consensus_avg: f64,
    config: &PlayerConfig,
) -> Result<f64, ArmError> {
    if !(consensus_avg > 0.0 && consensus_avg.is_finite()) {
        return Err(ArmError::NonPositiveAverage {
            arm,
            avg: consensus_avg,
        });
    }
    let p = probability_from_average(info, consensus_avg, config.k, config.gamma);
    Ok(p.clamp(config.gamma / config.k as f64, 1.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArmState {
    pub index: usize,
    pub strategy: Strategy,
    pub pull_count: u64,
    /// Log of the arm's replica of its own player weight.
    pub local_info: f64,
    pub p_hat: Option<f64>,
    pub defected: bool,
    /// Accumulated `r - x` over rounds where this arm was pulled.
    pub utility: Ticks,
}

impl ArmState {
    pub fn new(index: usize, strategy: Strategy) -> Self {
        Self {
            index,
            strategy,
            pull_count: 0,
            local_info: 0.0,
            p_hat: None,
            defected: false,
            utility: Ticks::ZERO,
        }
    }

    /// Latches `defected` when the pull count falls behind `t/K - B`. Call every round.
    pub fn defection_check(&mut self, t: u64, k: usize, slack: f64) -> bool {
        if !self.defected && below_fair_share(self.pull_count, t, k, slack) {
            self.defected = true;
        }
        self.defected
    }

    /// Sets `p_hat` from this round's consensus output. `shift` is the common log-scale
    /// the consensus values were divided by.
    pub fn estimate_probability(
        &mut self,
        consensus_avg: f64,
        shift: f64,
        config: &PlayerConfig,
    ) -> Result<f64, ArmError> {
        let info = (self.local_info - shift).exp();
        let p = estimate_probability(self.index, info, consensus_avg, config)?;
        self.p_hat = Some(p);
        Ok(p)
    }

    fn p_hat(&self) -> Result<f64, ArmError> {
        self.p_hat.ok_or(ArmError::MissingEstimate(self.index))
    }

    /// The equilibrium offer: `r` once defected, otherwise `theta * (1 - p_hat)`.
    pub fn offer(&self, params: &ArmParams, r: f64) -> Result<f64, ArmError> {
        if self.defected {
            return Ok(settle(r));
        }
        let p = self.p_hat()?;
        Ok(settle((params.theta * (1.0 - p)).clamp(0.0, 1.0)))
    }

    pub fn deviant_offer(
        &self,
        params: &ArmParams,
        r: f64,
        mode: DeviantOfferMode,
    ) -> Result<f64, ArmError> {
        let x = match mode {
            DeviantOfferMode::AlwaysTruthful => r,
            DeviantOfferMode::Overbid => (params.theta * (1.0 - self.p_hat()?) + BID_SHIFT).min(1.0),
            DeviantOfferMode::Underbid => (params.theta * (1.0 - self.p_hat()?) - BID_SHIFT).max(0.0),
        };
        Ok(settle(x.clamp(0.0, 1.0)))
    }

    /// What this arm would report this round under its assigned strategy.
    pub fn strategic_offer(&self, params: &ArmParams, r: f64) -> Result<f64, ArmError> {
        match self.strategy {
            Strategy::Equilibrium | Strategy::InflateMessage | Strategy::ZeroMessage => {
                self.offer(params, r)
            }
            Strategy::Truthful => self.deviant_offer(params, r, DeviantOfferMode::AlwaysTruthful),
            Strategy::Overbid => self.deviant_offer(params, r, DeviantOfferMode::Overbid),
            Strategy::Underbid => self.deviant_offer(params, r, DeviantOfferMode::Underbid),
        }
    }

    /// Books a pull: the player received `x`, the arm kept `r - x`.
    pub fn record_pull(&mut self, r: Ticks, x: Ticks) {
        self.pull_count += 1;
        self.utility += r - x;
    }

    /// Mirrors the player's estimator update for this arm with `p_hat` in place of `p`.
    pub fn local_info_update(
        &mut self,
        was_pulled: bool,
        x: f64,
        config: &PlayerConfig,
    ) -> Result<(), ArmError> {
        let p = self.p_hat()?;
        self.local_info_update_observed(was_pulled, x, p, config)
    }

    /// Generalized mirror: `observed` arms divide their report by `obs_prob`.
    pub fn local_info_update_observed(
        &mut self,
        observed: bool,
        x: f64,
        obs_prob: f64,
        config: &PlayerConfig,
    ) -> Result<(), ArmError> {
        let p = self.p_hat()?;
        if p <= 0.0 || obs_prob <= 0.0 {
            return Err(ArmError::ZeroEstimate(self.index));
        }
        self.local_info += config.estimator_increment(observed.then_some(x), obs_prob, p);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::player::{Algorithm, PlayerSettings};
    use approx::assert_abs_diff_eq;

    fn params(theta: f64) -> ArmParams {
        ArmParams {
            index: 0,
            mu: 0.5,
            slack: 2.0,
            theta,
        }
    }

    fn exp3_config(k: usize) -> PlayerConfig {
        PlayerConfig::resolve(
            &PlayerSettings {
                algorithm: Algorithm::Exp3,
                ..Default::default()
            },
            k,
            1000,
        )
        .unwrap()
    }

    fn with_estimate(p: f64) -> ArmState {
        let mut arm = ArmState::new(0, Strategy::Equilibrium);
        arm.p_hat = Some(p);
        arm
    }

    #[test]
    fn early_rounds_never_defect() {
        let mut arm = ArmState::new(0, Strategy::Equilibrium);
        for t in 1..=10 {
            assert!(!arm.defection_check(t, 5, 2.0));
        }
    }

    #[test]
    fn defection_boundary() {
        assert!(below_fair_share(17, 100, 5, 2.0));
        assert!(!below_fair_share(18, 100, 5, 2.0));
    }

    #[test]
    fn defection_latches() {
        let mut arm = ArmState::new(0, Strategy::Equilibrium);
        arm.pull_count = 17;
        assert!(arm.defection_check(100, 5, 2.0));
        arm.pull_count = 1000;
        assert!(arm.defection_check(101, 5, 2.0));
        arm.p_hat = Some(0.3);
        assert_eq!(arm.offer(&params(0.2), 0.73).unwrap(), settle(0.73));
    }

    #[test]
    fn offer_examples() {
        let theta = (10.0f64 * 2778.0 / 5e5).sqrt();
        let x = with_estimate(0.1).offer(&params(theta), 0.0).unwrap();
        assert_abs_diff_eq!(x, 0.21213, epsilon = 2e-5);
        assert_eq!(with_estimate(1.0).offer(&params(theta), 1.0).unwrap(), 0.0);
    }

    #[test]
    fn offer_needs_estimate() {
        let arm = ArmState::new(3, Strategy::Equilibrium);
        assert_eq!(arm.offer(&params(0.2), 0.5), Err(ArmError::MissingEstimate(3)));
    }

    #[test]
    fn deviant_offer_examples() {
        let arm = with_estimate(0.0);
        assert_eq!(
            arm.deviant_offer(&params(0.5), 0.4, DeviantOfferMode::AlwaysTruthful).unwrap(),
            settle(0.4)
        );
        assert_abs_diff_eq!(
            arm.deviant_offer(&params(0.212), 0.0, DeviantOfferMode::Overbid).unwrap(),
            0.312,
            epsilon = 1e-12
        );
        assert_eq!(
            arm.deviant_offer(&params(0.05), 0.0, DeviantOfferMode::Underbid).unwrap(),
            0.0
        );
        assert_eq!(
            arm.deviant_offer(&params(1.0), 0.0, DeviantOfferMode::Overbid).unwrap(),
            1.0
        );
    }

    #[test]
    fn message_corruption() {
        assert_eq!(corrupt_message(1.7, MessageMode::Honest), 1.7);
        assert_abs_diff_eq!(corrupt_message(1.7, MessageMode::Inflate), 17.0, epsilon = 1e-14);
        assert_eq!(corrupt_message(123.0, MessageMode::Zero), 0.0);
    }

    #[test]
    fn unpulled_exp3_arm_unchanged() {
        let cfg = exp3_config(4);
        let mut arm = with_estimate(0.25);
        arm.local_info_update(false, 0.0, &cfg).unwrap();
        assert_eq!(arm.local_info, 0.0);
    }

    #[test]
    fn pulled_update_arithmetic() {
        let mut cfg = exp3_config(10);
        cfg.eta = 0.001;
        let mut arm = with_estimate(0.1);
        arm.local_info_update(true, 0.2121, &cfg).unwrap();
        assert_abs_diff_eq!(arm.local_info, 0.002121, epsilon = 1e-15);
    }

    #[test]
    fn equal_info_gives_uniform_estimate() {
        let cfg = exp3_config(4);
        for info in [0.5, 1.0, 3.0] {
            let p = estimate_probability(0, info, info, &cfg).unwrap();
            assert_abs_diff_eq!(p, 0.25, epsilon = 1e-15);
        }
    }

    #[test]
    fn estimate_is_clamped_and_checked() {
        let cfg = exp3_config(4);
        let floor = cfg.gamma / 4.0;
        assert_eq!(estimate_probability(0, 0.0, 1.0, &cfg).unwrap(), floor);
        assert_eq!(estimate_probability(0, 100.0, 1.0, &cfg).unwrap(), 1.0);
        assert!(matches!(
            estimate_probability(2, 1.0, 0.0, &cfg),
            Err(ArmError::NonPositiveAverage { arm: 2, .. })
        ));
    }

    #[test]
    fn strategy_names_parse() {
        for s in [Strategy::Equilibrium].into_iter().chain(Strategy::DEVIATIONS) {
            assert_eq!(s.name().parse::<Strategy>().unwrap(), s);
        }
        assert!("nope".parse::<Strategy>().is_err());
    }

    #[test]
    fn ten_arm_long_horizon_constants() {
        let theta = default_theta(10, 500_000, 2778.0);
        assert_abs_diff_eq!(theta, 0.2357, epsilon = 1e-4);
        // B exceeds T at this scale, so t/K - B < 0 throughout.
        assert!(default_slack(10, 500_000, 2778.0) > 500_000.0);
        assert_abs_diff_eq!(500_000.0 * theta, 117_855.84, epsilon = 0.01);
    }
}
