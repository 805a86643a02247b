//! Round-by-round simulation of strategic arms against a low-regret player.
//!
//! Each round runs, in order: gossip over the arms' replicated weights, probability
//! estimates and offers, the player's draw, settlement of the pulled arm's report,
//! the player's update, and finally the arms' own replica updates and defection
//! checks. Every random draw comes from a ChaCha8 stream keyed by the master seed and
//! a fixed stream id, so changing one arm's strategy never shifts another stream.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arms::{
    corrupt_message, default_slack, default_theta, ArmError, ArmParams, ArmState, MessageMode,
    Strategy,
};
use crate::consensus::{run_consensus_with, ConsensusError, ConsensusState, DisagreementTrace};
use crate::ledger::Ticks;
use crate::metrics::AuditSettings;
use crate::player::{
    probability_from_average, PlayerConfig, PlayerError, PlayerSettings, PlayerState,
};
use crate::topology::{connected_erdos_renyi, Graph, Network, TopologyError};

pub const REWARD_STREAM: u64 = 2;
pub const PLAYER_STREAM: u64 = 3;

/// Resampling budget when looking for a connected Erdős–Rényi graph.
pub const MAX_GRAPH_ATTEMPTS: u32 = 10_000;

/// Relative perturbation of the average used for the empirical Lipschitz slope.
pub const LIPSCHITZ_STEP: f64 = 1e-4;

pub fn component_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StepError {
    #[error(transparent)]
    Arm(#[from] ArmError),
    #[error(transparent)]
    Player(#[from] PlayerError),
    #[error(transparent)]
    Consensus(#[from] ConsensusError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Player(#[from] PlayerError),
    #[error(transparent)]
    Arm(#[from] ArmError),
    #[error("round {round}: {source}")]
    Round {
        round: u64,
        #[source]
        source: StepError,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TopologySpec {
    /// `G(K, p)`, resampled with consecutive seeds until connected. The seed defaults
    /// to the master seed.
    ErdosRenyi {
        p: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
    Complete,
    Path,
    Explicit { adjacency: Vec<Vec<u8>> },
}

fn default_tau() -> usize {
    50
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    /// Bernoulli means, one per arm; `K` is their count.
    pub means: Vec<f64>,
    pub horizon: u64,
    #[serde(default = "default_tau")]
    pub tau: usize,
    pub seed: u64,
    pub topology: TopologySpec,
    #[serde(default)]
    pub player: PlayerSettings,
    /// One entry per arm; empty means every arm plays the equilibrium strategy.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub strategies: Vec<Strategy>,
    /// Override for the defection slack `B`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slack: Option<f64>,
    /// Override for the offer scale `theta`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    /// Keep every `record_stride`-th round in `SimResult::records`; 0 keeps none.
    #[serde(default)]
    pub record_stride: u64,
    /// Reuse last round's gossip output when the arms' information did not change.
    #[serde(default)]
    pub skip_unchanged_consensus: bool,
    #[serde(default)]
    pub audit: AuditSettings,
}

impl SimConfig {
    pub fn arm_count(&self) -> usize {
        self.means.len()
    }

    pub fn strategy_of(&self, arm: usize) -> Strategy {
        self.strategies.get(arm).copied().unwrap_or_default()
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }

    pub fn with_strategy(&self, arm: usize, strategy: Strategy) -> Self {
        let mut c = self.clone();
        c.strategies = (0..c.arm_count()).map(|k| c.strategy_of(k)).collect();
        c.strategies[arm] = strategy;
        c
    }
}

/// Analysis precondition, reported rather than enforced.
#[derive(Debug, Clone, PartialEq)]
pub struct PreconditionCheck {
    pub name: &'static str,
    pub holds: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedSim {
    pub player: PlayerConfig,
    pub arms: Vec<ArmParams>,
    pub strategies: Vec<Strategy>,
    pub network: Network,
    /// Seed of the accepted Erdős–Rényi draw, if any.
    pub graph_seed: Option<u64>,
    pub graph_attempts: u32,
    pub theta: f64,
    pub slack: f64,
}

pub fn build_graph(config: &SimConfig) -> Result<(Graph, Option<u64>, u32), SimError> {
    let k = config.arm_count();
    match &config.topology {
        TopologySpec::ErdosRenyi { p, seed } => {
            let draw = connected_erdos_renyi(k, *p, seed.unwrap_or(config.seed), MAX_GRAPH_ATTEMPTS)?;
            Ok((draw.graph, Some(draw.seed), draw.attempts))
        }
        TopologySpec::Complete => Ok((Graph::complete(k), None, 0)),
        TopologySpec::Path => Ok((Graph::path(k), None, 0)),
        TopologySpec::Explicit { adjacency } => {
            let g = Graph::from_adjacency(adjacency)?;
            if g.node_count() != k {
                return Err(SimError::Config(format!(
                    "adjacency has {} nodes but {k} means were given",
                    g.node_count()
                )));
            }
            Ok((g, None, 0))
        }
    }
}

pub fn resolve(config: &SimConfig) -> Result<ResolvedSim, SimError> {
    let k = config.arm_count();
    if k < 2 {
        return Err(SimError::Config(format!("need at least 2 arms, got {k}")));
    }
    if config.horizon == 0 {
        return Err(SimError::Config("horizon must be positive".into()));
    }
    if config.tau == 0 {
        return Err(SimError::Config("tau must be at least 1".into()));
    }
    if !config.strategies.is_empty() && config.strategies.len() != k {
        return Err(SimError::Config(format!(
            "{} strategies given for {k} arms",
            config.strategies.len()
        )));
    }
    let player = PlayerConfig::resolve(&config.player, k, config.horizon)?;
    let theta = config
        .theta
        .unwrap_or_else(|| default_theta(k, config.horizon, player.delta));
    let slack = config
        .slack
        .unwrap_or_else(|| default_slack(k, config.horizon, player.delta));
    let arms: Vec<ArmParams> = config
        .means
        .iter()
        .enumerate()
        .map(|(index, &mu)| ArmParams {
            index,
            mu,
            slack,
            theta,
        })
        .collect();
    for a in &arms {
        a.validate()?;
    }
    let (graph, graph_seed, graph_attempts) = build_graph(config)?;
    let network = Network::metropolis(graph)?;
    Ok(ResolvedSim {
        player,
        arms,
        strategies: (0..k).map(|i| config.strategy_of(i)).collect(),
        network,
        graph_seed,
        graph_attempts,
        theta,
        slack,
    })
}

/// The analysis assumptions on `K`, `T`, `rho`, `delta` and the means.
pub fn preconditions(config: &SimConfig, resolved: &ResolvedSim) -> Vec<PreconditionCheck> {
    let k = config.arm_count() as f64;
    let t = config.horizon as f64;
    let p = &resolved.player;
    let k_cap = t.cbrt() / t.ln();
    let mut sorted = config.means.clone();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let (mu1, mu2) = (sorted[0], sorted.get(1).copied().unwrap_or(0.0));
    vec![
        PreconditionCheck {
            name: "K <= T^(1/3)/ln T",
            holds: k <= k_cap,
            detail: format!("K = {k}, cap = {k_cap:.4}"),
        },
        PreconditionCheck {
            name: "rho <= 1/T^2",
            holds: p.rho <= 1.0 / (t * t) * (1.0 + 1e-12),
            detail: format!("rho = {:e}", p.rho),
        },
        PreconditionCheck {
            name: "delta >= sqrt(T ln T)",
            holds: p.delta >= (t * t.ln()).sqrt(),
            detail: format!("delta = {:.3}, sqrt(T ln T) = {:.3}", p.delta, (t * t.ln()).sqrt()),
        },
        PreconditionCheck {
            name: "mu1 - mu2 <= mu1/K",
            holds: mu1 - mu2 <= mu1 / k,
            detail: format!("mu1 = {mu1}, mu2 = {mu2}"),
        },
        PreconditionCheck {
            name: "defection reachable (T/K > B)",
            holds: t / k > resolved.slack,
            detail: format!("B = {:.3}, T/K = {:.3}", resolved.slack, t / k),
        },
    ]
}

/// One round as seen by the simulator, including every arm's would-be report.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub t: u64,
    pub pulled: usize,
    /// Realized reward of the pulled arm.
    pub reward: f64,
    /// Report of the pulled arm.
    pub x: f64,
    pub offers: Vec<f64>,
    pub p: Vec<f64>,
    pub p_hat: Vec<f64>,
    /// Network disagreement after the last gossip iteration.
    pub disagreement: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DefectionEvent {
    pub round: u64,
    pub arm: usize,
}

#[derive(Debug, Clone)]
pub struct SimResult {
    pub seed: u64,
    pub horizon: u64,
    pub tau: usize,
    pub means: Vec<f64>,
    pub strategies: Vec<Strategy>,
    pub graph_seed: Option<u64>,
    pub graph_attempts: u32,
    pub lambda: f64,
    pub gamma: f64,
    pub delta: f64,
    pub theta: f64,
    pub slack: f64,
    pub pull_counts: Vec<u64>,
    /// Pull counts after round `T/2` (integer division).
    pub half_pull_counts: Vec<u64>,
    pub revenue_by_arm: Vec<Ticks>,
    pub utilities: Vec<Ticks>,
    /// Realized rewards summed over each arm's pulled rounds.
    pub rewards_by_arm: Vec<Ticks>,
    pub regret: f64,
    pub regret_half: f64,
    /// Per round: `max_k |p_k - p_hat_k|`.
    pub prob_gap: Vec<f64>,
    /// Per round: dispersion of the gossip input.
    pub alpha: Vec<f64>,
    /// Per round: disagreement after `tau` iterations.
    pub disagreement: Vec<f64>,
    /// Per round: largest finite-difference slope of the probability map in the average.
    pub lipschitz: Vec<f64>,
    /// Gossip trace of the final round.
    pub last_trace: Option<DisagreementTrace>,
    pub defections: Vec<DefectionEvent>,
    /// `max_t (max_k N_k(t) - min_k N_k(t))`.
    pub max_pull_spread: u64,
    pub records: Vec<RoundRecord>,
    pub wall_time: Duration,
}

impl PartialEq for SimResult {
    /// Compares everything except wall-clock time.
    fn eq(&self, o: &Self) -> bool {
        self.seed == o.seed
            && self.horizon == o.horizon
            && self.tau == o.tau
            && self.means == o.means
            && self.strategies == o.strategies
            && self.graph_seed == o.graph_seed
            && self.graph_attempts == o.graph_attempts
            && self.lambda.to_bits() == o.lambda.to_bits()
            && self.gamma == o.gamma
            && self.delta == o.delta
            && self.theta == o.theta
            && self.slack == o.slack
            && self.pull_counts == o.pull_counts
            && self.half_pull_counts == o.half_pull_counts
            && self.revenue_by_arm == o.revenue_by_arm
            && self.utilities == o.utilities
            && self.rewards_by_arm == o.rewards_by_arm
            && self.regret.to_bits() == o.regret.to_bits()
            && self.regret_half.to_bits() == o.regret_half.to_bits()
            && self.prob_gap == o.prob_gap
            && self.alpha == o.alpha
            && self.disagreement == o.disagreement
            && self.lipschitz == o.lipschitz
            && self.last_trace == o.last_trace
            && self.defections == o.defections
            && self.max_pull_spread == o.max_pull_spread
            && self.records == o.records
    }
}

impl SimResult {
    pub fn arm_count(&self) -> usize {
        self.means.len()
    }

    pub fn revenue(&self) -> Ticks {
        self.revenue_by_arm.iter().copied().sum()
    }

    pub fn utility(&self, arm: usize) -> f64 {
        self.utilities[arm].to_f64()
    }

    /// Index of the highest mean (first on ties).
    pub fn best_arm(&self) -> usize {
        let mut best = 0;
        for (i, &m) in self.means.iter().enumerate() {
            if m > self.means[best] {
                best = i;
            }
        }
        best
    }

    /// Fraction of rounds after `T/2` in which the best arm was pulled.
    pub fn best_arm_share_last_half(&self) -> f64 {
        let b = self.best_arm();
        let rounds = self.horizon - self.horizon / 2;
        (self.pull_counts[b] - self.half_pull_counts[b]) as f64 / rounds as f64
    }

    pub fn max_prob_gap(&self) -> f64 {
        self.prob_gap.iter().cloned().fold(0.0, f64::max)
    }

    /// Checks `utility + revenue = rewards` per arm, exactly.
    pub fn conservation_holds(&self) -> bool {
        (0..self.arm_count()).all(|k| {
            self.utilities[k] + self.revenue_by_arm[k] == self.rewards_by_arm[k]
        })
    }
}

pub fn simulate(config: &SimConfig) -> Result<SimResult, SimError> {
    let resolved = resolve(config)?;
    simulate_resolved(config, &resolved)
}

struct GossipOutput {
    input: Vec<f64>,
    averages: Vec<f64>,
    alpha: f64,
    disagreement: f64,
}

pub fn simulate_resolved(config: &SimConfig, resolved: &ResolvedSim) -> Result<SimResult, SimError> {
    let started = Instant::now();
    let k = config.arm_count();
    let horizon = config.horizon;
    let pc = &resolved.player;
    let net = &resolved.network;
    let modes: Vec<MessageMode> = resolved.strategies.iter().map(|s| s.message_mode()).collect();

    let mut arms: Vec<ArmState> = resolved
        .strategies
        .iter()
        .enumerate()
        .map(|(i, &s)| ArmState::new(i, s))
        .collect();
    let mut player = PlayerState::new(pc, component_rng(config.seed, PLAYER_STREAM));
    let mut reward_rng = component_rng(config.seed, REWARD_STREAM);

    let cap = horizon as usize;
    let mut prob_gap = Vec::with_capacity(cap);
    let mut alpha_trace = Vec::with_capacity(cap);
    let mut disagreement_trace = Vec::with_capacity(cap);
    let mut lipschitz = Vec::with_capacity(cap);
    let mut revenue_by_arm = vec![Ticks::ZERO; k];
    let mut rewards_by_arm = vec![Ticks::ZERO; k];
    let mut cumulative_offers = vec![0.0; k];
    let mut collected = 0.0;
    let mut regret_half = 0.0;
    let mut half_pull_counts = vec![0; k];
    let mut defections = Vec::new();
    let mut max_pull_spread = 0;
    let mut records = Vec::new();
    let mut last_trace = None;
    let mut previous: Option<GossipOutput> = None;

    let mut rewards = vec![0.0; k];
    let mut offers = vec![0.0; k];
    let mut p_hat = vec![0.0; k];

    for t in 1..=horizon {
        let at = |source: StepError| SimError::Round { round: t, source };

        // Gossip over the replicated weights, rescaled by a common factor so they
        // stay representable; the probability map is invariant to that factor.
        let shift = arms
            .iter()
            .map(|a| a.local_info)
            .fold(f64::NEG_INFINITY, f64::max);
        let input: Vec<f64> = arms.iter().map(|a| (a.local_info - shift).exp()).collect();
        let reuse = config.skip_unchanged_consensus
            && t != horizon
            && previous.as_ref().is_some_and(|prev| prev.input == input);
        if !reuse {
            let (state, trace) = run_consensus_with(
                &ConsensusState::new(input.clone()),
                &net.weights,
                config.tau,
                net.lambda,
                |l, v| corrupt_message(v, modes[l]),
            )
            .map_err(|e| at(e.into()))?;
            let disagreement = *trace.disagreements.last().unwrap_or(&0.0);
            let alpha = trace.alpha;
            if t == horizon {
                last_trace = Some(trace);
            }
            previous = Some(GossipOutput {
                input,
                averages: state.values,
                alpha,
                disagreement,
            });
        }
        let gossip = previous.as_ref().expect("gossip output set above");
        alpha_trace.push(gossip.alpha);
        disagreement_trace.push(gossip.disagreement);

        for (arm, avg) in arms.iter_mut().zip(&gossip.averages) {
            p_hat[arm.index] = arm
                .estimate_probability(*avg, shift, pc)
                .map_err(|e| at(e.into()))?;
        }

        // One uniform per arm every round keeps the reward stream aligned across runs.
        for (r, params) in rewards.iter_mut().zip(&resolved.arms) {
            let u: f64 = reward_rng.gen();
            *r = if u < params.mu { 1.0 } else { 0.0 };
        }
        for (k_i, arm) in arms.iter().enumerate() {
            offers[k_i] = arm
                .strategic_offer(&resolved.arms[k_i], rewards[k_i])
                .map_err(|e| at(e.into()))?;
        }

        let p = player.pull_probabilities(pc);
        let pulled = player.select_arm(&p).map_err(|e| at(e.into()))?;
        let r = rewards[pulled];
        let x = offers[pulled];
        let (r_ticks, x_ticks) = (Ticks::from_value(r), Ticks::from_value(x));
        arms[pulled].record_pull(r_ticks, x_ticks);
        revenue_by_arm[pulled] += x_ticks;
        rewards_by_arm[pulled] += r_ticks;

        if pc.side_observation {
            player
                .observe_with_neighbors(pc, pulled, &offers, &p, &net.graph)
                .map_err(|e| at(e.into()))?;
            for arm in arms.iter_mut() {
                let i = arm.index;
                let observed = i == pulled || net.graph.has_edge(i, pulled);
                let q_hat = p_hat[i] + net.graph.neighbors(i).map(|j| p_hat[j]).sum::<f64>();
                arm.local_info_update_observed(observed, offers[i], q_hat, pc)
                    .map_err(|e| at(e.into()))?;
            }
        } else {
            player.observe(pc, pulled, x, &p).map_err(|e| at(e.into()))?;
            for arm in arms.iter_mut() {
                let i = arm.index;
                arm.local_info_update(i == pulled, offers[i], pc)
                    .map_err(|e| at(e.into()))?;
            }
        }

        for arm in arms.iter_mut().filter(|a| a.strategy.uses_defection()) {
            let before = arm.defected;
            if arm.defection_check(t, k, resolved.slack) && !before {
                defections.push(DefectionEvent {
                    round: t,
                    arm: arm.index,
                });
            }
        }

        let (lo, hi) = arms.iter().fold((u64::MAX, 0), |(lo, hi), a| {
            (lo.min(a.pull_count), hi.max(a.pull_count))
        });
        max_pull_spread = max_pull_spread.max(hi - lo);

        prob_gap.push(
            p.iter()
                .zip(&p_hat)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max),
        );
        lipschitz.push(lipschitz_slope(&gossip.input, pc));

        for (acc, o) in cumulative_offers.iter_mut().zip(&offers) {
            *acc += o;
        }
        collected += x;
        if t == horizon / 2 {
            regret_half = max_of(&cumulative_offers) - collected;
            half_pull_counts = arms.iter().map(|a| a.pull_count).collect();
        }

        if config.record_stride > 0 && t % config.record_stride == 0 {
            records.push(RoundRecord {
                t,
                pulled,
                reward: r,
                x,
                offers: offers.clone(),
                p,
                p_hat: p_hat.clone(),
                disagreement: gossip.disagreement,
            });
        }
    }

    Ok(SimResult {
        seed: config.seed,
        horizon,
        tau: config.tau,
        means: config.means.clone(),
        strategies: resolved.strategies.clone(),
        graph_seed: resolved.graph_seed,
        graph_attempts: resolved.graph_attempts,
        lambda: net.lambda,
        gamma: pc.gamma,
        delta: pc.delta,
        theta: resolved.theta,
        slack: resolved.slack,
        pull_counts: arms.iter().map(|a| a.pull_count).collect(),
        half_pull_counts,
        revenue_by_arm,
        utilities: arms.iter().map(|a| a.utility).collect(),
        rewards_by_arm,
        regret: max_of(&cumulative_offers) - collected,
        regret_half,
        prob_gap,
        alpha: alpha_trace,
        disagreement: disagreement_trace,
        lipschitz,
        last_trace,
        defections,
        max_pull_spread,
        records,
        wall_time: started.elapsed(),
    })
}

fn max_of(v: &[f64]) -> f64 {
    v.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
}

/// Largest `|Pr(I_k, avg') - Pr(I_k, avg)| / |avg' - avg|` over arms and
/// `avg' = avg * (1 +/- LIPSCHITZ_STEP)`, with `avg` the true mean of `info`.
fn lipschitz_slope(info: &[f64], pc: &PlayerConfig) -> f64 {
    let k = info.len();
    let avg = info.iter().sum::<f64>() / k as f64;
    let mut best = 0.0f64;
    for &i in info {
        let base = probability_from_average(i, avg, k, pc.gamma);
        for sign in [-1.0, 1.0] {
            let moved = avg * (1.0 + sign * LIPSCHITZ_STEP);
            let slope = (probability_from_average(i, moved, k, pc.gamma) - base).abs()
                / (moved - avg).abs();
            best = best.max(slope);
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeviationOutcome {
    pub arm: usize,
    pub mode: Strategy,
    pub u_conform: f64,
    pub u_deviate: f64,
    /// `u_deviate - u_conform`.
    pub gap: f64,
}

/// Paired runs on the same seed: everyone conforms, then `deviant` plays `mode`.
pub fn run_deviation_experiment(
    config: &SimConfig,
    deviant: usize,
    mode: Strategy,
) -> Result<DeviationOutcome, SimError> {
    let conform = simulate(&all_equilibrium(config))?;
    deviation_against(config, &conform, deviant, mode)
}

fn all_equilibrium(config: &SimConfig) -> SimConfig {
    SimConfig {
        strategies: Vec::new(),
        ..config.clone()
    }
}

fn deviation_against(
    config: &SimConfig,
    conform: &SimResult,
    deviant: usize,
    mode: Strategy,
) -> Result<DeviationOutcome, SimError> {
    if deviant >= config.arm_count() {
        return Err(SimError::Config(format!("deviant arm {deviant} out of range")));
    }
    let deviating = if mode == Strategy::Equilibrium {
        conform.clone()
    } else {
        simulate(&all_equilibrium(config).with_strategy(deviant, mode))?
    };
    let u_conform = conform.utility(deviant);
    let u_deviate = deviating.utility(deviant);
    Ok(DeviationOutcome {
        arm: deviant,
        mode,
        u_conform,
        u_deviate,
        gap: u_deviate - u_conform,
    })
}

/// Conforming run plus every `(arm, mode)` deviation, all on `config.seed`.
pub fn nash_audit(
    config: &SimConfig,
    arms: &[usize],
    modes: &[Strategy],
) -> Result<(SimResult, Vec<DeviationOutcome>), SimError> {
    let conform = simulate(&all_equilibrium(config))?;
    let cells: Vec<(usize, Strategy)> = arms
        .iter()
        .flat_map(|&a| modes.iter().map(move |&m| (a, m)))
        .collect();
    let outcomes = cells
        .par_iter()
        .map(|&(a, m)| deviation_against(config, &conform, a, m))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((conform, outcomes))
}

#[derive(Debug, Clone)]
pub struct SweepCell {
    pub config_index: usize,
    pub replica: u32,
    pub seed: u64,
    pub result: Result<SimResult, SimError>,
}

/// Runs every config `replicas` times; replica `r` uses seed `config.seed + r`.
///
/// Cells come back config-major, replica-minor, whatever the thread count.
/// `jobs = 0` uses the global rayon pool.
pub fn sweep(configs: &[SimConfig], replicas: u32, jobs: usize) -> Vec<SweepCell> {
    let cells: Vec<(usize, u32)> = (0..configs.len())
        .flat_map(|c| (0..replicas).map(move |r| (c, r)))
        .collect();
    let run = || {
        cells
            .par_iter()
            .map(|&(c, r)| {
                let seed = configs[c].seed.wrapping_add(r as u64);
                SweepCell {
                    config_index: c,
                    replica: r,
                    seed,
                    result: simulate(&configs[c].with_seed(seed)),
                }
            })
            .collect()
    };
    if jobs == 0 {
        run()
    } else {
        match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
            Ok(pool) => pool.install(run),
            Err(_) => run(),
        }
    }
}
