//! Synchronous gossip averaging and network-disagreement diagnostics.
//!
//! Every arm holds one scalar. A step replaces each arm's value with the weighted
//! sum of the values its closed neighborhood held at the previous iteration. With a
//! doubly-stochastic matrix the network mean is conserved and the mean-squared
//! deviation from it shrinks at least by `lambda^2` per step.

use std::fmt::Write as _;

use thiserror::Error;

use crate::topology::CombinationMatrix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConsensusError {
    #[error("state has {values} values but the matrix is {matrix}x{matrix}")]
    DimensionMismatch { values: usize, matrix: usize },
    #[error("tau must be at least 1")]
    ZeroIterations,
    #[error("mixing rate {0} outside [0, 1)")]
    BadMixingRate(f64),
    #[error("dispersion constant {0} is negative")]
    NegativeAlpha(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConsensusState {
    pub values: Vec<f64>,
    pub iteration: usize,
}

impl ConsensusState {
    pub fn new(values: Vec<f64>) -> Self {
        Self {
            values,
            iteration: 0,
        }
    }

    pub fn mean(&self) -> f64 {
        mean(&self.values)
    }
}

/// Per-iteration disagreement `d_n` for `n = 0..=tau`; `d_0` equals `alpha`.
#[derive(Debug, Clone, PartialEq)]
pub struct DisagreementTrace {
    pub disagreements: Vec<f64>,
    pub alpha: f64,
    pub lambda: f64,
}

impl DisagreementTrace {
    /// `alpha * lambda^(2n)`. Unlike [`decay_bound`] this accepts `lambda >= 1`.
    pub fn bound(&self, n: usize) -> f64 {
        self.alpha * self.lambda.powi(2 * n as i32)
    }

    /// True when every recorded `d_n` is within `slack` of its bound.
    pub fn within_bound(&self, slack: f64) -> bool {
        self.disagreements
            .iter()
            .enumerate()
            .all(|(n, &d)| d <= self.bound(n) + slack)
    }

    /// CSV with header `iteration,disagreement,bound`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("iteration,disagreement,bound\n");
        for (n, d) in self.disagreements.iter().enumerate() {
            let _ = writeln!(s, "{n},{d:e},{:e}", self.bound(n));
        }
        s
    }
}

fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

/// `(1/K) * sum_k (values[k] - mean)^2`.
pub fn disagreement(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let m = mean(values);
    values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / values.len() as f64
}

/// `alpha * lambda^(2n)`; requires `0 <= lambda < 1`.
pub fn decay_bound(alpha: f64, lambda: f64, n: u32) -> Result<f64, ConsensusError> {
    if !(0.0..1.0).contains(&lambda) {
        return Err(ConsensusError::BadMixingRate(lambda));
    }
    if alpha < 0.0 {
        return Err(ConsensusError::NegativeAlpha(alpha));
    }
    Ok(alpha * lambda.powi(2 * n as i32))
}

/// One honest gossip step.
pub fn consensus_step(
    state: &ConsensusState,
    a: &CombinationMatrix,
) -> Result<ConsensusState, ConsensusError> {
    consensus_step_with(state, a, |_, v| v)
}

/// One gossip step where node `l` transmits `outgoing(l, value)` to its neighbors.
///
/// A node always uses its own true value for the self-loop term. Summation runs over
/// `l` in ascending order so results are reproducible.
pub fn consensus_step_with<F>(
    state: &ConsensusState,
    a: &CombinationMatrix,
    outgoing: F,
) -> Result<ConsensusState, ConsensusError>
where
    F: Fn(usize, f64) -> f64,
{
    let k = a.size();
    if state.values.len() != k {
        return Err(ConsensusError::DimensionMismatch {
            values: state.values.len(),
            matrix: k,
        });
    }
    let sent: Vec<f64> = state
        .values
        .iter()
        .enumerate()
        .map(|(l, &v)| outgoing(l, v))
        .collect();
    let mut next = vec![0.0; k];
    for (node, slot) in next.iter_mut().enumerate() {
        let mut acc = 0.0;
        for l in 0..k {
            let w = a.get(l, node);
            if w != 0.0 {
                acc += w * if l == node { state.values[l] } else { sent[l] };
            }
        }
        *slot = acc;
    }
    Ok(ConsensusState {
        values: next,
        iteration: state.iteration + 1,
    })
}

/// Runs `tau` honest steps and records the disagreement after each.
pub fn run_consensus(
    state: &ConsensusState,
    a: &CombinationMatrix,
    tau: usize,
    lambda: f64,
) -> Result<(ConsensusState, DisagreementTrace), ConsensusError> {
    run_consensus_with(state, a, tau, lambda, |_, v| v)
}

pub fn run_consensus_with<F>(
    state: &ConsensusState,
    a: &CombinationMatrix,
    tau: usize,
    lambda: f64,
    outgoing: F,
) -> Result<(ConsensusState, DisagreementTrace), ConsensusError>
where
    F: Fn(usize, f64) -> f64,
{
    if tau == 0 {
        return Err(ConsensusError::ZeroIterations);
    }
    let alpha = disagreement(&state.values);
    let mut disagreements = Vec::with_capacity(tau + 1);
    disagreements.push(alpha);
    let mut current = state.clone();
    for _ in 0..tau {
        current = consensus_step_with(&current, a, &outgoing)?;
        disagreements.push(disagreement(&current.values));
    }
    Ok((
        current,
        DisagreementTrace {
            disagreements,
            alpha,
            lambda,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{metropolis_weights, Graph};
    use approx::assert_abs_diff_eq;

    fn half() -> CombinationMatrix {
        CombinationMatrix::from_rows(&[vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap()
    }

    #[test]
    fn constant_vector_is_fixed_point() {
        let a = metropolis_weights(&Graph::path(5)).unwrap();
        let s = ConsensusState::new(vec![2.5; 5]);
        let next = consensus_step(&s, &a).unwrap();
        for v in next.values {
            assert_abs_diff_eq!(v, 2.5, epsilon = 1e-15);
        }
        assert_eq!(next.iteration, 1);
    }

    #[test]
    fn two_node_step() {
        let next = consensus_step(&ConsensusState::new(vec![0.0, 1.0]), &half()).unwrap();
        assert_eq!(next.values, vec![0.5, 0.5]);
    }

    #[test]
    fn three_path_step() {
        let a = metropolis_weights(&Graph::path(3)).unwrap();
        let next = consensus_step(&ConsensusState::new(vec![1.0, 0.0, 0.0]), &a).unwrap();
        assert_abs_diff_eq!(next.values[0], 2.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(next.values[1], 1.0 / 3.0, epsilon = 1e-15);
        assert_eq!(next.values[2], 0.0);
    }

    #[test]
    fn dimension_mismatch() {
        let err = consensus_step(&ConsensusState::new(vec![1.0; 3]), &half()).unwrap_err();
        assert_eq!(err, ConsensusError::DimensionMismatch { values: 3, matrix: 2 });
    }

    #[test]
    fn tau_one_is_single_step() {
        let a = metropolis_weights(&Graph::path(4)).unwrap();
        let s = ConsensusState::new(vec![3.0, 1.0, 4.0, 1.0]);
        let (ran, trace) = run_consensus(&s, &a, 1, 0.5).unwrap();
        assert_eq!(ran, consensus_step(&s, &a).unwrap());
        assert_eq!(trace.disagreements.len(), 2);
    }

    #[test]
    fn tau_zero_rejected() {
        let s = ConsensusState::new(vec![1.0, 0.0]);
        assert_eq!(run_consensus(&s, &half(), 0, 0.0), Err(ConsensusError::ZeroIterations));
    }

    #[test]
    fn two_node_converges_in_one_iteration() {
        let (end, trace) = run_consensus(&ConsensusState::new(vec![0.0, 1.0]), &half(), 3, 0.0).unwrap();
        assert_eq!(end.values, vec![0.5, 0.5]);
        assert_eq!(end.iteration, 3);
        assert_eq!(trace.disagreements, vec![0.25, 0.0, 0.0, 0.0]);
        assert!(trace.within_bound(0.0));
    }

    #[test]
    fn disagreement_examples() {
        assert_eq!(disagreement(&[4.0, 4.0, 4.0]), 0.0);
        assert_eq!(disagreement(&[0.0, 1.0]), 0.25);
        assert_abs_diff_eq!(disagreement(&[1.0, 0.0, 0.0]), 2.0 / 9.0, epsilon = 1e-15);
    }

    #[test]
    fn decay_bound_examples() {
        assert_eq!(decay_bound(1.0, 0.0, 1).unwrap(), 0.0);
        assert_abs_diff_eq!(
            decay_bound(0.25, 2.0 / 3.0, 2).unwrap(),
            0.25 * 16.0 / 81.0,
            epsilon = 1e-15
        );
        assert_eq!(decay_bound(0.7, 0.9, 0).unwrap(), 0.7);
        assert_eq!(decay_bound(0.7, 1.0, 3), Err(ConsensusError::BadMixingRate(1.0)));
    }

    #[test]
    fn trace_csv_shape() {
        let (_, trace) = run_consensus(&ConsensusState::new(vec![1.0, 0.0, 0.0]),
            &metropolis_weights(&Graph::path(3)).unwrap(), 4, 2.0 / 3.0).unwrap();
        let csv = trace.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("iteration,disagreement,bound"));
        assert_eq!(lines.count(), 5);
    }

    #[test]
    fn corrupted_sender_keeps_own_value() {
        let a = half();
        let s = ConsensusState::new(vec![1.0, 1.0]);
        let next = consensus_step_with(&s, &a, |l, v| if l == 0 { 10.0 * v } else { v }).unwrap();
        assert_eq!(next.values, vec![1.0, 5.5]);
    }
}
