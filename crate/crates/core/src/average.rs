//! Long-run average reward with dominance constraints on the steady-state
//! distribution of the secondary reward.

use crate::error::{Error, Result};
use crate::lp::LpProblem;
use crate::mdp::{Benchmark, MdpInstance, Mode, Policy};
use crate::occupation::{build_primal, solve_primal, DominanceRows, DominanceSpec, Order, SolveReport};

pub use crate::chain::stationary_distribution;
pub use crate::occupation::{check_slackness, extract_policy, optimality_residual};

/// `max sum r x` over stable occupation measures subject to the dominance rows.
pub fn build_average_primal(inst: &MdpInstance, spec: &DominanceSpec) -> Result<LpProblem> {
    let rows = DominanceRows::new(inst, spec, Order::Icv)?;
    Ok(build_primal(inst, &rows, Mode::Average)?.0)
}

pub fn solve_average(inst: &MdpInstance, spec: &DominanceSpec) -> Result<SolveReport> {
    let rows = DominanceRows::new(inst, spec, Order::Icv)?;
    solve_primal(inst, &rows, Mode::Average)
}

/// Unconstrained average-reward LP.
pub fn solve_average_unconstrained(inst: &MdpInstance) -> Result<SolveReport> {
    solve_primal(inst, &DominanceRows::empty(Order::Icv), Mode::Average)
}

/// Cost variant: `r` is a cost, `z` a cost-like secondary quantity, and the
/// rows are `sum x (z - eta)_+ <= E[(Y - eta)_+]`.
pub fn build_average_cost_primal(inst: &MdpInstance, bench: &Benchmark) -> Result<LpProblem> {
    let rows = DominanceRows::scalar(inst, bench, Order::Icx)?;
    Ok(build_primal(inst, &rows, Mode::Average)?.0)
}

pub fn solve_average_cost(inst: &MdpInstance, bench: &Benchmark) -> Result<SolveReport> {
    let rows = DominanceRows::scalar(inst, bench, Order::Icx)?;
    solve_primal(inst, &rows, Mode::Average)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelativeValueResult {
    pub gain: f64,
    pub bias: Vec<f64>,
    pub policy: Policy,
    pub iterations: usize,
}

/// Relative value iteration on the aperiodic transform `0.5 P + 0.5 I`
/// (same gain, same optimal policies). Stops when the span of the one-step
/// difference falls below `tol`.
pub fn relative_value_iteration(inst: &MdpInstance, tol: f64, max_iter: usize) -> Result<RelativeValueResult> {
    inst.ensure_valid()?;
    if inst.mode != Mode::Average {
        return Err(Error::ModeMismatch { expected: Mode::Average, found: inst.mode });
    }
    let n = inst.num_states;
    let tau = 0.5;
    let mut h = vec![0.0; n];
    let mut choice = vec![0usize; n];
    for it in 1..=max_iter {
        let mut next = vec![0.0; n];
        for s in 0..n {
            let mut best = f64::NEG_INFINITY;
            for a in 0..inst.num_actions(s) {
                let ph: f64 = inst.transition[s][a].iter().zip(&h).map(|(p, v)| p * v).sum();
                let q = inst.reward_r[s][a] + tau * ph + (1.0 - tau) * h[s];
                if q > best + 1e-15 {
                    best = q;
                    choice[s] = a;
                }
            }
            next[s] = best;
        }
        let diff: Vec<f64> = next.iter().zip(&h).map(|(a, b)| a - b).collect();
        let hi = diff.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = diff.iter().copied().fold(f64::INFINITY, f64::min);
        let anchor = next[0];
        h = next.iter().map(|v| v - anchor).collect();
        if hi - lo < tol {
            // gain of the transformed chain equals the original gain; the
            // bias scales by 1/tau
            let bias = h.iter().map(|v| v * tau).collect();
            return Ok(RelativeValueResult {
                gain: 0.5 * (hi + lo),
                bias,
                policy: Policy::deterministic(inst, &choice),
                iterations: it,
            });
        }
    }
    Err(Error::IterationLimit(max_iter))
}
