//! Discounted reward with dominance constraints on the expected discounted
//! sum of per-period shortfalls.
//!
//! The rows compare `sum_t delta^t E[(z_t - eta)_-]` with `E[(Y - eta)_-]`
//! directly, so the benchmark must be expressed in discounted-total units
//! (roughly `1/(1-delta)` times a per-period level). [`rescale_benchmark`]
//! converts a per-period benchmark explicitly; nothing is rescaled silently.

use crate::error::{Error, Result};
use crate::lp::LpProblem;
use crate::mdp::{Benchmark, MdpInstance, Mode, Policy};
use crate::occupation::{build_primal, solve_primal, DominanceRows, DominanceSpec, Order, SolveReport, StateResidual};

pub fn build_discounted_primal(inst: &MdpInstance, spec: &DominanceSpec) -> Result<LpProblem> {
    let rows = DominanceRows::new(inst, spec, Order::Icv)?;
    Ok(build_primal(inst, &rows, Mode::Discounted)?.0)
}

pub fn solve_discounted(inst: &MdpInstance, spec: &DominanceSpec) -> Result<SolveReport> {
    let rows = DominanceRows::new(inst, spec, Order::Icv)?;
    solve_primal(inst, &rows, Mode::Discounted)
}

pub fn solve_discounted_unconstrained(inst: &MdpInstance) -> Result<SolveReport> {
    solve_primal(inst, &DominanceRows::empty(Order::Icv), Mode::Discounted)
}

pub fn solve_discounted_cost(inst: &MdpInstance, bench: &Benchmark) -> Result<SolveReport> {
    let rows = DominanceRows::scalar(inst, bench, Order::Icx)?;
    solve_primal(inst, &rows, Mode::Discounted)
}

/// Multiplies the benchmark support by `1/(1-delta)`.
pub fn rescale_benchmark(bench: &Benchmark, delta: f64) -> Benchmark {
    bench.scaled(1.0 / (1.0 - delta))
}

/// `sum_j nu(j) v(j)` of an optimal discounted report.
pub fn initial_weighted_value(report: &SolveReport, inst: &MdpInstance) -> Option<f64> {
    let v = report.dual.as_ref()?.values();
    let nu = inst.initial.as_ref()?;
    Some(nu.iter().zip(v).map(|(a, b)| a * b).sum())
}

/// Residuals of `v(s) = max_a { r + u(z) + delta P v }` per state.
pub fn bellman_residual(report: &SolveReport, inst: &MdpInstance) -> Vec<StateResidual> {
    crate::occupation::optimality_residual(report, inst)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValueIterationResult {
    pub v: Vec<f64>,
    pub policy: Policy,
    pub iterations: usize,
    /// Sup-norm of `T v - v` at the returned `v`.
    pub residual: f64,
}

/// Standard value iteration, stopped once successive iterates differ by at
/// most `tol (1-delta) / (2 delta)` in sup norm.
pub fn value_iteration_unconstrained(inst: &MdpInstance, tol: f64) -> Result<ValueIterationResult> {
    inst.ensure_valid()?;
    if inst.mode != Mode::Discounted {
        return Err(Error::ModeMismatch { expected: Mode::Discounted, found: inst.mode });
    }
    let delta = inst.discount_factor()?;
    let stop = tol * (1.0 - delta) / (2.0 * delta);
    let n = inst.num_states;
    let mut v = vec![0.0; n];
    let mut choice = vec![0usize; n];
    let bellman = |v: &[f64], choice: &mut [usize]| -> Vec<f64> {
        (0..n)
            .map(|s| {
                let mut best = f64::NEG_INFINITY;
                for a in 0..inst.num_actions(s) {
                    let pv: f64 = inst.transition[s][a].iter().zip(v).map(|(p, x)| p * x).sum();
                    let q = inst.reward_r[s][a] + delta * pv;
                    if q > best {
                        best = q;
                        choice[s] = a;
                    }
                }
                best
            })
            .collect()
    };
    let mut iterations = 0;
    loop {
        iterations += 1;
        let next = bellman(&v, &mut choice);
        let diff = next.iter().zip(&v).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        v = next;
        if diff <= stop {
            break;
        }
    }
    let tv = bellman(&v, &mut choice);
    let residual = tv.iter().zip(&v).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
    Ok(ValueIterationResult { v, policy: Policy::deterministic(inst, &choice), iterations, residual })
}
