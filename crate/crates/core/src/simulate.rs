//! Monte Carlo simulation of stationary policies, shortfall estimators, and
//! exact brute-force oracles over deterministic policies.
//!
//! Path `p` of a run with seed `seed` is driven by ChaCha20 keyed with
//! `seed` (expanded by `seed_from_u64`) on stream `p`. Draw 0 picks the
//! initial state; step `t` then uses draw `2t + 1` for the action and
//! `2t + 2` for the next state, each by inverse CDF on a uniform in [0,1).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::Serialize;

use crate::chain::{discounted_visitation, stationary_of_kernel};
use crate::dominance::shortfall_minus;
use crate::error::{Error, Result};
use crate::mdp::{Benchmark, MdpInstance, Mode, Policy};
use crate::occupation::{DominanceRows, Order};

pub const MAX_POLICIES: usize = 1_000_000;
/// Batches per path for batch-means standard errors.
pub const BATCHES_PER_PATH: usize = 10;
/// Feasibility tolerance of the brute-force oracle.
pub const ORACLE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Step {
    pub s: usize,
    pub a: usize,
    pub r: f64,
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub seed: u64,
    pub path: u64,
    pub steps: Vec<Step>,
}

fn inverse_cdf(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last = i;
            if u < acc {
                return i;
            }
        }
    }
    last
}

pub fn path_rng(seed: u64, path: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(path);
    rng
}

pub fn simulate_path(inst: &MdpInstance, policy: &Policy, nu: &[f64], horizon: usize, seed: u64, path: u64) -> Trajectory {
    let mut rng = path_rng(seed, path);
    let mut s = inverse_cdf(nu, rng.random::<f64>());
    let mut steps = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        let a = inverse_cdf(&policy.probs[s], rng.random::<f64>());
        steps.push(Step { s, a, r: inst.reward_r[s][a], z: inst.z(s, a) });
        s = inverse_cdf(&inst.transition[s][a], rng.random::<f64>());
    }
    Trajectory { seed, path, steps }
}

/// `num_paths` independent trajectories of length `horizon` from `nu`.
pub fn simulate(
    inst: &MdpInstance,
    policy: &Policy,
    nu: &[f64],
    horizon: usize,
    num_paths: usize,
    seed: u64,
) -> Result<Vec<Trajectory>> {
    inst.ensure_valid()?;
    policy.validate(inst)?;
    if nu.len() != inst.num_states {
        return Err(Error::Dimension(format!("initial distribution has {} entries, expected {}", nu.len(), inst.num_states)));
    }
    Ok((0..num_paths as u64).map(|p| simulate_path(inst, policy, nu, horizon, seed, p)).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShortfallEstimate {
    pub eta: f64,
    pub mean: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscountedShortfallEstimate {
    pub eta: f64,
    pub mean: f64,
    pub std_error: f64,
    /// Bound on the omitted tail `sum_{t >= T} delta^t |(z_t - eta)_-|`.
    pub truncation_bound: f64,
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Long-run average shortfall per `eta`, discarding the first `T/10` steps
/// of every path. Each path's remaining steps are cut into
/// [`BATCHES_PER_PATH`] equal batches (leftover steps at the end are
/// dropped); the estimate is the mean of all batch means and the standard
/// error is their sample deviation over the square root of their count.
pub fn estimate_average_shortfalls(trajs: &[Trajectory], grid: &[f64]) -> Result<Vec<ShortfallEstimate>> {
    let horizon = trajs.first().map_or(0, |t| t.steps.len());
    let burn = horizon / 10;
    let batch = (horizon - burn) / BATCHES_PER_PATH;
    if trajs.is_empty() || batch == 0 || trajs.iter().any(|t| t.steps.len() != horizon) {
        return Err(Error::InvalidArgument(format!(
            "need paths of equal length with at least {} post-burn-in steps",
            BATCHES_PER_PATH
        )));
    }
    Ok(grid
        .iter()
        .map(|&eta| {
            let means: Vec<f64> = trajs
                .iter()
                .flat_map(|t| {
                    t.steps[burn..burn + batch * BATCHES_PER_PATH]
                        .chunks(batch)
                        .map(|c| c.iter().map(|st| shortfall_minus(st.z, eta)).sum::<f64>() / batch as f64)
                        .collect::<Vec<_>>()
                })
                .collect();
            let (mean, std_error) = mean_and_se(&means);
            ShortfallEstimate { eta, mean, std_error }
        })
        .collect())
}

/// Per `eta`, the mean over paths of `sum_{t<T} delta^t (z_t - eta)_-`.
/// `z_min` is a lower bound on `z` used for the truncation bound.
pub fn estimate_discounted_shortfalls(
    trajs: &[Trajectory],
    grid: &[f64],
    delta: f64,
    z_min: f64,
) -> Result<Vec<DiscountedShortfallEstimate>> {
    if trajs.is_empty() {
        return Err(Error::InvalidArgument("no trajectories".into()));
    }
    if !(0.0..1.0).contains(&delta) {
        return Err(Error::InvalidArgument(format!("discount {delta} outside [0,1)")));
    }
    let horizon = trajs.iter().map(|t| t.steps.len()).min().unwrap_or(0);
    Ok(grid
        .iter()
        .map(|&eta| {
            let totals: Vec<f64> = trajs
                .iter()
                .map(|t| {
                    let mut w = 1.0;
                    let mut sum = 0.0;
                    for st in &t.steps {
                        sum += w * shortfall_minus(st.z, eta);
                        w *= delta;
                    }
                    sum
                })
                .collect();
            let (mean, std_error) = mean_and_se(&totals);
            let truncation_bound = delta.powi(horizon as i32) * shortfall_minus(z_min, eta).abs() / (1.0 - delta);
            DiscountedShortfallEstimate { eta, mean, std_error, truncation_bound }
        })
        .collect())
}

/// Smallest horizon with `delta^T max_abs / (1 - delta) <= tol`.
pub fn horizon_for_truncation(delta: f64, max_abs: f64, tol: f64) -> usize {
    if max_abs == 0.0 || delta == 0.0 {
        return 1;
    }
    let t = ((tol * (1.0 - delta) / max_abs).ln() / delta.ln()).ceil();
    t.max(1.0) as usize
}

/// Deterministic policies in lexicographic order of their action choices
/// (state 0 most significant).
pub struct DeterministicPolicies<'a> {
    inst: &'a MdpInstance,
    next: Option<Vec<usize>>,
}

impl Iterator for DeterministicPolicies<'_> {
    type Item = Policy;

    fn next(&mut self) -> Option<Policy> {
        let cur = self.next.take()?;
        let policy = Policy::deterministic(self.inst, &cur);
        let mut succ = cur;
        let mut s = succ.len();
        while s > 0 {
            s -= 1;
            if succ[s] + 1 < self.inst.num_actions(s) {
                succ[s] += 1;
                self.next = Some(succ);
                break;
            }
            succ[s] = 0;
        }
        Some(policy)
    }
}

pub fn count_deterministic_policies(inst: &MdpInstance) -> f64 {
    inst.actions.iter().map(|a| a.len() as f64).product()
}

pub fn enumerate_deterministic_policies(inst: &MdpInstance) -> Result<DeterministicPolicies<'_>> {
    let count = count_deterministic_policies(inst);
    if count > MAX_POLICIES as f64 {
        return Err(Error::TooManyPolicies { count, limit: MAX_POLICIES });
    }
    Ok(DeterministicPolicies { inst, next: Some(vec![0; inst.num_states]) })
}

/// Exact per-pair occupation of a policy: stationary (average) or
/// discounted visitation from the initial distribution.
pub fn policy_occupation(inst: &MdpInstance, policy: &Policy) -> Result<Vec<f64>> {
    let kernel = policy.induced_kernel(inst);
    let marg = match inst.mode {
        Mode::Average => stationary_of_kernel(&kernel)?,
        Mode::Discounted => discounted_visitation(&kernel, inst.initial_distribution()?, inst.discount_factor()?)?,
    };
    let pairs = inst.pairs();
    Ok(pairs.iter().map(|(_, (s, a))| marg[s] * policy.probs[s][a]).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleResult {
    pub value: Option<f64>,
    /// Action index per state of the best feasible policy.
    pub choice: Option<Vec<usize>>,
    pub evaluated: usize,
    pub feasible: usize,
    /// Policies skipped because they induce several recurrent classes.
    pub skipped_multichain: Vec<Vec<usize>>,
}

/// Best deterministic stationary policy whose exact shortfalls satisfy
/// every dominance row within [`ORACLE_TOL`].
pub fn brute_force_best_feasible(inst: &MdpInstance, bench: &Benchmark) -> Result<OracleResult> {
    inst.ensure_valid()?;
    let rows = DominanceRows::scalar(inst, bench, Order::Icv)?;
    let pairs = inst.pairs();
    let mut out = OracleResult { value: None, choice: None, evaluated: 0, feasible: 0, skipped_multichain: Vec::new() };
    for policy in enumerate_deterministic_policies(inst)? {
        let choice: Vec<usize> = policy.probs.iter().map(|row| row.iter().position(|&p| p == 1.0).unwrap()).collect();
        out.evaluated += 1;
        let x = match policy_occupation(inst, &policy) {
            Ok(x) => x,
            Err(Error::Multichain { .. }) => {
                out.skipped_multichain.push(choice);
                continue;
            }
            Err(e) => return Err(e),
        };
        if (0..rows.len()).any(|r| rows.margin(r, &x) < -ORACLE_TOL) {
            continue;
        }
        out.feasible += 1;
        let value: f64 = pairs.iter().map(|(k, (s, a))| x[k] * inst.reward_r[s][a]).sum();
        if out.value.is_none_or(|v| value > v) {
            out.value = Some(value);
            out.choice = Some(choice);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{ti1, ti1_discounted, ti2};
    use crate::mdp::Distribution;

    #[test]
    fn constant_chain() {
        let mut inst = ti1();
        inst.actions = vec![vec!["only".into()]];
        inst.transition = vec![vec![vec![1.0]]];
        inst.reward_r = vec![vec![1.0]];
        inst.reward_z = vec![vec![vec![3.0]]];
        let p = Policy::uniform(&inst);
        let trajs = simulate(&inst, &p, &[1.0], 100, 3, 0).unwrap();
        assert!(trajs.iter().all(|t| t.steps.iter().all(|s| s.s == 0 && s.z == 3.0)));
        let est = estimate_average_shortfalls(&trajs, &[5.0]).unwrap();
        assert_eq!(est[0].mean, -2.0);
        assert_eq!(est[0].std_error, 0.0);
        let d = estimate_discounted_shortfalls(&trajs, &[5.0], 0.5, 3.0).unwrap();
        assert!((d[0].mean - (-2.0 * (1.0 - 0.5_f64.powi(100)) / 0.5)).abs() < 1e-12);
    }

    #[test]
    fn swap_chain_alternates() {
        let inst = ti2();
        let p = Policy::uniform(&inst);
        let t = simulate(&inst, &p, &[1.0, 0.0], 1000, 1, 4).unwrap();
        assert!(t[0].steps.iter().enumerate().all(|(i, s)| s.s == i % 2));
        let est = estimate_average_shortfalls(&t, &[5.0]).unwrap();
        assert!((est[0].mean + 2.5).abs() < 1e-12);
        let d = estimate_discounted_shortfalls(&t, &[5.0], 0.5, 0.0).unwrap();
        assert!((d[0].mean + 5.0 / 0.75).abs() < 1e-12);
        assert!(d[0].truncation_bound < 1e-12);
    }

    #[test]
    fn reproducible_paths() {
        let inst = ti2();
        let p = Policy::uniform(&inst);
        let a = simulate_path(&inst, &p, &[0.5, 0.5], 50, 9, 2);
        let b = simulate_path(&inst, &p, &[0.5, 0.5], 50, 9, 2);
        assert_eq!(a, b);
    }

    #[test]
    fn enumeration_counts_and_order() {
        let mut inst = ti2();
        inst.actions = vec![vec!["a".into(), "b".into()]; 2];
        inst.transition = vec![vec![vec![0.5, 0.5]; 2]; 2];
        inst.reward_r = vec![vec![0.0; 2]; 2];
        inst.reward_z = vec![vec![vec![0.0]; 2]; 2];
        let all: Vec<Policy> = enumerate_deterministic_policies(&inst).unwrap().collect();
        assert_eq!(all.len(), 4);
        assert_eq!(all[1].probs, vec![vec![1.0, 0.0], vec![0.0, 1.0]]);

        let mut one = ti1();
        one.actions = vec![vec!["a".into(), "b".into(), "c".into()]];
        one.transition = vec![vec![vec![1.0]; 3]];
        one.reward_r = vec![vec![0.0; 3]];
        one.reward_z = vec![vec![vec![0.0]; 3]];
        assert_eq!(enumerate_deterministic_policies(&one).unwrap().count(), 3);

        let mut big = one.clone();
        big.num_states = 13;
        big.actions = vec![vec!["a".into(), "b".into(), "c".into()]; 13];
        assert!(matches!(enumerate_deterministic_policies(&big), Err(Error::TooManyPolicies { .. })));
    }

    #[test]
    fn oracle_on_ti1() {
        let r = brute_force_best_feasible(&ti1(), &Distribution::point_mass(4.0)).unwrap();
        assert_eq!(r.value, Some(2.0));
        assert_eq!(r.choice, Some(vec![0]));
        let r = brute_force_best_feasible(&ti1(), &Distribution::point_mass(-1e6)).unwrap();
        assert_eq!(r.value, Some(5.0));
        let r = brute_force_best_feasible(&ti1_discounted(0.5), &Distribution::point_mass(8.0)).unwrap();
        assert!((r.value.unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn only_randomized_feasible() {
        let (inst, bench) = crate::fixtures::randomization_required();
        let r = brute_force_best_feasible(&inst, &bench).unwrap();
        assert_eq!(r.evaluated, 2);
        assert_eq!(r.value, None);
        let lp = crate::average::solve_average(&inst, &bench.into()).unwrap();
        assert!(lp.is_optimal());
    }
}
