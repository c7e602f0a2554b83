//! Discretized dynamic portfolio instances.
//!
//! Each asset's price follows its own finite Markov chain; the joint price
//! profile moves with the product kernel. Holdings are share vectors on the
//! simplex grid of resolution `d` (multiples of `1/d` summing to one).
//! Rebalancing from `x` to a grid point `x'` is allowed when it is
//! wealth-neutral at current prices, `|<p, x' - x>| <= 1e-9`, and costs
//! `sum (x' - x)^2`, entered as a negative reward. Holding is always allowed.
//!
//! The return `(<p_t, x_t> - <p_{t-1}, x_{t-1}>) / <p_{t-1}, x_{t-1}>`
//! needs two consecutive price profiles, so states are
//! `(previous profile, current profile, holdings)`. Since rebalancing is
//! wealth-neutral, the return realized on entering a state equals
//! `(<p, x> - <q, x>) / <q, x>` for its own holdings `x`, which makes `z` a
//! function of the state. The period `t -> t+1` return is therefore
//! weighted by `delta^(t+1)`, and the first period contributes `z = 0`
//! because the process starts with equal previous and current profiles
//! (uniformly over profiles and holdings).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{Distribution, MdpInstance, Mode, PROB_TOL};

pub const MAX_STATES: usize = 100_000;
pub const BUDGET_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceChain {
    pub levels: Vec<f64>,
    pub transition: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSpec {
    pub support: Vec<f64>,
    pub probs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortfolioConfig {
    pub assets: Vec<PriceChain>,
    /// Grid resolution `d`.
    pub resolution: usize,
    pub discount: f64,
    /// Benchmark for the discounted sum of per-period return shortfalls.
    #[serde(default)]
    pub benchmark: Option<BenchmarkSpec>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PortfolioInstance {
    pub instance: MdpInstance,
    pub benchmark: Option<Distribution>,
    /// `#profiles * #grid points`, before pairing with the previous profile.
    pub base_states: usize,
    /// `(previous profile, current profile, grid point)` per state.
    pub states: Vec<(usize, usize, usize)>,
    pub profiles: Vec<Vec<f64>>,
    pub grid: Vec<Vec<f64>>,
}

impl PortfolioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.assets.is_empty() {
            return Err(Error::Portfolio("no assets".into()));
        }
        if self.resolution == 0 {
            return Err(Error::Portfolio("resolution must be at least 1".into()));
        }
        if !(self.discount > 0.0 && self.discount < 1.0) {
            return Err(Error::Portfolio(format!("discount {} outside (0,1)", self.discount)));
        }
        for (i, c) in self.assets.iter().enumerate() {
            if c.levels.is_empty() || c.levels.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
                return Err(Error::Portfolio(format!("asset {i}: price levels must be positive and finite")));
            }
            let l = c.levels.len();
            if c.transition.len() != l || c.transition.iter().any(|row| row.len() != l) {
                return Err(Error::Portfolio(format!("asset {i}: transition must be {l}x{l}")));
            }
            for (k, row) in c.transition.iter().enumerate() {
                if row.iter().any(|p| !(p.is_finite() && *p >= 0.0)) || (row.iter().sum::<f64>() - 1.0).abs() > PROB_TOL {
                    return Err(Error::Portfolio(format!("asset {i}: transition row {k} is not stochastic")));
                }
            }
        }
        Ok(())
    }

    pub fn num_profiles(&self) -> usize {
        self.assets.iter().map(|c| c.levels.len()).product()
    }

    pub fn grid(&self) -> Vec<Vec<usize>> {
        compositions(self.resolution, self.assets.len())
    }

    /// `#profiles * #grid points`.
    pub fn base_state_count(&self) -> usize {
        self.num_profiles() * self.grid().len()
    }
}

/// Nonnegative integer vectors of length `n` summing to `d`, lexicographically
/// descending in the first coordinate.
fn compositions(d: usize, n: usize) -> Vec<Vec<usize>> {
    if n == 1 {
        return vec![vec![d]];
    }
    let mut out = Vec::new();
    for first in (0..=d).rev() {
        for mut rest in compositions(d - first, n - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

/// Mixed-radix decode of a price profile index into level indices.
fn profile_levels(cfg: &PortfolioConfig, mut idx: usize) -> Vec<usize> {
    let mut out = vec![0; cfg.assets.len()];
    for i in (0..cfg.assets.len()).rev() {
        let l = cfg.assets[i].levels.len();
        out[i] = idx % l;
        idx /= l;
    }
    out
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn build_portfolio_instance(cfg: &PortfolioConfig) -> Result<PortfolioInstance> {
    cfg.validate()?;
    let n_prof = cfg.num_profiles();
    let grid_int = cfg.grid();
    let d = cfg.resolution as f64;
    let grid: Vec<Vec<f64>> = grid_int.iter().map(|k| k.iter().map(|&v| v as f64 / d).collect()).collect();
    let base_states = n_prof * grid.len();
    if base_states > MAX_STATES {
        return Err(Error::Portfolio(format!("{base_states} base states exceed the limit {MAX_STATES}")));
    }

    let levels: Vec<Vec<usize>> = (0..n_prof).map(|q| profile_levels(cfg, q)).collect();
    let profiles: Vec<Vec<f64>> = levels
        .iter()
        .map(|l| l.iter().enumerate().map(|(i, &k)| cfg.assets[i].levels[k]).collect())
        .collect();
    let kernel: Vec<Vec<f64>> = (0..n_prof)
        .map(|q| {
            (0..n_prof)
                .map(|p| (0..cfg.assets.len()).map(|i| cfg.assets[i].transition[levels[q][i]][levels[p][i]]).product())
                .collect()
        })
        .collect();

    // profile pairs (q, p) reachable in one step, plus the diagonal for the start
    let pairs: Vec<(usize, usize)> = (0..n_prof)
        .flat_map(|q| (0..n_prof).map(move |p| (q, p)))
        .filter(|&(q, p)| q == p || kernel[q][p] > 0.0)
        .collect();
    let num_states = pairs.len() * grid.len();
    if num_states > MAX_STATES {
        return Err(Error::Portfolio(format!("{num_states} states exceed the limit {MAX_STATES}")));
    }
    let mut index = vec![vec![usize::MAX; n_prof]; n_prof];
    for (i, &(q, p)) in pairs.iter().enumerate() {
        index[q][p] = i;
    }
    let state_of = |q: usize, p: usize, g: usize| index[q][p] * grid.len() + g;

    let mut states = Vec::with_capacity(num_states);
    let mut actions = Vec::with_capacity(num_states);
    let mut transition = Vec::with_capacity(num_states);
    let mut reward_r = Vec::with_capacity(num_states);
    let mut reward_z = Vec::with_capacity(num_states);
    for &(q, p) in &pairs {
        for (g, x) in grid.iter().enumerate() {
            states.push((q, p, g));
            let z = (dot(&profiles[p], x) - dot(&profiles[q], x)) / dot(&profiles[q], x);
            let mut names = Vec::new();
            let mut rows = Vec::new();
            let mut costs = Vec::new();
            for (g2, x2) in grid.iter().enumerate() {
                let a: Vec<f64> = x2.iter().zip(x).map(|(u, v)| u - v).collect();
                if dot(&profiles[p], &a).abs() > BUDGET_TOL {
                    continue;
                }
                names.push(if g2 == g { "hold".to_string() } else { format!("to{:?}", grid_int[g2]) });
                costs.push(-a.iter().map(|v| v * v).sum::<f64>());
                let mut row = vec![0.0; num_states];
                for (p2, &w) in kernel[p].iter().enumerate() {
                    if w > 0.0 {
                        row[state_of(p, p2, g2)] += w;
                    }
                }
                rows.push(row);
            }
            let k = names.len();
            actions.push(names);
            transition.push(rows);
            reward_r.push(costs);
            reward_z.push(vec![vec![z]; k]);
        }
    }
    let starts: Vec<usize> = (0..num_states).filter(|&s| states[s].0 == states[s].1).collect();
    let mut initial = vec![0.0; num_states];
    for &s in &starts {
        initial[s] = 1.0 / starts.len() as f64;
    }
    let instance = MdpInstance {
        num_states,
        actions,
        transition,
        reward_r,
        reward_z,
        mode: Mode::Discounted,
        discount: Some(cfg.discount),
        initial: Some(initial),
    };
    instance.ensure_valid()?;
    let benchmark = cfg.benchmark.as_ref().map(|b| Distribution::new(b.support.clone(), b.probs.clone())).transpose()?;
    Ok(PortfolioInstance { instance, benchmark, base_states, states, profiles, grid })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_by_two() -> PortfolioConfig {
        let chain = PriceChain { levels: vec![1.0, 2.0], transition: vec![vec![0.7, 0.3], vec![0.4, 0.6]] };
        PortfolioConfig { assets: vec![chain.clone(), chain], resolution: 2, discount: 0.9, benchmark: None }
    }

    #[test]
    fn grid_points() {
        let cfg = PortfolioConfig {
            assets: vec![PriceChain { levels: vec![1.0], transition: vec![vec![1.0]] }; 2],
            resolution: 2,
            discount: 0.9,
            benchmark: None,
        };
        assert_eq!(cfg.grid(), vec![vec![2, 0], vec![1, 1], vec![0, 2]]);
        let out = build_portfolio_instance(&cfg).unwrap();
        assert_eq!(out.instance.num_states, 3);
        // equal prices: every target is wealth-neutral
        assert!(out.instance.actions.iter().all(|a| a.len() == 3));
        assert!(out.instance.reward_z.iter().flatten().all(|z| z[0] == 0.0));
    }

    #[test]
    fn counts_for_two_levels() {
        let cfg = two_by_two();
        assert_eq!(cfg.base_state_count(), 12);
        let out = build_portfolio_instance(&cfg).unwrap();
        assert_eq!(out.base_states, 12);
        assert_eq!(out.instance.num_states, 48);
        assert!(out.instance.validate().is_empty());
        for (s, names) in out.instance.actions.iter().enumerate() {
            let hold = names.iter().position(|n| n == "hold").unwrap();
            assert_eq!(out.instance.reward_r[s][hold], 0.0);
            for (a, r) in out.instance.reward_r[s].iter().enumerate() {
                if a != hold {
                    assert!(*r < 0.0);
                }
            }
        }
    }

    #[test]
    fn return_rate_on_state() {
        let out = build_portfolio_instance(&two_by_two()).unwrap();
        // previous (1,1), current (2,1), holdings (1/2,1/2): wealth 1 -> 1.5
        let s = out
            .states
            .iter()
            .position(|&(q, p, g)| out.profiles[q] == [1.0, 1.0] && out.profiles[p] == [2.0, 1.0] && out.grid[g] == [0.5, 0.5])
            .unwrap();
        assert!((out.instance.z(s, 0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_config() {
        let mut cfg = two_by_two();
        cfg.assets[0].transition[0] = vec![0.5, 0.4];
        assert!(build_portfolio_instance(&cfg).is_err());
        let mut cfg = two_by_two();
        cfg.resolution = 0;
        assert!(build_portfolio_instance(&cfg).is_err());
    }
}
