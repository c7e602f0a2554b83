//! Approximate linear programming: the dual of the occupation-measure LP
//! restricted to `h = sum_j gamma_j h_j` and `u = sum_i alpha_i u_i`, with
//! one constraint per sampled state-action pair.
//!
//! Identical sampled pairs give identical constraints, so the LP carries one
//! row per distinct sampled pair; the sample list itself keeps duplicates.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution as _;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::dominance::{reconstruct_utility, UtilityFunction};
use crate::error::{Error, Result};
use crate::lp::{solve_lp, LpProblem, LpStatus, RowSense, Sense, VarBound};
use crate::mdp::{Benchmark, MdpInstance, Mode, PairIndex};

pub const RANK_TOL: f64 = 1e-10;

/// RNG stream for the training sample.
const TRAIN_STREAM: u64 = 0;
/// RNG stream for the fresh sample used to measure violations.
const TEST_STREAM: u64 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct BasisSet {
    /// `h_bases[j][s]`
    pub h_bases: Vec<Vec<f64>>,
    pub u_bases: Vec<UtilityFunction>,
}

/// JSON form: `{"h": [[...]], "u_lambdas": [[[eta, weight], ...], ...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BasisFile {
    pub h: Vec<Vec<f64>>,
    #[serde(default)]
    pub u_lambdas: Vec<Vec<(f64, f64)>>,
}

impl BasisSet {
    pub fn new(h_bases: Vec<Vec<f64>>, u_bases: Vec<UtilityFunction>, num_states: usize) -> Result<Self> {
        for (j, h) in h_bases.iter().enumerate() {
            if h.len() != num_states {
                return Err(Error::Dimension(format!("h basis {j} has {} entries, expected {num_states}", h.len())));
            }
            if h.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument(format!("h basis {j} has a non-finite entry")));
            }
        }
        let rank = matrix_rank(&h_bases, RANK_TOL);
        if rank < h_bases.len() {
            return Err(Error::InvalidArgument(format!(
                "h bases are linearly dependent (rank {rank} of {})",
                h_bases.len()
            )));
        }
        Ok(BasisSet { h_bases, u_bases })
    }

    pub fn from_file(file: &BasisFile, num_states: usize) -> Result<Self> {
        let u = file.u_lambdas.iter().map(|l| reconstruct_utility(l)).collect::<Result<Vec<_>>>()?;
        Self::new(file.h.clone(), u, num_states)
    }

    /// Indicator per state and one kink `(xi - eta)_-` per benchmark support point.
    pub fn complete(num_states: usize, bench: &Benchmark) -> Self {
        let h = (0..num_states)
            .map(|s| (0..num_states).map(|j| if j == s { 1.0 } else { 0.0 }).collect())
            .collect();
        let u = bench.support().iter().map(|&eta| reconstruct_utility(&[(eta, 1.0)]).unwrap()).collect();
        BasisSet { h_bases: h, u_bases: u }
    }

    /// ALP variable count: `gamma`, `beta` (average only) and `alpha`.
    pub fn num_variables(&self, mode: Mode) -> usize {
        self.h_bases.len() + self.u_bases.len() + usize::from(mode == Mode::Average)
    }

    fn h_value(&self, gamma: &[f64], s: usize) -> f64 {
        self.h_bases.iter().zip(gamma).map(|(h, g)| g * h[s]).sum()
    }
}

/// Rank by Gaussian elimination with full pivoting; pivots at or below
/// `tol * max|entry|` count as zero.
fn matrix_rank(rows: &[Vec<f64>], tol: f64) -> usize {
    let mut a: Vec<Vec<f64>> = rows.to_vec();
    let m = a.len();
    let n = a.first().map_or(0, |r| r.len());
    let scale = a.iter().flatten().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    if scale == 0.0 {
        return 0;
    }
    let mut rank = 0;
    let mut free_cols: Vec<usize> = (0..n).collect();
    while rank < m && !free_cols.is_empty() {
        let mut best = (0.0, rank, 0);
        for (i, row) in a.iter().enumerate().skip(rank) {
            for (ci, &c) in free_cols.iter().enumerate() {
                if row[c].abs() > best.0 {
                    best = (row[c].abs(), i, ci);
                }
            }
        }
        if best.0 <= tol * scale {
            break;
        }
        a.swap(rank, best.1);
        let col = free_cols.swap_remove(best.2);
        let pivot = a[rank].clone();
        for row in a.iter_mut().skip(rank + 1) {
            let f = row[col] / pivot[col];
            if f != 0.0 {
                for (v, p) in row.iter_mut().zip(&pivot) {
                    *v -= f * p;
                }
            }
        }
        rank += 1;
    }
    rank
}

/// `ceil((4/eps) (k ln(12/eps) + ln(2/delta)))`.
pub fn sample_count(epsilon: f64, delta: f64, k: usize) -> Result<usize> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidArgument(format!("epsilon = {epsilon} outside (0,1)")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidArgument(format!("delta = {delta} outside (0,1)")));
    }
    if k == 0 {
        return Err(Error::InvalidArgument("k must be positive".into()));
    }
    let m = (4.0 / epsilon) * (k as f64 * (12.0 / epsilon).ln() + (2.0 / delta).ln());
    Ok(m.ceil() as usize)
}

/// Sampling distribution over the pairs, indexed like [`PairIndex`].
#[derive(Debug, Clone, PartialEq)]
pub enum Psi {
    Uniform,
    Weights(Vec<f64>),
}

fn draw_pairs<R: Rng>(rng: &mut R, pairs: &PairIndex, psi: &Psi, m: usize) -> Result<Vec<(usize, usize)>> {
    let idx: Vec<usize> = match psi {
        Psi::Uniform => (0..m).map(|_| rng.random_range(0..pairs.len())).collect(),
        Psi::Weights(w) => {
            if w.len() != pairs.len() {
                return Err(Error::Dimension(format!("psi has {} weights for {} pairs", w.len(), pairs.len())));
            }
            let dist = WeightedIndex::new(w).map_err(|e| Error::InvalidDistribution(format!("psi: {e}")))?;
            (0..m).map(|_| dist.sample(rng)).collect()
        }
    };
    Ok(idx.into_iter().map(|k| pairs.pair(k)).collect())
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// `m` i.i.d. pairs drawn from `psi`, duplicates kept.
pub fn sample_constraints(inst: &MdpInstance, psi: &Psi, m: usize, seed: u64) -> Result<Vec<(usize, usize)>> {
    draw_pairs(&mut stream_rng(seed, TRAIN_STREAM), &inst.pairs(), psi, m)
}

/// Every pair once.
pub fn all_pairs(inst: &MdpInstance) -> Vec<(usize, usize)> {
    inst.pairs().iter().map(|(_, p)| p).collect()
}

/// Column layout of the ALP.
struct AlpLayout {
    num_h: usize,
    beta: Option<usize>,
    alpha_start: usize,
    num_u: usize,
}

/// Coefficients of a pair's constraint as `lhs(vars) >= r(s,a)`:
/// `beta + sum gamma_j (h_j(s) - delta P h_j) - sum alpha_i u_i(z)`.
fn constraint_row(inst: &MdpInstance, bases: &BasisSet, layout: &AlpLayout, delta: f64, s: usize, a: usize) -> Vec<f64> {
    let mut row = vec![0.0; layout.alpha_start + layout.num_u];
    for (j, h) in bases.h_bases.iter().enumerate() {
        let ph: f64 = inst.transition[s][a].iter().zip(h).map(|(p, v)| p * v).sum();
        row[j] = h[s] - delta * ph;
    }
    if let Some(b) = layout.beta {
        row[b] = 1.0;
    }
    let z = inst.z(s, a);
    for (i, u) in bases.u_bases.iter().enumerate() {
        row[layout.alpha_start + i] = -u.eval(z);
    }
    row
}

fn layout_and_delta(inst: &MdpInstance, bases: &BasisSet) -> Result<(AlpLayout, f64)> {
    let num_h = bases.h_bases.len();
    let (beta, delta) = match inst.mode {
        Mode::Average => (Some(num_h), 1.0),
        Mode::Discounted => (None, inst.discount_factor()?),
    };
    let alpha_start = num_h + usize::from(beta.is_some());
    Ok((AlpLayout { num_h, beta, alpha_start, num_u: bases.u_bases.len() }, delta))
}

fn dedup(samples: &[(usize, usize)]) -> Vec<((usize, usize), usize)> {
    let mut sorted = samples.to_vec();
    sorted.sort_unstable();
    let mut out: Vec<((usize, usize), usize)> = Vec::new();
    for p in sorted {
        match out.last_mut() {
            Some((q, c)) if *q == p => *c += 1,
            _ => out.push((p, 1)),
        }
    }
    out
}

/// Builds the ALP over the distinct pairs in `samples`.
pub fn build_alp(inst: &MdpInstance, bench: &Benchmark, bases: &BasisSet, samples: &[(usize, usize)]) -> Result<LpProblem> {
    inst.ensure_valid()?;
    if samples.is_empty() {
        return Err(Error::EmptySample);
    }
    if inst.z_dim() != 1 {
        return Err(Error::Dimension("approximate LP supports scalar z only".into()));
    }
    for h in &bases.h_bases {
        if h.len() != inst.num_states {
            return Err(Error::Dimension(format!("h basis has {} entries, expected {}", h.len(), inst.num_states)));
        }
    }
    let (layout, delta) = layout_and_delta(inst, bases)?;
    let mut lp = LpProblem::new(Sense::Min);
    match inst.mode {
        Mode::Average => {
            for j in 0..layout.num_h {
                lp.add_column(format!("gamma[{j}]"), 0.0, VarBound::Free);
            }
            lp.add_column("beta", 1.0, VarBound::Free);
        }
        Mode::Discounted => {
            let nu = inst.initial_distribution()?;
            for (j, h) in bases.h_bases.iter().enumerate() {
                let c: f64 = nu.iter().zip(h).map(|(a, b)| a * b).sum();
                lp.add_column(format!("gamma[{j}]"), c, VarBound::Free);
            }
        }
    }
    for (i, u) in bases.u_bases.iter().enumerate() {
        lp.add_column(format!("alpha[{i}]"), -u.expect(bench), VarBound::NonNegative);
    }
    for ((s, a), count) in dedup(samples) {
        if s >= inst.num_states || a >= inst.num_actions(s) {
            return Err(Error::InvalidArgument(format!("sampled pair ({s},{a}) is not in the instance")));
        }
        let row = constraint_row(inst, bases, &layout, delta, s, a);
        lp.add_dense_row(format!("pair[{s},{a}]x{count}"), row, RowSense::Ge, inst.reward_r[s][a]);
    }
    Ok(lp)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlpReport {
    pub mode: Mode,
    pub status: LpStatus,
    pub objective: f64,
    pub gamma: Vec<f64>,
    /// Average mode only.
    pub beta: Option<f64>,
    pub alpha: Vec<f64>,
    /// `sum_i alpha_i u_i`
    pub utility: Option<UtilityFunction>,
    pub k: usize,
    pub num_samples: usize,
    pub distinct_samples: usize,
    /// Share of a fresh sample of `10 m` pairs whose constraint is violated.
    pub violation_fraction: Option<f64>,
    pub test_samples: usize,
    /// `alpha` is restricted to be nonnegative, which keeps the utility
    /// increasing and concave.
    pub alpha_nonnegative: bool,
    pub lp_iterations: usize,
}

impl AlpReport {
    /// `h(s) = sum_j gamma_j h_j(s)` (or `v` in discounted mode).
    pub fn values(&self, bases: &BasisSet, num_states: usize) -> Vec<f64> {
        (0..num_states).map(|s| bases.h_value(&self.gamma, s)).collect()
    }
}

/// Solves the ALP on fixed samples; violations are measured on `test`.
pub fn solve_alp_on(
    inst: &MdpInstance,
    bench: &Benchmark,
    bases: &BasisSet,
    samples: &[(usize, usize)],
    test: &[(usize, usize)],
) -> Result<AlpReport> {
    let lp = build_alp(inst, bench, bases, samples)?;
    let sol = solve_lp(&lp)?;
    let (layout, delta) = layout_and_delta(inst, bases)?;
    let mut report = AlpReport {
        mode: inst.mode,
        status: sol.status,
        objective: sol.objective,
        gamma: Vec::new(),
        beta: None,
        alpha: Vec::new(),
        utility: None,
        k: bases.num_variables(inst.mode),
        num_samples: samples.len(),
        distinct_samples: lp.num_rows(),
        violation_fraction: None,
        test_samples: test.len(),
        alpha_nonnegative: true,
        lp_iterations: sol.iterations,
    };
    if sol.status != LpStatus::Optimal {
        return Ok(report);
    }
    report.gamma = sol.x[..layout.num_h].to_vec();
    report.beta = layout.beta.map(|b| sol.x[b]);
    report.alpha = sol.x[layout.alpha_start..].iter().map(|v| v.max(0.0)).collect();
    report.utility = Some(UtilityFunction::combine(report.alpha.iter().copied().zip(&bases.u_bases))?);
    if !test.is_empty() {
        let scale = 1.0 + sol.x.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let violated = test
            .iter()
            .filter(|&&(s, a)| {
                let row = constraint_row(inst, bases, &layout, delta, s, a);
                let lhs: f64 = row.iter().zip(&sol.x).map(|(c, v)| c * v).sum();
                lhs < inst.reward_r[s][a] - 1e-9 * scale
            })
            .count();
        report.violation_fraction = Some(violated as f64 / test.len() as f64);
    }
    Ok(report)
}

/// Draws `sample_count(epsilon, delta, k)` pairs from `psi`, solves, and
/// measures violations on a fresh sample ten times larger (separate RNG
/// stream of the same seed).
pub fn solve_alp(
    inst: &MdpInstance,
    bench: &Benchmark,
    bases: &BasisSet,
    epsilon: f64,
    delta: f64,
    psi: &Psi,
    seed: u64,
) -> Result<AlpReport> {
    let k = bases.num_variables(inst.mode);
    let m = sample_count(epsilon, delta, k)?;
    let pairs = inst.pairs();
    let train = draw_pairs(&mut stream_rng(seed, TRAIN_STREAM), &pairs, psi, m)?;
    let test = draw_pairs(&mut stream_rng(seed, TEST_STREAM), &pairs, psi, 10 * m)?;
    solve_alp_on(inst, bench, bases, &train, &test)
}
