//! Occupation-measure LPs shared by the average and discounted solvers.
//!
//! Primal variables are `x(s,a) >= 0`, one per feasible pair. Rows are the
//! per-state balance equations, the normalization (average mode only), and
//! one dominance row per benchmark support point (or generator parameter).
//! Row shadow prices give the cost-to-go `h` (or value `v`), the gain `g`,
//! and the utility multipliers `lambda`.

use crate::chain::{recurrent_classes, stationary_of_kernel};
use crate::dominance::{benchmark_curve, family_rows, reconstruct_utility, shortfall_minus, shortfall_plus, GeneratorFamily, UtilityFunction};
use crate::error::{Error, Result};
use crate::lp::{solve_lp, LpProblem, LpSolution, LpStatus, RowSense, Sense, VarBound};
use crate::mdp::{Benchmark, MdpInstance, Mode, PairIndex, Policy};

/// Which order the dominance rows encode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Order {
    /// Reward maximization, `E_x[(z-eta)_-] >= E[(Y-eta)_-]`.
    Icv,
    /// Cost minimization, `E_x[(z-eta)_+] <= E[(Y-eta)_+]`.
    Icx,
}

impl Order {
    fn sign(self) -> f64 {
        match self {
            Order::Icv => 1.0,
            Order::Icx => -1.0,
        }
    }
}

/// Benchmark side of a dominance-constrained problem.
#[derive(Debug, Clone, PartialEq)]
pub enum DominanceSpec {
    Scalar(Benchmark),
    Family(GeneratorFamily),
}

impl From<Benchmark> for DominanceSpec {
    fn from(b: Benchmark) -> Self {
        DominanceSpec::Scalar(b)
    }
}

impl From<GeneratorFamily> for DominanceSpec {
    fn from(f: GeneratorFamily) -> Self {
        DominanceSpec::Family(f)
    }
}

/// Identity of a dominance row.
#[derive(Debug, Clone, PartialEq)]
pub struct RowKey {
    pub eta: f64,
    /// Weight vector of the generator parameter; `None` for scalar rows.
    pub weights: Option<Vec<f64>>,
}

/// Dominance rows evaluated on an instance: `coeffs[row][pair]`, `rhs[row]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DominanceRows {
    pub order: Order,
    pub keys: Vec<RowKey>,
    pub coeffs: Vec<Vec<f64>>,
    pub rhs: Vec<f64>,
}

impl DominanceRows {
    pub fn empty(order: Order) -> Self {
        DominanceRows { order, keys: Vec::new(), coeffs: Vec::new(), rhs: Vec::new() }
    }

    pub fn new(inst: &MdpInstance, spec: &DominanceSpec, order: Order) -> Result<Self> {
        match spec {
            DominanceSpec::Scalar(b) => Self::scalar(inst, b, order),
            DominanceSpec::Family(f) => {
                if order != Order::Icv {
                    return Err(Error::InvalidArgument("generator families support the increasing concave order only".into()));
                }
                Self::family(inst, f)
            }
        }
    }

    pub fn scalar(inst: &MdpInstance, bench: &Benchmark, order: Order) -> Result<Self> {
        if inst.z_dim() != 1 {
            return Err(Error::Dimension(format!(
                "scalar benchmark with {}-dimensional z; supply a generator family",
                inst.z_dim()
            )));
        }
        let pairs = inst.pairs();
        let grid = bench.support();
        let (coeffs, rhs) = match order {
            Order::Icv => {
                let curve = benchmark_curve(bench, grid)?;
                let coeffs = grid
                    .iter()
                    .map(|&eta| pairs.iter().map(|(_, (s, a))| shortfall_minus(inst.z(s, a), eta)).collect())
                    .collect();
                (coeffs, curve.curve)
            }
            Order::Icx => {
                let coeffs = grid
                    .iter()
                    .map(|&eta| pairs.iter().map(|(_, (s, a))| shortfall_plus(inst.z(s, a), eta)).collect())
                    .collect();
                let rhs = grid.iter().map(|&eta| bench.expect(|y| shortfall_plus(y, eta))).collect();
                (coeffs, rhs)
            }
        };
        let keys = grid.iter().map(|&eta| RowKey { eta, weights: None }).collect();
        Ok(DominanceRows { order, keys, coeffs, rhs })
    }

    pub fn family(inst: &MdpInstance, fam: &GeneratorFamily) -> Result<Self> {
        let pairs = inst.pairs();
        let z: Vec<Vec<f64>> = pairs.iter().map(|(_, (s, a))| inst.reward_z[s][a].clone()).collect();
        let rows = family_rows(fam, &z)?;
        let keys = fam.params.iter().map(|p| RowKey { eta: p.eta, weights: Some(p.weights.clone()) }).collect();
        Ok(DominanceRows { order: Order::Icv, keys, coeffs: rows.coeffs, rhs: rows.rhs })
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    /// `sum_k x_k coeffs[row][k]`
    pub fn row_value(&self, row: usize, x: &[f64]) -> f64 {
        self.coeffs[row].iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Signed margin, nonnegative when the row is satisfied.
    pub fn margin(&self, row: usize, x: &[f64]) -> f64 {
        self.order.sign() * (self.row_value(row, x) - self.rhs[row])
    }

    /// `sum_row lambda_row coeffs[row][pair]`: the utility (or convex cost)
    /// term evaluated at the pair's secondary reward.
    pub fn multiplier_term(&self, lambda: &[f64], pair: usize) -> f64 {
        lambda.iter().zip(&self.coeffs).map(|(l, c)| l * c[pair]).sum()
    }

    fn scalar_utility(&self, lambda: &[f64]) -> Option<UtilityFunction> {
        if self.order != Order::Icv || self.keys.iter().any(|k| k.weights.is_some()) {
            return None;
        }
        let pairs: Vec<(f64, f64)> = self.keys.iter().zip(lambda).map(|(k, &l)| (k.eta, l)).collect();
        reconstruct_utility(&pairs).ok()
    }
}

/// `x(s,a)` over the dense pair index.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupationMeasure {
    pub mode: Mode,
    pub pairs: PairIndex,
    pub values: Vec<f64>,
}

impl OccupationMeasure {
    pub fn total_mass(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn state_marginal(&self, num_states: usize) -> Vec<f64> {
        (0..num_states).map(|s| self.values[self.pairs.state_range(s)].iter().sum()).collect()
    }

    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.values[self.pairs.index(s, a)]
    }

    /// Largest violation of nonnegativity, normalization (average mode) and
    /// the balance equations (average mode; discounted needs `nu`, `delta`).
    pub fn balance_residual(&self, inst: &MdpInstance) -> f64 {
        let n = inst.num_states;
        let delta = if self.mode == Mode::Discounted { inst.discount.unwrap_or(0.0) } else { 1.0 };
        let mut inflow = vec![0.0; n];
        for (k, (s, a)) in self.pairs.iter() {
            for (j, &p) in inst.transition[s][a].iter().enumerate() {
                inflow[j] += delta * p * self.values[k];
            }
        }
        let marg = self.state_marginal(n);
        let mut worst = self.values.iter().fold(0.0_f64, |w, v| w.max(-v));
        for j in 0..n {
            let rhs = match self.mode {
                Mode::Average => 0.0,
                Mode::Discounted => inst.initial.as_ref().map_or(0.0, |nu| nu[j]),
            };
            worst = worst.max((marg[j] - inflow[j] - rhs).abs());
        }
        if self.mode == Mode::Average {
            worst = worst.max((self.total_mass() - 1.0).abs());
        }
        worst
    }
}

/// Disintegrates `x` into a stationary policy: `phi(a|s) = x(s,a) / sum_a x(s,a)`
/// on states with marginal above `1e-12` after normalizing `x` to unit mass,
/// uniform over `A(s)` elsewhere.
pub fn extract_policy(x: &OccupationMeasure, num_states: usize) -> Policy {
    let mass = x.total_mass();
    let scale = if mass > 0.0 { 1.0 / mass } else { 1.0 };
    let probs = (0..num_states)
        .map(|s| {
            let row: Vec<f64> = x.values[x.pairs.state_range(s)].iter().map(|v| v.max(0.0) * scale).collect();
            let m: f64 = row.iter().sum();
            if m > 1e-12 {
                row.iter().map(|v| v / m).collect()
            } else {
                vec![1.0 / row.len() as f64; row.len()]
            }
        })
        .collect();
    Policy { probs }
}

/// Dual of the average-reward problem.
#[derive(Debug, Clone, PartialEq)]
pub struct DualSolution {
    pub g: f64,
    pub h: Vec<f64>,
    pub lambda: Vec<(RowKey, f64)>,
    pub utility: Option<UtilityFunction>,
}

/// Dual of the discounted problem.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscountedDual {
    pub v: Vec<f64>,
    pub lambda: Vec<(RowKey, f64)>,
    pub utility: Option<UtilityFunction>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Dual {
    Average(DualSolution),
    Discounted(DiscountedDual),
}

impl Dual {
    pub fn lambda(&self) -> &[(RowKey, f64)] {
        match self {
            Dual::Average(d) => &d.lambda,
            Dual::Discounted(d) => &d.lambda,
        }
    }

    /// `h` in average mode, `v` in discounted mode.
    pub fn values(&self) -> &[f64] {
        match self {
            Dual::Average(d) => &d.h,
            Dual::Discounted(d) => &d.v,
        }
    }

    pub fn utility(&self) -> Option<&UtilityFunction> {
        match self {
            Dual::Average(d) => d.utility.as_ref(),
            Dual::Discounted(d) => d.utility.as_ref(),
        }
    }
}

/// Complementary slackness products at an optimum.
#[derive(Debug, Clone, PartialEq)]
pub struct SlacknessSummary {
    /// `|lambda(eta) * (row value - rhs)|` per dominance row.
    pub dominance: Vec<f64>,
    /// `|x(s,a) * reduced cost(s,a)|` per pair.
    pub pairs: Vec<f64>,
    pub max_dominance: f64,
    pub max_pair: f64,
    pub scale: f64,
}

impl SlacknessSummary {
    pub fn within(&self, tol: f64) -> bool {
        self.max_dominance <= tol * self.scale && self.max_pair <= tol * self.scale
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateResidual {
    pub state: usize,
    pub marginal: f64,
    pub residual: f64,
    /// The equation must hold at this state (positive marginal).
    pub required: bool,
}

/// Phase-1 certificate of an infeasible problem.
#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub rows: Vec<(String, f64)>,
    /// Dominance rows carrying nonzero weight in the certificate.
    pub binding: Vec<RowKey>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub mode: Mode,
    pub order: Order,
    pub status: LpStatus,
    pub objective: f64,
    pub dual_objective: f64,
    pub gap: f64,
    pub occupation: Option<OccupationMeasure>,
    pub dual: Option<Dual>,
    /// `r(s,a) + sum lambda coeff(s,a)` per pair.
    pub adjusted_reward: Vec<f64>,
    /// Dual slack per pair, nonnegative when dual feasible.
    pub reduced_cost: Vec<f64>,
    pub dominance_margins: Vec<(RowKey, f64)>,
    pub slackness: Option<SlacknessSummary>,
    pub optimality_residuals: Vec<StateResidual>,
    pub policy: Option<Policy>,
    pub certificate: Option<Certificate>,
    pub unbounded_ray: Option<Vec<f64>>,
    /// Recurrent classes of the extracted policy when there is more than one.
    pub multichain: Option<Vec<Vec<usize>>>,
    /// Factor applied to the benchmark support before solving, if any.
    pub benchmark_scale: Option<f64>,
    pub lp_iterations: usize,
}

impl SolveReport {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }

    pub fn scale(&self) -> f64 {
        let rho = self.adjusted_reward.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        let h = self.dual.as_ref().map_or(0.0, |d| d.values().iter().fold(0.0_f64, |a, v| a.max(v.abs())));
        1.0 + rho + h
    }

    /// Largest violation of dual feasibility over the pairs.
    pub fn dual_infeasibility(&self) -> f64 {
        self.reduced_cost.iter().fold(0.0_f64, |a, v| a.max(-v))
    }

    pub fn min_margin(&self) -> f64 {
        self.dominance_margins.iter().map(|m| m.1).fold(f64::INFINITY, f64::min)
    }
}

pub(crate) struct Layout {
    pub n_states: usize,
    pub normalization: Option<usize>,
    pub dominance_start: usize,
}

fn column_label(inst: &MdpInstance, s: usize, a: usize) -> String {
    format!("x[{s},{a}:{}]", inst.actions[s][a])
}

pub(crate) fn build_primal(inst: &MdpInstance, rows: &DominanceRows, mode: Mode) -> Result<(LpProblem, Layout)> {
    inst.ensure_valid()?;
    if inst.mode != mode {
        return Err(Error::ModeMismatch { expected: mode, found: inst.mode });
    }
    let pairs = inst.pairs();
    let n = inst.num_states;
    let sense = match rows.order {
        Order::Icv => Sense::Max,
        Order::Icx => Sense::Min,
    };
    let mut lp = LpProblem::new(sense);
    for (_, (s, a)) in pairs.iter() {
        lp.add_column(column_label(inst, s, a), inst.reward_r[s][a], VarBound::NonNegative);
    }

    let delta = match mode {
        Mode::Average => 1.0,
        Mode::Discounted => inst.discount_factor()?,
    };
    let nu = match mode {
        Mode::Average => None,
        Mode::Discounted => Some(inst.initial_distribution()?),
    };
    let mut balance = vec![vec![0.0; pairs.len()]; n];
    for (k, (s, a)) in pairs.iter() {
        balance[s][k] += 1.0;
        for (j, &p) in inst.transition[s][a].iter().enumerate() {
            balance[j][k] -= delta * p;
        }
    }
    for (j, row) in balance.into_iter().enumerate() {
        lp.add_dense_row(format!("balance[{j}]"), row, RowSense::Eq, nu.map_or(0.0, |nu| nu[j]));
    }
    let normalization = match mode {
        Mode::Average => Some(lp.add_dense_row("normalization", vec![1.0; pairs.len()], RowSense::Eq, 1.0)),
        Mode::Discounted => None,
    };
    let dominance_start = lp.num_rows();
    let sense = match rows.order {
        Order::Icv => RowSense::Ge,
        Order::Icx => RowSense::Le,
    };
    for (r, key) in rows.keys.iter().enumerate() {
        let label = match &key.weights {
            None => format!("dominance[{r}]:eta={}", key.eta),
            Some(w) => format!("dominance[{r}]:w={w:?},eta={}", key.eta),
        };
        lp.add_dense_row(label, rows.coeffs[r].clone(), sense, rows.rhs[r]);
    }
    Ok((lp, Layout { n_states: n, normalization, dominance_start }))
}

pub(crate) fn solve_primal(inst: &MdpInstance, rows: &DominanceRows, mode: Mode) -> Result<SolveReport> {
    let (lp, layout) = build_primal(inst, rows, mode)?;
    let sol = solve_lp(&lp)?;
    Ok(assemble_report(inst, rows, mode, &lp, &layout, &sol))
}

fn assemble_report(
    inst: &MdpInstance,
    rows: &DominanceRows,
    mode: Mode,
    lp: &LpProblem,
    layout: &Layout,
    sol: &LpSolution,
) -> SolveReport {
    let pairs = inst.pairs();
    let mut report = SolveReport {
        mode,
        order: rows.order,
        status: sol.status,
        objective: sol.objective,
        dual_objective: sol.dual_objective,
        gap: sol.gap(),
        occupation: None,
        dual: None,
        adjusted_reward: Vec::new(),
        reduced_cost: Vec::new(),
        dominance_margins: Vec::new(),
        slackness: None,
        optimality_residuals: Vec::new(),
        policy: None,
        certificate: None,
        unbounded_ray: sol.ray.clone(),
        multichain: None,
        benchmark_scale: None,
        lp_iterations: sol.iterations,
    };

    match sol.status {
        LpStatus::Infeasible => {
            let y = sol.farkas.clone().unwrap_or_default();
            let rows_out = lp.row_labels.iter().cloned().zip(y.iter().copied()).filter(|(_, v)| v.abs() > 1e-9).collect();
            let binding = rows
                .keys
                .iter()
                .enumerate()
                .filter(|(r, _)| y.get(layout.dominance_start + r).is_some_and(|v| v.abs() > 1e-9))
                .map(|(_, k)| k.clone())
                .collect();
            report.certificate = Some(Certificate { rows: rows_out, binding });
            return report;
        }
        LpStatus::Unbounded => return report,
        LpStatus::Optimal => {}
    }

    let x: Vec<f64> = sol.x.clone();
    let occ = OccupationMeasure { mode, pairs: pairs.clone(), values: x.clone() };
    let w = &sol.shadow_prices;
    let h: Vec<f64> = w[..layout.n_states].to_vec();
    let g = layout.normalization.map_or(0.0, |i| w[i]);
    let lambda: Vec<f64> = (0..rows.len()).map(|r| sol.duals[layout.dominance_start + r].max(0.0)).collect();
    let delta = match mode {
        Mode::Average => 1.0,
        Mode::Discounted => inst.discount.unwrap_or(0.0),
    };
    let sigma = rows.order.sign();

    let adjusted: Vec<f64> = pairs
        .iter()
        .map(|(k, (s, a))| inst.reward_r[s][a] + rows.multiplier_term(&lambda, k))
        .collect();
    let reduced: Vec<f64> = pairs
        .iter()
        .map(|(k, (s, a))| {
            let ph: f64 = inst.transition[s][a].iter().zip(&h).map(|(p, v)| p * v).sum();
            sigma * (g + h[s] - delta * ph - adjusted[k])
        })
        .collect();

    let lambda_keyed: Vec<(RowKey, f64)> = rows.keys.iter().cloned().zip(lambda.iter().copied()).collect();
    let utility = rows.scalar_utility(&lambda);
    report.dual = Some(match mode {
        Mode::Average => Dual::Average(DualSolution { g, h, lambda: lambda_keyed, utility }),
        Mode::Discounted => Dual::Discounted(DiscountedDual { v: h, lambda: lambda_keyed, utility }),
    });
    report.dominance_margins = rows.keys.iter().enumerate().map(|(r, k)| (k.clone(), rows.margin(r, &x))).collect();
    report.adjusted_reward = adjusted;
    report.reduced_cost = reduced;

    let policy = extract_policy(&occ, inst.num_states);
    if mode == Mode::Average {
        let classes = recurrent_classes(&policy.induced_kernel(inst));
        if classes.len() > 1 {
            report.multichain = Some(classes);
        }
    }
    report.policy = Some(policy);
    report.occupation = Some(occ);
    report.slackness = Some(check_slackness_with(&report, rows));
    report.optimality_residuals = optimality_residual(&report, inst);
    report
}

fn check_slackness_with(report: &SolveReport, rows: &DominanceRows) -> SlacknessSummary {
    let x = &report.occupation.as_ref().expect("optimal report").values;
    let lambda = report.dual.as_ref().expect("optimal report").lambda();
    let dominance: Vec<f64> = (0..rows.len()).map(|r| (lambda[r].1 * (rows.row_value(r, x) - rows.rhs[r])).abs()).collect();
    let pairs: Vec<f64> = x.iter().zip(&report.reduced_cost).map(|(a, b)| (a * b).abs()).collect();
    SlacknessSummary {
        max_dominance: dominance.iter().copied().fold(0.0, f64::max),
        max_pair: pairs.iter().copied().fold(0.0, f64::max),
        dominance,
        pairs,
        scale: report.scale(),
    }
}

/// Complementary slackness residuals of an optimal report.
pub fn check_slackness(report: &SolveReport) -> Option<SlacknessSummary> {
    report.slackness.clone()
}

/// Per-state residual of the optimality equations with the utility term:
/// average `g + h(s) - best_a{rho(s,a) + P h}`, discounted
/// `v(s) - best_a{rho(s,a) + delta P v}`, where `best` is max for reward
/// problems and min for cost problems. Only states with positive occupation
/// marginal are required to satisfy them.
pub fn optimality_residual(report: &SolveReport, inst: &MdpInstance) -> Vec<StateResidual> {
    let (Some(occ), Some(dual)) = (&report.occupation, &report.dual) else {
        return Vec::new();
    };
    let (g, h, delta) = match dual {
        Dual::Average(d) => (d.g, &d.h, 1.0),
        Dual::Discounted(d) => (0.0, &d.v, inst.discount.unwrap_or(0.0)),
    };
    let marg = occ.state_marginal(inst.num_states);
    let pairs = &occ.pairs;
    (0..inst.num_states)
        .map(|s| {
            let vals = pairs.state_range(s).map(|k| {
                let a = k - pairs.state_range(s).start;
                let ph: f64 = inst.transition[s][a].iter().zip(h).map(|(p, v)| p * v).sum();
                report.adjusted_reward[k] + delta * ph
            });
            let best = match report.order {
                Order::Icv => vals.fold(f64::NEG_INFINITY, f64::max),
                Order::Icx => vals.fold(f64::INFINITY, f64::min),
            };
            StateResidual {
                state: s,
                marginal: marg[s],
                residual: (g + h[s] - best).abs(),
                required: marg[s] > 1e-9,
            }
        })
        .collect()
}

/// Long-run state marginal reproduced by the extracted policy when its
/// chain is unichain.
pub fn policy_marginal(report: &SolveReport, inst: &MdpInstance) -> Result<Vec<f64>> {
    let policy = report.policy.as_ref().ok_or_else(|| Error::InvalidArgument("report has no policy".into()))?;
    stationary_of_kernel(&policy.induced_kernel(inst))
}
