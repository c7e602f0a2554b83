//! Dense linear programming with primal and dual solutions.
//!
//! Problems are stated in a general form (max or min, mixed row senses,
//! nonnegative or free variables), converted to `min c'x, Ax = b, x >= 0`,
//! and solved by a two-phase revised simplex method. Row duals are mapped
//! back to the original rows with a per-sense sign normalization so that
//! every inequality row reports a nonnegative multiplier.

mod simplex;
mod standard;

use std::collections::HashSet;

pub use simplex::SimplexOptions;
pub use standard::{to_standard_form, ColumnMap, StandardForm, Transform};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Max,
    Min,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowSense {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarBound {
    NonNegative,
    Free,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

impl LpStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            LpStatus::Optimal => "optimal",
            LpStatus::Infeasible => "infeasible",
            LpStatus::Unbounded => "unbounded",
        }
    }
}

/// A dense LP. Rows are stored row-major; columns are added before or after
/// rows (existing rows are padded with zeros).
#[derive(Debug, Clone, PartialEq)]
pub struct LpProblem {
    pub sense: Sense,
    pub cost: Vec<f64>,
    pub matrix: Vec<Vec<f64>>,
    pub row_sense: Vec<RowSense>,
    pub rhs: Vec<f64>,
    pub bounds: Vec<VarBound>,
    pub row_labels: Vec<String>,
    pub col_labels: Vec<String>,
}

impl LpProblem {
    pub fn new(sense: Sense) -> Self {
        LpProblem {
            sense,
            cost: Vec::new(),
            matrix: Vec::new(),
            row_sense: Vec::new(),
            rhs: Vec::new(),
            bounds: Vec::new(),
            row_labels: Vec::new(),
            col_labels: Vec::new(),
        }
    }

    pub fn num_rows(&self) -> usize {
        self.rhs.len()
    }

    pub fn num_cols(&self) -> usize {
        self.cost.len()
    }

    pub fn add_column(&mut self, label: impl Into<String>, cost: f64, bound: VarBound) -> usize {
        self.cost.push(cost);
        self.bounds.push(bound);
        self.col_labels.push(label.into());
        for row in &mut self.matrix {
            row.push(0.0);
        }
        self.cost.len() - 1
    }

    /// Adds a row from sparse `(column, coefficient)` entries; repeated
    /// columns accumulate.
    pub fn add_row(
        &mut self,
        label: impl Into<String>,
        entries: impl IntoIterator<Item = (usize, f64)>,
        sense: RowSense,
        rhs: f64,
    ) -> usize {
        let mut row = vec![0.0; self.num_cols()];
        for (j, v) in entries {
            row[j] += v;
        }
        self.add_dense_row(label, row, sense, rhs)
    }

    pub fn add_dense_row(&mut self, label: impl Into<String>, row: Vec<f64>, sense: RowSense, rhs: f64) -> usize {
        self.matrix.push(row);
        self.row_sense.push(sense);
        self.rhs.push(rhs);
        self.row_labels.push(label.into());
        self.rhs.len() - 1
    }

    /// Dimensional consistency, finiteness, and label uniqueness.
    pub fn validate(&self) -> Result<()> {
        let m = self.rhs.len();
        let n = self.cost.len();
        if self.matrix.len() != m || self.row_sense.len() != m || self.row_labels.len() != m {
            return Err(Error::InvalidLp(format!("row data inconsistent with {m} right-hand sides")));
        }
        if self.bounds.len() != n || self.col_labels.len() != n {
            return Err(Error::InvalidLp(format!("column data inconsistent with {n} costs")));
        }
        for (i, row) in self.matrix.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidLp(format!("row {i} has {} entries, expected {n}", row.len())));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidLp(format!("row {i} has a non-finite coefficient")));
            }
        }
        if self.cost.iter().chain(&self.rhs).any(|v| !v.is_finite()) {
            return Err(Error::InvalidLp("non-finite cost or right-hand side".into()));
        }
        let mut seen = HashSet::new();
        for l in &self.row_labels {
            if !seen.insert(l.as_str()) {
                return Err(Error::InvalidLp(format!("duplicate row label {l}")));
            }
        }
        seen.clear();
        for l in &self.col_labels {
            if !seen.insert(l.as_str()) {
                return Err(Error::InvalidLp(format!("duplicate column label {l}")));
            }
        }
        Ok(())
    }

    pub fn row_activity(&self, i: usize, x: &[f64]) -> f64 {
        self.matrix[i].iter().zip(x).map(|(a, v)| a * v).sum()
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.cost.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// +1 when the row's shadow price is naturally nonnegative (a `<=` row
    /// of a max problem or a `>=` row of a min problem), -1 otherwise.
    pub fn row_sign(&self, i: usize) -> f64 {
        match (self.sense, self.row_sense[i]) {
            (_, RowSense::Eq) => 1.0,
            (Sense::Max, RowSense::Le) | (Sense::Min, RowSense::Ge) => 1.0,
            _ => -1.0,
        }
    }
}

/// Result of [`solve_lp`].
///
/// `shadow_prices` are the Lagrange multipliers `w` of the rows, i.e. the
/// derivative of the optimal value with respect to the right-hand side; the
/// dual problem is `opt b'w` subject to `A'w (>=|<=) c`. `duals` is the same
/// vector with each inequality row sign-normalized to be nonnegative.
#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub duals: Vec<f64>,
    pub shadow_prices: Vec<f64>,
    pub objective: f64,
    pub dual_objective: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub slackness_residual: f64,
    /// Recession direction in original variables when unbounded.
    pub ray: Option<Vec<f64>>,
    /// Farkas multipliers per original row when infeasible: `y'A <= 0` over
    /// the standard-form columns and `y'b > 0`.
    pub farkas: Option<Vec<f64>>,
    pub iterations: usize,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }

    pub fn gap(&self) -> f64 {
        (self.objective - self.dual_objective).abs()
    }
}

pub fn solve_lp(p: &LpProblem) -> Result<LpSolution> {
    solve_lp_with(p, &SimplexOptions::default())
}

pub fn solve_lp_with(p: &LpProblem, opts: &SimplexOptions) -> Result<LpSolution> {
    p.validate()?;
    let std = to_standard_form(p)?;
    let out = simplex::solve_standard(&std.cost, &std.matrix, &std.rhs, opts)?;
    let t = &std.transform;
    let m = p.num_rows();

    match out.status {
        LpStatus::Infeasible => Ok(LpSolution {
            status: LpStatus::Infeasible,
            x: vec![0.0; p.num_cols()],
            duals: vec![0.0; m],
            shadow_prices: vec![0.0; m],
            objective: f64::NAN,
            dual_objective: f64::NAN,
            primal_residual: f64::NAN,
            dual_residual: f64::NAN,
            slackness_residual: f64::NAN,
            ray: None,
            farkas: out.farkas,
            iterations: out.iterations,
        }),
        LpStatus::Unbounded => {
            let ray = out.ray.map(|r| t.primal_to_original(&r));
            let x = t.primal_to_original(&out.x);
            Ok(LpSolution {
                status: LpStatus::Unbounded,
                objective: if p.sense == Sense::Max { f64::INFINITY } else { f64::NEG_INFINITY },
                primal_residual: primal_residual(p, &x),
                x,
                duals: vec![0.0; m],
                shadow_prices: vec![0.0; m],
                dual_objective: f64::NAN,
                dual_residual: f64::NAN,
                slackness_residual: f64::NAN,
                ray,
                farkas: None,
                iterations: out.iterations,
            })
        }
        LpStatus::Optimal => {
            let x = t.primal_to_original(&out.x);
            let shadow_prices = t.duals_to_original(&out.y);
            let duals: Vec<f64> = (0..m).map(|i| p.row_sign(i) * shadow_prices[i]).collect();
            let objective = p.objective_value(&x);
            let dual_objective: f64 = p.rhs.iter().zip(&shadow_prices).map(|(b, w)| b * w).sum();
            let (dual_residual, col_cs) = dual_residual(p, &x, &shadow_prices);
            let row_cs = (0..m)
                .map(|i| (duals[i] * (p.row_activity(i, &x) - p.rhs[i])).abs())
                .fold(0.0, f64::max);
            Ok(LpSolution {
                status: LpStatus::Optimal,
                primal_residual: primal_residual(p, &x),
                x,
                duals,
                shadow_prices,
                objective,
                dual_objective,
                dual_residual,
                slackness_residual: row_cs.max(col_cs),
                ray: None,
                farkas: None,
                iterations: out.iterations,
            })
        }
    }
}

/// Largest violation of a row or a variable bound at `x`.
pub fn primal_residual(p: &LpProblem, x: &[f64]) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..p.num_rows() {
        let act = p.row_activity(i, x);
        let v = match p.row_sense[i] {
            RowSense::Le => act - p.rhs[i],
            RowSense::Ge => p.rhs[i] - act,
            RowSense::Eq => (act - p.rhs[i]).abs(),
        };
        worst = worst.max(v);
    }
    for (j, b) in p.bounds.iter().enumerate() {
        if *b == VarBound::NonNegative {
            worst = worst.max(-x[j]);
        }
    }
    worst
}

/// Largest violation of dual feasibility for shadow prices `w`, and the
/// largest column complementary-slackness product `|x_j * reduced_cost_j|`.
pub fn dual_residual(p: &LpProblem, x: &[f64], w: &[f64]) -> (f64, f64) {
    let n = p.num_cols();
    let mut reduced = p.cost.clone();
    for (i, row) in p.matrix.iter().enumerate() {
        for j in 0..n {
            reduced[j] -= row[j] * w[i];
        }
    }
    let mut worst: f64 = 0.0;
    let mut cs: f64 = 0.0;
    for j in 0..n {
        // max: reduced <= 0 ; min: reduced >= 0 ; free: reduced = 0
        let v = match (p.bounds[j], p.sense) {
            (VarBound::Free, _) => reduced[j].abs(),
            (VarBound::NonNegative, Sense::Max) => reduced[j],
            (VarBound::NonNegative, Sense::Min) => -reduced[j],
        };
        worst = worst.max(v);
        cs = cs.max((x[j] * reduced[j]).abs());
    }
    for i in 0..p.num_rows() {
        if p.row_sense[i] != RowSense::Eq {
            worst = worst.max(-p.row_sign(i) * w[i]);
        }
    }
    (worst, cs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_max() -> LpProblem {
        let mut p = LpProblem::new(Sense::Max);
        let x1 = p.add_column("x1", 1.0, VarBound::NonNegative);
        let x2 = p.add_column("x2", 1.0, VarBound::NonNegative);
        p.add_row("c1", [(x1, 1.0)], RowSense::Le, 1.0);
        p.add_row("c2", [(x2, 1.0)], RowSense::Le, 2.0);
        p
    }

    #[test]
    fn box_lp_has_unit_duals() {
        let sol = solve_lp(&small_max()).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.objective - 3.0).abs() < 1e-12);
        assert!((sol.duals[0] - 1.0).abs() < 1e-12);
        assert!((sol.duals[1] - 1.0).abs() < 1e-12);
        assert!(sol.gap() < 1e-12);
    }

    #[test]
    fn contradictory_rows_are_infeasible() {
        let mut p = LpProblem::new(Sense::Min);
        let x = p.add_column("x1", 0.0, VarBound::NonNegative);
        p.add_row("eq", [(x, 1.0)], RowSense::Eq, 1.0);
        p.add_row("le", [(x, 1.0)], RowSense::Le, 0.5);
        let sol = solve_lp(&p).unwrap();
        assert_eq!(sol.status, LpStatus::Infeasible);
        let y = sol.farkas.unwrap();
        // y'b > 0 with y'A <= 0 over the standard-form columns
        assert!(y[0] * 1.0 + y[1] * 0.5 > 0.0);
        assert!(y[0] + y[1] <= 1e-12);
    }

    #[test]
    fn no_rows_is_unbounded() {
        let mut p = LpProblem::new(Sense::Max);
        p.add_column("x1", 1.0, VarBound::NonNegative);
        let sol = solve_lp(&p).unwrap();
        assert_eq!(sol.status, LpStatus::Unbounded);
        assert!(sol.ray.unwrap()[0] > 0.0);
    }

    #[test]
    fn ge_row_in_max_problem_has_nonnegative_multiplier() {
        // max -x s.t. x >= 2 : binding, shadow price -1, normalized +1
        let mut p = LpProblem::new(Sense::Max);
        let x = p.add_column("x", -1.0, VarBound::NonNegative);
        p.add_row("lb", [(x, 1.0)], RowSense::Ge, 2.0);
        let sol = solve_lp(&p).unwrap();
        assert!((sol.objective + 2.0).abs() < 1e-12);
        assert!((sol.shadow_prices[0] + 1.0).abs() < 1e-12);
        assert!((sol.duals[0] - 1.0).abs() < 1e-12);
        assert!((sol.dual_objective + 2.0).abs() < 1e-12);
    }

    #[test]
    fn free_variable_can_go_negative() {
        // min v s.t. v >= -3, v free
        let mut p = LpProblem::new(Sense::Min);
        let v = p.add_column("v", 1.0, VarBound::Free);
        p.add_row("lb", [(v, 1.0)], RowSense::Ge, -3.0);
        let sol = solve_lp(&p).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.x[0] + 3.0).abs() < 1e-12);
        assert!((sol.duals[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn empty_row_consistency() {
        let mut p = small_max();
        p.add_row("zero", [], RowSense::Eq, 0.0);
        let sol = solve_lp(&p).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.objective - 3.0).abs() < 1e-12);

        p.add_row("bad", [], RowSense::Ge, 1.0);
        assert_eq!(solve_lp(&p).unwrap().status, LpStatus::Infeasible);
    }

    #[test]
    fn duplicate_labels_rejected() {
        let mut p = small_max();
        p.row_labels[1] = "c1".into();
        assert!(matches!(solve_lp(&p), Err(Error::InvalidLp(_))));
    }

    #[test]
    fn redundant_equalities() {
        // x1 + x2 = 1 stated twice, plus the sum of both
        let mut p = LpProblem::new(Sense::Max);
        let a = p.add_column("a", 2.0, VarBound::NonNegative);
        let b = p.add_column("b", 1.0, VarBound::NonNegative);
        p.add_row("r1", [(a, 1.0), (b, 1.0)], RowSense::Eq, 1.0);
        p.add_row("r2", [(a, 1.0), (b, 1.0)], RowSense::Eq, 1.0);
        p.add_row("r3", [(a, 2.0), (b, 2.0)], RowSense::Eq, 2.0);
        let sol = solve_lp(&p).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.objective - 2.0).abs() < 1e-12);
        assert!(sol.gap() < 1e-10);
        assert!(sol.dual_residual < 1e-10);
    }
}
