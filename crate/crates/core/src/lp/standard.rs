use super::{LpProblem, RowSense, Sense, VarBound};
use crate::error::Result;

/// How an original variable appears in the standard form.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnMap {
    Plain(usize),
    /// `v = v_plus - v_minus`
    Split(usize, usize),
}

/// Everything needed to map standard-form solutions back.
#[derive(Debug, Clone, PartialEq)]
pub struct Transform {
    /// -1 when the original problem maximizes.
    pub objective_sign: f64,
    pub columns: Vec<ColumnMap>,
    /// Slack or surplus column per row and its coefficient (+1 slack, -1 surplus).
    pub slacks: Vec<Option<(usize, f64)>>,
    pub num_std_cols: usize,
}

/// `min c'x  s.t.  Ax = b, x >= 0`, with columns stored contiguously
/// (`matrix[j]` is column j).
#[derive(Debug, Clone, PartialEq)]
pub struct StandardForm {
    pub cost: Vec<f64>,
    pub matrix: Vec<Vec<f64>>,
    pub rhs: Vec<f64>,
    pub transform: Transform,
}

impl StandardForm {
    pub fn num_rows(&self) -> usize {
        self.rhs.len()
    }

    pub fn num_cols(&self) -> usize {
        self.cost.len()
    }

    /// Dense row-major view, mainly for inspection in tests.
    pub fn row(&self, i: usize) -> Vec<f64> {
        self.matrix.iter().map(|col| col[i]).collect()
    }
}

pub fn to_standard_form(p: &LpProblem) -> Result<StandardForm> {
    p.validate()?;
    let m = p.num_rows();
    let sign = if p.sense == Sense::Max { -1.0 } else { 1.0 };
    let mut cost = Vec::new();
    let mut cols: Vec<Vec<f64>> = Vec::new();
    let mut columns = Vec::with_capacity(p.num_cols());

    for j in 0..p.num_cols() {
        let col: Vec<f64> = p.matrix.iter().map(|row| row[j]).collect();
        let plus = cols.len();
        cost.push(sign * p.cost[j]);
        match p.bounds[j] {
            VarBound::NonNegative => {
                cols.push(col);
                columns.push(ColumnMap::Plain(plus));
            }
            VarBound::Free => {
                let neg: Vec<f64> = col.iter().map(|v| -v).collect();
                cols.push(col);
                cost.push(-sign * p.cost[j]);
                cols.push(neg);
                columns.push(ColumnMap::Split(plus, plus + 1));
            }
        }
    }

    let mut slacks = Vec::with_capacity(m);
    for i in 0..m {
        let coef = match p.row_sense[i] {
            RowSense::Le => 1.0,
            RowSense::Ge => -1.0,
            RowSense::Eq => {
                slacks.push(None);
                continue;
            }
        };
        let mut col = vec![0.0; m];
        col[i] = coef;
        slacks.push(Some((cols.len(), coef)));
        cols.push(col);
        cost.push(0.0);
    }

    let num_std_cols = cols.len();
    Ok(StandardForm {
        cost,
        matrix: cols,
        rhs: p.rhs.clone(),
        transform: Transform { objective_sign: sign, columns, slacks, num_std_cols },
    })
}

impl Transform {
    pub fn primal_to_original(&self, x_std: &[f64]) -> Vec<f64> {
        self.columns
            .iter()
            .map(|c| match *c {
                ColumnMap::Plain(j) => x_std[j],
                ColumnMap::Split(p, q) => x_std[p] - x_std[q],
            })
            .collect()
    }

    /// Lifts an original point into standard-form variables, filling slack
    /// and surplus values from the rows of `p`.
    pub fn original_to_standard(&self, p: &LpProblem, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.num_std_cols];
        for (j, c) in self.columns.iter().enumerate() {
            match *c {
                ColumnMap::Plain(k) => out[k] = x[j],
                ColumnMap::Split(a, b) => {
                    out[a] = x[j].max(0.0);
                    out[b] = (-x[j]).max(0.0);
                }
            }
        }
        for (i, s) in self.slacks.iter().enumerate() {
            if let Some((k, coef)) = *s {
                out[k] = (p.rhs[i] - p.row_activity(i, x)) / coef;
            }
        }
        out
    }

    /// Standard-form row duals to original shadow prices.
    pub fn duals_to_original(&self, y_std: &[f64]) -> Vec<f64> {
        y_std.iter().map(|y| self.objective_sign * y).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn max_le_becomes_min_with_slacks() {
        let mut p = LpProblem::new(Sense::Max);
        let x = p.add_column("x", 3.0, VarBound::NonNegative);
        let y = p.add_column("y", 1.0, VarBound::NonNegative);
        p.add_row("r", [(x, 1.0), (y, 2.0)], RowSense::Le, 4.0);
        let s = to_standard_form(&p).unwrap();
        assert_eq!(s.cost, vec![-3.0, -1.0, 0.0]);
        assert_eq!(s.row(0), vec![1.0, 2.0, 1.0]);
        assert_eq!(s.rhs, vec![4.0]);
    }

    #[test]
    fn ge_row_gets_surplus() {
        let mut p = LpProblem::new(Sense::Min);
        let x = p.add_column("x", 1.0, VarBound::NonNegative);
        p.add_row("r", [(x, 1.0)], RowSense::Ge, 1.0);
        let s = to_standard_form(&p).unwrap();
        assert_eq!(s.transform.slacks[0], Some((1, -1.0)));
        assert_eq!(s.row(0), vec![1.0, -1.0]);
    }

    #[test]
    fn free_variable_round_trip() {
        let mut p = LpProblem::new(Sense::Min);
        let v = p.add_column("v", 2.0, VarBound::Free);
        let w = p.add_column("w", 1.0, VarBound::NonNegative);
        p.add_row("r", [(v, 1.0), (w, 1.0)], RowSense::Le, 10.0);
        let s = to_standard_form(&p).unwrap();
        assert_eq!(s.transform.columns[0], ColumnMap::Split(0, 1));
        for val in [-2.75, 0.0, 3.5] {
            let x = vec![val, 1.25];
            let lifted = s.transform.original_to_standard(&p, &x);
            assert!(lifted.iter().all(|v| *v >= 0.0));
            assert_eq!(s.transform.primal_to_original(&lifted), x);
        }
    }
}
