//! Two-phase revised simplex on `min c'x, Ax = b, x >= 0`.
//!
//! The basis inverse is kept explicitly and updated with the eta (product
//! form) transformation after every pivot; it is rebuilt from scratch every
//! `refactor_every` pivots and before optimality is declared. Pricing is
//! Dantzig's rule with a Harris two-pass ratio test; after `5 (m + n)`
//! degenerate pivots the solver switches permanently to Bland's rule.

use nalgebra::DMatrix;

use super::LpStatus;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexOptions {
    pub pivot_tol: f64,
    pub feasibility_tol: f64,
    pub optimality_tol: f64,
    pub refactor_every: usize,
    /// Hard cap on pivots; `None` picks a size-dependent default.
    pub max_iterations: Option<usize>,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        SimplexOptions {
            pivot_tol: 1e-9,
            feasibility_tol: 1e-8,
            optimality_tol: 1e-9,
            refactor_every: 50,
            max_iterations: None,
        }
    }
}

pub(crate) struct Outcome {
    pub status: LpStatus,
    /// Standard-form primal point (last feasible point when unbounded).
    pub x: Vec<f64>,
    /// Standard-form row duals.
    pub y: Vec<f64>,
    pub ray: Option<Vec<f64>>,
    pub farkas: Option<Vec<f64>>,
    pub iterations: usize,
}

enum Phase {
    Optimal,
    Unbounded { entering: usize, alpha: Vec<f64> },
}

struct Tableau<'a> {
    opts: &'a SimplexOptions,
    m: usize,
    n_struct: usize,
    cols: Vec<Vec<f64>>,
    b: Vec<f64>,
    basis: Vec<usize>,
    in_basis: Vec<bool>,
    /// Row-major m x m.
    binv: Vec<f64>,
    xb: Vec<f64>,
    since_refactor: usize,
    iterations: usize,
    max_iterations: usize,
    degenerate: usize,
    bland: bool,
}

pub(crate) fn solve_standard(cost: &[f64], cols: &[Vec<f64>], b: &[f64], opts: &SimplexOptions) -> Result<Outcome> {
    let m_all = b.len();
    let n = cost.len();
    let b_scale = 1.0 + b.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let feas = opts.feasibility_tol * b_scale;

    // Empty rows: drop when consistent, otherwise a one-row Farkas certificate.
    let mut active = Vec::with_capacity(m_all);
    for i in 0..m_all {
        if cols.iter().all(|c| c[i] == 0.0) {
            if b[i].abs() > feas {
                let mut y = vec![0.0; m_all];
                y[i] = b[i].signum();
                return Ok(Outcome {
                    status: LpStatus::Infeasible,
                    x: vec![0.0; n],
                    y: vec![0.0; m_all],
                    ray: None,
                    farkas: Some(y),
                    iterations: 0,
                });
            }
        } else {
            active.push(i);
        }
    }
    let m = active.len();
    let flip: Vec<f64> = active.iter().map(|&i| if b[i] < 0.0 { -1.0 } else { 1.0 }).collect();
    let rb: Vec<f64> = active.iter().zip(&flip).map(|(&i, f)| f * b[i]).collect();
    let mut rcols: Vec<Vec<f64>> = cols
        .iter()
        .map(|c| active.iter().zip(&flip).map(|(&i, f)| f * c[i]).collect())
        .collect();

    // Starting basis: unit columns where available, artificials elsewhere.
    let mut basis = vec![usize::MAX; m];
    for (j, c) in rcols.iter().enumerate() {
        let mut nz = c.iter().enumerate().filter(|(_, v)| **v != 0.0);
        if let (Some((i, &v)), None) = (nz.next(), nz.next()) {
            if v == 1.0 && basis[i] == usize::MAX {
                basis[i] = j;
            }
        }
    }
    let mut artificial = Vec::new();
    for i in 0..m {
        if basis[i] == usize::MAX {
            let mut e = vec![0.0; m];
            e[i] = 1.0;
            basis[i] = rcols.len();
            artificial.push(rcols.len());
            rcols.push(e);
        }
    }
    let total = rcols.len();
    let mut in_basis = vec![false; total];
    for &j in &basis {
        in_basis[j] = true;
    }
    let max_iterations = opts.max_iterations.unwrap_or(50_000 + 200 * (m + total));
    let mut t = Tableau {
        opts,
        m,
        n_struct: n,
        cols: rcols,
        b: rb,
        basis,
        in_basis,
        binv: identity(m),
        xb: Vec::new(),
        since_refactor: 0,
        iterations: 0,
        max_iterations,
        degenerate: 0,
        bland: false,
    };
    t.xb = t.b.clone();

    if !artificial.is_empty() {
        let mut c1 = vec![0.0; total];
        for &j in &artificial {
            c1[j] = 1.0;
        }
        t.run(&c1, |_| true)?;
        let infeas: f64 = (0..m).filter(|&i| t.basis[i] >= n).map(|i| t.xb[i].max(0.0)).sum();
        if infeas > feas {
            let y = t.duals(&c1);
            let mut farkas = vec![0.0; m_all];
            for (k, &i) in active.iter().enumerate() {
                farkas[i] = flip[k] * y[k];
            }
            return Ok(Outcome {
                status: LpStatus::Infeasible,
                x: vec![0.0; n],
                y: vec![0.0; m_all],
                ray: None,
                farkas: Some(farkas),
                iterations: t.iterations,
            });
        }
        t.drive_out_artificials();
    }

    let mut c2 = vec![0.0; total];
    c2[..n].copy_from_slice(cost);
    let phase = t.run(&c2, |j| j < n)?;
    let mut x = vec![0.0; n];
    for (i, &j) in t.basis.iter().enumerate() {
        if j < n {
            x[j] = t.xb[i].max(0.0);
        }
    }
    let mut y_full = vec![0.0; m_all];
    match phase {
        Phase::Optimal => {
            let y = t.duals(&c2);
            for (k, &i) in active.iter().enumerate() {
                y_full[i] = flip[k] * y[k];
            }
            Ok(Outcome { status: LpStatus::Optimal, x, y: y_full, ray: None, farkas: None, iterations: t.iterations })
        }
        Phase::Unbounded { entering, alpha } => {
            let mut ray = vec![0.0; n];
            ray[entering] = 1.0;
            for (i, &j) in t.basis.iter().enumerate() {
                if j < n {
                    ray[j] = -alpha[i];
                }
            }
            Ok(Outcome { status: LpStatus::Unbounded, x, y: y_full, ray: Some(ray), farkas: None, iterations: t.iterations })
        }
    }
}

fn identity(m: usize) -> Vec<f64> {
    let mut v = vec![0.0; m * m];
    for i in 0..m {
        v[i * m + i] = 1.0;
    }
    v
}

impl Tableau<'_> {
    fn duals(&self, cost: &[f64]) -> Vec<f64> {
        let m = self.m;
        let mut y = vec![0.0; m];
        for i in 0..m {
            let cb = cost[self.basis[i]];
            if cb != 0.0 {
                let row = &self.binv[i * m..(i + 1) * m];
                for k in 0..m {
                    y[k] += cb * row[k];
                }
            }
        }
        y
    }

    fn ftran(&self, col: &[f64]) -> Vec<f64> {
        let m = self.m;
        (0..m)
            .map(|i| {
                let row = &self.binv[i * m..(i + 1) * m];
                row.iter().zip(col).map(|(a, b)| a * b).sum()
            })
            .collect()
    }

    fn refactor(&mut self) -> Result<()> {
        let m = self.m;
        self.since_refactor = 0;
        if m == 0 {
            return Ok(());
        }
        let bmat = DMatrix::from_fn(m, m, |i, k| self.cols[self.basis[k]][i]);
        let inv = bmat.try_inverse().ok_or(Error::SingularBasis)?;
        for i in 0..m {
            for k in 0..m {
                self.binv[i * m + k] = inv[(i, k)];
            }
        }
        self.xb = self.ftran(&self.b.clone());
        Ok(())
    }

    fn pivot(&mut self, r: usize, q: usize, alpha: &[f64], theta: f64) {
        let m = self.m;
        for i in 0..m {
            if i != r {
                self.xb[i] -= theta * alpha[i];
            }
        }
        self.xb[r] = theta;
        let piv = alpha[r];
        for k in 0..m {
            self.binv[r * m + k] /= piv;
        }
        let (before, rest) = self.binv.split_at_mut(r * m);
        let (prow, after) = rest.split_at_mut(m);
        for (i, chunk) in before.chunks_mut(m).chain(after.chunks_mut(m)).enumerate() {
            let ai = alpha[if i < r { i } else { i + 1 }];
            if ai != 0.0 {
                for k in 0..m {
                    chunk[k] -= ai * prow[k];
                }
            }
        }
        self.in_basis[self.basis[r]] = false;
        self.in_basis[q] = true;
        self.basis[r] = q;
        self.since_refactor += 1;
        self.iterations += 1;
    }

    fn run(&mut self, cost: &[f64], allow: impl Fn(usize) -> bool) -> Result<Phase> {
        let m = self.m;
        let total = self.cols.len();
        let c_scale = 1.0 + cost.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        let opt_tol = self.opts.optimality_tol * c_scale;
        let b_scale = 1.0 + self.b.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        let feas = self.opts.feasibility_tol * b_scale;
        let ptol = self.opts.pivot_tol;
        let bland_after = 5 * (m + total);
        let mut fresh = false;

        loop {
            if self.since_refactor >= self.opts.refactor_every {
                self.refactor()?;
                fresh = true;
            }
            if self.iterations >= self.max_iterations {
                return Err(Error::IterationLimit(self.max_iterations));
            }
            let y = self.duals(cost);
            let mut entering: Option<(usize, f64)> = None;
            for j in 0..total {
                if self.in_basis[j] || !allow(j) {
                    continue;
                }
                let d = cost[j] - self.cols[j].iter().zip(&y).map(|(a, b)| a * b).sum::<f64>();
                if d < -opt_tol {
                    if self.bland {
                        entering = Some((j, d));
                        break;
                    }
                    if entering.is_none_or(|(_, best)| d < best) {
                        entering = Some((j, d));
                    }
                }
            }
            let Some((q, _)) = entering else {
                if fresh || self.since_refactor == 0 {
                    return Ok(Phase::Optimal);
                }
                self.refactor()?;
                fresh = true;
                continue;
            };
            fresh = false;

            let alpha = self.ftran(&self.cols[q]);
            let row = if self.bland {
                let mut best: Option<(usize, f64)> = None;
                for i in 0..m {
                    if alpha[i] > ptol {
                        let ratio = self.xb[i].max(0.0) / alpha[i];
                        let better = match best {
                            None => true,
                            Some((k, r)) => {
                                ratio < r - 1e-12 || (ratio <= r + 1e-12 && self.basis[i] < self.basis[k])
                            }
                        };
                        if better {
                            best = Some((i, ratio));
                        }
                    }
                }
                best.map(|(i, _)| i)
            } else {
                let mut theta_max = f64::INFINITY;
                for i in 0..m {
                    if alpha[i] > ptol {
                        theta_max = theta_max.min((self.xb[i] + feas) / alpha[i]);
                    }
                }
                if theta_max.is_finite() {
                    let mut best: Option<usize> = None;
                    for i in 0..m {
                        if alpha[i] > ptol
                            && self.xb[i] / alpha[i] <= theta_max
                            && best.is_none_or(|k| alpha[i] > alpha[k])
                        {
                            best = Some(i);
                        }
                    }
                    best
                } else {
                    None
                }
            };
            let Some(r) = row else {
                return Ok(Phase::Unbounded { entering: q, alpha });
            };
            let theta = (self.xb[r] / alpha[r]).max(0.0);
            if theta <= 1e-12 {
                self.degenerate += 1;
                if self.degenerate >= bland_after {
                    self.bland = true;
                }
            }
            self.pivot(r, q, &alpha, theta);
        }
    }

    /// Pivots zero-level artificials out of the basis where a structural
    /// column has a usable entry in their row; the rest mark redundant rows.
    fn drive_out_artificials(&mut self) {
        let m = self.m;
        for r in 0..m {
            if self.basis[r] < self.n_struct {
                continue;
            }
            let row: Vec<f64> = self.binv[r * m..(r + 1) * m].to_vec();
            let mut best: Option<(usize, f64)> = None;
            for j in 0..self.n_struct {
                if self.in_basis[j] {
                    continue;
                }
                let v: f64 = row.iter().zip(&self.cols[j]).map(|(a, b)| a * b).sum();
                if v.abs() > 1e-7 && best.is_none_or(|(_, b)| v.abs() > b) {
                    best = Some((j, v.abs()));
                }
            }
            if let Some((q, _)) = best {
                let alpha = self.ftran(&self.cols[q]);
                let theta = self.xb[r] / alpha[r];
                self.pivot(r, q, &alpha, theta);
            }
        }
    }
}
