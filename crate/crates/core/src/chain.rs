//! Markov chain utilities for policy-induced kernels: recurrent class
//! detection, stationary distributions, and exact policy evaluation.

use nalgebra::{DMatrix, DVector};
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;

use crate::error::{Error, Result};
use crate::mdp::{MdpInstance, Policy};

/// Closed communicating classes of a row-stochastic kernel, each sorted,
/// ordered by smallest member.
pub fn recurrent_classes(kernel: &[Vec<f64>]) -> Vec<Vec<usize>> {
    let n = kernel.len();
    let mut g = DiGraph::<(), ()>::with_capacity(n, n * 2);
    let nodes: Vec<_> = (0..n).map(|_| g.add_node(())).collect();
    for (s, row) in kernel.iter().enumerate() {
        for (j, &p) in row.iter().enumerate() {
            if p > 0.0 {
                g.add_edge(nodes[s], nodes[j], ());
            }
        }
    }
    let sccs = tarjan_scc(&g);
    let mut comp = vec![0usize; n];
    for (c, members) in sccs.iter().enumerate() {
        for v in members {
            comp[v.index()] = c;
        }
    }
    let mut classes: Vec<Vec<usize>> = sccs
        .iter()
        .enumerate()
        .filter(|(c, members)| {
            members.iter().all(|v| {
                kernel[v.index()]
                    .iter()
                    .enumerate()
                    .all(|(j, &p)| p <= 0.0 || comp[j] == *c)
            })
        })
        .map(|(_, members)| {
            let mut m: Vec<usize> = members.iter().map(|v| v.index()).collect();
            m.sort_unstable();
            m
        })
        .collect();
    classes.sort();
    classes
}

/// Unique stationary distribution of a unichain kernel.
pub fn stationary_of_kernel(kernel: &[Vec<f64>]) -> Result<Vec<f64>> {
    let classes = recurrent_classes(kernel);
    if classes.len() != 1 {
        return Err(Error::Multichain { classes });
    }
    let n = kernel.len();
    // (P^T - I) mu = 0 with the last balance row replaced by sum(mu) = 1.
    let mut a = DMatrix::from_fn(n, n, |j, s| kernel[s][j] - if s == j { 1.0 } else { 0.0 });
    let mut rhs = DVector::zeros(n);
    for s in 0..n {
        a[(n - 1, s)] = 1.0;
    }
    rhs[n - 1] = 1.0;
    let lu = a.clone().lu();
    let mut mu = lu.solve(&rhs).ok_or(Error::SingularBasis)?;
    // one step of iterative refinement
    let r = &rhs - &a * &mu;
    if let Some(d) = lu.solve(&r) {
        mu += d;
    }
    Ok(mu.iter().map(|v| v.max(0.0)).collect())
}

pub fn stationary_distribution(policy: &Policy, inst: &MdpInstance) -> Result<Vec<f64>> {
    policy.validate(inst)?;
    stationary_of_kernel(&policy.induced_kernel(inst))
}

/// Max-norm residual of `mu = mu P` and of the normalization.
pub fn stationary_residual(kernel: &[Vec<f64>], mu: &[f64]) -> f64 {
    let n = kernel.len();
    let mut worst = (mu.iter().sum::<f64>() - 1.0).abs();
    for j in 0..n {
        let inflow: f64 = (0..n).map(|s| mu[s] * kernel[s][j]).sum();
        worst = worst.max((inflow - mu[j]).abs());
    }
    worst
}

/// Discounted state visitation `m = nu (I - delta P)^{-1}`, total mass `1/(1-delta)`.
pub fn discounted_visitation(kernel: &[Vec<f64>], nu: &[f64], delta: f64) -> Result<Vec<f64>> {
    let n = kernel.len();
    let a = DMatrix::from_fn(n, n, |j, s| if s == j { 1.0 } else { 0.0 } - delta * kernel[s][j]);
    let b = DVector::from_column_slice(nu);
    let m = a.lu().solve(&b).ok_or(Error::SingularBasis)?;
    Ok(m.iter().copied().collect())
}
