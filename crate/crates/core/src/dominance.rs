//! Shortfall algebra and the increasing concave / increasing convex orders
//! for finitely supported distributions.
//!
//! For a benchmark with finite support, `X >=_icv Y` holds iff
//! `E[(X - eta)_-] >= E[(Y - eta)_-]` at every support point `eta` of `Y`,
//! so every check and every LP row here is indexed by `supp Y`.

use crate::error::{Error, Result};
use crate::mdp::{Benchmark, Distribution, VectorDistribution};

/// Absolute tolerance used by the dominance checks.
pub const DOMINANCE_TOL: f64 = 1e-10;

/// `(x - eta)_- = min{x - eta, 0}`
#[inline]
pub fn shortfall_minus(x: f64, eta: f64) -> f64 {
    (x - eta).min(0.0)
}

/// `(x - eta)_+ = max{x - eta, 0}`
#[inline]
pub fn shortfall_plus(x: f64, eta: f64) -> f64 {
    (x - eta).max(0.0)
}

/// Expected shortfall curve `y(eta) = E[(Y - eta)_-]` on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ShortfallGrid {
    pub grid: Vec<f64>,
    pub curve: Vec<f64>,
}

impl ShortfallGrid {
    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.grid.iter().copied().zip(self.curve.iter().copied())
    }
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty eta grid".into()));
    }
    if grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidArgument("eta grid must be strictly increasing".into()));
    }
    Ok(())
}

pub fn benchmark_curve(bench: &Benchmark, grid: &[f64]) -> Result<ShortfallGrid> {
    check_grid(grid)?;
    let curve = grid.iter().map(|&eta| bench.expect(|y| shortfall_minus(y, eta))).collect();
    Ok(ShortfallGrid { grid: grid.to_vec(), curve })
}

/// Merges the benchmark support with extra diagnostic points.
pub fn augmented_grid(bench: &Benchmark, extra: &[f64]) -> Vec<f64> {
    let mut g: Vec<f64> = bench.support().iter().chain(extra).copied().collect();
    g.sort_by(f64::total_cmp);
    g.dedup();
    g
}

/// Outcome of a dominance check: per-eta margins and the worst one.
#[derive(Debug, Clone, PartialEq)]
pub struct DominanceCheck {
    pub holds: bool,
    pub worst_eta: f64,
    pub worst_margin: f64,
    pub margins: Vec<(f64, f64)>,
}

/// `X >=_icv Y`: margin `E[(X-eta)_-] - E[(Y-eta)_-]` at each `eta` in `supp Y`;
/// holds when every margin is at least `-DOMINANCE_TOL`.
pub fn check_icv(x: &Distribution, bench: &Benchmark) -> DominanceCheck {
    let margins: Vec<(f64, f64)> = bench
        .support()
        .iter()
        .map(|&eta| {
            let mx = x.expect(|v| shortfall_minus(v, eta));
            let my = bench.expect(|v| shortfall_minus(v, eta));
            (eta, mx - my)
        })
        .collect();
    let (worst_eta, worst_margin) = margins
        .iter()
        .copied()
        .fold((f64::NAN, f64::INFINITY), |acc, m| if m.1 < acc.1 { m } else { acc });
    DominanceCheck { holds: worst_margin >= -DOMINANCE_TOL, worst_eta, worst_margin, margins }
}

/// Differences `E[(X-eta)_+] - E[(Y-eta)_+]` at each `eta` in `supp Y`. The
/// check holds in the cost direction (`X` no riskier than `Y` for increasing
/// convex costs) when every difference is at most `DOMINANCE_TOL`; the
/// worst entry is the largest difference.
pub fn check_icx(x: &Distribution, bench: &Benchmark) -> DominanceCheck {
    let margins: Vec<(f64, f64)> = bench
        .support()
        .iter()
        .map(|&eta| {
            let mx = x.expect(|v| shortfall_plus(v, eta));
            let my = bench.expect(|v| shortfall_plus(v, eta));
            (eta, mx - my)
        })
        .collect();
    let (worst_eta, worst_margin) = margins
        .iter()
        .copied()
        .fold((f64::NAN, f64::NEG_INFINITY), |acc, m| if m.1 > acc.1 { m } else { acc });
    DominanceCheck { holds: worst_margin <= DOMINANCE_TOL, worst_eta, worst_margin, margins }
}

/// Piecewise linear increasing concave function
/// `u(xi) = sum_k weight_k (xi - eta_k)_-` with nonnegative weights.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct UtilityFunction {
    breakpoints: Vec<f64>,
    weights: Vec<f64>,
}

impl UtilityFunction {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn eval(&self, xi: f64) -> f64 {
        self.breakpoints
            .iter()
            .zip(&self.weights)
            .map(|(&eta, &w)| w * shortfall_minus(xi, eta))
            .sum()
    }

    /// Right derivative: total weight of breakpoints strictly above `xi`.
    pub fn slope(&self, xi: f64) -> f64 {
        self.breakpoints
            .iter()
            .zip(&self.weights)
            .filter(|(&eta, _)| eta > xi)
            .map(|(_, &w)| w)
            .sum()
    }

    pub fn expect(&self, dist: &Distribution) -> f64 {
        dist.expect(|v| self.eval(v))
    }

    /// Nonnegative combination of utilities, breakpoints merged.
    pub fn combine<'a>(terms: impl IntoIterator<Item = (f64, &'a UtilityFunction)>) -> Result<Self> {
        let mut pairs = Vec::new();
        for (c, u) in terms {
            for (&eta, &w) in u.breakpoints.iter().zip(&u.weights) {
                pairs.push((eta, c * w));
            }
        }
        reconstruct_utility(&pairs)
    }
}

/// Builds `u` from `(eta, weight)` multipliers. Weights down to `-1e-12`
/// are clipped to zero; anything more negative is rejected. Repeated
/// breakpoints are merged.
pub fn reconstruct_utility(lambda: &[(f64, f64)]) -> Result<UtilityFunction> {
    let mut pairs: Vec<(f64, f64)> = Vec::with_capacity(lambda.len());
    for &(eta, w) in lambda {
        if !eta.is_finite() || !w.is_finite() {
            return Err(Error::InvalidArgument(format!("non-finite multiplier at eta = {eta}")));
        }
        if w < -1e-12 {
            return Err(Error::NegativeWeight { eta, weight: w });
        }
        pairs.push((eta, w.max(0.0)));
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut u = UtilityFunction::zero();
    for (eta, w) in pairs {
        if u.breakpoints.last() == Some(&eta) {
            *u.weights.last_mut().unwrap() += w;
        } else {
            u.breakpoints.push(eta);
            u.weights.push(w);
        }
    }
    Ok(u)
}

/// One parameter of the built-in multivariate family
/// `g(x; (w, eta)) = (<w, x> - eta)_-`.
#[derive(Debug, Clone, PartialEq)]
pub struct FamilyParam {
    pub weights: Vec<f64>,
    pub eta: f64,
}

impl FamilyParam {
    pub fn eval(&self, x: &[f64]) -> f64 {
        let s: f64 = self.weights.iter().zip(x).map(|(w, v)| w * v).sum();
        shortfall_minus(s, self.eta)
    }
}

/// Finite generator family over n-vectors with its vector benchmark.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorFamily {
    pub dim: usize,
    pub params: Vec<FamilyParam>,
    pub benchmark: VectorDistribution,
}

impl GeneratorFamily {
    /// Parameter set is the product of the weight vectors and the etas.
    pub fn new(weights: Vec<Vec<f64>>, etas: Vec<f64>, benchmark: VectorDistribution) -> Result<Self> {
        let dim = benchmark.dim();
        if weights.is_empty() || etas.is_empty() {
            return Err(Error::InvalidArgument("generator family needs weights and etas".into()));
        }
        for w in &weights {
            if w.len() != dim {
                return Err(Error::Dimension(format!("family weight of length {} for dimension {dim}", w.len())));
            }
            if w.iter().any(|v| !(*v >= 0.0)) {
                return Err(Error::InvalidArgument("family weights must be nonnegative".into()));
            }
        }
        let params = weights
            .iter()
            .flat_map(|w| etas.iter().map(move |&eta| FamilyParam { weights: w.clone(), eta }))
            .collect();
        Ok(GeneratorFamily { dim, params, benchmark })
    }

    pub fn benchmark_value(&self, k: usize) -> f64 {
        let p = &self.params[k];
        self.benchmark.expect(|y| p.eval(y))
    }
}

/// Constraint data for a generator family: `coeffs[k][pair] = g(z(pair); xi_k)`
/// and `rhs[k] = E[g(Y; xi_k)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FamilyRows {
    pub coeffs: Vec<Vec<f64>>,
    pub rhs: Vec<f64>,
}

pub fn family_rows(fam: &GeneratorFamily, z_values: &[Vec<f64>]) -> Result<FamilyRows> {
    if let Some(z) = z_values.iter().find(|z| z.len() != fam.dim) {
        return Err(Error::Dimension(format!("z of dimension {} against family dimension {}", z.len(), fam.dim)));
    }
    let coeffs = fam
        .params
        .iter()
        .map(|p| z_values.iter().map(|z| p.eval(z)).collect())
        .collect();
    let rhs = (0..fam.params.len()).map(|k| fam.benchmark_value(k)).collect();
    Ok(FamilyRows { coeffs, rhs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dist(s: &[f64], p: &[f64]) -> Distribution {
        Distribution::new(s.to_vec(), p.to_vec()).unwrap()
    }

    #[test]
    fn shortfall_values() {
        assert_eq!(shortfall_minus(3.0, 5.0), -2.0);
        assert_eq!(shortfall_minus(7.0, 5.0), 0.0);
        assert_eq!(shortfall_minus(5.0, 5.0), 0.0);
        assert_eq!(shortfall_plus(3.0, 5.0), 0.0);
        assert_eq!(shortfall_plus(7.0, 5.0), 2.0);
        let (x, eta) = (1.3, -2.7);
        assert!((shortfall_plus(x, eta) + shortfall_minus(x, eta) - 4.0).abs() < 1e-15);
    }

    #[test]
    fn curve_examples() {
        let c = benchmark_curve(&dist(&[0.0, 10.0], &[0.5, 0.5]), &[5.0]).unwrap();
        assert_eq!(c.curve, vec![-2.5]);
        let pm = Distribution::point_mass(4.0);
        assert_eq!(benchmark_curve(&pm, &[4.0]).unwrap().curve, vec![0.0]);
        assert_eq!(benchmark_curve(&pm, &[0.0, 4.0, 8.0]).unwrap().curve, vec![0.0, 0.0, -4.0]);
        assert!(benchmark_curve(&pm, &[]).is_err());
        assert!(benchmark_curve(&pm, &[1.0, 1.0]).is_err());
    }

    #[test]
    fn icv_examples() {
        let c = check_icv(&Distribution::point_mass(5.0), &Distribution::point_mass(3.0));
        assert!(c.holds);
        assert_eq!((c.worst_eta, c.worst_margin), (3.0, 0.0));

        let y = dist(&[-1.0, 2.0, 6.0], &[0.2, 0.5, 0.3]);
        let c = check_icv(&y, &y);
        assert!(c.holds);
        assert!(c.margins.iter().all(|m| m.1 == 0.0));

        let c = check_icv(&Distribution::point_mass(0.0), &Distribution::point_mass(3.0));
        assert!(!c.holds);
        assert_eq!((c.worst_eta, c.worst_margin), (3.0, -3.0));
    }

    #[test]
    fn icx_examples() {
        let c = check_icx(&Distribution::point_mass(5.0), &Distribution::point_mass(3.0));
        assert_eq!(c.margins, vec![(3.0, 2.0)]);
        assert!(!c.holds);
        let y = dist(&[1.0, 4.0], &[0.5, 0.5]);
        assert!(check_icx(&y, &y).margins.iter().all(|m| m.1 == 0.0));
        let c = check_icx(&Distribution::point_mass(0.0), &Distribution::point_mass(3.0));
        assert_eq!(c.margins, vec![(3.0, 0.0)]);
        assert!(c.holds);
    }

    #[test]
    fn utility_examples() {
        let u = reconstruct_utility(&[(4.0, 1.0)]).unwrap();
        assert_eq!(u.eval(2.0), -2.0);
        assert_eq!(u.eval(6.0), 0.0);
        let z = reconstruct_utility(&[(1.0, 0.0), (2.0, 0.0)]).unwrap();
        assert_eq!(z.eval(-100.0), 0.0);
        let u = reconstruct_utility(&[(0.0, 1.0), (4.0, 2.0)]).unwrap();
        assert_eq!(u.eval(-1.0), -11.0);
        assert_eq!(u.slope(-1.0), 3.0);
        assert_eq!(u.slope(1.0), 2.0);
        assert_eq!(u.slope(4.0), 0.0);
        assert!(matches!(
            reconstruct_utility(&[(1.0, -0.5)]),
            Err(Error::NegativeWeight { eta, .. }) if eta == 1.0
        ));
        let clipped = reconstruct_utility(&[(1.0, -1e-13)]).unwrap();
        assert_eq!(clipped.weights(), &[0.0]);
    }

    #[test]
    fn family_examples() {
        let bench = VectorDistribution::new(vec![vec![3.0, 3.0]], vec![1.0]).unwrap();
        let fam = GeneratorFamily::new(vec![vec![0.5, 0.5]], vec![4.0], bench.clone()).unwrap();
        let rows = family_rows(&fam, &[vec![10.0, 0.0]]).unwrap();
        assert_eq!(rows.coeffs, vec![vec![0.0]]);

        let fam = GeneratorFamily::new(vec![vec![1.0, 0.0]], vec![5.0], bench).unwrap();
        assert_eq!(family_rows(&fam, &[vec![1.0, 1.0]]).unwrap().rhs, vec![-2.0]);
        assert!(family_rows(&fam, &[vec![1.0]]).is_err());
    }

    #[test]
    fn scalar_family_matches_shortfall_rows() {
        let y = dist(&[1.0, 3.0], &[0.4, 0.6]);
        let bench = VectorDistribution::new(y.support().iter().map(|v| vec![*v]).collect(), y.probs().to_vec()).unwrap();
        let fam = GeneratorFamily::new(vec![vec![1.0]], y.support().to_vec(), bench).unwrap();
        let z: Vec<Vec<f64>> = [0.5, 2.0, 7.0].iter().map(|v| vec![*v]).collect();
        let rows = family_rows(&fam, &z).unwrap();
        let curve = benchmark_curve(&y, y.support()).unwrap();
        for (k, &eta) in y.support().iter().enumerate() {
            for (p, zv) in z.iter().enumerate() {
                assert_eq!(rows.coeffs[k][p], shortfall_minus(zv[0], eta));
            }
            assert_eq!(rows.rhs[k], curve.curve[k]);
        }
    }

    proptest! {
        #[test]
        fn shortfall_split(x in -1e6f64..1e6, eta in -1e6f64..1e6) {
            let lo = shortfall_minus(x, eta);
            let hi = shortfall_plus(x, eta);
            prop_assert!(lo <= 0.0 && hi >= 0.0);
            prop_assert_eq!(lo + hi, x - eta);
        }

        #[test]
        fn curve_is_one_lipschitz(
            pts in prop::collection::vec((-50.0f64..50.0, 0.01f64..1.0), 1..8),
            grid in prop::collection::btree_set(-800i32..800, 2..30),
        ) {
            let total: f64 = pts.iter().map(|p| p.1).sum();
            let y = Distribution::new(pts.iter().map(|p| p.0).collect(), pts.iter().map(|p| p.1 / total).collect());
            prop_assume!(y.is_ok());
            let y = y.unwrap();
            let grid: Vec<f64> = grid.into_iter().map(|g| g as f64 / 8.0).collect();
            let c = benchmark_curve(&y, &grid).unwrap();
            for w in c.grid.windows(2).zip(c.curve.windows(2)) {
                let (g, v) = w;
                prop_assert!((v[1] - v[0]).abs() <= (g[1] - g[0]) + 1e-12);
                prop_assert!(v[1] <= v[0] + 1e-12);
                prop_assert!(v[0] <= 0.0);
            }
        }

        #[test]
        fn family_members_increasing_concave(
            w in prop::collection::vec(0.0f64..3.0, 3),
            eta in -5.0f64..5.0,
            base in prop::collection::vec(-5.0f64..5.0, 3),
            dir in prop::collection::vec(-1.0f64..1.0, 3),
        ) {
            let p = FamilyParam { weights: w, eta };
            let h = 0.37;
            let at = |t: f64| -> Vec<f64> { base.iter().zip(&dir).map(|(b, d)| b + t * d).collect() };
            // concave along any line
            prop_assert!(p.eval(&at(-h)) + p.eval(&at(h)) <= 2.0 * p.eval(&at(0.0)) + 1e-12);
            // nondecreasing in each coordinate
            for i in 0..3 {
                let mut up = base.clone();
                up[i] += h;
                prop_assert!(p.eval(&up) >= p.eval(&base) - 1e-12);
            }
        }
    }
}
