//! Finite MDP data model: instances, finitely supported distributions,
//! stationary randomized policies, and the dense state-action pair index.

use std::fmt;

use crate::error::{Error, Result};

/// Tolerance for probability vectors read from instance files.
pub const PROB_TOL: f64 = 1e-12;

/// Tolerance for policy rows.
pub const POLICY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Average,
    Discounted,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mode::Average => f.write_str("average"),
            Mode::Discounted => f.write_str("discounted"),
        }
    }
}

/// A finite MDP. Transition rows, rewards and secondary rewards are indexed
/// `[state][action]`; the secondary reward `z` is a vector of common dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct MdpInstance {
    pub num_states: usize,
    pub actions: Vec<Vec<String>>,
    pub transition: Vec<Vec<Vec<f64>>>,
    pub reward_r: Vec<Vec<f64>>,
    pub reward_z: Vec<Vec<Vec<f64>>>,
    pub mode: Mode,
    pub discount: Option<f64>,
    pub initial: Option<Vec<f64>>,
}

/// One failed invariant of an [`MdpInstance`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NoStates,
    ShapeMismatch { field: &'static str, expected: usize, found: usize },
    EmptyActionSet { state: usize },
    PairShape { field: &'static str, state: usize, expected: usize, found: usize },
    RowLength { state: usize, action: usize, expected: usize, found: usize },
    NegativeProbability { state: usize, action: usize, next: usize, value: f64 },
    RowSum { state: usize, action: usize, defect: f64 },
    NonFinite { field: &'static str, state: usize, action: usize },
    ZDimension { state: usize, action: usize, expected: usize, found: usize },
    MissingDiscount,
    DiscountOutOfRange { value: f64 },
    MissingInitial,
    InitialNegative { state: usize, value: f64 },
    InitialSum { defect: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Violation::*;
        match self {
            NoStates => write!(f, "instance has no states"),
            ShapeMismatch { field, expected, found } => {
                write!(f, "{field}: expected {expected} per-state entries, found {found}")
            }
            EmptyActionSet { state } => write!(f, "state {state} has no actions"),
            PairShape { field, state, expected, found } => write!(
                f,
                "{field} at state {state}: expected {expected} action entries, found {found}"
            ),
            RowLength { state, action, expected, found } => write!(
                f,
                "P({state},{action}) has {found} entries, expected {expected}"
            ),
            NegativeProbability { state, action, next, value } => {
                write!(f, "P({next}|{state},{action}) = {value} is negative")
            }
            RowSum { state, action, defect } => {
                write!(f, "P(.|{state},{action}) sums to 1 - {defect}")
            }
            NonFinite { field, state, action } => {
                write!(f, "{field}({state},{action}) is not finite")
            }
            ZDimension { state, action, expected, found } => write!(
                f,
                "z({state},{action}) has dimension {found}, expected {expected}"
            ),
            MissingDiscount => write!(f, "discounted mode requires a discount factor"),
            DiscountOutOfRange { value } => write!(f, "discount {value} not in (0,1)"),
            MissingInitial => write!(f, "discounted mode requires an initial distribution"),
            InitialNegative { state, value } => write!(f, "initial({state}) = {value} is negative"),
            InitialSum { defect } => write!(f, "initial distribution sums to 1 - {defect}"),
        }
    }
}

impl MdpInstance {
    /// Returns every invariant violation; empty iff the instance is valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let n = self.num_states;
        if n == 0 {
            out.push(Violation::NoStates);
        }
        for (field, len) in [
            ("actions", self.actions.len()),
            ("P", self.transition.len()),
            ("r", self.reward_r.len()),
            ("z", self.reward_z.len()),
        ] {
            if len != n {
                out.push(Violation::ShapeMismatch { field, expected: n, found: len });
            }
        }
        if !out.is_empty() {
            return out;
        }

        let z_dim = self.z_dim();
        for s in 0..n {
            let na = self.actions[s].len();
            if na == 0 {
                out.push(Violation::EmptyActionSet { state: s });
            }
            let mut shape_ok = true;
            for (field, len) in [
                ("P", self.transition[s].len()),
                ("r", self.reward_r[s].len()),
                ("z", self.reward_z[s].len()),
            ] {
                if len != na {
                    out.push(Violation::PairShape { field, state: s, expected: na, found: len });
                    shape_ok = false;
                }
            }
            if !shape_ok {
                continue;
            }
            for a in 0..na {
                let row = &self.transition[s][a];
                if row.len() != n {
                    out.push(Violation::RowLength { state: s, action: a, expected: n, found: row.len() });
                } else {
                    let mut sum = 0.0;
                    let mut finite = true;
                    for (j, &p) in row.iter().enumerate() {
                        if !p.is_finite() {
                            finite = false;
                        } else if p < 0.0 {
                            out.push(Violation::NegativeProbability { state: s, action: a, next: j, value: p });
                        }
                        sum += p;
                    }
                    if !finite {
                        out.push(Violation::NonFinite { field: "P", state: s, action: a });
                    } else if (sum - 1.0).abs() > PROB_TOL {
                        out.push(Violation::RowSum { state: s, action: a, defect: 1.0 - sum });
                    }
                }
                if !self.reward_r[s][a].is_finite() {
                    out.push(Violation::NonFinite { field: "r", state: s, action: a });
                }
                let z = &self.reward_z[s][a];
                if z.len() != z_dim || z.is_empty() {
                    out.push(Violation::ZDimension { state: s, action: a, expected: z_dim.max(1), found: z.len() });
                } else if z.iter().any(|v| !v.is_finite()) {
                    out.push(Violation::NonFinite { field: "z", state: s, action: a });
                }
            }
        }

        if self.mode == Mode::Discounted {
            match self.discount {
                None => out.push(Violation::MissingDiscount),
                Some(d) if !(d > 0.0 && d < 1.0) => out.push(Violation::DiscountOutOfRange { value: d }),
                _ => {}
            }
            if self.initial.is_none() {
                out.push(Violation::MissingInitial);
            }
        }
        if let Some(nu) = &self.initial {
            if nu.len() != n {
                out.push(Violation::ShapeMismatch { field: "initial", expected: n, found: nu.len() });
            } else {
                for (j, &v) in nu.iter().enumerate() {
                    if !(v >= 0.0) {
                        out.push(Violation::InitialNegative { state: j, value: v });
                    }
                }
                let sum: f64 = nu.iter().sum();
                if (sum - 1.0).abs() > PROB_TOL {
                    out.push(Violation::InitialSum { defect: 1.0 - sum });
                }
            }
        }
        out
    }

    /// Errors with the first violation when the instance is invalid.
    pub fn ensure_valid(&self) -> Result<()> {
        let v = self.validate();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidInstance(v))
        }
    }

    /// Dimension of the secondary reward, taken from the first feasible pair.
    pub fn z_dim(&self) -> usize {
        self.reward_z
            .iter()
            .flat_map(|row| row.iter())
            .map(|z| z.len())
            .next()
            .unwrap_or(1)
    }

    pub fn num_actions(&self, s: usize) -> usize {
        self.actions[s].len()
    }

    /// Scalar secondary reward; the first coordinate of `z(s,a)`.
    pub fn z(&self, s: usize, a: usize) -> f64 {
        self.reward_z[s][a][0]
    }

    pub fn pairs(&self) -> PairIndex {
        PairIndex::new(self)
    }

    pub fn discount_factor(&self) -> Result<f64> {
        match (self.mode, self.discount) {
            (Mode::Discounted, Some(d)) if d > 0.0 && d < 1.0 => Ok(d),
            (Mode::Discounted, Some(d)) => Err(Error::InvalidInstance(vec![Violation::DiscountOutOfRange { value: d }])),
            (Mode::Discounted, None) => Err(Error::InvalidInstance(vec![Violation::MissingDiscount])),
            (Mode::Average, _) => Err(Error::ModeMismatch { expected: Mode::Discounted, found: Mode::Average }),
        }
    }

    pub fn initial_distribution(&self) -> Result<&[f64]> {
        self.initial
            .as_deref()
            .ok_or_else(|| Error::InvalidInstance(vec![Violation::MissingInitial]))
    }

    /// Lowest and highest scalar secondary reward over all feasible pairs.
    pub fn z_range(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for row in &self.reward_z {
            for z in row {
                lo = lo.min(z[0]);
                hi = hi.max(z[0]);
            }
        }
        (lo, hi)
    }
}

/// Dense state-major enumeration of the feasible pairs K.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairIndex {
    pairs: Vec<(usize, usize)>,
    offsets: Vec<usize>,
}

impl PairIndex {
    pub fn new(inst: &MdpInstance) -> Self {
        let mut pairs = Vec::new();
        let mut offsets = Vec::with_capacity(inst.num_states + 1);
        for s in 0..inst.num_states {
            offsets.push(pairs.len());
            for a in 0..inst.actions[s].len() {
                pairs.push((s, a));
            }
        }
        offsets.push(pairs.len());
        PairIndex { pairs, offsets }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn index(&self, s: usize, a: usize) -> usize {
        debug_assert!(self.offsets[s] + a < self.offsets[s + 1]);
        self.offsets[s] + a
    }

    pub fn pair(&self, k: usize) -> (usize, usize) {
        self.pairs[k]
    }

    /// Index range of the pairs belonging to state `s`.
    pub fn state_range(&self, s: usize) -> std::ops::Range<usize> {
        self.offsets[s]..self.offsets[s + 1]
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, (usize, usize))> + '_ {
        self.pairs.iter().copied().enumerate()
    }
}

/// Materializes the feasible pairs with their dense indices.
pub fn enumerate_pairs(inst: &MdpInstance) -> Vec<(usize, usize)> {
    PairIndex::new(inst).pairs
}

/// A finitely supported real distribution: strictly increasing support,
/// probabilities summing to one. Used both for benchmarks and for the
/// distributions being compared against them.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    support: Vec<f64>,
    probs: Vec<f64>,
}

pub type Benchmark = Distribution;

impl Distribution {
    /// Sorts the support and merges duplicate points by summing their mass.
    pub fn new(support: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        if support.len() != probs.len() {
            return Err(Error::InvalidDistribution(format!(
                "support has {} points but probs has {}",
                support.len(),
                probs.len()
            )));
        }
        if support.is_empty() {
            return Err(Error::InvalidDistribution("empty support".into()));
        }
        if support.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidDistribution("non-finite support point".into()));
        }
        if let Some(p) = probs.iter().find(|p| !(**p >= 0.0) || !p.is_finite()) {
            return Err(Error::InvalidDistribution(format!("invalid probability {p}")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > PROB_TOL {
            return Err(Error::InvalidDistribution(format!("probabilities sum to {total}")));
        }
        let mut pts: Vec<(f64, f64)> = support.into_iter().zip(probs).collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut support: Vec<f64> = Vec::with_capacity(pts.len());
        let mut probs: Vec<f64> = Vec::with_capacity(pts.len());
        for (x, p) in pts {
            if support.last() == Some(&x) {
                *probs.last_mut().unwrap() += p;
            } else {
                support.push(x);
                probs.push(p);
            }
        }
        Ok(Distribution { support, probs })
    }

    pub fn point_mass(x: f64) -> Self {
        Distribution { support: vec![x], probs: vec![1.0] }
    }

    pub fn support(&self) -> &[f64] {
        &self.support
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.support.iter().copied().zip(self.probs.iter().copied())
    }

    pub fn expect(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.iter().map(|(x, p)| p * f(x)).sum()
    }

    /// Multiplies every support point by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut support: Vec<f64> = self.support.iter().map(|x| x * factor).collect();
        let mut probs = self.probs.clone();
        if factor < 0.0 {
            support.reverse();
            probs.reverse();
        }
        Distribution { support, probs }
    }
}

/// Finitely supported distribution over n-vectors, used as the benchmark of
/// a generator family.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorDistribution {
    pub points: Vec<Vec<f64>>,
    pub probs: Vec<f64>,
}

impl VectorDistribution {
    pub fn new(points: Vec<Vec<f64>>, probs: Vec<f64>) -> Result<Self> {
        if points.len() != probs.len() || points.is_empty() {
            return Err(Error::InvalidDistribution("vector benchmark shape".into()));
        }
        let dim = points[0].len();
        if dim == 0 || points.iter().any(|p| p.len() != dim) {
            return Err(Error::InvalidDistribution("vector benchmark points differ in dimension".into()));
        }
        if probs.iter().any(|p| !(*p >= 0.0)) {
            return Err(Error::InvalidDistribution("negative probability".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > PROB_TOL {
            return Err(Error::InvalidDistribution(format!("probabilities sum to {total}")));
        }
        Ok(VectorDistribution { points, probs })
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn expect(&self, f: impl Fn(&[f64]) -> f64) -> f64 {
        self.points.iter().zip(&self.probs).map(|(x, p)| p * f(x)).sum()
    }
}

/// Stationary randomized Markov policy `phi(a|s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    pub probs: Vec<Vec<f64>>,
}

impl Policy {
    pub fn deterministic(inst: &MdpInstance, choice: &[usize]) -> Self {
        let probs = (0..inst.num_states)
            .map(|s| {
                let mut row = vec![0.0; inst.num_actions(s)];
                row[choice[s]] = 1.0;
                row
            })
            .collect();
        Policy { probs }
    }

    pub fn uniform(inst: &MdpInstance) -> Self {
        let probs = (0..inst.num_states)
            .map(|s| {
                let na = inst.num_actions(s);
                vec![1.0 / na as f64; na]
            })
            .collect();
        Policy { probs }
    }

    /// Checks shape against `inst` and that every row is a distribution.
    pub fn validate(&self, inst: &MdpInstance) -> Result<()> {
        if self.probs.len() != inst.num_states {
            return Err(Error::InvalidPolicy(format!(
                "policy covers {} states, instance has {}",
                self.probs.len(),
                inst.num_states
            )));
        }
        for (s, row) in self.probs.iter().enumerate() {
            if row.len() != inst.num_actions(s) {
                return Err(Error::InvalidPolicy(format!("state {s}: wrong number of actions")));
            }
            if row.iter().any(|p| !(*p >= 0.0)) {
                return Err(Error::InvalidPolicy(format!("state {s}: negative probability")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > POLICY_TOL {
                return Err(Error::InvalidPolicy(format!("state {s}: row sums to {sum}")));
            }
        }
        Ok(())
    }

    /// Induced state-to-state kernel `P_phi(j|s)`.
    pub fn induced_kernel(&self, inst: &MdpInstance) -> Vec<Vec<f64>> {
        let n = inst.num_states;
        (0..n)
            .map(|s| {
                let mut row = vec![0.0; n];
                for (a, &p) in self.probs[s].iter().enumerate() {
                    if p == 0.0 {
                        continue;
                    }
                    for (j, &q) in inst.transition[s][a].iter().enumerate() {
                        row[j] += p * q;
                    }
                }
                row
            })
            .collect()
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn single_state(actions: usize) -> MdpInstance {
        MdpInstance {
            num_states: 1,
            actions: vec![(0..actions).map(|a| format!("a{a}")).collect()],
            transition: vec![vec![vec![1.0]; actions]],
            reward_r: vec![vec![0.0; actions]],
            reward_z: vec![vec![vec![0.0]; actions]],
            mode: Mode::Average,
            discount: None,
            initial: None,
        }
    }

    fn with_action_counts(counts: &[usize]) -> MdpInstance {
        let n = counts.len();
        MdpInstance {
            num_states: n,
            actions: counts.iter().map(|&c| (0..c).map(|a| format!("a{a}")).collect()).collect(),
            transition: counts.iter().map(|&c| vec![vec![1.0 / n as f64; n]; c]).collect(),
            reward_r: counts.iter().map(|&c| vec![0.0; c]).collect(),
            reward_z: counts.iter().map(|&c| vec![vec![0.0]; c]).collect(),
            mode: Mode::Average,
            discount: None,
            initial: None,
        }
    }

    #[test]
    fn identity_kernel_is_valid() {
        assert!(single_state(1).validate().is_empty());
    }

    #[test]
    fn short_row_reports_defect() {
        let mut inst = with_action_counts(&[2, 2]);
        inst.transition[1][0] = vec![0.4, 0.5];
        let v = inst.validate();
        assert_eq!(v.len(), 1);
        match v[0] {
            Violation::RowSum { state, action, defect } => {
                assert_eq!((state, action), (1, 0));
                assert!((defect - 0.1).abs() < 1e-12);
            }
            ref other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_action_set_is_named() {
        let inst = with_action_counts(&[2, 0]);
        assert_eq!(inst.validate(), vec![Violation::EmptyActionSet { state: 1 }]);
    }

    #[test]
    fn discounted_needs_discount_and_initial() {
        let mut inst = single_state(1);
        inst.mode = Mode::Discounted;
        let v = inst.validate();
        assert!(v.contains(&Violation::MissingDiscount));
        assert!(v.contains(&Violation::MissingInitial));
        inst.discount = Some(1.0);
        inst.initial = Some(vec![0.5]);
        let v = inst.validate();
        assert!(v.contains(&Violation::DiscountOutOfRange { value: 1.0 }));
        assert!(matches!(v.last(), Some(Violation::InitialSum { .. })));
    }

    #[test]
    fn mixed_z_dimension_rejected() {
        let mut inst = with_action_counts(&[2]);
        inst.reward_z[0][1] = vec![0.0, 1.0];
        assert!(matches!(inst.validate()[0], Violation::ZDimension { state: 0, action: 1, .. }));
    }

    #[test]
    fn pair_enumeration_is_state_major() {
        let idx = PairIndex::new(&with_action_counts(&[2, 2]));
        assert_eq!(idx.len(), 4);
        assert_eq!(idx.index(1, 1), 3);

        let idx = PairIndex::new(&single_state(1));
        assert_eq!(enumerate_pairs(&single_state(1)), vec![(0, 0)]);
        assert_eq!(idx.index(0, 0), 0);

        let inst = with_action_counts(&[1, 3]);
        let idx = PairIndex::new(&inst);
        assert_eq!(idx.len(), 4);
        assert_eq!(idx.index(1, 2), 3);
        assert_eq!(enumerate_pairs(&inst), enumerate_pairs(&inst));
        for (k, (s, a)) in idx.iter() {
            assert_eq!(idx.index(s, a), k);
        }
    }

    #[test]
    fn distribution_merges_duplicates() {
        let d = Distribution::new(vec![3.0, 1.0, 3.0], vec![0.25, 0.5, 0.25]).unwrap();
        assert_eq!(d.support(), &[1.0, 3.0]);
        assert_eq!(d.probs(), &[0.5, 0.5]);
        assert!(Distribution::new(vec![1.0], vec![0.9]).is_err());
        assert!(Distribution::new(vec![], vec![]).is_err());
    }

    #[test]
    fn policy_rows_checked() {
        let inst = single_state(2);
        assert!(Policy { probs: vec![vec![0.5, 0.5]] }.validate(&inst).is_ok());
        assert!(Policy { probs: vec![vec![0.5, 0.4]] }.validate(&inst).is_err());
        assert!(Policy { probs: vec![vec![1.0]] }.validate(&inst).is_err());
    }
}
