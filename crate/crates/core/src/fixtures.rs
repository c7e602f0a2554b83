//! Golden instances and seeded random instance families used by the test
//! suites and the acceptance harness.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::mdp::{Distribution, MdpInstance, Mode};
use crate::occupation::{solve_primal, DominanceRows, Order};

/// One state, actions `a` and `b` (both self-loops), `r = (2, 5)`,
/// `z = (10, 0)`; pair with `Distribution::point_mass(4.0)`.
pub fn ti1() -> MdpInstance {
    MdpInstance {
        num_states: 1,
        actions: vec![vec!["a".into(), "b".into()]],
        transition: vec![vec![vec![1.0], vec![1.0]]],
        reward_r: vec![vec![2.0, 5.0]],
        reward_z: vec![vec![vec![10.0], vec![0.0]]],
        mode: Mode::Average,
        discount: None,
        initial: None,
    }
}

pub fn ti1_discounted(delta: f64) -> MdpInstance {
    MdpInstance { mode: Mode::Discounted, discount: Some(delta), initial: Some(vec![1.0]), ..ti1() }
}

/// Two states swapping deterministically, one action each, `z = (0, 10)`.
pub fn ti2() -> MdpInstance {
    MdpInstance {
        num_states: 2,
        actions: vec![vec!["go".into()], vec!["go".into()]],
        transition: vec![vec![vec![0.0, 1.0]], vec![vec![1.0, 0.0]]],
        reward_r: vec![vec![1.0], vec![3.0]],
        reward_z: vec![vec![vec![0.0]], vec![vec![10.0]]],
        mode: Mode::Average,
        discount: None,
        initial: None,
    }
}

#[derive(Debug, Clone)]
pub struct RandomInstanceConfig {
    pub min_states: usize,
    pub max_states: usize,
    pub max_actions: usize,
    pub mode: Mode,
    pub discount: f64,
    /// Probability that a transition entry is nonzero; 1.0 gives strictly
    /// positive kernels (every policy irreducible).
    pub density: f64,
    pub reward_range: (f64, f64),
    pub z_range: (f64, f64),
}

impl Default for RandomInstanceConfig {
    fn default() -> Self {
        RandomInstanceConfig {
            min_states: 1,
            max_states: 20,
            max_actions: 5,
            mode: Mode::Average,
            discount: 0.9,
            density: 1.0,
            reward_range: (0.0, 10.0),
            z_range: (-5.0, 10.0),
        }
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_row<R: Rng>(rng: &mut R, n: usize, density: f64) -> Vec<f64> {
    let mut row: Vec<f64> = (0..n)
        .map(|_| if rng.random::<f64>() < density { -rng.random::<f64>().max(1e-12).ln() } else { 0.0 })
        .collect();
    if row.iter().all(|v| *v == 0.0) {
        row[rng.random_range(0..n)] = 1.0;
    }
    let total: f64 = row.iter().sum();
    row.iter_mut().for_each(|v| *v /= total);
    // push rounding error onto the largest entry so the row sums to 1 within 1e-12
    let err = 1.0 - row.iter().sum::<f64>();
    let k = (0..n).max_by(|&a, &b| row[a].total_cmp(&row[b])).unwrap();
    row[k] += err;
    row
}

pub fn random_instance<R: Rng>(rng: &mut R, cfg: &RandomInstanceConfig) -> MdpInstance {
    let n = rng.random_range(cfg.min_states..=cfg.max_states);
    let counts: Vec<usize> = (0..n).map(|_| rng.random_range(1..=cfg.max_actions)).collect();
    let actions = counts.iter().map(|&c| (0..c).map(|a| format!("a{a}")).collect()).collect();
    let transition = counts
        .iter()
        .map(|&c| (0..c).map(|_| random_row(rng, n, cfg.density)).collect())
        .collect();
    let (rl, rh) = cfg.reward_range;
    let (zl, zh) = cfg.z_range;
    let reward_r = counts.iter().map(|&c| (0..c).map(|_| rng.random_range(rl..rh)).collect()).collect();
    let reward_z = counts
        .iter()
        .map(|&c| (0..c).map(|_| vec![rng.random_range(zl..zh)]).collect())
        .collect();
    let (discount, initial) = match cfg.mode {
        Mode::Average => (None, None),
        Mode::Discounted => (Some(cfg.discount), Some(random_row(rng, n, 1.0))),
    };
    MdpInstance { num_states: n, actions, transition, reward_r, reward_z, mode: cfg.mode, discount, initial }
}

/// A benchmark with at most `max_support` points that is attainable on
/// `inst`: it is built from the secondary-reward distribution of an exact
/// occupation measure `x0` (an LP vertex for a random objective) by
/// grouping support points and moving each group to its minimum, then
/// shifting down until `x0` satisfies every dominance row.
pub fn random_feasible_benchmark<R: Rng>(rng: &mut R, inst: &MdpInstance, max_support: usize) -> Distribution {
    let mut probe = inst.clone();
    let pairs = inst.pairs();
    for row in probe.reward_r.iter_mut() {
        for r in row.iter_mut() {
            *r = rng.random::<f64>();
        }
    }
    let x0 = solve_primal(&probe, &DominanceRows::empty(Order::Icv), inst.mode)
        .ok()
        .and_then(|r| r.occupation)
        .map(|o| o.values)
        .expect("random instance has a stable occupation measure");
    let mass: f64 = x0.iter().sum();
    let scale = match inst.mode {
        Mode::Average => 1.0,
        Mode::Discounted => 1.0 / (1.0 - inst.discount.unwrap()),
    };

    let mut pts: Vec<(f64, f64)> = pairs
        .iter()
        .filter(|(k, _)| x0[*k] > 1e-12)
        .map(|(k, (s, a))| (inst.z(s, a), x0[k] / mass))
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let q = rng.random_range(1..=max_support.min(pts.len()).max(1));
    let mut cuts: Vec<usize> = (1..pts.len()).collect();
    // choose q-1 random cut positions
    for i in (1..cuts.len()).rev() {
        let j = rng.random_range(0..=i);
        cuts.swap(i, j);
    }
    let mut cuts: Vec<usize> = cuts.into_iter().take(q - 1).collect();
    cuts.sort_unstable();
    cuts.push(pts.len());
    let mut start = 0;
    let mut groups: Vec<(f64, f64)> = Vec::new();
    for end in cuts {
        let p: f64 = pts[start..end].iter().map(|v| v.1).sum();
        groups.push((pts[start].0, p));
        start = end;
    }
    let (zmin, zmax) = inst.z_range();
    let spread = (zmax - zmin).max(1.0);

    let feasible = |b: &Distribution| -> bool {
        let rows = DominanceRows::scalar(inst, b, Order::Icv).unwrap();
        (0..rows.len()).all(|r| rows.margin(r, &x0) >= -1e-12)
    };
    let build = |shift: f64| -> Distribution {
        let total: f64 = groups.iter().map(|g| g.1).sum();
        Distribution::new(
            groups.iter().map(|g| scale * g.0 - shift).collect(),
            groups.iter().map(|g| g.1 / total).collect(),
        )
        .unwrap()
    };
    let jitter = rng.random::<f64>();
    for level in [0.0, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0, 2.0] {
        let b = build(level * (0.5 + jitter) * spread * scale);
        if feasible(&b) {
            return b;
        }
    }
    // every support point below min z: all rows are slack or vacuous
    let top = groups.iter().map(|g| g.0).fold(f64::NEG_INFINITY, f64::max);
    build(scale * top - zmin.min(scale * zmin) + 1.0)
}

/// Benchmark that no policy can violate.
pub fn vacuous_benchmark(inst: &MdpInstance) -> Distribution {
    let (zmin, _) = inst.z_range();
    let scale = match inst.mode {
        Mode::Average => 1.0,
        Mode::Discounted => 1.0 / (1.0 - inst.discount.unwrap()),
    };
    Distribution::point_mass(zmin.min(scale * zmin) - 1e6)
}

/// Instance where every deterministic policy violates a dominance row but a
/// randomized one is feasible. Always taking `a` in state 0 gives
/// `z ~ {0: 1/4, 10: 3/4}` and fails at `eta = 4`; always taking `b` gives
/// `z = 4` and fails at `eta = 8`; mixing them satisfies both.
pub fn randomization_required() -> (MdpInstance, Distribution) {
    let inst = MdpInstance {
        num_states: 2,
        actions: vec![vec!["a".into(), "b".into()], vec!["back".into()]],
        transition: vec![vec![vec![0.0, 1.0], vec![1.0, 0.0]], vec![vec![1.0 / 3.0, 2.0 / 3.0]]],
        reward_r: vec![vec![1.0, 1.0], vec![1.0]],
        reward_z: vec![vec![vec![0.0], vec![4.0]], vec![vec![10.0]]],
        mode: Mode::Average,
        discount: None,
        initial: None,
    };
    let bench = Distribution::new(vec![0.0, 4.0, 8.0], vec![0.15, 0.475, 0.375]).unwrap();
    (inst, bench)
}
