use domlp::average::{relative_value_iteration, solve_average, solve_average_unconstrained};
use domlp::discounted::{bellman_residual, initial_weighted_value, solve_discounted};
use domlp::fixtures::{randomization_required, random_instance, rng, ti1, ti1_discounted, RandomInstanceConfig};
use domlp::lp::LpStatus;
use domlp::mdp::{Distribution, Mode, Policy};
use domlp::occupation::{optimality_residual, Dual};
use domlp::simulate::{brute_force_best_feasible, count_deterministic_policies, enumerate_deterministic_policies, simulate};

#[test]
fn ti1_discounted_binding_row_enters_bellman_equation() {
    let inst = ti1_discounted(0.5);
    // benchmark 4 per period, i.e. 8 in discounted-total units
    let bench = Distribution::point_mass(8.0);
    let rep = solve_discounted(&inst, &bench.into()).unwrap();
    assert_eq!(rep.status, LpStatus::Optimal);
    assert!((rep.objective - 4.0).abs() < 1e-9);
    let u = rep.dual.as_ref().unwrap().utility().unwrap();
    assert!(u.weights().iter().any(|w| *w > 0.0));
    let res = bellman_residual(&rep, &inst);
    assert!(res.iter().all(|r| r.residual <= 1e-6 * rep.scale()));
    // E(Y - 8)_- = 0 for a point mass at 8, so the dual objective is nu'v
    assert!((initial_weighted_value(&rep, &inst).unwrap() - rep.objective).abs() < 1e-9);
}

#[test]
fn unconstrained_average_matches_relative_value_iteration() {
    let cfg = RandomInstanceConfig { min_states: 5, max_states: 5, max_actions: 3, ..RandomInstanceConfig::default() };
    for seed in 0..10 {
        let inst = random_instance(&mut rng(seed), &cfg);
        let rep = solve_average_unconstrained(&inst).unwrap();
        let rvi = relative_value_iteration(&inst, 1e-12, 1_000_000).unwrap();
        assert!((rep.objective - rvi.gain).abs() < 1e-7);
        for r in optimality_residual(&rep, &inst) {
            if r.required {
                assert!(r.residual <= 1e-7, "seed {seed}: {r:?}");
            }
        }
        // RVI bias solves the same equations
        let Some(Dual::Average(d)) = &rep.dual else { panic!() };
        for s in 0..5 {
            let best = (0..inst.num_actions(s))
                .map(|a| inst.reward_r[s][a] + inst.transition[s][a].iter().zip(&rvi.bias).map(|(p, h)| p * h).sum::<f64>())
                .fold(f64::NEG_INFINITY, f64::max);
            assert!((rvi.gain + rvi.bias[s] - best).abs() < 1e-6);
            assert!(d.h[s].is_finite());
        }
    }
}

#[test]
fn oracle_on_golden_instance() {
    let r = brute_force_best_feasible(&ti1(), &Distribution::point_mass(4.0)).unwrap();
    assert_eq!(r.value, Some(2.0));
    assert_eq!(r.choice, Some(vec![0]));
    assert_eq!(r.evaluated, 2);
}

#[test]
fn only_randomized_policies_are_feasible() {
    let (inst, bench) = randomization_required();
    let oracle = brute_force_best_feasible(&inst, &bench).unwrap();
    assert_eq!(oracle.value, None);
    assert_eq!(oracle.evaluated, 2);
    let rep = solve_average(&inst, &bench.into()).unwrap();
    assert_eq!(rep.status, LpStatus::Optimal);
    let phi = rep.policy.unwrap();
    assert!(phi.probs[0][0] > 1e-6 && phi.probs[0][1] > 1e-6);
}

#[test]
fn enumeration_is_lexicographic_and_complete() {
    let mut inst = ti1();
    inst.num_states = 2;
    inst.actions = vec![vec!["a".into(), "b".into()], vec!["a".into(), "b".into(), "c".into()]];
    inst.transition = vec![vec![vec![0.5, 0.5]; 2], vec![vec![0.5, 0.5]; 3]];
    inst.reward_r = vec![vec![0.0; 2], vec![0.0; 3]];
    inst.reward_z = vec![vec![vec![0.0]; 2], vec![vec![0.0]; 3]];
    assert_eq!(count_deterministic_policies(&inst), 6.0);
    let choices: Vec<Vec<usize>> = enumerate_deterministic_policies(&inst)
        .unwrap()
        .map(|p: Policy| p.probs.iter().map(|row| row.iter().position(|&q| q == 1.0).unwrap()).collect())
        .collect();
    assert_eq!(choices, vec![vec![0, 0], vec![0, 1], vec![0, 2], vec![1, 0], vec![1, 1], vec![1, 2]]);
}

#[test]
fn trajectories_depend_only_on_seed_and_path() {
    let cfg = RandomInstanceConfig { max_states: 6, mode: Mode::Average, ..RandomInstanceConfig::default() };
    let inst = random_instance(&mut rng(3), &cfg);
    let p = Policy::uniform(&inst);
    let nu = vec![1.0 / inst.num_states as f64; inst.num_states];
    let a = simulate(&inst, &p, &nu, 500, 4, 11).unwrap();
    let b = simulate(&inst, &p, &nu, 500, 2, 11).unwrap();
    assert_eq!(a[..2], b[..]);
    let c = simulate(&inst, &p, &nu, 500, 1, 12).unwrap();
    assert_ne!(a[0].steps, c[0].steps);
}
