//! Shared helpers for the unit-test suites: random instance generators and
//! simplex-grid enumeration used by brute-force oracles.

use rand::Rng;

use crate::bilevel::StateSubproblem;
use crate::model::{
    AttackTimeModel, AttackerType, AttackerTypeSet, ConfigurationSpace, DefenderPolicy,
    GameInstance, StateDef,
};

/// Random instance with bounded score ranges; always passes validation.
pub(crate) fn random_instance(
    rng: &mut impl Rng,
    n: usize,
    n_types: usize,
    attacks_per_type: usize,
) -> GameInstance {
    let n_attacks = n_types * attacks_per_type;
    let attacks: Vec<String> = (0..n_attacks).map(|a| format!("a{a}")).collect();
    let mut priors: Vec<f64> = (0..n_types).map(|_| rng.gen_range(0.1..1.0)).collect();
    let s: f64 = priors.iter().sum();
    priors.iter_mut().for_each(|x| *x /= s);
    let types = (0..n_types)
        .map(|l| AttackerType {
            id: format!("t{l}"),
            prior: priors[l],
            attacks: (0..attacks_per_type)
                .map(|a| format!("a{}", l * attacks_per_type + a))
                .collect(),
        })
        .collect();
    let mut table = |hi: f64| -> Vec<Vec<Vec<f64>>> {
        (0..n_types)
            .map(|_| {
                (0..n_attacks)
                    .map(|_| (0..n).map(|_| rng.gen_range(0.0..hi)).collect())
                    .collect()
            })
            .collect()
    };
    let reward = table(5.0);
    let loss = table(5.0);
    let attack_time = (0..n_attacks)
        .map(|_| {
            (0..n)
                .map(|_| {
                    if rng.gen_bool(0.25) {
                        AttackTimeModel::Infinite
                    } else if rng.gen_bool(0.5) {
                        AttackTimeModel::deterministic(rng.gen_range(0.0..1.0))
                    } else {
                        AttackTimeModel::exponential(rng.gen_range(0.5..5.0))
                    }
                })
                .collect()
        })
        .collect();
    let migration = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    if i == j {
                        rng.gen_range(0.5..2.0)
                    } else {
                        rng.gen_range(0.0..3.0)
                    }
                })
                .collect()
        })
        .collect();
    GameInstance {
        space: ConfigurationSpace::new((0..n).map(|i| StateDef::plain(format!("s{i}"))).collect()),
        attackers: AttackerTypeSet { types },
        attacks,
        reward,
        loss,
        attack_time,
        migration,
        tau_lo: 0.5,
        tau_hi: 1.5,
        tau_step: 0.5,
        alpha: rng.gen_range(0.0..1.5),
        gamma: None,
    }
}

/// Random policy with all transition entries bounded away from zero, so the
/// chain is irreducible (unichain) and periods sit on the instance grid.
pub(crate) fn random_interior_policy(rng: &mut impl Rng, inst: &GameInstance) -> DefenderPolicy {
    let n = inst.n();
    let grid = inst.tau_grid();
    let p = (0..n)
        .map(|_| {
            let mut row: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
            let s: f64 = row.iter().sum();
            row.iter_mut().for_each(|x| *x /= s);
            row
        })
        .collect();
    let tau = (0..n).map(|_| grid[rng.gen_range(0..grid.len())]).collect();
    DefenderPolicy { p, tau }
}

/// All points of the probability simplex whose coordinates are multiples of
/// `1 / steps`.
pub(crate) fn simplex_grid(n: usize, steps: usize) -> Vec<Vec<f64>> {
    fn rec(n: usize, left: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if n == 1 {
            prefix.push(left);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for k in 0..=left {
            prefix.push(k);
            rec(n - 1, left - k, prefix, out);
            prefix.pop();
        }
    }
    let mut raw = Vec::new();
    rec(n, steps, &mut Vec::new(), &mut raw);
    raw.into_iter()
        .map(|v| v.into_iter().map(|k| k as f64 / steps as f64).collect())
        .collect()
}

/// Brute-force oracle for one bilevel subproblem: minimize over a simplex
/// grid, resolving the attacker at every point with defender-favoring ties.
pub(crate) fn bilevel_grid_oracle(sub: &StateSubproblem, steps: usize) -> f64 {
    let t = &sub.tables;
    let mut best = f64::INFINITY;
    for p in simplex_grid(sub.theta.len(), steps) {
        let mut obj: f64 = sub.theta.iter().zip(&p).map(|(a, b)| a * b).sum();
        for (l, space) in t.attack_spaces.iter().enumerate() {
            let reward = |a: usize| -> f64 {
                t.weighted_reward[l][a].iter().zip(&p).map(|(x, y)| x * y).sum()
            };
            let loss = |a: usize| -> f64 {
                t.weighted_loss[l][a].iter().zip(&p).map(|(x, y)| x * y).sum()
            };
            let best_r = space.iter().map(|&a| reward(a)).fold(f64::NEG_INFINITY, f64::max);
            let chosen_loss = space
                .iter()
                .filter(|&&a| best_r - reward(a) <= 1e-9)
                .map(|&a| loss(a))
                .fold(f64::INFINITY, f64::min);
            obj += chosen_loss;
        }
        best = best.min(obj / t.tau + sub.constant);
    }
    best
}
