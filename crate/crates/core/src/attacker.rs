//! Attacker best-response evaluation.
//!
//! Each attacker type observes the previous configuration state, knows the
//! defender's announced strategy and plays a myopic best response per
//! defending period. Ties among equally rewarding attacks are broken in the
//! defender's favor (the strong Stackelberg convention), then by attack id
//! for determinism.

use crate::model::{expected_overlap, GameInstance};
use crate::{Error, Result};

/// Absolute tolerance for detecting attacker-reward ties.
pub const TIE_TOL: f64 = 1e-9;

/// The resolved best response of one attacker type.
#[derive(Debug, Clone, PartialEq)]
pub struct BestResponse {
    /// Index of the chosen attack in the instance's global attack list.
    pub attack: usize,
    /// Expected attacker reward of the chosen attack (and of every tied one).
    pub value: f64,
    /// All attacks attaining the maximum within [`TIE_TOL`].
    pub tie_set: Vec<usize>,
}

/// Expected reward per defending period for type `l` playing attack `a`
/// against the mixed destination row `p_i` with period `tau_i`:
/// the sum over destinations of `p_ij * E[(tau_i - xi_{a,j})^+] * R[l][a][j]`.
pub fn expected_attack_reward(
    instance: &GameInstance,
    p_i: &[f64],
    tau_i: f64,
    l: usize,
    a: usize,
) -> Result<f64> {
    if !instance.attack_space(l).contains(&a) {
        return Err(Error::AttackNotInSpace {
            attack: instance.attacks.get(a).cloned().unwrap_or_else(|| a.to_string()),
            attacker_type: instance.attackers.types[l].id.clone(),
        });
    }
    let mut total = 0.0;
    for (j, &p) in p_i.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        let w = expected_overlap(tau_i, &instance.attack_time[a][j])?;
        total += p * w * instance.reward[l][a][j];
    }
    Ok(total)
}

/// Defender's expected loss when type `l` plays attack `a`:
/// the sum over destinations of `p_ij * E[(tau_i - xi_{a,j})^+] * C[l][a][j]`.
pub fn expected_attack_loss(
    instance: &GameInstance,
    p_i: &[f64],
    tau_i: f64,
    l: usize,
    a: usize,
) -> Result<f64> {
    let mut total = 0.0;
    for (j, &p) in p_i.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        let w = expected_overlap(tau_i, &instance.attack_time[a][j])?;
        total += p * w * instance.loss[l][a][j];
    }
    Ok(total)
}

/// All argmax attacks of type `l` together with the common value.
///
/// The tie set is never empty and is ordered by global attack index.
pub fn best_response_set(
    instance: &GameInstance,
    p_i: &[f64],
    tau_i: f64,
    l: usize,
) -> Result<BestResponse> {
    let space = instance.attack_space(l);
    debug_assert!(!space.is_empty(), "attack space of type {l} is empty");
    let mut rewards = Vec::with_capacity(space.len());
    let mut best = f64::NEG_INFINITY;
    for &a in &space {
        let r = expected_attack_reward(instance, p_i, tau_i, l, a)?;
        if r > best {
            best = r;
        }
        rewards.push((a, r));
    }
    let tie_set: Vec<usize> = rewards
        .iter()
        .filter(|(_, r)| best - r <= TIE_TOL)
        .map(|(a, _)| *a)
        .collect();
    Ok(BestResponse {
        attack: tie_set[0],
        value: best,
        tie_set,
    })
}

/// Resolves each type's tie set in the defender's favor.
///
/// Within a tie set the attack minimizing the defender's expected loss wins;
/// remaining ties go to the smallest attack id.
pub fn break_ties_for_defender(
    instance: &GameInstance,
    p_i: &[f64],
    tau_i: f64,
    tie_sets: &[BestResponse],
) -> Result<Vec<BestResponse>> {
    let mut resolved = Vec::with_capacity(tie_sets.len());
    for (l, br) in tie_sets.iter().enumerate() {
        let mut chosen = br.tie_set[0];
        let mut chosen_loss = expected_attack_loss(instance, p_i, tau_i, l, chosen)?;
        for &a in &br.tie_set[1..] {
            let loss = expected_attack_loss(instance, p_i, tau_i, l, a)?;
            let better = loss < chosen_loss - TIE_TOL;
            let tied = (loss - chosen_loss).abs() <= TIE_TOL
                && instance.attacks[a] < instance.attacks[chosen];
            if better || tied {
                chosen = a;
                chosen_loss = loss;
            }
        }
        resolved.push(BestResponse {
            attack: chosen,
            value: br.value,
            tie_set: br.tie_set.clone(),
        });
    }
    Ok(resolved)
}

/// Best response of every type with defender-favoring tie resolution.
pub fn resolved_best_responses(
    instance: &GameInstance,
    p_i: &[f64],
    tau_i: f64,
) -> Result<Vec<BestResponse>> {
    let sets: Result<Vec<BestResponse>> = (0..instance.attackers.types.len())
        .map(|l| best_response_set(instance, p_i, tau_i, l))
        .collect();
    break_ties_for_defender(instance, p_i, tau_i, &sets?)
}
