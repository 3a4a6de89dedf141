//! Defender stage costs, the transformation to a discrete-time MDP, and
//! exact policy evaluation.
//!
//! The defender's problem is an average-cost semi-Markov decision process:
//! action `(p_i, tau_i)` at state `i` costs the expected attack loss plus
//! the scaled migration cost and occupies `tau_i` time units. Dividing the
//! stage cost by the period and mixing each transition row with the
//! identity turns it into an equivalent discrete-time average-cost MDP on
//! the same states, which the value-iteration solver consumes.

use nalgebra::{DMatrix, DVector};
use petgraph::graph::DiGraph;

use crate::attacker::resolved_best_responses;
use crate::model::{expected_overlap, DefenderPolicy, GameInstance, STOCHASTIC_TOL};
use crate::{Error, Result};

/// Entries below this are treated as structural zeros of a transition matrix.
pub const SUPPORT_TOL: f64 = 1e-12;

/// Transformed per-stage costs and transition matrix for a fixed policy.
#[derive(Debug, Clone, PartialEq)]
pub struct DtmdpView {
    /// `c_tilde[i]` — stage cost divided by the period at state `i`.
    pub c_tilde: Vec<f64>,
    /// Transformed row-stochastic transition matrix.
    pub p_tilde: Vec<Vec<f64>>,
    /// Transformation parameter used; lies in `(0, tau_lo)`.
    pub gamma: f64,
}

/// Exact long-run average cost of a stationary policy, by initial state.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyEvaluation {
    /// `avg_cost[i]` — cost per unit time starting from state `i`.
    pub avg_cost: Vec<f64>,
    /// Recurrent classes of the policy's transition matrix.
    pub recurrent_classes: Vec<Vec<usize>>,
    /// Average cost within each recurrent class, aligned with `recurrent_classes`.
    pub class_costs: Vec<f64>,
    pub is_unichain: bool,
}

fn check_probability_row(p: &[f64], n: usize) -> Result<()> {
    if p.len() != n {
        return Err(Error::InvalidParameter(format!(
            "probability row has length {}, expected {n}",
            p.len()
        )));
    }
    if p.iter().any(|&x| x < 0.0) {
        return Err(Error::InvalidParameter("probability row has a negative entry".into()));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > STOCHASTIC_TOL {
        return Err(Error::InvalidParameter(format!(
            "probability row sums to {sum}, expected 1"
        )));
    }
    Ok(())
}

/// Expected single-period defender cost of action `(p_i, tau_i)` at state `i`:
/// attack losses under each type's resolved best response, plus
/// `alpha`-scaled expected migration cost.
pub fn stage_cost(instance: &GameInstance, i: usize, p_i: &[f64], tau_i: f64) -> Result<f64> {
    check_probability_row(p_i, instance.n())?;
    let responses = resolved_best_responses(instance, p_i, tau_i)?;
    let mut cost = 0.0;
    for (l, ty) in instance.attackers.types.iter().enumerate() {
        let a = responses[l].attack;
        for (j, &p) in p_i.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let w = expected_overlap(tau_i, &instance.attack_time[a][j])?;
            cost += ty.prior * p * w * instance.loss[l][a][j];
        }
    }
    for (j, &p) in p_i.iter().enumerate() {
        cost += instance.alpha * p * instance.migration[i][j];
    }
    Ok(cost)
}

/// Default transformation parameter: half the period lower bound, which
/// satisfies `0 < gamma < tau_lo` for every admissible policy.
pub fn default_gamma(instance: &GameInstance) -> f64 {
    instance.tau_lo / 2.0
}

/// Transforms one action into its discrete-time equivalent:
/// `c_tilde = c / tau_i` and `p_tilde_ij = gamma (p_ij - delta_ij) / tau_i + delta_ij`.
pub fn transform_action(
    instance: &GameInstance,
    i: usize,
    p_i: &[f64],
    tau_i: f64,
    gamma: f64,
) -> Result<(f64, Vec<f64>)> {
    if !(gamma > 0.0 && gamma < instance.tau_lo) {
        return Err(Error::InvalidParameter(format!(
            "gamma {gamma} must lie in (0, {})",
            instance.tau_lo
        )));
    }
    let c = stage_cost(instance, i, p_i, tau_i)?;
    let row = transform_row(p_i, i, tau_i, gamma);
    Ok((c / tau_i, row))
}

/// Row transformation alone; preserves the row sum algebraically.
pub(crate) fn transform_row(p_i: &[f64], i: usize, tau_i: f64, gamma: f64) -> Vec<f64> {
    p_i.iter()
        .enumerate()
        .map(|(j, &p)| {
            let delta = if j == i { 1.0 } else { 0.0 };
            gamma * (p - delta) / tau_i + delta
        })
        .collect()
}

/// Transforms a whole policy into its [`DtmdpView`].
pub fn transform_policy(
    instance: &GameInstance,
    policy: &DefenderPolicy,
    gamma: f64,
) -> Result<DtmdpView> {
    let n = instance.n();
    let mut c_tilde = Vec::with_capacity(n);
    let mut p_tilde = Vec::with_capacity(n);
    for i in 0..n {
        let (c, row) = transform_action(instance, i, &policy.p[i], policy.tau[i], gamma)?;
        c_tilde.push(c);
        p_tilde.push(row);
    }
    Ok(DtmdpView {
        c_tilde,
        p_tilde,
        gamma,
    })
}

/// Recurrent classes of a transition matrix: strongly connected components
/// of the support graph with no outgoing edges. Returned in ascending order
/// of their smallest state.
pub fn recurrent_classes(p: &[Vec<f64>]) -> Vec<Vec<usize>> {
    let n = p.len();
    let mut graph = DiGraph::<(), ()>::new();
    let nodes: Vec<_> = (0..n).map(|_| graph.add_node(())).collect();
    for i in 0..n {
        for j in 0..n {
            if p[i][j] > SUPPORT_TOL {
                graph.add_edge(nodes[i], nodes[j], ());
            }
        }
    }
    let mut classes: Vec<Vec<usize>> = petgraph::algo::tarjan_scc(&graph)
        .into_iter()
        .map(|scc| {
            let mut c: Vec<usize> = scc.into_iter().map(|ix| ix.index()).collect();
            c.sort_unstable();
            c
        })
        .filter(|class| {
            class.iter().all(|&i| {
                (0..n).all(|j| p[i][j] <= SUPPORT_TOL || class.contains(&j))
            })
        })
        .collect();
    classes.sort_by_key(|c| c[0]);
    classes
}

/// Stationary distribution of the chain restricted to one recurrent class.
fn stationary_distribution(p: &[Vec<f64>], class: &[usize]) -> Result<Vec<f64>> {
    let m = class.len();
    if m == 1 {
        return Ok(vec![1.0]);
    }
    // (P_C^T - I) mu = 0 with the last balance equation replaced by sum(mu) = 1.
    let mut a = DMatrix::<f64>::zeros(m, m);
    for (col, &i) in class.iter().enumerate() {
        for (row, &j) in class.iter().enumerate() {
            a[(row, col)] = p[i][j] - if row == col { 1.0 } else { 0.0 };
        }
    }
    for col in 0..m {
        a[(m - 1, col)] = 1.0;
    }
    let mut b = DVector::<f64>::zeros(m);
    b[m - 1] = 1.0;
    let mu = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::InvalidParameter("singular stationary system".into()))?;
    Ok(mu.iter().map(|&x| x.max(0.0)).collect())
}

/// Exact long-run average cost `z(i)` of a stationary policy.
///
/// Within each recurrent class the value is the ratio of stationary expected
/// stage cost to stationary expected period length; transient states mix the
/// class values with their absorption probabilities. Handles multichain
/// policies (absorbing states are common at high migration cost).
pub fn evaluate_policy(instance: &GameInstance, policy: &DefenderPolicy) -> Result<PolicyEvaluation> {
    let n = instance.n();
    let mut costs = Vec::with_capacity(n);
    for i in 0..n {
        costs.push(stage_cost(instance, i, &policy.p[i], policy.tau[i])?);
    }

    let classes = recurrent_classes(&policy.p);
    let mut class_costs = Vec::with_capacity(classes.len());
    for class in &classes {
        let mu = stationary_distribution(&policy.p, class)?;
        let num: f64 = class.iter().zip(&mu).map(|(&i, &m)| m * costs[i]).sum();
        let den: f64 = class.iter().zip(&mu).map(|(&i, &m)| m * policy.tau[i]).sum();
        class_costs.push(num / den);
    }

    let mut in_class = vec![None; n];
    for (k, class) in classes.iter().enumerate() {
        for &i in class {
            in_class[i] = Some(k);
        }
    }
    let transient: Vec<usize> = (0..n).filter(|&i| in_class[i].is_none()).collect();

    let mut avg_cost = vec![0.0; n];
    for (i, slot) in in_class.iter().enumerate() {
        if let Some(k) = slot {
            avg_cost[i] = class_costs[*k];
        }
    }
    if !transient.is_empty() {
        // Absorption probabilities: (I - Q) H = B with Q the
        // transient-to-transient block and B the transient-to-class mass.
        let t = transient.len();
        let k = classes.len();
        let mut iq = DMatrix::<f64>::identity(t, t);
        for (r, &i) in transient.iter().enumerate() {
            for (c, &j) in transient.iter().enumerate() {
                iq[(r, c)] -= policy.p[i][j];
            }
        }
        let mut b = DMatrix::<f64>::zeros(t, k);
        for (r, &i) in transient.iter().enumerate() {
            for (kk, class) in classes.iter().enumerate() {
                b[(r, kk)] = class.iter().map(|&j| policy.p[i][j]).sum();
            }
        }
        let h = iq
            .lu()
            .solve(&b)
            .ok_or_else(|| Error::InvalidParameter("singular absorption system".into()))?;
        for (r, &i) in transient.iter().enumerate() {
            avg_cost[i] = (0..k).map(|kk| h[(r, kk)] * class_costs[kk]).sum();
        }
    }

    Ok(PolicyEvaluation {
        avg_cost,
        is_unichain: classes.len() == 1,
        recurrent_classes: classes,
        class_costs,
    })
}
