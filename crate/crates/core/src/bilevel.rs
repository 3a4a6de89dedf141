//! Exact solver for the per-state policy-improvement subproblem.
//!
//! For a fixed source state, candidate period and value vector, the
//! defender minimizes her transformed one-step cost over the destination
//! distribution, subject to every attacker type playing a best response
//! with ties broken in her favor. The only integrality in the equivalent
//! mixed-integer program is the per-type best-response selector, so the
//! problem is solved exactly by enumerating best-response profiles and
//! solving one small linear program per profile; weak incentive
//! inequalities realize the defender-favoring tie-break.

use std::sync::Arc;

use crate::model::{expected_overlap, GameInstance};
use crate::simplex::{solve_simplex_constrained, LpError};
use crate::{Error, Result};

/// Per-period tables shared by every state's subproblem at one grid point.
///
/// All entries depend on the period alone, so the solver builds them once
/// per grid point and reuses them across states and iterations.
#[derive(Debug, Clone, PartialEq)]
pub struct TauTables {
    pub tau: f64,
    /// `w[a][j] = E[(tau - xi_{a,j})^+]`.
    pub w: Vec<Vec<f64>>,
    /// `weighted_reward[l][a][j] = w[a][j] * R[l][a][j]`.
    pub weighted_reward: Vec<Vec<Vec<f64>>>,
    /// `weighted_loss[l][a][j] = pi_l * w[a][j] * C[l][a][j]`.
    pub weighted_loss: Vec<Vec<Vec<f64>>>,
    /// Resolved attack space of each type.
    pub attack_spaces: Vec<Vec<usize>>,
    /// Attacks of each type not strictly dominated in weighted reward;
    /// only these can appear in a best-response profile.
    pub candidates: Vec<Vec<usize>>,
}

impl TauTables {
    pub fn new(instance: &GameInstance, tau: f64) -> Result<Self> {
        let n = instance.n();
        let n_attacks = instance.attacks.len();
        let n_types = instance.attackers.types.len();

        let mut w = vec![vec![0.0; n]; n_attacks];
        for a in 0..n_attacks {
            for j in 0..n {
                w[a][j] = expected_overlap(tau, &instance.attack_time[a][j])?;
            }
        }
        let mut weighted_reward = vec![vec![vec![0.0; n]; n_attacks]; n_types];
        let mut weighted_loss = vec![vec![vec![0.0; n]; n_attacks]; n_types];
        for (l, ty) in instance.attackers.types.iter().enumerate() {
            for a in 0..n_attacks {
                for j in 0..n {
                    weighted_reward[l][a][j] = w[a][j] * instance.reward[l][a][j];
                    weighted_loss[l][a][j] = ty.prior * w[a][j] * instance.loss[l][a][j];
                }
            }
        }
        let attack_spaces: Vec<Vec<usize>> =
            (0..n_types).map(|l| instance.attack_space(l)).collect();

        // An attack is pruned only when some rival is strictly better against
        // every destination; weakly dominated attacks stay, since a zero-mass
        // tie can still make them the defender's preferred best response.
        let candidates = attack_spaces
            .iter()
            .enumerate()
            .map(|(l, space)| {
                space
                    .iter()
                    .copied()
                    .filter(|&a| {
                        !space.iter().any(|&b| {
                            b != a
                                && (0..n).all(|j| {
                                    weighted_reward[l][b][j] > weighted_reward[l][a][j] + 1e-12
                                })
                        })
                    })
                    .collect()
            })
            .collect();

        Ok(Self {
            tau,
            w,
            weighted_reward,
            weighted_loss,
            attack_spaces,
            candidates,
        })
    }
}

/// One state's bilevel subproblem at a fixed period.
#[derive(Debug, Clone)]
pub struct StateSubproblem {
    /// Source state index.
    pub state: usize,
    pub kappa: f64,
    pub gamma: f64,
    /// `theta[j] = alpha * m_ij + gamma * kappa * V[j]`.
    pub theta: Vec<f64>,
    /// `kappa * (1 - gamma / tau) * V[i]` — the part of the one-step value
    /// that does not depend on the destination distribution. Included so
    /// that values are comparable across periods.
    pub constant: f64,
    pub tables: Arc<TauTables>,
}

impl StateSubproblem {
    /// Assembles the per-state data on top of shared per-period tables.
    pub fn with_tables(
        instance: &GameInstance,
        tables: Arc<TauTables>,
        i: usize,
        kappa: f64,
        gamma: f64,
        v: &[f64],
    ) -> Result<Self> {
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("value vector must be finite".into()));
        }
        let theta: Vec<f64> = (0..instance.n())
            .map(|j| instance.alpha * instance.migration[i][j] + gamma * kappa * v[j])
            .collect();
        let constant = kappa * (1.0 - gamma / tables.tau) * v[i];
        Ok(Self {
            state: i,
            kappa,
            gamma,
            theta,
            constant,
            tables,
        })
    }

    pub fn tau(&self) -> f64 {
        self.tables.tau
    }
}

/// Builds a state subproblem from scratch (tables computed fresh).
pub fn build_subproblem(
    instance: &GameInstance,
    i: usize,
    tau: f64,
    kappa: f64,
    v: &[f64],
) -> Result<StateSubproblem> {
    let gamma = instance.gamma_or_default();
    let tables = Arc::new(TauTables::new(instance, tau)?);
    StateSubproblem::with_tables(instance, tables, i, kappa, gamma, v)
}

/// Exact optimum of one state subproblem.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSolution {
    /// Optimal destination distribution.
    pub p_i: Vec<f64>,
    /// Full one-step value: transformed stage cost plus the discounted
    /// continuation, constants included.
    pub value: f64,
    /// Chosen best-response profile, one global attack index per type.
    pub profile: Vec<usize>,
    /// Number of enumerated profiles whose incentive region was empty.
    pub infeasible_profiles: usize,
}

/// Enumerates best-response profiles, solving one linear program per
/// profile over the simplex with weak incentive constraints, and returns
/// the feasible profile of minimum objective. At least one profile is
/// always feasible, so the solve cannot fail on a valid subproblem.
pub fn solve_state(sub: &StateSubproblem) -> Result<StateSolution> {
    let t = &sub.tables;
    let n = sub.theta.len();
    let n_types = t.attack_spaces.len();

    let mut profile = vec![0usize; n_types];
    let mut best: Option<StateSolution> = None;
    let mut infeasible = 0usize;

    // Lexicographic enumeration over candidate attacks per type; the first
    // minimum encountered wins ties, making the result deterministic.
    let mut cursor = vec![0usize; n_types];
    'profiles: loop {
        for (l, &c) in cursor.iter().enumerate() {
            profile[l] = t.candidates[l][c];
        }

        let mut objective = sub.theta.clone();
        for (l, &al) in profile.iter().enumerate() {
            for (j, o) in objective.iter_mut().enumerate() {
                *o += t.weighted_loss[l][al][j];
            }
        }
        let mut incentive: Vec<Vec<f64>> = Vec::new();
        for (l, &al) in profile.iter().enumerate() {
            for &a in &t.attack_spaces[l] {
                if a == al {
                    continue;
                }
                incentive.push(
                    (0..n)
                        .map(|j| t.weighted_reward[l][al][j] - t.weighted_reward[l][a][j])
                        .collect(),
                );
            }
        }

        match solve_simplex_constrained(&objective, &incentive) {
            Ok(sol) => {
                let value = sol.objective / t.tau + sub.constant;
                if best.as_ref().map_or(true, |b| value < b.value) {
                    best = Some(StateSolution {
                        p_i: sol.x,
                        value,
                        profile: profile.clone(),
                        infeasible_profiles: 0,
                    });
                }
            }
            Err(LpError::Infeasible) => infeasible += 1,
            Err(LpError::Unbounded) => {
                return Err(Error::InvalidParameter(
                    "simplex-constrained program cannot be unbounded".into(),
                ))
            }
        }

        // Advance the lexicographic cursor.
        let mut l = n_types;
        while l > 0 {
            l -= 1;
            cursor[l] += 1;
            if cursor[l] < t.candidates[l].len() {
                continue 'profiles;
            }
            cursor[l] = 0;
        }
        break;
    }

    let mut solution = best.ok_or_else(|| {
        Error::InvalidParameter("no feasible best-response profile found".into())
    })?;
    solution.infeasible_profiles = infeasible;
    Ok(solution)
}

/// Emits the subproblem's mixed-integer quadratic program in LP file
/// format, with binary best-response selectors and the big-M linking
/// constraints, for cross-checking against external solvers.
///
/// `big_m` must dominate every attainable attacker reward; values of at
/// least twice the largest weighted reward are accepted (the documented
/// default `2 * tau_hi * max R` always is).
pub fn export_miqp(sub: &StateSubproblem, big_m: f64) -> Result<String> {
    use std::fmt::Write;

    let t = &sub.tables;
    let n = sub.theta.len();
    let max_wr = t
        .attack_spaces
        .iter()
        .enumerate()
        .flat_map(|(l, space)| {
            space
                .iter()
                .flat_map(move |&a| t.weighted_reward[l][a].iter().copied())
        })
        .fold(0.0f64, f64::max);
    if !(big_m.is_finite() && big_m >= 2.0 * max_wr && big_m > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "big-M {big_m} is below the safe bound {}",
            2.0 * max_wr
        )));
    }

    let mut out = String::new();
    let _ = writeln!(out, "\\ Bilevel subproblem: state {}, tau {}", sub.state, t.tau);
    let _ = writeln!(out, "Minimize");
    let _ = write!(out, " obj: ");
    let mut first = true;
    for (j, &th) in sub.theta.iter().enumerate() {
        if !first {
            let _ = write!(out, " + ");
        }
        let _ = write!(out, "{th} p{j}");
        first = false;
    }
    let _ = write!(out, " + [ ");
    first = true;
    for (l, space) in t.attack_spaces.iter().enumerate() {
        for &a in space {
            for j in 0..n {
                let coeff = 2.0 * t.weighted_loss[l][a][j];
                if coeff == 0.0 {
                    continue;
                }
                if !first {
                    let _ = write!(out, " + ");
                }
                let _ = write!(out, "{coeff} p{j} * n_t{l}_a{a}");
                first = false;
            }
        }
    }
    if first {
        let _ = write!(out, "0 p0 * p0");
    }
    let _ = writeln!(out, " ] / 2");

    let _ = writeln!(out, "Subject To");
    let _ = write!(out, " prob: ");
    for j in 0..n {
        if j > 0 {
            let _ = write!(out, " + ");
        }
        let _ = write!(out, "p{j}");
    }
    let _ = writeln!(out, " = 1");
    for (l, space) in t.attack_spaces.iter().enumerate() {
        let _ = write!(out, " pick_t{l}: ");
        for (k, &a) in space.iter().enumerate() {
            if k > 0 {
                let _ = write!(out, " + ");
            }
            let _ = write!(out, "n_t{l}_a{a}");
        }
        let _ = writeln!(out, " = 1");
    }
    for (l, space) in t.attack_spaces.iter().enumerate() {
        for &a in space {
            let _ = write!(out, " brlo_t{l}_a{a}: v{l}");
            for j in 0..n {
                let _ = write!(out, " - {} p{j}", t.weighted_reward[l][a][j]);
            }
            let _ = writeln!(out, " >= 0");
            let _ = write!(out, " brhi_t{l}_a{a}: v{l}");
            for j in 0..n {
                let _ = write!(out, " - {} p{j}", t.weighted_reward[l][a][j]);
            }
            let _ = writeln!(out, " + {big_m} n_t{l}_a{a} <= {big_m}");
        }
    }
    let _ = writeln!(out, "Bounds");
    for j in 0..n {
        let _ = writeln!(out, " 0 <= p{j} <= 1");
    }
    for l in 0..t.attack_spaces.len() {
        let _ = writeln!(out, " v{l} free");
    }
    let _ = writeln!(out, "Binaries");
    let _ = write!(out, " ");
    for (l, space) in t.attack_spaces.iter().enumerate() {
        for &a in space {
            let _ = write!(out, "n_t{l}_a{a} ");
        }
    }
    let _ = writeln!(out);
    let _ = writeln!(out, "End");
    Ok(out)
}
