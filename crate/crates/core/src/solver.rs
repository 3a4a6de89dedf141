//! Value iteration and relative value iteration over the transformed game.
//!
//! Each iteration runs one policy-improvement pass: for every state it
//! scans the defending-period grid and solves the bilevel subproblem at
//! each grid point, keeping the best (period, distribution) pair. Damping
//! by a nondecreasing sequence `kappa_t` keeps the iterates' span bounded;
//! iteration stops when the span of the iterate difference falls below the
//! configured threshold, which certifies an epsilon-optimal policy.

use std::sync::Arc;

use crate::bilevel::{solve_state, StateSubproblem, TauTables};
use crate::model::{DefenderPolicy, GameInstance};
use crate::smdp::{evaluate_policy, PolicyEvaluation};
use crate::{Error, Result};

/// How the stopping quantity treats the sign of iterate differences.
///
/// `Signed` (default) is the span seminorm of `V^t - V^{t-1}`; `Absolute`
/// applies the span to the entrywise absolute differences instead, which
/// mixed-sign difference vectors can fool.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SpanMode {
    #[default]
    Signed,
    Absolute,
}

/// The damping sequence `kappa_t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KappaSchedule {
    /// `kappa_0 = 1/2`, then `kappa_t = t / (t + 1)`.
    Damped,
    /// A fixed value in `[0, 1]`.
    Constant(f64),
}

impl KappaSchedule {
    pub fn kappa(&self, t: usize) -> f64 {
        match self {
            KappaSchedule::Damped => {
                if t == 0 {
                    0.5
                } else {
                    t as f64 / (t + 1) as f64
                }
            }
            KappaSchedule::Constant(k) => *k,
        }
    }
}

/// Solver configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Stopping threshold for the span of iterate differences.
    pub epsilon: f64,
    pub kappa: KappaSchedule,
    pub max_iterations: usize,
    /// Reference state used by relative value iteration.
    pub reference_state: usize,
    pub span_mode: SpanMode,
    /// Initial value vector; zeros when absent.
    pub v0: Option<Vec<f64>>,
    /// Record per-iteration value vectors in the report.
    pub trace: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.01,
            kappa: KappaSchedule::Damped,
            max_iterations: 10_000,
            reference_state: 0,
            span_mode: SpanMode::Signed,
            v0: None,
            trace: false,
        }
    }
}

impl SolverConfig {
    fn validate(&self, n: usize) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidParameter("epsilon must be positive".into()));
        }
        if self.reference_state >= n {
            return Err(Error::InvalidParameter(format!(
                "reference state {} out of range (n = {n})",
                self.reference_state
            )));
        }
        if let KappaSchedule::Constant(k) = self.kappa {
            if !(0.0..=1.0).contains(&k) {
                return Err(Error::InvalidParameter("kappa must lie in [0, 1]".into()));
            }
        }
        if let Some(v0) = &self.v0 {
            if v0.len() != n {
                return Err(Error::InvalidParameter(format!(
                    "v0 has length {}, expected {n}",
                    v0.len()
                )));
            }
        }
        Ok(())
    }
}

/// One recorded iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRow {
    pub iteration: usize,
    /// Stopping-rule span of the iterate difference.
    pub span: f64,
    pub values: Vec<f64>,
}

/// Result of a solve.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub policy: DefenderPolicy,
    /// Certified average cost of `policy`: the worst initial state of its
    /// exact evaluation.
    pub lambda: f64,
    /// Terminal value vector.
    pub v: Vec<f64>,
    /// Terminal relative vector (relative value iteration only).
    pub w: Option<Vec<f64>>,
    pub iterations: usize,
    pub converged: bool,
    /// Stopping-rule span per iteration.
    pub span_trace: Vec<f64>,
    /// Span of the iterate itself per iteration (boundedness diagnostic).
    pub value_span_trace: Vec<f64>,
    /// Final stopping-rule span.
    pub epsilon_certificate: f64,
    /// Exact evaluation of the returned policy.
    pub evaluation: PolicyEvaluation,
    pub trace: Option<Vec<IterationRow>>,
}

/// Span seminorm: `max(x) - min(x)`.
pub fn span(x: &[f64]) -> f64 {
    assert!(!x.is_empty());
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in x {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    hi - lo
}

fn stopping_span(prev: &[f64], next: &[f64], mode: SpanMode) -> f64 {
    let diff: Vec<f64> = next
        .iter()
        .zip(prev)
        .map(|(a, b)| match mode {
            SpanMode::Signed => a - b,
            SpanMode::Absolute => (a - b).abs(),
        })
        .collect();
    span(&diff)
}

fn build_tables(instance: &GameInstance) -> Result<Vec<Arc<TauTables>>> {
    instance
        .tau_grid()
        .into_iter()
        .map(|tau| Ok(Arc::new(TauTables::new(instance, tau)?)))
        .collect()
}

fn improve_with_tables(
    instance: &GameInstance,
    tables: &[Arc<TauTables>],
    v: &[f64],
    kappa: f64,
    gamma: f64,
) -> Result<(Vec<f64>, DefenderPolicy)> {
    let n = instance.n();
    let mut v_next = vec![0.0; n];
    let mut p = Vec::with_capacity(n);
    let mut tau = Vec::with_capacity(n);
    for i in 0..n {
        let mut best_value = f64::INFINITY;
        let mut best_row: Option<Vec<f64>> = None;
        let mut best_tau = 0.0;
        // Ascending grid scan with strict improvement: period ties keep the
        // smaller period.
        for t in tables {
            let sub = StateSubproblem::with_tables(instance, t.clone(), i, kappa, gamma, v)?;
            let sol = solve_state(&sub)?;
            if sol.value < best_value {
                best_value = sol.value;
                best_row = Some(sol.p_i);
                best_tau = t.tau;
            }
        }
        v_next[i] = best_value;
        p.push(best_row.expect("period grid is nonempty"));
        tau.push(best_tau);
    }
    Ok((v_next, DefenderPolicy { p, tau }))
}

/// One policy-improvement pass: the greedy one-step values and policy at `v`.
pub fn policy_improvement(
    instance: &GameInstance,
    v: &[f64],
    kappa: f64,
    gamma: f64,
) -> Result<(Vec<f64>, DefenderPolicy)> {
    if !(gamma > 0.0 && gamma < instance.tau_lo) {
        return Err(Error::InvalidParameter(format!(
            "gamma {gamma} must lie in (0, {})",
            instance.tau_lo
        )));
    }
    let tables = build_tables(instance)?;
    improve_with_tables(instance, &tables, v, kappa, gamma)
}

enum Variant {
    Plain,
    Relative,
}

fn run(instance: &GameInstance, cfg: &SolverConfig, variant: Variant) -> Result<SolveReport> {
    let n = instance.n();
    cfg.validate(n)?;
    let gamma = instance.gamma_or_default();
    if !(gamma > 0.0 && gamma < instance.tau_lo) {
        return Err(Error::InvalidParameter(format!(
            "gamma {gamma} must lie in (0, {})",
            instance.tau_lo
        )));
    }
    let tables = build_tables(instance)?;
    let s = cfg.reference_state;

    let mut v: Vec<f64> = cfg.v0.clone().unwrap_or_else(|| vec![0.0; n]);
    let mut w: Vec<f64> = match variant {
        Variant::Plain => v.clone(),
        Variant::Relative => v.iter().map(|x| x - v[s]).collect(),
    };

    let mut span_trace = Vec::new();
    let mut value_span_trace = Vec::new();
    let mut rows = cfg.trace.then(Vec::new);
    let mut converged = false;
    let mut iterations = 0;
    let mut kappa_last = cfg.kappa.kappa(0);

    for t in 1..=cfg.max_iterations {
        let kappa = cfg.kappa.kappa(t - 1);
        kappa_last = kappa;
        let input = match variant {
            Variant::Plain => &v,
            Variant::Relative => &w,
        };
        let (v_next, _) = improve_with_tables(instance, &tables, input, kappa, gamma)?;
        let sp = stopping_span(&v, &v_next, cfg.span_mode);
        span_trace.push(sp);
        value_span_trace.push(span(&v_next));
        if let Some(rows) = rows.as_mut() {
            rows.push(IterationRow {
                iteration: t,
                span: sp,
                values: v_next.clone(),
            });
        }
        v = v_next;
        if let Variant::Relative = variant {
            let pivot = v[s];
            w = v.iter().map(|x| x - pivot).collect();
        }
        iterations = t;
        if sp < cfg.epsilon {
            converged = true;
            break;
        }
    }

    // One more improvement at the terminal vector extracts the policy.
    let terminal = match variant {
        Variant::Plain => &v,
        Variant::Relative => &w,
    };
    let (_, policy) = improve_with_tables(instance, &tables, terminal, kappa_last, gamma)?;
    let evaluation = evaluate_policy(instance, &policy)?;
    let lambda = evaluation
        .avg_cost
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);

    Ok(SolveReport {
        policy,
        lambda,
        w: match variant {
            Variant::Plain => None,
            Variant::Relative => Some(w),
        },
        v,
        iterations,
        converged,
        epsilon_certificate: span_trace.last().copied().unwrap_or(f64::INFINITY),
        span_trace,
        value_span_trace,
        evaluation,
        trace: rows,
    })
}

/// Value iteration: iterates policy improvement on the value vector until
/// the span of the iterate difference drops below `epsilon`.
pub fn value_iteration(instance: &GameInstance, cfg: &SolverConfig) -> Result<SolveReport> {
    run(instance, cfg, Variant::Plain)
}

/// Relative value iteration: recenters the value vector at a reference
/// state every iteration, keeping the iterates themselves bounded. Yields
/// the same policies as [`value_iteration`] under the signed span mode.
pub fn relative_value_iteration(
    instance: &GameInstance,
    cfg: &SolverConfig,
) -> Result<SolveReport> {
    run(instance, cfg, Variant::Relative)
}
