//! Domain types for the moving-target-defense game.
//!
//! A [`GameInstance`] bundles everything the solvers consume: the
//! configuration space, the attacker types with their priors and attack
//! spaces, per-(type, attack, state) reward and loss rates, attack-time
//! distributions, the migration cost matrix and the defending-period grid.
//! Instances are immutable after construction and safe to share across
//! threads; every operation in this module is a pure function.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Tolerance for stochasticity and prior-sum checks.
pub const STOCHASTIC_TOL: f64 = 1e-9;

/// One adaptive aspect of the system and its admissible sub-configurations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AspectDef {
    pub name: String,
    pub labels: Vec<String>,
}

/// A configuration state: an id plus, optionally, one sub-configuration
/// label per adaptive aspect.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateDef {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
}

impl StateDef {
    /// State with a bare identifier and no aspect labels.
    pub fn plain(id: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            labels: None,
        }
    }

    /// State carrying one label per adaptive aspect.
    pub fn labeled(id: impl Into<String>, labels: &[&str]) -> Self {
        Self {
            id: id.into(),
            labels: Some(labels.iter().map(|s| s.to_string()).collect()),
        }
    }
}

/// The set of system configurations the defender can migrate between.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigurationSpace {
    pub states: Vec<StateDef>,
    /// Number of states; must equal `states.len()`.
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aspects: Option<Vec<AspectDef>>,
}

impl ConfigurationSpace {
    pub fn new(states: Vec<StateDef>) -> Self {
        let n = states.len();
        Self {
            states,
            n,
            aspects: None,
        }
    }

    pub fn with_aspects(states: Vec<StateDef>, aspects: Vec<AspectDef>) -> Self {
        let n = states.len();
        Self {
            states,
            n,
            aspects: Some(aspects),
        }
    }

    /// Index of the state with the given id.
    pub fn state_index(&self, id: &str) -> Option<usize> {
        self.states.iter().position(|s| s.id == id)
    }
}

/// One attacker type: its prior probability and the attacks it can mount.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackerType {
    pub id: String,
    pub prior: f64,
    /// Attack ids from the instance's global attack list.
    pub attacks: Vec<String>,
}

/// The attacker-type distribution the defender holds a prior over.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackerTypeSet {
    pub types: Vec<AttackerType>,
}

impl AttackerTypeSet {
    pub fn len(&self) -> usize {
        self.types.len()
    }

    pub fn is_empty(&self) -> bool {
        self.types.is_empty()
    }
}

/// Distribution of the time an attack needs to compromise a state.
///
/// `Infinite` encodes an attack that does not target any vulnerability of
/// the state; it never succeeds and contributes zero to every expectation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AttackTimeModel {
    Deterministic { d: f64 },
    Exponential { rate: f64 },
    Empirical { samples: Vec<f64> },
    Infinite,
}

impl AttackTimeModel {
    pub fn deterministic(d: f64) -> Self {
        Self::Deterministic { d }
    }

    pub fn exponential(rate: f64) -> Self {
        Self::Exponential { rate }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, Self::Infinite)
    }
}

/// A complete game instance.
///
/// `reward[l][a][j]` is the type-`l` attacker's benefit per unit of
/// compromised time when attack `a` succeeds against state `j`;
/// `loss[l][a][j]` is the defender's loss rate in the same event. Both are
/// indexed by position in `attackers.types` / `attacks` / `space.states`.
/// `alpha` scales migration costs at evaluation time without mutating
/// `migration`.
#[derive(Debug, Clone, PartialEq)]
pub struct GameInstance {
    pub space: ConfigurationSpace,
    pub attackers: AttackerTypeSet,
    /// Global attack id list; the union of all per-type attack spaces.
    pub attacks: Vec<String>,
    pub reward: Vec<Vec<Vec<f64>>>,
    pub loss: Vec<Vec<Vec<f64>>>,
    /// `attack_time[a][j]` — distribution of the compromise time.
    pub attack_time: Vec<Vec<AttackTimeModel>>,
    /// Migration cost matrix, row = source state, column = destination.
    pub migration: Vec<Vec<f64>>,
    pub tau_lo: f64,
    pub tau_hi: f64,
    pub tau_step: f64,
    pub alpha: f64,
    /// Transformation parameter; defaulted to `tau_lo / 2` when absent.
    pub gamma: Option<f64>,
}

impl GameInstance {
    /// Number of configuration states.
    pub fn n(&self) -> usize {
        self.space.n
    }

    /// Index of an attack id in the global attack list.
    pub fn attack_index(&self, id: &str) -> Option<usize> {
        self.attacks.iter().position(|a| a == id)
    }

    /// Attack space of type `l` as indices into the global attack list.
    ///
    /// Ids that do not resolve are an instance defect reported by
    /// [`validate_instance`]; here they are skipped.
    pub fn attack_space(&self, l: usize) -> Vec<usize> {
        self.attackers.types[l]
            .attacks
            .iter()
            .filter_map(|id| self.attack_index(id))
            .collect()
    }

    /// Defending-period grid `{tau_lo, tau_lo + step, ...}` up to `tau_hi`.
    pub fn tau_grid(&self) -> Vec<f64> {
        tau_grid(self.tau_lo, self.tau_hi, self.tau_step)
    }

    /// Transformation parameter, defaulted when the instance leaves it unset.
    pub fn gamma_or_default(&self) -> f64 {
        self.gamma.unwrap_or(self.tau_lo / 2.0)
    }

    /// Copy with a different migration-cost scale.
    pub fn with_alpha(&self, alpha: f64) -> Self {
        let mut out = self.clone();
        out.alpha = alpha;
        out
    }

    /// Copy with every diagonal migration entry (the updating cost) replaced.
    pub fn with_updating_cost(&self, cost: f64) -> Self {
        let mut out = self.clone();
        for i in 0..out.space.n {
            out.migration[i][i] = cost;
        }
        out
    }

    /// Copy with a different defending-period grid.
    pub fn with_tau_grid(&self, lo: f64, hi: f64, step: f64) -> Self {
        let mut out = self.clone();
        out.tau_lo = lo;
        out.tau_hi = hi;
        out.tau_step = step;
        if out.gamma.map_or(false, |g| g >= lo) {
            out.gamma = None;
        }
        out
    }

    /// Copy in which every targeting attack succeeds instantly.
    ///
    /// Finite attack-time models become `deterministic(0)`; non-targeting
    /// (`infinite`) entries are preserved. This is the fixed-period
    /// "spatial decisions only" regime.
    pub fn with_zero_attack_times(&self) -> Self {
        let mut out = self.clone();
        for row in out.attack_time.iter_mut() {
            for m in row.iter_mut() {
                if !m.is_infinite() {
                    *m = AttackTimeModel::deterministic(0.0);
                }
            }
        }
        out
    }
}

/// Replicate a per-(attack, state) table across every attacker type.
///
/// CVSS-derived scores depend on the attack alone; the full tables stay
/// indexed by type for generality.
pub fn replicate_per_attack(types: usize, per_attack: &[Vec<f64>]) -> Vec<Vec<Vec<f64>>> {
    (0..types).map(|_| per_attack.to_vec()).collect()
}

/// A stationary defender strategy: transition matrix plus per-state periods.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefenderPolicy {
    /// Row-stochastic transition matrix; `p[i][j]` is the probability of
    /// migrating from state `i` to state `j`.
    pub p: Vec<Vec<f64>>,
    /// Defending period chosen at each source state.
    pub tau: Vec<f64>,
}

impl DefenderPolicy {
    /// Checks the policy against an instance: row stochasticity and period bounds.
    pub fn validate(&self, instance: &GameInstance) -> ValidationReport {
        let mut v = Vec::new();
        let n = instance.n();
        if self.p.len() != n {
            v.push(format!("policy has {} rows, instance has {n} states", self.p.len()));
        }
        if self.tau.len() != n {
            v.push(format!("policy has {} periods, instance has {n} states", self.tau.len()));
        }
        for (i, row) in self.p.iter().enumerate() {
            if row.len() != n {
                v.push(format!("policy row {i} has length {}, expected {n}", row.len()));
                continue;
            }
            if row.iter().any(|&x| x < 0.0) {
                v.push(format!("policy row {i} has a negative entry"));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > STOCHASTIC_TOL {
                v.push(format!("policy row {i} sums to {sum}, expected 1"));
            }
        }
        for (i, &t) in self.tau.iter().enumerate() {
            if t < instance.tau_lo - STOCHASTIC_TOL || t > instance.tau_hi + STOCHASTIC_TOL {
                v.push(format!(
                    "period {t} at state {i} outside [{}, {}]",
                    instance.tau_lo, instance.tau_hi
                ));
            }
        }
        ValidationReport { violations: v }
    }
}

/// Outcome of validating an instance or policy. Violations are data, not errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<String>,
}

impl ValidationReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks every structural invariant of a [`GameInstance`].
pub fn validate_instance(instance: &GameInstance) -> ValidationReport {
    let mut v = Vec::new();
    let n = instance.space.n;

    if n == 0 || instance.space.states.is_empty() {
        v.push("configuration space must contain at least one state".to_string());
    }
    if n != instance.space.states.len() {
        v.push(format!(
            "state count field is {n} but {} states are declared",
            instance.space.states.len()
        ));
    }
    for (i, s) in instance.space.states.iter().enumerate() {
        if instance.space.states[..i].iter().any(|t| t.id == s.id) {
            v.push(format!("duplicate state id `{}`", s.id));
        }
    }
    if let Some(aspects) = &instance.space.aspects {
        for (i, s) in instance.space.states.iter().enumerate() {
            match &s.labels {
                None => v.push(format!("state {i} has no aspect labels but aspects are declared")),
                Some(labels) => {
                    if labels.len() != aspects.len() {
                        v.push(format!(
                            "state {i} has {} labels for {} aspects",
                            labels.len(),
                            aspects.len()
                        ));
                    } else {
                        for (a, label) in aspects.iter().zip(labels) {
                            if !a.labels.contains(label) {
                                v.push(format!(
                                    "state {i} label `{label}` not in aspect `{}`",
                                    a.name
                                ));
                            }
                        }
                    }
                }
            }
        }
    }

    let prior_sum: f64 = instance.attackers.types.iter().map(|t| t.prior).sum();
    if instance.attackers.types.iter().any(|t| t.prior < 0.0) {
        v.push("type priors must be nonnegative".to_string());
    }
    if (prior_sum - 1.0).abs() > STOCHASTIC_TOL {
        v.push(format!("type priors must sum to 1 (got {prior_sum})"));
    }
    for (l, t) in instance.attackers.types.iter().enumerate() {
        if t.attacks.is_empty() {
            v.push(format!("attack space of type `{}` is empty", t.id));
        }
        for id in &t.attacks {
            if instance.attack_index(id).is_none() {
                v.push(format!("type `{}` references unknown attack `{id}`", t.id));
            }
        }
        let _ = l;
    }
    for (i, a) in instance.attacks.iter().enumerate() {
        if instance.attacks[..i].iter().any(|b| b == a) {
            v.push(format!("duplicate attack id `{a}`"));
        }
    }

    let n_types = instance.attackers.types.len();
    let n_attacks = instance.attacks.len();
    for (name, table) in [("reward", &instance.reward), ("loss", &instance.loss)] {
        if table.len() != n_types {
            v.push(format!("{name} table has {} type rows, expected {n_types}", table.len()));
            continue;
        }
        for (l, per_type) in table.iter().enumerate() {
            if per_type.len() != n_attacks {
                v.push(format!(
                    "{name} table for type {l} has {} attack rows, expected {n_attacks}",
                    per_type.len()
                ));
                continue;
            }
            for (a, per_attack) in per_type.iter().enumerate() {
                if per_attack.len() != n {
                    v.push(format!(
                        "{name} table entry ({l},{a}) has {} states, expected {n}",
                        per_attack.len()
                    ));
                } else if per_attack.iter().any(|&x| x < 0.0) {
                    v.push(format!("{name} table entry ({l},{a}) has a negative value"));
                }
            }
        }
    }

    if instance.attack_time.len() != n_attacks {
        v.push(format!(
            "attack_time table has {} attack rows, expected {n_attacks}",
            instance.attack_time.len()
        ));
    }
    for (a, row) in instance.attack_time.iter().enumerate() {
        if row.len() != n {
            v.push(format!("attack_time row {a} has {} states, expected {n}", row.len()));
            continue;
        }
        for (j, m) in row.iter().enumerate() {
            match m {
                AttackTimeModel::Deterministic { d } if *d < 0.0 => {
                    v.push(format!("attack_time ({a},{j}): deterministic time must be >= 0"));
                }
                AttackTimeModel::Exponential { rate } if *rate <= 0.0 => {
                    v.push(format!("attack_time ({a},{j}): exponential rate must be positive"));
                }
                AttackTimeModel::Empirical { samples } => {
                    if samples.is_empty() {
                        v.push(format!("attack_time ({a},{j}): empirical samples must be nonempty"));
                    } else if samples.iter().any(|&s| s < 0.0) {
                        v.push(format!("attack_time ({a},{j}): empirical samples must be >= 0"));
                    }
                }
                _ => {}
            }
        }
    }

    if instance.migration.len() != n {
        v.push(format!("migration matrix has {} rows, expected {n}", instance.migration.len()));
    } else {
        for (i, row) in instance.migration.iter().enumerate() {
            if row.len() != n {
                v.push(format!("migration row {i} has {} columns, expected {n}", row.len()));
                continue;
            }
            if row.iter().any(|&m| m < 0.0) {
                v.push(format!("migration row {i} has a negative cost"));
            }
            if row[i] <= 0.0 {
                v.push(format!("diagonal migration cost must be positive (state {i})"));
            }
        }
    }

    if !(instance.tau_lo > 0.0) {
        v.push("tau_lo must be positive".to_string());
    }
    if instance.tau_hi < instance.tau_lo {
        v.push("tau_hi must be >= tau_lo".to_string());
    }
    if !(instance.tau_step > 0.0) {
        v.push("tau_step must be positive".to_string());
    }
    if instance.alpha < 0.0 {
        v.push("alpha must be nonnegative".to_string());
    }
    if let Some(g) = instance.gamma {
        if !(g > 0.0 && g < instance.tau_lo) {
            v.push(format!("gamma {g} must satisfy 0 < gamma < tau_lo ({})", instance.tau_lo));
        }
    }

    ValidationReport { violations: v }
}

/// Expected compromised duration `E[(tau - xi)^+]` for one attack-time model.
///
/// The exponential case uses the closed form `tau - (1 - e^(-rate tau)) / rate`.
/// The result always lies in `[0, tau]`.
pub fn expected_overlap(tau: f64, model: &AttackTimeModel) -> Result<f64> {
    if !(tau > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "expected_overlap requires tau > 0, got {tau}"
        )));
    }
    let value = match model {
        AttackTimeModel::Deterministic { d } => (tau - d).max(0.0),
        AttackTimeModel::Exponential { rate } => tau - (1.0 - (-rate * tau).exp()) / rate,
        AttackTimeModel::Empirical { samples } => {
            let sum: f64 = samples.iter().map(|&s| (tau - s).max(0.0)).sum();
            sum / samples.len() as f64
        }
        AttackTimeModel::Infinite => 0.0,
    };
    Ok(value.clamp(0.0, tau))
}

/// Defending-period grid `{lo, lo + step, ...}`; the last point is the
/// largest one not exceeding `hi` (up to rounding slack).
pub fn tau_grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    assert!(lo > 0.0 && step > 0.0 && hi >= lo, "invalid tau grid");
    let count = ((hi - lo) / step * (1.0 + 1e-12) + 1e-9).floor() as usize + 1;
    (0..count).map(|k| lo + k as f64 * step).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Paper-shaped 4-state migration matrix used across the test suite.
    pub(crate) fn four_state_migration() -> Vec<Vec<f64>> {
        vec![
            vec![2.0, 4.0, 8.0, 12.0],
            vec![4.0, 2.0, 11.0, 7.0],
            vec![8.0, 11.0, 2.0, 12.0],
            vec![12.0, 7.0, 12.0, 2.0],
        ]
    }

    fn tiny_instance() -> GameInstance {
        GameInstance {
            space: ConfigurationSpace::new(vec![
                StateDef::plain("s1"),
                StateDef::plain("s2"),
                StateDef::plain("s3"),
                StateDef::plain("s4"),
            ]),
            attackers: AttackerTypeSet {
                types: vec![AttackerType {
                    id: "t1".into(),
                    prior: 1.0,
                    attacks: vec!["a1".into()],
                }],
            },
            attacks: vec!["a1".into()],
            reward: vec![vec![vec![1.0; 4]]],
            loss: vec![vec![vec![1.0; 4]]],
            attack_time: vec![vec![AttackTimeModel::Infinite; 4]],
            migration: four_state_migration(),
            tau_lo: 0.1,
            tau_hi: 2.6,
            tau_step: 0.1,
            alpha: 1.0,
            gamma: None,
        }
    }

    #[test]
    fn paper_shaped_instance_validates() {
        let report = validate_instance(&tiny_instance());
        assert!(report.ok(), "unexpected violations: {:?}", report.violations);
    }

    #[test]
    fn zero_diagonal_migration_is_flagged() {
        let mut inst = tiny_instance();
        inst.migration[1][1] = 0.0;
        let report = validate_instance(&inst);
        assert!(report
            .violations
            .iter()
            .any(|v| v.contains("diagonal migration cost must be positive")));
    }

    #[test]
    fn priors_not_summing_to_one_are_flagged() {
        let mut inst = tiny_instance();
        inst.attackers.types = vec![
            AttackerType {
                id: "t1".into(),
                prior: 0.5,
                attacks: vec!["a1".into()],
            },
            AttackerType {
                id: "t2".into(),
                prior: 0.6,
                attacks: vec!["a1".into()],
            },
        ];
        inst.reward = vec![vec![vec![1.0; 4]]; 2];
        inst.loss = vec![vec![vec![1.0; 4]]; 2];
        let report = validate_instance(&inst);
        assert!(report.violations.iter().any(|v| v.contains("priors must sum to 1")));
    }

    #[test]
    fn overlap_instantaneous_attack_compromises_whole_period() {
        let m = AttackTimeModel::deterministic(0.0);
        assert_eq!(expected_overlap(1.0, &m).unwrap(), 1.0);
    }

    #[test]
    fn overlap_non_targeting_attack_is_zero() {
        assert_eq!(expected_overlap(1.0, &AttackTimeModel::Infinite).unwrap(), 0.0);
    }

    #[test]
    fn overlap_exponential_closed_form() {
        // Frozen from a 1e7-draw Monte-Carlo estimate of E[(1 - xi)^+],
        // xi ~ Exp(1): 0.3678847 +/- 1.4e-4; closed form gives 1/e.
        let m = AttackTimeModel::exponential(1.0);
        let got = expected_overlap(1.0, &m).unwrap();
        assert!((got - 0.367879).abs() < 1e-6, "got {got}");
    }

    #[test]
    fn overlap_rejects_nonpositive_tau() {
        assert!(expected_overlap(0.0, &AttackTimeModel::Infinite).is_err());
        assert!(expected_overlap(-1.0, &AttackTimeModel::deterministic(1.0)).is_err());
    }

    #[test]
    fn tau_grid_covers_paper_range() {
        let grid = tau_grid(0.1, 2.6, 0.1);
        assert_eq!(grid.len(), 26);
        assert!((grid[0] - 0.1).abs() < 1e-12);
        assert!((grid[25] - 2.6).abs() < 1e-9);
    }

    #[test]
    fn tau_grid_stops_within_one_step_of_hi() {
        let grid = tau_grid(0.5, 1.72, 0.5);
        assert_eq!(grid, vec![0.5, 1.0, 1.5]);
        assert!(1.72 - grid.last().unwrap() < 0.5);
    }

    #[test]
    fn updating_cost_override_replaces_diagonal_only() {
        let inst = tiny_instance().with_updating_cost(4.0);
        for i in 0..4 {
            assert_eq!(inst.migration[i][i], 4.0);
        }
        assert_eq!(inst.migration[0][1], 4.0);
        assert_eq!(inst.migration[0][3], 12.0);
    }

    fn arb_model() -> impl Strategy<Value = AttackTimeModel> {
        prop_oneof![
            (0.0..3.0).prop_map(|d| AttackTimeModel::deterministic(d)),
            (0.05..10.0).prop_map(AttackTimeModel::exponential),
            proptest::collection::vec(0.0..3.0f64, 1..20)
                .prop_map(|samples| AttackTimeModel::Empirical { samples }),
            Just(AttackTimeModel::Infinite),
        ]
    }

    proptest! {
        #[test]
        fn overlap_is_nondecreasing_in_tau(model in arb_model(), lo in 0.01..2.0f64) {
            let mut prev = expected_overlap(lo, &model).unwrap();
            for k in 1..=20 {
                let tau = lo + 0.1 * k as f64;
                let cur = expected_overlap(tau, &model).unwrap();
                prop_assert!(cur + 1e-12 >= prev, "overlap decreased: {prev} -> {cur}");
                prev = cur;
            }
        }

        #[test]
        fn overlap_bounded_by_period(model in arb_model(), tau in 0.01..5.0f64) {
            let w = expected_overlap(tau, &model).unwrap();
            prop_assert!(w >= 0.0 && w <= tau);
        }

        #[test]
        fn empirical_constant_matches_deterministic(d in 0.0..3.0f64, tau in 0.01..5.0f64, k in 1usize..10) {
            let emp = AttackTimeModel::Empirical { samples: vec![d; k] };
            let det = AttackTimeModel::deterministic(d);
            let a = expected_overlap(tau, &emp).unwrap();
            let b = expected_overlap(tau, &det).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn exponential_closed_form_matches_empirical_draws() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for &(rate, tau) in &[(0.5, 1.0), (1.0, 2.0), (2.0, 0.5), (4.0, 1.5)] {
            let k = 200_000;
            let samples: Vec<f64> = (0..k)
                .map(|_| -(1.0 - rng.gen::<f64>()).ln() / rate)
                .collect();
            let vals: Vec<f64> = samples.iter().map(|&s| (tau - s).max(0.0)).collect();
            let mean = vals.iter().sum::<f64>() / k as f64;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1) as f64;
            let se = (var / k as f64).sqrt();
            let emp = AttackTimeModel::Empirical { samples };
            let a = expected_overlap(tau, &emp).unwrap();
            let b = expected_overlap(tau, &AttackTimeModel::exponential(rate)).unwrap();
            assert!((a - b).abs() <= 3.0 * se, "rate {rate} tau {tau}: |{a} - {b}| > 3se {se}");
        }
    }
}
