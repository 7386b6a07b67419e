//! Operational security checking: pairwise lockstep bisimulation with a
//! relevant-declassification escape, whole-program security over enumerated
//! attackers/states/substitutions, and the knowledge-based lock-aware check.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::equiv::{
    low_state, obs_indist, obs_irrelevant, state_indist, state_low_equiv, value_indist, EqBudget,
    TriBool, World,
};
use crate::gen::{related_pairs, value_domain, GenBudget, GenError};
use crate::interp::{
    avisible_trace, obs_invisible, state_to_json, step, Observation, State, StepOutcome,
};
use crate::policy::{
    lockset_below_attacker, lockset_low_equiv, Attacker, LockSet, Policy, SecurityConfig,
};
use crate::syntax::ast::{AnnType, Expr, LocId, StateEnv, TypeEnv};
use crate::syntax::pretty::pretty_expr;
use crate::types::{typecheck_against, TypingContext};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    /// A caller-contract failure, distinct from a security Violation.
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("enumeration universe too large: {0}")]
    TooLarge(String),
    #[error(transparent)]
    Gen(#[from] GenError),
    #[error("configuration error: {0}")]
    Config(String),
}

/// Outcome of one bounded security check.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    /// A matched pair of distinguishable visible observations made while
    /// both runs' active lock sets were outside the attacker's capability:
    /// a relevant declassification, after which nothing further is required.
    PassByDeclass {
        step_index: usize,
        obs_pair: (String, String),
        active_locks: (Vec<String>, Vec<String>),
    },
    Violation {
        step_index: usize,
        reason: String,
        obs_pair: Option<(String, String)>,
        states: (std::collections::BTreeMap<String, crate::interp::StateCellJson>,
                 std::collections::BTreeMap<String, crate::interp::StateCellJson>),
    },
    Inconclusive {
        budget: u64,
    },
}

impl Verdict {
    pub fn is_violation(&self) -> bool {
        matches!(self, Verdict::Violation { .. })
    }

    pub fn passed(&self) -> bool {
        matches!(self, Verdict::Pass | Verdict::PassByDeclass { .. })
    }
}

fn obs_str(o: &Observation) -> String {
    match o {
        Observation::Eps => "eps".to_string(),
        Observation::Write(l, t, v) => format!(
            "write {} : {} := {}",
            l,
            crate::syntax::pretty::pretty_type(t),
            pretty_expr(v)
        ),
        Observation::Open(l) => format!("open {}", l.0),
        Observation::Close(l) => format!("close {}", l.0),
        Observation::Unopen(l) => format!("unopen {}", l.0),
        Observation::Unclose(l) => format!("unclose {}", l.0),
    }
}

fn lockset_strs(s: &LockSet) -> Vec<String> {
    s.iter().map(|l| l.0.clone()).collect()
}

/// Bookkeeping shared by the two sides of a bisimulation run.
struct Side {
    expr: Expr,
    state: State,
    locks: LockSet,
}

/// Records writes in the world's typing for the stepping side, so later
/// reference values and observations can be judged against it.
fn note_write(theta: &mut StateEnv, obs: &Observation) {
    if let Observation::Write(l, t, _) = obs {
        theta.entry(*l).or_insert_with(|| t.clone());
    }
}

/// Lockstep bisimulation of two configurations under one attacker.
///
/// Scheduler: steps whose observation is invisible to the attacker are
/// consumed greedily one side at a time; when both sides are about to make
/// a visible step, the pair either constitutes a relevant declassification
/// (both active lock sets outside the capability and the observations
/// definitely irrelevant-check-failing) or must be indistinguishable with
/// the post-states still indistinguishable at a possibly extended world.
/// `step_index` in the verdicts counts matched visible pairs from zero.
#[allow(clippy::too_many_arguments)]
pub fn pairwise_bisim(
    e1: &Expr,
    e2: &Expr,
    s1: &State,
    s2: &State,
    locks1: &LockSet,
    locks2: &LockSet,
    result_ty: &AnnType,
    a: &Attacker,
    w: &World,
    b: &EqBudget,
    cfg: &SecurityConfig,
) -> Result<Verdict, HarnessError> {
    match lockset_low_equiv(locks1, locks2, a, cfg) {
        Ok(true) => {}
        Ok(false) => {
            return Err(HarnessError::Precondition(
                "initial lock sets are not low-equivalent".into(),
            ))
        }
        Err(e) => return Err(HarnessError::Config(e.to_string())),
    }
    if state_indist(s1, s2, w, a, b, cfg) == TriBool::False {
        return Err(HarnessError::Precondition(
            "initial states are not indistinguishable at the given world".into(),
        ));
    }

    let mut w = w.clone();
    let mut left = Side { expr: e1.clone(), state: s1.clone(), locks: locks1.clone() };
    let mut right = Side { expr: e2.clone(), state: s2.clone(), locks: locks2.clone() };
    let mut fuel = b.fuel;
    let mut visible_idx = 0usize;
    let mut saw_unknown = false;

    let violation = |idx: usize,
                     reason: String,
                     obs: Option<(&Observation, &Observation)>,
                     l: &Side,
                     r: &Side| Verdict::Violation {
        step_index: idx,
        reason,
        obs_pair: obs.map(|(o1, o2)| (obs_str(o1), obs_str(o2))),
        states: (state_to_json(&l.state), state_to_json(&r.state)),
    };

    loop {
        if fuel == 0 {
            return Ok(Verdict::Inconclusive { budget: b.fuel });
        }

        let v1 = left.expr.is_value();
        let v2 = right.expr.is_value();
        if v1 && v2 {
            let vals = value_indist(&left.expr, &right.expr, result_ty, &w, a, b, cfg);
            let sts = state_indist(&left.state, &right.state, &w, a, b, cfg);
            return Ok(match vals.and(sts) {
                TriBool::True if !saw_unknown => Verdict::Pass,
                TriBool::True | TriBool::Unknown => Verdict::Inconclusive { budget: b.fuel },
                TriBool::False => violation(
                    visible_idx,
                    "terminal values or final states distinguishable".into(),
                    None,
                    &left,
                    &right,
                ),
            });
        }

        // Candidate step for each non-value side.
        let mut pend1 = None;
        if !v1 {
            match step(&left.expr, &left.locks, &left.state) {
                StepOutcome::Stuck(r) => {
                    return Ok(violation(
                        visible_idx,
                        format!("left side stuck: {r}"),
                        None,
                        &left,
                        &right,
                    ))
                }
                StepOutcome::Terminal(_) => unreachable!("non-value cannot be terminal"),
                StepOutcome::Stepped { expr, state, obs, active } => {
                    if obs_invisible(&obs, a, cfg) {
                        note_write(&mut w.theta1, &obs);
                        left = Side { expr, state, locks: left.locks.clone() };
                        match state_indist(&left.state, &right.state, &w, a, b, cfg) {
                            TriBool::False => {
                                return Ok(violation(
                                    visible_idx,
                                    "invisible left step broke state indistinguishability".into(),
                                    Some((&obs, &Observation::Eps)),
                                    &left,
                                    &right,
                                ))
                            }
                            TriBool::Unknown => saw_unknown = true,
                            TriBool::True => {}
                        }
                        fuel -= 1;
                        continue;
                    }
                    pend1 = Some((expr, state, obs, active));
                }
            }
        }
        let mut pend2 = None;
        if !v2 {
            match step(&right.expr, &right.locks, &right.state) {
                StepOutcome::Stuck(r) => {
                    return Ok(violation(
                        visible_idx,
                        format!("right side stuck: {r}"),
                        None,
                        &left,
                        &right,
                    ))
                }
                StepOutcome::Terminal(_) => unreachable!("non-value cannot be terminal"),
                StepOutcome::Stepped { expr, state, obs, active } => {
                    if obs_invisible(&obs, a, cfg) {
                        note_write(&mut w.theta2, &obs);
                        right = Side { expr, state, locks: right.locks.clone() };
                        match state_indist(&left.state, &right.state, &w, a, b, cfg) {
                            TriBool::False => {
                                return Ok(violation(
                                    visible_idx,
                                    "invisible right step broke state indistinguishability".into(),
                                    Some((&Observation::Eps, &obs)),
                                    &left,
                                    &right,
                                ))
                            }
                            TriBool::Unknown => saw_unknown = true,
                            TriBool::True => {}
                        }
                        fuel -= 1;
                        continue;
                    }
                    pend2 = Some((expr, state, obs, active));
                }
            }
        }

        match (pend1, pend2) {
            (Some((_, _, o1, _)), None) => {
                return Ok(violation(
                    visible_idx,
                    "left side makes a visible step the terminal right side cannot match".into(),
                    Some((&o1, &Observation::Eps)),
                    &left,
                    &right,
                ));
            }
            (None, Some((_, _, o2, _))) => {
                return Ok(violation(
                    visible_idx,
                    "right side makes a visible step the terminal left side cannot match".into(),
                    Some((&Observation::Eps, &o2)),
                    &left,
                    &right,
                ));
            }
            (None, None) => unreachable!("a non-value side neither stepped nor pended"),
            (Some((ne1, ns1, o1, na1)), Some((ne2, ns2, o2, na2))) => {
                // Relevant declassification: both sides' active lock sets
                // outside the capability and the observations definitely
                // distinguishable even ignoring locations.
                if !lockset_below_attacker(&na1, a)
                    && !lockset_below_attacker(&na2, a)
                    && obs_irrelevant(&o1, &o2, &w, a, b, cfg) == TriBool::False
                {
                    return Ok(Verdict::PassByDeclass {
                        step_index: visible_idx,
                        obs_pair: (obs_str(&o1), obs_str(&o2)),
                        active_locks: (lockset_strs(&na1), lockset_strs(&na2)),
                    });
                }
                // Matched fresh allocations grow the bijection.
                if let (Observation::Write(l1, t1, _), Observation::Write(l2, t2, _)) = (&o1, &o2)
                {
                    if t1 == t2
                        && !w.theta1.contains_key(l1)
                        && !w.theta2.contains_key(l2)
                        && !w.beta_inverse_contains(*l2)
                    {
                        w.extend(*l1, t1.clone(), *l2, t2.clone());
                    }
                }
                note_write(&mut w.theta1, &o1);
                note_write(&mut w.theta2, &o2);
                match obs_indist(&o1, &o2, &w, a, b, cfg) {
                    TriBool::False => {
                        return Ok(violation(
                            visible_idx,
                            "visible observations distinguishable".into(),
                            Some((&o1, &o2)),
                            &left,
                            &right,
                        ))
                    }
                    TriBool::Unknown => saw_unknown = true,
                    TriBool::True => {}
                }
                left = Side { expr: ne1, state: ns1, locks: left.locks.clone() };
                right = Side { expr: ne2, state: ns2, locks: right.locks.clone() };
                match state_indist(&left.state, &right.state, &w, a, b, cfg) {
                    TriBool::False => {
                        return Ok(violation(
                            visible_idx,
                            "post-states distinguishable after matched visible step".into(),
                            Some((&o1, &o2)),
                            &left,
                            &right,
                        ))
                    }
                    TriBool::Unknown => saw_unknown = true,
                    TriBool::True => {}
                }
                visible_idx += 1;
                fuel = fuel.saturating_sub(2);
            }
        }
    }
}

/// Builds one concrete pair of states satisfying a world: beta-matched
/// cells hold a related value pair, unmatched cells a default value.
fn materialize_states(
    w: &World,
    a: &Attacker,
    g: &GenBudget,
) -> Result<(State, State), GenError> {
    let mut s1 = State::new();
    let mut s2 = State::new();
    for (l1, l2) in &w.beta {
        let t = w.theta1.get(l1).cloned().unwrap_or_else(|| AnnType::unit(Policy::top()));
        let pairs = related_pairs(&t, &w.theta1, &w.theta2, &w.beta, a, g)?;
        let (p, q) = pairs
            .into_iter()
            .next()
            .ok_or_else(|| GenError::EmptyDomain(crate::syntax::pretty::pretty_type(&t)))?;
        s1.insert(*l1, p, t.clone());
        s2.insert(*l2, q, t);
    }
    for (l, t) in &w.theta1 {
        if !w.beta.contains_key(l) {
            let v = value_domain(t, &w.theta1, g)?
                .into_iter()
                .next()
                .ok_or_else(|| GenError::EmptyDomain(crate::syntax::pretty::pretty_type(t)))?;
            s1.insert(*l, v, t.clone());
        }
    }
    for (l, t) in &w.theta2 {
        if !w.beta_inverse_contains(*l) {
            let v = value_domain(t, &w.theta2, g)?
                .into_iter()
                .next()
                .ok_or_else(|| GenError::EmptyDomain(crate::syntax::pretty::pretty_type(t)))?;
            s2.insert(*l, v, t.clone());
        }
    }
    Ok((s1, s2))
}

/// The bounded expression relation used inside the value relation's Arrow
/// clause: materializes states from the world, runs the bisimulation, and
/// collapses the verdict to a three-valued answer.
#[allow(clippy::too_many_arguments)]
pub fn expr_relation(
    e1: &Expr,
    e2: &Expr,
    locks1: &LockSet,
    locks2: &LockSet,
    result_ty: &AnnType,
    w: &World,
    a: &Attacker,
    b: &EqBudget,
    cfg: &SecurityConfig,
) -> TriBool {
    let (s1, s2) = match materialize_states(w, a, &b.gen) {
        Ok(p) => p,
        Err(_) => return TriBool::Unknown,
    };
    match pairwise_bisim(e1, e2, &s1, &s2, locks1, locks2, result_ty, a, w, b, cfg) {
        Ok(v) if v.passed() => TriBool::True,
        Ok(Verdict::Violation { .. }) => TriBool::False,
        Ok(Verdict::Inconclusive { .. }) => TriBool::Unknown,
        Err(_) => TriBool::Unknown,
        Ok(_) => unreachable!(),
    }
}

/// All (actor, capability-subset) pairs over the declared universes.
/// Refuses when `2^|locks|` would exceed the cap.
pub fn enumerate_attackers(
    cfg: &SecurityConfig,
    cap_limit: usize,
) -> Result<Vec<Attacker>, HarnessError> {
    if cfg.locks.len() > cap_limit {
        return Err(HarnessError::TooLarge(format!(
            "{} locks exceeds the capability enumeration limit of {cap_limit}; \
             supply an explicit attacker list",
            cfg.locks.len()
        )));
    }
    let locks: Vec<_> = cfg.locks.iter().cloned().collect();
    let mut out = Vec::new();
    for actor in &cfg.actors {
        for mask in 0u64..(1u64 << locks.len()) {
            let capability: LockSet = locks
                .iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .map(|(_, l)| l.clone())
                .collect();
            out.push(Attacker { actor: actor.clone(), capability });
        }
    }
    Ok(out)
}

/// A finite carrier for state quantifiers: a location typing plus the
/// generator knobs bounding each location's value domain.
#[derive(Clone, Debug)]
pub struct StateSpace {
    pub theta: StateEnv,
    pub budget: GenBudget,
}

impl StateSpace {
    pub fn new(theta: StateEnv, budget: GenBudget) -> Self {
        StateSpace { theta, budget }
    }

    pub fn first_order(&self) -> bool {
        self.theta.values().all(|t| t.is_first_order())
    }
}

/// Cartesian product of per-location value domains.
pub fn enumerate_states(space: &StateSpace) -> Result<Vec<State>, HarnessError> {
    let mut states = vec![State::new()];
    for (l, t) in &space.theta {
        let dom = value_domain(t, &space.theta, &space.budget)?;
        if dom.is_empty() {
            return Err(HarnessError::Gen(GenError::EmptyDomain(
                crate::syntax::pretty::pretty_type(t),
            )));
        }
        let mut next = Vec::with_capacity(states.len() * dom.len());
        for s in &states {
            for v in &dom {
                let mut s2 = s.clone();
                s2.insert(*l, v.clone(), t.clone());
                next.push(s2);
            }
        }
        states = next;
    }
    Ok(states)
}

/// One checked triple in a whole-program report.
#[derive(Clone, Debug, Serialize)]
pub struct ReportEntry {
    pub attacker: AttackerJson,
    pub program_left: String,
    pub program_right: String,
    pub state_left: std::collections::BTreeMap<String, crate::interp::StateCellJson>,
    pub state_right: std::collections::BTreeMap<String, crate::interp::StateCellJson>,
    #[serde(flatten)]
    pub verdict: Verdict,
}

#[derive(Clone, Debug, Serialize)]
pub struct AttackerJson {
    pub actor: String,
    pub capability: Vec<String>,
}

impl AttackerJson {
    pub fn of(a: &Attacker) -> Self {
        AttackerJson {
            actor: a.actor.0.clone(),
            capability: lockset_strs(&a.capability),
        }
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct ReportSummary {
    pub pass: usize,
    pub pass_by_declass: usize,
    pub violation: usize,
    pub inconclusive: usize,
}

/// Aggregated whole-program security check result.
#[derive(Clone, Debug, Serialize)]
pub struct Report {
    /// Whether the program typechecks at the requested type and pc — the
    /// syntactic discharge of the unary half of the security definition.
    pub well_typed: bool,
    pub fuel: u64,
    pub summary: ReportSummary,
    pub entries: Vec<ReportEntry>,
}

impl Report {
    pub fn secure(&self) -> bool {
        self.summary.violation == 0
    }

    pub fn conclusive(&self) -> bool {
        self.summary.inconclusive == 0
    }
}

/// Whole-program security: for every enumerated attacker, every pair of
/// low-equivalent states from the space, and every pair of related
/// substitutions for the free variables, the program bisimulates itself
/// from the identity-seeded world. Typechecking at `(t, pc)` discharges
/// the unary half and is reported separately from the binary verdicts.
#[allow(clippy::too_many_arguments)]
pub fn check_security(
    e: &Expr,
    gamma: &TypeEnv,
    theta: &StateEnv,
    locks: &LockSet,
    t: &AnnType,
    pc: &Policy,
    cfg: &SecurityConfig,
    space: &StateSpace,
    b: &EqBudget,
) -> Result<Report, HarnessError> {
    let fv = e.free_vars();
    if !fv.iter().all(|x| gamma.contains_key(x)) {
        return Err(HarnessError::Precondition(format!(
            "free variables {:?} not all covered by the type environment",
            fv
        )));
    }
    const CAP_LIMIT: usize = 6;
    let attackers = enumerate_attackers(cfg, CAP_LIMIT)?;
    let states = enumerate_states(space)?;

    let mut report = Report {
        well_typed: true,
        fuel: b.fuel,
        summary: ReportSummary::default(),
        entries: Vec::new(),
    };

    for a in &attackers {
        // Related substitution pairs for gamma, one domain per variable.
        let id_beta: std::collections::BTreeMap<LocId, LocId> =
            theta.keys().map(|l| (*l, *l)).collect();
        let mut subst_pairs: Vec<Vec<(String, Expr, Expr)>> = vec![Vec::new()];
        for (x, tx) in gamma {
            let pairs = related_pairs(tx, theta, theta, &id_beta, a, &b.gen)?;
            if pairs.is_empty() {
                return Err(HarnessError::Gen(GenError::EmptyDomain(
                    crate::syntax::pretty::pretty_type(tx),
                )));
            }
            let mut next = Vec::with_capacity(subst_pairs.len() * pairs.len());
            for base in &subst_pairs {
                for (p, q) in &pairs {
                    let mut row = base.clone();
                    row.push((x.clone(), p.clone(), q.clone()));
                    next.push(row);
                }
            }
            subst_pairs = next;
        }

        for (i, s1) in states.iter().enumerate() {
            for s2 in states.iter().skip(i) {
                if state_low_equiv(s1, s2, a, b, cfg) == TriBool::False {
                    continue;
                }
                let w = World::identity(theta);
                for row in &subst_pairs {
                    let mut e1 = e.clone();
                    let mut e2 = e.clone();
                    for (x, p, q) in row {
                        e1 = e1.substitute(x, p);
                        e2 = e2.substitute(x, q);
                    }
                    let ctx = TypingContext::new(cfg)
                        .with_theta(theta.clone())
                        .with_locks(locks.clone())
                        .with_pc(pc.clone());
                    if typecheck_against(cfg, &ctx, &e1, t).is_err()
                        || typecheck_against(cfg, &ctx, &e2, t).is_err()
                    {
                        report.well_typed = false;
                    }
                    let verdict =
                        pairwise_bisim(&e1, &e2, s1, s2, locks, locks, t, a, &w, b, cfg)?;
                    match &verdict {
                        Verdict::Pass => report.summary.pass += 1,
                        Verdict::PassByDeclass { .. } => report.summary.pass_by_declass += 1,
                        Verdict::Violation { .. } => report.summary.violation += 1,
                        Verdict::Inconclusive { .. } => report.summary.inconclusive += 1,
                    }
                    let interesting = !matches!(verdict, Verdict::Pass);
                    if interesting || report.entries.len() < 32 {
                        report.entries.push(ReportEntry {
                            attacker: AttackerJson::of(a),
                            program_left: pretty_expr(&e1),
                            program_right: pretty_expr(&e2),
                            state_left: state_to_json(s1),
                            state_right: state_to_json(s2),
                            verdict,
                        });
                    }
                }
            }
        }
    }
    Ok(report)
}

/// The set of candidate initial states an attacker cannot yet rule out,
/// in canonical serialized form so sets compare and print stably.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct KnowledgeSet {
    pub states: BTreeSet<String>,
}

impl KnowledgeSet {
    pub fn from_states(states: impl IntoIterator<Item = State>) -> Self {
        KnowledgeSet {
            states: states
                .into_iter()
                .map(|s| serde_json::to_string(&state_to_json(&s)).expect("state serializes"))
                .collect(),
        }
    }
}

/// Pointwise trace-prefix indistinguishability under a world seeded with
/// the identity over `id_over`, growing the bijection at matched writes to
/// locations fresh on both sides.
fn trace_prefix_indist(
    prefix: &[Observation],
    run: &[(Observation, LockSet)],
    theta1: &StateEnv,
    theta2: &StateEnv,
    id_over: &StateEnv,
    a: &Attacker,
    b: &EqBudget,
    cfg: &SecurityConfig,
) -> TriBool {
    if run.len() < prefix.len() {
        return TriBool::False;
    }
    let mut w = World::seeded(theta1.clone(), theta2.clone(), id_over);
    let mut verdict = TriBool::True;
    for (want, (got, _)) in prefix.iter().zip(run.iter()) {
        if let (Observation::Write(l1, t1, _), Observation::Write(l2, t2, _)) = (want, got) {
            if t1 == t2
                && !w.theta1.contains_key(l1)
                && !w.theta2.contains_key(l2)
                && !w.beta_inverse_contains(*l2)
            {
                w.extend(*l1, t1.clone(), *l2, t2.clone());
            }
        }
        note_write(&mut w.theta1, want);
        note_write(&mut w.theta2, got);
        verdict = verdict.and(obs_indist(want, got, &w, a, b, cfg));
        if verdict == TriBool::False {
            return TriBool::False;
        }
    }
    verdict
}

/// The attacker's knowledge after observing `prefix`: every state in the
/// space that is low-equivalent to `low` and whose own run reproduces an
/// indistinguishable visible prefix.
#[allow(clippy::too_many_arguments)]
pub fn knowledge(
    e: &Expr,
    prefix: &[Observation],
    low: &State,
    locks: &LockSet,
    space: &StateSpace,
    a: &Attacker,
    cfg: &SecurityConfig,
    fuel: u64,
    b: &EqBudget,
) -> Result<KnowledgeSet, HarnessError> {
    if low_state(low, a) != *low {
        return Err(HarnessError::Precondition(
            "the reference state must be attacker-low (low_state(L) = L)".into(),
        ));
    }
    if !space.first_order() {
        return Err(HarnessError::Gen(GenError::FirstOrderOnly(
            "knowledge over higher-order state".into(),
        )));
    }
    let low_theta = low.theta();
    let mut runs = Vec::new();
    for s in enumerate_states(space)? {
        if state_low_equiv(&s, low, a, b, cfg) == TriBool::False {
            continue;
        }
        let vt = avisible_trace(e, &s, locks, a, cfg, fuel);
        runs.push((s, vt));
    }
    Ok(knowledge_of_runs(prefix, &runs, &low_theta, a, b, cfg))
}

/// Knowledge over precomputed candidate runs: keeps the states whose
/// visible trace reproduces an indistinguishable prefix.
fn knowledge_of_runs(
    prefix: &[Observation],
    runs: &[(State, crate::interp::VisibleTrace)],
    low_theta: &StateEnv,
    a: &Attacker,
    b: &EqBudget,
    cfg: &SecurityConfig,
) -> KnowledgeSet {
    let kept = runs.iter().filter_map(|(s, vt)| {
        let ok = trace_prefix_indist(
            prefix,
            &vt.visible,
            low_theta,
            &s.theta(),
            low_theta,
            a,
            b,
            cfg,
        );
        (ok != TriBool::False).then(|| s.clone())
    });
    KnowledgeSet::from_states(kept)
}

/// Knowledge-based lock-aware security for first-order programs: for every
/// pair of runs from low-equivalent starting states whose visible prefixes
/// are indistinguishable, if either run's next observation happens while
/// its active lock set is within the attacker's capability, the knowledge
/// after the two one-longer prefixes must coincide.
#[allow(clippy::too_many_arguments)]
pub fn flow_lock_check(
    e: &Expr,
    low: &State,
    locks: &LockSet,
    space: &StateSpace,
    a: &Attacker,
    cfg: &SecurityConfig,
    fuel: u64,
    b: &EqBudget,
) -> Result<Verdict, HarnessError> {
    if low_state(low, a) != *low {
        return Err(HarnessError::Precondition(
            "the reference state must be attacker-low (low_state(L) = L)".into(),
        ));
    }
    if !space.first_order() {
        return Err(HarnessError::Gen(GenError::FirstOrderOnly(
            "knowledge over higher-order state".into(),
        )));
    }
    let low_theta = low.theta();
    let mut runs = Vec::new();
    for s in enumerate_states(space)? {
        if state_low_equiv(&s, low, a, b, cfg) == TriBool::False {
            continue;
        }
        let vt = avisible_trace(e, &s, locks, a, cfg, fuel);
        runs.push((s, vt));
    }
    // Knowledge depends only on the prefix, so memoize it by the prefix's
    // rendered observations.
    let mut memo: BTreeMap<Vec<String>, KnowledgeSet> = BTreeMap::new();
    let mut know = |prefix: &[Observation],
                    runs: &[(State, crate::interp::VisibleTrace)]|
     -> KnowledgeSet {
        let key: Vec<String> = prefix.iter().map(obs_str).collect();
        memo.entry(key)
            .or_insert_with(|| knowledge_of_runs(prefix, runs, &low_theta, a, b, cfg))
            .clone()
    };
    let mut saw_unknown = false;
    for (s1, t1) in &runs {
        for (s2, t2) in &runs {
            let max_i = t1.visible.len().min(t2.visible.len());
            for i in 0..max_i {
                let (o1, a1) = &t1.visible[i];
                let (o2, a2) = &t2.visible[i];
                if !lockset_below_attacker(a1, a) && !lockset_below_attacker(a2, a) {
                    continue;
                }
                let prefix1: Vec<Observation> =
                    t1.visible[..i].iter().map(|(o, _)| o.clone()).collect();
                let run2: Vec<(Observation, LockSet)> = t2.visible[..i].to_vec();
                let pre = trace_prefix_indist(
                    &prefix1,
                    &run2,
                    &s1.theta(),
                    &s2.theta(),
                    &low_theta,
                    a,
                    b,
                    cfg,
                );
                match pre {
                    TriBool::False => continue,
                    TriBool::Unknown => {
                        saw_unknown = true;
                        continue;
                    }
                    TriBool::True => {}
                }
                let mut p1: Vec<Observation> = prefix1;
                p1.push(o1.clone());
                let mut p2: Vec<Observation> =
                    t2.visible[..i].iter().map(|(o, _)| o.clone()).collect();
                p2.push(o2.clone());
                let k1 = know(&p1, &runs);
                let k2 = know(&p2, &runs);
                if k1 != k2 {
                    return Ok(Verdict::Violation {
                        step_index: i,
                        reason: format!(
                            "knowledge differs after indistinguishable prefixes of length {i}: \
                             |K1|={} |K2|={}",
                            k1.states.len(),
                            k2.states.len()
                        ),
                        obs_pair: Some((obs_str(o1), obs_str(o2))),
                        states: (state_to_json(s1), state_to_json(s2)),
                    });
                }
            }
        }
    }
    if saw_unknown {
        return Ok(Verdict::Inconclusive { budget: fuel });
    }
    Ok(Verdict::Pass)
}
