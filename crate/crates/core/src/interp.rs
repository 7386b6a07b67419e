//! Deterministic, fuel-bounded small-step interpreter.
//!
//! A step has the shape `⟨e, Σ, S⟩ → ⟨e', S', ω, Σ'⟩`: expression `e` with
//! open locks `Σ` in state `S` steps to `e'`, updating the state, emitting
//! an observation `ω`, and reporting the *active* lock set `Σ'` — the lock
//! set in force at the redex, which may differ from `Σ` inside the scope of
//! `open`/`close`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::policy::{Attacker, Lock, LockSet, Policy, SecurityConfig};
use crate::syntax::ast::{AnnType, Expr, LocId};

/// The heap: locations to (value, declared type), plus a deterministic
/// allocation counter.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct State {
    pub cells: BTreeMap<LocId, (Expr, AnnType)>,
    pub next_fresh: u64,
}

impl State {
    pub fn new() -> Self {
        State::default()
    }

    pub fn lookup(&self, l: LocId) -> Option<&(Expr, AnnType)> {
        self.cells.get(&l)
    }

    pub fn insert(&mut self, l: LocId, v: Expr, t: AnnType) {
        debug_assert!(v.is_value());
        self.cells.insert(l, (v, t));
        self.next_fresh = self.next_fresh.max(l.0 + 1);
    }

    fn alloc(&mut self, v: Expr, t: AnnType) -> LocId {
        let l = LocId(self.next_fresh);
        self.next_fresh += 1;
        self.cells.insert(l, (v, t));
        l
    }

    /// The location typing `θ` induced by this state.
    pub fn theta(&self) -> crate::syntax::ast::StateEnv {
        self.cells.iter().map(|(l, (_, t))| (*l, t.clone())).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Observation {
    Eps,
    Write(LocId, AnnType, Expr),
    Open(Lock),
    Close(Lock),
    Unopen(Lock),
    Unclose(Lock),
}

impl Observation {
    pub fn is_eps(&self) -> bool {
        matches!(self, Observation::Eps)
    }
}

/// `policy(ω)`: the policy at which an observation is released. `None`
/// for the empty observation, whose policy is undefined.
pub fn obs_policy(w: &Observation, cfg: &SecurityConfig) -> Option<Policy> {
    match w {
        Observation::Eps => None,
        Observation::Write(_, t, _) => Some(t.label.clone()),
        Observation::Open(s)
        | Observation::Close(s)
        | Observation::Unopen(s)
        | Observation::Unclose(s) => Some(cfg.lock_policy(s).unwrap_or_else(|_| cfg.bottom())),
    }
}

/// `inv(ω)`: true when the attacker cannot see `ω` (silent, or released at
/// a policy that does not flow to the attacker).
pub fn obs_invisible(w: &Observation, attacker: &Attacker, cfg: &SecurityConfig) -> bool {
    match obs_policy(w, cfg) {
        None => true,
        Some(p) => !p.visible_to(attacker),
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StuckReason {
    UnboundVariable(String),
    DerefNonLocation,
    AssignToNonLocation,
    AssignToUnallocated(LocId),
    DerefUnallocated(LocId),
    ApplyNonFunction,
    ProjectNonPair,
    CaseNonSum,
}

impl std::fmt::Display for StuckReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            StuckReason::UnboundVariable(x) => write!(f, "unbound variable '{x}'"),
            StuckReason::DerefNonLocation => write!(f, "dereference of a non-location"),
            StuckReason::AssignToNonLocation => write!(f, "assignment to a non-location"),
            StuckReason::AssignToUnallocated(l) => write!(f, "assignment to unallocated {l}"),
            StuckReason::DerefUnallocated(l) => write!(f, "dereference of unallocated {l}"),
            StuckReason::ApplyNonFunction => write!(f, "application of a non-function"),
            StuckReason::ProjectNonPair => write!(f, "projection from a non-pair"),
            StuckReason::CaseNonSum => write!(f, "case analysis of a non-sum"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StepOutcome {
    Stepped {
        expr: Expr,
        state: State,
        obs: Observation,
        active: LockSet,
    },
    Terminal(Expr),
    Stuck(StuckReason),
}

/// One reduction step. Deterministic: every configuration has exactly one
/// outcome.
pub fn step(e: &Expr, locks: &LockSet, s: &State) -> StepOutcome {
    use StepOutcome::*;
    if e.is_value() {
        return Terminal(e.clone());
    }
    // Helper: reduce a subterm and rebuild around it.
    macro_rules! congruence {
        ($sub:expr, $locks:expr, $rebuild:expr) => {
            match step($sub, $locks, s) {
                Stepped { expr, state, obs, active } => Stepped {
                    expr: $rebuild(expr),
                    state,
                    obs,
                    active,
                },
                Terminal(_) => unreachable!("congruence on a value"),
                stuck => stuck,
            }
        };
    }
    match e {
        Expr::Var(x) => Stuck(StuckReason::UnboundVariable(x.clone())),
        Expr::Unit | Expr::Nat(_) | Expr::Loc(_) | Expr::Lam { .. } => unreachable!(),
        Expr::Open(l, body) => Stepped {
            expr: Expr::Opened(l.clone(), body.clone()),
            state: s.clone(),
            obs: Observation::Open(l.clone()),
            active: locks.clone(),
        },
        Expr::Opened(l, body) => {
            if body.is_value() {
                Stepped {
                    expr: (**body).clone(),
                    state: s.clone(),
                    obs: Observation::Unopen(l.clone()),
                    active: locks.clone(),
                }
            } else {
                let mut inner = locks.clone();
                inner.insert(l.clone());
                let l = l.clone();
                congruence!(body, &inner, |e| Expr::Opened(l, Box::new(e)))
            }
        }
        Expr::Close(l, body) => Stepped {
            expr: Expr::Closed(l.clone(), body.clone()),
            state: s.clone(),
            obs: Observation::Close(l.clone()),
            active: locks.clone(),
        },
        Expr::Closed(l, body) => {
            if body.is_value() {
                Stepped {
                    expr: (**body).clone(),
                    state: s.clone(),
                    obs: Observation::Unclose(l.clone()),
                    active: locks.clone(),
                }
            } else {
                let mut inner = locks.clone();
                inner.remove(l);
                let l = l.clone();
                congruence!(body, &inner, |e| Expr::Closed(l, Box::new(e)))
            }
        }
        Expr::Pair(a, b) => {
            if !a.is_value() {
                let b = b.clone();
                congruence!(a, locks, |e| Expr::Pair(Box::new(e), b))
            } else {
                let a = a.clone();
                congruence!(b, locks, |e| Expr::Pair(a, Box::new(e)))
            }
        }
        Expr::Fst(p) => {
            if let Expr::Pair(a, b) = &**p {
                if a.is_value() && b.is_value() {
                    return Stepped {
                        expr: (**a).clone(),
                        state: s.clone(),
                        obs: Observation::Eps,
                        active: locks.clone(),
                    };
                }
            }
            if p.is_value() {
                Stuck(StuckReason::ProjectNonPair)
            } else {
                congruence!(p, locks, |e| Expr::Fst(Box::new(e)))
            }
        }
        Expr::Snd(p) => {
            if let Expr::Pair(a, b) = &**p {
                if a.is_value() && b.is_value() {
                    return Stepped {
                        expr: (**b).clone(),
                        state: s.clone(),
                        obs: Observation::Eps,
                        active: locks.clone(),
                    };
                }
            }
            if p.is_value() {
                Stuck(StuckReason::ProjectNonPair)
            } else {
                congruence!(p, locks, |e| Expr::Snd(Box::new(e)))
            }
        }
        Expr::Inl(x, t) => {
            let t = t.clone();
            congruence!(x, locks, |e| Expr::Inl(Box::new(e), t))
        }
        Expr::Inr(x, t) => {
            let t = t.clone();
            congruence!(x, locks, |e| Expr::Inr(Box::new(e), t))
        }
        Expr::Case { scrut, left_var, left, right_var, right } => {
            if scrut.is_value() {
                match &**scrut {
                    Expr::Inl(v, _) => Stepped {
                        expr: left.substitute(left_var, v),
                        state: s.clone(),
                        obs: Observation::Eps,
                        active: locks.clone(),
                    },
                    Expr::Inr(v, _) => Stepped {
                        expr: right.substitute(right_var, v),
                        state: s.clone(),
                        obs: Observation::Eps,
                        active: locks.clone(),
                    },
                    _ => Stuck(StuckReason::CaseNonSum),
                }
            } else {
                let (lv, l, rv, r) =
                    (left_var.clone(), left.clone(), right_var.clone(), right.clone());
                congruence!(scrut, locks, |e| Expr::Case {
                    scrut: Box::new(e),
                    left_var: lv,
                    left: l,
                    right_var: rv,
                    right: r,
                })
            }
        }
        Expr::App(f, a) => {
            if !f.is_value() {
                let a = a.clone();
                congruence!(f, locks, |e| Expr::App(Box::new(e), a))
            } else if !a.is_value() {
                let f = f.clone();
                congruence!(a, locks, |e| Expr::App(f, Box::new(e)))
            } else {
                match &**f {
                    Expr::Lam { param, body, .. } => Stepped {
                        expr: body.substitute(param, a),
                        state: s.clone(),
                        obs: Observation::Eps,
                        active: locks.clone(),
                    },
                    _ => Stuck(StuckReason::ApplyNonFunction),
                }
            }
        }
        Expr::New(v, t) => {
            if v.is_value() {
                let mut state = s.clone();
                let l = state.alloc((**v).clone(), (**t).clone());
                Stepped {
                    expr: Expr::Loc(l),
                    state,
                    obs: Observation::Write(l, (**t).clone(), (**v).clone()),
                    active: locks.clone(),
                }
            } else {
                let t = t.clone();
                congruence!(v, locks, |e| Expr::New(Box::new(e), t))
            }
        }
        Expr::Deref(r) => {
            if let Expr::Loc(l) = &**r {
                match s.lookup(*l) {
                    Some((v, _)) => Stepped {
                        expr: v.clone(),
                        state: s.clone(),
                        obs: Observation::Eps,
                        active: locks.clone(),
                    },
                    None => Stuck(StuckReason::DerefUnallocated(*l)),
                }
            } else if r.is_value() {
                Stuck(StuckReason::DerefNonLocation)
            } else {
                congruence!(r, locks, |e| Expr::Deref(Box::new(e)))
            }
        }
        Expr::Assign(lhs, rhs) => {
            if !lhs.is_value() {
                let rhs = rhs.clone();
                congruence!(lhs, locks, |e| Expr::Assign(Box::new(e), rhs))
            } else if !rhs.is_value() {
                let lhs = lhs.clone();
                congruence!(rhs, locks, |e| Expr::Assign(lhs, Box::new(e)))
            } else if let Expr::Loc(l) = &**lhs {
                // The declared type comes from the state, not the value.
                match s.lookup(*l) {
                    Some((_, t)) => {
                        let t = t.clone();
                        let mut state = s.clone();
                        state.cells.insert(*l, ((**rhs).clone(), t.clone()));
                        Stepped {
                            expr: Expr::Unit,
                            state,
                            obs: Observation::Write(*l, t, (**rhs).clone()),
                            active: locks.clone(),
                        }
                    }
                    None => Stuck(StuckReason::AssignToUnallocated(*l)),
                }
            } else {
                Stuck(StuckReason::AssignToNonLocation)
            }
        }
        Expr::When(l, open_branch, closed_branch) => {
            let is_open = locks.contains(l);
            let branch = if is_open { open_branch } else { closed_branch };
            if branch.is_value() {
                Stepped {
                    expr: (**branch).clone(),
                    state: s.clone(),
                    obs: Observation::Eps,
                    active: locks.clone(),
                }
            } else if is_open {
                let (l, cb) = (l.clone(), closed_branch.clone());
                congruence!(open_branch, locks, |e| Expr::When(l, Box::new(e), cb))
            } else {
                let (l, ob) = (l.clone(), open_branch.clone());
                congruence!(closed_branch, locks, |e| Expr::When(l, ob, Box::new(e)))
            }
        }
    }
}

/// What terminated a run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Final {
    Terminal(Expr),
    Stuck(StuckReason),
    FuelExhausted(Expr),
}

/// The record of a run: every step's observation and active lock set, and
/// how the run ended.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trace {
    pub steps: Vec<(Observation, LockSet)>,
    pub final_state: State,
    pub outcome: Final,
}

/// Iterates [`step`] for at most `fuel` steps.
pub fn run(e: &Expr, locks: &LockSet, s: &State, fuel: u64) -> Trace {
    let mut cur = e.clone();
    let mut state = s.clone();
    let mut steps = Vec::new();
    for _ in 0..fuel {
        match step(&cur, locks, &state) {
            StepOutcome::Terminal(v) => {
                return Trace { steps, final_state: state, outcome: Final::Terminal(v) }
            }
            StepOutcome::Stuck(r) => {
                return Trace { steps, final_state: state, outcome: Final::Stuck(r) }
            }
            StepOutcome::Stepped { expr, state: s2, obs, active } => {
                steps.push((obs, active));
                cur = expr;
                state = s2;
            }
        }
    }
    // One last look: the term may already be a value with zero fuel left.
    if cur.is_value() {
        Trace { steps, final_state: state, outcome: Final::Terminal(cur) }
    } else {
        Trace { steps, final_state: state, outcome: Final::FuelExhausted(cur) }
    }
}

/// The attacker-visible portion of a run: observations whose policy flows
/// to the attacker, each with its active lock set; plus the run's outcome
/// and the active lock set of the last visible step (the starting lock set
/// when nothing was visible).
pub struct VisibleTrace {
    pub visible: Vec<(Observation, LockSet)>,
    pub outcome: Final,
    pub last_active: LockSet,
}

pub fn avisible_trace(
    e: &Expr,
    s: &State,
    locks: &LockSet,
    attacker: &Attacker,
    cfg: &SecurityConfig,
    fuel: u64,
) -> VisibleTrace {
    let t = run(e, locks, s, fuel);
    let mut visible = Vec::new();
    let mut last_active = locks.clone();
    for (obs, active) in t.steps {
        if !obs_invisible(&obs, attacker, cfg) {
            last_active = active.clone();
            visible.push((obs, active));
        }
    }
    VisibleTrace { visible, outcome: t.outcome, last_active }
}

// --- JSON forms -----------------------------------------------------------
//
// Expressions and types are serialized as their concrete syntax, so traces
// and states can be replayed by parsing them back.

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ObsJson {
    Eps,
    Write { loc: String, r#type: String, value: String },
    Open { lock: String },
    Close { lock: String },
    Unopen { lock: String },
    Unclose { lock: String },
}

impl From<&Observation> for ObsJson {
    fn from(o: &Observation) -> Self {
        use crate::syntax::pretty::{pretty_expr, pretty_type};
        match o {
            Observation::Eps => ObsJson::Eps,
            Observation::Write(l, t, v) => ObsJson::Write {
                loc: l.to_string(),
                r#type: pretty_type(t),
                value: pretty_expr(v),
            },
            Observation::Open(l) => ObsJson::Open { lock: l.to_string() },
            Observation::Close(l) => ObsJson::Close { lock: l.to_string() },
            Observation::Unopen(l) => ObsJson::Unopen { lock: l.to_string() },
            Observation::Unclose(l) => ObsJson::Unclose { lock: l.to_string() },
        }
    }
}

#[derive(Serialize, Deserialize)]
pub struct TraceStepJson {
    pub obs: ObsJson,
    pub active: Vec<String>,
}

#[derive(Serialize, Deserialize)]
pub struct TraceJson {
    pub steps: Vec<TraceStepJson>,
    /// "terminal", "stuck", or "fuel".
    pub r#final: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    pub state: BTreeMap<String, StateCellJson>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateCellJson {
    pub value: String,
    pub r#type: String,
}

impl Trace {
    pub fn to_json(&self) -> TraceJson {
        use crate::syntax::pretty::pretty_expr;
        let (fin, value, reason) = match &self.outcome {
            Final::Terminal(v) => ("terminal", Some(pretty_expr(v)), None),
            Final::Stuck(r) => ("stuck", None, Some(r.to_string())),
            Final::FuelExhausted(e) => ("fuel", Some(pretty_expr(e)), None),
        };
        TraceJson {
            steps: self
                .steps
                .iter()
                .map(|(o, a)| TraceStepJson {
                    obs: o.into(),
                    active: a.iter().map(|l| l.to_string()).collect(),
                })
                .collect(),
            r#final: fin.to_string(),
            value,
            reason,
            state: state_to_json(&self.final_state),
        }
    }
}

pub fn state_to_json(s: &State) -> BTreeMap<String, StateCellJson> {
    use crate::syntax::pretty::{pretty_expr, pretty_type};
    s.cells
        .iter()
        .map(|(l, (v, t))| {
            (l.to_string(), StateCellJson { value: pretty_expr(v), r#type: pretty_type(t) })
        })
        .collect()
}

/// Parses an observation back from its JSON form.
pub fn obs_from_json(o: &ObsJson, cfg: &SecurityConfig) -> Result<Observation, String> {
    use crate::syntax::parser::{parse_runtime_expr, parse_type};
    let lock = |name: &str| Lock::new(name);
    Ok(match o {
        ObsJson::Eps => Observation::Eps,
        ObsJson::Write { loc, r#type, value } => {
            let n: u64 = loc
                .strip_prefix('#')
                .and_then(|d| d.parse().ok())
                .ok_or_else(|| format!("bad location {loc:?}"))?;
            let t = parse_type(r#type, cfg).map_err(|e| e.to_string())?;
            let v = parse_runtime_expr(value, cfg).map_err(|e| e.to_string())?;
            Observation::Write(LocId(n), t, v)
        }
        ObsJson::Open { lock: l } => Observation::Open(lock(l)),
        ObsJson::Close { lock: l } => Observation::Close(lock(l)),
        ObsJson::Unopen { lock: l } => Observation::Unopen(lock(l)),
        ObsJson::Unclose { lock: l } => Observation::Unclose(lock(l)),
    })
}

/// Parses a state back from its JSON form.
pub fn state_from_json(
    m: &BTreeMap<String, StateCellJson>,
    cfg: &SecurityConfig,
) -> Result<State, String> {
    use crate::syntax::parser::{parse_runtime_expr, parse_type};
    let mut s = State::new();
    for (k, cell) in m {
        let n: u64 = k
            .strip_prefix('#')
            .and_then(|d| d.parse().ok())
            .ok_or_else(|| format!("bad location key {k:?}"))?;
        let v = parse_runtime_expr(&cell.value, cfg).map_err(|e| e.to_string())?;
        let t = parse_type(&cell.r#type, cfg).map_err(|e| e.to_string())?;
        if !v.is_value() {
            return Err(format!("stored expression at {k} is not a value"));
        }
        s.insert(LocId(n), v, t);
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::lockset;
    use crate::syntax::parser::parse_expr;

    fn cfg() -> SecurityConfig {
        SecurityConfig::from_names(&["Alice", "Bob"], &["S", "T"])
    }

    fn run_src(src: &str, locks: &LockSet) -> Trace {
        let c = cfg();
        let e = parse_expr(src, &c).unwrap();
        run(&e, locks, &State::new(), 1000)
    }

    #[test]
    fn open_emits_scoped_observations() {
        let t = run_src("open S in ()", &LockSet::new());
        let obs: Vec<_> = t.steps.iter().map(|(o, _)| o.clone()).collect();
        assert_eq!(
            obs,
            vec![Observation::Open(Lock::new("S")), Observation::Unopen(Lock::new("S"))]
        );
        assert_eq!(t.outcome, Final::Terminal(Expr::Unit));
    }

    #[test]
    fn active_lock_set_tracks_redex() {
        // the write inside the open happens with S active
        let t = run_src("open S in new(1 : nat@bot)", &lockset(&["T"]));
        let write_step = t
            .steps
            .iter()
            .find(|(o, _)| matches!(o, Observation::Write(..)))
            .unwrap();
        assert_eq!(write_step.1, lockset(&["S", "T"]));
        // the open/unopen observations themselves carry the outer lock set
        assert_eq!(t.steps[0].1, lockset(&["T"]));
    }

    #[test]
    fn close_removes_lock_in_scope() {
        let t = run_src("close T in new(1 : nat@bot)", &lockset(&["T"]));
        let write_step = t
            .steps
            .iter()
            .find(|(o, _)| matches!(o, Observation::Write(..)))
            .unwrap();
        assert_eq!(write_step.1, LockSet::new());
    }

    #[test]
    fn beta_is_silent() {
        let t = run_src("(fun x. x) 5", &LockSet::new());
        assert_eq!(t.steps.len(), 1);
        assert!(t.steps[0].0.is_eps());
        assert_eq!(t.outcome, Final::Terminal(Expr::Nat(5)));
    }

    #[test]
    fn allocation_is_deterministic_and_observable() {
        let t = run_src("let r = new(0 : nat@bot) in r := 5; !r", &LockSet::new());
        assert_eq!(t.outcome, Final::Terminal(Expr::Nat(5)));
        let writes: Vec<_> = t
            .steps
            .iter()
            .filter_map(|(o, _)| match o {
                Observation::Write(l, _, v) => Some((*l, v.clone())),
                _ => None,
            })
            .collect();
        assert_eq!(
            writes,
            vec![(LocId(0), Expr::Nat(0)), (LocId(0), Expr::Nat(5))]
        );
        assert_eq!(t.final_state.cells[&LocId(0)].0, Expr::Nat(5));
    }

    #[test]
    fn when_reduces_branch_in_place() {
        let t = run_src("when S then 1 else 0", &lockset(&["S"]));
        assert_eq!(t.outcome, Final::Terminal(Expr::Nat(1)));
        let t = run_src("when S then 1 else 0", &LockSet::new());
        assert_eq!(t.outcome, Final::Terminal(Expr::Nat(0)));
        // a non-value branch reduces inside the `when`
        let c = cfg();
        let e = parse_expr("when S then (fun x. x) 1 else 0", &c).unwrap();
        match step(&e, &lockset(&["S"]), &State::new()) {
            StepOutcome::Stepped { expr, .. } => {
                assert!(matches!(expr, Expr::When(..)));
            }
            other => panic!("expected step, got {other:?}"),
        }
    }

    #[test]
    fn fuel_exhaustion_is_reported() {
        let t = run_src("(fun x. x x) (fun x. x x)", &LockSet::new());
        assert_eq!(t.steps.len(), 1000);
        assert!(matches!(t.outcome, Final::FuelExhausted(_)));
    }

    #[test]
    fn stuck_terms_report_reasons() {
        let t = run_src("fst 5", &LockSet::new());
        assert_eq!(t.outcome, Final::Stuck(StuckReason::ProjectNonPair));
        let t = run_src("5 3", &LockSet::new());
        assert_eq!(t.outcome, Final::Stuck(StuckReason::ApplyNonFunction));
    }

    #[test]
    fn visible_trace_filters_by_attacker() {
        let c = cfg();
        let alice = Attacker { actor: crate::policy::Actor::new("Alice"), capability: LockSet::new() };
        // a write at a policy Alice cannot see, between two she can
        let e = parse_expr(
            "new(1 : nat@bot); new(2 : nat@{ {S} => Alice }); new(3 : nat@bot)",
            &c,
        )
        .unwrap();
        let vt = avisible_trace(&e, &State::new(), &LockSet::new(), &alice, &c, 1000);
        let vals: Vec<_> = vt
            .visible
            .iter()
            .map(|(o, _)| match o {
                Observation::Write(_, _, v) => v.clone(),
                o => panic!("unexpected {o:?}"),
            })
            .collect();
        assert_eq!(vals, vec![Expr::Nat(1), Expr::Nat(3)]);
        // lock observations at bottom stay visible even when writes vanish
        let h = parse_expr("open S in new(2 : nat@{ {T} => Alice })", &c).unwrap();
        let vt = avisible_trace(&h, &State::new(), &LockSet::new(), &alice, &c, 1000);
        let kinds: Vec<_> = vt.visible.iter().map(|(o, _)| o.clone()).collect();
        assert_eq!(
            kinds,
            vec![Observation::Open(Lock::new("S")), Observation::Unopen(Lock::new("S"))]
        );
    }

    #[test]
    fn trace_json_round_trips_state() {
        let c = cfg();
        let t = run_src("new((1, (2, 3)) : (nat@bot * (nat@bot * nat@bot)@bot)@bot)", &LockSet::new());
        let js = serde_json::to_string(&t.to_json()).unwrap();
        let back: TraceJson = serde_json::from_str(&js).unwrap();
        let s2 = state_from_json(&back.state, &c).unwrap();
        assert_eq!(s2.cells, t.final_state.cells);
    }
}
