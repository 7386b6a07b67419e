//! Bounded, executable indistinguishability: worlds, the binary value
//! relation, state indistinguishability, observation indistinguishability
//! and irrelevance, low states, and syntactic state well-formedness.
//!
//! The ideal relations are step-indexed and quantify over all future
//! worlds; here the step index becomes explicit fuel with a three-valued
//! verdict, so a bounded run can say "could not certify" without lying.

use std::collections::BTreeMap;

use crate::gen::{related_pairs, GenBudget};
use crate::policy::{Attacker, LockSet, SecurityConfig};
use crate::syntax::ast::{AnnType, BaseType, Expr, LocId, StateEnv};
use crate::types::{typecheck_check, TypingContext};

/// A world: the location typings of two runs plus a partial bijection
/// matching locations the attacker considers "the same".
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct World {
    pub theta1: StateEnv,
    pub theta2: StateEnv,
    pub beta: BTreeMap<LocId, LocId>,
}

impl World {
    /// The identity world over `theta`: both sides typed by `theta`, every
    /// location matched with itself.
    pub fn identity(theta: &StateEnv) -> World {
        World {
            theta1: theta.clone(),
            theta2: theta.clone(),
            beta: theta.keys().map(|l| (*l, *l)).collect(),
        }
    }

    /// Seeds a knowledge-style world: `id` over the low domain, with each
    /// side's full typing.
    pub fn seeded(theta1: StateEnv, theta2: StateEnv, id_over: &StateEnv) -> World {
        World { theta1, theta2, beta: id_over.keys().map(|l| (*l, *l)).collect() }
    }

    pub fn beta_inverse_contains(&self, l2: LocId) -> bool {
        self.beta.values().any(|v| *v == l2)
    }

    /// Well-formedness: beta injective both ways, scoped to the thetas, and
    /// type-matched on every pair.
    pub fn well_formed(&self) -> bool {
        let mut seen = std::collections::BTreeSet::new();
        for (l1, l2) in &self.beta {
            if !seen.insert(*l2) {
                return false;
            }
            match (self.theta1.get(l1), self.theta2.get(l2)) {
                (Some(t1), Some(t2)) if t1 == t2 => {}
                _ => return false,
            }
        }
        true
    }

    /// Adds a freshly matched pair, extending both typings.
    pub fn extend(&mut self, l1: LocId, t1: AnnType, l2: LocId, t2: AnnType) {
        self.theta1.insert(l1, t1);
        self.theta2.insert(l2, t2);
        self.beta.insert(l1, l2);
    }
}

/// `w2 ⊒ w1`: both typings and the bijection only grow.
pub fn world_extends(w2: &World, w1: &World) -> bool {
    fn sub(small: &StateEnv, big: &StateEnv) -> bool {
        small.iter().all(|(l, t)| big.get(l) == Some(t))
    }
    sub(&w1.theta1, &w2.theta1)
        && sub(&w1.theta2, &w2.theta2)
        && w1.beta.iter().all(|(l1, l2)| w2.beta.get(l1) == Some(l2))
}

/// Bounds for the bounded relations. `fuel` stands in for the step index;
/// `gen` bounds the argument pairs tried against function values.
#[derive(Clone, Debug)]
pub struct EqBudget {
    pub fuel: u64,
    pub gen: GenBudget,
}

impl Default for EqBudget {
    fn default() -> Self {
        EqBudget { fuel: 64, gen: GenBudget::default() }
    }
}

impl EqBudget {
    pub fn decremented(&self) -> EqBudget {
        EqBudget { fuel: self.fuel.saturating_sub(1), ..self.clone() }
    }
}

/// Three-valued verdict of a bounded check.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TriBool {
    True,
    False,
    /// The budget ran out before the check could certify either way.
    Unknown,
}

impl TriBool {
    pub fn and(self, other: TriBool) -> TriBool {
        use TriBool::*;
        match (self, other) {
            (False, _) | (_, False) => False,
            (Unknown, _) | (_, Unknown) => Unknown,
            _ => True,
        }
    }

    pub fn from_bool(b: bool) -> TriBool {
        if b {
            TriBool::True
        } else {
            TriBool::False
        }
    }

    pub fn is_true(self) -> bool {
        self == TriBool::True
    }
}

/// Syntactic unary well-formedness of a value at a type under a location
/// typing: closed, and accepted by the type checker — a step-index-free
/// stand-in for unary relation membership.
pub fn value_wf(v: &Expr, t: &AnnType, theta: &StateEnv, cfg: &SecurityConfig) -> bool {
    let ctx = TypingContext::new(cfg).with_theta(theta.clone());
    v.is_value() && v.free_vars().is_empty() && typecheck_check(cfg, &ctx, v, t)
}

/// The binary value relation, bounded. Two values are related at `t` for
/// the attacker when either `t`'s label is invisible and both sides are
/// independently well-formed, or the label is visible and the values agree
/// structurally (with `beta` deciding when locations are "the same", and
/// functions tested on generated related argument pairs).
pub fn value_indist(
    v1: &Expr,
    v2: &Expr,
    t: &AnnType,
    w: &World,
    a: &Attacker,
    b: &EqBudget,
    cfg: &SecurityConfig,
) -> TriBool {
    debug_assert!(v1.is_value() && v2.is_value());
    if !t.label.visible_to(a) {
        return TriBool::from_bool(
            value_wf(v1, t, &w.theta1, cfg) && value_wf(v2, t, &w.theta2, cfg),
        );
    }
    match (&t.base, v1, v2) {
        (BaseType::Unit, Expr::Unit, Expr::Unit) => TriBool::True,
        (BaseType::Nat, Expr::Nat(m), Expr::Nat(n)) => TriBool::from_bool(m == n),
        (BaseType::Prod(tl, tr), Expr::Pair(a1, b1), Expr::Pair(a2, b2)) => {
            value_indist(a1, a2, tl, w, a, b, cfg).and(value_indist(b1, b2, tr, w, a, b, cfg))
        }
        (BaseType::Sum(tl, _), Expr::Inl(x, _), Expr::Inl(y, _)) => {
            value_indist(x, y, tl, w, a, b, cfg)
        }
        (BaseType::Sum(_, tr), Expr::Inr(x, _), Expr::Inr(y, _)) => {
            value_indist(x, y, tr, w, a, b, cfg)
        }
        (BaseType::Ref(inner), Expr::Loc(l1), Expr::Loc(l2)) => {
            if w.theta1.get(l1) != Some(inner.as_ref())
                || w.theta2.get(l2) != Some(inner.as_ref())
            {
                return TriBool::False;
            }
            match w.beta.get(l1) {
                Some(l) => TriBool::from_bool(l == l2),
                // Neither side is pinned by the renaming yet: locations whose
                // writes were all invisible never enter `beta`, and such a
                // pair is related up to renaming of fresh addresses.
                None if !w.beta_inverse_contains(*l2) => TriBool::True,
                None => TriBool::False,
            }
        }
        (
            BaseType::Arrow { locks, .. },
            Expr::Lam { param: p1, body: e1, .. },
            Expr::Lam { param: p2, body: e2, .. },
        ) => {
            // Unary halves first: each closure must be well formed.
            if !value_wf(v1, t, &w.theta1, cfg) || !value_wf(v2, t, &w.theta2, cfg) {
                return TriBool::False;
            }
            if b.fuel == 0 {
                return TriBool::Unknown;
            }
            let (from, to) = match &t.base {
                BaseType::Arrow { from, to, .. } => (from.as_ref(), to.as_ref()),
                _ => unreachable!(),
            };
            let pairs = match related_pairs(from, &w.theta1, &w.theta2, &w.beta, a, &b.gen) {
                Ok(ps) => ps,
                Err(_) => return TriBool::Unknown,
            };
            let smaller = b.decremented();
            let mut verdict = TriBool::True;
            for (sig1, sig2) in lockset_superset_pairs(locks, cfg, a) {
                for (a1, a2) in &pairs {
                    let body1 = e1.substitute(p1, a1);
                    let body2 = e2.substitute(p2, a2);
                    let r = crate::harness::expr_relation(
                        &body1, &body2, &sig1, &sig2, to, w, a, &smaller, cfg,
                    );
                    verdict = verdict.and(r);
                    if verdict == TriBool::False {
                        return TriBool::False;
                    }
                }
            }
            verdict
        }
        _ => TriBool::False,
    }
}

/// Low-equivalent pairs of lock-set supersets of `base`, drawn from the
/// config's lock universe. Kept small: the base set itself, plus each
/// single-lock extension applied to both sides, plus the full universe.
pub fn lockset_superset_pairs(
    base: &LockSet,
    cfg: &SecurityConfig,
    _a: &Attacker,
) -> Vec<(LockSet, LockSet)> {
    let mut out = vec![(base.clone(), base.clone())];
    for l in &cfg.locks {
        if !base.contains(l) {
            let mut bigger = base.clone();
            bigger.insert(l.clone());
            out.push((bigger.clone(), bigger));
        }
    }
    let all: LockSet = cfg.locks.iter().cloned().collect();
    if all != *base && out.iter().all(|(s, _)| *s != all) {
        out.push((all.clone(), all));
    }
    out
}

/// World-indexed state indistinguishability: the thetas describe allocated
/// prefixes of the two states with agreeing types, beta is scoped to them,
/// and every matched pair holds related values.
pub fn state_indist(
    s1: &crate::interp::State,
    s2: &crate::interp::State,
    w: &World,
    a: &Attacker,
    b: &EqBudget,
    cfg: &SecurityConfig,
) -> TriBool {
    for (l, t) in &w.theta1 {
        match s1.lookup(*l) {
            Some((_, ty)) if ty == t => {}
            _ => return TriBool::False,
        }
    }
    for (l, t) in &w.theta2 {
        match s2.lookup(*l) {
            Some((_, ty)) if ty == t => {}
            _ => return TriBool::False,
        }
    }
    for (l1, l2) in &w.beta {
        let (t1, t2) = match (w.theta1.get(l1), w.theta2.get(l2)) {
            (Some(t1), Some(t2)) => (t1, t2),
            _ => return TriBool::False,
        };
        if t1 != t2 {
            return TriBool::False;
        }
    }
    let mut verdict = TriBool::True;
    for (l1, l2) in &w.beta {
        let t = &w.theta1[l1];
        let v1 = &s1.lookup(*l1).unwrap().0;
        let v2 = &s2.lookup(*l2).unwrap().0;
        verdict = verdict.and(value_indist(v1, v2, t, w, a, b, cfg));
        if verdict == TriBool::False {
            return TriBool::False;
        }
    }
    verdict
}

/// Observational indistinguishability: high (both invisible), refl
/// (identical non-writes), extend-τ (beta-matched writes of related values
/// at the same declared type).
pub fn obs_indist(
    w1: &crate::interp::Observation,
    w2: &crate::interp::Observation,
    w: &World,
    a: &Attacker,
    b: &EqBudget,
    cfg: &SecurityConfig,
) -> TriBool {
    use crate::interp::{obs_invisible, Observation};
    if obs_invisible(w1, a, cfg) && obs_invisible(w2, a, cfg) {
        return TriBool::True;
    }
    match (w1, w2) {
        (Observation::Write(l1, t1, v1), Observation::Write(l2, t2, v2)) => {
            if t1 != t2 || w.beta.get(l1) != Some(l2) {
                return TriBool::False;
            }
            value_indist(v1, v2, t1, w, a, b, cfg)
        }
        _ => TriBool::from_bool(w1 == w2),
    }
}

/// Observational irrelevance: like indistinguishability, but high fires if
/// either side is invisible, and writes ignore their locations entirely.
pub fn obs_irrelevant(
    w1: &crate::interp::Observation,
    w2: &crate::interp::Observation,
    w: &World,
    a: &Attacker,
    b: &EqBudget,
    cfg: &SecurityConfig,
) -> TriBool {
    use crate::interp::{obs_invisible, Observation};
    if obs_invisible(w1, a, cfg) || obs_invisible(w2, a, cfg) {
        return TriBool::True;
    }
    match (w1, w2) {
        (Observation::Write(_, t1, v1), Observation::Write(_, t2, v2)) => {
            if t1 != t2 {
                return TriBool::False;
            }
            value_indist(v1, v2, t1, w, a, b, cfg)
        }
        _ => TriBool::from_bool(w1 == w2),
    }
}

/// The A-low projection of a state: exactly the cells whose declared type
/// is visible to the attacker.
pub fn low_state(s: &crate::interp::State, a: &Attacker) -> crate::interp::State {
    crate::interp::State {
        cells: s
            .cells
            .iter()
            .filter(|(_, (_, t))| t.label.visible_to(a))
            .map(|(l, c)| (*l, c.clone()))
            .collect(),
        next_fresh: s.next_fresh,
    }
}

/// `S1 ≈_A S2`: equal low domains, and the low projections indistinguishable
/// under the identity world over the low typing.
pub fn state_low_equiv(
    s1: &crate::interp::State,
    s2: &crate::interp::State,
    a: &Attacker,
    b: &EqBudget,
    cfg: &SecurityConfig,
) -> TriBool {
    let l1 = low_state(s1, a);
    let l2 = low_state(s2, a);
    let d1: Vec<_> = l1.cells.keys().collect();
    let d2: Vec<_> = l2.cells.keys().collect();
    if d1 != d2 {
        return TriBool::False;
    }
    if l1.theta() != l2.theta() {
        return TriBool::False;
    }
    let w = World::identity(&l1.theta());
    state_indist(&l1, &l2, &w, a, b, cfg)
}

/// Syntactic state well-formedness `S ⊢wf θ`: every typed location is
/// allocated with the matching declared type, and every stored value
/// typechecks closed at its declared type.
pub fn unary_wf(s: &crate::interp::State, theta: &StateEnv, cfg: &SecurityConfig) -> bool {
    for (l, t) in theta {
        match s.lookup(*l) {
            Some((_, ty)) if ty == t => {}
            _ => return false,
        }
    }
    let full = s.theta();
    theta.iter().all(|(l, t)| {
        let (v, _) = s.lookup(*l).unwrap();
        value_wf(v, t, &full, cfg)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interp::{Observation, State};
    use crate::policy::{Actor, LockSet};
    use crate::syntax::parser::parse_type;

    fn cfg() -> SecurityConfig {
        SecurityConfig::from_names(&["Alice", "Bob"], &["S"])
    }

    fn alice() -> Attacker {
        Attacker { actor: Actor::new("Alice"), capability: LockSet::new() }
    }

    #[test]
    fn world_extension() {
        let c = cfg();
        let nat = parse_type("nat@bot", &c).unwrap();
        let mut theta = StateEnv::new();
        theta.insert(LocId(0), nat.clone());
        let w = World::identity(&theta);
        assert!(world_extends(&w, &w));
        let mut w2 = w.clone();
        w2.extend(LocId(1), nat.clone(), LocId(1), nat.clone());
        assert!(world_extends(&w2, &w));
        assert!(!world_extends(&w, &w2));
    }

    #[test]
    fn value_relation_basics() {
        let c = cfg();
        let b = EqBudget::default();
        let w = World::default();
        let nat_low = parse_type("nat@bot", &c).unwrap();
        let nat_high = parse_type("nat@{ {S} => Alice }", &c).unwrap();
        assert_eq!(
            value_indist(&Expr::Nat(5), &Expr::Nat(5), &nat_low, &w, &alice(), &b, &c),
            TriBool::True
        );
        assert_eq!(
            value_indist(&Expr::Nat(5), &Expr::Nat(7), &nat_low, &w, &alice(), &b, &c),
            TriBool::False
        );
        // invisible label: any two well-formed numerals are related
        assert_eq!(
            value_indist(&Expr::Nat(5), &Expr::Nat(7), &nat_high, &w, &alice(), &b, &c),
            TriBool::True
        );
        // but the attacker holding the capability sees through the guard
        let strong = Attacker { actor: Actor::new("Alice"), capability: crate::policy::lockset(&["S"]) };
        assert_eq!(
            value_indist(&Expr::Nat(5), &Expr::Nat(7), &nat_high, &w, &strong, &b, &c),
            TriBool::False
        );
    }

    #[test]
    fn reference_values_need_beta() {
        let c = cfg();
        let b = EqBudget::default();
        let nat = parse_type("nat@bot", &c).unwrap();
        let rt = parse_type("ref(nat@bot)@bot", &c).unwrap();
        let mut w = World::default();
        w.theta1.insert(LocId(0), nat.clone());
        w.theta2.insert(LocId(1), nat.clone());
        // unpinned pair: related up to renaming of fresh addresses
        assert_eq!(
            value_indist(&Expr::Loc(LocId(0)), &Expr::Loc(LocId(1)), &rt, &w, &alice(), &b, &c),
            TriBool::True
        );
        // once either side is pinned by the renaming, only the pinned partner
        // is acceptable
        w.theta1.insert(LocId(2), nat.clone());
        w.beta.insert(LocId(2), LocId(1));
        assert_eq!(
            value_indist(&Expr::Loc(LocId(0)), &Expr::Loc(LocId(1)), &rt, &w, &alice(), &b, &c),
            TriBool::False
        );
        w.beta.remove(&LocId(2));
        w.beta.insert(LocId(0), LocId(1));
        assert_eq!(
            value_indist(&Expr::Loc(LocId(0)), &Expr::Loc(LocId(1)), &rt, &w, &alice(), &b, &c),
            TriBool::True
        );
    }

    #[test]
    fn state_indistinguishability() {
        let c = cfg();
        let b = EqBudget::default();
        let nat_low = parse_type("nat@bot", &c).unwrap();
        let nat_high = parse_type("nat@{ {S} => Alice }", &c).unwrap();
        let mut s1 = State::new();
        s1.insert(LocId(0), Expr::Nat(1), nat_low.clone());
        s1.insert(LocId(1), Expr::Nat(9), nat_high.clone());
        let mut s2 = s1.clone();
        s2.cells.insert(LocId(1), (Expr::Nat(3), nat_high.clone()));
        let w = World::identity(&s1.theta());
        // differ only at the high cell: indistinguishable
        assert_eq!(state_indist(&s1, &s2, &w, &alice(), &b, &c), TriBool::True);
        // low difference is seen
        s2.cells.insert(LocId(0), (Expr::Nat(2), nat_low.clone()));
        assert_eq!(state_indist(&s1, &s2, &w, &alice(), &b, &c), TriBool::False);
        // an extra unmatched location imposes nothing
        let mut s3 = s1.clone();
        s3.insert(LocId(5), Expr::Nat(7), nat_high.clone());
        assert_eq!(state_indist(&s1, &s3, &w, &alice(), &b, &c), TriBool::True);
    }

    #[test]
    fn observation_relations() {
        let c = cfg();
        let b = EqBudget::default();
        let nat_low = parse_type("nat@bot", &c).unwrap();
        let nat_high = parse_type("nat@{ {S} => Alice }", &c).unwrap();
        let mut w = World::default();
        w.extend(LocId(0), nat_low.clone(), LocId(3), nat_low.clone());
        let a = alice();
        let wl = Observation::Write(LocId(0), nat_low.clone(), Expr::Nat(5));
        let wr = Observation::Write(LocId(3), nat_low.clone(), Expr::Nat(5));
        assert!(obs_indist(&wl, &wr, &w, &a, &b, &c).is_true());
        // unmatched locations: indist fails, irrelevance doesn't care
        let wq = Observation::Write(LocId(7), nat_low.clone(), Expr::Nat(5));
        assert_eq!(obs_indist(&wl, &wq, &w, &a, &b, &c), TriBool::False);
        assert!(obs_irrelevant(&wl, &wq, &w, &a, &b, &c).is_true());
        // one high side: irrelevance fires, indist does not
        let wh = Observation::Write(LocId(9), nat_high.clone(), Expr::Nat(5));
        assert_eq!(obs_indist(&wh, &wl, &w, &a, &b, &c), TriBool::False);
        assert!(obs_irrelevant(&wh, &wl, &w, &a, &b, &c).is_true());
        // differing visible values are distinguishable under both
        let w0 = Observation::Write(LocId(0), nat_low.clone(), Expr::Nat(0));
        let w1 = Observation::Write(LocId(3), nat_low.clone(), Expr::Nat(1));
        assert_eq!(obs_indist(&w0, &w1, &w, &a, &b, &c), TriBool::False);
        assert_eq!(obs_irrelevant(&w0, &w1, &w, &a, &b, &c), TriBool::False);
        // identical lock observations: refl
        let o = Observation::Open(crate::policy::Lock::new("S"));
        assert!(obs_indist(&o, &o, &w, &a, &b, &c).is_true());
    }

    #[test]
    fn low_projection_and_equivalence() {
        let c = cfg();
        let b = EqBudget::default();
        let nat_low = parse_type("nat@bot", &c).unwrap();
        let nat_high = parse_type("nat@{ {S} => Alice }", &c).unwrap();
        let mut s1 = State::new();
        s1.insert(LocId(0), Expr::Nat(1), nat_low.clone());
        s1.insert(LocId(1), Expr::Nat(0), nat_high.clone());
        let mut s2 = s1.clone();
        s2.cells.insert(LocId(1), (Expr::Nat(1), nat_high.clone()));
        assert_eq!(low_state(&s1, &alice()).cells.len(), 1);
        assert!(state_low_equiv(&s1, &s2, &alice(), &b, &c).is_true());
        s2.cells.insert(LocId(0), (Expr::Nat(2), nat_low.clone()));
        assert_eq!(state_low_equiv(&s1, &s2, &alice(), &b, &c), TriBool::False);
    }

    #[test]
    fn wellformedness() {
        let c = cfg();
        let nat = parse_type("nat@bot", &c).unwrap();
        let mut s = State::new();
        s.insert(LocId(0), Expr::Nat(5), nat.clone());
        let theta = s.theta();
        assert!(unary_wf(&s, &theta, &c));
        // stored unit at nat fails
        s.cells.insert(LocId(0), (Expr::Unit, nat.clone()));
        assert!(!unary_wf(&s, &theta, &c));
        // theta mentioning an unallocated location fails
        let mut bigger = theta.clone();
        bigger.insert(LocId(9), nat.clone());
        let mut ok = State::new();
        ok.insert(LocId(0), Expr::Nat(5), nat);
        assert!(!unary_wf(&ok, &bigger, &c));
    }
}
