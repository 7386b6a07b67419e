//! Flow-Locks policy algebra: clauses, policies, the entailment order, join,
//! specialization, attackers, and lock-set comparisons.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A named principal that may observe data.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Actor(pub String);

impl Actor {
    pub fn new(name: impl Into<String>) -> Self {
        Actor(name.into())
    }
}

impl fmt::Display for Actor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A boolean flag gating declassification. While a lock is closed, clauses
/// guarded by it do not grant visibility.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Lock(pub String);

impl Lock {
    pub fn new(name: impl Into<String>) -> Self {
        Lock(name.into())
    }
}

impl fmt::Display for Lock {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Finite set of locks.
pub type LockSet = BTreeSet<Lock>;

pub fn lockset(names: &[&str]) -> LockSet {
    names.iter().map(|n| Lock::new(*n)).collect()
}

/// A single policy clause `guard => actor`: the actor may see the protected
/// data whenever every lock in the guard is open.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Clause {
    pub guard: LockSet,
    pub actor: Actor,
}

impl Clause {
    pub fn new(guard: LockSet, actor: Actor) -> Self {
        Clause { guard, actor }
    }
}

/// A set of clauses; a flow is allowed if any clause allows it. Kept in
/// canonical form: no clause is dominated by another clause for the same
/// actor with a strictly smaller guard.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "Vec<Clause>", into = "Vec<Clause>")]
pub struct Policy {
    clauses: BTreeSet<Clause>,
}

impl From<Vec<Clause>> for Policy {
    fn from(v: Vec<Clause>) -> Self {
        Policy::new(v)
    }
}

impl From<Policy> for Vec<Clause> {
    fn from(p: Policy) -> Self {
        p.clauses.into_iter().collect()
    }
}

impl Policy {
    /// Builds a policy from clauses, canonicalizing.
    pub fn new(clauses: impl IntoIterator<Item = Clause>) -> Self {
        let mut p = Policy {
            clauses: clauses.into_iter().collect(),
        };
        p.canonicalize_in_place();
        p
    }

    /// The most restrictive policy: no clause grants visibility to anyone.
    pub fn top() -> Self {
        Policy {
            clauses: BTreeSet::new(),
        }
    }

    /// The least restrictive policy for a given actor universe: every actor
    /// sees the data unconditionally.
    pub fn bottom(actors: impl IntoIterator<Item = Actor>) -> Self {
        Policy {
            clauses: actors
                .into_iter()
                .map(|a| Clause::new(LockSet::new(), a))
                .collect(),
        }
    }

    pub fn is_top(&self) -> bool {
        self.clauses.is_empty()
    }

    pub fn clauses(&self) -> impl Iterator<Item = &Clause> {
        self.clauses.iter()
    }

    fn canonicalize_in_place(&mut self) {
        let all: Vec<Clause> = self.clauses.iter().cloned().collect();
        self.clauses.retain(|c| {
            !all.iter().any(|d| {
                d.actor == c.actor && d.guard.is_subset(&c.guard) && d.guard != c.guard
            })
        });
    }

    /// Removes every clause dominated by another clause with the same actor
    /// and a strict subset guard. Idempotent.
    pub fn canonicalize(&self) -> Policy {
        let mut p = self.clone();
        p.canonicalize_in_place();
        p
    }

    /// Entailment order: `self ⊑ other` iff for every clause `(Σ₂ ⇒ a)` of
    /// `other` there is a clause `(Σ₁ ⇒ a)` of `self` with `Σ₁ ⊆ Σ₂`.
    /// Lower means more permissive.
    pub fn leq(&self, other: &Policy) -> bool {
        other.clauses.iter().all(|cq| {
            self.clauses
                .iter()
                .any(|cp| cp.actor == cq.actor && cp.guard.is_subset(&cq.guard))
        })
    }

    /// Least upper bound: pairwise guard unions over matching actors.
    pub fn join(&self, other: &Policy) -> Policy {
        let mut out = BTreeSet::new();
        for cp in &self.clauses {
            for cq in &other.clauses {
                if cp.actor == cq.actor {
                    let guard: LockSet = cp.guard.union(&cq.guard).cloned().collect();
                    out.insert(Clause::new(guard, cp.actor.clone()));
                }
            }
        }
        Policy::new(out)
    }

    /// The effective policy once the locks in `sigma` are open: those locks
    /// are deleted from every guard.
    pub fn specialize(&self, sigma: &LockSet) -> Policy {
        Policy::new(self.clauses.iter().map(|c| {
            Clause::new(
                c.guard.difference(sigma).cloned().collect(),
                c.actor.clone(),
            )
        }))
    }

    /// Whether data under this policy is visible to the attacker, i.e.
    /// `self ⊑ { capability ⇒ actor }`.
    pub fn visible_to(&self, a: &Attacker) -> bool {
        self.leq(&a.policy())
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, c) in self.clauses.iter().enumerate() {
            if i > 0 {
                write!(f, "; ")?;
            }
            write!(f, "{{")?;
            for (j, l) in c.guard.iter().enumerate() {
                if j > 0 {
                    write!(f, ",")?;
                }
                write!(f, "{}", l)?;
            }
            write!(f, "}} => {}", c.actor)?;
        }
        write!(f, "}}")
    }
}

/// An actor together with the set of locks it can forcibly open.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Attacker {
    pub actor: Actor,
    pub capability: LockSet,
}

impl Attacker {
    pub fn new(actor: Actor, capability: LockSet) -> Self {
        Attacker { actor, capability }
    }

    /// The single-clause policy `{ capability ⇒ actor }` this attacker sees.
    pub fn policy(&self) -> Policy {
        Policy::new([Clause::new(self.capability.clone(), self.actor.clone())])
    }
}

impl fmt::Display for Attacker {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {{", self.actor)?;
        for (i, l) in self.capability.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", l)?;
        }
        write!(f, "}})")
    }
}

/// `Σ ⊑ A`: all locks of `s` lie within the attacker's capability. Used in
/// the relevance condition: declassification is only relevant when this
/// fails on both sides.
pub fn lockset_below_attacker(s: &LockSet, a: &Attacker) -> bool {
    s.is_subset(&a.capability)
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConfigError {
    #[error("unknown actor `{0}`")]
    UnknownActor(String),
    #[error("unknown lock `{0}`")]
    UnknownLock(String),
}

/// Declared universes of actors and locks, plus the policy associated with
/// each lock (defaulting to bottom).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SecurityConfig {
    pub actors: BTreeSet<Actor>,
    pub locks: BTreeSet<Lock>,
    #[serde(default)]
    pub lock_policies: BTreeMap<Lock, Policy>,
}

impl SecurityConfig {
    pub fn new(
        actors: impl IntoIterator<Item = Actor>,
        locks: impl IntoIterator<Item = Lock>,
    ) -> Self {
        SecurityConfig {
            actors: actors.into_iter().collect(),
            locks: locks.into_iter().collect(),
            lock_policies: BTreeMap::new(),
        }
    }

    pub fn from_names(actors: &[&str], locks: &[&str]) -> Self {
        SecurityConfig::new(
            actors.iter().map(|a| Actor::new(*a)),
            locks.iter().map(|l| Lock::new(*l)),
        )
    }

    pub fn with_lock_policy(mut self, lock: Lock, policy: Policy) -> Self {
        self.lock_policies.insert(lock, policy);
        self
    }

    pub fn bottom(&self) -> Policy {
        Policy::bottom(self.actors.iter().cloned())
    }

    /// `Δ(σ)`: the policy of a lock, defaulting to bottom.
    pub fn lock_policy(&self, lock: &Lock) -> Result<Policy, ConfigError> {
        if !self.locks.contains(lock) {
            return Err(ConfigError::UnknownLock(lock.0.clone()));
        }
        Ok(self
            .lock_policies
            .get(lock)
            .cloned()
            .unwrap_or_else(|| self.bottom()))
    }

    /// Checks a policy only mentions declared actors and locks.
    pub fn validate_policy(&self, p: &Policy) -> Result<(), ConfigError> {
        for c in p.clauses() {
            if !self.actors.contains(&c.actor) {
                return Err(ConfigError::UnknownActor(c.actor.0.clone()));
            }
            for l in &c.guard {
                if !self.locks.contains(l) {
                    return Err(ConfigError::UnknownLock(l.0.clone()));
                }
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        for (l, p) in &self.lock_policies {
            if !self.locks.contains(l) {
                return Err(ConfigError::UnknownLock(l.0.clone()));
            }
            self.validate_policy(p)?;
        }
        Ok(())
    }

    pub fn validate_lockset(&self, s: &LockSet) -> Result<(), ConfigError> {
        for l in s {
            if !self.locks.contains(l) {
                return Err(ConfigError::UnknownLock(l.0.clone()));
            }
        }
        Ok(())
    }
}

/// The locks in `s` whose policy is visible to the attacker.
pub fn low_locks(
    s: &LockSet,
    a: &Attacker,
    cfg: &SecurityConfig,
) -> Result<LockSet, ConfigError> {
    let mut out = LockSet::new();
    for l in s {
        if cfg.lock_policy(l)?.visible_to(a) {
            out.insert(l.clone());
        }
    }
    Ok(out)
}

/// `Σ ≈_A Σ'`: the attacker-visible projections of the lock sets agree.
pub fn lockset_low_equiv(
    s1: &LockSet,
    s2: &LockSet,
    a: &Attacker,
    cfg: &SecurityConfig,
) -> Result<bool, ConfigError> {
    Ok(low_locks(s1, a, cfg)? == low_locks(s2, a, cfg)?)
}
