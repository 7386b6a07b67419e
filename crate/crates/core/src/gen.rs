//! Finite value generation and seeded random program generation.
//!
//! The bounded equivalence checks quantify over "all" values of a type;
//! here those quantifiers get their finite carriers: numerals come from a
//! configurable domain, compound types take Cartesian products, references
//! range over the locations of a state environment, and functions are
//! approximated by a small catalog of constant closures.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::policy::{LockSet, Policy, SecurityConfig};
use crate::syntax::ast::{AnnType, BaseType, Expr, LamAnn, StateEnv};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GenError {
    #[error("type {0} is higher-order; only first-order types can be enumerated here")]
    FirstOrderOnly(String),
    #[error("no values of type {0} can be generated (no matching locations)")]
    EmptyDomain(String),
}

/// Knobs bounding every generator.
#[derive(Clone, Debug)]
pub struct GenBudget {
    pub nat_domain: Vec<u64>,
    /// How deep closures may nest when cataloguing function values.
    pub arg_depth: u32,
    /// Hard cap on the number of values/pairs produced per type.
    pub max_values: usize,
}

impl Default for GenBudget {
    fn default() -> Self {
        GenBudget { nat_domain: vec![0, 1, 2], arg_depth: 2, max_values: 64 }
    }
}

/// All values of `t`, drawn from the budget's domains. References range
/// over the locations of `theta` holding exactly `t`'s content type.
/// Functions become constant closures over the codomain's domain; at depth
/// zero they are an error.
pub fn value_domain(
    t: &AnnType,
    theta: &StateEnv,
    b: &GenBudget,
) -> Result<Vec<Expr>, GenError> {
    let mut out = value_domain_depth(t, theta, b, b.arg_depth)?;
    out.truncate(b.max_values);
    Ok(out)
}

fn value_domain_depth(
    t: &AnnType,
    theta: &StateEnv,
    b: &GenBudget,
    depth: u32,
) -> Result<Vec<Expr>, GenError> {
    use crate::syntax::pretty::pretty_type;
    let vals = match &t.base {
        BaseType::Unit => vec![Expr::Unit],
        BaseType::Nat => b.nat_domain.iter().map(|n| Expr::Nat(*n)).collect(),
        BaseType::Prod(l, r) => {
            let ls = value_domain_depth(l, theta, b, depth)?;
            let rs = value_domain_depth(r, theta, b, depth)?;
            let mut out = Vec::new();
            for a in &ls {
                for c in &rs {
                    out.push(Expr::Pair(Box::new(a.clone()), Box::new(c.clone())));
                    if out.len() >= b.max_values {
                        return Ok(out);
                    }
                }
            }
            out
        }
        BaseType::Sum(l, r) => {
            let mut out: Vec<Expr> = value_domain_depth(l, theta, b, depth)?
                .into_iter()
                .map(|v| Expr::Inl(Box::new(v), Some(r.clone())))
                .collect();
            out.extend(
                value_domain_depth(r, theta, b, depth)?
                    .into_iter()
                    .map(|v| Expr::Inr(Box::new(v), Some(l.clone()))),
            );
            out
        }
        BaseType::Ref(inner) => theta
            .iter()
            .filter(|(_, ty)| *ty == inner.as_ref())
            .map(|(l, _)| Expr::Loc(*l))
            .collect(),
        BaseType::Arrow { locks, pc, from, to } => {
            if depth == 0 {
                return Err(GenError::FirstOrderOnly(pretty_type(t)));
            }
            value_domain_depth(to, theta, b, depth - 1)?
                .into_iter()
                .map(|body| {
                    Expr::lam_ann(
                        "_arg",
                        LamAnn {
                            locks: locks.clone(),
                            pc: pc.clone(),
                            arg_ty: from.as_ref().clone(),
                        },
                        body,
                    )
                })
                .collect()
        }
    };
    Ok(vals)
}

/// True if no arrow type occurs anywhere in `t` — the precondition for the
/// knowledge-based machinery.
pub fn first_order(t: &AnnType) -> bool {
    t.is_first_order()
}

/// Pairs of values related at `t` for an attacker who can see `t`'s label:
/// structural diagonal pairs. Invisible labels instead admit the full cross
/// product of independently chosen values (secrets may differ freely).
pub fn related_pairs(
    t: &AnnType,
    theta1: &StateEnv,
    theta2: &StateEnv,
    beta: &std::collections::BTreeMap<crate::syntax::ast::LocId, crate::syntax::ast::LocId>,
    attacker: &crate::policy::Attacker,
    b: &GenBudget,
) -> Result<Vec<(Expr, Expr)>, GenError> {
    let mut out = related_pairs_inner(t, theta1, theta2, beta, attacker, b)?;
    out.truncate(b.max_values);
    Ok(out)
}

fn related_pairs_inner(
    t: &AnnType,
    theta1: &StateEnv,
    theta2: &StateEnv,
    beta: &std::collections::BTreeMap<crate::syntax::ast::LocId, crate::syntax::ast::LocId>,
    attacker: &crate::policy::Attacker,
    b: &GenBudget,
) -> Result<Vec<(Expr, Expr)>, GenError> {
    if !t.label.visible_to(attacker) {
        let vs1 = value_domain(t, theta1, b)?;
        let vs2 = value_domain(t, theta2, b)?;
        let mut out = Vec::new();
        for v1 in &vs1 {
            for v2 in &vs2 {
                out.push((v1.clone(), v2.clone()));
                if out.len() >= b.max_values {
                    return Ok(out);
                }
            }
        }
        return Ok(out);
    }
    let pairs = match &t.base {
        BaseType::Unit => vec![(Expr::Unit, Expr::Unit)],
        BaseType::Nat => b
            .nat_domain
            .iter()
            .map(|n| (Expr::Nat(*n), Expr::Nat(*n)))
            .collect(),
        BaseType::Prod(l, r) => {
            let ls = related_pairs_inner(l, theta1, theta2, beta, attacker, b)?;
            let rs = related_pairs_inner(r, theta1, theta2, beta, attacker, b)?;
            let mut out = Vec::new();
            for (a1, a2) in &ls {
                for (c1, c2) in &rs {
                    out.push((
                        Expr::Pair(Box::new(a1.clone()), Box::new(c1.clone())),
                        Expr::Pair(Box::new(a2.clone()), Box::new(c2.clone())),
                    ));
                    if out.len() >= b.max_values {
                        return Ok(out);
                    }
                }
            }
            out
        }
        BaseType::Sum(l, r) => {
            let mut out: Vec<(Expr, Expr)> = related_pairs_inner(l, theta1, theta2, beta, attacker, b)?
                .into_iter()
                .map(|(v1, v2)| {
                    (
                        Expr::Inl(Box::new(v1), Some(r.clone())),
                        Expr::Inl(Box::new(v2), Some(r.clone())),
                    )
                })
                .collect();
            out.extend(
                related_pairs_inner(r, theta1, theta2, beta, attacker, b)?
                    .into_iter()
                    .map(|(v1, v2)| {
                        (
                            Expr::Inr(Box::new(v1), Some(l.clone())),
                            Expr::Inr(Box::new(v2), Some(l.clone())),
                        )
                    }),
            );
            out
        }
        BaseType::Ref(inner) => beta
            .iter()
            .filter(|(l1, l2)| {
                theta1.get(l1) == Some(inner.as_ref()) && theta2.get(l2) == Some(inner.as_ref())
            })
            .map(|(l1, l2)| (Expr::Loc(*l1), Expr::Loc(*l2)))
            .collect(),
        BaseType::Arrow { .. } => {
            // Visible functions: use the same catalogued closure on both
            // sides; syntactically equal closed closures are related.
            value_domain(t, theta1, b)?
                .into_iter()
                .map(|v| (v.clone(), v))
                .collect()
        }
    };
    Ok(pairs)
}

// --- Random well-typed program generation ---------------------------------

/// Goal-directed random generator for candidate programs. The output is
/// biased toward well-typed terms but not guaranteed; callers filter with
/// the type checker.
pub struct ProgramGen {
    rng: ChaCha8Rng,
    cfg: SecurityConfig,
}

impl ProgramGen {
    pub fn new(seed: u64, cfg: &SecurityConfig) -> Self {
        ProgramGen { rng: ChaCha8Rng::seed_from_u64(seed), cfg: cfg.clone() }
    }

    fn bot(&self) -> Policy {
        self.cfg.bottom()
    }

    fn random_policy(&mut self) -> Policy {
        let actors: Vec<_> = self.cfg.actors.iter().cloned().collect();
        let locks: Vec<_> = self.cfg.locks.iter().cloned().collect();
        match self.rng.gen_range(0..4u8) {
            0 => self.bot(),
            1 => Policy::top(),
            _ => {
                let mut clauses = Vec::new();
                for a in &actors {
                    if self.rng.gen_bool(0.7) {
                        let guard: LockSet = locks
                            .iter()
                            .filter(|_| self.rng.gen_bool(0.4))
                            .cloned()
                            .collect();
                        clauses.push(crate::policy::Clause { guard, actor: a.clone() });
                    }
                }
                Policy::new(clauses)
            }
        }
    }

    /// A random type of bounded depth.
    pub fn random_type(&mut self, depth: u32) -> AnnType {
        let label = self.random_policy();
        if depth == 0 {
            return if self.rng.gen_bool(0.5) {
                AnnType::nat(label)
            } else {
                AnnType::unit(label)
            };
        }
        match self.rng.gen_range(0..6u8) {
            0 => AnnType::nat(label),
            1 => AnnType::unit(label),
            2 => {
                let l = self.random_type(depth - 1);
                let r = self.random_type(depth - 1);
                AnnType::prod(l, r, label)
            }
            3 => {
                let l = self.random_type(depth - 1);
                let r = self.random_type(depth - 1);
                AnnType::sum(l, r, label)
            }
            4 => AnnType::reference(self.random_type(depth - 1), label),
            _ => {
                let from = self.random_type(depth - 1);
                let to = self.random_type(depth - 1);
                let locks: LockSet = self
                    .cfg
                    .locks
                    .iter()
                    .filter(|_| self.rng.gen_bool(0.3))
                    .cloned()
                    .collect();
                let pc = self.random_policy();
                AnnType::arrow(locks, pc, from, to, label)
            }
        }
    }

    /// A random closed value of type `t` (no references).
    pub fn random_value(&mut self, t: &AnnType, depth: u32) -> Option<Expr> {
        match &t.base {
            BaseType::Unit => Some(Expr::Unit),
            BaseType::Nat => Some(Expr::Nat(self.rng.gen_range(0..5u64))),
            BaseType::Prod(l, r) => {
                let a = self.random_value(l, depth)?;
                let b = self.random_value(r, depth)?;
                Some(Expr::Pair(Box::new(a), Box::new(b)))
            }
            BaseType::Sum(l, r) => {
                if self.rng.gen_bool(0.5) {
                    Some(Expr::Inl(Box::new(self.random_value(l, depth)?), Some(r.clone())))
                } else {
                    Some(Expr::Inr(Box::new(self.random_value(r, depth)?), Some(l.clone())))
                }
            }
            BaseType::Ref(_) => None,
            BaseType::Arrow { locks, pc, from, to } => {
                if depth == 0 {
                    return None;
                }
                let body = self.random_value(to, depth - 1)?;
                Some(Expr::lam_ann(
                    "_f",
                    LamAnn { locks: locks.clone(), pc: pc.clone(), arg_ty: from.as_ref().clone() },
                    body,
                ))
            }
        }
    }

    /// A random expression, goal-directed enough to be frequently well
    /// typed. `vars` are in-scope variables with their types.
    pub fn random_expr(&mut self, vars: &[(String, AnnType)], depth: u32) -> Expr {
        if depth == 0 {
            return self.leaf(vars);
        }
        let locks: Vec<_> = self.cfg.locks.iter().cloned().collect();
        match self.rng.gen_range(0..12u8) {
            0 => self.leaf(vars),
            1 => {
                // let-binding via applied lambda
                let t = self.random_type(1);
                let name = format!("v{}", self.rng.gen_range(0..100u32));
                let bound = self.random_expr(vars, depth - 1);
                let mut inner = vars.to_vec();
                inner.push((name.clone(), t.clone()));
                let body = self.random_expr(&inner, depth - 1);
                Expr::app(
                    Expr::lam_ann(
                        name,
                        LamAnn { locks: LockSet::new(), pc: self.bot(), arg_ty: t },
                        body,
                    ),
                    bound,
                )
            }
            2 => Expr::Pair(
                Box::new(self.random_expr(vars, depth - 1)),
                Box::new(self.random_expr(vars, depth - 1)),
            ),
            3 => Expr::Fst(Box::new(self.random_expr(vars, depth - 1))),
            4 => Expr::Snd(Box::new(self.random_expr(vars, depth - 1))),
            5 => {
                let other = self.random_type(1);
                if self.rng.gen_bool(0.5) {
                    Expr::Inl(Box::new(self.random_expr(vars, depth - 1)), Some(Box::new(other)))
                } else {
                    Expr::Inr(Box::new(self.random_expr(vars, depth - 1)), Some(Box::new(other)))
                }
            }
            6 => {
                let scrut = self.random_expr(vars, depth - 1);
                Expr::Case {
                    scrut: Box::new(scrut),
                    left_var: "cl".into(),
                    left: Box::new(self.random_expr(vars, depth - 1)),
                    right_var: "cr".into(),
                    right: Box::new(self.random_expr(vars, depth - 1)),
                }
            }
            7 => {
                let t = self.random_type(1);
                Expr::New(Box::new(self.random_expr(vars, depth - 1)), Box::new(t))
            }
            8 => Expr::Deref(Box::new(self.random_expr(vars, depth - 1))),
            9 if !locks.is_empty() => {
                let l = locks[self.rng.gen_range(0..locks.len())].clone();
                let body = self.random_expr(vars, depth - 1);
                if self.rng.gen_bool(0.5) {
                    Expr::Open(l, Box::new(body))
                } else {
                    Expr::Close(l, Box::new(body))
                }
            }
            10 if !locks.is_empty() => {
                let l = locks[self.rng.gen_range(0..locks.len())].clone();
                Expr::When(
                    l,
                    Box::new(self.random_expr(vars, depth - 1)),
                    Box::new(self.random_expr(vars, depth - 1)),
                )
            }
            _ => Expr::seq(
                self.random_expr(vars, depth - 1),
                self.random_expr(vars, depth - 1),
            ),
        }
    }

    fn leaf(&mut self, vars: &[(String, AnnType)]) -> Expr {
        if !vars.is_empty() && self.rng.gen_bool(0.4) {
            let (name, _) = &vars[self.rng.gen_range(0..vars.len())];
            return Expr::var(name.clone());
        }
        match self.rng.gen_range(0..3u8) {
            0 => Expr::Unit,
            _ => Expr::Nat(self.rng.gen_range(0..5u64)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::Attacker;
    use crate::syntax::parser::parse_type;

    fn cfg() -> SecurityConfig {
        SecurityConfig::from_names(&["Alice", "Bob"], &["S"])
    }

    #[test]
    fn domains_have_expected_sizes() {
        let c = cfg();
        let b = GenBudget { nat_domain: vec![0, 1], ..Default::default() };
        let theta = StateEnv::new();
        let nat = parse_type("nat@bot", &c).unwrap();
        assert_eq!(value_domain(&nat, &theta, &b).unwrap().len(), 2);
        let pair = parse_type("(nat@bot * (unit@bot + unit@bot)@bot)@bot", &c).unwrap();
        assert_eq!(value_domain(&pair, &theta, &b).unwrap().len(), 4);
    }

    #[test]
    fn visible_pairs_are_diagonal_invisible_pairs_cross() {
        let c = cfg();
        let b = GenBudget { nat_domain: vec![0, 1], ..Default::default() };
        let beta = Default::default();
        let alice = Attacker { actor: crate::policy::Actor::new("Alice"), capability: LockSet::new() };
        let low = parse_type("nat@bot", &c).unwrap();
        let high = parse_type("nat@{ {S} => Alice }", &c).unwrap();
        let theta = StateEnv::new();
        let lows = related_pairs(&low, &theta, &theta, &beta, &alice, &b).unwrap();
        assert_eq!(lows, vec![(Expr::Nat(0), Expr::Nat(0)), (Expr::Nat(1), Expr::Nat(1))]);
        let highs = related_pairs(&high, &theta, &theta, &beta, &alice, &b).unwrap();
        assert_eq!(highs.len(), 4);
    }

    #[test]
    fn generator_is_deterministic_per_seed() {
        let c = cfg();
        let mk = |seed| {
            let mut g = ProgramGen::new(seed, &c);
            g.random_expr(&[], 4)
        };
        assert_eq!(mk(7), mk(7));
    }
}
