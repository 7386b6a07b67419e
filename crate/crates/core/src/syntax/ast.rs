//! Abstract syntax for expressions and annotated types, plus substitution.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::policy::{Lock, LockSet, Policy};

/// A heap location. Runtime-only; rendered as `#n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LocId(pub u64);

impl fmt::Display for LocId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// Unannotated type constructors.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BaseType {
    Unit,
    Nat,
    Sum(Box<AnnType>, Box<AnnType>),
    Prod(Box<AnnType>, Box<AnnType>),
    Ref(Box<AnnType>),
    Arrow {
        locks: LockSet,
        pc: Policy,
        from: Box<AnnType>,
        to: Box<AnnType>,
    },
}

/// A base type labeled with a policy.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AnnType {
    pub base: BaseType,
    pub label: Policy,
}

impl AnnType {
    pub fn new(base: BaseType, label: Policy) -> Self {
        AnnType { base, label }
    }

    pub fn unit(label: Policy) -> Self {
        AnnType::new(BaseType::Unit, label)
    }

    pub fn nat(label: Policy) -> Self {
        AnnType::new(BaseType::Nat, label)
    }

    pub fn reference(inner: AnnType, label: Policy) -> Self {
        AnnType::new(BaseType::Ref(Box::new(inner)), label)
    }

    pub fn prod(l: AnnType, r: AnnType, label: Policy) -> Self {
        AnnType::new(BaseType::Prod(Box::new(l), Box::new(r)), label)
    }

    pub fn sum(l: AnnType, r: AnnType, label: Policy) -> Self {
        AnnType::new(BaseType::Sum(Box::new(l), Box::new(r)), label)
    }

    pub fn arrow(locks: LockSet, pc: Policy, from: AnnType, to: AnnType, label: Policy) -> Self {
        AnnType::new(
            BaseType::Arrow {
                locks,
                pc,
                from: Box::new(from),
                to: Box::new(to),
            },
            label,
        )
    }

    /// Same base with the label joined with `p`.
    pub fn join_label(&self, p: &Policy) -> AnnType {
        AnnType::new(self.base.clone(), self.label.join(p))
    }

    /// `P(Σ)` lifted to types: specializes the outer label only.
    pub fn specialize(&self, sigma: &LockSet) -> AnnType {
        AnnType::new(self.base.clone(), self.label.specialize(sigma))
    }

    /// True when no arrow type occurs anywhere inside.
    pub fn is_first_order(&self) -> bool {
        match &self.base {
            BaseType::Unit | BaseType::Nat => true,
            BaseType::Sum(l, r) | BaseType::Prod(l, r) => {
                l.is_first_order() && r.is_first_order()
            }
            BaseType::Ref(t) => t.is_first_order(),
            BaseType::Arrow { .. } => false,
        }
    }
}

/// Optional annotation on a lambda binder, fixing the pieces of its arrow
/// type that synthesis cannot guess.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LamAnn {
    pub locks: LockSet,
    pub pc: Policy,
    pub arg_ty: AnnType,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Expr {
    Var(String),
    Unit,
    Nat(u64),
    Lam {
        param: String,
        ann: Option<Box<LamAnn>>,
        body: Box<Expr>,
    },
    Pair(Box<Expr>, Box<Expr>),
    Fst(Box<Expr>),
    Snd(Box<Expr>),
    /// Left injection; the annotation is the type of the absent right side.
    Inl(Box<Expr>, Option<Box<AnnType>>),
    /// Right injection; the annotation is the type of the absent left side.
    Inr(Box<Expr>, Option<Box<AnnType>>),
    Case {
        scrut: Box<Expr>,
        left_var: String,
        left: Box<Expr>,
        right_var: String,
        right: Box<Expr>,
    },
    App(Box<Expr>, Box<Expr>),
    New(Box<Expr>, Box<AnnType>),
    Deref(Box<Expr>),
    Assign(Box<Expr>, Box<Expr>),
    Open(Lock, Box<Expr>),
    /// Runtime form: an `open` whose observation has already been emitted.
    Opened(Lock, Box<Expr>),
    Close(Lock, Box<Expr>),
    /// Runtime form: a `close` whose observation has already been emitted.
    Closed(Lock, Box<Expr>),
    When(Lock, Box<Expr>, Box<Expr>),
    Loc(LocId),
}

impl Expr {
    pub fn lam(param: impl Into<String>, body: Expr) -> Expr {
        Expr::Lam {
            param: param.into(),
            ann: None,
            body: Box::new(body),
        }
    }

    pub fn lam_ann(param: impl Into<String>, ann: LamAnn, body: Expr) -> Expr {
        Expr::Lam {
            param: param.into(),
            ann: Some(Box::new(ann)),
            body: Box::new(body),
        }
    }

    pub fn var(name: impl Into<String>) -> Expr {
        Expr::Var(name.into())
    }

    pub fn app(f: Expr, arg: Expr) -> Expr {
        Expr::App(Box::new(f), Box::new(arg))
    }

    pub fn assign(lhs: Expr, rhs: Expr) -> Expr {
        Expr::Assign(Box::new(lhs), Box::new(rhs))
    }

    pub fn deref(e: Expr) -> Expr {
        Expr::Deref(Box::new(e))
    }

    pub fn open(lock: impl Into<String>, e: Expr) -> Expr {
        Expr::Open(Lock::new(lock), Box::new(e))
    }

    pub fn close(lock: impl Into<String>, e: Expr) -> Expr {
        Expr::Close(Lock::new(lock), Box::new(e))
    }

    pub fn when(lock: impl Into<String>, open: Expr, closed: Expr) -> Expr {
        Expr::When(Lock::new(lock), Box::new(open), Box::new(closed))
    }

    /// `e1; e2` as `(λ_. e2) e1`.
    pub fn seq(e1: Expr, e2: Expr) -> Expr {
        Expr::app(Expr::lam("_seq", e2), e1)
    }

    /// `let x = e1 in e2` as `(λx. e2) e1`.
    pub fn let_in(x: impl Into<String>, e1: Expr, e2: Expr) -> Expr {
        Expr::app(Expr::lam(x, e2), e1)
    }

    /// Matches the value grammar: lambdas, pairs of values, injections of
    /// values, unit, locations, numerals.
    pub fn is_value(&self) -> bool {
        match self {
            Expr::Lam { .. } | Expr::Unit | Expr::Nat(_) | Expr::Loc(_) => true,
            Expr::Pair(a, b) => a.is_value() && b.is_value(),
            Expr::Inl(e, _) | Expr::Inr(e, _) => e.is_value(),
            _ => false,
        }
    }

    /// True for the runtime-only forms the parser rejects.
    pub fn contains_runtime_forms(&self) -> bool {
        let mut found = false;
        self.visit(&mut |e| {
            if matches!(e, Expr::Opened(..) | Expr::Closed(..) | Expr::Loc(_)) {
                found = true;
            }
        });
        found
    }

    fn visit(&self, f: &mut impl FnMut(&Expr)) {
        f(self);
        match self {
            Expr::Var(_) | Expr::Unit | Expr::Nat(_) | Expr::Loc(_) => {}
            Expr::Lam { body, .. } => body.visit(f),
            Expr::Pair(a, b) | Expr::App(a, b) | Expr::Assign(a, b) => {
                a.visit(f);
                b.visit(f);
            }
            Expr::Fst(e) | Expr::Snd(e) | Expr::Inl(e, _) | Expr::Inr(e, _) | Expr::Deref(e) => {
                e.visit(f)
            }
            Expr::New(e, _) => e.visit(f),
            Expr::Case {
                scrut, left, right, ..
            } => {
                scrut.visit(f);
                left.visit(f);
                right.visit(f);
            }
            Expr::Open(_, e) | Expr::Opened(_, e) | Expr::Close(_, e) | Expr::Closed(_, e) => {
                e.visit(f)
            }
            Expr::When(_, a, b) => {
                a.visit(f);
                b.visit(f);
            }
        }
    }

    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.free_vars_into(&mut BTreeSet::new(), &mut out);
        out
    }

    fn free_vars_into(&self, bound: &mut BTreeSet<String>, out: &mut BTreeSet<String>) {
        match self {
            Expr::Var(x) => {
                if !bound.contains(x) {
                    out.insert(x.clone());
                }
            }
            Expr::Unit | Expr::Nat(_) | Expr::Loc(_) => {}
            Expr::Lam { param, body, .. } => {
                let fresh = bound.insert(param.clone());
                body.free_vars_into(bound, out);
                if fresh {
                    bound.remove(param);
                }
            }
            Expr::Pair(a, b) | Expr::App(a, b) | Expr::Assign(a, b) => {
                a.free_vars_into(bound, out);
                b.free_vars_into(bound, out);
            }
            Expr::Fst(e) | Expr::Snd(e) | Expr::Inl(e, _) | Expr::Inr(e, _) | Expr::Deref(e) => {
                e.free_vars_into(bound, out)
            }
            Expr::New(e, _) => e.free_vars_into(bound, out),
            Expr::Case {
                scrut,
                left_var,
                left,
                right_var,
                right,
            } => {
                scrut.free_vars_into(bound, out);
                let fl = bound.insert(left_var.clone());
                left.free_vars_into(bound, out);
                if fl {
                    bound.remove(left_var);
                }
                let fr = bound.insert(right_var.clone());
                right.free_vars_into(bound, out);
                if fr {
                    bound.remove(right_var);
                }
            }
            Expr::Open(_, e) | Expr::Opened(_, e) | Expr::Close(_, e) | Expr::Closed(_, e) => {
                e.free_vars_into(bound, out)
            }
            Expr::When(_, a, b) => {
                a.free_vars_into(bound, out);
                b.free_vars_into(bound, out);
            }
        }
    }

    /// Capture-avoiding substitution `[v/x]self`. `v` must be closed under
    /// the binders it is moved under, which we guarantee by renaming any
    /// binder that collides with a free variable of `v`.
    pub fn substitute(&self, x: &str, v: &Expr) -> Expr {
        let mut counter = 0u64;
        self.subst_inner(x, v, &v.free_vars(), &mut counter)
    }

    fn subst_inner(
        &self,
        x: &str,
        v: &Expr,
        avoid: &BTreeSet<String>,
        counter: &mut u64,
    ) -> Expr {
        match self {
            Expr::Var(y) => {
                if y == x {
                    v.clone()
                } else {
                    self.clone()
                }
            }
            Expr::Unit | Expr::Nat(_) | Expr::Loc(_) => self.clone(),
            Expr::Lam { param, ann, body } => {
                if param == x {
                    self.clone()
                } else if avoid.contains(param) {
                    let fresh = fresh_name(param, avoid, body, counter);
                    let renamed = body.rename(param, &fresh);
                    Expr::Lam {
                        param: fresh,
                        ann: ann.clone(),
                        body: Box::new(renamed.subst_inner(x, v, avoid, counter)),
                    }
                } else {
                    Expr::Lam {
                        param: param.clone(),
                        ann: ann.clone(),
                        body: Box::new(body.subst_inner(x, v, avoid, counter)),
                    }
                }
            }
            Expr::Pair(a, b) => Expr::Pair(
                Box::new(a.subst_inner(x, v, avoid, counter)),
                Box::new(b.subst_inner(x, v, avoid, counter)),
            ),
            Expr::App(a, b) => Expr::App(
                Box::new(a.subst_inner(x, v, avoid, counter)),
                Box::new(b.subst_inner(x, v, avoid, counter)),
            ),
            Expr::Assign(a, b) => Expr::Assign(
                Box::new(a.subst_inner(x, v, avoid, counter)),
                Box::new(b.subst_inner(x, v, avoid, counter)),
            ),
            Expr::Fst(e) => Expr::Fst(Box::new(e.subst_inner(x, v, avoid, counter))),
            Expr::Snd(e) => Expr::Snd(Box::new(e.subst_inner(x, v, avoid, counter))),
            Expr::Inl(e, t) => {
                Expr::Inl(Box::new(e.subst_inner(x, v, avoid, counter)), t.clone())
            }
            Expr::Inr(e, t) => {
                Expr::Inr(Box::new(e.subst_inner(x, v, avoid, counter)), t.clone())
            }
            Expr::Deref(e) => Expr::Deref(Box::new(e.subst_inner(x, v, avoid, counter))),
            Expr::New(e, t) => Expr::New(Box::new(e.subst_inner(x, v, avoid, counter)), t.clone()),
            Expr::Case {
                scrut,
                left_var,
                left,
                right_var,
                right,
            } => {
                let scrut = Box::new(scrut.subst_inner(x, v, avoid, counter));
                let (left_var, left) =
                    subst_branch(left_var, left, x, v, avoid, counter);
                let (right_var, right) =
                    subst_branch(right_var, right, x, v, avoid, counter);
                Expr::Case {
                    scrut,
                    left_var,
                    left: Box::new(left),
                    right_var,
                    right: Box::new(right),
                }
            }
            Expr::Open(l, e) => {
                Expr::Open(l.clone(), Box::new(e.subst_inner(x, v, avoid, counter)))
            }
            Expr::Opened(l, e) => {
                Expr::Opened(l.clone(), Box::new(e.subst_inner(x, v, avoid, counter)))
            }
            Expr::Close(l, e) => {
                Expr::Close(l.clone(), Box::new(e.subst_inner(x, v, avoid, counter)))
            }
            Expr::Closed(l, e) => {
                Expr::Closed(l.clone(), Box::new(e.subst_inner(x, v, avoid, counter)))
            }
            Expr::When(l, a, b) => Expr::When(
                l.clone(),
                Box::new(a.subst_inner(x, v, avoid, counter)),
                Box::new(b.subst_inner(x, v, avoid, counter)),
            ),
        }
    }

    /// Renames free occurrences of `from` to `to`.
    fn rename(&self, from: &str, to: &str) -> Expr {
        self.substitute(from, &Expr::var(to))
    }

    /// Alpha-equivalence; annotations must agree.
    pub fn alpha_eq(&self, other: &Expr) -> bool {
        fn go(a: &Expr, b: &Expr, env: &mut Vec<(String, String)>) -> bool {
            match (a, b) {
                (Expr::Var(x), Expr::Var(y)) => {
                    for (ax, ay) in env.iter().rev() {
                        if ax == x || ay == y {
                            return ax == x && ay == y;
                        }
                    }
                    x == y
                }
                (Expr::Unit, Expr::Unit) => true,
                (Expr::Nat(m), Expr::Nat(n)) => m == n,
                (Expr::Loc(l), Expr::Loc(r)) => l == r,
                (
                    Expr::Lam {
                        param: px,
                        ann: ax,
                        body: bx,
                    },
                    Expr::Lam {
                        param: py,
                        ann: ay,
                        body: by,
                    },
                ) => {
                    if ax != ay {
                        return false;
                    }
                    env.push((px.clone(), py.clone()));
                    let r = go(bx, by, env);
                    env.pop();
                    r
                }
                (Expr::Pair(a1, a2), Expr::Pair(b1, b2))
                | (Expr::App(a1, a2), Expr::App(b1, b2))
                | (Expr::Assign(a1, a2), Expr::Assign(b1, b2)) => {
                    go(a1, b1, env) && go(a2, b2, env)
                }
                (Expr::Fst(x), Expr::Fst(y)) | (Expr::Snd(x), Expr::Snd(y)) => go(x, y, env),
                (Expr::Inl(x, tx), Expr::Inl(y, ty)) | (Expr::Inr(x, tx), Expr::Inr(y, ty)) => {
                    tx == ty && go(x, y, env)
                }
                (Expr::Deref(x), Expr::Deref(y)) => go(x, y, env),
                (Expr::New(x, tx), Expr::New(y, ty)) => tx == ty && go(x, y, env),
                (
                    Expr::Case {
                        scrut: sx,
                        left_var: lx,
                        left: ex1,
                        right_var: rx,
                        right: ex2,
                    },
                    Expr::Case {
                        scrut: sy,
                        left_var: ly,
                        left: ey1,
                        right_var: ry,
                        right: ey2,
                    },
                ) => {
                    if !go(sx, sy, env) {
                        return false;
                    }
                    env.push((lx.clone(), ly.clone()));
                    let r1 = go(ex1, ey1, env);
                    env.pop();
                    env.push((rx.clone(), ry.clone()));
                    let r2 = go(ex2, ey2, env);
                    env.pop();
                    r1 && r2
                }
                (Expr::Open(lx, x), Expr::Open(ly, y))
                | (Expr::Opened(lx, x), Expr::Opened(ly, y))
                | (Expr::Close(lx, x), Expr::Close(ly, y))
                | (Expr::Closed(lx, x), Expr::Closed(ly, y)) => lx == ly && go(x, y, env),
                (Expr::When(lx, x1, x2), Expr::When(ly, y1, y2)) => {
                    lx == ly && go(x1, y1, env) && go(x2, y2, env)
                }
                _ => false,
            }
        }
        go(self, other, &mut Vec::new())
    }
}

fn subst_branch(
    var: &str,
    body: &Expr,
    x: &str,
    v: &Expr,
    avoid: &BTreeSet<String>,
    counter: &mut u64,
) -> (String, Expr) {
    if var == x {
        (var.to_string(), body.clone())
    } else if avoid.contains(var) {
        let fresh = fresh_name(var, avoid, body, counter);
        let renamed = body.rename(var, &fresh);
        (fresh.clone(), renamed.subst_inner(x, v, avoid, counter))
    } else {
        (var.to_string(), body.subst_inner(x, v, avoid, counter))
    }
}

fn fresh_name(
    base: &str,
    avoid: &BTreeSet<String>,
    body: &Expr,
    counter: &mut u64,
) -> String {
    let body_fv = body.free_vars();
    loop {
        let cand = format!("{}_{}", base, counter);
        *counter += 1;
        if !avoid.contains(&cand) && !body_fv.contains(&cand) {
            return cand;
        }
    }
}

/// `Γ`: maps variables to annotated types.
pub type TypeEnv = BTreeMap<String, AnnType>;

/// `θ`: maps locations to annotated types.
pub type StateEnv = BTreeMap<LocId, AnnType>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn values() {
        assert!(Expr::lam("x", Expr::var("x")).is_value());
        assert!(!Expr::app(Expr::lam("x", Expr::var("x")), Expr::Nat(5)).is_value());
        assert!(Expr::Pair(
            Box::new(Expr::Nat(3)),
            Box::new(Expr::Inl(Box::new(Expr::Unit), None))
        )
        .is_value());
    }

    #[test]
    fn substitution_basics() {
        let e = Expr::assign(Expr::Loc(LocId(0)), Expr::var("x"));
        assert_eq!(
            e.substitute("x", &Expr::Nat(5)),
            Expr::assign(Expr::Loc(LocId(0)), Expr::Nat(5))
        );
        // shadowing
        let id = Expr::lam("x", Expr::var("x"));
        assert_eq!(id.substitute("x", &Expr::Nat(5)), id);
        // under a different binder
        let e = Expr::lam("y", Expr::var("x"));
        assert_eq!(e.substitute("x", &Expr::Nat(5)), Expr::lam("y", Expr::Nat(5)));
    }

    #[test]
    fn substitution_avoids_capture() {
        // [y/x] (λy. x) must not capture y
        let e = Expr::lam("y", Expr::var("x"));
        let r = e.substitute("x", &Expr::var("y"));
        if let Expr::Lam { param, body, .. } = &r {
            assert_ne!(param, "y");
            assert_eq!(**body, Expr::var("y"));
        } else {
            panic!("expected lambda");
        }
    }

    #[test]
    fn alpha_equivalence() {
        let a = Expr::lam("x", Expr::var("x"));
        let b = Expr::lam("y", Expr::var("y"));
        assert!(a.alpha_eq(&b));
        let c = Expr::lam("y", Expr::var("z"));
        assert!(!a.alpha_eq(&c));
    }
}
