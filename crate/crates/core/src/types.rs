//! Subtyping and the algorithmic type checker.
//!
//! The checker synthesizes a least type for an expression under a context
//! `Γ; Σ; θ ⊢pc e : τ`. Subsumption is applied only where elimination rules
//! demand it: label joins at eliminations, subtype checks at application
//! arguments, reference writes, and allocations.

use thiserror::Error;

use crate::policy::{Lock, LockSet, Policy, SecurityConfig};
use crate::syntax::ast::{AnnType, BaseType, Expr, LocId, StateEnv, TypeEnv};
use crate::syntax::pretty::{pretty_policy, pretty_type};

/// The context of the typing judgment: variable types, open locks,
/// location types, and the program-counter policy.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TypingContext {
    pub gamma: TypeEnv,
    pub locks: LockSet,
    pub theta: StateEnv,
    pub pc: Policy,
}

impl TypingContext {
    pub fn new(cfg: &SecurityConfig) -> Self {
        TypingContext {
            gamma: TypeEnv::new(),
            locks: LockSet::new(),
            theta: StateEnv::new(),
            pc: cfg.bottom(),
        }
    }

    pub fn with_pc(mut self, pc: Policy) -> Self {
        self.pc = pc;
        self
    }

    pub fn with_locks(mut self, locks: LockSet) -> Self {
        self.locks = locks;
        self
    }

    pub fn with_var(mut self, name: impl Into<String>, t: AnnType) -> Self {
        self.gamma.insert(name.into(), t);
        self
    }

    pub fn with_theta(mut self, theta: StateEnv) -> Self {
        self.theta = theta;
        self
    }
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum TypeError {
    #[error("unbound variable '{0}'")]
    UnboundVariable(String),
    #[error("unbound location '{0}'")]
    UnboundLocation(LocId),
    #[error("lambda parameter '{0}' needs a type annotation")]
    MissingAnnotation(String),
    #[error("expected a function, found value of type {0}")]
    NotAFunction(String),
    #[error("expected a pair, found value of type {0}")]
    NotAPair(String),
    #[error("expected a sum, found value of type {0}")]
    NotASum(String),
    #[error("expected a reference, found value of type {0}")]
    NotARef(String),
    #[error("application argument of type {found} is not a subtype of the parameter type {expected}")]
    AppArgMismatch { found: String, expected: String },
    #[error("application requires locks {required} open but only {open} are open")]
    AppLockSetMismatch { required: String, open: String },
    #[error("application context policy {found} does not flow to the function's latent policy {bound}")]
    AppPcViolation { found: String, bound: String },
    #[error("{construct} of lock '{lock}': context policy {pc} does not flow to the lock's policy {lock_policy}")]
    PcFlowViolation {
        construct: &'static str,
        lock: Lock,
        pc: String,
        lock_policy: String,
    },
    #[error("allocation: context policy {pc} does not flow to the stored type {ty}")]
    NewPcViolation { pc: String, ty: String },
    #[error("allocation: value type {found} (specialized to the open locks) is not a subtype of the declared type {expected}")]
    NewValueMismatch { found: String, expected: String },
    #[error("assignment: value type {found} (specialized to the open locks) is not a subtype of the reference's content type {expected}")]
    AssignValueMismatch { found: String, expected: String },
    #[error("assignment: context policy {found} does not flow to the reference's content policy {bound}")]
    AssignPcViolation { found: String, bound: String },
    #[error("branches have incompatible types {0} and {1}")]
    IncompatibleBranchTypes(String, String),
    #[error("checked type mismatch: synthesized {found}, which is not a subtype of {expected}")]
    CheckMismatch { found: String, expected: String },
}

/// `p ⊑ q` lifted to annotated types: compares outer labels only.
pub trait Labeled {
    fn label(&self) -> &Policy;
}

impl Labeled for Policy {
    fn label(&self) -> &Policy {
        self
    }
}

impl Labeled for AnnType {
    fn label(&self) -> &Policy {
        &self.label
    }
}

pub fn flows(lhs: &impl Labeled, rhs: &impl Labeled) -> bool {
    lhs.label().leq(rhs.label())
}

/// `t1 <: t2`.
pub fn subtype(t1: &AnnType, t2: &AnnType) -> bool {
    if !t1.label.leq(&t2.label) {
        return false;
    }
    match (&t1.base, &t2.base) {
        (BaseType::Unit, BaseType::Unit) | (BaseType::Nat, BaseType::Nat) => true,
        // References admit no non-trivial subtyping: read and write would
        // need opposite variances.
        (BaseType::Ref(a), BaseType::Ref(b)) => a == b,
        (BaseType::Prod(a1, a2), BaseType::Prod(b1, b2))
        | (BaseType::Sum(a1, a2), BaseType::Sum(b1, b2)) => subtype(a1, b1) && subtype(a2, b2),
        (
            BaseType::Arrow { locks: s1, pc: pc1, from: f1, to: t1 },
            BaseType::Arrow { locks: s2, pc: pc2, from: f2, to: t2 },
        ) => {
            // Contravariant in the domain and latent pc; a function may
            // require fewer locks than its supertype.
            subtype(f2, f1) && subtype(t1, t2) && pc2.leq(pc1) && s1.is_subset(s2)
        }
        _ => false,
    }
}

/// Least common supertype used for joining branch types. Labels are joined
/// pointwise on products and sums; references and arrows must agree on
/// everything but the outer label.
fn join_types(a: &AnnType, b: &AnnType) -> Result<AnnType, TypeError> {
    let label = a.label.join(&b.label);
    let base = match (&a.base, &b.base) {
        (BaseType::Unit, BaseType::Unit) => BaseType::Unit,
        (BaseType::Nat, BaseType::Nat) => BaseType::Nat,
        (BaseType::Ref(x), BaseType::Ref(y)) if x == y => BaseType::Ref(x.clone()),
        (BaseType::Prod(a1, a2), BaseType::Prod(b1, b2)) => BaseType::Prod(
            Box::new(join_types(a1, b1)?),
            Box::new(join_types(a2, b2)?),
        ),
        (BaseType::Sum(a1, a2), BaseType::Sum(b1, b2)) => BaseType::Sum(
            Box::new(join_types(a1, b1)?),
            Box::new(join_types(a2, b2)?),
        ),
        (x @ BaseType::Arrow { .. }, y @ BaseType::Arrow { .. }) if x == y => x.clone(),
        _ => {
            return Err(TypeError::IncompatibleBranchTypes(
                pretty_type(a),
                pretty_type(b),
            ))
        }
    };
    Ok(AnnType::new(base, label))
}

fn lock_pc_premise(
    cfg: &SecurityConfig,
    construct: &'static str,
    lock: &Lock,
    pc: &Policy,
) -> Result<Policy, TypeError> {
    let delta = cfg
        .lock_policy(lock)
        .unwrap_or_else(|_| cfg.bottom());
    if !pc.leq(&delta) {
        return Err(TypeError::PcFlowViolation {
            construct,
            lock: lock.clone(),
            pc: pretty_policy(pc),
            lock_policy: pretty_policy(&delta),
        });
    }
    Ok(delta)
}

/// Synthesizes the least type derivable for `e` under `ctx`.
pub fn typecheck_synth(
    cfg: &SecurityConfig,
    ctx: &TypingContext,
    e: &Expr,
) -> Result<AnnType, TypeError> {
    let bot = cfg.bottom();
    match e {
        Expr::Var(x) => ctx
            .gamma
            .get(x)
            .cloned()
            .ok_or_else(|| TypeError::UnboundVariable(x.clone())),
        Expr::Unit => Ok(AnnType::unit(bot)),
        Expr::Nat(_) => Ok(AnnType::nat(bot)),
        Expr::Loc(l) => {
            let content = ctx
                .theta
                .get(l)
                .cloned()
                .ok_or(TypeError::UnboundLocation(*l))?;
            Ok(AnnType::reference(content, bot))
        }
        // A let-redex: an unannotated lambda applied directly. The argument
        // type is synthesized, and the body is checked under the current
        // lock set and pc, giving `let` and `;` their derived rule.
        Expr::App(f, arg)
            if matches!(f.as_ref(), Expr::Lam { ann: None, .. }) =>
        {
            let (param, body) = match f.as_ref() {
                Expr::Lam { param, body, .. } => (param, body),
                _ => unreachable!(),
            };
            let targ = typecheck_synth(cfg, ctx, arg)?;
            let inner = ctx.clone().with_var(param.clone(), targ);
            typecheck_synth(cfg, &inner, body)
        }
        Expr::Lam { param, ann, body } => {
            let ann = ann
                .as_deref()
                .ok_or_else(|| TypeError::MissingAnnotation(param.clone()))?;
            let inner = TypingContext {
                gamma: {
                    let mut g = ctx.gamma.clone();
                    g.insert(param.clone(), ann.arg_ty.clone());
                    g
                },
                locks: ann.locks.clone(),
                theta: ctx.theta.clone(),
                pc: ann.pc.clone(),
            };
            let to = typecheck_synth(cfg, &inner, body)?;
            Ok(AnnType::arrow(
                ann.locks.clone(),
                ann.pc.clone(),
                ann.arg_ty.clone(),
                to,
                bot,
            ))
        }
        Expr::Pair(a, b) => {
            let ta = typecheck_synth(cfg, ctx, a)?;
            let tb = typecheck_synth(cfg, ctx, b)?;
            Ok(AnnType::prod(ta, tb, bot))
        }
        Expr::Fst(e) => {
            let t = typecheck_synth(cfg, ctx, e)?;
            match &t.base {
                BaseType::Prod(a, _) => Ok(a.join_label(&t.label)),
                _ => Err(TypeError::NotAPair(pretty_type(&t))),
            }
        }
        Expr::Snd(e) => {
            let t = typecheck_synth(cfg, ctx, e)?;
            match &t.base {
                BaseType::Prod(_, b) => Ok(b.join_label(&t.label)),
                _ => Err(TypeError::NotAPair(pretty_type(&t))),
            }
        }
        Expr::Inl(e, other) => {
            let t = typecheck_synth(cfg, ctx, e)?;
            let right = other
                .as_deref()
                .cloned()
                .unwrap_or_else(|| AnnType::unit(bot.clone()));
            Ok(AnnType::sum(t, right, bot))
        }
        Expr::Inr(e, other) => {
            let t = typecheck_synth(cfg, ctx, e)?;
            let left = other
                .as_deref()
                .cloned()
                .unwrap_or_else(|| AnnType::unit(bot.clone()));
            Ok(AnnType::sum(left, t, bot))
        }
        Expr::Case { scrut, left_var, left, right_var, right } => {
            let ts = typecheck_synth(cfg, ctx, scrut)?;
            let (tl, tr) = match &ts.base {
                BaseType::Sum(a, b) => (a.as_ref().clone(), b.as_ref().clone()),
                _ => return Err(TypeError::NotASum(pretty_type(&ts))),
            };
            let branch_pc = ctx.pc.join(&ts.label);
            let lctx = ctx
                .clone()
                .with_var(left_var.clone(), tl)
                .with_pc(branch_pc.clone());
            let t1 = typecheck_synth(cfg, &lctx, left)?;
            let rctx = ctx
                .clone()
                .with_var(right_var.clone(), tr)
                .with_pc(branch_pc);
            let t2 = typecheck_synth(cfg, &rctx, right)?;
            // The scrutinee's label must flow to the result type.
            Ok(join_types(&t1, &t2)?.join_label(&ts.label))
        }
        Expr::App(f, a) => {
            let tf = typecheck_synth(cfg, ctx, f)?;
            let (locks, latent_pc, from, to) = match &tf.base {
                BaseType::Arrow { locks, pc, from, to } => (locks, pc, from, to),
                _ => return Err(TypeError::NotAFunction(pretty_type(&tf))),
            };
            let ta = typecheck_synth(cfg, ctx, a)?;
            if !subtype(&ta, from) {
                return Err(TypeError::AppArgMismatch {
                    found: pretty_type(&ta),
                    expected: pretty_type(from),
                });
            }
            if !locks.is_subset(&ctx.locks) {
                return Err(TypeError::AppLockSetMismatch {
                    required: crate::syntax::pretty::pretty_lockset(locks),
                    open: crate::syntax::pretty::pretty_lockset(&ctx.locks),
                });
            }
            let eff = ctx.pc.join(&tf.label);
            if !eff.leq(latent_pc) {
                return Err(TypeError::AppPcViolation {
                    found: pretty_policy(&eff),
                    bound: pretty_policy(latent_pc),
                });
            }
            // The function value's own label must flow to the result.
            Ok(to.join_label(&tf.label))
        }
        Expr::New(e, declared) => {
            let tv = typecheck_synth(cfg, ctx, e)?;
            if !ctx.pc.leq(&declared.label) {
                return Err(TypeError::NewPcViolation {
                    pc: pretty_policy(&ctx.pc),
                    ty: pretty_type(declared),
                });
            }
            let specialized = tv.specialize(&ctx.locks);
            if !subtype(&specialized, declared) {
                return Err(TypeError::NewValueMismatch {
                    found: pretty_type(&specialized),
                    expected: pretty_type(declared),
                });
            }
            Ok(AnnType::reference(declared.as_ref().clone(), bot))
        }
        Expr::Deref(e) => {
            let t = typecheck_synth(cfg, ctx, e)?;
            match &t.base {
                BaseType::Ref(content) => Ok(content.join_label(&t.label)),
                _ => Err(TypeError::NotARef(pretty_type(&t))),
            }
        }
        Expr::Assign(lhs, rhs) => {
            let tr = typecheck_synth(cfg, ctx, lhs)?;
            let content = match &tr.base {
                BaseType::Ref(content) => content.as_ref().clone(),
                _ => return Err(TypeError::NotARef(pretty_type(&tr))),
            };
            let tv = typecheck_synth(cfg, ctx, rhs)?;
            let specialized = tv.specialize(&ctx.locks);
            if !subtype(&specialized, &content) {
                return Err(TypeError::AssignValueMismatch {
                    found: pretty_type(&specialized),
                    expected: pretty_type(&content),
                });
            }
            let eff = ctx.pc.join(&tr.label);
            if !flows(&eff, &content) {
                return Err(TypeError::AssignPcViolation {
                    found: pretty_policy(&eff),
                    bound: pretty_policy(&content.label),
                });
            }
            Ok(AnnType::unit(bot))
        }
        Expr::Open(l, e) | Expr::Opened(l, e) => {
            lock_pc_premise(cfg, "open", l, &ctx.pc)?;
            let mut locks = ctx.locks.clone();
            locks.insert(l.clone());
            typecheck_synth(cfg, &ctx.clone().with_locks(locks), e)
        }
        Expr::Close(l, e) | Expr::Closed(l, e) => {
            lock_pc_premise(cfg, "close", l, &ctx.pc)?;
            let mut locks = ctx.locks.clone();
            locks.remove(l);
            typecheck_synth(cfg, &ctx.clone().with_locks(locks), e)
        }
        Expr::When(l, open_branch, closed_branch) => {
            let delta = cfg.lock_policy(l).unwrap_or_else(|_| cfg.bottom());
            let branch_pc = ctx.pc.join(&delta);
            let mut with_lock = ctx.locks.clone();
            with_lock.insert(l.clone());
            let t1 = typecheck_synth(
                cfg,
                &ctx.clone().with_locks(with_lock).with_pc(branch_pc.clone()),
                open_branch,
            )?;
            let t2 = typecheck_synth(cfg, &ctx.clone().with_pc(branch_pc), closed_branch)?;
            // The lock's policy must flow to the result type.
            Ok(join_types(&t1, &t2)?.join_label(&delta))
        }
    }
}

/// True iff `e` checks against `t`: synthesis followed by one subsumption.
pub fn typecheck_check(
    cfg: &SecurityConfig,
    ctx: &TypingContext,
    e: &Expr,
    t: &AnnType,
) -> bool {
    matches!(typecheck_synth(cfg, ctx, e), Ok(s) if subtype(&s, t))
}

/// Like [`typecheck_check`] but reports why checking failed.
pub fn typecheck_against(
    cfg: &SecurityConfig,
    ctx: &TypingContext,
    e: &Expr,
    t: &AnnType,
) -> Result<(), TypeError> {
    let s = typecheck_synth(cfg, ctx, e)?;
    if subtype(&s, t) {
        Ok(())
    } else {
        Err(TypeError::CheckMismatch {
            found: pretty_type(&s),
            expected: pretty_type(t),
        })
    }
}
