//! Pretty-printing back to the concrete syntax accepted by the parser.
//! `parse(pretty(e)) == e` for every expression, including runtime forms
//! when the parser is run with runtime forms enabled (except `opened`/
//! `closed`, which have no concrete syntax and are printed as their source
//! counterparts for display only).

use std::fmt::Write;

use crate::policy::{LockSet, Policy};
use crate::syntax::ast::{AnnType, BaseType, Expr};

pub fn pretty_policy(p: &Policy) -> String {
    if p.is_top() {
        return "top".to_string();
    }
    let mut out = String::from("{");
    for (i, c) in p.clauses().enumerate() {
        if i > 0 {
            out.push_str("; ");
        }
        let _ = write!(out, "{} => {}", pretty_lockset(&c.guard), c.actor);
    }
    out.push('}');
    out
}

pub fn pretty_lockset(s: &LockSet) -> String {
    let mut out = String::from("{");
    for (i, l) in s.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        let _ = write!(out, "{l}");
    }
    out.push('}');
    out
}

pub fn pretty_type(t: &AnnType) -> String {
    format!("{}@{}", pretty_base(&t.base), pretty_policy(&t.label))
}

fn pretty_base(b: &BaseType) -> String {
    match b {
        BaseType::Unit => "unit".to_string(),
        BaseType::Nat => "nat".to_string(),
        BaseType::Ref(t) => format!("ref({})", pretty_type(t)),
        BaseType::Sum(l, r) => format!("({} + {})", pretty_type(l), pretty_type(r)),
        BaseType::Prod(l, r) => format!("({} * {})", pretty_type(l), pretty_type(r)),
        BaseType::Arrow { locks, pc, from, to } => format!(
            "([{}; {}] {} -> {})",
            pretty_lockset(locks),
            pretty_policy(pc),
            pretty_type(from),
            pretty_type(to)
        ),
    }
}

pub fn pretty_expr(e: &Expr) -> String {
    let mut out = String::new();
    write_expr(&mut out, e);
    out
}

// Precedence levels: 0 = seq position, 1 = assign, 2 = application,
// 3 = prefix argument, 4 = atom.
fn write_expr(out: &mut String, e: &Expr) {
    write_prec(out, e, 0)
}

fn write_prec(out: &mut String, e: &Expr, prec: u8) {
    match e {
        Expr::Var(x) => out.push_str(x),
        Expr::Unit => out.push_str("()"),
        Expr::Nat(n) => {
            let _ = write!(out, "{n}");
        }
        Expr::Loc(l) => {
            let _ = write!(out, "{l}");
        }
        Expr::Lam { param, ann, body } => {
            paren_if(out, prec > 0, |out| {
                out.push_str("fun ");
                if let Some(a) = ann {
                    let _ = write!(
                        out,
                        "[{}; {}] {param} : {}",
                        pretty_lockset(&a.locks),
                        pretty_policy(&a.pc),
                        pretty_type(&a.arg_ty)
                    );
                } else {
                    out.push_str(param);
                }
                out.push_str(". ");
                write_prec(out, body, 0);
            });
        }
        Expr::Pair(a, b) => {
            out.push('(');
            write_prec(out, a, 0);
            out.push_str(", ");
            write_prec(out, b, 0);
            out.push(')');
        }
        Expr::Fst(x) => prefix(out, prec, "fst ", x),
        Expr::Snd(x) => prefix(out, prec, "snd ", x),
        Expr::Deref(x) => prefix(out, prec, "!", x),
        Expr::Inl(x, t) => injection(out, prec, "inl", x, t.as_deref()),
        Expr::Inr(x, t) => injection(out, prec, "inr", x, t.as_deref()),
        Expr::Case { scrut, left_var, left, right_var, right } => {
            paren_if(out, prec > 0, |out| {
                out.push_str("case ");
                write_prec(out, scrut, 0);
                let _ = write!(out, " of inl {left_var} => ");
                // Branches are followed by '|' / nothing; a trailing seq or
                // lambda would swallow the delimiter, so wrap at atom level.
                write_prec(out, left, 1);
                let _ = write!(out, " | inr {right_var} => ");
                write_prec(out, right, 0);
            });
        }
        Expr::App(f, a) => {
            paren_if(out, prec > 2, |out| {
                write_prec(out, f, 2);
                out.push(' ');
                write_prec(out, a, 3);
            });
        }
        Expr::New(e, t) => {
            out.push_str("new(");
            write_prec(out, e, 0);
            let _ = write!(out, " : {})", pretty_type(t));
        }
        Expr::Assign(l, r) => {
            paren_if(out, prec > 1, |out| {
                write_prec(out, l, 2);
                out.push_str(" := ");
                write_prec(out, r, 1);
            });
        }
        Expr::Open(l, e) | Expr::Opened(l, e) => keyword_in(out, prec, "open", l, e),
        Expr::Close(l, e) | Expr::Closed(l, e) => keyword_in(out, prec, "close", l, e),
        Expr::When(l, a, b) => {
            paren_if(out, prec > 0, |out| {
                let _ = write!(out, "when {l} then ");
                write_prec(out, a, 1);
                out.push_str(" else ");
                write_prec(out, b, 0);
            });
        }
    }
}

fn keyword_in(out: &mut String, prec: u8, kw: &str, l: &crate::policy::Lock, e: &Expr) {
    paren_if(out, prec > 0, |out| {
        let _ = write!(out, "{kw} {l} in ");
        write_prec(out, e, 0);
    });
}

fn prefix(out: &mut String, prec: u8, op: &str, e: &Expr) {
    paren_if(out, prec > 3, |out| {
        out.push_str(op);
        write_prec(out, e, 4);
    });
}

fn injection(out: &mut String, prec: u8, kw: &str, e: &Expr, t: Option<&AnnType>) {
    paren_if(out, prec > 3, |out| {
        out.push_str(kw);
        if let Some(t) = t {
            let _ = write!(out, "[{}]", pretty_type(t));
        }
        out.push(' ');
        write_prec(out, e, 4);
    });
}

fn paren_if(out: &mut String, cond: bool, f: impl FnOnce(&mut String)) {
    if cond {
        out.push('(');
        f(out);
        out.push(')');
    } else {
        f(out);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::SecurityConfig;
    use crate::syntax::parser::{parse_expr, parse_runtime_expr, parse_type};

    fn cfg() -> SecurityConfig {
        SecurityConfig::from_names(&["Alice", "Pub"], &["Published", "Paid"])
    }

    #[test]
    fn round_trip_examples() {
        let c = cfg();
        let sources = [
            "fun [{Published}; bot] x : nat@{ {Published} => Pub }. x",
            "let r = new(0 : nat@bot) in r := 5; !r",
            "open Published in (fun x. x) 3",
            "when Published then fst (1, 2) else snd (3, 4)",
            "case inl[unit@bot] 3 of inl x => x | inr y => 0",
            "! ! x",
            "f x y (g z)",
            "if true then 1 else 0",
        ];
        for src in sources {
            let e = parse_expr(src, &c).unwrap();
            let printed = pretty_expr(&e);
            let e2 = parse_expr(&printed, &c)
                .unwrap_or_else(|err| panic!("re-parse of {printed:?} failed: {err}"));
            assert_eq!(e, e2, "round trip changed {src:?} (printed {printed:?})");
        }
    }

    #[test]
    fn round_trip_runtime_forms() {
        let c = cfg();
        let e = parse_runtime_expr("#3 := !#4", &c).unwrap();
        let printed = pretty_expr(&e);
        assert_eq!(parse_runtime_expr(&printed, &c).unwrap(), e);
    }

    #[test]
    fn round_trip_types() {
        let c = cfg();
        let sources = [
            "nat@bot",
            "ref(nat@{ {Published} => Pub })@top",
            "([{Published, Paid}; bot] nat@bot -> (unit@bot + nat@top)@bot)@bot",
            "(nat@bot * ref(unit@bot)@bot)@{ {} => Alice }",
        ];
        for src in sources {
            let t = parse_type(src, &c).unwrap();
            let printed = pretty_type(&t);
            assert_eq!(parse_type(&printed, &c).unwrap(), t, "round trip of {src:?}");
        }
    }
}
