//! Command-line front door for the LW language: parsing, typechecking,
//! running with traces, bounded security checking, and attacker knowledge.
//!
//! Exit codes: 0 success / no violation, 1 violation or type error,
//! 2 I/O error, 3 program parse error, 4 configuration error.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use lw_core::equiv::EqBudget;
use lw_core::gen::GenBudget;
use lw_core::harness::{
    check_security, enumerate_attackers, flow_lock_check, knowledge, Report, StateSpace, Verdict,
};
use lw_core::interp::{obs_from_json, run, state_from_json, ObsJson, State};
use lw_core::policy::{Actor, Attacker, Lock, LockSet, Policy, SecurityConfig};
use lw_core::syntax::ast::{Expr, TypeEnv};
use lw_core::syntax::parser::{parse_policy, parse_runtime_expr, parse_type};
use lw_core::syntax::pretty::{pretty_expr, pretty_type};
use lw_core::types::{typecheck_against, typecheck_synth, TypingContext};

const EXIT_VIOLATION: u8 = 1;
const EXIT_IO: u8 = 2;
const EXIT_PARSE: u8 = 3;
const EXIT_CONFIG: u8 = 4;

#[derive(Parser)]
#[command(name = "lw", about = "LW language toolchain", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    /// Program file (.lw), or `-` for stdin.
    program: PathBuf,
    /// Security configuration (actors, locks, lock policies) as JSON.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Initially open locks, comma-separated.
    #[arg(long, default_value = "")]
    locks: String,
    /// Write output here instead of stdout.
    #[arg(long, default_value = "-")]
    output: String,
}

#[derive(Args)]
struct SpaceArgs {
    /// Initial state as JSON ({"#0": {"value": "...", "type": "..."}}).
    #[arg(long)]
    state: Option<PathBuf>,
    /// Values each nat-typed cell and variable ranges over.
    #[arg(long, default_value = "0,1,2")]
    nat_domain: String,
    /// Step budget per execution.
    #[arg(long, default_value_t = 1000)]
    fuel: u64,
}

#[derive(Subcommand)]
enum Cmd {
    /// Parse a program and print its canonical form.
    Parse {
        #[command(flatten)]
        common: Common,
    },
    /// Typecheck a program and print its type.
    Typecheck {
        #[command(flatten)]
        common: Common,
        /// Program-counter policy (default bottom).
        #[arg(long)]
        pc: Option<String>,
        /// Free-variable typing, e.g. "x: nat@bot; f: ([{}; bot] nat@bot -> nat@bot)@bot".
        #[arg(long, default_value = "")]
        gamma: String,
        /// Initial state JSON giving location types.
        #[arg(long)]
        state: Option<PathBuf>,
        /// Expected type; checked instead of synthesized when given.
        #[arg(long)]
        r#type: Option<String>,
    },
    /// Run a program and print its observation trace as JSON.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        state: Option<PathBuf>,
        #[arg(long, default_value_t = 1000)]
        fuel: u64,
    },
    /// Bounded whole-program security check; prints a Report.
    Check {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        space: SpaceArgs,
        /// Program-counter policy (default bottom).
        #[arg(long)]
        pc: Option<String>,
        /// Result type of the program.
        #[arg(long)]
        r#type: Option<String>,
        /// Free-variable typing as for typecheck.
        #[arg(long, default_value = "")]
        gamma: String,
        /// `all` to enumerate, or a JSON file [{"actor": ..., "capability": [...]}].
        #[arg(long, default_value = "all")]
        attackers: String,
        /// Seed echoed into the report for reproducibility.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// `json` or `text`.
        #[arg(long, default_value = "json")]
        format: String,
    },
    /// Attacker knowledge after a prefix of visible observations.
    Knowledge {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        space: SpaceArgs,
        /// Attacker as "Actor" or "Actor:lock1,lock2".
        #[arg(long)]
        attacker: String,
        /// JSON array of observations ([{"kind": "write", ...}]).
        #[arg(long)]
        prefix: Option<PathBuf>,
        /// Run the lock-aware knowledge security check instead of printing
        /// one knowledge set.
        #[arg(long, default_value_t = false)]
        check: bool,
    },
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.msg);
            ExitCode::from(e.code)
        }
    }
}

struct CliError {
    code: u8,
    msg: String,
}

fn err(code: u8, msg: impl Into<String>) -> CliError {
    CliError { code, msg: msg.into() }
}

fn read_file(p: &Path) -> Result<String, CliError> {
    if p == Path::new("-") {
        use std::io::Read;
        let mut s = String::new();
        std::io::stdin()
            .read_to_string(&mut s)
            .map_err(|e| err(EXIT_IO, format!("reading stdin: {e}")))?;
        return Ok(s);
    }
    std::fs::read_to_string(p).map_err(|e| err(EXIT_IO, format!("reading {}: {e}", p.display())))
}

fn load_config(p: &Option<PathBuf>) -> Result<SecurityConfig, CliError> {
    let cfg = match p {
        None => SecurityConfig::from_names(&["Default"], &[]),
        Some(p) => {
            let text = read_file(p)?;
            serde_json::from_str(&text)
                .map_err(|e| err(EXIT_CONFIG, format!("config {}: {e}", p.display())))?
        }
    };
    cfg.validate().map_err(|e| err(EXIT_CONFIG, format!("config: {e}")))?;
    Ok(cfg)
}

fn parse_locks(s: &str, cfg: &SecurityConfig) -> Result<LockSet, CliError> {
    let mut out = LockSet::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let l = Lock::new(part);
        if !cfg.locks.contains(&l) {
            return Err(err(EXIT_CONFIG, format!("unknown lock {part:?}")));
        }
        out.insert(l);
    }
    Ok(out)
}

fn parse_pc(s: &Option<String>, cfg: &SecurityConfig) -> Result<Policy, CliError> {
    match s {
        None => Ok(cfg.bottom()),
        Some(s) => parse_policy(s, cfg).map_err(|e| err(EXIT_PARSE, format!("pc policy: {e}"))),
    }
}

fn parse_gamma(s: &str, cfg: &SecurityConfig) -> Result<TypeEnv, CliError> {
    let mut gamma = TypeEnv::new();
    for part in s.split(';').map(str::trim).filter(|p| !p.is_empty()) {
        let (name, ty) = part
            .split_once(':')
            .ok_or_else(|| err(EXIT_PARSE, format!("gamma entry {part:?}: expected name: type")))?;
        let t = parse_type(ty.trim(), cfg)
            .map_err(|e| err(EXIT_PARSE, format!("gamma type for {}: {e}", name.trim())))?;
        gamma.insert(name.trim().to_string(), t);
    }
    Ok(gamma)
}

fn load_state(p: &Option<PathBuf>, cfg: &SecurityConfig) -> Result<State, CliError> {
    match p {
        None => Ok(State::new()),
        Some(p) => {
            let text = read_file(p)?;
            let m: BTreeMap<String, lw_core::interp::StateCellJson> = serde_json::from_str(&text)
                .map_err(|e| err(EXIT_CONFIG, format!("state {}: {e}", p.display())))?;
            state_from_json(&m, cfg).map_err(|e| err(EXIT_CONFIG, format!("state: {e}")))
        }
    }
}

fn load_program(common: &Common, cfg: &SecurityConfig) -> Result<Expr, CliError> {
    let text = read_file(&common.program)?;
    // Programs over an initial state mention locations, so runtime forms
    // are always accepted at the top level.
    parse_runtime_expr(&text, cfg).map_err(|e| err(EXIT_PARSE, format!("parse: {e}")))
}

fn nat_domain(s: &str) -> Result<Vec<u64>, CliError> {
    s.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| p.parse().map_err(|_| err(EXIT_CONFIG, format!("bad nat-domain entry {p:?}"))))
        .collect()
}

fn parse_attacker(s: &str, cfg: &SecurityConfig) -> Result<Attacker, CliError> {
    let (actor, caps) = match s.split_once(':') {
        Some((a, c)) => (a.trim(), c),
        None => (s.trim(), ""),
    };
    let actor = Actor::new(actor);
    if !cfg.actors.contains(&actor) {
        return Err(err(EXIT_CONFIG, format!("unknown actor {:?}", actor.0)));
    }
    Ok(Attacker { actor, capability: parse_locks(caps, cfg)? })
}

fn emit(common: &Common, text: &str) -> Result<(), CliError> {
    if common.output == "-" {
        println!("{text}");
        Ok(())
    } else {
        std::fs::write(&common.output, format!("{text}\n"))
            .map_err(|e| err(EXIT_IO, format!("writing {}: {e}", common.output)))
    }
}

fn render_report_text(r: &Report) -> String {
    let mut out = format!(
        "checked: pass={} declass={} violation={} inconclusive={} well_typed={}\n",
        r.summary.pass,
        r.summary.pass_by_declass,
        r.summary.violation,
        r.summary.inconclusive,
        r.well_typed
    );
    for e in &r.entries {
        let att = format!("{}:{}", e.attacker.actor, e.attacker.capability.join(","));
        let line = match &e.verdict {
            Verdict::Pass => format!("PASS        attacker={att}"),
            Verdict::PassByDeclass { step_index, .. } => {
                format!("DECLASS     attacker={att} step={step_index}")
            }
            Verdict::Violation { step_index, reason, .. } => {
                format!("VIOLATION   attacker={att} step={step_index} reason={reason}")
            }
            Verdict::Inconclusive { budget } => {
                format!("INCONCLUSIVE attacker={att} budget={budget}")
            }
        };
        out.push_str(&line);
        out.push('\n');
    }
    out.trim_end().to_string()
}

fn dispatch(cli: Cli) -> Result<ExitCode, CliError> {
    match cli.cmd {
        Cmd::Parse { common } => {
            let cfg = load_config(&common.config)?;
            let e = load_program(&common, &cfg)?;
            emit(&common, &pretty_expr(&e))?;
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Typecheck { common, pc, gamma, state, r#type } => {
            let cfg = load_config(&common.config)?;
            let e = load_program(&common, &cfg)?;
            let locks = parse_locks(&common.locks, &cfg)?;
            let pc = parse_pc(&pc, &cfg)?;
            let gamma = parse_gamma(&gamma, &cfg)?;
            let theta = load_state(&state, &cfg)?.theta();
            let mut ctx = TypingContext::new(&cfg)
                .with_locks(locks)
                .with_pc(pc)
                .with_theta(theta);
            for (x, t) in &gamma {
                ctx = ctx.with_var(x.clone(), t.clone());
            }
            match r#type {
                None => match typecheck_synth(&cfg, &ctx, &e) {
                    Ok(t) => {
                        emit(&common, &pretty_type(&t))?;
                        Ok(ExitCode::SUCCESS)
                    }
                    Err(te) => {
                        emit(&common, &format!("type error: {te}"))?;
                        Ok(ExitCode::from(EXIT_VIOLATION))
                    }
                },
                Some(ts) => {
                    let want = parse_type(&ts, &cfg)
                        .map_err(|e| err(EXIT_PARSE, format!("expected type: {e}")))?;
                    match typecheck_against(&cfg, &ctx, &e, &want) {
                        Ok(()) => {
                            emit(&common, &pretty_type(&want))?;
                            Ok(ExitCode::SUCCESS)
                        }
                        Err(te) => {
                            emit(&common, &format!("type error: {te}"))?;
                            Ok(ExitCode::from(EXIT_VIOLATION))
                        }
                    }
                }
            }
        }
        Cmd::Run { common, state, fuel } => {
            let cfg = load_config(&common.config)?;
            let e = load_program(&common, &cfg)?;
            let locks = parse_locks(&common.locks, &cfg)?;
            let s = load_state(&state, &cfg)?;
            let trace = run(&e, &locks, &s, fuel);
            let json = serde_json::to_string_pretty(&trace.to_json()).expect("trace serializes");
            emit(&common, &json)?;
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Check { common, space, pc, r#type, gamma, attackers, seed, format } => {
            let cfg = load_config(&common.config)?;
            let e = load_program(&common, &cfg)?;
            let locks = parse_locks(&common.locks, &cfg)?;
            let pc = parse_pc(&pc, &cfg)?;
            let gamma = parse_gamma(&gamma, &cfg)?;
            let init = load_state(&space.state, &cfg)?;
            let theta = init.theta();
            let dom = nat_domain(&space.nat_domain)?;
            let budget = GenBudget { nat_domain: dom, ..GenBudget::default() };
            let eq = EqBudget { fuel: space.fuel, gen: budget.clone() };
            let result_ty = match r#type {
                Some(ts) => {
                    parse_type(&ts, &cfg).map_err(|e| err(EXIT_PARSE, format!("type: {e}")))?
                }
                None => {
                    // Synthesize once under gamma/theta to learn the result type.
                    let mut ctx = TypingContext::new(&cfg)
                        .with_locks(locks.clone())
                        .with_pc(pc.clone())
                        .with_theta(theta.clone());
                    for (x, t) in &gamma {
                        ctx = ctx.with_var(x.clone(), t.clone());
                    }
                    typecheck_synth(&cfg, &ctx, &e).map_err(|te| {
                        err(
                            EXIT_VIOLATION,
                            format!("cannot synthesize a result type ({te}); pass --type"),
                        )
                    })?
                }
            };
            if attackers != "all" {
                return Err(err(
                    EXIT_CONFIG,
                    "explicit attacker lists are not supported yet; use `all`",
                ));
            }
            enumerate_attackers(&cfg, 6).map_err(|e| err(EXIT_CONFIG, e.to_string()))?;
            let sp = StateSpace::new(theta.clone(), budget);
            let report =
                check_security(&e, &gamma, &theta, &locks, &result_ty, &pc, &cfg, &sp, &eq)
                    .map_err(|e| err(EXIT_CONFIG, e.to_string()))?;
            let body = if format == "text" {
                format!("seed: {seed}\n{}", render_report_text(&report))
            } else {
                serde_json::to_string_pretty(&serde_json::json!({
                    "seed": seed,
                    "report": report,
                }))
                .expect("report serializes")
            };
            emit(&common, &body)?;
            if report.secure() {
                Ok(ExitCode::SUCCESS)
            } else {
                Ok(ExitCode::from(EXIT_VIOLATION))
            }
        }
        Cmd::Knowledge { common, space, attacker, prefix, check } => {
            let cfg = load_config(&common.config)?;
            let e = load_program(&common, &cfg)?;
            let locks = parse_locks(&common.locks, &cfg)?;
            let a = parse_attacker(&attacker, &cfg)?;
            let init = load_state(&space.state, &cfg)?;
            let low = lw_core::equiv::low_state(&init, &a);
            let dom = nat_domain(&space.nat_domain)?;
            let budget = GenBudget { nat_domain: dom, ..GenBudget::default() };
            let eq = EqBudget { fuel: space.fuel, gen: budget.clone() };
            let sp = StateSpace::new(init.theta(), budget);
            if check {
                let v = flow_lock_check(&e, &low, &locks, &sp, &a, &cfg, space.fuel, &eq)
                    .map_err(|e| err(EXIT_CONFIG, e.to_string()))?;
                emit(&common, &serde_json::to_string_pretty(&v).expect("verdict serializes"))?;
                return Ok(if v.is_violation() {
                    ExitCode::from(EXIT_VIOLATION)
                } else {
                    ExitCode::SUCCESS
                });
            }
            let obs = match prefix {
                None => Vec::new(),
                Some(p) => {
                    let text = read_file(&p)?;
                    let raw: Vec<ObsJson> = serde_json::from_str(&text)
                        .map_err(|e| err(EXIT_PARSE, format!("prefix {}: {e}", p.display())))?;
                    raw.iter()
                        .map(|o| obs_from_json(o, &cfg))
                        .collect::<Result<Vec<_>, _>>()
                        .map_err(|e| err(EXIT_PARSE, format!("prefix: {e}")))?
                }
            };
            let k = knowledge(&e, &obs, &low, &locks, &sp, &a, &cfg, space.fuel, &eq)
                .map_err(|e| err(EXIT_CONFIG, e.to_string()))?;
            emit(&common, &serde_json::to_string_pretty(&k).expect("knowledge serializes"))?;
            Ok(ExitCode::SUCCESS)
        }
    }
}
