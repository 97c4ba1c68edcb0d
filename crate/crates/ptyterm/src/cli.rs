//! Command-line front end: `eval`, `approx`, `check`, `synthesize`,
//! `reduce-deriv`, and `stdlib`.
//!
//! Term arguments accept either a file path or a name from the built-in
//! corpus, resolved file-first. All numeric output is exact-rational text;
//! `--decimal` adds a rounded display column next to approximants and
//! norms, never replacing the exact value. Exit codes: 0 on success, 1 on
//! domain errors, 2 on usage errors.

use crate::derivation::{check_derivation, parse_derivation, to_sexp};
use crate::multidist::{fmt_rat, value_mass, MultiDist, Rat};
use crate::semantics::{approximants_along, evaluate_limited};
use crate::stdlib::{lookup, registry, ModeSpec};
use crate::syntax::{desugar_cbv, parse, Mode, Term};
use crate::transform::{null_complete, subject_reduce, tight_complete};
use crate::types::{dist_norm, is_tight};
use clap::{Parser, Subcommand, ValueEnum};
use num_traits::ToPrimitive;
use std::fmt::Write as _;
use std::path::Path;

#[derive(Parser)]
#[command(
    name = "ptyterm",
    version,
    about = "Probabilistic λ-calculi with exact semantics and intersection-type certificates"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Cbv,
    Cbn,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Cbv => Mode::Cbv,
            ModeArg::Cbn => Mode::Cbn,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Text,
    Sexp,
}

#[derive(clap::Args, Clone)]
struct Common {
    /// Evaluation mode
    #[arg(long, value_enum, default_value = "cbv")]
    mode: ModeArg,
    /// Rewrite non-value applications to lets when parsing CbV terms
    #[arg(long)]
    desugar: bool,
    /// Abort when a state holds more than this many entries
    /// (default: the PTYTERM_LIMIT environment variable, else unlimited)
    #[arg(long)]
    limit: Option<usize>,
    /// Output format
    #[arg(long, value_enum, default_value = "text")]
    format: FormatArg,
    /// Also print rationals rounded to this many decimal places
    #[arg(long)]
    decimal: Option<usize>,
}

impl Common {
    fn limit(&self) -> Option<usize> {
        self.limit.or_else(|| {
            std::env::var("PTYTERM_LIMIT")
                .ok()
                .and_then(|v| v.parse().ok())
        })
    }
}

#[derive(Subcommand)]
enum Command {
    /// Print the first k+1 states of a term's reduction sequence
    Eval {
        /// Term file or stdlib name
        term: String,
        #[arg(long, default_value_t = 0)]
        steps: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Print the termination-probability and expected-runtime approximants
    Approx {
        term: String,
        #[arg(long, default_value_t = 0)]
        steps: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Check a derivation file and report weight, type, tightness, and norm
    Check {
        file: String,
        #[arg(long, value_enum, default_value = "cbv")]
        mode: ModeArg,
    },
    /// Synthesize a tight (or, with --null, a null) derivation
    Synthesize {
        term: String,
        #[arg(long, default_value_t = 0)]
        steps: usize,
        /// Derive the null type instead of a tight one
        #[arg(long)]
        null: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Apply weighted subject reduction to a checked derivation file
    ReduceDeriv {
        file: String,
        #[arg(long, value_enum, default_value = "cbv")]
        mode: ModeArg,
    },
    /// Inspect the named term corpus
    Stdlib {
        #[command(subcommand)]
        cmd: StdlibCmd,
    },
}

#[derive(Subcommand)]
enum StdlibCmd {
    /// List the registered terms
    List,
    /// Print one registered term
    Show { name: String },
}

pub fn run() -> i32 {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(out) => {
            print!("{}", out);
            0
        }
        Err(msg) => {
            eprintln!("error: {}", msg);
            1
        }
    }
}

fn dispatch(cli: Cli) -> Result<String, String> {
    match cli.command {
        Command::Eval {
            term,
            steps,
            common,
        } => {
            let mode = common.mode.into();
            let t = resolve_term(&term, mode, common.desugar)?;
            let trace =
                evaluate_limited(&t, steps, mode, common.limit()).map_err(|e| e.to_string())?;
            let mut out = String::new();
            for state in &trace.states {
                match common.format {
                    FormatArg::Text => writeln!(out, "{}", state).unwrap(),
                    FormatArg::Sexp => writeln!(out, "{}", fmt_state_sexp(state)).unwrap(),
                }
            }
            Ok(out)
        }
        Command::Approx {
            term,
            steps,
            common,
        } => {
            let mode = common.mode.into();
            let t = resolve_term(&term, mode, common.desugar)?;
            let trace =
                evaluate_limited(&t, steps, mode, common.limit()).map_err(|e| e.to_string())?;
            let p = value_mass(trace.final_state());
            let (_, ets) = approximants_along(&trace);
            let et_k = ets[steps].clone();
            Ok(format!(
                "P^{}={}{} eT^{}={}{}\n",
                steps,
                fmt_rat(&p),
                decimal_suffix(&p, common.decimal),
                steps,
                fmt_rat(&et_k),
                decimal_suffix(&et_k, common.decimal),
            ))
        }
        Command::Check { file, mode } => {
            let mode: Mode = mode.into();
            let src = std::fs::read_to_string(&file)
                .map_err(|e| format!("cannot read {}: {}", file, e))?;
            let d = parse_derivation(&src, mode).map_err(|e| e.to_string())?;
            let j = check_derivation(&d, mode).map_err(|e| e.to_string())?;
            let norm = match dist_norm(&j.rhs) {
                Some(n) => fmt_rat(&n),
                None => "n/a".to_string(),
            };
            Ok(format!(
                "weight={} type={} tight={} norm={}\n",
                fmt_rat(&j.weight),
                j.rhs,
                is_tight(&j.rhs, mode),
                norm
            ))
        }
        Command::Synthesize {
            term,
            steps,
            null,
            common,
        } => {
            let mode = common.mode.into();
            let t = resolve_term(&term, mode, common.desugar)?;
            let d = if null {
                null_complete(&t, steps, mode).map_err(|e| e.to_string())?
            } else {
                tight_complete(&t, steps, mode).map_err(|e| e.to_string())?
            };
            Ok(format!("{}\n", to_sexp(&d)))
        }
        Command::ReduceDeriv { file, mode } => {
            let mode: Mode = mode.into();
            let src = std::fs::read_to_string(&file)
                .map_err(|e| format!("cannot read {}: {}", file, e))?;
            let d = parse_derivation(&src, mode).map_err(|e| e.to_string())?;
            check_derivation(&d, mode).map_err(|e| e.to_string())?;
            let branches = subject_reduce(&d, mode).map_err(|e| e.to_string())?;
            let mut out = String::new();
            for (i, b) in branches.iter().enumerate() {
                if i > 0 {
                    out.push('\n');
                }
                writeln!(out, "{}", to_sexp(b)).unwrap();
            }
            Ok(out)
        }
        Command::Stdlib { cmd } => match cmd {
            StdlibCmd::List => {
                let mut out = String::new();
                for e in registry() {
                    writeln!(out, "{:10} {:24} {}", e.name, e.mode.to_string(), e.notes).unwrap();
                }
                Ok(out)
            }
            StdlibCmd::Show { name } => match lookup(&name) {
                Some(e) => Ok(format!("{}\n", e.term)),
                None => Err(format!("unknown stdlib name `{}`", name)),
            },
        },
    }
}

/// File first, stdlib name second, and as a fallback the argument itself is
/// parsed as a term.
fn resolve_term(arg: &str, mode: Mode, desugar: bool) -> Result<Term, String> {
    if Path::new(arg).exists() {
        let src =
            std::fs::read_to_string(arg).map_err(|e| format!("cannot read {}: {}", arg, e))?;
        return parse(&src, mode, desugar).map_err(|e| e.to_string());
    }
    if let Some(entry) = lookup(arg) {
        return match (entry.mode, mode) {
            (ModeSpec::Both, _)
            | (ModeSpec::CbvOnly, Mode::Cbv)
            | (ModeSpec::CbnOnly, Mode::Cbn) => Ok(entry.term),
            (ModeSpec::CbnOnly, Mode::Cbv) => {
                if desugar {
                    Ok(desugar_cbv(&entry.term))
                } else {
                    Err(format!(
                        "`{}` has non-value applications; pass --desugar to use it in cbv mode",
                        arg
                    ))
                }
            }
            (ModeSpec::CbvOnly, Mode::Cbn) => {
                Err(format!("`{}` uses let and is not a cbn term", arg))
            }
        };
    }
    parse(arg, mode, desugar).map_err(|e| e.to_string())
}

fn fmt_state_sexp(state: &MultiDist<Term>) -> String {
    let mut out = String::from("(state");
    for (p, t) in state.entries() {
        write!(out, " ({} {})", fmt_rat(p), t).unwrap();
    }
    out.push(')');
    out
}

fn decimal_suffix(r: &Rat, places: Option<usize>) -> String {
    match places {
        None => String::new(),
        Some(d) => match r.to_f64() {
            Some(x) => format!(" (~{:.*})", d, x),
            None => String::new(),
        },
    }
}
