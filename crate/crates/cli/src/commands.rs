use std::fmt;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use lilac_core::analysis::normalize_with_report;
use lilac_core::harnessgen::{gen_all, gen_named};
use lilac_core::how::validate_how;
use lilac_core::interp::{run_with_data, HarnessRegistry, Interpreter, RunError};
use lilac_core::ir::{parse_module, print_module, verify, Module};
use lilac_core::matcher::{detect_all, DetectOptions, MatchError};
use lilac_core::rewrite::{reference_callee, rewrite_module};
use lilac_core::what::{infer_interface, WhatProgram};
use lilac_core::{parse_spec, SpecFile};
use lilac_marshal::Strategy;
use serde_json::{json, Value as Json};

use crate::{Command, DetectArgs, Format};

/// An error that maps to a specific exit status.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub msg: String,
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.msg)
    }
}

impl std::error::Error for Failure {}

const PARSE: u8 = 1;
const INVALID: u8 = 2;
const NO_MATCH: u8 = 3;
const TRAP: u8 = 4;
const BUDGET: u8 = 5;

fn fail(code: u8, msg: impl Into<String>) -> anyhow::Error {
    Failure {
        code,
        msg: msg.into(),
    }
    .into()
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn write_or_print(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("cannot write {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_spec(path: &Path) -> Result<SpecFile> {
    let spec =
        parse_spec(&read(path)?).map_err(|e| fail(PARSE, format!("{}:{e}", path.display())))?;
    if spec.computations.is_empty() && spec.how.classes.is_empty() && spec.how.harnesses.is_empty()
    {
        return Err(fail(PARSE, format!("{}: no declarations", path.display())));
    }
    let mut problems: Vec<String> = spec
        .computations
        .iter()
        .filter_map(|c| infer_interface(c).err())
        .map(|e| e.to_string())
        .collect();
    problems.extend(
        validate_how(&spec.how, &spec.computations)
            .iter()
            .map(|d| d.to_string()),
    );
    if !problems.is_empty() {
        for p in &problems {
            eprintln!("{}: {p}", path.display());
        }
        return Err(fail(
            INVALID,
            format!("{}: {} validation error(s)", path.display(), problems.len()),
        ));
    }
    Ok(spec)
}

fn load_module(path: &Path) -> Result<(String, Module)> {
    let text = read(path)?;
    let m = parse_module(&text).map_err(|e| fail(PARSE, format!("{}:{e}", path.display())))?;
    let diags = verify(&m);
    if !diags.is_empty() {
        for d in &diags {
            eprintln!("{}: {d}", path.display());
        }
        return Err(fail(
            INVALID,
            format!("{}: module does not verify", path.display()),
        ));
    }
    Ok((text, m))
}

fn select(spec: &SpecFile, what: Option<&str>) -> Result<Vec<WhatProgram>> {
    match what {
        None => Ok(spec.computations.clone()),
        Some(w) => spec
            .computation(w)
            .map(|c| vec![c.clone()])
            .ok_or_else(|| fail(INVALID, format!("no computation named `{w}`"))),
    }
}

fn match_failure(e: MatchError) -> anyhow::Error {
    let code = match e {
        MatchError::BudgetExceeded { .. } => BUDGET,
        MatchError::Interface(_) => INVALID,
    };
    fail(code, e.to_string())
}

pub fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Check { spec } => check(&spec),
        Command::Detect {
            args,
            trace,
            format,
        } => detect(&args, trace, format),
        Command::Rewrite {
            args,
            harness,
            output,
        } => rewrite(&args, harness.as_deref(), output.as_deref()),
        Command::GenHarness {
            harness,
            spec,
            output,
            ext,
        } => gen_harness(harness.as_deref(), &spec, output.as_deref(), &ext),
        Command::Normalize { input, output } => normalize(&input, output.as_deref()),
        Command::Run {
            program,
            entry,
            data,
            with_reference_harness,
            marshal_strategy,
            stats,
            step_limit,
            format,
        } => run(RunArgs {
            program: &program,
            entry: entry.as_deref(),
            data: &data,
            spec: with_reference_harness.as_deref(),
            strategy: marshal_strategy.as_deref(),
            stats,
            step_limit,
            format,
        }),
    }
}

fn check(path: &Path) -> Result<()> {
    let spec = load_spec(path)?;
    println!(
        "{}: {} computation(s), {} harness(es), {} marshaling class(es)",
        path.display(),
        spec.computations.len(),
        spec.how.harnesses.len(),
        spec.how.classes.len()
    );
    Ok(())
}

fn detect(args: &DetectArgs, trace: bool, format: Format) -> Result<()> {
    let spec = load_spec(&args.spec)?;
    let (_, m) = load_module(&args.program)?;
    let whats = select(&spec, args.what.as_deref())?;
    let d = detect_all(
        &m,
        &whats,
        DetectOptions {
            budget: args.budget,
        },
    )
    .map_err(match_failure)?;
    for (f, diag) in &d.diagnostics {
        eprintln!("@{f}: {diag}");
    }
    match format {
        Format::Json => {
            let records: Vec<Json> = d.matches.iter().map(|m| m.to_json(trace)).collect();
            println!("{}", serde_json::to_string_pretty(&records)?);
        }
        Format::Text => {
            for hit in &d.matches {
                println!("{hit}");
                if trace {
                    for line in hit.trace_lines() {
                        println!("  {line}");
                    }
                }
            }
        }
    }
    if d.matches.is_empty() {
        return Err(fail(NO_MATCH, "no matches"));
    }
    Ok(())
}

fn rewrite(args: &DetectArgs, harness: Option<&str>, output: Option<&Path>) -> Result<()> {
    let spec = load_spec(&args.spec)?;
    let (text, m) = load_module(&args.program)?;
    let whats = match harness {
        Some(h) => {
            let h = spec
                .how
                .harness(h)
                .ok_or_else(|| fail(INVALID, format!("no harness named `{h}`")))?;
            if args.what.as_deref().is_some_and(|w| w != h.implements) {
                return Err(fail(
                    INVALID,
                    format!("harness `{}` implements `{}`", h.name, h.implements),
                ));
            }
            select(&spec, Some(&h.implements))?
        }
        None => select(&spec, args.what.as_deref())?,
    };
    let callee = |what: &str| harness.map_or_else(|| reference_callee(what), str::to_string);
    let report = rewrite_module(
        &m,
        &whats,
        DetectOptions {
            budget: args.budget,
        },
        callee,
    )
    .map_err(match_failure)?;
    for s in &report.skipped {
        eprintln!(
            "skipped {} in @{} at {}: {}",
            s.what, s.function, s.header, s.reason
        );
    }
    for a in &report.applied {
        eprintln!(
            "replaced {} in @{} at {} with @{}",
            a.what, a.function, a.header, a.callee
        );
    }
    if report.applied.is_empty() {
        write_or_print(output, &text)?;
        return Err(fail(NO_MATCH, "no loop nests were replaced"));
    }
    write_or_print(output, &print_module(&report.module))
}

fn gen_harness(harness: Option<&str>, path: &Path, dir: Option<&Path>, ext: &str) -> Result<()> {
    let spec = load_spec(path)?;
    let sources = match harness {
        Some(h) => vec![(
            h.to_string(),
            gen_named(&spec.how, &spec.computations, h)
                .map_err(|e| fail(INVALID, e.to_string()))?,
        )],
        None => gen_all(&spec.how, &spec.computations).map_err(|e| fail(INVALID, e.to_string()))?,
    };
    match dir {
        Some(dir) => {
            fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
            for (name, text) in &sources {
                let file = dir.join(format!("{name}.{}", ext.trim_start_matches('.')));
                fs::write(&file, text)
                    .with_context(|| format!("cannot write {}", file.display()))?;
                println!("{}", file.display());
            }
        }
        None => {
            for (_, text) in &sources {
                print!("{text}");
            }
        }
    }
    Ok(())
}

fn normalize(input: &Path, output: Option<&Path>) -> Result<()> {
    let (_, m) = load_module(input)?;
    let (n, report) = normalize_with_report(&m);
    if !report.converged {
        eprintln!(
            "warning: normalization stopped after {} rounds without a fixpoint",
            report.rounds
        );
    }
    write_or_print(output, &print_module(&n))
}

struct RunArgs<'a> {
    program: &'a Path,
    entry: Option<&'a str>,
    data: &'a Path,
    spec: Option<&'a Path>,
    strategy: Option<&'a str>,
    stats: bool,
    step_limit: u64,
    format: Format,
}

fn strategy(flag: Option<&str>) -> Result<Strategy> {
    match flag {
        Some(s) => s.parse().map_err(|e| fail(INVALID, format!("{e}"))),
        None => Ok(Strategy::from_env()
            .map_err(|e| fail(INVALID, format!("{e}")))?
            .unwrap_or(Strategy::PageProtect)),
    }
}

fn run(a: RunArgs<'_>) -> Result<()> {
    let (_, m) = load_module(a.program)?;
    let f = match a.entry {
        Some(name) => m
            .function(name)
            .ok_or_else(|| fail(INVALID, format!("no function `@{name}`")))?,
        None => match m.functions.as_slice() {
            [f] => f,
            _ => {
                return Err(fail(
                    INVALID,
                    "the module has several functions; pass --entry",
                ))
            }
        },
    };
    let data: Json = serde_json::from_str(&read(a.data)?)
        .map_err(|e| fail(PARSE, format!("{}: {e}", a.data.display())))?;
    let registry = match a.spec {
        Some(p) => HarnessRegistry::from_spec(&load_spec(p)?, strategy(a.strategy)?)
            .map_err(|e| fail(INVALID, e.to_string()))?,
        None => HarnessRegistry::new(),
    };
    let mut it = Interpreter::new(&m)
        .with_harnesses(registry)
        .with_step_limit(a.step_limit);
    let outcome = run_with_data(&mut it, f, &data);
    let stats: Vec<Json> = it
        .harnesses
        .release_all()
        .into_iter()
        .flat_map(|(harness, report)| {
            report.stats.into_iter().map(move |s| {
                json!({
                    "harness": harness,
                    "region": s.region,
                    "n_construct": s.counters.n_construct,
                    "n_update": s.counters.n_update,
                    "n_destruct": s.counters.n_destruct,
                })
            })
        })
        .collect();
    let outcome = match outcome {
        Ok(o) => o,
        Err(RunError::Trap(t)) => return Err(fail(TRAP, format!("trap: {t}"))),
        Err(RunError::Data(e)) => return Err(fail(INVALID, format!("{}: {e}", a.data.display()))),
    };
    match a.format {
        Format::Text => {
            print!("{}", outcome.to_text());
            if a.stats {
                eprintln!("{}", serde_json::to_string(&stats)?);
            }
        }
        Format::Json => {
            let mut out = outcome.to_json();
            if a.stats {
                out["stats"] = Json::Array(stats);
            }
            println!("{}", serde_json::to_string_pretty(&out)?);
        }
    }
    Ok(())
}
