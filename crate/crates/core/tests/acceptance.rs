//! Acceptance checks. Prints one PASS or FAIL line per criterion and exits
//! with a failure status if any criterion fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use common::generate::{random_inputs, random_module, random_what};
use common::*;
use lilac_core::analysis::normalize;
use lilac_core::interp::{run_with_data, HarnessRegistry, Interpreter, RunError, RunOutcome, Val};
use lilac_core::ir::{parse_module, print_module, verify, Module};
use lilac_core::matcher::{detect_all, replay, DetectOptions, TraceEvent};
use lilac_core::parse_spec;
use lilac_core::rewrite::{reference_callee, rewrite_module, RewriteError};
use lilac_core::what::{interpret_what, parse_what, Bindings, Value};
use lilac_marshal::{
    cached_invariant, HostCopy, MarshalCounters, MarshalObject, MarshalRegistry, MaxPlusOne,
    PageBuf, Strategy,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::Value as Json;

type Outcome = Result<String, String>;

const STEP_LIMIT: u64 = 2_000_000;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn run_outcome(
    m: &Module,
    data: &Json,
    strategy: Strategy,
) -> Result<Result<RunOutcome, String>, String> {
    let reg = HarnessRegistry::from_spec(&spec(), strategy).map_err(|e| e.to_string())?;
    let mut it = Interpreter::new(m)
        .with_harnesses(reg)
        .with_step_limit(STEP_LIMIT);
    match run_with_data(&mut it, &m.functions[0], data) {
        Ok(o) => Ok(Ok(o)),
        Err(RunError::Trap(t)) => Ok(Err(format!("{t:?}")
            .split(['(', ' ', '{'])
            .next()
            .unwrap_or_default()
            .to_string())),
        Err(RunError::Data(e)) => Err(format!("bad dataset {data}: {e}")),
    }
}

/// Printed arrays and return value, or the kind of trap.
fn observe(m: &Module, data: &Json, strategy: Strategy) -> Result<String, String> {
    Ok(match run_outcome(m, data, strategy)? {
        Ok(o) => o.to_text(),
        Err(trap) => format!("trap {trap}"),
    })
}

fn completed(m: &Module, data: &Json, strategy: Strategy) -> Result<RunOutcome, String> {
    run_outcome(m, data, strategy)?.map_err(|t| format!("unexpected trap {t} on {data}"))
}

fn rewritten(name: &str, what: Option<&str>, callee: &str) -> Result<Module, String> {
    let spec = spec();
    let whats: Vec<_> = spec
        .computations
        .iter()
        .filter(|c| what.is_none_or(|w| c.name == w))
        .cloned()
        .collect();
    let callee = callee.to_string();
    let r = rewrite_module(&module(name), &whats, DetectOptions::default(), |w| {
        if callee.is_empty() {
            reference_callee(w)
        } else {
            callee.clone()
        }
    })
    .map_err(|e| e.to_string())?;
    ensure!(
        r.applied.len() == 1 && r.skipped.is_empty(),
        "{name}: {} replaced, {} skipped",
        r.applied.len(),
        r.skipped.len()
    );
    Ok(r.module)
}

fn floats(j: &Json, key: &str) -> Vec<f64> {
    j[key]
        .as_array()
        .map(|a| a.iter().filter_map(Json::as_f64).collect())
        .unwrap_or_default()
}

fn same_bits(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
}

fn detection() -> Outcome {
    let start = Instant::now();
    let spec = spec();
    for name in POSITIVES {
        let d = detect_all(&module(name), &spec.computations, DetectOptions::default())
            .map_err(|e| e.to_string())?;
        let found: Vec<&str> = d.matches.iter().map(|m| m.what.as_str()).collect();
        ensure!(
            found == [expected_computation(name)],
            "{name}: found {found:?}"
        );
    }
    for name in NEGATIVES {
        let d = detect_all(&module(name), &spec.computations, DetectOptions::default())
            .map_err(|e| e.to_string())?;
        ensure!(
            d.matches.is_empty(),
            "{name}: {} false matches",
            d.matches.len()
        );
    }
    let r = rewrite_module(
        &module("csr_side_effect"),
        &spec.computations,
        DetectOptions::default(),
        reference_callee,
    )
    .map_err(|e| e.to_string())?;
    ensure!(
        r.applied.is_empty()
            && r.skipped.len() == 1
            && matches!(r.skipped[0].reason, RewriteError::SideEffectsInLoop { .. }),
        "the nest with an extra store was not refused"
    );
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(10), "took {elapsed:?}");
    Ok(format!(
        "{} positives detected, {} negatives without matches, side-effect nest refused, {elapsed:.2?}",
        POSITIVES.len(),
        NEGATIVES.len()
    ))
}

fn oracle_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let example = Csr::example();
    let ones = vec![1.0; 5];
    let ramp = vec![1.0, 2.0, 3.0, 4.0, 5.0];
    let expected = [
        (&ones, vec![2.0, 4.0, 4.0, 2.0, 0.0]),
        (&ramp, vec![4.0, 12.0, 15.0, 8.0, 2.0]),
    ];
    for (x, want) in &expected {
        ensure!(
            same_bits(&dense_mv(&example.to_dense(), x), want),
            "dense reconstruction disagrees with the expected product"
        );
    }

    let mut instances: Vec<(Csr, Vec<f64>)> = expected
        .iter()
        .map(|(x, _)| (example.clone(), x.to_vec()))
        .collect();
    for _ in 0..20 {
        let a = Csr::random(&mut rng, 64, 0.3);
        let x = random_vec(&mut rng, a.cols);
        instances.push((a, x));
    }

    let mut runs = 0;
    for name in POSITIVES {
        let original = module(name);
        let reference = rewritten(name, None, "")?;
        let library = match name.split('_').next() {
            Some("csr") => Some(rewritten(name, Some("spmv_csr"), "cusparse_spmv")?),
            _ => None,
        };
        let datasets: Vec<(Json, Option<Vec<f64>>)> = match name.split('_').next() {
            Some("csr") => instances
                .iter()
                .map(|(a, x)| (csr_data(a, x), Some(dense_mv(&a.to_dense(), x))))
                .collect(),
            Some("jds") => instances
                .iter()
                .map(|(a, x)| {
                    (
                        jds_data(&Jds::from_csr(a), x),
                        Some(dense_mv(&a.to_dense(), x)),
                    )
                })
                .collect(),
            _ => (0..instances.len())
                .map(|_| (dataset(name, &mut rng), None))
                .collect(),
        };
        for (k, (data, oracle)) in datasets.iter().enumerate() {
            let before = completed(&original, data, Strategy::ExactVersion)?;
            let after = completed(&reference, data, Strategy::ExactVersion)?;
            ensure!(
                before.to_text() == after.to_text(),
                "{name} instance {k}: {} != {}",
                before.to_text(),
                after.to_text()
            );
            let got = match name.split('_').next() {
                Some("dot") => {
                    let n = data["n"].as_u64().unwrap_or(0) as usize;
                    let want = dense_dot(&floats(data, "x")[..n], &floats(data, "y")[..n]);
                    let Some(Val::F64(r)) = before.ret else {
                        return Err(format!("{name}: no result"));
                    };
                    ensure!(r.to_bits() == want.to_bits(), "{name}: {r} != {want}");
                    continue;
                }
                Some("gemm") => {
                    let dim = |k: &str| data[k].as_u64().unwrap_or(0) as usize;
                    let want = dense_gemm(
                        dim("n"),
                        dim("m"),
                        dim("p"),
                        &floats(data, "a"),
                        &floats(data, "b"),
                    );
                    let got = before.floats("c").unwrap_or_default().to_vec();
                    ensure!(same_bits(&got, &want), "{name}: {got:?} != {want:?}");
                    continue;
                }
                _ => before.floats("output").unwrap_or_default().to_vec(),
            };
            let oracle = oracle.as_ref().expect("sparse instances carry an oracle");
            ensure!(
                same_bits(&got, oracle),
                "{name} instance {k}: {got:?} != {oracle:?}"
            );
            if k < expected.len() {
                ensure!(same_bits(&got, &expected[k].1), "{name}: {got:?}");
            }
            if let Some(lib) = &library {
                let marshaled = completed(lib, data, Strategy::PageProtect)?;
                ensure!(
                    marshaled.to_text() == before.to_text(),
                    "{name} instance {k} through the marshaled harness"
                );
            }
            runs += 1;
        }
    }
    Ok(format!(
        "{} fixtures x {} instances bit-exact, {runs} sparse runs checked against the dense product",
        POSITIVES.len(),
        instances.len()
    ))
}

fn csr_bindings(a: &Csr, x: &[f64]) -> Bindings {
    Bindings::new()
        .with("rows", Value::Int(a.rows as i64))
        .with("row_ptr", Value::IntArray(a.row_ptr.clone()))
        .with("col_ind", Value::IntArray(a.col_ind.clone()))
        .with("val", Value::FloatArray(a.val.clone()))
        .with("x", Value::FloatArray(x.to_vec()))
        .with("output", Value::FloatArray(vec![0.0; a.rows]))
}

fn jds_bindings(j: &Jds, x: &[f64]) -> Bindings {
    Bindings::new()
        .with("rows", Value::Int(j.rows as i64))
        .with("perm", Value::IntArray(j.perm.clone()))
        .with("nzcnt", Value::IntArray(j.nzcnt.clone()))
        .with("jd_ptr", Value::IntArray(j.jd_ptr.clone()))
        .with("col_ind", Value::IntArray(j.col_ind.clone()))
        .with("val", Value::FloatArray(j.val.clone()))
        .with("x", Value::FloatArray(x.to_vec()))
        .with("output", Value::FloatArray(vec![0.0; j.rows]))
}

fn csr_jds_consistency() -> Outcome {
    let spec = spec();
    let csr_prog = spec.computation("spmv_csr").ok_or("no spmv_csr")?;
    let jds_prog = spec.computation("spmv_jds").ok_or("no spmv_jds")?;
    let (csr, jds) = (Csr::example(), Jds::example());
    let dense = [
        [1.0, 0.0, 1.0, 0.0, 0.0],
        [0.0, 2.0, 0.0, 2.0, 0.0],
        [0.0, -1.0, 3.0, 2.0, 0.0],
        [0.0, 0.0, 0.0, 2.0, 0.0],
        [0.0, 0.0, -1.0, 0.0, 1.0],
    ];
    let dense: Vec<Vec<f64>> = dense.iter().map(|r| r.to_vec()).collect();
    ensure!(
        csr.to_dense() == dense,
        "CSR arrays decode to {:?}",
        csr.to_dense()
    );
    ensure!(
        jds.to_dense(5) == dense,
        "JDS arrays decode to {:?}",
        jds.to_dense(5)
    );
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for k in 0..20 {
        let x = random_vec(&mut rng, 5);
        let a = interpret_what(csr_prog, &csr_bindings(&csr, &x)).map_err(|e| e.to_string())?;
        let b = interpret_what(jds_prog, &jds_bindings(&jds, &x)).map_err(|e| e.to_string())?;
        let (ya, yb) = (
            a.floats("output").unwrap_or_default(),
            b.floats("output").unwrap_or_default(),
        );
        ensure!(same_bits(ya, yb), "vector {k}: {ya:?} != {yb:?}");
        ensure!(
            same_bits(ya, &dense_mv(&dense, &x)),
            "vector {k} disagrees with the dense product"
        );
    }
    Ok("both formats decode to the same 5x5 matrix; products agree on 20 vectors".into())
}

fn backtracking() -> Outcome {
    let spec = spec();
    let d = detect_all(
        &module("backtrack"),
        &spec.computations,
        DetectOptions::default(),
    )
    .map_err(|e| e.to_string())?;
    ensure!(d.matches.len() == 1, "{} matches", d.matches.len());
    let hit = &d.matches[0];
    let fails = hit
        .trace
        .iter()
        .filter(|e| matches!(e, TraceEvent::Fail { .. }))
        .count();
    let backs = hit
        .trace
        .iter()
        .filter(|e| matches!(e, TraceEvent::Backtrack { .. }))
        .count();
    ensure!(
        fails >= 1 && backs >= 1,
        "{fails} failures, {backs} backtracks"
    );
    ensure!(
        replay(&hit.trace) == hit.solution,
        "replay differs from the solution"
    );
    Ok(format!(
        "{fails} failure(s), {backs} backtrack(s) in {} events; replay rebuilds all {} assignments",
        hit.trace.len(),
        hit.solution.len()
    ))
}

/// 1000 acquisitions of a page-aligned array, mutated before every
/// hundredth one starting at the 50th. Returns the counters before and
/// after releasing.
fn scripted_trace(strategy: Strategy) -> Result<(MarshalCounters, MarshalCounters), String> {
    let mut host = PageBuf::<f64>::from_slice(&vec![1.0; 2048]);
    let mut reg = MarshalRegistry::new();
    let id = reg.register(MarshalObject::new("x", strategy, HostCopy::default()));
    let mut version = 0u64;
    for k in 0..1000usize {
        if k % 100 == 50 {
            host[k] += 1.0;
            version += 1;
        }
        let obj = reg.get_mut(id).ok_or("object vanished")?;
        let copy = obj
            .acquire(&host, Some(version))
            .map_err(|e| e.to_string())?;
        ensure!(copy[..] == host[..], "stale copy at invocation {k}");
    }
    let before = reg.get_mut(id).ok_or("object vanished")?.counters();
    let report = reg.release_all();
    ensure!(report.failures.is_empty(), "{:?}", report.failures);
    Ok((before, report.stats[0].counters))
}

fn marshaling_contract() -> Outcome {
    let start = Instant::now();
    let want = MarshalCounters {
        n_construct: 1,
        n_update: 11,
        n_destruct: 0,
    };
    for strategy in [Strategy::ExactVersion, Strategy::PageProtect] {
        let (before, after) = scripted_trace(strategy)?;
        ensure!(before == want, "{strategy}: {before}");
        ensure!(
            after
                == MarshalCounters {
                    n_destruct: 1,
                    ..want
                },
            "{strategy} after release: {after}"
        );
    }
    let (naive, _) = scripted_trace(Strategy::Naive)?;
    ensure!(naive.n_update == 1000, "naive: {naive}");
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(5), "took {elapsed:?}");
    Ok(format!(
        "tracked {want}, naive {naive}, {}x fewer transfers, {elapsed:.2?}",
        naive.n_update / want.n_update
    ))
}

const DRIVER: &str = "
func @drive(%rows: i64, %row_ptr: ptr i64, %col_ind: ptr i64, %val: ptr f64, %x: ptr f64, %output: ptr f64) -> void {
entry:
  br loop
loop:
  %k = phi [0, entry], [%k.next, next]
  %more = icmp.slt %k, 100
  condbr %more, body, done
body:
  %hit = icmp.eq %k, 60
  condbr %hit, mutate, invoke
mutate:
  %p = elemptr %col_ind, 9
  store 3, %p
  br invoke
invoke:
  call @cusparse_spmv(%rows, %output, %row_ptr, %val, %x, %col_ind)
  br next
next:
  %k.next = add %k, 1
  br loop
done:
  ret
}
";

fn cached_invariant_check() -> Outcome {
    let example = Csr::example();
    for strategy in [
        Strategy::ExactVersion,
        Strategy::PageProtect,
        Strategy::Checksum,
    ] {
        let mut col_ind = PageBuf::from_slice(&example.col_ind);
        let mut obj = MarshalObject::new("cols", strategy, MaxPlusOne);
        let mut version = 0u64;
        for k in 0..100 {
            if k == 60 {
                col_ind[9] = 6;
                version += 1;
            }
            let cols =
                cached_invariant(&mut obj, &col_ind, Some(version)).map_err(|e| e.to_string())?;
            ensure!(
                cols == if k < 60 { 5 } else { 7 },
                "{strategy}: cols {cols} at invocation {k}"
            );
        }
        ensure!(
            obj.counters().n_update == 2,
            "{strategy}: {}",
            obj.counters()
        );
    }

    let driver = parse_module(DRIVER).map_err(|e| e.to_string())?;
    let x = [1.0, 2.0, 3.0, 4.0, 5.0];
    let mut mutated = example.clone();
    mutated.col_ind[9] = 3;
    let want = dense_mv(&mutated.to_dense(), &x);
    for strategy in [Strategy::ExactVersion, Strategy::PageProtect] {
        let reg = HarnessRegistry::from_spec(&spec(), strategy).map_err(|e| e.to_string())?;
        let mut it = Interpreter::new(&driver).with_harnesses(reg);
        let out = run_with_data(&mut it, &driver.functions[0], &csr_data(&example, &x))
            .map_err(|e| e.to_string())?;
        let got = out.floats("output").unwrap_or_default();
        ensure!(same_bits(got, &want), "{strategy}: {got:?} != {want:?}");
        let stats = it
            .harnesses
            .get_mut("cusparse_spmv")
            .ok_or("no cusparse_spmv harness")?
            .stats();
        let cols = stats
            .iter()
            .find(|s| s.region == "cusparse_spmv.cols")
            .ok_or("no cols object")?
            .counters;
        ensure!(
            cols.n_construct == 1 && cols.n_update == 2,
            "{strategy}: cols {cols}"
        );
    }
    Ok("cols = 5, recomputed twice in 100 invocations with one mutation (directly and through the harness)".into())
}

fn round_trips() -> Outcome {
    for seed in 0..200 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_module(&mut rng);
        let text = print_module(&m);
        let back = parse_module(&text).map_err(|e| format!("seed {seed}: {e}"))?;
        ensure!(
            back == m && print_module(&back) == text,
            "module seed {seed}"
        );
        let p = random_what(&mut rng);
        let text = p.to_string();
        let back = parse_what(&text).map_err(|e| format!("seed {seed}: {e}"))?;
        ensure!(
            back == p && back.to_string() == text,
            "computation seed {seed}"
        );
    }
    for name in all_fixtures() {
        let m = module(name);
        ensure!(
            parse_module(&print_module(&m)).ok().as_ref() == Some(&m),
            "{name} does not survive printing"
        );
    }
    let spec = spec();
    let text = spec.to_string();
    ensure!(
        parse_spec(&text).ok().as_ref() == Some(&spec),
        "the specification does not survive printing"
    );
    let first = golden_files();
    ensure!(first == golden_files(), "generation differs between runs");
    for (name, text) in &first {
        let golden =
            std::fs::read_to_string(golden_path(name)).map_err(|e| format!("{name}: {e}"))?;
        ensure!(&golden == text, "{name} differs from its golden copy");
    }
    Ok(format!(
        "200 random modules and computations, {} fixtures, the specification and {} golden files",
        all_fixtures().len(),
        first.len()
    ))
}

fn normalization_soundness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut runs = 0;
    for name in all_fixtures() {
        let m = module(name);
        let n = normalize(&m);
        ensure!(verify(&n).is_empty(), "{name}: {:?}", verify(&n));
        ensure!(
            print_module(&normalize(&n)) == print_module(&n),
            "{name}: not idempotent"
        );
        for _ in 0..20 {
            let data = dataset(name, &mut rng);
            let (a, b) = (
                observe(&m, &data, Strategy::ExactVersion)?,
                observe(&n, &data, Strategy::ExactVersion)?,
            );
            ensure!(a == b, "{name} on {data}: {a} != {b}");
            runs += 1;
        }
    }
    for seed in 0..100 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_module(&mut rng);
        let n = normalize(&m);
        ensure!(
            print_module(&normalize(&n)) == print_module(&n),
            "random module {seed}: not idempotent"
        );
        let data = random_inputs(&mut rng);
        ensure!(
            observe(&m, &data, Strategy::ExactVersion)?
                == observe(&n, &data, Strategy::ExactVersion)?,
            "random module {seed} on {data}"
        );
    }
    Ok(format!(
        "{runs} fixture runs and 100 random modules unchanged by normalization, which is idempotent"
    ))
}

type Criterion = (&'static str, &'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 8] = [
        ("AC1", "detection", detection),
        ("AC2", "oracle equivalence", oracle_equivalence),
        ("AC3", "CSR and JDS agree", csr_jds_consistency),
        ("AC4", "backtracking trace", backtracking),
        ("AC5", "marshaling counters", marshaling_contract),
        ("AC6", "cached invariant", cached_invariant_check),
        ("AC7", "determinism and round trips", round_trips),
        ("AC8", "normalization soundness", normalization_soundness),
    ];
    let mut failed = 0;
    for (id, title, check) in criteria {
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|panic| {
            Err(panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match result {
            Ok(detail) => println!("{id} PASS {title}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("{id} FAIL {title}: {why}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
