//! Fixture loading, sparse matrix generators and dense reference results
//! shared by the integration tests.

#![allow(dead_code)]

pub mod generate;

use std::path::PathBuf;

use lilac_core::ir::{parse_module, Module};
use lilac_core::{parse_spec, SpecFile};
use rand::Rng;
use serde_json::{json, Value as Json};

pub const POSITIVES: [&str; 12] = [
    "dot_c",
    "dot_cpp",
    "dot_fortran",
    "csr_c",
    "csr_cpp",
    "csr_fortran",
    "jds_c",
    "jds_cpp",
    "jds_fortran",
    "gemm_c",
    "gemm_cpp",
    "gemm_fortran",
];

pub const NEGATIVES: [&str; 5] = [
    "saxpy",
    "dot_extra_addend",
    "dot_icmp_ne",
    "csr_direct_x",
    "gemm_wrong_stride",
];

pub const OTHERS: [&str; 7] = [
    "csr_side_effect",
    "backtrack",
    "irreducible",
    "infinite_loop",
    "dead_store",
    "cg_like",
    "two_dots",
];

pub fn all_fixtures() -> Vec<&'static str> {
    POSITIVES
        .iter()
        .chain(&NEGATIVES)
        .chain(&OTHERS)
        .copied()
        .collect()
}

/// Computation each positive fixture implements.
pub fn expected_computation(fixture: &str) -> &'static str {
    match fixture.split('_').next() {
        Some("dot") => "dotproduct",
        Some("csr") => "spmv_csr",
        Some("jds") => "spmv_jds",
        Some("gemm") => "gemm",
        _ => panic!("no computation for {fixture}"),
    }
}

pub fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn fixture_path(name: &str) -> PathBuf {
    let p = fixture_dir().join(name);
    if p.extension().is_some() {
        p
    } else {
        p.with_extension("lir")
    }
}

pub fn fixture_text(name: &str) -> String {
    let p = fixture_path(name);
    std::fs::read_to_string(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

pub fn module(name: &str) -> Module {
    parse_module(&fixture_text(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub fn spec_text() -> String {
    fixture_text("standard.lilac")
}

pub fn spec() -> SpecFile {
    parse_spec(&spec_text()).expect("shipped spec parses")
}

/// Compares a generated file with its golden copy. Setting `UPDATE_GOLDEN`
/// rewrites the golden file instead.
pub fn check_golden(name: &str, actual: &str) -> Result<(), String> {
    let path = golden_path(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::create_dir_all(path.parent().expect("has parent")).map_err(|e| e.to_string())?;
        std::fs::write(&path, actual).map_err(|e| e.to_string())?;
        return Ok(());
    }
    let expected =
        std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    if expected == actual {
        Ok(())
    } else {
        Err(format!(
            "{} differs from the generated text",
            path.display()
        ))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Csr {
    pub rows: usize,
    pub cols: usize,
    pub row_ptr: Vec<i64>,
    pub col_ind: Vec<i64>,
    pub val: Vec<f64>,
}

impl Csr {
    /// The five by five example matrix used throughout the tests.
    pub fn example() -> Csr {
        Csr {
            rows: 5,
            cols: 5,
            row_ptr: vec![0, 2, 4, 7, 8, 10],
            col_ind: vec![0, 2, 1, 3, 1, 2, 3, 3, 2, 4],
            val: vec![1.0, 1.0, 2.0, 2.0, -1.0, 3.0, 2.0, 2.0, -1.0, 1.0],
        }
    }

    /// Random matrix with at most `max_n` rows and columns and at most
    /// `max_density` of its cells filled. Stored values are never zero and
    /// columns are sorted within each row.
    pub fn random(rng: &mut impl Rng, max_n: usize, max_density: f64) -> Csr {
        let rows = rng.gen_range(1..=max_n);
        let cols = rng.gen_range(1..=max_n);
        Csr::random_shape(rng, rows, cols, max_density)
    }

    pub fn random_shape(rng: &mut impl Rng, rows: usize, cols: usize, max_density: f64) -> Csr {
        let density = rng.gen_range(0.0..=max_density);
        let mut row_ptr = vec![0];
        let mut col_ind = Vec::new();
        let mut val = Vec::new();
        for _ in 0..rows {
            for c in 0..cols {
                if rng.gen_bool(density) {
                    col_ind.push(c as i64);
                    val.push(nonzero(rng));
                }
            }
            row_ptr.push(col_ind.len() as i64);
        }
        Csr {
            rows,
            cols,
            row_ptr,
            col_ind,
            val,
        }
    }

    pub fn nnz(&self) -> usize {
        self.val.len()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.cols]; self.rows];
        for (r, row) in d.iter_mut().enumerate() {
            for k in self.row_ptr[r] as usize..self.row_ptr[r + 1] as usize {
                row[self.col_ind[k] as usize] = self.val[k];
            }
        }
        d
    }
}

pub fn nonzero(rng: &mut impl Rng) -> f64 {
    let v: f64 = rng.gen_range(0.0625..4.0);
    if rng.gen_bool(0.5) {
        -v
    } else {
        v
    }
}

pub fn random_vec(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect()
}

/// Jagged diagonal storage: rows sorted by decreasing length, `perm[i]` is
/// the sorted position of row `i`, diagonal `j` holds the `j`-th entry of
/// every row that has one, in sorted order.
#[derive(Debug, Clone, PartialEq)]
pub struct Jds {
    pub rows: usize,
    pub perm: Vec<i64>,
    pub nzcnt: Vec<i64>,
    pub jd_ptr: Vec<i64>,
    pub col_ind: Vec<i64>,
    pub val: Vec<f64>,
}

impl Jds {
    pub fn example() -> Jds {
        Jds {
            rows: 5,
            perm: vec![1, 2, 0, 4, 3],
            nzcnt: vec![3, 2, 2, 2, 1],
            jd_ptr: vec![0, 5, 9, 10],
            col_ind: vec![1, 0, 1, 2, 3, 2, 2, 3, 4, 3],
            val: vec![-1.0, 1.0, 2.0, -1.0, 2.0, 3.0, 1.0, 2.0, 1.0, 2.0],
        }
    }

    pub fn from_csr(a: &Csr) -> Jds {
        let len = |r: usize| (a.row_ptr[r + 1] - a.row_ptr[r]) as usize;
        let mut order: Vec<usize> = (0..a.rows).collect();
        order.sort_by_key(|&r| std::cmp::Reverse(len(r)));
        let mut perm = vec![0; a.rows];
        for (pos, &r) in order.iter().enumerate() {
            perm[r] = pos as i64;
        }
        let nzcnt: Vec<i64> = order.iter().map(|&r| len(r) as i64).collect();
        let width = order.first().map_or(0, |&r| len(r));
        let mut jd_ptr = vec![0];
        let mut col_ind = Vec::new();
        let mut val = Vec::new();
        for j in 0..width {
            for &r in &order {
                if j < len(r) {
                    let k = a.row_ptr[r] as usize + j;
                    col_ind.push(a.col_ind[k]);
                    val.push(a.val[k]);
                }
            }
            jd_ptr.push(col_ind.len() as i64);
        }
        Jds {
            rows: a.rows,
            perm,
            nzcnt,
            jd_ptr,
            col_ind,
            val,
        }
    }

    pub fn to_dense(&self, cols: usize) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; cols]; self.rows];
        for (i, row) in d.iter_mut().enumerate() {
            let p = self.perm[i];
            for j in 0..self.nzcnt[p as usize] {
                let k = (self.jd_ptr[j as usize] + p) as usize;
                row[self.col_ind[k] as usize] = self.val[k];
            }
        }
        d
    }
}

/// Row-by-row product skipping zero cells, so sums run in column order.
pub fn dense_mv(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    a.iter()
        .map(|row| {
            row.iter()
                .zip(x)
                .filter(|(v, _)| **v != 0.0)
                .fold(0.0, |s, (v, x)| s + v * x)
        })
        .collect()
}

pub fn dense_dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |s, (x, y)| s + x * y)
}

pub fn dense_gemm(n: usize, m: usize, p: usize, a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut c = vec![0.0; n * m];
    for i in 0..n {
        for j in 0..m {
            c[i * m + j] = (0..p).fold(0.0, |s, k| s + a[i * p + k] * b[k * m + j]);
        }
    }
    c
}

pub fn csr_data(a: &Csr, x: &[f64]) -> Json {
    json!({
        "rows": a.rows,
        "row_ptr": a.row_ptr,
        "col_ind": a.col_ind,
        "val": a.val,
        "x": x,
        "output": vec![0.0; a.rows],
    })
}

pub fn jds_data(j: &Jds, x: &[f64]) -> Json {
    json!({
        "rows": j.rows,
        "perm": j.perm,
        "nzcnt": j.nzcnt,
        "jd_ptr": j.jd_ptr,
        "col_ind": j.col_ind,
        "val": j.val,
        "x": x,
        "output": vec![0.0; j.rows],
    })
}

/// A random input for the function in `fixture`, named by parameter.
pub fn dataset(fixture: &str, rng: &mut impl Rng) -> Json {
    let kind = fixture.split('_').next().unwrap_or(fixture);
    match (kind, fixture) {
        (_, "saxpy") => {
            let n = rng.gen_range(0..=24);
            json!({"a": rng.gen_range(-2.0..2.0), "x": random_vec(rng, n), "y": random_vec(rng, n), "n": n})
        }
        (_, "irreducible") => json!({"n": rng.gen_range(-5..=40)}),
        (_, "infinite_loop") => json!({"n": rng.gen_range(-3..=30)}),
        (_, "dead_store") => {
            let n = rng.gen_range(1..=20);
            json!({"a": random_vec(rng, n), "n": n})
        }
        (_, "two_dots") => {
            let n = rng.gen_range(0..=24);
            json!({"x": random_vec(rng, n), "y": random_vec(rng, n), "z": random_vec(rng, n), "n": n})
        }
        (_, "cg_like") => {
            let n = rng.gen_range(1..=16);
            let a = Csr::random_shape(rng, n, n, 0.3);
            json!({
                "rows": n, "row_ptr": a.row_ptr, "col_ind": a.col_ind, "val": a.val,
                "p": random_vec(rng, n), "q": vec![0.0; n], "r": random_vec(rng, n),
            })
        }
        ("dot", _) => {
            let n = rng.gen_range(0..=32);
            json!({"x": random_vec(rng, n), "y": random_vec(rng, n), "n": n})
        }
        ("csr" | "backtrack", _) => {
            let a = Csr::random(rng, 24, 0.3);
            let x = random_vec(rng, a.cols.max(a.nnz()));
            let mut d = csr_data(&a, &x);
            if fixture == "csr_side_effect" {
                d["seen"] = json!(vec![0.0; a.cols]);
            }
            d
        }
        ("jds", _) => {
            let a = Csr::random(rng, 24, 0.3);
            let x = random_vec(rng, a.cols);
            jds_data(&Jds::from_csr(&a), &x)
        }
        ("gemm", _) => {
            let (n, m, p) = (
                rng.gen_range(0..=6),
                rng.gen_range(0..=6),
                rng.gen_range(0..=6),
            );
            json!({
                "n": n, "m": m, "p": p,
                "a": random_vec(rng, n * p),
                "b": random_vec(rng, p * m.max(p)),
                "c": vec![0.0; n * m],
            })
        }
        _ => panic!("no dataset generator for {fixture}"),
    }
}

/// Every golden file under `fixtures/golden`, with its freshly generated
/// contents.
pub fn golden_files() -> Vec<(&'static str, String)> {
    use lilac_core::analysis::normalize;
    use lilac_core::harnessgen::gen_named;
    use lilac_core::ir::print_module;
    use lilac_core::matcher::{detect_all, DetectOptions};
    use lilac_core::rewrite::{reference_callee, rewrite_module};

    let spec = spec();
    let normalized = |name: &str| print_module(&normalize(&module(name)));
    let rewritten = |name: &str| {
        let r = rewrite_module(
            &module(name),
            &spec.computations,
            DetectOptions::default(),
            reference_callee,
        )
        .expect("rewrite runs");
        print_module(&r.module)
    };
    let d = detect_all(
        &module("backtrack"),
        &spec.computations,
        DetectOptions::default(),
    )
    .expect("detection runs");
    let records: Vec<Json> = d.matches.iter().map(|m| m.to_json(true)).collect();
    vec![
        ("csr_c.normalized.lir", normalized("csr_c")),
        ("csr_fortran.normalized.lir", normalized("csr_fortran")),
        ("csr_c.rewritten.lir", rewritten("csr_c")),
        ("cg_like.rewritten.lir", rewritten("cg_like")),
        (
            "cusparse_spmv.gen.cpp",
            gen_named(&spec.how, &spec.computations, "cusparse_spmv").expect("harness generates"),
        ),
        (
            "backtrack.match.json",
            serde_json::to_string_pretty(&records).expect("serializes") + "\n",
        ),
    ]
}

pub fn golden_path(name: &str) -> PathBuf {
    fixture_dir().join("golden").join(name)
}
