use thiserror::Error;

use crate::what::{infer_interface, Expr, ParamKind, WhatProgram};

use super::HowProgram;

/// A reference from a library description that does not resolve.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HowDiagnostic {
    #[error("harness `{harness}` implements unknown computation `{computation}`")]
    UnknownComputation {
        harness: String,
        computation: String,
    },
    #[error("harness `{harness}` uses undefined marshaling class `{class}`")]
    UnknownClass { harness: String, class: String },
    #[error("harness `{harness}` marshals `{array}`, which is not an array of `{computation}`")]
    UnknownArray {
        harness: String,
        computation: String,
        array: String,
    },
    #[error("extent of `{binding}` in harness `{harness}` refers to `{name}`, which is neither a scalar argument nor an earlier binding")]
    OpenExtent {
        harness: String,
        binding: String,
        name: String,
    },
    #[error("harness `{harness}` declares `{name}` twice")]
    DuplicateName { harness: String, name: String },
}

fn names(e: &Expr, out: &mut Vec<String>) {
    match e {
        Expr::Name(n) => out.push(n.clone()),
        Expr::Const(_) => {}
        Expr::Addr(a) => {
            out.push(a.base.clone());
            names(&a.index, out);
        }
        Expr::Add(a, b) | Expr::Mul(a, b) => {
            names(a, out);
            names(b, out);
        }
    }
}

/// Checks every cross reference of `how` against the computations.
pub fn validate_how(how: &HowProgram, computations: &[WhatProgram]) -> Vec<HowDiagnostic> {
    let mut diags = Vec::new();
    for h in &how.harnesses {
        let Some(comp) = computations.iter().find(|c| c.name == h.implements) else {
            diags.push(HowDiagnostic::UnknownComputation {
                harness: h.name.clone(),
                computation: h.implements.clone(),
            });
            continue;
        };
        let params = infer_interface(comp).map(|s| s.params).unwrap_or_default();
        let kind_of = |n: &str| params.iter().find(|p| p.name == n).map(|p| p.kind);

        let mut declared: Vec<&str> = Vec::new();
        for v in &h.persistent_vars {
            if declared.contains(&v.name.as_str()) {
                diags.push(HowDiagnostic::DuplicateName {
                    harness: h.name.clone(),
                    name: v.name.clone(),
                });
            }
            declared.push(&v.name);
        }

        let mut bound: Vec<&str> = Vec::new();
        for b in &h.bindings {
            if how.class(&b.class).is_none() {
                diags.push(HowDiagnostic::UnknownClass {
                    harness: h.name.clone(),
                    class: b.class.clone(),
                });
            }
            if !kind_of(&b.array).is_some_and(ParamKind::is_array) {
                diags.push(HowDiagnostic::UnknownArray {
                    harness: h.name.clone(),
                    computation: comp.name.clone(),
                    array: b.array.clone(),
                });
            }
            let mut used = Vec::new();
            names(&b.extent, &mut used);
            for n in used {
                let scalar = kind_of(&n) == Some(ParamKind::ScalarInt);
                if !scalar && !bound.contains(&n.as_str()) {
                    diags.push(HowDiagnostic::OpenExtent {
                        harness: h.name.clone(),
                        binding: b.out_name.clone(),
                        name: n,
                    });
                }
            }
            if declared.contains(&b.out_name.as_str()) || kind_of(&b.out_name).is_some() {
                diags.push(HowDiagnostic::DuplicateName {
                    harness: h.name.clone(),
                    name: b.out_name.clone(),
                });
            }
            declared.push(&b.out_name);
            bound.push(&b.out_name);
        }
    }
    diags
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spec::parse_spec;

    const BASE: &str = "COMPUTATION spmv_csr forall (0 <= i < rows) { output[i] = dot(row_ptr[i] <= j < row_ptr[i+1]) val[j] * x[col_ind[j]]; }\n\
                        INPUT ReadLast { out = in[size - 1]; }\nINPUT ReadMax { }\n";

    fn diags(extra: &str) -> Vec<HowDiagnostic> {
        let spec = parse_spec(&format!("{BASE}{extra}")).unwrap();
        validate_how(&spec.how, &spec.computations)
    }

    #[test]
    fn valid_bindings_chain() {
        assert!(diags(
            "HARNESS h IMPLEMENTS spmv_csr {} Marshaling int nnz = ReadLast of row_ptr [0 .. rows + 1] int cols = ReadMax of col_ind [0 .. nnz]"
        )
        .is_empty());
    }

    #[test]
    fn unknown_references() {
        assert_eq!(
            diags("HARNESS h IMPLEMENTS gemv {}"),
            [HowDiagnostic::UnknownComputation {
                harness: "h".into(),
                computation: "gemv".into()
            }]
        );
        assert_eq!(
            diags("HARNESS h IMPLEMENTS spmv_csr {} Marshaling int n = Nope of val [0 .. rows]"),
            [HowDiagnostic::UnknownClass {
                harness: "h".into(),
                class: "Nope".into()
            }]
        );
        assert_eq!(
            diags(
                "HARNESS h IMPLEMENTS spmv_csr {} Marshaling int n = ReadMax of rows [0 .. rows]"
            ),
            [HowDiagnostic::UnknownArray {
                harness: "h".into(),
                computation: "spmv_csr".into(),
                array: "rows".into()
            }]
        );
    }

    #[test]
    fn extent_must_be_closed() {
        assert_eq!(
            diags("HARNESS h IMPLEMENTS spmv_csr {} Marshaling int cols = ReadMax of col_ind [0 .. nnz]"),
            [HowDiagnostic::OpenExtent {
                harness: "h".into(),
                binding: "cols".into(),
                name: "nnz".into()
            }]
        );
        assert!(matches!(
            diags(
                "HARNESS h IMPLEMENTS spmv_csr {} Marshaling int n = ReadMax of col_ind [0 .. val]"
            )[0],
            HowDiagnostic::OpenExtent { .. }
        ));
    }

    #[test]
    fn duplicate_names() {
        assert!(matches!(
            diags("HARNESS h IMPLEMENTS spmv_csr {} PersistentVariables int a int a")[0],
            HowDiagnostic::DuplicateName { .. }
        ));
        assert!(matches!(
            diags("HARNESS h IMPLEMENTS spmv_csr {} Marshaling int rows = ReadLast of row_ptr [0 .. rows]")[0],
            HowDiagnostic::DuplicateName { .. }
        ));
    }
}
