use std::ffi::{CStr, CString};
use std::ptr;

use lsgen_ffi::*;

fn parse(text: &str) -> *mut LsgenFormula {
    let text = CString::new(text).unwrap();
    let mut f = ptr::null_mut();
    assert_eq!(unsafe { lsgen_formula_parse(text.as_ptr(), &mut f) }, LsgenStatus::Ok);
    f
}

fn last_error() -> String {
    let p = lsgen_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn parse_and_count() {
    let f = parse("p cnf 3 2\n1 -2 0\n2 3 0\n");
    unsafe {
        assert_eq!(lsgen_formula_num_vars(f), 3);
        assert_eq!(lsgen_formula_num_clauses(f), 2);
        let mut unsat = 99;
        assert_eq!(lsgen_count_unsat(f, [0u8, 1, 0].as_ptr(), 3, &mut unsat), LsgenStatus::Ok);
        assert_eq!(unsat, 1);
        let (mut make, mut brk) = (0, 0);
        assert_eq!(lsgen_conflict_score(f, [0u8, 1, 0].as_ptr(), 3, 1, &mut make, &mut brk), LsgenStatus::Ok);
        assert_eq!((make, brk), (1, 0));
        lsgen_formula_free(f);
    }
}

#[test]
fn errors_are_reported() {
    let bad = CString::new("p cnf 1 1\n2 0\n").unwrap();
    let mut f = ptr::null_mut();
    unsafe {
        assert_eq!(lsgen_formula_parse(bad.as_ptr(), &mut f), LsgenStatus::ParseError);
        assert!(f.is_null());
        assert!(!last_error().is_empty());
        assert_eq!(lsgen_formula_parse(ptr::null(), &mut f), LsgenStatus::NullPointer);
        assert!(last_error().contains("text"));

        let f = parse("p cnf 2 1\n1 2 0\n");
        let mut unsat = 0;
        assert_eq!(lsgen_count_unsat(f, [1u8].as_ptr(), 1, &mut unsat), LsgenStatus::InvalidArgument);
        let (mut m, mut b) = (0, 0);
        assert_eq!(lsgen_conflict_score(f, [1u8, 1].as_ptr(), 2, 3, &mut m, &mut b), LsgenStatus::InvalidArgument);
        lsgen_formula_free(f);
        lsgen_formula_free(ptr::null_mut());
        assert_eq!(lsgen_formula_num_vars(ptr::null()), 0);
    }
}

#[test]
fn encode_walksat_and_solve() {
    let scheme = CString::new("coloring").unwrap();
    let inst = CString::new("p 3 3 u\n1 2\n2 3\n1 3\n").unwrap();
    let (mut f, mut vm, mut bound) = (ptr::null_mut(), ptr::null_mut(), 0i64);
    unsafe {
        assert_eq!(lsgen_encode(scheme.as_ptr(), inst.as_ptr(), 3, &mut f, &mut vm, &mut bound), LsgenStatus::Ok);
        assert_eq!(bound, 3);
        assert_eq!(lsgen_formula_num_clauses(f), 12);
        let json: serde_json::Value = serde_json::from_str(CStr::from_ptr(vm).to_str().unwrap()).unwrap();
        assert!(json.to_string().contains("\"x\""));
        lsgen_string_free(vm);

        let n = lsgen_formula_num_vars(f) as usize;
        let mut vals = vec![0u8; n];
        let mut found = false;
        assert_eq!(lsgen_walksat(f, 1, 100_000, 5.0, vals.as_mut_ptr(), n, &mut found), LsgenStatus::Ok);
        assert!(found);
        let mut unsat = 1;
        assert_eq!(lsgen_count_unsat(f, vals.as_ptr(), n, &mut unsat), LsgenStatus::Ok);
        assert_eq!(unsat, 0);

        let mut model = vec![0u8; n];
        let mut res = LsgenSolveResult::Timeout;
        let phases = vec![0u8; n];
        assert_eq!(lsgen_mini_solve(f, phases.as_ptr(), n, 5.0, model.as_mut_ptr(), &mut res), LsgenStatus::Ok);
        assert_eq!(res, LsgenSolveResult::Sat);
        assert_eq!(lsgen_count_unsat(f, model.as_ptr(), n, &mut unsat), LsgenStatus::Ok);
        assert_eq!(unsat, 0);
        lsgen_formula_free(f);

        let (mut g, mut vm2) = (ptr::null_mut(), ptr::null_mut());
        assert_eq!(lsgen_encode(scheme.as_ptr(), inst.as_ptr(), 2, &mut g, &mut vm2, ptr::null_mut()), LsgenStatus::Ok);
        let m = lsgen_formula_num_vars(g) as usize;
        let mut out = vec![0u8; m];
        assert_eq!(lsgen_mini_solve(g, vec![0u8; m].as_ptr(), m, 5.0, out.as_mut_ptr(), &mut res), LsgenStatus::Ok);
        assert_eq!(res, LsgenSolveResult::Unsat);
        lsgen_formula_free(g);
        lsgen_string_free(vm2);

        let other = CString::new("sudoku").unwrap();
        assert_eq!(lsgen_encode(other.as_ptr(), inst.as_ptr(), -1, &mut g, &mut vm2, ptr::null_mut()), LsgenStatus::InvalidArgument);
        let junk = CString::new("not a graph").unwrap();
        assert_eq!(lsgen_encode(scheme.as_ptr(), junk.as_ptr(), -1, &mut g, &mut vm2, ptr::null_mut()), LsgenStatus::EncodeError);
    }
}

#[test]
fn significance_levels() {
    assert_eq!(lsgen_significance(10.0, 5.0), LsgenSignificance::Better);
    assert_eq!(lsgen_significance(5.0, 10.0), LsgenSignificance::Worse);
    assert_eq!(lsgen_significance(5.0, 5.1), LsgenSignificance::NoChange);
}

#[test]
fn header_is_current() {
    let h = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/lsgen.h")).unwrap();
    for name in ["lsgen_formula_parse", "lsgen_encode", "lsgen_mini_solve", "lsgen_last_error", "typedef struct LsgenFormula LsgenFormula"] {
        assert!(h.contains(name), "{name}");
    }
}
