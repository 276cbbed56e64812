//! Exercises the C ABI from Rust: round trips, error codes, determinism,
//! and ownership discipline for every exported entry point.

use std::ffi::{c_char, c_int, CStr, CString};
use std::ptr;

use coevo_ffi::*;

fn cstring(text: &str) -> CString {
    CString::new(text).expect("test strings contain no NUL")
}

fn take_string(ptr: *mut c_char) -> String {
    assert!(!ptr.is_null(), "expected an output string");
    let text = unsafe { CStr::from_ptr(ptr) }
        .to_str()
        .expect("output strings are UTF-8")
        .to_string();
    unsafe { coevo_string_free(ptr) };
    text
}

fn last_error() -> String {
    let ptr = coevo_last_error();
    assert!(!ptr.is_null(), "expected an error message");
    unsafe { CStr::from_ptr(ptr) }
        .to_str()
        .expect("error messages are UTF-8")
        .to_string()
}

fn uniform_generator_json() -> String {
    serde_json::json!({
        "version": 1,
        "root": { "node": "uniform_square" }
    })
    .to_string()
}

fn generate_instance(n: usize, seed: u64, kind: &str) -> *mut CoevoInstance {
    let gen_json = cstring(&uniform_generator_json());
    let kind = cstring(kind);
    let mut handle: *mut CoevoInstance = ptr::null_mut();
    let code = unsafe {
        coevo_instance_generate(gen_json.as_ptr(), n, seed, kind.as_ptr(), &mut handle)
    };
    assert_eq!(code, COEVO_OK, "generate failed: {}", last_error());
    assert!(!handle.is_null());
    handle
}

#[test]
fn version_is_a_static_string() {
    let ptr = coevo_version();
    assert!(!ptr.is_null());
    let text = unsafe { CStr::from_ptr(ptr) }.to_str().unwrap();
    assert_eq!(text, env!("CARGO_PKG_VERSION"));
}

#[test]
fn instance_generate_to_json_parse_round_trip() {
    let handle = generate_instance(12, 7, "tsp");

    let mut n = 0usize;
    assert_eq!(unsafe { coevo_instance_size(handle, &mut n) }, COEVO_OK);
    assert_eq!(n, 12);

    let mut json_out: *mut c_char = ptr::null_mut();
    assert_eq!(
        unsafe { coevo_instance_to_json(handle, &mut json_out) },
        COEVO_OK
    );
    let json = take_string(json_out);

    let reparsed_input = cstring(&json);
    let mut reparsed: *mut CoevoInstance = ptr::null_mut();
    assert_eq!(
        unsafe { coevo_instance_parse_json(reparsed_input.as_ptr(), &mut reparsed) },
        COEVO_OK
    );
    let mut reparsed_json: *mut c_char = ptr::null_mut();
    assert_eq!(
        unsafe { coevo_instance_to_json(reparsed, &mut reparsed_json) },
        COEVO_OK
    );
    assert_eq!(take_string(reparsed_json), json);

    unsafe {
        coevo_instance_free(handle);
        coevo_instance_free(reparsed);
    }
}

#[test]
fn op_instances_carry_prizes_and_budget() {
    let handle = generate_instance(10, 3, "op");
    let mut json_out: *mut c_char = ptr::null_mut();
    assert_eq!(
        unsafe { coevo_instance_to_json(handle, &mut json_out) },
        COEVO_OK
    );
    let parsed: serde_json::Value = serde_json::from_str(&take_string(json_out)).unwrap();
    assert_eq!(parsed["kind"], "op");
    assert_eq!(parsed["prizes"].as_array().unwrap().len(), 10);
    assert!(parsed["max_len"].as_f64().unwrap() > 0.0);
    unsafe { coevo_instance_free(handle) };
}

#[test]
fn null_arguments_set_code_one_and_a_message() {
    let mut handle: *mut CoevoInstance = ptr::null_mut();
    let code = unsafe { coevo_instance_parse_json(ptr::null(), &mut handle) };
    assert_eq!(code, COEVO_ERR_ARG);
    assert!(last_error().contains("json"));

    let json = cstring("{}");
    let code = unsafe { coevo_instance_parse_json(json.as_ptr(), ptr::null_mut()) };
    assert_eq!(code, COEVO_ERR_ARG);
    assert!(last_error().contains("out"));

    let task = cstring("tsp_gls");
    let mut out: *mut c_char = ptr::null_mut();
    let code = unsafe {
        coevo_solve(task.as_ptr(), ptr::null(), ptr::null(), 1, 0, 0, 0, &mut out)
    };
    assert_eq!(code, COEVO_ERR_ARG);
    assert!(last_error().contains("instance"));
}

#[test]
fn malformed_json_reports_parse_code() {
    let junk = cstring("this is not json");
    let mut handle: *mut CoevoInstance = ptr::null_mut();
    let code = unsafe { coevo_instance_parse_json(junk.as_ptr(), &mut handle) };
    assert_eq!(code, COEVO_ERR_PARSE);
    assert!(handle.is_null());
    assert!(!last_error().is_empty());
}

#[test]
fn invalid_program_reports_validation_code() {
    let bad = serde_json::json!({
        "version": 1,
        "root": { "node": "gaussian_clusters", "k": 0, "spread": 0.1 }
    })
    .to_string();
    let gen_json = cstring(&bad);
    let kind = cstring("tsp");
    let mut handle: *mut CoevoInstance = ptr::null_mut();
    let code = unsafe {
        coevo_instance_generate(gen_json.as_ptr(), 10, 1, kind.as_ptr(), &mut handle)
    };
    assert_eq!(code, COEVO_ERR_VALIDATION);
    assert!(last_error().contains("invalid generator"));
}

#[test]
fn unknown_task_and_kind_are_argument_errors() {
    let gen_json = cstring(&uniform_generator_json());
    let kind = cstring("vrp");
    let mut handle: *mut CoevoInstance = ptr::null_mut();
    let code = unsafe {
        coevo_instance_generate(gen_json.as_ptr(), 10, 1, kind.as_ptr(), &mut handle)
    };
    assert_eq!(code, COEVO_ERR_ARG);
    assert!(last_error().contains("vrp"));

    let handle = generate_instance(10, 1, "tsp");
    let task = cstring("simulated_annealing");
    let mut out: *mut c_char = ptr::null_mut();
    let code = unsafe {
        coevo_solve(task.as_ptr(), handle, ptr::null(), 1, 0, 0, 0, &mut out)
    };
    assert_eq!(code, COEVO_ERR_ARG);
    unsafe { coevo_instance_free(handle) };
}

#[test]
fn solve_with_baseline_is_deterministic_and_parseable() {
    let handle = generate_instance(12, 11, "tsp");
    let task = cstring("tsp_gls");

    let mut first: *mut c_char = ptr::null_mut();
    let code = unsafe {
        coevo_solve(task.as_ptr(), handle, ptr::null(), 5, 2000, 0, 0, &mut first)
    };
    assert_eq!(code, COEVO_OK, "solve failed: {}", last_error());
    let first = take_string(first);

    let mut second: *mut c_char = ptr::null_mut();
    let code = unsafe {
        coevo_solve(task.as_ptr(), handle, ptr::null(), 5, 2000, 0, 0, &mut second)
    };
    assert_eq!(code, COEVO_OK);
    assert_eq!(take_string(second), first);

    let parsed: serde_json::Value = serde_json::from_str(&first).unwrap();
    assert!(parsed["cost_or_prize"].as_f64().unwrap() > 0.0);
    assert_eq!(parsed["best"]["tour"]["order"].as_array().unwrap().len(), 12);
    assert!(parsed["evaluations"].as_u64().unwrap() > 0);

    unsafe { coevo_instance_free(handle) };
}

#[test]
fn solve_accepts_an_explicit_heuristic_program() {
    let handle = generate_instance(10, 2, "tsp");
    let task = cstring("tsp_gls");
    let mut baseline: *mut c_char = ptr::null_mut();
    assert_eq!(
        unsafe { coevo_baseline_heuristic(task.as_ptr(), &mut baseline) },
        COEVO_OK
    );
    let baseline = take_string(baseline);
    let heur = cstring(&baseline);

    let mut with_explicit: *mut c_char = ptr::null_mut();
    let code = unsafe {
        coevo_solve(task.as_ptr(), handle, heur.as_ptr(), 9, 2000, 0, 0, &mut with_explicit)
    };
    assert_eq!(code, COEVO_OK, "solve failed: {}", last_error());
    let with_explicit = take_string(with_explicit);

    let mut with_null: *mut c_char = ptr::null_mut();
    let code = unsafe {
        coevo_solve(task.as_ptr(), handle, ptr::null(), 9, 2000, 0, 0, &mut with_null)
    };
    assert_eq!(code, COEVO_OK);
    assert_eq!(take_string(with_null), with_explicit);

    unsafe { coevo_instance_free(handle) };
}

#[test]
fn gap_report_matches_direct_library_call() {
    let task_text = "tsp_gls";
    let task = cstring(task_text);
    let gen_text = uniform_generator_json();
    let gen_json = cstring(&gen_text);
    let mut out: *mut c_char = ptr::null_mut();
    let code = unsafe {
        coevo_gap(task.as_ptr(), gen_json.as_ptr(), ptr::null(), 10, 2, 21, &mut out)
    };
    assert_eq!(code, COEVO_OK, "gap failed: {}", last_error());
    let via_ffi = take_string(out);

    let generator = coevo::gen_dsl::GeneratorProgram::from_json(&gen_text).unwrap();
    let heuristic = coevo::heur_dsl::baseline_heuristic(coevo::heur_dsl::Target::GlsGuide);
    let direct = coevo::eval::evaluate_hardness(
        &generator,
        &heuristic,
        10,
        2,
        coevo::rng::Seed(21),
        coevo::eval::Task::TspGls,
        &coevo::eval::ReferencePolicy::default(),
    )
    .unwrap();
    assert_eq!(via_ffi, direct.to_json());
}

#[test]
fn mutations_are_deterministic_valid_and_different() {
    let gen_text = uniform_generator_json();
    let gen_json = cstring(&gen_text);
    let mut first: *mut c_char = ptr::null_mut();
    assert_eq!(
        unsafe { coevo_mutate_generator(gen_json.as_ptr(), 17, &mut first) },
        COEVO_OK
    );
    let first = take_string(first);
    let mut second: *mut c_char = ptr::null_mut();
    assert_eq!(
        unsafe { coevo_mutate_generator(gen_json.as_ptr(), 17, &mut second) },
        COEVO_OK
    );
    assert_eq!(take_string(second), first);
    let mutated = coevo::gen_dsl::GeneratorProgram::from_json(&first).unwrap();
    assert_ne!(mutated.to_json(), gen_text);

    let task = cstring("tsp_gls");
    let mut baseline: *mut c_char = ptr::null_mut();
    assert_eq!(
        unsafe { coevo_baseline_heuristic(task.as_ptr(), &mut baseline) },
        COEVO_OK
    );
    let baseline = take_string(baseline);
    let heur_json = cstring(&baseline);
    let mut mutated_h: *mut c_char = ptr::null_mut();
    assert_eq!(
        unsafe { coevo_mutate_heuristic(heur_json.as_ptr(), 17, &mut mutated_h) },
        COEVO_OK
    );
    let mutated_h = take_string(mutated_h);
    assert_ne!(mutated_h, baseline);
    coevo::heur_dsl::HeuristicProgram::from_json(&mutated_h).unwrap();
}

#[test]
fn success_clears_the_previous_error() {
    let junk = cstring("nope");
    let mut handle: *mut CoevoInstance = ptr::null_mut();
    let code = unsafe { coevo_instance_parse_json(junk.as_ptr(), &mut handle) };
    assert_eq!(code, COEVO_ERR_PARSE);
    assert!(!coevo_last_error().is_null());

    let fresh = generate_instance(10, 1, "tsp");
    assert!(coevo_last_error().is_null());
    unsafe { coevo_instance_free(fresh) };
}

#[test]
fn free_functions_tolerate_null() {
    unsafe {
        coevo_instance_free(ptr::null_mut());
        coevo_string_free(ptr::null_mut());
    }
}

#[test]
fn generated_header_declares_the_api() {
    let header_path = concat!(env!("CARGO_MANIFEST_DIR"), "/include/coevo.h");
    let header = std::fs::read_to_string(header_path).expect("build.rs writes include/coevo.h");
    for symbol in [
        "COEVO_H",
        "typedef struct CoevoInstance CoevoInstance;",
        "coevo_version",
        "coevo_last_error",
        "coevo_string_free",
        "coevo_instance_parse_json",
        "coevo_instance_generate",
        "coevo_instance_to_json",
        "coevo_instance_size",
        "coevo_instance_free",
        "coevo_solve",
        "coevo_gap",
        "coevo_mutate_generator",
        "coevo_mutate_heuristic",
        "coevo_baseline_heuristic",
    ] {
        assert!(header.contains(symbol), "header is missing {symbol}");
    }
    let ok_line = format!("#define COEVO_OK {COEVO_OK}");
    assert!(header.contains(&ok_line), "header is missing {ok_line}");
}

#[test]
fn error_codes_are_distinct_and_stable() {
    let codes: [c_int; 6] = [
        COEVO_OK,
        COEVO_ERR_ARG,
        COEVO_ERR_PARSE,
        COEVO_ERR_VALIDATION,
        COEVO_ERR_SOLVE,
        COEVO_ERR_INTERNAL,
    ];
    assert_eq!(codes, [0, 1, 2, 3, 4, 5]);
}
