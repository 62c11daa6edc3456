use std::ffi::{c_char, CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use factlink_ffi::*;

fn fixture(name: &str, file: &str) -> CString {
    let p = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/tests/fixtures")
        .join(name)
        .join(file);
    CString::new(p.to_str().unwrap()).unwrap()
}

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

unsafe fn take(s: *mut c_char) -> String {
    let out = CStr::from_ptr(s).to_str().unwrap().to_string();
    fl_string_free(s);
    out
}

unsafe fn last_error() -> String {
    CStr::from_ptr(fl_last_error_message())
        .to_string_lossy()
        .into_owned()
}

unsafe fn load(name: &str) -> *mut FlKg {
    let mut kg = ptr::null_mut();
    let status = fl_kg_load(
        fixture(name, "entities.jsonl").as_ptr(),
        fixture(name, "relations.jsonl").as_ptr(),
        fixture(name, "facts.jsonl").as_ptr(),
        &mut kg,
    );
    assert_eq!(status, FlStatus::Ok);
    kg
}

#[test]
fn kg_labels_and_counts() {
    unsafe {
        let kg = load("multilingual");
        assert_eq!(fl_kg_fact_count(kg), 7);
        let mut s = ptr::null_mut();
        assert_eq!(
            fl_kg_fact_label(kg, c("F10").as_ptr(), c("ur").as_ptr(), &mut s),
            FlStatus::Ok
        );
        assert_eq!(take(s), "بھارت ; ملک ; ممبئی");
        assert_eq!(
            fl_kg_fact_label(kg, c("F99").as_ptr(), c("en").as_ptr(), &mut s),
            FlStatus::NotFound
        );
        assert!(last_error().contains("F99"));
        fl_kg_free(kg);
        assert_eq!(fl_kg_fact_count(ptr::null()), 0);
    }
}

#[test]
fn missing_file_and_null_arguments() {
    unsafe {
        let mut kg = ptr::null_mut();
        let status = fl_kg_load(
            c("/nonexistent/e.jsonl").as_ptr(),
            c("/nonexistent/r.jsonl").as_ptr(),
            c("/nonexistent/f.jsonl").as_ptr(),
            &mut kg,
        );
        assert_eq!(status, FlStatus::NotFound);
        assert!(kg.is_null());
        assert!(last_error().contains("not found"));
        let status = fl_kg_load(ptr::null(), ptr::null(), ptr::null(), &mut kg);
        assert_eq!(status, FlStatus::NullArgument);
        let bad = [0xffu8, 0];
        let status = fl_kg_load(
            bad.as_ptr().cast(),
            bad.as_ptr().cast(),
            bad.as_ptr().cast(),
            &mut kg,
        );
        assert_eq!(status, FlStatus::InvalidUtf8);
    }
}

#[test]
fn trie_roundtrip_and_resolve() {
    unsafe {
        let kg = load("four_example");
        let mut trie = ptr::null_mut();
        assert_eq!(fl_trie_build(kg, &mut trie), FlStatus::Ok);
        let mut label = ptr::null_mut();
        assert_eq!(
            fl_kg_fact_label(kg, c("F4").as_ptr(), c("en").as_ptr(), &mut label),
            FlStatus::Ok
        );
        let label = c(&take(label));

        let dir = tempfile::tempdir().unwrap();
        let path = c(dir.path().join("facts.ftri").to_str().unwrap());
        assert_eq!(fl_trie_save(trie, path.as_ptr()), FlStatus::Ok);
        let mut loaded = ptr::null_mut();
        assert_eq!(fl_trie_load(path.as_ptr(), &mut loaded), FlStatus::Ok);
        for t in [trie, loaded] {
            let mut ids = ptr::null_mut();
            assert_eq!(fl_trie_resolve(t, label.as_ptr(), &mut ids), FlStatus::Ok);
            assert_eq!(take(ids), r#"["F4"]"#);
            assert_eq!(
                fl_trie_resolve(t, c("None").as_ptr(), &mut ids),
                FlStatus::Ok
            );
            assert_eq!(take(ids), r#"["NULL"]"#);
        }
        fl_trie_free(trie);
        fl_trie_free(loaded);
        fl_kg_free(kg);
    }
}

#[test]
fn index_search_and_linking() {
    unsafe {
        let kg = load("appendix");
        let mut index = ptr::null_mut();
        assert_eq!(
            fl_index_build(kg, c("Bogus").as_ptr(), 0, &mut index),
            FlStatus::InvalidInput
        );
        assert_eq!(
            fl_index_build(kg, c("El").as_ptr(), 0, &mut index),
            FlStatus::Ok
        );
        let query = c("Wind Cave National Park ; operator ; National Park Service");
        let mut out = ptr::null_mut();
        assert_eq!(
            fl_index_top_k(index, query.as_ptr(), c("en").as_ptr(), 3, &mut out),
            FlStatus::Ok
        );
        let hits: serde_json::Value = serde_json::from_str(&take(out)).unwrap();
        assert_eq!(hits.as_array().unwrap().len(), 3);
        assert_eq!(hits[0]["fact"], "Q1334313-P137-Q308439");

        let dir = tempfile::tempdir().unwrap();
        let path = c(dir.path().join("index.fidx").to_str().unwrap());
        assert_eq!(fl_index_save(index, path.as_ptr()), FlStatus::Ok);
        let mut loaded = ptr::null_mut();
        assert_eq!(
            fl_index_load(path.as_ptr(), 2, &mut loaded),
            FlStatus::InvalidInput
        );
        assert_eq!(fl_index_load(path.as_ptr(), 0, &mut loaded), FlStatus::Ok);

        let mut trie = ptr::null_mut();
        assert_eq!(fl_trie_build(kg, &mut trie), FlStatus::Ok);
        for idx in [ptr::null(), loaded as *const FlIndex] {
            assert_eq!(
                fl_link(kg, trie, idx, query.as_ptr(), c("en").as_ptr(), 3, &mut out),
                FlStatus::Ok
            );
            let preds: serde_json::Value = serde_json::from_str(&take(out)).unwrap();
            let preds = preds.as_array().unwrap();
            assert!(!preds.is_empty() && preds.len() <= 3);
            assert!(preds
                .iter()
                .all(|p| !p["fact"].as_str().unwrap().starts_with("INVALID:")));
        }
        fl_trie_free(trie);
        fl_index_free(index);
        fl_index_free(loaded);
        fl_kg_free(kg);
    }
}

#[test]
fn eval_report() {
    unsafe {
        let mut out = ptr::null_mut();
        let status = fl_eval_json(
            fixture("four_example", "gold.jsonl").as_ptr(),
            fixture("four_example", "predictions.jsonl").as_ptr(),
            fixture("four_example", "facts.jsonl").as_ptr(),
            &mut out,
        );
        assert_eq!(status, FlStatus::Ok);
        let report: serde_json::Value = serde_json::from_str(&take(out)).unwrap();
        assert_eq!(report["average"]["p_at_1"], 0.75);
        assert_eq!(report["average"]["r_at_5"], 0.8);
        assert_eq!(report["average"]["macro_p_at_1"], 0.625);

        let status = fl_eval_json(
            fixture("four_example", "gold.jsonl").as_ptr(),
            c("/nonexistent/p.jsonl").as_ptr(),
            ptr::null(),
            &mut out,
        );
        assert_eq!(status, FlStatus::NotFound);
    }
}

#[test]
fn errors_are_per_thread() {
    unsafe {
        let mut kg = ptr::null_mut();
        fl_kg_load(ptr::null(), ptr::null(), ptr::null(), &mut kg);
        assert!(!fl_last_error_message().is_null());
        let other = std::thread::spawn(|| fl_last_error_message().is_null())
            .join()
            .unwrap();
        assert!(other);
    }
}

fn header() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("include/factlink.h")
}

#[test]
fn header_declares_every_export() {
    let h = std::fs::read_to_string(header()).unwrap();
    for name in [
        "fl_last_error_message",
        "fl_version",
        "fl_string_free",
        "fl_kg_load",
        "fl_kg_free",
        "fl_kg_fact_count",
        "fl_kg_fact_label",
        "fl_trie_build",
        "fl_trie_load",
        "fl_trie_save",
        "fl_trie_free",
        "fl_trie_resolve",
        "fl_index_build",
        "fl_index_load",
        "fl_index_save",
        "fl_index_free",
        "fl_index_top_k",
        "fl_link",
        "fl_eval_json",
    ] {
        assert!(
            h.contains(&format!("{name}(")),
            "{name} missing from header"
        );
    }
    assert!(h.contains("typedef struct FlKg FlKg;"));
    assert!(h.contains("FL_STATUS_NOT_FOUND = 3"));
}

/// Compiles and runs a C program against the header and the static library.
#[test]
fn c_program_links_against_the_library() {
    let exe = std::env::current_exe().unwrap();
    let target_dir = exe.parent().unwrap().parent().unwrap();
    let lib = target_dir.join("libfactlink_ffi.a");
    assert!(lib.exists(), "{} not built", lib.display());
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("smoke.c");
    std::fs::write(
        &src,
        r#"
#include <stdio.h>
#include <string.h>
#include "factlink.h"

int main(int argc, char **argv) {
    FlKg *kg = NULL;
    if (fl_kg_load(argv[1], argv[2], argv[3], &kg) != FL_STATUS_OK) {
        fprintf(stderr, "%s\n", fl_last_error_message());
        return 1;
    }
    FlTrie *trie = NULL;
    if (fl_trie_build(kg, &trie) != FL_STATUS_OK) return 2;
    char *ids = NULL;
    if (fl_trie_resolve(trie, "None", &ids) != FL_STATUS_OK) return 3;
    printf("%zu %s\n", fl_kg_fact_count(kg), ids);
    fl_string_free(ids);
    fl_trie_free(trie);
    fl_kg_free(kg);
    FlKg *missing = NULL;
    return fl_kg_load("/nonexistent", "/nonexistent", "/nonexistent", &missing) == FL_STATUS_NOT_FOUND ? 0 : 4;
}
"#,
    )
    .unwrap();
    let bin = dir.path().join("smoke");
    let status = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(header().parent().unwrap())
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .expect("C compiler available");
    assert!(status.success(), "C compilation failed");
    let out = Command::new(&bin)
        .arg(fixture("four_example", "entities.jsonl").to_str().unwrap())
        .arg(fixture("four_example", "relations.jsonl").to_str().unwrap())
        .arg(fixture("four_example", "facts.jsonl").to_str().unwrap())
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), r#"5 ["NULL"]"#);
}
