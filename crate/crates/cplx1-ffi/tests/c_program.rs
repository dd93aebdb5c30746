//! Compile a small C program against include/cplx1.h and the static library.

use std::path::PathBuf;
use std::process::Command;

const PROGRAM: &str = r#"
#include <stdio.h>
#include <string.h>
#include "cplx1.h"

int main(void) {
    const int64_t v[3] = {1, -2, 1};
    Cplx1Matrix *m = NULL;
    if (cplx1_matrix_new(1, 3, v, &m) != CPLX1_STATUS_OK) return 10;
    int64_t c = 0;
    if (cplx1_matrix_complexity(m, &c) != CPLX1_STATUS_OK || c != 1) return 11;
    int64_t a[9];
    for (int i = 0; i < 9; i++) a[i] = i + 1;
    uint64_t n = 0;
    if (cplx1_count_solutions(m, a, 9, false, 1000000, &n) != CPLX1_STATUS_OK || n != 41) return 12;
    cplx1_matrix_free(m);

    Cplx1Matrix *bad = NULL;
    if (cplx1_matrix_parse("1 3\n1 q 1\n", &bad) != CPLX1_STATUS_PARSE) return 13;
    if (strstr(cplx1_last_error(), "line 2") == NULL) return 14;
    printf("ok %s\n", cplx1_version());
    return 0;
}
"#;

fn target_dir() -> PathBuf {
    // tests run from target/<profile>/deps
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().to_path_buf()
}

#[test]
fn header_lists_every_export() {
    let h =
        std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/cplx1.h")).unwrap();
    for name in [
        "cplx1_last_error",
        "cplx1_version",
        "cplx1_matrix_new",
        "cplx1_matrix_parse",
        "cplx1_matrix_free",
        "cplx1_matrix_shape",
        "cplx1_matrix_complexity",
        "cplx1_count_solutions",
        "cplx1_sieve_factor",
        "cplx1_sieve_new",
        "cplx1_sieve_weight",
        "cplx1_sieve_free",
        "cplx1_increment_run",
        "cplx1_report_bound",
        "cplx1_report_json",
        "cplx1_report_free",
        "CPLX1_STATUS_CERTIFICATION",
    ] {
        assert!(h.contains(name), "{name} missing from header");
    }
}

#[test]
fn c_program_links_and_runs() {
    let dir = target_dir();
    let lib = [dir.join("libcplx1_ffi.a"), dir.join("deps/libcplx1_ffi.a")]
        .into_iter()
        .find(|p| p.exists());
    let Some(lib) = lib else {
        eprintln!("skipping: static library not built");
        return;
    };
    if Command::new("cc").arg("--version").output().is_err() {
        eprintln!("skipping: no C compiler");
        return;
    }
    let dir = std::env::temp_dir().join(format!("cplx1-ffi-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let src = dir.join("main.c");
    let bin = dir.join("main");
    std::fs::write(&src, PROGRAM).unwrap();
    let status = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(concat!(env!("CARGO_MANIFEST_DIR"), "/include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm"])
        .arg("-o")
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success());
    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status.code());
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("ok "));
    let _ = std::fs::remove_dir_all(&dir);
}
