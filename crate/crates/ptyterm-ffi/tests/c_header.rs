//! Compiles a small C program against the generated header and the static
//! library, then runs it. Skipped when no C compiler is on the PATH.

use std::path::PathBuf;
use std::process::Command;

const C_PROGRAM: &str = r#"
#include <stdio.h>
#include <string.h>
#include "ptyterm.h"

int main(void) {
    PtyTerm *t = NULL;
    PtyDerivation *d = NULL;
    char *s = NULL;
    if (ptyterm_parse("(\\x. x x (+) \\y. y) (\\x. x x (+) \\y. y)",
                      PTY_CBV, false, &t) != PTY_OK) return 1;
    if (ptyterm_p_approx(t, 6, &s) != PTY_OK) return 2;
    if (strcmp(s, "7/8") != 0) return 3;
    ptyterm_string_free(s);
    if (ptyterm_synthesize(t, 6, false, &d) != PTY_OK) return 4;
    if (ptyterm_derivation_summary(d, &s) != PTY_OK) return 5;
    printf("%s\n", s);
    ptyterm_string_free(s);
    ptyterm_derivation_free(d);
    ptyterm_term_free(t);
    return 0;
}
"#;

#[test]
fn c_program_links_and_runs() {
    let cc = ["cc", "gcc", "clang"]
        .iter()
        .find(|c| Command::new(c).arg("--version").output().is_ok());
    let Some(cc) = cc else {
        eprintln!("no C compiler found; skipping");
        return;
    };
    let crate_dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let include = crate_dir.join("include");
    // `cargo test` does not stage the staticlib artifact, so build it
    let cargo = std::env::var("CARGO").unwrap_or_else(|_| "cargo".into());
    let build = Command::new(cargo)
        .args(["build", "-p", "ptyterm-ffi"])
        .current_dir(&crate_dir)
        .output()
        .expect("cargo build");
    assert!(
        build.status.success(),
        "cargo build failed: {}",
        String::from_utf8_lossy(&build.stderr)
    );
    let lib = crate_dir
        .join("../../target")
        .join(if cfg!(debug_assertions) { "debug" } else { "release" })
        .join("libptyterm_ffi.a");
    assert!(lib.exists(), "staticlib not found at {}", lib.display());
    let work = std::env::temp_dir().join("ptyterm-c-header-test");
    std::fs::create_dir_all(&work).unwrap();
    let c_file = work.join("smoke.c");
    std::fs::write(&c_file, C_PROGRAM).unwrap();
    let exe = work.join("smoke");
    let compile = Command::new(cc)
        .arg(&c_file)
        .arg("-I")
        .arg(&include)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm"])
        .arg("-o")
        .arg(&exe)
        .output()
        .expect("compile C program");
    assert!(
        compile.status.success(),
        "cc failed: {}",
        String::from_utf8_lossy(&compile.stderr)
    );
    let run = Command::new(&exe).output().expect("run C program");
    assert_eq!(run.status.code(), Some(0));
    assert_eq!(
        String::from_utf8_lossy(&run.stdout).trim(),
        "weight=7/2 type=<1/8 [], 1/4 [], 1/2 []> tight=true norm=7/8"
    );
}
