//! End-to-end tests of the `ptyterm` binary: output text, exit codes, and
//! pipe-compatibility between `synthesize` and `check`.

use std::io::Write;
use std::process::Command;

fn ptyterm(args: &[&str]) -> (String, String, i32) {
    let out = Command::new(env!("CARGO_BIN_EXE_ptyterm"))
        .args(args)
        .env_remove("PTYTERM_LIMIT")
        .output()
        .expect("run ptyterm");
    (
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
        out.status.code().unwrap_or(-1),
    )
}

fn tempfile(name: &str, contents: &str) -> std::path::PathBuf {
    let dir = std::env::temp_dir().join("ptyterm-cli-tests");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join(name);
    let mut f = std::fs::File::create(&path).unwrap();
    f.write_all(contents.as_bytes()).unwrap();
    path
}

#[test]
fn eval_dd_prints_the_expected_trace() {
    let (stdout, _, code) = ptyterm(&["eval", "DD", "--steps", "2"]);
    assert_eq!(code, 0);
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines.len(), 3);
    let dd = "(\\x. (x x) (+) (\\y. y)) (\\x. (x x) (+) (\\y. y))";
    assert_eq!(lines[0], format!("<1 {}>", dd));
    assert_eq!(lines[1], format!("<1 ({}) (+) (\\y. y)>", dd));
    assert_eq!(lines[2], format!("<1/2 {}, 1/2 \\y. y>", dd));
}

#[test]
fn eval_identity_is_a_fixpoint() {
    let (stdout, _, code) = ptyterm(&["eval", "I", "--steps", "3"]);
    assert_eq!(code, 0);
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines, vec!["<1 \\x. x>"; 4]);
}

#[test]
fn approx_matches_paper_values() {
    let (stdout, _, code) = ptyterm(&["approx", "DD", "--steps", "6"]);
    assert_eq!(code, 0);
    assert_eq!(stdout, "P^6=7/8 eT^6=7/2\n");
    let (stdout, _, _) = ptyterm(&["approx", "omega", "--steps", "9"]);
    assert_eq!(stdout, "P^9=0 eT^9=9\n");
    let (stdout, _, _) = ptyterm(&["approx", "I", "--steps", "0"]);
    assert_eq!(stdout, "P^0=1 eT^0=0\n");
}

#[test]
fn eval_respects_the_entry_limit() {
    let (_, _, code) = ptyterm(&["eval", "omega", "--steps", "1", "--limit", "1"]);
    assert_eq!(code, 0);
    let (_, stderr, code) = ptyterm(&["eval", "DD", "--steps", "6", "--limit", "1"]);
    assert_eq!(code, 1);
    assert!(stderr.contains("limit"));
}

#[test]
fn check_reports_weight_type_tightness_norm() {
    let phi3 = format!(
        "{}/tests/golden/phi3.deriv",
        env!("CARGO_MANIFEST_DIR")
    );
    let (stdout, _, code) = ptyterm(&["check", &phi3]);
    assert_eq!(code, 0);
    assert_eq!(
        stdout,
        "weight=7/2 type=<1/8 [], 1/4 [], 1/2 []> tight=true norm=7/8\n"
    );
}

#[test]
fn check_zero_derivation_output() {
    let file = tempfile(
        "zero_omega.deriv",
        "(rule zero (judgment (ctx) 0 (\\x. x x) (\\x. x x) <>))",
    );
    let (stdout, _, code) = ptyterm(&["check", file.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert_eq!(stdout, "weight=0 type=<> tight=true norm=0\n");
}

#[test]
fn check_rejects_corrupted_weights_with_a_path() {
    // claim weight 3 on Σ₁'s lam node
    let bad = golden("sigma1.deriv").replacen(") 2 ", ") 3 ", 1);
    let file = tempfile("bad_sigma1.deriv", &bad);
    let (_, stderr, code) = ptyterm(&["check", file.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert!(stderr.contains("weight mismatch"), "stderr: {}", stderr);
    assert!(stderr.contains("rule lam"), "stderr: {}", stderr);
}

fn golden(name: &str) -> String {
    std::fs::read_to_string(format!(
        "{}/tests/golden/{}",
        env!("CARGO_MANIFEST_DIR"),
        name
    ))
    .unwrap()
}

#[test]
fn synthesize_then_check_pipes_cleanly() {
    for (args, expected_prefix) in [
        (
            vec!["synthesize", "DD", "--steps", "6"],
            "weight=7/2 type=<1/8 [], 1/4 [], 1/2 []> tight=true norm=7/8",
        ),
        (
            vec!["synthesize", "I", "--steps", "0"],
            "weight=0 type=<1 []> tight=true norm=1",
        ),
    ] {
        let (deriv, _, code) = ptyterm(&args);
        assert_eq!(code, 0);
        let file = tempfile("piped.deriv", &deriv);
        let (stdout, _, code) = ptyterm(&["check", file.to_str().unwrap()]);
        assert_eq!(code, 0, "checking output of {:?}", args);
        assert_eq!(stdout.trim_end(), expected_prefix);
    }
}

#[test]
fn synthesize_null_omega_has_weight_at_least_steps() {
    let (deriv, _, code) = ptyterm(&["synthesize", "omega", "--steps", "3", "--null"]);
    assert_eq!(code, 0);
    let file = tempfile("omega_null.deriv", &deriv);
    let (stdout, _, code) = ptyterm(&["check", file.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(stdout.contains("type=<>"), "stdout: {}", stdout);
    let weight = stdout
        .split(' ')
        .next()
        .unwrap()
        .trim_start_matches("weight=")
        .to_string();
    let w = ptyterm::multidist::parse_rat(&weight).unwrap();
    assert!(w >= ptyterm::multidist::rat_int(3));
}

#[test]
fn synthesize_output_is_deterministic() {
    let (a, _, _) = ptyterm(&["synthesize", "DD", "--steps", "4"]);
    let (b, _, _) = ptyterm(&["synthesize", "DD", "--steps", "4"]);
    assert_eq!(a, b);
    let (a, _, _) = ptyterm(&["eval", "CC", "--steps", "8"]);
    let (b, _, _) = ptyterm(&["eval", "CC", "--steps", "8"]);
    assert_eq!(a, b);
}

#[test]
fn reduce_deriv_produces_checkable_branches() {
    let phi3 = format!("{}/tests/golden/phi3.deriv", env!("CARGO_MANIFEST_DIR"));
    let (stdout, _, code) = ptyterm(&["reduce-deriv", &phi3]);
    assert_eq!(code, 0);
    // DD → ⟨1 (DD ⊕ I)⟩: a single branch of weight 5/2
    let branches =
        ptyterm::derivation::parse_derivations(&stdout, ptyterm::Mode::Cbv).unwrap();
    assert_eq!(branches.len(), 1);
    let j = ptyterm::derivation::check_derivation(&branches[0], ptyterm::Mode::Cbv).unwrap();
    assert_eq!(j.weight, ptyterm::multidist::rat(5, 2));
    assert_eq!(
        j.rhs,
        ptyterm::types::parse_type("<1/8 [], 1/4 [], 1/2 []>").unwrap()
    );
}

#[test]
fn cbn_mode_round_trip() {
    let (deriv, _, code) = ptyterm(&["synthesize", "DD", "--steps", "4", "--mode", "cbn"]);
    assert_eq!(code, 0);
    let file = tempfile("dd_cbn.deriv", &deriv);
    let (stdout, _, code) = ptyterm(&["check", file.to_str().unwrap(), "--mode", "cbn"]);
    assert_eq!(code, 0);
    assert!(stdout.contains("tight=true"));
    // the same file is not a CbV derivation
    let (_, _, code) = ptyterm(&["check", file.to_str().unwrap(), "--mode", "cbv"]);
    assert_eq!(code, 1);
}

#[test]
fn stdlib_list_and_show() {
    let (stdout, _, code) = ptyterm(&["stdlib", "list"]);
    assert_eq!(code, 0);
    for name in ["I", "DD", "omega", "CC", "Z", "scott0"] {
        assert!(stdout.lines().any(|l| l.starts_with(name)), "{}", name);
    }
    let (stdout, _, code) = ptyterm(&["stdlib", "show", "omega"]);
    assert_eq!(code, 0);
    assert_eq!(stdout, "(\\x. x x) (\\x. x x)\n");
    let (_, stderr, code) = ptyterm(&["stdlib", "show", "nonexistent"]);
    assert_eq!(code, 1);
    assert!(stderr.contains("unknown"));
}

#[test]
fn parse_errors_exit_one_usage_errors_exit_two() {
    let file = tempfile("bad_term.txt", "( \\x.x ) ( (\\x.x)(\\x.x) )");
    let (_, stderr, code) = ptyterm(&["eval", file.to_str().unwrap(), "--steps", "1"]);
    assert_eq!(code, 1);
    assert!(stderr.contains("non-value application"));
    // same file parses with --desugar
    let (_, _, code) = ptyterm(&[
        "eval",
        file.to_str().unwrap(),
        "--steps",
        "1",
        "--desugar",
    ]);
    assert_eq!(code, 0);
    // unknown subcommand is a usage error
    let (_, _, code) = ptyterm(&["frobnicate"]);
    assert_eq!(code, 2);
}

#[test]
fn env_var_supplies_the_default_limit() {
    let out = Command::new(env!("CARGO_BIN_EXE_ptyterm"))
        .args(["eval", "DD", "--steps", "6"])
        .env("PTYTERM_LIMIT", "2")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let out = Command::new(env!("CARGO_BIN_EXE_ptyterm"))
        .args(["eval", "DD", "--steps", "6", "--limit", "64"])
        .env("PTYTERM_LIMIT", "2")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "explicit flag overrides the env");
}

#[test]
fn sexp_format_and_decimal_column() {
    let (stdout, _, code) = ptyterm(&["eval", "I", "--steps", "1", "--format", "sexp"]);
    assert_eq!(code, 0);
    assert_eq!(stdout, "(state (1 \\x. x))\n(state (1 \\x. x))\n");
    let (stdout, _, code) = ptyterm(&["approx", "DD", "--steps", "6", "--decimal", "3"]);
    assert_eq!(code, 0);
    assert_eq!(stdout, "P^6=7/8 (~0.875) eT^6=7/2 (~3.500)\n");
}

#[test]
fn utf8_choice_glyph_is_accepted() {
    let file = tempfile("utf8.term", "(\\x. x x ⊕ \\y.y) (\\x. x x ⊕ \\y.y)");
    let (stdout, _, code) = ptyterm(&["approx", file.to_str().unwrap(), "--steps", "6"]);
    assert_eq!(code, 0);
    assert_eq!(stdout, "P^6=7/8 eT^6=7/2\n");
}
