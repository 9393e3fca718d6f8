use std::path::PathBuf;
use std::process::{Command, Output};

use crc_core::dga::{verify_suite, Suite};
use crc_core::tube::{bundled_example, Sampling};
use serde_json::Value;

fn crc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_crc"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is one JSON report")
}

fn golden(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(format!("{name}.json"))
}

/// Compares stdout with the stored file; `UPDATE_GOLDEN=1` rewrites it.
fn check_golden(name: &str, args: &[&str], code: i32) {
    let mut full = args.to_vec();
    full.push("--no-timing");
    let out = crc(&full);
    assert_eq!(
        out.status.code(),
        Some(code),
        "{name}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let path = golden(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, &out.stdout).unwrap();
    }
    let want = std::fs::read(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert!(out.stdout == want, "{name} differs from {}", path.display());
}

#[test]
fn golden_reports() {
    check_golden("model_verify", &["model", "verify"], 0);
    check_golden("dga_shifts", &["dga", "verify", "--suite", "shifts"], 0);
    check_golden("dga_equivariance", &["dga", "verify", "--suite", "equivariance"], 0);
    check_golden("dga_cartan", &["dga", "verify", "--suite", "cartan"], 0);
    check_golden("tube_example", &["tube", "paper-example"], 0);
    check_golden(
        "tube_degenerate",
        &["tube", "analyze", "--rho", "t1^2/2", "--box", "t1=0.1:1,t2=0.1:1"],
        1,
    );
    check_golden(
        "tube_cone",
        &["tube", "analyze", "--rho", "t1^2/t2", "--box", "t1=0.1:1,t2=0.5:2"],
        0,
    );
}

#[test]
fn rejected_hypothesis_reports_the_reason() {
    let out = crc(&["tube", "analyze", "--rho", "t1^2/2", "--box", "t1=0.1:1,t2=0.1:1"]);
    assert_eq!(out.status.code(), Some(1));
    let r = json(&out);
    assert_eq!(r["overall"], "fail");
    assert_eq!(r["verdict"]["reason"], "2-nondegeneracy: S ≡ 0");
}

#[test]
fn usage_and_parse_errors_exit_2() {
    let out = crc(&["tube", "analyze", "--rho", "t1 +"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
    assert!(String::from_utf8_lossy(&out.stderr).contains("syntax error"));
    for args in [
        &["dga", "verify", "--suite", "nope"][..],
        &["tube", "analyze", "--rho", "t1", "--box", "t1=1:0"],
        &["tube", "paper-example", "--trials", "0"],
        &["tube", "paper-example", "--tol", "-1"],
        &["expr", "eval", "x + y", "--at", "x=1"],
        &["frobnicate"],
    ] {
        assert_eq!(crc(args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn inconclusive_exits_3() {
    // Every sample leaves the principal branch, so nothing is evaluated.
    let out = crc(&["expr", "zero", "sqrt(x - 2)", "--box", "x=0:1"]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(json(&out)["overall"], "inconclusive");
    let out = crc(&["expr", "zero", "x^2 - x", "--box", "x=0.5:1"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn identical_seed_gives_identical_bytes() {
    let args = [
        "tube",
        "profile",
        "--g",
        "1/s",
        "--box",
        "t1=0.1:1,t2=0.5:2",
        "--seed",
        "5",
        "--no-timing",
    ];
    let (a, b) = (crc(&args), crc(&args));
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let other = crc(&[
        "tube",
        "profile",
        "--g",
        "1/s",
        "--box",
        "t1=0.1:1,t2=0.5:2",
        "--seed",
        "6",
        "--no-timing",
    ]);
    assert_ne!(a.stdout, other.stdout);
}

fn pretty(value: Value) -> Vec<u8> {
    (serde_json::to_string_pretty(&value).unwrap() + "\n").into_bytes()
}

#[test]
fn library_reports_pass_through_unaltered() {
    for (name, suite) in [
        ("shifts", Suite::Shifts),
        ("equivariance", Suite::Equivariance),
        ("cartan", Suite::Cartan),
    ] {
        let cli = crc(&["dga", "verify", "--suite", name, "--no-timing"]);
        assert!(
            cli.stdout == pretty(serde_json::to_value(verify_suite(suite).without_timing()).unwrap()),
            "{name}"
        );
    }
    let cli = crc(&["tube", "paper-example", "--no-timing"]);
    assert!(
        cli.stdout
            == pretty(serde_json::to_value(bundled_example(Sampling::default()).unwrap().without_timing()).unwrap())
    );
}

#[test]
fn expression_utilities() {
    let r = json(&crc(&["expr", "eval", "x^2 + i*y", "--at", "x=0.5,y=2"]));
    assert_eq!(r["checks"][0]["details"]["value"], serde_json::json!([0.25, 2.0]));
    let r = json(&crc(&["expr", "diff", "sqrt(1 + x^2)", "--var", "x"]));
    assert_eq!(r["checks"][0]["details"]["derivative"], "x*(1 + x^2)^(-1/2)");
    let out = crc(&["expr", "zero", "(x + 1)^2 - x^2 - 2*x - 1", "--box", "x=0:1"]);
    assert_eq!(out.status.code(), Some(0));
    let r = json(&crc(&[
        "expr",
        "eval",
        "z*zb",
        "--at",
        "z=1+2i",
        "--vars",
        "z:complex=zb",
    ]));
    assert_eq!(r["checks"][0]["details"]["value"], serde_json::json!(5.0));
}

#[test]
fn text_format_and_out_file() {
    let dir = std::env::temp_dir().join(format!("crc-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let file = dir.join("report.txt");
    let out = crc(&[
        "dga",
        "verify",
        "--suite",
        "shifts",
        "--format",
        "text",
        "--out",
        file.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(&file).unwrap();
    assert!(text.starts_with("dga-shifts 0.1.0: pass"), "{text}");
    std::fs::remove_dir_all(&dir).unwrap();
}
