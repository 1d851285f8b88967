use std::process::Command;

use ando_cli::config::Pipeline;
use ando_cli::{parse_config, run};
use ando_core::report::{CheckKind, VerificationReport};

const SWAP: &str = "level = 6\n[f]\ng1 = 1.0\n[g]\ng1 = 1.0\n[[t1]]\nre = [[0.0]]\n[[t2]]\nre = [[0.0]]\n";

fn run_as(text: &str, pipeline: Pipeline) -> VerificationReport {
    let mut cfg = parse_config(text).unwrap();
    cfg.pipeline = Some(pipeline);
    run(&cfg)
}

fn ando() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_ando"));
    c.env_remove("ANDO_TOLERANCE");
    c
}

#[test]
fn swap_colligation_scalar_example() {
    for pipeline in [Pipeline::Kernel, Pipeline::Dilation] {
        let rep = run_as(SWAP, pipeline);
        assert!(rep.passed(), "{}", rep.to_table());
        assert!(rep.checks().len() > 3);
        for c in rep.checks().iter().filter(|c| c.kind == CheckKind::Residual) {
            assert!(c.value <= 1e-10, "{} = {:e}", c.name, c.value);
        }
    }
    let rep = run_as(SWAP, Pipeline::Dilation);
    for name in ["colligation.unitarity", "transfer.fourier_round_trip", "dilation.identity[g1]"] {
        assert!(rep.check(name).is_some(), "missing {name}");
    }
}

#[test]
fn zero_pair_inequalities() {
    let rep = run_as(SWAP, Pipeline::Verify);
    assert!(rep.passed(), "{}", rep.to_table());
    assert_eq!(rep.env_value("variety.kind"), Some("natural"));
    assert!(rep.check("ando.p01.slack").is_some());
    assert!(rep.check("hermitian.h1.slack").is_some());
}

#[test]
fn nilpotent_pair_with_user_polynomials() {
    let text = r#"
[f]
g1 = 1.0
g1g1 = 1.0
[variety]
kind = "minpoly"
[[t1]]
re = [[0.0, 1.0], [0.0, 0.0]]
[[t2]]
re = [[0.0, 0.5], [0.0, 0.0]]
[polynomials]
set = "none"
bipolys = ["z1*w1 + 0.5*z1 - w1"]
hermitian = ["z1*w1*w1^*"]
"#;
    let rep = run_as(text, Pipeline::Verify);
    assert!(rep.passed(), "{}", rep.to_table());
    assert!(rep.check("ando.user1.slack").is_some());
    assert!(rep.check("hermitian.user_h1.slack").is_some());
    assert!(rep.check("ando.p01.slack").is_none());
}

#[test]
fn module_errors_become_failed_records() {
    let text = "[f]\ng1 = 1.0\n[[t1]]\nre = [[0.5, 0.2], [0.0, -0.3]]\n[[t2]]\nre = [[0.25, 0.1], [0.0, 0.4]]\n";
    let rep = run_as(text, Pipeline::Verify);
    assert!(!rep.passed());
    assert!(rep.check("pair").is_some_and(|c| !c.pass));
    assert!(rep.env_value("pair.error").is_some());

    let rep = run_as("[f]\ng1 = 1.0\n[[t1]]\nre = [[2.0]]\n", Pipeline::Kernel);
    assert!(!rep.passed());
    assert!(rep.check("model.membership").is_some_and(|c| !c.pass));

    let rep = run_as("[f]\ng1 = 1.0\n[[t1]]\nfile = \"missing.txt\"\n", Pipeline::Kernel);
    assert!(rep.check("input.t1").is_some_and(|c| !c.pass));
}

#[test]
fn two_letter_commutative_model() {
    let text = r#"
level = 4
[f]
g1 = 1.0
g2 = 1.0
[variety]
kind = "commutator"
[[t1]]
re = [[0.0, 0.5, 0.0], [0.0, 0.0, 0.5], [0.0, 0.0, 0.0]]
[[t1]]
re = [[0.0, 0.0, 0.3], [0.0, 0.0, 0.0], [0.0, 0.0, 0.0]]
"#;
    let rep = run_as(text, Pipeline::Kernel);
    assert!(rep.passed(), "{}", rep.to_table());
    assert!(rep.check("constrained_kernel.isometry").is_some());
}

const BATTERY: &str = "[battery]\nseed = 11\ncount = 6\nmax_dim = 4\ngrid_resolution = 64\n";

#[test]
fn seeded_battery_summary() {
    let rep = run_as(BATTERY, Pipeline::Battery);
    assert!(rep.passed(), "{}", rep.to_table());
    let s = rep.to_structured();
    let summary = s.lines().last().unwrap();
    assert!(summary.contains("min_slack="), "{summary}");
    assert!(rep.env_value("grid.p01").is_some());
    assert!(rep.env_value("item[000].ando.p01.lhs").is_some());
    assert!(rep.env_value("item[000].ando.p01.rhs[0]").is_some());
    assert_eq!(rep.env_value("battery.seed"), Some("11"));
    assert_eq!(rep, run_as(BATTERY, Pipeline::Battery));
}

#[test]
fn battery_report_bytes_are_stable_across_processes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("b.toml");
    std::fs::write(&cfg, BATTERY).unwrap();
    let out = |name: &str| {
        let path = dir.path().join(name);
        let st = ando().args(["battery", "--format", "structured", "-c"]).arg(&cfg).arg("-o").arg(&path).output().unwrap();
        assert!(st.status.success(), "{}", String::from_utf8_lossy(&st.stderr));
        assert_eq!(std::fs::read(&path).unwrap(), st.stdout);
        st.stdout
    };
    assert_eq!(out("a.txt"), out("b.txt"));
}

#[test]
fn exit_status_follows_the_verdict() {
    let dir = tempfile::tempdir().unwrap();
    let write = |name: &str, text: &str| {
        let p = dir.path().join(name);
        std::fs::write(&p, text).unwrap();
        p
    };
    let good = write("good.toml", SWAP);
    let bad = write("bad.toml", "[f]\ng1 = 1.0\n[[t1]]\nre = [[2.0]]\n");
    let broken = write("broken.toml", "[f]\ng0 = 1.0\ng1 = 1.0\n");
    let code = |args: &[&str], path: &std::path::Path| ando().args(args).arg(path).output().unwrap().status.code();
    assert_eq!(code(&["check-model", "-c"], &good), Some(0));
    assert_eq!(code(&["dilate", "-c"], &good), Some(0));
    assert_eq!(code(&["check-model", "-c"], &bad), Some(1));
    assert_eq!(code(&["check-model", "-c"], &broken), Some(2));

    let report = dir.path().join("r.txt");
    let st = ando().args(["check-model", "--format", "structured", "-c"]).arg(&bad).arg("-o").arg(&report).output().unwrap();
    assert_eq!(st.status.code(), Some(1));
    assert_eq!(code(&["report"], &report), Some(1));
    let good_report = dir.path().join("g.txt");
    ando().args(["dilate", "-c"]).arg(&good).arg("-o").arg(&good_report).output().unwrap();
    let st = ando().arg("report").arg(&good_report).output().unwrap();
    assert_eq!(st.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&st.stdout).contains("0 failed: PASS"));
}

#[test]
fn tolerance_sources() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, SWAP).unwrap();
    let env_tol = |args: &[&str], var: Option<&str>| {
        let mut c = ando();
        c.args(["check-model", "--format", "structured"]).args(args).arg("-c").arg(&cfg);
        if let Some(v) = var {
            c.env("ANDO_TOLERANCE", v);
        }
        let out = c.output().unwrap();
        let text = String::from_utf8(out.stdout).unwrap();
        let line = text.lines().find(|l| l.starts_with("env tol.identity=")).unwrap_or("").to_string();
        (line, String::from_utf8(out.stderr).unwrap(), out.status.code())
    };
    assert_eq!(env_tol(&[], None).0, "env tol.identity=1e-9");
    assert_eq!(env_tol(&[], Some("1e-6")).0, "env tol.identity=1e-6");
    assert_eq!(env_tol(&["--tol", "1e-7"], Some("1e-6")).0, "env tol.identity=1e-7");
    assert_eq!(env_tol(&[], Some("abc")).2, Some(2));

    std::fs::write(&cfg, format!("{SWAP}[tolerances]\nidentity = 1e-11\n")).unwrap();
    let (line, stderr, _) = env_tol(&["--tol", "1e-7"], None);
    assert_eq!(line, "env tol.identity=1e-11");
    assert!(stderr.contains("warning: tolerances.identity"), "{stderr}");
}
