use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn pnc() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_pnc"));
    cmd.env_remove("PNC_CONFIG");
    cmd
}

fn run(args: &[&str]) -> Output {
    pnc().args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn scenarios() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

#[test]
fn demo_succeeds_on_both_backends() {
    for backend in ["concrete", "symbolic"] {
        let o = run(&["demo", "--bits", "test", "--backend", backend]);
        assert_eq!(o.status.code(), Some(0), "{backend}: {}", stderr(&o));
        assert!(stdout(&o).contains("result: billing committed"), "{}", stdout(&o));
    }
}

#[test]
fn revoked_demo_exits_one() {
    let o = run(&["demo", "--bits", "test", "--revoke-before-charge"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("RevokedCredential"), "{}", stdout(&o));
}

#[test]
fn invalid_arguments_exit_two() {
    for args in [
        &["demo", "--bits", "12"][..],
        &["demo", "--backend", "quantum"],
        &["demo", "--format", "xml"],
        &["bench", "--flows", "teleport", "--bits", "test"],
    ] {
        let o = run(args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", stderr(&o));
    }
}

#[test]
fn demo_csv_is_parseable() {
    let o = run(&["demo", "--bits", "test", "--backend", "symbolic", "--format", "csv"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("step,title,ok,detail"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.splitn(4, ',').collect()).collect();
    assert!(rows.len() >= 12);
    assert!(rows.iter().all(|r| r.len() == 4 && r[0].parse::<u8>().is_ok() && r[2] == "true"));
}

#[test]
fn ledger_dump_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let ledger = dir.path().join("ledger.txt");
    let trace = dir.path().join("trace.txt");
    let o = run(&[
        "demo",
        "--bits",
        "test",
        "--save-ledger",
        ledger.to_str().unwrap(),
        "--export-trace",
        trace.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let exported = std::fs::read_to_string(&trace).unwrap();
    assert!(exported.lines().all(|l| hex::decode(l).is_ok()));

    let o = run(&["ledger", "summary", "--input", ledger.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    for (kind, n) in [("cred_def", 1), ("did", 3), ("registry", 1), ("schema", 1), ("verinym", 1)] {
        let line = text.lines().find(|l| l.split_whitespace().next() == Some(kind)).unwrap();
        assert_eq!(line.split_whitespace().nth(1), Some(n.to_string().as_str()), "{kind}");
    }

    let o = run(&["ledger", "dump", "--input", ledger.to_str().unwrap()]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), std::fs::read_to_string(&ledger).unwrap());

    std::fs::write(&ledger, "not a ledger\n").unwrap();
    let o = run(&["ledger", "summary", "--input", ledger.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn keygen_is_reproducible_and_needs_a_passphrase() {
    let dir = tempfile::tempdir().unwrap();
    let keygen = |name: &str| {
        let out = dir.path().join(name);
        let genesis = dir.path().join(format!("{name}.genesis"));
        let o = pnc()
            .args(["keygen", "--role", "steward", "--seed", "4", "--iterations", "1000"])
            .args(["--out", out.to_str().unwrap(), "--genesis", genesis.to_str().unwrap()])
            .env("PNC_PASSPHRASE", "correct horse")
            .output()
            .unwrap();
        assert!(o.status.success(), "{}", stderr(&o));
        (stdout(&o), std::fs::read_to_string(out).unwrap(), std::fs::read_to_string(genesis).unwrap())
    };
    let a = keygen("a");
    let b = keygen("b");
    assert_eq!(a, b);
    assert!(a.0.starts_with("did:pnc:"));
    assert!(a.2.contains(&hex::encode(a.0.trim())));
    assert!(!a.1.contains("correct horse"));

    let o = pnc()
        .args(["keygen", "--role", "steward", "--out"])
        .arg(dir.path().join("c"))
        .env_remove("PNC_PASSPHRASE")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    let o = pnc()
        .args(["keygen", "--role", "mayor", "--out"])
        .arg(dir.path().join("d"))
        .env("PNC_PASSPHRASE", "x")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bench_reports_every_row() {
    let o = run(&["bench", "--bits", "test", "--repetitions", "2", "--format", "csv"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let header = text.lines().next().unwrap();
    assert!(header.starts_with("flow,message,direction,n,"));
    let messages: Vec<&str> = text.lines().skip(1).map(|l| l.split(',').nth(1).unwrap()).collect();
    assert_eq!(
        messages,
        [
            "GetCredOfferReq",
            "GetCredOfferRes",
            "CreateContractCredentialReq",
            "CreateContractCredentialRes",
            "RequestProofReq",
            "RequestProofRes",
            "ValidateContractProofReq",
            "ValidateContractProofRes"
        ]
    );
    for line in text.lines().skip(1) {
        assert_eq!(line.split(',').nth(3), Some("2"));
    }

    let o = run(&["bench", "--bits", "test", "--repetitions", "1", "--flows", "charge"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("Charge Authorization") && !stdout(&o).contains("Credential Installation"));
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("pnc.toml");
    std::fs::write(&cfg, "backend = \"symbolic\"\nbits = \"test\"\nformat = \"csv\"\n").unwrap();

    let o = run(&["--config", cfg.to_str().unwrap(), "demo"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("step,title,ok,detail"));

    let o = run(&["--config", cfg.to_str().unwrap(), "demo", "--format", "table"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("result: billing committed"));

    // The same file picked up through the environment.
    let o = pnc().arg("demo").env("PNC_CONFIG", &cfg).output().unwrap();
    assert!(stdout(&o).starts_with("step,title,ok,detail"));

    std::fs::write(&cfg, "colour = \"blue\"\n").unwrap();
    let o = run(&["--config", cfg.to_str().unwrap(), "demo"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["--config", dir.path().join("missing.toml").to_str().unwrap(), "demo"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn shipped_scenarios_pass() {
    let mut found = 0;
    for entry in std::fs::read_dir(scenarios()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            found += 1;
            let o = pnc().arg("scenario").arg(&path).output().unwrap();
            assert!(o.status.success(), "{}: {}{}", path.display(), stdout(&o), stderr(&o));
            assert!(!stdout(&o).contains("FAIL"));
        }
    }
    assert!(found >= 4);
}

#[test]
fn scenario_trace_export_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let path = scenarios().join("dolev-yao.toml");
    let export = |name: &str| {
        let out = dir.path().join(name);
        let o = pnc().arg("scenario").arg(&path).arg("--export-trace").arg(&out).output().unwrap();
        assert!(o.status.success());
        std::fs::read(out).unwrap()
    };
    assert_eq!(export("a"), export("b"));
}

#[test]
fn failing_scenario_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.toml");
    std::fs::write(
        &path,
        "seed = 1\nbackend = \"symbolic\"\n[[step]]\naction = \"setup\"\n[[assert]]\ncheck = \"billing_count\"\nemsp = 0\ncount = 3\n",
    )
    .unwrap();
    let o = pnc().args(["scenario", "--format", "csv"]).arg(&path).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    let text = stdout(&o);
    assert!(text.starts_with("assertion,pass,detail"));
    assert!(text.contains(",false,"));

    std::fs::write(&path, "seed = 1\n[[step]]\naction = \"fly\"\n").unwrap();
    let o = pnc().arg("scenario").arg(&path).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}
