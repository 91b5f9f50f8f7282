use std::path::PathBuf;
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn expsos(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_expsos"))
        .args(args)
        .env_remove("EXPSOS_SEED")
        .output()
        .expect("spawn expsos")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn example1(mode: &str, extra: &[&str]) -> Output {
    let key = fixture("example1.key.json");
    let mut args = vec!["outsource", "--key", key.to_str().unwrap(), "--mode", mode, "--u", "bd", "--a", "15a", "--seed", "11"];
    args.extend_from_slice(extra);
    expsos(&args)
}

#[test]
fn example1_yields_190_in_every_mode() {
    for mode in ["hcs", "ms", "mm"] {
        let out = example1(mode, &[]);
        assert_eq!(out.status.code(), Some(0), "{mode}: {}", stdout(&out));
        let text = stdout(&out);
        assert!(text.contains("result: be\n"), "{mode}: {text}");
        assert!(text.contains("(decimal): 190\n"), "{mode}: {text}");
    }
}

#[test]
fn forged_results_are_rejected_without_a_result() {
    let out = example1("ms", &["--behavior", "random-forger"]);
    assert_eq!(out.status.code(), Some(2));
    let text = stdout(&out);
    assert!(text.contains("REJECTED"));
    assert!(!text.contains("result:"));
}

#[test]
fn unit_base_gives_one() {
    let key = fixture("example1.key.json");
    let out = expsos(&["outsource", "--key", key.to_str().unwrap(), "--u", "1", "--a", "15a", "--seed", "2"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("result: 1\n"));
}

#[test]
fn seed_falls_back_to_environment() {
    let run = || {
        Command::new(env!("CARGO_BIN_EXE_expsos"))
            .args(["keygen", "--n-bits", "48", "--out"])
            .arg(std::env::temp_dir().join(format!("expsos-env-{}.json", std::process::id())))
            .env("EXPSOS_SEED", "77")
            .output()
            .unwrap()
    };
    let (a, b) = (run(), run());
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn keygen_output_drives_outsource() {
    let dir = tempfile::tempdir().unwrap();
    let key = dir.path().join("k.json");
    let key = key.to_str().unwrap();
    let out = expsos(&["keygen", "--n-bits", "64", "--n-factors", "2", "--out", key, "--seed", "5"]);
    assert_eq!(out.status.code(), Some(0));
    let out = expsos(&["outsource", "--key", key, "--u", "2", "--a", "a", "--seed", "6"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("(decimal): 1024\n"));
}

#[test]
fn bench_csv_is_stable_under_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let csv = |name: &str| {
        let path = dir.path().join(name);
        let out = expsos(&[
            "bench", "--bits", "64,96", "--b-bound", "0,4", "--trials", "3", "--seed", "9", "--csv",
            path.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0));
        std::fs::read(path).unwrap()
    };
    let (a, b) = (csv("a.csv"), csv("b.csv"));
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    assert_eq!(text.lines().next(), Some("bits,B,pi_oracle,pi_local,alpha,pass_rate,trials"));
    assert_eq!(text.lines().count(), 5);
    assert!(text.lines().nth(1).unwrap().starts_with("64,0,"));
    assert!(text.contains(",3.00,"));
}

#[test]
fn dsa_sign_then_verify() {
    let dir = tempfile::tempdir().unwrap();
    let params = fixture("tiny.dsa.json");
    let params = params.to_str().unwrap();
    let bundle = dir.path().join("sig.json");
    let bundle = bundle.to_str().unwrap();
    let out = expsos(&["dsa-sign", "--params", params, "--x", "3", "--message", "hi", "--out", bundle, "--seed", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let verify = |msg: &str| expsos(&["dsa-verify", "--params", params, "--bundle", bundle, "--message", msg, "--seed", "2"]);
    let ok = verify("hi");
    assert_eq!(ok.status.code(), Some(0));
    assert!(stdout(&ok).contains("VALID"));
    let bad = verify("ho");
    assert_eq!(bad.status.code(), Some(1));
    assert!(stdout(&bad).contains("INVALID"));
}

#[test]
fn ecmul_of_order_minus_one_is_negation() {
    let curve = fixture("f97.curve.json");
    for mode in ["hcs", "ms"] {
        let out = expsos(&["ecmul", "--curve", curve.to_str().unwrap(), "--s", "4", "--mode", mode, "--seed", "4"]);
        assert_eq!(out.status.code(), Some(0));
        assert!(stdout(&out).contains("point: (3, 5b)"), "{}", stdout(&out));
    }
}

#[test]
fn ibe_ciphertext_is_json() {
    let curve = fixture("f97.curve.json");
    let out = expsos(&["ibe-encrypt", "--curve", curve.to_str().unwrap(), "--g-pair", "5", "--message", "hello", "--seed", "3"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["c1"]["x"].is_string());
    assert!(v["c2"].is_string());
}

#[test]
fn usage_errors_exit_4() {
    assert_eq!(expsos(&["no-such-command"]).status.code(), Some(4));
    assert_eq!(expsos(&["outsource", "--u", "1"]).status.code(), Some(4));
    let out = example1("ms", &["--behavior", "nope"]);
    assert_eq!(out.status.code(), Some(4));
    let key = fixture("example1.key.json");
    let bad_hex = expsos(&["outsource", "--key", key.to_str().unwrap(), "--u", "xyz", "--a", "1"]);
    assert_eq!(bad_hex.status.code(), Some(4));
}

#[test]
fn help_exits_0() {
    let out = expsos(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("outsource"));
}

#[test]
fn unreachable_worker_exits_3() {
    let key = fixture("example1.key.json");
    let out = expsos(&["outsource", "--key", key.to_str().unwrap(), "--u", "bd", "--a", "15a", "--worker", "127.0.0.1:1"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn attack_demos_run() {
    for which in ["ce1", "ce2"] {
        let out = expsos(&["attack-demo", "--which", which, "--runs", "10", "--seed", "1"]);
        assert_eq!(out.status.code(), Some(0), "{which}");
    }
}

#[test]
fn outsource_through_a_served_worker() {
    use std::io::{BufRead, BufReader};
    let mut server = Command::new(env!("CARGO_BIN_EXE_expsos"))
        .args(["serve", "--listen", "127.0.0.1:0", "--seed", "1"])
        .stdout(std::process::Stdio::piped())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(server.stdout.take().unwrap()).read_line(&mut line).unwrap();
    let addr = line.trim().rsplit(' ').next().unwrap().to_string();
    let out = example1("ms", &["--worker", &addr]);
    server.kill().unwrap();
    let _ = server.wait();
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    assert!(stdout(&out).contains("(decimal): 190\n"));
}
