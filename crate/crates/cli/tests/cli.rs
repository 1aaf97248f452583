use std::process::{Command, Output};

fn ike_sim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ike-sim"))
        .args(args)
        .env_remove("IKE_SIM_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("utf-8 output")
}

fn message_count(text: &str) -> usize {
    text.lines().filter(|l| l.starts_with("record=message ")).count()
}

#[test]
fn improved_handshake_has_five_messages() {
    let out = ike_sim(&[
        "handshake",
        "--curve",
        "K-163",
        "--mode",
        "improved",
        "--seed",
        "7",
        "--format",
        "records",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert_eq!(message_count(&text), 5);
    assert!(text.contains("record=outcome result=established"), "{text}");
}

#[test]
fn baseline_handshake_has_six_messages() {
    let out = ike_sim(&[
        "handshake",
        "--curve",
        "K-163",
        "--mode",
        "baseline",
        "--seed",
        "7",
        "--format",
        "records",
    ]);
    assert!(out.status.success());
    assert_eq!(message_count(&stdout(&out)), 6);
}

#[test]
fn text_transcript_marks_encrypted_header() {
    let out = ike_sim(&["handshake", "--curve", "K-163", "--seed", "7"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("transcript (5 messages)"), "{text}");
    assert!(text.contains("HDR* SYM_BLOB"));
    assert!(text.contains("outcome: established"));
}

#[test]
fn unknown_curve_is_usage_error() {
    let out = ike_sim(&["handshake", "--curve", "K-999"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("K-999"));
    let out = ike_sim(&["handshake", "--mode", "aggressive"]);
    assert_eq!(out.status.code(), Some(2));
    let out = ike_sim(&["attack", "--scenario", "replay"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn eavesdrop_verdicts() {
    let improved = ike_sim(&["attack", "--scenario", "eavesdrop", "--curve", "K-163"]);
    assert!(improved.status.success());
    assert!(stdout(&improved).contains("verdict: no leakage (expected)"));

    let baseline = ike_sim(&["attack", "--scenario", "eavesdrop", "--curve", "K-163", "--mode", "baseline"]);
    assert!(baseline.status.success());
    assert!(stdout(&baseline).contains("SA leaked"));
}

#[test]
fn ke_swap_is_detected() {
    for mode in ["improved", "baseline"] {
        let out = ike_sim(&["attack", "--scenario", "mitm_ke_swap", "--curve", "K-163", "--mode", mode]);
        assert!(out.status.success(), "{mode}");
        assert!(stdout(&out).contains("aborted: signature failure"), "{mode}");
    }
}

#[test]
fn tamper_sweep_reports_undetected_positions() {
    let out = ike_sim(&["attack", "--scenario", "tamper_sweep", "--curve", "K-163", "--mode", "baseline"]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("undetected: SA_r/flip, SA_r/substitute"));
    let out = ike_sim(&["attack", "--scenario", "tamper_sweep", "--curve", "K-163"]);
    assert!(out.status.success());
    assert!(!stdout(&out).contains("undetected:"));
}

#[test]
fn flood_is_measurement_only() {
    let out = ike_sim(&["attack", "--scenario", "flood:10", "--curve", "K-163"]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("measurement only, no verdict"));
}

#[test]
fn compare_columns() {
    let out = ike_sim(&["compare", "--curve", "K-163", "--format", "records"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[0].contains("mode=baseline") && rows[0].contains("messages=6"));
    assert!(rows[0].contains("public_key_applying=—") && rows[0].contains("signatures=ECSig(2)"));
    assert!(rows[1].contains("mode=improved") && rows[1].contains("messages=5"));
    assert!(rows[1].contains("public_key_applying=ECC(2)") && rows[1].contains("signatures=ECSig(2)"));
}

#[test]
fn vectors_are_stable() {
    let a = ike_sim(&["vectors", "--seed", "3"]);
    let b = ike_sim(&["vectors", "--seed", "3"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let text = stdout(&a);
    assert!(text.lines().all(|l| l.starts_with("record=")));
    assert_eq!(text.lines().filter(|l| l.starts_with("record=curve ")).count(), 5);
}

#[test]
fn seed_from_environment() {
    let with_env = Command::new(env!("CARGO_BIN_EXE_ike-sim"))
        .args(["vectors"])
        .env("IKE_SIM_SEED", "11")
        .output()
        .unwrap();
    let with_flag = ike_sim(&["vectors", "--seed", "11"]);
    assert_eq!(with_env.stdout, with_flag.stdout);
    assert!(stdout(&with_env).starts_with("record=vectors seed=11\n"));
}

#[test]
fn out_writes_file() {
    let path = std::env::temp_dir().join(format!("ike-sim-out-{}.txt", std::process::id()));
    let out = ike_sim(&["compare", "--curve", "K-163", "--out", path.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let written = std::fs::read_to_string(&path).unwrap();
    std::fs::remove_file(&path).ok();
    assert!(written.starts_with("comparison on K-163"));
}
