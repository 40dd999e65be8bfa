mod common;

use std::fs;
use std::sync::OnceLock;

use proptest::prelude::*;

use common::*;

fn small_key() -> &'static (tempfile::TempDir, String, String) {
    static KEY: OnceLock<(tempfile::TempDir, String, String)> = OnceLock::new();
    KEY.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let key = dir.path().join("owner.toml");
        let o = lrms(&["keygen", "--bits", "128", "--out", key.to_str().unwrap(), "--subject", "Mr. X"]);
        assert!(o.status.success(), "{}", stderr(&o));
        let public = dir.path().join("owner.pub.toml");
        (dir, key.to_str().unwrap().to_owned(), public.to_str().unwrap().to_owned())
    })
}

fn encrypt_decrypt(text: &[u8], enc_key: &str, dec_key: &str) -> std::process::Output {
    let dir = tempfile::tempdir().unwrap();
    let (plain, ct, back) = (dir.path().join("in.txt"), dir.path().join("ct.json"), dir.path().join("out.txt"));
    fs::write(&plain, text).unwrap();
    let o = lrms(&["record", "encrypt", "--key", enc_key, "--in", plain.to_str().unwrap(), "--out", ct.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let dna: serde_json::Value = serde_json::from_slice(&fs::read(&ct).unwrap()).unwrap();
    assert!(dna["dna"].as_str().unwrap().bytes().all(|b| b"ACGT".contains(&b)));
    let o = lrms(&["record", "decrypt", "--key", dec_key, "--in", ct.to_str().unwrap(), "--out", back.to_str().unwrap()]);
    if o.status.success() {
        assert_eq!(fs::read(&back).unwrap(), text);
    }
    o
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn record_files_round_trip(text in "[ -~]{1,400}") {
        let (_, private, public) = small_key();
        let o = encrypt_decrypt(text.as_bytes(), public, private);
        prop_assert!(o.status.success(), "{}", stderr(&o));
    }
}

#[test]
fn decrypt_needs_the_private_half() {
    let (_, _, public) = small_key();
    let o = encrypt_decrypt(b"Seller: Mr. X", public, public);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("private key"));
}

#[test]
fn wrong_key_is_an_error_not_garbage() {
    let (_, _, public) = small_key();
    let dir = tempfile::tempdir().unwrap();
    let other = dir.path().join("other.toml");
    assert!(lrms(&["keygen", "--bits", "128", "--out", other.to_str().unwrap()]).status.success());
    let o = encrypt_decrypt(b"Seller: Mr. X, Buyer: Mr. Y", public, other.to_str().unwrap());
    assert!(!o.status.success());
    assert!(stderr(&o).starts_with("error: "));
}

#[test]
fn newline_is_outside_the_alphabet() {
    let (_, _, public) = small_key();
    let dir = tempfile::tempdir().unwrap();
    let plain = dir.path().join("in.txt");
    fs::write(&plain, "two\nlines").unwrap();
    let o = lrms(&["record", "encrypt", "--key", public, "--in", plain.to_str().unwrap(), "--out", "/dev/null"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("unsupported-character"));
}

#[test]
fn encode_and_decode() {
    let o = lrms(&["record", "encode", "--text", "Seller"]);
    assert_eq!(stdout(&o).trim(), "294148484154");
    let o = lrms(&["record", "decode", "--text", "294148484154"]);
    assert_eq!(stdout(&o).trim(), "Seller");
    let o = lrms(&["--json", "record", "decode", "--text", "295"]);
    assert_eq!(o.status.code(), Some(2));
    let env: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(env["code"], "truncated-stream");
}

#[test]
fn bench_reports_exact_reduction() {
    for size in ["1", "37", "1000"] {
        let o = lrms(&["bench", "c2i", "--size", size, "--seed", "3"]);
        assert!(stdout(&o).contains("reduction: 33.33%"), "{}", stdout(&o));
    }
    let o = lrms(&["--json", "bench", "c2i", "--size", "10", "--samples", "4"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!((v["c2i_digits"].as_u64(), v["ascii_digits"].as_u64()), (Some(80), Some(120)));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(lrms(&["keygen"]).status.code(), Some(2));
    assert_eq!(lrms(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(lrms(&["keygen", "--bits", "4", "--out", "/tmp/x"]).status.code(), Some(2));
}

#[test]
fn offline_chain_commands() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    assert!(lrms(&["chain", "init", "--data-dir", d]).status.success());
    let o = lrms(&["chain", "verify", "--data-dir", d]);
    assert!(stdout(&o).contains("ok: 1 blocks verified"), "{}", stdout(&o));
    let o = lrms(&["--json", "chain", "tip", "--data-dir", d]);
    let tip: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(tip["transactions"][0]["kind"], "GENESIS");
    assert_eq!(lrms(&["chain", "show", "--block", "3", "--data-dir", d]).status.code(), Some(2));

    let chain = dir.path().join("chain.dat");
    let mut bytes = fs::read(&chain).unwrap();
    let last = bytes.len() - 1;
    bytes[last] ^= 1;
    fs::write(&chain, &bytes).unwrap();
    let o = lrms(&["chain", "verify", "--data-dir", d]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("block 0"), "{}", stderr(&o));
    let o = lrms(&["serve", "--port", "0", "--data-dir", d]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("refusing to start"), "{}", stderr(&o));
}

#[test]
fn certificates_through_the_service() {
    let data = tempfile::tempdir().unwrap();
    let served = Served::start(data.path());
    let url = served.url.as_str();
    let (_, private, _) = small_key();
    let keys = tempfile::tempdir().unwrap();
    let cert = keys.path().join("cert.json");

    let o = lrms(&["--json", "cert", "issue", "--url", url, "--key", private, "--out", cert.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let issued: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(issued["subject_id"], "Mr. X");
    let serial = issued["serial"].to_string();

    let o = lrms(&["cert", "show", "--url", url, "--serial", &serial]);
    assert!(stdout(&o).contains("subject Mr. X"));
    assert!(lrms(&["cert", "verify", "--url", url, "--serial", &serial]).status.success());
    assert!(lrms(&["cert", "verify", "--url", url, "--file", cert.to_str().unwrap()]).status.success());

    let mut forged: serde_json::Value = serde_json::from_slice(&fs::read(&cert).unwrap()).unwrap();
    forged["subject_id"] = "Mr. Z".into();
    fs::write(&cert, forged.to_string()).unwrap();
    assert_eq!(lrms(&["cert", "verify", "--url", url, "--file", cert.to_str().unwrap()]).status.code(), Some(4));

    let o = lrms(&["cert", "show", "--url", url, "--serial", "999"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("not-found"));
    assert!(lrms(&["chain", "verify", "--url", url]).status.success());
}

#[test]
fn scenario_is_repeatable() {
    let data = tempfile::tempdir().unwrap();
    let served = Served::start(data.path());
    for _ in 0..2 {
        let o = lrms(&["scenario", "full-trade", "--url", &served.url]);
        assert!(o.status.success(), "{}", stderr(&o));
        assert!(stdout(&o).lines().any(|l| l == "new owner: Mr. Y"));
    }
    let o = lrms(&["--json", "chain", "verify", "--url", &served.url]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!((v["ok"].as_bool(), v["height"].as_u64()), (Some(true), Some(5)));
}

#[test]
fn unreachable_service_is_an_api_failure() {
    let o = lrms(&["scenario", "full-trade", "--url", "http://127.0.0.1:9"]);
    assert_eq!(o.status.code(), Some(3));
}
