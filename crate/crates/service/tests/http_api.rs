mod common;

use std::fs;

use serde_json::json;

use common::*;
use lrms_service::{AppState, ServiceConfig, StartupError};

fn is_acgt(s: &str) -> bool {
    !s.is_empty() && s.bytes().all(|b| b"ACGT".contains(&b))
}

#[test]
fn fresh_directory_boots_with_genesis() {
    let dir = tempfile::tempdir().unwrap();
    let server = start(dir.path());
    let c = Client::new(&server.base);

    let h = c.get("/health", None);
    assert_eq!(h.status, 200);
    assert_eq!(h.json()["status"], "ok");
    assert_eq!(h.json()["height"], 1);
    assert_eq!(h.json()["key_bits"], 1024);

    let tip = c.get("/chain/tip", None).json();
    assert_eq!(tip["block_id"], 0);
    assert_eq!(tip["transactions"][0]["kind"], "GENESIS");
    assert_eq!(c.get("/chain/verify", None).json()["ok"], true);

    let root = c.get("/ca/certificates/0", None).json();
    assert_eq!(root["serial"], 0);
    assert_eq!(root["subject_id"], root["issuer_id"]);
    for f in ["chain.dat", "chain.idx", "params.json", "ca_key.json", "certs.jsonl"] {
        assert!(dir.path().join(f).exists(), "{f} missing");
    }
}

#[test]
fn full_trade_over_http() {
    let dir = tempfile::tempdir().unwrap();
    let server = start(dir.path());
    let c = Client::new(&server.base);
    let mut rng = rng(5);

    let x = identity(&server, &c, "Mr. X", &mut rng);
    let y = identity(&server, &c, "Mr. Y", &mut rng);
    let bank = identity(&server, &c, "Bank", &mut rng);

    let reg = register(&c, &x, 8000, 3000);
    assert_eq!(reg.status, 200, "{}", reg.text);
    assert_eq!(register(&c, &y, 8000, 3000).code(), "duplicate-active-record");

    let tx = login(&server, &c, &x, &mut rng);
    let ty = login(&server, &c, &y, &mut rng);
    let tb = login(&server, &c, &bank, &mut rng);

    let records = c.get("/lrd/records?owner=Mr.%20X", Some(&tx));
    assert_eq!(records.status, 200, "{}", records.text);
    assert!(is_acgt(records.json()["records"][0]["dna"].as_str().unwrap()));
    assert_eq!(c.get("/lrd/records?owner=Mr.%20X", Some(&ty)).code(), "unauthorized");

    let price = json!({ "amount": "500000", "currency": "BDT" });
    let bad = c.post("/listings", Some(&ty), &json!({ "dag_number": 8000, "khatiayan_number": 3000, "asking_price": price }));
    assert_eq!((bad.status, bad.code().as_str()), (403, "not-owner"));
    let listing = c.post("/listings", Some(&tx), &json!({ "dag_number": 8000, "khatiayan_number": 3000, "asking_price": price }));
    assert_eq!(listing.status, 200, "{}", listing.text);
    let listing_id = listing.json()["listing_id"].as_str().unwrap().to_owned();

    let found = c.get("/listings?dag=8000&status=OPEN", None).json();
    assert_eq!(found.as_array().unwrap().len(), 1);
    assert_eq!(c.get("/listings?dag=1", None).json().as_array().unwrap().len(), 0);
    assert_eq!(c.get("/listings?max_price=10", None).json().as_array().unwrap().len(), 0);

    let deed = c.post("/deeds", Some(&ty), &json!({ "listing_id": listing_id }));
    assert_eq!(deed.status, 200, "{}", deed.text);
    let deed = deed.json();
    assert_eq!(deed["state"], "DRAFT");
    let deed_id = deed["deed_id"].as_str().unwrap().to_owned();

    let early = sign_deed(&server, &c, &deed, "bank", &bank, &mut rng);
    assert_eq!((early.status, early.code().as_str()), (409, "premature-bank-signature"));
    let wrong = sign_deed(&server, &c, &deed, "seller", &y, &mut rng);
    assert_eq!((wrong.status, wrong.code().as_str()), (403, "wrong-party"));

    assert_eq!(sign_deed(&server, &c, &deed, "seller", &x, &mut rng).json()["state"], "PARTIALLY_SIGNED");
    assert_eq!(sign_deed(&server, &c, &deed, "buyer", &y, &mut rng).json()["state"], "PARTIES_SIGNED");
    assert_eq!(sign_deed(&server, &c, &deed, "buyer", &y, &mut rng).code(), "already-signed");
    assert_eq!(sign_deed(&server, &c, &deed, "bank", &bank, &mut rng).json()["state"], "BANK_SIGNED");

    let settled = c.post(&format!("/deeds/{deed_id}/settle"), Some(&tb), &json!({}));
    assert_eq!(settled.status, 200, "{}", settled.text);
    let block_id = settled.json()["block_id"].as_u64().unwrap();
    assert_eq!(settled.json()["deed"]["state"], "REGISTERED");
    assert_eq!(c.get(&format!("/deeds/{deed_id}"), None).json()["registered_block"], block_id);

    let block = c.get(&format!("/chain/blocks/{block_id}"), None).json();
    assert_eq!(block["transactions"][0]["kind"], "TRANSFER");
    assert_eq!(block["transactions"][0]["owner_id"], "Mr. Y");
    assert!(is_acgt(block["transactions"][0]["dna"].as_str().unwrap()));

    let now_y = c.get("/lrd/records?owner=Mr.%20Y", Some(&ty));
    assert_eq!(now_y.json()["records"][0]["block_id"], block_id);
    let gone = c.get("/lrd/records?owner=Mr.%20X", Some(&tx));
    assert_eq!((gone.status, gone.code().as_str()), (404, "no-active-record"));
    assert_eq!(c.get(&format!("/listings/{listing_id}"), None).json()["status"], "SOLD");
    assert_eq!(c.get("/chain/verify", None).json()["ok"], true);

    for body in c.seen.borrow().iter() {
        assert!(!body.contains("Dag number"), "plaintext leaked: {body}");
    }
    let chain = fs::read(dir.path().join("chain.dat")).unwrap();
    assert!(!chain.windows(10).any(|w| w == b"Dag number"));
}

#[test]
fn abandon_reopens_listing() {
    let dir = tempfile::tempdir().unwrap();
    let server = start(dir.path());
    let c = Client::new(&server.base);
    let mut rng = rng(6);
    let x = identity(&server, &c, "S", &mut rng);
    let y = identity(&server, &c, "B", &mut rng);
    register(&c, &x, 1, 2);
    let (tx, ty) = (login(&server, &c, &x, &mut rng), login(&server, &c, &y, &mut rng));
    let l = c.post("/listings", Some(&tx), &json!({ "dag_number": 1, "khatiayan_number": 2, "asking_price": { "amount": "10", "currency": "BDT" } })).json();
    let d = c.post("/deeds", Some(&ty), &json!({ "listing_id": l["listing_id"] })).json();
    let path = format!("/deeds/{}/abandon", d["deed_id"].as_str().unwrap());
    assert_eq!(c.post(&path, None, &json!({})).code(), "invalid-session");
    let r = c.post(&path, Some(&ty), &json!({}));
    assert_eq!(r.json()["state"], "ABANDONED");
    assert_eq!(c.post(&path, Some(&ty), &json!({})).code(), "deed-not-abandonable");
    let l = c.get(&format!("/listings/{}", l["listing_id"].as_str().unwrap()), None).json();
    assert_eq!(l["status"], "OPEN");
}

#[test]
fn every_error_uses_the_envelope() {
    let dir = tempfile::tempdir().unwrap();
    let server = start(dir.path());
    let c = Client::new(&server.base);

    let cases = [
        (c.get("/nope", None), 404, "not-found"),
        (c.get("/chain/blocks/99", None), 404, "not-found"),
        (c.get("/chain/blocks/x", None), 400, "invalid-request"),
        (c.get("/ca/certificates/42", None), 404, "not-found"),
        (c.post("/chain/tip", None, &json!({})), 405, "method-not-allowed"),
        (c.post_raw("/auth/challenges", "{not json"), 400, "invalid-request"),
        (c.post("/ca/certificates", None, &json!({ "subject_id": "A", "subject_beta": "1" })), 400, "invalid-public-key"),
        (c.post("/ca/certificates", None, &json!({ "subject_id": "A", "subject_beta": "zz" })), 400, "invalid-public-key"),
        (c.post("/ca/certificates", None, &json!({ "subject_id": "A", "subject_beta": "5", "validity_days": 0 })), 400, "invalid-validity"),
        (c.get("/lrd/records?owner=A", None), 401, "invalid-session"),
        (c.get("/lrd/records?owner=A", Some("deadbeef")), 401, "invalid-session"),
        (c.get("/listings?status=GONE", None), 400, "invalid-request"),
        (c.get("/deeds/D-9", None), 404, "deed-not-found"),
        (c.get("/listings/L-9", None), 404, "listing-not-found"),
        (c.post("/auth/sessions", None, &json!({ "challenge_id": "x", "cert_serial": 0, "signature": { "r": "1", "s": "1" } })), 404, "challenge-not-found"),
        (c.post("/deeds/D-1/signatures", None, &json!({ "role": "judge", "cert_serial": 0, "signature": { "r": "1", "s": "1" } })), 400, "invalid-request"),
    ];
    for (reply, status, code) in cases {
        assert_eq!((reply.status, reply.code().as_str()), (status, code), "{}", reply.text);
        assert!(reply.json()["message"].is_string());
    }
}

#[test]
fn challenges_are_single_use() {
    let dir = tempfile::tempdir().unwrap();
    let server = start(dir.path());
    let c = Client::new(&server.base);
    let mut rng = rng(8);
    let x = identity(&server, &c, "X", &mut rng);
    let stranger = lrms_core::crypto::keygen(&server.state.params, &mut rng);

    let ch = c.post("/auth/challenges", None, &json!({ "subject_id": "X" })).json();
    let nonce = hex::decode(ch["nonce"].as_str().unwrap()).unwrap();
    let forged = lrms_core::crypto::sign(&server.state.params, stranger.private_a(), &lrms_core::crypto::sha256(&nonce), &mut rng);
    let body = json!({ "challenge_id": ch["challenge_id"], "cert_serial": x.serial, "signature": signature_json(&forged) });
    assert_eq!(c.post("/auth/sessions", None, &body).code(), "bad-signature");
    assert_eq!(c.post("/auth/sessions", None, &body).code(), "replayed-challenge");
}

#[test]
fn registrar_token_guards_registration() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = ServiceConfig::new(dir.path());
    config.registrar_token = Some("sesame".into());
    let server = start_with(config);
    let c = Client::new(&server.base);
    let mut rng = rng(9);
    let x = identity(&server, &c, "X", &mut rng);
    assert_eq!(register(&c, &x, 5, 5).code(), "unauthorized");
    let body = json!({ "cert_serial": x.serial, "land": land(5, 5), "seller_name": "A", "buyer_name": "X", "tx_label": "T" });
    assert_eq!(c.post("/lrd/records", Some("sesame"), &body).status, 200);
}

#[test]
fn tampered_chain_refuses_startup() {
    let dir = tempfile::tempdir().unwrap();
    {
        let server = start(dir.path());
        let c = Client::new(&server.base);
        let mut rng = rng(10);
        let x = identity(&server, &c, "X", &mut rng);
        for i in 0..3 {
            assert_eq!(register(&c, &x, 100 + i, 1).status, 200);
        }
    }
    let path = dir.path().join("chain.dat");
    let original = fs::read(&path).unwrap();
    // A sample of positions across every block; the exhaustive sweep lives in the core crate.
    for pos in (0..original.len()).step_by(37) {
        let mut bytes = original.clone();
        bytes[pos] ^= 0x20;
        fs::write(&path, &bytes).unwrap();
        match AppState::open(ServiceConfig::new(dir.path())) {
            Err(StartupError::CorruptChain(v)) => assert!(v.position <= 3),
            Err(other) => panic!("byte {pos}: unexpected startup error {other}"),
            Ok(_) => panic!("byte {pos}: tampered chain accepted"),
        }
    }
    fs::write(&path, &original).unwrap();
    assert!(AppState::open(ServiceConfig::new(dir.path())).is_ok());
}

#[test]
fn state_survives_restart() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = rng(11);
    let (x, listing_id) = {
        let server = start(dir.path());
        let c = Client::new(&server.base);
        let x = identity(&server, &c, "X", &mut rng);
        register(&c, &x, 7, 7);
        let tx = login(&server, &c, &x, &mut rng);
        let l = c.post("/listings", Some(&tx), &json!({ "dag_number": 7, "khatiayan_number": 7, "asking_price": { "amount": "1.5", "currency": "BDT" } }));
        (x, l.json()["listing_id"].as_str().unwrap().to_owned())
    };
    let server = start(dir.path());
    let c = Client::new(&server.base);
    assert_eq!(c.get("/health", None).json()["height"], 2);
    assert_eq!(c.get(&format!("/listings/{listing_id}"), None).json()["status"], "OPEN");
    let tx = login(&server, &c, &x, &mut rng);
    assert_eq!(c.get("/lrd/records?owner=X", Some(&tx)).json()["records"][0]["block_id"], 1);
}

#[test]
fn concurrent_reads_during_appends() {
    let dir = tempfile::tempdir().unwrap();
    let server = start(dir.path());
    let c = Client::new(&server.base);
    let mut rng = rng(12);
    let x = identity(&server, &c, "X", &mut rng);
    let stop = std::sync::atomic::AtomicBool::new(false);

    std::thread::scope(|s| {
        let readers: Vec<_> = (0..4)
            .map(|_| {
                let (base, stop) = (server.base.clone(), &stop);
                s.spawn(move || {
                    let c = Client::new(&base);
                    let mut last = 0;
                    let mut reads = 0;
                    while !stop.load(std::sync::atomic::Ordering::Relaxed) || reads < 5 {
                        let tip = c.get("/chain/tip", None);
                        assert_eq!(tip.status, 200);
                        let id = tip.json()["block_id"].as_u64().unwrap();
                        assert!(id >= last, "tip went backwards");
                        last = id;
                        let v = c.get("/chain/verify", None).json();
                        assert_eq!(v["ok"], true, "{v}");
                        let b = c.get(&format!("/chain/blocks/{id}"), None);
                        assert_eq!(b.status, 200);
                        reads += 1;
                    }
                })
            })
            .collect();
        for i in 0..8 {
            assert_eq!(register(&c, &x, 500 + i, 1).status, 200);
        }
        stop.store(true, std::sync::atomic::Ordering::Relaxed);
        for r in readers {
            r.join().unwrap();
        }
    });
    assert_eq!(c.get("/health", None).json()["height"], 9);
}
