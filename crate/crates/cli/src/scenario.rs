//! The scripted trade: registration, login, listing, deed, three signatures, settlement, retrieval.

use rand::Rng;
use serde::Serialize;

use lrms_core::crypto::{keygen, KeyPair};
use lrms_core::dna::DnaString;
use lrms_core::pipeline::{decrypt_record, DnaCiphertext};
use lrms_core::registry::LandInfo;
use lrms_core::trading::cert::{verify_certificate, CaPublic, Certificate};
use lrms_core::trading::deed::{generate_transaction_id, DeedState, Price};
use lrms_core::trading::listing::Listing;
use lrms_service::views::*;

use crate::client::Client;
use crate::CliError;

pub const SELLER: &str = "Mr. X";
pub const BUYER: &str = "Mr. Y";

#[derive(Debug, Clone, Serialize)]
pub struct ScenarioReport {
    pub dag_number: u64,
    pub khatiayan_number: u64,
    pub register_block: u64,
    pub listing_id: String,
    pub deed_id: String,
    pub transfer_block: u64,
    pub new_owner: String,
    pub steps: Vec<String>,
}

struct Party {
    name: String,
    key: KeyPair,
    cert: Certificate,
}

fn state_name(s: DeedState) -> String {
    serde_json::to_value(s).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default()
}

fn check(ok: bool, what: impl Into<String>) -> Result<(), CliError> {
    if ok {
        Ok(())
    } else {
        Err(CliError::Verification(what.into()))
    }
}

fn provision(client: &Client, ca: &CaPublic, name: &str) -> Result<Party, CliError> {
    let key = keygen(&ca.params, &mut rand::thread_rng());
    let cert = client.issue_certificate(name, &ca.params, key.public_beta(), None)?;
    check(verify_certificate(ca, &cert, lrms_service::unix_now()), format!("certificate for {name} does not verify"))?;
    check(cert.subject_beta == *key.public_beta(), "certificate carries a different key")?;
    Ok(Party { name: name.to_owned(), key, cert })
}

fn decrypt_view(party: &Party, rec: &RecordView) -> Result<String, CliError> {
    check(!rec.dna.is_empty() && rec.dna.bytes().all(|b| b"ACGT".contains(&b)), "payload is not a DNA string")?;
    let dna = DnaString::parse(&rec.dna).map_err(|e| CliError::Verification(e.to_string()))?;
    let fp = hex::decode(&rec.key_fingerprint).ok().and_then(|v| v.try_into().ok()).unwrap_or([0; 32]);
    let ct = DnaCiphertext { dna, key_fingerprint: fp };
    let plain = decrypt_record(&party.cert.subject_params, party.key.private_a(), &ct)
        .map_err(|e| CliError::Verification(format!("local decryption failed: {e}")))?;
    Ok(plain.into_string())
}

/// Runs the trade against `client`, reporting each step through `log`.
pub fn full_trade(client: &Client, log: &mut dyn FnMut(&str)) -> Result<ScenarioReport, CliError> {
    let mut steps = Vec::new();
    let mut say = |line: String| {
        log(&line);
        steps.push(line);
    };

    let health = client.health()?;
    let ca = client.ca_public()?;
    let x = provision(client, &ca, SELLER)?;
    let y = provision(client, &ca, BUYER)?;
    let bank = provision(client, &ca, &health.bank_id)?;
    say(format!(
        "[1] CA {} issued certificates: {} #{}, {} #{}, {} #{}",
        ca.issuer_id, x.name, x.cert.serial, y.name, y.cert.serial, bank.name, bank.cert.serial
    ));

    // A fresh parcel each run so repeated scenarios never collide.
    let mut rng = rand::thread_rng();
    let (land, register): (LandInfo, RegisterResponse) = {
        let mut attempt = 0;
        loop {
            let land = LandInfo::new(rng.gen_range(10_000..1_000_000), rng.gen_range(1_000..100_000), "2000", "Shotangsho")?;
            let req = RegisterRequest {
                cert_serial: x.cert.serial,
                land: land.clone(),
                seller_name: "Mr. W".into(),
                buyer_name: x.name.clone(),
                tx_label: generate_transaction_id(&mut rng),
            };
            match client.post::<RegisterResponse, _>("/lrd/records", None, &req) {
                Ok(r) => break (land, r),
                Err(CliError::Api(e)) if e.code == "duplicate-active-record" && attempt < 5 => attempt += 1,
                Err(e) => return Err(e),
            }
        }
    };
    say(format!(
        "[2] LRD registered parcel dag {} / khatiayan {} to {} in block {}",
        land.dag_number, land.khatiayan_number, x.name, register.block_id
    ));

    let sx = client.login(&x.name, &x.cert, &x.key)?;
    let mine = client.records(&x.name, &sx.token)?;
    let rec = mine
        .records
        .iter()
        .find(|r| r.block_id == register.block_id)
        .ok_or_else(|| CliError::Verification("registered record not returned to its owner".into()))?;
    let text = decrypt_view(&x, rec)?;
    check(text.contains(&format!("Buyer: {}", x.name)), "seller's record names someone else")?;
    say(format!("[3] {} logged in and fetched {} DNA bases from block {}; decrypted locally: {text}", x.name, rec.dna.len(), rec.block_id));

    let listing: Listing = client.post(
        "/listings",
        Some(&sx.token),
        &PostListingRequest {
            dag_number: land.dag_number,
            khatiayan_number: land.khatiayan_number,
            asking_price: Price::new("500000", "BDT")?,
        },
    )?;
    let dag = land.dag_number.to_string();
    let found: Vec<Listing> = client.get_query("/listings", &[("dag", dag.as_str()), ("status", "OPEN")], None)?;
    check(found.iter().any(|l| l.listing_id == listing.listing_id), "listing not visible in search")?;
    say(format!("[4] {} posted listing {}; {} found it by dag number", x.name, listing.listing_id, y.name));

    let sy = client.login(&y.name, &y.cert, &y.key)?;
    let deed: DeedView = client.post(
        "/deeds",
        Some(&sy.token),
        &CreateDeedRequest { listing_id: listing.listing_id.clone(), agreed_price: None },
    )?;
    check(deed.state == DeedState::Draft, "new deed is not a draft")?;
    say(format!("[5] {} logged in and drew up deed {} ({}), state {}", y.name, deed.deed.deed_id, deed.deed.transaction_id, state_name(deed.state)));

    let deed = client.sign_deed(&deed, "seller", &x.cert, &x.key)?;
    say(format!("[6] seller {} signed, state {}", x.name, state_name(deed.state)));
    let deed = client.sign_deed(&deed, "buyer", &y.cert, &y.key)?;
    check(deed.state == DeedState::PartiesSigned, "deed not parties-signed after both signatures")?;
    say(format!("[7] buyer {} signed, state {}", y.name, state_name(deed.state)));

    let deed = client.sign_deed(&deed, "bank", &bank.cert, &bank.key)?;
    check(deed.state == DeedState::BankSigned, "deed not bank-signed")?;
    let sb = client.login(&bank.name, &bank.cert, &bank.key)?;
    let settled: SettleResponse = client.post(&format!("/deeds/{}/settle", deed.deed.deed_id), Some(&sb.token), &serde_json::json!({}))?;
    check(settled.deed.state == DeedState::Registered, "deed not registered after settlement")?;
    let block: BlockView = client.get(&format!("/chain/blocks/{}", settled.block_id), None)?;
    check(block.transactions.iter().any(|t| t.kind == "TRANSFER" && t.owner_id == y.name), "transfer block lacks the buyer")?;
    say(format!("[8] {} signed and settled; TRANSFER block {} appended", bank.name, settled.block_id));

    let theirs = client.records(&y.name, &sy.token)?;
    let rec = theirs
        .records
        .iter()
        .find(|r| r.block_id == settled.block_id)
        .ok_or_else(|| CliError::Verification("buyer does not hold the transferred record".into()))?;
    let text = decrypt_view(&y, rec)?;
    check(
        text.contains(&format!("Seller: {}, Buyer: {}", x.name, y.name)) && text.contains(&deed.deed.transaction_id),
        "transferred record has the wrong parties",
    )?;
    match client.records(&x.name, &sx.token) {
        Err(CliError::Api(e)) if e.code == "no-active-record" => {}
        Ok(r) if r.records.iter().all(|r| r.land.key() != land.key()) => {}
        Ok(_) => return Err(CliError::Verification("seller still owns the parcel".into())),
        Err(e) => return Err(e),
    }
    let verify: VerifyResponse = client.get("/chain/verify", None)?;
    check(verify.ok, "chain verification failed after the trade")?;
    say(format!("[9] {} retrieved and decrypted: {text}", y.name));
    say(format!("    {} no longer holds the parcel; chain verified at height {}", x.name, verify.height));
    say(format!("new owner: {}", y.name));

    Ok(ScenarioReport {
        dag_number: land.dag_number,
        khatiayan_number: land.khatiayan_number,
        register_block: register.block_id,
        listing_id: listing.listing_id,
        deed_id: deed.deed.deed_id,
        transfer_block: settled.block_id,
        new_owner: y.name,
        steps,
    })
}
