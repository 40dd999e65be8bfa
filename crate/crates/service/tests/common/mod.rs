#![allow(dead_code)]

use std::path::Path;
use std::sync::Arc;

use rand::rngs::StdRng;
use rand::SeedableRng;
use serde_json::{json, Value};

use lrms_core::crypto::{keygen, sign, sha256, KeyPair, Signature};
use lrms_service::{AppState, ServiceConfig};

pub struct Server {
    pub base: String,
    pub state: Arc<AppState>,
    _runtime: tokio::runtime::Runtime,
}

pub fn start(dir: &Path) -> Server {
    start_with(ServiceConfig::new(dir))
}

pub fn start_with(config: ServiceConfig) -> Server {
    let state = Arc::new(AppState::open(config).expect("service starts"));
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build().unwrap();
    let listener = runtime.block_on(tokio::net::TcpListener::bind("127.0.0.1:0")).unwrap();
    let base = format!("http://{}", listener.local_addr().unwrap());
    runtime.spawn(lrms_service::serve_on(listener, Arc::clone(&state)));
    Server { base, state, _runtime: runtime }
}

pub struct Reply {
    pub status: u16,
    pub text: String,
}

impl Reply {
    pub fn json(&self) -> Value {
        serde_json::from_str(&self.text).unwrap_or_else(|e| panic!("not json ({e}): {}", self.text))
    }

    pub fn code(&self) -> String {
        self.json()["code"].as_str().unwrap_or_default().to_owned()
    }
}

pub struct Client {
    pub base: String,
    agent: ureq::Agent,
    /// Every response body seen, for privacy scans.
    pub seen: std::cell::RefCell<Vec<String>>,
}

impl Client {
    pub fn new(base: &str) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder().http_status_as_error(false).build().into();
        Client { base: base.to_owned(), agent, seen: Default::default() }
    }

    fn finish(&self, resp: Result<ureq::http::Response<ureq::Body>, ureq::Error>) -> Reply {
        let mut resp = resp.expect("transport ok");
        let status = resp.status().as_u16();
        let text = resp.body_mut().read_to_string().unwrap();
        self.seen.borrow_mut().push(text.clone());
        Reply { status, text }
    }

    pub fn get(&self, path: &str, token: Option<&str>) -> Reply {
        let mut req = self.agent.get(format!("{}{path}", self.base));
        if let Some(t) = token {
            req = req.header("Authorization", format!("Bearer {t}"));
        }
        self.finish(req.call())
    }

    pub fn post(&self, path: &str, token: Option<&str>, body: &Value) -> Reply {
        let mut req = self.agent.post(format!("{}{path}", self.base));
        if let Some(t) = token {
            req = req.header("Authorization", format!("Bearer {t}"));
        }
        self.finish(req.send_json(body))
    }

    pub fn post_raw(&self, path: &str, body: &str) -> Reply {
        let req = self.agent.post(format!("{}{path}", self.base)).header("Content-Type", "application/json");
        self.finish(req.send(body))
    }
}

pub struct Identity {
    pub name: String,
    pub key: KeyPair,
    pub serial: u64,
}

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

pub fn identity(server: &Server, client: &Client, name: &str, rng: &mut StdRng) -> Identity {
    let key = keygen(&server.state.params, rng);
    let r = client.post(
        "/ca/certificates",
        None,
        &json!({ "subject_id": name, "subject_beta": key.public_beta().to_string() }),
    );
    assert_eq!(r.status, 200, "{}", r.text);
    Identity { name: name.to_owned(), key, serial: r.json()["serial"].as_u64().unwrap() }
}

pub fn signature_json(sig: &Signature) -> Value {
    json!({ "r": sig.r.to_string(), "s": sig.s.to_string() })
}

pub fn login(server: &Server, client: &Client, who: &Identity, rng: &mut StdRng) -> String {
    let ch = client.post("/auth/challenges", None, &json!({ "subject_id": who.name })).json();
    let nonce = hex::decode(ch["nonce"].as_str().unwrap()).unwrap();
    let sig = sign(&server.state.params, who.key.private_a(), &sha256(&nonce), rng);
    let r = client.post(
        "/auth/sessions",
        None,
        &json!({ "challenge_id": ch["challenge_id"], "cert_serial": who.serial, "signature": signature_json(&sig) }),
    );
    assert_eq!(r.status, 200, "{}", r.text);
    r.json()["token"].as_str().unwrap().to_owned()
}

pub fn land(dag: u64, khat: u64) -> Value {
    json!({ "dag_number": dag, "khatiayan_number": khat, "area": "2000", "unit": "Shotangsho" })
}

pub fn register(client: &Client, owner: &Identity, dag: u64, khat: u64) -> Reply {
    client.post(
        "/lrd/records",
        None,
        &json!({
            "cert_serial": owner.serial,
            "land": land(dag, khat),
            "seller_name": "Mr. W",
            "buyer_name": owner.name,
            "tx_label": "BNX Y2345",
        }),
    )
}

pub fn sign_deed(server: &Server, client: &Client, deed: &Value, role: &str, who: &Identity, rng: &mut StdRng) -> Reply {
    let digest: [u8; 32] = hex::decode(deed["digest"].as_str().unwrap()).unwrap().try_into().unwrap();
    let sig = sign(&server.state.params, who.key.private_a(), &digest, rng);
    let id = deed["deed_id"].as_str().unwrap();
    client.post(
        &format!("/deeds/{id}/signatures"),
        None,
        &json!({ "role": role, "cert_serial": who.serial, "signature": signature_json(&sig) }),
    )
}
