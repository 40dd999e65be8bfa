//! Blocking JSON client for the service.

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use lrms_core::crypto::{self, DomainParams, KeyPair, Signature};
use lrms_core::registry::Session;
use lrms_core::trading::cert::{CaPublic, Certificate};
use lrms_service::views::*;
use lrms_service::ApiError;

use crate::CliError;

pub struct Client {
    base: String,
    agent: ureq::Agent,
}

impl Client {
    pub fn new(base: &str) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder().http_status_as_error(false).build().into();
        Client { base: base.trim_end_matches('/').to_owned(), agent }
    }

    fn finish<T: DeserializeOwned>(&self, resp: Result<ureq::http::Response<ureq::Body>, ureq::Error>) -> Result<T, CliError> {
        let mut resp = resp.map_err(|e| CliError::Transport(e.to_string()))?;
        let status = resp.status();
        let text = resp.body_mut().read_to_string().map_err(|e| CliError::Transport(e.to_string()))?;
        if !status.is_success() {
            let err = serde_json::from_str::<ApiError>(&text)
                .unwrap_or_else(|_| ApiError::internal(format!("HTTP {status} without an error envelope")));
            return Err(CliError::Api(err));
        }
        serde_json::from_str(&text).map_err(|e| CliError::Transport(format!("unexpected response: {e}")))
    }

    pub fn get<T: DeserializeOwned>(&self, path: &str, token: Option<&str>) -> Result<T, CliError> {
        self.get_query(path, &[], token)
    }

    pub fn get_query<T: DeserializeOwned>(&self, path: &str, query: &[(&str, &str)], token: Option<&str>) -> Result<T, CliError> {
        let mut req = self.agent.get(format!("{}{path}", self.base)).query_pairs(query.iter().copied());
        if let Some(t) = token {
            req = req.header("Authorization", format!("Bearer {t}"));
        }
        self.finish(req.call())
    }

    pub fn post<T: DeserializeOwned, B: Serialize>(&self, path: &str, token: Option<&str>, body: &B) -> Result<T, CliError> {
        let mut req = self.agent.post(format!("{}{path}", self.base));
        if let Some(t) = token {
            req = req.header("Authorization", format!("Bearer {t}"));
        }
        self.finish(req.send_json(body))
    }

    pub fn health(&self) -> Result<Health, CliError> {
        self.get("/health", None)
    }

    pub fn certificate(&self, serial: u64) -> Result<Certificate, CliError> {
        self.get(&format!("/ca/certificates/{serial}"), None)
    }

    /// The CA key as published by the root certificate.
    pub fn ca_public(&self) -> Result<CaPublic, CliError> {
        let root = self.certificate(0)?;
        Ok(CaPublic { issuer_id: root.issuer_id, params: root.subject_params, beta: root.subject_beta })
    }

    pub fn issue_certificate(
        &self,
        subject_id: &str,
        params: &DomainParams,
        beta: &num_bigint::BigUint,
        validity_days: Option<u32>,
    ) -> Result<Certificate, CliError> {
        let req = IssueCertificateRequest {
            subject_id: subject_id.to_owned(),
            subject_beta: beta.to_string(),
            subject_params: Some(params.clone()),
            validity_days,
        };
        self.post("/ca/certificates", None, &req)
    }

    /// Challenge-response login; the private key never leaves this process.
    pub fn login(&self, subject_id: &str, cert: &Certificate, key: &KeyPair) -> Result<Session, CliError> {
        let ch: lrms_core::registry::LoginChallenge =
            self.post("/auth/challenges", None, &ChallengeRequest { subject_id: subject_id.to_owned() })?;
        let sig = crypto::sign(&cert.subject_params, key.private_a(), &ch.digest(), &mut rand::thread_rng());
        self.post(
            "/auth/sessions",
            None,
            &SessionRequest { challenge_id: ch.challenge_id, cert_serial: cert.serial, signature: sig },
        )
    }

    pub fn sign_deed(&self, deed: &DeedView, role: &str, cert: &Certificate, key: &KeyPair) -> Result<DeedView, CliError> {
        // Sign what we computed ourselves, not what the server claims.
        let digest = deed.deed.digest();
        if hex::encode(digest) != deed.digest {
            return Err(CliError::Verification("server deed digest differs from the local one".into()));
        }
        let signature: Signature = crypto::sign(&cert.subject_params, key.private_a(), &digest, &mut rand::thread_rng());
        let req = SignDeedRequest { role: role.to_owned(), cert_serial: cert.serial, signature };
        self.post(&format!("/deeds/{}/signatures", deed.deed.deed_id), None, &req)
    }

    pub fn records(&self, owner: &str, token: &str) -> Result<RecordsResponse, CliError> {
        self.get_query("/lrd/records", &[("owner", owner)], Some(token))
    }

    pub fn raw(&self, path: &str) -> Result<Value, CliError> {
        self.get(path, None)
    }
}
