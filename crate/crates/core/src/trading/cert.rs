//! The toy PKI: a CA key pair that binds identities to ElGamal public keys.

use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use num_bigint::BigUint;
use parking_lot::{Mutex, RwLock};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{put_field, TradingError};
use crate::biguint_dec;
use crate::crypto::{self, sha256, DomainParams, KeyPair, Signature};

const SECONDS_PER_DAY: u64 = 86_400;

/// The CA's public half, enough to check certificates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaPublic {
    pub issuer_id: String,
    pub params: DomainParams,
    #[serde(with = "biguint_dec")]
    pub beta: BigUint,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Certificate {
    pub serial: u64,
    pub subject_id: String,
    pub subject_params: DomainParams,
    #[serde(with = "biguint_dec")]
    pub subject_beta: BigUint,
    pub issuer_id: String,
    pub issued_at: u64,
    pub expires_at: u64,
    pub ca_signature: Signature,
}

impl Certificate {
    /// Versioned, length-prefixed body covered by the CA signature.
    pub fn body_bytes(&self) -> Vec<u8> {
        let mut out = vec![0x01];
        out.extend_from_slice(&self.serial.to_be_bytes());
        put_field(&mut out, self.subject_id.as_bytes());
        put_field(&mut out, &self.subject_params.p().to_bytes_be());
        put_field(&mut out, &self.subject_params.alpha().to_bytes_be());
        put_field(&mut out, &self.subject_beta.to_bytes_be());
        put_field(&mut out, self.issuer_id.as_bytes());
        out.extend_from_slice(&self.issued_at.to_be_bytes());
        out.extend_from_slice(&self.expires_at.to_be_bytes());
        out
    }

    pub fn body_digest(&self) -> crypto::Digest32 {
        sha256(&self.body_bytes())
    }

    pub fn key_fingerprint(&self) -> crypto::Digest32 {
        crypto::key_fingerprint(&self.subject_params, &self.subject_beta)
    }

    /// Checks a signature by the certificate's subject.
    pub fn verifies(&self, digest: &crypto::Digest32, sig: &Signature) -> bool {
        crypto::verify(&self.subject_params, &self.subject_beta, digest, sig)
    }
}

/// Signature valid under `ca` and `issued_at <= now < expires_at`.
pub fn verify_certificate(ca: &CaPublic, cert: &Certificate, now: u64) -> bool {
    cert.issuer_id == ca.issuer_id
        && cert.issued_at <= now
        && now < cert.expires_at
        && crypto::verify(&ca.params, &ca.beta, &cert.body_digest(), &cert.ca_signature)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CertificateAuthority {
    issuer_id: String,
    params: DomainParams,
    key: KeyPair,
}

impl CertificateAuthority {
    pub fn new(issuer_id: impl Into<String>, params: DomainParams, key: KeyPair) -> Self {
        CertificateAuthority { issuer_id: issuer_id.into(), params, key }
    }

    pub fn generate<R: Rng + ?Sized>(issuer_id: impl Into<String>, params: DomainParams, rng: &mut R) -> Self {
        let key = crypto::keygen(&params, rng);
        Self::new(issuer_id, params, key)
    }

    pub fn public(&self) -> CaPublic {
        CaPublic { issuer_id: self.issuer_id.clone(), params: self.params.clone(), beta: self.key.public_beta().clone() }
    }

    pub fn params(&self) -> &DomainParams {
        &self.params
    }

    #[allow(clippy::too_many_arguments)]
    pub fn issue<R: Rng + ?Sized>(
        &self,
        serial: u64,
        subject_id: &str,
        subject_params: &DomainParams,
        subject_beta: &BigUint,
        validity_days: u32,
        now: u64,
        rng: &mut R,
    ) -> Result<Certificate, TradingError> {
        if subject_id.is_empty() || !crate::c2i::is_encodable(subject_id) {
            return Err(TradingError::InvalidRequest("subject id must be non-empty printable ASCII".into()));
        }
        let two = BigUint::from(2u32);
        if *subject_beta < two || *subject_beta > subject_params.p() - 2u32 {
            return Err(TradingError::InvalidPublicKey);
        }
        if validity_days == 0 {
            return Err(TradingError::InvalidValidity);
        }
        let mut cert = Certificate {
            serial,
            subject_id: subject_id.to_owned(),
            subject_params: subject_params.clone(),
            subject_beta: subject_beta.clone(),
            issuer_id: self.issuer_id.clone(),
            issued_at: now,
            expires_at: now + u64::from(validity_days) * SECONDS_PER_DAY,
            ca_signature: Signature { r: BigUint::default(), s: BigUint::default() },
        };
        cert.ca_signature = crypto::sign(&self.params, self.key.private_a(), &cert.body_digest(), rng);
        Ok(cert)
    }

    /// Self-issued certificate that publishes the CA key; always serial 0.
    pub fn root_certificate<R: Rng + ?Sized>(&self, validity_days: u32, now: u64, rng: &mut R) -> Certificate {
        self.issue(0, &self.issuer_id, &self.params, self.key.public_beta(), validity_days, now, rng)
            .expect("CA key is a valid public key")
    }
}

/// Issued certificates by serial, optionally mirrored to a JSON-lines file.
#[derive(Debug, Default)]
pub struct CertificateStore {
    certs: RwLock<Vec<Certificate>>,
    file: Mutex<Option<File>>,
}

impl CertificateStore {
    pub fn in_memory() -> Self {
        Self::default()
    }

    pub fn open(path: &Path) -> io::Result<Self> {
        let mut certs = Vec::new();
        if path.exists() {
            for (n, line) in BufReader::new(File::open(path)?).lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let cert: Certificate = serde_json::from_str(&line)
                    .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, format!("line {}: {e}", n + 1)))?;
                if cert.serial != certs.len() as u64 {
                    return Err(io::Error::new(io::ErrorKind::InvalidData, format!("line {}: serial out of order", n + 1)));
                }
                certs.push(cert);
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(CertificateStore { certs: RwLock::new(certs), file: Mutex::new(Some(file)) })
    }

    pub fn len(&self) -> usize {
        self.certs.read().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, serial: u64) -> Option<Certificate> {
        usize::try_from(serial).ok().and_then(|i| self.certs.read().get(i).cloned())
    }

    fn push(&self, certs: &mut Vec<Certificate>, cert: Certificate) -> Result<(), TradingError> {
        if let Some(file) = self.file.lock().as_mut() {
            let mut line = serde_json::to_string(&cert).expect("certificate serializes");
            line.push('\n');
            file.write_all(line.as_bytes()).and_then(|_| file.sync_data()).map_err(TradingError::Persistence)?;
        }
        certs.push(cert);
        Ok(())
    }

    /// Stores the CA's root certificate if the store is empty; returns serial 0.
    pub fn ensure_root<R: Rng + ?Sized>(&self, ca: &CertificateAuthority, now: u64, rng: &mut R) -> Result<Certificate, TradingError> {
        let mut certs = self.certs.write();
        if let Some(root) = certs.first() {
            return Ok(root.clone());
        }
        let root = ca.root_certificate(3650, now, rng);
        self.push(&mut certs, root.clone())?;
        Ok(root)
    }

    /// Issues the next serial and records it.
    #[allow(clippy::too_many_arguments)]
    pub fn issue<R: Rng + ?Sized>(
        &self,
        ca: &CertificateAuthority,
        subject_id: &str,
        subject_params: &DomainParams,
        subject_beta: &BigUint,
        validity_days: u32,
        now: u64,
        rng: &mut R,
    ) -> Result<Certificate, TradingError> {
        let mut certs = self.certs.write();
        let serial = certs.len() as u64;
        let cert = ca.issue(serial, subject_id, subject_params, subject_beta, validity_days, now, rng)?;
        self.push(&mut certs, cert.clone())?;
        Ok(cert)
    }
}
