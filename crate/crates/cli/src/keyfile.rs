//! Key files: TOML with decimal big integers and a role tag.
//!
//! ```toml
//! role = "private"
//! subject = "Mr. X"
//! beta = "1234..."
//! a = "5678..."
//!
//! [params]
//! p = "..."
//! alpha = "..."
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use lrms_core::crypto::{self, DomainParams, KeyPair};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KeyRole {
    Private,
    Public,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct RawKeyFile {
    role: KeyRole,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    subject: Option<String>,
    beta: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    a: Option<String>,
    params: DomainParams,
}

/// A loaded key. `pair` is present only for private key files.
#[derive(Debug, Clone)]
pub struct KeyFile {
    pub subject: Option<String>,
    pub params: DomainParams,
    pub beta: BigUint,
    pub pair: Option<KeyPair>,
}

fn decimal(field: &str, s: &str) -> Result<BigUint, CliError> {
    BigUint::parse_bytes(s.trim().as_bytes(), 10).ok_or_else(|| CliError::input(format!("key file: {field} is not a decimal integer")))
}

impl KeyFile {
    pub fn private(params: DomainParams, pair: KeyPair, subject: Option<String>) -> Self {
        KeyFile { subject, params, beta: pair.public_beta().clone(), pair: Some(pair) }
    }

    pub fn public_half(&self) -> KeyFile {
        KeyFile { pair: None, ..self.clone() }
    }

    pub fn role(&self) -> KeyRole {
        if self.pair.is_some() {
            KeyRole::Private
        } else {
            KeyRole::Public
        }
    }

    pub fn fingerprint(&self) -> String {
        hex::encode(crypto::key_fingerprint(&self.params, &self.beta))
    }

    pub fn require_private(&self) -> Result<&KeyPair, CliError> {
        self.pair.as_ref().ok_or_else(|| CliError::input("a private key file is required"))
    }

    pub fn to_toml(&self) -> String {
        let raw = RawKeyFile {
            role: self.role(),
            subject: self.subject.clone(),
            beta: self.beta.to_string(),
            a: self.pair.as_ref().map(|k| k.private_a().to_string()),
            params: self.params.clone(),
        };
        toml::to_string(&raw).expect("key file serializes")
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let raw: RawKeyFile = toml::from_str(text).map_err(|e| CliError::input(format!("key file: {e}")))?;
        let beta = decimal("beta", &raw.beta)?;
        let pair = match (raw.role, raw.a) {
            (KeyRole::Public, None) => None,
            (KeyRole::Public, Some(_)) => return Err(CliError::input("key file: public key carries a private exponent")),
            (KeyRole::Private, None) => return Err(CliError::input("key file: private key lacks `a`")),
            (KeyRole::Private, Some(a)) => {
                let pair = KeyPair::from_private(&raw.params, decimal("a", &a)?).map_err(|e| CliError::input(e.to_string()))?;
                if pair.public_beta() != &beta {
                    return Err(CliError::input("key file: beta does not match the private exponent"));
                }
                Some(pair)
            }
        };
        Ok(KeyFile { subject: raw.subject, params: raw.params, beta, pair })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text)
    }

    pub fn save(&self, path: &Path) -> Result<(), CliError> {
        fs::write(path, self.to_toml()).map_err(|e| CliError::io(path, e))
    }
}

/// `key.toml` -> `key.pub.toml`; other names get `.pub` appended.
pub fn public_path(private: &Path) -> PathBuf {
    match private.extension().and_then(|e| e.to_str()) {
        Some("toml") => private.with_extension("pub.toml"),
        _ => {
            let mut s = private.as_os_str().to_owned();
            s.push(".pub");
            PathBuf::from(s)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::SeedableRng;

    fn sample() -> KeyFile {
        let mut rng = StdRng::seed_from_u64(1);
        let params = crypto::generate_domain_params(64, &mut rng).unwrap();
        let pair = crypto::keygen(&params, &mut rng);
        KeyFile::private(params, pair, Some("Mr. X".into()))
    }

    #[test]
    fn private_and_public_round_trip() {
        let key = sample();
        let back = KeyFile::parse(&key.to_toml()).unwrap();
        assert_eq!(back.pair, key.pair);
        assert_eq!(back.subject.as_deref(), Some("Mr. X"));
        let public = KeyFile::parse(&key.public_half().to_toml()).unwrap();
        assert_eq!(public.role(), KeyRole::Public);
        assert_eq!(public.fingerprint(), key.fingerprint());
        assert!(!key.public_half().to_toml().contains("\na ="));
    }

    #[test]
    fn mismatched_beta_is_rejected() {
        let key = sample();
        let text = key.to_toml().replace(&format!("beta = \"{}\"", key.beta), "beta = \"5\"");
        assert!(KeyFile::parse(&text).is_err());
    }

    #[test]
    fn public_path_naming() {
        assert_eq!(public_path(Path::new("x/k.toml")), PathBuf::from("x/k.pub.toml"));
        assert_eq!(public_path(Path::new("k")), PathBuf::from("k.pub"));
    }
}
