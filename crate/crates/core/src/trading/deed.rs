use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{put_field, TradingError};
use crate::crypto::{sha256, Digest32, Signature};
use crate::registry::{is_positive_decimal, LandInfo};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Seller,
    Buyer,
    Bank,
}

impl Role {
    pub const ALL: [Role; 3] = [Role::Seller, Role::Buyer, Role::Bank];

    pub fn as_str(self) -> &'static str {
        match self {
            Role::Seller => "seller",
            Role::Buyer => "buyer",
            Role::Bank => "bank",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Role {
    type Err = TradingError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "seller" => Ok(Role::Seller),
            "buyer" => Ok(Role::Buyer),
            "bank" => Ok(Role::Bank),
            other => Err(TradingError::InvalidRequest(format!("unknown role {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DeedState {
    Draft,
    PartiallySigned,
    PartiesSigned,
    BankSigned,
    Registered,
    Abandoned,
}

impl DeedState {
    pub const ALL: [DeedState; 6] = [
        DeedState::Draft,
        DeedState::PartiallySigned,
        DeedState::PartiesSigned,
        DeedState::BankSigned,
        DeedState::Registered,
        DeedState::Abandoned,
    ];
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Price {
    pub amount: String,
    pub currency: String,
}

impl Price {
    pub fn new(amount: impl Into<String>, currency: impl Into<String>) -> Result<Self, TradingError> {
        let price = Price { amount: amount.into(), currency: currency.into() };
        price.validate()?;
        Ok(price)
    }

    pub fn validate(&self) -> Result<(), TradingError> {
        if !is_positive_decimal(&self.amount) || self.currency.trim().is_empty() {
            return Err(TradingError::InvalidPrice);
        }
        Ok(())
    }

    /// Approximate numeric value, for range filters only.
    pub fn value(&self) -> f64 {
        self.amount.parse().unwrap_or(f64::NAN)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeedSignature {
    pub signature: Signature,
    pub cert_serial: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Deed {
    pub deed_id: String,
    pub listing_id: String,
    pub seller_id: String,
    pub buyer_id: String,
    pub bank_id: String,
    pub land: LandInfo,
    pub price: Price,
    pub transaction_id: String,
    pub created_at: u64,
    pub signatures: BTreeMap<Role, DeedSignature>,
    pub registered_block: Option<u64>,
    pub abandoned: bool,
}

/// Actions the deed state machine reacts to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeedAction {
    Sign(Role),
    Abandon,
    Register,
}

impl DeedAction {
    pub const ALL: [DeedAction; 5] = [
        DeedAction::Sign(Role::Seller),
        DeedAction::Sign(Role::Buyer),
        DeedAction::Sign(Role::Bank),
        DeedAction::Abandon,
        DeedAction::Register,
    ];
}

/// "BN" followed by seven random base-36 characters.
pub fn generate_transaction_id<R: Rng + ?Sized>(rng: &mut R) -> String {
    const ALPHABET: &[u8] = b"0123456789ABCDEFGHIJKLMNOPQRSTUVWXYZ";
    let mut id = String::from("BN");
    id.extend((0..7).map(|_| ALPHABET[rng.gen_range(0..ALPHABET.len())] as char));
    id
}

impl Deed {
    pub fn state(&self) -> DeedState {
        if self.registered_block.is_some() {
            return DeedState::Registered;
        }
        if self.abandoned {
            return DeedState::Abandoned;
        }
        let seller = self.signatures.contains_key(&Role::Seller);
        let buyer = self.signatures.contains_key(&Role::Buyer);
        match (seller, buyer, self.signatures.contains_key(&Role::Bank)) {
            (_, _, true) => DeedState::BankSigned,
            (true, true, false) => DeedState::PartiesSigned,
            (false, false, false) => DeedState::Draft,
            _ => DeedState::PartiallySigned,
        }
    }

    pub fn party(&self, role: Role) -> &str {
        match role {
            Role::Seller => &self.seller_id,
            Role::Buyer => &self.buyer_id,
            Role::Bank => &self.bank_id,
        }
    }

    /// Versioned, length-prefixed serialization of every field except signatures and lifecycle.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        let mut out = vec![0x01];
        for field in [&self.deed_id, &self.seller_id, &self.buyer_id, &self.bank_id] {
            put_field(&mut out, field.as_bytes());
        }
        out.extend_from_slice(&self.land.dag_number.to_be_bytes());
        out.extend_from_slice(&self.land.khatiayan_number.to_be_bytes());
        put_field(&mut out, self.land.area.as_bytes());
        put_field(&mut out, self.land.unit.as_bytes());
        put_field(&mut out, self.price.amount.as_bytes());
        put_field(&mut out, self.price.currency.as_bytes());
        put_field(&mut out, self.transaction_id.as_bytes());
        out.extend_from_slice(&self.created_at.to_be_bytes());
        out
    }

    /// What each party signs.
    pub fn digest(&self) -> Digest32 {
        sha256(&self.canonical_bytes())
    }

    /// Whether `action` is legal in the current state, without performing it.
    pub fn check(&self, action: DeedAction) -> Result<DeedState, TradingError> {
        let state = self.state();
        match action {
            DeedAction::Sign(role) => {
                if state == DeedState::Abandoned {
                    return Err(TradingError::DeedClosed);
                }
                if self.signatures.contains_key(&role) {
                    return Err(TradingError::AlreadySigned(role));
                }
                match (role, state) {
                    (Role::Bank, DeedState::PartiesSigned) => Ok(DeedState::BankSigned),
                    (Role::Bank, _) => Err(TradingError::PrematureBankSignature),
                    (_, DeedState::Draft) => Ok(DeedState::PartiallySigned),
                    (_, DeedState::PartiallySigned) => Ok(DeedState::PartiesSigned),
                    // Seller and buyer both present once the bank has signed.
                    _ => unreachable!("party signature missing in state {state:?}"),
                }
            }
            DeedAction::Abandon => match state {
                DeedState::Draft | DeedState::PartiallySigned | DeedState::PartiesSigned => Ok(DeedState::Abandoned),
                _ => Err(TradingError::DeedNotAbandonable),
            },
            DeedAction::Register => match state {
                DeedState::BankSigned => Ok(DeedState::Registered),
                _ => Err(TradingError::DeedNotFinalized),
            },
        }
    }

    /// Records a signature after the state check. Signature validity is the caller's job.
    pub fn add_signature(&mut self, role: Role, sig: DeedSignature) -> Result<DeedState, TradingError> {
        let next = self.check(DeedAction::Sign(role))?;
        self.signatures.insert(role, sig);
        Ok(next)
    }

    pub fn abandon(&mut self) -> Result<DeedState, TradingError> {
        let next = self.check(DeedAction::Abandon)?;
        self.abandoned = true;
        Ok(next)
    }

    pub fn mark_registered(&mut self, block_id: u64) -> Result<DeedState, TradingError> {
        let next = self.check(DeedAction::Register)?;
        self.registered_block = Some(block_id);
        Ok(next)
    }
}
