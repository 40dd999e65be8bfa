//! Certificates, listings and deeds: everything between "I want to sell" and
//! the registry recording a new owner.

pub mod cert;
pub mod deed;
pub mod listing;

use std::collections::{BTreeMap, HashMap};
use std::io;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use parking_lot::{Mutex, RwLock};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crypto::Signature;
use crate::ledger::BlockId;
use crate::registry::{write_atomic, Registry, RegistryError, Session};
use cert::verify_certificate;
use deed::{generate_transaction_id, Deed, DeedAction, DeedSignature, Price, Role};
use listing::{Listing, ListingFilter, ListingStatus};

#[derive(Debug, Error)]
pub enum TradingError {
    #[error("public key outside [2, p-2]")]
    InvalidPublicKey,
    #[error("validity must be at least one day")]
    InvalidValidity,
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("certificate is unknown, expired or not issued by this CA")]
    InvalidCertificate,
    #[error("price must be a positive decimal with a currency")]
    InvalidPrice,
    #[error("caller does not own this land")]
    NotOwner,
    #[error("land already has a listing in progress")]
    DuplicateListing,
    #[error("listing {0} not found")]
    ListingNotFound(String),
    #[error("listing is not open")]
    ListingNotOpen,
    #[error("seller cannot buy their own land")]
    SelfDealing,
    #[error("deed {0} not found")]
    DeedNotFound(String),
    #[error("signature does not verify over the deed")]
    BadSignature,
    #[error("certificate subject is not the deed's party for this role")]
    WrongParty,
    #[error("bank may only sign once seller and buyer have")]
    PrematureBankSignature,
    #[error("{0} has already signed")]
    AlreadySigned(Role),
    #[error("deed was abandoned")]
    DeedClosed,
    #[error("deed is not finalized")]
    DeedNotFinalized,
    #[error("deed can no longer be abandoned")]
    DeedNotAbandonable,
    #[error(transparent)]
    Registry(#[from] RegistryError),
    #[error("persistence failed: {0}")]
    Persistence(#[source] io::Error),
}

impl TradingError {
    pub fn code(&self) -> &'static str {
        match self {
            TradingError::InvalidPublicKey => "invalid-public-key",
            TradingError::InvalidValidity => "invalid-validity",
            TradingError::InvalidRequest(_) => "invalid-request",
            TradingError::InvalidCertificate => "invalid-certificate",
            TradingError::InvalidPrice => "invalid-price",
            TradingError::NotOwner => "not-owner",
            TradingError::DuplicateListing => "duplicate-listing",
            TradingError::ListingNotFound(_) => "listing-not-found",
            TradingError::ListingNotOpen => "listing-not-open",
            TradingError::SelfDealing => "self-dealing",
            TradingError::DeedNotFound(_) => "deed-not-found",
            TradingError::BadSignature => "bad-signature",
            TradingError::WrongParty => "wrong-party",
            TradingError::PrematureBankSignature => "premature-bank-signature",
            TradingError::AlreadySigned(_) => "already-signed",
            TradingError::DeedClosed => "deed-closed",
            TradingError::DeedNotFinalized => "deed-not-finalized",
            TradingError::DeedNotAbandonable => "deed-not-abandonable",
            TradingError::Registry(e) => e.code(),
            TradingError::Persistence(_) => "persistence-failure",
        }
    }
}

/// Appends a u32 length prefix and `bytes`.
pub(crate) fn put_field(out: &mut Vec<u8>, bytes: &[u8]) {
    out.extend_from_slice(&(bytes.len() as u32).to_be_bytes());
    out.extend_from_slice(bytes);
}

#[derive(Serialize, Deserialize, Default)]
struct MarketSnapshot {
    listings: Vec<Listing>,
    deeds: Vec<Deed>,
}

/// The advertising agency's board plus the deed room.
///
/// Each listing and deed has its own lock; a deed's lock is taken before its listing's.
pub struct Marketplace {
    registry: Arc<Registry>,
    bank_id: String,
    listings: RwLock<BTreeMap<String, Arc<Mutex<Listing>>>>,
    deeds: RwLock<HashMap<String, Arc<Mutex<Deed>>>>,
    next_seq: AtomicU64,
    path: Option<PathBuf>,
    save_lock: Mutex<()>,
}

impl std::fmt::Debug for Marketplace {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Marketplace").field("bank_id", &self.bank_id).finish_non_exhaustive()
    }
}

impl Marketplace {
    pub fn in_memory(registry: Arc<Registry>, bank_id: impl Into<String>) -> Self {
        Marketplace {
            registry,
            bank_id: bank_id.into(),
            listings: RwLock::new(BTreeMap::new()),
            deeds: RwLock::new(HashMap::new()),
            next_seq: AtomicU64::new(1),
            path: None,
            save_lock: Mutex::new(()),
        }
    }

    /// Loads listings and deeds from `path` if present; later mutations rewrite it.
    pub fn open(registry: Arc<Registry>, bank_id: impl Into<String>, path: &Path) -> Result<Self, TradingError> {
        let mut market = Self::in_memory(registry, bank_id);
        if path.exists() {
            let bytes = std::fs::read(path).map_err(TradingError::Persistence)?;
            let snap: MarketSnapshot = serde_json::from_slice(&bytes)
                .map_err(|e| TradingError::Persistence(io::Error::new(io::ErrorKind::InvalidData, e)))?;
            let mut max_seq = 0;
            for l in snap.listings {
                max_seq = max_seq.max(l.seq);
                market.listings.get_mut().insert(l.listing_id.clone(), Arc::new(Mutex::new(l)));
            }
            for d in snap.deeds {
                if let Some(n) = d.deed_id.strip_prefix("D-").and_then(|n| n.parse::<u64>().ok()) {
                    max_seq = max_seq.max(n);
                }
                market.deeds.get_mut().insert(d.deed_id.clone(), Arc::new(Mutex::new(d)));
            }
            market.next_seq = AtomicU64::new(max_seq + 1);
        }
        market.path = Some(path.to_owned());
        Ok(market)
    }

    pub fn bank_id(&self) -> &str {
        &self.bank_id
    }

    pub fn registry(&self) -> &Arc<Registry> {
        &self.registry
    }

    fn save(&self) -> Result<(), TradingError> {
        let Some(path) = &self.path else { return Ok(()) };
        let _guard = self.save_lock.lock();
        let listing_arcs: Vec<_> = self.listings.read().values().cloned().collect();
        let deed_arcs: Vec<_> = self.deeds.read().values().cloned().collect();
        let mut snap = MarketSnapshot {
            listings: listing_arcs.iter().map(|l| l.lock().clone()).collect(),
            deeds: deed_arcs.iter().map(|d| d.lock().clone()).collect(),
        };
        snap.deeds.sort_by(|a, b| a.deed_id.cmp(&b.deed_id));
        let bytes = serde_json::to_vec_pretty(&snap).expect("snapshot serializes");
        write_atomic(path, &bytes).map_err(TradingError::Persistence)
    }

    fn listing_handle(&self, id: &str) -> Result<Arc<Mutex<Listing>>, TradingError> {
        self.listings.read().get(id).cloned().ok_or_else(|| TradingError::ListingNotFound(id.to_owned()))
    }

    fn deed_handle(&self, id: &str) -> Result<Arc<Mutex<Deed>>, TradingError> {
        self.deeds.read().get(id).cloned().ok_or_else(|| TradingError::DeedNotFound(id.to_owned()))
    }

    fn check_session_cert(&self, session: &Session, now: u64) -> Result<(), TradingError> {
        let cert = self.registry.certificates().get(session.cert_serial).ok_or(TradingError::InvalidCertificate)?;
        if cert.subject_id != session.subject_id || !verify_certificate(self.registry.ca(), &cert, now) {
            return Err(TradingError::InvalidCertificate);
        }
        Ok(())
    }

    /// Offers land the session holder currently owns.
    pub fn post_listing(
        &self,
        session: &Session,
        dag: u64,
        khatiayan: u64,
        asking_price: Price,
        now: u64,
    ) -> Result<Listing, TradingError> {
        self.check_session_cert(session, now)?;
        asking_price.validate()?;
        let entry = self.registry.active_entry(dag, khatiayan).ok_or(TradingError::NotOwner)?;
        if entry.owner_id != session.subject_id || entry.key_fingerprint != session.key_fingerprint {
            return Err(TradingError::NotOwner);
        }
        let listing = {
            let mut listings = self.listings.write();
            let busy = listings.values().any(|l| {
                let l = l.lock();
                l.land.key() == entry.land.key() && matches!(l.status, ListingStatus::Open | ListingStatus::UnderDeed)
            });
            if busy {
                return Err(TradingError::DuplicateListing);
            }
            let seq = self.next_seq.fetch_add(1, Ordering::SeqCst);
            let listing = Listing {
                listing_id: format!("L-{seq}"),
                seq,
                seller_id: session.subject_id.clone(),
                seller_fingerprint: session.key_fingerprint,
                land: entry.land,
                asking_price,
                status: ListingStatus::Open,
                created_at: now,
                deed_id: None,
            };
            listings.insert(listing.listing_id.clone(), Arc::new(Mutex::new(listing.clone())));
            listing
        };
        self.save()?;
        Ok(listing)
    }

    pub fn withdraw_listing(&self, session: &Session, listing_id: &str) -> Result<Listing, TradingError> {
        let handle = self.listing_handle(listing_id)?;
        let snapshot = {
            let mut listing = handle.lock();
            if listing.seller_id != session.subject_id {
                return Err(TradingError::NotOwner);
            }
            if !listing.status.can_become(ListingStatus::Withdrawn) {
                return Err(TradingError::ListingNotOpen);
            }
            listing.status = ListingStatus::Withdrawn;
            listing.clone()
        };
        self.save()?;
        Ok(snapshot)
    }

    pub fn get_listing(&self, listing_id: &str) -> Result<Listing, TradingError> {
        Ok(self.listing_handle(listing_id)?.lock().clone())
    }

    /// Listings matching every filter term, newest first.
    pub fn search_listings(&self, filter: &ListingFilter) -> Vec<Listing> {
        let handles: Vec<_> = self.listings.read().values().cloned().collect();
        let mut out: Vec<Listing> = handles.iter().map(|h| h.lock().clone()).filter(|l| filter.matches(l)).collect();
        out.sort_by_key(|l| std::cmp::Reverse(l.seq));
        out
    }

    /// Draws up a deed between the listing's seller, the session's holder and the bank.
    pub fn create_deed<R: Rng + ?Sized>(
        &self,
        listing_id: &str,
        buyer: &Session,
        agreed_price: Option<Price>,
        now: u64,
        rng: &mut R,
    ) -> Result<Deed, TradingError> {
        self.check_session_cert(buyer, now)?;
        if let Some(p) = &agreed_price {
            p.validate()?;
        }
        let handle = self.listing_handle(listing_id)?;
        let deed = {
            let mut listing = handle.lock();
            if listing.seller_id == buyer.subject_id {
                return Err(TradingError::SelfDealing);
            }
            if !listing.status.can_become(ListingStatus::UnderDeed) {
                return Err(TradingError::ListingNotOpen);
            }
            let seq = self.next_seq.fetch_add(1, Ordering::SeqCst);
            let deed = Deed {
                deed_id: format!("D-{seq}"),
                listing_id: listing.listing_id.clone(),
                seller_id: listing.seller_id.clone(),
                buyer_id: buyer.subject_id.clone(),
                bank_id: self.bank_id.clone(),
                land: listing.land.clone(),
                price: agreed_price.unwrap_or_else(|| listing.asking_price.clone()),
                transaction_id: generate_transaction_id(rng),
                created_at: now,
                signatures: BTreeMap::new(),
                registered_block: None,
                abandoned: false,
            };
            listing.status = ListingStatus::UnderDeed;
            listing.deed_id = Some(deed.deed_id.clone());
            self.deeds.write().insert(deed.deed_id.clone(), Arc::new(Mutex::new(deed.clone())));
            deed
        };
        self.save()?;
        Ok(deed)
    }

    pub fn get_deed(&self, deed_id: &str) -> Result<Deed, TradingError> {
        Ok(self.deed_handle(deed_id)?.lock().clone())
    }

    /// Adds `role`'s signature, made with the key in certificate `cert_serial`.
    pub fn sign_deed(
        &self,
        deed_id: &str,
        role: Role,
        signature: Signature,
        cert_serial: u64,
        now: u64,
    ) -> Result<Deed, TradingError> {
        let handle = self.deed_handle(deed_id)?;
        let cert = self.registry.certificates().get(cert_serial).ok_or(TradingError::InvalidCertificate)?;
        if !verify_certificate(self.registry.ca(), &cert, now) {
            return Err(TradingError::InvalidCertificate);
        }
        let snapshot = {
            let mut deed = handle.lock();
            deed.check(DeedAction::Sign(role))?;
            if cert.subject_id != deed.party(role) {
                return Err(TradingError::WrongParty);
            }
            if !cert.verifies(&deed.digest(), &signature) {
                return Err(TradingError::BadSignature);
            }
            deed.add_signature(role, DeedSignature { signature, cert_serial })?;
            deed.clone()
        };
        self.save()?;
        Ok(snapshot)
    }

    /// Either party walks away before the bank signs; the listing reopens.
    pub fn abandon_deed(&self, deed_id: &str, session: &Session) -> Result<Deed, TradingError> {
        let handle = self.deed_handle(deed_id)?;
        let snapshot = {
            let mut deed = handle.lock();
            if session.subject_id != deed.seller_id && session.subject_id != deed.buyer_id {
                return Err(TradingError::WrongParty);
            }
            deed.check(DeedAction::Abandon)?;
            let listing = self.listing_handle(&deed.listing_id)?;
            let mut listing = listing.lock();
            deed.abandon()?;
            if listing.status.can_become(ListingStatus::Open) {
                listing.status = ListingStatus::Open;
                listing.deed_id = None;
            }
            deed.clone()
        };
        self.save()?;
        Ok(snapshot)
    }

    /// Hands a bank-signed deed to the registry; on success the deed is registered and the listing sold.
    pub fn settle_and_register<R: Rng + ?Sized>(
        &self,
        deed_id: &str,
        now: u64,
        rng: &mut R,
    ) -> Result<(Deed, BlockId), TradingError> {
        let handle = self.deed_handle(deed_id)?;
        let result = {
            let mut deed = handle.lock();
            deed.check(DeedAction::Register)?;
            let listing = self.listing_handle(&deed.listing_id)?;
            let block_id = self.registry.transfer_ownership(&deed, now, rng)?;
            deed.mark_registered(block_id)?;
            let mut listing = listing.lock();
            if listing.status.can_become(ListingStatus::Sold) {
                listing.status = ListingStatus::Sold;
            }
            (deed.clone(), block_id)
        };
        self.save()?;
        Ok(result)
    }
}

#[cfg(test)]
mod tests;
