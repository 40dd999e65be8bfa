use super::*;
use crate::registry::LandInfo;
use crate::test_support::{fixture, table_land, Fixture, Party, NOW};

struct Market {
    f: Fixture,
    market: Marketplace,
    x: Party,
    y: Party,
    bank: Party,
}

fn market(seed: u64) -> Market {
    let mut f = fixture(seed);
    let x = f.party("Mr. X");
    let y = f.party("Mr. Y");
    let bank = f.party("Bank");
    f.registry.register_record(&x.cert, &table_land(), "Mr. X", "-", "T0", NOW, &mut f.rng).unwrap();
    let market = Marketplace::in_memory(Arc::clone(&f.registry), "Bank");
    Market { f, market, x, y, bank }
}

fn price() -> Price {
    Price::new("1500000", "BDT").unwrap()
}

impl Market {
    fn sign(&mut self, deed: &Deed, role: Role) -> Result<Deed, TradingError> {
        let party = match role {
            Role::Seller => &self.x,
            Role::Buyer => &self.y,
            Role::Bank => &self.bank,
        };
        let sig = self.f.sign(party, deed);
        self.market.sign_deed(&deed.deed_id, role, sig, party.cert.serial, NOW)
    }

    fn open_deed(&mut self) -> Deed {
        let xs = self.f.login(&self.x);
        let ys = self.f.login(&self.y);
        let listing = self.market.post_listing(&xs, 8000, 3000, price(), NOW).unwrap();
        self.market.create_deed(&listing.listing_id, &ys, None, NOW, &mut self.f.rng).unwrap()
    }
}

#[test]
fn listing_rules() {
    let mut m = market(10);
    let xs = m.f.login(&m.x);
    let ys = m.f.login(&m.y);
    assert_eq!(m.market.post_listing(&ys, 8000, 3000, price(), NOW).unwrap_err().code(), "not-owner");
    assert_eq!(m.market.post_listing(&xs, 1, 1, price(), NOW).unwrap_err().code(), "not-owner");
    let bad_price = Price { amount: "0".into(), currency: "BDT".into() };
    assert_eq!(m.market.post_listing(&xs, 8000, 3000, bad_price, NOW).unwrap_err().code(), "invalid-price");

    let listing = m.market.post_listing(&xs, 8000, 3000, price(), NOW).unwrap();
    assert_eq!(listing.status, ListingStatus::Open);
    assert_eq!(listing.land, table_land());
    assert_eq!(m.market.post_listing(&xs, 8000, 3000, price(), NOW).unwrap_err().code(), "duplicate-listing");

    assert_eq!(m.market.withdraw_listing(&ys, &listing.listing_id).unwrap_err().code(), "not-owner");
    assert_eq!(m.market.withdraw_listing(&xs, &listing.listing_id).unwrap().status, ListingStatus::Withdrawn);
    assert_eq!(m.market.withdraw_listing(&xs, &listing.listing_id).unwrap_err().code(), "listing-not-open");
    let again = m.market.post_listing(&xs, 8000, 3000, price(), NOW).unwrap();

    let all = m.market.search_listings(&ListingFilter::default());
    assert_eq!(all.iter().map(|l| l.listing_id.as_str()).collect::<Vec<_>>(), [again.listing_id.as_str(), listing.listing_id.as_str()]);
    let open = ListingFilter { status: Some(ListingStatus::Open), dag: Some(8000), ..Default::default() };
    assert_eq!(m.market.search_listings(&open).len(), 1);
    let none = ListingFilter { min_price: Some(10.0), max_price: Some(5.0), ..Default::default() };
    assert!(m.market.search_listings(&none).is_empty());
}

#[test]
fn deed_creation_rules() {
    let mut m = market(11);
    let xs = m.f.login(&m.x);
    let ys = m.f.login(&m.y);
    let listing = m.market.post_listing(&xs, 8000, 3000, price(), NOW).unwrap();
    assert_eq!(m.market.create_deed(&listing.listing_id, &xs, None, NOW, &mut m.f.rng).unwrap_err().code(), "self-dealing");
    let deed = m.market.create_deed(&listing.listing_id, &ys, None, NOW, &mut m.f.rng).unwrap();
    assert_eq!(deed.state(), deed::DeedState::Draft);
    assert!(deed.signatures.is_empty());
    assert_eq!(deed.bank_id, "Bank");
    assert!(deed.transaction_id.starts_with("BN"));
    assert_eq!(m.market.get_listing(&listing.listing_id).unwrap().status, ListingStatus::UnderDeed);
    assert_eq!(
        m.market.create_deed(&listing.listing_id, &ys, None, NOW, &mut m.f.rng).unwrap_err().code(),
        "listing-not-open"
    );
    assert_eq!(m.market.create_deed("L-999", &ys, None, NOW, &mut m.f.rng).unwrap_err().code(), "listing-not-found");
}

#[test]
fn signing_guards() {
    let mut m = market(12);
    let deed = m.open_deed();
    assert_eq!(m.sign(&deed, Role::Bank).unwrap_err().code(), "premature-bank-signature");

    // Mr. X's certificate offered for the buyer role.
    let sig = m.f.sign(&m.x, &deed);
    let err = m.market.sign_deed(&deed.deed_id, Role::Buyer, sig, m.x.cert.serial, NOW).unwrap_err();
    assert_eq!(err.code(), "wrong-party");

    // Right certificate, signature by the wrong key.
    let sig = m.f.sign(&m.x, &deed);
    let err = m.market.sign_deed(&deed.deed_id, Role::Buyer, sig, m.y.cert.serial, NOW).unwrap_err();
    assert_eq!(err.code(), "bad-signature");

    assert_eq!(m.sign(&deed, Role::Buyer).unwrap().state(), deed::DeedState::PartiallySigned);
    assert_eq!(m.sign(&deed, Role::Buyer).unwrap_err().code(), "already-signed");
    assert_eq!(m.sign(&deed, Role::Seller).unwrap().state(), deed::DeedState::PartiesSigned);
    assert_eq!(m.sign(&deed, Role::Bank).unwrap().state(), deed::DeedState::BankSigned);

    let sig = m.f.sign(&m.bank, &deed);
    assert_eq!(m.market.sign_deed("D-404", Role::Bank, sig.clone(), m.bank.cert.serial, NOW).unwrap_err().code(), "deed-not-found");
    assert_eq!(m.market.sign_deed(&deed.deed_id, Role::Bank, sig, 999, NOW).unwrap_err().code(), "invalid-certificate");
}

#[test]
fn full_trade_moves_ownership() {
    let mut m = market(13);
    let deed = m.open_deed();
    assert_eq!(m.market.settle_and_register(&deed.deed_id, NOW, &mut m.f.rng).unwrap_err().code(), "deed-not-finalized");
    for role in [Role::Seller, Role::Buyer, Role::Bank] {
        m.sign(&deed, role).unwrap();
    }
    let (done, block_id) = m.market.settle_and_register(&deed.deed_id, NOW + 10, &mut m.f.rng).unwrap();
    assert_eq!(done.state(), deed::DeedState::Registered);
    assert_eq!(done.registered_block, Some(block_id));
    assert_eq!(m.market.get_listing(&deed.listing_id).unwrap().status, ListingStatus::Sold);
    assert_eq!(m.f.registry.active_entry(8000, 3000).unwrap().owner_id, "Mr. Y");
    assert_eq!(m.market.settle_and_register(&deed.deed_id, NOW, &mut m.f.rng).unwrap_err().code(), "deed-not-finalized");

    // Coherence: one registered deed for the sold listing, signed by three distinct identities.
    let signers: std::collections::HashSet<_> = done.signatures.values().map(|s| s.cert_serial).collect();
    assert_eq!(signers.len(), 3);
}

#[test]
fn abandonment_reopens_listing() {
    let mut m = market(14);
    let deed = m.open_deed();
    m.sign(&deed, Role::Seller).unwrap();
    let bank_session = m.f.login(&m.bank);
    assert_eq!(m.market.abandon_deed(&deed.deed_id, &bank_session).unwrap_err().code(), "wrong-party");
    let ys = m.f.login(&m.y);
    assert_eq!(m.market.abandon_deed(&deed.deed_id, &ys).unwrap().state(), deed::DeedState::Abandoned);
    let listing = m.market.get_listing(&deed.listing_id).unwrap();
    assert_eq!(listing.status, ListingStatus::Open);
    assert_eq!(listing.deed_id, None);
    assert_eq!(m.sign(&deed, Role::Buyer).unwrap_err().code(), "deed-closed");
    let again = m.market.create_deed(&deed.listing_id, &ys, None, NOW, &mut m.f.rng).unwrap();
    assert_ne!(again.deed_id, deed.deed_id);
}

#[test]
fn registry_rejection_leaves_deed_bank_signed() {
    let mut m = market(15);
    let deed = m.open_deed();
    for role in [Role::Seller, Role::Buyer, Role::Bank] {
        m.sign(&deed, role).unwrap();
    }
    // Meanwhile the parcel moves to someone else by another route.
    let z = m.f.party("Mr. Z");
    let side = m.f.deed(&m.x, &z, Some(&m.bank), &table_land());
    m.f.registry.transfer_ownership(&side, NOW, &mut m.f.rng).unwrap();

    let err = m.market.settle_and_register(&deed.deed_id, NOW, &mut m.f.rng).unwrap_err();
    assert_eq!(err.code(), "seller-not-owner");
    assert_eq!(m.market.get_deed(&deed.deed_id).unwrap().state(), deed::DeedState::BankSigned);
    assert_eq!(m.market.get_listing(&deed.listing_id).unwrap().status, ListingStatus::UnderDeed);
}

#[test]
fn market_state_persists() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("market.json");
    let mut m = market(16);
    m.market = Marketplace::open(Arc::clone(&m.f.registry), "Bank", &path).unwrap();
    let deed = m.open_deed();
    m.sign(&deed, Role::Seller).unwrap();

    let reopened = Marketplace::open(Arc::clone(&m.f.registry), "Bank", &path).unwrap();
    let loaded = reopened.get_deed(&deed.deed_id).unwrap();
    assert_eq!(loaded.state(), deed::DeedState::PartiallySigned);
    assert_eq!(loaded.digest(), deed.digest());
    assert_eq!(reopened.get_listing(&deed.listing_id).unwrap().status, ListingStatus::UnderDeed);

    // Fresh ids continue past the stored ones.
    let mut f = m.f;
    let other = LandInfo::new(9, 9, "1", "Shotangsho").unwrap();
    f.registry.register_record(&m.x.cert, &other, "Mr. X", "-", "T", NOW, &mut f.rng).unwrap();
    let xs = f.login(&m.x);
    let listing = reopened.post_listing(&xs, 9, 9, price(), NOW).unwrap();
    assert_ne!(listing.listing_id, deed.listing_id);
    assert!(!std::fs::read_to_string(&path).unwrap().contains("Dag number"));
}
