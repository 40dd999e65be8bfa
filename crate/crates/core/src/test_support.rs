use std::collections::BTreeMap;
use std::sync::{Arc, OnceLock};

use rand::rngs::StdRng;
use rand::SeedableRng;

use crate::crypto::{generate_domain_params, keygen, sign, DomainParams, KeyPair};
use crate::ledger::Ledger;
use crate::registry::{LandInfo, Registry, Session};
use crate::trading::cert::{Certificate, CertificateAuthority, CertificateStore};
use crate::trading::deed::{Deed, DeedSignature, Price, Role};

pub const NOW: u64 = 1_700_000_000;

pub struct Fixture {
    pub params: DomainParams,
    pub ca: CertificateAuthority,
    pub certs: Arc<CertificateStore>,
    pub registry: Arc<Registry>,
    pub rng: StdRng,
}

pub struct Party {
    pub key: KeyPair,
    pub cert: Certificate,
}

pub fn params() -> DomainParams {
    static PARAMS: OnceLock<DomainParams> = OnceLock::new();
    PARAMS.get_or_init(|| generate_domain_params(96, &mut StdRng::seed_from_u64(77)).unwrap()).clone()
}

pub fn table_land() -> LandInfo {
    LandInfo::new(8000, 3000, "2000", "Shotangsho").unwrap()
}

pub fn fixture(seed: u64) -> Fixture {
    let mut rng = StdRng::seed_from_u64(seed);
    let params = params();
    let ca = CertificateAuthority::generate("ca", params.clone(), &mut rng);
    let certs = Arc::new(CertificateStore::in_memory());
    certs.ensure_root(&ca, NOW, &mut rng).unwrap();
    let registry = Arc::new(Registry::in_memory(Arc::new(Ledger::in_memory(NOW)), ca.public(), Arc::clone(&certs), 100));
    Fixture { params, ca, certs, registry, rng }
}

impl Fixture {
    pub fn party(&mut self, name: &str) -> Party {
        let key = keygen(&self.params, &mut self.rng);
        let cert = self.certs.issue(&self.ca, name, &self.params, key.public_beta(), 30, NOW, &mut self.rng).unwrap();
        Party { key, cert }
    }

    pub fn login(&mut self, p: &Party) -> Session {
        let ch = self.registry.issue_challenge(&p.cert.subject_id, NOW, &mut self.rng);
        let sig = sign(&self.params, p.key.private_a(), &ch.digest(), &mut self.rng);
        self.registry.verify_challenge(&ch.challenge_id, &sig, &p.cert, NOW + 1, &mut self.rng).unwrap()
    }

    /// A deed signed by seller, buyer and (if given) the bank.
    pub fn deed(&mut self, seller: &Party, buyer: &Party, bank: Option<&Party>, land: &LandInfo) -> Deed {
        let mut deed = Deed {
            deed_id: "D-1".into(),
            listing_id: "L-1".into(),
            seller_id: seller.cert.subject_id.clone(),
            buyer_id: buyer.cert.subject_id.clone(),
            bank_id: bank.map_or("Bank".into(), |b| b.cert.subject_id.clone()),
            land: land.clone(),
            price: Price::new("100", "BDT").unwrap(),
            transaction_id: "BNX Y2345".into(),
            created_at: NOW,
            signatures: BTreeMap::new(),
            registered_block: None,
            abandoned: false,
        };
        let mut parties = vec![(Role::Seller, seller), (Role::Buyer, buyer)];
        parties.extend(bank.map(|b| (Role::Bank, b)));
        for (role, p) in parties {
            let signature = self.sign(p, &deed);
            deed.add_signature(role, DeedSignature { signature, cert_serial: p.cert.serial }).unwrap();
        }
        deed
    }

    pub fn sign(&mut self, p: &Party, deed: &Deed) -> crate::crypto::Signature {
        sign(&self.params, p.key.private_a(), &deed.digest(), &mut self.rng)
    }
}
