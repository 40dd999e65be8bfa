use serde::{Deserialize, Serialize};

use super::deed::Price;
use crate::crypto::Digest32;
use crate::hex32;
use crate::registry::LandInfo;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ListingStatus {
    Open,
    UnderDeed,
    Sold,
    Withdrawn,
}

impl ListingStatus {
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_uppercase().as_str() {
            "OPEN" => Some(ListingStatus::Open),
            "UNDER_DEED" => Some(ListingStatus::UnderDeed),
            "SOLD" => Some(ListingStatus::Sold),
            "WITHDRAWN" => Some(ListingStatus::Withdrawn),
            _ => None,
        }
    }

    /// The only legal moves.
    pub fn can_become(self, next: ListingStatus) -> bool {
        use ListingStatus::*;
        matches!((self, next), (Open, UnderDeed) | (UnderDeed, Sold) | (Open, Withdrawn) | (UnderDeed, Open))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Listing {
    pub listing_id: String,
    pub seq: u64,
    pub seller_id: String,
    #[serde(with = "hex32")]
    pub seller_fingerprint: Digest32,
    pub land: LandInfo,
    pub asking_price: Price,
    pub status: ListingStatus,
    pub created_at: u64,
    pub deed_id: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ListingFilter {
    pub dag: Option<u64>,
    pub khatiayan: Option<u64>,
    pub min_price: Option<f64>,
    pub max_price: Option<f64>,
    pub status: Option<ListingStatus>,
}

impl ListingFilter {
    pub fn matches(&self, l: &Listing) -> bool {
        let price = l.asking_price.value();
        self.dag.is_none_or(|d| l.land.dag_number == d)
            && self.khatiayan.is_none_or(|k| l.land.khatiayan_number == k)
            && self.min_price.is_none_or(|m| price >= m)
            && self.max_price.is_none_or(|m| price <= m)
            && self.status.is_none_or(|s| l.status == s)
    }
}
