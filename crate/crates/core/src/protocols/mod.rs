//! The three dispersion protocols.

pub mod alg1;
pub mod alg2;
pub mod alg3;
mod common;

pub use alg1::Oriented;
pub use alg2::Unoriented;
pub use alg3::UnorientedFt;
pub use common::{corner_identity, Corner, Params};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProtocolId {
    Alg1,
    Alg2,
    Alg3,
}

impl ProtocolId {
    pub fn as_str(self) -> &'static str {
        match self {
            ProtocolId::Alg1 => "alg1",
            ProtocolId::Alg2 => "alg2",
            ProtocolId::Alg3 => "alg3",
        }
    }

    pub fn parse(s: &str) -> Option<ProtocolId> {
        match s {
            "alg1" => Some(ProtocolId::Alg1),
            "alg2" => Some(ProtocolId::Alg2),
            "alg3" => Some(ProtocolId::Alg3),
            _ => None,
        }
    }
}
