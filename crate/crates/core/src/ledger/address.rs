use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

/// 20-byte instance identity, rendered as `0x`-prefixed lowercase hex.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LedgerAddress([u8; 20]);

impl LedgerAddress {
    /// Reserved "no address" value; never assigned to an instance.
    pub const ZERO: LedgerAddress = LedgerAddress([0; 20]);

    pub fn from_bytes(bytes: [u8; 20]) -> Self {
        LedgerAddress(bytes)
    }

    pub fn as_bytes(&self) -> &[u8; 20] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0 == [0; 20]
    }

    /// `sha256(deployer || nonce_be)` truncated to 20 bytes.
    pub fn derive(deployer: &LedgerAddress, nonce: u64) -> Self {
        let mut h = Sha256::new();
        h.update(deployer.0);
        h.update(nonce.to_be_bytes());
        let digest = h.finalize();
        let mut out = [0u8; 20];
        out.copy_from_slice(&digest[..20]);
        LedgerAddress(out)
    }

    pub fn to_hex(&self) -> String {
        format!("0x{}", hex::encode(self.0))
    }
}

impl fmt::Display for LedgerAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl fmt::Debug for LedgerAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let h = hex::encode(self.0);
        write!(f, "0x{}…{}", &h[..6], &h[36..])
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid address {0:?}")]
pub struct BadAddress(pub String);

impl FromStr for LedgerAddress {
    type Err = BadAddress;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let body = s.strip_prefix("0x").unwrap_or(s);
        let bytes = hex::decode(body).map_err(|_| BadAddress(s.to_string()))?;
        let arr: [u8; 20] = bytes.try_into().map_err(|_| BadAddress(s.to_string()))?;
        Ok(LedgerAddress(arr))
    }
}

impl Serialize for LedgerAddress {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if s.is_human_readable() {
            s.serialize_str(&self.to_hex())
        } else {
            self.0.serialize(s)
        }
    }
}

impl<'de> Deserialize<'de> for LedgerAddress {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        if d.is_human_readable() {
            let s = String::deserialize(d)?;
            s.parse().map_err(serde::de::Error::custom)
        } else {
            Ok(LedgerAddress(<[u8; 20]>::deserialize(d)?))
        }
    }
}

/// External (human or system) account. Its ledger address is derived from
/// the label so instances can compare senders uniformly.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AccountId(String);

impl AccountId {
    pub fn new(label: impl Into<String>) -> Self {
        AccountId(label.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn address(&self) -> LedgerAddress {
        let mut h = Sha256::new();
        h.update(b"account:");
        h.update(self.0.as_bytes());
        let digest = h.finalize();
        let mut out = [0u8; 20];
        out.copy_from_slice(&digest[..20]);
        LedgerAddress(out)
    }
}

impl fmt::Display for AccountId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for AccountId {
    fn from(s: &str) -> Self {
        AccountId::new(s)
    }
}
