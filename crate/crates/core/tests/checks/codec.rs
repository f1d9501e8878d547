//! TypeInfo encoding, checked over every supported kind and every 16-bit
//! value.

use std::collections::BTreeSet;

use flowledger_core::typeinfo::{all_kinds, TypeInfo};

use super::{holds, same, Check};

pub fn round_trip() -> Result<usize, String> {
    let kinds = all_kinds();
    let mut seen = BTreeSet::new();
    for k in &kinds {
        let t = TypeInfo::encode(*k);
        same(&format!("{k:?}"), t.decode(), Ok(*k))?;
        holds(&format!("{k:?} shares its encoding"), seen.insert(t.bits()))?;
    }
    Ok(kinds.len())
}

/// User task = bits 0 and 11, terminate = bits 2 and 11, join = bits 1
/// and 3; every decodable value re-encodes to itself.
pub fn bit_rules() -> Check {
    for bits in 0..=u16::MAX {
        let t = TypeInfo(bits);
        let has = |i: u32| bits & (1 << i) != 0;
        same(
            &format!("{bits:#018b} user task"),
            t.is_user_task(),
            has(0) && has(11),
        )?;
        same(
            &format!("{bits:#018b} terminate"),
            t.is_terminate(),
            has(2) && has(11),
        )?;
        same(&format!("{bits:#018b} join"), t.is_join(), has(1) && has(3))?;
        if let Ok(kind) = t.decode() {
            same(
                &format!("{bits:#018b} re-encodes"),
                TypeInfo::encode(kind),
                t,
            )?;
        }
    }
    Ok(())
}
