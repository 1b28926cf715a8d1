use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Opaque code standing in for a sensitive value. The caller maps values to
/// codes; this module never sees the values themselves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SensitiveCode(pub u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReleasedGroup {
    pub bin: usize,
    pub count: u64,
}

/// Release `(bin, count)` only for quasi-identifier groups holding at least
/// `l` distinct sensitive values. Output is ordered by bin.
pub fn l_diversify(records: &[(usize, SensitiveCode)], l: usize) -> Result<Vec<ReleasedGroup>> {
    if l < 2 {
        return Err(Error::PrivacyConfig("l-diversity requires l >= 2".into()));
    }
    let mut groups: BTreeMap<usize, (u64, BTreeSet<SensitiveCode>)> = BTreeMap::new();
    for &(bin, code) in records {
        let entry = groups.entry(bin).or_default();
        entry.0 += 1;
        entry.1.insert(code);
    }
    Ok(groups
        .into_iter()
        .filter(|(_, (_, distinct))| distinct.len() >= l)
        .map(|(bin, (count, _))| ReleasedGroup { bin, count })
        .collect())
}
