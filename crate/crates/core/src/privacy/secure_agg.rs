use std::collections::{BTreeMap, BTreeSet};

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

/// Fractional bits of the fixed-point encoding used before masking.
pub const FIXED_POINT_BITS: u32 = 20;

const SCALE: f64 = (1u64 << FIXED_POINT_BITS) as f64;

pub fn to_fixed(value: f64) -> i64 {
    (value * SCALE).round() as i64
}

pub fn from_fixed(value: i64) -> f64 {
    value as f64 / SCALE
}

/// One party's view of the pairwise mask seeds: a seed shared with every peer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairwiseSeeds {
    pub ordinal: u32,
    #[serde(with = "peer_list")]
    pub peers: BTreeMap<u32, u64>,
}

/// Peers travel as `[ordinal, seed]` pairs: integer map keys do not survive
/// the buffering of internally tagged messages.
mod peer_list {
    use std::collections::BTreeMap;

    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(peers: &BTreeMap<u32, u64>, s: S) -> Result<S::Ok, S::Error> {
        peers.iter().collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<u32, u64>, D::Error> {
        Ok(Vec::<(u32, u64)>::deserialize(d)?.into_iter().collect())
    }
}

/// Deal a symmetric seed to every pair of ordinals. The dealer is the
/// coordinator; this is a simulation of a key agreement, not a replacement.
pub fn pairwise_seeds(run_seed: u64, ordinals: &[u32]) -> BTreeMap<u32, PairwiseSeeds> {
    let mut out: BTreeMap<u32, PairwiseSeeds> =
        ordinals.iter().map(|&o| (o, PairwiseSeeds { ordinal: o, peers: BTreeMap::new() })).collect();
    for (a, &i) in ordinals.iter().enumerate() {
        for &j in &ordinals[a + 1..] {
            let (lo, hi) = if i < j { (i, j) } else { (j, i) };
            let s = seed::derive(run_seed, &[b"mask-pair", &lo.to_le_bytes(), &hi.to_le_bytes()]);
            out.get_mut(&i).expect("present").peers.insert(j, s);
            out.get_mut(&j).expect("present").peers.insert(i, s);
        }
    }
    out
}

/// Mask a fixed-point vector. For every pair the lower ordinal adds the
/// shared pseudo-random stream and the higher one subtracts it, so the masks
/// cancel in the sum over all parties (mod 2^64).
pub fn mask(values: &[i64], seeds: &PairwiseSeeds, session: u64) -> Vec<u64> {
    let mut out: Vec<u64> = values.iter().map(|&v| v as u64).collect();
    for (&peer, &pair_seed) in &seeds.peers {
        let mut prg = seed::derive_rng(pair_seed, &[b"mask", &session.to_le_bytes()]);
        let add = seeds.ordinal < peer;
        for slot in out.iter_mut() {
            let m = prg.next_u64();
            *slot = if add { slot.wrapping_add(m) } else { slot.wrapping_sub(m) };
        }
    }
    out
}

/// Sum masked vectors from every party; the result is the plain fixed-point sum.
pub fn unmask_sum(messages: &[Vec<u64>]) -> Result<Vec<i64>> {
    let Some(first) = messages.first() else {
        return Ok(Vec::new());
    };
    let mut acc = vec![0u64; first.len()];
    for m in messages {
        if m.len() != acc.len() {
            return Err(Error::DimensionMismatch { expected: acc.len(), actual: m.len() });
        }
        for (a, v) in acc.iter_mut().zip(m) {
            *a = a.wrapping_add(*v);
        }
    }
    Ok(acc.into_iter().map(|v| v as i64).collect())
}

/// Collects masked uploads for one session and refuses to release anything
/// unless every expected party contributed.
#[derive(Debug, Clone)]
pub struct SecureAggregator {
    expected: BTreeSet<u32>,
    len: usize,
    received: BTreeMap<u32, Vec<u64>>,
}

impl SecureAggregator {
    pub fn new(expected: impl IntoIterator<Item = u32>, len: usize) -> Self {
        Self { expected: expected.into_iter().collect(), len, received: BTreeMap::new() }
    }

    pub fn submit(&mut self, ordinal: u32, masked: Vec<u64>) -> Result<()> {
        if !self.expected.contains(&ordinal) {
            return Err(Error::Protocol(format!("unexpected aggregation participant {ordinal}")));
        }
        if masked.len() != self.len {
            return Err(Error::DimensionMismatch { expected: self.len, actual: masked.len() });
        }
        if self.received.insert(ordinal, masked).is_some() {
            return Err(Error::Protocol(format!("duplicate upload from participant {ordinal}")));
        }
        Ok(())
    }

    pub fn missing(&self) -> Vec<u32> {
        self.expected.iter().filter(|o| !self.received.contains_key(o)).copied().collect()
    }

    pub fn finish(self) -> Result<Vec<i64>> {
        let missing = self.missing();
        if !missing.is_empty() {
            return Err(Error::AggregationAborted(format!("no upload from participants {missing:?}")));
        }
        if self.expected.is_empty() {
            return Ok(vec![0; self.len]);
        }
        let messages: Vec<Vec<u64>> = self.received.into_values().collect();
        unmask_sum(&messages)
    }
}
