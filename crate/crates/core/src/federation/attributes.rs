use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::config::RunConfig;
use crate::error::{Error, Result};
use crate::graph::{AttributeKind, AttributeSchema, GlobalAttribute, GlobalStats, LocalGraph};
use crate::privacy::{
    from_fixed, l_diversify, mask, protect_histogram, to_fixed, Mechanism, PairwiseSeeds, PrivacyConfig,
};
use crate::representation::{
    count_nodes, sensitive_records, AttributeHistogram, Bins, FilterCondition, HistogramSpec, LocalView, Target,
};
use crate::seed;

/// Bins of the l-diversity sensitive attribute, when that mechanism is on.
pub fn sensitive_spec(
    schema: &AttributeSchema,
    stats: &GlobalStats,
    privacy: &PrivacyConfig,
) -> Result<Option<HistogramSpec>> {
    if privacy.mechanism != Mechanism::LDiversity {
        return Ok(None);
    }
    let name = privacy
        .sensitive_attribute
        .as_deref()
        .ok_or_else(|| Error::PrivacyConfig("l-diversity requires a sensitive_attribute".into()))?;
    match schema.get(name) {
        Some((_, def)) if def.kind == AttributeKind::Categorical => {}
        Some(_) => return Err(Error::PrivacyConfig(format!("sensitive attribute `{name}` must be categorical"))),
        None => return Err(Error::Schema(format!("unknown sensitive attribute `{name}`"))),
    }
    let labels = match stats.get(name) {
        Some(GlobalAttribute::Categorical { values }) => values.clone(),
        _ => Vec::new(),
    };
    Ok(Some(HistogramSpec { target: Target::Attribute(name.to_string()), bins: Bins::Categorical { labels } }))
}

/// Noise stream of one party for one attribute session.
pub fn privacy_rng(run: &RunConfig, stream: &str, session: u64) -> ChaCha8Rng {
    seed::derive_rng(
        run.seed,
        &[b"privacy", &run.privacy.seed.to_le_bytes(), stream.as_bytes(), &session.to_le_bytes()],
    )
}

/// Protected local counts of every planned histogram, concatenated.
pub fn protected_counts<R: Rng + ?Sized>(
    graph: &LocalGraph,
    specs: &[HistogramSpec],
    sensitive: Option<&HistogramSpec>,
    filter: &FilterCondition,
    privacy: &PrivacyConfig,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let mut view = LocalView::new(graph);
    let nodes = view.select(filter)?;
    let mut out = Vec::with_capacity(vector_len(specs));
    for spec in specs {
        if privacy.mechanism == Mechanism::LDiversity {
            let sensitive = sensitive.ok_or_else(|| Error::PrivacyConfig("missing sensitive attribute bins".into()))?;
            let records = sensitive_records(&mut view, spec, sensitive, &nodes)?;
            let mut counts = vec![0.0; spec.bins.len()];
            for group in l_diversify(&records, privacy.l)? {
                counts[group.bin] = group.count as f64;
            }
            out.extend(counts);
        } else {
            let counts = count_nodes(&mut view, spec, &nodes)?;
            out.extend(protect_histogram(&counts, privacy, rng)?.values);
        }
    }
    Ok(out)
}

pub fn vector_len(specs: &[HistogramSpec]) -> usize {
    specs.iter().map(|s| s.bins.len()).sum()
}

/// Fixed-point encode and mask one party's protected counts.
pub fn encode_upload(counts: &[f64], seeds: &PairwiseSeeds, session: u64) -> Vec<u64> {
    let fixed: Vec<i64> = counts.iter().map(|&c| to_fixed(c)).collect();
    mask(&fixed, seeds, session)
}

/// Split the unmasked fixed-point sum back into histograms holding the mean
/// over `parties`.
pub fn decode_histograms(
    specs: &[HistogramSpec],
    sum: &[i64],
    parties: usize,
    mechanism: Mechanism,
    filter: &FilterCondition,
) -> Result<Vec<AttributeHistogram>> {
    if sum.len() != vector_len(specs) {
        return Err(Error::DimensionMismatch { expected: vector_len(specs), actual: sum.len() });
    }
    let mut offset = 0;
    Ok(specs
        .iter()
        .map(|spec| {
            let n = spec.bins.len();
            let counts = sum[offset..offset + n].iter().map(|&s| (from_fixed(s) / parties as f64).max(0.0)).collect();
            offset += n;
            AttributeHistogram {
                target: spec.target.clone(),
                bins: spec.bins.clone(),
                counts,
                mechanism,
                filter: filter.clone(),
            }
        })
        .collect())
}
