use std::collections::BTreeMap;

use super::protocol::{ClientUpdate, RowVector};
use crate::embedding::{EmbeddingModelState, Table};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct AggregateReport {
    /// Updates applied.
    pub applied: usize,
    /// Updates skipped as failed, empty or malformed.
    pub skipped: usize,
    pub rows_changed: usize,
}

struct RowAccumulator {
    weighted: Vec<f64>,
    weight: f64,
    contributors: usize,
    first: Vec<f64>,
    min: Vec<f64>,
    max: Vec<f64>,
}

impl RowAccumulator {
    fn new(values: &[f64], weight: f64) -> Self {
        Self {
            weighted: values.iter().map(|v| v * weight).collect(),
            weight,
            contributors: 1,
            first: values.to_vec(),
            min: values.to_vec(),
            max: values.to_vec(),
        }
    }

    fn add(&mut self, values: &[f64], weight: f64) {
        for (i, v) in values.iter().enumerate() {
            self.weighted[i] += v * weight;
            self.min[i] = self.min[i].min(*v);
            self.max[i] = self.max[i].max(*v);
        }
        self.weight += weight;
        self.contributors += 1;
    }

    /// Weighted mean over contributors. A single contributor's delta is
    /// returned as is, and rounding never takes the mean outside the
    /// contributors' range.
    fn delta(self) -> Vec<f64> {
        if self.contributors == 1 {
            return self.first;
        }
        self.weighted
            .iter()
            .zip(self.min.iter().zip(&self.max))
            .map(|(s, (lo, hi))| (s / self.weight).clamp(*lo, *hi))
            .collect()
    }
}

fn check_rows(rows: &[RowVector], table: &Table) -> Result<()> {
    for r in rows {
        if r.row as usize >= table.rows() {
            return Err(Error::Protocol(format!("row {} out of range", r.row)));
        }
        if r.values.len() != table.cols() {
            return Err(Error::DimensionMismatch { expected: table.cols(), actual: r.values.len() });
        }
        if r.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("delta for row {}", r.row)));
        }
    }
    Ok(())
}

fn apply(table: &mut Table, acc: BTreeMap<u32, RowAccumulator>) -> usize {
    let changed = acc.len();
    for (row, a) in acc {
        for (w, d) in table.row_mut(row as usize).iter_mut().zip(a.delta()) {
            *w = (f64::from(*w) + d) as f32;
        }
    }
    changed
}

/// Federated averaging: `W += sum_k n_k D_k / sum_k n_k`, per row over the
/// parties whose update touched that row. Rows nobody touched keep their
/// values. Failed, empty and malformed updates are skipped with a warning.
///
/// Fails, leaving `state` unchanged, when no update could be applied.
pub fn federated_average<'a>(
    state: &mut EmbeddingModelState,
    updates: impl IntoIterator<Item = (&'a str, &'a ClientUpdate)>,
) -> Result<AggregateReport> {
    let mut report = AggregateReport::default();
    let mut input: BTreeMap<u32, RowAccumulator> = BTreeMap::new();
    let mut output: BTreeMap<u32, RowAccumulator> = BTreeMap::new();
    for (client, update) in updates {
        if let Some(reason) = &update.failure {
            log::warn!("skipping update from `{client}`: {reason}");
            report.skipped += 1;
            continue;
        }
        if update.samples == 0 {
            report.skipped += 1;
            continue;
        }
        if let Err(e) = check_rows(&update.input, &state.input).and_then(|_| check_rows(&update.output, &state.output))
        {
            log::warn!("skipping update from `{client}`: {e}");
            report.skipped += 1;
            continue;
        }
        let weight = update.samples as f64;
        for (rows, acc) in [(&update.input, &mut input), (&update.output, &mut output)] {
            for r in rows {
                acc.entry(r.row)
                    .and_modify(|a| a.add(&r.values, weight))
                    .or_insert_with(|| RowAccumulator::new(&r.values, weight));
            }
        }
        report.applied += 1;
    }
    if report.applied == 0 {
        return Err(Error::AggregationAborted("no valid client update this round".into()));
    }
    report.rows_changed = apply(&mut state.input, input) + apply(&mut state.output, output);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::federation::Phase;
    use proptest::prelude::*;

    fn update(samples: u64, input: Vec<(u32, Vec<f64>)>) -> ClientUpdate {
        ClientUpdate {
            phase: Phase::Embedding,
            samples,
            loss: 0.0,
            input: input.into_iter().map(|(row, values)| RowVector { row, values }).collect(),
            output: vec![],
            failure: None,
        }
    }

    fn zero_state(rows: usize, cols: usize) -> EmbeddingModelState {
        EmbeddingModelState { input: Table::zeros(rows, cols), output: Table::zeros(rows, cols) }
    }

    #[test]
    fn weighted_mean_of_shared_row() {
        let mut s = zero_state(1, 1);
        let a = update(1, vec![(0, vec![0.0])]);
        let b = update(3, vec![(0, vec![4.0])]);
        federated_average(&mut s, [("a", &a), ("b", &b)]).unwrap();
        assert_eq!(s.input.row(0), &[3.0]);
    }

    #[test]
    fn single_toucher_delta_applies_unchanged() {
        let mut s = zero_state(2, 1);
        let a = update(1, vec![(0, vec![0.5])]);
        let b = update(9, vec![(1, vec![-2.0])]);
        federated_average(&mut s, [("a", &a), ("b", &b)]).unwrap();
        assert_eq!(s.input.row(0), &[0.5]);
        assert_eq!(s.input.row(1), &[-2.0]);
    }

    #[test]
    fn no_valid_update_leaves_state_alone() {
        let mut s = zero_state(1, 1);
        let failed = ClientUpdate::failed(Phase::Embedding, "nan");
        let bad_row = update(1, vec![(5, vec![1.0])]);
        let before = s.clone();
        assert!(federated_average(&mut s, [("a", &failed), ("b", &bad_row)]).is_err());
        assert_eq!(s, before);
    }

    #[test]
    fn failed_update_is_skipped() {
        let mut s = zero_state(1, 1);
        let failed = ClientUpdate::failed(Phase::Embedding, "nan");
        let ok = update(2, vec![(0, vec![1.0])]);
        let r = federated_average(&mut s, [("a", &failed), ("b", &ok)]).unwrap();
        assert_eq!((r.applied, r.skipped), (1, 1));
        assert_eq!(s.input.row(0), &[1.0]);
    }

    proptest! {
        #[test]
        fn mean_stays_within_client_range(
            deltas in proptest::collection::vec((1u64..1000, proptest::collection::vec(-1.0f64..1.0, 3)), 1..6),
        ) {
            let updates: Vec<ClientUpdate> = deltas.iter().map(|(n, d)| update(*n, vec![(0, d.clone())])).collect();
            let mut s = zero_state(1, 3);
            federated_average(&mut s, updates.iter().map(|u| ("c", u))).unwrap();
            for c in 0..3 {
                let lo = deltas.iter().map(|(_, d)| d[c]).fold(f64::INFINITY, f64::min);
                let hi = deltas.iter().map(|(_, d)| d[c]).fold(f64::NEG_INFINITY, f64::max);
                let got = f64::from(s.input.row(0)[c]);
                // the f32 store may round by half an ulp at most
                prop_assert!(got >= lo as f32 as f64 - 1e-7 && got <= hi as f32 as f64 + 1e-7, "{got} not in [{lo}, {hi}]");
            }
        }

        #[test]
        fn identical_updates_average_to_themselves(
            n in 1u64..500, k in 1usize..6, d in proptest::collection::vec(-1.0f64..1.0, 4),
        ) {
            let u = update(n, vec![(0, d.clone())]);
            let mut many = zero_state(1, 4);
            federated_average(&mut many, std::iter::repeat_n(("c", &u), k)).unwrap();
            let mut one = zero_state(1, 4);
            federated_average(&mut one, [("c", &u)]).unwrap();
            prop_assert_eq!(many, one);
        }
    }
}
