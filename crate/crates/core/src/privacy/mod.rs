//! Attribute distribution protection and secure aggregation.
//!
//! Nothing in this module sees a node id or an attribute tuple: the inputs are
//! bin counts, `(bin, sensitive code)` records, and fixed-point vectors.

mod exponential;
mod ldiversity;
mod secure_agg;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use exponential::exponential_select;
pub use ldiversity::{l_diversify, ReleasedGroup, SensitiveCode};
pub use secure_agg::{
    from_fixed, mask, pairwise_seeds, to_fixed, unmask_sum, PairwiseSeeds, SecureAggregator, FIXED_POINT_BITS,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mechanism {
    #[default]
    None,
    KAnonymity,
    LDiversity,
    Laplace,
    Exponential,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PrivacyConfig {
    pub mechanism: Mechanism,
    pub k: usize,
    pub l: usize,
    pub epsilon: f64,
    pub sensitivity: f64,
    /// Categorical attribute treated as the sensitive value for l-diversity.
    pub sensitive_attribute: Option<String>,
    pub seed: u64,
}

impl Default for PrivacyConfig {
    fn default() -> Self {
        Self {
            mechanism: Mechanism::None,
            k: 2,
            l: 2,
            epsilon: 1.0,
            sensitivity: 1.0,
            sensitive_attribute: None,
            seed: 0,
        }
    }
}

impl PrivacyConfig {
    pub fn validate(&self) -> Result<()> {
        match self.mechanism {
            Mechanism::None => {}
            Mechanism::KAnonymity if self.k < 2 => {
                return Err(Error::PrivacyConfig("k-anonymity requires k >= 2".into()))
            }
            Mechanism::LDiversity if self.l < 2 => {
                return Err(Error::PrivacyConfig("l-diversity requires l >= 2".into()))
            }
            Mechanism::LDiversity if self.sensitive_attribute.is_none() => {
                return Err(Error::PrivacyConfig("l-diversity requires a sensitive_attribute".into()))
            }
            Mechanism::Laplace | Mechanism::Exponential => {
                if !(self.epsilon > 0.0) || self.epsilon.is_nan() {
                    return Err(Error::PrivacyConfig("epsilon must be positive".into()));
                }
                if !(self.sensitivity > 0.0 && self.sensitivity.is_finite()) {
                    return Err(Error::PrivacyConfig("sensitivity must be positive".into()));
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Cumulative epsilon after `releases` protected releases (sequential
    /// composition). Reported, not enforced.
    pub fn cumulative_epsilon(&self, releases: usize) -> f64 {
        match self.mechanism {
            Mechanism::Laplace | Mechanism::Exponential => self.epsilon * releases as f64,
            _ => 0.0,
        }
    }
}

/// Non-negative integer histogram counts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BinCounts(pub Vec<u64>);

impl BinCounts {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtectedHistogram {
    pub values: Vec<f64>,
    /// Mass removed by suppression (k-anonymity and l-diversity).
    pub suppressed_mass: f64,
    pub mechanism: Mechanism,
}

/// Apply the configured protection model to one histogram.
///
/// * `k_anonymity`: bins with `0 < count < k` are set to zero.
/// * `laplace`: independent `Laplace(sensitivity / epsilon)` noise per bin,
///   clamped at zero.
/// * `exponential`: releases only the modal bin, chosen by the exponential
///   mechanism with utility = count, as a one-hot vector.
/// * `l_diversity` needs sensitive values; use [`l_diversify`].
pub fn protect_histogram<R: Rng + ?Sized>(
    counts: &BinCounts,
    cfg: &PrivacyConfig,
    rng: &mut R,
) -> Result<ProtectedHistogram> {
    cfg.validate()?;
    let raw: Vec<f64> = counts.0.iter().map(|&c| c as f64).collect();
    let (values, suppressed_mass) = match cfg.mechanism {
        Mechanism::None => (raw, 0.0),
        Mechanism::KAnonymity => {
            let mut suppressed = 0.0;
            let values = counts
                .0
                .iter()
                .map(|&c| {
                    if c > 0 && (c as usize) < cfg.k {
                        suppressed += c as f64;
                        0.0
                    } else {
                        c as f64
                    }
                })
                .collect();
            (values, suppressed)
        }
        Mechanism::Laplace => {
            let scale = cfg.sensitivity / cfg.epsilon;
            let values = raw.iter().map(|&c| (c + laplace_noise(scale, rng)).max(0.0)).collect();
            (values, 0.0)
        }
        Mechanism::Exponential => {
            let mut values = vec![0.0; raw.len()];
            if !raw.is_empty() {
                let chosen = exponential_select(&raw, cfg.sensitivity, cfg.epsilon, rng)?;
                values[chosen] = 1.0;
            }
            (values, 0.0)
        }
        Mechanism::LDiversity => {
            return Err(Error::PrivacyConfig(
                "l-diversity applies to (bin, sensitive value) records, not bare counts".into(),
            ))
        }
    };
    Ok(ProtectedHistogram { values, suppressed_mass, mechanism: cfg.mechanism })
}

/// One draw of zero-mean Laplace noise with the given scale (inverse CDF).
pub fn laplace_noise<R: Rng + ?Sized>(scale: f64, rng: &mut R) -> f64 {
    if scale == 0.0 {
        return 0.0;
    }
    // u in (-0.5, 0.5)
    let mut u: f64 = rng.random::<f64>() - 0.5;
    while u == -0.5 {
        u = rng.random::<f64>() - 0.5;
    }
    -scale * u.signum() * (1.0 - 2.0 * u.abs()).ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;
    use proptest::prelude::*;

    fn cfg(mechanism: Mechanism) -> PrivacyConfig {
        PrivacyConfig { mechanism, k: 3, ..PrivacyConfig::default() }
    }

    #[test]
    fn k_anonymity_suppresses_small_bins() {
        let out = protect_histogram(&BinCounts(vec![5, 2, 9]), &cfg(Mechanism::KAnonymity), &mut seed::rng(0)).unwrap();
        assert_eq!(out.values, vec![5.0, 0.0, 9.0]);
        assert_eq!(out.suppressed_mass, 2.0);
    }

    #[test]
    fn huge_epsilon_is_nearly_identity() {
        let c = PrivacyConfig { mechanism: Mechanism::Laplace, epsilon: 1e9, ..PrivacyConfig::default() };
        let out = protect_histogram(&BinCounts(vec![4, 0, 17]), &c, &mut seed::rng(1)).unwrap();
        for (o, i) in out.values.iter().zip([4.0, 0.0, 17.0]) {
            assert!((o - i).abs() < 1e-3);
        }
    }

    #[test]
    fn laplace_variance_matches_scale() {
        let mut rng = seed::rng(42);
        let n = 10_000;
        let samples: Vec<f64> = (0..n).map(|_| laplace_noise(1.0, &mut rng)).collect();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((var - 2.0).abs() / 2.0 < 0.1, "variance {var}");
    }

    #[test]
    fn invalid_configs_rejected() {
        for bad in [
            PrivacyConfig { mechanism: Mechanism::KAnonymity, k: 1, ..Default::default() },
            PrivacyConfig { mechanism: Mechanism::LDiversity, l: 1, ..Default::default() },
            PrivacyConfig { mechanism: Mechanism::Laplace, epsilon: 0.0, ..Default::default() },
            PrivacyConfig { mechanism: Mechanism::Exponential, epsilon: -1.0, ..Default::default() },
        ] {
            assert!(bad.validate().is_err(), "{bad:?}");
        }
        let ld = PrivacyConfig {
            mechanism: Mechanism::LDiversity,
            sensitive_attribute: Some("s".into()),
            ..Default::default()
        };
        assert!(protect_histogram(&BinCounts(vec![1]), &ld, &mut seed::rng(0)).is_err());
    }

    #[test]
    fn exponential_releases_one_hot() {
        let c = PrivacyConfig { mechanism: Mechanism::Exponential, epsilon: 1e12, ..Default::default() };
        let out = protect_histogram(&BinCounts(vec![1, 30, 2]), &c, &mut seed::rng(3)).unwrap();
        assert_eq!(out.values, vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn cumulative_epsilon_is_linear() {
        let c = PrivacyConfig { mechanism: Mechanism::Laplace, epsilon: 0.5, ..Default::default() };
        assert_eq!(c.cumulative_epsilon(4), 2.0);
        assert_eq!(PrivacyConfig::default().cumulative_epsilon(4), 0.0);
    }

    proptest! {
        #[test]
        fn k_anonymity_is_idempotent(counts in proptest::collection::vec(0u64..20, 0..30), k in 2usize..8) {
            let c = PrivacyConfig { mechanism: Mechanism::KAnonymity, k, ..Default::default() };
            let once = protect_histogram(&BinCounts(counts), &c, &mut seed::rng(0)).unwrap();
            let again_counts = BinCounts(once.values.iter().map(|&v| v as u64).collect());
            let twice = protect_histogram(&again_counts, &c, &mut seed::rng(0)).unwrap();
            prop_assert_eq!(&once.values, &twice.values);
            prop_assert!(once.values.iter().all(|&v| v == 0.0 || v as usize >= k));
        }
    }
}
