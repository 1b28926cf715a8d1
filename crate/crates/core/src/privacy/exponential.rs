use rand::Rng;

use crate::error::{Error, Result};

/// Exponential mechanism: pick candidate `i` with probability proportional to
/// `exp(epsilon * u_i / (2 * sensitivity))`.
///
/// An infinite epsilon selects uniformly among the maximisers.
pub fn exponential_select<R: Rng + ?Sized>(
    utilities: &[f64],
    sensitivity: f64,
    epsilon: f64,
    rng: &mut R,
) -> Result<usize> {
    if utilities.is_empty() {
        return Err(Error::invalid("exponential mechanism needs at least one candidate"));
    }
    if utilities.iter().any(|u| !u.is_finite()) {
        return Err(Error::NonFinite("exponential mechanism utility".into()));
    }
    if !(sensitivity > 0.0) || epsilon < 0.0 || epsilon.is_nan() {
        return Err(Error::PrivacyConfig("exponential mechanism needs sensitivity > 0 and epsilon >= 0".into()));
    }
    let best = utilities.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if epsilon.is_infinite() {
        let maximisers: Vec<usize> = (0..utilities.len()).filter(|&i| utilities[i] == best).collect();
        return Ok(maximisers[rng.random_range(0..maximisers.len())]);
    }
    // shift by the max so the largest weight is exactly 1
    let weights: Vec<f64> = utilities.iter().map(|u| (epsilon * (u - best) / (2.0 * sensitivity)).exp()).collect();
    let total: f64 = weights.iter().sum();
    let mut target = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if target < *w {
            return Ok(i);
        }
        target -= w;
    }
    Ok(weights.len() - 1)
}
