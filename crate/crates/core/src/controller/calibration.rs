//! Expected calibration error.

use crate::error::{Error, Result};

/// ECE over `(confidence, correct)` pairs with `bins` equal-width bins on
/// [0, 1]; p = 1 falls in the last bin and empty bins are skipped.
pub fn ece(pairs: &[(f64, bool)], bins: usize) -> Result<f64> {
    if bins == 0 {
        return Err(Error::InvalidArgument("need at least one bin".into()));
    }
    if pairs.is_empty() {
        return Err(Error::InvalidArgument("no predictions".into()));
    }
    let mut count = vec![0usize; bins];
    let mut conf = vec![0.0; bins];
    let mut hits = vec![0usize; bins];
    for (i, &(p, ok)) in pairs.iter().enumerate() {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidArgument(format!(
                "confidence {p} at {i} outside [0, 1]"
            )));
        }
        let b = ((p * bins as f64) as usize).min(bins - 1);
        count[b] += 1;
        conf[b] += p;
        hits[b] += ok as usize;
    }
    let n = pairs.len() as f64;
    Ok((0..bins)
        .filter(|&b| count[b] > 0)
        .map(|b| {
            let m = count[b] as f64;
            m / n * (hits[b] as f64 / m - conf[b] / m).abs()
        })
        .sum())
}
