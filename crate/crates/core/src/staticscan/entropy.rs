use std::collections::HashMap;

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
#[error("entropy of an empty string is undefined")]
pub struct EntropyError;

/// Bits per character of the string's own character distribution.
pub fn shannon_entropy(s: &str) -> Result<f64, EntropyError> {
    let mut counts: HashMap<char, usize> = HashMap::new();
    let mut total = 0usize;
    for c in s.chars() {
        *counts.entry(c).or_default() += 1;
        total += 1;
    }
    if total == 0 {
        return Err(EntropyError);
    }
    let n = total as f64;
    let h = counts
        .values()
        .map(|&k| {
            let p = k as f64 / n;
            -p * p.log2()
        })
        .sum::<f64>();
    Ok(h.max(0.0))
}
