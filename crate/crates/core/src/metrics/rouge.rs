use crate::error::{Error, Result};

/// Length of the longest common subsequence, O(|a|·|b|) time, O(|b|) space.
pub fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let mut prev = vec![0usize; b.len() + 1];
    let mut curr = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            curr[j + 1] = if x == y {
                prev[j] + 1
            } else {
                prev[j + 1].max(curr[j])
            };
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[b.len()]
}

/// LCS-based F-measure against one reference.
pub fn rouge_l_single<T: PartialEq>(candidate: &[T], reference: &[T], beta: f64) -> f64 {
    let l = lcs_len(candidate, reference);
    if l == 0 {
        return 0.0;
    }
    let p = l as f64 / candidate.len() as f64;
    let r = l as f64 / reference.len() as f64;
    let b2 = beta * beta;
    (1.0 + b2) * p * r / (r + b2 * p)
}

/// ROUGE-L, maximized over references.
pub fn rouge_l<T: PartialEq>(candidate: &[T], references: &[Vec<T>], beta: f64) -> Result<f64> {
    if references.is_empty() {
        return Err(Error::arg("rouge_l needs at least one reference"));
    }
    if beta.is_nan() || beta <= 0.0 {
        return Err(Error::arg(format!("rouge beta must be positive, got {beta}")));
    }
    Ok(references
        .iter()
        .map(|r| rouge_l_single(candidate, r, beta))
        .fold(0.0, f64::max))
}
