//! Fixed-shape reductions whose rounding does not depend on how the inputs
//! were produced or partitioned.

/// Sum over a balanced binary tree split at `len / 2`.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        n => {
            let (l, r) = xs.split_at(n / 2);
            pairwise_sum(l) + pairwise_sum(r)
        }
    }
}

/// Arithmetic mean via [`pairwise_sum`].
pub fn pairwise_mean(xs: &[f64]) -> f64 {
    pairwise_sum(xs) / xs.len() as f64
}
