//! Avalanche-principle check on a finite chain of matrices.

use crate::error::{Error, Result};
use crate::mat2::Mat2;
use crate::reduce::pairwise_sum;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

const TINY: f64 = 1e-150;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApHypothesis {
    /// `mu > n` fails.
    MuAboveLength,
    /// `||M_j|| >= mu` fails.
    NormAtLeastMu,
    /// `|ln||M_j|| + ln||M_{j+1}|| - ln||M_{j+1} M_j||| < (1/2) ln mu` fails.
    PairNonCancelling,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApViolation {
    pub hypothesis: ApHypothesis,
    /// 0-based matrix index (first of the pair); absent for `mu > n`.
    pub index: Option<usize>,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApReport {
    pub n: usize,
    pub mu: f64,
    pub c_ap: f64,
    pub violations: Vec<ApViolation>,
    pub hypotheses_hold: bool,
    pub lhs: f64,
    /// `lhs * mu / n`.
    pub ratio: f64,
    /// `lhs < C_AP n / mu`, evaluated only when the hypotheses hold.
    pub conclusion_holds: Option<bool>,
}

/// Evaluates `|ln||M_n...M_1|| + sum_{j=2}^{n-1} ln||M_j|| - sum_{j=1}^{n-1} ln||M_{j+1} M_j|||`
/// together with both hypotheses. The sum is rearranged as
/// `ln||prod (M_j/||M_j||)|| - sum_j ln||(M_{j+1}/||M_{j+1}||)(M_j/||M_j||)||`,
/// which is algebraically identical and free of large cancelling terms.
pub fn avalanche_check(ms: &[Mat2], mu: f64, c_ap: f64) -> Result<ApReport> {
    let n = ms.len();
    if n < 3 {
        return Err(Error::input(format!("the avalanche check needs at least 3 matrices, got {n}")));
    }
    if !(mu > 0.0) || !mu.is_finite() {
        return Err(Error::input(format!("mu must be positive and finite, got {mu}")));
    }
    if let Some(j) = ms.iter().position(|m| !m.is_finite() || m.op_norm() == 0.0) {
        return Err(Error::input(format!("matrix {j} is zero or not finite")));
    }
    let norms: Vec<f64> = ms.iter().map(Mat2::op_norm).collect();
    let unit: Vec<Mat2> = ms.iter().zip(&norms).map(|(m, &k)| m.scale(1.0 / k)).collect();

    let mut violations = Vec::new();
    if !(mu > n as f64) {
        violations.push(ApViolation {
            hypothesis: ApHypothesis::MuAboveLength,
            index: None,
            value: n as f64,
        });
    }
    for (j, &k) in norms.iter().enumerate() {
        if k < mu {
            violations.push(ApViolation {
                hypothesis: ApHypothesis::NormAtLeastMu,
                index: Some(j),
                value: k,
            });
        }
    }
    let pair_logs: Vec<f64> = unit.windows(2).map(|w| (w[1] * w[0]).op_norm().ln()).collect();
    for (j, &d) in pair_logs.iter().enumerate() {
        if !(d.abs() < 0.5 * mu.ln()) {
            violations.push(ApViolation {
                hypothesis: ApHypothesis::PairNonCancelling,
                index: Some(j),
                value: -d,
            });
        }
    }

    // unit factors cannot overflow; rescale only before underflow
    let mut prod = Mat2::IDENTITY;
    let mut log_scale = 0.0;
    for m in &unit {
        prod = *m * prod;
        let k = prod.op_norm();
        if k < TINY {
            if k == 0.0 {
                return Err(Error::Numeric {
                    step: 0,
                    reason: "normalized chain product vanished".into(),
                });
            }
            prod = prod.scale(1.0 / k);
            log_scale += k.ln();
        }
    }
    let chain = log_scale + prod.op_norm().ln();
    let lhs = (chain - pairwise_sum(&pair_logs)).abs();
    let hypotheses_hold = violations.is_empty();
    Ok(ApReport {
        n,
        mu,
        c_ap,
        hypotheses_hold,
        violations,
        lhs,
        ratio: lhs * mu / n as f64,
        conclusion_holds: hypotheses_hold.then(|| lhs < c_ap * n as f64 / mu),
    })
}

/// `R(e_j) diag(l_j, 1/l_j) R(e'_j)` with `l_j` uniform in `[mu, 2 mu]` and
/// rotation angles `2 pi e` with `|e| <= tilt`: strongly hyperbolic matrices
/// whose expanding directions stay nearly aligned.
pub fn aligned_hyperbolic_sequence(seed: u64, n: usize, mu: f64, tilt: f64) -> Vec<Mat2> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let l = rng.gen_range(mu..=2.0 * mu);
            let e1 = rng.gen_range(-tilt..=tilt);
            let e2 = rng.gen_range(-tilt..=tilt);
            Mat2::rotation(e1) * Mat2::diag(l, 1.0 / l) * Mat2::rotation(e2)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{prop_assert, proptest};

    /// Direct evaluation of the defining sum with every product formed.
    fn naive_lhs(ms: &[Mat2]) -> f64 {
        let mut prod = Mat2::IDENTITY;
        let mut log_scale = 0.0;
        for m in ms {
            prod = *m * prod;
            let k = prod.op_norm();
            prod = prod.scale(1.0 / k);
            log_scale += k.ln();
        }
        let inner: f64 = ms[1..ms.len() - 1].iter().map(|m| m.op_norm().ln()).sum();
        let pairs: f64 = ms.windows(2).map(|w| (w[1] * w[0]).op_norm().ln()).sum();
        (log_scale + inner - pairs).abs()
    }

    #[test]
    fn diagonal_chain_telescopes_exactly() {
        for (mu, n) in [(1e6, 10), (1e4, 50), (64.0, 3)] {
            let ms = vec![Mat2::diag(mu, 1.0 / mu); n];
            let r = avalanche_check(&ms, mu, 10.0).unwrap();
            assert_eq!(r.lhs, 0.0);
            assert!(r.hypotheses_hold);
            assert_eq!(r.conclusion_holds, Some(true));
        }
    }

    #[test]
    fn short_mu_is_reported() {
        let ms = vec![Mat2::diag(5.0, 0.2); 10];
        let r = avalanche_check(&ms, 5.0, 10.0).unwrap();
        assert!(!r.hypotheses_hold);
        assert_eq!(r.violations[0].hypothesis, ApHypothesis::MuAboveLength);
        assert_eq!(r.conclusion_holds, None);
    }

    #[test]
    fn cancelling_pair_is_reported() {
        let mu = 1e4;
        let h = Mat2::diag(mu, 1.0 / mu);
        let flip = Mat2::diag(1.0 / mu, mu);
        let r = avalanche_check(&[h, flip, h], mu, 10.0).unwrap();
        let pairs: Vec<_> = r
            .violations
            .iter()
            .filter(|v| v.hypothesis == ApHypothesis::PairNonCancelling)
            .map(|v| v.index.unwrap())
            .collect();
        assert_eq!(pairs, vec![0, 1]);
    }

    #[test]
    fn small_norm_is_reported() {
        let mu = 100.0;
        let r = avalanche_check(&[Mat2::diag(mu, 0.01), Mat2::diag(10.0, 0.1), Mat2::diag(mu, 0.01)], mu, 10.0).unwrap();
        assert!(r
            .violations
            .iter()
            .any(|v| v.hypothesis == ApHypothesis::NormAtLeastMu && v.index == Some(1)));
    }

    #[test]
    fn aligned_sequences_satisfy_the_conclusion() {
        for seed in 0..20 {
            let ms = aligned_hyperbolic_sequence(seed, 50, 1e4, 0.05);
            let r = avalanche_check(&ms, 1e4, 10.0).unwrap();
            assert!(r.hypotheses_hold, "seed {seed}: {:?}", r.violations);
            assert!(r.lhs <= 10.0 * 50.0 / 1e4);
        }
    }

    #[test]
    fn short_input_is_rejected() {
        assert!(avalanche_check(&[Mat2::IDENTITY; 2], 10.0, 10.0).is_err());
    }

    proptest! {
        #[test]
        fn rearranged_sum_matches_direct_sum(seed in 0u64..10_000, n in 3usize..30, tilt in 0.0f64..0.2) {
            let ms = aligned_hyperbolic_sequence(seed, n, 50.0, tilt);
            let r = avalanche_check(&ms, 50.0, 10.0).unwrap();
            let direct = naive_lhs(&ms);
            prop_assert!(r.lhs >= 0.0);
            prop_assert!((r.lhs - direct).abs() < 1e-9 * (1.0 + n as f64 * 50f64.ln()));
        }
    }
}
