//! The two-scale defect `|L_{N'} + L_N - 2 L_{2N}|` against its bound.

use crate::bigutil::{dec, ln_biguint};
use crate::cocycle::{le_sequence, QuadratureSpec};
use crate::error::{Error, Result};
use crate::freq::{Convergent, Frequency};
use crate::gevrey::MatrixFunction;
use crate::scheme::initial::window_range;
use crate::scheme::params::ParameterBundle;
use crate::scheme::schedule::below_exp_cap;
use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TwoScaleFlags {
    /// `L_N > 90 kappa`.
    pub l_n_above_90_kappa: bool,
    /// `L_{2N} > (9/10) L_N`.
    pub l_2n_above_nine_tenths: bool,
    /// `m < exp((c/10) q^gamma)`.
    pub m_below_cap: bool,
    /// `C_1 q^sigma < N` and `2N < C_2 q^sigma_1`.
    pub n_in_window: bool,
    /// No `m >= 2` satisfies the cap at this `q`.
    pub cap_vacuous: bool,
}

impl TwoScaleFlags {
    pub fn all_hold(&self) -> bool {
        self.l_n_above_90_kappa && self.l_2n_above_nine_tenths && self.m_below_cap && self.n_in_window
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoScaleEstimate {
    pub n: u64,
    pub n_prime: u64,
    pub m: u64,
    #[serde(with = "dec")]
    pub q: BigUint,
    pub l_n: f64,
    pub l_2n: f64,
    pub l_n_prime: f64,
    pub defect: f64,
    /// `exp(-(c/2) q^gamma)`.
    pub exp_term: f64,
    /// `2 L_N / m`.
    pub ratio_term: f64,
    pub bound: f64,
    pub bound_holds: bool,
    pub flags: TwoScaleFlags,
    pub kappa: f64,
    pub c: f64,
    pub gamma: f64,
    pub grid: usize,
}

/// `|L_{N'} + L_N - 2 L_{2N}|` with `N' = mN`, its bound
/// `exp(-(c/2) q^gamma) + 2 L_N / m`, and every hypothesis as a flag.
pub fn two_scale_defect(
    a: &MatrixFunction,
    f: &Frequency,
    n: u64,
    m: u64,
    q: &Convergent,
    bundle: &ParameterBundle,
    spec: &QuadratureSpec,
) -> Result<TwoScaleEstimate> {
    if n == 0 || m == 0 {
        return Err(Error::input(format!("N and m must be positive, got N = {n}, m = {m}")));
    }
    let n_prime = n
        .checked_mul(m)
        .ok_or_else(|| Error::input(format!("N' = {m} * {n} overflows")))?;
    let mut ns = vec![n, 2 * n, n_prime];
    ns.sort_unstable();
    ns.dedup();
    let les = le_sequence(a, f, &ns, spec)?;
    let at = |k: u64| les[ns.binary_search(&k).unwrap()].value;
    let (l_n, l_2n, l_n_prime) = (at(n), at(2 * n), at(n_prime));
    let defect = (l_n_prime + l_n - 2.0 * l_2n).abs();
    let q_gamma = (bundle.gamma * ln_biguint(&q.q)).exp();
    let exp_term = (-0.5 * bundle.c * q_gamma).exp();
    let ratio_term = 2.0 * l_n / m as f64;
    let bound = exp_term + ratio_term;
    let n_in_window = window_range(bundle, &q.q)?.is_some_and(|(lo, hi)| lo <= n && n <= hi);
    let flags = TwoScaleFlags {
        l_n_above_90_kappa: l_n > 90.0 * bundle.kappa,
        l_2n_above_nine_tenths: l_2n > 0.9 * l_n,
        m_below_cap: below_exp_cap(bundle, &q.q, &BigUint::from(m))?,
        n_in_window,
        cap_vacuous: !below_exp_cap(bundle, &q.q, &BigUint::from(2u32))?,
    };
    Ok(TwoScaleEstimate {
        n,
        n_prime,
        m,
        q: q.q.clone(),
        l_n,
        l_2n,
        l_n_prime,
        defect,
        exp_term,
        ratio_term,
        bound,
        bound_holds: defect < bound,
        flags,
        kappa: bundle.kappa,
        c: bundle.c,
        gamma: bundle.gamma,
        grid: spec.k,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cocycle::finite_scale_le;
    use crate::mat2::Mat2;
    use crate::scheme::params::{select_parameters, SigmaSearch};

    fn bundle() -> ParameterBundle {
        select_parameters(1.1, 0.1, 0.001, &SigmaSearch::default()).unwrap()
    }

    fn golden(q: u64) -> Convergent {
        Frequency::golden().convergents().find(|c| c.q == BigUint::from(q)).unwrap()
    }

    #[test]
    fn constant_cocycle_has_zero_defect() {
        let a = MatrixFunction::constant(Mat2::diag(2.0, 0.5), 1.5, 0.2).unwrap();
        let spec = QuadratureSpec::with_grid(256).unwrap();
        for (n, m) in [(90, 1), (90, 2), (90, 7)] {
            let r = two_scale_defect(&a, &Frequency::golden(), n, m, &golden(34), &bundle(), &spec).unwrap();
            assert!(r.defect < 1e-14, "{}", r.defect);
            assert!(r.flags.n_in_window && r.flags.l_n_above_90_kappa);
        }
    }

    #[test]
    fn rotation_has_zero_defect_but_fails_the_size_flag() {
        let a = MatrixFunction::rotation(1.5, 0.2).unwrap();
        let r = two_scale_defect(&a, &Frequency::golden(), 90, 4, &golden(34), &bundle(), &QuadratureSpec::with_grid(256).unwrap())
            .unwrap();
        assert!(r.defect < 1e-14);
        assert!(!r.flags.l_n_above_90_kappa);
    }

    #[test]
    fn defect_matches_separate_evaluations() {
        let a = MatrixFunction::almost_mathieu(3.0, 0.0, 1.5, 0.2).unwrap();
        let f = Frequency::golden();
        let spec = QuadratureSpec::with_grid(512).unwrap();
        let r = two_scale_defect(&a, &f, 300, 3, &golden(89), &bundle(), &spec).unwrap();
        let l = |n| finite_scale_le(&a, &f, n, &spec).unwrap().value;
        assert_eq!(r.l_n, l(300));
        assert_eq!(r.l_2n, l(600));
        assert_eq!(r.l_n_prime, l(900));
        assert_eq!(r.defect, (l(900) + l(300) - 2.0 * l(600)).abs());
    }

    #[test]
    fn almost_mathieu_defect_is_within_the_ratio_term() {
        let a = MatrixFunction::almost_mathieu(3.0, 0.0, 1.5, 0.2).unwrap();
        let r = two_scale_defect(&a, &Frequency::golden(), 300, 8, &golden(89), &bundle(), &QuadratureSpec::with_grid(1024).unwrap())
            .unwrap();
        assert!(r.defect < r.ratio_term + 1e-3);
        assert!(r.flags.n_in_window);
        // c = 0.1 at q = 89: exp(0.01 * 89^(1/4)) < 2, so no m >= 2 is admissible
        assert!(r.flags.cap_vacuous && !r.flags.m_below_cap);
    }
}
