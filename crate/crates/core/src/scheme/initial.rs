//! The initial scale `N_0` inside the window of `qtilde_0`.

use crate::cocycle::{le_sequence, QuadratureSpec};
use crate::error::{Error, Result};
use crate::freq::{Convergent, Frequency};
use crate::gevrey::MatrixFunction;
use crate::interval::{floor_power, power_cmp};
use crate::scheme::params::ParameterBundle;
use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;

pub const MESH_RATIO: f64 = 1.1;
/// `L_{2N} > (99/100) L_N`.
pub const DOUBLING_RATIO: f64 = 0.99;

/// Integer window `C_1 q^sigma < N` and `2N < C_2 q^sigma_1`, as the
/// inclusive range `(lo, hi)`; `None` when no integer fits.
pub fn window_range(bundle: &ParameterBundle, q: &BigUint) -> Result<Option<(u64, u64)>> {
    let lo = floor_power(&bundle.c1_exact(), q, bundle.sigma_exact())? + 1u32;
    let half_c2 = bundle.c2_exact() / BigRational::from_integer(BigInt::from(2));
    let f = floor_power(&half_c2, q, bundle.sigma1_exact())?;
    if f < lo {
        return Ok(None);
    }
    let exact = power_cmp(&half_c2, q, bundle.sigma1_exact(), &BigRational::from_integer(BigInt::from(f.clone())))?
        == Ordering::Equal;
    if exact && f == lo {
        return Ok(None);
    }
    let hi = if exact { f - 1u32 } else { f };
    let as_u64 = |n: &BigUint| {
        u64::try_from(n).map_err(|_| Error::input(format!("window at q = {q} extends past 2^64 steps")))
    };
    Ok(Some((as_u64(&lo)?, as_u64(&hi)?)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitialScale {
    #[serde(with = "crate::bigutil::dec")]
    pub qtilde: BigUint,
    pub window: (u64, u64),
    pub n0: u64,
    pub l_n0: f64,
    pub l_2n0: f64,
    /// Number of `N` values tested (mesh plus refinement).
    pub evaluated: usize,
}

impl InitialScale {
    pub fn ratio(&self) -> f64 {
        self.l_2n0 / self.l_n0
    }
}

fn mesh(lo: u64, hi: u64) -> Vec<u64> {
    let mut out = vec![lo];
    let mut n = lo;
    while n < hi {
        n = ((n as f64 * MESH_RATIO).ceil() as u64).max(n + 1).min(hi);
        out.push(n);
    }
    out
}

/// `L_N` and `L_{2N}` for each `N` in `ns`, in one pass.
fn doubled(a: &MatrixFunction, f: &Frequency, ns: &[u64], spec: &QuadratureSpec) -> Result<Vec<(u64, f64, f64)>> {
    let mut all: Vec<u64> = ns.iter().flat_map(|&n| [n, 2 * n]).collect();
    all.sort_unstable();
    all.dedup();
    let les = le_sequence(a, f, &all, spec)?;
    let value = |n: u64| les[all.binary_search(&n).unwrap()].value;
    Ok(ns.iter().map(|&n| (n, value(n), value(2 * n))).collect())
}

fn passes(l: f64, l2: f64) -> bool {
    l2 > DOUBLING_RATIO * l
}

/// Smallest `N_0` in the window of `qtilde_0` with `L_{2N_0} > 0.99 L_{N_0}`:
/// a geometric mesh (ratio 1.1) locates the first passing mesh point, then
/// every integer between it and the last failing mesh point is tested.
pub fn find_initial_scale(
    a: &MatrixFunction,
    f: &Frequency,
    qtilde0: &Convergent,
    bundle: &ParameterBundle,
    spec: &QuadratureSpec,
) -> Result<InitialScale> {
    let (lo, hi) = window_range(bundle, &qtilde0.q)?.ok_or_else(|| {
        Error::Window(format!(
            "no integer N with {} q^{} < N and 2N < {} q^{} at q = {}",
            bundle.c1, bundle.sigma, bundle.c2, bundle.sigma1, qtilde0.q
        ))
    })?;
    let points = mesh(lo, hi);
    let coarse = doubled(a, f, &points, spec)?;
    let (_, l_lo, _) = coarse[0];
    if !(l_lo > 100.0 * bundle.kappa) {
        return Err(Error::Infeasible(format!(
            "L_N > 100 kappa fails at the window edge N = {lo}: L_N = {l_lo}, kappa = {}",
            bundle.kappa
        )));
    }
    let mut evaluated = coarse.len();
    let hit = coarse.iter().position(|&(_, l, l2)| passes(l, l2));
    let Some(i) = hit else {
        let (best_n, l, l2) = coarse
            .iter()
            .copied()
            .max_by(|x, y| (x.2 / x.1).total_cmp(&(y.2 / y.1)))
            .unwrap();
        return Err(Error::Search {
            reason: format!("no N in [{lo}, {hi}] satisfies L_2N > 0.99 L_N"),
            best_n,
            best_ratio: l2 / l,
        });
    };
    let mut found = coarse[i];
    if i > 0 && coarse[i].0 > coarse[i - 1].0 + 1 {
        let between: Vec<u64> = (coarse[i - 1].0 + 1..coarse[i].0).collect();
        let fine = doubled(a, f, &between, spec)?;
        evaluated += fine.len();
        if let Some(&first) = fine.iter().find(|&&(_, l, l2)| passes(l, l2)) {
            found = first;
        }
    }
    Ok(InitialScale {
        qtilde: qtilde0.q.clone(),
        window: (lo, hi),
        n0: found.0,
        l_n0: found.1,
        l_2n0: found.2,
        evaluated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cocycle::finite_scale_le;
    use crate::mat2::Mat2;
    use crate::scheme::params::{select_parameters, SigmaSearch};

    fn bundle(kappa: f64) -> ParameterBundle {
        select_parameters(1.1, 0.1, kappa, &SigmaSearch::default()).unwrap()
    }

    fn golden(q: u64) -> Convergent {
        Frequency::golden().convergents().find(|c| c.q == BigUint::from(q)).unwrap()
    }

    #[test]
    fn window_matches_float_oracle() {
        let b = bundle(0.001);
        for q in [34u64, 89, 233, 610] {
            let (lo, hi) = window_range(&b, &BigUint::from(q)).unwrap().unwrap();
            let qf = q as f64;
            assert_eq!(lo, qf.powf(1.25).floor() as u64 + 1);
            assert_eq!(hi, (qf.powf(1.5) / 2.0).floor() as u64);
        }
    }

    #[test]
    fn exact_upper_edge_is_excluded() {
        // q = 64, sigma_1 = 3/2: C_2 q^sigma_1 / 2 = 256 exactly, so N = 256 is out
        let b = bundle(0.001);
        let (_, hi) = window_range(&b, &BigUint::from(64u32)).unwrap().unwrap();
        assert_eq!(hi, 255);
    }

    #[test]
    fn empty_window_is_reported() {
        let b = select_parameters(1.4, 0.3, 0.001, &SigmaSearch::default()).unwrap();
        assert_eq!(window_range(&b, &BigUint::from(34u32)).unwrap(), None);
        let a = MatrixFunction::constant(Mat2::diag(2.0, 0.5), 1.5, 0.2).unwrap();
        let r = find_initial_scale(&a, &Frequency::golden(), &golden(34), &b, &QuadratureSpec::with_grid(256).unwrap());
        assert!(matches!(r, Err(Error::Window(_))));
    }

    #[test]
    fn constant_cocycle_passes_at_the_left_edge() {
        let a = MatrixFunction::constant(Mat2::diag(2.0, 0.5), 1.5, 0.2).unwrap();
        let b = bundle(0.001);
        let r = find_initial_scale(&a, &Frequency::golden(), &golden(34), &b, &QuadratureSpec::with_grid(256).unwrap())
            .unwrap();
        assert_eq!(r.n0, 83);
        assert!((r.ratio() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rotation_fails_the_precondition() {
        let a = MatrixFunction::rotation(1.5, 0.2).unwrap();
        let b = bundle(0.001);
        let r = find_initial_scale(&a, &Frequency::golden(), &golden(34), &b, &QuadratureSpec::with_grid(256).unwrap());
        assert!(matches!(r, Err(Error::Infeasible(_))));
    }

    #[test]
    fn almost_mathieu_scale_is_self_consistent_at_double_grid() {
        let a = MatrixFunction::almost_mathieu(3.0, 0.0, 1.5, 0.2).unwrap();
        let f = Frequency::golden();
        let b = bundle(0.001);
        let spec = QuadratureSpec::with_grid(1024).unwrap();
        let r = find_initial_scale(&a, &f, &golden(34), &b, &spec).unwrap();
        assert!(r.n0 >= r.window.0 && r.n0 <= r.window.1);
        let fine = QuadratureSpec::with_grid(2048).unwrap();
        let l = finite_scale_le(&a, &f, r.n0, &fine).unwrap().value;
        let l2 = finite_scale_le(&a, &f, 2 * r.n0, &fine).unwrap().value;
        assert!(l2 > 0.99 * l);
        assert!((l - r.l_n0).abs() < 1e-4 && (l2 - r.l_2n0).abs() < 1e-4);
    }

    #[test]
    fn mesh_covers_the_window() {
        let m = mesh(83, 99);
        assert_eq!(m.first(), Some(&83));
        assert_eq!(m.last(), Some(&99));
        assert!(m.windows(2).all(|w| w[1] > w[0] && (w[1] as f64) <= (w[0] as f64 * 1.1).ceil()));
        assert_eq!(mesh(5, 5), vec![5]);
    }
}
