//! Measured large-deviation sets and calibration of the LDT constant `c`.

use crate::angle::FixedPointAngle;
use crate::bigutil::{dec, ln_biguint};
use crate::cocycle::{grid_exponents, pointwise_exponent, QuadratureSpec};
use crate::error::{Error, Result};
use crate::freq::{Convergent, Frequency};
use crate::gevrey::MatrixFunction;
use crate::reduce::{pairwise_mean, pairwise_sum};
use crate::scheme::initial::window_range;
use crate::scheme::schedule::window_start;
use crate::scheme::params::ParameterBundle;
use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Random-angle estimate of the same deviation fraction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonteCarlo {
    pub samples: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloEstimate {
    pub samples: usize,
    pub seed: u64,
    pub fraction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeviationReport {
    pub n: u64,
    /// Denominator whose window contains `N`; absent only for a waived check
    /// with no matching window.
    #[serde(with = "dec::opt")]
    pub q: Option<BigUint>,
    pub kappa: f64,
    pub l_n: f64,
    pub measured_fraction: f64,
    /// `exp(-c q^gamma)` under the bundle's `(c, gamma)`.
    pub bound: Option<f64>,
    pub c: f64,
    pub gamma: f64,
    pub grid: usize,
    pub window_waived: bool,
    /// `q` lies below the configured `q0_min`.
    pub below_q0_min: bool,
    pub monte_carlo: Option<MonteCarloEstimate>,
}

/// Fraction of the values `u` with `|u - l| > kappa`.
pub fn deviation_fraction(u: &[f64], l: f64, kappa: f64) -> f64 {
    let hits = u.iter().filter(|&&x| (x - l).abs() > kappa).count();
    hits as f64 / u.len() as f64
}

fn ldt_bound(bundle: &ParameterBundle, q: &BigUint) -> f64 {
    (-bundle.c * (bundle.gamma * ln_biguint(q)).exp()).exp()
}

/// Nonempty windows of the convergents, in order, until the left edge
/// passes `n` (one window past `n` is included).
fn windows_near(f: &Frequency, bundle: &ParameterBundle, n: u64) -> Result<Vec<(BigUint, u64, u64)>> {
    let mut out = Vec::new();
    for c in f.convergents() {
        let past = window_start(bundle, &c.q)? > BigUint::from(n);
        match window_range(bundle, &c.q) {
            Ok(Some((lo, hi))) => out.push((c.q, lo, hi)),
            Ok(None) => {}
            Err(_) if past => break,
            Err(e) => return Err(e),
        }
        if past {
            break;
        }
    }
    Ok(out)
}

/// The largest convergent denominator whose window contains `n`.
pub fn denominator_in_force(f: &Frequency, bundle: &ParameterBundle, n: u64) -> Result<Option<BigUint>> {
    Ok(windows_near(f, bundle, n)?
        .into_iter()
        .filter(|(_, lo, hi)| *lo <= n && n <= *hi)
        .map(|(q, _, _)| q)
        .last())
}

fn window_error(f: &Frequency, bundle: &ParameterBundle, n: u64) -> Result<Error> {
    let w = windows_near(f, bundle, n)?;
    let below: Vec<_> = w.iter().filter(|x| x.2 < n).rev().take(2).collect();
    let above = w.iter().find(|x| x.1 > n);
    let mut ranges: Vec<String> = below.iter().rev().map(|(q, lo, hi)| format!("q = {q}: [{lo}, {hi}]")).collect();
    if let Some((q, lo, hi)) = above {
        ranges.push(format!("q = {q}: [{lo}, {hi}]"));
    }
    Ok(Error::Window(format!(
        "N = {n} lies in no convergent window of '{}'; nearest admissible ranges: {}",
        f.label,
        if ranges.is_empty() { "none".to_string() } else { ranges.join(", ") }
    )))
}

/// Deviation fraction at a given denominator `q` (no window lookup).
pub fn deviation_at(
    a: &MatrixFunction,
    f: &Frequency,
    n: u64,
    q: Option<&BigUint>,
    kappa: f64,
    bundle: &ParameterBundle,
    spec: &QuadratureSpec,
    monte_carlo: Option<MonteCarlo>,
) -> Result<DeviationReport> {
    if !(kappa > 0.0) || !kappa.is_finite() {
        return Err(Error::input(format!("kappa must be positive, got {kappa}")));
    }
    let rows = grid_exponents(a, f, &[n], spec)?;
    let u = &rows[0];
    let l_n = pairwise_mean(u);
    let measured_fraction = deviation_fraction(u, l_n, kappa);
    let monte_carlo = match monte_carlo {
        Some(mc) => Some(monte_carlo_fraction(a, f, n, l_n, kappa, spec, mc)?),
        None => None,
    };
    Ok(DeviationReport {
        n,
        q: q.cloned(),
        kappa,
        l_n,
        measured_fraction,
        bound: q.map(|q| ldt_bound(bundle, q)),
        c: bundle.c,
        gamma: bundle.gamma,
        grid: spec.k,
        window_waived: false,
        below_q0_min: q.is_some_and(|q| q < &bundle.q0_min),
        monte_carlo,
    })
}

fn monte_carlo_fraction(
    a: &MatrixFunction,
    f: &Frequency,
    n: u64,
    l_n: f64,
    kappa: f64,
    spec: &QuadratureSpec,
    mc: MonteCarlo,
) -> Result<MonteCarloEstimate> {
    if mc.samples == 0 {
        return Err(Error::input("Monte Carlo check needs at least one sample"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(mc.seed);
    let thetas: Vec<f64> = (0..mc.samples).map(|_| rng.gen::<f64>()).collect();
    let u: Vec<f64> = thetas
        .par_iter()
        .map(|&t| pointwise_exponent(a, f, &FixedPointAngle::from_f64(t, spec.precision_bits)?, n, spec))
        .collect::<Result<_>>()?;
    Ok(MonteCarloEstimate {
        samples: mc.samples,
        seed: mc.seed,
        fraction: deviation_fraction(&u, l_n, kappa),
    })
}

/// Measure of `{theta : |u_N(theta) - L_N| > kappa}` as a grid fraction,
/// with `q` the largest convergent whose window contains `N`. With
/// `waive_window` a missing window is recorded instead of rejected.
pub fn deviation_measure(
    a: &MatrixFunction,
    f: &Frequency,
    n: u64,
    kappa: f64,
    spec: &QuadratureSpec,
    bundle: &ParameterBundle,
    waive_window: bool,
    monte_carlo: Option<MonteCarlo>,
) -> Result<DeviationReport> {
    let q = denominator_in_force(f, bundle, n)?;
    if q.is_none() && !waive_window {
        return Err(window_error(f, bundle, n)?);
    }
    let mut r = deviation_at(a, f, n, q.as_ref(), kappa, bundle, spec, monte_carlo)?;
    r.window_waived = waive_window;
    Ok(r)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationPoint {
    #[serde(with = "dec")]
    pub q: BigUint,
    pub n: u64,
    pub fraction: f64,
    pub neg_log_fraction: Option<f64>,
    pub fitted_bound: Option<f64>,
    pub residual: Option<f64>,
}

/// `c q^gamma <= ln K` from a report whose fraction is below grid resolution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FloorConstraint {
    #[serde(with = "dec")]
    pub q: BigUint,
    pub n: u64,
    pub c_max: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LdtCalibration {
    /// Least-squares `c`; absent when every fraction is zero or the fit is
    /// not positive.
    pub c: Option<f64>,
    pub gamma: f64,
    pub degenerate: bool,
    pub points: Vec<CalibrationPoint>,
    pub floors: Vec<FloorConstraint>,
    pub floors_satisfied: bool,
    pub residual_norm: f64,
    #[serde(with = "dec")]
    pub q_min: BigUint,
    #[serde(with = "dec")]
    pub q_max: BigUint,
    pub grid: usize,
}

/// Least squares through the origin for `-ln(fraction) = c q^gamma` on the
/// points with a positive fraction; zero fractions become floor constraints
/// `c <= ln(K) / q^gamma`. Input triples are `(q, N, fraction)`.
pub fn fit_ldt_constant(data: &[(BigUint, u64, f64)], gamma: f64, grid: usize) -> Result<LdtCalibration> {
    if data.is_empty() {
        return Err(Error::input("calibration needs at least one report"));
    }
    if let Some(bad) = data.iter().find(|d| !(0.0..=1.0).contains(&d.2)) {
        return Err(Error::input(format!("fraction {} at q = {} lies outside [0, 1]", bad.2, bad.0)));
    }
    let x = |q: &BigUint| (gamma * ln_biguint(q)).exp();
    let fit: Vec<(f64, f64)> = data.iter().filter(|d| d.2 > 0.0).map(|d| (x(&d.0), -d.2.ln())).collect();
    let sxy = pairwise_sum(&fit.iter().map(|(x, y)| x * y).collect::<Vec<_>>());
    let sxx = pairwise_sum(&fit.iter().map(|(x, _)| x * x).collect::<Vec<_>>());
    let degenerate = fit.is_empty();
    let c = (!degenerate && sxx > 0.0 && sxy > 0.0).then(|| sxy / sxx);
    let points: Vec<CalibrationPoint> = data
        .iter()
        .map(|(q, n, frac)| {
            let y = (*frac > 0.0).then(|| -frac.ln());
            CalibrationPoint {
                q: q.clone(),
                n: *n,
                fraction: *frac,
                neg_log_fraction: y,
                fitted_bound: c.map(|c| (-c * x(q)).exp()),
                residual: match (y, c) {
                    (Some(y), Some(c)) => Some(y - c * x(q)),
                    _ => None,
                },
            }
        })
        .collect();
    let floors: Vec<FloorConstraint> = data
        .iter()
        .filter(|d| d.2 == 0.0)
        .map(|(q, n, _)| FloorConstraint {
            q: q.clone(),
            n: *n,
            c_max: (grid as f64).ln() / x(q),
        })
        .collect();
    let floors_satisfied = c.is_none_or(|c| floors.iter().all(|f| c <= f.c_max));
    let residual_norm = pairwise_sum(&points.iter().filter_map(|p| p.residual).map(|r| r * r).collect::<Vec<_>>()).sqrt();
    Ok(LdtCalibration {
        c,
        gamma,
        degenerate,
        floors_satisfied,
        residual_norm,
        q_min: data.iter().map(|d| d.0.clone()).min().unwrap(),
        q_max: data.iter().map(|d| d.0.clone()).max().unwrap(),
        points,
        floors,
        grid,
    })
}

/// Midpoint of the window at `q`, rounded half up.
pub fn window_midpoint(bundle: &ParameterBundle, q: &BigUint) -> Result<Option<u64>> {
    Ok(window_range(bundle, q)?.map(|(lo, hi)| lo + (hi - lo + 1) / 2))
}

/// Measures the deviation fraction at the window midpoint of every `q` and
/// fits `c` with `gamma` fixed by the bundle.
pub fn calibrate_ldt(
    a: &MatrixFunction,
    f: &Frequency,
    qs: &[Convergent],
    kappa: f64,
    bundle: &ParameterBundle,
    spec: &QuadratureSpec,
) -> Result<(LdtCalibration, Vec<DeviationReport>)> {
    if qs.len() < 3 {
        return Err(Error::input(format!("calibration needs at least 3 denominators, got {}", qs.len())));
    }
    let mut reports = Vec::with_capacity(qs.len());
    for c in qs {
        let n = window_midpoint(bundle, &c.q)?
            .ok_or_else(|| Error::Window(format!("the window at q = {} contains no integer", c.q)))?;
        reports.push(deviation_at(a, f, n, Some(&c.q), kappa, bundle, spec, None)?);
    }
    let data: Vec<_> = reports.iter().map(|r| (r.q.clone().unwrap(), r.n, r.measured_fraction)).collect();
    Ok((fit_ldt_constant(&data, bundle.gamma, spec.k)?, reports))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cocycle::transfer_product;
    use crate::mat2::Mat2;
    use crate::scheme::params::{select_parameters, SigmaSearch};
    use proptest::prelude::{prop_assert, proptest};

    fn bundle() -> ParameterBundle {
        select_parameters(1.1, 0.1, 0.001, &SigmaSearch::default()).unwrap()
    }

    fn golden(q: u64) -> Convergent {
        Frequency::golden().convergents().find(|c| c.q == BigUint::from(q)).unwrap()
    }

    fn amo() -> MatrixFunction {
        MatrixFunction::almost_mathieu(3.0, 0.0, 1.5, 0.2).unwrap()
    }

    #[test]
    fn constant_and_rotation_have_no_deviation() {
        let spec = QuadratureSpec::with_grid(256).unwrap();
        let b = bundle();
        for a in [
            MatrixFunction::constant(Mat2::diag(2.0, 0.5), 1.5, 0.2).unwrap(),
            MatrixFunction::rotation(1.5, 0.2).unwrap(),
        ] {
            let r = deviation_measure(&a, &Frequency::golden(), 90, 0.1, &spec, &b, false, None).unwrap();
            assert_eq!(r.measured_fraction, 0.0);
            assert_eq!(r.q, Some(BigUint::from(34u32)));
            assert!(r.bound.unwrap() > 0.0 && r.bound.unwrap() <= 1.0);
        }
    }

    #[test]
    fn almost_mathieu_fraction_matches_brute_force() {
        let spec = QuadratureSpec::with_grid(8192).unwrap();
        let f = Frequency::golden();
        let r = deviation_measure(&amo(), &f, 144, 0.1, &spec, &bundle(), true, None).unwrap();
        let u: Vec<f64> = (0..spec.k)
            .map(|i| transfer_product(&amo(), &f, &spec.grid_point(i), 144, &spec).unwrap().ln_norm() / 144.0)
            .collect();
        let l = u.iter().sum::<f64>() / u.len() as f64;
        let count = u.iter().filter(|&&x| (x - l).abs() > 0.1).count();
        assert!((r.l_n - l).abs() < 1e-12);
        assert_eq!(r.measured_fraction, count as f64 / spec.k as f64);
    }

    #[test]
    fn missing_window_lists_neighbours() {
        let spec = QuadratureSpec::with_grid(256).unwrap();
        // windows: q = 34 -> [83, 99], q = 55 -> [150, 203]
        let err = deviation_measure(&amo(), &Frequency::golden(), 120, 0.1, &spec, &bundle(), false, None).unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, Error::Window(_)));
        assert!(msg.contains("[83, 99]") && msg.contains("[150, 203]"), "{msg}");
        let r = deviation_measure(&amo(), &Frequency::golden(), 120, 0.1, &spec, &bundle(), true, None).unwrap();
        assert!(r.window_waived && r.q.is_none() && r.bound.is_none());
    }

    #[test]
    fn q_below_threshold_is_flagged() {
        let spec = QuadratureSpec::with_grid(256).unwrap();
        let mut b = bundle();
        b.q0_min = BigUint::from(1000u32);
        let r = deviation_measure(&amo(), &Frequency::golden(), 90, 0.1, &spec, &b, false, None).unwrap();
        assert!(r.below_q0_min);
    }

    #[test]
    fn monte_carlo_agrees_roughly() {
        let spec = QuadratureSpec::with_grid(4096).unwrap();
        let mc = MonteCarlo { samples: 4096, seed: 7 };
        let r = deviation_measure(&amo(), &Frequency::golden(), 90, 0.05, &spec, &bundle(), false, Some(mc)).unwrap();
        let est = r.monte_carlo.unwrap().fraction;
        // binomial standard error at 4096 samples is below 0.008
        assert!((est - r.measured_fraction).abs() < 0.04, "{est} vs {}", r.measured_fraction);
    }

    #[test]
    fn planted_constant_is_recovered() {
        let data: Vec<_> = [34u64, 89, 233, 610]
            .iter()
            .map(|&q| (BigUint::from(q), q, (-2.0 * (q as f64).powf(0.4)).exp()))
            .collect();
        let cal = fit_ldt_constant(&data, 0.4, 4096).unwrap();
        assert!((cal.c.unwrap() - 2.0).abs() < 1e-6);
        assert!(!cal.degenerate && cal.residual_norm < 1e-6);
    }

    #[test]
    fn zero_fractions_become_floors() {
        let data = vec![(BigUint::from(34u32), 90, 0.0), (BigUint::from(89u32), 300, 0.0), (BigUint::from(233u32), 1000, 0.0)];
        let cal = fit_ldt_constant(&data, 0.4, 4096).unwrap();
        assert!(cal.degenerate && cal.c.is_none());
        assert_eq!(cal.floors.len(), 3);
        let want = (4096f64).ln() / 34f64.powf(0.4);
        assert!((cal.floors[0].c_max - want).abs() < 1e-12);
    }

    #[test]
    fn constant_cocycle_calibration_is_degenerate() {
        let a = MatrixFunction::constant(Mat2::diag(2.0, 0.5), 1.5, 0.2).unwrap();
        let qs = [golden(34), golden(89), golden(233)];
        let (cal, reports) = calibrate_ldt(&a, &Frequency::golden(), &qs, 0.1, &bundle(), &QuadratureSpec::with_grid(256).unwrap())
            .unwrap();
        assert!(cal.degenerate);
        assert_eq!(reports.iter().map(|r| r.n).collect::<Vec<_>>(), vec![91, 347, 1345]);
    }

    #[test]
    fn calibration_needs_three_windows() {
        let a = amo();
        let r = calibrate_ldt(&a, &Frequency::golden(), &[golden(34), golden(89)], 0.1, &bundle(), &QuadratureSpec::default());
        assert!(matches!(r, Err(Error::Input(_))));
    }

    proptest! {
        #[test]
        fn fraction_is_monotone_in_kappa(u in proptest::collection::vec(-3.0f64..3.0, 1..64), k1 in 0.001f64..2.0, dk in 0.0f64..2.0) {
            let l = u.iter().sum::<f64>() / u.len() as f64;
            let a = deviation_fraction(&u, l, k1);
            let b = deviation_fraction(&u, l, k1 + dk);
            prop_assert!(b <= a);
            prop_assert!((0.0..=1.0).contains(&a));
        }
    }
}
