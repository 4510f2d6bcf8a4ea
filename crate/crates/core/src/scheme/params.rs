//! Selection of the constant set `(delta, sigma, p, gamma, sigma_1, zeta, c')`
//! from the regularity index `s` and the frequency exponent `eta`.

use crate::bigutil::{decimal_rational, rational};
use crate::error::{Error, Result};
use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

/// Geometric search for `sigma`: `sigma_j = 1 + (start - 1) shrink^j`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SigmaSearch {
    pub start: f64,
    pub shrink: f64,
    pub max_iterations: usize,
}

impl Default for SigmaSearch {
    fn default() -> Self {
        SigmaSearch {
            start: 1.5,
            shrink: 0.5,
            max_iterations: 60,
        }
    }
}

pub const DEFAULT_LDT_CONSTANT: f64 = 0.1;
pub const DEFAULT_AP_CONSTANT: f64 = 10.0;

/// The exponents in exact rational form; every invariant is checked here.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExactExponents {
    #[serde(with = "rational")]
    pub s: BigRational,
    #[serde(with = "rational")]
    pub eta: BigRational,
    #[serde(with = "rational")]
    pub delta: BigRational,
    #[serde(with = "rational")]
    pub sigma: BigRational,
    pub p: u64,
    #[serde(with = "rational")]
    pub gamma: BigRational,
    #[serde(with = "rational")]
    pub sigma1: BigRational,
    #[serde(with = "rational")]
    pub zeta: BigRational,
    #[serde(with = "rational")]
    pub c_prime: BigRational,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParameterBundle {
    pub s: f64,
    pub eta: f64,
    pub kappa: f64,
    pub delta: f64,
    pub sigma: f64,
    pub p: u64,
    pub gamma: f64,
    pub sigma1: f64,
    pub zeta: f64,
    pub c_prime: f64,
    /// LDT constant `c` (calibrated or configured).
    pub c: f64,
    pub c1: f64,
    pub c2: f64,
    /// `10 (||A||_{C^0} + 1)` once a cocycle is attached.
    pub c0: Option<f64>,
    pub c_ap: f64,
    /// Perturbation radius in force, when one is configured.
    pub epsilon: Option<f64>,
    #[serde(with = "crate::bigutil::dec")]
    pub q0_min: BigUint,
    /// Number of `sigma` values tried by the search (0 for a direct build).
    pub sigma_iterations: usize,
    exact: ExactExponents,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InvariantCheck {
    pub family: u8,
    pub name: String,
    pub holds: bool,
}

fn q(x: f64, what: &str) -> Result<BigRational> {
    decimal_rational(x).ok_or_else(|| Error::input(format!("{what} must be finite, got {x}")))
}

fn to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

fn half() -> BigRational {
    BigRational::new(BigInt::one(), BigInt::from(2))
}

/// Hypotheses on `(s, eta, kappa)` shared by every constructor.
fn check_hypotheses(s: f64, eta: f64, kappa: f64) -> Result<()> {
    if !(s > 1.0 && s < 2.0) {
        return Err(Error::Infeasible(format!(
            "the regularity index must satisfy 1 < s < 2, got s = {s}"
        )));
    }
    if !(eta > 0.0 && eta < 2.0 - s) || !(s + eta < 2.0) {
        return Err(Error::Infeasible(format!(
            "hypothesis 0 < η < 2 − s violated: s = {s}, η = {eta}, 2 − s = {}",
            2.0 - s
        )));
    }
    if !(kappa > 0.0) || !kappa.is_finite() {
        return Err(Error::input(format!("kappa must be positive, got {kappa}")));
    }
    Ok(())
}

fn exact_hypotheses(s: &BigRational, eta: &BigRational) -> Result<()> {
    let two = BigRational::from_integer(2.into());
    if !(s > &BigRational::one() && s < &two) || !(eta.is_positive() && &(s + eta) < &two) {
        return Err(Error::Infeasible(format!(
            "hypothesis 0 < η < 2 − s violated: s = {s}, η = {eta}"
        )));
    }
    Ok(())
}

/// `p = floor(delta sigma / (sigma - 1)) + 1`.
fn integer_p(delta: &BigRational, sigma: &BigRational) -> Result<u64> {
    let ratio = delta * sigma / (sigma - BigRational::one());
    let p: BigInt = ratio.floor().to_integer() + 1;
    p.to_u64()
        .ok_or_else(|| Error::input(format!("p = {p} does not fit in 64 bits")))
}

impl ExactExponents {
    fn build(s: BigRational, eta: BigRational, delta: BigRational, sigma: BigRational, zeta: Option<BigRational>) -> Result<Self> {
        let one = BigRational::one();
        if sigma <= one {
            return Err(Error::input(format!("sigma must exceed 1, got {sigma}")));
        }
        let p = integer_p(&delta, &sigma)?;
        let pr = BigRational::from_integer(p.into());
        let gamma = &one + &pr * (&one - &sigma);
        let sigma1 = &pr * (&sigma - &one) / &delta;
        let zeta = match zeta {
            Some(z) => z,
            None => (&sigma1 / &sigma + &gamma / &eta) * half(),
        };
        let c_prime = (&zeta * &sigma - &sigma1) * half();
        Ok(ExactExponents {
            s,
            eta,
            delta,
            sigma,
            p,
            gamma,
            sigma1,
            zeta,
            c_prime,
        })
    }

    /// The six invariant families, evaluated exactly.
    pub fn checks(&self) -> Vec<InvariantCheck> {
        let one = BigRational::one();
        let two = BigRational::from_integer(2.into());
        let pr = BigRational::from_integer(self.p.into());
        let e = self;
        let mut out = Vec::new();
        let mut push = |family: u8, name: &str, holds: bool| {
            out.push(InvariantCheck {
                family,
                name: name.to_string(),
                holds,
            })
        };
        push(1, "1 < s < 2", e.s > one && e.s < two);
        push(1, "0 < eta < 2 - s", e.eta.is_positive() && e.eta < &two - &e.s);
        push(1, "s - 1 < delta < 1 - eta", &e.s - &one < e.delta && e.delta < &one - &e.eta);
        push(2, "1 < sigma < 1/delta", e.sigma > one && &e.sigma * &e.delta < one);
        let sm1 = &e.sigma - &one;
        push(
            2,
            "delta sigma/(sigma-1) < p < 1/(sigma-1)",
            sm1.is_positive() && &e.delta * &e.sigma < &pr * &sm1 && &pr * &sm1 < one,
        );
        push(3, "gamma = 1 + p(1 - sigma)", e.gamma == &one + &pr * (&one - &e.sigma));
        push(3, "sigma1 = p(sigma - 1)/delta", &e.sigma1 * &e.delta == &pr * &sm1);
        push(4, "eta sigma1 < gamma sigma", &e.eta * &e.sigma1 < &e.gamma * &e.sigma);
        push(
            5,
            "sigma1/sigma < zeta < gamma/eta",
            &e.sigma1 < &(&e.zeta * &e.sigma) && &e.zeta * &e.eta < e.gamma,
        );
        push(
            6,
            "c' = (zeta sigma - sigma1)/2 > 0",
            e.c_prime == (&e.zeta * &e.sigma - &e.sigma1) * half() && e.c_prime.is_positive(),
        );
        out
    }

    fn first_violation(&self) -> Option<String> {
        self.checks().into_iter().find(|c| !c.holds).map(|c| c.name)
    }
}

impl ParameterBundle {
    fn from_exact(kappa: f64, exact: ExactExponents, iterations: usize) -> Self {
        ParameterBundle {
            s: to_f64(&exact.s),
            eta: to_f64(&exact.eta),
            kappa,
            delta: to_f64(&exact.delta),
            sigma: to_f64(&exact.sigma),
            p: exact.p,
            gamma: to_f64(&exact.gamma),
            sigma1: to_f64(&exact.sigma1),
            zeta: to_f64(&exact.zeta),
            c_prime: to_f64(&exact.c_prime),
            c: DEFAULT_LDT_CONSTANT,
            c1: 1.0,
            c2: 1.0,
            c0: None,
            c_ap: DEFAULT_AP_CONSTANT,
            epsilon: None,
            q0_min: BigUint::one(),
            sigma_iterations: iterations,
            exact,
        }
    }

    /// Direct construction from given `delta` and `sigma` (no search);
    /// `zeta` is the midpoint of its interval. Invariants are not enforced,
    /// see [`ParameterBundle::check_invariants`].
    pub fn derive(s: f64, eta: f64, kappa: f64, delta: f64, sigma: f64) -> Result<Self> {
        check_hypotheses(s, eta, kappa)?;
        let (sr, er) = (q(s, "s")?, q(eta, "eta")?);
        exact_hypotheses(&sr, &er)?;
        let exact = ExactExponents::build(sr, er, q(delta, "delta")?, q(sigma, "sigma")?, None)?;
        Ok(Self::from_exact(kappa, exact, 0))
    }

    pub fn exact(&self) -> &ExactExponents {
        &self.exact
    }

    pub fn check_invariants(&self) -> Vec<InvariantCheck> {
        self.exact.checks()
    }

    pub fn invariants_hold(&self) -> bool {
        self.check_invariants().iter().all(|c| c.holds)
    }

    /// Open interval `(sigma1/sigma, gamma/eta)` admissible for `zeta`.
    pub fn zeta_interval(&self) -> (f64, f64) {
        let e = &self.exact;
        (to_f64(&(&e.sigma1 / &e.sigma)), to_f64(&(&e.gamma / &e.eta)))
    }

    /// Replace `zeta` (must lie strictly inside its interval); `c'` follows.
    pub fn with_zeta(mut self, zeta: f64) -> Result<Self> {
        let e = &self.exact;
        let z = q(zeta, "zeta")?;
        if !(&e.sigma1 < &(&z * &e.sigma) && &z * &e.eta < e.gamma) {
            let (lo, hi) = self.zeta_interval();
            return Err(Error::input(format!(
                "zeta = {zeta} lies outside the admissible interval ({lo}, {hi})"
            )));
        }
        let exact = ExactExponents::build(e.s.clone(), e.eta.clone(), e.delta.clone(), e.sigma.clone(), Some(z))?;
        self.zeta = to_f64(&exact.zeta);
        self.c_prime = to_f64(&exact.c_prime);
        self.exact = exact;
        Ok(self)
    }

    pub fn with_kappa(mut self, kappa: f64) -> Result<Self> {
        if !(kappa > 0.0) || !kappa.is_finite() {
            return Err(Error::input(format!("kappa must be positive, got {kappa}")));
        }
        self.kappa = kappa;
        Ok(self)
    }

    /// Window constants `C_1, C_2` and the LDT constant `c`.
    pub fn with_constants(mut self, c: f64, c1: f64, c2: f64) -> Result<Self> {
        for (name, v) in [("c", c), ("C_1", c1), ("C_2", c2)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::input(format!("{name} must be positive, got {v}")));
            }
        }
        self.c = c;
        self.c1 = c1;
        self.c2 = c2;
        Ok(self)
    }

    /// Record `C_0 = 10 (||A||_{C^0} + 1)`.
    pub fn with_cocycle_norm(mut self, sup_norm: f64) -> Self {
        self.c0 = Some(10.0 * (sup_norm + 1.0));
        self
    }

    pub fn sigma_exact(&self) -> &BigRational {
        &self.exact.sigma
    }

    pub fn sigma1_exact(&self) -> &BigRational {
        &self.exact.sigma1
    }

    pub fn gamma_exact(&self) -> &BigRational {
        &self.exact.gamma
    }

    pub fn zeta_exact(&self) -> &BigRational {
        &self.exact.zeta
    }

    pub fn c1_exact(&self) -> BigRational {
        decimal_rational(self.c1).expect("finite C_1")
    }

    pub fn c2_exact(&self) -> BigRational {
        decimal_rational(self.c2).expect("finite C_2")
    }

    pub fn c_exact(&self) -> BigRational {
        decimal_rational(self.c).expect("finite c")
    }
}

/// Constant selection: `delta` is the midpoint of `(s - 1, 1 - eta)` and
/// `sigma - 1` shrinks geometrically until all six invariant families hold.
pub fn select_parameters(s: f64, eta: f64, kappa: f64, search: &SigmaSearch) -> Result<ParameterBundle> {
    check_hypotheses(s, eta, kappa)?;
    if !(search.start > 1.0) || !(search.shrink > 0.0 && search.shrink < 1.0) {
        return Err(Error::input(format!(
            "sigma search needs start > 1 and 0 < shrink < 1, got start = {}, shrink = {}",
            search.start, search.shrink
        )));
    }
    let (sr, er) = (q(s, "s")?, q(eta, "eta")?);
    exact_hypotheses(&sr, &er)?;
    let one = BigRational::one();
    let delta = ((&sr - &one) + (&one - &er)) * half();
    let shrink = q(search.shrink, "shrink")?;
    let mut gap = q(search.start, "start")? - &one;
    let mut violated = String::from("none tried");
    for it in 0..search.max_iterations {
        let sigma = &one + &gap;
        let exact = ExactExponents::build(sr.clone(), er.clone(), delta.clone(), sigma, None)?;
        match exact.first_violation() {
            None => return Ok(ParameterBundle::from_exact(kappa, exact, it + 1)),
            Some(v) => violated = v,
        }
        gap = gap * &shrink;
        if gap.is_zero() {
            break;
        }
    }
    Err(Error::ParameterSearch {
        iterations: search.max_iterations,
        violated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn r(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn explicit_example_one() {
        let b = ParameterBundle::derive(1.4, 0.3, 0.01, 0.55, 1.05).unwrap();
        assert_eq!(b.p, 12);
        assert_eq!(b.exact().gamma, r(2, 5));
        assert_eq!(b.exact().sigma1, r(12, 11));
        assert!((b.eta * b.sigma1 - 0.3273).abs() < 1e-4);
        assert!((b.gamma * b.sigma - 0.42).abs() < 1e-12);
        let (lo, hi) = b.zeta_interval();
        assert!((lo - 1.039).abs() < 1e-3 && (hi - 1.333).abs() < 1e-3);
        assert!(b.invariants_hold(), "{:?}", b.check_invariants());
    }

    #[test]
    fn explicit_example_two() {
        let b = ParameterBundle::derive(1.1, 0.1, 0.01, 0.5, 1.05).unwrap();
        assert_eq!(b.p, 11);
        assert_eq!(b.exact().gamma, r(9, 20));
        assert_eq!(b.exact().sigma1, r(11, 10));
        assert!((b.gamma * b.sigma - 0.4725).abs() < 1e-12);
        assert!(b.invariants_hold());
    }

    #[test]
    fn infeasible_pair_cites_hypothesis() {
        let err = select_parameters(1.5, 0.6, 0.01, &SigmaSearch::default()).unwrap_err();
        assert!(matches!(err, Error::Infeasible(_)));
        assert!(err.to_string().contains("0 < η < 2 − s"), "{err}");
    }

    #[test]
    fn search_results() {
        let b = select_parameters(1.1, 0.1, 0.01, &SigmaSearch::default()).unwrap();
        assert_eq!((b.sigma, b.p, b.gamma, b.sigma1, b.zeta), (1.25, 3, 0.25, 1.5, 1.85));
        let b = select_parameters(1.4, 0.3, 0.01, &SigmaSearch::default()).unwrap();
        assert_eq!((b.sigma, b.p), (1.125, 5));
        assert_eq!(b.exact().gamma, r(3, 8));
        let b = select_parameters(1.1, 0.5, 0.01, &SigmaSearch::default()).unwrap();
        assert_eq!((b.sigma, b.p, b.gamma, b.sigma1), (1.125, 3, 0.625, 1.25));
    }

    #[test]
    fn narrow_gap_needs_many_halvings() {
        let b = select_parameters(1.9, 0.08, 0.01, &SigmaSearch::default()).unwrap();
        assert!(b.invariants_hold());
        assert!(b.sigma < 1.01);
    }

    #[test]
    fn exhausted_search_reports_last_violation() {
        let search = SigmaSearch {
            max_iterations: 1,
            ..SigmaSearch::default()
        };
        match select_parameters(1.9, 0.08, 0.01, &search).unwrap_err() {
            Error::ParameterSearch { iterations, violated } => {
                assert_eq!(iterations, 1);
                assert!(!violated.is_empty());
            }
            e => panic!("{e}"),
        }
    }

    #[test]
    fn zeta_override_is_validated() {
        let b = select_parameters(1.1, 0.1, 0.01, &SigmaSearch::default()).unwrap();
        let b = b.with_zeta(1.25).unwrap();
        assert_eq!(b.exact().c_prime, r(1, 32));
        assert!(b.invariants_hold());
        assert!(b.clone().with_zeta(1.2).is_err());
        assert!(b.with_zeta(2.5).is_err());
    }

    #[test]
    fn bundle_round_trips_through_json() {
        let b = select_parameters(1.3, 0.2, 0.02, &SigmaSearch::default()).unwrap();
        let text = serde_json::to_string(&b).unwrap();
        let back: ParameterBundle = serde_json::from_str(&text).unwrap();
        assert_eq!(back, b);
        assert!(back.invariants_hold());
    }

    proptest! {
        #[test]
        fn selected_bundles_satisfy_all_invariants(s in 1.01f64..1.99, frac in 0.01f64..0.99) {
            let eta = (2.0 - s) * frac;
            let s = (s * 1000.0).round() / 1000.0;
            let eta = (eta * 1000.0).round() / 1000.0;
            prop_assume!(eta > 0.0 && s + eta < 2.0);
            let b = select_parameters(s, eta, 0.01, &SigmaSearch::default()).unwrap();
            prop_assert!(b.invariants_hold());
            prop_assert!(b.gamma > 0.0 && b.gamma < 1.0 && b.sigma1 > b.sigma);
        }
    }
}
