//! The multi-scale schedule `(qtilde_s, N_s, m_s)` and its certificates.

use crate::bigutil::dec;
use crate::error::{Error, Result};
use crate::freq::{Convergent, Frequency};
use crate::interval::{decide, floor_power, ln_int, ln_rational, power_cmp, Interval};
use crate::scheme::params::ParameterBundle;
use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;

/// What to do when a certificate fails.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchedulePolicy {
    /// Stop with a schedule-infeasible error naming the failed inequality.
    #[default]
    Abort,
    /// Keep the false certificate and continue the construction.
    Record,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleEntry {
    pub s_index: usize,
    /// Index `j` of the convergent `q_j` chosen as `qtilde_s`.
    pub convergent_index: usize,
    #[serde(with = "dec")]
    pub qtilde: BigUint,
    #[serde(with = "dec")]
    pub n: BigUint,
    /// `m_s = N_s / N_{s-1}`; absent at `s = 0`.
    #[serde(with = "dec::opt")]
    pub m: Option<BigUint>,
    /// `qtilde_s` is the smallest available `q_j > qtilde_{s-1}^zeta`.
    pub q_selection: bool,
    /// `C_1 qtilde_s^sigma < N_s` and `2 N_s < C_2 qtilde_s^sigma_1`.
    pub window: bool,
    /// `qtilde_{s-1}^(zeta sigma - sigma_1) < m_s` and
    /// `2 m_s < exp((c/10) qtilde_{s-1}^gamma)`.
    pub multiplier: bool,
    pub violated: Vec<String>,
}

impl ScheduleEntry {
    pub fn certified(&self) -> bool {
        self.q_selection && self.window && self.multiplier
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleSchedule {
    pub bundle: ParameterBundle,
    pub frequency: String,
    pub policy: SchedulePolicy,
    pub entries: Vec<ScheduleEntry>,
    pub all_certified: bool,
}

impl ScaleSchedule {
    pub fn depth(&self) -> usize {
        self.entries.len() - 1
    }

    pub fn qtildes(&self) -> Vec<BigUint> {
        self.entries.iter().map(|e| e.qtilde.clone()).collect()
    }

    /// `N_s` as machine integers for `s = 0..=deep`, if they fit.
    pub fn scales_u64(&self, deep: usize) -> Option<Vec<u64>> {
        self.entries
            .get(..=deep)?
            .iter()
            .map(|e| u64::try_from(&e.n).ok())
            .collect()
    }
}

fn rat(n: &BigUint) -> BigRational {
    BigRational::from_integer(BigInt::from(n.clone()))
}

fn ln2_bits(bits: u64, p: u32) -> Result<Interval> {
    Ok(ln_int(&BigUint::from(2u32), p)?.mul_rational(&BigRational::from_integer(bits.into())))
}

/// The first convergent after index `after` whose denominator exceeds
/// `q^zeta`, decided by certified comparison. Denominators below the
/// bit-length bound `2^bits(q_j) <= q^zeta` are skipped without a full test.
pub fn next_qtilde(f: &Frequency, after: usize, q: &BigUint, zeta: &BigRational) -> Result<Convergent> {
    let one = BigRational::one();
    let target = ln_int(q, 128)?.mul_rational(zeta);
    for c in f.convergents().skip(after) {
        if ln2_bits(c.q.bits(), 128)?.lt(&target) == Some(true) {
            continue;
        }
        if power_cmp(&one, q, zeta, &rat(&c.q))? == Ordering::Less {
            return Ok(c);
        }
    }
    Err(Error::input(format!(
        "frequency '{}' has no convergent beyond index {after} with q > {q}^{zeta}",
        f.label
    )))
}

fn window_checks(bundle: &ParameterBundle, q: &BigUint, n: &BigUint, violated: &mut Vec<String>) -> Result<bool> {
    let n_rat = rat(n);
    let lower = power_cmp(&bundle.c1_exact(), q, bundle.sigma_exact(), &n_rat)? == Ordering::Less;
    if !lower {
        violated.push(format!("C_1 q^sigma < N fails: {} * {q}^{} >= {n}", bundle.c1, bundle.sigma));
    }
    let two_n = rat(&(n * 2u32));
    let upper = power_cmp(&bundle.c2_exact(), q, bundle.sigma1_exact(), &two_n)? == Ordering::Greater;
    if !upper {
        violated.push(format!(
            "2N < C_2 q^sigma_1 fails: 2 * {n} >= {} * {q}^{}",
            bundle.c2, bundle.sigma1
        ));
    }
    Ok(lower && upper)
}

/// Certified `x < exp((c/10) q^gamma)`. For `x >= 2` this is compared as
/// `ln ln x < ln(c/10) + gamma ln q`, so no huge exponential is formed.
pub fn below_exp_cap(bundle: &ParameterBundle, q: &BigUint, x: &BigUint) -> Result<bool> {
    if x <= &BigUint::one() {
        return Ok(true);
    }
    let c10 = bundle.c_exact() / BigRational::from_integer(10.into());
    decide(&format!("{x} < exp(c/10 * {q}^gamma)"), |p| {
        let lhs = ln_int(x, p)?.ln()?;
        let rhs = ln_rational(&c10, p)?.add(&ln_int(q, p)?.mul_rational(bundle.gamma_exact()));
        Ok(lhs.lt(&rhs))
    })
}

fn multiplier_checks(bundle: &ParameterBundle, q_prev: &BigUint, m: &BigUint, violated: &mut Vec<String>) -> Result<bool> {
    let e = bundle.exact();
    let expo = &e.zeta * &e.sigma - &e.sigma1;
    let lower = power_cmp(&BigRational::one(), q_prev, &expo, &rat(m))? == Ordering::Less;
    if !lower {
        violated.push(format!("q^(zeta sigma - sigma_1) < m fails: {q_prev}^({expo}) >= {m}"));
    }
    let cap = below_exp_cap(bundle, q_prev, &(m * 2u32))?;
    if !cap {
        violated.push(format!("2m < exp((c/10) q^gamma) fails: m = {m}, q = {q_prev}, c = {}", bundle.c));
    }
    Ok(lower && cap)
}

fn settle(policy: SchedulePolicy, entry: &ScheduleEntry) -> Result<()> {
    if policy == SchedulePolicy::Abort && !entry.certified() {
        return Err(Error::ScheduleInfeasible {
            s_index: entry.s_index,
            violated: entry.violated.join("; "),
        });
    }
    Ok(())
}

/// Runs the induction from `qtilde_0 = q_{start_index}` and `N_0`:
/// `qtilde_{s+1}` is the smallest `q_j > qtilde_s^zeta`,
/// `m_{s+1} = floor((C_1 + C_2) qtilde_{s+1}^sigma / N_s) + 1` and
/// `N_{s+1} = m_{s+1} N_s`. Every comparison is certified.
pub fn build_schedule(
    f: &Frequency,
    bundle: &ParameterBundle,
    start_index: usize,
    depth: usize,
    n0: &BigUint,
    policy: SchedulePolicy,
) -> Result<ScaleSchedule> {
    if start_index == 0 {
        return Err(Error::input("convergent indices start at 1"));
    }
    if n0.is_zero() {
        return Err(Error::input("N_0 must be positive"));
    }
    let first = f.convergents().nth(start_index - 1).ok_or_else(|| {
        Error::input(format!(
            "frequency '{}' has fewer than {start_index} convergents",
            f.label
        ))
    })?;
    let mut violated = Vec::new();
    let window = window_checks(bundle, &first.q, n0, &mut violated)?;
    let entry = ScheduleEntry {
        s_index: 0,
        convergent_index: first.n,
        qtilde: first.q,
        n: n0.clone(),
        m: None,
        q_selection: true,
        window,
        multiplier: true,
        violated,
    };
    settle(policy, &entry)?;
    let mut entries = vec![entry];
    let c1c2 = bundle.c1_exact() + bundle.c2_exact();
    for s in 1..=depth {
        let prev = entries.last().unwrap();
        let next = next_qtilde(f, prev.convergent_index, &prev.qtilde, bundle.zeta_exact())?;
        let m = floor_power(&(&c1c2 / rat(&prev.n)), &next.q, bundle.sigma_exact())? + 1u32;
        let n = &m * &prev.n;
        let mut violated = Vec::new();
        let window = window_checks(bundle, &next.q, &n, &mut violated)?;
        let multiplier = multiplier_checks(bundle, &prev.qtilde, &m, &mut violated)?;
        let entry = ScheduleEntry {
            s_index: s,
            convergent_index: next.n,
            qtilde: next.q,
            n,
            m: Some(m),
            q_selection: true,
            window,
            multiplier,
            violated,
        };
        settle(policy, &entry)?;
        entries.push(entry);
    }
    let all_certified = entries.iter().all(ScheduleEntry::certified);
    Ok(ScaleSchedule {
        bundle: bundle.clone(),
        frequency: f.label.clone(),
        policy,
        entries,
        all_certified,
    })
}

/// Left edge of the window at `q`: `floor(C_1 q^sigma) + 1`.
pub fn window_start(bundle: &ParameterBundle, q: &BigUint) -> Result<BigUint> {
    Ok(floor_power(&bundle.c1_exact(), q, bundle.sigma_exact())? + 1u32)
}

/// Scans convergents `q_1, q_2, ...` (up to `max_index`) and returns the
/// first fully certified schedule of the given depth, with `N_0` at the
/// left edge of its window.
pub fn smallest_certified_start(
    f: &Frequency,
    bundle: &ParameterBundle,
    depth: usize,
    max_index: usize,
) -> Result<ScaleSchedule> {
    let mut last = String::from("no convergent examined");
    for c in f.convergents().take(max_index) {
        let n0 = window_start(bundle, &c.q)?;
        let mut v = Vec::new();
        if !window_checks(bundle, &c.q, &n0, &mut v)? {
            last = format!("q = {}: {}", c.q, v.join("; "));
            continue;
        }
        match build_schedule(f, bundle, c.n, depth, &n0, SchedulePolicy::Record) {
            Ok(sched) if sched.all_certified => return Ok(sched),
            Ok(sched) => {
                let bad = sched.entries.iter().find(|e| !e.certified()).unwrap();
                last = format!("q = {}: s = {}: {}", c.q, bad.s_index, bad.violated.join("; "));
            }
            Err(Error::Input(msg)) => return Err(Error::Input(msg)),
            Err(e) => return Err(e),
        }
    }
    Err(Error::ScheduleInfeasible {
        s_index: 0,
        violated: format!("no start among the first {max_index} convergents certifies; last failure {last}"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::freq::construct_omega_eta;
    use crate::scheme::params::{select_parameters, SigmaSearch};

    fn hand_bundle() -> ParameterBundle {
        select_parameters(1.4, 0.3, 0.01, &SigmaSearch::default())
            .unwrap()
            .with_zeta(1.2)
            .unwrap()
    }

    fn golden_index(q: u64) -> usize {
        Frequency::golden().convergents().find(|c| c.q == BigUint::from(q)).unwrap().n
    }

    #[test]
    fn golden_hand_values_at_zeta_1_2() {
        let b = hand_bundle();
        let f = Frequency::golden();
        let s = build_schedule(&f, &b, golden_index(34), 2, &BigUint::from(60u32), SchedulePolicy::Record).unwrap();
        let q: Vec<u64> = s.qtildes().iter().map(|q| u64::try_from(q).unwrap()).collect();
        assert_eq!(q, vec![34, 89, 233]);
        // independent oracle: smallest Fibonacci number above x^1.2
        let fib: Vec<f64> = f.convergents().take(20).map(|c| c.q.to_string().parse().unwrap()).collect();
        let pick = |x: f64| *fib.iter().find(|&&y| y > x.powf(1.2)).unwrap();
        assert_eq!(pick(34.0), 89.0);
        assert_eq!(pick(89.0), 233.0);
    }

    #[test]
    fn next_qtilde_is_strict() {
        // 16^(5/4) = 32 exactly: a denominator equal to the power is not selected
        let f = Frequency::from_coeffs("powers", &[16, 1, 1, 2]).unwrap();
        let qs: Vec<_> = f.convergents().map(|c| c.q).collect();
        assert_eq!(qs, [16u32, 17, 33, 83].map(BigUint::from));
        let z = BigRational::new(5.into(), 4.into());
        let c = next_qtilde(&f, 1, &BigUint::from(16u32), &z).unwrap();
        assert_eq!(c.q, BigUint::from(33u32));
        let g = Frequency::from_coeffs("short", &[16, 1]).unwrap();
        assert!(matches!(next_qtilde(&g, 1, &BigUint::from(16u32), &z), Err(Error::Input(_))));
    }

    #[test]
    fn depth_zero_has_one_entry() {
        let b = hand_bundle();
        let f = Frequency::golden();
        let q0 = BigUint::from(34u32);
        let n0 = window_start(&b, &q0).unwrap();
        let s = build_schedule(&f, &b, golden_index(34), 0, &n0, SchedulePolicy::Record).unwrap();
        assert_eq!(s.entries.len(), 1);
        assert_eq!(s.entries[0].m, None);
        // the window at 34 is empty for this bundle: C_1 34^sigma > C_2 34^sigma_1 / 2
        assert!(!s.entries[0].window);
        let err = build_schedule(&f, &b, golden_index(34), 0, &n0, SchedulePolicy::Abort).unwrap_err();
        assert!(matches!(err, Error::ScheduleInfeasible { s_index: 0, .. }));
    }

    #[test]
    fn recursion_follows_the_construction() {
        let b = select_parameters(1.1, 0.1, 0.01, &SigmaSearch::default()).unwrap();
        let f = Frequency::golden();
        let s = build_schedule(&f, &b, golden_index(34), 3, &BigUint::from(100u32), SchedulePolicy::Record).unwrap();
        let (c1, c2, sigma) = (b.c1, b.c2, b.sigma);
        for w in s.entries.windows(2) {
            let m = w[1].m.clone().unwrap();
            assert_eq!(&w[1].n, &(&m * &w[0].n));
            let q: f64 = w[1].qtilde.to_string().parse().unwrap();
            let n: f64 = w[0].n.to_string().parse().unwrap();
            let oracle = ((c1 + c2) * q.powf(sigma) / n).floor() + 1.0;
            assert_eq!(m.to_string().parse::<f64>().unwrap(), oracle);
        }
    }

    #[test]
    fn golden_depth_four_certifies() {
        let b = select_parameters(1.1, 0.1, 0.01, &SigmaSearch::default()).unwrap();
        let s = smallest_certified_start(&Frequency::golden(), &b, 4, 400).unwrap();
        assert!(s.all_certified);
        assert_eq!(s.entries.len(), 5);
        // the previous start fails somewhere
        let prev = s.entries[0].convergent_index - 1;
        let q = Frequency::golden().convergents().nth(prev - 1).unwrap().q;
        let n0 = window_start(&b, &q).unwrap();
        let ok = build_schedule(&Frequency::golden(), &b, prev, 4, &n0, SchedulePolicy::Record)
            .map(|s| s.all_certified)
            .unwrap_or(false);
        assert!(!ok);
    }

    #[test]
    fn omega_frequency_depth_four_certifies() {
        let f = construct_omega_eta(0.5, 1.0, 5, 0).unwrap();
        let b = select_parameters(1.1, 0.5, 0.01, &SigmaSearch::default()).unwrap();
        let s = smallest_certified_start(&f, &b, 4, 600).unwrap();
        assert!(s.entries.iter().all(|e| e.q_selection && e.window && e.multiplier));
    }

    #[test]
    fn exp_cap_matches_float_oracle() {
        let b = select_parameters(1.1, 0.1, 0.01, &SigmaSearch::default()).unwrap();
        // c = 0.1, gamma = 1/4: exp(0.01 * q^(1/4))
        for (q, x) in [(1u64 << 40, 2u64), (1 << 40, 3), (10u64.pow(12), 3), (10u64.pow(16), 2)] {
            let cap = (0.01 * (q as f64).powf(0.25)).exp();
            let got = below_exp_cap(&b, &BigUint::from(q), &BigUint::from(x)).unwrap();
            assert_eq!(got, (x as f64) < cap, "q = {q}, x = {x}, cap = {cap}");
        }
        assert!(below_exp_cap(&b, &BigUint::from(2u32), &BigUint::one()).unwrap());
    }

    #[test]
    fn schedule_round_trips_through_json() {
        let b = hand_bundle();
        let s = build_schedule(&Frequency::golden(), &b, golden_index(34), 2, &BigUint::from(60u32), SchedulePolicy::Record)
            .unwrap();
        let j = serde_json::to_string(&s).unwrap();
        assert!(j.contains("\"qtilde\":\"233\""));
        let back: ScaleSchedule = serde_json::from_str(&j).unwrap();
        assert_eq!(back, s);
    }
}
