//! Frequencies given by their continued-fraction expansion.
//!
//! A [`Frequency`] is an irrational `alpha in (0,1)` described by its partial
//! quotients `a_1, a_2, ...`, stored as an explicit prefix followed by an
//! optional repeating block. Convergents use the convention
//! `q_0 = 1, q_1 = a_1, q_{n+1} = a_{n+1} q_n + q_{n-1}` (and `p_0 = 0,
//! p_1 = 1`), so [`cf_convergents`] with `n` terms returns indices `1..=n`.

use crate::bigutil::{dec, exp_floor_approx, ln_biguint};
use crate::error::{Error, Result};
use crate::interval::{decide, ln_int, Interval};
use num_bigint::BigUint;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

/// Parameters of the near-extremal Omega(eta) generator, kept for provenance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OmegaEtaRule {
    pub eta: f64,
    pub c_alpha: f64,
    pub depth: usize,
    pub seed: u64,
    /// Indices `n` (1-based) whose step `q_{n-1} -> q_n` attains the bound
    /// within a factor of 2.
    pub designated: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Frequency {
    pub label: String,
    #[serde(with = "dec_vec")]
    prefix: Vec<BigUint>,
    /// Repeated forever after the prefix; empty means the expansion is finite.
    #[serde(with = "dec_vec")]
    cycle: Vec<BigUint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<OmegaEtaRule>,
}

mod dec_vec {
    use num_bigint::BigUint;
    use serde::{de::Error as _, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[BigUint], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(|n| n.to_str_radix(10)))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<BigUint>, D::Error> {
        Vec::<String>::deserialize(d)?
            .into_iter()
            .map(|t| {
                BigUint::parse_bytes(t.as_bytes(), 10)
                    .ok_or_else(|| D::Error::custom(format!("invalid coefficient {t:?}")))
            })
            .collect()
    }
}

impl Frequency {
    /// Eventually periodic expansion `prefix, cycle, cycle, ...`.
    pub fn new(label: impl Into<String>, prefix: Vec<BigUint>, cycle: Vec<BigUint>) -> Result<Self> {
        if prefix.iter().chain(cycle.iter()).any(|a| a.is_zero()) {
            return Err(Error::input("partial quotients must all be >= 1"));
        }
        if prefix.is_empty() && cycle.is_empty() {
            return Err(Error::input("a frequency needs at least one partial quotient"));
        }
        Ok(Frequency {
            label: label.into(),
            prefix,
            cycle,
            generator: None,
        })
    }

    /// Finite explicit list (a rational number; convergents stop at the end).
    pub fn from_coeffs(label: impl Into<String>, coeffs: &[u64]) -> Result<Self> {
        Self::new(label, coeffs.iter().map(|&a| BigUint::from(a)).collect(), vec![])
    }

    /// Golden mean `(sqrt 5 - 1)/2 = [0; 1, 1, 1, ...]`.
    pub fn golden() -> Self {
        Self::new("golden", vec![], vec![BigUint::one()]).unwrap()
    }

    /// Silver mean `sqrt 2 - 1 = [0; 2, 2, 2, ...]`.
    pub fn silver() -> Self {
        Self::new("silver", vec![], vec![BigUint::from(2u32)]).unwrap()
    }

    pub fn is_finite(&self) -> bool {
        self.cycle.is_empty()
    }

    /// Number of available coefficients (`None` for an infinite stream).
    pub fn len(&self) -> Option<usize> {
        self.is_finite().then_some(self.prefix.len())
    }

    /// Partial quotient `a_i`, 1-based.
    pub fn coeff(&self, i: usize) -> Option<&BigUint> {
        assert!(i >= 1, "partial quotients are 1-based");
        let j = i - 1;
        if j < self.prefix.len() {
            Some(&self.prefix[j])
        } else if self.cycle.is_empty() {
            None
        } else {
            Some(&self.cycle[(j - self.prefix.len()) % self.cycle.len()])
        }
    }

    pub fn coeffs(&self, n: usize) -> Result<Vec<BigUint>> {
        (1..=n)
            .map(|i| {
                self.coeff(i).cloned().ok_or_else(|| {
                    Error::input(format!(
                        "frequency '{}' has only {} partial quotients, {} requested (short by {})",
                        self.label,
                        self.prefix.len(),
                        n,
                        n - self.prefix.len()
                    ))
                })
            })
            .collect()
    }

    /// Iterator over convergents `n = 1, 2, ...` (stops at the end of a
    /// finite expansion).
    pub fn convergents(&self) -> ConvergentIter<'_> {
        ConvergentIter {
            freq: self,
            n: 0,
            p_prev: BigUint::one(), // p_{-1}
            q_prev: BigUint::zero(),
            p: BigUint::zero(), // p_0
            q: BigUint::one(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Convergent {
    pub n: usize,
    #[serde(with = "dec")]
    pub p: BigUint,
    #[serde(with = "dec")]
    pub q: BigUint,
}

impl Convergent {
    pub fn ratio(&self) -> BigRational {
        BigRational::new(self.p.clone().into(), self.q.clone().into())
    }
}

pub struct ConvergentIter<'a> {
    freq: &'a Frequency,
    n: usize,
    p_prev: BigUint,
    q_prev: BigUint,
    p: BigUint,
    q: BigUint,
}

impl Iterator for ConvergentIter<'_> {
    type Item = Convergent;

    fn next(&mut self) -> Option<Convergent> {
        let a = self.freq.coeff(self.n + 1)?;
        let p_next = a * &self.p + &self.p_prev;
        let q_next = a * &self.q + &self.q_prev;
        self.p_prev = std::mem::replace(&mut self.p, p_next);
        self.q_prev = std::mem::replace(&mut self.q, q_next);
        self.n += 1;
        Some(Convergent {
            n: self.n,
            p: self.p.clone(),
            q: self.q.clone(),
        })
    }
}

/// The first `n` convergents `p_k/q_k`, `k = 1..=n`.
pub fn cf_convergents(f: &Frequency, n: usize) -> Result<Vec<Convergent>> {
    if n == 0 {
        return Err(Error::input("at least one convergent must be requested"));
    }
    let out: Vec<_> = f.convergents().take(n).collect();
    if out.len() < n {
        return Err(Error::input(format!(
            "frequency '{}' is exhausted after {} partial quotients; {} convergents requested (short by {})",
            f.label,
            out.len(),
            n,
            n - out.len()
        )));
    }
    Ok(out)
}

/// First convergent with `q >= bound`, if the stream reaches it.
pub fn first_convergent_at_least(f: &Frequency, bound: &BigUint) -> Option<Convergent> {
    f.convergents().find(|c| &c.q >= bound)
}

// ---------------------------------------------------------------------------
// Classification

/// Reference constant under which a class inequality is judged to hold.
pub const DEFAULT_REFERENCE_CONSTANT: f64 = 10.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrequencyClass {
    Bounded,
    Sdc,
    Dc,
    OmegaEta,
    Brjuno,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassEntry {
    pub class: FrequencyClass,
    /// Largest index `n` of a pair `(n, n+1)` that was examined.
    pub n_max: usize,
    /// Largest index through which membership holds (directly with a constant
    /// below the reference constant, or implied by a stronger class);
    /// `None` if it fails at the first examined index.
    pub holds_up_to: Option<usize>,
    pub holds: bool,
    /// Set when `holds_up_to` was raised by implication from a stronger class.
    pub implied: bool,
    /// Minimal constant `C_alpha` over the examined indices (for Brjuno: the
    /// partial sum). May be `inf` when it overflows `f64`; see `ln_witness`.
    #[serde(with = "crate::bigutil::float")]
    pub witness: f64,
    pub ln_witness: f64,
    pub worst_index: usize,
    #[serde(with = "crate::bigutil::float")]
    pub worst_ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrequencyClassReport {
    pub eta: f64,
    pub tau: f64,
    pub reference_constant: f64,
    pub n_max: usize,
    pub bounded: ClassEntry,
    pub sdc: ClassEntry,
    pub dc: ClassEntry,
    pub omega: ClassEntry,
    pub brjuno: ClassEntry,
}

impl FrequencyClassReport {
    pub fn entries(&self) -> [&ClassEntry; 5] {
        [&self.bounded, &self.sdc, &self.dc, &self.omega, &self.brjuno]
    }
}

/// Per-index log ratios and the running maximum, for a max-type class.
fn max_entry(
    class: FrequencyClass,
    n_max: usize,
    reference: f64,
    ln_ratios: impl Iterator<Item = (usize, f64)>,
) -> ClassEntry {
    let ln_ref = reference.ln();
    let mut worst = (0usize, f64::NEG_INFINITY);
    let mut holds_up_to = None;
    let mut broken = false;
    for (idx, lr) in ln_ratios {
        if lr > worst.1 {
            worst = (idx, lr);
        }
        if !broken {
            if lr <= ln_ref {
                holds_up_to = Some(idx);
            } else {
                broken = true;
            }
        }
    }
    let (worst_index, ln_witness) = if worst.1.is_finite() { worst } else { (0, f64::NEG_INFINITY) };
    let witness = ln_witness.exp();
    ClassEntry {
        class,
        n_max,
        holds: holds_up_to == Some(n_max),
        holds_up_to,
        implied: false,
        witness,
        ln_witness,
        worst_index,
        worst_ratio: witness,
    }
}

fn imply(weaker: &mut ClassEntry, stronger: &ClassEntry) {
    if stronger.holds_up_to > weaker.holds_up_to {
        weaker.holds_up_to = stronger.holds_up_to;
        weaker.implied = true;
        weaker.holds = weaker.holds_up_to == Some(weaker.n_max);
    }
}

/// Classify with the default reference constant.
pub fn classify_frequency(convs: &[Convergent], eta: f64, tau: f64) -> Result<FrequencyClassReport> {
    classify_frequency_with(convs, eta, tau, DEFAULT_REFERENCE_CONSTANT)
}

/// Minimal witness constants for the bounded, SDC(tau), DC(tau), Omega(eta)
/// and Brjuno conditions over the consecutive pairs of `convs`.
///
/// A class is judged to hold at index `n` when its ratio stays below
/// `reference`; flags are then closed under the implications
/// bounded => SDC => DC => Omega(eta) => Brjuno. SDC ratios are only formed
/// where `ln q_n >= 1` (the condition is void for `q_n <= 2`).
pub fn classify_frequency_with(
    convs: &[Convergent],
    eta: f64,
    tau: f64,
    reference: f64,
) -> Result<FrequencyClassReport> {
    if convs.len() < 3 {
        return Err(Error::input(format!(
            "classification needs at least 3 convergents, got {}",
            convs.len()
        )));
    }
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::input(format!("eta must lie in (0,1), got {eta}")));
    }
    if !(tau > 1.0) {
        return Err(Error::input(format!("tau must exceed 1, got {tau}")));
    }
    if !(reference > 0.0) {
        return Err(Error::input("reference constant must be positive"));
    }
    let lns: Vec<f64> = convs.iter().map(|c| ln_biguint(&c.q)).collect();
    let pairs = || (0..convs.len() - 1).map(|i| (convs[i].n, lns[i], lns[i + 1]));
    let n_max = convs[convs.len() - 2].n;

    let bounded = max_entry(
        FrequencyClass::Bounded,
        n_max,
        reference,
        pairs().map(|(n, a, b)| (n, b - a)),
    );
    let mut sdc = max_entry(
        FrequencyClass::Sdc,
        n_max,
        reference,
        pairs()
            .filter(|&(_, a, _)| a >= 1.0)
            .map(|(n, a, b)| (n, b - a - tau * a.ln())),
    );
    // Indices where the SDC ratio is void count as holding.
    if let Some(first) = pairs().find(|&(_, a, _)| a >= 1.0).map(|p| p.0) {
        if sdc.holds_up_to.is_none() && first > convs[0].n {
            sdc.holds_up_to = Some(first - 1);
        }
    } else {
        sdc.holds_up_to = Some(n_max);
        sdc.holds = true;
    }
    let mut dc = max_entry(
        FrequencyClass::Dc,
        n_max,
        reference,
        pairs().map(|(n, a, b)| (n, b - tau * a)),
    );
    let mut omega = max_entry(
        FrequencyClass::OmegaEta,
        n_max,
        reference,
        pairs().map(|(n, a, b)| (n, b.ln() - eta * a)),
    );

    // Brjuno: partial sums of ln q_{n+1} / q_n.
    let mut partial = 0.0;
    let mut brjuno_holds = None;
    let mut broken = false;
    let mut worst = (convs[0].n, f64::NEG_INFINITY);
    for (n, a, b) in pairs() {
        let term = (b.ln() - a).exp();
        partial += term;
        if term > worst.1 {
            worst = (n, term);
        }
        if !broken {
            if partial <= reference {
                brjuno_holds = Some(n);
            } else {
                broken = true;
            }
        }
    }
    let mut brjuno = ClassEntry {
        class: FrequencyClass::Brjuno,
        n_max,
        holds_up_to: brjuno_holds,
        holds: brjuno_holds == Some(n_max),
        implied: false,
        witness: partial,
        ln_witness: partial.ln(),
        worst_index: worst.0,
        worst_ratio: worst.1,
    };

    imply(&mut sdc, &bounded);
    imply(&mut dc, &sdc);
    imply(&mut dc, &bounded);
    imply(&mut omega, &dc);
    imply(&mut brjuno, &omega);

    Ok(FrequencyClassReport {
        eta,
        tau,
        reference_constant: reference,
        n_max,
        bounded,
        sdc,
        dc,
        omega,
        brjuno,
    })
}

// ---------------------------------------------------------------------------
// Near-extremal members of Omega(eta)

/// Largest coefficient size the generator will produce.
pub const MAX_GENERATED_BITS: u64 = 1 << 20;

/// `ln q_next <= c * q^eta`, certified with interval arithmetic.
fn certify_omega_step(q: &BigUint, q_next: &BigUint, eta: &BigRational, c: &BigRational) -> Result<bool> {
    decide("Omega(eta) step bound", |p| {
        let lhs = ln_int(q_next, p)?;
        let rhs = ln_int(q, p)?.mul_rational(eta).exp()?.mul_rational(c);
        // lhs <= rhs  <=>  !(rhs < lhs)
        Ok(rhs.lt(&lhs).map(|b| !b))
    })
}

/// Build a frequency in `Omega(eta)` whose growth is near-extremal:
/// `ln q_{n+1} <= C q_n^eta` holds (certified) for every pair inside the
/// first `depth` partial quotients, and each generated step takes the
/// largest admissible coefficient, so the bound is met within a factor of 2
/// on the designated indices. The expansion continues with `1, 1, ...`
/// after `depth`, which keeps the bound for all later indices.
///
/// The first coefficient is the smallest `a` with `C a^eta >= ln(2a)` and
/// `C eta a^eta >= 1` (so every later step admits a coefficient `>= 1`),
/// offset by `seed mod (a/8 + 1)`.
pub fn construct_omega_eta(eta: f64, c_alpha: f64, depth: usize, seed: u64) -> Result<Frequency> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::input(format!("eta must lie in (0,1), got {eta}")));
    }
    if !(c_alpha > 0.0) || !c_alpha.is_finite() {
        return Err(Error::input(format!(
            "C_alpha = {c_alpha} makes a_1 < 1 (C_alpha must be positive)"
        )));
    }
    if depth == 0 {
        return Err(Error::input("depth must be at least 1"));
    }
    let feasible = |a: f64| c_alpha * a.powf(eta) >= (2.0 * a).ln() && c_alpha * eta * a.powf(eta) >= 1.0;
    let mut hi = 1.0f64;
    while !feasible(hi) {
        hi *= 2.0;
        if hi > 2f64.powi(62) {
            return Err(Error::input(format!(
                "C_alpha = {c_alpha}, eta = {eta}: a_1 exceeds 2^62"
            )));
        }
    }
    let mut lo = (hi / 2.0).floor();
    if feasible(lo) {
        lo = 0.0;
    }
    while hi - lo > 1.0 {
        let mid = ((lo + hi) / 2.0).floor();
        if feasible(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let a1_min = hi as u64;
    let a1 = a1_min + seed % (a1_min / 8 + 1);
    if a1 < 1 {
        return Err(Error::input("a_1 < 1"));
    }

    let eta_r = BigRational::from_float(eta).unwrap();
    let c_r = BigRational::from_float(c_alpha).unwrap();
    let mut coeffs = vec![BigUint::from(a1)];
    let mut designated = Vec::new();
    let mut q_prev = BigUint::one();
    let mut q = BigUint::from(a1);
    for n in 2..=depth {
        let y = c_alpha * ln_biguint(&q).mul_add(eta, 0.0).exp();
        if y / std::f64::consts::LN_2 > MAX_GENERATED_BITS as f64 {
            return Err(Error::input(format!(
                "depth {depth} too large: q_{n} would need about {:.3e} bits (limit {MAX_GENERATED_BITS})",
                y / std::f64::consts::LN_2
            )));
        }
        let cap = exp_floor_approx(y);
        if cap < &q + &q_prev {
            return Err(Error::Invariant(format!(
                "no admissible coefficient at index {n}"
            )));
        }
        let mut a = (&cap - &q_prev).div_floor(&q);
        loop {
            let q_next = &a * &q + &q_prev;
            if certify_omega_step(&q, &q_next, &eta_r, &c_r)? {
                break;
            }
            if a.is_one() {
                return Err(Error::Invariant(format!("bound unattainable at index {n}")));
            }
            a -= 1u32;
        }
        let q_next = &a * &q + &q_prev;
        if 2.0 * ln_biguint(&q_next) >= y {
            designated.push(n);
        }
        coeffs.push(a);
        q_prev = std::mem::replace(&mut q, q_next);
    }
    let mut f = Frequency::new(
        format!("omega_eta(eta={eta},C={c_alpha},depth={depth},seed={seed})"),
        coeffs,
        vec![BigUint::one()],
    )?;
    f.generator = Some(OmegaEtaRule {
        eta,
        c_alpha,
        depth,
        seed,
        designated,
    });
    Ok(f)
}

/// `|alpha - p_n/q_n| < 1/(q_n q_{n+1})` checked exactly against a deeper
/// convergent standing in for alpha.
pub fn approximation_holds(c: &Convergent, next: &Convergent, deep: &Convergent) -> bool {
    let diff = (c.ratio() - deep.ratio()).abs();
    let bound = BigRational::new(1.into(), (&c.q * &next.q).into());
    diff < bound
}

/// Interval enclosure of `ln q` (exposed for reports).
pub fn ln_q_interval(q: &BigUint, prec: u32) -> Result<Interval> {
    ln_int(q, prec)
}

use num_traits::Signed as _;

#[cfg(test)]
mod tests {
    use super::*;

    fn qs(c: &[Convergent]) -> Vec<u64> {
        c.iter().map(|c| c.q.to_string().parse().unwrap()).collect()
    }

    #[test]
    fn golden_denominators_follow_fibonacci() {
        // q_0 = 1 by convention, then q_1..q_4
        let c = cf_convergents(&Frequency::golden(), 4).unwrap();
        let mut all = vec![1];
        all.extend(qs(&c));
        assert_eq!(all, vec![1, 1, 2, 3, 5]);
        assert_eq!((c[3].p.clone(), c[3].q.clone()), (3u32.into(), 5u32.into()));
    }

    #[test]
    fn silver_convergents_by_hand() {
        let c = cf_convergents(&Frequency::silver(), 3).unwrap();
        let pq: Vec<(u64, u64)> = c
            .iter()
            .map(|c| (c.p.to_string().parse().unwrap(), c.q.to_string().parse().unwrap()))
            .collect();
        assert_eq!(pq, vec![(1, 2), (2, 5), (5, 12)]);
    }

    #[test]
    fn single_coefficient_gives_one_seventh() {
        let f = Frequency::from_coeffs("seven", &[7]).unwrap();
        let c = cf_convergents(&f, 1).unwrap();
        assert_eq!((c[0].p.clone(), c[0].q.clone()), (1u32.into(), 7u32.into()));
    }

    #[test]
    fn exhausted_stream_names_shortfall() {
        let f = Frequency::from_coeffs("short", &[3, 4]).unwrap();
        let err = cf_convergents(&f, 5).unwrap_err().to_string();
        assert!(err.contains("short by 3"), "{err}");
    }

    #[test]
    fn zero_coefficients_are_rejected() {
        assert!(Frequency::from_coeffs("bad", &[1, 0, 2]).is_err());
    }

    #[test]
    fn convergents_are_coprime_and_increasing() {
        let f = Frequency::new("mixed", vec![3u32.into(), 1u32.into()], vec![2u32.into(), 5u32.into()]).unwrap();
        let c = cf_convergents(&f, 40).unwrap();
        for w in c.windows(2) {
            assert!(w[0].q < w[1].q);
        }
        for x in &c {
            assert!(x.p.gcd(&x.q).is_one());
        }
    }

    #[test]
    fn fibonacci_is_bounded_with_witness_two() {
        let c = cf_convergents(&Frequency::golden(), 31).unwrap();
        let r = classify_frequency(&c, 0.5, 2.0).unwrap();
        assert_eq!(r.n_max, 30);
        assert!(r.bounded.holds);
        assert!((r.bounded.witness - 2.0).abs() < 1e-12);
        assert_eq!(r.bounded.worst_index, 1);
        assert!(r.omega.holds);
        assert!(r.dc.holds);
    }

    #[test]
    fn classify_needs_three_convergents() {
        let c = cf_convergents(&Frequency::golden(), 2).unwrap();
        assert!(classify_frequency(&c, 0.5, 2.0).is_err());
    }

    #[test]
    fn omega_generator_meets_bound_with_unit_constant() {
        let f = construct_omega_eta(0.5, 1.0, 5, 0).unwrap();
        let c = cf_convergents(&f, 5).unwrap();
        let r = classify_frequency(&c, 0.5, 2.0).unwrap();
        assert!(r.omega.holds);
        assert!(r.omega.witness <= 1.0, "witness {}", r.omega.witness);
    }

    #[test]
    fn omega_generator_depth_one_is_vacuous() {
        let f = construct_omega_eta(0.5, 1.0, 1, 3).unwrap();
        assert_eq!(f.generator.as_ref().unwrap().designated, Vec::<usize>::new());
        assert!(f.coeff(2).unwrap().is_one());
    }

    #[test]
    fn omega_generator_rejects_bad_parameters() {
        assert!(construct_omega_eta(0.5, 0.0, 3, 0).is_err());
        assert!(construct_omega_eta(1.5, 1.0, 3, 0).is_err());
        assert!(construct_omega_eta(0.5, 1.0, 0, 0).is_err());
    }

    #[test]
    fn approximation_bound_against_deep_convergent() {
        let c = cf_convergents(&Frequency::silver(), 40).unwrap();
        for i in 0..30 {
            assert!(approximation_holds(&c[i], &c[i + 1], &c[39]));
        }
    }
}
