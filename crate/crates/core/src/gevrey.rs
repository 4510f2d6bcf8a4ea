//! Real trigonometric polynomials on the torus with Gevrey weights, and
//! SL(2,R)-valued matrices of them.

use crate::angle::FixedPointAngle;
use crate::error::{Error, Result};
use crate::mat2::Mat2;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use std::f64::consts::TAU;

/// Grid used to check `det = 1` when a [`MatrixFunction`] is built.
pub const DET_CHECK_GRID: usize = 256;
pub const DET_TOLERANCE: f64 = 1e-10;
pub const DEFAULT_C0_GRID: usize = 4096;

/// Imaginary residue above which conjugate symmetry is deemed broken.
const IMAG_ERROR: f64 = 1e-8;
/// Residue allowed by [`GevreyFunction::evaluate`] before it is dropped.
const IMAG_ASSERT: f64 = 1e-12;

/// Gevrey weight `e^{rho |2 pi k|^{1/s}}`.
pub fn weight(k: i64, s: f64, rho: f64) -> f64 {
    (rho * (TAU * k.unsigned_abs() as f64).powf(1.0 / s)).exp()
}

#[derive(Clone, Debug, PartialEq)]
pub struct GevreyFunction {
    coeffs: BTreeMap<i64, Complex64>,
    s: f64,
    rho: f64,
    /// Bound on `sum_{|k| > K_max}` of the decay envelope discarded at
    /// construction (zero for genuinely finite data).
    truncation_bound: f64,
}

fn check_indices(s: f64, rho: f64) -> Result<()> {
    if !(s > 1.0) || !s.is_finite() {
        return Err(Error::input(format!("Gevrey index s must exceed 1, got {s}")));
    }
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::input(format!("Gevrey radius rho must be positive, got {rho}")));
    }
    Ok(())
}

impl GevreyFunction {
    /// From a full coefficient map; requires `f_{-k} = conj(f_k)` exactly.
    pub fn new(coeffs: BTreeMap<i64, Complex64>, s: f64, rho: f64) -> Result<Self> {
        check_indices(s, rho)?;
        for (&k, &c) in &coeffs {
            if !c.re.is_finite() || !c.im.is_finite() {
                return Err(Error::input(format!("coefficient {k} is not finite")));
            }
            let mirror = coeffs.get(&-k).copied().unwrap_or_default();
            if mirror != c.conj() {
                return Err(Error::input(format!(
                    "coefficients {k} and {} are not conjugate (function would not be real)",
                    -k
                )));
            }
        }
        let coeffs = coeffs.into_iter().filter(|(_, c)| *c != Complex64::default()).collect();
        Ok(GevreyFunction {
            coeffs,
            s,
            rho,
            truncation_bound: 0.0,
        })
    }

    /// From the constant term and the nonnegative-frequency half `k >= 1`;
    /// negative frequencies are filled in by conjugation.
    pub fn from_half(constant: f64, modes: &[(i64, Complex64)], s: f64, rho: f64) -> Result<Self> {
        let mut map = BTreeMap::new();
        map.insert(0, Complex64::new(constant, 0.0));
        for &(k, c) in modes {
            if k <= 0 {
                return Err(Error::input(format!("half-spectrum index must be positive, got {k}")));
            }
            if map.insert(k, c).is_some() {
                return Err(Error::input(format!("duplicate frequency {k}")));
            }
            map.insert(-k, c.conj());
        }
        Self::new(map, s, rho)
    }

    /// `sum_k (a_k cos(2 pi k t) + b_k sin(2 pi k t))` for the given
    /// `(k, a_k, b_k)`, plus a constant.
    pub fn from_trig(constant: f64, terms: &[(i64, f64, f64)], s: f64, rho: f64) -> Result<Self> {
        let modes: Vec<_> = terms
            .iter()
            .map(|&(k, a, b)| (k, Complex64::new(a / 2.0, -b / 2.0)))
            .collect();
        Self::from_half(constant, &modes, s, rho)
    }

    pub fn constant(c: f64, s: f64, rho: f64) -> Result<Self> {
        Self::from_half(c, &[], s, rho)
    }

    pub fn zero(s: f64, rho: f64) -> Result<Self> {
        Self::constant(0.0, s, rho)
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn truncation_bound(&self) -> f64 {
        self.truncation_bound
    }

    pub fn coeff(&self, k: i64) -> Complex64 {
        self.coeffs.get(&k).copied().unwrap_or_default()
    }

    pub fn coeffs(&self) -> impl Iterator<Item = (i64, Complex64)> + '_ {
        self.coeffs.iter().map(|(&k, &c)| (k, c))
    }

    /// Largest `|k|` in the support.
    pub fn max_mode(&self) -> u64 {
        self.coeffs.keys().map(|k| k.unsigned_abs()).max().unwrap_or(0)
    }

    fn same_space(&self, other: &Self) -> Result<()> {
        if self.s != other.s || self.rho != other.rho {
            return Err(Error::input(format!(
                "Gevrey indices differ: (s, rho) = ({}, {}) vs ({}, {})",
                self.s, self.rho, other.s, other.rho
            )));
        }
        Ok(())
    }

    fn combine(&self, other: &Self, sign: f64) -> Result<Self> {
        self.same_space(other)?;
        let mut map = self.coeffs.clone();
        for (&k, &c) in &other.coeffs {
            *map.entry(k).or_default() += c * sign;
        }
        let mut out = Self::new(map, self.s, self.rho)?;
        out.truncation_bound = self.truncation_bound + other.truncation_bound;
        Ok(out)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.combine(other, 1.0)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.combine(other, -1.0)
    }

    pub fn scale(&self, k: f64) -> Self {
        GevreyFunction {
            coeffs: self.coeffs.iter().map(|(&i, &c)| (i, c * k)).collect(),
            s: self.s,
            rho: self.rho,
            truncation_bound: self.truncation_bound * k.abs(),
        }
    }

    /// Same coefficients measured in a different Gevrey space.
    pub fn with_indices(&self, s: f64, rho: f64) -> Result<Self> {
        check_indices(s, rho)?;
        Ok(GevreyFunction {
            s,
            rho,
            ..self.clone()
        })
    }

    /// `sum_k |f_k|` (dominates the sup norm).
    pub fn l1_norm(&self) -> f64 {
        self.coeffs.values().map(|c| c.norm()).sum()
    }

    /// Full complex Fourier sum at `t`, with `e^{2 pi i k t}` taken from the
    /// reduced phase `k t mod 1`.
    fn complex_sum(&self, t: f64) -> Complex64 {
        let mut acc = Complex64::default();
        for (&k, &c) in &self.coeffs {
            acc += c * phase(k, t);
        }
        acc
    }

    /// Real value at `t`; errors if the imaginary residue exceeds `1e-8`.
    pub fn evaluate_f64(&self, t: f64) -> Result<f64> {
        let z = self.complex_sum(t);
        if z.im.abs() > IMAG_ERROR * (1.0 + self.l1_norm()) {
            return Err(Error::Invariant(format!(
                "imaginary residue {} at t = {t}: conjugate symmetry broken",
                z.im
            )));
        }
        Ok(z.re)
    }

    pub fn evaluate(&self, t: &FixedPointAngle) -> Result<f64> {
        let x = t.to_f64();
        let z = self.complex_sum(x);
        let v = self.evaluate_f64(x)?;
        assert!(
            z.im.abs() < IMAG_ASSERT * (1.0 + self.l1_norm()),
            "imaginary residue {} at t = {x}",
            z.im
        );
        Ok(v)
    }
}

#[inline]
fn phase(k: i64, t: f64) -> Complex64 {
    if k == 0 {
        return Complex64::new(1.0, 0.0);
    }
    let x = k as f64 * t;
    let (s, c) = (TAU * (x - x.floor())).sin_cos();
    Complex64::new(c, s)
}

/// `||f||_{s,rho} = sum_k |f_k| e^{rho |2 pi k|^{1/s}}`.
pub fn gevrey_norm(f: &GevreyFunction) -> f64 {
    f.coeffs
        .iter()
        .map(|(&k, c)| c.norm() * weight(k, f.s, f.rho))
        .sum()
}

/// Conjugate-symmetric random data with `|f_k| <= e^{-(rho+margin)|2 pi k|^{1/s}}`.
pub fn random_gevrey(seed: u64, s: f64, rho: f64, margin: f64, k_max: u32) -> Result<GevreyFunction> {
    check_indices(s, rho)?;
    if !(margin > 0.0) || !margin.is_finite() {
        return Err(Error::input(format!("margin must be positive, got {margin}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let decay = rho + margin;
    let envelope = |k: i64| (-decay * (TAU * k.unsigned_abs() as f64).powf(1.0 / s)).exp();
    let c0 = envelope(0) * rng.gen_range(-1.0..1.0);
    let modes: Vec<(i64, Complex64)> = (1..=k_max as i64)
        .map(|k| {
            let r = envelope(k) * rng.gen::<f64>();
            let phi = TAU * rng.gen::<f64>();
            (k, Complex64::from_polar(r, phi))
        })
        .collect();
    let mut f = GevreyFunction::from_half(c0, &modes, s, rho)?;
    let mut tail = 0.0;
    let mut k = k_max as i64 + 1;
    loop {
        let t = 2.0 * envelope(k);
        tail += t;
        if t < 1e-300 || t < tail * 1e-17 || k > k_max as i64 + 1_000_000 {
            break;
        }
        k += 1;
    }
    f.truncation_bound = tail;
    Ok(f)
}

/// An entry as `c_0 + 2 Re sum_{k>0} c_k e^{2 pi i k t}`, the hot-loop form.
#[derive(Clone, Debug, PartialEq)]
struct HalfSpectrum {
    constant: f64,
    modes: Vec<(usize, Complex64)>,
}

impl HalfSpectrum {
    fn of(f: &GevreyFunction) -> Self {
        HalfSpectrum {
            constant: f.coeff(0).re,
            modes: f.coeffs.range(1..).map(|(&k, &c)| (k as usize, c)).collect(),
        }
    }

    #[inline]
    fn eval(&self, table: &[Complex64]) -> f64 {
        let mut acc = 0.0;
        for &(k, c) in &self.modes {
            let z = table[k];
            acc += c.re * z.re - c.im * z.im;
        }
        self.constant + 2.0 * acc
    }
}

/// A map `T -> SL(2,R)` whose entries are Gevrey functions in a common space.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixFunction {
    entries: [GevreyFunction; 4],
    max_mode: u64,
    label: String,
    half: [HalfSpectrum; 4],
}

impl MatrixFunction {
    /// Entries in row-major order; `det = 1` is checked on a uniform grid.
    pub fn new(entries: [GevreyFunction; 4]) -> Result<Self> {
        Self::labelled("coeffs", entries)
    }

    pub fn labelled(label: impl Into<String>, entries: [GevreyFunction; 4]) -> Result<Self> {
        let m = Self::unchecked(label.into(), entries)?;
        for i in 0..DET_CHECK_GRID {
            let t = i as f64 / DET_CHECK_GRID as f64;
            let det = m.eval_f64(t)?.det();
            if (det - 1.0).abs() > DET_TOLERANCE {
                return Err(Error::input(format!(
                    "matrix function is not SL(2,R)-valued: det = {det} at t = {t}"
                )));
            }
        }
        Ok(m)
    }

    fn unchecked(label: String, entries: [GevreyFunction; 4]) -> Result<Self> {
        for e in &entries[1..] {
            entries[0].same_space(e)?;
        }
        let max_mode = entries.iter().map(|e| e.max_mode()).max().unwrap_or(0);
        let half = [0, 1, 2, 3].map(|i| HalfSpectrum::of(&entries[i]));
        Ok(MatrixFunction {
            entries,
            max_mode,
            label,
            half,
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Schrodinger cocycle `[[E - V, -1], [1, 0]]`.
    pub fn schrodinger(potential: &GevreyFunction, energy: f64) -> Result<Self> {
        let (s, rho) = (potential.s, potential.rho);
        let top_left = GevreyFunction::constant(energy, s, rho)?.sub(potential)?;
        Self::labelled(format!("schrodinger(E={energy})"), [
            top_left,
            GevreyFunction::constant(-1.0, s, rho)?,
            GevreyFunction::constant(1.0, s, rho)?,
            GevreyFunction::zero(s, rho)?,
        ])
    }

    /// Almost Mathieu cocycle: Schrodinger with `V = 2 lambda cos(2 pi theta)`.
    pub fn almost_mathieu(lambda: f64, energy: f64, s: f64, rho: f64) -> Result<Self> {
        let v = GevreyFunction::from_trig(0.0, &[(1, 2.0 * lambda, 0.0)], s, rho)?;
        let mut m = Self::schrodinger(&v, energy)?;
        m.label = format!("almost_mathieu(lambda={lambda}, E={energy})");
        Ok(m)
    }

    /// Rotation by the angle `2 pi t`.
    pub fn rotation(s: f64, rho: f64) -> Result<Self> {
        let cos = GevreyFunction::from_trig(0.0, &[(1, 1.0, 0.0)], s, rho)?;
        let sin = GevreyFunction::from_trig(0.0, &[(1, 0.0, 1.0)], s, rho)?;
        Self::labelled("rotation", [cos.clone(), sin.scale(-1.0), sin, cos])
    }

    pub fn constant(m: Mat2, s: f64, rho: f64) -> Result<Self> {
        Self::labelled(format!("constant({}, {}, {}, {})", m.a, m.b, m.c, m.d), [
            GevreyFunction::constant(m.a, s, rho)?,
            GevreyFunction::constant(m.b, s, rho)?,
            GevreyFunction::constant(m.c, s, rho)?,
            GevreyFunction::constant(m.d, s, rho)?,
        ])
    }

    pub fn entries(&self) -> &[GevreyFunction; 4] {
        &self.entries
    }

    pub fn s(&self) -> f64 {
        self.entries[0].s
    }

    pub fn rho(&self) -> f64 {
        self.entries[0].rho
    }

    /// Value at `t`, with the phases `e^{2 pi i k t}` shared across entries.
    pub fn eval_f64(&self, t: f64) -> Result<Mat2> {
        if self.max_mode == 0 {
            return Ok(Mat2::new(
                self.entries[0].coeff(0).re,
                self.entries[1].coeff(0).re,
                self.entries[2].coeff(0).re,
                self.entries[3].coeff(0).re,
            ));
        }
        let mut phases = [Complex64::default(); 16];
        let mut heap = Vec::new();
        let table: &mut [Complex64] = if self.max_mode < 16 {
            &mut phases[..=self.max_mode as usize]
        } else {
            heap.resize(self.max_mode as usize + 1, Complex64::default());
            &mut heap
        };
        for (k, z) in table.iter_mut().enumerate() {
            *z = phase(k as i64, t);
        }
        let mut out = [0.0; 4];
        for (slot, e) in out.iter_mut().zip(&self.entries) {
            let mut acc = Complex64::default();
            for (&k, &c) in &e.coeffs {
                let z = table[k.unsigned_abs() as usize];
                acc += c * if k < 0 { z.conj() } else { z };
            }
            if acc.im.abs() > IMAG_ERROR * (1.0 + e.l1_norm()) {
                return Err(Error::Invariant(format!(
                    "imaginary residue {} at t = {t}: conjugate symmetry broken",
                    acc.im
                )));
            }
            *slot = acc.re;
        }
        Ok(Mat2::new(out[0], out[1], out[2], out[3]))
    }

    /// Value at `t` from the half spectrum (real by construction); the loop
    /// used for transfer products.
    #[inline]
    pub fn eval_fast(&self, t: f64) -> Mat2 {
        let h = &self.half;
        if self.max_mode == 0 {
            return Mat2::new(h[0].constant, h[1].constant, h[2].constant, h[3].constant);
        }
        let mut phases = [Complex64::default(); 16];
        let mut heap = Vec::new();
        let table: &mut [Complex64] = if self.max_mode < 16 {
            &mut phases[..=self.max_mode as usize]
        } else {
            heap.resize(self.max_mode as usize + 1, Complex64::default());
            &mut heap
        };
        // higher harmonics as powers of the first; drift is a few ulps per mode
        let z1 = phase(1, t);
        table[1] = z1;
        for k in 2..table.len() {
            table[k] = table[k - 1] * z1;
        }
        Mat2::new(h[0].eval(table), h[1].eval(table), h[2].eval(table), h[3].eval(table))
    }

    pub fn eval(&self, t: &FixedPointAngle) -> Result<Mat2> {
        self.eval_f64(t.to_f64())
    }

    /// `max_t ||A(t)||` over a uniform grid.
    pub fn c0_norm(&self, grid: usize) -> Result<f64> {
        let mut best = 0.0f64;
        for i in 0..grid {
            best = best.max(self.eval_f64(i as f64 / grid as f64)?.op_norm());
        }
        Ok(best)
    }
}

/// `max_i ||A(i/grid) - B(i/grid)||` over a uniform grid, a lower bound for
/// the sup-norm distance.
pub fn c0_distance(a: &MatrixFunction, b: &MatrixFunction, grid: usize) -> Result<f64> {
    a.entries[0].same_space(&b.entries[0])?;
    if grid < 256 {
        return Err(Error::input(format!("C0 grid must have at least 256 points, got {grid}")));
    }
    let mut best = 0.0f64;
    for i in 0..grid {
        let t = i as f64 / grid as f64;
        best = best.max((a.eval_f64(t)? - b.eval_f64(t)?).op_norm());
    }
    Ok(best)
}

/// Sum of the four entrywise Gevrey norms of `A - B`.
pub fn gevrey_distance(a: &MatrixFunction, b: &MatrixFunction) -> Result<f64> {
    let mut total = 0.0;
    for (x, y) in a.entries.iter().zip(&b.entries) {
        total += gevrey_norm(&x.sub(y)?);
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{prop_assert, proptest};

    fn cos1(s: f64, rho: f64) -> GevreyFunction {
        GevreyFunction::from_trig(0.0, &[(1, 1.0, 0.0)], s, rho).unwrap()
    }

    #[test]
    fn zero_has_zero_norm() {
        assert_eq!(gevrey_norm(&GevreyFunction::zero(1.5, 0.2).unwrap()), 0.0);
    }

    #[test]
    fn cosine_norm() {
        let expected = (0.2 * TAU.powf(2.0 / 3.0)).exp();
        assert!((gevrey_norm(&cos1(1.5, 0.2)) - expected).abs() < 1e-15);
    }

    #[test]
    fn decaying_coefficients_match_direct_sum() {
        let (s, rho) = (1.5, 0.5);
        let mut map = BTreeMap::new();
        for k in -10i64..=10 {
            map.insert(k, Complex64::new((-(TAU * k.abs() as f64).powf(1.0 / s)).exp(), 0.0));
        }
        let f = GevreyFunction::new(map, s, rho).unwrap();
        let mut oracle = 0.0;
        for k in -10i64..=10 {
            let x = (TAU * k.abs() as f64).powf(1.0 / s);
            oracle += (-x).exp() * (rho * x).exp();
        }
        assert!((gevrey_norm(&f) - oracle).abs() < 1e-14 * oracle);
    }

    #[test]
    fn cosine_values() {
        let f = cos1(1.5, 0.2);
        assert_eq!(f.evaluate(&FixedPointAngle::zero(192)).unwrap(), 1.0);
        let quarter = FixedPointAngle::dyadic(1, 2, 192).unwrap();
        assert!(f.evaluate(&quarter).unwrap().abs() < 1e-14);
    }

    #[test]
    fn nine_mode_function_matches_trigonometric_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let terms: Vec<(i64, f64, f64)> = (1..=4)
            .map(|k| (k, rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let c = 0.37;
        let f = GevreyFunction::from_trig(c, &terms, 1.5, 0.2).unwrap();
        for i in 0..100 {
            let t = i as f64 / 100.0;
            let oracle: f64 = c + terms
                .iter()
                .map(|&(k, a, b)| a * (TAU * k as f64 * t).cos() + b * (TAU * k as f64 * t).sin())
                .sum::<f64>();
            let v = f.evaluate(&FixedPointAngle::from_f64(t, 192).unwrap()).unwrap();
            assert!((v - oracle).abs() < 1e-12, "t = {t}");
        }
    }

    #[test]
    fn asymmetric_coefficients_are_rejected() {
        let mut map = BTreeMap::new();
        map.insert(1, Complex64::new(1.0, 0.5));
        map.insert(-1, Complex64::new(1.0, 0.5));
        assert!(GevreyFunction::new(map, 1.5, 0.2).is_err());
    }

    #[test]
    fn c0_distance_of_identical_maps_is_zero() {
        let v = cos1(1.5, 0.2).scale(6.0);
        let a = MatrixFunction::schrodinger(&v, 0.0).unwrap();
        assert_eq!(c0_distance(&a, &a, 256).unwrap(), 0.0);
    }

    #[test]
    fn c0_distance_of_constant_shift() {
        let v = cos1(1.5, 0.2);
        let a = MatrixFunction::schrodinger(&v, 0.0).unwrap();
        let eps = 1e-3;
        let mut e = a.entries().clone();
        e[0] = e[0].add(&GevreyFunction::constant(eps, 1.5, 0.2).unwrap()).unwrap();
        // det changes, so compare without the SL(2,R) check
        let b = MatrixFunction::unchecked("shifted".into(), e).unwrap();
        let direct = (a.eval_f64(0.3).unwrap() - b.eval_f64(0.3).unwrap()).op_norm();
        assert!((c0_distance(&a, &b, 256).unwrap() - direct).abs() < 1e-15);
        assert!((direct - eps).abs() < 1e-15);
    }

    #[test]
    fn schrodinger_energies_differ_by_energy_gap() {
        let v = random_gevrey(3, 1.5, 0.2, 0.1, 4).unwrap();
        let a = MatrixFunction::schrodinger(&v, 0.25).unwrap();
        let b = MatrixFunction::schrodinger(&v, 0.75).unwrap();
        let d = c0_distance(&a, &b, 4096).unwrap();
        assert!((d - 0.5).abs() < 1e-14, "{d}");
    }

    #[test]
    fn gevrey_distance_of_cosine_perturbation() {
        let v = random_gevrey(5, 1.5, 0.2, 0.1, 3).unwrap();
        let a = MatrixFunction::schrodinger(&v, 1.0).unwrap();
        let c = 0.3;
        let b = MatrixFunction::schrodinger(&v.add(&cos1(1.5, 0.2).scale(c)).unwrap(), 1.0).unwrap();
        let expected = c * (0.2 * TAU.powf(1.0 / 1.5)).exp();
        assert_eq!(gevrey_distance(&a, &a).unwrap(), 0.0);
        assert!((gevrey_distance(&a, &b).unwrap() - expected).abs() < 1e-14);
    }

    #[test]
    fn gevrey_distance_matches_coefficient_oracle() {
        let (s, rho) = (1.5, 0.2);
        let f = |seed: u64| {
            let g = [0u64, 1, 2, 3].map(|i| random_gevrey(seed * 4 + i, s, rho, 0.1, 5).unwrap());
            MatrixFunction::unchecked("random".into(), g).unwrap()
        };
        let (a, b) = (f(1), f(2));
        let mut oracle = 0.0;
        for i in 0..4 {
            for k in -5i64..=5 {
                oracle += (a.entries[i].coeff(k) - b.entries[i].coeff(k)).norm() * weight(k, s, rho);
            }
        }
        assert!((gevrey_distance(&a, &b).unwrap() - oracle).abs() < 1e-13 * oracle);
    }

    #[test]
    fn mismatched_spaces_are_rejected() {
        let a = MatrixFunction::rotation(1.5, 0.2).unwrap();
        let b = MatrixFunction::rotation(1.5, 0.3).unwrap();
        assert!(matches!(gevrey_distance(&a, &b), Err(Error::Input(_))));
    }

    #[test]
    fn random_constant_function() {
        let f = random_gevrey(11, 1.5, 0.2, 1.0, 0).unwrap();
        assert_eq!(gevrey_norm(&f), f.coeff(0).norm());
        assert_eq!(f.max_mode(), 0);
    }

    #[test]
    fn random_is_deterministic() {
        assert_eq!(random_gevrey(4, 1.3, 0.4, 0.2, 6).unwrap(), random_gevrey(4, 1.3, 0.4, 0.2, 6).unwrap());
    }

    #[test]
    fn random_seed_sweep_respects_decay() {
        let (s, rho, margin) = (1.5, 0.2, 0.1);
        for seed in 0..100 {
            let f = random_gevrey(seed, s, rho, margin, 8).unwrap();
            for (k, c) in f.coeffs() {
                let env = (-(rho + margin) * (TAU * k.abs() as f64).powf(1.0 / s)).exp();
                assert!(c.norm() <= env * (1.0 + 1e-15), "seed {seed} k {k}");
            }
            let cap: f64 = (-8i64..=8)
                .map(|k| (-margin * (TAU * k.abs() as f64).powf(1.0 / s)).exp())
                .sum();
            assert!(gevrey_norm(&f) <= cap);
        }
    }

    #[test]
    fn fast_and_checked_evaluation_agree() {
        let g = [0u64, 1, 2, 3].map(|i| random_gevrey(i, 1.5, 0.2, 0.1, 20).unwrap());
        let m = MatrixFunction::unchecked("random".into(), g).unwrap();
        for i in 0..50 {
            let t = i as f64 / 50.0 + 0.003;
            let (x, y) = (m.eval_fast(t), m.eval_f64(t).unwrap());
            assert!((x - y).frob2().sqrt() < 1e-14);
        }
    }

    #[test]
    fn rotation_is_sl2() {
        let r = MatrixFunction::rotation(1.5, 0.2).unwrap();
        let m = r.eval_f64(0.125).unwrap();
        assert!((m.a - (TAU / 8.0).cos()).abs() < 1e-15);
        assert!((m.c - (TAU / 8.0).sin()).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn triangle_inequality(a in 0u64..1000, b in 0u64..1000) {
            let f = random_gevrey(a, 1.5, 0.2, 0.1, 6).unwrap();
            let g = random_gevrey(b + 1000, 1.5, 0.2, 0.1, 6).unwrap();
            let lhs = gevrey_norm(&f.add(&g).unwrap());
            prop_assert!(lhs <= (gevrey_norm(&f) + gevrey_norm(&g)) * (1.0 + 1e-14));
        }

        #[test]
        fn norm_is_monotone_in_rho(seed in 0u64..1000, r1 in 0.01f64..1.0, r2 in 0.01f64..1.0) {
            let (lo, hi) = if r1 < r2 { (r1, r2) } else { (r2, r1) };
            let f = random_gevrey(seed, 1.5, lo, 0.1, 6).unwrap();
            let g = f.with_indices(1.5, hi).unwrap();
            prop_assert!(gevrey_norm(&f) <= gevrey_norm(&g));
        }

        #[test]
        fn sup_is_dominated(seed in 0u64..1000) {
            let f = random_gevrey(seed, 1.5, 0.2, 0.1, 6).unwrap();
            let l1 = f.l1_norm();
            prop_assert!(l1 <= gevrey_norm(&f) * (1.0 + 1e-15));
            for i in 0..64 {
                prop_assert!(f.evaluate_f64(i as f64 / 64.0).unwrap().abs() <= l1 * (1.0 + 1e-12));
            }
        }
    }
}
