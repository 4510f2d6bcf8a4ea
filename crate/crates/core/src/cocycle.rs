//! Transfer matrices `A_N(t) = A(t + (N-1) alpha) ... A(t)` with overflow-safe
//! log-norm accumulation, and finite-scale Lyapunov exponents by quadrature.

use crate::angle::{alpha_approximant, required_bits, FixedPointAngle, OrbitWalker, DEFAULT_PRECISION_BITS};
use crate::error::{Error, Result};
use crate::freq::Frequency;
use crate::gevrey::MatrixFunction;
use crate::mat2::Mat2;
use crate::reduce::pairwise_mean;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub const DEFAULT_GRID: usize = 4096;
pub const MIN_GRID: usize = 256;

/// Renormalize once the squared Frobenius norm passes `2^128`.
const RENORM_FROB2: f64 = 3.402823669209385e38;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    /// Number of grid points, a power of two, at least 256.
    pub k: usize,
    pub precision_bits: u32,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            k: DEFAULT_GRID,
            precision_bits: DEFAULT_PRECISION_BITS,
        }
    }
}

impl QuadratureSpec {
    pub fn new(k: usize, precision_bits: u32) -> Result<Self> {
        let q = QuadratureSpec { k, precision_bits };
        q.validate()?;
        Ok(q)
    }

    pub fn with_grid(k: usize) -> Result<Self> {
        Self::new(k, DEFAULT_PRECISION_BITS)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < MIN_GRID || !self.k.is_power_of_two() {
            return Err(Error::input(format!(
                "quadrature grid must be a power of two >= {MIN_GRID}, got {}",
                self.k
            )));
        }
        if self.k.trailing_zeros() > self.precision_bits {
            return Err(Error::input("grid finer than the angle precision"));
        }
        Ok(())
    }

    pub fn grid_point(&self, i: usize) -> FixedPointAngle {
        FixedPointAngle::dyadic(i as u64, self.k.trailing_zeros(), self.precision_bits)
            .expect("grid index below K")
    }
}

/// A product stored as a unit-Frobenius matrix times `e^{log_scale}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogNormProduct {
    pub normalized: Mat2,
    pub log_scale: f64,
}

impl LogNormProduct {
    /// `ln ||product||`.
    pub fn ln_norm(&self) -> f64 {
        self.log_scale + self.normalized.op_norm().ln()
    }
}

/// When to divide out the running Frobenius norm.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Renormalize {
    Threshold,
    EveryStep,
}

/// Running left product `M <- A_j M`.
#[derive(Clone, Copy, Debug)]
pub struct ProductAccumulator {
    m: Mat2,
    log_scale: f64,
    steps: u64,
    policy: Renormalize,
}

impl ProductAccumulator {
    pub fn new(policy: Renormalize) -> Self {
        ProductAccumulator {
            m: Mat2::IDENTITY,
            log_scale: 0.0,
            steps: 0,
            policy,
        }
    }

    #[inline]
    pub fn push(&mut self, factor: Mat2) -> Result<()> {
        self.m = factor * self.m;
        self.steps += 1;
        let f2 = self.m.frob2();
        if !f2.is_finite() || !self.m.is_finite() {
            return Err(Error::Numeric {
                step: self.steps - 1,
                reason: format!("transfer product left the f64 range (factor {factor:?})"),
            });
        }
        if f2 > RENORM_FROB2 || self.policy == Renormalize::EveryStep {
            let f = f2.sqrt();
            self.m = self.m.scale(1.0 / f);
            self.log_scale += f.ln();
        }
        Ok(())
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn snapshot(&self) -> LogNormProduct {
        let f = self.m.frob2().sqrt();
        LogNormProduct {
            normalized: self.m.scale(1.0 / f),
            log_scale: self.log_scale + f.ln(),
        }
    }
}

/// `ln ||A_N(theta)||` for each requested `N` (increasing) in one pass.
fn log_norms_along(
    a: &MatrixFunction,
    walker: &mut OrbitWalker,
    ns: &[u64],
    policy: Renormalize,
) -> Result<Vec<f64>> {
    let mut acc = ProductAccumulator::new(policy);
    let mut out = Vec::with_capacity(ns.len());
    for &n in ns {
        while acc.steps() < n {
            acc.push(a.eval_fast(walker.value()))?;
            walker.advance();
        }
        out.push(acc.snapshot().ln_norm());
    }
    Ok(out)
}

fn check_ns(ns: &[u64]) -> Result<()> {
    if ns.is_empty() {
        return Err(Error::input("at least one N is required"));
    }
    if ns[0] == 0 {
        return Err(Error::input("N must be at least 1"));
    }
    if ns.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::input("N values must be strictly increasing"));
    }
    Ok(())
}

fn product_with(
    a: &MatrixFunction,
    f: &Frequency,
    theta: &FixedPointAngle,
    n: u64,
    precision_bits: u32,
    policy: Renormalize,
) -> Result<LogNormProduct> {
    check_ns(&[n])?;
    let alpha = alpha_approximant(f, precision_bits)?;
    let mut walker = OrbitWalker::new(&alpha, theta, n)?;
    let mut acc = ProductAccumulator::new(policy);
    for _ in 0..n {
        acc.push(a.eval_fast(walker.value()))?;
        walker.advance();
    }
    Ok(acc.snapshot())
}

/// `A_N(theta)`, rightmost factor at `theta`.
pub fn transfer_product(
    a: &MatrixFunction,
    f: &Frequency,
    theta: &FixedPointAngle,
    n: u64,
    spec: &QuadratureSpec,
) -> Result<LogNormProduct> {
    product_with(a, f, theta, n, spec.precision_bits, Renormalize::Threshold)
}

/// Same product, renormalized after every factor.
pub fn transfer_product_every_step(
    a: &MatrixFunction,
    f: &Frequency,
    theta: &FixedPointAngle,
    n: u64,
    spec: &QuadratureSpec,
) -> Result<LogNormProduct> {
    product_with(a, f, theta, n, spec.precision_bits, Renormalize::EveryStep)
}

/// `u_N(theta) = (1/N) ln ||A_N(theta)||`.
pub fn pointwise_exponent(
    a: &MatrixFunction,
    f: &Frequency,
    theta: &FixedPointAngle,
    n: u64,
    spec: &QuadratureSpec,
) -> Result<f64> {
    Ok(transfer_product(a, f, theta, n, spec)?.ln_norm() / n as f64)
}

/// `u_N(i/K)` for every grid point and every `N` in `ns`: row `r` holds the
/// values for `ns[r]`. Grid points run in parallel; each orbit is sequential.
pub fn grid_exponents(
    a: &MatrixFunction,
    f: &Frequency,
    ns: &[u64],
    spec: &QuadratureSpec,
) -> Result<Vec<Vec<f64>>> {
    spec.validate()?;
    check_ns(ns)?;
    let n_max = *ns.last().unwrap();
    if spec.precision_bits < required_bits(n_max) {
        return Err(Error::Precision {
            reason: format!("orbit of length {n_max} at {} bits", spec.precision_bits),
            required_bits: required_bits(n_max) as u64,
        });
    }
    let alpha = alpha_approximant(f, spec.precision_bits)?;
    let columns: Vec<Vec<f64>> = (0..spec.k)
        .into_par_iter()
        .map(|i| {
            let mut w = OrbitWalker::new(&alpha, &spec.grid_point(i), n_max)?;
            log_norms_along(a, &mut w, ns, Renormalize::Threshold)
        })
        .collect::<Result<_>>()?;
    Ok((0..ns.len())
        .map(|r| {
            let n = ns[r] as f64;
            columns.iter().map(|c| c[r] / n).collect()
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiniteScaleLE {
    pub n: u64,
    /// Nats per step.
    pub value: f64,
    pub quadrature: QuadratureSpec,
    pub cocycle: String,
    pub frequency: String,
}

fn to_le(a: &MatrixFunction, f: &Frequency, n: u64, row: &[f64], spec: &QuadratureSpec) -> FiniteScaleLE {
    FiniteScaleLE {
        n,
        value: pairwise_mean(row),
        quadrature: *spec,
        cocycle: a.label().to_string(),
        frequency: f.label.clone(),
    }
}

/// `L_N = (1/K) sum_i u_N(i/K)` with a fixed pairwise reduction tree.
pub fn finite_scale_le(a: &MatrixFunction, f: &Frequency, n: u64, spec: &QuadratureSpec) -> Result<FiniteScaleLE> {
    let rows = grid_exponents(a, f, &[n], spec)?;
    Ok(to_le(a, f, n, &rows[0], spec))
}

/// [`finite_scale_le`] for several increasing `N`, sharing one orbit pass
/// per grid point; values are bit-identical to separate calls.
pub fn le_sequence(a: &MatrixFunction, f: &Frequency, ns: &[u64], spec: &QuadratureSpec) -> Result<Vec<FiniteScaleLE>> {
    let rows = grid_exponents(a, f, ns, spec)?;
    Ok(ns.iter().zip(&rows).map(|(&n, row)| to_le(a, f, n, row, spec)).collect())
}
