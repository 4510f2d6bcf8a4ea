//! Extrapolation error `|L + L_{N_0} - 2 L_{2N_0}|` along a schedule, with
//! `L` replaced by the deepest affordable finite scale.

use crate::bigutil::{dec, ln_biguint};
use crate::cocycle::{le_sequence, QuadratureSpec};
use crate::error::{Error, Result};
use crate::freq::Frequency;
use crate::gevrey::{MatrixFunction, DEFAULT_C0_GRID};
use crate::scheme::schedule::ScaleSchedule;
use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

/// Default cost cap: grid points times the longest orbit.
pub const DEFAULT_STEP_BUDGET: u64 = 1 << 30;

pub const LIMIT_PROXY: &str = "L approximated by L_{N_deep}";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleValues {
    pub s: usize,
    pub n: u64,
    pub l_n: f64,
    pub l_2n: f64,
}

/// One row of the per-step table, for `s < deep`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRow {
    pub s: usize,
    #[serde(with = "dec")]
    pub qtilde: BigUint,
    /// `|L_{N_{s+1}} + L_{N_s} - 2 L_{2N_s}|`
    pub lhs_q1: f64,
    /// `C_0 qtilde_s^(sigma_1 - zeta sigma)`
    pub bound_q1: f64,
    /// `|L_{2N_{s+1}} - L_{N_{s+1}}|`
    pub lhs_q2: f64,
    pub bound_q2: f64,
    /// `|L_{N_{s+1}} - L_{N_s}|`
    pub lhs_q3: f64,
    /// `10 C_0 qtilde_{s-1}^(sigma_1 - zeta sigma)`, with `qtilde_{-1} = 1`
    pub bound_q3: f64,
}

impl StepRow {
    pub fn holds(&self) -> [bool; 3] {
        [self.lhs_q1 < self.bound_q1, self.lhs_q2 < self.bound_q2, self.lhs_q3 < self.bound_q3]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtrapolationReport {
    pub deep: usize,
    pub n0: u64,
    pub n_deep: u64,
    /// `|L_{N_deep} + L_{N_0} - 2 L_{2N_0}|`
    pub value: f64,
    pub proxy: String,
    pub scales: Vec<ScaleValues>,
    pub steps: Vec<StepRow>,
    pub c0: f64,
    pub c_prime: f64,
    #[serde(with = "dec")]
    pub qtilde0: BigUint,
    /// `qtilde_0^(-c')`
    pub tail_bound: f64,
    pub schedule_certified: bool,
    pub grid: usize,
}

/// Largest `s` whose scales `N_s, 2 N_s` fit the step budget.
fn largest_feasible(schedule: &ScaleSchedule, k: usize, budget: u64) -> usize {
    let fits = |n: &BigUint| {
        u64::try_from(n)
            .ok()
            .and_then(|n| n.checked_mul(2))
            .and_then(|n| n.checked_mul(k as u64))
            .is_some_and(|cost| cost <= budget)
    };
    schedule.entries.iter().take_while(|e| fits(&e.n)).count().saturating_sub(1)
}

/// Evaluates `|L_{N_deep} + L_{N_0} - 2 L_{2N_0}|` and, for every `s < deep`,
/// the three per-step quantities against their bounds. `C_0` comes from the
/// bundle, or from the sampled sup norm of `A` when the bundle has none.
pub fn extrapolation_error(
    a: &MatrixFunction,
    f: &Frequency,
    schedule: &ScaleSchedule,
    deep: usize,
    spec: &QuadratureSpec,
    budget: u64,
) -> Result<ExtrapolationReport> {
    if deep > schedule.depth() {
        return Err(Error::input(format!(
            "deep index {deep} exceeds the schedule depth {}",
            schedule.depth()
        )));
    }
    let feasible = largest_feasible(schedule, spec.k, budget);
    let over = |s: usize| Error::Budget {
        n_deep: schedule.entries[s].n.to_string(),
        largest_feasible: feasible,
    };
    if feasible < deep {
        return Err(over(deep));
    }
    let ns = schedule.scales_u64(deep).ok_or_else(|| over(deep))?;
    if ns.first().is_some_and(|&n0| n0.saturating_mul(2).saturating_mul(spec.k as u64) > budget) {
        return Err(over(0));
    }
    let mut all: Vec<u64> = ns.iter().flat_map(|&n| [n, 2 * n]).collect();
    all.sort_unstable();
    all.dedup();
    let les = le_sequence(a, f, &all, spec)?;
    let l = |n: u64| les[all.binary_search(&n).unwrap()].value;
    let scales: Vec<ScaleValues> = ns
        .iter()
        .enumerate()
        .map(|(s, &n)| ScaleValues {
            s,
            n,
            l_n: l(n),
            l_2n: l(2 * n),
        })
        .collect();

    let b = &schedule.bundle;
    let c0 = match b.c0 {
        Some(c0) => c0,
        None => 10.0 * (a.c0_norm(DEFAULT_C0_GRID)? + 1.0),
    };
    let expo = b.sigma1 - b.zeta * b.sigma;
    let scaled = |q: &BigUint| c0 * (expo * ln_biguint(q)).exp();
    let steps: Vec<StepRow> = (0..deep)
        .map(|s| {
            let (cur, next) = (&scales[s], &scales[s + 1]);
            let q = &schedule.entries[s].qtilde;
            let bound_q1 = scaled(q);
            let bound_q3 = if s == 0 { 10.0 * c0 } else { 10.0 * scaled(&schedule.entries[s - 1].qtilde) };
            StepRow {
                s,
                qtilde: q.clone(),
                lhs_q1: (next.l_n + cur.l_n - 2.0 * cur.l_2n).abs(),
                bound_q1,
                lhs_q2: (next.l_2n - next.l_n).abs(),
                bound_q2: 2.0 * bound_q1,
                lhs_q3: (next.l_n - cur.l_n).abs(),
                bound_q3,
            }
        })
        .collect();

    let (first, last) = (&scales[0], &scales[deep]);
    let q0 = schedule.entries[0].qtilde.clone();
    Ok(ExtrapolationReport {
        deep,
        n0: first.n,
        n_deep: last.n,
        value: (last.l_n + first.l_n - 2.0 * first.l_2n).abs(),
        proxy: LIMIT_PROXY.to_string(),
        scales,
        steps,
        c0,
        c_prime: b.c_prime,
        tail_bound: (-b.c_prime * ln_biguint(&q0)).exp(),
        qtilde0: q0,
        schedule_certified: schedule.all_certified,
        grid: spec.k,
    })
}

/// Slope of `ln(error)` against `ln(qtilde_0)` by least squares; the
/// observed decay exponent is its negative. Needs two positive errors.
pub fn fitted_decay_exponent(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(q, e)| *q > 0.0 && *e > 0.0)
        .map(|(q, e)| (q.ln(), e.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| -sxy / sxx)
}
