//! Energy sweep of the extrapolant `2 L_{2N_0} - L_{N_0}` for Schrodinger
//! cocycles, with its empirical modulus of continuity.

use crate::bigutil::{dec, ln_biguint};
use crate::cocycle::{le_sequence, QuadratureSpec};
use crate::error::{Error, Result};
use crate::freq::{Convergent, Frequency};
use crate::gevrey::{GevreyFunction, MatrixFunction, DEFAULT_C0_GRID};
use crate::scheme::initial::{find_initial_scale, InitialScale};
use crate::scheme::params::ParameterBundle;
use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeRow {
    pub energy: f64,
    pub l_n0: f64,
    pub l_2n0: f64,
    pub extrapolant: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModulusRow {
    pub h: f64,
    /// `max |x(E) - x(E')|` over `|E - E'| <= h`.
    pub modulus: f64,
    /// `C(N_0) h + 2 qtilde_0^(-c')`.
    pub jump_bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContinuityProbeResult {
    pub reference_energy: f64,
    pub initial: InitialScale,
    pub n0: u64,
    #[serde(with = "dec")]
    pub qtilde0: BigUint,
    pub rows: Vec<ProbeRow>,
    pub modulus: Vec<ModulusRow>,
    /// `N_0 (1 + max_E ||A_E||_{C^0})`.
    pub c_n0: f64,
    pub max_sup_norm: f64,
    /// `2 qtilde_0^(-c')`.
    pub tail: f64,
    pub grid: usize,
}

/// Relative slack when grouping energy differences under a given `h`.
const H_SLACK: f64 = 1e-9;

/// Modulus table over `h` in the distinct gaps `E_k - E_0`: for each `h`,
/// the largest `|x_j - x_i|` with `E_j - E_i <= h`. Energies must be sorted.
pub fn modulus_table(energies: &[f64], values: &[f64]) -> Vec<(f64, f64)> {
    let mut hs: Vec<f64> = energies.iter().map(|e| e - energies[0]).collect();
    hs.dedup_by(|a, b| (*a - *b).abs() <= H_SLACK * (1.0 + b.abs()));
    hs.into_iter()
        .map(|h| {
            let tol = h + H_SLACK * (1.0 + h.abs());
            let mut m: f64 = 0.0;
            for i in 0..energies.len() {
                for j in i + 1..energies.len() {
                    if energies[j] - energies[i] > tol {
                        break;
                    }
                    m = m.max((values[j] - values[i]).abs());
                }
            }
            (h, m)
        })
        .collect()
}

/// For each energy builds `[[E - V, -1], [1, 0]]` and evaluates `L_{N_0}`,
/// `L_{2N_0}` and `2 L_{2N_0} - L_{N_0}`. `N_0` is found once, at the middle
/// energy of the grid.
pub fn continuity_probe(
    potential: &GevreyFunction,
    f: &Frequency,
    energies: &[f64],
    bundle: &ParameterBundle,
    qtilde0: &Convergent,
    spec: &QuadratureSpec,
) -> Result<ContinuityProbeResult> {
    if energies.len() < 2 {
        return Err(Error::input(format!("the energy grid needs at least 2 points, got {}", energies.len())));
    }
    if let Some(e) = energies.iter().find(|e| !e.is_finite()) {
        return Err(Error::input(format!("energy {e} is not finite")));
    }
    if energies.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::input("the energy grid must be sorted"));
    }
    let reference_energy = energies[energies.len() / 2];
    let reference = MatrixFunction::schrodinger(potential, reference_energy)?;
    let initial = find_initial_scale(&reference, f, qtilde0, bundle, spec)?;
    let n0 = initial.n0;

    let mut rows = Vec::with_capacity(energies.len());
    let mut max_sup_norm: f64 = 0.0;
    for &e in energies {
        let a = MatrixFunction::schrodinger(potential, e)?;
        max_sup_norm = max_sup_norm.max(a.c0_norm(DEFAULT_C0_GRID)?);
        let les = le_sequence(&a, f, &[n0, 2 * n0], spec)?;
        let (l_n0, l_2n0) = (les[0].value, les[1].value);
        rows.push(ProbeRow {
            energy: e,
            l_n0,
            l_2n0,
            extrapolant: 2.0 * l_2n0 - l_n0,
        });
    }

    let c_n0 = n0 as f64 * (1.0 + max_sup_norm);
    let tail = 2.0 * (-bundle.c_prime * ln_biguint(&qtilde0.q)).exp();
    let values: Vec<f64> = rows.iter().map(|r| r.extrapolant).collect();
    let modulus = modulus_table(energies, &values)
        .into_iter()
        .map(|(h, modulus)| ModulusRow {
            h,
            modulus,
            jump_bound: c_n0 * h + tail,
        })
        .collect();
    Ok(ContinuityProbeResult {
        reference_energy,
        initial,
        n0,
        qtilde0: qtilde0.q.clone(),
        rows,
        modulus,
        c_n0,
        max_sup_norm,
        tail,
        grid: spec.k,
    })
}
