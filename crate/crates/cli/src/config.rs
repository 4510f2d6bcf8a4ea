//! TOML experiment configuration. Unknown keys are rejected everywhere.

use crate::error::{CliError, CliResult};
use qpc_core::cocycle::QuadratureSpec;
use qpc_core::freq::{construct_omega_eta, Frequency};
use qpc_core::gevrey::{random_gevrey, GevreyFunction, MatrixFunction};
use qpc_core::mat2::Mat2;
use qpc_core::scheme::{select_parameters, ParameterBundle, SchedulePolicy, SigmaSearch};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobKind {
    Classify,
    Le,
    Ldt,
    Calibrate,
    Schedule,
    Twoscale,
    Extrapolate,
    Probe,
}

impl JobKind {
    pub fn name(self) -> &'static str {
        match self {
            JobKind::Classify => "classify",
            JobKind::Le => "le",
            JobKind::Ldt => "ldt",
            JobKind::Calibrate => "calibrate",
            JobKind::Schedule => "schedule",
            JobKind::Twoscale => "twoscale",
            JobKind::Extrapolate => "extrapolate",
            JobKind::Probe => "probe",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Must agree with the subcommand when given.
    pub job: Option<JobKind>,
    #[serde(default)]
    pub seed: u64,
    pub frequency: FrequencyConfig,
    pub cocycle: Option<CocycleConfig>,
    pub bundle: Option<BundleConfig>,
    #[serde(default)]
    pub quadrature: QuadratureConfig,
    pub classify: Option<ClassifyParams>,
    pub le: Option<LeParams>,
    pub ldt: Option<LdtParams>,
    pub calibrate: Option<CalibrateParams>,
    pub schedule: Option<ScheduleParams>,
    pub twoscale: Option<TwoScaleParams>,
    pub extrapolate: Option<ExtrapolateParams>,
    pub probe: Option<ProbeParams>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrequencyPreset {
    Golden,
    Silver,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OmegaEtaConfig {
    pub eta: f64,
    pub c_alpha: f64,
    pub depth: usize,
}

/// Exactly one of `preset`, `coeffs`, `cycle` (with optional `prefix`) or
/// `omega_eta`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrequencyConfig {
    pub label: Option<String>,
    pub preset: Option<FrequencyPreset>,
    pub coeffs: Option<Vec<u64>>,
    pub prefix: Option<Vec<u64>>,
    pub cycle: Option<Vec<u64>>,
    pub omega_eta: Option<OmegaEtaConfig>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CocycleKind {
    Rotation,
    Constant,
    AlmostMathieu,
    Schrodinger,
    RandomSchrodinger,
}

/// One Fourier term `a cos(2 pi k t) + b sin(2 pi k t)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrigTerm {
    pub mode: i64,
    #[serde(default)]
    pub cos: f64,
    #[serde(default)]
    pub sin: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CocycleConfig {
    pub kind: CocycleKind,
    pub s: f64,
    pub rho: f64,
    /// Energy in the Schrodinger families.
    pub energy: Option<f64>,
    /// Coupling of the almost Mathieu potential `2 lambda cos(2 pi t)`.
    pub lambda: Option<f64>,
    /// Row-major `[a, b, c, d]` for the constant kind.
    pub matrix: Option<[f64; 4]>,
    /// Constant part of a trigonometric potential.
    #[serde(default)]
    pub potential_constant: f64,
    #[serde(default)]
    pub potential: Vec<TrigTerm>,
    /// Random potential: highest mode, decay margin and amplitude scale.
    pub modes: Option<u32>,
    pub margin: Option<f64>,
    pub scale: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BundleConfig {
    pub s: f64,
    pub eta: f64,
    pub kappa: f64,
    pub zeta: Option<f64>,
    /// LDT constant `c` and window constants; all three or none.
    pub c: Option<f64>,
    pub c1: Option<f64>,
    pub c2: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureConfig {
    #[serde(default = "default_grid")]
    pub grid: usize,
    pub precision_bits: Option<u32>,
}

fn default_grid() -> usize {
    QuadratureSpec::default().k
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig {
            grid: default_grid(),
            precision_bits: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifyParams {
    #[serde(default = "default_convergents")]
    pub convergents: usize,
    pub eta: f64,
    pub tau: f64,
}

fn default_convergents() -> usize {
    30
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LeParams {
    pub ns: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LdtParams {
    pub ns: Vec<u64>,
    /// Defaults to the bundle's `kappa`.
    pub kappa: Option<f64>,
    #[serde(default)]
    pub waive_window: bool,
    /// Random-angle cross-check with this many samples (seeded by `seed`).
    pub monte_carlo_samples: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrateParams {
    /// Convergent denominators; `N` is each window's midpoint.
    pub qs: Vec<u64>,
    pub kappa: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleParams {
    pub depth: usize,
    /// Starting denominator; when absent the smallest certified start is used.
    pub qtilde0: Option<u64>,
    /// Starting scale; defaults to the window's left end.
    pub n0: Option<u64>,
    #[serde(default)]
    pub policy: SchedulePolicy,
    #[serde(default = "default_max_index")]
    pub max_index: usize,
}

fn default_max_index() -> usize {
    400
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwoScaleParams {
    pub q: u64,
    /// Defaults to the initial scale found in the window of `q`.
    pub n: Option<u64>,
    pub ms: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtrapolateParams {
    pub qtilde0: Vec<u64>,
    pub depth: usize,
    /// Defaults to the deepest scale within the budget.
    pub deep: Option<usize>,
    pub budget: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeParams {
    pub qtilde0: u64,
    /// Explicit energies, or an even grid from `energy_min` to `energy_max`.
    pub energies: Option<Vec<f64>>,
    pub energy_min: Option<f64>,
    pub energy_max: Option<f64>,
    pub count: Option<usize>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> CliResult<(Self, Vec<u8>)> {
        let bytes = std::fs::read(path).map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
        let text = std::str::from_utf8(&bytes)
            .map_err(|_| CliError::Config(format!("{} is not UTF-8", path.display())))?;
        Ok((Self::from_toml(text)?, bytes))
    }
}

fn positive(name: &str, v: f64) -> CliResult<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::Config(format!("{name} must be positive and finite, got {v}")))
    }
}

fn required<T: Clone>(v: &Option<T>, what: &str) -> CliResult<T> {
    v.clone().ok_or_else(|| CliError::Config(format!("{what} is required")))
}

impl FrequencyConfig {
    pub fn build(&self, seed: u64) -> CliResult<Frequency> {
        let sources = [
            self.preset.is_some(),
            self.coeffs.is_some(),
            self.cycle.is_some(),
            self.omega_eta.is_some(),
        ];
        if sources.iter().filter(|&&b| b).count() != 1 {
            return Err(CliError::Config(
                "frequency needs exactly one of preset, coeffs, cycle or omega_eta".into(),
            ));
        }
        if self.prefix.is_some() && self.cycle.is_none() {
            return Err(CliError::Config("frequency.prefix requires frequency.cycle".into()));
        }
        let mut f = if let Some(p) = self.preset {
            match p {
                FrequencyPreset::Golden => Frequency::golden(),
                FrequencyPreset::Silver => Frequency::silver(),
            }
        } else if let Some(c) = &self.coeffs {
            Frequency::from_coeffs("coeffs", c)?
        } else if let Some(cycle) = &self.cycle {
            let big = |v: &[u64]| v.iter().map(|&x| x.into()).collect();
            Frequency::new("periodic", big(self.prefix.as_deref().unwrap_or(&[])), big(cycle))?
        } else {
            let o = self.omega_eta.as_ref().unwrap();
            construct_omega_eta(o.eta, o.c_alpha, o.depth, seed)?
        };
        if let Some(l) = &self.label {
            f.label = l.clone();
        }
        Ok(f)
    }
}

impl CocycleConfig {
    /// The potential of a Schrodinger-type cocycle.
    pub fn potential(&self, seed: u64) -> CliResult<GevreyFunction> {
        let (s, rho) = (self.s, self.rho);
        Ok(match self.kind {
            CocycleKind::AlmostMathieu => {
                let lambda = required(&self.lambda, "cocycle.lambda")?;
                GevreyFunction::from_trig(0.0, &[(1, 2.0 * lambda, 0.0)], s, rho)?
            }
            CocycleKind::Schrodinger => {
                let terms: Vec<_> = self.potential.iter().map(|t| (t.mode, t.cos, t.sin)).collect();
                GevreyFunction::from_trig(self.potential_constant, &terms, s, rho)?
            }
            CocycleKind::RandomSchrodinger => {
                let margin = positive("cocycle.margin", self.margin.unwrap_or(0.1))?;
                let scale = self.scale.unwrap_or(1.0);
                random_gevrey(seed, s, rho, margin, self.modes.unwrap_or(4))?.scale(scale)
            }
            CocycleKind::Rotation | CocycleKind::Constant => {
                return Err(CliError::Config(format!(
                    "cocycle kind {:?} has no potential; use almost_mathieu, schrodinger or random_schrodinger",
                    self.kind
                )))
            }
        })
    }

    pub fn build(&self, seed: u64) -> CliResult<MatrixFunction> {
        let (s, rho) = (self.s, self.rho);
        match self.kind {
            CocycleKind::Rotation => Ok(MatrixFunction::rotation(s, rho)?),
            CocycleKind::Constant => {
                let [a, b, c, d] = required(&self.matrix, "cocycle.matrix")?;
                Ok(MatrixFunction::constant(Mat2::new(a, b, c, d), s, rho)?)
            }
            CocycleKind::AlmostMathieu => {
                let lambda = required(&self.lambda, "cocycle.lambda")?;
                let energy = required(&self.energy, "cocycle.energy")?;
                Ok(MatrixFunction::almost_mathieu(lambda, energy, s, rho)?)
            }
            _ => {
                let energy = required(&self.energy, "cocycle.energy")?;
                Ok(MatrixFunction::schrodinger(&self.potential(seed)?, energy)?)
            }
        }
    }
}

impl BundleConfig {
    pub fn build(&self) -> CliResult<ParameterBundle> {
        let mut b = select_parameters(self.s, self.eta, self.kappa, &SigmaSearch::default())?;
        if let Some(z) = self.zeta {
            b = b.with_zeta(z)?;
        }
        match (self.c, self.c1, self.c2) {
            (None, None, None) => {}
            (Some(c), Some(c1), Some(c2)) => b = b.with_constants(c, c1, c2)?,
            _ => return Err(CliError::Config("bundle.c, bundle.c1 and bundle.c2 go together".into())),
        }
        Ok(b)
    }
}

impl QuadratureConfig {
    pub fn build(&self, grid_override: Option<usize>) -> CliResult<QuadratureSpec> {
        let k = grid_override.unwrap_or(self.grid);
        Ok(match self.precision_bits {
            Some(p) => QuadratureSpec::new(k, p)?,
            None => QuadratureSpec::with_grid(k)?,
        })
    }
}

impl ProbeParams {
    pub fn energies(&self) -> CliResult<Vec<f64>> {
        match (&self.energies, self.energy_min, self.energy_max, self.count) {
            (Some(e), None, None, None) => Ok(e.clone()),
            (None, Some(lo), Some(hi), Some(n)) => {
                if n < 2 || !(lo < hi) {
                    return Err(CliError::Config(format!(
                        "probe grid needs energy_min < energy_max and count >= 2, got [{lo}, {hi}] with {n}"
                    )));
                }
                let step = (hi - lo) / (n - 1) as f64;
                Ok((0..n).map(|i| if i + 1 == n { hi } else { lo + step * i as f64 }).collect())
            }
            _ => Err(CliError::Config(
                "probe needs either energies or all of energy_min, energy_max and count".into(),
            )),
        }
    }
}

/// Fully validated inputs for one job.
pub struct Resolved {
    pub frequency: Frequency,
    pub cocycle: Option<MatrixFunction>,
    pub bundle: Option<ParameterBundle>,
    pub spec: QuadratureSpec,
}

impl ExperimentConfig {
    /// Validates every field the job reads, before any computation.
    pub fn resolve(&self, job: JobKind, grid_override: Option<usize>) -> CliResult<Resolved> {
        if let Some(j) = self.job {
            if j != job {
                return Err(CliError::Config(format!(
                    "config declares job {} but the subcommand is {}",
                    j.name(),
                    job.name()
                )));
            }
        }
        let present = [
            (JobKind::Classify, self.classify.is_some()),
            (JobKind::Le, self.le.is_some()),
            (JobKind::Ldt, self.ldt.is_some()),
            (JobKind::Calibrate, self.calibrate.is_some()),
            (JobKind::Schedule, self.schedule.is_some()),
            (JobKind::Twoscale, self.twoscale.is_some()),
            (JobKind::Extrapolate, self.extrapolate.is_some()),
            (JobKind::Probe, self.probe.is_some()),
        ];
        if !present.iter().any(|&(k, p)| k == job && p) {
            return Err(CliError::Config(format!("the [{}] table is required for this job", job.name())));
        }
        let spec = self.quadrature.build(grid_override)?;
        let frequency = self.frequency.build(self.seed)?;
        let needs_cocycle = !matches!(job, JobKind::Classify | JobKind::Schedule);
        let needs_bundle = !matches!(job, JobKind::Classify | JobKind::Le);
        let bundle = if needs_bundle {
            Some(required(&self.bundle, "[bundle]")?.build()?)
        } else {
            None
        };
        let cocycle = match (&self.cocycle, needs_cocycle) {
            (Some(c), true) if job == JobKind::Probe => {
                c.potential(self.seed)?;
                None
            }
            (Some(c), true) => Some(c.build(self.seed)?),
            (None, true) => return Err(CliError::Config("[cocycle] is required for this job".into())),
            (_, false) => None,
        };
        self.validate_params(job)?;
        Ok(Resolved {
            frequency,
            cocycle,
            bundle,
            spec,
        })
    }

    fn validate_params(&self, job: JobKind) -> CliResult<()> {
        let nonempty = |what: &str, len: usize| {
            if len == 0 {
                Err(CliError::Config(format!("{what} must not be empty")))
            } else {
                Ok(())
            }
        };
        let no_zero = |what: &str, v: &[u64]| {
            if v.contains(&0) {
                Err(CliError::Config(format!("{what} must be positive")))
            } else {
                Ok(())
            }
        };
        match job {
            JobKind::Classify => {
                let p = self.classify.as_ref().unwrap();
                if p.convergents < 2 {
                    return Err(CliError::Config("classify.convergents must be at least 2".into()));
                }
                positive("classify.eta", p.eta)?;
                positive("classify.tau", p.tau)?;
            }
            JobKind::Le => {
                let p = self.le.as_ref().unwrap();
                nonempty("le.ns", p.ns.len())?;
                no_zero("le.ns", &p.ns)?;
            }
            JobKind::Ldt => {
                let p = self.ldt.as_ref().unwrap();
                nonempty("ldt.ns", p.ns.len())?;
                no_zero("ldt.ns", &p.ns)?;
                if let Some(k) = p.kappa {
                    positive("ldt.kappa", k)?;
                }
                if p.monte_carlo_samples == Some(0) {
                    return Err(CliError::Config("ldt.monte_carlo_samples must be positive".into()));
                }
            }
            JobKind::Calibrate => {
                let p = self.calibrate.as_ref().unwrap();
                if p.qs.len() < 3 {
                    return Err(CliError::Config(format!("calibrate.qs needs at least 3 values, got {}", p.qs.len())));
                }
                if let Some(k) = p.kappa {
                    positive("calibrate.kappa", k)?;
                }
            }
            JobKind::Schedule => {
                let p = self.schedule.as_ref().unwrap();
                if p.n0.is_some() && p.qtilde0.is_none() {
                    return Err(CliError::Config("schedule.n0 requires schedule.qtilde0".into()));
                }
            }
            JobKind::Twoscale => {
                let p = self.twoscale.as_ref().unwrap();
                nonempty("twoscale.ms", p.ms.len())?;
                no_zero("twoscale.ms", &p.ms)?;
            }
            JobKind::Extrapolate => {
                let p = self.extrapolate.as_ref().unwrap();
                nonempty("extrapolate.qtilde0", p.qtilde0.len())?;
                if p.deep.is_some_and(|d| d > p.depth) {
                    return Err(CliError::Config("extrapolate.deep cannot exceed extrapolate.depth".into()));
                }
            }
            JobKind::Probe => {
                self.probe.as_ref().unwrap().energies()?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
        [frequency]
        preset = "golden"
        [le]
        ns = [10, 100]
    "#;

    #[test]
    fn unknown_keys_are_rejected() {
        let err = ExperimentConfig::from_toml(&format!("{BASE}\nbogus = 1")).unwrap_err();
        assert!(err.to_string().contains("bogus"), "{err}");
        let nested = BASE.replace("ns = [10, 100]", "ns = [10]\nstride = 2");
        let err = ExperimentConfig::from_toml(&nested).unwrap_err();
        assert!(err.to_string().contains("stride"), "{err}");
    }

    #[test]
    fn frequency_needs_exactly_one_source() {
        let two = FrequencyConfig {
            preset: Some(FrequencyPreset::Golden),
            coeffs: Some(vec![1, 2]),
            ..Default::default()
        };
        assert!(two.build(0).is_err());
        assert!(FrequencyConfig::default().build(0).is_err());
        let periodic = FrequencyConfig {
            prefix: Some(vec![3]),
            cycle: Some(vec![2]),
            ..Default::default()
        };
        let q: Vec<u64> = periodic.build(0).unwrap().convergents().take(4).map(|c| u64::try_from(&c.q).unwrap()).collect();
        assert_eq!(q, [3, 7, 17, 41]);
    }

    #[test]
    fn job_table_and_subcommand_must_agree() {
        let cfg = ExperimentConfig::from_toml(BASE).unwrap();
        assert!(matches!(cfg.resolve(JobKind::Ldt, None), Err(CliError::Config(_))));
        let declared = ExperimentConfig::from_toml(&format!("job = \"probe\"\n{BASE}")).unwrap();
        let err = declared.resolve(JobKind::Le, None).err().unwrap();
        assert!(err.to_string().contains("declares job probe"), "{err}");
    }

    #[test]
    fn le_needs_a_cocycle_and_a_valid_grid() {
        let cfg = ExperimentConfig::from_toml(BASE).unwrap();
        assert!(cfg.resolve(JobKind::Le, None).is_err());
        let with = format!("{BASE}\n[cocycle]\nkind = \"rotation\"\ns = 1.5\nrho = 0.2");
        let cfg = ExperimentConfig::from_toml(&with).unwrap();
        assert!(cfg.resolve(JobKind::Le, None).is_ok());
        assert!(matches!(cfg.resolve(JobKind::Le, Some(100)), Err(CliError::Core(_))));
    }

    #[test]
    fn energy_grid_has_exact_ends() {
        let p = ProbeParams {
            qtilde0: 34,
            energies: None,
            energy_min: Some(-0.5),
            energy_max: Some(0.5),
            count: Some(101),
        };
        let e = p.energies().unwrap();
        assert_eq!(e.len(), 101);
        assert_eq!((e[0], e[100]), (-0.5, 0.5));
        assert!(e.windows(2).all(|w| w[1] > w[0]));
        let mixed = ProbeParams {
            energies: Some(vec![0.0]),
            ..p
        };
        assert!(mixed.energies().is_err());
    }

    #[test]
    fn partial_window_constants_are_rejected() {
        let b = BundleConfig {
            s: 1.1,
            eta: 0.1,
            kappa: 0.01,
            zeta: None,
            c: Some(0.1),
            c1: None,
            c2: None,
        };
        assert!(matches!(b.build(), Err(CliError::Config(_))));
    }
}
