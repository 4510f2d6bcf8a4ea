//! Job execution: each job turns resolved inputs into a serializable output
//! plus the CSV tables that go with it.

use crate::config::{ExperimentConfig, JobKind, Resolved};
use crate::error::{CliError, CliResult};
use crate::table::{float, opt_float, Table};
use num_bigint::BigUint;
use qpc_core::cocycle::le_sequence;
use qpc_core::freq::{cf_convergents, classify_frequency, Convergent, Frequency, FrequencyClassReport};
use qpc_core::gevrey::MatrixFunction;
use qpc_core::ldt::{calibrate_ldt, deviation_measure, DeviationReport, LdtCalibration, MonteCarlo};
use qpc_core::scheme::extrapolate::DEFAULT_STEP_BUDGET;
use qpc_core::scheme::*;
use qpc_core::Error as CoreError;
use serde::{Deserialize, Serialize};
use std::time::Instant;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeRow {
    pub n: u64,
    pub l_n: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtrapolationRun {
    pub initial: InitialScale,
    pub schedule: ScaleSchedule,
    pub report: ExtrapolationReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "job", content = "output", rename_all = "snake_case")]
pub enum JobOutput {
    Classify {
        convergents: usize,
        report: FrequencyClassReport,
    },
    Le {
        cocycle: String,
        rows: Vec<LeRow>,
    },
    Ldt {
        cocycle: String,
        reports: Vec<DeviationReport>,
    },
    Calibrate {
        cocycle: String,
        calibration: LdtCalibration,
        reports: Vec<DeviationReport>,
    },
    Schedule {
        schedule: ScaleSchedule,
    },
    Twoscale {
        cocycle: String,
        initial: Option<InitialScale>,
        rows: Vec<TwoScaleEstimate>,
    },
    Extrapolate {
        cocycle: String,
        runs: Vec<ExtrapolationRun>,
        /// Observed decay of the error in `qtilde_0`, next to `c'`.
        decay_exponent: Option<f64>,
        c_prime: f64,
    },
    Probe {
        potential: String,
        probe: ContinuityProbeResult,
    },
}

/// Job output and its CSV tables, keyed by file stem.
pub struct JobArtifacts {
    pub output: JobOutput,
    pub tables: Vec<(String, Table)>,
}

/// The convergent whose denominator is exactly `q`.
pub fn convergent_with(f: &Frequency, q: u64) -> CliResult<Convergent> {
    let target = BigUint::from(q);
    f.convergents()
        .take_while(|c| c.q <= target)
        .find(|c| c.q == target)
        .ok_or_else(|| CliError::Config(format!("{q} is not a convergent denominator of {}", f.label)))
}

fn dec(x: &BigUint) -> String {
    x.to_string()
}

fn cocycle(r: &Resolved) -> &MatrixFunction {
    r.cocycle.as_ref().expect("resolved cocycle")
}

fn bundle(r: &Resolved) -> &ParameterBundle {
    r.bundle.as_ref().expect("resolved bundle")
}

pub fn run_job(job: JobKind, cfg: &ExperimentConfig, r: &Resolved) -> CliResult<JobArtifacts> {
    match job {
        JobKind::Classify => classify(cfg, r),
        JobKind::Le => le(cfg, r),
        JobKind::Ldt => ldt(cfg, r),
        JobKind::Calibrate => calibrate(cfg, r),
        JobKind::Schedule => schedule(cfg, r),
        JobKind::Twoscale => twoscale(cfg, r),
        JobKind::Extrapolate => extrapolate(cfg, r),
        JobKind::Probe => probe(cfg, r),
    }
}

fn classify(cfg: &ExperimentConfig, r: &Resolved) -> CliResult<JobArtifacts> {
    let p = cfg.classify.as_ref().unwrap();
    let convs = cf_convergents(&r.frequency, p.convergents)?;
    let report = classify_frequency(&convs, p.eta, p.tau)?;
    let mut t = Table::new(&["class", "holds", "holds_up_to", "witness", "ln_witness", "worst_index", "implied"]);
    for e in report.entries() {
        t.push(vec![
            serde_json::to_value(e.class).unwrap().as_str().unwrap_or_default().to_string(),
            e.holds.to_string(),
            e.holds_up_to.map_or(String::new(), |n| n.to_string()),
            float(e.witness),
            float(e.ln_witness),
            e.worst_index.to_string(),
            e.implied.to_string(),
        ]);
    }
    Ok(JobArtifacts {
        output: JobOutput::Classify {
            convergents: convs.len(),
            report,
        },
        tables: vec![("classify".into(), t)],
    })
}

fn le(cfg: &ExperimentConfig, r: &Resolved) -> CliResult<JobArtifacts> {
    let p = cfg.le.as_ref().unwrap();
    let a = cocycle(r);
    let mut ns = p.ns.clone();
    ns.sort_unstable();
    ns.dedup();
    let t0 = Instant::now();
    let les = le_sequence(a, &r.frequency, &ns, &r.spec)?;
    // one shared pass produces every row
    let runtime_ms = t0.elapsed().as_secs_f64() * 1e3;
    let mut t = Table::new(&["N", "K", "L_N", "runtime_ms"]);
    let rows: Vec<LeRow> = les.iter().map(|l| LeRow { n: l.n, l_n: l.value }).collect();
    for row in &rows {
        t.push(vec![row.n.to_string(), r.spec.k.to_string(), float(row.l_n), format!("{runtime_ms:.3}")]);
    }
    Ok(JobArtifacts {
        output: JobOutput::Le {
            cocycle: a.label().to_string(),
            rows,
        },
        tables: vec![("le".into(), t)],
    })
}

fn deviation_table(reports: &[DeviationReport]) -> Table {
    let mut t = Table::new(&["N", "q", "kappa", "L_N", "fraction", "bound", "monte_carlo_fraction"]);
    for d in reports {
        t.push(vec![
            d.n.to_string(),
            d.q.as_ref().map_or(String::new(), dec),
            float(d.kappa),
            float(d.l_n),
            float(d.measured_fraction),
            opt_float(d.bound),
            opt_float(d.monte_carlo.as_ref().map(|m| m.fraction)),
        ]);
    }
    t
}

fn ldt(cfg: &ExperimentConfig, r: &Resolved) -> CliResult<JobArtifacts> {
    let p = cfg.ldt.as_ref().unwrap();
    let (a, b) = (cocycle(r), bundle(r));
    let kappa = p.kappa.unwrap_or(b.kappa);
    let mc = p.monte_carlo_samples.map(|samples| MonteCarlo {
        samples,
        seed: cfg.seed,
    });
    let reports = p
        .ns
        .iter()
        .map(|&n| deviation_measure(a, &r.frequency, n, kappa, &r.spec, b, p.waive_window, mc))
        .collect::<Result<Vec<_>, _>>()?;
    let t = deviation_table(&reports);
    Ok(JobArtifacts {
        output: JobOutput::Ldt {
            cocycle: a.label().to_string(),
            reports,
        },
        tables: vec![("deviation".into(), t)],
    })
}

fn calibrate(cfg: &ExperimentConfig, r: &Resolved) -> CliResult<JobArtifacts> {
    let p = cfg.calibrate.as_ref().unwrap();
    let (a, b) = (cocycle(r), bundle(r));
    let convs = p
        .qs
        .iter()
        .map(|&q| convergent_with(&r.frequency, q))
        .collect::<CliResult<Vec<_>>>()?;
    let (calibration, reports) = calibrate_ldt(a, &r.frequency, &convs, p.kappa.unwrap_or(b.kappa), b, &r.spec)?;
    let mut t = Table::new(&["q", "N", "fraction", "neg_log_fraction", "fitted_bound"]);
    for pt in &calibration.points {
        t.push(vec![
            dec(&pt.q),
            pt.n.to_string(),
            float(pt.fraction),
            opt_float(pt.neg_log_fraction),
            opt_float(pt.fitted_bound),
        ]);
    }
    let mut floors = Table::new(&["q", "N", "c_max"]);
    for f in &calibration.floors {
        floors.push(vec![dec(&f.q), f.n.to_string(), float(f.c_max)]);
    }
    Ok(JobArtifacts {
        tables: vec![("calibration".into(), t), ("floors".into(), floors), ("deviation".into(), deviation_table(&reports))],
        output: JobOutput::Calibrate {
            cocycle: a.label().to_string(),
            calibration,
            reports,
        },
    })
}

fn schedule_table(s: &ScaleSchedule) -> Table {
    let mut t = Table::new(&[
        "s",
        "convergent_index",
        "qtilde_s",
        "N_s",
        "m_s",
        "q_selection",
        "window",
        "multiplier",
        "violated",
    ]);
    for e in &s.entries {
        t.push(vec![
            e.s_index.to_string(),
            e.convergent_index.to_string(),
            dec(&e.qtilde),
            dec(&e.n),
            e.m.as_ref().map_or(String::new(), dec),
            e.q_selection.to_string(),
            e.window.to_string(),
            e.multiplier.to_string(),
            e.violated.join("; "),
        ]);
    }
    t
}

fn schedule(cfg: &ExperimentConfig, r: &Resolved) -> CliResult<JobArtifacts> {
    let p = cfg.schedule.as_ref().unwrap();
    let b = bundle(r);
    let schedule = match p.qtilde0 {
        Some(q) => {
            let c = convergent_with(&r.frequency, q)?;
            let n0 = match p.n0 {
                Some(n) => n,
                None => window_range(b, &c.q)?
                    .ok_or_else(|| CoreError::Window(format!("the window of q = {q} contains no integer N")))?
                    .0,
            };
            build_schedule(&r.frequency, b, c.n, p.depth, &BigUint::from(n0), p.policy)?
        }
        None => smallest_certified_start(&r.frequency, b, p.depth, p.max_index)?,
    };
    Ok(JobArtifacts {
        tables: vec![("schedule".into(), schedule_table(&schedule))],
        output: JobOutput::Schedule { schedule },
    })
}

fn twoscale(cfg: &ExperimentConfig, r: &Resolved) -> CliResult<JobArtifacts> {
    let p = cfg.twoscale.as_ref().unwrap();
    let (a, b) = (cocycle(r), bundle(r));
    let c = convergent_with(&r.frequency, p.q)?;
    let (initial, n) = match p.n {
        Some(n) => (None, n),
        None => {
            let init = find_initial_scale(a, &r.frequency, &c, b, &r.spec)?;
            let n = init.n0;
            (Some(init), n)
        }
    };
    let rows = p
        .ms
        .iter()
        .map(|&m| two_scale_defect(a, &r.frequency, n, m, &c, b, &r.spec))
        .collect::<Result<Vec<_>, _>>()?;
    let mut t = Table::new(&[
        "N", "m", "N_prime", "L_N", "L_2N", "L_Nprime", "defect", "exp_term", "ratio_term", "bound", "bound_holds",
        "hypotheses_hold",
    ]);
    for e in &rows {
        t.push(vec![
            e.n.to_string(),
            e.m.to_string(),
            e.n_prime.to_string(),
            float(e.l_n),
            float(e.l_2n),
            float(e.l_n_prime),
            float(e.defect),
            float(e.exp_term),
            float(e.ratio_term),
            float(e.bound),
            e.bound_holds.to_string(),
            e.flags.all_hold().to_string(),
        ]);
    }
    Ok(JobArtifacts {
        output: JobOutput::Twoscale {
            cocycle: a.label().to_string(),
            initial,
            rows,
        },
        tables: vec![("twoscale".into(), t)],
    })
}

fn extrapolate(cfg: &ExperimentConfig, r: &Resolved) -> CliResult<JobArtifacts> {
    let p = cfg.extrapolate.as_ref().unwrap();
    let (a, b) = (cocycle(r), bundle(r));
    let budget = p.budget.unwrap_or(DEFAULT_STEP_BUDGET);
    let mut runs = Vec::new();
    let mut tables = Vec::new();
    for &q in &p.qtilde0 {
        let c = convergent_with(&r.frequency, q)?;
        let initial = find_initial_scale(a, &r.frequency, &c, b, &r.spec)?;
        let schedule = build_schedule(
            &r.frequency,
            b,
            c.n,
            p.depth,
            &BigUint::from(initial.n0),
            SchedulePolicy::Record,
        )?;
        let report = match p.deep {
            Some(d) => extrapolation_error(a, &r.frequency, &schedule, d, &r.spec, budget)?,
            None => match extrapolation_error(a, &r.frequency, &schedule, schedule.depth(), &r.spec, budget) {
                Err(CoreError::Budget { largest_feasible, .. }) => {
                    extrapolation_error(a, &r.frequency, &schedule, largest_feasible, &r.spec, budget)?
                }
                other => other?,
            },
        };
        let mut t = Table::new(&["s", "qtilde_s", "lhs_Q1", "bound_Q1", "lhs_Q2", "bound_Q2", "lhs_Q3", "bound_Q3"]);
        for row in &report.steps {
            t.push(vec![
                row.s.to_string(),
                dec(&row.qtilde),
                float(row.lhs_q1),
                float(row.bound_q1),
                float(row.lhs_q2),
                float(row.bound_q2),
                float(row.lhs_q3),
                float(row.bound_q3),
            ]);
        }
        tables.push((format!("steps_q{q}"), t));
        runs.push(ExtrapolationRun {
            initial,
            schedule,
            report,
        });
    }
    let mut summary = Table::new(&["qtilde0", "deep", "N0", "N_deep", "error", "tail_bound", "schedule_certified"]);
    for run in &runs {
        let rep = &run.report;
        summary.push(vec![
            dec(&rep.qtilde0),
            rep.deep.to_string(),
            rep.n0.to_string(),
            rep.n_deep.to_string(),
            float(rep.value),
            float(rep.tail_bound),
            rep.schedule_certified.to_string(),
        ]);
    }
    tables.insert(0, ("extrapolation".into(), summary));
    let points: Vec<(f64, f64)> = runs
        .iter()
        .map(|run| (run.report.qtilde0.to_string().parse().unwrap_or(f64::NAN), run.report.value))
        .collect();
    Ok(JobArtifacts {
        output: JobOutput::Extrapolate {
            cocycle: a.label().to_string(),
            runs,
            decay_exponent: fitted_decay_exponent(&points),
            c_prime: b.c_prime,
        },
        tables,
    })
}

fn probe(cfg: &ExperimentConfig, r: &Resolved) -> CliResult<JobArtifacts> {
    let p = cfg.probe.as_ref().unwrap();
    let b = bundle(r);
    let cocycle_cfg = cfg.cocycle.as_ref().ok_or_else(|| CliError::Config("[cocycle] is required for this job".into()))?;
    let potential = cocycle_cfg.potential(cfg.seed)?;
    let c = convergent_with(&r.frequency, p.qtilde0)?;
    let result = continuity_probe(&potential, &r.frequency, &p.energies()?, b, &c, &r.spec)?;
    let mut rows = Table::new(&["E", "L_N0", "L_2N0", "extrapolant"]);
    for row in &result.rows {
        rows.push(vec![float(row.energy), float(row.l_n0), float(row.l_2n0), float(row.extrapolant)]);
    }
    let mut modulus = Table::new(&["h", "modulus", "jump_bound"]);
    for m in &result.modulus {
        modulus.push(vec![float(m.h), float(m.modulus), float(m.jump_bound)]);
    }
    Ok(JobArtifacts {
        output: JobOutput::Probe {
            potential: format!("{:?}", cocycle_cfg.kind),
            probe: result,
        },
        tables: vec![("probe".into(), rows), ("modulus".into(), modulus)],
    })
}
