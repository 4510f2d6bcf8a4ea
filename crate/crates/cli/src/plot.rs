//! Long-format, plot-ready CSVs assembled from completed job directories.

use crate::error::CliResult;
use crate::jobs::JobOutput;
use crate::table::{float, Table};
use crate::{read_result, ResultFile};
use std::path::{Path, PathBuf};

pub const PLOT_LE: &str = "plot_le.csv";
pub const PLOT_DEVIATION: &str = "plot_deviation.csv";
pub const PLOT_EXTRAPOLATION: &str = "plot_extrapolation.csv";
pub const PLOT_EXTRAPOLANT: &str = "plot_extrapolant.csv";

fn run_label(dir: &Path) -> String {
    dir.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| dir.display().to_string())
}

/// Builds the four figure tables; runs are ordered by label and rows by
/// their abscissa.
pub fn plot_tables(results: &[(String, ResultFile)]) -> [(&'static str, Table); 4] {
    let mut sorted: Vec<&(String, ResultFile)> = results.iter().collect();
    sorted.sort_by(|a, b| a.0.cmp(&b.0));

    let mut le = Table::new(&["run", "N", "L_N"]);
    let mut dev = Table::new(&["run", "q", "N", "fraction"]);
    let mut ext = Table::new(&["run", "qtilde0", "error"]);
    let mut probe = Table::new(&["run", "E", "extrapolant"]);
    for (run, r) in sorted {
        match &r.output {
            JobOutput::Le { rows, .. } => {
                let mut rows = rows.clone();
                rows.sort_by_key(|x| x.n);
                for x in rows {
                    le.push(vec![run.clone(), x.n.to_string(), float(x.l_n)]);
                }
            }
            JobOutput::Ldt { reports, .. } | JobOutput::Calibrate { reports, .. } => {
                let mut reports: Vec<_> = reports.iter().collect();
                reports.sort_by(|a, b| (&a.q, a.n).cmp(&(&b.q, b.n)));
                for d in reports {
                    let q = d.q.as_ref().map_or(String::new(), |q| q.to_string());
                    dev.push(vec![run.clone(), q, d.n.to_string(), float(d.measured_fraction)]);
                }
            }
            JobOutput::Extrapolate { runs, .. } => {
                let mut reps: Vec<_> = runs.iter().map(|x| &x.report).collect();
                reps.sort_by(|a, b| a.qtilde0.cmp(&b.qtilde0));
                for rep in reps {
                    ext.push(vec![run.clone(), rep.qtilde0.to_string(), float(rep.value)]);
                }
            }
            JobOutput::Probe { probe: p, .. } => {
                let mut rows: Vec<_> = p.rows.iter().collect();
                rows.sort_by(|a, b| a.energy.total_cmp(&b.energy));
                for row in rows {
                    probe.push(vec![run.clone(), float(row.energy), float(row.extrapolant)]);
                }
            }
            _ => {}
        }
    }
    [(PLOT_LE, le), (PLOT_DEVIATION, dev), (PLOT_EXTRAPOLATION, ext), (PLOT_EXTRAPOLANT, probe)]
}

/// Reads `result.json` from each directory and writes the figure CSVs into
/// `out`. A missing artifact is an input error.
pub fn emit_plot_data(dirs: &[PathBuf], out: &Path) -> CliResult<Vec<PathBuf>> {
    let results = dirs
        .iter()
        .map(|d| Ok((run_label(d), read_result(d)?)))
        .collect::<CliResult<Vec<_>>>()?;
    std::fs::create_dir_all(out)?;
    let mut written = Vec::new();
    for (name, table) in plot_tables(&results) {
        let path = out.join(name);
        std::fs::write(&path, table.to_bytes()?)?;
        written.push(path);
    }
    Ok(written)
}
