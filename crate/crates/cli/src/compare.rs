//! Joins convergence files of several runs on the iteration column.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::CliError;
use crate::run::{CONVERGENCE_FILE, CONVERGENCE_HEADER};

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub iter: usize,
    pub sup_error: f64,
    pub frobenius_error: f64,
    pub omega_size: usize,
    pub hmc_samples: u64,
    pub wall_ms: f64,
}

#[derive(Debug, Clone)]
pub struct Comparison {
    pub csv: String,
    pub rows: usize,
    /// Set when the runs had different lengths and the join was cut short.
    pub truncated_from: Option<Vec<usize>>,
}

pub fn parse_convergence(text: &str, origin: &Path) -> Result<Vec<ConvergenceRow>, CliError> {
    let bad = |n: usize, msg: String| CliError::Runtime(format!("{}:{n}: {msg}", origin.display()));
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == CONVERGENCE_HEADER => {}
        other => return Err(bad(1, format!("unexpected header {other:?}"))),
    }
    let mut rows = Vec::new();
    for (k, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let n = k + 2;
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 6 {
            return Err(bad(n, format!("expected 6 fields, got {}", f.len())));
        }
        let float = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| bad(n, format!("`{s}`: {e}")))
        };
        let int = |s: &str| {
            s.trim()
                .parse::<u64>()
                .map_err(|e| bad(n, format!("`{s}`: {e}")))
        };
        rows.push(ConvergenceRow {
            iter: int(f[0])? as usize,
            sup_error: float(f[1])?,
            frobenius_error: float(f[2])?,
            omega_size: int(f[3])? as usize,
            hmc_samples: int(f[4])?,
            wall_ms: float(f[5])?,
        });
    }
    Ok(rows)
}

fn run_names(dirs: &[PathBuf]) -> Vec<String> {
    let mut names: Vec<String> = Vec::new();
    for d in dirs {
        let base = d
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "run".into());
        let mut name = base.clone();
        let mut k = 2;
        while names.contains(&name) {
            name = format!("{base}_{k}");
            k += 1;
        }
        names.push(name);
    }
    names
}

/// Columns per run: sup_error, frobenius_error, omega_size, hmc_samples,
/// each suffixed with the run name; then, for every run after the first,
/// its error differences from the first run.
pub fn compare(dirs: &[PathBuf]) -> Result<Comparison, CliError> {
    if dirs.len() < 2 {
        return Err(CliError::Runtime(
            "compare needs at least two run directories".into(),
        ));
    }
    let runs: Vec<Vec<ConvergenceRow>> = dirs
        .iter()
        .map(|d| {
            let path = d.join(CONVERGENCE_FILE);
            let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
            parse_convergence(&text, &path)
        })
        .collect::<Result<_, _>>()?;
    let lengths: Vec<usize> = runs.iter().map(Vec::len).collect();
    let rows = lengths.iter().copied().min().unwrap_or(0);
    let truncated_from = lengths.iter().any(|&l| l != rows).then(|| lengths.clone());
    let names = run_names(dirs);

    let mut out = String::from("iter");
    for n in &names {
        let _ = write!(
            out,
            ",sup_error_{n},frobenius_error_{n},omega_size_{n},hmc_samples_{n}"
        );
    }
    for n in &names[1..] {
        let _ = write!(out, ",sup_error_diff_{n},frobenius_error_diff_{n}");
    }
    out.push('\n');
    for k in 0..rows {
        let iter = runs[0][k].iter;
        for (run, name) in runs.iter().zip(&names) {
            if run[k].iter != iter {
                return Err(CliError::Runtime(format!(
                    "row {} of {name} is iteration {}, expected {iter}",
                    k + 1,
                    run[k].iter
                )));
            }
        }
        let _ = write!(out, "{iter}");
        for run in &runs {
            let r = &run[k];
            let _ = write!(
                out,
                ",{},{},{},{}",
                r.sup_error, r.frobenius_error, r.omega_size, r.hmc_samples
            );
        }
        let base = &runs[0][k];
        for run in &runs[1..] {
            let r = &run[k];
            let _ = write!(
                out,
                ",{},{}",
                r.sup_error - base.sup_error,
                r.frobenius_error - base.frobenius_error
            );
        }
        out.push('\n');
    }
    Ok(Comparison {
        csv: out,
        rows,
        truncated_from,
    })
}
