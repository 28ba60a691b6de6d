//! Training runs and their artifacts.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use hamq_core::hamq::{train_mode, TrainReport};
use hamq_core::{make_env, DiscreteMdp, EnvName, QTable};
use serde_json::json;

use crate::config::{check_slice, ResolvedConfig, SliceSpec};
use crate::error::CliError;

pub const CONVERGENCE_FILE: &str = "convergence.csv";
pub const HEATMAP_FILE: &str = "policy_heatmap.csv";
pub const QTABLE_FILE: &str = "qtable.txt";
pub const META_FILE: &str = "run_meta.json";

pub const CONVERGENCE_HEADER: &str =
    "iter,sup_error,frobenius_error,omega_size,hmc_samples,wall_ms";
pub const HEATMAP_HEADER: &str = "dim_i,dim_j,action_value";

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: TrainReport,
    /// Iterations whose completion stopped before converging.
    pub unconverged: Vec<usize>,
}

/// Trains per `cfg` and writes all artifacts into its output directory.
pub fn execute(cfg: &ResolvedConfig) -> Result<RunOutcome, CliError> {
    let mdp = make_env(cfg.env, &cfg.env_options)?;
    let report = train_mode(&mdp, &cfg.train, cfg.mode)?;
    let unconverged: Vec<usize> = report
        .records
        .iter()
        .filter(|r| !r.completion_converged)
        .map(|r| r.iter)
        .collect();
    let slice = cfg.raw.heatmap.clone().unwrap_or(SliceSpec {
        dims: [0, 1],
        fixed: Vec::new(),
    });
    let dir = &cfg.output_dir;
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    write(
        dir,
        CONVERGENCE_FILE,
        &convergence_csv(&report, cfg.raw.record_wall_time),
    )?;
    write(
        dir,
        HEATMAP_FILE,
        &policy_heatmap(&mdp, cfg.env, &report.q, &slice)?,
    )?;
    write(dir, QTABLE_FILE, &report.q.to_text())?;
    write(
        dir,
        META_FILE,
        &run_meta(cfg, &mdp, &report, &slice, &unconverged)?,
    )?;
    Ok(RunOutcome {
        report,
        unconverged,
    })
}

fn write(dir: &Path, name: &str, body: &str) -> Result<(), CliError> {
    let path = dir.join(name);
    fs::write(&path, body).map_err(|e| CliError::io(&path, e))
}

pub fn convergence_csv(report: &TrainReport, record_wall_time: bool) -> String {
    let mut out = String::new();
    out.push_str(CONVERGENCE_HEADER);
    out.push('\n');
    for r in &report.records {
        let wall = if record_wall_time { r.wall_ms } else { 0.0 };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.iter, r.sup_error, r.frobenius_error, r.omega_size, r.samples, wall
        );
    }
    out
}

/// Greedy action over the two free dimensions of `slice`, one row per
/// grid point of the slice, free coordinates first.
pub fn policy_heatmap(
    mdp: &DiscreteMdp,
    env: EnvName,
    q: &QTable,
    slice: &SliceSpec,
) -> Result<String, CliError> {
    check_slice(slice, env).map_err(CliError::Runtime)?;
    if q.shape() != mdp.shape() {
        return Err(CliError::Runtime(format!(
            "q-table shape {:?} does not match {} shape {:?}",
            q.shape(),
            env,
            mdp.shape()
        )));
    }
    let states = mdp.state_space();
    let points = states.points_per_dim();
    let [di, dj] = slice.dims;
    let mut multi: Vec<usize> = points.iter().map(|&n| n / 2).collect();
    let others = (0..points.len()).filter(|d| *d != di && *d != dj);
    for (d, &k) in others.zip(&slice.fixed) {
        if k >= points[d] {
            return Err(CliError::Runtime(format!(
                "fixed index {k} out of range for dimension {d} with {} points",
                points[d]
            )));
        }
        multi[d] = k;
    }
    let policy = q.greedy_policy();
    let actions = mdp.action_space();
    let mut out = String::new();
    out.push_str(HEATMAP_HEADER);
    out.push('\n');
    for i in 0..points[di] {
        for j in 0..points[dj] {
            multi[di] = i;
            multi[dj] = j;
            let s = states.flat_index(&multi)?;
            let action = actions.point(policy[s])?[0];
            let _ = writeln!(
                out,
                "{},{},{}",
                states.coordinate(di, i),
                states.coordinate(dj, j),
                action
            );
        }
    }
    Ok(out)
}

fn run_meta(
    cfg: &ResolvedConfig,
    mdp: &DiscreteMdp,
    report: &TrainReport,
    slice: &SliceSpec,
    unconverged: &[usize],
) -> Result<String, CliError> {
    let last = report.final_record();
    let names = cfg.env.dim_names();
    let meta = json!({
        "version": env!("CARGO_PKG_VERSION"),
        "env": cfg.env.as_str(),
        "mode": cfg.mode.as_str(),
        "output_dir": cfg.output_dir.display().to_string(),
        "shape": [mdp.num_states(), mdp.num_actions()],
        "config": cfg.raw,
        "seeds": {
            "q_init_seed": cfg.train.q_init_seed,
            "support_seed": cfg.train.support_seed,
        },
        "heatmap": {
            "dims": slice.dims,
            "dim_names": [names[slice.dims[0]], names[slice.dims[1]]],
            "fixed": slice.fixed,
        },
        "reference_sweeps": report.reference_sweeps,
        "final": {
            "sup_error": last.sup_error,
            "frobenius_error": last.frobenius_error,
            "hmc_samples": last.samples,
        },
        "unconverged_completion_iterations": unconverged,
    });
    let mut text =
        serde_json::to_string_pretty(&meta).map_err(|e| CliError::Runtime(e.to_string()))?;
    text.push('\n');
    Ok(text)
}

/// Reads a persisted q-table and renders its policy slice for `env`.
pub fn export_policy(qtable: &Path, env: EnvName, slice: &SliceSpec) -> Result<String, CliError> {
    let text = fs::read_to_string(qtable).map_err(|e| CliError::io(qtable, e))?;
    let q = QTable::from_text(&text)?;
    let mdp = make_env(env, &hamq_core::EnvOptions::default())?;
    policy_heatmap(&mdp, env, &q, slice)
}
