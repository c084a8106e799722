//! On-disk formats. JSON for reports and metadata, CSV for vectors.

use std::fs;
use std::path::Path;

use fpme_core::estimates::ExponentSeries;
use fpme_core::evolution::{ClipEvent, EvolutionConfig};
use fpme_core::{build_grid, DiscreteOperator, OperatorKind, Profile, Trajectory};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const META_FILE: &str = "meta.json";
pub const SNAPSHOTS_FILE: &str = "snapshots.csv";
pub const CONFIG_FILE: &str = "config.toml";

/// Operator facts needed to recognise what a file was computed with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorProvenance {
    pub kind: OperatorKind,
    pub s: f64,
    pub n: usize,
    pub h: f64,
    pub gamma: f64,
    pub lambda1: f64,
    pub eigen_residual: f64,
}

impl OperatorProvenance {
    pub fn of(op: &DiscreteOperator) -> Self {
        OperatorProvenance {
            kind: op.kind,
            s: op.s,
            n: op.n(),
            h: op.grid.h,
            gamma: op.gamma,
            lambda1: op.lambda1,
            eigen_residual: op.eigen_residual(),
        }
    }
}

/// `meta.json` of a trajectory directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryMeta {
    pub operator: OperatorProvenance,
    pub datum: String,
    pub config: EvolutionConfig,
    pub times: Vec<f64>,
    pub newton_iterations: Vec<usize>,
    pub clip_log: Vec<ClipEvent>,
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("reports serialize");
    text.push('\n');
    write_text(path, &text)
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).map_err(|e| CliError::io(path, e.into()))
}

fn finish(mut w: csv::Writer<fs::File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| CliError::io(path, e))
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> CliError + '_ {
    move |e| CliError::io(path, e.into())
}

/// Columns `x, dist, S, phi1`.
pub fn write_profile_csv(path: &Path, op: &DiscreteOperator, profile: &Profile) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["x", "dist", "S", "phi1"]).map_err(csv_err(path))?;
    for i in 0..op.n() {
        w.serialize((op.grid.nodes[i], op.grid.dist[i], profile.values[i], op.phi1[i])).map_err(csv_err(path))?;
    }
    finish(w, path)
}

/// Columns `t, beta, stderr`.
pub fn write_exponent_csv(path: &Path, series: &ExponentSeries) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["t", "beta", "stderr"]).map_err(csv_err(path))?;
    for k in 0..series.times.len() {
        w.serialize((series.times[k], series.beta[k], series.stderr[k])).map_err(csv_err(path))?;
    }
    finish(w, path)
}

/// Columns `x, comparator` and one `t=<probe>` column per probe time.
pub fn write_figure_csv(path: &Path, x: &[f64], comparator: &[f64], columns: &[(f64, Vec<f64>)]) -> Result<()> {
    let mut w = csv_writer(path)?;
    let mut header = vec!["x".to_string(), "comparator".to_string()];
    header.extend(columns.iter().map(|(t, _)| format!("t={t}")));
    w.write_record(&header).map_err(csv_err(path))?;
    for i in 0..x.len() {
        let mut row = vec![x[i].to_string(), comparator[i].to_string()];
        row.extend(columns.iter().map(|(_, v)| v[i].to_string()));
        w.write_record(&row).map_err(csv_err(path))?;
    }
    finish(w, path)
}

/// Writes `meta.json` and `snapshots.csv` (columns `t, x, u`) into `dir`.
pub fn write_trajectory(dir: &Path, op: &DiscreteOperator, datum: &str, traj: &Trajectory) -> Result<()> {
    ensure_dir(dir)?;
    let meta = TrajectoryMeta {
        operator: OperatorProvenance::of(op),
        datum: datum.to_string(),
        config: traj.config.clone(),
        times: traj.times.clone(),
        newton_iterations: traj.newton_iterations.clone(),
        clip_log: traj.clip_log.clone(),
    };
    write_json(&dir.join(META_FILE), &meta)?;
    let path = dir.join(SNAPSHOTS_FILE);
    let mut w = csv_writer(&path)?;
    w.write_record(["t", "x", "u"]).map_err(csv_err(&path))?;
    for (t, u) in traj.times.iter().zip(&traj.snapshots) {
        for (x, v) in op.grid.nodes.iter().zip(u) {
            w.serialize((t, x, v)).map_err(csv_err(&path))?;
        }
    }
    finish(w, &path)
}

#[derive(Debug, Deserialize)]
struct SnapshotRow {
    t: f64,
    x: f64,
    u: f64,
}

/// Reads a trajectory directory, checking the snapshot table against the
/// metadata row by row.
pub fn read_trajectory(dir: &Path) -> Result<(TrajectoryMeta, Trajectory)> {
    let meta_path = dir.join(META_FILE);
    let text = fs::read_to_string(&meta_path).map_err(|e| CliError::io(&meta_path, e))?;
    let meta: TrajectoryMeta = serde_json::from_str(&text).map_err(|e| CliError::parse(&meta_path, e))?;
    let n = meta.operator.n;
    let grid = build_grid(n).map_err(|e| CliError::parse(&meta_path, e))?;

    let path = dir.join(SNAPSHOTS_FILE);
    let mut rdr = csv::Reader::from_path(&path).map_err(|e| CliError::parse(&path, e))?;
    let mut snapshots: Vec<Vec<f64>> = Vec::with_capacity(meta.times.len());
    let mut row_count = 0usize;
    for (r, row) in rdr.deserialize::<SnapshotRow>().enumerate() {
        let row = row.map_err(|e| CliError::parse(&path, e))?;
        let (k, i) = (r / n, r % n);
        let bad = |what: String| CliError::parse(&path, format!("row {}: {what}", r + 2));
        let t = *meta.times.get(k).ok_or_else(|| bad("more rows than recorded times".into()))?;
        if row.t != t {
            return Err(bad(format!("t = {} but snapshot {k} is at t = {t}", row.t)));
        }
        if (row.x - grid.nodes[i]).abs() > 1e-12 {
            return Err(bad(format!("x = {} is not grid node {i} = {}", row.x, grid.nodes[i])));
        }
        if !(row.u >= 0.0 && row.u.is_finite()) {
            return Err(bad(format!("u = {} is not nonnegative and finite", row.u)));
        }
        if i == 0 {
            snapshots.push(Vec::with_capacity(n));
        }
        snapshots[k].push(row.u);
        row_count += 1;
    }
    if row_count != n * meta.times.len() {
        return Err(CliError::parse(
            &path,
            format!("{row_count} rows, expected {} times x {n} nodes", meta.times.len()),
        ));
    }
    let traj = Trajectory {
        kind: meta.operator.kind,
        s: meta.operator.s,
        n,
        config: meta.config.clone(),
        times: meta.times.clone(),
        snapshots,
        newton_iterations: meta.newton_iterations.clone(),
        clip_log: meta.clip_log.clone(),
    };
    Ok((meta, traj))
}
