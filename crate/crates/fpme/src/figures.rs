//! Data bundles for the three published figures: SFL with the bump datum,
//! `t^{1/(m-1)} u` at the probe times next to a power of `phi1`, plus the
//! qualitative claims each figure makes, evaluated on the computed data.

use std::path::Path;
use std::thread;

use fpme_core::estimates::*;
use fpme_core::evolution::{critical_time, evolve, initial_datum, Preset};
use fpme_core::{DiscreteOperator, Trajectory};
use serde::Serialize;

use crate::commands::{operator, phi_power, Status};
use crate::config::{ChecksSection, DatumSection, ExperimentConfig, OperatorSection, ScheduleSection, FAST_NODES};
use crate::error::{CliError, Result};
use crate::formats::{self, CONFIG_FILE};

pub const FIGURE_NODES: usize = 512;
/// Exponent claims are judged to this absolute tolerance.
pub const CLAIM_TOL: f64 = 0.1;

#[derive(Debug, Clone, Serialize)]
pub struct Claim {
    pub panel: String,
    pub claim: String,
    pub value: f64,
    pub target: String,
    pub pass: bool,
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    name: &'static str,
    m: f64,
    s: f64,
    probes: &'static [f64],
    t_end: f64,
    /// The comparator is `phi1^comparator`.
    comparator: f64,
}

fn panels(which: u8) -> Result<Vec<Panel>> {
    Ok(match which {
        1 => vec![Panel { name: "figure1", m: 2.0, s: 0.5, probes: &[1.0, 5.0], t_end: 5.0, comparator: 0.5 }],
        2 => vec![
            Panel { name: "figure2_left", m: 4.0, s: 0.75, probes: &[30.0, 150.0], t_end: 150.0, comparator: 0.25 },
            Panel { name: "figure2_right", m: 4.0, s: 0.2, probes: &[150.0, 600.0], t_end: 600.0, comparator: 0.25 },
        ],
        3 => vec![
            Panel { name: "figure3_left", m: 2.0, s: 0.1, probes: &[4.0, 25.0], t_end: 25.0, comparator: 0.8 },
            Panel { name: "figure3_right", m: 2.0, s: 0.1, probes: &[40.0, 150.0], t_end: 150.0, comparator: 0.8 },
        ],
        other => return Err(CliError::Config(format!("figure must be 1, 2 or 3, got {other}"))),
    })
}

fn panel_config(p: &Panel, n: usize, probes: Vec<f64>, t_end: f64, out: &Path) -> ExperimentConfig {
    ExperimentConfig {
        m: p.m,
        seed: 0,
        out: Some(out.join(p.name)),
        operator: OperatorSection { kind: fpme_core::OperatorKind::Sfl, s: p.s, n },
        datum: DatumSection { preset: "bump".into(), c: 1.0, exponent: 1.0 },
        schedule: ScheduleSection { dt0: 1e-3, growth: 1.05, t_end, probe_times: probes, record_every: 1 },
        checks: ChecksSection::default(),
    }
}

struct Computed {
    panel: Panel,
    cfg: ExperimentConfig,
    op: DiscreteOperator,
    traj: Trajectory,
    t_star: f64,
}

fn compute(p: Panel, n: usize, out: &Path) -> Result<Computed> {
    let base = panel_config(&p, n, p.probes.to_vec(), p.t_end, out);
    let op = operator(&base)?;
    let u0 = initial_datum(&Preset::Bump, &op.grid, &op, None)?;
    let t_star = critical_time(&u0, &op.phi1, p.m, 1.0, &op.grid)?;
    let (probes, t_end) = if p.name == "figure1" {
        // early probe for the short-time linear regime, and a run long
        // enough to fit the onset of the matching lower bound
        let mut probes = vec![0.05 * t_star];
        probes.extend_from_slice(p.probes);
        (probes, p.t_end.max(50.0 * t_star))
    } else {
        (p.probes.to_vec(), p.t_end)
    };
    let cfg = panel_config(&p, n, probes, t_end, out);
    cfg.validate()?;
    let traj = evolve(&u0, &op, &cfg.evolution())?;
    Ok(Computed { panel: p, cfg, op, traj, t_star })
}

fn claim(c: &Computed, text: &str, value: f64, target: String, pass: bool) -> Claim {
    Claim { panel: c.panel.name.into(), claim: text.into(), value, target, pass }
}

fn beta_at(series: &ExponentSeries, t: f64) -> f64 {
    series.at(t).unwrap_or(f64::NAN)
}

fn claims(c: &Computed, series: &ExponentSeries) -> Result<Vec<Claim>> {
    let (op, traj, m) = (&c.op, &c.traj, c.panel.m);
    let tol = c.cfg.tolerances();
    let near = |b: f64, target: f64| (b - target).abs() <= CLAIM_TOL;
    let target = op.gamma * op.sigma(m).sigma / m;
    let mut out = Vec::new();
    match c.panel.name {
        "figure1" => {
            let early = c.cfg.schedule.probe_times[0];
            let b = beta_at(series, early);
            out.push(claim(c, "linear boundary behavior at 0.05 t_*", b, "1".into(), near(b, 1.0)));
            let b = beta_at(series, 5.0);
            out.push(claim(c, "matching boundary behavior at t = 5", b, format!("{target}"), near(b, target)));
            let r = check_matching_lower(traj, op, m, c.t_star, &tol);
            let k = r.get("kappa2").unwrap_or(f64::NAN);
            out.push(claim(c, "matching lower bound for t >= kappa_* t_*", k, "> 0".into(), r.passed()));
        }
        "figure2_left" => {
            let (b30, b150) = (beta_at(series, 30.0), beta_at(series, 150.0));
            out.push(claim(c, "exponent decreases from t = 30 to t = 150", b30 - b150, "> 0".into(), b30 > b150));
            out.push(claim(c, "matching boundary behavior at t = 150", b150, format!("{target}"), near(b150, target)));
        }
        "figure2_right" => {
            for t in [150.0, 600.0] {
                let b = beta_at(series, t);
                out.push(claim(c, &format!("linear boundary behavior at t = {t}"), b, "1".into(), near(b, 1.0)));
            }
            let r = check_universal_lower(traj, op, m, c.t_star, &tol);
            let k = r.get("kappa0").unwrap_or(f64::NAN);
            out.push(claim(c, "universal lower bound kappa0 phi1", k, "> 0".into(), r.passed()));
        }
        "figure3_left" => {
            let b = beta_at(series, 4.0);
            out.push(claim(c, "linear boundary behavior at t = 4", b, "1".into(), near(b, 1.0)));
        }
        "figure3_right" => {
            let u0 = traj.initial();
            let c0 = u0.iter().zip(&op.phi1).map(|(u, f)| u / f).fold(0.0, f64::max) * (1.0 + 1e-9);
            let r = check_counterexample_upper(traj, op, m, c0, &tol)?;
            let v = r.get("min_vanishing_slope").unwrap_or(f64::NAN);
            out.push(claim(c, "u / phi1^(sigma/m) vanishes at the boundary", v, "> 0".into(), v >= tol.exponent));
            let late = r.get("late_exponent").unwrap_or(f64::NAN);
            out.push(claim(c, "late lower-bound exponent at t = 150", late, ">= 0.75".into(), late >= 0.75));
            let t = *traj.times.last().expect("nonempty trajectory");
            let u = traj.snapshots.last().expect("nonempty trajectory");
            let bulk = (0..op.n()).filter(|&i| op.grid.dist[i] >= 0.1);
            let ratio = bulk.map(|i| t * u[i] / op.phi1[i].powf(0.8)).fold(f64::INFINITY, f64::min);
            out.push(claim(c, "t u exceeds phi1^0.8 for dist >= 0.1 at t = 150", ratio, "> 1".into(), ratio > 1.0));
        }
        _ => unreachable!("unknown panel"),
    }
    Ok(out)
}

fn write_panel(c: &Computed, dir: &Path) -> Result<Vec<Claim>> {
    let pdir = dir.join(c.panel.name);
    formats::ensure_dir(&pdir)?;
    formats::write_text(&pdir.join(CONFIG_FILE), &c.cfg.to_toml())?;
    let a = 1.0 / (c.panel.m - 1.0);
    let columns: Vec<(f64, Vec<f64>)> = c
        .panel
        .probes
        .iter()
        .map(|&t| {
            let u = c.traj.at(t).expect("probe times are recorded");
            (t, u.iter().map(|v| t.powf(a) * v).collect())
        })
        .collect();
    let comparator = phi_power(&c.op, c.panel.comparator);
    formats::write_figure_csv(&dir.join(format!("{}.csv", c.panel.name)), &c.op.grid.nodes, &comparator, &columns)?;
    if c.panel.name == "figure1" {
        let u0 = vec![(0.0, c.traj.initial().to_vec())];
        let ones = vec![1.0; c.op.n()];
        formats::write_figure_csv(&dir.join("figure1_datum.csv"), &c.op.grid.nodes, &ones, &u0)?;
    }
    let tol = c.cfg.tolerances();
    let series = exponent_timeseries(&c.traj, &c.op.grid, tol.window)?;
    formats::write_exponent_csv(&pdir.join("exponents.csv"), &series)?;
    claims(c, &series)
}

/// Computes every panel of figure `which` (concurrently) and writes
/// `<panel>.csv`, per-panel configs and exponent series, and `verdicts.json`.
pub fn cmd_reproduce_figure(which: u8, out: &Path, fast: bool) -> Result<Status> {
    let n = if fast { FAST_NODES } else { FIGURE_NODES };
    let list = panels(which)?;
    formats::ensure_dir(out)?;
    let computed: Vec<Result<Computed>> = thread::scope(|scope| {
        let handles: Vec<_> = list.iter().map(|&p| scope.spawn(move || compute(p, n, out))).collect();
        handles.into_iter().map(|h| h.join().expect("panel thread panicked")).collect()
    });
    let mut all = Vec::new();
    for c in computed {
        all.extend(write_panel(&c?, out)?);
    }
    formats::write_json(&out.join("verdicts.json"), &all)?;
    let mut st = Status::default();
    for c in &all {
        st.checker_failed |= !c.pass;
        st.line(format!(
            "{} {}: {} = {:.4} (target {})",
            if c.pass { "ok  " } else { "FAIL" },
            c.panel,
            c.claim,
            c.value,
            c.target
        ));
    }
    Ok(st)
}
