//! Backward Euler time stepping for `u_t + L((u + delta)^m - delta^m) = 0`.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::str::FromStr;

use crate::elliptic::Profile;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::linalg::{max_abs, Cholesky, Matrix};
use crate::math::{expf, powf};
use crate::operators::{DiscreteOperator, OperatorKind};

/// Step halvings tried by the Newton line search.
pub const LINE_SEARCH_HALVINGS: usize = 30;
/// Times a failed step is split in two before giving up.
pub const DT_HALVINGS: usize = 5;
/// Nodes whose Jacobian weight falls below this fraction of the largest are
/// treated as decoupled in the Newton system.
const ACTIVE_FLOOR: f64 = 1e-12;

/// Geometric step sizes `dt0 * growth^k` up to `t_end`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DtSchedule {
    pub dt0: f64,
    pub growth: f64,
    pub t_end: f64,
}

impl Default for DtSchedule {
    fn default() -> Self {
        DtSchedule { dt0: 1e-3, growth: 1.05, t_end: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EvolutionConfig {
    pub m: f64,
    pub delta: f64,
    pub schedule: DtSchedule,
    pub newton_tol: f64,
    pub newton_max: usize,
    /// Times that must appear exactly among the snapshots.
    pub probe_times: Vec<f64>,
    /// Keep every `record_every`-th step besides the probe times.
    pub record_every: usize,
}

impl EvolutionConfig {
    pub fn new(m: f64, schedule: DtSchedule) -> Self {
        EvolutionConfig {
            m,
            delta: 0.0,
            schedule,
            newton_tol: 1e-12,
            newton_max: 50,
            probe_times: Vec::new(),
            record_every: 1,
        }
    }

    pub fn with_probes(mut self, probes: &[f64]) -> Self {
        self.probe_times = probes.to_vec();
        self
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.schedule;
        let rule = if !(self.m > 1.0) {
            Some(format!("m must exceed 1, got {}", self.m))
        } else if !(self.delta >= 0.0) {
            Some(format!("delta must be nonnegative, got {}", self.delta))
        } else if !(s.dt0 > 0.0) {
            Some(format!("dt0 must be positive, got {}", s.dt0))
        } else if !(s.growth >= 1.0) {
            Some(format!("dt growth must be at least 1, got {}", s.growth))
        } else if !(s.t_end > 0.0) {
            Some(format!("t_end must be positive, got {}", s.t_end))
        } else if !(self.newton_tol > 0.0) {
            Some(format!("newton_tol must be positive, got {}", self.newton_tol))
        } else if self.newton_max == 0 || self.record_every == 0 {
            Some("newton_max and record_every must be positive".into())
        } else {
            let outside = self.probe_times.iter().find(|&&p| !(p > 0.0 && p <= s.t_end));
            outside.map(|p| format!("probe time {p} outside (0, t_end = {}]", s.t_end))
        };
        match rule {
            Some(r) => Err(Error::Config(r)),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ClipEvent {
    pub t: f64,
    /// Largest negative excursion removed by the floor at the accepted iterate.
    pub amount: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Trajectory {
    pub kind: OperatorKind,
    pub s: f64,
    pub n: usize,
    pub config: EvolutionConfig,
    pub times: Vec<f64>,
    pub snapshots: Vec<Vec<f64>>,
    /// Newton iterations of every step taken, recorded or not.
    pub newton_iterations: Vec<usize>,
    pub clip_log: Vec<ClipEvent>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn m(&self) -> f64 {
        self.config.m
    }

    pub fn initial(&self) -> &[f64] {
        &self.snapshots[0]
    }

    /// Snapshot index recorded at time `t`, matched to 1e-9 relative.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        self.times.iter().position(|&x| (x - t).abs() <= 1e-9 * t.abs().max(1e-300))
    }

    pub fn at(&self, t: f64) -> Option<&[f64]> {
        self.index_of(t).map(|i| self.snapshots[i].as_slice())
    }

    pub fn is_trivial(&self) -> bool {
        self.snapshots.iter().all(|u| u.iter().all(|&v| v == 0.0))
    }

    /// Snapshots in reverse order against the original, still increasing,
    /// times. Used as a negative control.
    pub fn time_reversed(&self) -> Trajectory {
        let mut out = self.clone();
        out.snapshots.reverse();
        out
    }

    /// Subset of snapshot indices, log-spaced in time, always including the
    /// first, the last and every probe time.
    pub fn sample_indices(&self, max: usize) -> Vec<usize> {
        let k = self.len();
        if k <= max {
            return (0..k).collect();
        }
        let mut idx: Vec<usize> = vec![0, k - 1];
        for p in &self.config.probe_times {
            if let Some(i) = self.index_of(*p) {
                idx.push(i);
            }
        }
        let t1 = self.times[1];
        let tk = self.times[k - 1];
        let slots = max.saturating_sub(idx.len()).max(2);
        let ratio = tk / t1;
        for j in 0..slots {
            let target = t1 * powf(ratio, j as f64 / (slots - 1) as f64);
            let i = self.times.partition_point(|&t| t < target).min(k - 1);
            idx.push(i);
        }
        idx.sort_unstable();
        idx.dedup();
        idx
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Preset {
    /// `exp(4 - 1/(1/4 - x^2))` on `|x| < 1/2`, peak 1 at the origin.
    Bump,
    CPhi1 { c: f64 },
    CPhi1Pow { c: f64, exponent: f64 },
    CProfile { c: f64 },
    Constant { c: f64 },
}

impl FromStr for Preset {
    type Err = Error;

    /// Parses `bump`, `c_phi1`, `c_phi1_pow`, `c_profile` or `constant`,
    /// with parameters set to 1; see [`Preset::with_params`].
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "bump" => Ok(Preset::Bump),
            "c_phi1" => Ok(Preset::CPhi1 { c: 1.0 }),
            "c_phi1_pow" => Ok(Preset::CPhi1Pow { c: 1.0, exponent: 1.0 }),
            "c_profile" => Ok(Preset::CProfile { c: 1.0 }),
            "constant" => Ok(Preset::Constant { c: 1.0 }),
            other => Err(Error::Config(format!(
                "unknown datum preset {other:?} (expected bump, c_phi1, c_phi1_pow, c_profile or constant)"
            ))),
        }
    }
}

impl Preset {
    pub fn name(&self) -> &'static str {
        match self {
            Preset::Bump => "bump",
            Preset::CPhi1 { .. } => "c_phi1",
            Preset::CPhi1Pow { .. } => "c_phi1_pow",
            Preset::CProfile { .. } => "c_profile",
            Preset::Constant { .. } => "constant",
        }
    }

    pub fn with_params(self, c: f64, exponent: f64) -> Self {
        match self {
            Preset::Bump => Preset::Bump,
            Preset::CPhi1 { .. } => Preset::CPhi1 { c },
            Preset::CPhi1Pow { .. } => Preset::CPhi1Pow { c, exponent },
            Preset::CProfile { .. } => Preset::CProfile { c },
            Preset::Constant { .. } => Preset::Constant { c },
        }
    }
}

pub fn bump(x: f64) -> f64 {
    let q = 0.25 - x * x;
    if q <= 0.0 {
        0.0
    } else {
        expf(4.0 - 1.0 / q)
    }
}

pub fn initial_datum(preset: &Preset, grid: &Grid, op: &DiscreteOperator, profile: Option<&Profile>) -> Result<Vec<f64>> {
    let phi = &op.phi1;
    let out: Vec<f64> = match *preset {
        Preset::Bump => grid.nodes.iter().map(|&x| bump(x)).collect(),
        Preset::CPhi1 { c } => phi.iter().map(|p| c * p).collect(),
        Preset::CPhi1Pow { c, exponent } => phi.iter().map(|&p| c * powf(p, exponent)).collect(),
        Preset::CProfile { c } => {
            let prof = profile.ok_or_else(|| Error::Config("c_profile datum needs a solved profile".into()))?;
            prof.values.iter().map(|v| c * v).collect()
        }
        Preset::Constant { c } => vec![c; grid.n],
    };
    if out.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
        return Err(Error::Config(format!("datum {} is not nonnegative and finite", preset.name())));
    }
    Ok(out)
}

/// `(h sum |u|^p phi)^{1/p}`.
pub fn weighted_norm(u: &[f64], phi1: &[f64], p: f64, grid: &Grid) -> f64 {
    let sum: f64 = u.iter().zip(phi1).map(|(&v, &w)| powf(v.abs(), p) * w).sum();
    powf(grid.h * sum, 1.0 / p)
}

/// `t_* = kappa_* |u0|_{L^1_phi}^{-(m-1)}`.
pub fn critical_time(u0: &[f64], phi1: &[f64], m: f64, kappa_star: f64, grid: &Grid) -> Result<f64> {
    let norm = weighted_norm(u0, phi1, 1.0, grid);
    if !(norm > 0.0) {
        return Err(Error::Domain("critical time needs a nontrivial datum".into()));
    }
    Ok(kappa_star * powf(norm, -(m - 1.0)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub u: Vec<f64>,
    pub iterations: usize,
    pub clip: f64,
}

fn flux(u: &[f64], m: f64, delta: f64) -> Vec<f64> {
    if delta == 0.0 {
        u.iter().map(|&v| powf(v, m)).collect()
    } else {
        u.iter().map(|&v| powf(v + delta, m) - powf(delta, m)).collect()
    }
}

fn residual(u: &[f64], u_prev: &[f64], dt: f64, a: &Matrix, m: f64, delta: f64) -> Vec<f64> {
    let au = a.matvec(&flux(u, m, delta));
    (0..u.len()).map(|i| u[i] + dt * au[i] - u_prev[i]).collect()
}

/// Newton direction for `J du = -F`, `J = I + dt A D`. The system is solved
/// in the symmetric form `(I + dt D^{1/2} A D^{1/2}) w = -D^{1/2} F`,
/// `du = D^{-1/2} w`, on the nodes where `D` is not negligible.
fn newton_direction(f: &[f64], d: &[f64], dt: f64, a: &Matrix) -> Result<Vec<f64>> {
    let n = f.len();
    let dmax = max_abs(d);
    let active: Vec<usize> = (0..n).filter(|&i| d[i] > ACTIVE_FLOOR * dmax).collect();
    let mut du = vec![0.0; n];
    if !active.is_empty() {
        let root: Vec<f64> = active.iter().map(|&i| libm::sqrt(d[i])).collect();
        let k = active.len();
        let mut mat = Matrix::zeros(k, k);
        for (p, &i) in active.iter().enumerate() {
            for (q, &j) in active.iter().enumerate().take(p + 1) {
                let v = dt * root[p] * a[(i, j)] * root[q];
                mat[(p, q)] = v + if p == q { 1.0 } else { 0.0 };
            }
        }
        let chol = Cholesky::factor(&mat)?;
        let mut w: Vec<f64> = active.iter().zip(&root).map(|(&i, r)| -r * f[i]).collect();
        chol.solve_in_place(&mut w);
        for (p, &i) in active.iter().enumerate() {
            du[i] = w[p] / root[p];
        }
    }
    let coupled: Vec<f64> = (0..n).map(|j| d[j] * du[j]).collect();
    let mut is_active = vec![false; n];
    active.iter().for_each(|&i| is_active[i] = true);
    for i in 0..n {
        if !is_active[i] {
            du[i] = -f[i] - dt * crate::linalg::dot(a.row(i), &coupled);
        }
    }
    Ok(du)
}

fn newton(u_prev: &[f64], dt: f64, op: &DiscreteOperator, cfg: &EvolutionConfig) -> Option<StepOutcome> {
    let (m, delta) = (cfg.m, cfg.delta);
    let scale = max_abs(u_prev);
    if scale == 0.0 {
        return Some(StepOutcome { u: vec![0.0; u_prev.len()], iterations: 0, clip: 0.0 });
    }
    let tol = cfg.newton_tol * scale;
    let mut u = u_prev.to_vec();
    let mut f = residual(&u, u_prev, dt, &op.a, m, delta);
    let mut r = max_abs(&f);
    let mut clip = 0.0;
    for it in 0..cfg.newton_max {
        if r <= tol {
            return Some(StepOutcome { u, iterations: it, clip });
        }
        let d: Vec<f64> = u.iter().map(|&v| m * powf(v + delta, m - 1.0)).collect();
        let du = newton_direction(&f, &d, dt, &op.a).ok()?;
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..=LINE_SEARCH_HALVINGS {
            let mut trial_clip: f64 = 0.0;
            let trial: Vec<f64> = u
                .iter()
                .zip(&du)
                .map(|(&v, &dv)| {
                    let x = v + lambda * dv;
                    if x < 0.0 {
                        trial_clip = trial_clip.max(-x);
                        0.0
                    } else {
                        x
                    }
                })
                .collect();
            let ft = residual(&trial, u_prev, dt, &op.a, m, delta);
            let rt = max_abs(&ft);
            if rt < r || rt <= tol {
                u = trial;
                f = ft;
                r = rt;
                clip = trial_clip;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            return None;
        }
    }
    if r <= tol {
        Some(StepOutcome { u, iterations: cfg.newton_max, clip })
    } else {
        None
    }
}

fn step_with_halving(
    u_prev: &[f64],
    dt: f64,
    op: &DiscreteOperator,
    cfg: &EvolutionConfig,
    depth: usize,
) -> Option<StepOutcome> {
    if let Some(out) = newton(u_prev, dt, op, cfg) {
        return Some(out);
    }
    if depth == DT_HALVINGS {
        return None;
    }
    let first = step_with_halving(u_prev, 0.5 * dt, op, cfg, depth + 1)?;
    let second = step_with_halving(&first.u, 0.5 * dt, op, cfg, depth + 1)?;
    Some(StepOutcome {
        u: second.u,
        iterations: first.iterations + second.iterations,
        clip: first.clip.max(second.clip),
    })
}

/// One backward Euler step: solves `u + dt A((u+delta)^m - delta^m) = u_prev`.
pub fn step_implicit(u_prev: &[f64], dt: f64, op: &DiscreteOperator, cfg: &EvolutionConfig) -> Result<StepOutcome> {
    if u_prev.iter().any(|&v| !(v >= 0.0)) {
        return Err(Error::Precondition("implicit step needs a nonnegative state".into()));
    }
    step_with_halving(u_prev, dt, op, cfg, 0).ok_or(Error::Step { t: f64::NAN, dt })
}

pub fn evolve(u0: &[f64], op: &DiscreteOperator, cfg: &EvolutionConfig) -> Result<Trajectory> {
    cfg.validate()?;
    if u0.len() != op.n() {
        return Err(Error::Config(format!("datum has {} values for a grid of {}", u0.len(), op.n())));
    }
    if u0.iter().any(|&v| !(v >= 0.0)) {
        return Err(Error::Precondition("initial datum must be nonnegative".into()));
    }
    let sched = cfg.schedule;
    let mut targets: Vec<f64> = cfg.probe_times.clone();
    targets.push(sched.t_end);
    targets.sort_by(|a, b| a.partial_cmp(b).unwrap_or(core::cmp::Ordering::Equal));
    targets.dedup();

    let mut traj = Trajectory {
        kind: op.kind,
        s: op.s,
        n: op.n(),
        config: cfg.clone(),
        times: vec![0.0],
        snapshots: vec![u0.to_vec()],
        newton_iterations: Vec::new(),
        clip_log: Vec::new(),
    };
    let clip_floor = cfg.newton_tol * max_abs(u0);
    let mut u = u0.to_vec();
    let mut t = 0.0;
    let mut dt = sched.dt0;
    let mut steps = 0usize;
    for &target in &targets {
        while t < target {
            let remaining = target - t;
            // stretch the last step rather than leave a sliver before a probe
            let (h, lands) = if dt >= remaining || remaining - dt < 0.1 * dt {
                (remaining, true)
            } else {
                (dt, false)
            };
            let out = step_implicit(&u, h, op, cfg).map_err(|e| match e {
                Error::Step { dt, .. } => Error::Step { t, dt },
                other => other,
            })?;
            t = if lands { target } else { t + h };
            steps += 1;
            traj.newton_iterations.push(out.iterations);
            if out.clip > clip_floor {
                traj.clip_log.push(ClipEvent { t, amount: out.clip });
            }
            u = out.u;
            if lands || steps.is_multiple_of(cfg.record_every) {
                traj.times.push(t);
                traj.snapshots.push(u.clone());
            }
            dt *= sched.growth;
        }
    }
    Ok(traj)
}

/// Reason string for trajectories a checker cannot use.
pub fn trivial_reason(traj: &Trajectory) -> Option<String> {
    if traj.len() < 2 {
        Some("trajectory has fewer than two snapshots".into())
    } else if traj.is_trivial() {
        Some("trivial (zero) trajectory".into())
    } else {
        None
    }
}
