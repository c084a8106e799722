//! Checkers that evaluate decay, boundary and Harnack-type estimates on
//! computed trajectories and profiles.
//!
//! Every constant a statement only asserts to exist is fitted from the data
//! and reported. A bound that must hold for all times near the boundary is
//! judged on its time envelope: the per-node infimum (lower bounds) or
//! supremum (upper bounds) over the asserted time range of
//! `t^{1/(m-1)} u / comparator`. The bound passes when the fitted constant is
//! positive and finite and the envelope neither vanishes nor blows up toward
//! the boundary, that is when its slope against `dist` on the boundary-layer
//! window has the right sign within the exponent tolerance.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::elliptic::{boundary_exponent_fit, profile_comparator, ExponentFit, FitWindow, Profile};
use crate::error::{Error, Result};
use crate::evolution::{trivial_reason, weighted_norm, Trajectory};
use crate::grid::Grid;
use crate::linalg::{dot, max_abs};
use crate::math::{line_fit, ln, powf};
use crate::operators::{DiscreteOperator, GreenMatrix, OperatorKind};
pub use crate::report::Verdict;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Tolerances {
    /// Allowed deviation of fitted boundary exponents.
    pub exponent: f64,
    pub window: FitWindow,
    pub boundary_window: FitWindow,
    /// Relative decrease allowed in `t^{1/(m-1)} u`.
    pub monotonicity: f64,
    /// Relative slack for the Green-function identities.
    pub structural: f64,
    /// Relative slack of the Kato inequality.
    pub kato: f64,
    /// Relative deviation of the decay slope from `-1/(m-1)`.
    pub decay_slope: f64,
    /// Final relative distance to the profile.
    pub asymptotic: f64,
    /// Snapshots used by sweeps over pairs and triples of times.
    pub max_snapshots: usize,
}

impl Tolerances {
    pub fn for_grid(grid: &Grid) -> Self {
        Tolerances {
            exponent: if grid.n >= 512 { 0.05 } else { 0.1 },
            window: FitWindow::standard(grid),
            boundary_window: FitWindow::boundary_layer(grid),
            monotonicity: 1e-6,
            structural: 1e-9,
            kato: 1e-10,
            decay_slope: 0.03,
            asymptotic: 0.01,
            max_snapshots: 40,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Worst {
    pub t: f64,
    pub x: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EstimateReport {
    pub id: String,
    pub verdict: Verdict,
    pub constants: BTreeMap<String, f64>,
    pub worst: Option<Worst>,
    pub notes: Vec<String>,
}

impl EstimateReport {
    fn new(id: &str) -> Self {
        EstimateReport {
            id: id.to_string(),
            verdict: Verdict::Pass,
            constants: BTreeMap::new(),
            worst: None,
            notes: Vec::new(),
        }
    }

    fn skipped(id: &str, reason: impl Into<String>) -> Self {
        let mut r = Self::new(id);
        r.verdict = Verdict::Skipped;
        r.notes.push(reason.into());
        r
    }

    fn constant(&mut self, name: &str, value: f64) {
        self.constants.insert(name.to_string(), value);
    }

    fn note(&mut self, note: impl Into<String>) {
        self.notes.push(note.into());
    }

    /// Folds a partial result into the verdict.
    fn require(&mut self, ok: bool, failure: impl FnOnce() -> String) {
        if !ok {
            self.verdict = Verdict::Fail;
            self.notes.push(failure());
        }
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.constants.get(name).copied()
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ExponentSeries {
    pub times: Vec<f64>,
    pub beta: Vec<f64>,
    pub stderr: Vec<f64>,
    pub window: FitWindow,
}

impl ExponentSeries {
    pub fn at(&self, t: f64) -> Option<f64> {
        self.times.iter().position(|&x| (x - t).abs() <= 1e-9 * t.max(1e-300)).map(|i| self.beta[i])
    }
}

fn alpha(m: f64) -> f64 {
    1.0 / (m - 1.0)
}

/// `min(1, t/t_*)^{m/(m-1)}`.
fn onset_factor(t: f64, t_star: f64, m: f64) -> f64 {
    powf((t / t_star).min(1.0), m / (m - 1.0))
}

/// Nodes nearest `x = -1 + d` for `d = 0.1, ..., 0.9`.
pub fn probe_nodes(grid: &Grid) -> Vec<usize> {
    let mut v: Vec<usize> = (1..=9).map(|k| grid.nearest(-1.0 + 0.1 * k as f64)).collect();
    v.dedup();
    v
}

fn positive_times(traj: &Trajectory) -> impl Iterator<Item = usize> + '_ {
    (0..traj.len()).filter(move |&k| traj.times[k] > 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Side {
    Lower,
    Upper,
}

struct Envelope {
    constant: f64,
    slope: f64,
    worst: Worst,
    ok: bool,
    failure: Option<String>,
}

/// Per-node extremum over the selected snapshots of
/// `u(t, x) weight(t) / comparator(x)`, with its boundary slope verdict.
fn envelope(
    traj: &Trajectory,
    indices: &[usize],
    weight: impl Fn(f64) -> f64,
    comparator: &[f64],
    side: Side,
    grid: &Grid,
    tol: &Tolerances,
) -> Envelope {
    let n = grid.n;
    let init = if side == Side::Lower { f64::INFINITY } else { f64::NEG_INFINITY };
    let mut env = vec![init; n];
    let mut when = vec![f64::NAN; n];
    for &k in indices {
        let t = traj.times[k];
        let w = weight(t);
        for i in 0..n {
            let r = traj.snapshots[k][i] * w / comparator[i];
            let better = match side {
                Side::Lower => r < env[i],
                Side::Upper => r > env[i],
            };
            if better || when[i].is_nan() {
                env[i] = r;
                when[i] = t;
            }
        }
    }
    let mut worst_i = 0;
    for i in 0..n {
        let better = match side {
            Side::Lower => env[i] < env[worst_i],
            Side::Upper => env[i] > env[worst_i],
        };
        if better {
            worst_i = i;
        }
    }
    let constant = env[worst_i];
    let worst = Worst { t: when[worst_i], x: grid.nodes[worst_i], value: constant };
    let label = if side == Side::Lower { "lower" } else { "upper" };
    if indices.is_empty() {
        return Envelope { constant, slope: f64::NAN, worst, ok: false, failure: Some("no snapshots in range".into()) };
    }
    let finite = constant.is_finite() && (side == Side::Upper || constant > 0.0);
    match boundary_exponent_fit(&env, grid, tol.boundary_window) {
        Ok(fit) => {
            let slope_ok = match side {
                Side::Lower => fit.beta <= tol.exponent,
                Side::Upper => fit.beta >= -tol.exponent,
            };
            let failure = if !finite {
                Some(format!("{label} constant {constant:e} is not admissible"))
            } else if !slope_ok {
                Some(format!("{label} envelope has boundary slope {:.4} beyond tolerance {}", fit.beta, tol.exponent))
            } else {
                None
            };
            Envelope { constant, slope: fit.beta, worst, ok: finite && slope_ok, failure }
        }
        Err(e) => Envelope {
            constant,
            slope: f64::NAN,
            worst,
            ok: false,
            failure: Some(format!("{label} envelope fit failed: {e}")),
        },
    }
}

fn power(phi: &[f64], p: f64) -> Vec<f64> {
    phi.iter().map(|&v| powf(v, p)).collect()
}

/// `t ↦ t^{1/(m-1)} u(t, x)` is nondecreasing at every node.
pub fn check_time_monotonicity(traj: &Trajectory, m: f64, tol: &Tolerances) -> EstimateReport {
    let name = "time_monotonicity";
    if traj.len() < 2 {
        return EstimateReport::skipped(name, "fewer than two snapshots");
    }
    let a = alpha(m);
    let scaled = |k: usize, i: usize| powf(traj.times[k], a) * traj.snapshots[k][i];
    let scale = (0..traj.len()).map(|k| powf(traj.times[k], a) * max_abs(&traj.snapshots[k])).fold(0.0, f64::max);
    let nodes = crate::grid::Grid::uniform(traj.n).nodes;
    let mut worst = Worst { t: 0.0, x: 0.0, value: 0.0 };
    for k in 0..traj.len() - 1 {
        for i in 0..traj.n {
            let drop = scaled(k, i) - scaled(k + 1, i);
            if drop > worst.value {
                worst = Worst { t: traj.times[k + 1], x: nodes[i], value: drop };
            }
        }
    }
    let mut r = EstimateReport::new(name);
    r.constant("max_decrease", worst.value);
    r.constant("scale", scale);
    let limit = tol.monotonicity * scale;
    r.require(worst.value <= limit, || format!("t^(1/(m-1)) u decreases by {:e} (limit {limit:e})", worst.value));
    r.worst = Some(worst);
    r
}

fn green_rows(traj: &Trajectory, green: &GreenMatrix, probes: &[usize], indices: &[usize]) -> Vec<Vec<f64>> {
    indices
        .iter()
        .map(|&k| probes.iter().map(|&p| dot(green.g.row(p), &traj.snapshots[k])).collect())
        .collect()
}

/// The Green potential `int u(t) G(., x0)` is nonincreasing in time at the
/// probe nodes.
pub fn check_green_dissipation(traj: &Trajectory, green: &GreenMatrix, tol: &Tolerances) -> EstimateReport {
    let name = "green_dissipation";
    if traj.len() < 2 {
        return EstimateReport::skipped(name, "fewer than two snapshots");
    }
    let grid = crate::grid::Grid::uniform(traj.n);
    let probes = probe_nodes(&grid);
    let all: Vec<usize> = (0..traj.len()).collect();
    let pot = green_rows(traj, green, &probes, &all);
    let scale = pot.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut worst = Worst { t: 0.0, x: 0.0, value: 0.0 };
    for k in 0..traj.len() - 1 {
        for (p, &node) in probes.iter().enumerate() {
            let rise = pot[k + 1][p] - pot[k][p];
            if rise > worst.value {
                worst = Worst { t: traj.times[k + 1], x: grid.nodes[node], value: rise };
            }
        }
    }
    let mut r = EstimateReport::new(name);
    r.constant("max_increase", worst.value);
    let limit = tol.structural * scale;
    r.require(worst.value <= limit, || format!("Green potential increases by {:e} (limit {limit:e})", worst.value));
    r.worst = Some(worst);
    r
}

/// Two-sided bound on `int [u(t0) - u(t1)] G(., x0)` in terms of `u^m` at
/// `t0` and `t`, for all sampled `0 < t0 <= t1 <= t`.
pub fn check_pointwise_estimates(traj: &Trajectory, green: &GreenMatrix, m: f64, tol: &Tolerances) -> EstimateReport {
    let name = "pointwise_estimates";
    let pos: Vec<usize> = positive_times(traj).collect();
    if pos.len() < 3 {
        return EstimateReport::skipped(name, "fewer than three positive snapshot times");
    }
    let idx: Vec<usize> = traj.sample_indices(tol.max_snapshots).into_iter().filter(|&k| traj.times[k] > 0.0).collect();
    let grid = crate::grid::Grid::uniform(traj.n);
    let probes = probe_nodes(&grid);
    let pot = green_rows(traj, green, &probes, &idx);
    let a = alpha(m);
    let mut worst = Worst { t: 0.0, x: 0.0, value: 0.0 };
    let mut scale: f64 = 0.0;
    let mut triples = 0usize;
    for (i0, &k0) in idx.iter().enumerate() {
        let t0 = traj.times[k0];
        for (i1, &k1) in idx.iter().enumerate().skip(i0) {
            let t1 = traj.times[k1];
            for &k in idx.iter().skip(i1) {
                let t = traj.times[k];
                triples += 1;
                for (p, &node) in probes.iter().enumerate() {
                    let middle = pot[i0][p] - pot[i1][p];
                    let u0m = powf(traj.snapshots[k0][node], m);
                    let utm = powf(traj.snapshots[k][node], m);
                    let left = powf(t0 / t1, m * a) * (t1 - t0) * u0m;
                    let right = (m - 1.0) * powf(t, m * a) / powf(t0, a) * utm;
                    scale = scale.max(middle.abs()).max(left).max(right);
                    let v = (left - middle).max(middle - right);
                    if v > worst.value {
                        worst = Worst { t: t1, x: grid.nodes[node], value: v };
                    }
                }
            }
        }
    }
    let mut r = EstimateReport::new(name);
    r.constant("max_violation", worst.value);
    r.constant("triples", triples as f64);
    let limit = tol.structural.max(tol.monotonicity) * scale;
    r.require(worst.value <= limit, || format!("pointwise estimate violated by {:e} (limit {limit:e})", worst.value));
    r.worst = Some(worst);
    r
}

/// `|u(t)|_inf <= K1 t^{-1/(m-1)}`, and the late-time decay slope.
pub fn check_absolute_bound(traj: &Trajectory, m: f64, tol: &Tolerances) -> EstimateReport {
    let name = "absolute_bound";
    if let Some(reason) = trivial_reason(traj) {
        return EstimateReport::skipped(name, reason);
    }
    let a = alpha(m);
    let mut r = EstimateReport::new(name);
    let mut k1: f64 = 0.0;
    let mut at = 0.0;
    for k in positive_times(traj) {
        let v = max_abs(&traj.snapshots[k]) * powf(traj.times[k], a);
        if v > k1 {
            k1 = v;
            at = traj.times[k];
        }
    }
    r.constant("K1", k1);
    r.worst = Some(Worst { t: at, x: f64::NAN, value: k1 });
    r.require(k1.is_finite() && k1 > 0.0, || format!("K1 = {k1:e} is not finite and positive"));
    let t_end = *traj.times.last().unwrap_or(&0.0);
    let (xs, ys): (Vec<f64>, Vec<f64>) = positive_times(traj)
        .filter(|&k| traj.times[k] >= t_end / 10.0 * (1.0 - 1e-12))
        .map(|k| (ln(traj.times[k]), ln(max_abs(&traj.snapshots[k]))))
        .unzip();
    match line_fit(&xs, &ys) {
        Some(f) => {
            r.constant("decay_slope", f.slope);
            let dev = (f.slope + a).abs() / a;
            r.constant("decay_slope_relative_error", dev);
            r.require(dev <= tol.decay_slope, || {
                format!("decay slope {:.5} differs from {:.5} by {:.2}%", f.slope, -a, 100.0 * dev)
            });
        }
        None => r.require(false, || "not enough snapshots in the last decade".into()),
    }
    r
}

/// Comparator of the absolute boundary bound: `phi^{sigma/m}`, log-corrected
/// in the critical case.
pub fn upper_comparator(op: &DiscreteOperator, m: f64) -> Vec<f64> {
    profile_comparator(op, m)
}

/// `u(t, x) <= k1 t^{-1/(m-1)} phi^{sigma/m}` for all times.
pub fn check_upper_boundary(traj: &Trajectory, op: &DiscreteOperator, m: f64, tol: &Tolerances) -> EstimateReport {
    check_upper_boundary_with(traj, op, m, &upper_comparator(op, m), tol)
}

/// As [`check_upper_boundary`] with an explicit comparator.
pub fn check_upper_boundary_with(
    traj: &Trajectory,
    op: &DiscreteOperator,
    m: f64,
    comparator: &[f64],
    tol: &Tolerances,
) -> EstimateReport {
    let name = "upper_boundary";
    if let Some(reason) = trivial_reason(traj) {
        return EstimateReport::skipped(name, reason);
    }
    let a = alpha(m);
    let idx: Vec<usize> = positive_times(traj).collect();
    let env = envelope(traj, &idx, |t| powf(t, a), comparator, Side::Upper, &op.grid, tol);
    let mut r = EstimateReport::new(name);
    r.constant("k1", env.constant);
    r.constant("envelope_slope", env.slope);
    r.worst = Some(env.worst);
    r.require(env.ok, || env.failure.unwrap_or_default());
    r
}

/// `u(t, x) >= kappa0 min(1, t/t_*)^{m/(m-1)} phi(x) t^{-1/(m-1)}`.
pub fn check_universal_lower(
    traj: &Trajectory,
    op: &DiscreteOperator,
    m: f64,
    t_star: f64,
    tol: &Tolerances,
) -> EstimateReport {
    let name = "universal_lower";
    if let Some(reason) = trivial_reason(traj) {
        return EstimateReport::skipped(name, reason);
    }
    lower_check(name, traj, op, m, Some(t_star), 0.0, &op.phi1, tol, "kappa0")
}

/// As [`check_universal_lower`] against an explicit comparator phi-power.
pub fn check_lower_with(
    traj: &Trajectory,
    op: &DiscreteOperator,
    m: f64,
    t_star: f64,
    comparator: &[f64],
    tol: &Tolerances,
) -> EstimateReport {
    lower_check("lower_bound", traj, op, m, Some(t_star), 0.0, comparator, tol, "kappa")
}

#[allow(clippy::too_many_arguments)]
fn lower_check(
    name: &str,
    traj: &Trajectory,
    op: &DiscreteOperator,
    m: f64,
    onset: Option<f64>,
    from: f64,
    comparator: &[f64],
    tol: &Tolerances,
    constant: &str,
) -> EstimateReport {
    let a = alpha(m);
    let idx: Vec<usize> = positive_times(traj).filter(|&k| traj.times[k] >= from * (1.0 - 1e-12)).collect();
    let weight = |t: f64| match onset {
        Some(ts) => powf(t, a) / onset_factor(t, ts, m),
        None => powf(t, a),
    };
    let env = envelope(traj, &idx, weight, comparator, Side::Lower, &op.grid, tol);
    let mut r = EstimateReport::new(name);
    r.constant(constant, env.constant);
    r.constant("envelope_slope", env.slope);
    r.worst = Some(env.worst);
    r.require(env.ok, || env.failure.unwrap_or_default());
    r
}

/// Matching lower bound `u >= kappa phi^{sigma/m} t^{-1/(m-1)}`: for all
/// times with the onset factor on the quadrature operators, for `t >= t_*`
/// on the spectral operator when `sigma = 1`; not asserted when `sigma < 1`.
/// For the `t >= t_*` form the onset constant is fitted as well.
pub fn check_matching_lower(
    traj: &Trajectory,
    op: &DiscreteOperator,
    m: f64,
    t_star: f64,
    tol: &Tolerances,
) -> EstimateReport {
    let name = "matching_lower";
    if let Some(reason) = trivial_reason(traj) {
        return EstimateReport::skipped(name, reason);
    }
    let sg = op.sigma(m);
    match op.kind {
        OperatorKind::Rfl | OperatorKind::Cfl => {
            let comp = power(&op.phi1, sg.sigma / m);
            lower_check(name, traj, op, m, Some(t_star), 0.0, &comp, tol, "kappa1")
        }
        OperatorKind::Sfl => {
            if sg.sigma < 1.0 {
                return EstimateReport::skipped(name, "sigma < 1: matching lower bound fails near the boundary");
            }
            let comp = power(&op.phi1, 1.0 / m);
            fitted_onset(name, traj, t_star, |from| lower_check(name, traj, op, m, None, from, &comp, tol, "kappa2"))
        }
    }
}

/// Multiples of the conventional `t_*` tried when fitting the onset constant.
const ONSET_MULTIPLIERS: [f64; 11] = [1.0, 1.25, 1.5, 2.0, 2.5, 3.0, 4.0, 5.0, 6.0, 8.0, 10.0];

/// Runs a `t >= t_*` check for increasing multiples of `t_*` and keeps the
/// first that passes with at least a decade of later snapshots. The multiple
/// is reported as `kappa_star`, the fitted onset constant relative to the
/// configured convention.
fn fitted_onset(
    name: &str,
    traj: &Trajectory,
    t_star: f64,
    check: impl Fn(f64) -> EstimateReport,
) -> EstimateReport {
    let t_end = *traj.times.last().unwrap_or(&0.0);
    let mut first: Option<EstimateReport> = None;
    for c in ONSET_MULTIPLIERS {
        let from = c * t_star;
        if t_end < 10.0 * from * (1.0 - 1e-12) {
            break;
        }
        let mut r = check(from);
        r.constant("kappa_star", c);
        if r.passed() {
            if c > 1.0 {
                r.note(format!("onset fitted at {c} t_*"));
            }
            return r;
        }
        first.get_or_insert(r);
    }
    let mut r = first.unwrap_or_else(|| EstimateReport::new(name));
    r.require(false, || format!("no onset up to {} t_* with a decade of data after it", ONSET_MULTIPLIERS[ONSET_MULTIPLIERS.len() - 1]));
    r
}

/// Small data `u0 <= C0 phi`: `u^m <= C0 kappa t^{-1} phi`, the ratio to
/// `phi^{sigma/m}` vanishes at the boundary when `sigma < 1`, and the exponent
/// of a late lower bound `u(T) >= kappa phi^alpha` obeys `alpha >= 1 - 2s/gamma`.
pub fn check_counterexample_upper(
    traj: &Trajectory,
    op: &DiscreteOperator,
    m: f64,
    c0: f64,
    tol: &Tolerances,
) -> Result<EstimateReport> {
    let name = "counterexample_upper";
    let u0 = traj.initial();
    if let Some(i) = (0..op.n()).find(|&i| u0[i] > c0 * op.phi1[i] * (1.0 + 1e-12)) {
        return Err(Error::Precondition(format!(
            "datum {:e} exceeds C0 phi1 = {:e} at node {i}",
            u0[i],
            c0 * op.phi1[i]
        )));
    }
    if let Some(reason) = trivial_reason(traj) {
        return Ok(EstimateReport::skipped(name, reason));
    }
    let grid = &op.grid;
    let sg = op.sigma(m);
    let mut r = EstimateReport::new(name);
    let idx: Vec<usize> = positive_times(traj).collect();
    let comp: Vec<f64> = op.phi1.iter().map(|p| c0 * p).collect();
    let mut kappa: f64 = 0.0;
    let mut worst = Worst { t: 0.0, x: 0.0, value: 0.0 };
    for &k in &idx {
        let t = traj.times[k];
        for i in 0..grid.n {
            let v = powf(traj.snapshots[k][i], m) * t / comp[i];
            if v > kappa {
                kappa = v;
                worst = Worst { t, x: grid.nodes[i], value: v };
            }
        }
    }
    r.constant("kappa_hat", kappa);
    r.worst = Some(worst);
    r.require(kappa.is_finite(), || "kappa_hat is not finite".into());

    let probes: Vec<usize> = probe_snapshots(traj);
    let mut min_um_exponent = f64::INFINITY;
    let mut min_vanishing_slope = f64::INFINITY;
    let sigma_comp = profile_comparator(op, m);
    for &k in &probes {
        let um: Vec<f64> = traj.snapshots[k].iter().map(|&v| powf(v, m)).collect();
        match crate::elliptic::fit_against(&um, &op.phi1, grid, tol.boundary_window) {
            Ok(f) => min_um_exponent = min_um_exponent.min(f.beta),
            Err(e) => r.require(false, || format!("u^m fit at t = {}: {e}", traj.times[k])),
        }
        let ratio: Vec<f64> = traj.snapshots[k].iter().zip(&sigma_comp).map(|(u, c)| u / c).collect();
        if let Ok(f) = boundary_exponent_fit(&ratio, grid, tol.boundary_window) {
            min_vanishing_slope = min_vanishing_slope.min(f.beta);
        }
    }
    r.constant("min_um_exponent", min_um_exponent);
    r.require(min_um_exponent >= 1.0 - tol.exponent, || {
        format!("u^m decays like phi^{min_um_exponent:.4} at a probe time, slower than phi")
    });
    if sg.sigma < 1.0 || sg.critical {
        r.constant("min_vanishing_slope", min_vanishing_slope);
        r.require(min_vanishing_slope >= tol.exponent, || {
            format!("u / phi^(sigma/m) does not vanish at the boundary (slope {min_vanishing_slope:.4})")
        });
    }
    let eta = 1.0 - 2.0 * op.s / op.gamma;
    r.constant("alpha_bound", eta);
    if let Some(&last) = probes.last() {
        if let Ok(f) = boundary_exponent_fit(&traj.snapshots[last], grid, tol.boundary_window) {
            let alpha_late = f.beta / op.gamma;
            r.constant("late_exponent", alpha_late);
            r.constant("late_time", traj.times[last]);
            let respects = alpha_late >= eta - tol.exponent;
            r.note(format!(
                "late exponent {alpha_late:.4} at t = {} {} alpha >= 1 - 2s/gamma = {eta:.4}",
                traj.times[last],
                if respects { "respects" } else { "violates" }
            ));
            if sg.sigma >= 1.0 {
                r.note("sigma = 1: the constraint 1 - 2s/gamma < 1/m adds nothing to the matching lower bound");
            }
        }
    }
    Ok(r)
}

/// Probe-time snapshots, or every positive-time snapshot if none were requested.
fn probe_snapshots(traj: &Trajectory) -> Vec<usize> {
    let mut v: Vec<usize> = traj.config.probe_times.iter().filter_map(|&p| traj.index_of(p)).collect();
    v.sort_unstable();
    v.dedup();
    if v.is_empty() {
        v = positive_times(traj).collect();
    }
    v
}

/// `sigma < 1` and `u0 <= A phi^{1-2s/gamma}`: the supersolution
/// `phi^{1-2s/gamma} [A^{1-m} - C t]^{-1/(m-1)}` dominates `u` up to `T_A/2`.
pub fn check_small_data_supersolution(
    traj: &Trajectory,
    op: &DiscreteOperator,
    m: f64,
    amp: f64,
    tol: &Tolerances,
) -> Result<EstimateReport> {
    let name = "small_data_supersolution";
    let sg = op.sigma(m);
    if sg.sigma >= 1.0 {
        return Ok(EstimateReport::skipped(name, "needs sigma < 1"));
    }
    let eta = 1.0 - 2.0 * op.s / op.gamma;
    let comp = power(&op.phi1, eta);
    let u0 = traj.initial();
    if let Some(i) = (0..op.n()).find(|&i| u0[i] > amp * comp[i] * (1.0 + 1e-12)) {
        return Err(Error::Precondition(format!("datum exceeds A phi1^(1-2s/gamma) at node {i}")));
    }
    if let Some(reason) = trivial_reason(traj) {
        return Ok(EstimateReport::skipped(name, reason));
    }
    let grid = &op.grid;
    let base = powf(amp, 1.0 - m);
    // smallest C making u <= comp [A^{1-m} - C t]^{-1/(m-1)} on the horizon
    let fit_c = |horizon: f64| -> (f64, Worst) {
        let mut c = 0.0f64;
        let mut worst = Worst { t: 0.0, x: 0.0, value: 0.0 };
        for k in positive_times(traj).filter(|&k| traj.times[k] <= horizon) {
            let t = traj.times[k];
            for i in 0..grid.n {
                let u = traj.snapshots[k][i];
                if u <= 0.0 {
                    continue;
                }
                let need = (base - powf(comp[i] / u, m - 1.0)) / t;
                if need > c {
                    c = need;
                    worst = Worst { t, x: grid.nodes[i], value: need };
                }
            }
        }
        (c, worst)
    };
    let t_end = *traj.times.last().unwrap_or(&0.0);
    let mut horizon = t_end;
    let (mut c, mut worst) = fit_c(horizon);
    for _ in 0..50 {
        let t_a = if c > 0.0 { base / c } else { f64::INFINITY };
        if horizon <= 0.5 * t_a * (1.0 + 1e-12) {
            break;
        }
        horizon = 0.5 * t_a;
        (c, worst) = fit_c(horizon);
    }
    let c = c.max(f64::MIN_POSITIVE);
    let t_a = base / c;
    let mut r = EstimateReport::new(name);
    r.constant("C_tilde", c);
    r.constant("T_A", t_a);
    r.constant("horizon", horizon.min(0.5 * t_a));
    r.worst = Some(worst);
    r.require(c.is_finite(), || "no finite C_tilde".into());
    if let Some(k) = positive_times(traj).next() {
        match boundary_exponent_fit(&traj.snapshots[k], grid, tol.window) {
            Ok(f) => {
                r.constant("early_exponent", f.beta);
                let target = eta * op.gamma;
                r.require((f.beta - target).abs() <= tol.exponent, || {
                    format!("early exponent {:.4} differs from {target:.4}", f.beta)
                });
            }
            Err(e) => r.require(false, || format!("early exponent fit: {e}")),
        }
    }
    Ok(r)
}

/// Half-mass retention of the `phi`-weighted mass. The retention window
/// from `tau0` is compared with `[(2 Kbar)^{1/(2s theta)} |u(tau0)|^{m-1}]^{-1}`,
/// `theta = 1/(2s + (1 + gamma)(m - 1))`, and the smallest admissible `Kbar`
/// is reported.
pub fn check_backward_weighted_mass(traj: &Trajectory, op: &DiscreteOperator, m: f64, tol: &Tolerances) -> EstimateReport {
    let name = "backward_weighted_mass";
    if let Some(reason) = trivial_reason(traj) {
        return EstimateReport::skipped(name, reason);
    }
    let grid = &op.grid;
    let mass: Vec<f64> = traj.snapshots.iter().map(|u| weighted_norm(u, &op.phi1, 1.0, grid)).collect();
    let mut r = EstimateReport::new(name);
    let rise = mass.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    r.constant("max_mass_increase", rise);
    r.require(rise <= tol.structural * mass[0].max(f64::MIN_POSITIVE), || format!("weighted mass increases by {rise:e}"));
    let theta = 1.0 / (2.0 * op.s + (1.0 + op.gamma) * (m - 1.0));
    r.constant("theta", theta);
    let mut kbar: f64 = 0.0;
    let mut first_window = f64::NAN;
    for k0 in 0..traj.len() {
        if mass[k0] <= 0.0 {
            continue;
        }
        let Some(w) = half_mass_time(&traj.times, &mass, k0) else { continue };
        let window = w - traj.times[k0];
        if k0 == 0 {
            first_window = window;
        }
        let kb = 0.5 * powf(1.0 / (window * powf(mass[k0], m - 1.0)), 2.0 * op.s * theta);
        kbar = kbar.max(kb);
    }
    r.constant("half_mass_window", first_window);
    r.constant("initial_mass", mass[0]);
    r.constant("Kbar", kbar);
    r.require(first_window.is_finite() && first_window > 0.0, || "weighted mass never halves within the run".into());
    r
}

/// First time after `times[k0]` at which `mass` drops to half its value there,
/// by linear interpolation between snapshots.
fn half_mass_time(times: &[f64], mass: &[f64], k0: usize) -> Option<f64> {
    let half = 0.5 * mass[k0];
    for k in k0 + 1..times.len() {
        if mass[k] <= half {
            let (t0, t1, m0, m1) = (times[k - 1], times[k], mass[k - 1], mass[k]);
            return Some(if m0 == m1 { t1 } else { t0 + (m0 - half) / (m0 - m1) * (t1 - t0) });
        }
    }
    None
}

/// Half-mass windows of two runs whose data differ in size scale as
/// `|u0|^{-(m-1)}`, within a factor 2.
pub fn compare_window_scaling(a: &EstimateReport, b: &EstimateReport, m: f64) -> EstimateReport {
    scaling_report("weighted_mass_window_scaling", a, b, "half_mass_window", "initial_mass", m)
}

fn scaling_report(name: &str, a: &EstimateReport, b: &EstimateReport, key: &str, norm: &str, m: f64) -> EstimateReport {
    let mut r = EstimateReport::new(name);
    let (Some(la), Some(lb), Some(na), Some(nb)) = (a.get(key), b.get(key), a.get(norm), b.get(norm)) else {
        r.require(false, || format!("missing {key} or {norm}"));
        return r;
    };
    let predicted = powf(nb / na, -(m - 1.0));
    let observed = lb / la;
    r.constant("predicted_ratio", predicted);
    r.constant("observed_ratio", observed);
    let q = observed / predicted;
    r.require(q.is_finite() && (0.5..=2.0).contains(&q), || format!("ratio {observed:e} vs predicted {predicted:e}"));
    r
}

/// `m f^{m-1} A f - A f^m >= 0` componentwise for positive `f`.
pub fn check_kato(op: &DiscreteOperator, m: f64, f: &[f64], tol: &Tolerances) -> EstimateReport {
    let name = "kato";
    let mut r = EstimateReport::new(name);
    if f.iter().any(|&v| !(v > 0.0)) {
        return EstimateReport::skipped(name, "needs a positive vector");
    }
    let af = op.apply(f);
    let fm: Vec<f64> = f.iter().map(|&v| powf(v, m)).collect();
    let afm = op.apply(&fm);
    let mut worst = Worst { t: f64::NAN, x: 0.0, value: f64::INFINITY };
    let mut scale: f64 = 0.0;
    for i in 0..f.len() {
        let lhs = m * powf(f[i], m - 1.0) * af[i];
        scale = scale.max(lhs.abs()).max(afm[i].abs());
        let slack = lhs - afm[i];
        if slack < worst.value {
            worst = Worst { t: f64::NAN, x: op.grid.nodes[i], value: slack };
        }
    }
    r.constant("min_slack", worst.value);
    r.constant("scale", scale);
    r.worst = Some(worst);
    let limit = -tol.kato * scale;
    r.require(worst.value >= limit, || format!("Kato slack {:e} below {limit:e}", worst.value));
    r
}

/// Global Harnack bounds. Quadrature operators: matching two-sided bound with
/// `phi^{sigma/m}` for all times. Spectral with `sigma = 1`, not critical:
/// matching bound for `t >= t_*`. Otherwise the non-matching pair `phi` below,
/// `phi^{sigma/m}` above, unless the datum itself is bounded below by the
/// matching comparator.
pub fn check_ghp(traj: &Trajectory, op: &DiscreteOperator, m: f64, t_star: f64, tol: &Tolerances) -> EstimateReport {
    let name = "ghp";
    if let Some(reason) = trivial_reason(traj) {
        return EstimateReport::skipped(name, reason);
    }
    let sg = op.sigma(m);
    let a = alpha(m);
    let grid = &op.grid;
    let matching = profile_comparator(op, m);
    let datum_dominates = {
        let u0 = traj.initial();
        let ratio: Vec<f64> = u0.iter().zip(&matching).map(|(u, c)| u / c).collect();
        ratio.iter().all(|&v| v > 0.0)
            && boundary_exponent_fit(&ratio, grid, tol.boundary_window).map(|f| f.beta <= tol.exponent).unwrap_or(false)
    };
    let all: Vec<usize> = positive_times(traj).collect();
    let (form, lower_comp, onset, late_form) = match op.kind {
        OperatorKind::Rfl | OperatorKind::Cfl => ("matching, all t", matching.clone(), Some(t_star), false),
        OperatorKind::Sfl if (sg.sigma >= 1.0 && !sg.critical) || datum_dominates => {
            ("matching, t >= t_*", matching.clone(), None, true)
        }
        OperatorKind::Sfl => ("non-matching", op.phi1.clone(), Some(t_star), false),
    };
    let (lower_idx, upper_idx) = (all.clone(), all);
    let run = |from: f64| {
        let start = |idx: &[usize]| -> Vec<usize> {
            idx.iter().copied().filter(|&k| traj.times[k] >= from * (1.0 - 1e-12)).collect()
        };
        let weight_low = |t: f64| match onset {
            Some(ts) => powf(t, a) / onset_factor(t, ts, m),
            None => powf(t, a),
        };
        let low = envelope(traj, &start(&lower_idx), weight_low, &lower_comp, Side::Lower, grid, tol);
        let high = envelope(traj, &start(&upper_idx), |t| powf(t, a), &matching, Side::Upper, grid, tol);
        let mut r = EstimateReport::new(name);
        r.note(format!("form: {form}"));
        r.constant("kappa_low", low.constant);
        r.constant("kappa_high", high.constant);
        r.constant("lower_slope", low.slope);
        r.constant("upper_slope", high.slope);
        r.worst = Some(low.worst);
        r.require(low.ok, || low.failure.unwrap_or_default());
        r.require(high.ok, || high.failure.unwrap_or_default());
        r
    };
    if late_form {
        fitted_onset(name, traj, t_star, run)
    } else {
        run(0.0)
    }
}

/// Local Harnack inequality on the ball `B_R(center)` with `B_2R` inside the
/// interval, and its forward-backward form for `t' = t + h`, `h/t` in `[1/2, 1]`.
pub fn check_local_harnack(
    traj: &Trajectory,
    op: &DiscreteOperator,
    t_star: f64,
    center: f64,
    radius: f64,
) -> Result<EstimateReport> {
    let name = "local_harnack";
    if !(radius >= 0.0) || center.abs() + 2.0 * radius >= 1.0 {
        return Err(Error::Precondition(format!("ball ({center}, {radius}) with doubled radius leaves the interval")));
    }
    if let Some(reason) = trivial_reason(traj) {
        return Ok(EstimateReport::skipped(name, reason));
    }
    let m = traj.m();
    let grid = &op.grid;
    let mut nodes: Vec<usize> = (0..grid.n).filter(|&i| (grid.nodes[i] - center).abs() <= radius).collect();
    if nodes.is_empty() {
        nodes.push(grid.nearest(center));
    }
    let sup_inf = |k: usize| {
        let u = &traj.snapshots[k];
        let sup = nodes.iter().map(|&i| u[i]).fold(f64::NEG_INFINITY, f64::max);
        let inf = nodes.iter().map(|&i| u[i]).fold(f64::INFINITY, f64::min);
        (sup, inf)
    };
    let mut r = EstimateReport::new(name);
    let idx: Vec<usize> = positive_times(traj).collect();
    let mut h_hat: f64 = 0.0;
    for &k in &idx {
        let (sup, inf) = sup_inf(k);
        let v = sup / inf * onset_factor(traj.times[k], t_star, m);
        if !(v.is_finite()) {
            r.require(false, || format!("zero infimum on the ball at t = {}", traj.times[k]));
            return Ok(r);
        }
        if v > h_hat {
            h_hat = v;
            r.worst = Some(Worst { t: traj.times[k], x: center, value: v });
        }
    }
    r.constant("H_hat", h_hat);
    let sample = traj.sample_indices(60);
    let mut pairs = 0usize;
    let mut worst_excess: f64 = 0.0;
    for &k in sample.iter().filter(|&&k| traj.times[k] > 0.0) {
        let t = traj.times[k];
        let (sup, _) = sup_inf(k);
        for &k2 in sample.iter().filter(|&&j| j > k) {
            let h = traj.times[k2] - t;
            if !(h >= 0.5 * t * (1.0 - 1e-9) && h <= t * (1.0 + 1e-9)) {
                continue;
            }
            pairs += 1;
            let (_, inf_later) = sup_inf(k2);
            let factor = powf((1.0 + h / t) / powf(onset_factor(t, t_star, m), m - 1.0), 1.0 / (m - 1.0));
            let excess = sup / (h_hat * factor * inf_later) - 1.0;
            worst_excess = worst_excess.max(excess);
        }
    }
    r.constant("forward_backward_pairs", pairs as f64);
    r.constant("forward_backward_excess", worst_excess);
    r.require(h_hat.is_finite() && h_hat >= 1.0 - 1e-12, || format!("H_hat = {h_hat:e} is not admissible"));
    r.require(worst_excess <= 1e-6, || format!("forward-backward form exceeded by {:.3e} (relative)", worst_excess));
    Ok(r)
}

/// Convergence of `t^{1/(m-1)} u` to the profile, and (when a matching
/// Harnack bound applies) the relative-error envelope
/// `|u/U - 1| <= 2/(m-1) t0/(t0 + t)` with fitted `t0`.
pub fn check_asymptotics(traj: &Trajectory, profile: &Profile, matching: bool, tol: &Tolerances) -> EstimateReport {
    let name = "asymptotics";
    if let Some(reason) = trivial_reason(traj) {
        return EstimateReport::skipped(name, reason);
    }
    let m = profile.m;
    let a = alpha(m);
    // t^{1/(m-1)} U_0 with A S^m = S
    let limit = powf(m - 1.0, -a);
    let s_scaled: Vec<f64> = profile.values.iter().map(|v| limit * v).collect();
    let s = &s_scaled;
    let s_norm = max_abs(s);
    let idx: Vec<usize> = positive_times(traj).collect();
    let err: Vec<f64> = idx
        .iter()
        .map(|&k| {
            let f = powf(traj.times[k], a);
            traj.snapshots[k].iter().zip(s).fold(0.0f64, |e, (u, sv)| e.max((f * u - sv).abs())) / s_norm
        })
        .collect();
    let mut r = EstimateReport::new(name);
    let t_end = traj.times[*idx.last().unwrap()];
    let final_err = *err.last().unwrap();
    r.constant("final_error", final_err);
    r.constant("t_end", t_end);
    r.require(final_err <= tol.asymptotic, || format!("final relative error {final_err:.4e} above {}", tol.asymptotic));
    // once below the tolerance the error must stay there; before that, it
    // may not rise over the last half-decade. Rises below the tolerance are
    // scheme noise.
    let settle = (0..err.len()).rev().take_while(|&k| err[k] <= tol.asymptotic).last();
    r.constant("settle_time", settle.map_or(f64::INFINITY, |k| traj.times[idx[k]]));
    let start = t_end / libm::sqrt(10.0);
    let tail: Vec<f64> = idx.iter().zip(&err).filter(|(&k, _)| traj.times[k] >= start).map(|(_, &e)| e).collect();
    let rises = tail.windows(2).filter(|w| w[1] > tol.asymptotic && w[1] > w[0] * (1.0 + 1e-9)).count();
    r.constant("late_increases", rises as f64);
    r.require(rises == 0, || format!("error above {} increases {rises} times over the last half-decade", tol.asymptotic));
    if !matching {
        r.note("relative-error envelope skipped: no matching Harnack bound");
        return r;
    }
    let c = 2.0 / (m - 1.0);
    let rel: Vec<(f64, f64)> = idx
        .iter()
        .map(|&k| {
            let t = traj.times[k];
            let f = powf(t, a);
            let e = traj.snapshots[k].iter().zip(s).fold(0.0f64, |e, (u, sv)| e.max((f * u / sv - 1.0).abs()));
            (t, e)
        })
        .collect();
    let t0 = fit_envelope_t0(&rel, c);
    r.constant("t0", t0);
    r.constant("initial_mass", f64::NAN);
    r.require(t0.is_finite(), || "relative error never enters the envelope".into());
    r
}

/// Smallest `t0` with `e(t) <= c t0/(t0 + t)` at every sample `t >= t0`.
fn fit_envelope_t0(rel: &[(f64, f64)], c: f64) -> f64 {
    let need = |t: f64, e: f64| if e < c { e * t / (c - e) } else { f64::INFINITY };
    let mut cand: Vec<f64> = vec![0.0];
    cand.extend(rel.iter().map(|&(t, _)| t));
    for &start in &cand {
        let req = rel.iter().filter(|&&(t, _)| t >= start).map(|&(t, e)| need(t, e)).fold(0.0, f64::max);
        // t0 must cover the requirement and not exceed the next sample boundary
        let t0 = req.max(start);
        let later_ok = rel.iter().filter(|&&(t, _)| t >= t0).all(|&(t, e)| e <= c * t0 / (t0 + t) * (1.0 + 1e-12));
        if req.is_finite() && later_ok {
            return t0;
        }
    }
    f64::INFINITY
}

/// Envelope onset times of two runs scale as `|u0|^{-(m-1)}` within a factor 2.
pub fn compare_asymptotic_onset(a: &EstimateReport, norm_a: f64, b: &EstimateReport, norm_b: f64, m: f64) -> EstimateReport {
    let mut a = a.clone();
    let mut b = b.clone();
    a.constant("initial_mass", norm_a);
    b.constant("initial_mass", norm_b);
    scaling_report("asymptotic_onset_scaling", &a, &b, "t0", "initial_mass", m)
}

/// Boundary exponent of every probe-time snapshot (all positive times if no
/// probes were requested).
pub fn exponent_timeseries(traj: &Trajectory, grid: &Grid, window: FitWindow) -> Result<ExponentSeries> {
    let idx = probe_snapshots(traj);
    let mut out = ExponentSeries { times: Vec::new(), beta: Vec::new(), stderr: Vec::new(), window };
    for k in idx {
        let ExponentFit { beta, stderr, .. } = boundary_exponent_fit(&traj.snapshots[k], grid, window)?;
        out.times.push(traj.times[k]);
        out.beta.push(beta);
        out.stderr.push(stderr);
    }
    Ok(out)
}
