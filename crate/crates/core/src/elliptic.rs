//! Stationary profile `L(S^m) = S`, its boundary bounds, separate-variables
//! solutions and the boundary exponent fit.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::linalg::{max_abs, max_abs_diff};
use crate::math::{line_fit, ln, powf};
use crate::operators::{DiscreteOperator, GreenMatrix};
use crate::report::BoundCheckReport;

pub const PROFILE_TOL: f64 = 1e-10;
pub const PROFILE_MAX_ITER: usize = 20_000;
/// Bracket start constants in units of the comparator.
pub const BRACKET_LOW: f64 = 1e-3;
pub const BRACKET_HIGH: f64 = 1e3;
/// Minimum number of nodes in a fit window.
pub const MIN_FIT_NODES: usize = 10;
/// Nodes nearest each boundary that a fit window must leave out.
pub const FIT_EXCLUDED_NODES: usize = 3;

/// Range of boundary distances `(d_min, d_max)` used by exponent fits.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FitWindow {
    pub d_min: f64,
    pub d_max: f64,
}

impl FitWindow {
    pub fn new(d_min: f64, d_max: f64) -> Self {
        FitWindow { d_min, d_max }
    }

    /// `(4h, 0.2)`.
    pub fn standard(grid: &Grid) -> Self {
        FitWindow { d_min: 4.0 * grid.h, d_max: 0.2 }
    }

    /// `(4h, 16h)`: the innermost window with enough nodes, used where a
    /// statement concerns the limit `dist -> 0`.
    pub fn boundary_layer(grid: &Grid) -> Self {
        FitWindow { d_min: 4.0 * grid.h, d_max: 16.0 * grid.h + 0.5 * grid.h }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ExponentFit {
    pub beta: f64,
    pub stderr: f64,
    pub points: usize,
}

/// Least-squares slope of `log v` against `log dist` over the nodes with
/// `dist` strictly inside the window, pooled over both ends.
pub fn boundary_exponent_fit(v: &[f64], grid: &Grid, window: FitWindow) -> Result<ExponentFit> {
    fit_against(v, &grid.dist, grid, window)
}

/// Slope of `log v` against `log reference` over the window nodes.
pub fn fit_against(v: &[f64], reference: &[f64], grid: &Grid, window: FitWindow) -> Result<ExponentFit> {
    if v.len() != grid.n || reference.len() != grid.n {
        return Err(Error::Fit(format!("vector length {} does not match grid size {}", v.len(), grid.n)));
    }
    if window.d_min < FIT_EXCLUDED_NODES as f64 * grid.h * (1.0 - 1e-12) {
        return Err(Error::Fit(format!(
            "fit window lower end {} includes the {FIT_EXCLUDED_NODES} nodes nearest the boundary",
            window.d_min
        )));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for i in 0..grid.n {
        let d = grid.dist[i];
        if d > window.d_min && d < window.d_max {
            if !(v[i] > 0.0) || !(reference[i] > 0.0) {
                return Err(Error::Fit(format!("nonpositive value {:e} at node {i} inside the fit window", v[i])));
            }
            xs.push(ln(reference[i]));
            ys.push(ln(v[i]));
        }
    }
    if xs.len() < MIN_FIT_NODES {
        return Err(Error::Fit(format!(
            "fit window ({}, {}) holds {} nodes, need {MIN_FIT_NODES}",
            window.d_min,
            window.d_max,
            xs.len()
        )));
    }
    let f = line_fit(&xs, &ys).ok_or_else(|| Error::Fit("degenerate fit abscissae".into()))?;
    Ok(ExponentFit { beta: f.slope, stderr: f.stderr, points: xs.len() })
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Profile {
    pub values: Vec<f64>,
    pub m: f64,
    /// `|A S^m - S|_inf / |S|_inf`.
    pub residual: f64,
    pub iterations: usize,
    /// Sup distance between the limits reached from below and from above,
    /// relative to `|S|_inf`.
    pub bracket_gap: f64,
}

struct Branch {
    w: Vec<f64>,
    residual: f64,
    history: Vec<f64>,
}

impl Branch {
    fn new(w: Vec<f64>) -> Self {
        Branch { w, residual: f64::INFINITY, history: Vec::new() }
    }

    /// One application of `W -> G W^{1/m}` followed by the residual.
    fn advance(&mut self, green: &GreenMatrix, a: &crate::linalg::Matrix, m: f64) {
        let root: Vec<f64> = self.w.iter().map(|&w| powf(w, 1.0 / m)).collect();
        let mut next = green.apply(&root);
        if oscillating(&self.history) {
            for (n, o) in next.iter_mut().zip(&self.w) {
                *n = libm::sqrt(*n * o);
            }
        }
        self.w = next;
        let s: Vec<f64> = self.w.iter().map(|&w| powf(w, 1.0 / m)).collect();
        let aw = a.matvec(&self.w);
        self.residual = max_abs_diff(&aw, &s) / max_abs(&s);
        self.history.push(self.residual);
    }
}

/// The residual failed to decrease at every one of the last 20 steps.
fn oscillating(history: &[f64]) -> bool {
    const WINDOW: usize = 20;
    if history.len() <= WINDOW {
        return false;
    }
    let tail = &history[history.len() - WINDOW - 1..];
    tail.windows(2).filter(|w| w[1] >= w[0]).count() >= WINDOW / 2
}

/// Solves `L(S^m) = S` by the monotone iteration `W -> G W^{1/m}` on
/// `W = S^m`, started from `(eps phi)^m` and `(C phi^{sigma/m})^m`.
pub fn solve_profile(green: &GreenMatrix, op: &DiscreteOperator, m: f64, tol: f64) -> Result<Profile> {
    if !(m > 1.0) {
        return Err(Error::Domain(format!("profile needs m > 1, got {m}")));
    }
    let sigma = op.sigma(m).sigma;
    let phi = &op.phi1;
    let mut low = Branch::new(phi.iter().map(|&p| powf(BRACKET_LOW * p, m)).collect());
    let mut high = Branch::new(phi.iter().map(|&p| powf(BRACKET_HIGH * powf(p, sigma / m), m)).collect());
    let mut it = 0;
    while it < PROFILE_MAX_ITER && (low.residual > tol || high.residual > tol) {
        it += 1;
        if low.residual > tol {
            low.advance(green, &op.a, m);
        }
        if high.residual > tol {
            high.advance(green, &op.a, m);
        }
        if low.w.iter().chain(&high.w).any(|w| !w.is_finite()) {
            return Err(Error::NotConverged { what: "profile iteration", iterations: it, residual: f64::NAN });
        }
    }
    let residual = low.residual.max(high.residual);
    if residual > tol {
        return Err(Error::NotConverged { what: "profile iteration", iterations: it, residual });
    }
    let s_low: Vec<f64> = low.w.iter().map(|&w| powf(w, 1.0 / m)).collect();
    let s_high: Vec<f64> = high.w.iter().map(|&w| powf(w, 1.0 / m)).collect();
    let scale = max_abs(&s_high);
    let bracket_gap = max_abs_diff(&s_low, &s_high) / scale;
    if bracket_gap > 10.0 * tol {
        return Err(Error::Numerical(format!(
            "profile brackets reached different limits (gap {bracket_gap:e})"
        )));
    }
    Ok(Profile { values: s_high, m, residual, iterations: it, bracket_gap })
}

/// Profile comparator `phi^{sigma/m}`, with the factor
/// `(1 + |log phi|)^{1/(m-1)}` in the critical case.
pub fn profile_comparator(op: &DiscreteOperator, m: f64) -> Vec<f64> {
    let sg = op.sigma(m);
    op.phi1
        .iter()
        .map(|&p| {
            let base = powf(p, sg.sigma / m);
            if sg.critical {
                base * powf(1.0 + ln(p).abs(), 1.0 / (m - 1.0))
            } else {
                base
            }
        })
        .collect()
}

pub fn verify_profile_bounds(profile: &Profile, op: &DiscreteOperator, m: f64) -> BoundCheckReport {
    let comp = profile_comparator(op, m);
    let name = if op.sigma(m).critical { "profile bound (logarithmic)" } else { "profile bound" };
    verify_profile_against(profile, &comp, name)
}

/// Ratio extrema of `S` against an arbitrary comparator.
pub fn verify_profile_against(profile: &Profile, comparator: &[f64], name: &str) -> BoundCheckReport {
    let ratios = profile.values.iter().zip(comparator).map(|(s, c)| s / c);
    BoundCheckReport::from_ratios(name, ratios, crate::kernels::RATIO_CAP)
}

/// Separate-variables solution `((m-1)(T+t))^{-1/(m-1)} S`; the factor `m-1`
/// makes it exact for `A S^m = S` and drops out at `m = 2`.
pub fn friendly_giant(profile: &Profile, shift: f64, t: f64) -> Result<Vec<f64>> {
    if !(shift >= 0.0) || !(shift + t > 0.0) {
        return Err(Error::Domain(format!("separate-variables solution needs T >= 0 and T + t > 0, got T = {shift}, t = {t}")));
    }
    let m = profile.m;
    let f = powf((m - 1.0) * (shift + t), -1.0 / (m - 1.0));
    Ok(profile.values.iter().map(|s| f * s).collect())
}
