//! Dense realizations of the restricted, spectral and censored fractional
//! Laplacians on the interior nodes of a [`Grid`].

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use num_rational::Rational64;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::linalg::{max_abs, max_abs_diff, Cholesky, Matrix};
use crate::math::{fractional_constant, powf, zeta};

/// Inverse power iteration stops once successive iterates agree to this.
pub const EIGEN_TOL: f64 = 1e-12;
pub const EIGEN_MAX_ITER: usize = 10_000;
/// Accepted eigen-residual `|A phi - lambda phi|_inf / lambda`.
pub const EIGEN_RESIDUAL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum OperatorKind {
    #[cfg_attr(feature = "serde", serde(rename = "RFL"))]
    Rfl,
    #[cfg_attr(feature = "serde", serde(rename = "SFL"))]
    Sfl,
    #[cfg_attr(feature = "serde", serde(rename = "CFL"))]
    Cfl,
}

impl OperatorKind {
    pub const ALL: [OperatorKind; 3] = [OperatorKind::Rfl, OperatorKind::Sfl, OperatorKind::Cfl];

    pub fn tag(self) -> &'static str {
        match self {
            OperatorKind::Rfl => "RFL",
            OperatorKind::Sfl => "SFL",
            OperatorKind::Cfl => "CFL",
        }
    }

    /// Checks that `s` is admissible for this kind.
    pub fn validate(self, s: f64) -> Result<()> {
        let ok = match self {
            OperatorKind::Rfl => s > 0.0 && s < 1.0,
            OperatorKind::Sfl => s > 0.0 && s <= 1.0,
            OperatorKind::Cfl => s > 0.5 && s < 1.0,
        };
        if ok {
            return Ok(());
        }
        Err(Error::Domain(match self {
            OperatorKind::Rfl => format!("RFL defined for 0 < s < 1, got s = {s}"),
            OperatorKind::Sfl => format!("SFL defined for 0 < s <= 1, got s = {s}"),
            OperatorKind::Cfl => format!("CFL defined for 1/2 < s < 1, got s = {s}"),
        }))
    }
}

impl fmt::Display for OperatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for OperatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "RFL" => Ok(OperatorKind::Rfl),
            "SFL" => Ok(OperatorKind::Sfl),
            "CFL" => Ok(OperatorKind::Cfl),
            other => Err(Error::Config(format!("unknown operator kind {other:?} (expected RFL, SFL or CFL)"))),
        }
    }
}

/// Boundary exponent `gamma` of the first eigenfunction, `phi1 ~ dist^gamma`.
pub fn gamma_of(kind: OperatorKind, s: f64) -> Result<f64> {
    kind.validate(s)?;
    Ok(match kind {
        OperatorKind::Rfl => s,
        OperatorKind::Sfl => 1.0,
        OperatorKind::Cfl => s - 0.5,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Sigma {
    pub sigma: f64,
    /// `2sm = gamma (m - 1)`: the logarithmic case.
    pub critical: bool,
}

/// `sigma = min(1, 2sm / (gamma (m - 1)))`.
pub fn sigma_of(s: f64, m: f64, gamma: f64) -> Sigma {
    let num = 2.0 * s * m;
    let den = gamma * (m - 1.0);
    let critical = (num - den).abs() <= 1e-12 * num.abs().max(den.abs());
    Sigma { sigma: if critical { 1.0 } else { (num / den).min(1.0) }, critical }
}

/// Exact rational version of [`sigma_of`].
pub fn sigma_of_exact(s: Rational64, m: Rational64, gamma: Rational64) -> (Rational64, bool) {
    let one = Rational64::from_integer(1);
    let ratio = Rational64::from_integer(2) * s * m / (gamma * (m - one));
    (if ratio < one { ratio } else { one }, ratio == one)
}

#[derive(Debug, Clone)]
pub struct DiscreteOperator {
    pub kind: OperatorKind,
    pub s: f64,
    pub grid: Grid,
    pub a: Matrix,
    pub gamma: f64,
    pub lambda1: f64,
    /// First eigenfunction, positive, with sup norm 1.
    pub phi1: Vec<f64>,
}

impl DiscreteOperator {
    pub fn n(&self) -> usize {
        self.grid.n
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        self.a.matvec(v)
    }

    /// Same operator multiplied by `c > 0`.
    pub fn scaled(&self, c: f64) -> DiscreteOperator {
        let mut out = self.clone();
        out.a.scale(c);
        out.lambda1 *= c;
        out
    }

    pub fn sigma(&self, m: f64) -> Sigma {
        sigma_of(self.s, m, self.gamma)
    }

    pub fn eigen_residual(&self) -> f64 {
        let av = self.a.matvec(&self.phi1);
        let lv: Vec<f64> = self.phi1.iter().map(|p| self.lambda1 * p).collect();
        max_abs_diff(&av, &lv)
    }
}

/// Second-difference matrix with `2/h^2` on the diagonal and `-1/h^2` next to it.
pub fn build_dirichlet_laplacian(grid: &Grid) -> Matrix {
    let c = 1.0 / (grid.h * grid.h);
    Matrix::from_fn(grid.n, grid.n, |i, j| match i.abs_diff(j) {
        0 => 2.0 * c,
        1 => -c,
        _ => 0.0,
    })
}

/// Closed-form eigenvalues `(4/h^2) sin^2(k pi / (2(n+1)))`, `k = 1..n`, of the
/// Dirichlet Laplacian matrix, in increasing order.
pub fn laplacian_eigenvalues(grid: &Grid) -> Vec<f64> {
    let n = grid.n;
    let c = 4.0 / (grid.h * grid.h);
    (1..=n)
        .map(|k| {
            let t = libm::sin(k as f64 * core::f64::consts::PI / (2.0 * (n as f64 + 1.0)));
            c * t * t
        })
        .collect()
}

/// Orthonormal eigenvector matrix, column `k-1` holding the `k`-th mode.
pub fn laplacian_eigenvectors(grid: &Grid) -> Matrix {
    let n = grid.n;
    let norm = libm::sqrt(2.0 / (n as f64 + 1.0));
    let w = core::f64::consts::PI / (n as f64 + 1.0);
    Matrix::from_fn(n, n, |i, k| {
        // use the smallest equivalent angle to keep sin accurate
        let p = ((i + 1) * (k + 1)) % (2 * (n + 1));
        norm * libm::sin(p as f64 * w)
    })
}

fn first_mode(grid: &Grid) -> Vec<f64> {
    let w = core::f64::consts::PI / (grid.n as f64 + 1.0);
    let v: Vec<f64> = (0..grid.n).map(|i| libm::sin((i + 1) as f64 * w)).collect();
    normalize_sup(v)
}

fn normalize_sup(mut v: Vec<f64>) -> Vec<f64> {
    let m = max_abs(&v);
    v.iter_mut().for_each(|x| *x /= m);
    v
}

/// Spectral fractional Laplacian `A = V diag(lambda_k^s) V^T`.
pub fn build_sfl(grid: &Grid, s: f64) -> Result<DiscreteOperator> {
    OperatorKind::Sfl.validate(s)?;
    let lam = laplacian_eigenvalues(grid);
    let a = if s == 1.0 {
        build_dirichlet_laplacian(grid)
    } else {
        let v = laplacian_eigenvectors(grid);
        let mut vs = v.clone();
        for i in 0..grid.n {
            for (x, l) in vs.row_mut(i).iter_mut().zip(&lam) {
                *x *= powf(*l, s);
            }
        }
        let mut a = vs.matmul(&v.transpose());
        symmetrize(&mut a);
        a
    };
    Ok(DiscreteOperator {
        kind: OperatorKind::Sfl,
        s,
        grid: grid.clone(),
        a,
        gamma: 1.0,
        lambda1: powf(lam[0], s),
        phi1: first_mode(grid),
    })
}

fn symmetrize(a: &mut Matrix) {
    for i in 0..a.rows() {
        for j in 0..i {
            let v = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
}

/// Regional quadrature of `P.V. int_Omega (f(x) - f(y)) |x - y|^{-1-2s} dy`
/// over the nodes `0..n+1` (boundary values zero), without the constant
/// `c_{1,s}`.
///
/// Weights are `h^{-2s} |i-j|^{-1-2s}`, halved at the two boundary nodes
/// (trapezoid ends). The nearest-neighbour weight carries the correction
/// `-zeta(2s-1) h^{-2s}`, the exact defect between the lattice sum of the
/// second-difference Taylor remainder and its integral near the singularity.
fn regional_matrix(grid: &Grid, s: f64) -> Matrix {
    let n = grid.n;
    let scale = powf(grid.h, -2.0 * s);
    let corr = -zeta(2.0 * s - 1.0);
    let mut w = vec![0.0; n + 2];
    for (k, wk) in w.iter_mut().enumerate().skip(1) {
        *wk = powf(k as f64, -1.0 - 2.0 * s);
    }
    let interior = |k: usize| scale * (w[k] + if k == 1 { corr } else { 0.0 });
    let boundary = |k: usize| scale * (0.5 * w[k] + if k == 1 { corr } else { 0.0 });
    let mut a = Matrix::zeros(n, n);
    for i in 0..n {
        let mut diag = 0.0;
        for j in 0..n {
            if j != i {
                let v = interior(i.abs_diff(j));
                a[(i, j)] = -v;
                diag += v;
            }
        }
        diag += boundary(i + 1) + boundary(n - i);
        a[(i, i)] = diag;
    }
    a
}

/// Exterior tail `int_{R \ Omega} |x - y|^{-1-2s} dy` at every node.
pub fn exterior_tail(grid: &Grid, s: f64) -> Vec<f64> {
    (0..grid.n)
        .map(|i| {
            let right = (grid.n - i) as f64 * grid.h;
            let left = (i + 1) as f64 * grid.h;
            (powf(right, -2.0 * s) + powf(left, -2.0 * s)) / (2.0 * s)
        })
        .collect()
}

/// Restricted fractional Laplacian (zero extension outside the interval).
pub fn build_rfl(grid: &Grid, s: f64) -> Result<DiscreteOperator> {
    OperatorKind::Rfl.validate(s)?;
    let c = fractional_constant(s);
    let mut a = regional_matrix(grid, s);
    for (i, t) in exterior_tail(grid, s).into_iter().enumerate() {
        a[(i, i)] += t;
    }
    a.scale(c);
    finish_quadrature_operator(OperatorKind::Rfl, s, grid, a)
}

/// Censored fractional Laplacian (integration restricted to the interval).
pub fn build_cfl(grid: &Grid, s: f64) -> Result<DiscreteOperator> {
    OperatorKind::Cfl.validate(s)?;
    let mut a = regional_matrix(grid, s);
    a.scale(fractional_constant(s));
    finish_quadrature_operator(OperatorKind::Cfl, s, grid, a)
}

fn finish_quadrature_operator(kind: OperatorKind, s: f64, grid: &Grid, a: Matrix) -> Result<DiscreteOperator> {
    let mut op = DiscreteOperator {
        kind,
        s,
        grid: grid.clone(),
        a,
        gamma: gamma_of(kind, s)?,
        lambda1: 0.0,
        phi1: Vec::new(),
    };
    let (lambda1, phi1) = compute_first_eigenpair(&op)?;
    op.lambda1 = lambda1;
    op.phi1 = phi1;
    Ok(op)
}

/// Builds the operator of the requested kind.
pub fn build_operator(kind: OperatorKind, grid: &Grid, s: f64) -> Result<DiscreteOperator> {
    match kind {
        OperatorKind::Rfl => build_rfl(grid, s),
        OperatorKind::Sfl => build_sfl(grid, s),
        OperatorKind::Cfl => build_cfl(grid, s),
    }
}

/// Smallest eigenvalue and the positive, sup-normalized eigenvector.
///
/// The spectral operator shares the Laplacian eigenbasis, so its pair is
/// read off in closed form. The other kinds use inverse power iteration.
pub fn compute_first_eigenpair(op: &DiscreteOperator) -> Result<(f64, Vec<f64>)> {
    if op.kind == OperatorKind::Sfl {
        let lam = laplacian_eigenvalues(&op.grid)[0];
        return Ok((powf(lam, op.s), first_mode(&op.grid)));
    }
    let n = op.n();
    let chol = Cholesky::factor(&op.a)?;
    let mut x = first_mode(&op.grid);
    let mut it = 0;
    let mut change = f64::INFINITY;
    while it < EIGEN_MAX_ITER {
        it += 1;
        let y = normalize_sup(chol.solve(&x));
        change = max_abs_diff(&y, &x);
        x = y;
        if change <= EIGEN_TOL {
            break;
        }
    }
    let ax = op.a.matvec(&x);
    let lambda = crate::linalg::dot(&ax, &x) / crate::linalg::dot(&x, &x);
    let residual = (0..n).fold(0.0f64, |r, i| r.max((ax[i] - lambda * x[i]).abs())) / lambda;
    if change > EIGEN_TOL && residual > EIGEN_RESIDUAL_TOL {
        return Err(Error::NotConverged { what: "inverse power iteration", iterations: it, residual });
    }
    if x.iter().any(|&v| v <= 0.0) {
        return Err(Error::Structural(format!("first eigenvector of {} is not positive", op.kind)));
    }
    Ok((lambda, x))
}

/// Inverse of the operator matrix. `G v = A^{-1} v` approximates
/// `int G(x, y) v(y) dy`, so the pointwise Green function is `G_ij / h`.
#[derive(Debug, Clone)]
pub struct GreenMatrix {
    pub g: Matrix,
    pub chol: Cholesky,
    pub h: f64,
}

impl GreenMatrix {
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        self.g.matvec(v)
    }

    pub fn solve(&self, v: &[f64]) -> Vec<f64> {
        self.chol.solve(v)
    }

    /// Pointwise Green function value `G(x_i, x_j)`.
    pub fn kernel(&self, i: usize, j: usize) -> f64 {
        self.g[(i, j)] / self.h
    }

    pub fn n(&self) -> usize {
        self.g.rows()
    }
}

pub fn compute_green(op: &DiscreteOperator) -> Result<GreenMatrix> {
    let chol = Cholesky::factor(&op.a)?;
    let g = chol.inverse();
    Ok(GreenMatrix { g, chol, h: op.grid.h })
}
