//! Jump kernel and zero-order term read off a discrete operator, and
//! two-sided kernel and Green-function bound checks.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::math::powf;
use crate::operators::{DiscreteOperator, GreenMatrix, OperatorKind};
pub use crate::report::BoundCheckReport;

/// Pairs closer than this many cells are left out of bound checks.
pub const NEIGHBOR_EXCLUSION: usize = 2;
/// Largest accepted `c_high / c_low`.
pub const RATIO_CAP: f64 = 50.0;

#[derive(Debug, Clone)]
pub struct KernelDecomposition {
    /// `K_ij = -A_ij / h` off the diagonal, zero on it.
    pub k: Matrix,
    /// Row sums of `A`.
    pub b: Vec<f64>,
    pub h: f64,
}

impl KernelDecomposition {
    /// Rebuilds `A` from `A f = sum_j K_ij (f_i - f_j) h + B_i f_i`.
    pub fn reassemble(&self) -> Matrix {
        let n = self.b.len();
        let mut a = Matrix::zeros(n, n);
        for i in 0..n {
            let mut off = 0.0;
            for j in 0..n {
                if j != i {
                    a[(i, j)] = -self.k[(i, j)] * self.h;
                    off += self.k[(i, j)] * self.h;
                }
            }
            a[(i, i)] = off + self.b[i];
        }
        a
    }
}

pub fn decompose_kernel(op: &DiscreteOperator) -> Result<KernelDecomposition> {
    let n = op.n();
    let h = op.grid.h;
    let tol = 1e-12 * op.a.max_abs();
    let mut k = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let aij = op.a[(i, j)];
            if aij > tol {
                return Err(Error::Structural(format!(
                    "positive off-diagonal entry A[{i},{j}] = {aij:e} in {} operator",
                    op.kind
                )));
            }
            k[(i, j)] = (-aij).max(0.0) / h;
        }
    }
    Ok(KernelDecomposition { k, b: op.a.row_sums(), h })
}

fn separated_pairs(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n).flat_map(move |i| (0..n).filter(move |&j| i.abs_diff(j) > NEIGHBOR_EXCLUSION).map(move |j| (i, j)))
}

/// `min(phi / r^gamma, 1)`.
fn boundary_factor(phi: f64, r: f64, gamma: f64) -> f64 {
    (phi / powf(r, gamma)).min(1.0)
}

/// Kernel bounds. Quadrature operators are compared with the free kernel
/// `|x-y|^{-1-2s}` (which also certifies `inf K > 0`); the spectral operator
/// with the degenerate form `|x-y|^{-1-2s} min(phi(x)/|x-y|^gamma, 1)
/// min(phi(y)/|x-y|^gamma, 1)`, and its zero-order term with
/// `phi^{-2s/gamma}`.
pub fn check_kernel_bounds(kd: &KernelDecomposition, op: &DiscreteOperator) -> Vec<BoundCheckReport> {
    let n = op.n();
    let x = &op.grid.nodes;
    let s = op.s;
    let phi = &op.phi1;
    let mut out = Vec::new();
    match op.kind {
        OperatorKind::Rfl | OperatorKind::Cfl => {
            let min_k = separated_pairs(n).map(|(i, j)| kd.k[(i, j)]).fold(f64::INFINITY, f64::min);
            let ratios = separated_pairs(n).map(|(i, j)| kd.k[(i, j)] * powf((x[i] - x[j]).abs(), 1.0 + 2.0 * s));
            out.push(
                BoundCheckReport::from_ratios("kernel positivity", ratios, RATIO_CAP)
                    .with_note(format!("inf K = {min_k:e}")),
            );
        }
        OperatorKind::Sfl => {
            let g = op.gamma;
            let ratios = separated_pairs(n).map(|(i, j)| {
                let r = (x[i] - x[j]).abs();
                let form = powf(r, -1.0 - 2.0 * s) * boundary_factor(phi[i], r, g) * boundary_factor(phi[j], r, g);
                kd.k[(i, j)] / form
            });
            let lower = separated_pairs(n).map(|(i, j)| kd.k[(i, j)] / (phi[i] * phi[j])).fold(f64::INFINITY, f64::min);
            out.push(
                BoundCheckReport::from_ratios("degenerate spectral kernel", ratios, RATIO_CAP)
                    .with_note(format!("min K/(phi phi) = {lower:e}")),
            );
            let b_ratios = (0..n).map(|i| kd.b[i] * powf(phi[i], 2.0 * s / g));
            out.push(BoundCheckReport::from_ratios("zero-order term B", b_ratios, RATIO_CAP));
        }
    }
    out
}

/// Two-sided Green function bound
/// `G(x,y) ~ |x-y|^{2s-1} min(phi(x)/|x-y|^gamma, 1) min(phi(y)/|x-y|^gamma, 1)`
/// over well separated pairs. Only meaningful for `s < 1/2` in one dimension.
pub fn check_green_bounds(green: &GreenMatrix, op: &DiscreteOperator) -> BoundCheckReport {
    let name = "two-sided Green function";
    if 1.0 - 2.0 * op.s <= 0.0 {
        return BoundCheckReport::skipped(name, "one-dimensional Green bounds need s < 1/2");
    }
    let n = op.n();
    let x = &op.grid.nodes;
    let phi = &op.phi1;
    let g = op.gamma;
    let s = op.s;
    let ratios = separated_pairs(n).map(|(i, j)| {
        let r = (x[i] - x[j]).abs();
        let form = powf(r, 2.0 * s - 1.0) * boundary_factor(phi[i], r, g) * boundary_factor(phi[j], r, g);
        green.kernel(i, j) / form
    });
    let k2 = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| green.kernel(i, j) / (phi[i] * phi[j]))
        .fold(f64::INFINITY, f64::min);
    BoundCheckReport::from_ratios(name, ratios, RATIO_CAP).with_note(format!("lower constant min G/(phi phi) = {k2:e}"))
}
