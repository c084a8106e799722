//! Uniform interior mesh of (-1, 1).

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Smallest grid accepted by [`build_grid`].
pub const MIN_NODES: usize = 8;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Grid {
    pub n: usize,
    pub h: f64,
    pub nodes: Vec<f64>,
    pub dist: Vec<f64>,
}

impl Grid {
    /// Mesh with `n` interior nodes and spacing `h = 2/(n+1)`, without the
    /// size check of [`build_grid`].
    pub fn uniform(n: usize) -> Self {
        let h = 2.0 / (n as f64 + 1.0);
        // node i sits (i+1) cells from the left end; mirror pairs share the
        // same rounding so the mesh is exactly symmetric
        let nodes = (0..n)
            .map(|i| {
                let left = (i + 1) as f64 * h;
                let right = (n - i) as f64 * h;
                0.5 * (left - right)
            })
            .collect();
        let dist = (0..n).map(|i| (i + 1).min(n - i) as f64 * h).collect();
        Grid { n, h, nodes, dist }
    }

    /// Index of the node closest to `x`.
    pub fn nearest(&self, x: f64) -> usize {
        let mut best = 0;
        for (i, &xi) in self.nodes.iter().enumerate() {
            if (xi - x).abs() < (self.nodes[best] - x).abs() {
                best = i;
            }
        }
        best
    }

    /// Trapezoid integral of nodal values (the boundary values are zero).
    pub fn integrate(&self, v: &[f64]) -> f64 {
        self.h * v.iter().sum::<f64>()
    }
}

pub fn build_grid(n: usize) -> Result<Grid> {
    if n < MIN_NODES {
        return Err(Error::Config(format!("grid needs at least {MIN_NODES} interior nodes, got {n}")));
    }
    Ok(Grid::uniform(n))
}
