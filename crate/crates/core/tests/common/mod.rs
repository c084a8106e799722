//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use fpme_core::math::fractional_constant;
use fpme_core::OperatorKind;

/// `(1 - ((x - c)/a)^2)^k` on `|x - c| < a`, with exact derivatives.
#[derive(Debug, Clone)]
pub struct PolyBump {
    pub c: f64,
    pub a: f64,
    /// Coefficients in `t = (x - c)/a`, lowest degree first, one row per derivative.
    derivs: Vec<Vec<f64>>,
}

impl PolyBump {
    pub fn new(c: f64, a: f64, k: u32) -> Self {
        let mut p = vec![0.0; 2 * k as usize + 1];
        let mut binom = 1.0;
        for j in 0..=k as usize {
            p[2 * j] = if j % 2 == 0 { binom } else { -binom };
            binom = binom * (k as f64 - j as f64) / (j as f64 + 1.0);
        }
        let mut derivs = vec![p];
        for _ in 0..4 {
            let last = derivs.last().unwrap();
            let d: Vec<f64> = (1..last.len()).map(|i| i as f64 * last[i]).collect();
            derivs.push(d);
        }
        PolyBump { c, a, derivs }
    }

    pub fn deriv(&self, x: f64, order: usize) -> f64 {
        let t = (x - self.c) / self.a;
        if t.abs() >= 1.0 {
            return 0.0;
        }
        let v = self.derivs[order].iter().rev().fold(0.0, |acc, &q| acc * t + q);
        v / self.a.powi(order as i32)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.deriv(x, 0)
    }

    pub fn support(&self) -> (f64, f64) {
        (self.c - self.a, self.c + self.a)
    }
}

pub fn test_functions() -> Vec<PolyBump> {
    vec![
        PolyBump::new(0.0, 0.9, 4),
        PolyBump::new(0.3, 0.5, 5),
        PolyBump::new(-0.4, 0.55, 6),
        PolyBump::new(0.1, 0.8, 8),
        PolyBump::new(-0.2, 0.6, 4),
    ]
}

fn integrate(f: impl Fn(f64) -> f64, breaks: &[f64]) -> f64 {
    breaks
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| quadrature::integrate(&f, w[0], w[1], 1e-14).integral)
        .sum()
}

/// Principal-value integral of the restricted (whole-line) or censored
/// (interval-only) operator applied to `f` at `x`.
pub fn pv_oracle(f: &PolyBump, x: f64, s: f64, kind: OperatorKind) -> f64 {
    const NEAR: f64 = 1e-3;
    let d = (1.0 - x).min(1.0 + x);
    let far = (1.0 - x).max(1.0 + x);
    let fx = f.eval(x);
    // Taylor part of the symmetric second difference on (0, NEAR)
    let near = -f.deriv(x, 2) * NEAR.powf(2.0 - 2.0 * s) / (2.0 - 2.0 * s)
        - f.deriv(x, 4) / 12.0 * NEAR.powf(4.0 - 2.0 * s) / (4.0 - 2.0 * s);
    let sym = |z: f64| (2.0 * fx - f.eval(x + z) - f.eval(x - z)) * z.powf(-1.0 - 2.0 * s);
    let (lo, hi) = f.support();
    let mut edges: Vec<f64> = vec![(x - lo).abs(), (x - hi).abs(), d];
    edges.retain(|&b| b > NEAR && b < far);
    edges.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut breaks = vec![NEAR];
    breaks.extend(&edges);
    let value = match kind {
        OperatorKind::Rfl => {
            const OUTER: f64 = 2.5;
            breaks.push(OUTER);
            near + integrate(sym, &breaks) + 2.0 * fx * OUTER.powf(-2.0 * s) / (2.0 * s)
        }
        _ => {
            let mut inner: Vec<f64> = breaks.iter().copied().filter(|&b| b <= d).collect();
            inner.push(d);
            let sign = if 1.0 - x > 1.0 + x { 1.0 } else { -1.0 };
            let one_sided = |z: f64| (fx - f.eval(x + sign * z)) * z.powf(-1.0 - 2.0 * s);
            let mut outer = vec![d];
            outer.extend(edges.iter().copied().filter(|&b| b > d));
            outer.push(far);
            near + integrate(sym, &inner) + integrate(one_sided, &outer)
        }
    };
    fractional_constant(s) * value
}

/// Max relative deviation of `A f` from the oracle at every `stride`-th node.
pub fn oracle_error(op: &fpme_core::DiscreteOperator, f: &PolyBump, stride: usize) -> f64 {
    let v: Vec<f64> = op.grid.nodes.iter().map(|&x| f.eval(x)).collect();
    let av = op.apply(&v);
    let mut num: f64 = 0.0;
    let mut den: f64 = 0.0;
    for i in (0..op.n()).step_by(stride) {
        let o = pv_oracle(f, op.grid.nodes[i], op.s, op.kind);
        num = num.max((av[i] - o).abs());
        den = den.max(o.abs());
    }
    num / den
}
