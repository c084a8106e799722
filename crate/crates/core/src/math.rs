//! Scalar special functions and small numeric helpers.

use libm::{exp, log, pow, sqrt, tgamma};

/// Even Bernoulli numbers B_2, B_4, ..., B_16.
const BERNOULLI: [f64; 8] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
];

pub fn gamma(x: f64) -> f64 {
    tgamma(x)
}

/// Riemann zeta function for real `s != 1`, by Euler-Maclaurin summation.
///
/// Accurate to roughly machine precision for `s` in (-4, 4).
pub fn zeta(s: f64) -> f64 {
    const N: usize = 12;
    let nf = N as f64;
    let mut sum = 0.0;
    for k in 1..N {
        sum += pow(k as f64, -s);
    }
    sum += pow(nf, 1.0 - s) / (s - 1.0) + 0.5 * pow(nf, -s);
    // rising factorial s (s+1) ... (s+2j-2) divided by (2j)!
    let mut coef = s / 2.0;
    let mut npow = pow(nf, -s - 1.0);
    for (j, b) in BERNOULLI.iter().enumerate() {
        sum += b * coef * npow;
        let a = (2 * j + 1) as f64;
        coef *= (s + a) * (s + a + 1.0) / ((a + 2.0) * (a + 3.0));
        npow /= nf * nf;
    }
    sum
}

/// One-dimensional fractional Laplacian normalization
/// `c_{1,s} = 4^s s Gamma(1/2 + s) / (sqrt(pi) Gamma(1 - s))`.
pub fn fractional_constant(s: f64) -> f64 {
    pow(4.0, s) * s * tgamma(0.5 + s) / (sqrt(core::f64::consts::PI) * tgamma(1.0 - s))
}

pub fn powf(x: f64, p: f64) -> f64 {
    pow(x, p)
}

pub fn ln(x: f64) -> f64 {
    log(x)
}

pub fn expf(x: f64) -> f64 {
    exp(x)
}

/// Result of an ordinary least-squares line fit `y = slope x + intercept`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope; zero for fewer than three points.
    pub stderr: f64,
}

pub fn line_fit(xs: &[f64], ys: &[f64]) -> Option<LineFit> {
    let n = xs.len();
    if n < 2 || ys.len() != n {
        return None;
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    if sxx <= 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let stderr = if n > 2 {
        let rss: f64 = xs.iter().zip(ys).map(|(x, y)| { let r = y - intercept - slope * x; r * r }).sum();
        sqrt(rss / (nf - 2.0) / sxx)
    } else {
        0.0
    };
    Some(LineFit { slope, intercept, stderr })
}
