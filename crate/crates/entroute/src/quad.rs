//! Gaussian quadrature rules built with the Golub–Welsch method.
//!
//! Both rules are derived from the symmetric tridiagonal Jacobi matrix of
//! the orthogonal polynomial family: nodes are its eigenvalues and weights
//! are the squared first components of the normalized eigenvectors (times
//! the zeroth moment of the weight function).
//!
//! The Laguerre rule is rescaled so that it integrates directly against the
//! Exp(μ) density: `E[f(X)] ≈ Σ wᵢ f(xᵢ)` with `Σ wᵢ = 1`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Largest supported Gauss–Laguerre order. The dense symmetric eigensolver
/// stays accurate through this range; larger orders are refused.
pub const MAX_LAGUERRE_ORDER: usize = 120;

/// Quadrature rule targeting expectations under Exp(`mu`).
#[derive(Debug, Clone)]
pub struct Quadrature {
    /// Abscissae, ascending, all positive (time units).
    pub nodes: Vec<f64>,
    /// Probability weights, all positive, summing to one.
    pub weights: Vec<f64>,
    /// Rate of the exponential density the rule integrates against.
    pub mu: f64,
    /// Node count.
    pub order: usize,
}

impl Quadrature {
    /// Approximates `E[f(X)]` for `X ~ Exp(mu)`.
    pub fn expect(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }
}

/// Eigen-decomposes a symmetric tridiagonal Jacobi matrix given by its
/// diagonal and off-diagonal, returning (nodes, squared first components)
/// sorted by node.
fn golub_welsch(diag: &[f64], offdiag: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = diag.len();
    let mut m = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = diag[i];
        if i + 1 < n {
            m[(i, i + 1)] = offdiag[i];
            m[(i + 1, i)] = offdiag[i];
        }
    }
    let eig = m.symmetric_eigen();
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|j| {
            let v0 = eig.eigenvectors[(0, j)];
            (eig.eigenvalues[j], v0 * v0)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

/// Gauss–Laguerre rule of the given order, rescaled for the Exp(`mu`)
/// density via the substitution `y = μx`.
///
/// Exact for polynomials of degree ≤ 2·order−1 under the exponential
/// weight. Orders outside `2..=`[`MAX_LAGUERRE_ORDER`] are rejected.
pub fn gauss_laguerre(order: usize, mu: f64) -> Result<Quadrature> {
    if mu <= 0.0 || !mu.is_finite() {
        return Err(Error::InvalidParams(format!("mu must be positive, got {mu}")));
    }
    if order < 2 {
        return Err(Error::InvalidParams(format!("quadrature order must be >= 2, got {order}")));
    }
    if order > MAX_LAGUERRE_ORDER {
        return Err(Error::InvalidParams(format!(
            "quadrature order {order} exceeds the stability limit {MAX_LAGUERRE_ORDER}"
        )));
    }
    // Jacobi matrix of the (alpha = 0) Laguerre family: diag 2k+1, offdiag k+1.
    let diag: Vec<f64> = (0..order).map(|k| 2.0 * k as f64 + 1.0).collect();
    let offdiag: Vec<f64> = (1..order).map(|k| k as f64).collect();
    let (nodes_std, weights) = golub_welsch(&diag, &offdiag);
    let nodes = nodes_std.into_iter().map(|x| x / mu).collect();
    Ok(Quadrature { nodes, weights, mu, order })
}

/// Gauss–Legendre rule on `[a, b]`, as (nodes, weights).
pub fn gauss_legendre(order: usize, a: f64, b: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if order < 2 {
        return Err(Error::InvalidParams(format!("quadrature order must be >= 2, got {order}")));
    }
    if !(a.is_finite() && b.is_finite()) || a >= b {
        return Err(Error::InvalidInput(format!("bad interval [{a}, {b}]")));
    }
    let diag = vec![0.0; order];
    let offdiag: Vec<f64> = (1..order)
        .map(|k| {
            let k = k as f64;
            k / (4.0 * k * k - 1.0).sqrt()
        })
        .collect();
    let (nodes_std, w0) = golub_welsch(&diag, &offdiag);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let nodes = nodes_std.iter().map(|&t| mid + half * t).collect();
    let weights = w0.iter().map(|&w| 2.0 * w * half).collect();
    Ok((nodes, weights))
}
