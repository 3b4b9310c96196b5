//! Spectral radius of non-negative matrices.
//!
//! The matrix is split into strongly connected components; the spectral
//! radius is the largest radius over the diagonal blocks. Each irreducible
//! block is handled by power iteration on `I + B` (primitive whenever `B` is
//! irreducible) from the all-ones vector. For a positive iterate `x` the
//! Collatz–Wielandt quotients `min (Bx)_i / x_i` and `max (Bx)_i / x_i`
//! bracket `ρ(B)`, and the iteration stops once the bracket is narrower than
//! the tolerance. Blocks that fail to converge fall back to a dense Schur
//! eigensolve.

use nalgebra::DMatrix;
use petgraph::algo::tarjan_scc;
use petgraph::graphmap::DiGraphMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 10_000;
/// Assumption 1 is accepted only when `λ₁ < 1 − ASSUMPTION_MARGIN`.
pub const ASSUMPTION_MARGIN: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectralMethod {
    PowerIteration,
    DenseEigen,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport {
    pub lambda1: f64,
    /// Largest iteration count over the irreducible blocks.
    pub iterations: usize,
    /// Whether every block converged under power iteration.
    pub converged: bool,
    pub method: SpectralMethod,
}

impl SpectralReport {
    pub fn below_one(&self) -> bool {
        self.lambda1 < 1.0 - ASSUMPTION_MARGIN
    }
}

pub fn radius(m: &DMatrix<f64>, tol: f64, max_iter: usize) -> Result<SpectralReport> {
    assert_eq!(m.nrows(), m.ncols(), "spectral radius of a non-square matrix");
    let n = m.nrows();
    let mut graph = DiGraphMap::<usize, ()>::with_capacity(n, 0);
    for j in 0..n {
        graph.add_node(j);
    }
    for j in 0..n {
        for k in 0..n {
            if m[(j, k)] > 0.0 {
                graph.add_edge(j, k, ());
            }
        }
    }

    let mut report =
        SpectralReport { lambda1: 0.0, iterations: 0, converged: true, method: SpectralMethod::PowerIteration };
    for mut component in tarjan_scc(&graph) {
        component.sort_unstable();
        let rho = if component.len() == 1 {
            m[(component[0], component[0])].abs()
        } else {
            let block = DMatrix::from_fn(component.len(), component.len(), |a, b| m[(component[a], component[b])]);
            match power_iteration(&block, tol, max_iter) {
                Some((rho, iters)) => {
                    report.iterations = report.iterations.max(iters);
                    rho
                }
                None => {
                    report.iterations = report.iterations.max(max_iter);
                    report.converged = false;
                    report.method = SpectralMethod::DenseEigen;
                    dense_radius(&block).ok_or(Error::PowerIterationDiverged { iterations: max_iter })?
                }
            }
        };
        report.lambda1 = report.lambda1.max(rho);
    }
    Ok(report)
}

pub fn radius_default(m: &DMatrix<f64>) -> Result<SpectralReport> {
    radius(m, DEFAULT_TOL, DEFAULT_MAX_ITER)
}

fn power_iteration(block: &DMatrix<f64>, tol: f64, max_iter: usize) -> Option<(f64, usize)> {
    let n = block.nrows();
    let mut x = nalgebra::DVector::from_element(n, 1.0);
    for it in 1..=max_iter {
        let y = block * &x;
        let (mut lo, mut hi) = (f64::INFINITY, 0.0_f64);
        for i in 0..n {
            let q = y[i] / x[i];
            lo = lo.min(q);
            hi = hi.max(q);
        }
        if !hi.is_finite() {
            return None;
        }
        if hi - lo <= tol * hi.max(1.0) {
            return Some((0.5 * (lo + hi), it));
        }
        x += y;
        let scale = x.amax();
        x /= scale;
    }
    None
}

pub(crate) fn dense_radius(m: &DMatrix<f64>) -> Option<f64> {
    let schur = nalgebra::linalg::Schur::try_new(m.clone(), f64::EPSILON, 100_000)?;
    let eig = schur.complex_eigenvalues();
    Some(eig.iter().map(|z| z.norm()).fold(0.0, f64::max))
}
