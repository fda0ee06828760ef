//! Compressed sensing: sampling matrices, the `o = A·x` model and sparse
//! reconstruction.

mod dct;
mod fista;
mod nnls;
mod omp;
mod sampling;

pub use dct::{dct2, dct_basis, idct2};
pub use sampling::{initial_estimate, l1_norm, MatrixKind, ObservationVector, SamplingMatrix};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{mismatch, invalid, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Solver {
    GreedyPursuit,
    IterativeShrinkage,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Basis {
    Identity,
    Dct2d,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReconstructionOptions {
    pub solver: Solver,
    /// Greedy pursuit: maximum number of selected atoms. Iterative
    /// shrinkage: total number of gradient steps.
    pub max_iterations: usize,
    /// Stop once `‖o - A·x‖₂ <= residual_tolerance · ‖o‖₂`.
    pub residual_tolerance: f64,
    pub nonnegative: bool,
    pub basis: Basis,
}

impl Default for ReconstructionOptions {
    fn default() -> Self {
        Self {
            solver: Solver::GreedyPursuit,
            max_iterations: 2000,
            residual_tolerance: 1e-6,
            nonnegative: true,
            basis: Basis::Identity,
        }
    }
}

impl ReconstructionOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(invalid("max_iterations must be at least 1"));
        }
        if !(self.residual_tolerance.is_finite() && self.residual_tolerance >= 0.0) {
            return Err(invalid("residual_tolerance must be a nonnegative real"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Reconstruction {
    pub x: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// `‖o - A·x‖₂` of the returned estimate.
    pub residual_norm: f64,
}

pub fn reconstruct(
    a: &SamplingMatrix,
    o: &ObservationVector,
    opts: &ReconstructionOptions,
) -> Result<Reconstruction> {
    opts.validate()?;
    if o.len() != a.rows() {
        return Err(mismatch(format!(
            "observation length {} does not match {} sampling rows",
            o.len(),
            a.rows()
        )));
    }
    if o.values().iter().any(|v| !v.is_finite()) {
        return Err(invalid("observations must be finite"));
    }
    let n = a.cols();
    let m = (n as f64).sqrt().round() as usize;
    let sensing = a.to_dmatrix();
    let (dictionary, synthesis) = match opts.basis {
        Basis::Identity => (sensing.clone(), None),
        Basis::Dct2d => {
            if m * m != n {
                return Err(mismatch(format!("dct2d basis needs a square signal length, got {n}")));
            }
            let psi = dct_basis(m);
            (&sensing * &psi, Some(psi))
        }
    };
    let rhs = DVector::from_column_slice(o.values());
    // Coefficient-domain sign constraints only make sense in the canonical basis.
    let nonneg_coeffs = opts.nonnegative && synthesis.is_none();
    let solution = match opts.solver {
        Solver::GreedyPursuit => omp::solve(&dictionary, &rhs, opts, nonneg_coeffs),
        Solver::IterativeShrinkage => fista::solve(&dictionary, &rhs, opts, nonneg_coeffs),
    };
    let mut x = match &synthesis {
        Some(psi) => psi * &solution.coefficients,
        None => solution.coefficients.clone(),
    };
    if opts.nonnegative {
        x.iter_mut().for_each(|v| *v = v.max(0.0));
    }
    let residual_norm = (&rhs - &sensing * &x).norm();
    Ok(Reconstruction {
        x: x.as_slice().to_vec(),
        converged: solution.converged,
        iterations: solution.iterations,
        residual_norm,
    })
}

/// Raw solver output in the dictionary's coefficient domain.
pub(crate) struct SolverOutput {
    pub coefficients: DVector<f64>,
    pub converged: bool,
    pub iterations: usize,
    #[allow(dead_code)]
    pub residual_history: Vec<f64>,
}

pub(crate) fn column_norms(a: &DMatrix<f64>) -> Vec<f64> {
    a.column_iter().map(|c| c.norm()).collect()
}
