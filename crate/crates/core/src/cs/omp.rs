//! Greedy pursuit: orthogonal matching pursuit, with a Lawson-Hanson style
//! nonnegative refit when coefficients must stay `>= 0`.

use nalgebra::{DMatrix, DVector};

use super::nnls::{refit_nonnegative, ActiveSet};
use super::{column_norms, ReconstructionOptions, SolverOutput};

/// Each step adds the column most correlated with the residual (largest
/// positive correlation when `nonnegative`), then refits on the active set.
/// `converged` means the residual reached the tolerance or no remaining
/// column can lower it.
pub(crate) fn solve(
    phi: &DMatrix<f64>,
    o: &DVector<f64>,
    opts: &ReconstructionOptions,
    nonnegative: bool,
) -> SolverOutput {
    let (k, n) = phi.shape();
    let norms = column_norms(phi);
    let target = opts.residual_tolerance * o.norm();
    let cap = opts.max_iterations.min(k.min(n));

    let mut x = DVector::zeros(n);
    let mut set = ActiveSet::new(phi);
    let mut in_active = vec![false; n];
    let mut excluded: Vec<bool> = norms.iter().map(|&v| v == 0.0).collect();
    let mut residual = o.clone();
    let mut history = vec![residual.norm()];
    let mut iterations = 0;
    let mut converged = false;

    loop {
        let r_norm = residual.norm();
        if r_norm <= target {
            converged = true;
            break;
        }
        if iterations >= cap {
            break;
        }
        let corr = phi.tr_mul(&residual);
        let mut best: Option<(usize, f64)> = None;
        for j in 0..n {
            if excluded[j] || in_active[j] {
                continue;
            }
            let c = corr[j] / norms[j];
            let score = if nonnegative { c } else { c.abs() };
            if best.is_none_or(|(_, s)| score > s) {
                best = Some((j, score));
            }
        }
        let Some((j, score)) = best else {
            converged = true;
            break;
        };
        if score <= 1e-14 * r_norm {
            converged = true;
            break;
        }
        iterations += 1;
        if !set.push(j) {
            excluded[j] = true;
        } else if nonnegative {
            if !refit_nonnegative(&mut set, &mut x, o) {
                excluded[j] = true;
            }
        } else {
            let z = set.solve(o);
            for (&c, &v) in set.columns().iter().zip(z.iter()) {
                x[c] = v;
            }
        }
        in_active.iter_mut().for_each(|b| *b = false);
        for &c in set.columns() {
            in_active[c] = true;
        }
        residual = o - phi * &x;
        history.push(residual.norm());
    }

    SolverOutput { coefficients: x, converged, iterations, residual_history: history }
}
