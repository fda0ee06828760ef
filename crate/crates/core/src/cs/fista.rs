//! Iterative shrinkage (FISTA) on `½‖o − Φα‖² + λ‖α‖₁` with step `1/‖Φ‖₂²`
//! and a geometrically annealed `λ`. Each annealing stage ends with a
//! least-squares refit on the current support, which removes the shrinkage
//! bias once the support is right.

use nalgebra::{DMatrix, DVector};

use super::nnls::{least_squares, nnls};
use super::{ReconstructionOptions, SolverOutput};

const ANNEAL_FACTOR: f64 = 0.5;
const FINAL_LAMBDA_RATIO: f64 = 1e-10;
const STAGE_TOLERANCE: f64 = 1e-9;

fn spectral_norm_sq(phi: &DMatrix<f64>) -> f64 {
    let n = phi.ncols();
    let mut v = DVector::from_element(n, 1.0 / (n as f64).sqrt());
    let mut estimate = 0.0;
    for _ in 0..200 {
        let w = phi.tr_mul(&(phi * &v));
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        v = w / norm;
        if (norm - estimate).abs() <= 1e-12 * norm {
            estimate = norm;
            break;
        }
        estimate = norm;
    }
    estimate
}

fn shrink(v: f64, t: f64, nonnegative: bool) -> f64 {
    if nonnegative {
        (v - t).max(0.0)
    } else if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

fn debias(phi: &DMatrix<f64>, alpha: &DVector<f64>, o: &DVector<f64>, nonnegative: bool) -> DVector<f64> {
    let support: Vec<usize> = (0..alpha.len()).filter(|&i| alpha[i] != 0.0).collect();
    let mut out = DVector::zeros(alpha.len());
    if support.is_empty() || support.len() > phi.nrows() {
        return alpha.clone();
    }
    let fit = if nonnegative {
        Some(nnls(phi, &support, o))
    } else {
        least_squares(phi, &support, o)
    };
    match fit {
        Some(z) => {
            for (&i, &v) in support.iter().zip(z.iter()) {
                out[i] = v;
            }
            out
        }
        None => alpha.clone(),
    }
}

pub(crate) fn solve(
    phi: &DMatrix<f64>,
    o: &DVector<f64>,
    opts: &ReconstructionOptions,
    nonnegative: bool,
) -> SolverOutput {
    let n = phi.ncols();
    let o_norm = o.norm();
    let target = opts.residual_tolerance * o_norm;
    let zero = DVector::zeros(n);
    let mut history = vec![o_norm];
    if o_norm <= target {
        return SolverOutput { coefficients: zero, converged: true, iterations: 0, residual_history: history };
    }
    let lipschitz = spectral_norm_sq(phi) * (1.0 + 1e-9);
    let grad0 = phi.tr_mul(o);
    let lambda_max = if nonnegative { grad0.max().max(0.0) } else { grad0.amax() };
    if lipschitz == 0.0 || lambda_max == 0.0 {
        return SolverOutput { coefficients: zero, converged: false, iterations: 0, residual_history: history };
    }
    let step = 1.0 / lipschitz;

    let mut alpha = zero.clone();
    let mut best = zero;
    let mut best_residual = o_norm;
    let mut lambda = lambda_max * ANNEAL_FACTOR;
    let lambda_floor = lambda_max * FINAL_LAMBDA_RATIO;
    let mut iterations = 0;
    let stages = ((FINAL_LAMBDA_RATIO.ln() / ANNEAL_FACTOR.ln()).ceil() as usize).max(1);
    let per_stage = (opts.max_iterations / stages).max(1);

    while iterations < opts.max_iterations {
        let mut y = alpha.clone();
        let mut t = 1.0f64;
        for _ in 0..per_stage {
            if iterations >= opts.max_iterations {
                break;
            }
            iterations += 1;
            let grad = phi.tr_mul(&(phi * &y - o));
            let next = (&y - grad * step).map(|v| shrink(v, lambda * step, nonnegative));
            let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
            let delta = (&next - &alpha).norm();
            y = &next + (&next - &alpha) * ((t - 1.0) / t_next);
            alpha = next;
            t = t_next;
            if delta <= STAGE_TOLERANCE * alpha.norm().max(1e-300) {
                break;
            }
        }
        let candidate = debias(phi, &alpha, o, nonnegative);
        let r = (o - phi * &candidate).norm();
        history.push(r);
        if r < best_residual {
            best_residual = r;
            best = candidate;
        }
        if best_residual <= target {
            return SolverOutput { coefficients: best, converged: true, iterations, residual_history: history };
        }
        if lambda <= lambda_floor {
            break;
        }
        lambda = (lambda * ANNEAL_FACTOR).max(lambda_floor);
    }
    SolverOutput { coefficients: best, converged: best_residual <= target, iterations, residual_history: history }
}
