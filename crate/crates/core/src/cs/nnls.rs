//! Least-squares helpers shared by the solvers.

use nalgebra::{DMatrix, DVector};

/// Thin QR factorization of a growing set of columns of `phi`, by modified
/// Gram-Schmidt with one reorthogonalization pass. Appending a column costs
/// `O(K·k)`; removing columns refactors from scratch.
pub(crate) struct ActiveSet<'a> {
    phi: &'a DMatrix<f64>,
    columns: Vec<usize>,
    q: Vec<DVector<f64>>,
    /// Column `i` of the upper-triangular factor, length `i + 1`.
    r: Vec<Vec<f64>>,
    diag_max: f64,
}

impl<'a> ActiveSet<'a> {
    pub(crate) fn new(phi: &'a DMatrix<f64>) -> Self {
        Self { phi, columns: Vec::new(), q: Vec::new(), r: Vec::new(), diag_max: 0.0 }
    }

    pub(crate) fn columns(&self) -> &[usize] {
        &self.columns
    }

    pub(crate) fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    /// Appends column `j`. Returns `false`, leaving the set unchanged, when
    /// `j` is numerically dependent on the current columns.
    pub(crate) fn push(&mut self, j: usize) -> bool {
        if self.columns.len() >= self.phi.nrows() {
            return false;
        }
        let mut v: DVector<f64> = self.phi.column(j).into_owned();
        let mut coeffs = vec![0.0; self.q.len() + 1];
        for _ in 0..2 {
            for (c, q) in coeffs.iter_mut().zip(&self.q) {
                let p = q.dot(&v);
                v.axpy(-p, q, 1.0);
                *c += p;
            }
        }
        let norm = v.norm();
        let scale = self.diag_max.max(norm);
        if scale == 0.0 || norm <= 1e-10 * scale {
            return false;
        }
        *coeffs.last_mut().expect("nonempty") = norm;
        self.q.push(v / norm);
        self.r.push(coeffs);
        self.columns.push(j);
        self.diag_max = scale;
        true
    }

    /// Keeps the columns satisfying `keep`, refactoring the rest. Columns
    /// that become dependent during the rebuild are dropped too.
    pub(crate) fn retain(&mut self, keep: impl Fn(usize) -> bool) {
        let cols: Vec<usize> = self.columns.iter().copied().filter(|&c| keep(c)).collect();
        *self = Self::new(self.phi);
        for c in cols {
            self.push(c);
        }
    }

    /// Least-squares coefficients of `o`, in the order of [`Self::columns`].
    pub(crate) fn solve(&self, o: &DVector<f64>) -> DVector<f64> {
        let k = self.columns.len();
        let mut z = DVector::from_iterator(k, self.q.iter().map(|q| q.dot(o)));
        for i in (0..k).rev() {
            let mut s = z[i];
            for j in i + 1..k {
                s -= self.r[j][i] * z[j];
            }
            z[i] = s / self.r[i][i];
        }
        z
    }
}

/// Least-squares fit of `o` on the listed columns of `phi`. `None` if the
/// selected columns are numerically rank deficient.
pub(crate) fn least_squares(phi: &DMatrix<f64>, columns: &[usize], o: &DVector<f64>) -> Option<DVector<f64>> {
    let mut set = ActiveSet::new(phi);
    columns.iter().all(|&c| set.push(c)).then(|| set.solve(o))
}

/// Lawson-Hanson inner loop. The newest column of `set` is its last one; `x`
/// holds the current (feasible) coefficients indexed by column. On return
/// `x` is the nonnegative least-squares fit on the surviving columns of
/// `set`. Returns `false` when the newest column could not be kept.
pub(crate) fn refit_nonnegative(set: &mut ActiveSet, x: &mut DVector<f64>, o: &DVector<f64>) -> bool {
    let newest = *set.columns().last().expect("at least one active column");
    loop {
        let z = set.solve(o);
        if z.iter().all(|&v| v > 0.0) {
            for (&c, &v) in set.columns().iter().zip(z.iter()) {
                x[c] = v;
            }
            return set.columns().contains(&newest);
        }
        // step from x toward z until the first coefficient hits zero
        let mut alpha = f64::INFINITY;
        let mut hit = newest;
        for (&c, &zc) in set.columns().iter().zip(z.iter()) {
            if zc <= 0.0 {
                let denom = x[c] - zc;
                let a = if denom > 0.0 { x[c] / denom } else { 0.0 };
                if a < alpha {
                    alpha = a;
                    hit = c;
                }
            }
        }
        for (&c, &zc) in set.columns().iter().zip(z.iter()) {
            x[c] += alpha * (zc - x[c]);
        }
        x[hit] = 0.0;
        let dropped: Vec<usize> = set.columns().iter().copied().filter(|&c| c == hit || x[c] <= 0.0).collect();
        let before = set.columns().to_vec();
        set.retain(|c| !dropped.contains(&c));
        // a rebuild may also shed columns that became dependent
        for c in before {
            if !set.columns().contains(&c) {
                x[c] = 0.0;
            }
        }
        if set.is_empty() {
            return false;
        }
    }
}

/// Nonnegative least squares restricted to `columns`, by Lawson-Hanson.
/// Returns coefficients indexed by position in `columns`.
pub(crate) fn nnls(phi: &DMatrix<f64>, columns: &[usize], o: &DVector<f64>) -> DVector<f64> {
    let sub = phi.select_columns(columns);
    let n = columns.len();
    let mut x = DVector::zeros(n);
    let mut set = ActiveSet::new(&sub);
    let mut blocked = vec![false; n];
    let tol = 1e-12 * sub.norm().max(1.0) * o.norm().max(1e-300);
    for _ in 0..3 * n.max(1) {
        let w = sub.tr_mul(&(o - &sub * &x));
        let candidate = (0..n)
            .filter(|&j| !set.columns().contains(&j) && !blocked[j] && w[j] > tol)
            .max_by(|&a, &b| w[a].total_cmp(&w[b]));
        let Some(j) = candidate else { break };
        if !set.push(j) || !refit_nonnegative(&mut set, &mut x, o) {
            blocked[j] = true;
        }
    }
    x
}
