use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dvr::OperatorCache;
use crate::error::{Error, Result};

/// A real symmetric operator known only through its action and diagonal.
pub trait LinearOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &DVector<f64>, y: &mut DVector<f64>);
    fn diagonal(&self) -> DVector<f64>;
}

impl LinearOperator for OperatorCache {
    fn dim(&self) -> usize {
        OperatorCache::dim(self)
    }

    fn apply(&self, x: &DVector<f64>, y: &mut DVector<f64>) {
        let (n, m) = self.basis.shape();
        let xm = DMatrix::from_column_slice(n, m, x.as_slice());
        let mut ym = DMatrix::zeros(n, m);
        self.apply_real(&xm, &mut ym);
        y.copy_from_slice(ym.as_slice());
    }

    fn diagonal(&self) -> DVector<f64> {
        OperatorCache::diagonal(self)
    }
}

impl LinearOperator for DMatrix<f64> {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, x: &DVector<f64>, y: &mut DVector<f64>) {
        y.gemv(1.0, self, x, 0.0);
    }

    fn diagonal(&self) -> DVector<f64> {
        self.diagonal()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DavidsonOptions {
    /// Convergence threshold on ‖Hx − θx‖ for every requested pair.
    pub tol: f64,
    pub max_iter: usize,
    /// Subspace size that triggers a thick restart.
    pub max_subspace: usize,
    /// Extra guess vectors beyond the k requested.
    pub extra: usize,
}

impl Default for DavidsonOptions {
    fn default() -> Self {
        DavidsonOptions {
            tol: 1e-7,
            max_iter: 500,
            max_subspace: 64,
            extra: 4,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DavidsonOutput {
    pub values: Vec<f64>,
    pub vectors: Vec<DVector<f64>>,
    pub residuals: Vec<f64>,
    pub iterations: usize,
    pub matvecs: usize,
}

/// Lowest `k` eigenpairs of a symmetric operator by block Davidson iteration
/// with a diagonal preconditioner. `guesses` seed the subspace; unit vectors
/// on the smallest diagonal entries fill it up to k + extra.
pub fn davidson_lowest(
    op: &dyn LinearOperator,
    k: usize,
    opts: &DavidsonOptions,
    guesses: &[DVector<f64>],
) -> Result<DavidsonOutput> {
    let n = op.dim();
    if k == 0 || k > n {
        return Err(Error::invalid(format!("cannot compute {k} eigenpairs of a {n}-dim operator")));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::invalid("Davidson tolerance must be positive"));
    }
    let block = (k + opts.extra).min(n);
    let max_sub = opts.max_subspace.max(2 * block).min(n);
    let diag = op.diagonal();

    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(max_sub);
    for g in guesses {
        push_orthonormal(&mut basis, g.clone());
        if basis.len() == block {
            break;
        }
    }
    if basis.len() < block {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| diag[a].total_cmp(&diag[b]));
        for i in order {
            if basis.len() == block {
                break;
            }
            let mut e = DVector::zeros(n);
            e[i] = 1.0;
            push_orthonormal(&mut basis, e);
        }
    }

    let mut images: Vec<DVector<f64>> = Vec::with_capacity(max_sub);
    let mut matvecs = 0;
    let mut last_residual = f64::INFINITY;
    for iter in 0..opts.max_iter {
        while images.len() < basis.len() {
            let mut y = DVector::zeros(n);
            op.apply(&basis[images.len()], &mut y);
            matvecs += 1;
            images.push(y);
        }
        let m = basis.len();
        let mut s = DMatrix::zeros(m, m);
        for j in 0..m {
            for i in 0..=j {
                let v = 0.5 * (basis[i].dot(&images[j]) + basis[j].dot(&images[i]));
                s[(i, j)] = v;
                s[(j, i)] = v;
            }
        }
        let eig = s.symmetric_eigen();
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

        let combine = |vs: &[DVector<f64>], col: usize| {
            let mut out = DVector::zeros(n);
            for (i, v) in vs.iter().enumerate() {
                out.axpy(eig.eigenvectors[(i, col)], v, 1.0);
            }
            out
        };

        let keep = block.min(m);
        let mut ritz = Vec::with_capacity(keep);
        let mut ritz_images = Vec::with_capacity(keep);
        let mut values = Vec::with_capacity(keep);
        let mut residuals = Vec::with_capacity(k);
        let mut corrections = Vec::new();
        for (rank, &col) in order.iter().take(keep).enumerate() {
            let theta = eig.eigenvalues[col];
            let x = combine(&basis, col);
            let hx = combine(&images, col);
            if rank < k {
                let r = &hx - theta * &x;
                let rn = r.norm();
                if !rn.is_finite() {
                    return Err(Error::NonFinite("Davidson residual".into()));
                }
                residuals.push(rn);
                if rn >= opts.tol {
                    let t = DVector::from_fn(n, |i, _| {
                        let d = theta - diag[i];
                        let d = if d.abs() < 1e-8 { 1e-8f64.copysign(d) } else { d };
                        r[i] / d
                    });
                    corrections.push(t);
                }
            }
            values.push(theta);
            ritz.push(x);
            ritz_images.push(hx);
        }
        last_residual = residuals.iter().copied().fold(0.0, f64::max);
        if corrections.is_empty() {
            let mut vectors: Vec<DVector<f64>> = ritz.into_iter().take(k).collect();
            for v in vectors.iter_mut() {
                fix_sign(v);
            }
            return Ok(DavidsonOutput {
                values: values.into_iter().take(k).collect(),
                vectors,
                residuals,
                iterations: iter + 1,
                matvecs,
            });
        }
        if m + corrections.len() > max_sub {
            basis = ritz;
            images = ritz_images;
        }
        let before = basis.len();
        for t in corrections {
            push_orthonormal(&mut basis, t);
        }
        if basis.len() == before {
            return Err(Error::SubspaceCollapse(iter));
        }
    }
    Err(Error::NoConvergence {
        iterations: opts.max_iter,
        residual: last_residual,
    })
}

/// Two passes of modified Gram-Schmidt; drops vectors that vanish.
fn push_orthonormal(basis: &mut Vec<DVector<f64>>, mut v: DVector<f64>) -> bool {
    let start = v.norm();
    if !(start > 0.0 && start.is_finite()) {
        return false;
    }
    for _ in 0..2 {
        for b in basis.iter() {
            let c = b.dot(&v);
            v.axpy(-c, b, 1.0);
        }
    }
    let nv = v.norm();
    if nv <= 1e-10 * start {
        return false;
    }
    v /= nv;
    basis.push(v);
    true
}

/// Largest-magnitude component made positive, for reproducible signs.
pub(crate) fn fix_sign(v: &mut DVector<f64>) {
    let mut best = 0.0f64;
    for x in v.iter() {
        if x.abs() > best.abs() + 1e-12 {
            best = *x;
        }
    }
    if best < 0.0 {
        v.neg_mut();
    }
}
