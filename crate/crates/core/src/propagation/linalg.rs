//! Complex states packed as real/imaginary coefficient matrices, the
//! separable preconditioner and restarted GMRES for the Crank–Nicolson
//! systems.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::dvr::{OperatorCache, TwoBodyBasis, TwoBodyState};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Packed {
    pub re: DMatrix<f64>,
    pub im: DMatrix<f64>,
}

impl Packed {
    pub fn zeros(n: usize, m: usize) -> Self {
        Packed {
            re: DMatrix::zeros(n, m),
            im: DMatrix::zeros(n, m),
        }
    }

    pub fn from_state(s: &TwoBodyState) -> Self {
        let (re, im) = s.split();
        Packed { re, im }
    }

    pub fn to_state(&self, basis: Arc<TwoBodyBasis>) -> Result<TwoBodyState> {
        TwoBodyState::from_parts(basis, &self.re, &self.im)
    }

    pub fn shape(&self) -> (usize, usize) {
        self.re.shape()
    }

    /// Σ conj(self)·other.
    pub fn dotc(&self, o: &Packed) -> Complex64 {
        let rr = self.re.dot(&o.re);
        let ii = self.im.dot(&o.im);
        let ri = self.re.dot(&o.im);
        let ir = self.im.dot(&o.re);
        Complex64::new(rr + ii, ri - ir)
    }

    pub fn norm(&self) -> f64 {
        (self.re.norm_squared() + self.im.norm_squared()).sqrt()
    }

    /// self += c·x
    pub fn axpy(&mut self, c: Complex64, x: &Packed) {
        for (((sr, si), xr), xi) in self
            .re
            .iter_mut()
            .zip(self.im.iter_mut())
            .zip(x.re.iter())
            .zip(x.im.iter())
        {
            *sr += c.re * xr - c.im * xi;
            *si += c.re * xi + c.im * xr;
        }
    }

    pub fn scale(&mut self, c: Complex64) {
        for (sr, si) in self.re.iter_mut().zip(self.im.iter_mut()) {
            let (a, b) = (*sr, *si);
            *sr = c.re * a - c.im * b;
            *si = c.re * b + c.im * a;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.re.iter().chain(self.im.iter()).all(|v| v.is_finite())
    }
}

/// Work buffers for H applications.
#[derive(Debug, Clone)]
pub(crate) struct Scratch {
    hr: DMatrix<f64>,
    hi: DMatrix<f64>,
}

impl Scratch {
    pub fn new(n: usize, m: usize) -> Self {
        Scratch {
            hr: DMatrix::zeros(n, m),
            hi: DMatrix::zeros(n, m),
        }
    }
}

/// out ← (1 + i·s·H)·x when `sign = 1`, (1 − i·s·H)·x when `sign = -1`.
pub(crate) fn apply_cayley_factor(
    cache: &OperatorCache,
    s: f64,
    sign: f64,
    x: &Packed,
    out: &mut Packed,
    w: &mut Scratch,
) {
    cache.apply_real(&x.re, &mut w.hr);
    cache.apply_real(&x.im, &mut w.hi);
    let k = sign * s;
    // (1 + i k H)(xr + i xi) = (xr - k H xi) + i (xi + k H xr)
    for ((o, xr), hi) in out.re.iter_mut().zip(x.re.iter()).zip(w.hi.iter()) {
        *o = xr - k * hi;
    }
    for ((o, xi), hr) in out.im.iter_mut().zip(x.im.iter()).zip(w.hr.iter()) {
        *o = xi + k * hr;
    }
}

/// Exact inverse of 1 + i·s·H₀, where H₀ keeps the kinetic and one-body
/// terms and the additive (row + column) part of the Coulomb matrix.
#[derive(Debug, Clone)]
pub struct SeparablePreconditioner {
    ql: DMatrix<f64>,
    qr: DMatrix<f64>,
    /// λ_a + μ_b − offset
    levels: DMatrix<f64>,
}

impl SeparablePreconditioner {
    pub fn new(cache: &OperatorCache) -> Self {
        let u = &cache.coulomb;
        let (n, m) = u.shape();
        let grand = u.mean();
        let (mut hl, mut hr) = cache.one_body();
        for a in 0..n {
            hl[(a, a)] += u.row(a).mean() - grand;
        }
        for b in 0..m {
            hr[(b, b)] += u.column(b).mean();
        }
        let el = hl.symmetric_eigen();
        let er = hr.symmetric_eigen();
        let off = cache.energy_offset;
        let levels = DMatrix::from_fn(n, m, |a, b| el.eigenvalues[a] + er.eigenvalues[b] - off);
        SeparablePreconditioner {
            ql: el.eigenvectors,
            qr: er.eigenvectors,
            levels,
        }
    }

    /// x ← (1 + i·s·H₀)⁻¹ x
    pub(crate) fn apply(&self, s: f64, x: &mut Packed, w: &mut Scratch) {
        let tr = self.ql.tr_mul(&x.re) * &self.qr;
        let ti = self.ql.tr_mul(&x.im) * &self.qr;
        w.hr.copy_from(&tr);
        w.hi.copy_from(&ti);
        for ((r, i), l) in w.hr.iter_mut().zip(w.hi.iter_mut()).zip(self.levels.iter()) {
            let k = s * l;
            let d = 1.0 + k * k;
            let (a, b) = (*r, *i);
            *r = (a + k * b) / d;
            *i = (b - k * a) / d;
        }
        x.re = &self.ql * &w.hr * self.qr.transpose();
        x.im = &self.ql * &w.hi * self.qr.transpose();
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmresOptions {
    /// Relative residual ‖b − Ax‖/‖b‖.
    pub tol: f64,
    pub restart: usize,
    pub max_iter: usize,
}

impl Default for GmresOptions {
    fn default() -> Self {
        GmresOptions {
            tol: 1e-12,
            restart: 30,
            max_iter: 300,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct GmresOutcome {
    pub iterations: usize,
    pub matvecs: usize,
    pub residual: f64,
}

/// Solves (1 + i·s·H) x = b with right preconditioning. `x` holds the
/// initial guess on entry.
pub(crate) fn gmres_cayley(
    cache: &OperatorCache,
    pre: &SeparablePreconditioner,
    s: f64,
    b: &Packed,
    x: &mut Packed,
    opts: &GmresOptions,
    w: &mut Scratch,
) -> std::result::Result<GmresOutcome, GmresOutcome> {
    let (n, m) = b.shape();
    let bnorm = b.norm();
    let mut out = GmresOutcome::default();
    if bnorm == 0.0 {
        *x = Packed::zeros(n, m);
        return Ok(out);
    }
    let mut ax = Packed::zeros(n, m);
    loop {
        apply_cayley_factor(cache, s, 1.0, x, &mut ax, w);
        out.matvecs += 1;
        let mut r = b.clone();
        r.axpy(Complex64::new(-1.0, 0.0), &ax);
        let beta = r.norm();
        out.residual = beta / bnorm;
        if !beta.is_finite() {
            return Err(out);
        }
        if out.residual <= opts.tol {
            return Ok(out);
        }
        if out.iterations >= opts.max_iter {
            return Err(out);
        }
        r.scale(Complex64::new(1.0 / beta, 0.0));
        let mut basis = vec![r];
        let mut h: Vec<Vec<Complex64>> = Vec::new();
        let mut rot: Vec<(f64, Complex64)> = Vec::new();
        let mut g = vec![Complex64::new(beta, 0.0)];
        let mut k_used = 0;
        for k in 0..opts.restart {
            let mut z = basis[k].clone();
            pre.apply(s, &mut z, w);
            let mut v = Packed::zeros(n, m);
            apply_cayley_factor(cache, s, 1.0, &z, &mut v, w);
            out.matvecs += 1;
            out.iterations += 1;
            let mut col = vec![Complex64::new(0.0, 0.0); k + 2];
            for _ in 0..2 {
                for (j, q) in basis.iter().enumerate() {
                    let c = q.dotc(&v);
                    col[j] += c;
                    v.axpy(-c, q);
                }
            }
            let vn = v.norm();
            col[k + 1] = Complex64::new(vn, 0.0);
            for (j, &(c, sn)) in rot.iter().enumerate() {
                let (a, bb) = (col[j], col[j + 1]);
                col[j] = a * c + sn * bb;
                col[j + 1] = -sn.conj() * a + bb * c;
            }
            let (a, bb) = (col[k], col[k + 1]);
            let rho = (a.norm_sqr() + bb.norm_sqr()).sqrt();
            let (c, sn) = if a.norm() == 0.0 {
                (0.0, Complex64::new(1.0, 0.0))
            } else {
                (a.norm() / rho, (a / a.norm()) * bb.conj() / rho)
            };
            col[k] = a * c + sn * bb;
            col[k + 1] = Complex64::new(0.0, 0.0);
            rot.push((c, sn));
            let gk = g[k];
            g[k] = gk * c;
            g.push(-sn.conj() * gk);
            h.push(col);
            k_used = k + 1;
            let est = g[k + 1].norm() / bnorm;
            if est <= opts.tol * 0.5 || vn == 0.0 || out.iterations >= opts.max_iter {
                break;
            }
            v.scale(Complex64::new(1.0 / vn, 0.0));
            basis.push(v);
        }
        // back substitution on the triangular system
        let mut y = vec![Complex64::new(0.0, 0.0); k_used];
        for i in (0..k_used).rev() {
            let mut acc = g[i];
            for j in i + 1..k_used {
                acc -= h[j][i] * y[j];
            }
            y[i] = acc / h[i][i];
        }
        let mut dz = Packed::zeros(n, m);
        for (yi, q) in y.iter().zip(&basis) {
            dz.axpy(*yi, q);
        }
        pre.apply(s, &mut dz, w);
        x.axpy(Complex64::new(1.0, 0.0), &dz);
    }
}

/// One Crank–Nicolson step with a prebuilt preconditioner:
/// (1 + iτH/2) ψ' = (1 − iτH/2) ψ, τ in simulation time units (negative τ
/// steps backward).
pub(crate) fn cn_step(
    cache: &OperatorCache,
    pre: &SeparablePreconditioner,
    tau: f64,
    psi: &mut Packed,
    opts: &GmresOptions,
    w: &mut Scratch,
) -> Result<GmresOutcome> {
    let (n, m) = psi.shape();
    let s = 0.5 * tau;
    let mut b = Packed::zeros(n, m);
    apply_cayley_factor(cache, s, -1.0, psi, &mut b, w);
    let mut x = b.clone();
    pre.apply(s, &mut x, w);
    match gmres_cayley(cache, pre, s, &b, &mut x, opts, w) {
        Ok(mut o) => {
            o.matvecs += 1;
            *psi = x;
            Ok(o)
        }
        Err(o) => Err(Error::LinearSolveFailed {
            t: f64::NAN,
            residual: o.residual,
            iterations: o.iterations,
        }),
    }
}

/// Crank–Nicolson step for a cache already refreshed at the step midpoint.
/// `tau` is in simulation time units.
pub fn crank_nicolson_step(
    cache: &OperatorCache,
    state: &TwoBodyState,
    tau: f64,
    opts: &GmresOptions,
) -> Result<(TwoBodyState, GmresOutcome)> {
    if state.coeffs.shape() != cache.basis.shape() || *state.basis != *cache.basis {
        return Err(Error::BasisMismatch("state and operator cache use different bases".into()));
    }
    if !tau.is_finite() {
        return Err(Error::invalid("time step must be finite"));
    }
    let (n, m) = cache.basis.shape();
    let pre = SeparablePreconditioner::new(cache);
    let mut w = Scratch::new(n, m);
    let mut psi = Packed::from_state(state);
    let o = cn_step(cache, &pre, tau, &mut psi, opts, &mut w)?;
    Ok((psi.to_state(cache.basis.clone())?, o))
}
