//! Transmit-covariance optimization for a fixed phase configuration.
//!
//! For fixed effective channels the secrecy rate equals the saddle value of
//!
//! ```text
//! f(R, K) = ln|K + H R H^H| - ln|K| - ln|I + H_E R H_E^H|,   H = [H_B; H_E]
//! ```
//!
//! maximized over `R >= 0, tr R <= P` and minimized over the joint noise
//! covariance `K = [[I, N], [N^H, I]] >= 0`. `f` is concave in `R` (for any
//! `K > 0` the pair (H, K) is less noisy than Eve alone) and convex in `K`.
//! The saddle point is tracked with a log-barrier path: for each barrier
//! weight `t` the stationarity system of
//!
//! ```text
//! psi_t = f / sigma + (ln|R| + ln(1 - tr R) - ln|K|) / t      (R scaled by 1/P)
//! ```
//!
//! is solved with Newton's method over the real coordinates of the Hermitian
//! `R` and the complex cross-correlation `N`, using a backtracking line search
//! on the residual norm. `sigma` normalizes the objective so the same barrier
//! schedule works from deep low-SNR to high-SNR channels.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Error, Result};
use crate::linalg::{self, c, CMatrix};
use crate::objective::{rate_terms, TransmitCovariance};

const INTERMEDIATE_CENTERING_TOL: f64 = 1e-5;
const MIN_STEP: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CovSolverConfig {
    /// Barrier duality-gap target, in units of the normalized objective.
    /// Also the stationarity tolerance for the final centering step.
    pub target_accuracy: f64,
    /// Newton step budget summed over all centering steps.
    pub max_newton_iters: usize,
    /// Barrier weight growth factor per outer iteration.
    pub barrier_mu: f64,
    pub backtrack_alpha: f64,
    pub backtrack_beta: f64,
}

impl Default for CovSolverConfig {
    fn default() -> Self {
        Self {
            target_accuracy: 1e-8,
            max_newton_iters: 400,
            barrier_mu: 20.0,
            backtrack_alpha: 0.01,
            backtrack_beta: 0.5,
        }
    }
}

impl CovSolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.target_accuracy > 0.0) {
            return Err(Error::Config("cov.target_accuracy must be > 0".into()));
        }
        if !(self.backtrack_alpha > 0.0 && self.backtrack_alpha < 0.5) {
            return Err(Error::Config("cov.backtrack_alpha must lie in (0, 0.5)".into()));
        }
        if !(self.backtrack_beta > 0.0 && self.backtrack_beta < 1.0) {
            return Err(Error::Config("cov.backtrack_beta must lie in (0, 1)".into()));
        }
        if !(self.barrier_mu > 1.0) {
            return Err(Error::Config("cov.barrier_mu must be > 1".into()));
        }
        if self.max_newton_iters == 0 {
            return Err(Error::Config("cov.max_newton_iters must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct CovSolverReport {
    pub r_opt: TransmitCovariance,
    /// Secrecy rate of `r_opt`, bits.
    pub c_s_achieved: f64,
    /// Newton steps taken.
    pub iterations: usize,
    pub converged: bool,
    /// Stationarity residual of the final barrier subproblem, with the
    /// covariance block measured in the barrier's local metric.
    pub residual: f64,
}

/// Maximizes `log2|I + H_B R H_B^H| - log2|I + H_E R H_E^H|` over
/// `R >= 0, tr R <= p`.
///
/// The returned covariance is never worse than `r_init` (nor than `R = 0`).
/// Failure of the Newton iteration is reported through `converged = false`,
/// not as an error.
pub fn optimize_covariance(
    h_b: &CMatrix,
    h_e: &CMatrix,
    p: f64,
    cfg: &CovSolverConfig,
    r_init: &TransmitCovariance,
) -> Result<CovSolverReport> {
    cfg.validate()?;
    let m = h_b.ncols();
    if h_e.ncols() != m {
        return Err(dim_err("H_E columns", m, h_e.ncols()));
    }
    if r_init.dim() != m {
        return Err(dim_err("R_init dimension", m, r_init.dim()));
    }
    if !(p > 0.0) || !p.is_finite() {
        return Err(Error::Precondition(format!("power budget must be positive, got {p}")));
    }
    if r_init.trace() > p + linalg::PSD_TOL {
        return Err(Error::Precondition(format!("tr(R_init) = {} exceeds P = {p}", r_init.trace())));
    }
    if !linalg::is_finite(h_b) || !linalg::is_finite(h_e) {
        return Err(Error::NonFinite);
    }

    if h_b.iter().all(|z| z.norm_sqr() == 0.0) {
        return Ok(CovSolverReport {
            r_opt: TransmitCovariance::zero(m, p)?,
            c_s_achieved: 0.0,
            iterations: 0,
            converged: true,
            residual: 0.0,
        });
    }

    let sqrt_p = p.sqrt();
    let problem = SaddleProblem::new(&h_b.scale(sqrt_p), &h_e.scale(sqrt_p))?;
    let start = {
        let r0 = r_init.matrix().scale(0.9 / p) + CMatrix::identity(m, m).scale(0.05 / m as f64);
        let r0 = linalg::hermitian_part(&r0);
        let slack = 1.0 - linalg::trace(&r0).re;
        SaddlePoint { r: r0, n: CMatrix::zeros(problem.d, problem.e), slack }
    };
    let outcome = problem.solve(start, cfg);

    // Candidates: barrier solution, warm start, and the zero covariance.
    let r_barrier = project_feasible(&outcome.point.r.scale(p), p);
    let mut best = TransmitCovariance::new(r_barrier, p)?;
    let mut best_rate = rate_terms(h_b, h_e, best.matrix())?.c_s;
    let init_rate = rate_terms(h_b, h_e, r_init.matrix())?.c_s;
    if init_rate > best_rate {
        best = TransmitCovariance::new(r_init.matrix().clone(), p)?;
        best_rate = init_rate;
    }
    if best_rate < 0.0 {
        best = TransmitCovariance::zero(m, p)?;
        best_rate = 0.0;
    }

    Ok(CovSolverReport {
        r_opt: best,
        c_s_achieved: best_rate,
        iterations: outcome.newton_steps,
        converged: outcome.converged,
        residual: outcome.residual,
    })
}

/// Hermitian part with eigenvalues clipped at zero and trace capped at `p`.
fn project_feasible(r: &CMatrix, p: f64) -> CMatrix {
    let r = linalg::hermitian_part(r);
    let r = match linalg::eigh(&r) {
        Ok((vals, vecs)) if vals[0] < 0.0 => {
            let clipped = CMatrix::from_diagonal(&vals.map(|v| c(v.max(0.0), 0.0)));
            linalg::hermitian_part(&(&vecs * clipped * vecs.adjoint()))
        }
        _ => r,
    };
    let tr = linalg::trace(&r).re;
    if tr > p {
        r.scale(p / tr)
    } else {
        r
    }
}

/// One real coordinate direction expressed as a sparse complex matrix.
#[derive(Debug, Clone)]
struct Direction {
    terms: Vec<(Complex64, usize, usize)>,
}

impl Direction {
    fn single(coef: Complex64, row: usize, col: usize) -> Self {
        Self { terms: vec![(coef, row, col)] }
    }

    fn pair(a: (Complex64, usize, usize), b: (Complex64, usize, usize)) -> Self {
        Self { terms: vec![a, b] }
    }

    /// `tr(A D)`.
    fn trace_with(&self, a: &CMatrix) -> Complex64 {
        self.terms.iter().map(|&(k, r, col)| k * a[(col, r)]).sum()
    }

    fn trace(&self) -> Complex64 {
        self.terms.iter().filter(|t| t.1 == t.2).map(|t| t.0).sum()
    }
}

/// `tr(A D_p B D_q)` using `tr(A e_ab B e_cd) = A_da B_bc`.
fn trace_quad(a: &CMatrix, p: &Direction, b: &CMatrix, q: &Direction) -> Complex64 {
    let mut s = Complex64::new(0.0, 0.0);
    for &(kp, ra, cb) in &p.terms {
        for &(kq, rc, cd) in &q.terms {
            s += kp * kq * a[(cd, ra)] * b[(cb, rc)];
        }
    }
    s
}

/// Real coordinates of an m x m Hermitian matrix.
fn hermitian_basis(m: usize) -> Vec<Direction> {
    let one = c(1.0, 0.0);
    let j = c(0.0, 1.0);
    let mut out = Vec::with_capacity(m * m);
    for i in 0..m {
        out.push(Direction::single(one, i, i));
    }
    for i in 0..m {
        for k in (i + 1)..m {
            out.push(Direction::pair((one, i, k), (one, k, i)));
            out.push(Direction::pair((j, i, k), (-j, k, i)));
        }
    }
    out
}

/// Real coordinates of the off-diagonal block `N` (d x e) embedded in the
/// (d + e) x (d + e) noise covariance.
fn cross_basis(d: usize, e: usize) -> Vec<Direction> {
    let one = c(1.0, 0.0);
    let j = c(0.0, 1.0);
    let mut out = Vec::with_capacity(2 * d * e);
    for a in 0..d {
        for b in 0..e {
            out.push(Direction::pair((one, a, d + b), (one, d + b, a)));
            out.push(Direction::pair((j, a, d + b), (-j, d + b, a)));
        }
    }
    out
}

#[derive(Debug, Clone)]
struct SaddlePoint {
    /// Normalized covariance `R / P`.
    r: CMatrix,
    /// Bob/Eve noise cross-correlation.
    n: CMatrix,
    /// `1 - tr(r)`, carried separately so it keeps full relative precision
    /// once the power constraint becomes active.
    slack: f64,
}

impl SaddlePoint {
    fn step(&self, r_dirs: &[Direction], n_dirs: &[Direction], x: &DVector<f64>, s: f64) -> Self {
        let mut r = self.r.clone();
        let mut dtrace = 0.0;
        for (dir, &v) in r_dirs.iter().zip(x.iter()) {
            for &(k, i, j) in &dir.terms {
                r[(i, j)] += k * (s * v);
            }
            dtrace += (dir.trace() * (s * v)).re;
        }
        let d = self.n.nrows();
        let mut n = self.n.clone();
        for (dir, &v) in n_dirs.iter().zip(x.iter().skip(r_dirs.len())) {
            // only the upper-right block entry is needed to update N
            let &(k, i, j) = &dir.terms[0];
            n[(i, j - d)] += k * (s * v);
        }
        Self { r: linalg::hermitian_part(&r), n, slack: self.slack - dtrace }
    }
}

struct SaddleProblem {
    m: usize,
    d: usize,
    e: usize,
    /// Stacked `[G_B; G_E]`.
    g: CMatrix,
    g_e: CMatrix,
    /// Objective normalization.
    sigma: f64,
    /// Barrier complexity: m (ln|R|) + 1 (trace) + d + e (ln|K|).
    nu: f64,
    r_dirs: Vec<Direction>,
    n_dirs: Vec<Direction>,
}

struct Evaluation {
    grad: DVector<f64>,
    hess: DMatrix<f64>,
    /// Gradient norm with the covariance block measured in the local
    /// metric of the log-det barrier: `||R^{1/2} grad_R R^{1/2}||_F`.
    stationarity: f64,
}

struct SolveOutcome {
    point: SaddlePoint,
    newton_steps: usize,
    converged: bool,
    residual: f64,
}

impl SaddleProblem {
    fn new(g_b: &CMatrix, g_e: &CMatrix) -> Result<Self> {
        let (d, m) = g_b.shape();
        let e = g_e.nrows();
        let mut g = CMatrix::zeros(d + e, m);
        g.rows_mut(0, d).copy_from(g_b);
        g.rows_mut(d, e).copy_from(g_e);
        let wb = linalg::lambda_max(&linalg::hermitian_part(&(g_b.adjoint() * g_b)))?;
        let we = linalg::lambda_max(&linalg::hermitian_part(&(g_e.adjoint() * g_e)))?;
        let sigma = wb.max(we).clamp(f64::MIN_POSITIVE, 1.0);
        Ok(Self {
            m,
            d,
            e,
            g,
            g_e: g_e.clone(),
            sigma,
            nu: (m + 1 + d + e) as f64,
            r_dirs: hermitian_basis(m),
            n_dirs: cross_basis(d, e),
        })
    }

    fn noise_cov(&self, n: &CMatrix) -> CMatrix {
        let (d, e) = (self.d, self.e);
        let mut k = CMatrix::identity(d + e, d + e);
        k.view_mut((0, d), (d, e)).copy_from(n);
        k.view_mut((d, 0), (e, d)).copy_from(&n.adjoint());
        k
    }

    fn is_interior(&self, pt: &SaddlePoint) -> bool {
        pt.slack > 0.0 && linalg::cholesky(&pt.r).is_ok() && linalg::cholesky(&self.noise_cov(&pt.n)).is_ok()
    }

    /// Gradient (and optionally Hessian) of `psi_t` in the real coordinates.
    fn evaluate(&self, pt: &SaddlePoint, t: f64, with_hessian: bool) -> Result<Evaluation> {
        let k = self.noise_cov(&pt.n);
        let m_mat = &k + &self.g * &pt.r * self.g.adjoint();
        let s_mat = linalg::identity_plus_congruence(&self.g_e, &pt.r);
        let m_inv = linalg::inv_hpd(&m_mat)?;
        let k_inv = linalg::inv_hpd(&k)?;
        let s_inv = linalg::inv_hpd(&s_mat)?;
        let r_inv = linalg::inv_hpd(&pt.r)?;
        let slack = pt.slack;
        if !(slack > 0.0) {
            return Err(Error::Domain("trace constraint violated".into()));
        }

        let u = linalg::hermitian_part(&(self.g.adjoint() * &m_inv * &self.g));
        let v = linalg::hermitian_part(&(self.g_e.adjoint() * &s_inv * &self.g_e));
        let pm = &m_inv * &self.g;

        let inv_sigma = 1.0 / self.sigma;
        let inv_t = 1.0 / t;
        let nr = self.r_dirs.len();
        let nn = self.n_dirs.len();
        let dim = nr + nn;

        let mut grad = DVector::zeros(dim);
        for (p, dir) in self.r_dirs.iter().enumerate() {
            let fd = dir.trace_with(&u) - dir.trace_with(&v);
            let bd = dir.trace_with(&r_inv) - dir.trace() / slack;
            grad[p] = (fd * inv_sigma + bd * inv_t).re;
        }
        for (p, dir) in self.n_dirs.iter().enumerate() {
            let fd = dir.trace_with(&m_inv) - dir.trace_with(&k_inv);
            let bd = -dir.trace_with(&k_inv);
            grad[nr + p] = (fd * inv_sigma + bd * inv_t).re;
        }

        let stationarity = {
            let (vals, vecs) = linalg::eigh(&pt.r)?;
            let half = &vecs * CMatrix::from_diagonal(&vals.map(|x| c(x.max(0.0).sqrt(), 0.0))) * vecs.adjoint();
            let scaled = (&half * (&u - &v) * &half).scale(inv_sigma)
                + (CMatrix::identity(self.m, self.m) - pt.r.scale(1.0 / slack)).scale(inv_t);
            let n_part = grad.rows(nr, nn).norm_squared();
            (scaled.norm_squared() + n_part).sqrt()
        };

        let mut hess = DMatrix::zeros(if with_hessian { dim } else { 0 }, if with_hessian { dim } else { 0 });
        if with_hessian {
            let pm_h = pm.adjoint();
            for (p, dp) in self.r_dirs.iter().enumerate() {
                for (q, dq) in self.r_dirs.iter().enumerate().skip(p) {
                    let f2 = -trace_quad(&u, dp, &u, dq) + trace_quad(&v, dp, &v, dq);
                    let b2 = -trace_quad(&r_inv, dp, &r_inv, dq) - dp.trace() * dq.trace() / (slack * slack);
                    let h = (f2 * inv_sigma + b2 * inv_t).re;
                    hess[(p, q)] = h;
                    hess[(q, p)] = h;
                }
                for (q, dq) in self.n_dirs.iter().enumerate() {
                    // d/dN of tr(U E_p) = -tr(P^H D_q P E_p)
                    let f2 = -trace_quad(&pm_h, dq, &pm, dp);
                    let h = (f2 * inv_sigma).re;
                    hess[(p, nr + q)] = h;
                    hess[(nr + q, p)] = h;
                }
            }
            for (p, dp) in self.n_dirs.iter().enumerate() {
                for (q, dq) in self.n_dirs.iter().enumerate().skip(p) {
                    let kk = trace_quad(&k_inv, dp, &k_inv, dq);
                    let f2 = -trace_quad(&m_inv, dp, &m_inv, dq) + kk;
                    let h = (f2 * inv_sigma + kk * inv_t).re;
                    hess[(nr + p, nr + q)] = h;
                    hess[(nr + q, nr + p)] = h;
                }
            }
        }
        Ok(Evaluation { grad, hess, stationarity })
    }

    fn residual(&self, pt: &SaddlePoint, t: f64) -> Option<f64> {
        if !self.is_interior(pt) {
            return None;
        }
        self.evaluate(pt, t, false).ok().map(|ev| ev.grad.norm())
    }

    fn solve(&self, start: SaddlePoint, cfg: &CovSolverConfig) -> SolveOutcome {
        let mut pt = start;
        let t_final = self.nu / cfg.target_accuracy;
        let mut t = 1.0f64.min(t_final);
        let mut steps = 0usize;
        loop {
            let last = t >= t_final;
            // Intermediate centering only needs to stay near the central path.
            let tol = if last { cfg.target_accuracy } else { cfg.target_accuracy.max(INTERMEDIATE_CENTERING_TOL) };
            let res = self.center(&mut pt, t, tol, cfg, &mut steps);
            if last || !(res <= tol) {
                if !(res <= tol) {
                    log::debug!("centering stopped at t = {t:e} with residual {res:e}");
                }
                return SolveOutcome { point: pt, newton_steps: steps, converged: last && res <= tol, residual: res };
            }
            t = (t * cfg.barrier_mu).min(t_final);
        }
    }

    /// Newton iterations on the stationarity system of `psi_t`. Returns the
    /// final residual norm (NaN if the point left the domain).
    fn center(&self, pt: &mut SaddlePoint, t: f64, tol: f64, cfg: &CovSolverConfig, steps: &mut usize) -> f64 {
        loop {
            let ev = match self.evaluate(pt, t, true) {
                Ok(ev) => ev,
                Err(_) => return f64::NAN,
            };
            let res = ev.grad.norm();
            if ev.stationarity <= tol || *steps >= cfg.max_newton_iters {
                return ev.stationarity;
            }
            *steps += 1;
            let delta = match ev.hess.lu().solve(&(-&ev.grad)) {
                Some(dx) if dx.iter().all(|v| v.is_finite()) => dx,
                _ => return ev.stationarity,
            };
            let mut s = 1.0;
            let accepted = loop {
                let cand = pt.step(&self.r_dirs, &self.n_dirs, &delta, s);
                if let Some(r_new) = self.residual(&cand, t) {
                    if r_new <= (1.0 - cfg.backtrack_alpha * s) * res {
                        break Some(cand);
                    }
                }
                s *= cfg.backtrack_beta;
                if s < MIN_STEP {
                    break None;
                }
            };
            match accepted {
                Some(next) => *pt = next,
                None => return ev.stationarity,
            }
        }
    }
}
