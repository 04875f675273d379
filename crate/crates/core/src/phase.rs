//! Phase-shift optimization for a fixed transmit covariance.
//!
//! Minorization-maximization on `f(Q) = f_B(Q) + f_E(Q)`. At an expansion
//! point `q~` three bounds are stacked:
//!
//! 1. `-ln|I + X|` is convex, so `f_E` is bounded below by its linearization
//!    at `q~`; `f_B = -ln|I - T (I + T^H T)^{-1} T^H|` is bounded the same way.
//! 2. The matrix-fractional term `tr(W T (I + T^H T)^{-1} T^H)` is jointly
//!    convex in `(T, I + T^H T)`, giving the affine-plus-quadratic bound
//!    `-q^H Z q + 2 Re{q^H a} + const`.
//! 3. `q^H Z q <= lambda_max(Z) n - 2 Re{q^H (lambda_max(Z) I - Z) q~} - q~^H Z q~`
//!    on the unit-modulus set.
//!
//! The last surrogate is linear in `q`, so its maximizer over `|q_i| = 1` is
//! `q_i = exp(j arg v_i)` with `v = (lambda_max(Z) I - Z) q~ + a`.
//!
//! All bound constants are kept in nats; [`surrogate_value`] reports bits so
//! it is directly comparable with [`f_of_q`].

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::{PhaseVector, WiretapChannel};
use crate::error::{dim_err, Error, Result};
use crate::linalg::{self, c, CMatrix, CVector, PSD_TOL};
use crate::objective::{f_of_q, scale_columns};

const LN_2: f64 = std::f64::consts::LN_2;

/// Relative-change floor guarding the stopping test near `f = 0`.
const REL_DENOM_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MMConfig {
    /// Stop once `|f_{k+1} - f_k| / max(|f_k|, 1e-12) <= tol`.
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for MMConfig {
    fn default() -> Self {
        Self { tol: 1e-4, max_iters: 500 }
    }
}

impl MMConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::Config("mm.tol must be > 0".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::Config("mm.max_iters must be >= 1".into()));
        }
        Ok(())
    }
}

/// Hermitian PSD square root. Eigenvalues in `[-1e-8, 0)` are treated as
/// round-off and clipped to zero.
pub fn sqrt_psd(l: &CMatrix) -> Result<CMatrix> {
    let (vals, vecs) = linalg::eigh(l)?;
    if !vals.is_empty() && vals[0] < -PSD_TOL {
        return Err(Error::Domain(format!("matrix is not PSD (smallest eigenvalue {:e})", vals[0])));
    }
    let roots = CMatrix::from_diagonal(&vals.map(|v| c(v.max(0.0).sqrt(), 0.0)));
    Ok(linalg::hermitian_part(&(&vecs * roots * vecs.adjoint())))
}

/// Every intermediate of the surrogate chain at one expansion point.
///
/// Naming follows the construction: `qt_b = I + H_IB Q~ L Q~^H H_IB^H`,
/// `qt_e = I + H_IE Q~ L Q~^H H_IE^H`, `t_tilde = H_IB Q~ L^{1/2}`,
/// `j_b = T~ (I + T~^H T~)^{-1}`. The constants `c1..c3` are in nats.
#[derive(Debug, Clone)]
pub struct MMWorkspace {
    pub q_tilde: PhaseVector,
    pub l_half: CMatrix,
    pub qt_b: CMatrix,
    pub qt_e: CMatrix,
    pub t_tilde: CMatrix,
    pub j_b: CMatrix,
    pub a1: CMatrix,
    pub a2: CMatrix,
    pub a3: CMatrix,
    pub a4: CMatrix,
    pub a5: CMatrix,
    pub z: CMatrix,
    pub a: CVector,
    pub lambda_max: f64,
    pub v: CVector,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
}

pub fn build_workspace(l: &CMatrix, ch: &WiretapChannel, q_tilde: &PhaseVector) -> Result<MMWorkspace> {
    let dims = ch.dims();
    let n = dims.n;
    if l.shape() != (n, n) {
        return Err(dim_err("L shape", format!("{n}x{n}"), format!("{}x{}", l.nrows(), l.ncols())));
    }
    if q_tilde.len() != n {
        return Err(dim_err("expansion point length", n, q_tilde.len()));
    }
    let l = linalg::symmetrize_checked(l)?;
    let l_half = sqrt_psd(&l)?;
    let h_ib = ch.h_ib();
    let h_ie = ch.h_ie();

    let hq_b = scale_columns(h_ib, q_tilde);
    let hq_e = scale_columns(h_ie, q_tilde);
    let t_tilde = &hq_b * &l_half;
    let qt_b = linalg::identity_plus_congruence(&hq_b, &l);
    let qt_e = linalg::identity_plus_congruence(&hq_e, &l);

    // J_B = T~ (I + T~^H T~)^{-1}, via a solve against T~^H.
    let b_tilde = linalg::identity_plus_congruence(&t_tilde.adjoint(), &CMatrix::identity(dims.d, dims.d));
    let j_b = linalg::solve_hpd(&b_tilde, &t_tilde.adjoint())?.adjoint();

    // The matrix-fractional bound is weighted by (I - T~ B~^{-1} T~^H)^{-1},
    // which equals qt_b by the matrix inversion lemma.
    let weight_j = &qt_b * &j_b;
    let a1 = &weight_j * &l_half;
    let a2 = linalg::hermitian_part(&(h_ib.adjoint() * h_ib));
    let a3 = &l_half * j_b.adjoint();
    let a4 = h_ib.adjoint() * &a1;
    let a5 = linalg::solve_hpd(&qt_e, h_ie)?;

    let z_b = linalg::hadamard(&a2, &(&a3 * &a1).transpose())?;
    let z_e = linalg::hadamard(&(h_ie.adjoint() * &a5), &l.transpose())?;
    let z = linalg::hermitian_part(&(z_b + z_e));
    let a = a4.diagonal();

    let signal_e = &hq_e * &l * hq_e.adjoint();
    let c1 = -linalg::logdet(&qt_e)? + linalg::trace(&linalg::solve_hpd(&qt_e, &signal_e)?).re;
    let c2 = linalg::logdet(&qt_b)? - linalg::trace(&(&t_tilde * t_tilde.adjoint())).re;
    let c3 = -linalg::trace_of_product(&qt_b, &(&t_tilde * j_b.adjoint())).re
        + linalg::trace_of_product(&weight_j, &(t_tilde.adjoint() * &t_tilde * j_b.adjoint())).re;

    let lambda_max = linalg::lambda_max(&z)?.max(0.0);
    let q = q_tilde.as_vector();
    let v = q.scale(lambda_max) - &z * q + &a;

    Ok(MMWorkspace {
        q_tilde: q_tilde.clone(),
        l_half,
        qt_b,
        qt_e,
        t_tilde,
        j_b,
        a1,
        a2,
        a3,
        a4,
        a5,
        z,
        a,
        lambda_max,
        v,
        c1,
        c2,
        c3,
    })
}

fn quad(z: &CMatrix, x: &CVector, y: &CVector) -> Complex64 {
    x.dotc(&(z * y))
}

impl MMWorkspace {
    fn constants(&self) -> f64 {
        self.c1 + self.c2 + self.c3
    }

    /// Quadratic bound `-q^H Z q + 2 Re{q^H a} + C1 + C2 + C3`, in bits.
    pub fn quadratic_bound(&self, q: &PhaseVector) -> f64 {
        let q = q.as_vector();
        let val = -quad(&self.z, q, q).re + 2.0 * q.dotc(&self.a).re + self.constants();
        val / LN_2
    }

    /// Majorizer of `q^H Z q` on the unit-modulus set, in nats.
    pub fn g_tilde(&self, q: &PhaseVector) -> f64 {
        let q = q.as_vector();
        let qt = self.q_tilde.as_vector();
        let n = q.len() as f64;
        let shifted = qt.scale(self.lambda_max) - &self.z * qt;
        2.0 * n * self.lambda_max - 2.0 * q.dotc(&shifted).re - quad(&self.z, qt, qt).re
    }
}

/// Final linear surrogate `-g~(q, q~) + 2 Re{q^H a} + C1 + C2 + C3`, in bits.
pub fn surrogate_value(ws: &MMWorkspace, q: &PhaseVector) -> f64 {
    let val = -ws.g_tilde(q) + 2.0 * q.as_vector().dotc(&ws.a).re + ws.constants();
    val / LN_2
}

/// `argmax Re{q^H v}` over unit-modulus `q`: `q_i = v_i / |v_i|`. Coordinates
/// with `v_i = 0` keep the phase from `fallback`.
pub fn unimodular_maximizer(v: &CVector, fallback: &PhaseVector) -> PhaseVector {
    let q = CVector::from_iterator(
        v.len(),
        v.iter().zip(fallback.as_vector().iter()).map(|(vi, fi)| {
            let r = vi.norm();
            if r > 0.0 && r.is_finite() {
                vi / r
            } else {
                *fi
            }
        }),
    );
    PhaseVector::new(q).expect("normalized entries are unit-modulus")
}

/// One MM step: the closed-form maximizer of the surrogate built at `ws.q_tilde`.
pub fn mm_update(ws: &MMWorkspace) -> PhaseVector {
    unimodular_maximizer(&ws.v, &ws.q_tilde)
}

#[derive(Debug, Clone)]
pub struct MMOutcome {
    pub q: PhaseVector,
    /// `f` (bits) at the starting point followed by each accepted iterate.
    pub trace: Vec<f64>,
    pub converged: bool,
}

impl MMOutcome {
    pub fn iterations(&self) -> usize {
        self.trace.len() - 1
    }

    pub fn final_value(&self) -> f64 {
        *self.trace.last().expect("trace holds the starting value")
    }
}

/// Runs MM from `q0` until the relative change of `f` drops below `cfg.tol`
/// or `cfg.max_iters` updates have been made.
pub fn mm_solve(l: &CMatrix, ch: &WiretapChannel, q0: &PhaseVector, cfg: &MMConfig) -> Result<MMOutcome> {
    cfg.validate()?;
    let mut q = q0.clone();
    let mut f_prev = f_of_q(l, ch, &q)?;
    let mut trace = vec![f_prev];
    for _ in 0..cfg.max_iters {
        let ws = build_workspace(l, ch, &q)?;
        let q_next = mm_update(&ws);
        let f_next = f_of_q(l, ch, &q_next)?;
        if f_next < f_prev {
            // Only reachable through round-off once the ascent has stalled.
            log::debug!("MM step lowered f by {:e}; stopping", f_prev - f_next);
            return Ok(MMOutcome { q, trace, converged: true });
        }
        trace.push(f_next);
        q = q_next;
        let rel = (f_next - f_prev).abs() / f_prev.abs().max(REL_DENOM_FLOOR);
        f_prev = f_next;
        if rel <= cfg.tol {
            return Ok(MMOutcome { q, trace, converged: true });
        }
    }
    Ok(MMOutcome { q, trace, converged: false })
}
