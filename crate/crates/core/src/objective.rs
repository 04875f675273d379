//! Secrecy-rate objective and its fixed-covariance form used by the phase step.

use serde::Serialize;

use crate::channel::{effective_channel, PhaseVector, Receiver, WiretapChannel};
use crate::error::{dim_err, Error, Result};
use crate::linalg::{self, identity_plus_congruence, CMatrix, PSD_TOL};

/// Transmit covariance `R` (m x m, Hermitian PSD) with power budget `P`
/// satisfying `tr(R) <= P`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransmitCovariance {
    r: CMatrix,
    power_budget: f64,
}

impl TransmitCovariance {
    pub fn new(r: CMatrix, power_budget: f64) -> Result<Self> {
        if !(power_budget > 0.0) || !power_budget.is_finite() {
            return Err(Error::Domain(format!("power budget must be positive, got {power_budget}")));
        }
        let r = linalg::symmetrize_checked(&r)?;
        if !linalg::is_psd(&r, PSD_TOL) {
            return Err(Error::Precondition("transmit covariance is not PSD".into()));
        }
        let tr = linalg::trace(&r).re;
        if tr > power_budget + PSD_TOL {
            return Err(Error::Precondition(format!("tr(R) = {tr} exceeds power budget {power_budget}")));
        }
        Ok(Self { r, power_budget })
    }

    /// `(P / m) I`, a strictly feasible interior point.
    pub fn isotropic(m: usize, power_budget: f64) -> Result<Self> {
        Self::new(CMatrix::identity(m, m).scale(power_budget / m as f64), power_budget)
    }

    pub fn zero(m: usize, power_budget: f64) -> Result<Self> {
        Self::new(CMatrix::zeros(m, m), power_budget)
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.r
    }

    pub fn power_budget(&self) -> f64 {
        self.power_budget
    }

    pub fn dim(&self) -> usize {
        self.r.nrows()
    }

    pub fn trace(&self) -> f64 {
        linalg::trace(&self.r).re
    }
}

/// `c_s = f_b + f_e`, all in bits per channel use.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ObjectiveValue {
    pub c_s: f64,
    pub f_b: f64,
    pub f_e: f64,
}

/// `log2|I + H_B R H_B^H| - log2|I + H_E R H_E^H|` and its two halves.
pub fn rate_terms(h_b: &CMatrix, h_e: &CMatrix, r: &CMatrix) -> Result<ObjectiveValue> {
    let m = r.nrows();
    if h_b.ncols() != m {
        return Err(dim_err("H_B columns vs R", m, h_b.ncols()));
    }
    if h_e.ncols() != m {
        return Err(dim_err("H_E columns vs R", m, h_e.ncols()));
    }
    let f_b = linalg::logdet2(&identity_plus_congruence(h_b, r))?;
    let f_e = -linalg::logdet2(&identity_plus_congruence(h_e, r))?;
    Ok(ObjectiveValue { c_s: f_b + f_e, f_b, f_e })
}

/// Secrecy rate of the covariance `r` under the phase configuration `q`.
pub fn secrecy_rate(ch: &WiretapChannel, r: &TransmitCovariance, q: &PhaseVector) -> Result<ObjectiveValue> {
    let h_b = effective_channel(ch, q, Receiver::Bob)?;
    let h_e = effective_channel(ch, q, Receiver::Eve)?;
    rate_terms(&h_b, &h_e, r.matrix())
}

/// `L = H_AI R H_AI^H` (n x n).
pub fn build_l(ch: &WiretapChannel, r: &TransmitCovariance) -> Result<CMatrix> {
    let h = ch.h_ai();
    if h.ncols() != r.dim() {
        return Err(dim_err("H_AI columns vs R", h.ncols(), r.dim()));
    }
    Ok(linalg::hermitian_part(&(h * r.matrix() * h.adjoint())))
}

/// `H diag(q)`: scales column `i` of `h` by `q_i`.
pub(crate) fn scale_columns(h: &CMatrix, q: &PhaseVector) -> CMatrix {
    let mut out = h.clone();
    for (j, mut col) in out.column_iter_mut().enumerate() {
        col *= q.as_vector()[j];
    }
    out
}

/// Fixed-covariance objective `f(Q) = f_B(Q) + f_E(Q)` in bits, where `L`
/// carries the covariance through `H_AI`.
pub fn f_of_q(l: &CMatrix, ch: &WiretapChannel, q: &PhaseVector) -> Result<f64> {
    let n = ch.dims().n;
    if l.shape() != (n, n) {
        return Err(dim_err("L shape", format!("{n}x{n}"), format!("{}x{}", l.nrows(), l.ncols())));
    }
    if q.len() != n {
        return Err(dim_err("phase vector length", n, q.len()));
    }
    let g_b = scale_columns(ch.h_ib(), q);
    let g_e = scale_columns(ch.h_ie(), q);
    let f_b = linalg::logdet2(&identity_plus_congruence(&g_b, l))?;
    let f_e = linalg::logdet2(&identity_plus_congruence(&g_e, l))?;
    Ok(f_b - f_e)
}
