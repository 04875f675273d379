//! Alternating optimization of the transmit covariance and the phase vector,
//! plus the two fixed-phase baselines.

use serde::{Deserialize, Serialize};

use crate::channel::{dbm_to_linear, effective_channel, PhaseVector, Receiver, WiretapChannel};
use crate::covariance::{optimize_covariance, CovSolverConfig};
use crate::error::{Error, Result};
use crate::objective::{build_l, secrecy_rate, TransmitCovariance};
use crate::phase::{mm_solve, MMConfig};

const REL_DENOM_FLOOR: f64 = 1e-12;

/// Starting phase vector `q_0`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "InitPhaseRepr", into = "InitPhaseRepr")]
pub enum InitPhase {
    /// All-ones (`Q = I`).
    #[default]
    Zero,
    /// Uniform phases drawn from the given seed.
    Random(u64),
    Given(PhaseVector),
}

/// Config-file form of [`InitPhase`]: `"zero"`, `{ random = 7 }` or
/// `{ given = [angles in radians] }`.
#[derive(Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum InitPhaseRepr {
    Zero,
    Random(u64),
    Given(Vec<f64>),
}

impl From<InitPhaseRepr> for InitPhase {
    fn from(r: InitPhaseRepr) -> Self {
        match r {
            InitPhaseRepr::Zero => Self::Zero,
            InitPhaseRepr::Random(s) => Self::Random(s),
            InitPhaseRepr::Given(theta) => Self::Given(PhaseVector::from_angles(&theta)),
        }
    }
}

impl From<InitPhase> for InitPhaseRepr {
    fn from(p: InitPhase) -> Self {
        match p {
            InitPhase::Zero => Self::Zero,
            InitPhase::Random(s) => Self::Random(s),
            InitPhase::Given(q) => Self::Given(q.angles()),
        }
    }
}

impl InitPhase {
    pub fn phase_vector(&self, n: usize) -> Result<PhaseVector> {
        match self {
            Self::Zero => Ok(PhaseVector::ones(n)),
            Self::Random(seed) => Ok(PhaseVector::random(n, *seed)),
            Self::Given(q) if q.len() == n => Ok(q.clone()),
            Self::Given(q) => Err(crate::error::dim_err("initial phase vector length", n, q.len())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AOConfig {
    /// Relative change of `C_s` between outer iterations that ends the run.
    pub ao_tol: f64,
    pub max_ao_iters: usize,
    pub cov: CovSolverConfig,
    pub mm: MMConfig,
    pub init_phase: InitPhase,
}

impl Default for AOConfig {
    fn default() -> Self {
        Self {
            ao_tol: 1e-4,
            max_ao_iters: 300,
            cov: CovSolverConfig::default(),
            mm: MMConfig::default(),
            init_phase: InitPhase::Zero,
        }
    }
}

impl AOConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.ao_tol > 0.0) {
            return Err(Error::Config("ao.ao_tol must be > 0".into()));
        }
        if self.max_ao_iters == 0 {
            return Err(Error::Config("ao.max_ao_iters must be >= 1".into()));
        }
        self.cov.validate()?;
        self.mm.validate()
    }
}

#[derive(Debug, Clone)]
pub struct AOReport {
    pub r_final: TransmitCovariance,
    pub q_final: PhaseVector,
    /// `(k, C_s(R_k, q_k))` in bits, `k` starting at 1.
    pub trace: Vec<(usize, f64)>,
    /// `C_s(R_k, q_{k-1})` right after each covariance step.
    pub cov_step_values: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl AOReport {
    pub fn final_c_s(&self) -> f64 {
        self.trace.last().map_or(0.0, |&(_, v)| v)
    }
}

fn covariance_step(ch: &WiretapChannel, q: &PhaseVector, p: f64, cfg: &CovSolverConfig, r_init: &TransmitCovariance) -> Result<(TransmitCovariance, f64)> {
    let h_b = effective_channel(ch, q, Receiver::Bob)?;
    let h_e = effective_channel(ch, q, Receiver::Eve)?;
    let rep = optimize_covariance(&h_b, &h_e, p, cfg, r_init)?;
    if !rep.converged {
        log::debug!("covariance step stopped with residual {:e}", rep.residual);
    }
    Ok((rep.r_opt, rep.c_s_achieved))
}

/// Alternates covariance and phase steps from `R_0 = (P/m) I` and the
/// configured `q_0` until the relative change of `C_s` is at most `ao_tol`.
pub fn ao_solve(ch: &WiretapChannel, p_dbm: f64, cfg: &AOConfig) -> Result<AOReport> {
    cfg.validate()?;
    if !p_dbm.is_finite() {
        return Err(Error::Domain(format!("transmit power must be finite, got {p_dbm} dBm")));
    }
    let dims = ch.dims();
    let p = dbm_to_linear(p_dbm);
    let mut r = TransmitCovariance::isotropic(dims.m, p)?;
    let mut q = cfg.init_phase.phase_vector(dims.n)?;
    let mut trace = Vec::new();
    let mut cov_step_values = Vec::new();
    let mut prev: Option<f64> = None;
    let mut converged = false;

    for k in 1..=cfg.max_ao_iters {
        let (r_next, after_cov) = covariance_step(ch, &q, p, &cfg.cov, &r)?;
        r = r_next;
        cov_step_values.push(after_cov);

        let l = build_l(ch, &r)?;
        q = mm_solve(&l, ch, &q, &cfg.mm)?.q;

        let c_s = secrecy_rate(ch, &r, &q)?.c_s;
        trace.push((k, c_s));
        if let Some(before) = prev {
            if (c_s - before).abs() / before.abs().max(REL_DENOM_FLOOR) <= cfg.ao_tol {
                converged = true;
                break;
            }
        }
        prev = Some(c_s);
    }

    Ok(AOReport { r_final: r, q_final: q, iterations: trace.len(), trace, cov_step_values, converged })
}

/// `C_s` after one covariance step with all phases zero (`q = 1`).
pub fn baseline_zero_phase(ch: &WiretapChannel, p_dbm: f64, cov_cfg: &CovSolverConfig) -> Result<f64> {
    baseline(ch, p_dbm, cov_cfg, &PhaseVector::ones(ch.dims().n))
}

/// `C_s` after one covariance step with phases drawn uniformly from `seed`.
pub fn baseline_random_phase(ch: &WiretapChannel, p_dbm: f64, cov_cfg: &CovSolverConfig, seed: u64) -> Result<f64> {
    baseline(ch, p_dbm, cov_cfg, &PhaseVector::random(ch.dims().n, seed))
}

fn baseline(ch: &WiretapChannel, p_dbm: f64, cov_cfg: &CovSolverConfig, q: &PhaseVector) -> Result<f64> {
    if !p_dbm.is_finite() {
        return Err(Error::Domain(format!("transmit power must be finite, got {p_dbm} dBm")));
    }
    let p = dbm_to_linear(p_dbm);
    let r0 = TransmitCovariance::isotropic(ch.dims().m, p)?;
    Ok(covariance_step(ch, q, p, cov_cfg, &r0)?.1)
}
