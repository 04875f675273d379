//! Three-hop channel model: Alice -> IRS -> {Bob, Eve}.
//!
//! The direct Alice-Bob and Alice-Eve links are blocked, so every path goes
//! through the surface. Receiver noise is circularly-symmetric complex
//! Gaussian with unit variance at both Bob and Eve; transmit power and channel
//! gains are expressed in the same (milliwatt) unit system.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Error, Result};
use crate::linalg::{CMatrix, CVector};

/// Allowed deviation of `|q_i|` from one.
pub const UNIT_MODULUS_TOL: f64 = 1e-12;

/// Antenna / element counts: `m` at Alice, `n` IRS elements, `d` at Bob, `e` at Eve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub m: usize,
    pub n: usize,
    pub d: usize,
    pub e: usize,
}

impl Dims {
    pub fn new(m: usize, n: usize, d: usize, e: usize) -> Self {
        Self { m, n, d, e }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.n == 0 || self.d == 0 || self.e == 0 {
            return Err(Error::Config(format!("all dimensions must be >= 1, got {self:?}")));
        }
        Ok(())
    }
}

/// Large-scale fading parameters. Distances are in meters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FadingConfig {
    /// Path loss at the 1 m reference distance, in dB.
    pub pathloss_ref_db: f64,
    pub pathloss_exponent: f64,
    pub dist_ai: f64,
    pub dist_ib: f64,
    pub dist_ie: f64,
    pub seed: u64,
}

impl Default for FadingConfig {
    fn default() -> Self {
        Self {
            pathloss_ref_db: -30.0,
            pathloss_exponent: 3.0,
            dist_ai: 10.0,
            dist_ib: 10.0,
            dist_ie: 10.0,
            seed: 0,
        }
    }
}

impl FadingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.pathloss_exponent > 0.0) {
            return Err(Error::Config("pathloss_exponent must be > 0".into()));
        }
        for (name, d) in [("dist_ai", self.dist_ai), ("dist_ib", self.dist_ib), ("dist_ie", self.dist_ie)] {
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::Config(format!("{name} must be a positive distance, got {d}")));
            }
        }
        if !self.pathloss_ref_db.is_finite() {
            return Err(Error::Config("pathloss_ref_db must be finite".into()));
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }
}

/// Amplitude multiplier for a link of length `dist_m`:
/// `sqrt(10^((PL_ref - 10 * alpha * log10(dist)) / 10))`.
pub fn path_loss_linear(dist_m: f64, cfg: &FadingConfig) -> Result<f64> {
    if !(dist_m > 0.0) || !dist_m.is_finite() {
        return Err(Error::Domain(format!("distance must be positive, got {dist_m}")));
    }
    let db = cfg.pathloss_ref_db - 10.0 * cfg.pathloss_exponent * dist_m.log10();
    Ok(10f64.powf(db / 10.0).sqrt())
}

/// Converts a power in dBm to linear milliwatts.
pub fn dbm_to_linear(p_dbm: f64) -> f64 {
    10f64.powf(p_dbm / 10.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Receiver {
    Bob,
    Eve,
}

/// Channel matrices of one realization: `h_ai` is n x m, `h_ib` is d x n and
/// `h_ie` is e x n.
#[derive(Debug, Clone, PartialEq)]
pub struct WiretapChannel {
    h_ai: CMatrix,
    h_ib: CMatrix,
    h_ie: CMatrix,
    dims: Dims,
}

impl WiretapChannel {
    /// Noise variance at both receivers.
    pub const NOISE_POWER: f64 = 1.0;

    pub fn new(h_ai: CMatrix, h_ib: CMatrix, h_ie: CMatrix) -> Result<Self> {
        let (n, m) = h_ai.shape();
        let (d, n_b) = h_ib.shape();
        let (e, n_e) = h_ie.shape();
        if n_b != n {
            return Err(dim_err("H_IB columns", n, n_b));
        }
        if n_e != n {
            return Err(dim_err("H_IE columns", n, n_e));
        }
        let dims = Dims { m, n, d, e };
        dims.validate()?;
        for h in [&h_ai, &h_ib, &h_ie] {
            if !crate::linalg::is_finite(h) {
                return Err(Error::NonFinite);
            }
        }
        Ok(Self { h_ai, h_ib, h_ie, dims })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn h_ai(&self) -> &CMatrix {
        &self.h_ai
    }

    pub fn h_ib(&self) -> &CMatrix {
        &self.h_ib
    }

    pub fn h_ie(&self) -> &CMatrix {
        &self.h_ie
    }

    pub fn h_irs_to(&self, who: Receiver) -> &CMatrix {
        match who {
            Receiver::Bob => &self.h_ib,
            Receiver::Eve => &self.h_ie,
        }
    }
}

fn complex_gaussian_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize, scale: f64) -> CMatrix {
    // CN(0, 1): real and imaginary parts each carry variance 1/2.
    let s = scale * std::f64::consts::FRAC_1_SQRT_2;
    let mut out = CMatrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            out[(i, j)] = Complex64::new(s * re, s * im);
        }
    }
    out
}

/// Draws one Rayleigh realization. Entries are generated row-major, in the
/// order H_AI, H_IB, H_IE, from a ChaCha8 stream seeded with `cfg.seed`.
pub fn generate_channel(dims: Dims, cfg: &FadingConfig) -> Result<WiretapChannel> {
    dims.validate()?;
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let h_ai = complex_gaussian_matrix(&mut rng, dims.n, dims.m, path_loss_linear(cfg.dist_ai, cfg)?);
    let h_ib = complex_gaussian_matrix(&mut rng, dims.d, dims.n, path_loss_linear(cfg.dist_ib, cfg)?);
    let h_ie = complex_gaussian_matrix(&mut rng, dims.e, dims.n, path_loss_linear(cfg.dist_ie, cfg)?);
    WiretapChannel::new(h_ai, h_ib, h_ie)
}

/// IRS reflection coefficients `q_i = exp(j theta_i)`, i.e. the diagonal of Q.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseVector(CVector);

impl PhaseVector {
    /// Wraps `q`, rejecting entries whose modulus is not one.
    pub fn new(q: CVector) -> Result<Self> {
        if q.is_empty() {
            return Err(Error::Domain("phase vector must be non-empty".into()));
        }
        if let Some((i, z)) = q.iter().enumerate().find(|(_, z)| ((z.norm() - 1.0).abs() > UNIT_MODULUS_TOL) || !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Domain(format!("q[{i}] = {z} is not unit-modulus")));
        }
        Ok(Self(q))
    }

    pub fn from_angles(theta: &[f64]) -> Self {
        Self(CVector::from_iterator(theta.len(), theta.iter().map(|&t| Complex64::from_polar(1.0, t))))
    }

    /// Q = I.
    pub fn ones(n: usize) -> Self {
        Self(CVector::from_element(n, Complex64::new(1.0, 0.0)))
    }

    /// Angles drawn uniformly on [0, 2 pi) from a ChaCha8 stream.
    pub fn random(n: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let theta: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
        Self::from_angles(&theta)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_vector(&self) -> &CVector {
        &self.0
    }

    pub fn angles(&self) -> Vec<f64> {
        self.0.iter().map(|z| z.arg()).collect()
    }

    /// Multiplies every coefficient by `exp(j phi)`.
    pub fn rotated(&self, phi: f64) -> Self {
        let r = Complex64::from_polar(1.0, phi);
        Self(self.0.map(|z| z * r))
    }

    pub fn max_modulus_error(&self) -> f64 {
        self.0.iter().map(|z| (z.norm() - 1.0).abs()).fold(0.0, f64::max)
    }
}

/// `H_IB diag(q) H_AI` (d x m) or `H_IE diag(q) H_AI` (e x m).
pub fn effective_channel(ch: &WiretapChannel, q: &PhaseVector, who: Receiver) -> Result<CMatrix> {
    let n = ch.dims().n;
    if q.len() != n {
        return Err(dim_err("phase vector length", n, q.len()));
    }
    let mut scaled = ch.h_ai().clone();
    for (i, mut row) in scaled.row_iter_mut().enumerate() {
        row *= q.as_vector()[i];
    }
    Ok(ch.h_irs_to(who) * scaled)
}
