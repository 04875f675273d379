//! Shared helpers for the integration tests.

#![allow(dead_code)]

use irs_wiretap::linalg::{self, c, CMatrix};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn cgauss(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        c(re, im).scale(scale * std::f64::consts::FRAC_1_SQRT_2)
    })
}

/// `log2 lambda_max(I + P h_b h_b^H, I + P h_e h_e^H)`, clipped at zero.
pub fn pencil_oracle(h_b: &CMatrix, h_e: &CMatrix, p: f64) -> f64 {
    let m = h_b.ncols();
    let hb = h_b.adjoint();
    let he = h_e.adjoint();
    let a = CMatrix::identity(m, m) + (&hb * hb.adjoint()).scale(p);
    let b = CMatrix::identity(m, m) + (&he * he.adjoint()).scale(p);
    let l = linalg::cholesky(&b).unwrap();
    let l_inv = l.clone().try_inverse().unwrap();
    let pencil = linalg::hermitian_part(&(&l_inv * a * l_inv.adjoint()));
    linalg::lambda_max(&pencil).unwrap().log2().max(0.0)
}

/// Water-filling capacity of `h` under total power `p`, by bisection on the
/// water level.
pub fn water_filling_oracle(h: &CMatrix, p: f64) -> f64 {
    let gains: Vec<f64> = linalg::eigvalsh(&linalg::hermitian_part(&(h.adjoint() * h)))
        .unwrap()
        .iter()
        .copied()
        .filter(|g| *g > 1e-14)
        .collect();
    let used = |mu: f64| gains.iter().map(|g| (mu - 1.0 / g).max(0.0)).sum::<f64>();
    let (mut lo, mut hi) = (0.0, p + gains.iter().map(|g| 1.0 / g).fold(0.0, f64::max));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if used(mid) > p {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let mu = 0.5 * (lo + hi);
    gains.iter().map(|g| (1.0 + (mu - 1.0 / g).max(0.0) * g).log2()).sum()
}
