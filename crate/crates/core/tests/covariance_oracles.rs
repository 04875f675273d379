//! Closed-form checks for the covariance step on the two families where the
//! optimum is known: single-antenna receivers (generalized eigenvalue of the
//! pencil) and no eavesdropper (water-filling).

mod common;

use common::{cgauss, pencil_oracle, water_filling_oracle};
use irs_wiretap::covariance::{optimize_covariance, CovSolverConfig};
use irs_wiretap::linalg::{self, CMatrix};
use irs_wiretap::objective::TransmitCovariance;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn solve(h_b: &CMatrix, h_e: &CMatrix, p: f64) -> f64 {
    let m = h_b.ncols();
    let rep = optimize_covariance(h_b, h_e, p, &CovSolverConfig::default(), &TransmitCovariance::isotropic(m, p).unwrap()).unwrap();
    assert!(rep.converged, "solver did not converge (residual {:e})", rep.residual);
    rep.c_s_achieved
}

#[test]
fn miso_pencil_oracle_agreement() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for i in 0..50 {
        let m = 1 + i % 4;
        let p = [0.1, 1.0, 10.0, 100.0][i % 4];
        let h_b = cgauss(&mut rng, 1, m, 1.0);
        let h_e = cgauss(&mut rng, 1, m, 0.8);
        let got = solve(&h_b, &h_e, p);
        let want = pencil_oracle(&h_b, &h_e, p);
        worst = worst.max((got - want).abs());
        assert!((got - want).abs() <= 1e-4, "instance {i}: solver {got} vs oracle {want}");
    }
    eprintln!("MISO pencil: worst gap {worst:e} bits");
}

#[test]
fn no_eavesdropper_matches_water_filling() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut worst: f64 = 0.0;
    for i in 0..50 {
        let m = 1 + i % 4;
        let d = 1 + (i / 4) % 3;
        let e = 1 + i % 2;
        let p = [0.5, 5.0, 50.0][i % 3];
        let h_b = cgauss(&mut rng, d, m, 1.0);
        let h_e = CMatrix::zeros(e, m);
        let got = solve(&h_b, &h_e, p);
        let want = water_filling_oracle(&h_b, p);
        worst = worst.max((got - want).abs());
        assert!((got - want).abs() <= 1e-4, "instance {i}: solver {got} vs oracle {want}");
    }
    eprintln!("water-filling: worst gap {worst:e} bits");
}

#[test]
fn low_snr_miso_is_resolved_relatively() {
    // Channel gains around -120 dB with P = 35 dBm: rates of order 1e-7 bits.
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let p = 10f64.powf(3.5);
    for _ in 0..10 {
        let h_b = cgauss(&mut rng, 1, 3, 1e-6);
        let h_e = cgauss(&mut rng, 1, 3, 1e-6);
        let got = solve(&h_b, &h_e, p);
        let want = pencil_oracle(&h_b, &h_e, p);
        assert!((got - want).abs() <= 1e-6 * want.max(1e-300) + 1e-15, "{got} vs {want}");
    }
}

#[test]
fn unitary_rotation_of_receivers_leaves_rate_unchanged() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..10 {
        let h_b = cgauss(&mut rng, 3, 3, 1.0);
        let h_e = cgauss(&mut rng, 2, 3, 0.7);
        let (_, u_b) = linalg::eigh(&linalg::hermitian_part(&cgauss(&mut rng, 3, 3, 1.0))).unwrap();
        let (_, u_e) = linalg::eigh(&linalg::hermitian_part(&cgauss(&mut rng, 2, 2, 1.0))).unwrap();
        let a = solve(&h_b, &h_e, 10.0);
        let b = solve(&(&u_b * &h_b), &(&u_e * &h_e), 10.0);
        assert!((a - b).abs() <= 1e-6, "{a} vs {b}");
    }
}

#[test]
fn warm_start_is_never_degraded() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let cfg = CovSolverConfig::default();
    for _ in 0..20 {
        let h_b = cgauss(&mut rng, 2, 3, 1.0);
        let h_e = cgauss(&mut rng, 2, 3, 1.0);
        let p = 20.0;
        let first = optimize_covariance(&h_b, &h_e, p, &cfg, &TransmitCovariance::isotropic(3, p).unwrap()).unwrap();
        let again = optimize_covariance(&h_b, &h_e, p, &cfg, &first.r_opt).unwrap();
        assert!(again.c_s_achieved >= first.c_s_achieved - 1e-9);
        assert!(again.r_opt.trace() <= p + 1e-8);
        assert!(linalg::is_psd(again.r_opt.matrix(), 1e-8));
    }
}

#[test]
fn deterministic_for_fixed_inputs() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let h_b = cgauss(&mut rng, 2, 4, 1.0);
    let h_e = cgauss(&mut rng, 3, 4, 1.0);
    let init = TransmitCovariance::isotropic(4, 3.0).unwrap();
    let cfg = CovSolverConfig::default();
    let a = optimize_covariance(&h_b, &h_e, 3.0, &cfg, &init).unwrap();
    let b = optimize_covariance(&h_b, &h_e, 3.0, &cfg, &init).unwrap();
    assert_eq!(a.r_opt, b.r_opt);
    assert_eq!(a.c_s_achieved.to_bits(), b.c_s_achieved.to_bits());
}
