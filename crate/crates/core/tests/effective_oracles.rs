//! The effective model checked against independent numerics: direct
//! quadrature of the coupling integral and the truncated exponential series.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use wchain::analytic::state_n3;
use wchain::effective::{
    chi, coupling_matrix, coupling_profile, propagate, theta, theta_pair, ChainSpec, CouplingMatrix,
};

#[allow(clippy::too_many_arguments)]
fn simpson(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// `int g(z_a + v_a t) g(z_b + v_b t) dt` by quadrature, `g` the mode profile.
fn pair_integral(za: f64, va: f64, zb: f64, vb: f64) -> f64 {
    let f = |t: f64| coupling_profile(za + va * t) * coupling_profile(zb + vb * t);
    let centre = -(za * va + zb * vb) / (va * va + vb * vb);
    let half = 12.0 / (va * va + vb * vb).sqrt();
    adaptive_simpson(&f, centre - half, centre + half, 1e-14)
}

#[test]
fn theta_pair_matches_quadrature() {
    let (za, va, zb, vb) = (0.1, 1.0, -0.4, 1.1);
    let q = pair_integral(za, va, zb, vb);
    assert!((theta_pair(za, va, zb, vb).unwrap() - q).abs() < 1e-10);

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..50 {
        let za = rng.random_range(-3.0..3.0);
        let zb = rng.random_range(-3.0..3.0);
        let va = rng.random_range(0.2..5.0);
        let vb = rng.random_range(0.2..5.0);
        let q = pair_integral(za, va, zb, vb);
        assert!((theta_pair(za, va, zb, vb).unwrap() - q).abs() < 1e-10);
    }
}

#[test]
fn theta_halves_at_sqrt_2ln2() {
    let d = (2.0 * 2f64.ln()).sqrt();
    let q = pair_integral(0.0, 1.0, d, 1.0);
    assert!((theta(1.0, d).unwrap() - q).abs() < 1e-10);
    assert!((theta(1.0, d).unwrap() - 0.5 * theta(1.0, 0.0).unwrap()).abs() < 1e-14);
}

fn series_first_column(m: &DMatrix<f64>, terms: usize) -> DVector<Complex64> {
    let n = m.nrows();
    let mc = m.map(|x| Complex64::new(0.0, -x));
    let mut term = DVector::from_fn(n, |i, _| {
        Complex64::new(if i == 0 { 1.0 } else { 0.0 }, 0.0)
    });
    let mut sum = term.clone();
    for k in 1..=terms {
        term = &mc * term / Complex64::new(k as f64, 0.0);
        sum += &term;
    }
    sum
}

fn random_coupling(rng: &mut ChaCha8Rng, n: usize, norm: f64) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..i {
            let x: f64 = rng.random_range(-1.0..1.0);
            m[(i, j)] = x;
            m[(j, i)] = x;
        }
    }
    let f = m.norm();
    if f > 0.0 {
        m *= norm / f;
    }
    m
}

#[test]
fn propagate_matches_truncated_series() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for n in 2..=8 {
        for _ in 0..20 {
            let target = rng.random_range(0.0..2.0);
            let m = random_coupling(&mut rng, n, target);
            let expect = series_first_column(&m, 30);
            let got = propagate(&CouplingMatrix::from_matrix(m).unwrap());
            for (a, b) in got.amplitudes().iter().zip(expect.iter()) {
                assert!((a - b).norm() < 1e-8);
            }
        }
    }
}

#[test]
fn propagate_matches_series_for_chains() {
    // physical chains, with the norm of M below 2
    for (n, v, d) in [(2, 1.5, 0.0), (3, 2.0, 0.7), (4, 3.0, 1.2), (5, 4.0, 0.4)] {
        let m = coupling_matrix(&ChainSpec::uniform(n, v, d).unwrap()).unwrap();
        assert!(m.as_matrix().norm() <= 2.0);
        let expect = series_first_column(m.as_matrix(), 30);
        for (a, b) in propagate(&m).amplitudes().iter().zip(expect.iter()) {
            assert!((a - b).norm() < 1e-8);
        }
    }
}

#[test]
fn n3_closed_form_matches_propagator() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..200 {
        let v = rng.random_range(0.2..5.0);
        let d: f64 = rng.random_range(0.0..3.0);
        let closed = state_n3(chi(v).unwrap(), (-0.5 * d * d).exp()).unwrap();
        let numeric = propagate(&coupling_matrix(&ChainSpec::uniform(3, v, d).unwrap()).unwrap());
        for (a, b) in closed.amplitudes().iter().zip(numeric.amplitudes()) {
            assert!((a - b).norm() < 1e-10, "v = {v}, d = {d}");
        }
    }
}

proptest! {
    #[test]
    fn propagation_is_unitary(n in 2usize..=12, v in 0.05f64..5.0, d in 0.0f64..3.0) {
        let s = propagate(&coupling_matrix(&ChainSpec::uniform(n, v, d).unwrap()).unwrap());
        prop_assert!((s.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn jittered_chains_stay_unitary(
        seed in any::<u64>(), n in 2usize..=12, v in 0.2f64..5.0, d in 0.0f64..3.0,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut z = 0.0;
        let mut positions = vec![z];
        for _ in 1..n {
            z += d * (1.0 - rng.random_range(0.0..0.2));
            positions.push(z);
        }
        let velocities = (0..n).map(|_| v * (1.0 - rng.random_range(0.0..0.1))).collect();
        let chain = ChainSpec::new(positions, velocities).unwrap();
        let s = propagate(&coupling_matrix(&chain).unwrap());
        prop_assert!((s.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn reversed_coupling_undoes_propagation(seed in any::<u64>(), n in 2usize..=6) {
        // exp(iM) exp(-iM) e1 = e1, the inverse taken by series
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_coupling(&mut rng, n, 1.5);
        let fwd = propagate(&CouplingMatrix::from_matrix(m.clone()).unwrap());
        let inv = m.map(|x| Complex64::new(0.0, x));
        let mut term = DVector::from_vec(fwd.amplitudes().to_vec());
        let mut sum = term.clone();
        for k in 1..=40 {
            term = &inv * term / Complex64::new(k as f64, 0.0);
            sum += &term;
        }
        prop_assert!((sum[0] - Complex64::new(1.0, 0.0)).norm() < 1e-10);
        for i in 1..n {
            prop_assert!(sum[i].norm() < 1e-10);
        }
    }
}
