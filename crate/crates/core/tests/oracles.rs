//! End-to-end checks against oracles built here from scratch.

use std::f64::consts::TAU;
use std::sync::Arc;

use faer::Mat;
use proptest::prelude::*;
use wannier_lab::c64;
use wannier_lab::geometry::{Boundary, PointGeometry};
use wannier_lab::index::{berry_chern, BlochModel};
use wannier_lab::operator::{
    build_disorder_potential, build_magnetic_hamiltonian, DisorderConfig, FieldConfig,
};
use wannier_lab::spectral::eigenvalues;

/// Harper matrix for flux `p/q` on a `q × 1` magnetic cell.
fn harper(p: i64, q: usize, kx: f64, ky: f64) -> Mat<c64> {
    let phi = p as f64 / q as f64;
    let mut h = Mat::<c64>::zeros(q, q);
    for j in 0..q {
        h[(j, j)] = c64::new(4.0 - 2.0 * (ky + TAU * phi * j as f64).cos(), 0.0);
    }
    if q == 1 {
        h[(0, 0)] -= c64::new(2.0 * kx.cos(), 0.0);
        return h;
    }
    for j in 0..q {
        let k = (j + 1) % q;
        let hop = -c64::from_polar(1.0, kx);
        h[(k, j)] += hop;
        h[(j, k)] += hop.conj();
    }
    h
}

fn harper_spectrum(p: i64, q: usize, l: usize) -> Vec<f64> {
    let mut all = Vec::with_capacity(l * l);
    for n in 0..l / q {
        for m in 0..l {
            let kx = TAU * n as f64 / l as f64;
            let ky = TAU * m as f64 / l as f64;
            let h = harper(p, q, kx, ky);
            let ev = h.self_adjoint_eigenvalues(faer::Side::Lower).unwrap();
            all.extend(ev);
        }
    }
    all.sort_by(f64::total_cmp);
    all
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

#[test]
fn torus_spectrum_matches_harper_bands() {
    for (p, q, l) in [(1, 4, 8), (1, 3, 12), (3, 8, 16), (2, 5, 10)] {
        let g = Arc::new(PointGeometry::lattice(1.0, l as f64, Boundary::Periodic).unwrap());
        let field = FieldConfig::from_flux_per_plaquette(p as f64 / q as f64, 1.0);
        let ev = eigenvalues(&build_magnetic_hamiltonian(&g, &field).unwrap()).unwrap();
        let oracle = harper_spectrum(p, q, l);
        assert_eq!(ev.len(), oracle.len());
        let d = max_diff(&ev, &oracle);
        assert!(d < 1e-10, "flux {p}/{q}, L = {l}: max deviation {d:e}");
    }
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

/// Lowest-band Chern number from `1 = q s + p t`, `|t| ≤ q/2`.
fn diophantine_chern(p: i64, q: i64) -> i64 {
    (-q / 2..=q / 2)
        .find(|t| (1 - p * t).rem_euclid(q) == 0)
        .expect("p and q coprime")
}

#[test]
fn lowest_hofstadter_band_obeys_diophantine_rule() {
    for q in 3..=7_i64 {
        for p in (1..q).filter(|&p| gcd(p, q) == 1) {
            let r = berry_chern(&BlochModel::hofstadter(p, q), 0..1, 30).unwrap();
            let expect = diophantine_chern(p, q);
            assert!(
                (r.value - expect as f64).abs() < 1e-6,
                "flux {p}/{q}: got {}, expected {expect}",
                r.value
            );
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn eigenvalues_move_at_most_sup_v(
        values in prop::collection::vec(-1.0f64..1.0, 36),
        q in 0u32..6,
    ) {
        let g = Arc::new(PointGeometry::lattice(1.0, 6.0, Boundary::Periodic).unwrap());
        let field = FieldConfig::from_flux_quanta(q as f64, 6.0);
        let h = build_magnetic_hamiltonian(&g, &field).unwrap();
        let v = wannier_lab::operator::diagonal_operator(&g, &values).unwrap();
        let sup = values.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let clean = eigenvalues(&h).unwrap();
        let perturbed = eigenvalues(&h.plus_scaled(&v, 1.0).unwrap()).unwrap();
        prop_assert!(max_diff(&clean, &perturbed) <= sup + 1e-10);
    }

    #[test]
    fn disorder_is_reproducible_and_bounded(seed in any::<u64>(), w in 0.0f64..3.0) {
        let g = Arc::new(PointGeometry::lattice(1.0, 4.0, Boundary::Periodic).unwrap());
        let cfg = DisorderConfig { strength: w, seed };
        let a = build_disorder_potential(&g, &cfg).unwrap();
        let b = build_disorder_potential(&g, &cfg).unwrap();
        let da = eigenvalues(&a).unwrap();
        prop_assert_eq!(&da, &eigenvalues(&b).unwrap());
        prop_assert!(da.iter().all(|x| x.abs() <= w));
    }
}
