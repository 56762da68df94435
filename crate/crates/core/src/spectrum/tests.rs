use std::sync::Arc;

use nalgebra::DVector;

use super::*;
use crate::device::{Device, GridOptions};
use crate::dvr::{inner, DvrGrid, TwoBodyBasis};
use crate::electrostatics::TABLE_I_IDLE;

fn device_cache(points: usize, kappa: f64) -> OperatorCache {
    let device = Device {
        kappa,
        ..Device::default()
    };
    let basis = device
        .build_basis(&TABLE_I_IDLE, &[], &GridOptions::square(points))
        .unwrap();
    device.operators(Arc::new(basis), &TABLE_I_IDLE).unwrap()
}

fn tight() -> DavidsonOptions {
    DavidsonOptions {
        tol: 1e-9,
        ..Default::default()
    }
}

#[test]
fn davidson_matches_dense_up_to_16x16() {
    for &n in &[10usize, 12, 16] {
        let cache = device_cache(n, 2326.0);
        let sol = solve_spectrum(&cache, 6, &tight()).unwrap();
        let dense = cache.dense().symmetric_eigen();
        let mut order: Vec<usize> = (0..dense.eigenvalues.len()).collect();
        order.sort_by(|&a, &b| dense.eigenvalues[a].total_cmp(&dense.eigenvalues[b]));
        for i in 0..6 {
            let e = dense.eigenvalues[order[i]];
            assert!((sol.energies[i] - e).abs() < 1e-8, "n={n} i={i}: {} vs {e}", sol.energies[i]);
            let v = dense.eigenvectors.column(order[i]);
            let x = DVector::from_iterator(n * n, sol.states[i].coeffs.iter().map(|c| c.re));
            assert!(1.0 - v.dot(&x).powi(2) < 1e-6);
        }
    }
}

#[test]
fn eigenstates_orthonormal_and_ascending() {
    let cache = device_cache(20, 2326.0);
    let sol = solve_spectrum(&cache, 6, &DavidsonOptions::default()).unwrap();
    for i in 0..6 {
        assert!(sol.residuals[i] < DavidsonOptions::default().tol);
        for j in 0..6 {
            let ov = inner(&sol.states[i], &sol.states[j]).unwrap().norm();
            let expect = if i == j { 1.0 } else { 0.0 };
            assert!((ov - expect).abs() < 1e-8);
        }
    }
    assert!(sol.energies.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn separable_spectrum_is_additive() {
    let cache = device_cache(18, 0.0);
    let sol = solve_spectrum(&cache, 6, &tight()).unwrap();
    let (hl, hr) = cache.one_body();
    let mut el: Vec<f64> = hl.symmetric_eigenvalues().iter().copied().collect();
    let mut er: Vec<f64> = hr.symmetric_eigenvalues().iter().copied().collect();
    el.sort_by(f64::total_cmp);
    er.sort_by(f64::total_cmp);
    let mut sums: Vec<f64> = (0..3)
        .flat_map(|a| (0..3).map(move |b| (a, b)))
        .map(|(a, b)| el[a] + er[b])
        .collect();
    sums.sort_by(f64::total_cmp);
    for i in 0..6 {
        assert!((sol.energies[i] - sums[i]).abs() < 1e-8);
    }
    let labeling = label_states(&sol, &cache).unwrap();
    assert!(sol.labeled_zz(&labeling.labels).abs() < 1e-9);
    for (i, s) in labeling.states.iter().enumerate() {
        let (a, b) = s.label;
        assert!((sol.energies[i] - el[a] - er[b]).abs() < 1e-8, "state {i} labeled {:?}", s.label);
    }
    assert_eq!(labeling.states[0].label, (0, 0));
}

#[test]
fn zz_arithmetic_and_gauge() {
    let e = [0.0, 1.0, 2.0, 2.9, 3.1];
    assert!((zz_coupling(&e).unwrap() - 0.1).abs() < 1e-15);
    let shifted: Vec<f64> = e.iter().map(|x| x + 1234.5).collect();
    assert!((zz_coupling(&shifted).unwrap() - 0.1).abs() < 1e-12);
    assert!(zz_coupling(&e[..4]).is_err());
}

#[test]
fn harmonic_wells_zero_zz_when_uncoupled() {
    // two detuned harmonic wells, κ = 0: E₄ is |11⟩ and ζ vanishes
    let basis = Arc::new(
        TwoBodyBasis::new(
            DvrGrid::spanning(-3.0, -0.5, 40).unwrap(),
            DvrGrid::spanning(0.5, 3.0, 40).unwrap(),
        )
        .unwrap(),
    );
    let u = crate::dvr::coulomb_diagonal(&basis, 0.0, 0.01).unwrap();
    let vl = DVector::from_fn(40, |i, _| {
        let x = basis.left.point(i) + 1.75;
        0.5 * 100.0 * x * x
    });
    let vr = DVector::from_fn(40, |i, _| {
        let x = basis.right.point(i) - 1.75;
        0.5 * 64.0 * x * x
    });
    let cache = OperatorCache::new(basis, u, vl, vr).unwrap();
    let sol = solve_spectrum(&cache, 6, &tight()).unwrap();
    assert!(zz_coupling(&sol.energies).unwrap().abs() < 1e-9);
    let lab = label_states(&sol, &cache).unwrap();
    assert!(lab.matches_reference(), "{:?}", lab.states);
    assert_eq!(lab.labels.qubit_indices(), [0, 1, 2, 4]);
}

#[test]
fn coulomb_coupling_produces_finite_zz_and_labels() {
    let cache = device_cache(24, 2326.0);
    let sol = solve_spectrum(&cache, 6, &DavidsonOptions::default()).unwrap();
    let lab = label_states(&sol, &cache).unwrap();
    assert_eq!(lab.states[0].label, (0, 0));
    assert!(sol.labeled_zz(&lab.labels).is_finite());
}
