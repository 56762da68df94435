use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::device::{Device, GridOptions};
use crate::dvr::{coulomb_diagonal, DvrGrid};
use crate::electrostatics::{TargetConfig, TABLE_I_IDLE, TABLE_I_SWAP};
use crate::spectrum::{solve_spectrum, DavidsonOptions};

fn toy_cache(kappa: f64) -> OperatorCache {
    let basis = Arc::new(
        TwoBodyBasis::new(
            DvrGrid::spanning(-1.6, -0.4, 10).unwrap(),
            DvrGrid::spanning(0.4, 1.6, 11).unwrap(),
        )
        .unwrap(),
    );
    let u = coulomb_diagonal(&basis, kappa, 0.01).unwrap();
    let vl = DVector::from_fn(10, |i, _| 30.0 * (basis.left.point(i) + 1.0).powi(2));
    let vr = DVector::from_fn(11, |i, _| 36.0 * (basis.right.point(i) - 1.0).powi(2));
    OperatorCache::new(basis, u, vl, vr).unwrap()
}

fn random_state(rng: &mut ChaCha8Rng, basis: Arc<TwoBodyBasis>) -> TwoBodyState {
    let (n, m) = basis.shape();
    let c = DMatrix::from_fn(n, m, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    TwoBodyState::new(basis, c).unwrap().normalized().unwrap()
}

fn dist(a: &TwoBodyState, b: &TwoBodyState) -> f64 {
    (&a.coeffs - &b.coeffs).norm()
}

struct Setup {
    device: Device,
    basis: Arc<TwoBodyBasis>,
    vf: VoltageFunction,
    e0: f64,
}

fn setup(points: usize) -> Setup {
    let device = Device::default();
    let basis = Arc::new(device.build_basis(&TABLE_I_IDLE, &[TABLE_I_SWAP], &GridOptions::square(points)).unwrap());
    let vf = VoltageFunction::zeta(TABLE_I_IDLE, TABLE_I_SWAP, TargetConfig::II);
    let cache = device.operators(basis.clone(), &TABLE_I_IDLE).unwrap();
    let e0 = solve_spectrum(&cache, 1, &DavidsonOptions::default()).unwrap().energies[0];
    Setup { device, basis, vf, e0 }
}

#[test]
fn eigenstate_step_is_the_cayley_factor() {
    let cache = toy_cache(50.0);
    let eig = cache.dense().symmetric_eigen();
    let (n, m) = cache.basis.shape();
    let tau = 0.013;
    for k in [0usize, 3, 17] {
        let v = eig.eigenvectors.column(k);
        let s = TwoBodyState::from_real(cache.basis.clone(), &DMatrix::from_column_slice(n, m, v.as_slice())).unwrap();
        let (out, _) = crank_nicolson_step(&cache, &s, tau, &GmresOptions::default()).unwrap();
        let e = eig.eigenvalues[k];
        let c = Complex64::new(1.0, -0.5 * e * tau) / Complex64::new(1.0, 0.5 * e * tau);
        assert!((c.norm() - 1.0).abs() < 1e-15);
        let expect = s.coeffs.map(|z| z * c);
        assert!((&out.coeffs - &expect).norm() < 1e-10);
    }
}

#[test]
fn norm_and_linearity() {
    let cache = toy_cache(80.0);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let opts = GmresOptions::default();
    for _ in 0..10 {
        let a = random_state(&mut rng, cache.basis.clone());
        let b = random_state(&mut rng, cache.basis.clone());
        let tau = rng.gen_range(0.001..0.1);
        let (sa, _) = crank_nicolson_step(&cache, &a, tau, &opts).unwrap();
        let (sb, _) = crank_nicolson_step(&cache, &b, tau, &opts).unwrap();
        assert!((sa.norm() - 1.0).abs() < 1e-10);
        let (ca, cb) = (Complex64::new(0.3, -1.2), Complex64::new(-0.7, 0.4));
        let mix = TwoBodyState::new(cache.basis.clone(), a.coeffs.map(|z| z * ca) + b.coeffs.map(|z| z * cb)).unwrap();
        let (sm, _) = crank_nicolson_step(&cache, &mix, tau, &opts).unwrap();
        let expect = sa.coeffs.map(|z| z * ca) + sb.coeffs.map(|z| z * cb);
        assert!((&sm.coeffs - &expect).norm() < 1e-10);
    }
}

/// Static oscillator-like wells: CN phases against exact e^{-iEt} from the
/// dense spectrum. Error falls 4× per halving of the step.
#[test]
fn second_order_on_static_wells() {
    let cache = toy_cache(0.0);
    let eig = cache.dense().symmetric_eigen();
    let (n, m) = cache.basis.shape();
    let mut idx: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    idx.sort_by(|a, b| eig.eigenvalues[*a].total_cmp(&eig.eigenvalues[*b]));
    let lowest = &idx[..3];
    let coeff = [0.6, 0.64f64.sqrt(), 0.0];
    let build = |phase: &dyn Fn(f64) -> Complex64| {
        let mut c = DMatrix::<Complex64>::zeros(n, m);
        for (k, w) in lowest.iter().zip(coeff) {
            let v = eig.eigenvectors.column(*k);
            let p = phase(eig.eigenvalues[*k]) * w;
            for i in 0..n * m {
                c[i] += v[i] * p;
            }
        }
        TwoBodyState::new(cache.basis.clone(), c).unwrap()
    };
    let t_total = 0.4;
    let exact = build(&|e| Complex64::from_polar(1.0, -e * t_total));
    let mut errs = Vec::new();
    for steps in [200usize, 400, 800] {
        let tau = t_total / steps as f64;
        let mut s = build(&|_| Complex64::new(1.0, 0.0));
        for _ in 0..steps {
            s = crank_nicolson_step(&cache, &s, tau, &GmresOptions::default()).unwrap().0;
        }
        errs.push(dist(&s, &exact));
    }
    for w in errs.windows(2) {
        let r = w[0] / w[1];
        assert!((3.8..4.2).contains(&r), "ratio {r}, errors {errs:?}");
    }
}

#[test]
fn backward_steps_undo_forward_steps() {
    let cache = toy_cache(120.0);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let s0 = random_state(&mut rng, cache.basis.clone());
    let opts = GmresOptions::default();
    let mut s = s0.clone();
    for _ in 0..50 {
        s = crank_nicolson_step(&cache, &s, 0.02, &opts).unwrap().0;
    }
    for _ in 0..50 {
        s = crank_nicolson_step(&cache, &s, -0.02, &opts).unwrap().0;
    }
    assert!(dist(&s, &s0) < 1e-7);
}

#[test]
fn static_eigenstates_pick_up_the_cayley_phase() {
    let su = setup(12);
    let vf = VoltageFunction::idle(TABLE_I_IDLE);
    let mut cache = su.device.operators(su.basis.clone(), &TABLE_I_IDLE).unwrap();
    cache.set_energy_offset(su.e0);
    let sol = solve_spectrum(&cache, 6, &DavidsonOptions { tol: 1e-10, ..Default::default() }).unwrap();
    let mut prop = Propagator::new(&su.device, su.basis.clone(), &vf, su.e0).unwrap();
    let plan = PropagationPlan::new(RampSchedule::new(0.05, 0.1).unwrap(), vf, 0.002).unwrap();
    let trajs = prop.propagate_many(&plan, &sol.states, None).unwrap();
    let tau = prop.ns_to_time(plan.dt);
    let steps = plan.total_steps();
    assert_eq!(steps, 100);
    for (k, tr) in trajs.iter().enumerate() {
        let e = sol.energies[k] - su.e0;
        let phase = -(steps as f64) * 2.0 * (0.5 * e * tau).atan();
        let expect = sol.states[k].coeffs.map(|z| z * Complex64::from_polar(1.0, phase));
        assert!((&tr.final_state.coeffs - &expect).norm() < 1e-8, "state {k}");
        assert!(tr.norm_drift < 1e-10);
    }
    // the Cayley phase approaches the exact phase quadratically
    let e = sol.energies[4] - su.e0;
    let t = prop.ns_to_time(plan.schedule.t_gate);
    let gap = |dt: f64| (t * e - (t / dt) * 2.0 * (0.5 * e * dt).atan()).abs();
    let r = gap(tau) / gap(0.5 * tau);
    assert!((r - 4.0).abs() < 0.1, "{r}");
}

#[test]
fn warm_start_chain_matches_cold() {
    let su = setup(10);
    let cache = su.device.operators(su.basis.clone(), &TABLE_I_IDLE).unwrap();
    let sol = solve_spectrum(&cache, 6, &DavidsonOptions::default()).unwrap();
    let mut prop = Propagator::new(&su.device, su.basis.clone(), &su.vf, su.e0).unwrap();
    let ramp = 0.1;
    let dt = 0.002;
    let plan_for = |h: f64| PropagationPlan::new(RampSchedule::new(ramp, h).unwrap(), su.vf.clone(), dt).unwrap();
    let init = &sol.states[1];
    let donor = plan_for(0.3).with_snapshots(vec![ramp + 0.3]).unwrap();
    let d = prop.propagate(&donor, init).unwrap();
    assert_eq!(d.snapshots.len(), 1);

    // zero extension reproduces the donor exactly
    let same = prop.resume_from(&d.snapshots[0], &donor).unwrap();
    assert_eq!(same.final_state.coeffs, d.final_state.coeffs);

    let mut snap = d.snapshots[0].clone();
    for h in [0.4, 0.5] {
        let plan = plan_for(h).with_snapshots(vec![ramp + h]).unwrap();
        let warm = prop.resume_from(&snap, &plan).unwrap();
        let cold = prop.propagate(&plan, init).unwrap();
        assert!(dist(&warm.final_state, &cold.final_state) < 1e-8, "hold {h}");
        snap = warm.snapshots[0].clone();
    }

    let mid_ramp = Snapshot { time: 0.5 * ramp, state: init.clone() };
    assert!(prop.resume_from(&mid_ramp, &donor).is_err());
    let exact = donor.clone().with_shape(RampShape::Exact);
    assert!(prop.resume_from(&d.snapshots[0], &exact).is_err());
}

#[test]
fn overlap_rows_start_as_indicators() {
    let su = setup(10);
    let cache = su.device.operators(su.basis.clone(), &TABLE_I_IDLE).unwrap();
    let sol = solve_spectrum(&cache, 6, &DavidsonOptions::default()).unwrap();
    let mut prop = Propagator::new(&su.device, su.basis.clone(), &su.vf, su.e0).unwrap();
    let plan = PropagationPlan::new(RampSchedule::new(0.1, 0.1).unwrap(), su.vf.clone(), 0.002).unwrap();
    let track = OverlapTracking { reference: sol.states.clone(), every: 10 };
    let trajs = prop.propagate_many(&plan, &sol.states[..4], Some(&track)).unwrap();
    for (i, tr) in trajs.iter().enumerate() {
        let ov = tr.overlaps.as_ref().unwrap();
        assert_eq!(ov.times[0], 0.0);
        assert_eq!(*ov.times.last().unwrap(), plan.schedule.t_gate);
        assert_eq!(ov.times.len(), 16);
        for (k, v) in ov.rows[0].iter().enumerate() {
            let want = if k == i { 1.0 } else { 0.0 };
            assert!((v - want).abs() < 1e-8);
        }
        for row in &ov.rows {
            assert!(row.iter().sum::<f64>() <= 1.0 + 1e-8);
        }
        let back = parse_overlaps_csv(&overlaps_csv(ov)).unwrap();
        assert_eq!(&back, ov);
    }
    assert!(parse_overlaps_csv("t,x\n0,1\n").unwrap_err().contains("line 1"));
    assert!(parse_overlaps_csv("t,|<Psi_i|Phi_0>|^2\n0,abc\n").unwrap_err().contains("line 2"));
}

#[test]
fn hold_propagator_matches_stepping() {
    let cache = toy_cache(60.0);
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let s0 = random_state(&mut rng, cache.basis.clone());
    let tau = 0.01;
    let hp = HoldPropagator::new(&cache, tau);
    let fast = hp.advance(&Packed::from_state(&s0), 37).to_state(cache.basis.clone()).unwrap();
    let mut s = s0;
    for _ in 0..37 {
        s = crank_nicolson_step(&cache, &s, tau, &GmresOptions::default()).unwrap().0;
    }
    assert!(dist(&s, &fast) < 1e-10);
}

#[test]
fn failed_solve_reports_partial_trajectory() {
    let su = setup(8);
    let mut prop = Propagator::new(&su.device, su.basis.clone(), &su.vf, su.e0).unwrap();
    prop.gmres.max_iter = 0;
    prop.gmres.tol = 1e-30;
    let plan = PropagationPlan::new(RampSchedule::new(0.1, 0.0).unwrap(), su.vf.clone(), 0.01).unwrap();
    let cache = su.device.operators(su.basis.clone(), &TABLE_I_IDLE).unwrap();
    let sol = solve_spectrum(&cache, 1, &DavidsonOptions::default()).unwrap();
    let err = prop.propagate(&plan, &sol.states[0]).unwrap_err();
    assert!(matches!(err.error, Error::LinearSolveFailed { .. }));
    assert_eq!(err.partial.len(), 1);
    assert_eq!(err.partial[0].t_end, 0.0);
    assert!(Error::from(err).is_numerical());
}

#[test]
fn plan_segments_and_validation() {
    let vf = VoltageFunction::zeta(TABLE_I_IDLE, TABLE_I_SWAP, TargetConfig::II);
    let p = PropagationPlan::new(RampSchedule::new(0.5, 1.0).unwrap(), vf.clone(), 0.001).unwrap();
    let s = p.segments();
    assert_eq!([s[0].steps, s[1].steps, s[2].steps], [500, 1000, 500]);
    assert_eq!(p.boundaries().len(), 2001);
    assert_eq!(*p.boundaries().last().unwrap(), p.schedule.t_gate);
    assert!(PropagationPlan::new(p.schedule, vf.clone(), 0.0).is_err());
    assert!(p.clone().with_snapshots(vec![3.0]).is_err());
    let z = PropagationPlan::new(RampSchedule::new(0.5, 0.0).unwrap(), vf, 0.001).unwrap();
    assert_eq!(z.segments()[1].steps, 0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]
    #[test]
    fn cn_step_is_norm_preserving(seed in any::<u64>(), tau in 1e-4f64..0.2) {
        let cache = toy_cache(40.0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = random_state(&mut rng, cache.basis.clone());
        let (out, o) = crank_nicolson_step(&cache, &s, tau, &GmresOptions::default()).unwrap();
        prop_assert!((out.norm() - 1.0).abs() < 1e-10);
        prop_assert!(o.residual <= 1e-12);
    }
}
