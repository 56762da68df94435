use super::*;
use crate::electrostatics::TABLE_I_IDLE;
use proptest::prelude::*;

/// A bowl around `centre` pushed into the upper levels, with a flat band
/// of qubit frequencies so ζ is constant.
struct Quadratic {
    centre: VoltageVector,
}

impl SpectrumModel for Quadratic {
    fn evaluate(&self, v: &VoltageVector) -> Result<SpectrumPoint> {
        let bowl: f64 = (0..7).map(|k| 0.1 * (v[k] - self.centre[k]).powi(2)).sum();
        Ok(SpectrumPoint {
            energies_ghz: [0.0, 9.0, 10.0, 18.0, 19.0 + bowl.sqrt(), 20.0 + bowl],
            qubit_indices: [0, 1, 2, 5],
        })
    }
}

struct Fixed(SpectrumPoint);

impl SpectrumModel for Fixed {
    fn evaluate(&self, _: &VoltageVector) -> Result<SpectrumPoint> {
        Ok(self.0)
    }
}

fn point(e: [f64; 6]) -> SpectrumPoint {
    SpectrumPoint { energies_ghz: e, qubit_indices: [0, 1, 2, 4] }
}

#[test]
fn term_counts_and_weights() {
    let p = point([0.0, 8.0, 12.0, 17.0, 20.0, 21.0]);
    let counts: Vec<usize> = [LossConfig::Bare, LossConfig::I, LossConfig::II, LossConfig::III]
        .iter()
        .map(|c| loss_terms(&LossSpec::new(*c), &p).terms.len())
        .collect();
    assert_eq!(counts, vec![1, 3, 4, 5]);
    let w = LossWeights::default();
    assert_eq!(
        [w.band, w.swap_resonance, w.upper_gap, w.cz_degeneracy, w.qubit_gap],
        [1e-2, 1e-4, 1e-2, 1.0, 1e4]
    );
    assert_eq!(w.detuning, 1e-2);
    let t = LossThresholds::default();
    assert_eq!((t.band, t.min_detuning, t.min_gap), ((5.0, 15.0), 3.0, 1.5));
}

#[test]
fn hinge_examples() {
    assert_eq!(hinge(2.0, 1.5), 0.0);
    assert_eq!(hinge(1.5, 1.5), 0.0);
    assert_eq!(hinge(0.0, 1.5), 2.25);
    // derivative −2(th − gap) → 0 at the threshold from below
    let h = 1e-6;
    assert!(hinge(1.5 - h, 1.5) / h < 1e-5);
}

#[test]
fn satisfied_constraints_leave_only_zz() {
    // separable: ζ = 0, frequencies 8 and 12, gaps well above 1.5
    let p = point([0.0, 8.0, 12.0, 16.0, 20.0, 24.0]);
    assert!(loss_terms(&LossSpec::new(LossConfig::I), &p).total.abs() < 1e-12);
    let ii = loss_terms(&LossSpec::new(LossConfig::II), &p);
    assert_eq!(ii.terms[2].value + ii.terms[3].value, 0.0);
    // Config III with E3 = E4 = E5 and E2 − E1 > 1.5
    let p3 = point([0.0, 8.0, 12.0, 20.0, 20.0, 20.0]);
    let iii = loss_terms(&LossSpec::new(LossConfig::III), &p3);
    assert!(iii.terms[1..4].iter().all(|t| t.value == 0.0));
    assert_eq!(iii.terms[4].value, 0.0);
    // a hinge that fires
    let close = point([0.0, 9.0, 10.0, 16.0, 20.0, 24.0]);
    let i = loss_terms(&LossSpec::new(LossConfig::I), &close);
    assert!((i.terms[2].value - 4.0).abs() < 1e-12);
    assert!((i.total - (i.terms[0].value + 0.04)).abs() < 1e-12);
}

#[test]
fn quadratic_mock_recovers_minimizer() {
    let centre = VoltageVector([390.0, 201.0, 399.0, -291.0, 399.0, 199.0, 382.0]);
    let model = Quadratic { centre };
    let spec = LossSpec::new(LossConfig::II);
    let start = centre + VoltageVector([7.0, -5.0, 3.0, 9.0, -2.0, 4.0, -6.0]);
    let opts = VoltageSearchOptions { ftol: 1e-20, ..Default::default() };
    let tr = optimize_voltages(&model, &start, &spec, 20000, &opts).unwrap();
    assert!(tr.best.max_abs_diff(&centre) < 1e-6, "{:?}", tr.best);
    assert!(tr.iterates.windows(2).all(|w| w[1].loss < w[0].loss));
    let sum: f64 = tr.breakdown.terms.iter().map(LossTerm::weighted).sum();
    assert!((sum - tr.breakdown.total).abs() < 1e-10);

    // restarting from the optimum keeps it
    let again = optimize_voltages(&model, &tr.best, &spec, 2000, &opts).unwrap();
    assert!((again.breakdown.total - tr.breakdown.total).abs() < 1e-12);
}

#[test]
fn zero_budget_and_box() {
    let model = Fixed(point([0.0, 8.0, 12.0, 17.0, 20.0, 21.0]));
    let spec = LossSpec::new(LossConfig::I);
    let tr = optimize_voltages(&model, &TABLE_I_IDLE, &spec, 0, &VoltageSearchOptions::default()).unwrap();
    assert_eq!(tr.best, TABLE_I_IDLE);
    assert_eq!(tr.evaluations, 0);
    assert!(tr.iterates.is_empty());

    // minimizer outside the box: the search stays inside it
    let centre = TABLE_I_IDLE + VoltageVector([80.0; 7]);
    let model = Quadratic { centre };
    let tr = optimize_voltages(&model, &TABLE_I_IDLE, &LossSpec::new(LossConfig::II), 3000, &VoltageSearchOptions::default()).unwrap();
    assert!(tr.best.max_abs_diff(&TABLE_I_IDLE) <= 50.0);
    assert!(tr.breakdown.total < loss_value(&model, &tr.spec, &TABLE_I_IDLE).unwrap().total);
}

#[test]
fn parse_config_names() {
    assert_eq!("II".parse::<LossConfig>().unwrap(), LossConfig::II);
    assert_eq!("bare".parse::<LossConfig>().unwrap(), LossConfig::Bare);
    assert!("IV".parse::<LossConfig>().is_err());
}

proptest! {
    #[test]
    fn terms_nonnegative_and_sum(e in prop::array::uniform6(0.0f64..30.0)) {
        let mut e = e;
        e.sort_by(f64::total_cmp);
        let p = point(e);
        for c in [LossConfig::Bare, LossConfig::I, LossConfig::II, LossConfig::III] {
            let b = loss_terms(&LossSpec::new(c), &p);
            prop_assert!(b.terms.iter().all(|t| t.value >= 0.0 && t.weight >= 0.0));
            let s: f64 = b.terms.iter().map(LossTerm::weighted).sum();
            prop_assert!((s - b.total).abs() <= 1e-10 * b.total.abs().max(1.0));
            if b.total == 0.0 {
                prop_assert!(p.zz() == 0.0);
            }
        }
    }

    #[test]
    fn degenerate_relabeling_is_invisible(e in prop::array::uniform5(0.0f64..30.0)) {
        let mut e = e;
        e.sort_by(f64::total_cmp);
        // E1 = E2: swapping the labels of the degenerate pair changes nothing
        let en = [e[0], e[1], e[1], e[2], e[3], e[4]];
        let a = SpectrumPoint { energies_ghz: en, qubit_indices: [0, 1, 2, 4] };
        let b = SpectrumPoint { energies_ghz: en, qubit_indices: [0, 2, 1, 4] };
        for c in [LossConfig::Bare, LossConfig::I, LossConfig::II, LossConfig::III] {
            prop_assert_eq!(loss_terms(&LossSpec::new(c), &a).total, loss_terms(&LossSpec::new(c), &b).total);
        }
    }
}
