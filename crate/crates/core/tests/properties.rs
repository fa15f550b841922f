use approx::assert_abs_diff_eq;
use cavity_purify::channel::{
    channel_spectrum, conditional_step, measurement_operators, ConditionalChannel,
};
use cavity_purify::dynamics::{build_tc_hamiltonian, evolve, HamiltonianSpec};
use cavity_purify::hilbert::{CompositeSpace, DensityMatrix, StateVector};
use cavity_purify::protocol::run_purification;
use cavity_purify::states::{make_named_state, StateLabel};
use num_complex::Complex64;
use proptest::prelude::*;

fn state_in(space: CompositeSpace) -> impl Strategy<Value = StateVector> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), space.dim())
        .prop_filter("non-zero", |v| v.iter().any(|(a, b)| a.abs() + b.abs() > 1e-2))
        .prop_map(move |v| {
            let amps: Vec<Complex64> = v.into_iter().map(|(a, b)| Complex64::new(a, b)).collect();
            StateVector::from_slice(space, &amps).unwrap().normalized().unwrap()
        })
}

proptest! {
    #[test]
    fn index_round_trip(n in 1usize..=4, cutoff in 0usize..=5, seed in any::<usize>()) {
        let space = CompositeSpace::new(n, cutoff).unwrap();
        let i = seed % space.dim();
        let (config, photons) = space.labels(i);
        prop_assert_eq!(space.index(config, photons), i);
        prop_assert_eq!(space.quanta(i), config.count_ones() as usize + photons);
    }

    #[test]
    fn photon_projections_partition_the_norm(
        psi in state_in(CompositeSpace::new(2, 3).unwrap())
    ) {
        let total: f64 = (0..=3).map(|k| psi.project_cavity(k).unwrap().norm_squared()).sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn evolution_preserves_norm_and_quanta(
        psi in state_in(CompositeSpace::new(2, 4).unwrap()),
        t in -4.0f64..4.0,
        m2 in 0.5f64..1.5,
    ) {
        let spec = HamiltonianSpec::new(psi.space(), 1.0).unwrap().with_multipliers(vec![1.0, m2]).unwrap();
        let h = build_tc_hamiltonian(&spec);
        let out = evolve(&psi, &h, t).unwrap();
        prop_assert!((out.norm() - 1.0).abs() < 1e-10);
        let space = psi.space();
        for m in 0..=space.max_quanta() {
            let weight = |v: &StateVector| -> f64 {
                space.sector(m).iter().map(|&i| v.amplitude(i).norm_sqr()).sum()
            };
            prop_assert!((weight(&psi) - weight(&out)).abs() < 1e-10);
        }
    }

    #[test]
    fn channel_never_amplifies(
        psi in state_in(CompositeSpace::emitters_only(3).unwrap()),
        gt in 0.0f64..3.0,
        k in 0usize..=2,
    ) {
        let ch = ConditionalChannel::for_emitters(3, gt, k).unwrap();
        prop_assert!(ch.apply(&psi).unwrap().norm() <= 1.0 + 1e-10);
    }

    #[test]
    fn outcome_probabilities_sum_to_one(
        psi in state_in(CompositeSpace::emitters_only(2).unwrap()),
        gt in 0.0f64..3.0,
        k in 0usize..=3,
    ) {
        let space = CompositeSpace::new(2, 2 + k).unwrap();
        let spec = HamiltonianSpec::new(space, 1.0).unwrap();
        let total: f64 = measurement_operators(&spec, gt, k)
            .unwrap()
            .iter()
            .map(|m| (m * psi.amplitudes()).norm_squared())
            .sum();
        prop_assert!((total - 1.0).abs() < 1e-10);
    }

    #[test]
    fn conditioned_state_stays_physical(
        psi in state_in(CompositeSpace::emitters_only(3).unwrap()),
        gt in 0.05f64..3.0,
    ) {
        let ch = ConditionalChannel::for_emitters(3, gt, 1).unwrap();
        let rho = DensityMatrix::from_pure(&psi).unwrap();
        if let Ok((next, p)) = conditional_step(&rho, &ch) {
            prop_assert!((0.0..=1.0).contains(&p));
            prop_assert!((next.trace() - 1.0).abs() < 1e-10);
            prop_assert!(next.eigenvalues().iter().all(|&e| e > -1e-10));
        }
    }

    #[test]
    fn trade_off_when_singlet_dominates(gt in 0.05f64..3.0) {
        let ch = ConditionalChannel::for_emitters(2, gt, 1).unwrap();
        let singlet = make_named_state(&StateLabel::Singlet, 2).unwrap();
        let eg = make_named_state(&StateLabel::Product("eg".into()), 2).unwrap();
        let r = run_purification(&eg.density_matrix(), &ch, 15, &singlet).unwrap();
        for w in r.records.windows(2) {
            prop_assert!(w[1].p_cumulative <= w[0].p_cumulative + 1e-12);
            prop_assert!(w[1].fidelity >= w[0].fidelity - 1e-12);
        }
    }
}

#[test]
fn identity_channel_at_zero_interval() {
    let ch = ConditionalChannel::for_emitters(3, 0.0, 1).unwrap();
    let spectrum = channel_spectrum(&ch).unwrap();
    for m in spectrum.magnitudes() {
        assert_abs_diff_eq!(m, 1.0, epsilon = 1e-14);
    }
}

#[test]
fn channel_is_the_kept_photon_block() {
    let space = CompositeSpace::new(2, 3).unwrap();
    let h = build_tc_hamiltonian(&HamiltonianSpec::new(space, 1.0).unwrap());
    let ch = ConditionalChannel::for_emitters(2, 0.7, 1).unwrap();
    for cfg in ["gg", "eg", "ge", "ee"] {
        let input = StateVector::basis(space.emitter_space(), cfg, 0).unwrap();
        let full = evolve(&input.tensor_fock(space, 1).unwrap(), &h, 0.7).unwrap();
        let kept = full.project_cavity(1).unwrap();
        let out = ch.apply(&input).unwrap();
        for i in 0..4 {
            assert_abs_diff_eq!(kept.amplitude(i).re, out.amplitude(i).re, epsilon = 1e-13);
            assert_abs_diff_eq!(kept.amplitude(i).im, out.amplitude(i).im, epsilon = 1e-13);
        }
    }
}
