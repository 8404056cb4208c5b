use num_complex::Complex64;
use proptest::prelude::*;

use pairsim::basis::{self, dimension, label_to_config, config_to_label, transition_weight, SpinBasisLabel};
use pairsim::bcs::{self, GapProblem};
use pairsim::dynamics::{self, SpectralEvolver};
use pairsim::fft::{self, Window};
use pairsim::lines::{fit_lines, LineFitOptions};
use pairsim::model::{self, PairingModel};
use pairsim::states::{self, QuantumState};

fn model_strategy(max_spins: usize) -> impl Strategy<Value = PairingModel> {
    (1..=max_spins)
        .prop_flat_map(|n| (prop::collection::vec(-2.0..2.0f64, n), -1.0..1.0f64))
        .prop_map(|(eps, v)| PairingModel::new(eps, v).unwrap())
}

fn state_for(n: usize) -> impl Strategy<Value = QuantumState> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), dimension(n))
        .prop_filter("nonzero", |v| v.iter().any(|(a, b)| a.abs() + b.abs() > 1e-3))
        .prop_map(|v| QuantumState::from_amplitudes(v.into_iter().map(|(a, b)| Complex64::new(a, b)).collect()).unwrap())
}

proptest! {
    #[test]
    fn labels_round_trip(n in 1usize..=10, seed in any::<usize>()) {
        let label = 1 + seed % dimension(n);
        let l = SpinBasisLabel::new(label, n).unwrap();
        prop_assert_eq!(config_to_label(&label_to_config(l)).unwrap(), l);
        prop_assert_eq!(l.up_positions().len(), l.excitation());
    }

    #[test]
    fn transition_weight_is_a_single_raise(n in 1usize..=7, a in any::<usize>(), b in any::<usize>()) {
        let i = SpinBasisLabel::new(1 + a % dimension(n), n).unwrap();
        let j = SpinBasisLabel::new(1 + b % dimension(n), n).unwrap();
        let w = transition_weight(i, j).unwrap();
        let diff = (i.index() ^ j.index()).count_ones();
        let expected = diff == 1 && j.up_positions().len() == i.up_positions().len() + 1;
        prop_assert_eq!(w, u32::from(expected));
    }

    #[test]
    fn lowering_image_drops_one_excitation(n in 1usize..=8, a in any::<usize>()) {
        let l = SpinBasisLabel::new(1 + a % dimension(n), n).unwrap();
        let image = basis::lowering_image(l);
        prop_assert_eq!(image.len(), l.up_positions().len());
        for k in image {
            prop_assert_eq!(k.excitation() + 1, l.excitation());
            prop_assert_eq!(transition_weight(k, l).unwrap(), 1);
        }
    }

    #[test]
    fn hamiltonian_is_symmetric_and_conserving(m in model_strategy(6)) {
        let h = model::build_pairing_hamiltonian(&m).unwrap();
        prop_assert_eq!(model::asymmetry(&h), 0.0);
        prop_assert!(model::conserves_excitation(&h));
        let all_down = dimension(m.n_spins()) - 1;
        prop_assert!((h[(all_down, all_down)] - m.all_down_energy()).abs() < 1e-12);
    }

    #[test]
    fn block_spectrum_is_an_eigensystem(m in model_strategy(6)) {
        let h = model::build_pairing_hamiltonian(&m).unwrap();
        let eig = model::exact_spectrum(&h).unwrap();
        prop_assert!(eig.max_residual(&h) < 1e-10);
        prop_assert!(eig.orthonormality_defect() < 1e-10);
        prop_assert!(eig.values.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(eig.subspace_tags.iter().all(Option::is_some));
    }

    #[test]
    fn evolution_preserves_norm(
        (m, psi) in model_strategy(5).prop_flat_map(|m| { let n = m.n_spins(); (Just(m), state_for(n)) }),
        tau in 0.0..50.0f64,
    ) {
        let eig = model::exact_spectrum(&model::build_pairing_hamiltonian(&m).unwrap()).unwrap();
        let exact = SpectralEvolver::new(&eig, &psi).unwrap().evolve(tau);
        prop_assert!((exact.norm() - 1.0).abs() < 1e-10);
        let trot = dynamics::TrotterEvolver::new(&m, 7).unwrap().evolve(&psi, tau).unwrap();
        prop_assert!((trot.norm() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn anti_w_and_u_identities_hold(m in model_strategy(6).prop_filter("two spins", |m| m.n_spins() >= 2), a in any::<usize>()) {
        let n = m.n_spins();
        prop_assert!(states::check_w_identity(&m).unwrap() < 1e-12);
        let i = 1 + a % (n - 1);
        let j = i + 1 + (a / n) % (n - i);
        prop_assert!(states::check_u_identity(&m, i, j).unwrap() < 1e-12);
    }

    #[test]
    fn transform_satisfies_parseval(
        samples in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 2..200),
        step in 0.01..2.0f64,
    ) {
        let s: Vec<Complex64> = samples.into_iter().map(|(a, b)| Complex64::new(a, b)).collect();
        let spectrum = fft::transform(&s, step, Window::None, 1);
        let (time, freq) = fft::parseval_sums(&s, &spectrum);
        prop_assert!((time - freq).abs() <= 1e-10 * time.max(1e-300));
        prop_assert!(spectrum.frequencies.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn separated_tones_are_resolved(
        f1 in -2.5..-0.5f64,
        gap in 0.3..2.0f64,
        a2 in 0.2..1.0f64,
        phase in 0.0..std::f64::consts::TAU,
    ) {
        let f2 = f1 + gap;
        let delta = 0.5;
        // a tone at frequency f enters as exp(-i f tau)
        let s: Vec<Complex64> = (0..128)
            .map(|k| {
                let t = k as f64 * delta;
                Complex64::cis(-f1 * t) + a2 * Complex64::cis(phase - f2 * t)
            })
            .collect();
        let lines = fit_lines(&s, delta, LineFitOptions::default()).unwrap();
        prop_assert_eq!(lines.len(), 2);
        let mut got: Vec<f64> = lines.iter().map(|l| l.frequency).collect();
        got.sort_by(f64::total_cmp);
        prop_assert!((got[0] - f1).abs() < 1e-8 && (got[1] - f2).abs() < 1e-8, "{got:?} vs {f1} {f2}");
    }

    #[test]
    fn gap_solution_satisfies_the_equation(
        xi in prop::collection::vec(-1.0..1.0f64, 1..12),
        coupling in 0.01..3.0f64,
    ) {
        let p = GapProblem::new(xi, coupling).unwrap();
        match bcs::solve_gap_equation(&p) {
            Ok(gap) => {
                prop_assert!(gap > 0.0);
                prop_assert!(p.residual(gap).abs() <= 1e-12);
            }
            Err(pairsim::Error::NoSolution { rhs_at_zero }) => prop_assert!(rhs_at_zero <= 1.0),
            Err(e) => prop_assert!(false, "unexpected {e}"),
        }
    }
}
