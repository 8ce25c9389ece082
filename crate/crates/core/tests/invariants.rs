mod common;

use lambda_ob::atom::{
    apply_relaxation, optical_coherence, steady_state, two_level_im_rho12, two_level_im_rho32, Mat3,
};
use lambda_ob::{AtomParams, CoherenceDamping, DriveParams, Mode};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn damping() -> impl Strategy<Value = CoherenceDamping> {
    prop_oneof![Just(CoherenceDamping::Verbatim), Just(CoherenceDamping::Lindblad)]
}

fn any_rho() -> impl Strategy<Value = Mat3> {
    prop::array::uniform9((-1.0f64..1.0, -1.0f64..1.0)).prop_map(|v| {
        let mut m = [[Complex64::new(0.0, 0.0); 3]; 3];
        for (p, (re, im)) in v.into_iter().enumerate() {
            m[p / 3][p % 3] = Complex64::new(re, im);
        }
        m
    })
}

/// Swaps the two ground states: level 1 ↔ level 3, fields exchanged.
fn mirrored(atom: &AtomParams, drive: &DriveParams) -> (AtomParams, DriveParams) {
    let s = |a: usize| 2 - a;
    let mut m = atom.clone();
    for a in 0..3 {
        for b in 0..3 {
            m.gamma[s(a)][s(b)] = atom.gamma[a][b];
            m.dephasing[s(a)][s(b)] = atom.dephasing[a][b];
        }
    }
    // Energies (0, Δ₁, Δ₂) become (Δ₂, Δ₁, 0); shift by −Δ₂.
    let (d1, d2) = (atom.delta1(), atom.delta2());
    m.eps1 = d1 - d2;
    m.eps2 = (d1 - d2) + (-d2);
    (m, DriveParams::new(drive.omega2, drive.omega1))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn relaxation_preserves_trace(seed in any::<u64>(), rho in any_rho(), d in damping()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mut atom, _, _) = common::random_lindblad(&mut rng);
        atom.coherence_damping = d;
        let g = apply_relaxation(&rho, &atom);
        let tr = g[0][0] + g[1][1] + g[2][2];
        prop_assert!(tr.norm() < 1e-13);
    }

    #[test]
    fn lindblad_states_are_physical(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (atom, drive, _) = common::random_lindblad(&mut rng);
        let rho = steady_state(&atom, &drive).unwrap();
        prop_assert!(rho.check_invariants().is_ok(), "{:?}", rho.check_invariants());
    }

    #[test]
    fn verbatim_states_are_hermitian_with_unit_trace(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mut atom, drive, _) = common::random_lindblad(&mut rng);
        atom.coherence_damping = CoherenceDamping::Verbatim;
        let rho = steady_state(&atom, &drive).unwrap();
        prop_assert!(rho.hermiticity_error() < 1e-10);
        prop_assert!((rho.trace() - 1.0).norm() < 1e-10);
    }

    #[test]
    fn state_depends_on_field_signs_only_through_phases(
        seed in any::<u64>(), flip1 in any::<bool>(), flip2 in any::<bool>(), d in damping()
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mut atom, drive, _) = common::random_lindblad(&mut rng);
        atom.coherence_damping = d;
        let sign = |f: bool| if f { -1.0 } else { 1.0 };
        let flipped = DriveParams::new(sign(flip1) * drive.omega1, sign(flip2) * drive.omega2);
        let a = steady_state(&atom, &drive).unwrap();
        let b = steady_state(&atom, &flipped).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                prop_assert!((a.get(i, j).norm() - b.get(i, j).norm()).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn exchanging_the_ground_states_permutes_the_state(seed in any::<u64>(), d in damping()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mut atom, drive, _) = common::random_lindblad(&mut rng);
        atom.coherence_damping = d;
        let (m_atom, m_drive) = mirrored(&atom, &drive);
        let a = steady_state(&atom, &drive).unwrap();
        let b = steady_state(&m_atom, &m_drive).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                prop_assert!((a.get(i, j) - b.get(2 - i, 2 - j)).norm() < 1e-10);
            }
        }
        let c1 = optical_coherence(&a, Mode::One);
        let c2 = optical_coherence(&b, Mode::Two);
        prop_assert!((c1 - c2).norm() < 1e-10);
    }

    #[test]
    fn equal_decay_rates_fix_the_coherence_ratio(seed in any::<u64>(), d in damping()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (atom, drive) = common::random_equal_rates(&mut rng, d);
        let rho = steady_state(&atom, &drive).unwrap();
        let (c1, c2) = (optical_coherence(&rho, Mode::One).im, optical_coherence(&rho, Mode::Two).im);
        let expect = drive.omega2 / drive.omega1;
        prop_assert!(((c1 / c2 - expect) / expect).abs() < 1e-6);
    }

    #[test]
    fn closed_forms_differ_by_the_population_ratio(
        o1 in 0.01f64..5.0, o2 in 0.01f64..5.0, delta in -5.0f64..5.0,
        g21 in 0.1f64..5.0, g23 in 0.1f64..5.0, d21 in 0.05f64..3.0,
    ) {
        let a = two_level_im_rho12(o1, o2, delta, g21, d21);
        let b = two_level_im_rho32(o1, o2, delta, g21, g23, d21);
        if let (Ok(a), Ok(b)) = (a, b) {
            let scaled = a * g21 * o1 / (g23 * o2);
            prop_assert!(((b - scaled) / scaled).abs() < 1e-12);
        }
    }
}
