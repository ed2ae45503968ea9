use coherent_dfs::coherent::direction_average;
use coherent_dfs::dfs::{
    branch_profiles, check_energy_shift_condition, check_phasing_condition, check_quasi_unitary_conditions,
    cyclic_permutation, full_df_report, gamma0_pair, individual_coupling, mirror_permutation, RegisterModel,
};
use coherent_dfs::{BathSpec, BranchProfile, Direction, FrequencyGrid, GridOptions, PhaseSum, PhaseTerm};
use num_complex::Complex64;
use proptest::prelude::*;

const TOL: f64 = 1e-10;

fn grid() -> FrequencyGrid {
    let bath = BathSpec::new(3, 0.25, 0.5).unwrap();
    FrequencyGrid::for_bath(&bath, &GridOptions { nodes: 400, ..GridOptions::default() }.with_max_rate(4.0)).unwrap()
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn complex() -> impl Strategy<Value = Complex64> {
    (-1.0..1.0f64, -1.0..1.0f64).prop_map(|(re, im)| c(re, im))
}

/// Isotropic phase sum: constant plus one dispersive term.
fn isotropic() -> impl Strategy<Value = PhaseSum> {
    (complex(), complex(), 0.1..2.0f64)
        .prop_map(|(a, b, r)| PhaseSum::from_terms(vec![PhaseTerm::constant(a), PhaseTerm::new(b, 0.0, r)]))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn phasing_implies_quasi_unitary_for_isotropic_couplings(
        ma in isotropic(),
        mb in isotropic(),
        ba in isotropic(),
        bb in isotropic(),
        shape in 0..3usize,
    ) {
        // with distinct couplings phasing forces vanishing offsets
        let mb = mb.add(&PhaseSum::real(1.5));
        let (ba, bb) = match shape {
            0 => (PhaseSum::zero(), PhaseSum::zero()),
            1 => (PhaseSum::zero(), bb),
            _ => (ba, bb),
        };
        let p = vec![BranchProfile::new("a", ma, ba), BranchProfile::new("b", mb, bb)];
        let g = grid();
        if check_phasing_condition(&p, &g, TOL) {
            prop_assert!(check_quasi_unitary_conditions(&p, &g, TOL));
        }
    }

    #[test]
    fn random_offsets_break_phasing(b0 in complex(), t_s in 0.2..1.5f64) {
        prop_assume!(b0.norm() > 1e-3);
        let model = RegisterModel::IndividualLinear { n: 2, t_s, epsilon: 1.0 };
        let labels = ["+-", "-+"];
        let offsets = [PhaseSum::constant(b0), PhaseSum::zero()];
        let bath = BathSpec::new(3, 0.25, 0.5).unwrap();
        let r = full_df_report(&model, &labels, Some(&offsets), &bath, &grid(), TOL).unwrap();
        prop_assert!(!r.phasing_ok);
        prop_assert!(!r.overall_df);
        let stationary = full_df_report(&model, &labels, None, &bath, &grid(), TOL).unwrap();
        prop_assert!(stationary.phasing_ok);
    }

    #[test]
    fn gamma0_monotone_in_temperature_and_symmetric(t1 in 0.0..5.0f64, t2 in 0.0..5.0f64, j in 1..4i32) {
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        let model = RegisterModel::WeakCollective { n: 3, epsilon: 1.0 };
        let labels = [if j % 2 == 1 { j } else { 1 }, -1].map(|v| v.to_string());
        let p = branch_profiles(&model, &[&labels[0], &labels[1]]).unwrap();
        let g0 = |theta: f64, a: &BranchProfile, b: &BranchProfile| {
            let bath = BathSpec::new(3, 0.25, theta).unwrap();
            let grid = FrequencyGrid::for_bath(&bath, &GridOptions::default()).unwrap();
            gamma0_pair(a, b, &bath, &grid).finite().unwrap()
        };
        prop_assert!(g0(lo, &p[0], &p[1]) <= g0(hi, &p[0], &p[1]) * (1.0 + 1e-12));
        prop_assert!((g0(hi, &p[0], &p[1]) - g0(hi, &p[1], &p[0])).abs() <= 1e-15);
    }
}

fn shell_average_modulus(s: &[i8], x: f64, t_s: f64) -> f64 {
    let m = individual_coupling(s, t_s);
    direction_average(|d| m.eval(x, d).norm_sqr())
}

fn max_pointwise_modulus_gap(a: &[i8], b: &[i8], t_s: f64) -> f64 {
    let (ma, mb) = (individual_coupling(a, t_s), individual_coupling(b, t_s));
    (1..200)
        .map(|k| 0.05 * k as f64)
        .flat_map(|x| Direction::BOTH.map(|d| (ma.eval(x, d).norm() - mb.eval(x, d).norm()).abs()))
        .fold(0.0, f64::max)
}

#[test]
fn cyclic_permutations_that_keep_the_coupling_modulus() {
    let t_s = 0.6;
    for (s, shift) in [(vec![1i8, -1], 1usize), (vec![1, 1, -1], 1)] {
        let p = cyclic_permutation(&s, shift);
        assert!(max_pointwise_modulus_gap(&s, &p, t_s) < 1e-12, "{s:?} shift {shift}");
    }
}

#[test]
fn cyclic_permutations_that_change_the_coupling_modulus() {
    let t_s = 0.6;
    for (s, shift) in [(vec![1i8, 1, -1], 2usize), (vec![1, 1, -1, -1], 1)] {
        let p = cyclic_permutation(&s, shift);
        assert!(max_pointwise_modulus_gap(&s, &p, t_s) > 1e-2, "{s:?} shift {shift}");
    }
}

#[test]
fn chain_reversal_keeps_shell_averaged_modulus_and_energy_shift() {
    let t_s = 0.45;
    let bath = BathSpec::new(3, 0.25, 0.2).unwrap();
    let g = FrequencyGrid::for_bath(&bath, &GridOptions::default().with_max_rate(8.0 * t_s)).unwrap();
    for s in [vec![1i8, 1, -1], vec![1, -1, -1, 1, 1], vec![1, 1, -1, -1]] {
        let r = mirror_permutation(&s, s.len() - 1);
        let rev: Vec<i8> = s.iter().rev().copied().collect();
        assert_eq!(r, rev);
        for k in 1..100 {
            let x = 0.1 * k as f64;
            let (a, b) = (shell_average_modulus(&s, x, t_s), shell_average_modulus(&r, x, t_s));
            assert!((a - b).abs() < 1e-12);
        }
        let pa = BranchProfile::stationary("a", individual_coupling(&s, t_s));
        let pb = BranchProfile::stationary("b", individual_coupling(&r, t_s));
        assert!(check_energy_shift_condition(&pa, &pb, &bath, &g, TOL));
    }
}

#[test]
fn identical_couplings_pass_phasing_but_not_quasi_unitarity() {
    let m = PhaseSum::from_terms(vec![PhaseTerm::new(c(0.0, 0.4), 0.0, 0.1)]);
    let p = vec![BranchProfile::stationary("a", m.clone()), BranchProfile::new("b", m.clone(), m.scale(c(1.7, 0.0)))];
    let g = grid();
    assert!(check_phasing_condition(&p, &g, TOL));
    assert!(!check_quasi_unitary_conditions(&p, &g, TOL));
}

#[test]
fn anisotropic_couplings_pass_phasing_but_not_quasi_unitarity() {
    // b⁰_A = σ sin(rx), b⁰_B = iσ sin(rx), m_A = e^{iσsx}, m_B = m_A − 1
    let (r, s) = (0.9, 0.4);
    let odd_sine = |scale: Complex64| {
        let half = scale / c(0.0, 2.0);
        PhaseSum::from_terms(vec![PhaseTerm::new(half, r, 0.0), PhaseTerm::new(-half, -r, 0.0)])
    };
    let ma = PhaseSum::from_terms(vec![PhaseTerm::new(c(1.0, 0.0), s, 0.0)]);
    let mb = ma.sub(&PhaseSum::real(1.0));
    assert!(!ma.is_isotropic());
    let p =
        vec![BranchProfile::new("a", ma, odd_sine(c(1.0, 0.0))), BranchProfile::new("b", mb, odd_sine(c(0.0, 1.0)))];
    let g = grid();
    assert!(check_phasing_condition(&p, &g, TOL));
    assert!(!check_quasi_unitary_conditions(&p, &g, TOL));
}

#[test]
fn single_qubit_report_matches_finiteness_table() {
    let model = RegisterModel::SingleQubit { epsilon: 1.0 };
    for (d, theta, finite) in [(1u8, 0.0, false), (2, 0.0, true), (2, 0.3, false), (3, 0.3, true)] {
        let bath = BathSpec::new(d, 0.25, theta).unwrap();
        let g = FrequencyGrid::for_bath(&bath, &GridOptions::default()).unwrap();
        let r = full_df_report(&model, &["up", "down"], None, &bath, &g, TOL).unwrap();
        assert_eq!(r.gamma0.is_finite(), finite, "d={d} θ={theta}");
        assert_eq!(r.overall_df, finite);
        let json = r.to_json();
        assert_eq!(json["gamma0"].is_string(), !finite);
    }
}
