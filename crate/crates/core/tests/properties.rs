use proptest::prelude::*;

use qhier::combinatorics::{bell, enumerate_partitions, partition_weight, signed_factorial_partition_sum, LabelSet};
use qhier::cumulants::{group_cumulant, ClusterArgument};
use qhier::dynamics::{build_hamiltonian, HamiltonianSpec, System};
use qhier::hilbert::{c, symmetrizer, Direction, Statistics};
use qhier::kinetic::{solve_gqke, GqkeMethod};
use qhier::meanfield::{vlasov_solve, VlasovMethod};
use qhier::observables::{dual_bbgky_series, verify_duality, DualRepresentation};
use qhier::random::{random_density, random_hermitian, random_operator, random_symmetric_density, rng};
use qhier::sequences::{cluster_shift_exp, round_product, shift_map, star_exp, star_ln, OperatorSequence};
use qhier::states::{evolve_exact, marginal_series_bbgky, marginals_oracle, GrandCanonicalState, Representation};

fn sys() -> System {
    System::new(HamiltonianSpec::transverse(0.9, 0.4)).unwrap()
}

fn random_seq(n_max: usize, seed: u64, scale: f64) -> OperatorSequence {
    let mut r = rng(seed);
    OperatorSequence::from_fn(c(0.0), n_max, 2, |n| random_hermitian(n, 2, &mut r).scale_re(scale))
}

fn seq_diff(a: &OperatorSequence, b: &OperatorSequence) -> f64 {
    a.components().iter().zip(b.components()).map(|(x, y)| (x - y).trace_norm()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn partitions_counted_by_bell(n in 1usize..=8) {
        let ground = LabelSet::range(1, n);
        let parts = enumerate_partitions(&ground).unwrap();
        prop_assert_eq!(parts.len() as u128, bell(n).unwrap());
        prop_assert_eq!(&parts, &enumerate_partitions(&ground).unwrap());
        let sum: i128 = parts.iter().map(partition_weight).sum();
        prop_assert_eq!(sum, if n == 1 { 1 } else { 0 });
    }

    #[test]
    fn signed_factorial_sum_alternates(m in 0usize..=6) {
        prop_assert_eq!(signed_factorial_partition_sum(m), if m % 2 == 0 { 1 } else { -1 });
    }

    #[test]
    fn groups_are_trace_isometries(seed in any::<u64>(), t in -3.0f64..3.0, n in 1usize..=3) {
        let s = sys();
        let labels: Vec<usize> = (1..=n).collect();
        let f = random_density(n, 2, &mut rng(seed));
        let g = s.group(&labels, t, &f).unwrap();
        prop_assert!(g.is_hermitian(1e-10));
        prop_assert!(g.is_positive(1e-10));
        prop_assert!((g.trace() - f.trace()).norm() < 1e-10);
        prop_assert!((g.trace_norm() - f.trace_norm()).abs() < 1e-10);
    }

    #[test]
    fn group_property(seed in any::<u64>(), t1 in -2.0f64..2.0, t2 in -2.0f64..2.0) {
        let s = sys();
        let x = random_operator(2, 2, &mut rng(seed));
        let two = s.group(&[1, 2], t1, &s.group(&[1, 2], t2, &x).unwrap()).unwrap();
        let one = s.group(&[1, 2], t1 + t2, &x).unwrap();
        prop_assert!((&two - &one).max_abs() < 1e-10);
    }

    #[test]
    fn symmetrizers_commute_with_groups(seed in any::<u64>(), t in -2.0f64..2.0) {
        let s = sys();
        let x = random_operator(3, 2, &mut rng(seed));
        for stat in [Statistics::Bose, Statistics::Fermi] {
            let p = symmetrizer(3, 2, stat).unwrap();
            let a = s.group(&[1, 2, 3], t, &(&p * &x)).unwrap();
            let b = &p * &s.group(&[1, 2, 3], t, &x).unwrap();
            prop_assert!((&a - &b).max_abs() < 1e-10);
        }
    }

    #[test]
    fn star_exp_and_ln_invert(seed in any::<u64>(), n_max in 1usize..=5) {
        let h = random_seq(n_max, seed, 0.5);
        prop_assert!(seq_diff(&star_ln(&star_exp(&h).unwrap()).unwrap(), &h) < 1e-11);
    }

    #[test]
    fn shifted_exponential_factorizes(seed in any::<u64>(), y_len in 1usize..=2) {
        let h = random_seq(3, seed, 0.5);
        let y = LabelSet::range(1, y_len);
        let lhs = cluster_shift_exp(&h, &y).unwrap();
        let rhs = round_product(&shift_map(&star_exp(&h).unwrap(), &LabelSet::empty()).unwrap(), &shift_map(&h, &y).unwrap()).unwrap();
        prop_assert!(lhs.max_difference(&rhs) < 1e-12);
    }

    #[test]
    fn norms_grow_with_truncation(seed in any::<u64>(), k in 0usize..=4) {
        let f = random_seq(4, seed, 1.0);
        let cut = f.truncate(k);
        prop_assert!(cut.norm_trace() <= f.norm_trace());
        prop_assert!(cut.norm_gamma(0.3) <= f.norm_gamma(0.3));
    }

    #[test]
    fn interaction_is_linear_in_epsilon(eps in 0.01f64..5.0) {
        let spec = HamiltonianSpec::transverse(0.7, 0.3);
        let h0 = build_hamiltonian(&spec.without_interaction(), 3).unwrap();
        let h1 = build_hamiltonian(&spec.with_epsilon(1.0), 3).unwrap();
        let he = build_hamiltonian(&spec.with_epsilon(eps), 3).unwrap();
        let lin = &(&h1 - &h0).scale_re(eps) + &h0;
        prop_assert!((&he - &lin).max_abs() < 1e-12);
    }

    #[test]
    fn cumulant_bounds(seed in any::<u64>(), s in 1usize..=4, t in 0.0f64..4.0) {
        let sy = sys();
        let f = random_operator(s, 2, &mut rng(seed));
        let labels: Vec<usize> = (1..=s).collect();
        let a = group_cumulant(&sy, t, &ClusterArgument::singletons(&labels).unwrap(), Direction::Backward, &f).unwrap();
        let e = std::f64::consts::E;
        let fact: f64 = (1..=s).map(|k| k as f64).product();
        prop_assert!(a.trace_norm() <= fact * e.powi(s as i32) * f.trace_norm());
        let n = s - 1;
        let tail: Vec<usize> = (2..=s).collect();
        let arg = ClusterArgument::headed(&LabelSet::range(1, 1), &tail).unwrap();
        let b = group_cumulant(&sy, t, &arg, Direction::Forward, &f).unwrap();
        let nfact: f64 = (1..=n).map(|k| k as f64).product();
        prop_assert!(b.operator_norm() <= nfact * e.powi(n as i32 + 2) * f.operator_norm());
    }

    #[test]
    fn exact_evolution_keeps_states(seed in any::<u64>(), t in -2.0f64..2.0) {
        let st = GrandCanonicalState::random(3, 2, 0.3, &mut rng(seed)).unwrap();
        let ev = evolve_exact(&sys(), &st, t).unwrap();
        let f = marginals_oracle(&ev, 3).unwrap();
        prop_assert!(f.is_hermitian(1e-10));
        for op in f.components() {
            prop_assert!(op.is_positive(1e-10));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn bbgky_matches_oracle(seed in any::<u64>(), t in -2.0f64..2.0) {
        let s = sys();
        let st = GrandCanonicalState::random(3, 2, 0.3, &mut rng(seed)).unwrap();
        let f0 = marginals_oracle(&st, 3).unwrap();
        let exact = marginals_oracle(&evolve_exact(&s, &st, t).unwrap(), 3).unwrap();
        for k in 1..=3 {
            let got = marginal_series_bbgky(&s, &f0, t, k, Representation::Cumulant, 3 - k).unwrap().value;
            prop_assert!((&got - exact.component(k).unwrap()).trace_norm() < 1e-10);
            prop_assert!(got.is_hermitian(1e-10));
        }
    }

    #[test]
    fn dual_representations_and_duality(seed in any::<u64>(), t in 0.0f64..1.0) {
        let s = sys();
        let mut r = rng(seed);
        let b0 = OperatorSequence::from_fn(c(0.2), 3, 2, |k| random_hermitian(k, 2, &mut r));
        for k in 1..=3 {
            let a = dual_bbgky_series(&s, &b0, t, k, DualRepresentation::Cumulant).unwrap();
            let g = dual_bbgky_series(&s, &b0, t, k, DualRepresentation::GroupExpansion).unwrap();
            prop_assert!((&a - &g).max_abs() < 1e-10);
        }
        let st = GrandCanonicalState::random(3, 2, 0.3, &mut rng(seed ^ 1)).unwrap();
        let f0 = marginals_oracle(&st, 3).unwrap();
        prop_assert!(verify_duality(&s, &b0, &f0, t).unwrap() < 1e-9);
    }

    #[test]
    fn kinetic_solution_is_hermitian(seed in any::<u64>()) {
        let f1 = random_density(1, 2, &mut rng(seed)).scale_re(0.05);
        let sol = solve_gqke(&sys(), &f1, 0.5, GqkeMethod::TimeStep { steps: 20 }, 2).unwrap();
        let tol = sol.tails.last().copied().unwrap_or(0.0).max(1e-10);
        prop_assert!(sol.final_state().is_hermitian(1e-12));
        prop_assert!(sol.trace_drift.iter().all(|&d| d <= tol));
    }

    #[test]
    fn vlasov_keeps_states(seed in any::<u64>()) {
        let f = random_density(1, 2, &mut rng(seed));
        let spec = HamiltonianSpec::transverse(0.9, 0.4);
        for (_, x) in vlasov_solve(&spec, &f, 1.0, VlasovMethod::TimeStep { steps: 200 }).unwrap() {
            prop_assert!((x.trace() - f.trace()).norm() < 1e-10);
            prop_assert!(x.is_hermitian(1e-12));
            prop_assert!(x.is_positive(1e-10));
        }
    }

    #[test]
    fn fixed_n_states_are_one_component(seed in any::<u64>()) {
        let rho = random_symmetric_density(2, 2, &mut rng(seed));
        let st = GrandCanonicalState::fixed_n(&rho).unwrap();
        let f = marginals_oracle(&st, 2).unwrap();
        prop_assert!(f.is_hermitian(1e-12));
        prop_assert!((f.component(2).unwrap() - &rho.scale_re(2.0 / 3.0)).max_abs() < 1e-12);
    }
}

#[test]
fn generator_limit_is_first_order() {
    let s = sys();
    let f = random_hermitian(2, 2, &mut rng(3));
    let gen = s.generator_n(&f, qhier::dynamics::Picture::Observable).unwrap();
    let errs: Vec<f64> = [1e-2, 1e-3, 1e-4]
        .iter()
        .map(|&t| (&(&s.group(&[1, 2], t, &f).unwrap() - &f).scale_re(1.0 / t) - &gen).max_abs())
        .collect();
    assert!(errs[1] < errs[0] / 5.0 && errs[2] < errs[1] / 5.0, "{errs:?}");
}

#[test]
fn cumulant_generator_limits() {
    let s = sys();
    let f = random_hermitian(2, 2, &mut rng(4));
    let want = s.nint_state(1, 2, &f).unwrap();
    let pair = ClusterArgument::singletons(&[1, 2]).unwrap();
    let errs: Vec<f64> = [1e-2, 1e-3]
        .iter()
        .map(|&t| (&group_cumulant(&s, t, &pair, Direction::Backward, &f).unwrap().scale_re(1.0 / t) - &want).max_abs())
        .collect();
    assert!(errs[1] < errs[0] / 5.0, "{errs:?}");
    let g = random_hermitian(3, 2, &mut rng(5));
    let triple = ClusterArgument::singletons(&[1, 2, 3]).unwrap();
    let norms: Vec<f64> =
        [1e-2, 1e-3].iter().map(|&t| group_cumulant(&s, t, &triple, Direction::Backward, &g).unwrap().max_abs()).collect();
    assert!(norms[1] < norms[0] / 50.0, "{norms:?}");
}
