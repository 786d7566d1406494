use perceptron_lab::binary_experiment::{count_solutions, PerceptronInstance};
use perceptron_lab::gardner_derrida::GdTerms;
use perceptron_lab::quadrature::QuadratureSpec;
use perceptron_lab::spherical_experiment::in_cone;
use proptest::prelude::*;

fn brute_force_counts(inst: &PerceptronInstance) -> Vec<u64> {
    let n = inst.n_dim();
    let m = inst.n_constraints();
    let mut counts = vec![0u64; m + 1];
    for bits in 0u64..(1 << n) {
        let sigma: Vec<f64> = (0..n).map(|j| if bits >> j & 1 == 1 { -1.0 } else { 1.0 }).collect();
        let ok = inst.rows().take_while(|r| r.iter().zip(&sigma).map(|(a, s)| a * s).sum::<f64>() > 0.0).count();
        for c in &mut counts[..=ok] {
            *c += 1;
        }
    }
    counts
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn enumeration_matches_brute_force(n in 1usize..10, m in 1usize..12, seed in any::<u64>()) {
        let inst = PerceptronInstance::sample(n, m, seed).unwrap();
        prop_assert_eq!(count_solutions(&inst).unwrap().counts, brute_force_counts(&inst));
    }

    #[test]
    fn counts_are_nonincreasing(n in 1usize..12, m in 1usize..20, seed in any::<u64>()) {
        let inst = PerceptronInstance::sample(n, m, seed).unwrap();
        let counts = count_solutions(&inst).unwrap().counts;
        prop_assert_eq!(counts[0], 1u64 << n);
        prop_assert!(counts.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn cone_membership_ignores_positive_scale(
        seed in any::<u64>(),
        x in prop::collection::vec(-3.0f64..3.0, 6),
        scale in 1e-3f64..1e3,
    ) {
        let inst = PerceptronInstance::sample(6, 4, seed).unwrap();
        let scaled: Vec<f64> = x.iter().map(|v| v * scale).collect();
        prop_assert_eq!(in_cone(&inst, &x), in_cone(&inst, &scaled));
    }

    #[test]
    fn free_energy_is_linear_in_alpha(q in 0.01f64..0.99, a in 0.0f64..3.0, b in 0.0f64..3.0) {
        let terms = GdTerms::at(q, &QuadratureSpec::default()).unwrap();
        let mid = terms.value(0.5 * (a + b));
        prop_assert!((mid - 0.5 * (terms.value(a) + terms.value(b))).abs() < 1e-12);
    }
}
