//! Property tests for the algebra and selection invariants.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_complex::Complex64;
use proptest::prelude::*;

use effham_core::decomposition::{FrequencyDecomposition, FrequencyTerm};
use effham_core::effective::{effn, enumerate_resonances};
use effham_core::expr::{eval_expr, parse};
use effham_core::hilbert::{Factor, Operator, SpaceSpec};
use effham_core::rational::Rational;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn space_strategy() -> impl Strategy<Value = Arc<SpaceSpec>> {
    prop_oneof![
        Just(SpaceSpec::new(vec![Factor::Qubit]).unwrap()),
        Just(SpaceSpec::new(vec![Factor::Qubit, Factor::Qubit]).unwrap()),
        Just(SpaceSpec::new(vec![Factor::Boson { cutoff: 3 }]).unwrap()),
        Just(SpaceSpec::new(vec![Factor::Qubit, Factor::Boson { cutoff: 4 }]).unwrap()),
    ]
}

fn operator_strategy(space: Arc<SpaceSpec>) -> impl Strategy<Value = Operator> {
    let dim = space.dim();
    proptest::collection::vec(
        (0..dim, 0..dim, -1.0f64..1.0, -1.0f64..1.0),
        0..(2 * dim),
    )
    .prop_map(move |entries| {
        Operator::from_entries(
            &space,
            entries
                .into_iter()
                .map(|(r, col, re, im)| ((r, col), c(re, im))),
        )
        .unwrap()
    })
}

fn pair_strategy() -> impl Strategy<Value = (Operator, Operator)> {
    space_strategy().prop_flat_map(|space| {
        (
            operator_strategy(Arc::clone(&space)),
            operator_strategy(space),
        )
    })
}

/// Dense reference used as the independent check of the sparse algebra.
fn dense_mul(a: &[Complex64], b: &[Complex64], n: usize) -> Vec<Complex64> {
    let mut out = vec![c(0.0, 0.0); n * n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i * n + k];
            for j in 0..n {
                out[i * n + j] += aik * b[k * n + j];
            }
        }
    }
    out
}

fn max_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

proptest! {
    #[test]
    fn sparse_product_matches_dense_reference((a, b) in pair_strategy()) {
        let n = a.dim();
        let got = a.mul(&b).unwrap().to_dense();
        let expect = dense_mul(&a.to_dense(), &b.to_dense(), n);
        prop_assert!(max_diff(&got, &expect) <= 1e-12);
    }

    #[test]
    fn dagger_is_an_involutive_antihomomorphism((a, b) in pair_strategy()) {
        prop_assert_eq!(a.dagger().dagger(), a.clone());
        let lhs = a.mul(&b).unwrap().dagger();
        let rhs = b.dagger().mul(&a.dagger()).unwrap();
        prop_assert!(lhs.max_abs_diff(&rhs) <= 1e-12);
    }

    #[test]
    fn sum_against_dense_and_defect_of_hermitized((a, b) in pair_strategy()) {
        let sum = a.add(&b).unwrap();
        let mut expect = a.to_dense();
        for (e, v) in expect.iter_mut().zip(b.to_dense()) {
            *e += v;
        }
        prop_assert!(max_diff(&sum.to_dense(), &expect) <= 1e-13);
        // A + A† is hermitian by construction
        let herm = a.add(&a.dagger()).unwrap();
        prop_assert!(herm.hermitian_defect() <= 1e-13);
    }
}

fn decomposition_strategy() -> impl Strategy<Value = FrequencyDecomposition> {
    space_strategy()
        .prop_flat_map(|space| {
            let terms = proptest::collection::vec(
                (
                    operator_strategy(Arc::clone(&space)),
                    1i128..=9,
                    1i128..=6,
                ),
                1..=3,
            );
            (Just(space), terms)
        })
        .prop_filter_map("valid decomposition", |(space, raw)| {
            let mut seen = Vec::new();
            let mut terms = Vec::new();
            for (h, num, den) in raw {
                if h.is_zero() {
                    return None;
                }
                let omega = Rational::new(num, den).unwrap();
                if seen.contains(&omega) {
                    return None;
                }
                seen.push(omega);
                terms.push(FrequencyTerm { h, omega });
            }
            FrequencyDecomposition::new(space, "w", terms).ok()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn signed_components_come_in_conjugate_pairs(d in decomposition_strategy()) {
        let comps = d.expand_signed();
        prop_assert_eq!(comps.len(), 2 * d.terms().len());
        for pair in comps.chunks(2) {
            prop_assert_eq!(pair[0].nu, -pair[1].nu);
            prop_assert_eq!(pair[0].amp.dagger(), pair[1].amp.clone());
        }
    }

    #[test]
    fn drive_evaluation_is_hermitian(d in decomposition_strategy(), t in -50.0f64..50.0) {
        prop_assert!(d.evaluate_at(t, 1.0).hermitian_defect() <= 1e-12);
    }

    #[test]
    fn kept_tuples_close_under_sign_reversal_and_order3_is_hermitian(
        d in decomposition_strategy()
    ) {
        let (kept, _) = enumerate_resonances(&d, 3).unwrap();
        let keys: std::collections::BTreeSet<Vec<usize>> =
            kept.iter().map(|t| t.component_indices.clone()).collect();
        for tuple in &kept {
            let negated: Vec<usize> = tuple.component_indices.iter().map(|&j| j ^ 1).collect();
            prop_assert!(keys.contains(&negated));
        }
        let eh = effn(&d, 3).unwrap();
        prop_assert!(eh.total.hermitian_defect() <= 1e-10);
    }

    #[test]
    fn amplitude_scaling_is_homogeneous_of_degree_n(
        d in decomposition_strategy(),
        order in 2usize..=3,
    ) {
        let base = effn(&d, order).unwrap().total;
        let scaled = effn(&d.scale_amplitudes(c(2.0, 0.0)), order).unwrap().total;
        let factor = c(2.0f64.powi(order as i32), 0.0);
        // powers of two are exact, but entries within the sparse pruning
        // tolerance of zero may survive on one side and not the other
        prop_assert!(scaled.max_abs_diff(&base.scale(factor)) <= 1e-14);
    }
}

// ---------------------------------------------------------------------------
// Parser round-trip
// ---------------------------------------------------------------------------

fn expr_strategy() -> impl Strategy<Value = String> {
    // atoms valid on qubit ⊗ qubit ⊗ boson(4) with params lambda, theta
    let leaf = prop_oneof![
        Just("id".to_string()),
        Just("lambda".to_string()),
        Just("pi".to_string()),
        Just("cos(theta)".to_string()),
        Just("sin(theta)".to_string()),
        Just("sp(0)".to_string()),
        Just("sm(1)".to_string()),
        Just("sz(0)".to_string()),
        Just("a(2)".to_string()),
        Just("adag(2)".to_string()),
        (1u8..=9).prop_map(|n| n.to_string()),
        Just("0.25".to_string()),
    ];
    leaf.prop_recursive(3, 24, 4, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("{a} + {b}")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("{a} - {b}")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("{a}*{b}")),
            inner.clone().prop_map(|a| format!("-({a})")),
            inner.prop_map(|a| format!("({a})")),
        ]
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn pretty_printed_expressions_reparse_to_the_same_operator(src in expr_strategy()) {
        let space = SpaceSpec::new(vec![
            Factor::Qubit,
            Factor::Qubit,
            Factor::Boson { cutoff: 4 },
        ])
        .unwrap();
        let params: BTreeMap<String, Complex64> = [
            ("lambda".to_string(), c(0.07, 0.0)),
            ("theta".to_string(), c(0.9, 0.0)),
        ]
        .into_iter()
        .collect();
        let ast = parse(&src).unwrap();
        let printed = ast.to_string();
        let reparsed = parse(&printed).unwrap();
        let a = eval_expr(&ast, &space, &params).unwrap();
        let b = eval_expr(&reparsed, &space, &params).unwrap();
        prop_assert!(a.max_abs_diff(&b) == 0.0, "`{}` vs `{}`", src, printed);
    }
}
