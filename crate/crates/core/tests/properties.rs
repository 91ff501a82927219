mod common;

use approx::assert_abs_diff_eq;
use proptest::prelude::*;

use common::*;
use proctensor::instrument::{dual_frame, span_rank, tetra_povm, theta_povm, Instrument};
use proctensor::linalg::{
    conditional_mutual_information, fidelity, hermitian_eig, kron, partial_trace, relative_entropy,
    von_neumann_entropy, ComplexMatrix, LegLayout,
};
use proctensor::process::{born_rule_povm, build_common_cause, check_causality, condition_all, cp_divisibility_check};
use proctensor::recovery::recover;
use proctensor::walk::{circuits, port_probabilities, random_coin, run_protocol, Port, WalkCircuit};

fn three_layout(dims: &[usize]) -> LegLayout {
    LegLayout::inputs(&["A", "B", "C"], dims)
}

fn dims_strategy() -> impl Strategy<Value = [usize; 3]> {
    prop_oneof![Just([2, 2, 2]), Just([2, 3, 2]), Just([3, 2, 2]), Just([2, 2, 3])]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn partial_trace_composes(seed in any::<u64>(), dims in dims_strategy()) {
        let rho = random_state(seed, dims.iter().product());
        let l = three_layout(&dims);
        let (ab, lab) = partial_trace(&rho, &l, &["A", "B"]).unwrap();
        let (a_step, _) = partial_trace(&ab, &lab, &["A"]).unwrap();
        let (a_once, _) = partial_trace(&rho, &l, &["A"]).unwrap();
        prop_assert!(a_step.max_abs_diff(&a_once) < 1e-12);
        prop_assert!((ab.trace() - rho.trace()).norm() < 1e-12);
    }

    #[test]
    fn eig_reconstructs(seed in any::<u64>(), d in 1usize..9) {
        let m = random_hermitian(seed, d);
        let e = hermitian_eig(&m).unwrap();
        prop_assert!(e.reconstruct().frobenius_distance(&m) < 1e-10);
        prop_assert!(e.vectors.unitarity_residual() < 1e-10);
        prop_assert!(e.values.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn entropy_is_unitarily_invariant(seed in any::<u64>(), d in 2usize..7) {
        let rho = random_state(seed, d);
        let u = random_unitary(seed.wrapping_add(1), d);
        let rotated = u.matmul(&rho).matmul(&u.adjoint()).hermitian_part();
        let s0 = von_neumann_entropy(&rho).unwrap();
        prop_assert!((s0 - von_neumann_entropy(&rotated).unwrap()).abs() < 1e-10);
        prop_assert!(s0 >= -1e-12 && s0 <= (d as f64).log2() + 1e-12);
    }

    #[test]
    fn klein_inequality(seed in any::<u64>(), d in 2usize..6) {
        let x = random_state(seed, d);
        let y = random_state(seed ^ 0xabcdef, d);
        prop_assert!(relative_entropy(&x, &y).unwrap() >= -1e-10);
        prop_assert!(relative_entropy(&x, &x).unwrap().abs() < 1e-9);
    }

    #[test]
    fn fidelity_of_pure_states(seed in any::<u64>(), d in 2usize..6) {
        let u = random_pure(seed, d);
        let v = random_pure(seed.wrapping_mul(31).wrapping_add(7), d);
        let overlap: f64 = u.iter().zip(&v).map(|(a, b)| a.conj() * b).sum::<proctensor::C64>().norm_sqr();
        let f = fidelity(&ComplexMatrix::projector(&u), &ComplexMatrix::projector(&v)).unwrap();
        prop_assert!((f - overlap).abs() < 1e-10);
    }

    #[test]
    fn fidelity_is_symmetric_and_bounded(seed in any::<u64>(), d in 2usize..6) {
        let r = random_state(seed, d);
        let s = random_state_rank(seed ^ 0x1234, d, 1 + (seed as usize % d));
        let f1 = fidelity(&r, &s).unwrap();
        let f2 = fidelity(&s, &r).unwrap();
        prop_assert!((f1 - f2).abs() < 1e-10);
        prop_assert!((-1e-12..=1.0 + 1e-10).contains(&f1));
    }

    #[test]
    fn born_rule_completeness(seed in any::<u64>(), dims in dims_strategy()) {
        let gamma = random_state(seed, dims.iter().product());
        let p = build_common_cause(&gamma, dims, (dims[0], dims[1])).unwrap();
        let insts = [
            random_basis_measurement(seed ^ 1, dims[0]),
            random_binary_povm(seed ^ 2, dims[1]),
            random_basis_measurement(seed ^ 3, dims[2]),
        ];
        let mut total = 0.0;
        for a in insts[0].matrices() {
            for b in insts[1].matrices() {
                for c in insts[2].matrices() {
                    let q = born_rule_povm(&p, &[a.clone(), b.clone(), c.clone()]).unwrap();
                    prop_assert!(q >= -1e-10);
                    total += q;
                }
            }
        }
        prop_assert!((total - 1.0).abs() < 1e-10);
    }

    #[test]
    fn common_cause_processes_are_causal_and_cp_divisible(seed in any::<u64>(), dims in dims_strategy()) {
        let gamma = random_state(seed, dims.iter().product());
        let p = build_common_cause(&gamma, dims, (dims[0], dims[1])).unwrap();
        let c = check_causality(&p).unwrap();
        prop_assert!(c.pass);
        let d = cp_divisibility_check(&p).unwrap();
        prop_assert!(d.ab_residual < 1e-10 && d.bc_residual < 1e-10 && d.ac_residual < 1e-10);
        prop_assert!(d.pass);
    }

    #[test]
    fn conditioning_probabilities_sum_to_one(seed in any::<u64>(), dims in dims_strategy()) {
        let gamma = random_state(seed, dims.iter().product());
        let p = build_common_cause(&gamma, dims, (dims[0], dims[1])).unwrap();
        let inst = random_binary_povm(seed ^ 9, dims[1]);
        let total: f64 = condition_all(&p, "B", &inst).unwrap().iter().map(|c| c.probability).sum();
        prop_assert!((total - 1.0).abs() < 1e-10);
    }

    #[test]
    fn recovered_process_preserves_one_sided_statistics(seed in any::<u64>()) {
        // Per Bob event the recovered process keeps each side's marginal; it
        // drops only the A–C correlations.
        let gamma = random_state(seed, 8);
        let p = build_common_cause(&gamma, [2, 2, 2], (2, 2)).unwrap();
        let inst = tetra_povm();
        let rec = recover(&p, &inst).unwrap();
        let id = ComplexMatrix::identity(2);
        let ea = random_basis_measurement(seed ^ 5, 2);
        let ec = random_binary_povm(seed ^ 6, 2);
        for b in inst.matrices() {
            for a in ea.matrices() {
                let ops = [a.clone(), b.clone(), id.clone()];
                prop_assert!((born_rule_povm(&p, &ops).unwrap() - born_rule_povm(&rec, &ops).unwrap()).abs() < 1e-10);
            }
            for c in ec.matrices() {
                let ops = [id.clone(), b.clone(), c.clone()];
                prop_assert!((born_rule_povm(&p, &ops).unwrap() - born_rule_povm(&rec, &ops).unwrap()).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn dual_frame_is_biorthogonal(seed in any::<u64>()) {
        let inst = random_binary_povm(seed, 3);
        let dual = dual_frame(&inst).unwrap();
        for (x, dx) in dual.duals.iter().enumerate() {
            for (y, ey) in inst.matrices().enumerate() {
                let want = if x == y { 1.0 } else { 0.0 };
                prop_assert!((dx.trace_product(ey).re - want).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn walk_preserves_norm(seed in any::<u64>()) {
        let mut r = rng(seed);
        let psi = random_coin(&mut r);
        for c in [circuits::theta(), circuits::tetra(), circuits::trivial()] {
            let s = run_protocol(psi, &c).unwrap();
            prop_assert!((s.norm_sqr() - 1.0).abs() < 1e-12);
            let total: f64 = port_probabilities(psi, &c).unwrap().iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn random_coin_rounds_are_isometric(seed in any::<u64>(), rounds in 1usize..5) {
        let coins: Vec<(ComplexMatrix, ComplexMatrix)> = (0..rounds)
            .map(|k| (random_unitary(seed ^ (2 * k as u64), 2), random_unitary(seed ^ (2 * k as u64 + 1), 2)))
            .collect();
        let circuit = WalkCircuit::from_rounds(&coins, Vec::<Port>::new());
        let psi = random_coin(&mut rng(seed));
        let s = run_protocol(psi, &circuit).unwrap();
        prop_assert!((s.norm_sqr() - 1.0).abs() < 1e-12);
        let bound = circuit.lattice_bound();
        prop_assert!(s.positions().iter().all(|x| x.abs() <= bound));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn strong_subadditivity(seed in any::<u64>(), dims in dims_strategy(), low_rank in any::<bool>()) {
        let d = dims.iter().product();
        let rho = if low_rank { random_state_rank(seed, d, 1 + (seed as usize % 3)) } else { random_state(seed, d) };
        prop_assert!(conditional_mutual_information(&rho, dims).unwrap() >= -1e-10);
    }
}

#[test]
fn degenerate_instruments_have_reduced_span() {
    assert_eq!(span_rank(&theta_povm()).unwrap(), 3);
    assert_eq!(span_rank(&tetra_povm()).unwrap(), 4);
    let id = ComplexMatrix::identity(2);
    let half = id.scale(0.5);
    let trivial = Instrument::new(2, vec![half.clone(), half]).unwrap();
    assert_eq!(span_rank(&trivial).unwrap(), 1);
    assert!(dual_frame(&trivial).is_err());
}

#[test]
fn kron_of_marginals_is_product_state() {
    let a = random_state(3, 2);
    let c = random_state(4, 3);
    let rho = kron(&a, &c);
    assert_abs_diff_eq!(proctensor::linalg::mutual_information(&rho, 2, 3).unwrap(), 0.0, epsilon = 1e-10);
}
