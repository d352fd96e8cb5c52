use born_core::construction::{partial_dft_basis, symmetric_state};
use born_core::dsl::parse_candidate;
use born_core::hilbert::{apply_unitary, haar_unitary, inner_product, random_state, OrthonormalBasis};
use born_core::Complex64;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn inner_product_is_unitary_invariant(n in 1usize..12, s in any::<u64>()) {
        let u = haar_unitary(n, s).unwrap();
        let a = random_state(n, s ^ 1).unwrap();
        let b = random_state(n, s ^ 2).unwrap();
        let before = inner_product(&a, &b).unwrap();
        let after = inner_product(&apply_unitary(&u, &a).unwrap(), &apply_unitary(&u, &b).unwrap()).unwrap();
        prop_assert!((before - after).norm() < 1e-12);
        prop_assert!(before.norm() <= 1.0 + 1e-12);
    }

    #[test]
    fn haar_columns_are_orthonormal(n in 1usize..24, s in any::<u64>()) {
        let u = haar_unitary(n, s).unwrap();
        prop_assert!(u.unitarity_defect() <= 1e-12);
        prop_assert!(OrthonormalBasis::from_unitary(&u).defect() <= 1e-12);
    }

    #[test]
    fn overlap_contract_is_basis_covariant(n in 2usize..20, kk in 1usize..19, s in any::<u64>(), theta in 0.0f64..6.3) {
        let k = 1 + kk % (n - 1);
        let base = OrthonormalBasis::from_unitary(&haar_unitary(n, s).unwrap());
        let psi = symmetric_state(&base, theta);
        let tilde = partial_dft_basis(&base, k).unwrap();
        prop_assert!(tilde.defect() <= 1e-10);
        let ov = tilde.basis().overlaps(psi.state()).unwrap();
        let phase = Complex64::from_polar(1.0, psi.theta());
        prop_assert!((ov[0] - phase * (k as f64 / n as f64).sqrt()).norm() <= 1e-11);
        for z in &ov[1..k] {
            prop_assert!(z.norm() <= 1e-11);
        }
        for z in &ov[k..] {
            prop_assert!((z - phase / (n as f64).sqrt()).norm() <= 1e-11);
        }
        // Moduli squared sum to one: the overlaps are a probability vector.
        let total: f64 = ov.iter().map(|z| z.norm_sqr()).sum();
        prop_assert!((total - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn printed_expressions_reparse(depth in 0u32..4, s in any::<u64>()) {
        let src = random_expr(depth, s);
        let e = parse_candidate(&src).unwrap();
        let again = parse_candidate(&e.to_string()).unwrap();
        prop_assert_eq!(e, again);
    }
}

fn random_expr(depth: u32, seed: u64) -> String {
    let leaves = ["r", "phi", "re", "im", "2", "0.5", "pi", "e"];
    let ops = ["+", "-", "*", "/", "^"];
    let funcs = ["abs", "sqrt", "sin", "cos", "exp", "ln"];
    let pick = |m: u64, len: usize| (seed.rotate_left(m as u32 * 7) % len as u64) as usize;
    if depth == 0 {
        return leaves[pick(1, leaves.len())].to_string();
    }
    let l = random_expr(depth - 1, seed.wrapping_mul(6364136223846793005).wrapping_add(1));
    let r = random_expr(depth - 1, seed.wrapping_mul(2862933555777941757).wrapping_add(3));
    match pick(2, 3) {
        0 => format!("({l}) {} ({r})", ops[pick(3, ops.len())]),
        1 => format!("{}({l})", funcs[pick(4, funcs.len())]),
        _ => format!("-({l})"),
    }
}
