//! Cross-checks of the coefficient tables against independent constructions:
//! mass-shift reruns, two-scale reruns, and the closed-form scale shift.

use semilat_hadamard::{
    recursion_coeffs, scale_shift, HadamardCoeffs, PsiPoly,
};

type EntryFn = Box<dyn Fn(&HadamardCoeffs, usize, usize) -> f64>;

fn lambda_assembled(table: &HadamardCoeffs, entry: impl Fn(usize) -> f64, lambda: f64) -> f64 {
    let mut acc = 0.0;
    for k in (0..=table.lambda_orders()).rev() {
        acc = acc * lambda + entry(k);
    }
    acc
}

#[test]
fn mass_shift_rerun_differentiates_the_lambda_grading() {
    // With a constant background ψ₀ = c the λ-grading is a Taylor expansion
    // in the squared-mass shift 2λc: the k = 1 table entries must equal the
    // derivative of the background-free table with respect to λ under
    // m² → m² + 2λc, which a central finite difference measures directly.
    let m = 1.1f64;
    let c = 0.42f64;
    let ell = 0.9f64;
    let table = recursion_coeffs(m, &[PsiPoly::constant(c).unwrap()], 1, 1, 0, ell).unwrap();
    let log = table.log_symbol();

    let dl = 1e-6f64;
    let run = |lambda: f64| {
        let mass = (m * m + 2.0 * lambda * c).sqrt();
        recursion_coeffs(mass, &[], 1, 0, 0, ell).unwrap()
    };
    let plus = run(dl);
    let minus = run(-dl);

    let families: [(&str, EntryFn); 2] = [
        ("v", Box::new(|t, n, k| t.v_coincidence(n, k).unwrap().eval(t.log_symbol()))),
        ("w", Box::new(|t, n, k| t.w_coincidence(n, k).unwrap().eval(t.log_symbol()))),
    ];
    for (name, get) in &families {
        for n in 0..=1 {
            let fd = (get(&plus, n, 0) - get(&minus, n, 0)) / (2.0 * dl);
            let entry = match *name {
                "v" => table.v_coincidence(n, 1).unwrap().eval(log),
                _ => table.w_coincidence(n, 1).unwrap().eval(log),
            };
            let scale = entry.abs().max(1.0);
            assert!(
                (fd - entry).abs() < 1e-5 * scale,
                "{name}_{n}: finite difference {fd} vs λ¹ entry {entry}"
            );
        }
    }
    // And the exact pin: the λ¹ scalar entry of the σ⁰ log layer is ψ₀ itself.
    let v01 = table.v_coincidence(0, 1).unwrap();
    assert_eq!(v01.rational_part(), &semilat_hadamard::rat_from_f64(c).unwrap());
    assert!(v01.is_rational());
}

#[test]
fn two_scale_reruns_differ_by_the_closed_form_shift() {
    // Two tables differing only in the reference length have identical exact
    // entries; numerically they differ only through the log symbol, and the
    // assembled coincidence value of the regular σ⁰ layer shifts by
    // 4π²·α·(m² + 2λψ(0)) — the closed form scale_shift returns.
    let m = 0.9f64;
    let lambda = 0.37f64;
    let psi = [
        PsiPoly::from_terms(&[([0, 0, 0, 0], 0.4), ([0, 1, 0, 0], -0.2)]).unwrap(),
        PsiPoly::constant(-0.15).unwrap(),
    ];
    let (ell0, ell) = (1.3f64, 0.6f64);
    let at_ell0 = recursion_coeffs(m, &psi, 1, 2, 2, ell0).unwrap();
    let at_ell = recursion_coeffs(m, &psi, 1, 2, 2, ell).unwrap();

    // Exact layer: the tables are scale-independent symbol algebra.
    assert_eq!(at_ell0.rows(), at_ell.rows());

    // Numeric layer: assembled w₀ difference at coincidence.
    let diff = lambda_assembled(
        &at_ell0,
        |k| at_ell0.w_coincidence(0, k).unwrap().eval(at_ell0.log_symbol()),
        lambda,
    ) - lambda_assembled(
        &at_ell,
        |k| at_ell.w_coincidence(0, k).unwrap().eval(at_ell.log_symbol()),
        lambda,
    );
    // Background value at the base point: ψ(0) = Σⱼ λʲ·ψⱼ(0).
    let lambda_psi = lambda * 0.4 + lambda * lambda * (-0.15);
    let expected =
        4.0 * std::f64::consts::PI.powi(2) * scale_shift(m, lambda_psi, 0.0, ell0, ell).unwrap();
    assert!(
        (diff - expected).abs() < 1e-10,
        "w₀ two-scale difference {diff} vs closed form {expected}"
    );

    // Entrywise law across the whole table: v entries are scale-invariant,
    // w entries shift by 2·ln(ℓ₀/ℓ) times the matching v entry.
    let shift = 2.0 * (ell0 / ell).ln();
    let (l0, l1) = (at_ell0.log_symbol(), at_ell.log_symbol());
    for row in at_ell0.rows() {
        let (n, k, e) = (row.sigma_order, row.lambda_order, row.exponents);
        match row.family {
            "v" => {
                let a = at_ell0.v_monomial(n, k, e).unwrap();
                assert_eq!(a.eval(l0), a.eval(l1), "v entries must not see the scale");
            }
            _ => {
                let w = at_ell0.w_monomial(n, k, e).unwrap();
                let v = at_ell0.v_monomial(n, k, e).unwrap();
                let got = w.eval(l0) - w.eval(l1);
                let expected = shift * v.eval(l0);
                assert!(
                    (got - expected).abs() < 1e-12 * expected.abs().max(1.0),
                    "w({n},{k},{e:?}): shift {got} vs {expected}"
                );
            }
        }
    }
}

#[test]
fn doubling_the_leading_background_layer_acts_linearly_at_first_order() {
    // The λ¹ slice of every table is linear in ψ₀, while λ² mixes ψ₀² in;
    // doubling ψ₀ therefore exactly doubles k = 1 entries and must not
    // simply double the k = 2 ones.
    let m = 1.2f64;
    let base = [PsiPoly::from_terms(&[([0, 0, 0, 0], 0.3), ([0, 0, 1, 0], 0.1)]).unwrap()];
    let doubled = [PsiPoly::from_terms(&[([0, 0, 0, 0], 0.6), ([0, 0, 1, 0], 0.2)]).unwrap()];
    let a = recursion_coeffs(m, &base, 1, 2, 2, 1.0).unwrap();
    let b = recursion_coeffs(m, &doubled, 1, 2, 2, 1.0).unwrap();

    let two = semilat_hadamard::scalar::rat(2, 1);
    let mut saw_nonlinear = false;
    for row in a.rows() {
        let (n, k, e) = (row.sigma_order, row.lambda_order, row.exponents);
        let (av, bv) = match row.family {
            "v" => (
                a.v_monomial(n, k, e).unwrap(),
                b.v_monomial(n, k, e).unwrap(),
            ),
            _ => (
                a.w_monomial(n, k, e).unwrap(),
                b.w_monomial(n, k, e).unwrap(),
            ),
        };
        match k {
            0 => assert_eq!(av, bv),
            1 => assert_eq!(av.scale(&two), bv),
            _ => {
                if !av.is_zero() && av.scale(&two) != bv {
                    saw_nonlinear = true;
                }
            }
        }
    }
    assert!(saw_nonlinear, "λ² entries unexpectedly stayed linear in ψ₀");
}
