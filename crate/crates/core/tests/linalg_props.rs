use mcca::linalg::{inv_sqrt_psd, solve_generalized_sym, sym_eig};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn symmetric(n: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-1.0..1.0f64, n * n).prop_map(move |v| {
        let a = DMatrix::from_vec(n, n, v);
        (&a + a.transpose()) * 0.5
    })
}

fn sized_symmetric(max: usize) -> impl Strategy<Value = DMatrix<f64>> {
    (1..=max).prop_flat_map(symmetric)
}

/// Coefficients of `det(λI − A)`, lowest degree first (Faddeev–LeVerrier).
fn char_poly(a: &DMatrix<f64>) -> Vec<f64> {
    let n = a.nrows();
    let mut c = vec![0.0; n + 1];
    c[n] = 1.0;
    let mut mk = DMatrix::zeros(n, n);
    for k in 1..=n {
        mk = a * &mk + DMatrix::identity(n, n) * c[n - k + 1];
        c[n - k] = -(a * &mk).trace() / k as f64;
    }
    c
}

fn eval(p: &[f64], x: f64) -> f64 {
    p.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

fn derivative(p: &[f64]) -> Vec<f64> {
    p.iter()
        .enumerate()
        .skip(1)
        .map(|(i, c)| c * i as f64)
        .collect()
}

/// Real roots of a polynomial known to have only real roots, ascending.
/// Roots of `p'` separate those of `p`, so each bracket holds one root.
fn real_roots(p: &[f64]) -> Vec<f64> {
    let deg = p.len() - 1;
    if deg == 1 {
        return vec![-p[0] / p[1]];
    }
    let bound = 1.0
        + p[..deg]
            .iter()
            .map(|c| (c / p[deg]).abs())
            .fold(0.0, f64::max);
    let mut edges = vec![-bound];
    edges.extend(real_roots(&derivative(p)));
    edges.push(bound);
    edges
        .windows(2)
        .map(|w| {
            let (mut lo, mut hi) = (w[0], w[1]);
            let (flo, fhi) = (eval(p, lo), eval(p, hi));
            if flo.signum() == fhi.signum() {
                return if flo.abs() < fhi.abs() { lo } else { hi };
            }
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if eval(p, mid).signum() == flo.signum() {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn eigenvalues_match_characteristic_roots(a in sized_symmetric(8)) {
        let eig = sym_eig(&a).unwrap();
        let mut roots = real_roots(&char_poly(&a));
        roots.reverse();
        for (got, want) in eig.values.iter().zip(&roots) {
            prop_assert!((got - want).abs() < 1e-6, "{:?} vs {:?}", eig.values, roots);
        }
    }

    #[test]
    fn inv_sqrt_projects_onto_retained_space(
        (n, r, v) in (2usize..7).prop_flat_map(|n| (Just(n), 1..=n))
            .prop_flat_map(|(n, r)| (Just(n), Just(r), prop::collection::vec(-1.0..1.0f64, n * r)))
    ) {
        let x = DMatrix::from_vec(n, r, v);
        let a = &x * x.transpose();
        let (s, rank) = inv_sqrt_psd(&a, 1e-10).unwrap();
        let eig = sym_eig(&a).unwrap();
        let top = eig.values[0];
        let kept: Vec<usize> = (0..n).filter(|&i| eig.values[i] > 1e-10 * top).collect();
        prop_assert_eq!(rank, kept.len());
        let mut proj = DMatrix::zeros(n, n);
        for &i in &kept {
            let v = eig.vectors.column(i);
            proj += v * v.transpose();
        }
        prop_assert!((&s * &a * &s - proj).amax() < 1e-8);
    }

    #[test]
    fn identity_right_side_is_ordinary_problem(a in sized_symmetric(6)) {
        let n = a.nrows();
        let g = solve_generalized_sym(&a, &DMatrix::identity(n, n), 1e-10, n).unwrap();
        let e = sym_eig(&a).unwrap();
        for (x, y) in g.values.iter().zip(&e.values) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn congruence_invariance(
        (m, b, q) in (1usize..=6).prop_flat_map(|n| (
            symmetric(n),
            prop::collection::vec(-1.0..1.0f64, n * n),
            prop::collection::vec(-0.3..0.3f64, n * n),
        ))
    ) {
        let n = m.nrows();
        let x = DMatrix::from_vec(n, n, b);
        let b = &x * x.transpose() + DMatrix::identity(n, n);
        let q = DMatrix::identity(n, n) + DMatrix::from_vec(n, n, q);
        prop_assume!(q.clone().lu().determinant().abs() > 0.1);
        let base = solve_generalized_sym(&m, &b, 1e-10, n).unwrap();
        let moved = solve_generalized_sym(&(q.transpose() * &m * &q), &(q.transpose() * &b * &q), 1e-10, n).unwrap();
        for (x, y) in base.values.iter().zip(&moved.values) {
            prop_assert!((x - y).abs() < 1e-6, "{:?} vs {:?}", base.values, moved.values);
        }
    }
}
