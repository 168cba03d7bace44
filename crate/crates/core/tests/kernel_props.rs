use mcca::data_io::{GammaChoice, KernelKind, RepeatedMeasuresDataset};
use mcca::experiments::{gen_latent_dataset, SyntheticSpec};
use mcca::kernel_mcca::{gram_matrix, kernel_specs, solve_kernel_mcca, KernelSpec};
use mcca::linalg::sym_eig;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn latent(n: usize, l: usize, seed: u64) -> RepeatedMeasuresDataset {
    gen_latent_dataset(&SyntheticSpec {
        n,
        l,
        t: 3,
        p: 2,
        latent_dim: 1,
        loading_scale: 1.0,
        noise_sd: 0.8,
        seed,
    })
    .unwrap()
}

fn permuted(ds: &RepeatedMeasuresDataset, perm: &[usize]) -> RepeatedMeasuresDataset {
    RepeatedMeasuresDataset::new(
        perm.iter().map(|&k| ds.unit_labels()[k].clone()).collect(),
        None,
        ds.feature_names().to_vec(),
        (0..ds.n_features())
            .map(|l| perm.iter().map(|&k| ds.block(l, k).clone()).collect())
            .collect(),
    )
    .unwrap()
}

fn gaussian_solution(ds: &RepeatedMeasuresDataset, eps: f64, k: usize) -> mcca::MccaSolution {
    let specs = kernel_specs(ds, KernelKind::Gaussian, GammaChoice::Median).unwrap();
    solve_kernel_mcca(ds, &specs, eps, k).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn unit_order_invariance(seed in 0u64..1000, perm in Just((0..20).collect::<Vec<usize>>()).prop_shuffle()) {
        let ds = latent(20, 3, seed);
        let a = gaussian_solution(&ds, 0.1, 3);
        let b = gaussian_solution(&permuted(&ds, &perm), 0.1, 3);
        for (x, y) in a.correlations.iter().zip(&b.correlations) {
            prop_assert!((x - y).abs() < 1e-9);
        }
        prop_assume!(!a.diagnostics.degenerate[0]);
        let (sa, sb) = (&a.scores[0], &b.scores[0]);
        let sign = if sa[(perm[0], 0)] * sb[(0, 0)] < 0.0 { -1.0 } else { 1.0 };
        for (row, &k) in perm.iter().enumerate() {
            for l in 0..3 {
                prop_assert!((sa[(k, l)] - sign * sb[(row, l)]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn correlations_bounded_by_l_minus_one(seed in 0u64..1000, l in 2usize..5, eps in 1e-6..1.0f64) {
        let ds = latent(15, l, seed);
        let sol = gaussian_solution(&ds, eps, 4);
        for rho in &sol.correlations {
            prop_assert!(rho.abs() <= (l - 1) as f64 + 1e-8, "{rho}");
        }
        let lin = solve_kernel_mcca(&ds, &vec![KernelSpec::Linear; l], eps, 2).unwrap();
        for rho in &lin.correlations {
            prop_assert!(rho.abs() <= (l - 1) as f64 + 1e-8, "{rho}");
        }
    }

    #[test]
    fn gaussian_gram_is_psd(
        v in prop::collection::vec(-3.0..3.0f64, 12 * 6),
        gamma in 0.01..10.0f64,
    ) {
        let blocks: Vec<DMatrix<f64>> = v.chunks(6).map(|c| DMatrix::from_column_slice(3, 2, c)).collect();
        let g = gram_matrix(&blocks, &KernelSpec::gaussian(gamma).unwrap()).unwrap();
        let min = *sym_eig(&g).unwrap().values.last().unwrap();
        prop_assert!(min >= -1e-10, "{min}");
    }
}

#[test]
fn larger_epsilon_never_raises_top_correlation() {
    for seed in 0..5 {
        let ds = latent(30, 3, seed);
        let tops: Vec<f64> = [1e-4, 1e-2, 1e-1]
            .iter()
            .map(|&eps| gaussian_solution(&ds, eps, 1).correlations[0])
            .collect();
        assert!(
            tops.windows(2).all(|w| w[1] <= w[0] + 1e-12),
            "seed {seed}: {tops:?}"
        );
    }
}
