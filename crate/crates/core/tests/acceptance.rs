//! Acceptance suite. Prints one line per criterion and exits non-zero if any
//! criterion fails. Criterion 9 needs external datasets, located through the
//! `MCCA_GCI_DATA` and `MCCA_AGRICULTURE_DATA` environment variables, and is
//! skipped otherwise.

use std::time::Instant;

use mcca::clusterability::{hopkins, hopkins_once, regularized_incomplete_beta, HopkinsOptions};
use mcca::data_io::{read_dataset, GammaChoice, KernelKind, RepeatedMeasuresDataset};
use mcca::experiments::{
    classical_cca_oracle, convergence_study, gen_latent_dataset, ConvergenceMethod, SyntheticSpec,
};
use mcca::functional_mcca::solve_functional_mcca;
use mcca::functional_mcca::{
    fourier_basis, smooth_block, smooth_dataset, solve_coefficients, BasisSpec,
};
use mcca::kernel_mcca::{
    gram_set, gram_set_from_blocks, kernel_specs, solve_grams, solve_kernel_mcca, KernelSpec,
};
use mcca::rng;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

type Check = fn() -> Outcome;

fn verdict(ok: bool, detail: String) -> Outcome {
    if ok {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

macro_rules! tryo {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(err) => return Outcome::Fail(format!("error: {err}")),
        }
    };
}

fn latent(n: usize, l: usize, t: usize, p: usize, seed: u64) -> SyntheticSpec {
    SyntheticSpec {
        n,
        l,
        t,
        p,
        latent_dim: 1,
        loading_scale: 1.0,
        noise_sd: 1.0,
        seed,
    }
}

fn flatten(ds: &RepeatedMeasuresDataset, l: usize) -> DMatrix<f64> {
    let blocks = ds.feature_blocks(l);
    DMatrix::from_fn(blocks.len(), blocks[0].len(), |k, j| {
        blocks[k].as_slice()[j]
    })
}

fn classical_oracle() -> Outcome {
    let mut worst: f64 = 0.0;
    for seed in 1..=5 {
        let ds = tryo!(gen_latent_dataset(&latent(200, 2, 1, 3, seed)));
        let specs = vec![KernelSpec::Linear; 2];
        let sol = tryo!(solve_kernel_mcca(&ds, &specs, 1e-10, 1));
        let oracle = tryo!(classical_cca_oracle(&flatten(&ds, 0), &flatten(&ds, 1)));
        worst = worst.max((sol.correlations[0] - oracle).abs());
    }
    verdict(
        worst < 1e-4,
        format!("max |kernel - oracle| = {worst:.3e} over 5 seeds (tol 1e-4)"),
    )
}

fn kernel_functional_cross() -> Outcome {
    let (n, eps_f) = (50, 0.1);
    let eps_k = eps_f * (n - 1) as f64 / n as f64;
    let basis = tryo!(BasisSpec::new(5, 16));
    let mut worst: f64 = 0.0;
    for seed in 1..=5 {
        let ds = tryo!(gen_latent_dataset(&latent(n, 3, 16, 2, seed)));
        let coeffs = tryo!(smooth_dataset(&ds, &basis));
        let k = 3 * 10;
        let func = tryo!(solve_coefficients(&coeffs, eps_f, k));
        let blocks: Vec<Vec<DMatrix<f64>>> = coeffs
            .coeffs
            .iter()
            .map(|f| {
                f.iter()
                    .map(|c| DMatrix::from_column_slice(c.len(), 1, c.as_slice()))
                    .collect()
            })
            .collect();
        let grams = tryo!(gram_set_from_blocks(&blocks, &[KernelSpec::Linear; 3]));
        let kern = tryo!(solve_grams(&grams, eps_k, k));
        for (a, b) in func.correlations.iter().zip(&kern.correlations) {
            worst = worst.max((a - b).abs());
        }
    }
    verdict(
        worst < 1e-8,
        format!("max correlation gap = {worst:.3e} over 5 seeds, all 30 components (tol 1e-8)"),
    )
}

fn perfect_dependence() -> Outcome {
    let base = tryo!(gen_latent_dataset(&latent(60, 2, 2, 2, 3)));
    let copy = base.feature_blocks(0).to_vec();
    let ds = tryo!(RepeatedMeasuresDataset::new(
        base.unit_labels().to_vec(),
        None,
        vec!["a".into(), "b".into(), "c".into()],
        vec![copy.clone(), copy.clone(), copy],
    ));
    let sol = tryo!(solve_kernel_mcca(&ds, &[KernelSpec::Linear; 3], 1e-8, 1));
    let rho = sol.correlations[0];
    verdict(
        (1.99..=2.0).contains(&rho),
        format!("top correlation = {rho:.10} (want [1.99, 2])"),
    )
}

fn constraint_residual() -> Outcome {
    let mut worst: f64 = 0.0;
    for seed in 0..20u64 {
        let l = 2 + (seed % 3) as usize;
        let ds = tryo!(gen_latent_dataset(&latent(30, l, 8, 2, 100 + seed)));
        let (sol, b_blocks) = if seed % 2 == 0 {
            let specs = tryo!(kernel_specs(&ds, KernelKind::Gaussian, GammaChoice::Median));
            let grams = tryo!(gram_set(&ds, &specs));
            let eps = 0.05;
            let sol = tryo!(solve_grams(&grams, eps, 3));
            let b: Vec<DMatrix<f64>> = grams
                .centered
                .iter()
                .map(|g| g * g / 30.0 + g * eps)
                .collect();
            (sol, b)
        } else {
            let basis = tryo!(BasisSpec::new(5, 8));
            let eps = 0.05;
            let sol = tryo!(solve_functional_mcca(&ds, &basis, eps, 3));
            let coeffs = tryo!(smooth_dataset(&ds, &basis));
            let covs = tryo!(mcca::functional_mcca::coeff_covariances(&coeffs));
            let b: Vec<DMatrix<f64>> = (0..l)
                .map(|i| {
                    &covs.blocks[i][i]
                        + DMatrix::identity(covs.blocks[i][i].nrows(), covs.blocks[i][i].nrows())
                            * eps
                })
                .collect();
            (sol, b)
        };
        for ws in &sol.weights {
            let total: f64 = ws.iter().zip(&b_blocks).map(|(w, b)| w.dot(&(b * w))).sum();
            worst = worst.max((total - l as f64).abs());
        }
    }
    verdict(
        worst < 1e-8,
        format!("max |sum w'Bw - L| = {worst:.3e} over 20 instances (tol 1e-8)"),
    )
}

fn ks_distance(sample: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    sample.sort_by(f64::total_cmp);
    let n = sample.len() as f64;
    sample
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            ((i + 1) as f64 / n - f).max(f - i as f64 / n)
        })
        .fold(0.0, f64::max)
}

fn hopkins_null() -> Outcome {
    let (n, m, reps, trials) = (100, 10, 500, 100u64);
    let critical = 1.6276 / (reps as f64).sqrt();
    let mut passing = 0;
    let mut grand = 0.0;
    for trial in 0..trials {
        let mut hs = Vec::with_capacity(reps);
        for r in 0..reps as u64 {
            let mut data_rng = rng::stream(7_000 + trial, 2 * r);
            let x = DMatrix::from_fn(n, 2, |_, _| data_rng.random::<f64>());
            let mut probe_rng = rng::stream(7_000 + trial, 2 * r + 1);
            hs.push(tryo!(hopkins_once(&x, m, &mut probe_rng)));
        }
        let mean = hs.iter().sum::<f64>() / reps as f64;
        grand += mean;
        let d = ks_distance(&mut hs, |h| {
            regularized_incomplete_beta(h, m as f64, m as f64).unwrap()
        });
        if (0.45..=0.55).contains(&mean) && d < critical {
            passing += 1;
        }
    }
    let grand = grand / trials as f64;
    verdict(
        passing >= 95,
        format!("{passing}/100 meta-trials pass (need 95), overall mean H = {grand:.4}, KS critical {critical:.4}"),
    )
}

fn hopkins_clusters() -> Outcome {
    let mut r = rng::stream(11, 0);
    let x = DMatrix::from_fn(100, 2, |k, j| {
        let centre = if k < 50 || j == 1 { 0.0 } else { 10.0 };
        centre + r.sample::<f64, _>(StandardNormal)
    });
    let res = tryo!(hopkins(&x, &HopkinsOptions::new(10, 200, 12)));
    verdict(
        res.h > 0.75,
        format!("mean H = {:.4} over 200 replications (want > 0.75)", res.h),
    )
}

fn convergence_trend() -> Outcome {
    let template = latent(100, 3, 2, 2, 21);
    let report = tryo!(convergence_study(
        &template,
        &[100, 400, 1600],
        20,
        ConvergenceMethod::Kernel
    ));
    let med = &report.median_error;
    let ok = med.windows(2).all(|w| w[1] < w[0]);
    verdict(
        ok,
        format!(
            "median errors {:.4e} > {:.4e} > {:.4e} (rho_ref = {:.6})",
            med[0], med[1], med[2], report.rho_ref
        ),
    )
}

fn basis_recovery() -> Outcome {
    let basis = tryo!(BasisSpec::new(5, 64));
    let design = basis.design();
    let mut r = rng::stream(31, 0);
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let c = DVector::from_fn(5, |_, _| r.sample::<f64, _>(StandardNormal));
        let curve = &design * &c;
        let block = DMatrix::from_column_slice(64, 1, curve.as_slice());
        let fitted = tryo!(smooth_block(&block, &basis));
        worst = worst.max((&design * fitted - &curve).amax());
    }
    let q = 4096;
    let mut gram = DMatrix::<f64>::zeros(5, 5);
    for i in 0..q {
        let t = (i as f64 + 0.5) / q as f64;
        let phi = DVector::from_vec(tryo!(fourier_basis(5, t)));
        gram += &phi * phi.transpose() / q as f64;
    }
    let ortho = (gram - DMatrix::identity(5, 5)).amax();
    verdict(
        worst < 1e-8 && ortho < 1e-6,
        format!(
            "max grid error {worst:.3e} (tol 1e-8), orthonormality error {ortho:.3e} (tol 1e-6)"
        ),
    )
}

fn check_top(label: &str, got: &[f64], want: &[f64], out: &mut Vec<String>) -> bool {
    let ok = got.len() >= want.len() && got.iter().zip(want).all(|(g, w)| (g - w).abs() <= 0.03);
    out.push(format!("{label} {got:.3?} vs {want:?}"));
    ok
}

fn external_data() -> Outcome {
    let gci = std::env::var_os("MCCA_GCI_DATA");
    let agri = std::env::var_os("MCCA_AGRICULTURE_DATA");
    if gci.is_none() && agri.is_none() {
        return Outcome::Skip("set MCCA_GCI_DATA / MCCA_AGRICULTURE_DATA to run".into());
    }
    let mut ok = true;
    let mut notes = Vec::new();
    let mut run = |path: &std::ffi::OsStr,
                   k: usize,
                   kernel_want: &[f64],
                   func_want: &[f64],
                   label: &str|
     -> Result<bool, mcca::Error> {
        let ds = read_dataset(std::path::Path::new(path))?;
        let eps = (ds.n_units() as f64).powf(-0.25);
        let specs = kernel_specs(&ds, KernelKind::Gaussian, GammaChoice::Median)?;
        let kern = solve_kernel_mcca(&ds, &specs, eps, k)?;
        let basis = BasisSpec::new(5, ds.time_points())?;
        let func = solve_functional_mcca(&ds, &basis, eps, k)?;
        let a = check_top(
            &format!("{label} kernel"),
            &kern.correlations,
            kernel_want,
            &mut notes,
        );
        let b = check_top(
            &format!("{label} functional"),
            &func.correlations,
            func_want,
            &mut notes,
        );
        Ok(a && b)
    };
    if let Some(p) = &gci {
        ok &= tryo!(run(p, 3, &[0.74, 0.28, 0.11], &[0.76, 0.29, 0.11], "gci"));
    }
    if let Some(p) = &agri {
        ok &= tryo!(run(p, 1, &[0.45], &[0.58], "agriculture"));
    }
    verdict(ok, notes.join("; "))
}

fn main() {
    let criteria: [(&str, Check); 9] = [
        ("classical CCA oracle equivalence", classical_oracle),
        ("kernel/functional cross-oracle", kernel_functional_cross),
        ("perfect-dependence limit", perfect_dependence),
        ("constraint residual", constraint_residual),
        ("Hopkins null calibration", hopkins_null),
        ("Hopkins cluster sensitivity", hopkins_clusters),
        ("convergence trend", convergence_trend),
        ("exact basis recovery", basis_recovery),
        ("external data (optional)", external_data),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = check();
        let secs = start.elapsed().as_secs_f64();
        let (tag, detail) = match outcome {
            Outcome::Pass(d) => ("PASS", d),
            Outcome::Fail(d) => {
                failed += 1;
                ("FAIL", d)
            }
            Outcome::Skip(d) => ("SKIP", d),
        };
        println!("criterion {} [{tag}] {name}: {detail} ({secs:.2}s)", i + 1);
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}
