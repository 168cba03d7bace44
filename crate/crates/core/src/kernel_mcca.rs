//! Multiple kernel CCA on centered Gram matrices.
//!
//! Each feature `l` gets a kernel `K_l` on `T×p_l` blocks. With centered Gram
//! matrices `G̃_l = H G_l H`, the sample problem becomes
//!
//! ```text
//! (1/n)·[G̃_i G̃_j]_{i≠j} w = ρ · blockdiag(G̃_l²/n + ε G̃_l) w,
//! Σ_l w_lᵀ (G̃_l²/n + ε G̃_l) w_l = L,
//! ```
//!
//! and the canonical score of unit `k` on feature `l` is `(G̃_l w_l)_k`.
//! The right-hand side is always singular (`G̃_l 𝟙 = 0`); the solver works on
//! its range.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data_io::{GammaChoice, KernelKind, RepeatedMeasuresDataset};
use crate::error::{Error, Result};
use crate::multiset;
use crate::solution::{MccaSolution, Method};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum KernelSpec {
    /// `exp(−γ‖A − B‖_F²)`
    Gaussian { gamma: f64 },
    /// Frobenius inner product `Σ a_st b_st`.
    Linear,
}

impl KernelSpec {
    pub fn gaussian(gamma: f64) -> Result<Self> {
        if gamma.is_finite() && gamma > 0.0 {
            Ok(KernelSpec::Gaussian { gamma })
        } else {
            Err(Error::InvalidParameter(format!(
                "gamma must be positive, got {gamma}"
            )))
        }
    }

    pub fn eval(&self, a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
        match *self {
            KernelSpec::Gaussian { gamma } => gaussian_kernel(a, b, gamma),
            KernelSpec::Linear => linear_kernel(a, b),
        }
    }
}

fn check_pair(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::ShapeMismatch(format!(
            "{}x{} vs {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    if !a.iter().chain(b.iter()).all(|x| x.is_finite()) {
        return Err(Error::NonFinite("kernel argument".into()));
    }
    Ok(())
}

fn squared_distance(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `exp(−γ·‖A − B‖_F²)`.
pub fn gaussian_kernel(a: &DMatrix<f64>, b: &DMatrix<f64>, gamma: f64) -> Result<f64> {
    check_pair(a, b)?;
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "gamma must be positive, got {gamma}"
        )));
    }
    Ok((-gamma * squared_distance(a, b)).exp())
}

pub fn linear_kernel(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    check_pair(a, b)?;
    Ok(a.iter().zip(b.iter()).map(|(x, y)| x * y).sum())
}

/// Median heuristic: `1 / median{‖A_i − A_j‖_F² : i < j}`, taking the lower
/// middle element for an even number of pairs.
pub fn median_gamma(blocks: &[DMatrix<f64>]) -> Result<f64> {
    let n = blocks.len();
    if n < 2 {
        return Err(Error::InvalidParameter(format!(
            "median heuristic needs at least 2 blocks, got {n}"
        )));
    }
    let mut d = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            check_pair(&blocks[i], &blocks[j])?;
            d.push(squared_distance(&blocks[i], &blocks[j]));
        }
    }
    let mid = (d.len() - 1) / 2;
    let (_, median, _) = d.select_nth_unstable_by(mid, |a, b| a.total_cmp(b));
    if *median <= 0.0 {
        return Err(Error::DegenerateDistances);
    }
    Ok(median.recip())
}

/// Kernel specs for every feature of `dataset` from the configured kind and
/// width.
pub fn kernel_specs(
    dataset: &RepeatedMeasuresDataset,
    kind: KernelKind,
    gamma: GammaChoice,
) -> Result<Vec<KernelSpec>> {
    (0..dataset.n_features())
        .map(|l| match (kind, gamma) {
            (KernelKind::Linear, _) => Ok(KernelSpec::Linear),
            (KernelKind::Gaussian, GammaChoice::Fixed(g)) => KernelSpec::gaussian(g),
            (KernelKind::Gaussian, GammaChoice::Median) => {
                median_gamma(dataset.feature_blocks(l)).map(|gamma| KernelSpec::Gaussian { gamma })
            }
        })
        .collect()
}

/// Raw and centered Gram matrices for every feature.
#[derive(Debug, Clone)]
pub struct GramSet {
    pub raw: Vec<DMatrix<f64>>,
    pub centered: Vec<DMatrix<f64>>,
    pub kernel_specs: Vec<KernelSpec>,
}

impl GramSet {
    pub fn n_units(&self) -> usize {
        self.raw.first().map_or(0, |g| g.nrows())
    }

    pub fn n_features(&self) -> usize {
        self.raw.len()
    }
}

/// `H G H` with `H = I − 𝟙𝟙ᵀ/n`.
pub fn center_gram(g: &DMatrix<f64>) -> DMatrix<f64> {
    let n = g.nrows();
    let h = DMatrix::identity(n, n) - DMatrix::from_element(n, n, 1.0 / n as f64);
    &h * g * &h
}

/// Gram matrix `G_ij = K(A_i, A_j)` over a list of blocks.
pub fn gram_matrix(blocks: &[DMatrix<f64>], spec: &KernelSpec) -> Result<DMatrix<f64>> {
    let n = blocks.len();
    let mut g = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = spec.eval(&blocks[i], &blocks[j])?;
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    Ok(g)
}

/// Gram matrices for every feature of `dataset`, with one spec per feature.
pub fn gram_set(dataset: &RepeatedMeasuresDataset, specs: &[KernelSpec]) -> Result<GramSet> {
    if specs.len() != dataset.n_features() {
        return Err(Error::DimensionMismatch(format!(
            "{} kernel specs for {} features",
            specs.len(),
            dataset.n_features()
        )));
    }
    gram_set_from_blocks(
        &(0..dataset.n_features())
            .map(|l| dataset.feature_blocks(l).to_vec())
            .collect::<Vec<_>>(),
        specs,
    )
}

/// As [`gram_set`], from per-feature block lists.
pub fn gram_set_from_blocks(
    features: &[Vec<DMatrix<f64>>],
    specs: &[KernelSpec],
) -> Result<GramSet> {
    let raw = features
        .iter()
        .zip(specs)
        .map(|(blocks, spec)| gram_matrix(blocks, spec))
        .collect::<Result<Vec<_>>>()?;
    let centered = raw.iter().map(center_gram).collect();
    Ok(GramSet {
        raw,
        centered,
        kernel_specs: specs.to_vec(),
    })
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon.is_finite() && epsilon >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "epsilon must be non-negative and finite, got {epsilon}"
        )))
    }
}

/// Left-hand `M` and the diagonal blocks `G̃_l²/n + ε G̃_l` of the right-hand
/// side.
fn kernel_blocks(grams: &GramSet, epsilon: f64) -> Result<(DMatrix<f64>, Vec<DMatrix<f64>>)> {
    check_epsilon(epsilon)?;
    let n = grams.n_units();
    let l = grams.n_features();
    let nf = n as f64;
    let mut rows: Vec<Vec<DMatrix<f64>>> = Vec::with_capacity(l);
    for i in 0..l {
        let mut row: Vec<DMatrix<f64>> = rows.iter().map(|upper| upper[i].transpose()).collect();
        row.push(DMatrix::zeros(n, n));
        for j in i + 1..l {
            row.push(&grams.centered[i] * &grams.centered[j] / nf);
        }
        rows.push(row);
    }
    let m = multiset::stack_blocks(&rows, &vec![n; l]);
    let b_blocks: Vec<DMatrix<f64>> = grams
        .centered
        .iter()
        .map(|g| {
            let b = g * g / nf + g * epsilon;
            // symmetric in exact arithmetic
            0.5 * (&b + b.transpose())
        })
        .collect();
    if !m
        .iter()
        .chain(b_blocks.iter().flat_map(|b| b.iter()))
        .all(|x| x.is_finite())
    {
        return Err(Error::NonFinite("kernel problem matrices".into()));
    }
    Ok((m, b_blocks))
}

/// The assembled `Ln×Ln` pair `(M, B)`: `M` has blocks `G̃_i G̃_j / n` off the
/// diagonal, `B` has blocks `G̃_l²/n + ε G̃_l` on it.
pub fn assemble_kernel_problem(
    grams: &GramSet,
    epsilon: f64,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let (m, b_blocks) = kernel_blocks(grams, epsilon)?;
    Ok((m, multiset::block_diag(&b_blocks)))
}

/// Solves the regularized problem for precomputed Gram matrices.
pub fn solve_grams(grams: &GramSet, epsilon: f64, k: usize) -> Result<MccaSolution> {
    let (m, b_blocks) = kernel_blocks(grams, epsilon)?;
    let comps = multiset::solve(&m, &b_blocks, k)?;
    let scores = comps
        .weights
        .iter()
        .map(|ws| scores_for(grams, ws))
        .collect();
    let mut diagnostics = comps.diagnostics;
    let n = grams.n_units();
    for (l, &r) in diagnostics.block_ranks.iter().enumerate() {
        if r + 1 < n {
            diagnostics.warnings.push(format!(
                "feature {}: centered Gram rank {r} < n-1 = {}",
                l + 1,
                n - 1
            ));
        }
    }
    Ok(MccaSolution {
        method: Method::Kernel,
        correlations: comps.correlations,
        weights: comps.weights,
        scores,
        epsilon_used: epsilon,
        diagnostics,
    })
}

/// Multiple kernel CCA of `dataset` with one kernel per feature.
pub fn solve_kernel_mcca(
    dataset: &RepeatedMeasuresDataset,
    specs: &[KernelSpec],
    epsilon: f64,
    k: usize,
) -> Result<MccaSolution> {
    let grams = gram_set(dataset, specs)?;
    solve_grams(&grams, epsilon, k)
}

fn scores_for(grams: &GramSet, weights: &[DVector<f64>]) -> DMatrix<f64> {
    let n = grams.n_units();
    let mut s = DMatrix::zeros(n, weights.len());
    for (l, w) in weights.iter().enumerate() {
        s.set_column(l, &(&grams.centered[l] * w));
    }
    s
}

/// `n×L` score matrix of one component: column `l` is `G̃_l w_l`.
pub fn kernel_scores(
    solution: &MccaSolution,
    grams: &GramSet,
    component: usize,
) -> Result<DMatrix<f64>> {
    let weights = solution
        .weights
        .get(component)
        .ok_or(Error::InvalidComponentIndex {
            index: component,
            count: solution.weights.len(),
        })?;
    if weights.len() != grams.n_features() {
        return Err(Error::DimensionMismatch(format!(
            "solution has {} features, Gram set {}",
            weights.len(),
            grams.n_features()
        )));
    }
    Ok(scores_for(grams, weights))
}

/// Linear-kernel MCCA evaluated in feature space.
///
/// For the linear kernel, `w ↦ X̃ᵀw` maps the range of `G̃_l` one-to-one onto
/// the row space of the centered, vectorized blocks `X̃_l`, turning the Gram
/// problem into `C_ij = X̃_iᵀX̃_j/n`, `B_l = C_ll + εI`. When every `X̃_l` has
/// full column rank the spectra coincide, so this gives the linear-kernel
/// correlations at `O(n·d²)` cost instead of `O(n³)`. Weights are returned in
/// feature space (one entry per `(time, variable)` cell, column-major).
pub fn solve_linear_feature_space(
    dataset: &RepeatedMeasuresDataset,
    epsilon: f64,
    k: usize,
) -> Result<MccaSolution> {
    check_epsilon(epsilon)?;
    let n = dataset.n_units();
    let features: Vec<DMatrix<f64>> = (0..dataset.n_features())
        .map(|l| {
            let blocks = dataset.feature_blocks(l);
            let d = blocks[0].len();
            DMatrix::from_fn(n, d, |k, j| blocks[k].as_slice()[j])
        })
        .collect();
    let covs = multiset::cross_covariances(&features, n as f64);
    let (m, b_blocks) = multiset::covariance_problem(&covs, epsilon);
    let comps = multiset::solve(&m, &b_blocks, k)?;
    let scores = comps
        .weights
        .iter()
        .map(|ws| multiset::centered_scores(&features, ws))
        .collect();
    Ok(MccaSolution {
        method: Method::Kernel,
        correlations: comps.correlations,
        weights: comps.weights,
        scores,
        epsilon_used: epsilon,
        diagnostics: comps.diagnostics,
    })
}
