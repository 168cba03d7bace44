//! The block generalized eigenproblem shared by both estimators.
//!
//! With per-feature blocks `M_ij` (`i ≠ j`) and regularized variance blocks
//! `B_l`, the multiset problem maximizes `Σ_{i≠j} w_iᵀ M_ij w_j` subject to
//! `Σ_l w_lᵀ B_l w_l = L`. Stationary points solve `M w = ρ B w` with `M`
//! carrying zero diagonal blocks and `B = blockdiag(B_l)`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{self, DEFAULT_TRUNCATION};
use crate::solution::Diagnostics;

/// Weights of the solved components, already rescaled to the sum constraint.
#[derive(Debug, Clone)]
pub struct MultisetComponents {
    pub correlations: Vec<f64>,
    /// `weights[c][l]`
    pub weights: Vec<Vec<DVector<f64>>>,
    pub diagnostics: Diagnostics,
}

/// Stacks `L×L` blocks into one dense matrix. Missing diagonal blocks are zero.
pub fn stack_blocks(blocks: &[Vec<DMatrix<f64>>], sizes: &[usize]) -> DMatrix<f64> {
    let total: usize = sizes.iter().sum();
    let offsets = offsets(sizes);
    let mut out = DMatrix::zeros(total, total);
    for (i, row) in blocks.iter().enumerate() {
        for (j, block) in row.iter().enumerate() {
            out.view_mut((offsets[i], offsets[j]), (sizes[i], sizes[j]))
                .copy_from(block);
        }
    }
    out
}

pub fn block_diag(blocks: &[DMatrix<f64>]) -> DMatrix<f64> {
    let sizes: Vec<usize> = blocks.iter().map(|b| b.nrows()).collect();
    let total: usize = sizes.iter().sum();
    let offsets = offsets(&sizes);
    let mut out = DMatrix::zeros(total, total);
    for (l, b) in blocks.iter().enumerate() {
        out.view_mut((offsets[l], offsets[l]), (sizes[l], sizes[l]))
            .copy_from(b);
    }
    out
}

pub(crate) fn offsets(sizes: &[usize]) -> Vec<usize> {
    sizes
        .iter()
        .scan(0, |acc, &s| {
            let o = *acc;
            *acc += s;
            Some(o)
        })
        .collect()
}

/// Column-centers `x` (`n×d`).
pub fn center_columns(x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.nrows() as f64;
    let mut out = x.clone();
    for mut col in out.column_iter_mut() {
        let mean = col.sum() / n;
        col.add_scalar_mut(-mean);
    }
    out
}

/// All cross-covariance blocks `X̃_iᵀ X̃_j / divisor` of column-centered
/// `n×d_l` feature matrices. Sums run over units in ascending order and the
/// lower blocks are exact transposes of the upper ones.
pub fn cross_covariances(features: &[DMatrix<f64>], divisor: f64) -> Vec<Vec<DMatrix<f64>>> {
    let centered: Vec<DMatrix<f64>> = features.iter().map(center_columns).collect();
    let l = features.len();
    let mut out: Vec<Vec<DMatrix<f64>>> = vec![Vec::with_capacity(l); l];
    for i in 0..l {
        for j in 0..l {
            let block = if j < i {
                out[j][i].transpose()
            } else {
                let (xi, xj) = (&centered[i], &centered[j]);
                let mut c = DMatrix::zeros(xi.ncols(), xj.ncols());
                for k in 0..xi.nrows() {
                    for b in 0..xj.ncols() {
                        let y = xj[(k, b)];
                        for a in 0..xi.ncols() {
                            c[(a, b)] += xi[(k, a)] * y;
                        }
                    }
                }
                c / divisor
            };
            out[i].push(block);
        }
    }
    out
}

/// `M` with the off-diagonal covariance blocks and `B_l = C_ll + εI`.
pub fn covariance_problem(
    covs: &[Vec<DMatrix<f64>>],
    epsilon: f64,
) -> (DMatrix<f64>, Vec<DMatrix<f64>>) {
    let sizes: Vec<usize> = covs.iter().map(|row| row[0].nrows()).collect();
    let off: Vec<Vec<DMatrix<f64>>> = covs
        .iter()
        .enumerate()
        .map(|(i, row)| {
            row.iter()
                .enumerate()
                .map(|(j, c)| {
                    if i == j {
                        DMatrix::zeros(c.nrows(), c.ncols())
                    } else {
                        c.clone()
                    }
                })
                .collect()
        })
        .collect();
    let m = stack_blocks(&off, &sizes);
    let b = covs
        .iter()
        .enumerate()
        .map(|(l, row)| &row[l] + DMatrix::identity(sizes[l], sizes[l]) * epsilon)
        .collect();
    (m, b)
}

/// Scores `(x_k − x̄)ᵀ w_l` for every unit `k` and feature `l`.
pub fn centered_scores(features: &[DMatrix<f64>], weights: &[DVector<f64>]) -> DMatrix<f64> {
    let n = features.first().map_or(0, |x| x.nrows());
    let mut s = DMatrix::zeros(n, features.len());
    for (l, (x, w)) in features.iter().zip(weights).enumerate() {
        s.set_column(l, &(center_columns(x) * w));
    }
    s
}

/// Solves `M w = ρ B w` with block-diagonal `B` and returns the top `k`
/// components rescaled so that `Σ_l w_lᵀ B_l w_l = L`.
///
/// Fails with [`Error::InsufficientRank`] when fewer than `k` directions
/// survive the null-space truncation of `B`.
pub fn solve(m: &DMatrix<f64>, b_blocks: &[DMatrix<f64>], k: usize) -> Result<MultisetComponents> {
    let l = b_blocks.len();
    let sizes: Vec<usize> = b_blocks.iter().map(|b| b.nrows()).collect();
    let total: usize = sizes.iter().sum();
    if k == 0 {
        return Err(Error::InvalidParameter(
            "n_components must be at least 1".into(),
        ));
    }
    if k > total {
        return Err(Error::InsufficientRank {
            rank: total,
            requested: k,
        });
    }
    let sol = linalg::solve_generalized_block_diag(m, b_blocks, DEFAULT_TRUNCATION, k)?;
    if sol.deflated_rank < k {
        return Err(Error::InsufficientRank {
            rank: sol.deflated_rank,
            requested: k,
        });
    }

    let offsets = offsets(&sizes);
    let scale = (l as f64).sqrt();
    let mut weights = Vec::with_capacity(k);
    let mut residuals = Vec::with_capacity(k);
    for c in 0..k {
        let col = sol.vectors.column(c);
        let per_feature: Vec<DVector<f64>> = (0..l)
            .map(|i| col.rows(offsets[i], sizes[i]).into_owned() * scale)
            .collect();
        let constraint: f64 = per_feature
            .iter()
            .zip(b_blocks)
            .map(|(w, b)| w.dot(&(b * w)))
            .sum();
        residuals.push(constraint - l as f64);
        weights.push(per_feature);
    }

    Ok(MultisetComponents {
        correlations: sol.values,
        weights,
        diagnostics: Diagnostics {
            deflated_rank: sol.deflated_rank,
            block_ranks: sol.block_ranks,
            degenerate: sol.degenerate,
            constraint_residuals: residuals,
            warnings: Vec::new(),
        },
    })
}
