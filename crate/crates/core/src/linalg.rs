//! Dense symmetric eigensolvers.
//!
//! Everything here works on `nalgebra::DMatrix<f64>`. The workhorse is a cyclic
//! Jacobi eigensolver; on top of it sit a truncated inverse square root for
//! PSD matrices and a generalized solver `M w = λ B w` that restricts itself to
//! the range of a possibly singular `B`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Default relative cutoff below which eigenvalues of a right-hand matrix are
/// treated as null.
pub const DEFAULT_TRUNCATION: f64 = 1e-10;

/// Jacobi stops once the off-diagonal Frobenius norm falls below this
/// fraction of the full Frobenius norm.
const JACOBI_TOL: f64 = 1e-12;
const MAX_SWEEPS: usize = 100;
const SYMMETRY_TOL: f64 = 1e-12;
const PSD_SLACK: f64 = 1e-10;
/// Relative gap under which neighbouring eigenvalues are flagged as degenerate.
const DEGENERACY_GAP: f64 = 1e-8;

/// Full eigendecomposition of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymEigen {
    /// Eigenvalues, non-increasing.
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors stored as columns, in the order of `values`.
    pub vectors: DMatrix<f64>,
}

impl SymEigen {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// Flags pairs whose eigenvalue is within `1e-8·|λ_1|` of a neighbour.
    pub fn degenerate_flags(&self) -> Vec<bool> {
        degenerate_flags(&self.values, self.values.first().copied().unwrap_or(0.0))
    }
}

/// Solution of `M w = λ B w` restricted to the range of `B`.
#[derive(Debug, Clone)]
pub struct GeneralizedEigenSolution {
    /// Retained eigenvalues, non-increasing.
    pub values: Vec<f64>,
    /// Right eigenvectors as columns, normalized so that `wᵀ B w = 1`.
    pub vectors: DMatrix<f64>,
    /// Dimension of the range of `B` after truncation.
    pub deflated_rank: usize,
    /// Retained rank of each diagonal block (one entry for an unblocked `B`).
    pub block_ranks: Vec<usize>,
    /// `true` where an eigenvalue sits within `1e-8·|λ_1|` of a neighbour of
    /// the full reduced spectrum. Eigenvectors inside such a cluster are an
    /// arbitrary basis of the eigenspace.
    pub degenerate: Vec<bool>,
}

fn degenerate_flags(values: &[f64], lead: f64) -> Vec<bool> {
    let gap = DEGENERACY_GAP * lead.abs();
    (0..values.len())
        .map(|i| {
            let prev = i > 0 && (values[i - 1] - values[i]).abs() < gap;
            let next = i + 1 < values.len() && (values[i] - values[i + 1]).abs() < gap;
            prev || next
        })
        .collect()
}

fn check_finite(a: &DMatrix<f64>, what: &str) -> Result<()> {
    if a.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what.to_string()))
    }
}

fn check_square(a: &DMatrix<f64>, what: &str) -> Result<()> {
    if a.is_square() {
        Ok(())
    } else {
        Err(Error::DimensionMismatch(format!(
            "{what} is {}x{}, expected square",
            a.nrows(),
            a.ncols()
        )))
    }
}

/// Relative asymmetry `‖A − Aᵀ‖_F / ‖A‖_F`.
fn asymmetry(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let mut diff = 0.0;
    for j in 0..n {
        for i in (j + 1)..n {
            let d = a[(i, j)] - a[(j, i)];
            diff += 2.0 * d * d;
        }
    }
    let norm = a.norm();
    if norm == 0.0 {
        0.0
    } else {
        diff.sqrt() / norm
    }
}

/// Flips the sign of each column so that its largest-magnitude entry is
/// positive. Near-ties resolve to the lowest index.
pub fn normalize_signs(vectors: &mut DMatrix<f64>) {
    for mut col in vectors.column_iter_mut() {
        let max = col.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        if max == 0.0 {
            continue;
        }
        let pivot = col
            .iter()
            .position(|x| x.abs() >= max * (1.0 - 1e-12))
            .unwrap_or(0);
        if col[pivot] < 0.0 {
            col.neg_mut();
        }
    }
}

/// Cyclic Jacobi on a row-major symmetric buffer. Returns the diagonal and the
/// accumulated rotations with eigenvectors stored as rows.
fn jacobi(mut a: Vec<f64>, n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut vt = vec![0.0; n * n];
    for i in 0..n {
        vt[i * n + i] = 1.0;
    }
    let norm = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return ((0..n).map(|i| a[i * n + i]).collect(), vt);
    }
    let target = JACOBI_TOL * norm;

    for _ in 0..MAX_SWEEPS {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += 2.0 * a[p * n + q] * a[p * n + q];
            }
        }
        if off.sqrt() < target {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;

                let (head, tail) = vt.split_at_mut(q * n);
                let vp = &mut head[p * n..(p + 1) * n];
                let vq = &mut tail[..n];
                for (x, y) in vp.iter_mut().zip(vq.iter_mut()) {
                    let (xp, xq) = (*x, *y);
                    *x = c * xp - s * xq;
                    *y = s * xp + c * xq;
                }
            }
        }
    }
    ((0..n).map(|i| a[i * n + i]).collect(), vt)
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Eigenvalues come back in non-increasing order; equal eigenvalues keep the
/// order in which they sit on the diagonal after the sweeps. Each eigenvector
/// has its largest-magnitude entry positive.
pub fn sym_eig(a: &DMatrix<f64>) -> Result<SymEigen> {
    check_square(a, "matrix")?;
    check_finite(a, "matrix")?;
    let asym = asymmetry(a);
    if asym > SYMMETRY_TOL {
        return Err(Error::NotSymmetric(asym));
    }
    let n = a.nrows();
    let mut buf = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            buf[i * n + j] = 0.5 * (a[(i, j)] + a[(j, i)]);
        }
    }
    let (diag, vt) = jacobi(buf, n);

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| diag[j].partial_cmp(&diag[i]).expect("finite eigenvalues"));

    let values = order.iter().map(|&i| diag[i]).collect();
    let mut vectors = DMatrix::from_fn(n, n, |r, c| vt[order[c] * n + r]);
    normalize_signs(&mut vectors);
    Ok(SymEigen { values, vectors })
}

fn psd_check(eig: &SymEigen) -> Result<()> {
    let lead = eig.values.first().copied().unwrap_or(0.0);
    let low = eig.values.last().copied().unwrap_or(0.0);
    if low < -PSD_SLACK * lead.abs().max(1.0) {
        return Err(Error::NotPositiveSemidefinite(low));
    }
    Ok(())
}

/// Indices of eigenvalues above `tol·λ_max`.
fn retained(values: &[f64], lambda_max: f64, tol: f64) -> Vec<usize> {
    if lambda_max <= 0.0 {
        return Vec::new();
    }
    values
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > tol * lambda_max)
        .map(|(i, _)| i)
        .collect()
}

/// Truncated inverse square root `V_r diag(λ_r^{-1/2}) V_rᵀ` of a symmetric
/// PSD matrix, keeping eigenvalues above `truncation_tol·λ_max`.
///
/// Returns the matrix and the number of retained eigenvalues.
pub fn inv_sqrt_psd(a: &DMatrix<f64>, truncation_tol: f64) -> Result<(DMatrix<f64>, usize)> {
    let eig = sym_eig(a)?;
    psd_check(&eig)?;
    let keep = retained(&eig.values, eig.values[0], truncation_tol);
    if keep.is_empty() {
        return Err(Error::AllTruncated);
    }
    let n = a.nrows();
    let mut out = DMatrix::zeros(n, n);
    for &i in &keep {
        let v = eig.vectors.column(i);
        let scale = eig.values[i].sqrt().recip();
        out.ger(scale, &v, &v, 1.0);
    }
    Ok((out, keep.len()))
}

/// Whitening factor for one diagonal block: columns `v_i / sqrt(λ_i)` over
/// retained eigenpairs, so that `Fᵀ B F = I`.
fn whitening_factor(eig: &SymEigen, keep: &[usize]) -> DMatrix<f64> {
    let n = eig.dim();
    DMatrix::from_fn(n, keep.len(), |r, c| {
        let i = keep[c];
        eig.vectors[(r, i)] / eig.values[i].sqrt()
    })
}

/// Eigenpairs of the reduced matrix `Fᵀ M F`, mapped back through `F`.
fn finish(
    reduced: DMatrix<f64>,
    factor_apply: impl Fn(&DVector<f64>) -> DVector<f64>,
    total_dim: usize,
    k: usize,
    block_ranks: Vec<usize>,
) -> Result<GeneralizedEigenSolution> {
    let r = reduced.nrows();
    // Fᵀ M F is symmetric in exact arithmetic; products leave rounding-level
    // asymmetry which sym_eig would reject.
    let reduced = 0.5 * (&reduced + reduced.transpose());
    let eig = sym_eig(&reduced)?;
    let count = k.min(r);
    let flags = eig.degenerate_flags();
    let mut vectors = DMatrix::zeros(total_dim, count);
    for c in 0..count {
        let g = eig.vectors.column(c).into_owned();
        vectors.set_column(c, &factor_apply(&g));
    }
    normalize_signs(&mut vectors);
    Ok(GeneralizedEigenSolution {
        values: eig.values[..count].to_vec(),
        vectors,
        deflated_rank: r,
        block_ranks,
        degenerate: flags[..count].to_vec(),
    })
}

/// Solves `M w = λ B w` for symmetric `M` and symmetric PSD `B`.
///
/// `B` is whitened by its truncated inverse square root, the reduced ordinary
/// problem on the range of `B` is solved with [`sym_eig`] and the top `k`
/// eigenvectors are mapped back. Fewer than `k` pairs are returned when the
/// retained rank is smaller than `k`.
pub fn solve_generalized_sym(
    m: &DMatrix<f64>,
    b: &DMatrix<f64>,
    truncation_tol: f64,
    k: usize,
) -> Result<GeneralizedEigenSolution> {
    check_square(m, "left-hand matrix")?;
    check_square(b, "right-hand matrix")?;
    if m.nrows() != b.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "left-hand matrix is {0}x{0}, right-hand matrix is {1}x{1}",
            m.nrows(),
            b.nrows()
        )));
    }
    if k > m.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "requested {k} eigenpairs from a problem of size {}",
            m.nrows()
        )));
    }
    check_finite(m, "left-hand matrix")?;
    let asym = asymmetry(m);
    if asym > SYMMETRY_TOL {
        return Err(Error::NotSymmetric(asym));
    }
    let eig_b = sym_eig(b)?;
    psd_check(&eig_b)?;
    let keep = retained(&eig_b.values, eig_b.values[0], truncation_tol);
    if keep.is_empty() {
        return Err(Error::AllTruncated);
    }
    let f = whitening_factor(&eig_b, &keep);
    let reduced = f.transpose() * m * &f;
    let rank = keep.len();
    finish(reduced, |g| &f * g, m.nrows(), k, vec![rank])
}

/// Solves `M w = λ B w` where `B = blockdiag(B_1, …, B_L)`.
///
/// Equivalent to [`solve_generalized_sym`] on the assembled block-diagonal
/// `B` (the truncation threshold is relative to the largest eigenvalue over
/// all blocks) but only ever decomposes the individual blocks.
pub fn solve_generalized_block_diag(
    m: &DMatrix<f64>,
    blocks: &[DMatrix<f64>],
    truncation_tol: f64,
    k: usize,
) -> Result<GeneralizedEigenSolution> {
    check_square(m, "left-hand matrix")?;
    let sizes: Vec<usize> = blocks.iter().map(|b| b.nrows()).collect();
    let total: usize = sizes.iter().sum();
    if total != m.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "blocks cover {total} rows, left-hand matrix has {}",
            m.nrows()
        )));
    }
    if k > total {
        return Err(Error::DimensionMismatch(format!(
            "requested {k} eigenpairs from a problem of size {total}"
        )));
    }
    check_finite(m, "left-hand matrix")?;
    let asym = asymmetry(m);
    if asym > SYMMETRY_TOL {
        return Err(Error::NotSymmetric(asym));
    }

    let mut eigs = Vec::with_capacity(blocks.len());
    for b in blocks {
        check_square(b, "right-hand block")?;
        let e = sym_eig(b)?;
        psd_check(&e)?;
        eigs.push(e);
    }
    let lambda_max = eigs
        .iter()
        .filter_map(|e| e.values.first().copied())
        .fold(f64::NEG_INFINITY, f64::max);
    let keeps: Vec<Vec<usize>> = eigs
        .iter()
        .map(|e| retained(&e.values, lambda_max, truncation_tol))
        .collect();
    let ranks: Vec<usize> = keeps.iter().map(Vec::len).collect();
    let rank: usize = ranks.iter().sum();
    if rank == 0 {
        return Err(Error::AllTruncated);
    }
    let factors: Vec<DMatrix<f64>> = eigs
        .iter()
        .zip(&keeps)
        .map(|(e, keep)| whitening_factor(e, keep))
        .collect();

    let offsets: Vec<usize> = sizes
        .iter()
        .scan(0, |acc, &s| {
            let o = *acc;
            *acc += s;
            Some(o)
        })
        .collect();
    let r_offsets: Vec<usize> = ranks
        .iter()
        .scan(0, |acc, &s| {
            let o = *acc;
            *acc += s;
            Some(o)
        })
        .collect();

    let mut reduced = DMatrix::zeros(rank, rank);
    for i in 0..blocks.len() {
        for j in 0..blocks.len() {
            if ranks[i] == 0 || ranks[j] == 0 {
                continue;
            }
            let mij = m.view((offsets[i], offsets[j]), (sizes[i], sizes[j]));
            let piece = factors[i].transpose() * mij * &factors[j];
            reduced
                .view_mut((r_offsets[i], r_offsets[j]), (ranks[i], ranks[j]))
                .copy_from(&piece);
        }
    }

    let apply = |g: &DVector<f64>| {
        let mut w = DVector::zeros(total);
        for i in 0..blocks.len() {
            if ranks[i] == 0 {
                continue;
            }
            let gi = g.rows(r_offsets[i], ranks[i]);
            w.rows_mut(offsets[i], sizes[i])
                .copy_from(&(&factors[i] * gi));
        }
        w
    };
    finish(reduced, apply, total, k, ranks.clone())
}
