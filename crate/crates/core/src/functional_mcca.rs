//! Multiple functional CCA on a Fourier basis.
//!
//! Every variable's time course is smoothed by least squares onto `B`
//! orthonormal Fourier functions on `[0, 1]`. Because the basis is
//! orthonormal, inner products of weight functions with covariance operators
//! reduce to plain matrix products on the coefficient vectors, and the
//! functional problem becomes a finite-dimensional multiset problem with
//! blocks `C_ij` and regularized `C_ll + εI`.

use std::f64::consts::{PI, SQRT_2};

use nalgebra::{DMatrix, DVector};

use crate::data_io::RepeatedMeasuresDataset;
use crate::error::{Error, Result};
use crate::linalg;
use crate::multiset;
use crate::solution::{MccaSolution, Method};

const MAX_CONDITION: f64 = 1e12;

/// Number of points on which sampled weight functions are exported.
pub const EXPORT_GRID: usize = 201;

/// Values of the first `b` Fourier functions at `t`:
/// `1, √2 sin(2πt), √2 cos(2πt), √2 sin(4πt), …`.
pub fn fourier_basis(b: usize, t: f64) -> Result<Vec<f64>> {
    if b == 0 || b.is_multiple_of(2) {
        return Err(Error::EvenBasisSize(b));
    }
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::OutOfInterval(t));
    }
    let mut out = Vec::with_capacity(b);
    out.push(1.0);
    for m in 1..=(b - 1) / 2 {
        let arg = 2.0 * PI * m as f64 * t;
        out.push(SQRT_2 * arg.sin());
        out.push(SQRT_2 * arg.cos());
    }
    Ok(out)
}

/// Fourier basis of odd size on `[0, 1]`, observed on an equispaced grid of
/// `T` points (`t = 0.5` when `T = 1`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BasisSpec {
    size: usize,
    time_points: usize,
}

impl BasisSpec {
    pub fn new(size: usize, time_points: usize) -> Result<Self> {
        if size == 0 || size.is_multiple_of(2) {
            return Err(Error::EvenBasisSize(size));
        }
        if time_points == 0 {
            return Err(Error::InvalidParameter(
                "need at least one time point".into(),
            ));
        }
        Ok(Self { size, time_points })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn time_points(&self) -> usize {
        self.time_points
    }

    pub fn grid(&self) -> Vec<f64> {
        let t = self.time_points;
        if t == 1 {
            return vec![0.5];
        }
        (0..t).map(|j| j as f64 / (t - 1) as f64).collect()
    }

    pub fn eval(&self, t: f64) -> Result<Vec<f64>> {
        fourier_basis(self.size, t)
    }

    /// `T×B` matrix of basis values on the grid.
    pub fn design(&self) -> DMatrix<f64> {
        let grid = self.grid();
        let mut psi = DMatrix::zeros(grid.len(), self.size);
        for (r, &t) in grid.iter().enumerate() {
            let row = fourier_basis(self.size, t).expect("grid lies in [0, 1]");
            for (c, v) in row.into_iter().enumerate() {
                psi[(r, c)] = v;
            }
        }
        psi
    }
}

/// Least-squares projector `(ΨᵀΨ)⁻¹Ψᵀ` for one basis, reusable across blocks.
#[derive(Debug, Clone)]
pub struct Smoother {
    basis: BasisSpec,
    projector: DMatrix<f64>,
}

impl Smoother {
    pub fn new(basis: BasisSpec) -> Result<Self> {
        let (t, b) = (basis.time_points(), basis.size());
        if t < b {
            return Err(Error::UnderdeterminedFit { t, b });
        }
        let psi = basis.design();
        let gram = psi.transpose() * &psi;
        let eig = linalg::sym_eig(&gram)?;
        let (hi, lo) = (eig.values[0], eig.values[b - 1]);
        let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
        if condition > MAX_CONDITION {
            return Err(Error::SingularDesign(condition));
        }
        let inv_diag = DMatrix::from_diagonal(&DVector::from_iterator(
            b,
            eig.values.iter().map(|v| v.recip()),
        ));
        let inverse = &eig.vectors * inv_diag * eig.vectors.transpose();
        Ok(Self {
            basis,
            projector: inverse * psi.transpose(),
        })
    }

    pub fn basis(&self) -> BasisSpec {
        self.basis
    }

    /// Coefficients of every column of the `T×p` block, variable-major.
    pub fn fit(&self, block: &DMatrix<f64>) -> Result<DVector<f64>> {
        if block.nrows() != self.basis.time_points() {
            return Err(Error::ShapeMismatch(format!(
                "block has {} time points, basis grid has {}",
                block.nrows(),
                self.basis.time_points()
            )));
        }
        let coeffs = &self.projector * block;
        // column-major storage of B×p is exactly variable-major order
        Ok(DVector::from_column_slice(coeffs.as_slice()))
    }
}

/// Least-squares coefficients of a `T×p` block, length `p·B`.
pub fn smooth_block(block: &DMatrix<f64>, basis: &BasisSpec) -> Result<DVector<f64>> {
    Smoother::new(*basis)?.fit(block)
}

/// Smoothed coefficients for every (feature, unit).
#[derive(Debug, Clone)]
pub struct CoefficientSet {
    /// `coeffs[l][k]`: coefficient vector of unit `k`, feature `l`.
    pub coeffs: Vec<Vec<DVector<f64>>>,
    pub variables: Vec<usize>,
    pub basis: BasisSpec,
}

impl CoefficientSet {
    pub fn n_units(&self) -> usize {
        self.coeffs.first().map_or(0, Vec::len)
    }

    pub fn n_features(&self) -> usize {
        self.coeffs.len()
    }

    /// Feature `l` as an `n×(p_l·B)` matrix, one unit per row.
    pub fn feature_matrix(&self, l: usize) -> DMatrix<f64> {
        let per_unit = &self.coeffs[l];
        let d = per_unit[0].len();
        DMatrix::from_fn(per_unit.len(), d, |k, j| per_unit[k][j])
    }
}

pub fn smooth_dataset(
    dataset: &RepeatedMeasuresDataset,
    basis: &BasisSpec,
) -> Result<CoefficientSet> {
    if basis.time_points() != dataset.time_points() {
        return Err(Error::ShapeMismatch(format!(
            "basis grid has {} points, dataset has T = {}",
            basis.time_points(),
            dataset.time_points()
        )));
    }
    let smoother = Smoother::new(*basis)?;
    let coeffs = (0..dataset.n_features())
        .map(|l| {
            dataset
                .feature_blocks(l)
                .iter()
                .map(|b| smoother.fit(b))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CoefficientSet {
        coeffs,
        variables: dataset.variables(),
        basis: *basis,
    })
}

/// Sample covariance blocks of the coefficient vectors.
#[derive(Debug, Clone)]
pub struct CoeffCovariances {
    /// `blocks[i][j]` has shape `(p_i·B)×(p_j·B)`.
    pub blocks: Vec<Vec<DMatrix<f64>>>,
}

/// `C_ij = 1/(n−1) Σ_k (c_i[k] − c̄_i)(c_j[k] − c̄_j)ᵀ`.
pub fn coeff_covariances(coeffs: &CoefficientSet) -> Result<CoeffCovariances> {
    let n = coeffs.n_units();
    if n < 2 {
        return Err(Error::InsufficientUnits(n));
    }
    let features: Vec<DMatrix<f64>> = (0..coeffs.n_features())
        .map(|l| coeffs.feature_matrix(l))
        .collect();
    Ok(CoeffCovariances {
        blocks: multiset::cross_covariances(&features, (n - 1) as f64),
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

/// `(M, B)` with `C_ij` off the diagonal of `M` and `C_ll + εI` on the
/// diagonal of `B`.
pub fn assemble_functional_problem(
    covs: &CoeffCovariances,
    epsilon: f64,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    check_epsilon(epsilon)?;
    let (m, b) = multiset::covariance_problem(&covs.blocks, epsilon);
    let b = multiset::block_diag(&b);
    if !m.iter().chain(b.iter()).all(|x| x.is_finite()) {
        return Err(Error::NonFinite("functional problem matrices".into()));
    }
    Ok((m, b))
}

/// Multiple functional CCA on already smoothed coefficients.
pub fn solve_coefficients(coeffs: &CoefficientSet, epsilon: f64, k: usize) -> Result<MccaSolution> {
    check_epsilon(epsilon)?;
    let covs = coeff_covariances(coeffs)?;
    let (m, b_blocks) = multiset::covariance_problem(&covs.blocks, epsilon);
    if !m
        .iter()
        .chain(b_blocks.iter().flat_map(|b| b.iter()))
        .all(|x| x.is_finite())
    {
        return Err(Error::NonFinite("functional problem matrices".into()));
    }
    let comps = multiset::solve(&m, &b_blocks, k)?;
    let features: Vec<DMatrix<f64>> = (0..coeffs.n_features())
        .map(|l| coeffs.feature_matrix(l))
        .collect();
    let scores = comps
        .weights
        .iter()
        .map(|ws| multiset::centered_scores(&features, ws))
        .collect();
    Ok(MccaSolution {
        method: Method::Functional,
        correlations: comps.correlations,
        weights: comps.weights,
        scores,
        epsilon_used: epsilon,
        diagnostics: comps.diagnostics,
    })
}

/// Smooths every block of `dataset` and solves the functional problem.
pub fn solve_functional_mcca(
    dataset: &RepeatedMeasuresDataset,
    basis: &BasisSpec,
    epsilon: f64,
    k: usize,
) -> Result<MccaSolution> {
    let coeffs = smooth_dataset(dataset, basis)?;
    solve_coefficients(&coeffs, epsilon, k)
}

/// Value at `t` of the weight function of one variable: the dot product of
/// that variable's `B` coefficients with the basis values at `t`.
pub fn weight_function(
    weights: &DVector<f64>,
    basis: &BasisSpec,
    variable: usize,
    t: f64,
) -> Result<f64> {
    let b = basis.size();
    let count = weights.len() / b;
    if !weights.len().is_multiple_of(b) {
        return Err(Error::ShapeMismatch(format!(
            "weight vector of length {} is not a multiple of B = {b}",
            weights.len()
        )));
    }
    if variable >= count {
        return Err(Error::InvalidVariableIndex {
            index: variable,
            count,
        });
    }
    let phi = basis.eval(t)?;
    Ok(weights
        .rows(variable * b, b)
        .iter()
        .zip(&phi)
        .map(|(w, p)| w * p)
        .sum())
}

/// One row of a sampled weight-function export.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSample {
    pub feature: usize,
    pub variable: usize,
    pub t: f64,
    pub value: f64,
}

/// Weight functions of one component sampled on [`EXPORT_GRID`] points.
pub fn sample_weight_functions(
    solution: &MccaSolution,
    basis: &BasisSpec,
    component: usize,
) -> Result<Vec<WeightSample>> {
    let weights = solution
        .weights
        .get(component)
        .ok_or(Error::InvalidComponentIndex {
            index: component,
            count: solution.weights.len(),
        })?;
    let mut out = Vec::new();
    for (l, w) in weights.iter().enumerate() {
        for v in 0..w.len() / basis.size() {
            for g in 0..EXPORT_GRID {
                let t = g as f64 / (EXPORT_GRID - 1) as f64;
                out.push(WeightSample {
                    feature: l,
                    variable: v,
                    t,
                    value: weight_function(w, basis, v, t)?,
                });
            }
        }
    }
    Ok(out)
}
