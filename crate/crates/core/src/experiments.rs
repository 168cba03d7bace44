//! Synthetic data, the classical two-set CCA oracle and an empirical
//! consistency probe.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data_io::RepeatedMeasuresDataset;
use crate::error::{Error, Result};
use crate::functional_mcca::{self, BasisSpec};
use crate::kernel_mcca;
use crate::linalg;
use crate::multiset::center_columns;
use crate::rng;

/// Top canonical correlation of two data matrices (rows are units).
///
/// Square root of the top eigenvalue of
/// `S_xx^{-1/2} S_xy S_yy^{-1} S_yx S_xx^{-1/2}` built from sample
/// covariances.
pub fn classical_cca_oracle(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<f64> {
    let n = x.nrows();
    if y.nrows() != n {
        return Err(Error::DimensionMismatch(format!(
            "{n} rows in X, {} in Y",
            y.nrows()
        )));
    }
    let (p, q) = (x.ncols(), y.ncols());
    if n <= p + q {
        return Err(Error::InvalidParameter(format!(
            "need n > p + q, got n = {n}, p = {p}, q = {q}"
        )));
    }
    let xc = center_columns(x);
    let yc = center_columns(y);
    let d = (n - 1) as f64;
    let sxx = xc.transpose() * &xc / d;
    let syy = yc.transpose() * &yc / d;
    let sxy = xc.transpose() * &yc / d;

    let full_rank = |rank: usize, dim: usize| {
        if rank == dim {
            Ok(())
        } else {
            Err(Error::SingularCovariance)
        }
    };
    let (sxx_isqrt, rx) =
        linalg::inv_sqrt_psd(&sxx, 1e-12).map_err(|_| Error::SingularCovariance)?;
    full_rank(rx, p)?;
    let (syy_isqrt, ry) =
        linalg::inv_sqrt_psd(&syy, 1e-12).map_err(|_| Error::SingularCovariance)?;
    full_rank(ry, q)?;
    let syy_inv = &syy_isqrt * &syy_isqrt;

    let k = &sxx_isqrt * &sxy * syy_inv * sxy.transpose() * &sxx_isqrt;
    let k = 0.5 * (&k + k.transpose());
    let top = linalg::sym_eig(&k)?.values[0];
    Ok(top.max(0.0).sqrt())
}

/// Shared-latent-factor generator settings. Every feature has the same `T`
/// and `p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n: usize,
    pub l: usize,
    pub t: usize,
    pub p: usize,
    pub latent_dim: usize,
    pub loading_scale: f64,
    pub noise_sd: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.latent_dim == 0 {
            return Err(Error::InvalidParameter(
                "latent_dim must be at least 1".into(),
            ));
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "noise_sd must be >= 0, got {}",
                self.noise_sd
            )));
        }
        if !self.loading_scale.is_finite() {
            return Err(Error::InvalidParameter(
                "loading_scale must be finite".into(),
            ));
        }
        if self.t == 0 || self.p == 0 {
            return Err(Error::InvalidParameter("t and p must be at least 1".into()));
        }
        Ok(())
    }
}

/// Draws a dataset with `A_l[k] = loading_scale·Σ_d z_kd Λ_{l,d} + noise_sd·E`.
///
/// The loading patterns `Λ` come from stream 0 of the seed and depend only on
/// the seed and shape, so datasets drawn from different unit streams share
/// one population. Unit factors and noise come from stream `1 + unit_stream`.
pub fn gen_latent_dataset_stream(
    spec: &SyntheticSpec,
    unit_stream: u64,
) -> Result<RepeatedMeasuresDataset> {
    spec.validate()?;
    let mut load_rng = rng::stream(spec.seed, 0);
    let loadings: Vec<Vec<DMatrix<f64>>> = (0..spec.l)
        .map(|_| {
            (0..spec.latent_dim)
                .map(|_| DMatrix::from_fn(spec.t, spec.p, |_, _| load_rng.sample(StandardNormal)))
                .collect()
        })
        .collect();

    let mut unit_rng = rng::stream(spec.seed, 1 + unit_stream);
    let mut blocks: Vec<Vec<DMatrix<f64>>> = vec![Vec::with_capacity(spec.n); spec.l];
    for _ in 0..spec.n {
        let z: Vec<f64> = (0..spec.latent_dim)
            .map(|_| unit_rng.sample(StandardNormal))
            .collect();
        for (l, pattern) in loadings.iter().enumerate() {
            let mut a = DMatrix::zeros(spec.t, spec.p);
            for (zd, lam) in z.iter().zip(pattern) {
                a += lam * (spec.loading_scale * zd);
            }
            let noise = DMatrix::from_fn(spec.t, spec.p, |_, _| {
                unit_rng.sample::<f64, _>(StandardNormal)
            });
            a += noise * spec.noise_sd;
            blocks[l].push(a);
        }
    }
    RepeatedMeasuresDataset::new(
        (1..=spec.n).map(|k| format!("u{k}")).collect(),
        None,
        (1..=spec.l).map(|l| format!("f{l}")).collect(),
        blocks,
    )
}

pub fn gen_latent_dataset(spec: &SyntheticSpec) -> Result<RepeatedMeasuresDataset> {
    gen_latent_dataset_stream(spec, 0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum ConvergenceMethod {
    /// Linear-kernel MCCA, evaluated in feature space.
    Kernel,
    Functional {
        basis_size: usize,
    },
}

/// Sizes the reference run uses relative to the largest studied size.
pub const REFERENCE_FACTOR: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub note: String,
    pub method: ConvergenceMethod,
    pub template: SyntheticSpec,
    pub sample_sizes: Vec<usize>,
    /// `ε_n = n^{-1/4}` per size.
    pub epsilons: Vec<f64>,
    pub reference_n: usize,
    pub reference_epsilon: f64,
    pub rho_ref: f64,
    /// Median of `|ρ̂ − ρ_ref|` per size.
    pub median_error: Vec<f64>,
    /// Interquartile range of `|ρ̂ − ρ_ref|` per size.
    pub iqr_error: Vec<f64>,
    /// `errors[i][r]`: replication `r` at size `i`.
    pub errors: Vec<Vec<f64>>,
}

const NOTE: &str = "Scalar probe of consistency: tracks |rho_hat - rho_ref| for the leading \
correlation only, which is weaker than operator-norm convergence of the estimated covariance \
operators. rho_ref comes from one large finite-sample run under the same epsilon schedule and \
is itself an approximation.";

/// Type-7 (linear interpolation) sample quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn top_correlation(
    ds: &RepeatedMeasuresDataset,
    method: ConvergenceMethod,
    epsilon: f64,
) -> Result<f64> {
    let sol = match method {
        ConvergenceMethod::Kernel => kernel_mcca::solve_linear_feature_space(ds, epsilon, 1)?,
        ConvergenceMethod::Functional { basis_size } => {
            let basis = BasisSpec::new(basis_size, ds.time_points())?;
            functional_mcca::solve_functional_mcca(ds, &basis, epsilon, 1)?
        }
    };
    Ok(sol.correlations[0])
}

/// Median error of the leading correlation across increasing sample sizes,
/// with `ε_n = n^{-1/4}`. The reference comes from a single run at
/// `20 × max(sample_sizes)` units.
pub fn convergence_study(
    template: &SyntheticSpec,
    sample_sizes: &[usize],
    reps: usize,
    method: ConvergenceMethod,
) -> Result<ConvergenceReport> {
    template.validate()?;
    if sample_sizes.is_empty() || reps == 0 {
        return Err(Error::InvalidParameter(
            "need at least one sample size and one replication".into(),
        ));
    }
    if sample_sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter(
            "sample sizes must be strictly increasing".into(),
        ));
    }
    let schedule = |n: usize| (n as f64).powf(-0.25);

    let reference_n = REFERENCE_FACTOR * sample_sizes[sample_sizes.len() - 1];
    let reference_epsilon = schedule(reference_n);
    let reference_stream = (sample_sizes.len() * reps) as u64;
    let reference = gen_latent_dataset_stream(
        &SyntheticSpec {
            n: reference_n,
            ..*template
        },
        reference_stream,
    )?;
    let rho_ref = top_correlation(&reference, method, reference_epsilon)?;

    let mut errors = Vec::with_capacity(sample_sizes.len());
    for (i, &n) in sample_sizes.iter().enumerate() {
        let spec = SyntheticSpec { n, ..*template };
        let per_rep = (0..reps)
            .map(|r| {
                let ds = gen_latent_dataset_stream(&spec, (i * reps + r) as u64)?;
                Ok((top_correlation(&ds, method, schedule(n))? - rho_ref).abs())
            })
            .collect::<Result<Vec<f64>>>()?;
        errors.push(per_rep);
    }

    let (median_error, iqr_error) = errors
        .iter()
        .map(|e| {
            let mut s = e.clone();
            s.sort_by(f64::total_cmp);
            (quantile(&s, 0.5), quantile(&s, 0.75) - quantile(&s, 0.25))
        })
        .unzip();

    Ok(ConvergenceReport {
        note: NOTE.to_string(),
        method,
        template: *template,
        sample_sizes: sample_sizes.to_vec(),
        epsilons: sample_sizes.iter().map(|&n| schedule(n)).collect(),
        reference_n,
        reference_epsilon,
        rho_ref,
        median_error,
        iqr_error,
        errors,
    })
}

impl ConvergenceReport {
    /// `size,rep,error` rows.
    pub fn errors_csv(&self) -> String {
        let mut out = String::from("size,rep,error\n");
        for (n, row) in self.sample_sizes.iter().zip(&self.errors) {
            for (r, e) in row.iter().enumerate() {
                out.push_str(&format!("{n},{},{e}\n", r + 1));
            }
        }
        out
    }
}
