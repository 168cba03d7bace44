use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Kernel,
    Functional,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Method::Kernel => f.write_str("kernel"),
            Method::Functional => f.write_str("functional"),
        }
    }
}

/// Solver bookkeeping carried alongside a solution.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Total retained rank of the right-hand matrix.
    pub deflated_rank: usize,
    /// Retained rank per feature block.
    pub block_ranks: Vec<usize>,
    /// Per component: eigenvalue within `1e-8·|ρ_1|` of a neighbour.
    pub degenerate: Vec<bool>,
    /// Per component: `Σ_l w_lᵀ B_l w_l − L`.
    pub constraint_residuals: Vec<f64>,
    pub warnings: Vec<String>,
}

/// Canonical correlations, weights and scores for the top components.
#[derive(Debug, Clone)]
pub struct MccaSolution {
    pub method: Method,
    /// Generalized canonical correlations, non-increasing.
    pub correlations: Vec<f64>,
    /// `weights[c][l]`: weight vector of feature `l` in component `c`.
    pub weights: Vec<Vec<DVector<f64>>>,
    /// `scores[c]`: `n×L` matrix, column `l` holds `U^(l)` for every unit.
    pub scores: Vec<DMatrix<f64>>,
    pub epsilon_used: f64,
    pub diagnostics: Diagnostics,
}

impl MccaSolution {
    pub fn n_components(&self) -> usize {
        self.correlations.len()
    }

    pub fn n_features(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    pub fn component_scores(&self, component: usize) -> Result<&DMatrix<f64>> {
        self.scores
            .get(component)
            .ok_or(Error::InvalidComponentIndex {
                index: component,
                count: self.scores.len(),
            })
    }
}
