//! Proposal preconditioning `λ²Σ` and its lower-triangular factor.

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Error, Result};

/// Covariance shape: a full SPD matrix or a positive diagonal.
#[derive(Debug, Clone, PartialEq)]
pub enum Covariance {
    Dense(DMatrix<f64>),
    Diagonal(DVector<f64>),
}

impl Covariance {
    pub fn dim(&self) -> usize {
        match self {
            Covariance::Dense(m) => m.nrows(),
            Covariance::Diagonal(d) => d.len(),
        }
    }

    pub fn diagonal(&self) -> DVector<f64> {
        match self {
            Covariance::Dense(m) => m.diagonal(),
            Covariance::Diagonal(d) => d.clone(),
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            Covariance::Dense(m) => m.clone(),
            Covariance::Diagonal(d) => DMatrix::from_diagonal(d),
        }
    }

    pub fn is_diagonal(&self) -> bool {
        matches!(self, Covariance::Diagonal(_))
    }
}

#[derive(Debug, Clone)]
enum Factor {
    Dense(DMatrix<f64>),
    Diagonal(DVector<f64>),
}

/// Global scale `λ` and covariance `Σ`, stored with a factor `L` such that
/// `L Lᵀ = λ² Σ`.
#[derive(Debug, Clone)]
pub struct Preconditioner {
    global_scale: f64,
    covariance: Covariance,
    factor: Factor,
    log_det_factor: f64,
}

impl Preconditioner {
    pub fn new(global_scale: f64, covariance: Covariance) -> Result<Self> {
        if !(global_scale > 0.0 && global_scale.is_finite()) {
            return Err(invalid(format!(
                "global scale must be positive, got {global_scale}"
            )));
        }
        let factor = match &covariance {
            Covariance::Diagonal(d) => {
                if d.is_empty() {
                    return Err(invalid("empty covariance"));
                }
                if d.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                    return Err(Error::NotPositiveDefinite(
                        "diagonal covariance has a non-positive entry".into(),
                    ));
                }
                Factor::Diagonal(d.map(|v| global_scale * v.sqrt()))
            }
            Covariance::Dense(m) => {
                if m.nrows() != m.ncols() || m.is_empty() {
                    return Err(invalid("covariance must be square and non-empty"));
                }
                if m.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite("covariance matrix".into()));
                }
                let chol = m
                    .clone()
                    .cholesky()
                    .ok_or_else(|| Error::NotPositiveDefinite("dense covariance".into()))?;
                Factor::Dense(chol.unpack() * global_scale)
            }
        };
        let log_det_factor = match &factor {
            Factor::Diagonal(s) => s.iter().map(|v| v.ln()).sum(),
            Factor::Dense(l) => l.diagonal().iter().map(|v| v.ln()).sum(),
        };
        Ok(Self {
            global_scale,
            covariance,
            factor,
            log_det_factor,
        })
    }

    /// `λ I` in diagonal mode.
    pub fn identity(dim: usize, global_scale: f64) -> Result<Self> {
        Self::new(
            global_scale,
            Covariance::Diagonal(DVector::from_element(dim, 1.0)),
        )
    }

    pub fn dim(&self) -> usize {
        self.covariance.dim()
    }

    pub fn global_scale(&self) -> f64 {
        self.global_scale
    }

    pub fn covariance(&self) -> &Covariance {
        &self.covariance
    }

    pub fn is_diagonal(&self) -> bool {
        self.covariance.is_diagonal()
    }

    /// `log |det L|`.
    pub fn log_det_factor(&self) -> f64 {
        self.log_det_factor
    }

    /// Dense copy of `L`.
    pub fn factor_matrix(&self) -> DMatrix<f64> {
        match &self.factor {
            Factor::Dense(l) => l.clone(),
            Factor::Diagonal(s) => DMatrix::from_diagonal(s),
        }
    }

    /// `λ² Σ`.
    pub fn scaled_covariance(&self) -> DMatrix<f64> {
        self.covariance.to_dense() * (self.global_scale * self.global_scale)
    }

    /// `L v`: whitened displacement to original coordinates.
    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        match &self.factor {
            Factor::Dense(l) => l * v,
            Factor::Diagonal(s) => s.component_mul(v),
        }
    }

    /// `Lᵀ g`: gradient in whitened coordinates.
    pub fn apply_transpose(&self, g: &DVector<f64>) -> DVector<f64> {
        match &self.factor {
            Factor::Dense(l) => l.tr_mul(g),
            Factor::Diagonal(s) => s.component_mul(g),
        }
    }

    /// `L⁻¹ z`: original displacement to whitened coordinates.
    pub fn solve(&self, z: &DVector<f64>) -> DVector<f64> {
        match &self.factor {
            Factor::Dense(l) => l
                .solve_lower_triangular(z)
                .expect("factor has a positive diagonal"),
            Factor::Diagonal(s) => z.component_div(s),
        }
    }
}
