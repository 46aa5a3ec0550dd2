use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// `len` points in `R^dim`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Points {
    dim: usize,
    coords: Vec<f64>,
}

impl Points {
    pub fn zeros(len: usize, dim: usize) -> Self {
        Points {
            dim,
            coords: vec![0.0; len * dim],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>], dim: usize) -> Result<Self> {
        let mut coords = Vec::with_capacity(rows.len() * dim);
        for (k, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::Shape(format!(
                    "point {k} has {} coordinates, expected {dim}",
                    row.len()
                )));
            }
            coords.extend_from_slice(row);
        }
        Ok(Points { dim, coords })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len().checked_div(self.dim).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, k: usize) -> &[f64] {
        &self.coords[k * self.dim..(k + 1) * self.dim]
    }

    pub fn point_mut(&mut self, k: usize) -> &mut [f64] {
        &mut self.coords[k * self.dim..(k + 1) * self.dim]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.coords.chunks(self.dim.max(1)).map(<[f64]>::to_vec).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.coords.iter().all(|c| c.is_finite())
    }
}

pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Reception points `x_k` and influence points `y_l`, one of each per type.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingPair {
    pub reception: Points,
    pub influence: Points,
}

impl EmbeddingPair {
    pub fn new(reception: Points, influence: Points) -> Result<Self> {
        if reception.dim() != influence.dim() || reception.len() != influence.len() {
            return Err(Error::Shape(format!(
                "reception is {}x{} but influence is {}x{}",
                reception.len(),
                reception.dim(),
                influence.len(),
                influence.dim()
            )));
        }
        Ok(EmbeddingPair { reception, influence })
    }

    pub fn n_types(&self) -> usize {
        self.reception.len()
    }

    pub fn dim(&self) -> usize {
        self.reception.dim()
    }

    /// Squared distance between reception point `k` and influence point `l`.
    pub fn dyad_sq(&self, k: usize, l: usize) -> f64 {
        squared_distance(self.reception.point(k), self.influence.point(l))
    }
}

/// The R spatial bandwidths, decay rates and basis coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelBank {
    pub beta_sq: Vec<f64>,
    pub kappa: Vec<f64>,
    pub gamma: Vec<f64>,
}

impl KernelBank {
    pub fn len(&self) -> usize {
        self.kappa.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kappa.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let r = self.kappa.len();
        if r == 0 || self.beta_sq.len() != r || self.gamma.len() != r {
            return Err(Error::Shape(format!(
                "kernel bank sizes beta_sq={}, kappa={}, gamma={}",
                self.beta_sq.len(),
                r,
                self.gamma.len()
            )));
        }
        let positive = |v: &[f64]| v.iter().all(|x| x.is_finite() && *x > 0.0);
        if !positive(&self.beta_sq) || !positive(&self.kappa) {
            return Err(Error::domain("kernel bandwidths and decay rates must be positive"));
        }
        // A dormant kernel legitimately carries gamma = 0.
        if !self.gamma.iter().all(|g| g.is_finite() && *g >= 0.0) {
            return Err(Error::domain("basis coefficients must be finite and nonnegative"));
        }
        Ok(())
    }
}

/// Time-integrated excitation `phi[(k, l)]`: influence of type `l` on type `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct InfluenceMatrix(pub DMatrix<f64>);

impl InfluenceMatrix {
    pub fn zeros(n: usize) -> Self {
        InfluenceMatrix(DMatrix::zeros(n, n))
    }

    pub fn n_types(&self) -> usize {
        self.0.nrows()
    }

    pub fn get(&self, k: usize, l: usize) -> f64 {
        self.0[(k, l)]
    }

    pub fn frobenius(&self) -> f64 {
        self.0.norm()
    }

    pub fn validate(&self) -> Result<()> {
        if self.0.nrows() != self.0.ncols() {
            return Err(Error::Shape("influence matrix must be square".into()));
        }
        if !self.0.iter().all(|v| v.is_finite() && *v >= 0.0) {
            return Err(Error::domain("influence entries must be finite and nonnegative"));
        }
        Ok(())
    }

    /// Spectral radius by power iteration on the nonnegative matrix.
    pub fn spectral_radius(&self) -> f64 {
        let n = self.n_types();
        if n == 0 {
            return 0.0;
        }
        // Shifting by the identity keeps the Perron root dominant even for
        // periodic (imprimitive) matrices; the shift is removed at the end.
        let shifted = &self.0 + DMatrix::<f64>::identity(n, n);
        let mut v = nalgebra::DVector::from_element(n, 1.0 / (n as f64).sqrt());
        let mut rho = 0.0;
        for _ in 0..10_000 {
            let w = &shifted * &v;
            let norm = w.norm();
            if norm == 0.0 {
                return 0.0;
            }
            let next = w / norm;
            let delta = (&next - &v).norm();
            v = next;
            rho = norm;
            if delta < 1e-13 {
                break;
            }
        }
        rho - 1.0
    }
}

/// Full parameter set of a model.
///
/// When `full_rank` is set the excitation of `l` on `k` through kernel `r` is
/// `phi(k, l) * gamma_r * f_r(tau)`, with the gammas acting as temporal split
/// weights; the embedding and exertions are then carried along but unused.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub embedding: EmbeddingPair,
    pub kernels: KernelBank,
    pub xi: Vec<f64>,
    pub mu: Vec<f64>,
    pub full_rank: Option<InfluenceMatrix>,
}

impl ModelParams {
    pub fn n_types(&self) -> usize {
        self.mu.len()
    }

    pub fn dim(&self) -> usize {
        self.embedding.dim()
    }

    pub fn n_kernels(&self) -> usize {
        self.kernels.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.mu.len();
        self.kernels.validate()?;
        if self.embedding.n_types() != n || self.xi.len() != n {
            return Err(Error::Shape(format!(
                "{} backgrounds, {} exertions and {} embedded types disagree",
                n,
                self.xi.len(),
                self.embedding.n_types()
            )));
        }
        if self.embedding.dim() == 0 {
            return Err(Error::Shape("embedding dimension must be at least 1".into()));
        }
        if !self.embedding.reception.is_finite() || !self.embedding.influence.is_finite() {
            return Err(Error::domain("embedding coordinates must be finite"));
        }
        if !self.mu.iter().all(|m| m.is_finite() && *m >= 0.0) {
            return Err(Error::domain("background rates must be finite and nonnegative"));
        }
        if !self.xi.iter().all(|x| x.is_finite() && *x >= 0.0) {
            return Err(Error::domain("exertion coefficients must be finite and nonnegative"));
        }
        if let Some(phi) = &self.full_rank {
            phi.validate()?;
            if phi.n_types() != n {
                return Err(Error::Shape("full-rank matrix size disagrees with types".into()));
            }
        }
        Ok(())
    }
}
