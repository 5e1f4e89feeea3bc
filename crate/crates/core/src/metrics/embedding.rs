use serde::{Deserialize, Serialize};

use super::MetricsError;
use crate::scalar::Scalar;

/// Per-token embeddings for one text, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingMatrix<T> {
    tokens: Vec<String>,
    dim: usize,
    data: Vec<T>,
    unit_norm: bool,
}

impl<T: Scalar> EmbeddingMatrix<T> {
    /// Rows must all have the same length. `unit_norm` is detected, with a
    /// tolerance of 1e-6 on each row's L2 norm.
    pub fn new(tokens: Vec<String>, rows: Vec<Vec<T>>) -> Result<Self, MetricsError> {
        if tokens.len() != rows.len() {
            return Err(MetricsError::Shape(format!(
                "{} tokens but {} vectors",
                tokens.len(),
                rows.len()
            )));
        }
        let dim = rows.first().map_or(0, Vec::len);
        if let Some((i, row)) = rows.iter().enumerate().find(|(_, r)| r.len() != dim) {
            return Err(MetricsError::Shape(format!(
                "row {i} has dimension {}, expected {dim}",
                row.len()
            )));
        }
        if !rows.is_empty() && dim == 0 {
            return Err(MetricsError::Shape("zero-dimensional vectors".into()));
        }
        let tol = T::lit(1e-6);
        let unit_norm = rows.iter().all(|r| (norm(r) - T::one()).abs() <= tol);
        Ok(Self {
            tokens,
            dim,
            data: rows.into_iter().flatten().collect(),
            unit_norm,
        })
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn is_unit_norm(&self) -> bool {
        self.unit_norm
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[T]> {
        // chunks_exact(0) panics, and an empty matrix has dim 0
        self.data.chunks_exact(self.dim.max(1))
    }

    /// Copy with every row scaled to unit length. Zero rows stay zero.
    pub fn normalized(&self) -> Self {
        let mut data = Vec::with_capacity(self.data.len());
        for row in self.rows() {
            let n = norm(row);
            if n > T::zero() {
                data.extend(row.iter().map(|&x| x / n));
            } else {
                data.extend_from_slice(row);
            }
        }
        let unit_norm = self.rows().all(|r| norm(r) > T::zero());
        Self {
            tokens: self.tokens.clone(),
            dim: self.dim,
            data,
            unit_norm,
        }
    }
}

pub(crate) fn norm<T: Scalar>(v: &[T]) -> T {
    v.iter().map(|&x| x * x).sum::<T>().sqrt()
}
