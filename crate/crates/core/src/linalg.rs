//! Cholesky factorization with a bounded jitter ladder.
//!
//! The unjittered matrix is tried first; a factor is accepted only if every
//! squared pivot exceeds `1e-14 * max_diag`. On failure a diagonal jitter of
//! `1e-10 * max_diag` is added and multiplied by ten per attempt up to
//! `1e-4 * max_diag`; past that the factorization fails.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

pub const JITTER_START: f64 = 1e-10;
pub const JITTER_STOP: f64 = 1e-4;
/// Smallest accepted squared pivot, relative to the largest diagonal entry.
const MIN_PIVOT: f64 = 1e-14;

fn accept(a: DMatrix<f64>, max_diag: f64) -> Option<Cholesky<f64, Dyn>> {
    let chol = Cholesky::new(a)?;
    let floor = MIN_PIVOT * max_diag;
    chol.l_dirty()
        .diagonal()
        .iter()
        .all(|&d| d.is_finite() && d * d > floor)
        .then_some(chol)
}

/// Lower Cholesky factor of `A + jitter * I`.
#[derive(Debug, Clone)]
pub struct JitteredCholesky {
    chol: Cholesky<f64, Dyn>,
    jitter: f64,
}

impl JitteredCholesky {
    pub fn new(a: &DMatrix<f64>) -> Result<Self> {
        assert!(a.is_square(), "cholesky of non-square matrix");
        let n = a.nrows();
        let max_diag = a.diagonal().iter().cloned().fold(0.0_f64, f64::max);
        if let Some(chol) = accept(a.clone(), max_diag) {
            return Ok(Self { chol, jitter: 0.0 });
        }
        let mut rel = JITTER_START;
        while rel <= JITTER_STOP * (1.0 + 1e-9) {
            let jitter = rel * max_diag;
            if jitter > 0.0 {
                let mut b = a.clone();
                for i in 0..n {
                    b[(i, i)] += jitter;
                }
                if let Some(chol) = accept(b, max_diag) {
                    log::debug!("cholesky of {n}x{n} needed jitter {jitter:e}");
                    return Ok(Self { chol, jitter });
                }
            }
            rel *= 10.0;
        }
        Err(Error::Factorization {
            size: n,
            max_jitter: JITTER_STOP * max_diag,
        })
    }

    pub fn dim(&self) -> usize {
        self.chol.l_dirty().nrows()
    }

    /// Diagonal jitter that was added (0 when none was needed).
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn l(&self) -> DMatrix<f64> {
        self.chol.l()
    }

    /// `L^{-1} b` by forward substitution.
    pub fn whiten(&self, b: &DVector<f64>) -> DVector<f64> {
        self.chol
            .l_dirty()
            .solve_lower_triangular(b)
            .expect("cholesky factor has a positive diagonal")
    }

    /// `A^{-1} b` via two triangular solves.
    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(b)
    }

    /// `L z`, used to colour white noise.
    pub fn colour(&self, z: &DVector<f64>) -> DVector<f64> {
        let l = self.chol.l_dirty();
        let n = l.nrows();
        let mut out = DVector::zeros(n);
        for i in 0..n {
            let mut acc = 0.0;
            for j in 0..=i {
                acc += l[(i, j)] * z[j];
            }
            out[i] = acc;
        }
        out
    }
}
