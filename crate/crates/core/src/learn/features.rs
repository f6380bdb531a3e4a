//! Feature matrices the trainer can multiply by.

use ndarray::{Array1, Array2, Axis};
use rayon::prelude::*;

use crate::data::{SparseMatrix, StandardizedFeatures};

/// An `n x p` design matrix.
pub trait FeatureMatrix: Sync {
    fn n_rows(&self) -> usize;
    fn n_cols(&self) -> usize;
    /// `X W^T`, the `n x d` matrix of row scores `W x_i`.
    fn scores(&self, w: &Array2<f64>) -> Array2<f64>;
    /// `R^T X` for an `n x d` matrix `R`.
    fn transpose_times(&self, r: &Array2<f64>) -> Array2<f64>;
}

impl FeatureMatrix for Array2<f64> {
    fn n_rows(&self) -> usize {
        self.nrows()
    }

    fn n_cols(&self) -> usize {
        self.ncols()
    }

    fn scores(&self, w: &Array2<f64>) -> Array2<f64> {
        self.dot(&w.t())
    }

    fn transpose_times(&self, r: &Array2<f64>) -> Array2<f64> {
        r.t().dot(self)
    }
}

impl FeatureMatrix for SparseMatrix {
    fn n_rows(&self) -> usize {
        SparseMatrix::n_rows(self)
    }

    fn n_cols(&self) -> usize {
        SparseMatrix::n_cols(self)
    }

    fn scores(&self, w: &Array2<f64>) -> Array2<f64> {
        sparse_scores(self, w, None)
    }

    fn transpose_times(&self, r: &Array2<f64>) -> Array2<f64> {
        sparse_transpose_times(self, r)
    }
}

impl FeatureMatrix for StandardizedFeatures<'_> {
    fn n_rows(&self) -> usize {
        self.x.n_rows()
    }

    fn n_cols(&self) -> usize {
        self.x.n_cols()
    }

    // W ((x - mu) / sigma) = (W / sigma) x - (W / sigma) mu
    fn scores(&self, w: &Array2<f64>) -> Array2<f64> {
        let inv = self.inv_std();
        let scaled = w * &inv.view().insert_axis(Axis(0));
        let mu = Array1::from(self.stats.mean.clone());
        let offset = scaled.dot(&mu);
        sparse_scores(self.x, &scaled, Some(&offset))
    }

    // column j of R^T X~ is (R^T x_j - mu_j R^T 1) / sigma_j
    fn transpose_times(&self, r: &Array2<f64>) -> Array2<f64> {
        let mut g = sparse_transpose_times(self.x, r);
        let col_sums = r.sum_axis(Axis(0));
        let inv = self.inv_std();
        for (j, mut col) in g.axis_iter_mut(Axis(1)).enumerate() {
            let mu = self.stats.mean[j];
            col.zip_mut_with(&col_sums, |v, &s| *v = (*v - mu * s) * inv[j]);
        }
        g
    }
}

impl StandardizedFeatures<'_> {
    fn inv_std(&self) -> Array1<f64> {
        (0..self.x.n_cols())
            .map(|j| self.stats.inv_std(j))
            .collect()
    }
}

fn sparse_scores(x: &SparseMatrix, w: &Array2<f64>, offset: Option<&Array1<f64>>) -> Array2<f64> {
    let d = w.nrows();
    let mut out = Array2::zeros((x.n_rows(), d));
    out.axis_iter_mut(Axis(0))
        .into_par_iter()
        .enumerate()
        .for_each(|(i, mut row)| {
            let (idx, val) = x.row(i);
            for (&j, &v) in idx.iter().zip(val) {
                row.scaled_add(v, &w.column(j));
            }
            if let Some(b) = offset {
                row -= b;
            }
        });
    out
}

fn sparse_transpose_times(x: &SparseMatrix, r: &Array2<f64>) -> Array2<f64> {
    let mut g = Array2::zeros((r.ncols(), x.n_cols()));
    for i in 0..x.n_rows() {
        let (idx, val) = x.row(i);
        let ri = r.row(i);
        for (&j, &v) in idx.iter().zip(val) {
            g.column_mut(j).scaled_add(v, &ri);
        }
    }
    g
}
