//! Datasets with a partially observed response.
//!
//! Rows are stored observed-first: rows `0..n_obs` carry a response and rows
//! `n_obs..n` are missing. The permutation back to the caller's row order is
//! kept in [`Dataset::original_index`].

use nalgebra::DMatrix;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    covariates: DMatrix<f64>,
    response: Vec<Option<f64>>,
    n_obs: usize,
    original_index: Vec<usize>,
}

impl Dataset {
    /// Builds a dataset from rows in arbitrary order, moving observed rows first.
    ///
    /// The relative order of observed rows and of missing rows is preserved.
    pub fn from_rows(covariates: DMatrix<f64>, response: Vec<Option<f64>>) -> Result<Self> {
        let n = response.len();
        if covariates.nrows() != n {
            return Err(Error::dimension("covariate rows", covariates.nrows(), n));
        }
        for (i, v) in covariates.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::Data(format!(
                    "covariates must be fully observed and finite (entry {i} is {v})"
                )));
            }
        }
        for (i, y) in response.iter().enumerate() {
            if let Some(y) = y {
                if !y.is_finite() {
                    return Err(Error::Data(format!("response in row {i} is not finite")));
                }
            }
        }
        let mut order: Vec<usize> = (0..n).filter(|&i| response[i].is_some()).collect();
        let n_obs = order.len();
        order.extend((0..n).filter(|&i| response[i].is_none()));

        let p = covariates.ncols();
        let sorted_cov = DMatrix::from_fn(n, p, |i, j| covariates[(order[i], j)]);
        let sorted_resp = order.iter().map(|&i| response[i]).collect();
        Ok(Self {
            covariates: sorted_cov,
            response: sorted_resp,
            n_obs,
            original_index: order,
        })
    }

    /// Builds a dataset that is already observed-first.
    pub fn observed_first(
        covariates: DMatrix<f64>,
        y_obs: &[f64],
        n_mis: usize,
    ) -> Result<Self> {
        let mut response: Vec<Option<f64>> = y_obs.iter().map(|&y| Some(y)).collect();
        response.extend(std::iter::repeat_n(None, n_mis));
        Self::from_rows(covariates, response)
    }

    /// Dataset with no covariates.
    pub fn without_covariates(y_obs: &[f64], n_mis: usize) -> Result<Self> {
        Self::observed_first(DMatrix::zeros(y_obs.len() + n_mis, 0), y_obs, n_mis)
    }

    pub fn n(&self) -> usize {
        self.response.len()
    }

    pub fn n_obs(&self) -> usize {
        self.n_obs
    }

    pub fn n_mis(&self) -> usize {
        self.n() - self.n_obs
    }

    pub fn covariates(&self) -> &DMatrix<f64> {
        &self.covariates
    }

    pub fn n_covariates(&self) -> usize {
        self.covariates.ncols()
    }

    /// Covariate `j` of stored row `i`.
    pub fn x(&self, i: usize, j: usize) -> f64 {
        self.covariates[(i, j)]
    }

    /// Covariate `j` for missing coordinate `k` (stored row `n_obs + k`).
    pub fn x_mis(&self, k: usize, j: usize) -> f64 {
        self.covariates[(self.n_obs + k, j)]
    }

    pub fn response(&self) -> &[Option<f64>] {
        &self.response
    }

    /// Missingness indicator: 1 for observed rows.
    pub fn delta(&self) -> Vec<u8> {
        self.response.iter().map(|y| u8::from(y.is_some())).collect()
    }

    pub fn y_obs(&self) -> Vec<f64> {
        self.response[..self.n_obs]
            .iter()
            .map(|y| y.expect("observed-first invariant"))
            .collect()
    }

    pub fn y_obs_sum(&self) -> f64 {
        self.response[..self.n_obs].iter().flatten().sum()
    }

    pub fn y_obs_mean(&self) -> f64 {
        self.y_obs_sum() / self.n_obs as f64
    }

    /// Stored row `i` came from caller row `original_index()[i]`.
    pub fn original_index(&self) -> &[usize] {
        &self.original_index
    }

    /// Rows in the caller's original order.
    pub fn rows_in_original_order(&self) -> Vec<(Vec<f64>, Option<f64>)> {
        let n = self.n();
        let mut out = vec![(Vec::new(), None); n];
        for (stored, &orig) in self.original_index.iter().enumerate() {
            let x = self.covariates.row(stored).iter().copied().collect();
            out[orig] = (x, self.response[stored]);
        }
        out
    }

    /// Combines observed responses with a vector of imputed missing values.
    pub fn completed_response(&self, y_mis: &[f64]) -> Result<Vec<f64>> {
        if y_mis.len() != self.n_mis() {
            return Err(Error::dimension("y_mis", y_mis.len(), self.n_mis()));
        }
        let mut y = self.y_obs();
        y.extend_from_slice(y_mis);
        Ok(y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_are_reordered_observed_first() {
        let x = DMatrix::from_column_slice(4, 1, &[0.1, 0.2, 0.3, 0.4]);
        let d = Dataset::from_rows(x, vec![None, Some(1.0), None, Some(2.0)]).unwrap();
        assert_eq!(d.n_obs(), 2);
        assert_eq!(d.n_mis(), 2);
        assert_eq!(d.delta(), vec![1, 1, 0, 0]);
        assert_eq!(d.y_obs(), vec![1.0, 2.0]);
        assert_eq!(d.x(0, 0), 0.2);
        assert_eq!(d.x_mis(0, 0), 0.1);
        assert_eq!(d.original_index(), &[1, 3, 0, 2]);
        let rows = d.rows_in_original_order();
        assert_eq!(rows[2], (vec![0.3], None));
    }

    #[test]
    fn non_finite_covariate_is_rejected() {
        let x = DMatrix::from_column_slice(2, 1, &[0.1, f64::NAN]);
        assert!(matches!(
            Dataset::from_rows(x, vec![Some(1.0), None]),
            Err(Error::Data(_))
        ));
    }

    #[test]
    fn row_count_mismatch_is_rejected() {
        let x = DMatrix::zeros(3, 1);
        assert!(matches!(
            Dataset::from_rows(x, vec![Some(1.0)]),
            Err(Error::Dimension { .. })
        ));
    }
}
