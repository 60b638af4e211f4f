//! Row-stochastic matrices in compressed sparse row form.

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct SparseKernel {
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseKernel {
    /// Builds a kernel from per-row `(column, probability)` lists. Duplicate
    /// columns within a row are summed.
    pub fn from_rows<I>(rows: I) -> Self
    where
        I: IntoIterator<Item = Vec<(usize, f64)>>,
    {
        let mut row_ptr = vec![0];
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for mut row in rows {
            row.sort_by_key(|&(c, _)| c);
            let mut last: Option<usize> = None;
            for (c, v) in row {
                if last == Some(c) {
                    *vals.last_mut().unwrap() += v;
                } else {
                    cols.push(c);
                    vals.push(v);
                    last = Some(c);
                }
            }
            row_ptr.push(cols.len());
        }
        Self {
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn n_states(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[span.clone()]
            .iter()
            .copied()
            .zip(self.vals[span].iter().copied())
    }

    /// Entry `K(i, j)`, zero when absent.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.cols[span.clone()].binary_search(&j) {
            Ok(pos) => self.vals[span.start + pos],
            Err(_) => 0.0,
        }
    }

    pub fn max_row_sum_error(&self) -> f64 {
        (0..self.n_states())
            .map(|i| (self.row(i).map(|(_, v)| v).sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Row vector times kernel, `mu K`.
    pub fn push_forward(&self, mu: &[f64]) -> Result<Vec<f64>> {
        if mu.len() != self.n_states() {
            return Err(Error::Dimension(format!(
                "vector of length {} against a kernel on {} states",
                mu.len(),
                self.n_states()
            )));
        }
        let mut out = vec![0.0; mu.len()];
        self.push_forward_into(mu, &mut out);
        Ok(out)
    }

    pub(crate) fn push_forward_into(&self, mu: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|x| *x = 0.0);
        for (i, &m) in mu.iter().enumerate() {
            if m == 0.0 {
                continue;
            }
            for (j, v) in self.row(i) {
                out[j] += m * v;
            }
        }
    }

    /// `max_x |(pi K)(x) - pi(x)|`.
    pub fn stationarity_residual(&self, pi: &[f64]) -> Result<f64> {
        let pushed = self.push_forward(pi)?;
        Ok(pushed
            .iter()
            .zip(pi)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    /// Largest violation of `pi(x) K(x,y) = pi(y) K(y,x)` over stored entries.
    pub fn detailed_balance_residual(&self, pi: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for x in 0..self.n_states() {
            for (y, k) in self.row(x) {
                worst = worst.max((pi[x] * k - pi[y] * self.get(y, x)).abs());
            }
        }
        worst
    }
}

/// Total variation distance `(1/2) sum |a - b|`.
pub fn total_variation(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}
