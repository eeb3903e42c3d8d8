use serde::{Deserialize, Serialize};

use super::kernel::{check_folds, fold_indices, CvOutcome, CvRow};
use crate::error::{Error, Result};
use crate::piecewise::Dataset;
use crate::predictor::Predictor;

const TAU: f64 = std::f64::consts::TAU;

/// One-dimensional trigonometric basis on `[0,1]`: `phi_0 = 1`,
/// `phi_{2k-1} = sqrt(2) cos(2 pi k x)` and `phi_{2k} = sqrt(2) sin(2 pi k x)`.
pub fn trig_basis(j: usize, x: f64) -> f64 {
    if j == 0 {
        return 1.0;
    }
    let k = j.div_ceil(2) as f64;
    if j % 2 == 1 {
        std::f64::consts::SQRT_2 * (TAU * k * x).cos()
    } else {
        std::f64::consts::SQRT_2 * (TAU * k * x).sin()
    }
}

fn basis_row(j_max: usize, x: f64, out: &mut [f64]) {
    out[0] = 1.0;
    let (s0, c0) = (TAU * x).sin_cos();
    let (mut s, mut c) = (s0, c0);
    let mut j = 1;
    while j <= j_max {
        out[j] = std::f64::consts::SQRT_2 * c;
        if j < j_max {
            out[j + 1] = std::f64::consts::SQRT_2 * s;
        }
        let (ns, nc) = (s * c0 + c * s0, c * c0 - s * s0);
        s = ns;
        c = nc;
        j += 2;
    }
}

/// Tensor-product series estimate with per-axis truncation `J`: coefficients on
/// the multi-indices `{0..=J}^D`, stored with the first axis varying fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesModel {
    pub dim: usize,
    pub j: usize,
    pub coeffs: Vec<f64>,
}

impl SeriesModel {
    pub fn coeff(&self, index: &[usize]) -> f64 {
        let mut flat = 0;
        for (axis, j) in index.iter().enumerate().rev() {
            assert!(*j <= self.j, "index {j} on axis {axis} exceeds truncation {}", self.j);
            flat = flat * (self.j + 1) + j;
        }
        self.coeffs[flat]
    }

    /// Model with truncation `j <= self.j`, keeping the shared coefficients.
    pub fn truncate(&self, j: usize) -> SeriesModel {
        assert!(j <= self.j);
        let side = j + 1;
        let count = side.pow(self.dim as u32);
        let mut coeffs = Vec::with_capacity(count);
        let mut idx = vec![0usize; self.dim];
        for _ in 0..count {
            coeffs.push(self.coeff(&idx));
            for v in idx.iter_mut() {
                *v += 1;
                if *v < side {
                    break;
                }
                *v = 0;
            }
        }
        SeriesModel {
            dim: self.dim,
            j,
            coeffs,
        }
    }
}

/// Tensor basis values `prod_a phi_{j_a}(x_a)` over all multi-indices.
fn tensor_row(j: usize, x: &[f64], axis_buf: &mut [f64], out: &mut Vec<f64>) {
    let side = j + 1;
    out.clear();
    out.push(1.0);
    for &xa in x {
        basis_row(j, xa, &mut axis_buf[..side]);
        let prev = std::mem::take(out);
        out.reserve(prev.len() * side);
        for &b in &axis_buf[..side] {
            out.extend(prev.iter().map(|p| p * b));
        }
    }
}

impl Predictor for SeriesModel {
    fn predict(&self, x: &[f64]) -> f64 {
        let mut axis = vec![0.0; self.j + 1];
        let mut row = Vec::new();
        tensor_row(self.j, x, &mut axis, &mut row);
        row.iter().zip(&self.coeffs).map(|(a, b)| a * b).sum()
    }
}

/// Empirical coefficients `gamma_j = (1/n) sum_i Y_i phi_j(X_i)`.
pub fn series_fit(j: usize, data: &Dataset) -> Result<SeriesModel> {
    if data.is_empty() {
        return Err(Error::input("series regression needs at least one point"));
    }
    let dim = data.dim();
    let count = (j + 1)
        .checked_pow(dim as u32)
        .filter(|c| *c <= 1 << 24)
        .ok_or_else(|| Error::input("series truncation too large for this dimension"))?;
    let mut coeffs = vec![0.0; count];
    let mut axis = vec![0.0; j + 1];
    let mut row = Vec::with_capacity(count);
    for (x, y) in data.points().zip(data.ys()) {
        tensor_row(j, x, &mut axis, &mut row);
        for (c, b) in coeffs.iter_mut().zip(&row) {
            *c += y * b;
        }
    }
    let n = data.len() as f64;
    coeffs.iter_mut().for_each(|c| *c /= n);
    Ok(SeriesModel { dim, j, coeffs })
}

/// Chooses `J` in `1..=j_max` by `folds`-fold cross-validation and refits on all data.
pub fn series_cv(j_max: usize, data: &Dataset, folds: usize) -> Result<(SeriesModel, CvOutcome<usize>)> {
    if j_max == 0 {
        return Err(Error::input("j_max must be at least 1"));
    }
    check_folds(data.len(), folds)?;
    let mut sums = vec![0.0; j_max];
    let mut rows = Vec::new();
    for fold in 0..folds {
        let (train, test) = fold_indices(data.len(), folds, fold);
        let full = series_fit(j_max, &data.subset(&train))?;
        for j in 1..=j_max {
            let model = full.truncate(j);
            let mse = test
                .iter()
                .map(|&t| (model.predict(data.point(t)) - data.ys()[t]).powi(2))
                .sum::<f64>()
                / test.len() as f64;
            sums[j - 1] += mse;
            rows.push(CvRow {
                config: format!("series(J={j})"),
                fold,
                mse,
            });
        }
    }
    let scores: Vec<(usize, f64)> = sums
        .iter()
        .enumerate()
        .map(|(i, s)| (i + 1, s / folds as f64))
        .collect();
    let (best, best_score) = scores
        .iter()
        .copied()
        .fold((0, f64::INFINITY), |acc, (j, s)| if s < acc.1 { (j, s) } else { acc });
    if best == 0 {
        return Err(Error::Numeric("series cross-validation produced no finite score".into()));
    }
    let model = series_fit(best, data)?;
    Ok((
        model,
        CvOutcome {
            best,
            best_score,
            scores,
            rows,
        },
    ))
}
