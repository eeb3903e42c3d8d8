use std::fmt;
use std::path::Path;

use faer::linalg::solvers::Solve;
use faer::{Mat, Side};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::piecewise::Dataset;
use crate::predictor::Predictor;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Kernel {
    /// `exp(-|x - y|^2 / (2 h^2))`
    Gaussian { bandwidth: f64 },
    /// `(1 + <x, y>)^degree`
    Polynomial { degree: u32 },
}

impl Kernel {
    #[inline]
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match *self {
            Kernel::Gaussian { bandwidth } => {
                let d2: f64 = a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum();
                (-d2 / (2.0 * bandwidth * bandwidth)).exp()
            }
            Kernel::Polynomial { degree } => {
                let ip: f64 = a.iter().zip(b).map(|(p, q)| p * q).sum();
                (1.0 + ip).powi(degree as i32)
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Kernel::Gaussian { bandwidth } if !(bandwidth > 0.0 && bandwidth.is_finite()) => {
                Err(Error::Config(format!("bandwidth must be positive, got {bandwidth}")))
            }
            Kernel::Polynomial { degree: 0 } => Err(Error::Config("degree must be at least 1".into())),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Kernel::Gaussian { bandwidth } => write!(f, "gaussian(h={bandwidth})"),
            Kernel::Polynomial { degree } => write!(f, "polynomial(d={degree})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    pub kernel: Kernel,
    /// Ridge coefficient `mu`; the system solved is `(K + n mu I) alpha = Y`.
    pub ridge: f64,
}

impl KernelConfig {
    pub fn validate(&self) -> Result<()> {
        self.kernel.validate()?;
        if !(self.ridge >= 0.0 && self.ridge.is_finite()) {
            return Err(Error::Config(format!("ridge must be nonnegative, got {}", self.ridge)));
        }
        Ok(())
    }
}

impl fmt::Display for KernelConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} mu={}", self.kernel, self.ridge)
    }
}

#[derive(Debug, Clone)]
pub struct KernelModel {
    cfg: KernelConfig,
    dim: usize,
    xs: Vec<f64>,
    alpha: Vec<f64>,
}

impl KernelModel {
    pub fn config(&self) -> KernelConfig {
        self.cfg
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }
}

impl Predictor for KernelModel {
    fn predict(&self, x: &[f64]) -> f64 {
        self.xs
            .chunks_exact(self.dim)
            .zip(&self.alpha)
            .map(|(xi, a)| a * self.cfg.kernel.eval(x, xi))
            .sum()
    }
}

/// Gram matrix `k(a_i, b_j)` for row-major point sets.
pub fn gram(kernel: &Kernel, a: &[f64], b: &[f64], dim: usize) -> Mat<f64> {
    let (na, nb) = (a.len() / dim, b.len() / dim);
    if std::ptr::eq(a, b) {
        let mut m = Mat::zeros(na, na);
        for i in 0..na {
            for j in 0..=i {
                let v = kernel.eval(&a[i * dim..(i + 1) * dim], &a[j * dim..(j + 1) * dim]);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        m
    } else {
        Mat::from_fn(na, nb, |i, j| {
            kernel.eval(&a[i * dim..(i + 1) * dim], &b[j * dim..(j + 1) * dim])
        })
    }
}

/// Solves `(K + shift I) X = rhs` for symmetric `K`. Cholesky first; when that
/// fails and `shift > 0` a pseudo-inverse through the eigendecomposition is used.
pub(crate) fn solve_shifted(k: &Mat<f64>, shift: f64, rhs: &Mat<f64>) -> Result<Mat<f64>> {
    let n = k.nrows();
    let mut a = k.clone();
    for i in 0..n {
        a[(i, i)] += shift;
    }
    if let Ok(llt) = a.llt(Side::Lower) {
        return Ok(llt.solve(rhs));
    }
    if shift <= 0.0 {
        return Err(Error::Numeric(
            "kernel system is singular; use a positive ridge".into(),
        ));
    }
    log::warn!("Cholesky failed on an {n}x{n} kernel system; using a pseudo-inverse");
    let evd = a
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Numeric(format!("eigendecomposition failed: {e:?}")))?;
    let u = evd.U();
    let s = evd.S().column_vector();
    let top = (0..n).map(|i| s[i].abs()).fold(0.0, f64::max);
    let tol = top * n as f64 * f64::EPSILON;
    let ut_rhs = u.transpose() * rhs;
    let mut scaled = ut_rhs.clone();
    for i in 0..n {
        let inv = if s[i].abs() > tol { 1.0 / s[i] } else { 0.0 };
        for c in 0..scaled.ncols() {
            scaled[(i, c)] *= inv;
        }
    }
    Ok(u * scaled)
}

fn column(ys: &[f64]) -> Mat<f64> {
    Mat::from_fn(ys.len(), 1, |i, _| ys[i])
}

/// Kernel ridge regression: `alpha = (K + n mu I)^{-1} Y`.
pub fn kernel_fit(cfg: &KernelConfig, data: &Dataset) -> Result<KernelModel> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::input("kernel regression needs at least one point"));
    }
    let n = data.len();
    let k = gram(&cfg.kernel, data.xs(), data.xs(), data.dim());
    let sol = solve_shifted(&k, n as f64 * cfg.ridge, &column(data.ys()))?;
    let alpha: Vec<f64> = (0..n).map(|i| sol[(i, 0)]).collect();
    if alpha.iter().any(|a| !a.is_finite()) {
        return Err(Error::Numeric("kernel solve produced non-finite weights".into()));
    }
    Ok(KernelModel {
        cfg: *cfg,
        dim: data.dim(),
        xs: data.xs().to_vec(),
        alpha,
    })
}

/// Candidate kernels and ridge coefficients searched by cross-validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelGrid {
    pub kernels: Vec<Kernel>,
    pub ridges: Vec<f64>,
}

fn default_ridges() -> Vec<f64> {
    std::iter::once(0.01)
        .chain((1..=5).map(|i| (4 * i) as f64 / 10.0))
        .collect()
}

impl KernelGrid {
    /// Bandwidths `{0.01, 0.1, 0.2, ..., 2.0}` and ridges `{0.01, 0.4, ..., 2.0}`.
    pub fn gaussian_default() -> Self {
        let kernels = std::iter::once(0.01)
            .chain((1..=20).map(|i| i as f64 / 10.0))
            .map(|bandwidth| Kernel::Gaussian { bandwidth })
            .collect();
        Self {
            kernels,
            ridges: default_ridges(),
        }
    }

    /// Degrees `1..=5` and the default ridges.
    pub fn polynomial_default() -> Self {
        Self {
            kernels: (1..=5).map(|degree| Kernel::Polynomial { degree }).collect(),
            ridges: default_ridges(),
        }
    }

    pub fn configs(&self) -> impl Iterator<Item = KernelConfig> + '_ {
        self.kernels.iter().flat_map(move |k| {
            self.ridges.iter().map(move |r| KernelConfig {
                kernel: *k,
                ridge: *r,
            })
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvRow {
    pub config: String,
    pub fold: usize,
    pub mse: f64,
}

#[derive(Debug, Clone)]
pub struct CvOutcome<C> {
    pub best: C,
    pub best_score: f64,
    /// Mean held-out MSE of every candidate, in grid order.
    pub scores: Vec<(C, f64)>,
    pub rows: Vec<CvRow>,
}

impl<C> CvOutcome<C> {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("config,fold,mse\n");
        for r in &self.rows {
            out.push_str(&format!("\"{}\",{},{}\n", r.config, r.fold, r.mse));
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

/// Interleaved fold assignment: point `i` is held out in fold `i mod k`.
pub fn fold_indices(n: usize, folds: usize, fold: usize) -> (Vec<usize>, Vec<usize>) {
    (0..n).partition(|i| i % folds != fold)
}

pub(crate) fn check_folds(n: usize, folds: usize) -> Result<()> {
    if folds < 2 || folds > n {
        return Err(Error::input(format!("need 2 <= folds <= n, got {folds} folds for {n} points")));
    }
    Ok(())
}

/// Picks the grid point with the smallest mean held-out MSE; ties go to the first
/// candidate in grid order. Candidates whose system cannot be solved score infinity.
pub fn cross_validate(grid: &KernelGrid, data: &Dataset, folds: usize) -> Result<CvOutcome<KernelConfig>> {
    check_folds(data.len(), folds)?;
    if grid.kernels.is_empty() || grid.ridges.is_empty() {
        return Err(Error::input("cross-validation grid is empty"));
    }
    for c in grid.configs() {
        c.validate()?;
    }
    let dim = data.dim();
    let n = data.len();
    let splits: Vec<_> = (0..folds).map(|f| fold_indices(n, folds, f)).collect();
    let mut sums = vec![0.0; grid.kernels.len() * grid.ridges.len()];
    let mut rows = Vec::with_capacity(sums.len() * folds);

    for (ki, kernel) in grid.kernels.iter().enumerate() {
        let full = gram(kernel, data.xs(), data.xs(), dim);
        for (fold, (train, test)) in splits.iter().enumerate() {
            let k_tr = Mat::from_fn(train.len(), train.len(), |i, j| full[(train[i], train[j])]);
            let k_te = Mat::from_fn(test.len(), train.len(), |i, j| full[(test[i], train[j])]);
            let y_tr = Mat::from_fn(train.len(), 1, |i, _| data.ys()[train[i]]);
            for (ri, ridge) in grid.ridges.iter().enumerate() {
                let mse = match solve_shifted(&k_tr, train.len() as f64 * ridge, &y_tr) {
                    Ok(alpha) => {
                        let pred = &k_te * &alpha;
                        let m = test
                            .iter()
                            .enumerate()
                            .map(|(i, &t)| (pred[(i, 0)] - data.ys()[t]).powi(2))
                            .sum::<f64>()
                            / test.len() as f64;
                        if m.is_finite() {
                            m
                        } else {
                            f64::INFINITY
                        }
                    }
                    Err(_) => f64::INFINITY,
                };
                sums[ki * grid.ridges.len() + ri] += mse;
                rows.push(CvRow {
                    config: KernelConfig {
                        kernel: *kernel,
                        ridge: *ridge,
                    }
                    .to_string(),
                    fold,
                    mse,
                });
            }
        }
    }
    let scores: Vec<(KernelConfig, f64)> = grid
        .configs()
        .zip(&sums)
        .map(|(c, s)| (c, s / folds as f64))
        .collect();
    let (best, best_score) = scores
        .iter()
        .fold(None, |acc: Option<(KernelConfig, f64)>, (c, s)| match acc {
            Some((_, b)) if b <= *s => acc,
            _ => Some((*c, *s)),
        })
        .unwrap();
    if !best_score.is_finite() {
        return Err(Error::Numeric("every kernel candidate failed in cross-validation".into()));
    }
    Ok(CvOutcome {
        best,
        best_score,
        scores,
        rows,
    })
}
