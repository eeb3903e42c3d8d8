use rand::Rng;
use rand_distr::StandardNormal;

use super::Target;
use crate::error::{Error, Result};
use crate::rng;

/// `n` observations `(X_i, Y_i)` with `X_i` in `[0,1]^D`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    dim: usize,
    xs: Vec<f64>,
    ys: Vec<f64>,
    pub sigma: f64,
    pub seed: u64,
}

impl Dataset {
    pub fn new(dim: usize, xs: Vec<f64>, ys: Vec<f64>, sigma: f64, seed: u64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::input("dataset dimension must be positive"));
        }
        if ys.is_empty() {
            return Err(Error::input("dataset must contain at least one observation"));
        }
        if xs.len() != ys.len() * dim {
            return Err(Error::input(format!(
                "{} coordinates do not form {} points of dimension {dim}",
                xs.len(),
                ys.len()
            )));
        }
        if let Some(v) = xs.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::input(format!("coordinate {v} outside the unit cube")));
        }
        if !(sigma >= 0.0) {
            return Err(Error::input(format!("noise level must be non-negative, got {sigma}")));
        }
        Ok(Self {
            dim,
            xs,
            ys,
            sigma,
            seed,
        })
    }

    /// Fixed design: responses `f(x_i) + N(0, sigma^2)` at the given points.
    pub fn from_design<T: Target + ?Sized>(
        f: &T,
        xs: Vec<f64>,
        sigma: f64,
        seed: u64,
    ) -> Result<Self> {
        if !(sigma >= 0.0) {
            return Err(Error::input(format!("noise level must be non-negative, got {sigma}")));
        }
        let dim = f.dim();
        if dim == 0 || xs.len() % dim != 0 {
            return Err(Error::input("design does not match target dimension"));
        }
        let mut rng = rng::stream(seed);
        let ys = xs
            .chunks_exact(dim)
            .map(|x| {
                let z: f64 = rng.sample(StandardNormal);
                f.predict(x) + sigma * z
            })
            .collect();
        Self::new(dim, xs, ys, sigma, seed)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ys.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.xs[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> std::slice::ChunksExact<'_, f64> {
        self.xs.chunks_exact(self.dim)
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn ys(&self) -> &[f64] {
        &self.ys
    }

    /// Same design, different responses.
    pub fn with_responses(&self, ys: Vec<f64>) -> Result<Self> {
        Self::new(self.dim, self.xs.clone(), ys, self.sigma, self.seed)
    }

    /// Rows at the given indices, in order.
    pub fn subset(&self, idx: &[usize]) -> Self {
        let mut xs = Vec::with_capacity(idx.len() * self.dim);
        let mut ys = Vec::with_capacity(idx.len());
        for &i in idx {
            xs.extend_from_slice(self.point(i));
            ys.push(self.ys[i]);
        }
        Self {
            dim: self.dim,
            xs,
            ys,
            sigma: self.sigma,
            seed: self.seed,
        }
    }

    pub fn mean_response(&self) -> f64 {
        self.ys.iter().sum::<f64>() / self.len() as f64
    }
}

/// Draws `X_i ~ U[0,1]^D` and `Y_i = f(X_i) + xi_i`, `xi_i ~ N(0, sigma^2)`.
///
/// Each observation consumes `D` uniforms followed by one standard normal from the
/// seeded stream, so the output is a pure function of `(f, n, sigma, seed)`.
pub fn sample_dataset<T: Target + ?Sized>(f: &T, n: usize, sigma: f64, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::input("sample size must be at least 1"));
    }
    if !(sigma >= 0.0) {
        return Err(Error::input(format!("noise level must be non-negative, got {sigma}")));
    }
    let dim = f.dim();
    let mut rng = rng::stream(seed);
    let mut xs = Vec::with_capacity(n * dim);
    let mut ys = Vec::with_capacity(n);
    for _ in 0..n {
        let start = xs.len();
        xs.extend((0..dim).map(|_| rng.random::<f64>()));
        let z: f64 = rng.sample(StandardNormal);
        ys.push(f.predict(&xs[start..]) + sigma * z);
    }
    Dataset::new(dim, xs, ys, sigma, seed)
}
