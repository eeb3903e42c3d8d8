//! Rate exponents, the series lower bound, Monte-Carlo `L2(P_X)` error and
//! log-log slope fitting.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::series_fit;
use crate::error::{Error, Result};
use crate::piecewise::{Dataset, FnTarget, Target};
use crate::predictor::Predictor;
use crate::rng;

/// Exponent of `max{n^(-2beta/(2beta+D)), n^(-alpha/(alpha+D-1))}`: the slower of the
/// smooth-part and boundary rates.
pub fn theoretical_rate(beta: f64, alpha: f64, dim: usize) -> Result<f64> {
    if !(beta > 0.0 && alpha > 0.0) || dim < 2 {
        return Err(Error::input("theoretical rate needs beta, alpha > 0 and D >= 2"));
    }
    let d = dim as f64;
    Ok((-2.0 * beta / (2.0 * beta + d)).max(-alpha / (alpha + d - 1.0)))
}

/// Exponent `-2/(2+D)` of the series lower bound.
pub fn lower_bound_exponent(dim: usize) -> f64 {
    -2.0 / (2.0 + dim as f64)
}

/// Lower bound on the risk of the series estimator for the step target:
/// `n^(-2/3) (sigma^2 + 1/(4 pi^2))` when `D = 1` and
/// `n^(-2/(2+D)) (sigma^2 + D/(2 pi^2))` otherwise.
pub fn fourier_lower_bound(n: usize, dim: usize, sigma: f64) -> Result<f64> {
    if n == 0 || dim == 0 || !(sigma >= 0.0) {
        return Err(Error::input("lower bound needs n >= 1, D >= 1 and sigma >= 0"));
    }
    let pi2 = std::f64::consts::PI.powi(2);
    let tail = if dim == 1 { 1.0 / (4.0 * pi2) } else { dim as f64 / (2.0 * pi2) };
    Ok((n as f64).powf(lower_bound_exponent(dim)) * (sigma * sigma + tail))
}

/// Monte-Carlo estimate of `E (f_hat(X) - f(X))^2` with `X` uniform on the cube.
pub fn empirical_l2_error<P, T>(predictor: &P, target: &T, mc_n: usize, seed: u64) -> Result<f64>
where
    P: Predictor + ?Sized,
    T: Target + ?Sized,
{
    if mc_n == 0 {
        return Err(Error::input("mc_n must be at least 1"));
    }
    let dim = target.dim();
    let mut rng = rng::stream(seed);
    let mut x = vec![0.0; dim];
    let mut acc = 0.0;
    for _ in 0..mc_n {
        x.iter_mut().for_each(|v| *v = rng.random());
        let d = predictor.predict(&x) - target.predict(&x);
        acc += d * d;
    }
    Ok(acc / mc_n as f64)
}

/// Ordinary least squares of `ln(error)` on `ln(n)`; returns `(slope, intercept)`.
pub fn fit_rate(points: &[(f64, f64)]) -> Result<(f64, f64)> {
    if points.iter().any(|(n, e)| !(*n > 0.0) || !(*e > 0.0)) {
        return Err(Error::input("slope fitting needs positive n and positive errors"));
    }
    let xs: Vec<f64> = points.iter().map(|(n, _)| n.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|(_, e)| e.ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if !(sxx > 0.0) {
        return Err(Error::input("slope fitting needs at least two distinct n"));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub n: usize,
    pub mean_error: f64,
    pub std_error: f64,
    pub mean_log_error: f64,
    pub std_log_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub method: String,
    pub points: Vec<RatePoint>,
    pub slope: f64,
    pub intercept: f64,
    pub theoretical_exponent: f64,
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let k = v.len() as f64;
    let mean = v.iter().sum::<f64>() / k;
    let std = if v.len() > 1 {
        (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, std)
}

impl RateReport {
    /// Summarises `(n, error)` replication rows. The slope is fitted on every row,
    /// which equals a fit on the per-`n` mean log-errors when replications balance.
    pub fn from_rows(method: &str, rows: &[(usize, f64)], theoretical_exponent: f64) -> Result<Self> {
        if rows.iter().any(|(_, e)| !(*e >= 0.0)) {
            return Err(Error::input("errors must be nonnegative"));
        }
        let mut ns: Vec<usize> = rows.iter().map(|(n, _)| *n).collect();
        ns.sort_unstable();
        ns.dedup();
        if ns.len() < 2 {
            return Err(Error::input("a rate needs at least two distinct sample sizes"));
        }
        let points = ns
            .iter()
            .map(|&n| {
                let errs: Vec<f64> = rows.iter().filter(|(m, _)| *m == n).map(|(_, e)| *e).collect();
                let logs: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
                let (mean_error, std_error) = mean_std(&errs);
                let (mean_log_error, std_log_error) = mean_std(&logs);
                RatePoint {
                    n,
                    mean_error,
                    std_error,
                    mean_log_error,
                    std_log_error,
                }
            })
            .collect();
        let pts: Vec<(f64, f64)> = rows.iter().map(|(n, e)| (*n as f64, *e)).collect();
        let (slope, intercept) = fit_rate(&pts)?;
        Ok(Self {
            method: method.to_string(),
            points,
            slope,
            intercept,
            theoretical_exponent,
        })
    }
}

/// The one-dimensional step `1_{x >= 1/2}`.
pub fn step_target() -> FnTarget<fn(&[f64]) -> f64> {
    fn step(x: &[f64]) -> f64 {
        if x[0] >= 0.5 {
            1.0
        } else {
            0.0
        }
    }
    FnTarget::new(1, step)
}

/// `floor(n^(1/3))` computed exactly on integers.
pub fn cube_root_schedule(n: usize) -> usize {
    let mut j = (n as f64).cbrt().floor() as usize;
    while (j + 1).pow(3) <= n {
        j += 1;
    }
    while j > 0 && j.pow(3) > n {
        j -= 1;
    }
    j
}

/// One replication of the series estimator on the step target: design
/// `X_i = i/n`, Gaussian noise, truncation `floor(n^(1/3))`.
pub fn step_series_error(n: usize, sigma: f64, seed: u64, mc_n: usize) -> Result<f64> {
    let target = step_target();
    let xs: Vec<f64> = (1..=n).map(|i| i as f64 / n as f64).collect();
    let data = Dataset::from_design(&target, xs, sigma, seed)?;
    let model = series_fit(cube_root_schedule(n), &data)?;
    empirical_l2_error(&model, &target, mc_n, rng::derive(seed, 1))
}

/// The step-target series experiment over a sample-size schedule; rows are
/// `(n, replication, seed, error)`.
pub fn step_series_experiment(
    ns: &[usize],
    replications: usize,
    sigma: f64,
    mc_n: usize,
    seed: u64,
) -> Result<(RateReport, Vec<(usize, usize, u64, f64)>)> {
    let cells: Vec<(usize, usize, u64)> = ns
        .iter()
        .flat_map(|&n| (0..replications).map(move |r| (n, r)))
        .map(|(n, r)| (n, r, rng::derive(seed, ((n as u64) << 24) | r as u64)))
        .collect();
    let rows = cells
        .par_iter()
        .map(|&(n, r, s)| step_series_error(n, sigma, s, mc_n).map(|e| (n, r, s, e)))
        .collect::<Result<Vec<_>>>()?;
    let pairs: Vec<(usize, f64)> = rows.iter().map(|(n, _, _, e)| (*n, *e)).collect();
    let report = RateReport::from_rows("series-step", &pairs, lower_bound_exponent(1))?;
    Ok((report, rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::piecewise::preset_experiment_target;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn rate_examples() {
        assert!((theoretical_rate(2.0, 1.0, 2).unwrap() + 0.5).abs() < 1e-15);
        assert!((theoretical_rate(1.0, 1.0, 2).unwrap() + 0.5).abs() < 1e-15);
        let smooth = -4.0 / 6.0;
        assert!((theoretical_rate(2.0, 1e12, 2).unwrap() - smooth).abs() < 1e-9);
        assert!(theoretical_rate(0.0, 1.0, 2).is_err());
        assert!(theoretical_rate(1.0, 1.0, 1).is_err());
    }

    #[test]
    fn lower_bound_examples() {
        let v = fourier_lower_bound(1000, 1, 0.5).unwrap();
        assert!((v - 0.01 * (0.25 + 1.0 / (4.0 * std::f64::consts::PI.powi(2)))).abs() < 1e-15);
        assert!((v - 0.0027533).abs() < 1e-7);
        assert!(fourier_lower_bound(1000, 1, 0.0).unwrap() > 0.0);
        assert_eq!(lower_bound_exponent(2), -0.5);
        assert!(lower_bound_exponent(2) > theoretical_rate(2.0, 2.0, 2).unwrap());
    }

    #[test]
    fn mc_error_examples() {
        let f = preset_experiment_target();
        assert_eq!(empirical_l2_error(&f, &f, 1000, 1).unwrap(), 0.0);
        let shifted = |x: &[f64]| f.eval(x).unwrap() + 0.1;
        let e = empirical_l2_error(&shifted, &f, 100_000, 2).unwrap();
        assert!((e - 0.01).abs() < 1e-12);
        let g = |x: &[f64]| x[0];
        let a = empirical_l2_error(&g, &f, 100_000, 3).unwrap();
        let b = empirical_l2_error(&g, &f, 100_000, 4).unwrap();
        // spread of the squared difference bounds the Monte-Carlo standard error
        let mut rng = rng::stream(9);
        let sq: Vec<f64> = (0..100_000)
            .map(|_| {
                let x = [rng.random::<f64>(), rng.random::<f64>()];
                (g(&x) - f.eval(&x).unwrap()).powi(2)
            })
            .collect();
        let (_, sd) = mean_std(&sq);
        let se = sd / (100_000f64).sqrt();
        assert!((a - b).abs() <= 3.0 * se * 2f64.sqrt());
        assert_eq!(a, empirical_l2_error(&g, &f, 100_000, 3).unwrap());
    }

    #[test]
    fn fit_rate_examples() {
        let pts: Vec<(f64, f64)> = [100.0, 400.0, 1600.0].iter().map(|n: &f64| (*n, 3.0 * n.powf(-0.5))).collect();
        let (s, c) = fit_rate(&pts).unwrap();
        assert!((s + 0.5).abs() < 1e-10 && (c - 3f64.ln()).abs() < 1e-10);
        let (s, _) = fit_rate(&[(10.0, 0.2), (100.0, 0.2)]).unwrap();
        assert!(s.abs() < 1e-12);
        assert!(fit_rate(&[(10.0, 0.0), (100.0, 0.2)]).is_err());
        assert!(fit_rate(&[(10.0, 0.1), (10.0, 0.2)]).is_err());
    }

    #[test]
    fn schedule_and_report() {
        assert_eq!(cube_root_schedule(1000), 10);
        assert_eq!(cube_root_schedule(999), 9);
        assert_eq!(cube_root_schedule(100_000), 46);
        let rows = [(100, 0.1), (100, 0.3), (400, 0.05), (400, 0.07)];
        let r = RateReport::from_rows("m", &rows, -0.5).unwrap();
        assert_eq!(r.points.len(), 2);
        assert!((r.points[0].mean_error - 0.2).abs() < 1e-15);
        assert!(RateReport::from_rows("m", &rows[..2], -0.5).is_err());
    }

    #[test]
    fn step_series_is_deterministic_and_above_bound() {
        let a = step_series_error(1000, 0.5, 7, 20_000).unwrap();
        assert_eq!(a, step_series_error(1000, 0.5, 7, 20_000).unwrap());
        assert!(a >= fourier_lower_bound(1000, 1, 0.5).unwrap());
    }

    proptest! {
        #[test]
        fn rate_is_monotone(beta in 0.1f64..5.0, alpha in 0.1f64..5.0, db in 0.0f64..2.0, da in 0.0f64..2.0, dim in 2usize..6) {
            let base = theoretical_rate(beta, alpha, dim).unwrap();
            prop_assert!(theoretical_rate(beta + db, alpha, dim).unwrap() <= base + 1e-15);
            prop_assert!(theoretical_rate(beta, alpha + da, dim).unwrap() <= base + 1e-15);
        }

        #[test]
        fn bound_monotone(n in 1usize..100_000, dn in 1usize..1000, s in 0.0f64..3.0, ds in 0.01f64..1.0, dim in 1usize..5) {
            prop_assert!(fourier_lower_bound(n + dn, dim, s).unwrap() < fourier_lower_bound(n, dim, s).unwrap());
            prop_assert!(fourier_lower_bound(n, dim, s + ds).unwrap() > fourier_lower_bound(n, dim, s).unwrap());
        }

        #[test]
        fn kappa_strictness(beta in 1.01f64..10.0, alpha in 2.01f64..10.0, dim in 2usize..8) {
            prop_assert!(theoretical_rate(beta, alpha, dim).unwrap() < lower_bound_exponent(dim));
        }

        #[test]
        fn planted_slopes(slope in -2.0f64..1.0, c in 0.01f64..10.0) {
            let pts: Vec<(f64, f64)> = [50.0, 200.0, 1000.0, 5000.0].iter().map(|n: &f64| (*n, c * n.powf(slope))).collect();
            let (s, i) = fit_rate(&pts).unwrap();
            prop_assert!((s - slope).abs() < 1e-10 && (i - c.ln()).abs() < 1e-9);
        }
    }
}
