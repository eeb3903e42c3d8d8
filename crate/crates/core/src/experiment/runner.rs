use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use rayon::prelude::*;

use super::config::{ExperimentConfig, Method};
use crate::baselines::{bayes_fit, cross_validate, kernel_fit, series_cv, BayesConfig};
use crate::error::{Error, Result};
use crate::piecewise::{sample_dataset, Dataset, PiecewiseSmoothFunction, Target};
use crate::predictor::Predictor;
use crate::rates::{empirical_l2_error, lower_bound_exponent, theoretical_rate, RateReport};
use crate::relu_net::{train_least_squares, TrainerConfig};
use crate::rng;

pub const RESULTS_FILE: &str = "results.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const PLOTDATA_FILE: &str = "plotdata.csv";
pub const CONFIG_FILE: &str = "config.toml";
pub const RESULTS_HEADER: [&str; 5] = ["method", "n", "replication", "seed", "l2_error"];

/// One persisted `(method, n, replication)` cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResultRow {
    pub method: Method,
    pub n: usize,
    pub replication: usize,
    pub seed: u64,
    pub l2_error: f64,
}

impl ResultRow {
    fn key(&self) -> (Method, usize, usize) {
        (self.method, self.n, self.replication)
    }

    fn record(&self) -> [String; 5] {
        [
            self.method.name().to_string(),
            self.n.to_string(),
            self.replication.to_string(),
            self.seed.to_string(),
            format!("{:?}", self.l2_error),
        ]
    }
}

/// Seed of a cell: the master seed mixed with the packed, injective key
/// `method << 56 | n << 24 | replication`.
pub fn cell_seed(master: u64, method: Method, n: usize, replication: usize) -> u64 {
    debug_assert!(n < 1 << 32 && replication < 1 << 24);
    rng::derive(master, (method.index() << 56) | ((n as u64) << 24) | replication as u64)
}

pub fn read_results(path: &Path) -> Result<Vec<ResultRow>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    let header = rdr
        .headers()
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?
        .clone();
    if header.iter().ne(RESULTS_HEADER.iter().copied()) {
        return Err(Error::Parse(format!("{}: unexpected header", path.display())));
    }
    let mut rows = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let bad = |what: &str| Error::Parse(format!("{} row {}: bad {what}", path.display(), line + 2));
        let rec = rec.map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        let method = Method::from_name(&rec[0]).ok_or_else(|| bad("method"))?;
        rows.push(ResultRow {
            method,
            n: rec[1].parse().map_err(|_| bad("n"))?,
            replication: rec[2].parse().map_err(|_| bad("replication"))?,
            seed: rec[3].parse().map_err(|_| bad("seed"))?,
            l2_error: rec[4].parse().map_err(|_| bad("l2_error"))?,
        });
    }
    Ok(rows)
}

fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    File::create(&tmp)
        .and_then(|mut f| f.write_all(contents).and_then(|_| f.sync_all()))
        .map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::Parse(e.to_string());
    w.write_record(header).map_err(io)?;
    for r in rows {
        w.write_record(&r).map_err(io)?;
    }
    w.into_inner().map_err(|e| Error::Parse(e.to_string()))
}

/// Fits one estimator to `data` and returns it as a predictor.
pub fn fit_method(cfg: &ExperimentConfig, method: Method, data: &Dataset, seed: u64) -> Result<Box<dyn Predictor + Send + Sync>> {
    let m = &cfg.methods;
    Ok(match method {
        Method::Dnn => {
            let d = m.dnn.as_ref().expect("method enabled");
            let trainer = TrainerConfig {
                seed,
                ..d.trainer.clone()
            };
            Box::new(train_least_squares(&d.shape, data, &trainer)?.net)
        }
        Method::GaussianKernel => {
            let g = m.gaussian_kernel.as_ref().expect("method enabled");
            let best = cross_validate(&g.grid(), data, g.folds)?.best;
            Box::new(kernel_fit(&best, data)?)
        }
        Method::PolyKernel => {
            let p = m.poly_kernel.as_ref().expect("method enabled");
            let best = cross_validate(&p.grid(), data, p.folds)?.best;
            Box::new(kernel_fit(&best, data)?)
        }
        Method::Series => {
            let s = m.series.as_ref().expect("method enabled");
            Box::new(series_cv(s.j_max, data, s.folds)?.0)
        }
        Method::BayesDnn => {
            let b = m.bayes_dnn.as_ref().expect("method enabled");
            let chain = BayesConfig {
                seed,
                ..b.chain.clone()
            };
            Box::new(bayes_fit(&b.shape, &chain, data)?)
        }
    })
}

/// Runs one cell: dataset, fit and Monte-Carlo error, each from its own derived seed.
pub fn run_cell(
    cfg: &ExperimentConfig,
    target: &PiecewiseSmoothFunction,
    method: Method,
    n: usize,
    replication: usize,
) -> Result<ResultRow> {
    let seed = cell_seed(cfg.seed, method, n, replication);
    let data = sample_dataset(target, n, cfg.sigma, seed)?;
    let model = fit_method(cfg, method, &data, rng::derive(seed, 1))?;
    let l2_error = empirical_l2_error(model.as_ref(), target, cfg.mc_n, rng::derive(seed, 2))?;
    Ok(ResultRow {
        method,
        n,
        replication,
        seed,
        l2_error,
    })
}

/// Exponent reported next to each method's fitted slope: the piecewise-smooth
/// rate for network estimators and `-2/(2+D)` for linear ones.
pub fn reference_exponent(method: Method, target: &PiecewiseSmoothFunction) -> Result<f64> {
    if method.is_linear() {
        Ok(lower_bound_exponent(target.dim()))
    } else {
        let (beta, alpha) = target.smoothness();
        theoretical_rate(beta, alpha, target.dim())
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub out_dir: PathBuf,
    pub rows: Vec<ResultRow>,
    /// Cells computed by this call (the rest were already on disk).
    pub computed: usize,
    pub reports: Vec<RateReport>,
}

/// Runs every missing `(method, n, replication)` cell, appending each finished row
/// to `results.csv`, then rewrites the results in canonical order together with
/// `summary.csv` and `plotdata.csv`.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: &Path) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let target = cfg.target()?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let results_path = out_dir.join(RESULTS_FILE);

    let methods = cfg.methods.enabled();
    let mut done: BTreeMap<(Method, usize, usize), ResultRow> = BTreeMap::new();
    if results_path.exists() {
        for row in read_results(&results_path)? {
            let known = methods.contains(&row.method)
                && cfg.n.contains(&row.n)
                && row.replication < cfg.replications;
            if !known || row.seed != cell_seed(cfg.seed, row.method, row.n, row.replication) {
                return Err(Error::Config(format!(
                    "{} holds results from a different configuration ({} n={} replication={})",
                    results_path.display(),
                    row.method.name(),
                    row.n,
                    row.replication
                )));
            }
            done.insert(row.key(), row);
        }
    }

    let todo: Vec<(Method, usize, usize)> = methods
        .iter()
        .flat_map(|&m| cfg.n.iter().flat_map(move |&n| (0..cfg.replications).map(move |r| (m, n, r))))
        .filter(|k| !done.contains_key(k))
        .collect();
    log::info!("{} cells to run, {} already on disk", todo.len(), done.len());

    if !todo.is_empty() {
        let fresh = !results_path.exists() || done.is_empty();
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&results_path)
            .map_err(|e| Error::io(&results_path, e))?;
        if fresh {
            file.set_len(0).map_err(|e| Error::io(&results_path, e))?;
            let header = csv_bytes(&RESULTS_HEADER, std::iter::empty())?;
            file.write_all(&header).map_err(|e| Error::io(&results_path, e))?;
        }
        let writer = Mutex::new(file);
        let new_rows = todo
            .par_iter()
            .map(|&(m, n, r)| {
                let row = run_cell(cfg, &target, m, n, r)?;
                log::info!("{} n={} rep={} l2={:.5}", m.name(), n, r, row.l2_error);
                let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
                w.write_record(row.record()).map_err(|e| Error::Parse(e.to_string()))?;
                let line = w.into_inner().map_err(|e| Error::Parse(e.to_string()))?;
                let mut f = writer.lock().expect("results writer poisoned");
                f.write_all(&line)
                    .and_then(|_| f.flush())
                    .map_err(|e| Error::io(&results_path, e))?;
                Ok(row)
            })
            .collect::<Result<Vec<_>>>()?;
        for row in new_rows {
            done.insert(row.key(), row);
        }
    }

    let rows: Vec<ResultRow> = done.into_values().collect();
    write_atomic(&results_path, &csv_bytes(&RESULTS_HEADER, rows.iter().map(|r| r.record().to_vec()))?)?;
    write_atomic(&out_dir.join(CONFIG_FILE), snapshot(cfg).to_toml().as_bytes())?;
    let reports = summarize(&rows, &target)?;
    write_summary(&out_dir.join(SUMMARY_FILE), &reports)?;
    super::plotdata::write_plotdata(&out_dir.join(PLOTDATA_FILE), &rows)?;
    Ok(ExperimentOutcome {
        out_dir: out_dir.to_path_buf(),
        computed: todo.len(),
        rows,
        reports,
    })
}

/// The configuration with a relative target path made absolute, so the snapshot
/// can be reloaded from the output directory.
fn snapshot(cfg: &ExperimentConfig) -> ExperimentConfig {
    let mut snap = cfg.clone();
    if let Some(p) = &cfg.target.path {
        if p.is_relative() {
            let joined = cfg.base_dir.join(p);
            snap.target.path = Some(std::fs::canonicalize(&joined).unwrap_or(joined));
        }
    }
    snap
}

/// One report per method with at least two sample sizes on record.
pub fn summarize(rows: &[ResultRow], target: &PiecewiseSmoothFunction) -> Result<Vec<RateReport>> {
    let mut out = Vec::new();
    for m in Method::ALL {
        let pairs: Vec<(usize, f64)> = rows
            .iter()
            .filter(|r| r.method == m)
            .map(|r| (r.n, r.l2_error.max(f64::MIN_POSITIVE)))
            .collect();
        let mut ns: Vec<usize> = pairs.iter().map(|p| p.0).collect();
        ns.dedup();
        if ns.len() < 2 {
            continue;
        }
        out.push(RateReport::from_rows(m.name(), &pairs, reference_exponent(m, target)?)?);
    }
    Ok(out)
}

pub fn write_summary(path: &Path, reports: &[RateReport]) -> Result<()> {
    let rows = reports.iter().map(|r| {
        vec![
            r.method.clone(),
            format!("{:?}", r.slope),
            format!("{:?}", r.intercept),
            format!("{:?}", r.theoretical_exponent),
        ]
    });
    write_atomic(path, &csv_bytes(&["method", "slope", "intercept", "theoretical_exponent"], rows)?)
}
