use std::io::Write;
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::network::{ReluNetwork, Workspace};
use crate::error::{Error, Result};
use crate::piecewise::Dataset;
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainerConfig {
    pub restarts: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub init_scale: f64,
    pub seed: u64,
    /// Record the training loss every this many epochs (0 records only the end).
    pub log_every: usize,
    /// Optional box constraint `||Theta||_inf <= B`, applied after each step.
    pub clip: Option<f64>,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        Self {
            restarts: 10,
            epochs: 5000,
            learning_rate: 1e-2,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            init_scale: 0.5,
            seed: 0,
            log_every: 100,
            clip: None,
        }
    }
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 || self.epochs == 0 {
            return Err(Error::Config("restarts and epochs must be at least 1".into()));
        }
        for (name, v) in [
            ("learning_rate", self.learning_rate),
            ("beta1", self.beta1),
            ("beta2", self.beta2),
            ("adam_eps", self.adam_eps),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::Config(format!("{name} must lie in (0, 1), got {v}")));
            }
        }
        if !(self.init_scale > 0.0 && self.init_scale.is_finite()) {
            return Err(Error::Config("init_scale must be positive".into()));
        }
        if let Some(b) = self.clip {
            if !(b > 0.0) {
                return Err(Error::Config("clip must be positive".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRow {
    pub restart: usize,
    pub epoch: usize,
    pub mse: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub net: ReluNetwork,
    pub best_restart: usize,
    pub train_mse: f64,
    /// Final training MSE per restart; `None` marks a discarded restart.
    pub restart_mse: Vec<Option<f64>>,
    pub log: Vec<LogRow>,
}

impl TrainOutcome {
    pub fn write_log(&self, path: &Path) -> Result<()> {
        let mut out = String::from("restart,epoch,mse\n");
        for r in &self.log {
            out.push_str(&format!("{},{},{}\n", r.restart, r.epoch, r.mse));
        }
        std::fs::File::create(path)
            .and_then(|mut f| f.write_all(out.as_bytes()))
            .map_err(|e| Error::io(path, e))
    }
}

/// Least-squares fit of a dense ReLU network of the given `shape` by Adam with
/// independent restarts. Returns the restart with lowest final training MSE.
pub fn train_least_squares(shape: &[usize], data: &Dataset, cfg: &TrainerConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::input("training data is empty"));
    }
    if shape.first() != Some(&data.dim()) {
        return Err(Error::input(format!(
            "shape input width {:?} does not match data dimension {}",
            shape.first(),
            data.dim()
        )));
    }
    if shape.last() != Some(&1) {
        return Err(Error::input("shape must end with a single output unit"));
    }
    let template = ReluNetwork::dense_zeros(shape)?;

    let runs: Vec<(Option<(ReluNetwork, f64)>, Vec<LogRow>)> = (0..cfg.restarts)
        .into_par_iter()
        .map(|r| run_restart(&template, data, cfg, r))
        .collect();

    let mut best: Option<(usize, f64)> = None;
    let mut restart_mse = Vec::with_capacity(runs.len());
    let mut log = Vec::new();
    for (r, (res, rows)) in runs.iter().enumerate() {
        log.extend_from_slice(rows);
        match res {
            Some((_, mse)) => {
                restart_mse.push(Some(*mse));
                if best.map_or(true, |(_, b)| *mse < b) {
                    best = Some((r, *mse));
                }
            }
            None => {
                log::warn!("restart {r} produced a non-finite loss and was discarded");
                restart_mse.push(None);
            }
        }
    }
    let (best_restart, train_mse) =
        best.ok_or_else(|| Error::Training("every restart produced a non-finite loss".into()))?;
    let net = runs.into_iter().nth(best_restart).unwrap().0.unwrap().0;
    Ok(TrainOutcome {
        net,
        best_restart,
        train_mse,
        restart_mse,
        log,
    })
}

fn run_restart(
    template: &ReluNetwork,
    data: &Dataset,
    cfg: &TrainerConfig,
    restart: usize,
) -> (Option<(ReluNetwork, f64)>, Vec<LogRow>) {
    let mut net = template.clone();
    let mut rng = rng::stream(rng::derive(cfg.seed, restart as u64));
    let mut params: Vec<f64> = (0..net.param_count())
        .map(|_| cfg.init_scale * rng.sample::<f64, _>(StandardNormal))
        .collect();
    // biases start at zero; the output bias starts at the response mean
    let mut off = 0;
    let n_layers = net.layers().len();
    for (i, l) in net.layers().iter().enumerate() {
        off += l.weights.len();
        let bias = &mut params[off..off + l.bias.len()];
        bias.fill(0.0);
        if i + 1 == n_layers {
            bias[0] = data.mean_response();
        }
        off += l.bias.len();
    }
    net.set_params(&params);

    let mut ws = Workspace::new(&net, data.xs());
    let ys = data.ys();
    let np = params.len();
    let mut grad = vec![0.0; np];
    let mut m = vec![0.0; np];
    let mut v = vec![0.0; np];
    let mut log = Vec::new();
    let (mut p1, mut p2) = (1.0, 1.0);

    for epoch in 0..cfg.epochs {
        let loss = ws.loss_gradient(&net, ys, &mut grad);
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            log.push(LogRow {
                restart,
                epoch,
                mse: f64::NAN,
            });
            return (None, log);
        }
        if cfg.log_every > 0 && epoch % cfg.log_every == 0 {
            log.push(LogRow {
                restart,
                epoch,
                mse: loss,
            });
        }
        p1 *= cfg.beta1;
        p2 *= cfg.beta2;
        let lr = cfg.learning_rate * (1.0 - p2).sqrt() / (1.0 - p1);
        for i in 0..np {
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * grad[i];
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
            params[i] -= lr * m[i] / (v[i].sqrt() + cfg.adam_eps);
        }
        if let Some(b) = cfg.clip {
            params.iter_mut().for_each(|p| *p = p.clamp(-b, b));
        }
        net.set_params(&params);
    }

    let out = ws.forward(&net);
    let mse = out.iter().zip(ys).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / ys.len() as f64;
    log.push(LogRow {
        restart,
        epoch: cfg.epochs,
        mse,
    });
    if mse.is_finite() {
        (Some((net, mse)), log)
    } else {
        (None, log)
    }
}
