use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::piecewise::Dataset;
use crate::predictor::Predictor;
use crate::relu_net::network::Workspace;
use crate::relu_net::ReluNetwork;
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BayesConfig {
    /// Indices (into the flattened parameters) that the prior lets vary; the rest
    /// stay at zero. `None` makes every parameter active.
    pub active: Option<Vec<usize>>,
    /// Prior half-width `B`: active parameters are uniform on `[-B, B]`.
    pub bound: f64,
    pub steps: usize,
    pub burn_in: usize,
    /// Keep every `thin`-th post-burn-in state for the posterior mean.
    pub thin: usize,
    /// Initial random-walk standard deviation.
    pub proposal_scale: f64,
    /// Adapt the proposal scale during burn-in toward a 0.3 acceptance rate.
    pub tune: bool,
    pub sigma: f64,
    pub seed: u64,
}

impl Default for BayesConfig {
    fn default() -> Self {
        Self {
            active: None,
            bound: 2.0,
            steps: 100_000,
            burn_in: 20_000,
            thin: 10,
            proposal_scale: 0.05,
            tune: true,
            sigma: 0.1,
            seed: 0,
        }
    }
}

impl BayesConfig {
    fn validate(&self, param_count: usize) -> Result<()> {
        if !(self.bound > 0.0 && self.bound.is_finite()) {
            return Err(Error::Config("prior bound must be positive".into()));
        }
        if self.steps <= self.burn_in {
            return Err(Error::Config("chain length must exceed burn-in".into()));
        }
        if self.thin == 0 {
            return Err(Error::Config("thin must be at least 1".into()));
        }
        if !(self.proposal_scale > 0.0) || !(self.sigma > 0.0) {
            return Err(Error::Config("proposal scale and sigma must be positive".into()));
        }
        if let Some(active) = &self.active {
            if active.is_empty() || active.len() > param_count || active.iter().any(|&i| i >= param_count) {
                return Err(Error::Config(format!(
                    "active set must be nonempty with indices below {param_count}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub step: usize,
    pub log_density: f64,
    pub accepted: bool,
}

/// Random-walk Metropolis output.
#[derive(Debug, Clone)]
pub struct Chain {
    /// Stored post-burn-in states, each of the sampler's dimension.
    pub samples: Vec<Vec<f64>>,
    /// Acceptance rate over the post-burn-in steps.
    pub acceptance_rate: f64,
    pub final_scale: f64,
    pub trace: Vec<TraceRow>,
}

/// Gaussian random-walk Metropolis on `[-bound, bound]^k` for an unnormalised
/// log-density; proposals outside the box are rejected.
pub fn metropolis(
    log_density: impl Fn(&[f64]) -> f64,
    init: Vec<f64>,
    bound: f64,
    cfg: &BayesConfig,
) -> Result<Chain> {
    if init.iter().any(|v| v.abs() > bound) {
        return Err(Error::input("initial state lies outside the prior box"));
    }
    let mut rng = rng::stream(cfg.seed);
    let mut state = init;
    let mut current = log_density(&state);
    if !current.is_finite() {
        return Err(Error::Numeric("log-density is not finite at the initial state".into()));
    }
    let mut scale = cfg.proposal_scale;
    let mut proposal = state.clone();
    let mut samples = Vec::with_capacity((cfg.steps - cfg.burn_in) / cfg.thin + 1);
    let mut trace = Vec::with_capacity(cfg.steps);
    let (mut window_acc, mut window) = (0usize, 0usize);
    let mut accepted_after = 0usize;
    let mut adapt_round = 0usize;

    for step in 0..cfg.steps {
        for (p, s) in proposal.iter_mut().zip(&state) {
            *p = s + scale * rng.sample::<f64, _>(StandardNormal);
        }
        let u: f64 = rng.random();
        let mut accepted = false;
        if proposal.iter().all(|v| v.abs() <= bound) {
            let cand = log_density(&proposal);
            if cand.is_finite() && u.ln() < cand - current {
                std::mem::swap(&mut state, &mut proposal);
                current = cand;
                accepted = true;
            }
        }
        trace.push(TraceRow {
            step,
            log_density: current,
            accepted,
        });
        if step < cfg.burn_in {
            window += 1;
            window_acc += accepted as usize;
            if cfg.tune && window == 100 {
                adapt_round += 1;
                let rate = window_acc as f64 / 100.0;
                scale *= ((rate - 0.3) / (adapt_round as f64).sqrt()).exp();
                scale = scale.min(2.0 * bound);
                window = 0;
                window_acc = 0;
            }
        } else {
            accepted_after += accepted as usize;
            if (step - cfg.burn_in) % cfg.thin == 0 {
                samples.push(state.clone());
            }
        }
    }
    Ok(Chain {
        samples,
        acceptance_rate: accepted_after as f64 / (cfg.steps - cfg.burn_in) as f64,
        final_scale: scale,
        trace,
    })
}

/// Posterior-mean predictor: the average of the network over stored chain states.
#[derive(Debug, Clone)]
pub struct BayesModel {
    template: ReluNetwork,
    samples: Vec<ReluNetwork>,
    pub acceptance_rate: f64,
    pub warning: Option<String>,
    pub trace: Vec<TraceRow>,
}

impl BayesModel {
    pub fn samples(&self) -> &[ReluNetwork] {
        &self.samples
    }

    pub fn sample_count(&self) -> usize {
        self.samples.len()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.template.shape()
    }

    pub fn write_trace(&self, path: &Path) -> Result<()> {
        let mut out = String::from("step,log_likelihood,accepted\n");
        for r in &self.trace {
            out.push_str(&format!("{},{},{}\n", r.step, r.log_density, r.accepted as u8));
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

impl Predictor for BayesModel {
    fn predict(&self, x: &[f64]) -> f64 {
        self.samples.iter().map(|n| n.predict(x)).sum::<f64>() / self.samples.len() as f64
    }
}

fn expand(template: &ReluNetwork, active: &[usize], theta: &[f64]) -> ReluNetwork {
    let mut p = vec![0.0; template.param_count()];
    for (i, v) in active.iter().zip(theta) {
        p[*i] = *v;
    }
    let mut net = template.clone();
    net.set_params(&p);
    net
}

/// Posterior mean under the uniform prior on `[-B,B]` for the active parameters and
/// the likelihood `exp(-sum_i (Y_i - f(X_i))^2 / sigma^2)`.
pub fn bayes_fit(shape: &[usize], cfg: &BayesConfig, data: &Dataset) -> Result<BayesModel> {
    let template = ReluNetwork::dense_zeros(shape)?;
    if template.input_dim() != data.dim() {
        return Err(Error::input("shape input width does not match data dimension"));
    }
    cfg.validate(template.param_count())?;
    let active: Vec<usize> = cfg
        .active
        .clone()
        .unwrap_or_else(|| (0..template.param_count()).collect());

    let ys = data.ys();
    let inv_s2 = 1.0 / (cfg.sigma * cfg.sigma);
    let ws = std::cell::RefCell::new(Workspace::new(&template, data.xs()));
    let log_lik = |theta: &[f64]| {
        let net = expand(&template, &active, theta);
        let mut ws = ws.borrow_mut();
        let out = ws.forward(&net);
        -out.iter().zip(ys).map(|(f, y)| (y - f) * (y - f)).sum::<f64>() * inv_s2
    };
    let chain = metropolis(log_lik, vec![0.0; active.len()], cfg.bound, cfg)?;
    let warning = (chain.acceptance_rate == 0.0)
        .then(|| "no proposal was accepted after burn-in; the chain did not mix".to_string());
    if let Some(w) = &warning {
        log::warn!("{w}");
    }
    let samples = chain
        .samples
        .iter()
        .map(|t| expand(&template, &active, t))
        .collect();
    Ok(BayesModel {
        template,
        samples,
        acceptance_rate: chain.acceptance_rate,
        warning,
        trace: chain.trace,
    })
}
