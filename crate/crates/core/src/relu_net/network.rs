use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::predictor::Predictor;

/// Affine map `x -> W x + b` with `W` stored row-major (`rows x cols`).
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub rows: usize,
    pub cols: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Layer {
    pub fn new(rows: usize, cols: usize, weights: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::input("layer dimensions must be positive"));
        }
        if weights.len() != rows * cols || bias.len() != rows {
            return Err(Error::input(format!(
                "layer {rows}x{cols} needs {} weights and {rows} biases, got {} and {}",
                rows * cols,
                weights.len(),
                bias.len()
            )));
        }
        Ok(Self {
            rows,
            cols,
            weights,
            bias,
        })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            weights: vec![0.0; rows * cols],
            bias: vec![0.0; rows],
        }
    }

    #[inline]
    pub fn w(&self, r: usize, c: usize) -> f64 {
        self.weights[r * self.cols + c]
    }

    #[inline]
    pub fn w_mut(&mut self, r: usize, c: usize) -> &mut f64 {
        &mut self.weights[r * self.cols + c]
    }

    pub fn apply(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.weights.chunks_exact(self.cols).zip(&self.bias).map(|(row, b)| {
            b + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
        }));
    }

    pub fn nonzeros(&self) -> usize {
        self.weights.iter().chain(&self.bias).filter(|v| **v != 0.0).count()
    }

    pub fn weight_nonzeros(&self) -> usize {
        self.weights.iter().filter(|v| **v != 0.0).count()
    }

    pub fn max_abs(&self) -> f64 {
        self.weights
            .iter()
            .chain(&self.bias)
            .fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Architecture statistics: depth `|Theta|`, nonzero count `||Theta||_0` and largest
/// absolute entry `||Theta||_inf`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetworkStats {
    pub layers: usize,
    pub nonzeros: usize,
    pub max_abs: f64,
}

/// `G[Theta](x)`: affine maps with coordinatewise ReLU between them.
///
/// The final affine map is not rectified unless `relu_on_output` is set, so the
/// network can emit negative values.
#[derive(Debug, Clone, PartialEq)]
pub struct ReluNetwork {
    layers: Vec<Layer>,
    pub relu_on_output: bool,
}

impl ReluNetwork {
    pub fn new(layers: Vec<Layer>, relu_on_output: bool) -> Result<Self> {
        check_chain(&layers)?;
        let out = layers.last().unwrap().rows;
        if out != 1 {
            return Err(Error::input(format!("network output dimension must be 1, got {out}")));
        }
        Ok(Self {
            layers,
            relu_on_output,
        })
    }

    /// All-zero dense network with the given layer widths (input first, then 1).
    pub fn dense_zeros(shape: &[usize]) -> Result<Self> {
        if shape.len() < 2 {
            return Err(Error::input("a shape needs an input and an output width"));
        }
        let layers = shape
            .windows(2)
            .map(|w| Layer::zeros(w[1], w[0]))
            .collect();
        Self::new(layers, false)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].cols
    }

    /// Layer widths, input first.
    pub fn shape(&self) -> Vec<usize> {
        std::iter::once(self.input_dim())
            .chain(self.layers.iter().map(|l| l.rows))
            .collect()
    }

    pub fn forward(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.input_dim() {
            return Err(Error::input(format!(
                "input has dimension {}, network expects {}",
                x.len(),
                self.input_dim()
            )));
        }
        Ok(self.forward_unchecked(x))
    }

    fn forward_unchecked(&self, x: &[f64]) -> f64 {
        forward_layers(&self.layers, self.relu_on_output, x)[0]
    }

    pub fn stats(&self) -> NetworkStats {
        NetworkStats {
            layers: self.layers.len(),
            nonzeros: self.layers.iter().map(Layer::nonzeros).sum(),
            max_abs: self.layers.iter().map(Layer::max_abs).fold(0.0, f64::max),
        }
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Parameters flattened layer by layer, weights (row-major) before biases.
    pub fn params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            p.extend_from_slice(&l.weights);
            p.extend_from_slice(&l.bias);
        }
        p
    }

    pub fn set_params(&mut self, params: &[f64]) {
        assert_eq!(params.len(), self.param_count(), "parameter count mismatch");
        let mut off = 0;
        for l in &mut self.layers {
            let nw = l.weights.len();
            l.weights.copy_from_slice(&params[off..off + nw]);
            off += nw;
            let nb = l.bias.len();
            l.bias.copy_from_slice(&params[off..off + nb]);
            off += nb;
        }
    }

    pub fn forward_batch(&self, xs: &[f64]) -> Vec<f64> {
        xs.chunks_exact(self.input_dim())
            .map(|x| self.forward_unchecked(x))
            .collect()
    }

    /// Mean squared error over `(xs, ys)` and its gradient with respect to
    /// [`ReluNetwork::params`]. `xs` is row-major.
    pub fn loss_gradient(&self, xs: &[f64], ys: &[f64]) -> (f64, Vec<f64>) {
        let mut ws = Workspace::new(self, xs);
        let mut grad = vec![0.0; self.param_count()];
        let loss = ws.loss_gradient(self, ys, &mut grad);
        (loss, grad)
    }

    /// Smallest `|pre-activation|` over all rectified units at `x`.
    pub fn min_abs_preactivation(&self, x: &[f64]) -> f64 {
        let mut cur = x.to_vec();
        let mut next = Vec::new();
        let mut m = f64::INFINITY;
        let last = self.layers.len() - 1;
        for (i, l) in self.layers.iter().enumerate() {
            l.apply(&cur, &mut next);
            if i < last || self.relu_on_output {
                for v in next.iter_mut() {
                    m = m.min(v.abs());
                    *v = v.max(0.0);
                }
            }
            std::mem::swap(&mut cur, &mut next);
        }
        m
    }

    /// Interval enclosure of the output over the box `[lo, hi]^D`.
    pub fn output_bounds(&self, lo: f64, hi: f64) -> (f64, f64) {
        let n = self.input_dim();
        let (l, h) = interval_forward(&self.layers, self.relu_on_output, vec![lo; n], vec![hi; n]);
        (l[0], h[0])
    }

    pub fn to_doc(&self) -> NetworkDoc {
        NetworkDoc {
            layers: self
                .layers
                .iter()
                .map(|l| LayerDoc {
                    rows: l.rows,
                    cols: l.cols,
                    weights: l.weights.clone(),
                    bias: l.bias.clone(),
                })
                .collect(),
            relu_on_output: self.relu_on_output,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_doc()).expect("network serializes")
    }

    pub fn from_json(src: &str) -> Result<Self> {
        let doc: NetworkDoc = serde_json::from_str(src)?;
        doc.try_into()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }
}

impl Predictor for ReluNetwork {
    fn predict(&self, x: &[f64]) -> f64 {
        self.forward_unchecked(x)
    }
}

pub(crate) fn check_chain(layers: &[Layer]) -> Result<()> {
    if layers.is_empty() {
        return Err(Error::input("a network needs at least one layer"));
    }
    for (i, l) in layers.iter().enumerate() {
        if l.weights.len() != l.rows * l.cols || l.bias.len() != l.rows {
            return Err(Error::input(format!("layer {i} has inconsistent storage")));
        }
    }
    for (i, w) in layers.windows(2).enumerate() {
        if w[1].cols != w[0].rows {
            return Err(Error::input(format!(
                "layer {} outputs {} values but layer {} expects {}",
                i,
                w[0].rows,
                i + 1,
                w[1].cols
            )));
        }
    }
    Ok(())
}

pub(crate) fn forward_layers(layers: &[Layer], relu_on_output: bool, x: &[f64]) -> Vec<f64> {
    let mut cur = x.to_vec();
    let mut next = Vec::new();
    let last = layers.len() - 1;
    for (i, l) in layers.iter().enumerate() {
        l.apply(&cur, &mut next);
        if i < last || relu_on_output {
            next.iter_mut().for_each(|v| *v = v.max(0.0));
        }
        std::mem::swap(&mut cur, &mut next);
    }
    cur
}

pub(crate) fn interval_forward(
    layers: &[Layer],
    relu_on_output: bool,
    mut lo: Vec<f64>,
    mut hi: Vec<f64>,
) -> (Vec<f64>, Vec<f64>) {
    let last = layers.len() - 1;
    for (i, l) in layers.iter().enumerate() {
        let mut nlo = Vec::with_capacity(l.rows);
        let mut nhi = Vec::with_capacity(l.rows);
        for (row, b) in l.weights.chunks_exact(l.cols).zip(&l.bias) {
            let (mut a, mut z) = (*b, *b);
            for ((w, xl), xh) in row.iter().zip(&lo).zip(&hi) {
                if *w >= 0.0 {
                    a += w * xl;
                    z += w * xh;
                } else {
                    a += w * xh;
                    z += w * xl;
                }
            }
            if i < last || relu_on_output {
                a = a.max(0.0);
                z = z.max(0.0);
            }
            nlo.push(a);
            nhi.push(z);
        }
        lo = nlo;
        hi = nhi;
    }
    (lo, hi)
}

/// Free-function form of [`ReluNetwork::forward`].
pub fn forward(net: &ReluNetwork, x: &[f64]) -> Result<f64> {
    net.forward(x)
}

/// Free-function form of [`ReluNetwork::stats`].
pub fn network_stats(net: &ReluNetwork) -> NetworkStats {
    net.stats()
}

/// Sup-norm bound over `[-1,1]^D` for a network of `depth` layers, widths at most
/// `max_width` and entries bounded by `b` in absolute value: iterates
/// `|x^(l+1)|_inf <= max_width * b * |x^(l)|_inf + b` from `|x|_inf <= 1`.
pub fn sup_norm_bound(max_width: usize, b: f64, depth: usize) -> f64 {
    (0..depth).fold(1.0, |acc, _| max_width as f64 * b * acc + b)
}

/// Batched activations in unit-major layout (`act[l][unit * n + sample]`).
pub(crate) struct Workspace {
    n: usize,
    acts: Vec<Vec<f64>>,
    deltas: Vec<Vec<f64>>,
}

impl Workspace {
    pub(crate) fn new(net: &ReluNetwork, xs: &[f64]) -> Self {
        let dim = net.input_dim();
        let n = xs.len() / dim;
        let mut input = vec![0.0; dim * n];
        for (i, x) in xs.chunks_exact(dim).enumerate() {
            for (k, v) in x.iter().enumerate() {
                input[k * n + i] = *v;
            }
        }
        let mut acts = vec![input];
        acts.extend(net.layers.iter().map(|l| vec![0.0; l.rows * n]));
        let deltas = net.layers.iter().map(|l| vec![0.0; l.rows * n]).collect();
        Self { n, acts, deltas }
    }

    pub(crate) fn forward(&mut self, net: &ReluNetwork) -> &[f64] {
        let n = self.n;
        let last = net.layers.len() - 1;
        for (li, l) in net.layers.iter().enumerate() {
            let (prev, rest) = self.acts.split_at_mut(li + 1);
            let input = &prev[li];
            let out = &mut rest[0];
            for j in 0..l.rows {
                let o = &mut out[j * n..(j + 1) * n];
                o.fill(l.bias[j]);
                for k in 0..l.cols {
                    let w = l.w(j, k);
                    if w != 0.0 {
                        let a = &input[k * n..(k + 1) * n];
                        for (oi, ai) in o.iter_mut().zip(a) {
                            *oi += w * ai;
                        }
                    }
                }
                if li < last || net.relu_on_output {
                    o.iter_mut().for_each(|v| *v = v.max(0.0));
                }
            }
        }
        self.acts.last().unwrap()
    }

    /// Forward then backward pass; writes the gradient of the mean squared error into
    /// `grad` (same layout as `params`) and returns the loss.
    pub(crate) fn loss_gradient(&mut self, net: &ReluNetwork, ys: &[f64], grad: &mut [f64]) -> f64 {
        let n = self.n;
        self.forward(net);
        let out = self.acts.last().unwrap();
        let last = net.layers.len() - 1;
        let scale = 2.0 / n as f64;
        let mut loss = 0.0;
        {
            let d = &mut self.deltas[last];
            for i in 0..n {
                let r = out[i] - ys[i];
                loss += r * r;
                d[i] = if net.relu_on_output && out[i] <= 0.0 {
                    0.0
                } else {
                    scale * r
                };
            }
        }
        loss /= n as f64;

        let mut offsets = Vec::with_capacity(net.layers.len());
        let mut off = 0;
        for l in &net.layers {
            offsets.push(off);
            off += l.weights.len() + l.bias.len();
        }

        for li in (0..net.layers.len()).rev() {
            let l = &net.layers[li];
            let input = &self.acts[li];
            let base = offsets[li];
            {
                let delta = &self.deltas[li];
                for j in 0..l.rows {
                    let dj = &delta[j * n..(j + 1) * n];
                    for k in 0..l.cols {
                        let a = &input[k * n..(k + 1) * n];
                        grad[base + j * l.cols + k] = dj.iter().zip(a).map(|(p, q)| p * q).sum();
                    }
                    grad[base + l.weights.len() + j] = dj.iter().sum();
                }
            }
            if li > 0 {
                let (lower, upper) = self.deltas.split_at_mut(li);
                let delta = &upper[0];
                let prev = &mut lower[li - 1];
                prev.fill(0.0);
                for j in 0..l.rows {
                    let dj = &delta[j * n..(j + 1) * n];
                    for k in 0..l.cols {
                        let w = l.w(j, k);
                        if w != 0.0 {
                            let p = &mut prev[k * n..(k + 1) * n];
                            for (pi, di) in p.iter_mut().zip(dj) {
                                *pi += w * di;
                            }
                        }
                    }
                }
                let act = &input;
                for (pi, ai) in prev.iter_mut().zip(act.iter()) {
                    if *ai <= 0.0 {
                        *pi = 0.0;
                    }
                }
            }
        }
        loss
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkDoc {
    pub layers: Vec<LayerDoc>,
    pub relu_on_output: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerDoc {
    pub rows: usize,
    pub cols: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl TryFrom<NetworkDoc> for ReluNetwork {
    type Error = Error;

    fn try_from(doc: NetworkDoc) -> Result<Self> {
        let layers = doc
            .layers
            .into_iter()
            .map(|l| Layer::new(l.rows, l.cols, l.weights, l.bias))
            .collect::<Result<Vec<_>>>()?;
        ReluNetwork::new(layers, doc.relu_on_output)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn random_net(shape: &[usize], scale: f64, seed: u64) -> ReluNetwork {
        let mut net = ReluNetwork::dense_zeros(shape).unwrap();
        let mut rng = crate::rng::stream(seed);
        let p: Vec<f64> = (0..net.param_count())
            .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
            .collect();
        net.set_params(&p);
        net
    }

    #[test]
    fn identity_and_half_rectification() {
        let id = ReluNetwork::new(vec![Layer::new(1, 1, vec![1.0], vec![0.0]).unwrap()], false).unwrap();
        assert_eq!(forward(&id, &[0.7]).unwrap(), 0.7);
        let half = ReluNetwork::new(
            vec![
                Layer::new(1, 1, vec![-1.0], vec![0.0]).unwrap(),
                Layer::new(1, 1, vec![1.0], vec![0.0]).unwrap(),
            ],
            false,
        )
        .unwrap();
        assert_eq!(half.forward(&[0.5]).unwrap(), 0.0);
        assert!(half.forward(&[0.5, 0.1]).is_err());
    }

    #[test]
    fn rejects_broken_chains() {
        let a = Layer::zeros(3, 2);
        let b = Layer::zeros(1, 4);
        assert!(ReluNetwork::new(vec![a.clone(), b], false).is_err());
        assert!(ReluNetwork::new(vec![a], false).is_err());
        assert!(ReluNetwork::new(vec![], false).is_err());
        assert!(Layer::new(2, 2, vec![0.0; 3], vec![0.0; 2]).is_err());
    }

    #[test]
    fn stats_of_zero_and_experiment_shape() {
        let net = ReluNetwork::dense_zeros(&[2, 3, 3, 3, 1]).unwrap();
        let s = network_stats(&net);
        assert_eq!(s.layers, 4);
        assert_eq!(s.nonzeros, 0);
        assert_eq!(s.max_abs, 0.0);
        assert_eq!(net.param_count(), 2 * 3 + 3 + 3 * 3 + 3 + 3 * 3 + 3 + 3 + 1);
    }

    #[test]
    fn output_relu_flag() {
        let mut net = ReluNetwork::new(vec![Layer::new(1, 1, vec![-1.0], vec![0.0]).unwrap()], false).unwrap();
        assert_eq!(net.forward(&[0.3]).unwrap(), -0.3);
        net.relu_on_output = true;
        assert_eq!(net.forward(&[0.3]).unwrap(), 0.0);
    }

    #[test]
    fn json_roundtrip() {
        let net = random_net(&[2, 3, 1], 1.0, 4);
        let back = ReluNetwork::from_json(&net.to_json()).unwrap();
        assert_eq!(back, net);
    }

    #[test]
    fn batched_forward_matches_pointwise() {
        let net = random_net(&[3, 5, 4, 1], 0.8, 9);
        let xs: Vec<f64> = (0..30).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut ws = Workspace::new(&net, &xs);
        let batched = ws.forward(&net).to_vec();
        for (i, x) in xs.chunks_exact(3).enumerate() {
            assert!((batched[i] - net.forward(x).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut checked = 0;
        let mut seed = 0;
        while checked < 100 {
            seed += 1;
            let net = random_net(&[3, 4, 4, 1], 0.7, seed);
            let mut rng = crate::rng::stream(seed + 1_000);
            let x: Vec<f64> = (0..3).map(|_| rng.random::<f64>()).collect();
            let y: f64 = rng.sample(StandardNormal);
            if net.min_abs_preactivation(&x) < 1e-3 {
                continue;
            }
            let (_, g) = net.loss_gradient(&x, &[y]);
            let p = net.params();
            let h = 1e-5;
            let mut fd = vec![0.0; p.len()];
            let mut probe = net.clone();
            for i in 0..p.len() {
                let mut q = p.clone();
                q[i] += h;
                probe.set_params(&q);
                let up = (probe.forward(&x).unwrap() - y).powi(2);
                q[i] -= 2.0 * h;
                probe.set_params(&q);
                let down = (probe.forward(&x).unwrap() - y).powi(2);
                fd[i] = (up - down) / (2.0 * h);
            }
            let diff: f64 = g.iter().zip(&fd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let scale = g.iter().map(|a| a * a).sum::<f64>().sqrt().max(1e-12);
            assert!(diff / scale <= 1e-4, "relative error {} at seed {seed}", diff / scale);
            checked += 1;
        }
    }

    #[test]
    fn interval_bounds_enclose_outputs() {
        let net = random_net(&[2, 6, 6, 1], 1.0, 21);
        let (lo, hi) = net.output_bounds(0.0, 1.0);
        for i in 0..=20 {
            for j in 0..=20 {
                let v = net.forward(&[i as f64 / 20.0, j as f64 / 20.0]).unwrap();
                assert!(lo <= v && v <= hi);
            }
        }
    }

    proptest! {
        #[test]
        fn positively_homogeneous_without_bias(seed in 0u64..500, c in 0.01f64..10.0, x in prop::array::uniform2(-1.0f64..1.0)) {
            let mut net = random_net(&[2, 5, 1], 1.0, seed);
            for l in net.layers_mut() {
                l.bias.fill(0.0);
            }
            let a = net.forward(&[c * x[0], c * x[1]]).unwrap();
            let b = c * net.forward(&x).unwrap();
            prop_assert!((a - b).abs() <= 1e-9 * (1.0 + b.abs()));
        }

        #[test]
        fn sup_norm_within_layerwise_bound(seed in 0u64..200, b in 0.1f64..2.0, width in 1usize..5, depth in 1usize..4) {
            let mut shape = vec![2];
            shape.extend(std::iter::repeat(width).take(depth - 1));
            shape.push(1);
            let mut net = random_net(&shape, 1.0, seed);
            let p: Vec<f64> = net.params().iter().map(|v| v.clamp(-b, b)).collect();
            net.set_params(&p);
            let max_width = shape.iter().copied().max().unwrap();
            let bound = sup_norm_bound(max_width, b, depth);
            let mut rng = crate::rng::stream(seed);
            for _ in 0..10_000 {
                let x = [rng.random::<f64>(), rng.random::<f64>()];
                prop_assert!(net.forward(&x).unwrap().abs() <= bound);
            }
        }
    }
}
