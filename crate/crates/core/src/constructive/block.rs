use crate::error::{Error, Result};
use crate::relu_net::{Layer, NetworkStats, ReluNetwork};

/// Multi-output ReLU network under construction, carrying the statistics the
/// combinators predict for it.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    layers: Vec<Layer>,
    claimed: NetworkStats,
}

fn layer_stats(layers: &[Layer]) -> NetworkStats {
    NetworkStats {
        layers: layers.len(),
        nonzeros: layers.iter().map(Layer::nonzeros).sum(),
        max_abs: layers.iter().map(Layer::max_abs).fold(0.0, f64::max),
    }
}

impl Block {
    pub(crate) fn from_parts(layers: Vec<Layer>, claimed: NetworkStats) -> Self {
        Self { layers, claimed }
    }

    /// Block whose claimed statistics are read off its layers.
    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        crate::relu_net::network::check_chain(&layers)?;
        let claimed = layer_stats(&layers);
        Ok(Self { layers, claimed })
    }

    pub fn affine(rows: usize, cols: usize, weights: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        Self::from_layers(vec![Layer::new(rows, cols, weights, bias)?])
    }

    pub fn from_network(net: &ReluNetwork) -> Result<Self> {
        if net.relu_on_output {
            return Err(Error::input("subnetworks must have an affine output layer"));
        }
        Ok(Self {
            layers: net.layers().to_vec(),
            claimed: net.stats(),
        })
    }

    /// `x -> x` on `R^k` realised with `depth` layers via `t = relu(t) - relu(-t)`.
    pub fn identity(k: usize, depth: usize) -> Self {
        assert!(k >= 1 && depth >= 1);
        let eye = |n: usize| {
            let mut w = vec![0.0; n * n];
            (0..n).for_each(|i| w[i * n + i] = 1.0);
            w
        };
        if depth == 1 {
            let layers = vec![Layer::new(k, k, eye(k), vec![0.0; k]).unwrap()];
            return Self::from_parts(
                layers,
                NetworkStats {
                    layers: 1,
                    nonzeros: k,
                    max_abs: 1.0,
                },
            );
        }
        let mut split = vec![0.0; 2 * k * k];
        let mut join = vec![0.0; 2 * k * k];
        for i in 0..k {
            split[i * k + i] = 1.0;
            split[(k + i) * k + i] = -1.0;
            join[i * 2 * k + i] = 1.0;
            join[i * 2 * k + k + i] = -1.0;
        }
        let mut layers = vec![Layer::new(2 * k, k, split, vec![0.0; 2 * k]).unwrap()];
        for _ in 0..depth - 2 {
            layers.push(Layer::new(2 * k, 2 * k, eye(2 * k), vec![0.0; 2 * k]).unwrap());
        }
        layers.push(Layer::new(k, 2 * k, join, vec![0.0; k]).unwrap());
        Self::from_parts(
            layers,
            NetworkStats {
                layers: depth,
                nonzeros: 2 * k * depth,
                max_abs: 1.0,
            },
        )
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn claimed(&self) -> NetworkStats {
        self.claimed
    }

    pub fn measured(&self) -> NetworkStats {
        layer_stats(&self.layers)
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].cols
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().unwrap().rows
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        crate::relu_net::network::forward_layers(&self.layers, false, x)
    }

    pub fn into_network(self) -> Result<ReluNetwork> {
        ReluNetwork::new(self.layers, false)
    }

    /// Feeds the (signed) outputs of `self` into `next`. The last layer of `self`
    /// is doubled into `[W; -W]` so its outputs survive the ReLU, and the first
    /// layer of `next` reads them back as `[V, -V]`. Depths add.
    pub fn compose(self, next: Block) -> Result<Block> {
        if self.out_dim() != next.in_dim() {
            return Err(Error::input(format!(
                "cannot feed {} outputs into a block expecting {}",
                self.out_dim(),
                next.in_dim()
            )));
        }
        let mut a = self.layers;
        let mut b = next.layers;
        let a_last = a.pop().unwrap();
        let b_first = b.remove(0);
        let extra_a = a_last.nonzeros();
        let extra_b = b_first.weight_nonzeros();

        let k = a_last.rows;
        let mut w = a_last.weights.clone();
        w.extend(a_last.weights.iter().map(|v| -v));
        let mut bias = a_last.bias.clone();
        bias.extend(a_last.bias.iter().map(|v| -v));
        let doubled = Layer::new(2 * k, a_last.cols, w, bias)?;

        let mut w2 = Vec::with_capacity(b_first.rows * 2 * k);
        for row in b_first.weights.chunks_exact(k) {
            w2.extend_from_slice(row);
            w2.extend(row.iter().map(|v| -v));
        }
        let read = Layer::new(b_first.rows, 2 * k, w2, b_first.bias.clone())?;

        a.push(doubled);
        a.push(read);
        a.extend(b);
        let claimed = NetworkStats {
            layers: self.claimed.layers + next.claimed.layers,
            nonzeros: self.claimed.nonzeros + extra_a + next.claimed.nonzeros + extra_b,
            max_abs: self.claimed.max_abs.max(next.claimed.max_abs),
        };
        Ok(Block::from_parts(a, claimed))
    }

    /// Applies the affine map `y -> W y + b` to the outputs by folding it into the
    /// last layer. Depth is unchanged.
    pub fn then_affine(self, rows: usize, weights: &[f64], bias: &[f64]) -> Result<Block> {
        let k = self.out_dim();
        if weights.len() != rows * k || bias.len() != rows {
            return Err(Error::input("affine map does not match block outputs"));
        }
        let mut layers = self.layers;
        let last = layers.pop().unwrap();
        let mut w = vec![0.0; rows * last.cols];
        let mut b = bias.to_vec();
        for r in 0..rows {
            for j in 0..k {
                let c = weights[r * k + j];
                if c == 0.0 {
                    continue;
                }
                b[r] += c * last.bias[j];
                for col in 0..last.cols {
                    w[r * last.cols + col] += c * last.w(j, col);
                }
            }
        }
        let merged = Layer::new(rows, last.cols, w, b)?;
        let rest = layer_stats(&layers);
        let claimed = NetworkStats {
            layers: self.claimed.layers,
            nonzeros: self.claimed.nonzeros - last.nonzeros() + merged.nonzeros(),
            max_abs: if layers.is_empty() {
                merged.max_abs()
            } else {
                rest.max_abs.max(merged.max_abs())
            },
        };
        layers.push(merged);
        Ok(Block::from_parts(layers, claimed))
    }

    /// Extends the block to `depth` layers by appending an identity block.
    pub fn pad_to(self, depth: usize) -> Result<Block> {
        match depth.checked_sub(self.depth()) {
            None => Err(Error::input("cannot pad a block to a smaller depth")),
            Some(0) => Ok(self),
            Some(extra) => {
                let k = self.out_dim();
                self.compose(Block::identity(k, extra))
            }
        }
    }
}

/// Runs blocks side by side on a shared input of dimension `in_dim`; block `i`
/// reads the input coordinates `inputs[i]` (0-based) and the outputs are
/// concatenated. Shallower blocks are padded with identity blocks first.
pub fn parallel(parts: Vec<(Block, Vec<usize>)>, in_dim: usize) -> Result<Block> {
    if parts.is_empty() {
        return Err(Error::input("parallel needs at least one block"));
    }
    for (b, sel) in &parts {
        if sel.len() != b.in_dim() || sel.iter().any(|&i| i >= in_dim) {
            return Err(Error::input("input selection does not match block"));
        }
    }
    let depth = parts.iter().map(|(b, _)| b.depth()).max().unwrap();
    let parts = parts
        .into_iter()
        .map(|(b, sel)| b.pad_to(depth).map(|b| (b, sel)))
        .collect::<Result<Vec<_>>>()?;

    let mut layers = Vec::with_capacity(depth);
    for l in 0..depth {
        let rows: usize = parts.iter().map(|(b, _)| b.layers[l].rows).sum();
        let cols: usize = if l == 0 {
            in_dim
        } else {
            parts.iter().map(|(b, _)| b.layers[l].cols).sum()
        };
        let mut w = vec![0.0; rows * cols];
        let mut bias = Vec::with_capacity(rows);
        let (mut r0, mut c0) = (0, 0);
        for (b, sel) in &parts {
            let layer = &b.layers[l];
            for r in 0..layer.rows {
                for c in 0..layer.cols {
                    let col = if l == 0 { sel[c] } else { c0 + c };
                    w[(r0 + r) * cols + col] += layer.w(r, c);
                }
            }
            bias.extend_from_slice(&layer.bias);
            r0 += layer.rows;
            c0 += layer.cols;
        }
        layers.push(Layer::new(rows, cols, w, bias)?);
    }
    let claimed = NetworkStats {
        layers: depth,
        nonzeros: parts.iter().map(|(b, _)| b.claimed.nonzeros).sum(),
        max_abs: parts.iter().map(|(b, _)| b.claimed.max_abs).fold(0.0, f64::max),
    };
    Ok(Block::from_parts(layers, claimed))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp() -> Block {
        Block::from_layers(vec![
            Layer::new(2, 1, vec![1.0, 1.0], vec![0.0, -1.0]).unwrap(),
            Layer::new(1, 2, vec![1.0, -1.0], vec![0.0]).unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn identity_passes_signed_values() {
        for depth in 1..5 {
            let id = Block::identity(3, depth);
            assert_eq!(id.eval(&[-0.4, 2.0, 0.0]), vec![-0.4, 2.0, 0.0]);
            assert_eq!(id.claimed(), id.measured());
            assert_eq!(id.depth(), depth);
        }
    }

    #[test]
    fn compose_keeps_negative_outputs() {
        let neg = Block::affine(1, 1, vec![-2.0], vec![0.5]).unwrap();
        let c = neg.compose(ramp()).unwrap();
        for x in [-1.0, -0.2, 0.0, 0.3, 0.9] {
            let t: f64 = -2.0 * x + 0.5;
            assert!((c.eval(&[x])[0] - t.clamp(0.0, 1.0)).abs() < 1e-15);
        }
        assert_eq!(c.claimed(), c.measured());
        assert_eq!(c.depth(), 3);
    }

    #[test]
    fn parallel_pads_and_routes() {
        let a = ramp();
        let b = Block::affine(1, 2, vec![1.0, -1.0], vec![0.0]).unwrap();
        let p = parallel(vec![(a, vec![1]), (b, vec![0, 2])], 3).unwrap();
        let out = p.eval(&[0.9, 0.4, 0.2]);
        assert!((out[0] - 0.4).abs() < 1e-15);
        assert!((out[1] - 0.7).abs() < 1e-15);
        assert_eq!(p.claimed(), p.measured());
    }

    #[test]
    fn then_affine_folds() {
        let p = parallel(vec![(ramp(), vec![0]), (ramp(), vec![1])], 2).unwrap();
        let s = p.then_affine(1, &[1.0, 1.0], &[0.5]).unwrap();
        assert!((s.eval(&[0.25, 2.0])[0] - 1.75).abs() < 1e-15);
        assert_eq!(s.claimed(), s.measured());
    }
}
