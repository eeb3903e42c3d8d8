use super::block::{parallel, Block};
use crate::error::{Error, Result};
use crate::piecewise::Side;
use crate::relu_net::{Layer, NetworkStats, ReluNetwork};

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps < 0.5 {
        Ok(())
    } else {
        Err(Error::input(format!("tolerance must lie in (0, 1/2), got {eps}")))
    }
}

/// Number of sawtooth compositions so that the squaring error `2^(-2m-2)` is at
/// most `eps / 4`.
pub fn squaring_depth(eps: f64) -> usize {
    let m = ((1.0 / eps).log2() - 2.0) / 2.0;
    (m.ceil().max(0.0) as usize) + 1
}

/// Statistics of [`mult_block`] for `m` sawtooth layers.
pub fn mult_stats(m: usize) -> NetworkStats {
    NetworkStats {
        layers: m + 2,
        nonzeros: if m == 1 { 41 } else { 45 * m - 4 },
        max_abs: if m == 1 { 2.0 } else { 4.0 },
    }
}

/// `Theta_+`: `x -> sum_d x_d`.
pub fn sum_block(dp: usize) -> Result<Block> {
    if dp == 0 {
        return Err(Error::input("summation needs at least one input"));
    }
    Block::affine(1, dp, vec![1.0; dp], vec![0.0])
}

pub fn build_sum_net(dp: usize) -> Result<ReluNetwork> {
    sum_block(dp)?.into_network()
}

/// Pairwise multiplication on `[-1,1]^2` through
/// `xy = 2 (|x+y|/2)^2 - |x|^2/2 - |y|^2/2`, each square computed by the
/// sawtooth interpolant `f_m(a) = a - sum_{s<=m} g_s(a) / 4^s`.
pub fn mult_block(eps: f64) -> Result<Block> {
    check_eps(eps)?;
    let m = squaring_depth(eps);
    let mut layers = Vec::with_capacity(m + 2);

    // |x|, |y| and |x+y|/2 as positive/negative parts
    layers.push(Layer::new(
        6,
        2,
        vec![1.0, 0.0, -1.0, 0.0, 0.0, 1.0, 0.0, -1.0, 0.5, 0.5, -0.5, -0.5],
        vec![0.0; 6],
    )?);

    let tooth_bias = [0.0, -0.5, -1.0];
    let mut l = Layer::zeros(9, 6);
    for ch in 0..3 {
        for u in 0..3 {
            let r = 3 * ch + u;
            *l.w_mut(r, 2 * ch) = 1.0;
            *l.w_mut(r, 2 * ch + 1) = 1.0;
            l.bias[r] = tooth_bias[u];
        }
    }
    layers.push(l);

    // g(v) = 2 relu(v) - 4 relu(v - 1/2) + 2 relu(v - 1)
    let g = [2.0, -4.0, 2.0];
    for s in 2..=m {
        let cols = if s == 2 { 9 } else { 12 };
        let mut l = Layer::zeros(12, cols);
        for ch in 0..3 {
            for u in 0..3 {
                let r = 3 * ch + u;
                for (k, gk) in g.iter().enumerate() {
                    *l.w_mut(r, 3 * ch + k) = *gk;
                }
                l.bias[r] = tooth_bias[u];
            }
            let acc = 9 + ch;
            if s == 2 {
                *l.w_mut(acc, 3 * ch) = 0.5;
                *l.w_mut(acc, 3 * ch + 1) = 1.0;
                *l.w_mut(acc, 3 * ch + 2) = -0.5;
            } else {
                let scale = 4f64.powi(s as i32 - 1);
                *l.w_mut(acc, 9 + ch) = 1.0;
                for (k, gk) in g.iter().enumerate() {
                    *l.w_mut(acc, 3 * ch + k) = -gk / scale;
                }
            }
        }
        layers.push(l);
    }

    let coef = [-0.5, -0.5, 2.0];
    let cols = if m == 1 { 9 } else { 12 };
    let mut out = Layer::zeros(1, cols);
    for ch in 0..3 {
        if m == 1 {
            *out.w_mut(0, 3 * ch) = coef[ch] * 0.5;
            *out.w_mut(0, 3 * ch + 1) = coef[ch];
            *out.w_mut(0, 3 * ch + 2) = -coef[ch] * 0.5;
        } else {
            let scale = 4f64.powi(m as i32);
            *out.w_mut(0, 9 + ch) = coef[ch];
            for (k, gk) in g.iter().enumerate() {
                *out.w_mut(0, 3 * ch + k) = -coef[ch] * gk / scale;
            }
        }
    }
    layers.push(out);
    Ok(Block::from_parts(layers, mult_stats(m)))
}

pub fn build_mult_net(eps: f64) -> Result<ReluNetwork> {
    mult_block(eps)?.into_network()
}

/// `prod_d x_d` by a binary tree of multiplication blocks; an odd value at a level
/// is carried by an identity block of matching depth.
pub fn tree_product_block(dp: usize, eps: f64) -> Result<Block> {
    check_eps(eps)?;
    if dp < 2 {
        return Err(Error::input("a product needs at least two factors"));
    }
    let mult = mult_block(eps)?;
    let mut k = dp;
    let mut net: Option<Block> = None;
    while k > 1 {
        let mut parts: Vec<(Block, Vec<usize>)> =
            (0..k / 2).map(|i| (mult.clone(), vec![2 * i, 2 * i + 1])).collect();
        if k % 2 == 1 {
            parts.push((Block::identity(1, mult.depth()), vec![k - 1]));
        }
        let level = parallel(parts, k)?;
        net = Some(match net {
            None => level,
            Some(prev) => prev.compose(level)?,
        });
        k = k.div_ceil(2);
    }
    Ok(net.unwrap())
}

pub fn build_tree_product_net(dp: usize, eps: f64) -> Result<ReluNetwork> {
    tree_product_block(dp, eps)?.into_network()
}

/// `sum_d x_d x_{Dp+d}`: `Theta_+` folded onto `Dp` parallel multiplication blocks.
pub fn inner_product_block(dp: usize, eps: f64) -> Result<Block> {
    check_eps(eps)?;
    if dp == 0 {
        return Err(Error::input("inner product needs at least one pair"));
    }
    let mult = mult_block(eps)?;
    let parts = (0..dp).map(|d| (mult.clone(), vec![d, dp + d])).collect();
    let sum = sum_block(dp)?;
    let l = &sum.layers()[0];
    parallel(parts, 2 * dp)?.then_affine(1, &l.weights, &l.bias)
}

pub fn build_inner_product_net(dp: usize, eps: f64) -> Result<ReluNetwork> {
    inner_product_block(dp, eps)?.into_network()
}

/// Ramp `relu(t / eps^2 + 1) - relu(t / eps^2)`: equal to 1 for `t >= 0`, to 0 for
/// `t <= -eps^2` and linear in between.
pub fn heaviside_block(eps: f64) -> Result<Block> {
    check_eps(eps)?;
    let k = 1.0 / (eps * eps);
    Block::from_layers(vec![
        Layer::new(2, 1, vec![k, k], vec![1.0, 0.0])?,
        Layer::new(1, 2, vec![1.0, -1.0], vec![0.0])?,
    ])
}

pub fn build_heaviside_net(eps: f64) -> Result<ReluNetwork> {
    heaviside_block(eps)?.into_network()
}

/// `t -> clamp(t, -1, 1)`.
pub fn clamp_block() -> Block {
    Block::from_layers(vec![
        Layer::new(2, 1, vec![1.0, 1.0], vec![1.0, -1.0]).unwrap(),
        Layer::new(1, 2, vec![1.0, -1.0], vec![-1.0]).unwrap(),
    ])
    .unwrap()
}

/// Depth-one network computing `w . x + c`.
pub fn build_affine_net(weights: &[f64], intercept: f64) -> Result<ReluNetwork> {
    ReluNetwork::new(
        vec![Layer::new(1, weights.len(), weights.to_vec(), vec![intercept])?],
        false,
    )
}

/// Indicator of `{x_d >= h(x_{-d})}` (`Side::Above`) or of its complement
/// (`Side::Below`) on `[0,1]^dim`, with `h` given by `hnet` and `axis` 1-based.
pub fn horizon_block(hnet: &ReluNetwork, dim: usize, axis: usize, side: Side, eps: f64) -> Result<Block> {
    check_eps(eps)?;
    if dim < 2 || axis == 0 || axis > dim {
        return Err(Error::input(format!("axis {axis} invalid for dimension {dim}")));
    }
    if hnet.input_dim() != dim - 1 {
        return Err(Error::input(format!(
            "boundary network takes {} inputs, expected {}",
            hnet.input_dim(),
            dim - 1
        )));
    }
    let d = axis - 1;
    let rest: Vec<usize> = (0..dim).filter(|&i| i != d).collect();
    let offset = parallel(
        vec![
            (Block::from_network(hnet)?, rest),
            (Block::identity(1, 1), vec![d]),
        ],
        dim,
    )?
    .then_affine(1, &[-1.0, 1.0], &[0.0])?;
    let step = offset.compose(clamp_block())?.compose(heaviside_block(eps)?)?;
    match side {
        Side::Above => Ok(step),
        Side::Below => step.then_affine(1, &[-1.0], &[1.0]),
    }
}

pub fn build_horizon_net(hnet: &ReluNetwork, dim: usize, axis: usize, side: Side, eps: f64) -> Result<ReluNetwork> {
    horizon_block(hnet, dim, axis, side, eps)?.into_network()
}

/// Indicator of an intersection of basis pieces: the horizon blocks run in parallel
/// and their outputs are multiplied by a tree product.
pub fn region_block(pieces: &[(ReluNetwork, usize, Side)], dim: usize, eps: f64) -> Result<Block> {
    if pieces.is_empty() {
        return Err(Error::input("a region needs at least one piece"));
    }
    let blocks = pieces
        .iter()
        .map(|(h, axis, side)| horizon_block(h, dim, *axis, *side, eps))
        .collect::<Result<Vec<_>>>()?;
    if blocks.len() == 1 {
        return Ok(blocks.into_iter().next().unwrap());
    }
    let k = blocks.len();
    let all: Vec<usize> = (0..dim).collect();
    parallel(blocks.into_iter().map(|b| (b, all.clone())).collect(), dim)?
        .compose(tree_product_block(k, eps)?)
}

pub fn build_region_net(pieces: &[(ReluNetwork, usize, Side)], dim: usize, eps: f64) -> Result<ReluNetwork> {
    region_block(pieces, dim, eps)?.into_network()
}

/// Piecewise-linear interpolant of `g(w . x + c)` at `knots` (strictly increasing),
/// extended linearly outside; a two-layer network.
pub fn ridge_interpolant_net(
    weights: &[f64],
    intercept: f64,
    g: impl Fn(f64) -> f64,
    knots: &[f64],
) -> Result<ReluNetwork> {
    if knots.len() < 2 || knots.windows(2).any(|k| !(k[1] > k[0])) {
        return Err(Error::input("knots must be at least two strictly increasing values"));
    }
    let dim = weights.len();
    let k = knots.len();
    let vals: Vec<f64> = knots.iter().map(|t| g(*t)).collect();
    let slopes: Vec<f64> = (0..k - 1)
        .map(|i| (vals[i + 1] - vals[i]) / (knots[i + 1] - knots[i]))
        .collect();
    // unit 0 carries u - t_0 in both signs; unit i >= 1 is relu(u - t_i)
    let rows = k;
    let mut w = Vec::with_capacity(rows * dim);
    let mut b = Vec::with_capacity(rows);
    w.extend_from_slice(weights);
    b.push(intercept - knots[0]);
    w.extend(weights.iter().map(|v| -v));
    b.push(knots[0] - intercept);
    for t in &knots[1..k - 1] {
        w.extend_from_slice(weights);
        b.push(intercept - t);
    }
    let mut out = vec![slopes[0], -slopes[0]];
    out.extend((1..k - 1).map(|i| slopes[i] - slopes[i - 1]));
    ReluNetwork::new(
        vec![
            Layer::new(rows, dim, w, b)?,
            Layer::new(1, rows, out, vec![vals[0]])?,
        ],
        false,
    )
}

/// Scale `s >= 1` bounding `|f|` on the unit cube via interval propagation.
pub fn output_scale(nets: &[ReluNetwork]) -> f64 {
    nets.iter()
        .map(|n| {
            let (lo, hi) = n.output_bounds(0.0, 1.0);
            lo.abs().max(hi.abs())
        })
        .fold(1.0, f64::max)
}

/// `sum_m f_m * 1_{R_m}`: the `2M` subnetworks run in parallel and feed an inner
/// product block. Smooth outputs are divided by `scale` to enter `[-1,1]` and the
/// result is multiplied back.
pub fn assembly_block(
    smooth_nets: &[ReluNetwork],
    region_nets: &[ReluNetwork],
    eps: f64,
    scale: Option<f64>,
) -> Result<Block> {
    check_eps(eps)?;
    let m = smooth_nets.len();
    if m == 0 || region_nets.len() != m {
        return Err(Error::input(format!(
            "need equally many smooth and region networks, got {} and {}",
            m,
            region_nets.len()
        )));
    }
    let dim = smooth_nets[0].input_dim();
    if smooth_nets.iter().chain(region_nets).any(|n| n.input_dim() != dim) {
        return Err(Error::input("subnetworks disagree on the input dimension"));
    }
    let s = scale.unwrap_or_else(|| output_scale(smooth_nets));
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::input("output scale must be positive"));
    }
    let all: Vec<usize> = (0..dim).collect();
    let mut parts = Vec::with_capacity(2 * m);
    for net in smooth_nets {
        let b = Block::from_network(net)?.then_affine(1, &[1.0 / s], &[0.0])?;
        parts.push((b, all.clone()));
    }
    for net in region_nets {
        parts.push((Block::from_network(net)?, all.clone()));
    }
    let head = inner_product_block(m, eps)?.then_affine(1, &[s], &[0.0])?;
    parallel(parts, dim)?.compose(head)
}

pub fn assemble_piecewise_net(
    smooth_nets: &[ReluNetwork],
    region_nets: &[ReluNetwork],
    eps: f64,
) -> Result<ReluNetwork> {
    assembly_block(smooth_nets, region_nets, eps, None)?.into_network()
}
