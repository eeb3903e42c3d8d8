use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::builders::*;
use crate::error::{Error, Result};
use crate::piecewise::{
    eval_piecewise, preset_boundary, preset_experiment_target, region_member, BasisPiece, Side,
};
use crate::relu_net::ReluNetwork;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BuildKind {
    Sum,
    Mult,
    TreeProduct,
    InnerProduct,
    Heaviside,
    Horizon,
    Assembly,
}

impl BuildKind {
    pub const ALL: [BuildKind; 7] = [
        BuildKind::Sum,
        BuildKind::Mult,
        BuildKind::TreeProduct,
        BuildKind::InnerProduct,
        BuildKind::Heaviside,
        BuildKind::Horizon,
        BuildKind::Assembly,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BuildKind::Sum => "sum",
            BuildKind::Mult => "mult",
            BuildKind::TreeProduct => "product",
            BuildKind::InnerProduct => "inner",
            BuildKind::Heaviside => "heaviside",
            BuildKind::Horizon => "horizon",
            BuildKind::Assembly => "assembly",
        }
    }
}

impl fmt::Display for BuildKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BuildKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BuildKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown network kind `{s}`")))
    }
}

/// Architecture statistics of a built network and its error against the exact
/// operation on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildReport {
    pub kind: String,
    pub eps: f64,
    #[serde(rename = "L")]
    pub layers: usize,
    #[serde(rename = "S")]
    pub nonzeros: usize,
    #[serde(rename = "Binf")]
    pub max_abs: f64,
    pub measured_error_grid: f64,
}

fn lattice(points: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..points)
        .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
        .collect()
}

/// Largest `|net(x) - exact(x)|` over the tensor lattice `axis^dim`.
pub fn grid_sup_error(net: &ReluNetwork, axis: &[f64], exact: impl Fn(&[f64]) -> f64) -> f64 {
    let dim = net.input_dim();
    let mut idx = vec![0usize; dim];
    let mut x = vec![axis[0]; dim];
    let mut worst: f64 = 0.0;
    loop {
        worst = worst.max((net.forward(&x).unwrap() - exact(&x)).abs());
        let mut d = 0;
        loop {
            if d == dim {
                return worst;
            }
            idx[d] += 1;
            if idx[d] < axis.len() {
                x[d] = axis[idx[d]];
                break;
            }
            idx[d] = 0;
            x[d] = axis[0];
            d += 1;
        }
    }
}

/// Root mean square of `net - exact` over the lattice `axis^2`.
pub fn grid_l2_error_2d(net: &impl Fn(&[f64]) -> f64, axis: &[f64], exact: impl Fn(&[f64]) -> f64) -> f64 {
    let mut acc = 0.0;
    for &a in axis {
        for &b in axis {
            let x = [a, b];
            acc += (net(&x) - exact(&x)).powi(2);
        }
    }
    (acc / (axis.len() * axis.len()) as f64).sqrt()
}

/// Exact `L2([-1,1])` distance between a two-layer scalar network and the step
/// `1_{t >= 0}`: the integrand is quadratic between the first-layer kinks and the
/// jump, so Simpson's rule on each piece is exact.
pub fn l2_distance_to_step(net: &ReluNetwork) -> Result<f64> {
    if net.input_dim() != 1 || net.layers().len() > 2 {
        return Err(Error::input("expected a scalar network with at most one hidden layer"));
    }
    let mut cuts = vec![-1.0, 0.0, 1.0];
    if net.layers().len() == 2 {
        let first = &net.layers()[0];
        for (w, b) in first.weights.iter().zip(&first.bias) {
            if *w != 0.0 {
                let t = -b / w;
                if t > -1.0 && t < 1.0 {
                    cuts.push(t);
                }
            }
        }
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut total = 0.0;
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let mid = 0.5 * (a + b);
        let step = if mid >= 0.0 { 1.0 } else { 0.0 };
        let g = |t: f64| (net.forward(&[t]).unwrap() - step).powi(2);
        total += (b - a) / 6.0 * (g(a) + 4.0 * g(mid) + g(b));
    }
    Ok(total.sqrt())
}

/// Builds a network of the given kind. `dp` is the number of inputs (sum, tree
/// product) or pairs (inner product); the horizon and the assembly use the
/// experiment target's boundary.
pub fn build_network(kind: BuildKind, eps: f64, dp: usize) -> Result<ReluNetwork> {
    match kind {
        BuildKind::Sum => build_sum_net(dp),
        BuildKind::Mult => build_mult_net(eps),
        BuildKind::TreeProduct => build_tree_product_net(dp, eps),
        BuildKind::InnerProduct => build_inner_product_net(dp, eps),
        BuildKind::Heaviside => build_heaviside_net(eps),
        BuildKind::Horizon => {
            let (w, c) = preset_boundary()
                .affine_coefficients(1)
                .expect("preset boundary is affine");
            build_horizon_net(&build_affine_net(&w, c)?, 2, 2, Side::Above, eps)
        }
        BuildKind::Assembly => super::build_preset_assembly(eps),
    }
}

/// Builds a network with [`build_network`] and measures it against the exact
/// operation; the assembly is measured against the experiment target on a
/// 101-point lattice.
pub fn build_report(kind: BuildKind, eps: f64, dp: usize) -> Result<(ReluNetwork, BuildReport)> {
    let net = build_network(kind, eps, dp)?;
    let err = match kind {
        BuildKind::Sum => grid_sup_error(&net, &lattice(11, 0.0, 1.0), |x| x.iter().sum()),
        BuildKind::Mult => grid_sup_error(&net, &lattice(201, -1.0, 1.0), |x| x[0] * x[1]),
        BuildKind::TreeProduct => {
            let pts = if dp <= 3 { 41 } else { 11 };
            grid_sup_error(&net, &lattice(pts, -1.0, 1.0), |x| x.iter().product())
        }
        BuildKind::InnerProduct => {
            let pts = if dp == 1 { 201 } else { 7 };
            grid_sup_error(&net, &lattice(pts, -1.0, 1.0), |x| {
                (0..dp).map(|d| x[d] * x[dp + d]).sum()
            })
        }
        BuildKind::Heaviside => l2_distance_to_step(&net)?,
        BuildKind::Horizon => {
            let pieces = [BasisPiece::new(preset_boundary(), 2, Side::Above, 1.0)?];
            grid_l2_error_2d(&|x: &[f64]| net.forward(x).unwrap(), &lattice(201, 0.0, 1.0), |x| {
                region_member(&pieces, x).map(f64::from).unwrap()
            })
        }
        BuildKind::Assembly => {
            let target = preset_experiment_target();
            grid_l2_error_2d(&|x: &[f64]| net.forward(x).unwrap(), &lattice(101, 0.0, 1.0), |x| {
                eval_piecewise(&target, x).unwrap()
            })
        }
    };
    let s = net.stats();
    let report = BuildReport {
        kind: kind.name().into(),
        eps,
        layers: s.layers,
        nonzeros: s.nonzeros,
        max_abs: s.max_abs,
        measured_error_grid: err,
    };
    Ok((net, report))
}
