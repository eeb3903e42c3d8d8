//! Explicit ReLU networks with exact parameter accounting.
//!
//! Builders come in two flavours: `*_block` returns a [`Block`] that carries the
//! statistics predicted by the combinators, `build_*` returns the finished
//! [`ReluNetwork`](crate::relu_net::ReluNetwork).

mod block;
mod budget;
mod builders;
mod report;

pub use block::{parallel, Block};
pub use budget::{architecture_budget, ApproxBudget, WEIGHT_EXPONENT};
pub use builders::*;
pub use report::{
    build_network, build_report, grid_l2_error_2d, grid_sup_error, l2_distance_to_step, BuildKind, BuildReport,
};

use crate::error::Result;
use crate::piecewise::{preset_boundary, Side};
use crate::relu_net::ReluNetwork;

/// Network for the two-piece experiment target: `0.2 + x1^2 + 0.1 x2` above the
/// line `x2 = 0.75 - 0.6 x1` and `0.7 + 0.01 |4 x1 + 10 x2 - 9|^1.5` below it.
/// The square comes from a multiplication block, the power from a 57-knot ridge
/// interpolant and the boundaries are exact affine subnetworks.
pub fn preset_assembly_block(eps: f64) -> Result<Block> {
    let square = parallel(
        vec![
            (mult_block(eps)?, vec![0, 0]),
            (Block::identity(1, 1), vec![1]),
        ],
        2,
    )?
    .then_affine(1, &[1.0, 0.1], &[0.2])?
    .into_network()?;
    let knots: Vec<f64> = (0..57).map(|i| -9.0 + 0.25 * i as f64).collect();
    let power = ridge_interpolant_net(&[4.0, 10.0], -9.0, |u| 0.7 + 0.01 * u.abs().powf(1.5), &knots)?;

    let (w, c) = preset_boundary().affine_coefficients(1).expect("affine boundary");
    let h = build_affine_net(&w, c)?;
    let above = build_horizon_net(&h, 2, 2, Side::Above, eps)?;
    let below = build_horizon_net(&h, 2, 2, Side::Below, eps)?;
    assembly_block(&[square, power], &[above, below], eps, None)
}

pub fn build_preset_assembly(eps: f64) -> Result<ReluNetwork> {
    preset_assembly_block(eps)?.into_network()
}
