use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Stage tolerances and architecture ceilings for approximating a piecewise smooth
/// target with `n` samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApproxBudget {
    /// Smooth-part tolerance `n^(-beta/(2beta+D))`.
    pub eps1: f64,
    /// Boundary tolerance `n^(-alpha/(2alpha+2D-2))`.
    pub eps2: f64,
    /// Product tolerance, the larger of the two.
    pub eps3: f64,
    pub theta2: f64,
    pub theta3: f64,
    pub s_bound: f64,
    pub l_bound: f64,
    pub b_bound: f64,
}

/// Exponent `s` in the parameter-size ceiling `B = c n^s`.
pub const WEIGHT_EXPONENT: i32 = 2;

pub fn architecture_budget(beta: f64, alpha: f64, dim: usize, n: usize, c: f64, c_prime: f64) -> Result<ApproxBudget> {
    if !(beta > 0.0 && alpha > 0.0) || dim < 2 || n == 0 {
        return Err(Error::input("budget needs beta, alpha > 0, D >= 2 and n >= 1"));
    }
    if !(c > 0.0 && c_prime > 0.0) {
        return Err(Error::input("budget constants must be positive"));
    }
    let d = dim as f64;
    let n = n as f64;
    let eps1 = n.powf(-beta / (2.0 * beta + d));
    let eps2 = n.powf(-alpha / (2.0 * alpha + 2.0 * d - 2.0));
    let theta2 = (2.0 * d - 2.0) / alpha;
    Ok(ApproxBudget {
        eps1,
        eps2,
        eps3: eps1.max(eps2),
        theta2,
        theta3: theta2.min(d / beta),
        s_bound: c_prime * n.powf(d / (2.0 * beta + d)).max(n.powf((d - 1.0) / (alpha + d - 1.0))),
        l_bound: c * (1.0 + (beta / d).max(alpha / (2.0 * (d - 1.0)))),
        b_bound: c * n.powi(WEIGHT_EXPONENT),
    })
}
