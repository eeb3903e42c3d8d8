//! Piecewise smooth targets and the data-generating process.
//!
//! A target is `f(x) = sum_m f_m(x) * 1_{R_m}(x)` on `[0,1]^D`. Each region `R_m` is an
//! intersection of basis pieces; a basis piece is one side of the graph
//! `x_d = h(x_{-d})` of a boundary function `h` over the remaining `D - 1` coordinates.

mod dataset;
mod expr;
mod json;

pub use dataset::{sample_dataset, Dataset};
pub use expr::Expr;
pub use json::{PieceDoc, TargetDoc, TermDoc};

use crate::error::{Error, Result};
use crate::predictor::Predictor;

/// A regression function with a known input dimension.
pub trait Target: Predictor {
    fn dim(&self) -> usize;
}

/// A closure on `[0,1]^dim` used as a regression target.
#[derive(Debug, Clone, Copy)]
pub struct FnTarget<F> {
    pub dim: usize,
    pub f: F,
}

impl<F: Fn(&[f64]) -> f64> FnTarget<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F: Fn(&[f64]) -> f64> Predictor for FnTarget<F> {
    fn predict(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }
}

impl<F: Fn(&[f64]) -> f64> Target for FnTarget<F> {
    fn dim(&self) -> usize {
        self.dim
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmoothComponent {
    pub expr: Expr,
    /// Declared smoothness order. Metadata only; never checked.
    pub beta: f64,
}

impl SmoothComponent {
    pub fn new(expr: Expr, beta: f64) -> Result<Self> {
        if !(beta > 0.0) {
            return Err(Error::input(format!("smoothness beta must be positive, got {beta}")));
        }
        Ok(Self { expr, beta })
    }
}

/// Which side of the boundary graph a piece keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// `x_d >= h(x_{-d})`; the boundary itself is inside.
    Above,
    /// `x_d < h(x_{-d})`; exactly the complement of [`Side::Above`].
    Below,
}

impl Side {
    pub fn sign(self) -> i8 {
        match self {
            Side::Above => 1,
            Side::Below => -1,
        }
    }

    pub fn from_sign(sign: i64) -> Result<Self> {
        match sign {
            1 => Ok(Side::Above),
            -1 => Ok(Side::Below),
            s => Err(Error::input(format!("piece sign must be +1 or -1, got {s}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BasisPiece {
    /// Boundary `h`, written over the `D - 1` coordinates left after dropping `axis`
    /// (renumbered `x1 .. x{D-1}`).
    pub boundary: Expr,
    /// One-based axis `d`.
    pub axis: usize,
    pub side: Side,
    /// Declared boundary smoothness. Metadata only.
    pub alpha: f64,
}

impl BasisPiece {
    pub fn new(boundary: Expr, axis: usize, side: Side, alpha: f64) -> Result<Self> {
        if axis == 0 {
            return Err(Error::input("piece axis is one-based"));
        }
        if !(alpha > 0.0) {
            return Err(Error::input(format!("smoothness alpha must be positive, got {alpha}")));
        }
        Ok(Self {
            boundary,
            axis,
            side,
            alpha,
        })
    }

    /// Signed distance along the axis, `x_d - h(x_{-d})`.
    pub fn offset(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x.len())?;
        Ok(self.offset_unchecked(x))
    }

    fn offset_unchecked(&self, x: &[f64]) -> f64 {
        let d = self.axis - 1;
        let h = self
            .boundary
            .eval_with(&|i| if i < d { x[i] } else { x[i + 1] });
        x[d] - h
    }

    /// Horizon indicator: 1 when `x` lies on this piece's side of the boundary.
    pub fn indicator(&self, x: &[f64]) -> Result<u8> {
        self.check_dim(x.len())?;
        Ok(self.indicator_unchecked(x))
    }

    fn indicator_unchecked(&self, x: &[f64]) -> u8 {
        let t = self.offset_unchecked(x);
        let above = t >= 0.0;
        u8::from(match self.side {
            Side::Above => above,
            Side::Below => !above,
        })
    }

    pub fn check_dim(&self, dim: usize) -> Result<()> {
        if self.axis > dim {
            return Err(Error::input(format!(
                "piece axis {} out of range for dimension {dim}",
                self.axis
            )));
        }
        if self.boundary.arity() + 1 > dim {
            return Err(Error::input(format!(
                "boundary uses {} coordinates but dimension {dim} leaves only {}",
                self.boundary.arity(),
                dim - 1
            )));
        }
        Ok(())
    }
}

/// Intersection of one or more basis pieces.
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    pieces: Vec<BasisPiece>,
}

impl Region {
    pub fn new(pieces: Vec<BasisPiece>) -> Result<Self> {
        if pieces.is_empty() {
            return Err(Error::input("a region needs at least one basis piece"));
        }
        Ok(Self { pieces })
    }

    /// The whole cube, as the half-space `x_1 >= 0`.
    pub fn whole_cube() -> Self {
        Self {
            pieces: vec![BasisPiece {
                boundary: Expr::Const(0.0),
                axis: 1,
                side: Side::Above,
                alpha: 1.0,
            }],
        }
    }

    pub fn pieces(&self) -> &[BasisPiece] {
        &self.pieces
    }

    /// Adds one more piece, shrinking (never growing) the region.
    pub fn intersect(mut self, piece: BasisPiece) -> Self {
        self.pieces.push(piece);
        self
    }

    pub fn member(&self, x: &[f64]) -> Result<u8> {
        for p in &self.pieces {
            p.check_dim(x.len())?;
        }
        Ok(self.member_unchecked(x))
    }

    fn member_unchecked(&self, x: &[f64]) -> u8 {
        self.pieces
            .iter()
            .map(|p| p.indicator_unchecked(x))
            .product()
    }
}

/// Free-function form of [`BasisPiece::indicator`].
pub fn horizon_indicator(piece: &BasisPiece, x: &[f64]) -> Result<u8> {
    piece.indicator(x)
}

/// Free-function form of [`Region::member`]; rejects empty piece lists.
pub fn region_member(pieces: &[BasisPiece], x: &[f64]) -> Result<u8> {
    if pieces.is_empty() {
        return Err(Error::input("a region needs at least one basis piece"));
    }
    let mut acc = 1;
    for p in pieces {
        acc *= p.indicator(x)?;
    }
    Ok(acc)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    pub component: SmoothComponent,
    pub region: Region,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseSmoothFunction {
    dim: usize,
    terms: Vec<Term>,
}

impl PiecewiseSmoothFunction {
    pub fn new(dim: usize, terms: Vec<Term>) -> Result<Self> {
        if dim < 2 {
            return Err(Error::input(format!("dimension must be at least 2, got {dim}")));
        }
        if terms.is_empty() {
            return Err(Error::input("a piecewise function needs at least one term"));
        }
        for (m, t) in terms.iter().enumerate() {
            if t.component.expr.arity() > dim {
                return Err(Error::input(format!(
                    "term {m}: component uses {} coordinates, dimension is {dim}",
                    t.component.expr.arity()
                )));
            }
            for p in t.region.pieces() {
                p.check_dim(dim)
                    .map_err(|e| Error::input(format!("term {m}: {e}")))?;
            }
        }
        Ok(Self { dim, terms })
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::input(format!(
                "point has dimension {}, target has {}",
                x.len(),
                self.dim
            )));
        }
        Ok(self.eval_unchecked(x))
    }

    fn eval_unchecked(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .filter(|t| t.region.member_unchecked(x) == 1)
            .map(|t| t.component.expr.eval(x))
            .sum()
    }

    /// Smallest declared `beta` and `alpha` over all terms.
    pub fn smoothness(&self) -> (f64, f64) {
        let beta = self
            .terms
            .iter()
            .map(|t| t.component.beta)
            .fold(f64::INFINITY, f64::min);
        let alpha = self
            .terms
            .iter()
            .flat_map(|t| t.region.pieces().iter().map(|p| p.alpha))
            .fold(f64::INFINITY, f64::min);
        (beta, alpha)
    }
}

impl Predictor for PiecewiseSmoothFunction {
    fn predict(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        self.eval_unchecked(x)
    }
}

impl Target for PiecewiseSmoothFunction {
    fn dim(&self) -> usize {
        self.dim
    }
}

/// Free-function form of [`PiecewiseSmoothFunction::eval`].
pub fn eval_piecewise(f: &PiecewiseSmoothFunction, x: &[f64]) -> Result<f64> {
    f.eval(x)
}

/// Boundary of the two-piece experiment target: `x2 = 0.75 - 0.6 x1`.
pub fn preset_boundary() -> Expr {
    Expr::constant(0.75).sub(Expr::constant(0.6).mul(Expr::coord(1)))
}

/// The two-piece experiment target on `[0,1]^2`:
///
/// ```text
/// f(x) = 1_{R1}(x) (0.2 + x1^2 + 0.1 x2) + 1_{R2}(x) (0.7 + 0.01 |4 x1 + 10 x2 - 9|^1.5)
/// R1 = { x2 >= -0.6 x1 + 0.75 },  R2 = [0,1]^2 \ R1
/// ```
pub fn preset_experiment_target() -> PiecewiseSmoothFunction {
    let f1 = Expr::constant(0.2)
        .add(Expr::coord(1).pow(2.0))
        .add(Expr::constant(0.1).mul(Expr::coord(2)));
    let f2 = Expr::constant(0.7).add(
        Expr::constant(0.01).mul(
            Expr::constant(4.0)
                .mul(Expr::coord(1))
                .add(Expr::constant(10.0).mul(Expr::coord(2)))
                .sub(Expr::constant(9.0))
                .abs()
                .pow(1.5),
        ),
    );
    let piece = |side| BasisPiece {
        boundary: preset_boundary(),
        axis: 2,
        side,
        alpha: 2.0,
    };
    let terms = vec![
        Term {
            component: SmoothComponent { expr: f1, beta: 2.0 },
            region: Region::new(vec![piece(Side::Above)]).unwrap(),
        },
        Term {
            component: SmoothComponent { expr: f2, beta: 1.5 },
            region: Region::new(vec![piece(Side::Below)]).unwrap(),
        },
    ];
    PiecewiseSmoothFunction::new(2, terms).expect("preset target is well formed")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn preset_piece() -> BasisPiece {
        BasisPiece::new(preset_boundary(), 2, Side::Above, 2.0).unwrap()
    }

    fn flat(h: f64, axis: usize, side: Side) -> BasisPiece {
        BasisPiece::new(Expr::constant(h), axis, side, 1.0).unwrap()
    }

    #[test]
    fn horizon_indicator_examples() {
        let p = preset_piece();
        assert_eq!(horizon_indicator(&p, &[1.0, 1.0]).unwrap(), 1);
        assert_eq!(horizon_indicator(&p, &[0.0, 0.0]).unwrap(), 0);
        let zero = flat(0.0, 2, Side::Above);
        assert_eq!(horizon_indicator(&zero, &[0.3, 0.0]).unwrap(), 1);
    }

    #[test]
    fn horizon_dimension_mismatch() {
        let p = preset_piece();
        assert!(horizon_indicator(&p, &[0.5]).is_err());
        let wide = BasisPiece::new(Expr::coord(3), 1, Side::Above, 1.0).unwrap();
        assert!(wide.indicator(&[0.1, 0.2, 0.3]).is_err());
        assert!(wide.indicator(&[0.1, 0.2, 0.3, 0.4]).is_ok());
    }

    #[test]
    fn region_member_examples() {
        let single = Region::new(vec![preset_piece()]).unwrap();
        assert_eq!(single.member(&[1.0, 1.0]).unwrap(), 1);
        // x2 >= 0.5 together with x2 < 0 is empty.
        let contradictory = [flat(0.5, 2, Side::Above), flat(0.0, 2, Side::Below)];
        assert_eq!(region_member(&contradictory, &[0.3, 0.25]).unwrap(), 0);
        let both = [flat(0.1, 2, Side::Above), flat(0.9, 2, Side::Below)];
        assert_eq!(region_member(&both, &[0.3, 0.25]).unwrap(), 1);
        assert!(region_member(&[], &[0.3, 0.25]).is_err());
        assert!(Region::new(vec![]).is_err());
    }

    #[test]
    fn eval_examples() {
        let f = preset_experiment_target();
        assert!((eval_piecewise(&f, &[1.0, 1.0]).unwrap() - 1.3).abs() < 1e-12);
        assert!((eval_piecewise(&f, &[0.0, 0.0]).unwrap() - 0.97).abs() < 1e-12);
        let zero = PiecewiseSmoothFunction::new(
            3,
            vec![Term {
                component: SmoothComponent::new(Expr::constant(0.0), 1.0).unwrap(),
                region: Region::whole_cube(),
            }],
        )
        .unwrap();
        assert_eq!(zero.eval(&[0.2, 0.9, 0.0]).unwrap(), 0.0);
        assert!(f.eval(&[0.1, 0.2, 0.3]).is_err());
    }

    #[test]
    fn preset_shape_and_partition() {
        let f = preset_experiment_target();
        assert_eq!(f.terms().len(), 2);
        assert_eq!(f.dim(), 2);
        let (r1, r2) = (&f.terms()[0].region, &f.terms()[1].region);
        for i in 0..=100 {
            for j in 0..=100 {
                let x = [i as f64 / 100.0, j as f64 / 100.0];
                assert_eq!(r1.member(&x).unwrap() + r2.member(&x).unwrap(), 1, "{x:?}");
            }
        }
    }

    #[test]
    fn constructor_validation() {
        assert!(SmoothComponent::new(Expr::constant(1.0), 0.0).is_err());
        assert!(BasisPiece::new(Expr::constant(0.0), 0, Side::Above, 1.0).is_err());
        let term = Term {
            component: SmoothComponent::new(Expr::coord(3), 1.0).unwrap(),
            region: Region::whole_cube(),
        };
        assert!(PiecewiseSmoothFunction::new(2, vec![term.clone()]).is_err());
        assert!(PiecewiseSmoothFunction::new(1, vec![term]).is_err());
        assert!(PiecewiseSmoothFunction::new(2, vec![]).is_err());
    }

    fn arb_piece() -> impl Strategy<Value = BasisPiece> {
        (0.0f64..1.0, -1.0f64..1.0, 1usize..=2, any::<bool>()).prop_map(|(c, s, axis, up)| {
            let h = Expr::constant(c).add(Expr::constant(s).mul(Expr::coord(1)));
            let side = if up { Side::Above } else { Side::Below };
            BasisPiece::new(h, axis, side, 1.0).unwrap()
        })
    }

    proptest! {
        #[test]
        fn adding_pieces_never_grows_region(
            pieces in prop::collection::vec(arb_piece(), 1..4),
            extra in arb_piece(),
            x in prop::array::uniform2(0.0f64..=1.0),
        ) {
            let region = Region::new(pieces).unwrap();
            let before = region.member(&x).unwrap();
            let after = region.intersect(extra).member(&x).unwrap();
            prop_assert!(after <= before);
            prop_assert!(after == 0 || after == 1);
        }

        #[test]
        fn preset_regions_partition(x in prop::array::uniform2(0.0f64..=1.0)) {
            let f = preset_experiment_target();
            let s = f.terms()[0].region.member(&x).unwrap() + f.terms()[1].region.member(&x).unwrap();
            prop_assert_eq!(s, 1);
        }
    }
}
