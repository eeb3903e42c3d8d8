//! JSON form of targets:
//! `{dim, terms: [{expr, beta, region: [{axis, sign, alpha, boundary}]}]}` with
//! expressions in prefix notation.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{BasisPiece, Expr, PiecewiseSmoothFunction, Region, Side, SmoothComponent, Term};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetDoc {
    pub dim: usize,
    pub terms: Vec<TermDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermDoc {
    pub expr: String,
    pub beta: f64,
    pub region: Vec<PieceDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PieceDoc {
    pub axis: usize,
    pub sign: i64,
    pub alpha: f64,
    pub boundary: String,
}

impl From<&PiecewiseSmoothFunction> for TargetDoc {
    fn from(f: &PiecewiseSmoothFunction) -> Self {
        TargetDoc {
            dim: f.dim,
            terms: f
                .terms
                .iter()
                .map(|t| TermDoc {
                    expr: t.component.expr.to_string(),
                    beta: t.component.beta,
                    region: t
                        .region
                        .pieces()
                        .iter()
                        .map(|p| PieceDoc {
                            axis: p.axis,
                            sign: p.side.sign().into(),
                            alpha: p.alpha,
                            boundary: p.boundary.to_string(),
                        })
                        .collect(),
                })
                .collect(),
        }
    }
}

impl TryFrom<TargetDoc> for PiecewiseSmoothFunction {
    type Error = Error;

    fn try_from(doc: TargetDoc) -> Result<Self> {
        let terms = doc
            .terms
            .into_iter()
            .map(|t| {
                let pieces = t
                    .region
                    .into_iter()
                    .map(|p| {
                        BasisPiece::new(
                            Expr::parse(&p.boundary)?,
                            p.axis,
                            Side::from_sign(p.sign)?,
                            p.alpha,
                        )
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(Term {
                    component: SmoothComponent::new(Expr::parse(&t.expr)?, t.beta)?,
                    region: Region::new(pieces)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        PiecewiseSmoothFunction::new(doc.dim, terms)
    }
}

impl PiecewiseSmoothFunction {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&TargetDoc::from(self)).expect("target serializes")
    }

    pub fn from_json(src: &str) -> Result<Self> {
        let doc: TargetDoc = serde_json::from_str(src)?;
        doc.try_into()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let src = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&src)
    }
}
