//! Exact convex calculus for piecewise-linear costs and polyhedral sets.

mod dd;
mod polyhedral;
mod pwl;

use thiserror::Error;

use crate::lp::LpError;
use crate::num::{ExtReal, Rat};

pub use polyhedral::{HalfSpace, PolyhedralCone, PolyhedralSet, DEFAULT_DIMENSION_CAP};
pub use pwl::{Interval, Pwl, ScalarPwl};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum KernelError {
    #[error("invalid piecewise-linear data: {0}")]
    Shape(String),
    #[error("not convex: {0}")]
    NotConvex(String),
    #[error("empty domain")]
    EmptyDomain,
    #[error("scale factor must be positive, got {0}")]
    NonPositiveScale(Rat),
    #[error("multiplier must be nonnegative, got {0}")]
    NegativeMultiplier(Rat),
    #[error("crossed quotes: bid {bid} above ask {ask}")]
    CrossedQuotes { bid: Rat, ask: Rat },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },
    #[error("constraint set must contain the origin")]
    OriginInfeasible,
    #[error("cone conversion in dimension {dim} exceeds the cap of {cap}")]
    DimensionCap { dim: usize, cap: usize },
    #[error(transparent)]
    Lp(#[from] LpError),
}

/// Sum of one scalar cost per asset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeparableCost {
    pub per_asset: Vec<ScalarPwl>,
}

impl SeparableCost {
    pub fn new(per_asset: Vec<ScalarPwl>) -> Self {
        SeparableCost { per_asset }
    }

    pub fn dim(&self) -> usize {
        self.per_asset.len()
    }

    pub fn eval(&self, x: &[Rat]) -> Result<ExtReal, KernelError> {
        if x.len() != self.dim() {
            return Err(KernelError::Dimension {
                expected: self.dim(),
                found: x.len(),
            });
        }
        Ok(self
            .per_asset
            .iter()
            .zip(x)
            .fold(ExtReal::zero(), |acc, (f, xi)| acc.add(&f.eval(xi))))
    }

    pub fn market_prices(&self) -> Vec<Interval> {
        self.per_asset.iter().map(ScalarPwl::market_prices).collect()
    }

    pub fn price_ranges(&self) -> Vec<Interval> {
        self.per_asset.iter().map(ScalarPwl::price_range).collect()
    }

    pub fn map<E>(&self, f: impl Fn(&ScalarPwl) -> Result<ScalarPwl, E>) -> Result<Self, E> {
        Ok(SeparableCost {
            per_asset: self.per_asset.iter().map(f).collect::<Result<_, _>>()?,
        })
    }

    pub fn scale(&self, alpha: &Rat) -> Result<Self, KernelError> {
        self.map(|f| f.scale(alpha))
    }

    pub fn subderivative_origin(&self) -> Self {
        SeparableCost {
            per_asset: self.per_asset.iter().map(ScalarPwl::subderivative_origin).collect(),
        }
    }

    pub fn horizon(&self) -> Self {
        SeparableCost {
            per_asset: self.per_asset.iter().map(ScalarPwl::horizon).collect(),
        }
    }

    pub fn is_sublinear(&self) -> bool {
        self.per_asset.iter().all(ScalarPwl::is_sublinear)
    }

    pub fn is_finite_valued(&self) -> bool {
        self.per_asset.iter().all(ScalarPwl::is_finite_valued)
    }
}
