//! Builders for the standard cost and constraint models, order books and the
//! exponential illiquidity family.

mod analytic;
mod book;

use num_traits::{Signed, Zero};
use thiserror::Error;

use crate::kernel::{HalfSpace, Interval, KernelError, PolyhedralSet, ScalarPwl, SeparableCost};
use crate::market::{AdaptedProcess, EventTree};
use crate::num::{ExtReal, Rat};

pub use analytic::{
    exp_bounds_coarse, exponential_cost, uniform_grid, AnalyticComponent, AnalyticCost, Sandwich,
};
pub use book::{build_order_book, parse_order_book_csv, OrderBookSide, Side};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CostError {
    #[error("order book: {0}")]
    Book(String),
    #[error("crossed book: best bid {bid} above best ask {ask}")]
    Crossed { bid: Rat, ask: Rat },
    #[error("order book csv: {0}")]
    Csv(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

/// Sublinear cost `x -> max_z z . x` over a finite set of price vectors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaxLinearCost {
    dim: usize,
    vertices: Vec<Vec<Rat>>,
}

impl MaxLinearCost {
    pub fn new(vertices: Vec<Vec<Rat>>) -> Result<Self, CostError> {
        let dim = vertices
            .first()
            .ok_or_else(|| CostError::Parameter("price set needs at least one vertex".into()))?
            .len();
        if let Some(v) = vertices.iter().find(|v| v.len() != dim) {
            return Err(KernelError::Dimension {
                expected: dim,
                found: v.len(),
            }
            .into());
        }
        Ok(MaxLinearCost { dim, vertices })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vertices(&self) -> &[Vec<Rat>] {
        &self.vertices
    }

    pub fn eval(&self, x: &[Rat]) -> Rat {
        self.vertices
            .iter()
            .map(|z| z.iter().zip(x).map(|(a, b)| a * b).sum::<Rat>())
            .max()
            .unwrap()
    }
}

fn check_len(expected: usize, found: usize) -> Result<(), CostError> {
    if expected == found {
        Ok(())
    } else {
        Err(KernelError::Dimension { expected, found }.into())
    }
}

/// Frictionless prices: one line per asset.
pub fn linear_cost(prices: &[Rat]) -> SeparableCost {
    SeparableCost::new(prices.iter().cloned().map(ScalarPwl::linear).collect())
}

pub fn bid_ask_cost(bid: &[Rat], ask: &[Rat]) -> Result<SeparableCost, CostError> {
    check_len(bid.len(), ask.len())?;
    Ok(SeparableCost::new(
        bid.iter()
            .zip(ask)
            .map(|(b, a)| ScalarPwl::bid_ask(b.clone(), a.clone()))
            .collect::<Result<_, _>>()?,
    ))
}

/// `x_j -> s_j phi_j(x_j)` with `s >= 0`.
pub fn scaled_convex_cost(s: &[Rat], phi: &[ScalarPwl]) -> Result<SeparableCost, CostError> {
    check_len(phi.len(), s.len())?;
    Ok(SeparableCost::new(
        s.iter()
            .zip(phi)
            .map(|(sj, f)| f.times(sj))
            .collect::<Result<_, _>>()?,
    ))
}

/// `x_j -> phi_j(s_j x_j)` with `s > 0`: costs driven by the pretrade market value.
pub fn market_value_cost(s: &[Rat], phi: &[ScalarPwl]) -> Result<SeparableCost, CostError> {
    check_len(phi.len(), s.len())?;
    Ok(SeparableCost::new(
        s.iter()
            .zip(phi)
            .map(|(sj, f)| f.compose_scale(sj))
            .collect::<Result<_, _>>()?,
    ))
}

pub fn build_linear(s: &AdaptedProcess<Vec<Rat>>) -> AdaptedProcess<SeparableCost> {
    s.map(|p| linear_cost(p))
}

pub fn build_bid_ask(
    bid: &AdaptedProcess<Vec<Rat>>,
    ask: &AdaptedProcess<Vec<Rat>>,
) -> Result<AdaptedProcess<SeparableCost>, CostError> {
    check_len(bid.len(), ask.len())?;
    let costs = bid
        .values()
        .iter()
        .zip(ask.values())
        .map(|(b, a)| bid_ask_cost(b, a))
        .collect::<Result<_, _>>()?;
    Ok(AdaptedProcess::new(costs))
}

pub fn build_scaled_convex(
    s: &AdaptedProcess<Vec<Rat>>,
    phi: &[ScalarPwl],
) -> Result<AdaptedProcess<SeparableCost>, CostError> {
    let costs = s
        .values()
        .iter()
        .map(|sn| scaled_convex_cost(sn, phi))
        .collect::<Result<_, _>>()?;
    Ok(AdaptedProcess::new(costs))
}

pub fn build_market_value_cost(
    s: &AdaptedProcess<Vec<Rat>>,
    phi: &AdaptedProcess<Vec<ScalarPwl>>,
) -> Result<AdaptedProcess<SeparableCost>, CostError> {
    check_len(s.len(), phi.len())?;
    let costs = s
        .values()
        .iter()
        .zip(phi.values())
        .map(|(sn, fn_)| market_value_cost(sn, fn_))
        .collect::<Result<_, _>>()?;
    Ok(AdaptedProcess::new(costs))
}

pub fn build_set_valued(
    z: &AdaptedProcess<Vec<Vec<Rat>>>,
) -> Result<AdaptedProcess<MaxLinearCost>, CostError> {
    let costs = z
        .values()
        .iter()
        .map(|v| MaxLinearCost::new(v.clone()))
        .collect::<Result<_, _>>()?;
    Ok(AdaptedProcess::new(costs))
}

pub fn constraint_fixed(dim: usize, rows: Vec<HalfSpace>) -> Result<PolyhedralSet, CostError> {
    Ok(PolyhedralSet::new(dim, rows)?)
}

/// `{x : M x in K}` for a `k x J` matrix `M`.
pub fn constraint_matrix(matrix: &[Vec<Rat>], k: &PolyhedralSet) -> Result<PolyhedralSet, CostError> {
    check_len(k.dim(), matrix.len())?;
    let dim = matrix.first().map_or(0, Vec::len);
    for row in matrix {
        check_len(dim, row.len())?;
    }
    let rows = k
        .rows()
        .iter()
        .map(|h| HalfSpace {
            normal: (0..dim)
                .map(|j| h.normal.iter().zip(matrix).map(|(a, m)| a * &m[j]).sum())
                .collect(),
            offset: h.offset.clone(),
        })
        .collect();
    Ok(PolyhedralSet::new(dim, rows)?)
}

pub fn build_constraint_fixed(tree: &EventTree, k: &PolyhedralSet) -> AdaptedProcess<PolyhedralSet> {
    AdaptedProcess::constant(tree, k.clone())
}

pub fn build_constraint_matrix(
    matrices: &AdaptedProcess<Vec<Vec<Rat>>>,
    k: &PolyhedralSet,
) -> Result<AdaptedProcess<PolyhedralSet>, CostError> {
    let sets = matrices
        .values()
        .iter()
        .map(|m| constraint_matrix(m, k))
        .collect::<Result<_, _>>()?;
    Ok(AdaptedProcess::new(sets))
}

/// Cash plus one risky asset with exponential illiquidity at every node.
pub fn exponential_family(
    sbar: &AdaptedProcess<Rat>,
    illiquidity: &Rat,
) -> Result<AdaptedProcess<AnalyticCost>, CostError> {
    let costs = sbar
        .values()
        .iter()
        .map(|s| exponential_cost(s, illiquidity))
        .collect::<Result<_, _>>()?;
    Ok(AdaptedProcess::new(costs))
}

/// Market value bounds `lo_j <= s_j x_j <= hi_j`.
pub fn market_value_bounds(s: &[Rat], lo: &[Option<Rat>], hi: &[Option<Rat>]) -> Result<PolyhedralSet, CostError> {
    let dim = s.len();
    check_len(dim, lo.len())?;
    check_len(dim, hi.len())?;
    if s.iter().any(|x| !x.is_positive()) {
        return Err(CostError::Parameter("market values need positive prices".into()));
    }
    let k = PolyhedralSet::boxed(lo, hi)?;
    let m: Vec<Vec<Rat>> = (0..dim)
        .map(|i| (0..dim).map(|j| if i == j { s[i].clone() } else { Rat::zero() }).collect())
        .collect();
    constraint_matrix(&m, &k)
}

/// Interval hull `[min z_j, max z_j]` of each coordinate of a vertex list.
pub fn coordinate_hull(vertices: &[Vec<Rat>], j: usize) -> Interval {
    let lo = vertices.iter().map(|z| z[j].clone()).min().unwrap();
    let hi = vertices.iter().map(|z| z[j].clone()).max().unwrap();
    Interval::new(ExtReal::Finite(lo), ExtReal::Finite(hi))
}
