//! Event trees, adapted processes and market instances with their budget
//! constraint.

mod tree;

use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::costs::{AnalyticComponent, AnalyticCost, CostError, MaxLinearCost};
use crate::kernel::{HalfSpace, Interval, KernelError, PolyhedralSet, ScalarPwl, SeparableCost};
use crate::lp::{LinearProgram, Relation, Sense};
use crate::num::{ExtReal, Rat};

pub use tree::{AdaptedProcess, EventTree, Node, NodeId, NodeSpec, Weighted};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("invalid tree: {0}")]
    Tree(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("conditional expectation at leaf node {0:?}")]
    LeafExpectation(String),
    #[error("no usable cash asset: {0}")]
    NoNumeraire(String),
    #[error(transparent)]
    Cost(#[from] CostError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

/// Cost function at one node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NodeCost {
    Separable(SeparableCost),
    MaxLinear(MaxLinearCost),
    Analytic(AnalyticCost),
}

impl From<SeparableCost> for NodeCost {
    fn from(c: SeparableCost) -> Self {
        NodeCost::Separable(c)
    }
}

impl From<MaxLinearCost> for NodeCost {
    fn from(c: MaxLinearCost) -> Self {
        NodeCost::MaxLinear(c)
    }
}

impl From<AnalyticCost> for NodeCost {
    fn from(c: AnalyticCost) -> Self {
        NodeCost::Analytic(c)
    }
}

/// Closed enclosure `lo <= value <= hi`; `lo == hi` for exact values.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Enclosure {
    pub lo: ExtReal,
    pub hi: ExtReal,
}

impl Enclosure {
    pub fn exact(v: ExtReal) -> Self {
        Enclosure { lo: v.clone(), hi: v }
    }

    pub fn add(&self, other: &Enclosure) -> Enclosure {
        Enclosure {
            lo: self.lo.add(&other.lo),
            hi: self.hi.add(&other.hi),
        }
    }

    pub fn add_rat(&self, r: &Rat) -> Enclosure {
        Enclosure {
            lo: self.lo.add_rat(r),
            hi: self.hi.add_rat(r),
        }
    }

    pub fn is_exact(&self) -> bool {
        self.lo == self.hi
    }
}

/// Marginal price bounds for one coordinate; `open_below` marks a lower end
/// that is a limit but not attained.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PriceInterval {
    pub interval: Interval,
    pub open_below: bool,
}

/// A set of price vectors: a product of intervals or a convex hull.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PriceSet {
    Box(Vec<PriceInterval>),
    Hull(Vec<Vec<Rat>>),
}

impl PriceSet {
    /// Largest coordinate distance from `s` to the closed set.
    pub fn distance(&self, s: &[Rat]) -> Result<ExtReal, ModelError> {
        match self {
            PriceSet::Box(iv) => {
                if iv.len() != s.len() {
                    return Err(ModelError::Shape(format!("price vector has {} entries, expected {}", s.len(), iv.len())));
                }
                Ok(iv
                    .iter()
                    .zip(s)
                    .map(|(i, x)| i.interval.distance(x))
                    .max()
                    .unwrap_or_else(ExtReal::zero))
            }
            PriceSet::Hull(z) => {
                // min t s.t. |s - sum mu_k z_k| <= t, sum mu = 1, mu >= 0
                let mut lp = LinearProgram::new(Sense::Minimize);
                let t = lp.add_nonneg();
                lp.set_objective(t, Rat::one());
                let mu: Vec<usize> = z.iter().map(|_| lp.add_nonneg()).collect();
                lp.add_row(mu.iter().map(|&m| (m, Rat::one())).collect(), Relation::Eq, Rat::one());
                for (j, sj) in s.iter().enumerate() {
                    let mut terms: Vec<(usize, Rat)> = mu.iter().zip(z).map(|(&m, v)| (m, v[j].clone())).collect();
                    terms.push((t, Rat::one()));
                    lp.add_row(terms.clone(), Relation::Ge, sj.clone());
                    let last = terms.len() - 1;
                    terms[last].1 = -Rat::one();
                    lp.add_row(terms, Relation::Le, sj.clone());
                }
                let sol = lp.solve().map_err(KernelError::from)?;
                Ok(ExtReal::Finite(sol.objective))
            }
        }
    }
}

impl NodeCost {
    pub fn dim(&self) -> usize {
        match self {
            NodeCost::Separable(c) => c.dim(),
            NodeCost::MaxLinear(c) => c.dim(),
            NodeCost::Analytic(c) => c.dim(),
        }
    }

    /// True for piecewise-linear costs, which the LP encodings handle exactly.
    pub fn is_polyhedral(&self) -> bool {
        match self {
            NodeCost::Analytic(c) => c.per_asset.iter().all(|a| matches!(a, AnalyticComponent::Pwl(_))),
            _ => true,
        }
    }

    /// Polyhedral form of the cost, if it has one.
    pub fn polyhedral(&self) -> Option<NodeCost> {
        match self {
            NodeCost::Analytic(c) => {
                let per_asset = c
                    .per_asset
                    .iter()
                    .map(|a| match a {
                        AnalyticComponent::Pwl(f) => Some(f.clone()),
                        AnalyticComponent::Exponential { .. } => None,
                    })
                    .collect::<Option<Vec<_>>>()?;
                Some(NodeCost::Separable(SeparableCost::new(per_asset)))
            }
            other => Some(other.clone()),
        }
    }

    pub fn enclosure(&self, x: &[Rat]) -> Result<Enclosure, ModelError> {
        if x.len() != self.dim() {
            return Err(KernelError::Dimension {
                expected: self.dim(),
                found: x.len(),
            }
            .into());
        }
        Ok(match self {
            NodeCost::Separable(c) => Enclosure::exact(c.eval(x)?),
            NodeCost::MaxLinear(c) => Enclosure::exact(ExtReal::Finite(c.eval(x))),
            NodeCost::Analytic(c) => {
                let (lo, hi) = c.enclosure(x);
                Enclosure { lo, hi }
            }
        })
    }

    /// `alpha * S(x / alpha)`.
    pub fn scale(&self, alpha: &Rat) -> Result<NodeCost, ModelError> {
        Ok(match self {
            NodeCost::Separable(c) => NodeCost::Separable(c.scale(alpha)?),
            NodeCost::MaxLinear(c) => {
                if !alpha.is_positive() {
                    return Err(KernelError::NonPositiveScale(alpha.clone()).into());
                }
                NodeCost::MaxLinear(c.clone())
            }
            NodeCost::Analytic(c) => NodeCost::Analytic(c.scale(alpha)?),
        })
    }

    /// `S'`, the directional derivative at the origin.
    pub fn subderivative_origin(&self) -> NodeCost {
        match self {
            NodeCost::Separable(c) => NodeCost::Separable(c.subderivative_origin()),
            NodeCost::MaxLinear(c) => NodeCost::MaxLinear(c.clone()),
            NodeCost::Analytic(c) => NodeCost::Separable(c.subderivative_origin()),
        }
    }

    /// `S∞`, the horizon function.
    pub fn horizon(&self) -> NodeCost {
        match self {
            NodeCost::Separable(c) => NodeCost::Separable(c.horizon()),
            NodeCost::MaxLinear(c) => NodeCost::MaxLinear(c.clone()),
            NodeCost::Analytic(c) => NodeCost::Separable(c.horizon()),
        }
    }

    /// `∂S(0)`.
    pub fn market_prices(&self) -> PriceSet {
        let closed = |v: Vec<Interval>| {
            PriceSet::Box(
                v.into_iter()
                    .map(|interval| PriceInterval {
                        interval,
                        open_below: false,
                    })
                    .collect(),
            )
        };
        match self {
            NodeCost::Separable(c) => closed(c.market_prices()),
            NodeCost::MaxLinear(c) => PriceSet::Hull(c.vertices().to_vec()),
            NodeCost::Analytic(c) => closed(c.market_prices()),
        }
    }

    /// Closed range of all marginal prices.
    pub fn price_range(&self) -> PriceSet {
        match self {
            NodeCost::Separable(c) => PriceSet::Box(
                c.price_ranges()
                    .into_iter()
                    .map(|interval| PriceInterval {
                        interval,
                        open_below: false,
                    })
                    .collect(),
            ),
            NodeCost::MaxLinear(c) => PriceSet::Hull(c.vertices().to_vec()),
            NodeCost::Analytic(c) => PriceSet::Box(
                c.price_ranges()
                    .into_iter()
                    .map(|(interval, open_below)| PriceInterval { interval, open_below })
                    .collect(),
            ),
        }
    }

    pub fn is_sublinear(&self) -> bool {
        match self {
            NodeCost::Separable(c) => c.is_sublinear(),
            NodeCost::MaxLinear(_) => true,
            NodeCost::Analytic(c) => c.per_asset.iter().all(|a| match a {
                AnalyticComponent::Pwl(f) => f.is_sublinear(),
                AnalyticComponent::Exponential { .. } => false,
            }),
        }
    }

    pub fn is_finite_valued(&self) -> bool {
        match self {
            NodeCost::Separable(c) => c.is_finite_valued(),
            NodeCost::MaxLinear(_) => true,
            NodeCost::Analytic(c) => c.is_finite_valued(),
        }
    }

    /// Whether the cost dominates its horizon function up to a constant,
    /// `S >= S∞ - a`. Holds for finite-valued piecewise-linear costs.
    pub fn horizon_gap_bounded(&self) -> bool {
        self.is_polyhedral() && self.is_finite_valued()
    }
}

/// The pair of a cost process and a constraint process on an event tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MarketInstance {
    pub tree: EventTree,
    pub assets: Vec<String>,
    pub costs: AdaptedProcess<NodeCost>,
    pub constraints: AdaptedProcess<PolyhedralSet>,
}

/// Outcome of a budget check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Feasibility {
    Feasible,
    Infeasible,
    /// Some residual enclosure straddles zero.
    Undetermined,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BudgetReport {
    /// `S_n(Δx_n) + c_n` per node.
    pub residuals: Vec<Enclosure>,
    /// `x_n ∈ D_n` per node.
    pub in_constraints: Vec<bool>,
    /// `x_n = 0` at every terminal node.
    pub liquidated: bool,
}

impl BudgetReport {
    pub fn feasibility(&self) -> Feasibility {
        if !self.liquidated
            || self.in_constraints.iter().any(|ok| !ok)
            || self.residuals.iter().any(|r| r.lo > ExtReal::zero())
        {
            Feasibility::Infeasible
        } else if self.residuals.iter().all(|r| r.hi <= ExtReal::zero()) {
            Feasibility::Feasible
        } else {
            Feasibility::Undetermined
        }
    }

    pub fn is_feasible(&self) -> bool {
        self.feasibility() == Feasibility::Feasible
    }

    /// Largest upper residual.
    pub fn max_residual(&self) -> ExtReal {
        self.residuals.iter().map(|r| r.hi.clone()).max().unwrap_or_else(ExtReal::zero)
    }
}

fn sub(a: &[Rat], b: &[Rat]) -> Vec<Rat> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

impl MarketInstance {
    pub fn new(
        tree: EventTree,
        assets: Vec<String>,
        costs: AdaptedProcess<NodeCost>,
        constraints: AdaptedProcess<PolyhedralSet>,
    ) -> Result<Self, ModelError> {
        let n = tree.len();
        if costs.len() != n || constraints.len() != n {
            return Err(ModelError::Shape(format!(
                "tree has {n} nodes but {} costs and {} constraint sets were given",
                costs.len(),
                constraints.len()
            )));
        }
        let dim = assets.len();
        for (id, c) in costs.iter() {
            if c.dim() != dim {
                return Err(ModelError::Shape(format!(
                    "cost at node {:?} has dimension {}, expected {dim}",
                    tree.node(id).label,
                    c.dim()
                )));
            }
        }
        for (id, d) in constraints.iter() {
            if d.dim() != dim {
                return Err(ModelError::Shape(format!(
                    "constraint at node {:?} has dimension {}, expected {dim}",
                    tree.node(id).label,
                    d.dim()
                )));
            }
        }
        Ok(MarketInstance {
            tree,
            assets,
            costs,
            constraints,
        })
    }

    pub fn unconstrained(tree: EventTree, assets: Vec<String>, costs: AdaptedProcess<NodeCost>) -> Result<Self, ModelError> {
        let d = AdaptedProcess::constant(&tree, PolyhedralSet::whole(assets.len()));
        Self::new(tree, assets, costs, d)
    }

    pub fn dim(&self) -> usize {
        self.assets.len()
    }

    pub fn is_polyhedral(&self) -> bool {
        self.costs.values().iter().all(NodeCost::is_polyhedral)
    }

    pub fn is_sublinear_conical(&self) -> bool {
        self.costs.values().iter().all(NodeCost::is_sublinear)
            && self.constraints.values().iter().all(PolyhedralSet::is_conical)
    }

    pub fn is_finite_valued(&self) -> bool {
        self.costs.values().iter().all(NodeCost::is_finite_valued)
    }

    /// The instance `(α⋆S, αD)` whose claim set is `α C(S, D)`.
    pub fn scaled(&self, alpha: &Rat) -> Result<Self, ModelError> {
        let costs = self
            .costs
            .values()
            .iter()
            .map(|c| c.scale(alpha))
            .collect::<Result<_, _>>()?;
        let constraints = self
            .constraints
            .values()
            .iter()
            .map(|d| d.scaled(alpha))
            .collect::<Result<_, _>>()?;
        Ok(MarketInstance {
            tree: self.tree.clone(),
            assets: self.assets.clone(),
            costs: AdaptedProcess::new(costs),
            constraints: AdaptedProcess::new(constraints),
        })
    }

    fn check_shapes(&self, x: &AdaptedProcess<Vec<Rat>>, c: &AdaptedProcess<Rat>) -> Result<(), ModelError> {
        let n = self.tree.len();
        if x.len() != n || c.len() != n {
            return Err(ModelError::Shape(format!(
                "processes need {n} nodes, got {} portfolios and {} claims",
                x.len(),
                c.len()
            )));
        }
        if let Some(v) = x.values().iter().find(|v| v.len() != self.dim()) {
            return Err(KernelError::Dimension {
                expected: self.dim(),
                found: v.len(),
            }
            .into());
        }
        Ok(())
    }

    /// Portfolio increments `x_n - x_parent(n)` with `x_parent(root) = 0`.
    pub fn increments(&self, x: &AdaptedProcess<Vec<Rat>>) -> AdaptedProcess<Vec<Rat>> {
        AdaptedProcess::from_fn(&self.tree, |n| match self.tree.parent(n) {
            Some(p) => sub(&x[n], &x[p]),
            None => x[n].clone(),
        })
    }

    /// Residuals of `S_n(x_n - x_parent) + c_n <= 0`, constraint membership
    /// and terminal liquidation.
    pub fn budget_check(&self, x: &AdaptedProcess<Vec<Rat>>, c: &AdaptedProcess<Rat>) -> Result<BudgetReport, ModelError> {
        self.check_shapes(x, c)?;
        let dx = self.increments(x);
        let mut residuals = Vec::with_capacity(self.tree.len());
        for n in self.tree.ids() {
            residuals.push(self.costs[n].enclosure(&dx[n])?.add_rat(&c[n]));
        }
        let in_constraints = self.tree.ids().map(|n| self.constraints[n].contains(&x[n])).collect();
        let liquidated = self.tree.leaves().all(|n| x[n].iter().all(Zero::is_zero));
        Ok(BudgetReport {
            residuals,
            in_constraints,
            liquidated,
        })
    }

    /// Cash coordinate check and discounting by the cash price.
    pub fn numeraire_reduce(&self, cash: usize) -> Result<NumeraireReduction, ModelError> {
        if cash >= self.dim() {
            return Err(ModelError::NoNumeraire(format!("asset index {cash} out of range")));
        }
        let mut prices = Vec::with_capacity(self.tree.len());
        let mut discounted = Vec::with_capacity(self.tree.len());
        for n in self.tree.ids() {
            let label = &self.tree.node(n).label;
            let not_linear = || {
                ModelError::NoNumeraire(format!(
                    "cost at node {label:?} is not linear with a positive price in asset {cash}"
                ))
            };
            let (price, rest) = match &self.costs[n] {
                NodeCost::Separable(c) => {
                    let f = &c.per_asset[cash];
                    if !f.is_linear() || !f.slopes()[0].is_positive() {
                        return Err(not_linear());
                    }
                    let s0 = f.slopes()[0].clone();
                    let inv = Rat::one() / &s0;
                    let rest = c
                        .per_asset
                        .iter()
                        .enumerate()
                        .filter(|(j, _)| *j != cash)
                        .map(|(_, g)| g.times(&inv))
                        .collect::<Result<Vec<_>, _>>()?;
                    (s0, NodeCost::Separable(SeparableCost::new(rest)))
                }
                NodeCost::Analytic(c) => {
                    let s0 = match &c.per_asset[cash] {
                        AnalyticComponent::Pwl(f) if f.is_linear() && f.slopes()[0].is_positive() => f.slopes()[0].clone(),
                        _ => return Err(not_linear()),
                    };
                    let rest = c
                        .per_asset
                        .iter()
                        .enumerate()
                        .filter(|(j, _)| *j != cash)
                        .map(|(_, g)| match g {
                            AnalyticComponent::Pwl(f) => Ok(AnalyticComponent::Pwl(f.times(&(Rat::one() / &s0))?)),
                            AnalyticComponent::Exponential { sbar, illiquidity } => Ok(AnalyticComponent::Exponential {
                                sbar: sbar / &s0,
                                illiquidity: illiquidity.clone(),
                            }),
                        })
                        .collect::<Result<Vec<_>, KernelError>>()?;
                    (s0, NodeCost::Analytic(AnalyticCost::new(rest)))
                }
                NodeCost::MaxLinear(_) => return Err(not_linear()),
            };
            let d = &self.constraints[n];
            if d.rows().iter().any(|h| !h.normal[cash].is_zero()) {
                return Err(ModelError::NoNumeraire(format!(
                    "constraint at node {label:?} restricts the cash position"
                )));
            }
            let rows = d
                .rows()
                .iter()
                .map(|h| HalfSpace {
                    normal: h
                        .normal
                        .iter()
                        .enumerate()
                        .filter(|(j, _)| *j != cash)
                        .map(|(_, a)| a.clone())
                        .collect(),
                    offset: h.offset.clone(),
                })
                .collect();
            prices.push(price);
            discounted.push((rest, PolyhedralSet::new(self.dim() - 1, rows)?));
        }
        let (costs, constraints): (Vec<_>, Vec<_>) = discounted.into_iter().unzip();
        Ok(NumeraireReduction {
            cash,
            cash_prices: AdaptedProcess::new(prices),
            costs: AdaptedProcess::new(costs),
            constraints: AdaptedProcess::new(constraints),
        })
    }
}

/// A market with a cash account expressed in units of cash. Cash positions
/// are eliminated: a claim is hedged by the remaining assets `x̃` iff
/// `sum_{n on path} (Ŝ_n(Δx̃_n) + c_n / s⁰_n) <= 0` along every path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NumeraireReduction {
    pub cash: usize,
    pub cash_prices: AdaptedProcess<Rat>,
    /// `Ŝ = S̃ / s⁰` on the non-cash assets.
    pub costs: AdaptedProcess<NodeCost>,
    pub constraints: AdaptedProcess<PolyhedralSet>,
}

impl NumeraireReduction {
    pub fn discount_claim(&self, c: &AdaptedProcess<Rat>) -> AdaptedProcess<Rat> {
        AdaptedProcess::new(
            c.values()
                .iter()
                .zip(self.cash_prices.values())
                .map(|(ci, s)| ci / s)
                .collect(),
        )
    }

    /// Per-node `Ŝ_n(Δx̃_n) + ĉ_n`.
    fn node_terms(&self, tree: &EventTree, xt: &AdaptedProcess<Vec<Rat>>, c: &AdaptedProcess<Rat>) -> Result<Vec<Enclosure>, ModelError> {
        let chat = self.discount_claim(c);
        tree.ids()
            .map(|n| {
                let dx = match tree.parent(n) {
                    Some(p) => sub(&xt[n], &xt[p]),
                    None => xt[n].clone(),
                };
                Ok(self.costs[n].enclosure(&dx)?.add_rat(&chat[n]))
            })
            .collect()
    }

    /// Totals of the discounted budget terms along each root-to-leaf path.
    pub fn path_totals(&self, tree: &EventTree, xt: &AdaptedProcess<Vec<Rat>>, c: &AdaptedProcess<Rat>) -> Result<Vec<(NodeId, Enclosure)>, ModelError> {
        let terms = self.node_terms(tree, xt, c)?;
        Ok(tree
            .leaves()
            .map(|leaf| {
                let total = tree
                    .path(leaf)
                    .iter()
                    .fold(Enclosure::exact(ExtReal::zero()), |acc, n| acc.add(&terms[n.0]));
                (leaf, total)
            })
            .collect())
    }

    /// Reduced condition: `x̃` feasible, liquidated, and every path total `<= 0`.
    pub fn holds(&self, tree: &EventTree, xt: &AdaptedProcess<Vec<Rat>>, c: &AdaptedProcess<Rat>) -> Result<Feasibility, ModelError> {
        if tree.leaves().any(|n| xt[n].iter().any(|v| !v.is_zero()))
            || tree.ids().any(|n| !self.constraints[n].contains(&xt[n]))
        {
            return Ok(Feasibility::Infeasible);
        }
        let totals = self.path_totals(tree, xt, c)?;
        Ok(if totals.iter().any(|(_, e)| e.lo > ExtReal::zero()) {
            Feasibility::Infeasible
        } else if totals.iter().all(|(_, e)| e.hi <= ExtReal::zero()) {
            Feasibility::Feasible
        } else {
            Feasibility::Undetermined
        })
    }

    /// Rebuilds the full portfolio by paying each node's discounted cost
    /// out of the cash position; upper enclosures keep it conservative.
    pub fn lift(&self, tree: &EventTree, xt: &AdaptedProcess<Vec<Rat>>, c: &AdaptedProcess<Rat>) -> Result<AdaptedProcess<Vec<Rat>>, ModelError> {
        let terms = self.node_terms(tree, xt, c)?;
        let mut cash: Vec<Rat> = vec![Rat::zero(); tree.len()];
        for n in tree.ids() {
            if tree.is_leaf(n) {
                continue;
            }
            let prev = tree.parent(n).map_or_else(Rat::zero, |p| cash[p.0].clone());
            let term = match &terms[n.0].hi {
                ExtReal::Finite(v) => v.clone(),
                _ => {
                    return Err(ModelError::Shape(format!(
                        "portfolio leaves the cost domain at node {:?}",
                        tree.node(n).label
                    )))
                }
            };
            cash[n.0] = prev - term;
        }
        Ok(AdaptedProcess::from_fn(tree, |n| {
            let mut v = xt[n].clone();
            v.insert(self.cash, cash[n.0].clone());
            v
        }))
    }
}

/// Convenience: the single-asset linear cost `x -> s x` at every node.
pub fn linear_scalar_costs(prices: &AdaptedProcess<Rat>) -> AdaptedProcess<NodeCost> {
    prices.map(|s| NodeCost::Separable(SeparableCost::new(vec![ScalarPwl::linear(s.clone())])))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::costs::{exponential_cost, linear_cost, MaxLinearCost};
    use crate::num::{exp_bounds, frac, int};
    use proptest::prelude::*;

    fn i1() -> MarketInstance {
        let tree = EventTree::deterministic(1);
        let costs = linear_scalar_costs(&AdaptedProcess::new(vec![int(1), int(2)]));
        MarketInstance::unconstrained(tree, vec!["risky".into()], costs).unwrap()
    }

    fn tangent() -> MarketInstance {
        let tree = EventTree::deterministic(1);
        let s1 = AnalyticCost::new(vec![AnalyticComponent::exponential(int(1), int(1)).unwrap()]);
        let costs = AdaptedProcess::new(vec![NodeCost::Separable(linear_cost(&[int(1)])), NodeCost::Analytic(s1)]);
        MarketInstance::unconstrained(tree, vec!["x".into()], costs).unwrap()
    }

    fn vecs(v: &[i64]) -> AdaptedProcess<Vec<Rat>> {
        AdaptedProcess::new(v.iter().map(|x| vec![int(*x)]).collect())
    }

    fn scalars(v: &[Rat]) -> AdaptedProcess<Rat> {
        AdaptedProcess::new(v.to_vec())
    }

    #[test]
    fn budget_of_the_deterministic_linear_market() {
        let m = i1();
        let r = m.budget_check(&vecs(&[-1, 0]), &scalars(&[int(1), int(-2)])).unwrap();
        assert_eq!(r.residuals[0], Enclosure::exact(ExtReal::zero()));
        assert_eq!(r.residuals[1], Enclosure::exact(ExtReal::zero()));
        assert!(r.is_feasible());
        let zero = m.budget_check(&vecs(&[0, 0]), &scalars(&[int(0), int(0)])).unwrap();
        assert!(zero.is_feasible());
        assert!(zero.residuals.iter().all(|e| e.hi == ExtReal::zero()));
        let unliquidated = m.budget_check(&vecs(&[0, 1]), &scalars(&[int(0), int(-5)])).unwrap();
        assert_eq!(unliquidated.feasibility(), Feasibility::Infeasible);
        assert!(m.budget_check(&vecs(&[0]), &scalars(&[int(0), int(0)])).is_err());
    }

    #[test]
    fn tangent_boundary_is_sharp() {
        let m = tangent();
        let c0 = frac(1, 2);
        // 1 - e^{c0}, bracketed from both sides by a small margin.
        let (lo, hi) = exp_bounds(&c0);
        let delta = frac(1, 1_000_000);
        let x = vecs(&[0, 0]).map(|_| vec![-c0.clone()]);
        let x = AdaptedProcess::new(vec![x.values()[0].clone(), vec![int(0)]]);
        let inside = m.budget_check(&x, &scalars(&[c0.clone(), Rat::one() - &hi - &delta])).unwrap();
        assert!(inside.is_feasible());
        let outside = m.budget_check(&x, &scalars(&[c0.clone(), Rat::one() - &lo + &delta])).unwrap();
        assert_eq!(outside.feasibility(), Feasibility::Infeasible);
        let _ = outside.max_residual();
    }

    #[test]
    fn scaled_instance_matches_definition() {
        let m = i1();
        let s = m.scaled(&int(3)).unwrap();
        assert_eq!(s.costs[NodeId(1)], m.costs[NodeId(1)]);
        let boxed = MarketInstance::new(
            EventTree::deterministic(1),
            vec!["x".into()],
            m.costs.clone(),
            AdaptedProcess::new(vec![PolyhedralSet::boxed(&[Some(int(-1))], &[Some(int(1))]).unwrap(); 2]),
        )
        .unwrap();
        let b3 = boxed.scaled(&int(3)).unwrap();
        assert!(b3.constraints[NodeId(0)].contains(&[int(3)]));
        assert!(!b3.constraints[NodeId(0)].contains(&[int(4)]));
    }

    #[test]
    fn derived_costs_of_node_types() {
        let e = NodeCost::Analytic(exponential_cost(&int(3), &int(1)).unwrap());
        assert!(!e.is_polyhedral());
        assert!(e.polyhedral().is_none());
        let d = e.subderivative_origin();
        assert_eq!(d.enclosure(&[int(0), int(1)]).unwrap().hi, ExtReal::Finite(int(3)));
        let h = e.horizon();
        assert_eq!(h.enclosure(&[int(5), int(-1)]).unwrap().hi, ExtReal::Finite(int(5)));
        assert_eq!(h.enclosure(&[int(5), int(1)]).unwrap().hi, ExtReal::PosInf);
        match e.price_range() {
            PriceSet::Box(iv) => assert!(iv[1].open_below && !iv[0].open_below),
            PriceSet::Hull(_) => panic!("expected a box"),
        }
        let ml = NodeCost::MaxLinear(MaxLinearCost::new(vec![vec![int(1)], vec![int(2)]]).unwrap());
        assert!(ml.is_sublinear());
        assert_eq!(ml.scale(&int(5)).unwrap(), ml);
        assert_eq!(ml.market_prices().distance(&[int(3)]).unwrap(), ExtReal::Finite(int(1)));
        assert_eq!(ml.market_prices().distance(&[frac(3, 2)]).unwrap(), ExtReal::zero());
    }

    #[test]
    fn rejects_mismatched_instances() {
        let tree = EventTree::deterministic(1);
        let costs = linear_scalar_costs(&AdaptedProcess::new(vec![int(1)]));
        assert!(MarketInstance::unconstrained(tree.clone(), vec!["x".into()], costs).is_err());
        let costs = linear_scalar_costs(&AdaptedProcess::new(vec![int(1), int(1)]));
        assert!(MarketInstance::unconstrained(tree, vec!["x".into(), "y".into()], costs).is_err());
    }

    fn cash_risky(prices: &[i64]) -> MarketInstance {
        let tree = EventTree::binomial(2, &frac(1, 2)).unwrap();
        let costs = AdaptedProcess::from_fn(&tree, |n| {
            NodeCost::Separable(linear_cost(&[int(1), int(prices[n.0])]))
        });
        MarketInstance::unconstrained(tree, vec!["cash".into(), "risky".into()], costs).unwrap()
    }

    #[test]
    fn numeraire_with_linear_prices_is_a_stochastic_integral() {
        let m = cash_risky(&[4, 6, 3, 7, 5, 4, 2]);
        let red = m.numeraire_reduce(0).unwrap();
        let tree = &m.tree;
        let xt = AdaptedProcess::from_fn(tree, |n| if tree.is_leaf(n) { vec![int(0)] } else { vec![int(n.0 as i64 + 1)] });
        let c = AdaptedProcess::from_fn(tree, |n| frac(n.0 as i64 % 3 - 1, 2));
        let s = |n: NodeId| int([4, 6, 3, 7, 5, 4, 2][n.0]);
        for (leaf, total) in red.path_totals(tree, &xt, &c).unwrap() {
            let path = tree.path(leaf);
            let claims: Rat = path.iter().map(|n| c[*n].clone()).sum();
            let integral: Rat = path.windows(2).map(|w| &xt[w[0]][0] * (s(w[1]) - s(w[0]))).sum();
            assert_eq!(total.hi, ExtReal::Finite(claims - integral));
        }
        let zero = AdaptedProcess::constant(tree, Rat::zero());
        assert_eq!(red.discount_claim(&zero), zero);
        let xz = AdaptedProcess::constant(tree, vec![Rat::zero()]);
        assert_eq!(red.holds(tree, &xz, &zero).unwrap(), Feasibility::Feasible);
    }

    #[test]
    fn lifted_portfolio_satisfies_the_budget() {
        let m = cash_risky(&[4, 6, 3, 7, 5, 4, 2]);
        let red = m.numeraire_reduce(0).unwrap();
        let tree = &m.tree;
        let xt = AdaptedProcess::from_fn(tree, |n| if tree.is_leaf(n) { vec![int(0)] } else { vec![int(1)] });
        // Claim paying the hedge gains at the leaves.
        let c = AdaptedProcess::from_fn(tree, |n| if n.0 == 0 { int(-4) } else if tree.is_leaf(n) { int([4, 6, 3, 7, 5, 4, 2][n.0]) } else { int(0) });
        assert_eq!(red.holds(tree, &xt, &c).unwrap(), Feasibility::Feasible);
        let x = red.lift(tree, &xt, &c).unwrap();
        assert!(m.budget_check(&x, &c).unwrap().is_feasible());
    }

    #[test]
    fn numeraire_requires_linear_cash() {
        let m = i1();
        assert!(m.numeraire_reduce(0).is_ok());
        assert!(m.numeraire_reduce(1).is_err());
        let tree = EventTree::deterministic(0);
        let ml = NodeCost::MaxLinear(MaxLinearCost::new(vec![vec![int(1)]]).unwrap());
        let m = MarketInstance::unconstrained(tree, vec!["x".into()], AdaptedProcess::new(vec![ml])).unwrap();
        assert!(matches!(m.numeraire_reduce(0), Err(ModelError::NoNumeraire(_))));
    }

    proptest! {
        #[test]
        fn lowering_claims_keeps_feasibility(
            x0 in -5i64..5, x1 in -5i64..5, cuts in proptest::collection::vec(0i64..4, 7)
        ) {
            let m = cash_risky(&[4, 6, 3, 7, 5, 4, 2]);
            let tree = &m.tree;
            let x = AdaptedProcess::from_fn(tree, |n| {
                if tree.is_leaf(n) { vec![int(0), int(0)] } else { vec![int(x0), int(x1 + n.0 as i64)] }
            });
            // Tightest claim for this portfolio, then lowered.
            let dx = m.increments(&x);
            let tight = AdaptedProcess::from_fn(tree, |n| {
                -m.costs[n].enclosure(&dx[n]).unwrap().hi.finite().unwrap().clone()
            });
            prop_assert!(m.budget_check(&x, &tight).unwrap().is_feasible());
            let lower = AdaptedProcess::from_fn(tree, |n| &tight[n] - int(cuts[n.0]));
            prop_assert!(m.budget_check(&x, &lower).unwrap().is_feasible());
        }
    }
}
