//! Arbitrage checks, deflator search, profit-function duality and claim
//! membership, all reduced to linear programs on the event tree.

mod arbitrage;
mod deflator;
mod encode;
mod membership;
mod sigma;

use thiserror::Error;

use crate::costs::{uniform_grid, CostError};
use crate::kernel::{KernelError, PolyhedralSet};
use crate::lp::{LpError, SolverOptions};
use crate::market::{AdaptedProcess, MarketInstance, ModelError};
use crate::num::{frac, int, Rat};

pub use arbitrage::{
    check_arbitrage, check_marginal_arbitrage, check_scalable_arbitrage, sandwich_instances, ArbitrageVerdict,
    ClaimCertificate, Method, VerdictFlags,
};
pub use deflator::{
    find_deflator, find_deflator_at, verify_deflator, DeflatorCertificate, DeflatorKind, DeflatorOutcome,
    DeflatorResiduals,
};
pub use membership::{
    membership, membership_sandwich, membership_scaled, numeraire_membership, Membership, SandwichMembership,
    SandwichModels,
};
pub use sigma::{sigma_dual, sigma_primal, SigmaDual, SigmaPrimal};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Cost(#[from] CostError),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("instance is not polyhedral: {0}")]
    NotPolyhedral(String),
    #[error("invalid input: {0}")]
    Input(String),
}

#[derive(Debug, Clone)]
pub struct AnalysisOptions {
    pub solver: SolverOptions,
    /// Decreasing lower bounds tried for deflators, with the root fixed at 1.
    pub epsilons: Vec<Rat>,
    /// Margin `δ` used where a price range is open at its lower end.
    pub open_margin: Rat,
    /// Breakpoints for piecewise-linear bounds of exponential costs; must contain 0.
    pub grid: Vec<Rat>,
    /// Largest acceptable gap between the two bounds on the grid hull.
    pub sandwich_tolerance: Rat,
    /// Cutting-plane rounds for exact membership of exponential instances.
    pub kelley_rounds: usize,
    pub initial_cap: Rat,
    pub cap_doublings: usize,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions {
            solver: SolverOptions::default(),
            epsilons: vec![frac(1, 100), frac(1, 10_000), frac(1, 1_000_000)],
            open_margin: frac(1, 1_000_000),
            grid: uniform_grid(&int(4), 16),
            sandwich_tolerance: frac(1, 100),
            kelley_rounds: 80,
            initial_cap: int(1),
            cap_doublings: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    /// `(S', D')`: directional derivatives and tangent cones at the origin.
    Marginal,
    /// `(S∞, D∞)`: horizon functions and horizon cones.
    Scalable,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DerivedModel {
    pub kind: ModelKind,
    pub instance: MarketInstance,
}

impl DerivedModel {
    /// Structural check that all costs are sublinear and all sets conical.
    pub fn is_conical(&self) -> bool {
        self.instance.is_sublinear_conical()
    }
}

/// Node-wise sublinear model of an instance; always polyhedral.
pub fn derive_model(m: &MarketInstance, kind: ModelKind) -> Result<DerivedModel, AnalysisError> {
    let costs = m.costs.map(|c| match kind {
        ModelKind::Marginal => c.subderivative_origin(),
        ModelKind::Scalable => c.horizon(),
    });
    let constraints = m
        .constraints
        .values()
        .iter()
        .map(|d| {
            let cone = match kind {
                ModelKind::Marginal => d.tangent_cone_origin(),
                ModelKind::Scalable => d.horizon_cone(),
            };
            PolyhedralSet::from_cone(&cone)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let instance = MarketInstance::new(m.tree.clone(), m.assets.clone(), costs, AdaptedProcess::new(constraints))?;
    Ok(DerivedModel { kind, instance })
}

#[cfg(test)]
pub(crate) mod fixtures {
    use crate::costs::{linear_cost, AnalyticComponent, AnalyticCost};
    use crate::market::{linear_scalar_costs, AdaptedProcess, EventTree, MarketInstance, NodeCost};
    use crate::num::int;

    /// One risky asset, deterministic prices 1 then 2.
    pub fn i1() -> MarketInstance {
        let tree = EventTree::deterministic(1);
        let costs = linear_scalar_costs(&AdaptedProcess::new(vec![int(1), int(2)]));
        MarketInstance::unconstrained(tree, vec!["risky".into()], costs).unwrap()
    }

    /// The same market with a cash account.
    pub fn i2() -> MarketInstance {
        let tree = EventTree::deterministic(1);
        let costs = AdaptedProcess::new(vec![
            NodeCost::Separable(linear_cost(&[int(1), int(1)])),
            NodeCost::Separable(linear_cost(&[int(1), int(2)])),
        ]);
        MarketInstance::unconstrained(tree, vec!["cash".into(), "risky".into()], costs).unwrap()
    }

    /// Linear cost today, `e^x - 1` tomorrow.
    pub fn tangent() -> MarketInstance {
        let tree = EventTree::deterministic(1);
        let s1 = AnalyticCost::new(vec![AnalyticComponent::exponential(int(1), int(1)).unwrap()]);
        let costs = AdaptedProcess::new(vec![NodeCost::Separable(linear_cost(&[int(1)])), NodeCost::Analytic(s1)]);
        MarketInstance::unconstrained(tree, vec!["x".into()], costs).unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;
    use crate::kernel::ScalarPwl;
    use crate::market::{NodeCost, NodeId};
    use crate::num::ExtReal;

    #[test]
    fn derived_models_of_the_tangent_example() {
        let m = tangent();
        let d = derive_model(&m, ModelKind::Marginal).unwrap();
        assert!(d.is_conical());
        for n in [NodeId(0), NodeId(1)] {
            match &d.instance.costs[n] {
                NodeCost::Separable(c) => assert_eq!(c.per_asset[0], ScalarPwl::linear(int(1))),
                other => panic!("unexpected cost {other:?}"),
            }
        }
        let s = derive_model(&m, ModelKind::Scalable).unwrap();
        let h = &s.instance.costs[NodeId(1)];
        assert_eq!(h.enclosure(&[int(-3)]).unwrap().hi, ExtReal::zero());
        assert_eq!(h.enclosure(&[int(1)]).unwrap().hi, ExtReal::PosInf);
    }

    #[test]
    fn sublinear_instances_are_their_own_models() {
        let m = i2();
        assert_eq!(derive_model(&m, ModelKind::Marginal).unwrap().instance, m);
        assert_eq!(derive_model(&m, ModelKind::Scalable).unwrap().instance, m);
    }
}
