use num_traits::{One, Signed, Zero};

use super::encode::{encode_budget, tight_claims, BudgetLp, Claims};
use super::{derive_model, AnalysisError, AnalysisOptions, ModelKind};
use crate::lp::{Arithmetic, Sense, Status};
use crate::market::{AdaptedProcess, MarketInstance, NodeCost};
use crate::num::{from_f64, Rat};

/// Portfolio `x` and claim `c` satisfying the budget constraint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClaimCertificate {
    pub x: AdaptedProcess<Vec<Rat>>,
    pub c: AdaptedProcess<Rat>,
}

/// How a verdict was reached.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Exact LP on a polyhedral instance.
    Exact,
    /// No arbitrage under a cheaper lower model, hence none for the true cost.
    LowerModel,
    /// Arbitrage under a dearer upper model, hence also for the true cost.
    UpperModel,
    /// The two bounding models disagree.
    Inconclusive,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct VerdictFlags {
    /// Every `S'` is finite-valued, as the converse theorems require.
    pub derivative_finite: bool,
    /// The positive hull of the claim set may fail to be closed.
    pub closure_sensitive: bool,
    /// `S >= S∞ - a` and `D ⊂ D∞ + aB` were verified (scalable checks only).
    pub hypotheses_verified: Option<bool>,
    /// Largest gap of the piecewise-linear bounds, when they were used.
    pub sandwich_gap: Option<Rat>,
}

#[derive(Debug, Clone)]
pub struct ArbitrageVerdict {
    /// `None` when the bounding models disagree.
    pub exists: Option<bool>,
    pub certificate: Option<ClaimCertificate>,
    /// Optimal `sum c_n` with `0 <= c <= 1`.
    pub lp_value: Rat,
    pub method: Method,
    pub flags: VerdictFlags,
    pub iterations: usize,
}

struct LpVerdict {
    exists: bool,
    value: Rat,
    certificate: Option<ClaimCertificate>,
    iterations: usize,
}

fn float_threshold() -> Rat {
    from_f64(1e-7).unwrap()
}

/// `max sum c` over budget-feasible claims with `0 <= c <= 1`.
fn arbitrage_lp(m: &MarketInstance, opts: &AnalysisOptions) -> Result<LpVerdict, AnalysisError> {
    let enc: BudgetLp = encode_budget(
        m,
        Claims::Variable {
            lower: Some(Rat::zero()),
            upper: Some(Rat::one()),
        },
        false,
        Sense::Maximize,
    )?;
    let mut lp = enc.lp.clone();
    for c in enc.c.iter().flatten() {
        lp.set_objective(*c, Rat::one());
    }
    let sol = lp.solve_with(&opts.solver)?;
    if sol.status != Status::Optimal {
        return Err(AnalysisError::Input(format!("arbitrage LP ended with status {:?}", sol.status)));
    }
    let exact = opts.solver.arithmetic == Arithmetic::Rational;
    let exists = if exact {
        sol.objective.is_positive()
    } else {
        sol.objective > float_threshold()
    };
    let certificate = if exists {
        let x = enc.portfolio(m, &sol);
        let mut c = enc.claims(m, &sol);
        if !exact {
            // Floating solutions are repaired to claims the portfolio finances exactly.
            if let Some(tight) = tight_claims(m, &x)? {
                c = AdaptedProcess::new(
                    c.values()
                        .iter()
                        .zip(tight.values())
                        .map(|(a, b)| if a < b { a.clone() } else { b.clone() })
                        .collect(),
                );
            }
        }
        Some(ClaimCertificate { x, c })
    } else {
        None
    };
    Ok(LpVerdict {
        exists,
        value: sol.objective,
        certificate,
        iterations: sol.iterations,
    })
}

/// Lower and upper polyhedral models of an instance with exponential costs,
/// and the largest gap between them.
pub fn sandwich_instances(m: &MarketInstance, opts: &AnalysisOptions) -> Result<(MarketInstance, MarketInstance, Rat), AnalysisError> {
    let mut lower = Vec::with_capacity(m.tree.len());
    let mut upper = Vec::with_capacity(m.tree.len());
    let mut gap = Rat::zero();
    for cost in m.costs.values() {
        match cost {
            NodeCost::Analytic(a) => {
                let s = a.sandwich(&opts.grid, &opts.sandwich_tolerance)?;
                if s.max_gap > gap {
                    gap = s.max_gap.clone();
                }
                lower.push(NodeCost::Separable(s.lower));
                upper.push(NodeCost::Separable(s.upper));
            }
            other => {
                lower.push(other.clone());
                upper.push(other.clone());
            }
        }
    }
    let build = |costs| MarketInstance::new(m.tree.clone(), m.assets.clone(), AdaptedProcess::new(costs), m.constraints.clone());
    Ok((build(lower)?, build(upper)?, gap))
}

fn derivative_finite(m: &MarketInstance) -> bool {
    m.costs.values().iter().all(|c| c.subderivative_origin().is_finite_valued())
}

/// Is there a nonzero nonnegative claim that can be superhedged at zero cost?
pub fn check_arbitrage(m: &MarketInstance, opts: &AnalysisOptions) -> Result<ArbitrageVerdict, AnalysisError> {
    let flags = VerdictFlags {
        derivative_finite: derivative_finite(m),
        ..VerdictFlags::default()
    };
    if m.is_polyhedral() {
        let v = arbitrage_lp(m, opts)?;
        return Ok(ArbitrageVerdict {
            exists: Some(v.exists),
            certificate: v.certificate,
            lp_value: v.value,
            method: Method::Exact,
            flags,
            iterations: v.iterations,
        });
    }
    let (lower, upper, gap) = sandwich_instances(m, opts)?;
    let flags = VerdictFlags {
        sandwich_gap: Some(gap),
        ..flags
    };
    let lo = arbitrage_lp(&lower, opts)?;
    if !lo.exists {
        return Ok(ArbitrageVerdict {
            exists: Some(false),
            certificate: None,
            lp_value: lo.value,
            method: Method::LowerModel,
            flags,
            iterations: lo.iterations,
        });
    }
    let up = arbitrage_lp(&upper, opts)?;
    if up.exists {
        return Ok(ArbitrageVerdict {
            exists: Some(true),
            certificate: up.certificate,
            lp_value: up.value,
            method: Method::UpperModel,
            flags,
            iterations: lo.iterations + up.iterations,
        });
    }
    Ok(ArbitrageVerdict {
        exists: None,
        certificate: None,
        lp_value: lo.value,
        method: Method::Inconclusive,
        flags,
        iterations: lo.iterations + up.iterations,
    })
}

/// Arbitrage in the marginal model `(S', D')`.
pub fn check_marginal_arbitrage(m: &MarketInstance, opts: &AnalysisOptions) -> Result<ArbitrageVerdict, AnalysisError> {
    let d = derive_model(m, ModelKind::Marginal)?;
    let mut v = check_arbitrage(&d.instance, opts)?;
    v.flags.derivative_finite = derivative_finite(m);
    v.flags.closure_sensitive = !m.is_polyhedral();
    Ok(v)
}

/// Arbitrage in the scalable model `(S∞, D∞)`.
pub fn check_scalable_arbitrage(m: &MarketInstance, opts: &AnalysisOptions) -> Result<ArbitrageVerdict, AnalysisError> {
    let d = derive_model(m, ModelKind::Scalable)?;
    let mut v = check_arbitrage(&d.instance, opts)?;
    v.flags.derivative_finite = derivative_finite(m);
    // Polyhedral sets always satisfy D ⊂ D∞ + aB; the cost condition needs
    // finite piecewise-linear costs.
    v.flags.hypotheses_verified = Some(m.costs.values().iter().all(NodeCost::horizon_gap_bounded));
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::*;
    use super::*;
    use crate::costs::{build_order_book, linear_cost, OrderBookSide};
    use crate::kernel::SeparableCost;
    use crate::kernel::PolyhedralSet;
    use crate::lp::SolverOptions;
    use crate::market::{EventTree, NodeId};
    use crate::num::{frac, int, ExtReal};

    fn opts() -> AnalysisOptions {
        AnalysisOptions::default()
    }

    #[test]
    fn risky_only_market_has_no_arbitrage() {
        let v = check_arbitrage(&i1(), &opts()).unwrap();
        assert_eq!(v.exists, Some(false));
        assert!(v.lp_value.is_zero());
        assert_eq!(v.method, Method::Exact);
    }

    #[test]
    fn cash_and_risky_market_has_arbitrage() {
        let m = i2();
        for v in [
            check_arbitrage(&m, &opts()).unwrap(),
            check_marginal_arbitrage(&m, &opts()).unwrap(),
            check_scalable_arbitrage(&m, &opts()).unwrap(),
        ] {
            assert_eq!(v.exists, Some(true));
            let cert = v.certificate.unwrap();
            assert!(m.budget_check(&cert.x, &cert.c).unwrap().is_feasible());
            assert!(cert.c.values().iter().all(|c| !c.is_negative()));
            assert!(cert.c.values().iter().any(|c| c.is_positive()));
        }
        // The textbook certificate: borrow cash, buy the asset, sell it later.
        let x = AdaptedProcess::new(vec![vec![int(-1), int(1)], vec![int(0), int(0)]]);
        let c = AdaptedProcess::new(vec![int(0), int(1)]);
        assert!(m.budget_check(&x, &c).unwrap().is_feasible());
    }

    #[test]
    fn tangent_example_has_no_arbitrage() {
        let m = tangent();
        let v = check_arbitrage(&m, &opts()).unwrap();
        assert_eq!(v.exists, Some(false));
        assert_eq!(v.method, Method::LowerModel);
        let mv = check_marginal_arbitrage(&m, &opts()).unwrap();
        assert_eq!(mv.exists, Some(false));
        assert!(mv.flags.closure_sensitive);
        let sv = check_scalable_arbitrage(&m, &opts()).unwrap();
        assert_eq!(sv.exists, Some(false));
        assert_eq!(sv.flags.hypotheses_verified, Some(false));
    }

    #[test]
    fn finite_bid_depth_blocks_scalable_arbitrage() {
        // Up to one unit is offered for free today and two units can be sold
        // at 1 tomorrow; beyond that selling earns nothing.
        let tree = EventTree::deterministic(1);
        let today = build_order_book(
            &OrderBookSide::default(),
            &OrderBookSide::new(vec![(int(0), ExtReal::Finite(int(1))), (int(5), ExtReal::PosInf)]),
        )
        .unwrap();
        let tomorrow = build_order_book(
            &OrderBookSide::new(vec![(int(1), ExtReal::Finite(int(2)))]),
            &OrderBookSide::new(vec![(int(2), ExtReal::PosInf)]),
        )
        .unwrap();
        let costs = AdaptedProcess::new(vec![
            NodeCost::Separable(SeparableCost::new(vec![today])),
            NodeCost::Separable(SeparableCost::new(vec![tomorrow])),
        ]);
        let m = MarketInstance::unconstrained(tree, vec!["x".into()], costs).unwrap();
        assert_eq!(check_arbitrage(&m, &opts()).unwrap().exists, Some(true));
        assert_eq!(check_scalable_arbitrage(&m, &opts()).unwrap().exists, Some(false));
    }

    #[test]
    fn bounded_positions_block_scalable_arbitrage() {
        let m = i2();
        let boxed = PolyhedralSet::boxed(&[Some(int(-1)), Some(int(-1))], &[Some(int(1)), Some(int(1))]).unwrap();
        let m = MarketInstance::new(m.tree.clone(), m.assets.clone(), m.costs.clone(), AdaptedProcess::constant(&m.tree, boxed)).unwrap();
        assert_eq!(check_arbitrage(&m, &opts()).unwrap().exists, Some(true));
        let v = check_scalable_arbitrage(&m, &opts()).unwrap();
        assert_eq!(v.exists, Some(false));
        assert_eq!(v.flags.hypotheses_verified, Some(true));
    }

    #[test]
    fn float_mode_agrees_on_small_instances() {
        let mut o = opts();
        o.solver = SolverOptions {
            arithmetic: Arithmetic::Float,
            ..SolverOptions::default()
        };
        assert_eq!(check_arbitrage(&i1(), &o).unwrap().exists, Some(false));
        let v = check_arbitrage(&i2(), &o).unwrap();
        assert_eq!(v.exists, Some(true));
        let cert = v.certificate.unwrap();
        assert!(i2().budget_check(&cert.x, &cert.c).unwrap().is_feasible());
    }

    #[test]
    fn sandwich_models_bracket_the_cost() {
        let m = tangent();
        let (lower, upper, gap) = sandwich_instances(&m, &opts()).unwrap();
        assert!(gap.is_positive());
        for k in -20..=20 {
            let x = frac(k, 5);
            let t = m.costs[NodeId(1)].enclosure(std::slice::from_ref(&x)).unwrap();
            assert!(lower.costs[NodeId(1)].enclosure(std::slice::from_ref(&x)).unwrap().hi <= t.lo);
            assert!(t.hi <= upper.costs[NodeId(1)].enclosure(&[x]).unwrap().lo);
        }
        let _ = linear_cost(&[int(1)]);
    }
}
