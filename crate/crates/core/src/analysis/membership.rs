//! Is a claim process superhedgeable from zero wealth?

use num_traits::{One, Signed, Zero};

use super::arbitrage::sandwich_instances;
use super::encode::{encode_budget, encode_cost, Claims, Terms};
use super::{AnalysisError, AnalysisOptions};
use crate::costs::AnalyticComponent;
use crate::kernel::{ScalarPwl, SeparableCost};
use crate::lp::{LinearProgram, Relation, Sense, Status};
use crate::market::{AdaptedProcess, MarketInstance, NodeCost, NodeId};
use crate::num::{round_down, Rat};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Membership {
    /// `None` when the cutting-plane rounds ran out near the boundary.
    pub member: Option<bool>,
    /// Hedging portfolio, checked against the exact costs.
    pub portfolio: Option<AdaptedProcess<Vec<Rat>>>,
    /// Cutting-plane rounds, 1 for polyhedral instances.
    pub rounds: usize,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SandwichMembership {
    /// Membership for the cheaper model; `false` certifies non-membership.
    pub lower: bool,
    /// Membership for the dearer model; `true` certifies membership.
    pub upper: bool,
    pub member: Option<bool>,
    pub gap: Rat,
}

fn check_claims(m: &MarketInstance, c: &AdaptedProcess<Rat>) -> Result<(), AnalysisError> {
    if c.len() != m.tree.len() {
        return Err(AnalysisError::Input(format!("claim has {} values for {} nodes", c.len(), m.tree.len())));
    }
    Ok(())
}

fn polyhedral_membership(m: &MarketInstance, c: &AdaptedProcess<Rat>, opts: &AnalysisOptions) -> Result<Membership, AnalysisError> {
    let enc = encode_budget(m, Claims::Fixed(c), false, Sense::Minimize)?;
    let sol = enc.lp.solve_with(&opts.solver)?;
    let member = sol.status != Status::Infeasible;
    Ok(Membership {
        member: Some(member),
        portfolio: member.then(|| enc.portfolio(m, &sol)),
        rounds: 1,
        iterations: sol.iterations,
    })
}

/// Cut points and their lower lines for one exponential component.
#[derive(Default)]
struct CutSet {
    points: Vec<Rat>,
    lines: Vec<(Rat, Rat)>,
}

impl CutSet {
    fn add(&mut self, f: &AnalyticComponent, p: Rat) -> bool {
        if self.points.contains(&p) {
            return false;
        }
        if let Some(line) = f.lower_line(&p) {
            self.lines.push(line);
        }
        self.points.push(p);
        true
    }
}

/// Cuts per node and asset; `None` for piecewise-linear components.
type Cuts = Vec<Vec<Option<CutSet>>>;

/// Cut points are rounded to this many bits so exact LP iterates with long
/// denominators do not slow the exponential bounds down.
const CUT_BITS: usize = 32;

fn initial_cuts(m: &MarketInstance) -> Cuts {
    m.costs
        .values()
        .iter()
        .map(|cost| match cost {
            NodeCost::Analytic(a) => a
                .per_asset
                .iter()
                .map(|f| match f {
                    AnalyticComponent::Exponential { .. } => {
                        let mut cuts = CutSet::default();
                        cuts.add(f, Rat::zero());
                        Some(cuts)
                    }
                    AnalyticComponent::Pwl(_) => None,
                })
                .collect(),
            _ => vec![],
        })
        .collect()
}

/// Outer model: each exponential replaced by the maximum of lines below it,
/// including its horizontal asymptote.
fn cut_model(m: &MarketInstance, cuts: &Cuts) -> Result<MarketInstance, AnalysisError> {
    let costs = m
        .costs
        .values()
        .iter()
        .zip(cuts)
        .map(|(cost, sets)| match cost {
            NodeCost::Analytic(a) => {
                let per_asset = a
                    .per_asset
                    .iter()
                    .zip(sets)
                    .map(|(f, set)| match (f, set) {
                        (AnalyticComponent::Exponential { sbar, illiquidity }, Some(set)) => {
                            let mut lines = set.lines.clone();
                            lines.push((Rat::zero(), -(sbar / illiquidity)));
                            ScalarPwl::from_lines(&lines)
                        }
                        (AnalyticComponent::Pwl(g), _) => Ok(g.clone()),
                        (AnalyticComponent::Exponential { .. }, None) => unreachable!("exponential components always carry cuts"),
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(NodeCost::Separable(SeparableCost::new(per_asset)))
            }
            other => Ok(other.clone()),
        })
        .collect::<Result<Vec<_>, AnalysisError>>()?;
    Ok(MarketInstance::new(m.tree.clone(), m.assets.clone(), AdaptedProcess::new(costs), m.constraints.clone())?)
}

/// Cutting planes maximizing the uniform budget slack `τ <= 1`: a negative
/// relaxed optimum proves non-membership, an iterate passing the exact
/// budget check proves membership.
fn kelley_membership(m: &MarketInstance, c: &AdaptedProcess<Rat>, opts: &AnalysisOptions) -> Result<Membership, AnalysisError> {
    let mut cuts = initial_cuts(m);
    let mut iterations = 0;
    for round in 1..=opts.kelley_rounds {
        let model = cut_model(m, &cuts)?;
        let enc = encode_budget(&model, Claims::Fixed(c), true, Sense::Maximize)?;
        let mut lp = enc.lp.clone();
        let tau = enc.tau.expect("slack variable requested");
        lp.set_objective(tau, Rat::one());
        let sol = lp.solve_with(&opts.solver)?;
        iterations += sol.iterations;
        match sol.status {
            Status::Infeasible => {
                return Ok(Membership {
                    member: Some(false),
                    portfolio: None,
                    rounds: round,
                    iterations,
                })
            }
            Status::Unbounded => return Err(AnalysisError::Input("slack LP unbounded despite its cap".into())),
            Status::Optimal => {}
        }
        if sol.objective.is_negative() {
            return Ok(Membership {
                member: Some(false),
                portfolio: None,
                rounds: round,
                iterations,
            });
        }
        let x = enc.portfolio(m, &sol);
        if m.budget_check(&x, c)?.is_feasible() {
            return Ok(Membership {
                member: Some(true),
                portfolio: Some(x),
                rounds: round,
                iterations,
            });
        }
        let dx = m.increments(&x);
        let mut added = false;
        for n in m.tree.ids() {
            let NodeCost::Analytic(a) = &m.costs[n] else { continue };
            for (j, (f, set)) in a.per_asset.iter().zip(cuts[n.0].iter_mut()).enumerate() {
                let Some(set) = set else { continue };
                // Fall back to the exact point when the rounded one is known.
                let p = &dx[n][j];
                added |= set.add(f, round_down(p, CUT_BITS)) || set.add(f, p.clone());
            }
        }
        if !added {
            break;
        }
    }
    Ok(Membership {
        member: None,
        portfolio: None,
        rounds: opts.kelley_rounds,
        iterations,
    })
}

/// Membership of `c` in `C(S, D)`; exact LP for polyhedral instances and
/// cutting planes for exponential costs.
pub fn membership(m: &MarketInstance, c: &AdaptedProcess<Rat>, opts: &AnalysisOptions) -> Result<Membership, AnalysisError> {
    check_claims(m, c)?;
    if m.is_polyhedral() {
        polyhedral_membership(m, c, opts)
    } else {
        kelley_membership(m, c, opts)
    }
}

/// Membership of `c` in `α C(S, D) = C(α⋆S, αD)`.
pub fn membership_scaled(m: &MarketInstance, c: &AdaptedProcess<Rat>, alpha: &Rat, opts: &AnalysisOptions) -> Result<Membership, AnalysisError> {
    if !alpha.is_positive() {
        return Err(AnalysisError::Input(format!("scale must be positive, got {alpha}")));
    }
    membership(&m.scaled(alpha)?, c, opts)
}

/// Piecewise-linear bounding instances of a market with exponential costs,
/// built once and reused across claims.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SandwichModels {
    /// Cheaper model: its claim set contains the true one.
    pub lower: MarketInstance,
    /// Dearer model: its claim set is contained in the true one.
    pub upper: MarketInstance,
    pub gap: Rat,
}

impl SandwichModels {
    pub fn new(m: &MarketInstance, opts: &AnalysisOptions) -> Result<Self, AnalysisError> {
        let (lower, upper, gap) = sandwich_instances(m, opts)?;
        Ok(SandwichModels { lower, upper, gap })
    }

    /// One-sided membership answers.
    pub fn membership(&self, c: &AdaptedProcess<Rat>, opts: &AnalysisOptions) -> Result<SandwichMembership, AnalysisError> {
        check_claims(&self.lower, c)?;
        let lo = polyhedral_membership(&self.lower, c, opts)?.member == Some(true);
        let up = lo && polyhedral_membership(&self.upper, c, opts)?.member == Some(true);
        let member = if !lo {
            Some(false)
        } else if up {
            Some(true)
        } else {
            None
        };
        Ok(SandwichMembership {
            lower: lo,
            upper: up,
            member,
            gap: self.gap.clone(),
        })
    }
}

/// One-sided answers from the piecewise-linear bounds of exponential costs.
pub fn membership_sandwich(m: &MarketInstance, c: &AdaptedProcess<Rat>, opts: &AnalysisOptions) -> Result<SandwichMembership, AnalysisError> {
    check_claims(m, c)?;
    SandwichModels::new(m, opts)?.membership(c, opts)
}

/// Membership through the cash-eliminated form: one budget row per path.
/// The returned portfolio includes the lifted cash positions.
pub fn numeraire_membership(m: &MarketInstance, cash: usize, c: &AdaptedProcess<Rat>, opts: &AnalysisOptions) -> Result<Membership, AnalysisError> {
    check_claims(m, c)?;
    let red = m.numeraire_reduce(cash)?;
    let tree = &m.tree;
    let dim = m.dim() - 1;
    let chat = red.discount_claim(c);
    let mut lp = LinearProgram::new(Sense::Minimize);
    let mut x: Vec<Option<Vec<usize>>> = vec![None; tree.len()];
    for n in tree.ids().filter(|n| !tree.is_leaf(*n)) {
        let vars: Vec<usize> = (0..dim).map(|_| lp.add_free()).collect();
        for h in red.constraints[n].rows() {
            let terms = vars.iter().zip(&h.normal).filter(|(_, a)| !a.is_zero()).map(|(v, a)| (*v, a.clone())).collect();
            lp.add_row(terms, Relation::Le, h.offset.clone());
        }
        x[n.0] = Some(vars);
    }
    let mut node_terms: Vec<Terms> = Vec::with_capacity(tree.len());
    for n in tree.ids() {
        let delta: Vec<Terms> = (0..dim)
            .map(|j| {
                let mut t = Vec::with_capacity(2);
                if let Some(v) = &x[n.0] {
                    t.push((v[j], Rat::one()));
                }
                if let Some(v) = tree.parent(n).and_then(|p| x[p.0].as_ref()) {
                    t.push((v[j], -Rat::one()));
                }
                t
            })
            .collect();
        node_terms.push(encode_cost(&mut lp, &red.costs[n], &delta)?);
    }
    for leaf in tree.leaves() {
        let path = tree.path(leaf);
        let row: Terms = path.iter().flat_map(|n| node_terms[n.0].iter().cloned()).collect();
        let rhs: Rat = -path.iter().map(|n| &chat[*n]).sum::<Rat>();
        lp.add_row(row, Relation::Le, rhs);
    }
    let sol = lp.solve_with(&opts.solver)?;
    if sol.status == Status::Infeasible {
        return Ok(Membership {
            member: Some(false),
            portfolio: None,
            rounds: 1,
            iterations: sol.iterations,
        });
    }
    let xt = AdaptedProcess::from_fn(tree, |n: NodeId| match &x[n.0] {
        Some(v) => v.iter().map(|k| sol.x[*k].clone()).collect(),
        None => vec![Rat::zero(); dim],
    });
    Ok(Membership {
        member: Some(true),
        portfolio: Some(red.lift(tree, &xt, c)?),
        rounds: 1,
        iterations: sol.iterations,
    })
}
