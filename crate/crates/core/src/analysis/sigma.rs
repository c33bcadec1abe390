//! The profit function `σ_C(y) = sup { E sum y_n c_n : c ∈ C }` and its dual.

use num_traits::{One, Signed, Zero};

use super::encode::{encode_budget, BudgetLp, Claims};
use super::{AnalysisError, AnalysisOptions};
use crate::kernel::ScalarPwl;
use crate::lp::{LinearProgram, Relation, Sense, Status};
use crate::market::{AdaptedProcess, MarketInstance, NodeCost, NodeId};
use crate::num::{ExtReal, Rat};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SigmaPrimal {
    pub value: ExtReal,
    /// Maximizer when the value is finite.
    pub x: Option<AdaptedProcess<Vec<Rat>>>,
    pub c: Option<AdaptedProcess<Rat>>,
    /// Improving direction `(x, c)` proving an infinite value.
    pub ray: Option<(AdaptedProcess<Vec<Rat>>, AdaptedProcess<Rat>)>,
    /// Claim cap of the final capped solve, if that solve settled the value.
    pub cap: Option<Rat>,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SigmaDual {
    pub value: ExtReal,
    /// Minimizing `v`, the duality witness.
    pub v: Option<AdaptedProcess<Vec<Rat>>>,
    pub iterations: usize,
}

fn check_weights(m: &MarketInstance, y: &AdaptedProcess<Rat>) -> Result<(), AnalysisError> {
    if y.len() != m.tree.len() {
        return Err(AnalysisError::Input(format!("y has {} values for {} nodes", y.len(), m.tree.len())));
    }
    if y.values().iter().any(Signed::is_negative) {
        return Err(AnalysisError::Input("y must be nonnegative".into()));
    }
    Ok(())
}

fn capped_solve(m: &MarketInstance, y: &AdaptedProcess<Rat>, cap: Option<&Rat>, opts: &AnalysisOptions) -> Result<(BudgetLp, crate::lp::LpSolution), AnalysisError> {
    let enc = encode_budget(
        m,
        Claims::Variable {
            lower: None,
            upper: cap.cloned(),
        },
        false,
        Sense::Maximize,
    )?;
    let mut lp = enc.lp.clone();
    for n in m.tree.ids() {
        let w = m.tree.probability(n) * &y[n];
        if !w.is_zero() {
            lp.set_objective(enc.c[n.0].expect("every node has a claim variable"), w);
        }
    }
    let sol = lp.solve_with(&opts.solver)?;
    Ok((enc, sol))
}

/// `σ_C(y)` by LP with claim caps doubled while they bind, then without caps.
pub fn sigma_primal(m: &MarketInstance, y: &AdaptedProcess<Rat>, opts: &AnalysisOptions) -> Result<SigmaPrimal, AnalysisError> {
    check_weights(m, y)?;
    let mut cap = opts.initial_cap.clone();
    let mut iterations = 0;
    for _ in 0..=opts.cap_doublings {
        let (enc, sol) = capped_solve(m, y, Some(&cap), opts)?;
        iterations += sol.iterations;
        if sol.status == Status::Infeasible {
            return Err(AnalysisError::Input("budget LP infeasible although zero claims are feasible".into()));
        }
        let c = enc.claims(m, &sol);
        let binds = m.tree.ids().any(|n| !y[n].is_zero() && c[n] == cap);
        if sol.status == Status::Optimal && !binds {
            return Ok(SigmaPrimal {
                value: ExtReal::Finite(sol.objective.clone()),
                x: Some(enc.portfolio(m, &sol)),
                c: Some(c),
                ray: None,
                cap: Some(cap),
                iterations,
            });
        }
        cap = &cap + &cap;
    }
    let (enc, sol) = capped_solve(m, y, None, opts)?;
    iterations += sol.iterations;
    match sol.status {
        Status::Optimal => Ok(SigmaPrimal {
            value: ExtReal::Finite(sol.objective.clone()),
            x: Some(enc.portfolio(m, &sol)),
            c: Some(enc.claims(m, &sol)),
            ray: None,
            cap: None,
            iterations,
        }),
        Status::Unbounded => Ok(SigmaPrimal {
            value: ExtReal::PosInf,
            x: None,
            c: None,
            ray: sol.ray.as_ref().map(|r| enc.ray_parts(m, r)),
            cap: None,
            iterations,
        }),
        Status::Infeasible => Err(AnalysisError::Input("budget LP infeasible although zero claims are feasible".into())),
    }
}

/// Adds rows bounding `(y f)^*(v)` from above; at `y = 0` this is the
/// support function of `dom f`.
fn encode_scaled_conjugate(lp: &mut LinearProgram, f: &ScalarPwl, y: &Rat, v: usize) -> usize {
    if y.is_zero() {
        let t = lp.add_free();
        let mut bounded = false;
        for (end, rel) in [(f.hi(), Relation::Le), (f.lo(), Relation::Ge)] {
            match end {
                Some(b) => {
                    lp.add_row(vec![(t, Rat::one()), (v, -b.clone())], Relation::Ge, Rat::zero());
                    bounded = true;
                }
                None => {
                    lp.add_row(vec![(v, Rat::one())], rel, Rat::zero());
                }
            }
        }
        if !bounded {
            lp.add_row(vec![(t, Rat::one())], Relation::Eq, Rat::zero());
        }
        return t;
    }
    let g = f.conjugate();
    if let Some(lo) = g.lo() {
        lp.add_row(vec![(v, Rat::one())], Relation::Ge, y * lo);
    }
    if let Some(hi) = g.hi() {
        lp.add_row(vec![(v, Rat::one())], Relation::Le, y * hi);
    }
    let t = lp.add_free();
    for (slope, intercept) in g.affine_pieces() {
        // t >= y (slope v / y + intercept)
        lp.add_row(vec![(t, Rat::one()), (v, -slope)], Relation::Ge, y * &intercept);
    }
    t
}

/// Adds `(y_n S_n)^*(v_n)` to the objective with weight `p`.
fn encode_node_conjugate(lp: &mut LinearProgram, cost: &NodeCost, y: &Rat, v: &[usize], p: &Rat) -> Result<(), AnalysisError> {
    match cost {
        NodeCost::Separable(c) => {
            for (f, &vj) in c.per_asset.iter().zip(v) {
                let t = encode_scaled_conjugate(lp, f, y, vj);
                lp.set_objective(t, p.clone());
            }
            Ok(())
        }
        NodeCost::MaxLinear(c) => {
            // Indicator of y conv(z): v = sum mu_k z_k with sum mu = y.
            let mu: Vec<usize> = c.vertices().iter().map(|_| lp.add_nonneg()).collect();
            lp.add_row(mu.iter().map(|&k| (k, Rat::one())).collect(), Relation::Eq, y.clone());
            for (j, &vj) in v.iter().enumerate() {
                let mut row: Vec<(usize, Rat)> = mu.iter().zip(c.vertices()).map(|(&k, z)| (k, -z[j].clone())).collect();
                row.push((vj, Rat::one()));
                lp.add_row(row, Relation::Eq, Rat::zero());
            }
            Ok(())
        }
        NodeCost::Analytic(_) => match cost.polyhedral() {
            Some(p2) => encode_node_conjugate(lp, &p2, y, v, p),
            None => Err(AnalysisError::NotPolyhedral("conjugates of exponential costs are not piecewise linear".into())),
        },
    }
}

/// `inf_v sum p_n (y_n S_n)^*(v_n) + sum_{t<T} p_n σ_{D_n}(E[v | n] - v_n)`.
pub fn sigma_dual(m: &MarketInstance, y: &AdaptedProcess<Rat>, opts: &AnalysisOptions) -> Result<SigmaDual, AnalysisError> {
    check_weights(m, y)?;
    let tree = &m.tree;
    let mut lp = LinearProgram::new(Sense::Minimize);
    let v: Vec<Vec<usize>> = tree.ids().map(|_| (0..m.dim()).map(|_| lp.add_free()).collect()).collect();
    for n in tree.ids() {
        let p = tree.probability(n).clone();
        encode_node_conjugate(&mut lp, &m.costs[n], &y[n], &v[n.0], &p)?;
        if tree.is_leaf(n) {
            continue;
        }
        // σ_D(w) = min { b.λ : A^T λ = w, λ >= 0 }.
        let rows = m.constraints[n].rows();
        let lambda: Vec<usize> = rows.iter().map(|_| lp.add_nonneg()).collect();
        for (l, h) in lambda.iter().zip(rows) {
            if !h.offset.is_zero() {
                lp.set_objective(*l, &p * &h.offset);
            }
        }
        #[allow(clippy::needless_range_loop)]
        for j in 0..m.dim() {
            let mut row: Vec<(usize, Rat)> = tree
                .children(n)
                .iter()
                .map(|ch| (v[ch.0][j], tree.transition(*ch)))
                .collect();
            row.push((v[n.0][j], -Rat::one()));
            for (l, h) in lambda.iter().zip(rows) {
                if !h.normal[j].is_zero() {
                    row.push((*l, -h.normal[j].clone()));
                }
            }
            lp.add_row(row, Relation::Eq, Rat::zero());
        }
    }
    let sol = lp.solve_with(&opts.solver)?;
    match sol.status {
        Status::Optimal => Ok(SigmaDual {
            value: ExtReal::Finite(sol.objective.clone()),
            v: Some(AdaptedProcess::from_fn(tree, |n: NodeId| v[n.0].iter().map(|k| sol.x[*k].clone()).collect())),
            iterations: sol.iterations,
        }),
        Status::Infeasible => Ok(SigmaDual {
            value: ExtReal::PosInf,
            v: None,
            iterations: sol.iterations,
        }),
        Status::Unbounded => Err(AnalysisError::Input("dual of the profit function is unbounded below".into())),
    }
}
