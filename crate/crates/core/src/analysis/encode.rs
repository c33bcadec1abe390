//! LP encodings of the budget constraint for polyhedral instances.

use num_traits::{One, Zero};

use super::AnalysisError;
use crate::kernel::ScalarPwl;
use crate::lp::{LinearProgram, LpSolution, Relation, Sense};
use crate::market::{AdaptedProcess, MarketInstance, NodeCost};
use crate::num::{ExtReal, Rat};

pub(crate) type Terms = Vec<(usize, Rat)>;

/// How claim values enter the budget rows.
pub(crate) enum Claims<'a> {
    Fixed(&'a AdaptedProcess<Rat>),
    Variable { lower: Option<Rat>, upper: Option<Rat> },
}

pub(crate) struct BudgetLp {
    pub lp: LinearProgram,
    /// Portfolio variables of non-terminal nodes.
    pub x: Vec<Option<Vec<usize>>>,
    pub c: Vec<Option<usize>>,
    /// Uniform slack added to every budget row, when requested.
    pub tau: Option<usize>,
}

fn scaled(terms: &[(usize, Rat)], k: &Rat) -> Terms {
    terms.iter().map(|(j, a)| (*j, a * k)).collect()
}

/// Adds rows bounding `f(delta)` from above by the returned linear terms.
pub(crate) fn encode_scalar(lp: &mut LinearProgram, f: &ScalarPwl, delta: &[(usize, Rat)]) -> Terms {
    if let Some(lo) = f.lo() {
        lp.add_row(delta.to_vec(), Relation::Ge, lo.clone());
    }
    if let Some(hi) = f.hi() {
        lp.add_row(delta.to_vec(), Relation::Le, hi.clone());
    }
    if f.lo().is_some_and(Zero::is_zero) && f.hi().is_some_and(Zero::is_zero) {
        return vec![];
    }
    if f.slopes().len() == 1 {
        return scaled(delta, &f.slopes()[0]);
    }
    let t = lp.add_free();
    for (slope, intercept) in f.affine_pieces() {
        let mut row = vec![(t, Rat::one())];
        row.extend(scaled(delta, &-slope));
        lp.add_row(row, Relation::Ge, intercept);
    }
    vec![(t, Rat::one())]
}

/// Adds rows bounding a polyhedral node cost of `delta` from above.
pub(crate) fn encode_cost(lp: &mut LinearProgram, cost: &NodeCost, delta: &[Terms]) -> Result<Terms, AnalysisError> {
    match cost {
        NodeCost::Separable(c) => {
            let mut out = Vec::new();
            for (f, d) in c.per_asset.iter().zip(delta) {
                out.extend(encode_scalar(lp, f, d));
            }
            Ok(out)
        }
        NodeCost::MaxLinear(c) => {
            let t = lp.add_free();
            for z in c.vertices() {
                let mut row = vec![(t, Rat::one())];
                for (zj, d) in z.iter().zip(delta) {
                    row.extend(scaled(d, &-zj));
                }
                lp.add_row(row, Relation::Ge, Rat::zero());
            }
            Ok(vec![(t, Rat::one())])
        }
        NodeCost::Analytic(_) => match cost.polyhedral() {
            Some(p) => encode_cost(lp, &p, delta),
            None => Err(AnalysisError::NotPolyhedral("exponential costs have no exact LP encoding".into())),
        },
    }
}

/// Increment terms `x_n - x_parent(n)` per asset.
pub(crate) fn delta_terms(m: &MarketInstance, x: &[Option<Vec<usize>>], n: crate::market::NodeId) -> Vec<Terms> {
    (0..m.dim())
        .map(|j| {
            let mut t = Vec::with_capacity(2);
            if let Some(v) = &x[n.0] {
                t.push((v[j], Rat::one()));
            }
            if let Some(p) = m.tree.parent(n) {
                if let Some(v) = &x[p.0] {
                    t.push((v[j], -Rat::one()));
                }
            }
            t
        })
        .collect()
}

/// Budget rows `S_n(Δx_n) + c_n (+ tau) <= 0` and constraints `x_n ∈ D_n`.
pub(crate) fn encode_budget(m: &MarketInstance, claims: Claims<'_>, with_tau: bool, sense: Sense) -> Result<BudgetLp, AnalysisError> {
    let mut lp = LinearProgram::new(sense);
    let tree = &m.tree;
    let mut x = vec![None; tree.len()];
    for n in tree.ids() {
        if !tree.is_leaf(n) {
            let vars: Vec<usize> = (0..m.dim()).map(|_| lp.add_free()).collect();
            for h in m.constraints[n].rows() {
                let terms = vars
                    .iter()
                    .zip(&h.normal)
                    .filter(|(_, a)| !a.is_zero())
                    .map(|(v, a)| (*v, a.clone()))
                    .collect();
                lp.add_row(terms, Relation::Le, h.offset.clone());
            }
            x[n.0] = Some(vars);
        }
    }
    let tau = with_tau.then(|| lp.add_var(None, Some(Rat::one())));
    let mut c = vec![None; tree.len()];
    for n in tree.ids() {
        let delta = delta_terms(m, &x, n);
        let mut row = encode_cost(&mut lp, &m.costs[n], &delta)?;
        if let Some(t) = tau {
            row.push((t, Rat::one()));
        }
        let rhs = match &claims {
            Claims::Fixed(values) => -values[n].clone(),
            Claims::Variable { lower, upper } => {
                let v = lp.add_var(lower.clone(), upper.clone());
                row.push((v, Rat::one()));
                c[n.0] = Some(v);
                Rat::zero()
            }
        };
        lp.add_row(row, Relation::Le, rhs);
    }
    Ok(BudgetLp { lp, x, c, tau })
}

impl BudgetLp {
    pub fn portfolio(&self, m: &MarketInstance, sol: &LpSolution) -> AdaptedProcess<Vec<Rat>> {
        AdaptedProcess::from_fn(&m.tree, |n| match &self.x[n.0] {
            Some(v) => v.iter().map(|j| sol.x[*j].clone()).collect(),
            None => vec![Rat::zero(); m.dim()],
        })
    }

    pub fn claims(&self, m: &MarketInstance, sol: &LpSolution) -> AdaptedProcess<Rat> {
        AdaptedProcess::from_fn(&m.tree, |n| self.c[n.0].map_or_else(Rat::zero, |j| sol.x[j].clone()))
    }

    /// Ray components on the portfolio and claim variables.
    pub fn ray_parts(&self, m: &MarketInstance, ray: &[Rat]) -> (AdaptedProcess<Vec<Rat>>, AdaptedProcess<Rat>) {
        let x = AdaptedProcess::from_fn(&m.tree, |n| match &self.x[n.0] {
            Some(v) => v.iter().map(|j| ray[*j].clone()).collect(),
            None => vec![Rat::zero(); m.dim()],
        });
        let c = AdaptedProcess::from_fn(&m.tree, |n| self.c[n.0].map_or_else(Rat::zero, |j| ray[j].clone()));
        (x, c)
    }
}

/// Tightest claims a portfolio finances exactly: `c_n = -S_n(Δx_n)`, using
/// upper enclosures so the result is always budget-feasible.
pub(crate) fn tight_claims(m: &MarketInstance, x: &AdaptedProcess<Vec<Rat>>) -> Result<Option<AdaptedProcess<Rat>>, AnalysisError> {
    let dx = m.increments(x);
    let mut out = Vec::with_capacity(m.tree.len());
    for n in m.tree.ids() {
        match m.costs[n].enclosure(&dx[n])?.hi {
            ExtReal::Finite(v) => out.push(-v),
            _ => return Ok(None),
        }
    }
    Ok(Some(AdaptedProcess::new(out)))
}
