use num_traits::{One, Signed, Zero};

use super::{AnalysisError, AnalysisOptions};
use crate::kernel::PolyhedralCone;
use crate::lp::{LinearProgram, Relation, Sense, Status};
use crate::market::{AdaptedProcess, MarketInstance, NodeId, PriceSet};
use crate::num::{ExtReal, Rat};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeflatorKind {
    /// Prices in `∂S(0)`, increments in the normal cones `N_D(0)`.
    MarketPrice,
    /// Prices in the closed range of all marginal prices, increments in the
    /// closed barrier cones.
    MarginalPrice,
}

/// Per-node residuals of a deflator; all zero for a valid one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeflatorResiduals {
    /// Distance of `s_n` from the admissible price set.
    pub price: Vec<ExtReal>,
    /// Violation of the cone condition by `E[y s | n] - y_n s_n`; zero at leaves.
    pub cone: Vec<ExtReal>,
    pub positive: bool,
    pub normalized: bool,
}

impl DeflatorResiduals {
    pub fn is_valid(&self) -> bool {
        self.positive
            && self.normalized
            && self.price.iter().chain(&self.cone).all(|r| *r == ExtReal::zero())
    }

    pub fn max(&self) -> ExtReal {
        self.price.iter().chain(&self.cone).cloned().max().unwrap_or_else(ExtReal::zero)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeflatorCertificate {
    pub kind: DeflatorKind,
    /// Lower bound on `y` under which it was found.
    pub epsilon: Rat,
    pub y: AdaptedProcess<Rat>,
    pub s: AdaptedProcess<Vec<Rat>>,
    pub residuals: DeflatorResiduals,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DeflatorOutcome {
    Found(DeflatorCertificate),
    /// No deflator with `y >= epsilon` for any tried epsilon.
    NotFound { epsilons: Vec<Rat> },
}

impl DeflatorOutcome {
    pub fn certificate(&self) -> Option<&DeflatorCertificate> {
        match self {
            DeflatorOutcome::Found(c) => Some(c),
            DeflatorOutcome::NotFound { .. } => None,
        }
    }
}

fn price_set(m: &MarketInstance, kind: DeflatorKind, n: NodeId) -> PriceSet {
    match kind {
        DeflatorKind::MarketPrice => m.costs[n].market_prices(),
        DeflatorKind::MarginalPrice => m.costs[n].price_range(),
    }
}

fn cone(m: &MarketInstance, kind: DeflatorKind, n: NodeId) -> PolyhedralCone {
    match kind {
        DeflatorKind::MarketPrice => m.constraints[n].normal_cone_origin(),
        DeflatorKind::MarginalPrice => m.constraints[n].barrier_cone_closure(),
    }
}

/// Tries the epsilon schedule of `opts` in order.
pub fn find_deflator(m: &MarketInstance, kind: DeflatorKind, opts: &AnalysisOptions) -> Result<DeflatorOutcome, AnalysisError> {
    for eps in &opts.epsilons {
        if let Some(cert) = find_deflator_at(m, kind, eps, opts)? {
            return Ok(DeflatorOutcome::Found(cert));
        }
    }
    Ok(DeflatorOutcome::NotFound {
        epsilons: opts.epsilons.clone(),
    })
}

/// Feasibility LP in `(y, v)` with `v = y s`, `y_root = 1` and `y >= epsilon`.
pub fn find_deflator_at(
    m: &MarketInstance,
    kind: DeflatorKind,
    epsilon: &Rat,
    opts: &AnalysisOptions,
) -> Result<Option<DeflatorCertificate>, AnalysisError> {
    if !epsilon.is_positive() {
        return Err(AnalysisError::Input(format!("epsilon must be positive, got {epsilon}")));
    }
    let tree = &m.tree;
    let dim = m.dim();
    let mut lp = LinearProgram::new(Sense::Minimize);
    let y: Vec<usize> = tree
        .ids()
        .map(|n| {
            if n == tree.root() {
                lp.add_var(Some(Rat::one()), Some(Rat::one()))
            } else {
                lp.add_var(Some(epsilon.clone()), None)
            }
        })
        .collect();
    let v: Vec<Vec<usize>> = tree.ids().map(|_| (0..dim).map(|_| lp.add_free()).collect()).collect();
    for n in tree.ids() {
        let (yn, vn) = (y[n.0], &v[n.0]);
        match price_set(m, kind, n) {
            PriceSet::Box(intervals) => {
                for (p, &vj) in intervals.iter().zip(vn) {
                    if let ExtReal::Finite(lo) = &p.interval.lo {
                        let lo = if p.open_below { lo + &opts.open_margin } else { lo.clone() };
                        lp.add_row(vec![(vj, Rat::one()), (yn, -lo)], Relation::Ge, Rat::zero());
                    }
                    if let ExtReal::Finite(hi) = &p.interval.hi {
                        lp.add_row(vec![(vj, Rat::one()), (yn, -hi.clone())], Relation::Le, Rat::zero());
                    }
                }
            }
            PriceSet::Hull(z) => {
                let mu: Vec<usize> = z.iter().map(|_| lp.add_nonneg()).collect();
                let mut total: Vec<(usize, Rat)> = mu.iter().map(|&k| (k, Rat::one())).collect();
                total.push((yn, -Rat::one()));
                lp.add_row(total, Relation::Eq, Rat::zero());
                for (j, &vj) in vn.iter().enumerate() {
                    let mut row: Vec<(usize, Rat)> = mu.iter().zip(&z).map(|(&k, zk)| (k, -zk[j].clone())).collect();
                    row.push((vj, Rat::one()));
                    lp.add_row(row, Relation::Eq, Rat::zero());
                }
            }
        }
        if tree.is_leaf(n) {
            continue;
        }
        // E[v | n] - v_n = sum lambda_i a_i with lambda >= 0.
        let rays = match cone(m, kind, n) {
            PolyhedralCone::Generators { rays, .. } => rays,
            other => other.generators()?,
        };
        let lambda: Vec<usize> = rays.iter().map(|_| lp.add_nonneg()).collect();
        let pn = tree.probability(n).clone();
        for j in 0..dim {
            let mut row: Vec<(usize, Rat)> = tree
                .children(n)
                .iter()
                .map(|ch| (v[ch.0][j], tree.probability(*ch) / &pn))
                .collect();
            row.push((vn[j], -Rat::one()));
            for (l, a) in lambda.iter().zip(&rays) {
                if !a[j].is_zero() {
                    row.push((*l, -a[j].clone()));
                }
            }
            lp.add_row(row, Relation::Eq, Rat::zero());
        }
    }
    let sol = lp.solve_with(&opts.solver)?;
    if sol.status != Status::Optimal {
        return Ok(None);
    }
    let yv = AdaptedProcess::from_fn(tree, |n| sol.x[y[n.0]].clone());
    let s = AdaptedProcess::from_fn(tree, |n| v[n.0].iter().map(|k| &sol.x[*k] / &yv[n]).collect());
    let residuals = verify_deflator(m, kind, &yv, &s)?;
    Ok(Some(DeflatorCertificate {
        kind,
        epsilon: epsilon.clone(),
        y: yv,
        s,
        residuals,
    }))
}

fn max_abs(d: &[Rat]) -> Rat {
    d.iter().map(|x| x.abs()).max().unwrap_or_else(Rat::zero)
}

/// Independent re-check of a deflator: price-set distances and cone
/// violations `max_d w.d / |d|_∞` over generators `d` of the polar cone.
pub fn verify_deflator(
    m: &MarketInstance,
    kind: DeflatorKind,
    y: &AdaptedProcess<Rat>,
    s: &AdaptedProcess<Vec<Rat>>,
) -> Result<DeflatorResiduals, AnalysisError> {
    let tree = &m.tree;
    if y.len() != tree.len() || s.len() != tree.len() || s.values().iter().any(|v| v.len() != m.dim()) {
        return Err(AnalysisError::Input("deflator shape does not match the instance".into()));
    }
    let mut price = Vec::with_capacity(tree.len());
    let mut cone_res = Vec::with_capacity(tree.len());
    let ys = AdaptedProcess::from_fn(tree, |n| s[n].iter().map(|x| x * &y[n]).collect::<Vec<Rat>>());
    for n in tree.ids() {
        price.push(price_set(m, kind, n).distance(&s[n])?);
        if tree.is_leaf(n) {
            cone_res.push(ExtReal::zero());
            continue;
        }
        let expected = tree.cond_expectation(&ys, n)?;
        let w: Vec<Rat> = expected.iter().zip(&ys[n]).map(|(a, b)| a - b).collect();
        let polar = cone(m, kind, n).polar().generators()?;
        let worst = polar
            .iter()
            .filter(|d| !d.iter().all(Zero::is_zero))
            .map(|d| w.iter().zip(d).map(|(a, b)| a * b).sum::<Rat>() / max_abs(d))
            .fold(Rat::zero(), |acc, r| if r > acc { r } else { acc });
        cone_res.push(ExtReal::Finite(worst));
    }
    Ok(DeflatorResiduals {
        price,
        cone: cone_res,
        positive: y.values().iter().all(Signed::is_positive),
        normalized: y[tree.root()].is_one(),
    })
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::*;
    use super::*;
    use crate::costs::{bid_ask_cost, exponential_family};
    use crate::kernel::PolyhedralSet;
    use crate::market::{EventTree, NodeCost};
    use crate::num::{frac, int};

    fn opts() -> AnalysisOptions {
        AnalysisOptions::default()
    }

    #[test]
    fn risky_only_market_has_a_market_price_deflator() {
        let m = i1();
        let out = find_deflator(&m, DeflatorKind::MarketPrice, &opts()).unwrap();
        let cert = out.certificate().expect("deflator exists");
        assert_eq!(cert.y.values(), &[int(1), frac(1, 2)]);
        assert_eq!(cert.s.values(), &[vec![int(1)], vec![int(2)]]);
        assert!(cert.residuals.is_valid());
    }

    #[test]
    fn perturbed_deflator_reports_the_martingale_gap() {
        let m = i1();
        let y = AdaptedProcess::new(vec![int(1), frac(3, 5)]);
        let s = AdaptedProcess::new(vec![vec![int(1)], vec![int(2)]]);
        let r = verify_deflator(&m, DeflatorKind::MarketPrice, &y, &s).unwrap();
        assert_eq!(r.cone[0], ExtReal::Finite(frac(1, 5)));
        assert!(!r.is_valid());
        let bad = AdaptedProcess::new(vec![vec![int(3)], vec![int(2)]]);
        let r = verify_deflator(&m, DeflatorKind::MarketPrice, &AdaptedProcess::new(vec![int(1), frac(1, 2)]), &bad).unwrap();
        assert_eq!(r.price[0], ExtReal::Finite(int(2)));
    }

    #[test]
    fn cash_and_risky_market_has_none() {
        let out = find_deflator(&i2(), DeflatorKind::MarketPrice, &opts()).unwrap();
        assert!(matches!(out, DeflatorOutcome::NotFound { .. }));
    }

    #[test]
    fn exponential_market_accepts_any_positive_martingale() {
        let tree = EventTree::binomial(2, &frac(1, 2)).unwrap();
        // Risky prices with no martingale measure: the up move always wins.
        let sbar = AdaptedProcess::from_fn(&tree, |n| int(1 + tree.node(n).time as i64));
        let costs = exponential_family(&sbar, &int(1)).unwrap().map(|c| NodeCost::Analytic(c.clone()));
        let m = MarketInstance::unconstrained(tree.clone(), vec!["cash".into(), "risky".into()], costs).unwrap();
        assert!(matches!(
            find_deflator(&m, DeflatorKind::MarketPrice, &opts()).unwrap(),
            DeflatorOutcome::NotFound { .. }
        ));
        let cert = find_deflator(&m, DeflatorKind::MarginalPrice, &opts()).unwrap();
        let cert = cert.certificate().unwrap();
        assert!(cert.residuals.is_valid());
        // y is a martingale since cash is linear with price 1.
        for n in tree.ids().filter(|n| !tree.is_leaf(*n)) {
            assert_eq!(tree.cond_expectation(&cert.y, n).unwrap(), cert.y[n]);
        }
        // Any positive martingale works with suitable risky prices.
        let y = AdaptedProcess::from_fn(&tree, |n| match tree.node(n).label.as_str() {
            "u" => frac(3, 2),
            "d" => frac(1, 2),
            "uu" => int(2),
            "ud" => int(1),
            "du" => frac(1, 4),
            "dd" => frac(3, 4),
            _ => int(1),
        });
        let mut s = AdaptedProcess::constant(&tree, vec![int(1), int(1)]);
        for n in tree.ids() {
            s[n][1] = Rat::one() / &y[n];
        }
        let r = verify_deflator(&m, DeflatorKind::MarginalPrice, &y, &s).unwrap();
        assert!(r.is_valid(), "{r:?}");
    }

    #[test]
    fn short_sale_ban_turns_martingales_into_supermartingales() {
        // Bid-ask 1/2 today; the only future price is 1, so buying is attractive.
        let tree = EventTree::deterministic(1);
        let costs = AdaptedProcess::new(vec![
            NodeCost::Separable(bid_ask_cost(&[int(1), int(3)], &[int(1), int(3)]).unwrap()),
            NodeCost::Separable(bid_ask_cost(&[int(1), int(1)], &[int(1), int(1)]).unwrap()),
        ]);
        let free = MarketInstance::unconstrained(tree.clone(), vec!["cash".into(), "risky".into()], costs.clone()).unwrap();
        assert!(find_deflator(&free, DeflatorKind::MarketPrice, &opts()).unwrap().certificate().is_none());
        // Short selling the risky asset is what the arbitrage needs; ban it.
        let ban = PolyhedralSet::new(
            2,
            vec![crate::kernel::HalfSpace {
                normal: vec![int(0), int(-1)],
                offset: int(0),
            }],
        )
        .unwrap();
        let banned = MarketInstance::new(tree.clone(), free.assets.clone(), costs, AdaptedProcess::constant(&tree, ban)).unwrap();
        let cert = find_deflator(&banned, DeflatorKind::MarketPrice, &opts()).unwrap();
        let cert = cert.certificate().expect("supermartingale deflator");
        assert!(cert.residuals.is_valid());
    }
}
