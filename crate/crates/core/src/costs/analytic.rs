//! Separable analytic costs: exponential illiquidity components next to
//! piecewise-linear ones, with rigorous enclosures and PWL sandwiches.

use num_traits::{One, Signed, Zero};

use super::CostError;
use crate::kernel::{Interval, ScalarPwl, SeparableCost};
use crate::num::{exp_bounds, to_f64, ExtReal, Rat};

/// Bits kept when rounding exponential bounds for use as LP coefficients.
const COEFF_BITS: usize = 40;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AnalyticComponent {
    Pwl(ScalarPwl),
    /// `sbar (e^{a x} - 1) / a`
    Exponential { sbar: Rat, illiquidity: Rat },
}

/// Bounds `lo <= e^x <= hi` on a dyadic grid of `2^-COEFF_BITS`.
pub fn exp_bounds_coarse(x: &Rat) -> (Rat, Rat) {
    let (lo, hi) = exp_bounds(x);
    let scale = Rat::from_integer(num_bigint::BigInt::one() << COEFF_BITS);
    ((&lo * &scale).floor() / &scale, (&hi * &scale).ceil() / &scale)
}

impl AnalyticComponent {
    pub fn exponential(sbar: Rat, illiquidity: Rat) -> Result<Self, CostError> {
        if !sbar.is_positive() {
            return Err(CostError::Parameter(format!("market price must be positive, got {sbar}")));
        }
        if !illiquidity.is_positive() {
            return Err(CostError::Parameter(format!(
                "illiquidity must be positive, got {illiquidity}"
            )));
        }
        Ok(AnalyticComponent::Exponential { sbar, illiquidity })
    }

    /// Rigorous enclosure of the value.
    pub fn enclosure(&self, x: &Rat) -> (ExtReal, ExtReal) {
        match self {
            AnalyticComponent::Pwl(f) => {
                let v = f.eval(x);
                (v.clone(), v)
            }
            AnalyticComponent::Exponential { sbar, illiquidity } => {
                if x.is_zero() {
                    return (ExtReal::zero(), ExtReal::zero());
                }
                let (lo, hi) = exp_bounds(&(illiquidity * x));
                let k = sbar / illiquidity;
                (
                    ExtReal::Finite(&k * (lo - Rat::one())),
                    ExtReal::Finite(&k * (hi - Rat::one())),
                )
            }
        }
    }

    pub fn value_f64(&self, x: f64) -> f64 {
        match self {
            AnalyticComponent::Pwl(f) => f.eval(&crate::num::from_f64(x).unwrap()).to_f64(),
            AnalyticComponent::Exponential { sbar, illiquidity } => {
                let a = to_f64(illiquidity);
                to_f64(sbar) * (a * x).exp_m1() / a
            }
        }
    }

    /// Derivative where it exists (right derivative at kinks).
    pub fn gradient_f64(&self, x: f64) -> f64 {
        match self {
            AnalyticComponent::Pwl(f) => f
                .subdifferential(&crate::num::from_f64(x).unwrap())
                .hi
                .to_f64(),
            AnalyticComponent::Exponential { sbar, illiquidity } => {
                to_f64(sbar) * (to_f64(illiquidity) * x).exp()
            }
        }
    }

    pub fn subderivative_origin(&self) -> ScalarPwl {
        match self {
            AnalyticComponent::Pwl(f) => f.subderivative_origin(),
            AnalyticComponent::Exponential { sbar, .. } => ScalarPwl::linear(sbar.clone()),
        }
    }

    pub fn horizon(&self) -> ScalarPwl {
        match self {
            AnalyticComponent::Pwl(f) => f.horizon(),
            // Zero for selling, infinite for buying, whatever the price level.
            AnalyticComponent::Exponential { .. } => {
                ScalarPwl::new(None, Some(Rat::zero()), vec![], vec![Rat::zero()]).unwrap()
            }
        }
    }

    pub fn market_prices(&self) -> Interval {
        match self {
            AnalyticComponent::Pwl(f) => f.market_prices(),
            AnalyticComponent::Exponential { sbar, .. } => Interval::point(sbar.clone()),
        }
    }

    /// Closed range of marginal prices and whether its lower end is excluded
    /// from the range itself.
    pub fn price_range(&self) -> (Interval, bool) {
        match self {
            AnalyticComponent::Pwl(f) => (f.price_range(), false),
            AnalyticComponent::Exponential { .. } => {
                (Interval::new(ExtReal::zero(), ExtReal::PosInf), true)
            }
        }
    }

    pub fn scale(&self, alpha: &Rat) -> Result<Self, CostError> {
        match self {
            AnalyticComponent::Pwl(f) => Ok(AnalyticComponent::Pwl(f.scale(alpha)?)),
            AnalyticComponent::Exponential { sbar, illiquidity } => {
                if !alpha.is_positive() {
                    return Err(CostError::Parameter(format!("scale must be positive, got {alpha}")));
                }
                Ok(AnalyticComponent::Exponential {
                    sbar: sbar.clone(),
                    illiquidity: illiquidity / alpha,
                })
            }
        }
    }

    /// Tangent-type line below the function, touching it approximately at `p`.
    ///
    /// With `E <= e^{a p}` the line `m (x - p) + sbar (E - 1) / a`, `m = sbar E`,
    /// lies below the tangent at `ln(E)/a <= p` and hence below the function.
    pub fn lower_line(&self, p: &Rat) -> Option<(Rat, Rat)> {
        match self {
            AnalyticComponent::Pwl(_) => None,
            AnalyticComponent::Exponential { sbar, illiquidity } => {
                let e = if p.is_zero() {
                    Rat::one()
                } else {
                    exp_bounds_coarse(&(illiquidity * p)).0
                };
                let m = sbar * &e;
                let q = sbar * (e - Rat::one()) / illiquidity - &m * p;
                Some((m, q))
            }
        }
    }

    /// Rigorous upper bound of the value at `p`, rounded for LP use.
    pub fn upper_point(&self, p: &Rat) -> ExtReal {
        match self {
            AnalyticComponent::Pwl(f) => f.eval(p),
            AnalyticComponent::Exponential { sbar, illiquidity } => {
                if p.is_zero() {
                    return ExtReal::zero();
                }
                let hi = exp_bounds_coarse(&(illiquidity * p)).1;
                ExtReal::Finite(sbar * (hi - Rat::one()) / illiquidity)
            }
        }
    }

    /// Convex PWL bounds on `grid` (which must contain 0) and the largest gap
    /// between them over the grid hull.
    pub fn sandwich(&self, grid: &[Rat]) -> Result<(ScalarPwl, ScalarPwl, Rat), CostError> {
        if let AnalyticComponent::Pwl(f) = self {
            return Ok((f.clone(), f.clone(), Rat::zero()));
        }
        if !grid.iter().any(Zero::is_zero) {
            return Err(CostError::Parameter("sandwich grid must contain 0".into()));
        }
        let lines: Vec<(Rat, Rat)> = grid.iter().filter_map(|p| self.lower_line(p)).collect();
        let lower = ScalarPwl::from_lines(&lines)?;
        let points: Vec<(Rat, Rat)> = grid
            .iter()
            .map(|p| (p.clone(), self.upper_point(p).finite().cloned().unwrap()))
            .collect();
        let upper = ScalarPwl::from_points(&points)?;
        let mut gap = Rat::zero();
        let mut probe: Vec<Rat> = grid.to_vec();
        probe.extend(lower.knots().iter().filter(|k| upper.as_pwl().in_domain(k)).cloned());
        for x in &probe {
            if let (ExtReal::Finite(u), ExtReal::Finite(l)) = (upper.eval(x), lower.eval(x)) {
                let d = u - l;
                if d > gap {
                    gap = d;
                }
            }
        }
        Ok((lower, upper, gap))
    }
}

/// Separable cost whose components may be exponential.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnalyticCost {
    pub per_asset: Vec<AnalyticComponent>,
}

/// Lower and upper PWL models of an analytic cost.
#[derive(Debug, Clone)]
pub struct Sandwich {
    pub lower: SeparableCost,
    pub upper: SeparableCost,
    pub max_gap: Rat,
    /// True when the gap exceeds the requested tolerance.
    pub coarse: bool,
}

impl AnalyticCost {
    pub fn new(per_asset: Vec<AnalyticComponent>) -> Self {
        AnalyticCost { per_asset }
    }

    pub fn dim(&self) -> usize {
        self.per_asset.len()
    }

    pub fn enclosure(&self, x: &[Rat]) -> (ExtReal, ExtReal) {
        self.per_asset
            .iter()
            .zip(x)
            .fold((ExtReal::zero(), ExtReal::zero()), |(lo, hi), (c, xi)| {
                let (l, h) = c.enclosure(xi);
                (lo.add(&l), hi.add(&h))
            })
    }

    pub fn value_f64(&self, x: &[f64]) -> f64 {
        self.per_asset.iter().zip(x).map(|(c, xi)| c.value_f64(*xi)).sum()
    }

    pub fn gradient_f64(&self, x: &[f64]) -> Vec<f64> {
        self.per_asset.iter().zip(x).map(|(c, xi)| c.gradient_f64(*xi)).collect()
    }

    pub fn subderivative_origin(&self) -> SeparableCost {
        SeparableCost::new(self.per_asset.iter().map(AnalyticComponent::subderivative_origin).collect())
    }

    pub fn horizon(&self) -> SeparableCost {
        SeparableCost::new(self.per_asset.iter().map(AnalyticComponent::horizon).collect())
    }

    pub fn market_prices(&self) -> Vec<Interval> {
        self.per_asset.iter().map(AnalyticComponent::market_prices).collect()
    }

    pub fn price_ranges(&self) -> Vec<(Interval, bool)> {
        self.per_asset.iter().map(AnalyticComponent::price_range).collect()
    }

    pub fn scale(&self, alpha: &Rat) -> Result<Self, CostError> {
        Ok(AnalyticCost {
            per_asset: self
                .per_asset
                .iter()
                .map(|c| c.scale(alpha))
                .collect::<Result<_, _>>()?,
        })
    }

    pub fn is_finite_valued(&self) -> bool {
        self.per_asset.iter().all(|c| match c {
            AnalyticComponent::Pwl(f) => f.is_finite_valued(),
            AnalyticComponent::Exponential { .. } => true,
        })
    }

    pub fn sandwich(&self, grid: &[Rat], tolerance: &Rat) -> Result<Sandwich, CostError> {
        let mut lower = Vec::with_capacity(self.dim());
        let mut upper = Vec::with_capacity(self.dim());
        let mut max_gap = Rat::zero();
        for c in &self.per_asset {
            let (l, u, g) = c.sandwich(grid)?;
            lower.push(l);
            upper.push(u);
            if g > max_gap {
                max_gap = g;
            }
        }
        let coarse = &max_gap > tolerance;
        Ok(Sandwich {
            lower: SeparableCost::new(lower),
            upper: SeparableCost::new(upper),
            max_gap,
            coarse,
        })
    }
}

/// Cash plus one illiquid asset per node: `x0 + sbar_n (e^{a x1} - 1) / a`.
pub fn exponential_cost(sbar: &Rat, illiquidity: &Rat) -> Result<AnalyticCost, CostError> {
    Ok(AnalyticCost::new(vec![
        AnalyticComponent::Pwl(ScalarPwl::one()),
        AnalyticComponent::exponential(sbar.clone(), illiquidity.clone())?,
    ]))
}

/// Uniform grid `{-k h, ..., 0, ..., k h}`.
pub fn uniform_grid(half_width: &Rat, points_per_side: usize) -> Vec<Rat> {
    let n = points_per_side.max(1) as i64;
    (-n..=n)
        .map(|i| half_width * Rat::new(i.into(), n.into()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::{frac, from_f64, int};

    fn unit_exp() -> AnalyticComponent {
        AnalyticComponent::exponential(int(1), int(1)).unwrap()
    }

    #[test]
    fn closed_forms_of_the_exponential_family() {
        let s = exponential_cost(&int(3), &int(2)).unwrap();
        let d = s.subderivative_origin();
        assert_eq!(d.eval(&[int(0), int(1)]).unwrap(), ExtReal::Finite(int(3)));
        let h = s.horizon();
        assert_eq!(h.eval(&[int(5), int(-1)]).unwrap(), ExtReal::Finite(int(5)));
        assert_eq!(h.eval(&[int(5), int(1)]).unwrap(), ExtReal::PosInf);
        assert_eq!(s.market_prices()[1], Interval::point(int(3)));
        let one = exponential_cost(&int(1), &int(1)).unwrap();
        let (lo, hi) = one.enclosure(&[int(0), int(1)]);
        let e1 = std::f64::consts::E - 1.0;
        assert!((lo.to_f64() - e1).abs() < 1e-15 && (hi.to_f64() - e1).abs() < 1e-15);
        assert!(AnalyticComponent::exponential(int(1), int(0)).is_err());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let c = AnalyticComponent::exponential(frac(3, 2), frac(7, 10)).unwrap();
        for i in -20..=20 {
            let x = i as f64 / 5.0;
            let h = 1e-5;
            let fd = (c.value_f64(x + h) - c.value_f64(x - h)) / (2.0 * h);
            let g = c.gradient_f64(x);
            assert!(((fd - g) / g).abs() <= 1e-6, "{x}: {fd} vs {g}");
        }
    }

    #[test]
    fn scaling_matches_definition() {
        let c = unit_exp();
        let scaled = c.scale(&int(4)).unwrap();
        for i in -10..=10 {
            let x = i as f64 / 2.0;
            let direct = 4.0 * c.value_f64(x / 4.0);
            assert!((scaled.value_f64(x) - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn sandwich_on_three_points() {
        let (lower, upper, gap) = unit_exp().sandwich(&[int(-1), int(0), int(1)]).unwrap();
        let half = frac(1, 2);
        let u = upper.eval(&half).to_f64();
        let l = lower.eval(&half).to_f64();
        let t = 0.5f64.exp() - 1.0;
        assert!((u - (std::f64::consts::E - 1.0) / 2.0).abs() < 1e-9);
        assert!(u >= t && t >= l);
        assert!(gap.is_positive());
        assert_eq!(upper.eval(&int(0)), ExtReal::zero());
        assert_eq!(lower.eval(&int(0)), ExtReal::zero());

        let lin = AnalyticComponent::Pwl(ScalarPwl::linear(int(2)));
        let (l, u, g) = lin.sandwich(&[int(0)]).unwrap();
        assert_eq!(l, u);
        assert!(g.is_zero());
    }

    #[test]
    fn sandwich_orders_on_a_fine_grid() {
        for (sbar, a) in [(int(1), int(1)), (frac(5, 2), frac(1, 3)), (frac(1, 4), int(3))] {
            let c = AnalyticComponent::exponential(sbar, a).unwrap();
            let grid = uniform_grid(&int(2), 4);
            let (lower, upper, _) = c.sandwich(&grid).unwrap();
            assert!(lower.slopes().windows(2).all(|w| w[0] <= w[1]));
            assert!(upper.slopes().windows(2).all(|w| w[0] <= w[1]));
            for i in 0..100 {
                let x = from_f64(-2.0 + 4.0 * i as f64 / 99.0).unwrap();
                let (tlo, thi) = c.enclosure(&x);
                assert!(lower.eval(&x) <= tlo, "lower above at {x}");
                assert!(thi <= upper.eval(&x), "upper below at {x}");
            }
        }
    }
}
