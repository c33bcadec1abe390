//! Convex piecewise-linear functions of one variable.
//!
//! [`Pwl`] is a proper, closed, convex piecewise-linear function with a closed
//! interval domain. [`ScalarPwl`] additionally vanishes at the origin, which
//! makes it a valid one-asset cost function.

use std::fmt;

use num_traits::{One, Signed, Zero};

use super::KernelError;
use crate::num::{ExtReal, Rat};

/// Closed interval of extended reals. Empty when `lo > hi`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Interval {
    pub lo: ExtReal,
    pub hi: ExtReal,
}

impl Interval {
    pub fn new(lo: ExtReal, hi: ExtReal) -> Self {
        Interval { lo, hi }
    }

    pub fn point(r: Rat) -> Self {
        Interval {
            lo: ExtReal::Finite(r.clone()),
            hi: ExtReal::Finite(r),
        }
    }

    pub fn empty() -> Self {
        Interval {
            lo: ExtReal::PosInf,
            hi: ExtReal::NegInf,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.lo > self.hi
    }

    pub fn contains(&self, r: &Rat) -> bool {
        let r = ExtReal::Finite(r.clone());
        self.lo <= r && r <= self.hi
    }

    /// Distance from `r` to the interval (zero inside).
    pub fn distance(&self, r: &Rat) -> ExtReal {
        if self.is_empty() {
            return ExtReal::PosInf;
        }
        if let ExtReal::Finite(lo) = &self.lo {
            if r < lo {
                return ExtReal::Finite(lo - r);
            }
        }
        if let ExtReal::Finite(hi) = &self.hi {
            if r > hi {
                return ExtReal::Finite(r - hi);
            }
        }
        ExtReal::zero()
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            write!(f, "{{}}")
        } else {
            write!(f, "[{}, {}]", self.lo, self.hi)
        }
    }
}

/// Closed convex piecewise-linear function.
///
/// `knots` lie strictly inside the domain; `slopes[k]` is the slope on the
/// `k`-th segment, strictly increasing after canonicalization. A point domain
/// is stored with no knots and a single zero slope.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pwl {
    lo: Option<Rat>,
    hi: Option<Rat>,
    knots: Vec<Rat>,
    slopes: Vec<Rat>,
    anchor: Rat,
    anchor_value: Rat,
}

impl Pwl {
    pub fn new(
        lo: Option<Rat>,
        hi: Option<Rat>,
        knots: Vec<Rat>,
        slopes: Vec<Rat>,
        anchor: Rat,
        anchor_value: Rat,
    ) -> Result<Self, KernelError> {
        if slopes.len() != knots.len() + 1 {
            return Err(KernelError::Shape(format!(
                "{} knots need {} slopes, got {}",
                knots.len(),
                knots.len() + 1,
                slopes.len()
            )));
        }
        if knots.windows(2).any(|w| w[0] >= w[1]) {
            return Err(KernelError::NotConvex("knots must be strictly increasing".into()));
        }
        if slopes.windows(2).any(|w| w[0] > w[1]) {
            return Err(KernelError::NotConvex("slopes must be nondecreasing".into()));
        }
        if let (Some(l), Some(h)) = (&lo, &hi) {
            if l > h {
                return Err(KernelError::EmptyDomain);
            }
        }
        if lo.as_ref().is_some_and(|l| &anchor < l) || hi.as_ref().is_some_and(|h| &anchor > h) {
            return Err(KernelError::Shape("anchor outside the domain".into()));
        }
        let mut f = Pwl {
            lo,
            hi,
            knots,
            slopes,
            anchor,
            anchor_value,
        };
        f.canonicalize();
        Ok(f)
    }

    fn canonicalize(&mut self) {
        if self.lo.is_some() && self.lo == self.hi {
            self.knots.clear();
            self.slopes = vec![Rat::zero()];
            return;
        }
        // Values are tracked through the anchor, so dropping knots outside
        // the domain only discards segments that are never evaluated.
        if let Some(lo) = &self.lo {
            let cut = self.knots.partition_point(|k| k <= lo);
            self.knots.drain(..cut);
            self.slopes.drain(..cut);
        }
        if let Some(hi) = &self.hi {
            let keep = self.knots.partition_point(|k| k < hi);
            self.knots.truncate(keep);
            self.slopes.truncate(keep + 1);
        }
        let mut knots = Vec::with_capacity(self.knots.len());
        let mut slopes = vec![self.slopes[0].clone()];
        for (k, s) in self.knots.iter().zip(&self.slopes[1..]) {
            if s != slopes.last().unwrap() {
                knots.push(k.clone());
                slopes.push(s.clone());
            }
        }
        self.knots = knots;
        self.slopes = slopes;
    }

    pub fn lo(&self) -> Option<&Rat> {
        self.lo.as_ref()
    }

    pub fn hi(&self) -> Option<&Rat> {
        self.hi.as_ref()
    }

    pub fn knots(&self) -> &[Rat] {
        &self.knots
    }

    pub fn slopes(&self) -> &[Rat] {
        &self.slopes
    }

    pub fn domain(&self) -> Interval {
        Interval::new(
            ExtReal::from_lower(self.lo.clone()),
            ExtReal::from_upper(self.hi.clone()),
        )
    }

    pub fn in_domain(&self, x: &Rat) -> bool {
        !(self.lo.as_ref().is_some_and(|l| x < l) || self.hi.as_ref().is_some_and(|h| x > h))
    }

    fn is_point(&self) -> bool {
        self.lo.is_some() && self.lo == self.hi
    }

    /// Signed integral of the slope function from `a` to `b`.
    fn integral(&self, a: &Rat, b: &Rat) -> Rat {
        if a > b {
            return -self.integral(b, a);
        }
        if self.is_point() {
            return Rat::zero();
        }
        let mut idx = self.knots.partition_point(|k| k <= a);
        let mut left = a.clone();
        let mut total = Rat::zero();
        while idx < self.knots.len() && &self.knots[idx] < b {
            total += &self.slopes[idx] * (&self.knots[idx] - &left);
            left = self.knots[idx].clone();
            idx += 1;
        }
        total + &self.slopes[idx] * (b - left)
    }

    /// Value at a point known to be in the domain.
    pub fn value(&self, x: &Rat) -> Rat {
        &self.anchor_value + self.integral(&self.anchor, x)
    }

    pub fn eval(&self, x: &Rat) -> ExtReal {
        if self.in_domain(x) {
            ExtReal::Finite(self.value(x))
        } else {
            ExtReal::PosInf
        }
    }

    pub fn subdifferential(&self, x: &Rat) -> Interval {
        if !self.in_domain(x) {
            return Interval::empty();
        }
        let left = if self.lo.as_ref() == Some(x) {
            ExtReal::NegInf
        } else {
            ExtReal::Finite(self.slopes[self.knots.partition_point(|k| k < x)].clone())
        };
        let right = if self.hi.as_ref() == Some(x) {
            ExtReal::PosInf
        } else {
            ExtReal::Finite(self.slopes[self.knots.partition_point(|k| k <= x)].clone())
        };
        Interval::new(left, right)
    }

    /// Finite points where a linear function attains its sup over the graph:
    /// knots, finite endpoints and the anchor.
    pub fn vertices(&self) -> Vec<Rat> {
        let mut v = Vec::with_capacity(self.knots.len() + 3);
        v.extend(self.lo.iter().cloned());
        v.extend(self.knots.iter().cloned());
        v.extend(self.hi.iter().cloned());
        v.push(self.anchor.clone());
        v.sort();
        v.dedup();
        v
    }

    /// `(slope, intercept)` of each segment; on the domain `f` is their maximum.
    pub fn affine_pieces(&self) -> Vec<(Rat, Rat)> {
        // Intercepts follow from continuity at each knot: q_{k+1} = q_k + (s_k - s_{k+1}) t_k.
        let reference = self.knots.first().unwrap_or(&self.anchor);
        let mut q = self.value(reference) - &self.slopes[0] * reference;
        let mut out = Vec::with_capacity(self.slopes.len());
        out.push((self.slopes[0].clone(), q.clone()));
        for (k, t) in self.knots.iter().enumerate() {
            q += (&self.slopes[k] - &self.slopes[k + 1]) * t;
            out.push((self.slopes[k + 1].clone(), q.clone()));
        }
        out
    }

    /// Convex conjugate `v -> sup_x (x v - f(x))`, built from the slope data.
    pub fn conjugate(&self) -> Pwl {
        let first = self.slopes[0].clone();
        let last = self.slopes.last().unwrap().clone();
        let lo = if self.lo.is_none() { Some(first.clone()) } else { None };
        let hi = if self.hi.is_none() { Some(last) } else { None };
        // Outer slopes outside the conjugate's domain are dropped again by
        // canonicalization; fill them with a neighbour to keep monotonicity.
        let inner: Vec<Rat> = self.lo.iter().chain(&self.knots).chain(&self.hi).cloned().collect();
        let fill = inner.first().cloned().unwrap_or_else(Rat::zero);
        let mut slopes = Vec::with_capacity(self.knots.len() + 2);
        slopes.push(self.lo.clone().unwrap_or_else(|| fill.clone()));
        slopes.extend(self.knots.iter().cloned());
        slopes.push(self.hi.clone().unwrap_or_else(|| inner.last().cloned().unwrap_or(fill)));
        let mut knots = self.slopes.clone();
        if self.is_point() {
            // Conjugate of a point mass at p is the line p*v.
            knots = vec![Rat::zero()];
        }
        let v0 = if self.is_point() { Rat::zero() } else { first };
        let value = self
            .vertices()
            .iter()
            .map(|x| x * &v0 - self.value(x))
            .max()
            .unwrap();
        Pwl::new(lo, hi, knots, slopes, v0, value).expect("conjugate data is canonical-compatible")
    }

    /// Minimum of `f` over its domain, if attained.
    pub fn minimum(&self) -> Option<Rat> {
        self.vertices()
            .iter()
            .filter(|x| self.subdifferential(x).contains(&Rat::zero()))
            .map(|x| self.value(x))
            .next()
    }
}

/// Convex piecewise-linear cost of one asset with `f(0) = 0`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScalarPwl(Pwl);

impl ScalarPwl {
    /// Function with domain `[lo, hi]` (None meaning infinite), anchored at `f(0) = 0`.
    pub fn new(
        lo: Option<Rat>,
        hi: Option<Rat>,
        knots: Vec<Rat>,
        slopes: Vec<Rat>,
    ) -> Result<Self, KernelError> {
        if lo.as_ref().is_some_and(|l| l.is_positive()) || hi.as_ref().is_some_and(|h| h.is_negative()) {
            return Err(KernelError::Shape("domain must contain the origin".into()));
        }
        Pwl::new(lo, hi, knots, slopes, Rat::zero(), Rat::zero()).map(ScalarPwl)
    }

    pub fn from_pwl(f: Pwl) -> Result<Self, KernelError> {
        if !f.in_domain(&Rat::zero()) || !f.value(&Rat::zero()).is_zero() {
            return Err(KernelError::Shape("function must vanish at the origin".into()));
        }
        let Pwl {
            lo, hi, knots, slopes, ..
        } = f;
        ScalarPwl::new(lo, hi, knots, slopes)
    }

    pub fn zero() -> Self {
        Self::linear(Rat::zero())
    }

    pub fn linear(s: Rat) -> Self {
        ScalarPwl::new(None, None, vec![], vec![s]).unwrap()
    }

    pub fn bid_ask(bid: Rat, ask: Rat) -> Result<Self, KernelError> {
        if bid > ask {
            return Err(KernelError::CrossedQuotes { bid, ask });
        }
        ScalarPwl::new(None, None, vec![Rat::zero()], vec![bid, ask])
    }

    /// Greatest convex function below the given points, on their hull.
    pub fn from_points(points: &[(Rat, Rat)]) -> Result<Self, KernelError> {
        let mut pts = points.to_vec();
        pts.sort();
        pts.dedup_by(|b, a| {
            // Same abscissa: keep the lower value.
            if a.0 == b.0 {
                if b.1 < a.1 {
                    a.1 = b.1.clone();
                }
                true
            } else {
                false
            }
        });
        if pts.is_empty() {
            return Err(KernelError::EmptyDomain);
        }
        let mut hull: Vec<(Rat, Rat)> = Vec::new();
        for p in pts {
            while hull.len() >= 2 {
                let (a, b) = (&hull[hull.len() - 2], &hull[hull.len() - 1]);
                // Drop b if it lies on or above the chord from a to p.
                let cross = (&b.0 - &a.0) * (&p.1 - &a.1) - (&b.1 - &a.1) * (&p.0 - &a.0);
                if cross.is_positive() {
                    break;
                }
                hull.pop();
            }
            hull.push(p);
        }
        let lo = hull[0].0.clone();
        let hi = hull.last().unwrap().0.clone();
        let mut knots = Vec::new();
        let mut slopes = Vec::new();
        for w in hull.windows(2) {
            slopes.push((&w[1].1 - &w[0].1) / (&w[1].0 - &w[0].0));
        }
        for p in hull.iter().take(hull.len().saturating_sub(1)).skip(1) {
            knots.push(p.0.clone());
        }
        if slopes.is_empty() {
            slopes.push(Rat::zero());
        }
        let anchor = hull[0].clone();
        let f = Pwl::new(Some(lo), Some(hi), knots, slopes, anchor.0, anchor.1)?;
        Self::from_pwl(f)
    }

    /// Pointwise maximum of lines `(slope, intercept)` over the whole line.
    pub fn from_lines(lines: &[(Rat, Rat)]) -> Result<Self, KernelError> {
        let mut ls = lines.to_vec();
        ls.sort();
        // Equal slopes: the last one has the largest intercept.
        ls.dedup_by(|b, a| {
            if a.0 == b.0 {
                if b.1 > a.1 {
                    a.1 = b.1.clone();
                }
                true
            } else {
                false
            }
        });
        if ls.is_empty() {
            return Err(KernelError::EmptyDomain);
        }
        let meet = |a: &(Rat, Rat), b: &(Rat, Rat)| (&a.1 - &b.1) / (&b.0 - &a.0);
        let mut env: Vec<(Rat, Rat)> = Vec::new();
        for l in ls {
            while env.len() >= 2 {
                let x1 = meet(&env[env.len() - 2], &env[env.len() - 1]);
                let x2 = meet(&env[env.len() - 1], &l);
                if x2 > x1 {
                    break;
                }
                env.pop();
            }
            env.push(l);
        }
        let knots: Vec<Rat> = env.windows(2).map(|w| meet(&w[0], &w[1])).collect();
        let slopes: Vec<Rat> = env.iter().map(|l| l.0.clone()).collect();
        let at0 = env.iter().map(|l| l.1.clone()).max().unwrap();
        let f = Pwl::new(None, None, knots, slopes, Rat::zero(), at0)?;
        Self::from_pwl(f)
    }

    pub fn as_pwl(&self) -> &Pwl {
        &self.0
    }

    pub fn lo(&self) -> Option<&Rat> {
        self.0.lo()
    }

    pub fn hi(&self) -> Option<&Rat> {
        self.0.hi()
    }

    pub fn knots(&self) -> &[Rat] {
        self.0.knots()
    }

    pub fn slopes(&self) -> &[Rat] {
        self.0.slopes()
    }

    pub fn eval(&self, x: &Rat) -> ExtReal {
        self.0.eval(x)
    }

    pub fn subdifferential(&self, x: &Rat) -> Interval {
        self.0.subdifferential(x)
    }

    /// The bid-ask interval `∂f(0)`.
    pub fn market_prices(&self) -> Interval {
        self.0.subdifferential(&Rat::zero())
    }

    /// Closure of all marginal prices, which equals the domain of the conjugate.
    pub fn price_range(&self) -> Interval {
        let lo = if self.0.lo.is_some() {
            ExtReal::NegInf
        } else {
            ExtReal::Finite(self.0.slopes[0].clone())
        };
        let hi = if self.0.hi.is_some() {
            ExtReal::PosInf
        } else {
            ExtReal::Finite(self.0.slopes.last().unwrap().clone())
        };
        Interval::new(lo, hi)
    }

    pub fn conjugate(&self) -> Pwl {
        self.0.conjugate()
    }

    pub fn vertices(&self) -> Vec<Rat> {
        self.0.vertices()
    }

    pub fn affine_pieces(&self) -> Vec<(Rat, Rat)> {
        self.0.affine_pieces()
    }

    /// `x -> alpha f(x / alpha)`.
    pub fn scale(&self, alpha: &Rat) -> Result<Self, KernelError> {
        if !alpha.is_positive() {
            return Err(KernelError::NonPositiveScale(alpha.clone()));
        }
        let f = &self.0;
        ScalarPwl::new(
            f.lo.as_ref().map(|l| l * alpha),
            f.hi.as_ref().map(|h| h * alpha),
            f.knots.iter().map(|k| k * alpha).collect(),
            f.slopes.clone(),
        )
    }

    /// Directional derivative at the origin as a two-slope function.
    pub fn subderivative_origin(&self) -> Self {
        let zero = Rat::zero();
        let d = self.0.subdifferential(&zero);
        let lo = if d.lo == ExtReal::NegInf { Some(zero.clone()) } else { None };
        let hi = if d.hi == ExtReal::PosInf { Some(zero.clone()) } else { None };
        // A blocked side's slope is irrelevant; mirror the other side.
        let (left, right) = match (d.lo.finite(), d.hi.finite()) {
            (Some(l), Some(r)) => (l.clone(), r.clone()),
            (Some(l), None) => (l.clone(), l.clone()),
            (None, Some(r)) => (r.clone(), r.clone()),
            (None, None) => (Rat::zero(), Rat::zero()),
        };
        ScalarPwl::new(lo, hi, vec![zero], vec![left, right]).unwrap()
    }

    /// Horizon function `sup_alpha alpha f(x / alpha)`.
    pub fn horizon(&self) -> Self {
        let zero = Rat::zero();
        let f = &self.0;
        let lo = f.lo.as_ref().map(|_| zero.clone());
        let hi = f.hi.as_ref().map(|_| zero.clone());
        let left = f.slopes[0].clone();
        let right = f.slopes.last().unwrap().clone();
        ScalarPwl::new(lo, hi, vec![zero], vec![left, right]).unwrap()
    }

    /// `x -> s f(x)` for `s >= 0`; `s = 0` gives the zero function.
    pub fn times(&self, s: &Rat) -> Result<Self, KernelError> {
        if s.is_negative() {
            return Err(KernelError::NegativeMultiplier(s.clone()));
        }
        if s.is_zero() {
            return Ok(Self::zero());
        }
        let f = &self.0;
        ScalarPwl::new(
            f.lo.clone(),
            f.hi.clone(),
            f.knots.clone(),
            f.slopes.iter().map(|k| k * s).collect(),
        )
    }

    /// `x -> f(m x)` for `m > 0`.
    pub fn compose_scale(&self, m: &Rat) -> Result<Self, KernelError> {
        if !m.is_positive() {
            return Err(KernelError::NonPositiveScale(m.clone()));
        }
        let f = &self.0;
        ScalarPwl::new(
            f.lo.as_ref().map(|l| l / m),
            f.hi.as_ref().map(|h| h / m),
            f.knots.iter().map(|k| k / m).collect(),
            f.slopes.iter().map(|s| s * m).collect(),
        )
    }

    /// True when `f(lambda x) = lambda f(x)` for all `lambda > 0`.
    pub fn is_sublinear(&self) -> bool {
        let f = &self.0;
        f.knots.iter().all(Zero::is_zero)
            && f.lo.as_ref().is_none_or(Zero::is_zero)
            && f.hi.as_ref().is_none_or(Zero::is_zero)
    }

    /// True when the function is finite on the whole line.
    pub fn is_finite_valued(&self) -> bool {
        self.0.lo.is_none() && self.0.hi.is_none()
    }

    pub fn is_linear(&self) -> bool {
        self.is_finite_valued() && self.0.slopes.len() == 1
    }

    pub fn one() -> Self {
        Self::linear(Rat::one())
    }
}

impl fmt::Display for ScalarPwl {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = &self.0;
        write!(
            f,
            "pwl(domain {}, knots [{}], slopes [{}])",
            p.domain(),
            join(&p.knots),
            join(&p.slopes)
        )
    }
}

fn join(v: &[Rat]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ")
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::num::{frac, int};
    use proptest::prelude::*;

    fn fin(n: i64) -> ExtReal {
        ExtReal::Finite(int(n))
    }

    fn book() -> ScalarPwl {
        // Asks: 5 at 10, then 5 at 12; no bids.
        ScalarPwl::new(Some(int(0)), Some(int(10)), vec![int(5)], vec![int(10), int(12)]).unwrap()
    }

    #[test]
    fn bid_ask_evaluation() {
        let f = ScalarPwl::bid_ask(int(1), int(2)).unwrap();
        assert_eq!(f.eval(&int(3)), fin(6));
        assert_eq!(f.eval(&int(-3)), fin(-3));
        assert_eq!(f.eval(&int(0)), fin(0));
        assert_eq!(f.market_prices(), Interval::new(fin(1), fin(2)));
    }

    #[test]
    fn order_book_values_and_kinks() {
        let f = book();
        assert_eq!(f.eval(&int(7)), fin(74));
        assert_eq!(f.eval(&int(11)), ExtReal::PosInf);
        assert_eq!(f.eval(&int(-1)), ExtReal::PosInf);
        assert_eq!(f.subdifferential(&int(5)), Interval::new(fin(10), fin(12)));
        assert_eq!(f.subdifferential(&int(0)), Interval::new(ExtReal::NegInf, fin(10)));
        assert_eq!(f.subdifferential(&int(10)), Interval::new(fin(12), ExtReal::PosInf));
        assert!(f.subdifferential(&int(12)).is_empty());
    }

    #[test]
    fn linear_subdifferential_everywhere() {
        let f = ScalarPwl::linear(int(3));
        for x in [-5, 0, 7] {
            assert_eq!(f.subdifferential(&int(x)), Interval::point(int(3)));
        }
    }

    #[test]
    fn conjugates_of_examples() {
        let g = ScalarPwl::bid_ask(int(1), int(2)).unwrap().conjugate();
        assert_eq!(g.eval(&int(1)), fin(0));
        assert_eq!(g.eval(&frac(3, 2)), fin(0));
        assert_eq!(g.eval(&int(2)), fin(0));
        assert_eq!(g.eval(&frac(21, 10)), ExtReal::PosInf);
        assert_eq!(g.eval(&frac(9, 10)), ExtReal::PosInf);

        let g = ScalarPwl::one().conjugate();
        assert_eq!(g.eval(&int(1)), fin(0));
        assert_eq!(g.eval(&int(2)), ExtReal::PosInf);

        let g = book().conjugate();
        assert_eq!(g.eval(&int(13)), fin(20));
        // Brute force over a grid of the domain [0, 10].
        for v in [-3, 0, 9, 10, 11, 12, 13, 20] {
            let brute = (0..=1000)
                .map(|i| {
                    let x = frac(i, 100);
                    &x * int(v) - book().eval(&x).finite().unwrap()
                })
                .max()
                .unwrap();
            assert_eq!(g.eval(&int(v)), ExtReal::Finite(brute), "v = {v}");
        }
    }

    #[test]
    fn scaling_examples() {
        let f = book();
        let g = f.scale(&int(2)).unwrap();
        assert_eq!(g.eval(&int(14)), fin(148));
        assert_eq!(f.scale(&int(1)).unwrap(), f);
        let ba = ScalarPwl::bid_ask(int(1), int(2)).unwrap();
        assert_eq!(ba.scale(&int(7)).unwrap(), ba);
        assert!(matches!(f.scale(&int(0)), Err(KernelError::NonPositiveScale(_))));
    }

    #[test]
    fn derived_functions_of_examples() {
        let ba = ScalarPwl::bid_ask(int(1), int(2)).unwrap();
        assert_eq!(ba.subderivative_origin(), ba);
        assert_eq!(ba.horizon(), ba);

        let d = book().subderivative_origin();
        assert_eq!(d.eval(&int(3)), fin(30));
        assert_eq!(d.eval(&int(-1)), ExtReal::PosInf);

        let both = ScalarPwl::new(Some(int(-4)), Some(int(10)), vec![int(0), int(5)], vec![int(9), int(10), int(12)])
            .unwrap();
        let h = both.horizon();
        assert_eq!(h.eval(&int(0)), fin(0));
        assert_eq!(h.eval(&int(1)), ExtReal::PosInf);
        assert_eq!(h.eval(&int(-1)), ExtReal::PosInf);

        // Secant model of e^x - 1 with a kink at 0.
        let secant = ScalarPwl::new(None, None, vec![int(-1), int(0), int(1)], vec![frac(1, 4), frac(5, 8), frac(7, 4), int(3)])
            .unwrap();
        let d = secant.subderivative_origin();
        assert_eq!(d.eval(&int(-2)), ExtReal::Finite(frac(-5, 4)));
        assert_eq!(d.eval(&int(2)), ExtReal::Finite(frac(7, 2)));
    }

    #[test]
    fn envelope_constructors() {
        let f = ScalarPwl::from_points(&[
            (int(-1), int(1)),
            (int(0), int(0)),
            (int(1), int(2)),
            (int(2), int(4)),
            (int(3), int(9)),
        ])
        .unwrap();
        assert_eq!(f.knots(), &[int(0), int(2)]);
        assert_eq!(f.slopes(), &[int(-1), int(2), int(5)]);
        assert_eq!(f.lo(), Some(&int(-1)));

        let g = ScalarPwl::from_lines(&[(int(1), int(0)), (int(3), int(-2)), (int(-1), int(-1)), (int(2), int(-5))])
            .unwrap();
        assert_eq!(g.knots(), &[frac(-1, 2), int(1)]);
        assert_eq!(g.eval(&int(2)), fin(4));
        assert!(ScalarPwl::from_lines(&[(int(1), int(1))]).is_err());
    }

    #[test]
    fn times_and_compose() {
        let f = ScalarPwl::bid_ask(int(1), int(2)).unwrap();
        assert_eq!(f.times(&int(0)).unwrap(), ScalarPwl::zero());
        let g = ScalarPwl::new(None, None, vec![int(1)], vec![int(1), int(2)]).unwrap();
        let h = g.compose_scale(&int(2)).unwrap();
        assert_eq!(h.knots(), &[frac(1, 2)]);
        assert_eq!(h.eval(&int(1)), fin(3));
    }

    // Random convex PWL with f(0) = 0 and assorted domains.
    pub(crate) fn arb_scalar_pwl() -> impl Strategy<Value = ScalarPwl> {
        (
            prop::collection::vec(-20i64..20, 0..5),
            prop::collection::vec(-10i64..10, 1..6),
            prop::option::of(0i64..8),
            prop::option::of(0i64..8),
        )
            .prop_map(|(mut knots, mut slopes, lo, hi)| {
                knots.sort();
                knots.dedup();
                slopes.sort();
                slopes.resize(knots.len() + 1, *slopes.last().unwrap());
                let knots = knots.into_iter().map(|k| frac(k, 2)).collect();
                let slopes = slopes.into_iter().map(|s| frac(s, 3)).collect();
                ScalarPwl::new(lo.map(|l| int(-l)), hi.map(int), knots, slopes).unwrap()
            })
    }

    fn grid() -> Vec<Rat> {
        (-48..=48).map(|i| frac(i, 4)).collect()
    }

    proptest! {
        #[test]
        fn conjugate_involution(f in arb_scalar_pwl()) {
            let back = f.conjugate().conjugate();
            prop_assert_eq!(back.knots(), f.knots());
            prop_assert_eq!(back.slopes(), f.slopes());
            prop_assert_eq!(back.domain(), f.as_pwl().domain());
            for x in grid().iter().chain(f.knots()) {
                prop_assert_eq!(back.eval(x), f.eval(x));
            }
        }

        #[test]
        fn conjugate_is_nonnegative_with_zero_on_prices(f in arb_scalar_pwl()) {
            let g = f.conjugate();
            for v in grid() {
                let gv = g.eval(&v);
                prop_assert!(gv >= ExtReal::zero());
                prop_assert_eq!(gv == ExtReal::zero(), f.market_prices().contains(&v));
            }
            prop_assert_eq!(g.domain(), f.price_range());
        }

        #[test]
        fn fenchel_young(f in arb_scalar_pwl()) {
            let g = f.conjugate();
            let pts = grid();
            for x in pts.iter().step_by(3) {
                for v in pts.iter().step_by(5) {
                    let lhs = f.eval(x).add(&g.eval(v));
                    let xv = ExtReal::Finite(x * v);
                    prop_assert!(lhs >= xv);
                    let equal = lhs == xv;
                    prop_assert_eq!(equal, f.subdifferential(x).contains(v));
                }
            }
        }

        #[test]
        fn scaling_monotone_and_semigroup(f in arb_scalar_pwl(), a in 1i64..6, b in 1i64..6) {
            let (a, b) = (frac(a, 3), frac(b, 2));
            let fa = f.scale(&a).unwrap();
            let fb = f.scale(&b).unwrap();
            let (small, large) = if a < b { (&fa, &fb) } else { (&fb, &fa) };
            for x in grid() {
                prop_assert!(small.eval(&x) >= large.eval(&x));
            }
            prop_assert_eq!(fa.scale(&b).unwrap(), f.scale(&(&a * &b)).unwrap());
        }

        #[test]
        fn subderivative_scale_horizon_sandwich(f in arb_scalar_pwl(), a in 1i64..40) {
            let alpha = frac(a, 4);
            let d = f.subderivative_origin();
            let h = f.horizon();
            let fa = f.scale(&alpha).unwrap();
            for x in grid() {
                prop_assert!(d.eval(&x) <= fa.eval(&x));
                prop_assert!(fa.eval(&x) <= h.eval(&x));
                for lambda in [int(2), int(10)] {
                    prop_assert_eq!(d.eval(&(&x * &lambda)), d.eval(&x).scale(&lambda));
                    prop_assert_eq!(h.eval(&(&x * &lambda)), h.eval(&x).scale(&lambda));
                }
            }
            prop_assert!(d.is_sublinear() && h.is_sublinear());
        }

        #[test]
        fn affine_pieces_reproduce_values(f in arb_scalar_pwl()) {
            let pieces = f.affine_pieces();
            for x in grid() {
                if let ExtReal::Finite(v) = f.eval(&x) {
                    let m = pieces.iter().map(|(s, q)| s * &x + q).max().unwrap();
                    prop_assert_eq!(m, v);
                }
            }
        }
    }
}
