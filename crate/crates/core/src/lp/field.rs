use num_integer::Integer;
use num_traits::{Signed, Zero};

use crate::num::{self, Rat};

/// Scalar type the tableau pivots over.
pub(crate) trait Field: Clone + std::fmt::Debug {
    fn nil() -> Self;
    fn from_rat(r: &Rat) -> Self;
    fn to_rat(&self) -> Rat;
    fn is_nil(&self) -> bool;
    fn is_pos(&self) -> bool;
    fn is_neg(&self) -> bool;
    fn add(&self, o: &Self) -> Self;
    fn div(&self, o: &Self) -> Self;
    fn neg(&self) -> Self;
    fn less(&self, o: &Self) -> bool;
    /// `self -= f * p`, with cleanup of tiny float residue.
    fn sub_mul_assign(&mut self, f: &Self, p: &Self);
}

impl Field for Rat {
    fn nil() -> Self {
        Zero::zero()
    }
    fn from_rat(r: &Rat) -> Self {
        r.clone()
    }
    fn to_rat(&self) -> Rat {
        self.clone()
    }
    fn is_nil(&self) -> bool {
        Zero::is_zero(self)
    }
    fn is_pos(&self) -> bool {
        Signed::is_positive(self)
    }
    fn is_neg(&self) -> bool {
        Signed::is_negative(self)
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn div(&self, o: &Self) -> Self {
        self / o
    }
    fn neg(&self) -> Self {
        -self
    }
    fn less(&self, o: &Self) -> bool {
        self < o
    }
    fn sub_mul_assign(&mut self, f: &Self, p: &Self) {
        // One gcd for the fused update; Ratio's operators reduce at every step.
        let num = self.numer() * f.denom() * p.denom() - f.numer() * p.numer() * self.denom();
        if num.is_zero() {
            *self = Zero::zero();
            return;
        }
        let den = self.denom() * f.denom() * p.denom();
        let g = num.gcd(&den);
        *self = Rat::new_raw(num / &g, den / g);
    }
}

/// Absolute tolerance of the floating mode.
pub const FLOAT_TOLERANCE: f64 = 1e-9;

impl Field for f64 {
    fn nil() -> Self {
        0.0
    }
    fn from_rat(r: &Rat) -> Self {
        num::to_f64(r)
    }
    fn to_rat(&self) -> Rat {
        num::from_f64(*self).unwrap_or_else(Zero::zero)
    }
    fn is_nil(&self) -> bool {
        self.abs() <= FLOAT_TOLERANCE
    }
    fn is_pos(&self) -> bool {
        *self > FLOAT_TOLERANCE
    }
    fn is_neg(&self) -> bool {
        *self < -FLOAT_TOLERANCE
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn div(&self, o: &Self) -> Self {
        self / o
    }
    fn neg(&self) -> Self {
        -self
    }
    fn less(&self, o: &Self) -> bool {
        self < o
    }
    fn sub_mul_assign(&mut self, f: &Self, p: &Self) {
        *self -= f * p;
        if self.abs() < 1e-12 {
            *self = 0.0;
        }
    }
}
