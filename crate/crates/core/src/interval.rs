//! Outward-rounded interval arithmetic for rigorous suprema over compact boxes.

use serde::Serialize;
use std::ops::{Add, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

/// Interval endpoints as decimal strings, each rounded away from the interior.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DecimalBounds {
    pub lower_rounded_down: String,
    pub upper_rounded_up: String,
}

fn down(x: f64) -> f64 {
    if x.is_finite() {
        x.next_down()
    } else {
        x
    }
}

fn up(x: f64) -> f64 {
    if x.is_finite() {
        x.next_up()
    } else {
        x
    }
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        debug_assert!(lo <= hi, "empty interval [{lo}, {hi}]");
        Self { lo, hi }
    }

    pub fn point(x: f64) -> Self {
        Self { lo: x, hi: x }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn intersects(&self, other: &Interval) -> bool {
        self.lo <= other.hi && other.lo <= self.hi
    }

    pub fn intersection(&self, other: &Interval) -> Option<Interval> {
        self.intersects(other).then(|| Interval::new(self.lo.max(other.lo), self.hi.min(other.hi)))
    }

    pub fn hull(&self, other: &Interval) -> Interval {
        Interval::new(self.lo.min(other.lo), self.hi.max(other.hi))
    }

    pub fn is_bounded(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }

    pub fn sqr(self) -> Interval {
        let (a, b) = (self.lo * self.lo, self.hi * self.hi);
        if self.lo <= 0.0 && self.hi >= 0.0 {
            Interval::new(0.0, up(a.max(b)))
        } else {
            Interval::new(down(a.min(b)).max(0.0), up(a.max(b)))
        }
    }

    /// Square root of the nonnegative part.
    pub fn sqrt(self) -> Interval {
        Interval::new(down(self.lo.max(0.0).sqrt()).max(0.0), up(self.hi.max(0.0).sqrt()))
    }

    /// `exp` is not correctly rounded in libm, so endpoints are widened by two ulps.
    pub fn exp(self) -> Interval {
        Interval::new(down(down(self.lo.exp())).max(0.0), up(up(self.hi.exp())))
    }

    pub fn abs(self) -> Interval {
        if self.lo >= 0.0 {
            self
        } else if self.hi <= 0.0 {
            -self
        } else {
            Interval::new(0.0, self.hi.max(-self.lo))
        }
    }

    pub fn scale(self, c: f64) -> Interval {
        self * Interval::point(c)
    }

    pub fn decimal(&self) -> DecimalBounds {
        DecimalBounds { lower_rounded_down: decimal_down(self.lo), upper_rounded_up: decimal_up(self.hi) }
    }
}

/// 17-significant-digit decimal that is `<= x`.
pub fn decimal_down(x: f64) -> String {
    let mut y = x;
    loop {
        let s = crate::report_number(y);
        match s.parse::<f64>() {
            Ok(v) if v <= x || !x.is_finite() => return s,
            _ => y = down(y),
        }
    }
}

/// 17-significant-digit decimal that is `>= x`.
pub fn decimal_up(x: f64) -> String {
    let mut y = x;
    loop {
        let s = crate::report_number(y);
        match s.parse::<f64>() {
            Ok(v) if v >= x || !x.is_finite() => return s,
            _ => y = up(y),
        }
    }
}

impl Add for Interval {
    type Output = Interval;
    fn add(self, o: Interval) -> Interval {
        Interval::new(down(self.lo + o.lo), up(self.hi + o.hi))
    }
}

impl Sub for Interval {
    type Output = Interval;
    fn sub(self, o: Interval) -> Interval {
        Interval::new(down(self.lo - o.hi), up(self.hi - o.lo))
    }
}

impl Neg for Interval {
    type Output = Interval;
    fn neg(self) -> Interval {
        Interval::new(-self.hi, -self.lo)
    }
}

impl Mul for Interval {
    type Output = Interval;
    fn mul(self, o: Interval) -> Interval {
        let p = [self.lo * o.lo, self.lo * o.hi, self.hi * o.lo, self.hi * o.hi];
        let lo = p.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Interval::new(down(lo), up(hi))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn encloses_one_third_sum() {
        let third = Interval::point(1.0) * Interval::new(1.0 / 3.0, 1.0 / 3.0);
        let s = third + third + third;
        assert!(s.contains(1.0));
        assert!(s.width() > 0.0);
    }

    #[test]
    fn decimal_strings_bracket() {
        let iv = Interval::new(0.1, 0.2);
        let d = iv.decimal();
        assert!(d.lower_rounded_down.parse::<f64>().unwrap() <= 0.1);
        assert!(d.upper_rounded_up.parse::<f64>().unwrap() >= 0.2);
    }

    proptest! {
        #[test]
        fn sqrt_exp_enclose_point_values(a in -5.0f64..5.0, w in 0.0f64..2.0, t in 0.0f64..1.0) {
            let iv = Interval::new(a, a + w);
            let x = a + t * w;
            prop_assert!(iv.exp().contains(x.exp()));
            prop_assert!(iv.sqr().contains(x * x));
            let pos = Interval::new(a.abs(), a.abs() + w);
            prop_assert!(pos.sqrt().contains((a.abs() + t * w).sqrt()));
            prop_assert!((iv * iv).contains(x * x));
        }
    }
}
