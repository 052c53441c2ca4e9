//! Dense univariate polynomials with exact coefficients.

use std::fmt;

use rug::{Float, Integer, Rational};
use serde::Serialize;

use crate::arith::{CFloat, CRational, Ring};

/// Coefficient sequence indexed by power of x. Trailing zeros are trimmed, so
/// the zero polynomial has no coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct PolySeries<C> {
    coeffs: Vec<C>,
}

impl<C: Ring> PolySeries<C> {
    pub fn new(mut coeffs: Vec<C>) -> Self {
        while coeffs.last().is_some_and(Ring::is_zero) {
            coeffs.pop();
        }
        Self { coeffs }
    }

    pub fn zero() -> Self {
        Self { coeffs: Vec::new() }
    }

    pub fn constant(c: C) -> Self {
        Self::new(vec![c])
    }

    pub fn monomial(k: usize, c: C) -> Self {
        let mut v = vec![C::zero(); k + 1];
        v[k] = c;
        Self::new(v)
    }

    pub fn coeffs(&self) -> &[C] {
        &self.coeffs
    }

    pub fn coeff(&self, k: usize) -> C {
        self.coeffs.get(k).cloned().unwrap_or_else(C::zero)
    }

    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn leading(&self) -> Option<&C> {
        self.coeffs.last()
    }

    pub fn add(&self, o: &Self) -> Self {
        let n = self.coeffs.len().max(o.coeffs.len());
        Self::new((0..n).map(|k| self.coeff(k).add(&o.coeff(k))).collect())
    }

    pub fn sub(&self, o: &Self) -> Self {
        let n = self.coeffs.len().max(o.coeffs.len());
        Self::new((0..n).map(|k| self.coeff(k).sub(&o.coeff(k))).collect())
    }

    pub fn scale(&self, c: &C) -> Self {
        Self::new(self.coeffs.iter().map(|a| a.mul(c)).collect())
    }

    pub fn mul_x(&self) -> Self {
        if self.is_zero() {
            return Self::zero();
        }
        let mut v = Vec::with_capacity(self.coeffs.len() + 1);
        v.push(C::zero());
        v.extend(self.coeffs.iter().cloned());
        Self::new(v)
    }

    pub fn mul(&self, o: &Self) -> Self {
        if self.is_zero() || o.is_zero() {
            return Self::zero();
        }
        let mut v = vec![C::zero(); self.coeffs.len() + o.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in o.coeffs.iter().enumerate() {
                v[i + j] = v[i + j].add(&a.mul(b));
            }
        }
        Self::new(v)
    }

    /// Horner evaluation, highest power first.
    pub fn eval(&self, x: &C) -> C {
        self.coeffs
            .iter()
            .rev()
            .fold(C::zero(), |acc, c| acc.mul(x).add(c))
    }

    /// The polynomial `x -> p(x + c)`, expanded by the binomial theorem.
    pub fn shift(&self, c: &C) -> Self {
        let n = self.coeffs.len();
        let mut out = vec![C::zero(); n];
        for (k, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            // a x^k -> a sum_j binom(k, j) c^(k-j) x^j
            let mut cpow = C::one();
            for j in (0..=k).rev() {
                let b = binomial_ring::<C>(k, j);
                out[j] = out[j].add(&a.mul(&b).mul(&cpow));
                cpow = cpow.mul(c);
            }
        }
        Self::new(out)
    }

    /// Terms whose power has the wrong parity relative to `n`.
    pub fn parity_violations(&self, n: usize) -> Vec<usize> {
        (0..self.coeffs.len())
            .filter(|k| (k + n) % 2 == 1 && !self.coeffs[*k].is_zero())
            .collect()
    }

    pub fn map<D: Ring>(&self, f: impl Fn(&C) -> D) -> PolySeries<D> {
        PolySeries::new(self.coeffs.iter().map(f).collect())
    }
}

fn binomial_ring<C: Ring>(k: usize, j: usize) -> C {
    C::from_integer(&Integer::from(Integer::binomial_u(k as u32, j as u32)))
}

impl PolySeries<Rational> {
    pub fn to_complex(&self) -> PolySeries<CRational> {
        self.map(|c| CRational::real(c.clone()))
    }

    pub fn to_floats(&self, prec: u32) -> Vec<Float> {
        self.coeffs
            .iter()
            .map(|c| Float::with_val(prec, c))
            .collect()
    }

    /// Horner evaluation with each coefficient rounded to `x.prec()` bits.
    pub fn eval_float(&self, x: &Float) -> Float {
        let p = x.prec();
        let mut acc = Float::new(p);
        for c in self.coeffs.iter().rev() {
            acc *= x;
            acc += c;
        }
        acc
    }

    pub fn eval_cfloat(&self, x: &CFloat) -> CFloat {
        let p = x.prec();
        let mut acc = CFloat::zero(p);
        for c in self.coeffs.iter().rev() {
            acc = &acc * x;
            acc.re += c;
        }
        acc
    }

    /// Sum of `|c_k| |x|^k`, the magnitude scale of a Horner evaluation.
    pub fn abs_scale(&self, x: &Float) -> Float {
        let p = x.prec();
        let ax = Float::with_val(p, x.abs_ref());
        let mut acc = Float::new(p);
        for c in self.coeffs.iter().rev() {
            acc *= &ax;
            acc += Float::with_val(p, c).abs();
        }
        acc
    }
}

/// Serializable snapshot with decimal-string coefficients.
#[derive(Debug, Clone, Serialize)]
pub struct PolyRecord {
    pub degree: Option<usize>,
    pub coeffs: Vec<String>,
}

impl<C: Ring + fmt::Display> PolySeries<C> {
    pub fn record(&self) -> PolyRecord {
        PolyRecord {
            degree: self.degree(),
            coeffs: self.coeffs.iter().map(|c| c.to_string()).collect(),
        }
    }
}

impl<C: Ring + fmt::Display> fmt::Display for PolySeries<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (k, c) in self.coeffs.iter().enumerate().rev() {
            if c.is_zero() {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            match k {
                0 => write!(f, "{c}")?,
                1 => write!(f, "{c}*x")?,
                _ => write!(f, "{c}*x^{k}")?,
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rp(v: &[i64]) -> PolySeries<Rational> {
        PolySeries::new(v.iter().map(|&c| Rational::from(c)).collect())
    }

    #[test]
    fn trims_and_multiplies() {
        let p = rp(&[1, 2, 0, 0]);
        assert_eq!(p.degree(), Some(1));
        assert_eq!(p.mul(&p), rp(&[1, 4, 4]));
        assert!(rp(&[0, 0]).is_zero());
        assert_eq!(rp(&[3]).mul_x(), rp(&[0, 3]));
    }

    #[test]
    fn shift_by_one() {
        // (x+1)^3
        let p = rp(&[0, 0, 0, 1]);
        assert_eq!(p.shift(&Rational::from(1)), rp(&[1, 3, 3, 1]));
    }

    proptest! {
        #[test]
        fn shift_matches_pointwise(
            cs in proptest::collection::vec(-20i64..20, 0..7),
            c in -5i64..5,
            x in -5i64..5,
        ) {
            let p = rp(&cs);
            let c = Rational::from(c);
            let x = Rational::from(x);
            let shifted = p.shift(&c);
            prop_assert_eq!(shifted.eval(&x), p.eval(&Rational::from(&x + &c)));
        }

        #[test]
        fn product_evaluates_to_product(
            a in proptest::collection::vec(-9i64..9, 0..6),
            b in proptest::collection::vec(-9i64..9, 0..6),
            x in -4i64..4,
        ) {
            let (pa, pb) = (rp(&a), rp(&b));
            let x = Rational::from(x);
            prop_assert_eq!(pa.mul(&pb).eval(&x), pa.eval(&x).mul(&pb.eval(&x)));
        }
    }
}
