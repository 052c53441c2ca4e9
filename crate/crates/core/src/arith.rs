//! Complex numbers over MPFR floats and exact complex rationals.

use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

use rug::ops::Pow;
use rug::{Float, Integer, Rational};

/// Complex number with MPFR components. Precision follows the real part.
#[derive(Clone, Debug, PartialEq)]
pub struct CFloat {
    pub re: Float,
    pub im: Float,
}

impl CFloat {
    pub fn new(re: Float, im: Float) -> Self {
        Self { re, im }
    }

    pub fn zero(prec: u32) -> Self {
        Self::new(Float::new(prec), Float::new(prec))
    }

    pub fn one(prec: u32) -> Self {
        Self::new(Float::with_val(prec, 1), Float::new(prec))
    }

    /// The imaginary unit.
    pub fn i(prec: u32) -> Self {
        Self::new(Float::new(prec), Float::with_val(prec, 1))
    }

    pub fn from_real(re: Float) -> Self {
        let im = Float::new(re.prec());
        Self { re, im }
    }

    pub fn from_f64(prec: u32, re: f64, im: f64) -> Self {
        Self::new(Float::with_val(prec, re), Float::with_val(prec, im))
    }

    pub fn prec(&self) -> u32 {
        self.re.prec()
    }

    pub fn with_prec(&self, prec: u32) -> Self {
        Self::new(
            Float::with_val(prec, &self.re),
            Float::with_val(prec, &self.im),
        )
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    pub fn is_finite(&self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }

    pub fn conj(&self) -> Self {
        Self::new(self.re.clone(), Float::with_val(self.prec(), -&self.im))
    }

    /// Multiplication by i.
    pub fn mul_i(&self) -> Self {
        Self::new(Float::with_val(self.prec(), -&self.im), self.re.clone())
    }

    pub fn scale(&self, s: &Float) -> Self {
        let p = self.prec();
        Self::new(
            Float::with_val(p, &self.re * s),
            Float::with_val(p, &self.im * s),
        )
    }

    pub fn norm_sqr(&self) -> Float {
        let p = self.prec();
        let mut r = Float::with_val(p, self.re.square_ref());
        r += Float::with_val(p, self.im.square_ref());
        r
    }

    pub fn abs(&self) -> Float {
        Float::with_val(self.prec(), self.re.hypot_ref(&self.im))
    }

    pub fn powu(&self, n: u32) -> Self {
        let mut acc = Self::one(self.prec());
        let mut base = self.clone();
        let mut k = n;
        while k > 0 {
            if k & 1 == 1 {
                acc = &acc * &base;
            }
            base = &base * &base;
            k >>= 1;
        }
        acc
    }

    pub fn recip(&self) -> Self {
        let d = self.norm_sqr();
        let p = self.prec();
        Self::new(
            Float::with_val(p, &self.re / &d),
            Float::with_val(p, -Float::with_val(p, &self.im / &d)),
        )
    }
}

impl fmt::Display for CFloat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({} + {}i)", self.re.to_f64(), self.im.to_f64())
    }
}

impl Add<&CFloat> for &CFloat {
    type Output = CFloat;
    fn add(self, o: &CFloat) -> CFloat {
        let p = self.prec();
        CFloat::new(
            Float::with_val(p, &self.re + &o.re),
            Float::with_val(p, &self.im + &o.im),
        )
    }
}

impl Sub<&CFloat> for &CFloat {
    type Output = CFloat;
    fn sub(self, o: &CFloat) -> CFloat {
        let p = self.prec();
        CFloat::new(
            Float::with_val(p, &self.re - &o.re),
            Float::with_val(p, &self.im - &o.im),
        )
    }
}

impl Mul<&CFloat> for &CFloat {
    type Output = CFloat;
    fn mul(self, o: &CFloat) -> CFloat {
        let p = self.prec();
        let re = Float::with_val(p, &self.re * &o.re) - Float::with_val(p, &self.im * &o.im);
        let im = Float::with_val(p, &self.re * &o.im) + Float::with_val(p, &self.im * &o.re);
        CFloat::new(re, im)
    }
}

impl Div<&CFloat> for &CFloat {
    type Output = CFloat;
    fn div(self, o: &CFloat) -> CFloat {
        let d = o.norm_sqr();
        let n = self * &o.conj();
        let p = self.prec();
        CFloat::new(
            Float::with_val(p, &n.re / &d),
            Float::with_val(p, &n.im / &d),
        )
    }
}

impl Neg for &CFloat {
    type Output = CFloat;
    fn neg(self) -> CFloat {
        let p = self.prec();
        CFloat::new(Float::with_val(p, -&self.re), Float::with_val(p, -&self.im))
    }
}

impl AddAssign<&CFloat> for CFloat {
    fn add_assign(&mut self, o: &CFloat) {
        self.re += &o.re;
        self.im += &o.im;
    }
}

impl SubAssign<&CFloat> for CFloat {
    fn sub_assign(&mut self, o: &CFloat) {
        self.re -= &o.re;
        self.im -= &o.im;
    }
}

impl MulAssign<&CFloat> for CFloat {
    fn mul_assign(&mut self, o: &CFloat) {
        *self = &*self * o;
    }
}

/// Coefficient ring for exact polynomial arithmetic.
pub trait Ring: Clone + PartialEq + fmt::Debug {
    fn zero() -> Self;
    fn one() -> Self;
    fn is_zero(&self) -> bool;
    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn neg(&self) -> Self;
    fn from_integer(v: &Integer) -> Self;
}

impl Ring for Rational {
    fn zero() -> Self {
        Rational::new()
    }
    fn one() -> Self {
        Rational::from(1)
    }
    fn is_zero(&self) -> bool {
        *self == 0
    }
    fn add(&self, o: &Self) -> Self {
        Rational::from(self + o)
    }
    fn sub(&self, o: &Self) -> Self {
        Rational::from(self - o)
    }
    fn mul(&self, o: &Self) -> Self {
        Rational::from(self * o)
    }
    fn neg(&self) -> Self {
        Rational::from(-self)
    }
    fn from_integer(v: &Integer) -> Self {
        Rational::from(v)
    }
}

/// Exact Gaussian rational `re + i im`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CRational {
    pub re: Rational,
    pub im: Rational,
}

impl CRational {
    pub fn new(re: Rational, im: Rational) -> Self {
        Self { re, im }
    }

    pub fn real(re: Rational) -> Self {
        Self::new(re, Rational::new())
    }

    pub fn i() -> Self {
        Self::new(Rational::new(), Rational::from(1))
    }

    pub fn conj(&self) -> Self {
        Self::new(self.re.clone(), Rational::from(-&self.im))
    }

    pub fn norm_sqr(&self) -> Rational {
        Rational::from(self.re.square_ref()) + Rational::from(self.im.square_ref())
    }

    pub fn inv(&self) -> Self {
        let d = self.norm_sqr();
        Self::new(
            Rational::from(&self.re / &d),
            Rational::from(-&self.im) / &d,
        )
    }

    pub fn to_cfloat(&self, prec: u32) -> CFloat {
        CFloat::new(
            Float::with_val(prec, &self.re),
            Float::with_val(prec, &self.im),
        )
    }

    pub fn powu(&self, n: u32) -> Self {
        (0..n).fold(Self::one(), |acc, _| acc.mul(self))
    }
}

impl fmt::Display for CRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.re == 0, self.im == 0) {
            (_, true) => write!(f, "{}", self.re),
            (true, false) => write!(f, "{}i", self.im),
            (false, false) => write!(f, "({} + {}i)", self.re, self.im),
        }
    }
}

impl Ring for CRational {
    fn zero() -> Self {
        Self::new(Rational::new(), Rational::new())
    }
    fn one() -> Self {
        Self::real(Rational::from(1))
    }
    fn is_zero(&self) -> bool {
        self.re == 0 && self.im == 0
    }
    fn add(&self, o: &Self) -> Self {
        Self::new(
            Rational::from(&self.re + &o.re),
            Rational::from(&self.im + &o.im),
        )
    }
    fn sub(&self, o: &Self) -> Self {
        Self::new(
            Rational::from(&self.re - &o.re),
            Rational::from(&self.im - &o.im),
        )
    }
    fn mul(&self, o: &Self) -> Self {
        let re = Rational::from(&self.re * &o.re) - Rational::from(&self.im * &o.im);
        let im = Rational::from(&self.re * &o.im) + Rational::from(&self.im * &o.re);
        Self::new(re, im)
    }
    fn neg(&self) -> Self {
        Self::new(Rational::from(-&self.re), Rational::from(-&self.im))
    }
    fn from_integer(v: &Integer) -> Self {
        Self::real(Rational::from(v))
    }
}

/// `base^e` for a rational base and signed exponent.
pub fn rat_pow(base: &Rational, e: i64) -> Rational {
    let mut r = Rational::from(1);
    let b = if e < 0 {
        Rational::from(base.recip_ref())
    } else {
        base.clone()
    };
    for _ in 0..e.unsigned_abs() {
        r *= &b;
    }
    r
}

/// `base^e` in float arithmetic at the precision of `base`.
pub fn float_pow(base: &Float, e: i64) -> Float {
    let p = base.prec();
    if e >= 0 {
        Float::with_val(p, Pow::pow(base, e as u32))
    } else {
        let mut r = Float::with_val(p, Pow::pow(base, e.unsigned_abs() as u32));
        r.recip_mut();
        r
    }
}
