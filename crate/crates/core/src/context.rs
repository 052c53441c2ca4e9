//! Deformation parameter and precision settings shared by every evaluation.

use rug::ops::Pow;
use rug::{Float, Integer, Rational};

use crate::error::{QError, QResult};

/// Extra bits carried internally above the requested precision.
pub const GUARD_BITS: u32 = 32;

pub const DEFAULT_PRECISION_BITS: u32 = 256;
pub const DEFAULT_MAX_TERMS: usize = 4096;

/// The deformation parameter `q` together with precision and truncation limits.
///
/// `q` is stored as an exact rational so that rational-mode identities and
/// float evaluations see the same number.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecisionContext {
    q: Rational,
    precision_bits: u32,
    series_tol: Float,
    max_terms: usize,
}

impl PrecisionContext {
    /// Context with `series_tol = 2^-precision_bits` and the default term cap.
    pub fn new(q: Rational, precision_bits: u32) -> QResult<Self> {
        let tol = Float::with_val(
            precision_bits.max(64),
            Float::i_exp(1, -(precision_bits as i32)),
        );
        Self::with_limits(q, precision_bits, tol, DEFAULT_MAX_TERMS)
    }

    pub fn with_limits(
        q: Rational,
        precision_bits: u32,
        series_tol: Float,
        max_terms: usize,
    ) -> QResult<Self> {
        if q <= 0 || q >= 1 {
            return Err(QError::InvalidContext(format!("q = {q} is outside (0, 1)")));
        }
        if precision_bits < 64 {
            return Err(QError::InvalidContext(format!(
                "precision_bits = {precision_bits} is below 64"
            )));
        }
        if !(series_tol.is_finite() && series_tol > 0) {
            return Err(QError::InvalidContext("series_tol must be positive".into()));
        }
        if max_terms < 16 {
            return Err(QError::InvalidContext(format!(
                "max_terms = {max_terms} is below 16"
            )));
        }
        Ok(Self {
            q,
            precision_bits,
            series_tol,
            max_terms,
        })
    }

    /// Parses `q` from `"1/2"`, `"0.3"` or `"3e-1"`; every form is exact.
    pub fn parse(q: &str, precision_bits: u32) -> QResult<Self> {
        Self::new(parse_rational(q)?, precision_bits)
    }

    pub fn with_series_tol(mut self, tol: f64) -> QResult<Self> {
        if !(tol.is_finite() && tol > 0.0) {
            return Err(QError::InvalidContext(format!(
                "series_tol = {tol} must be positive"
            )));
        }
        self.series_tol = Float::with_val(self.precision_bits, tol);
        Ok(self)
    }

    pub fn with_max_terms(mut self, max_terms: usize) -> QResult<Self> {
        if max_terms < 16 {
            return Err(QError::InvalidContext(format!(
                "max_terms = {max_terms} is below 16"
            )));
        }
        self.max_terms = max_terms;
        Ok(self)
    }

    /// Same q and limits at a different precision; the tolerance is rescaled
    /// only when it was the default `2^-bits`.
    pub fn with_precision(&self, precision_bits: u32) -> QResult<Self> {
        let default_tol = Float::with_val(64, Float::i_exp(1, -(self.precision_bits as i32)));
        let tol = if self.series_tol == default_tol {
            Float::with_val(
                precision_bits.max(64),
                Float::i_exp(1, -(precision_bits as i32)),
            )
        } else {
            Float::with_val(precision_bits.max(64), &self.series_tol)
        };
        Self::with_limits(self.q.clone(), precision_bits, tol, self.max_terms)
    }

    pub fn q(&self) -> &Rational {
        &self.q
    }

    pub fn precision_bits(&self) -> u32 {
        self.precision_bits
    }

    /// Internal working precision.
    pub fn work_prec(&self) -> u32 {
        self.precision_bits + GUARD_BITS
    }

    pub fn series_tol(&self) -> &Float {
        &self.series_tol
    }

    pub fn max_terms(&self) -> usize {
        self.max_terms
    }

    /// q rounded once to `prec` bits.
    pub fn q_at(&self, prec: u32) -> Float {
        Float::with_val(prec, &self.q)
    }

    /// q at working precision.
    pub fn qf(&self) -> Float {
        self.q_at(self.work_prec())
    }

    /// A value at working precision.
    pub fn float<T>(&self, v: T) -> Float
    where
        Float: rug::Assign<T>,
    {
        Float::with_val(self.work_prec(), v)
    }

    /// Rounds a working value to the output precision.
    pub fn round(&self, v: &Float) -> Float {
        Float::with_val(self.precision_bits, v)
    }

    /// `n` units of `2^(1-bits)` relative to `scale`.
    pub fn ulps(&self, n: u32, scale: &Float) -> Float {
        let eps = Float::with_val(64, Float::i_exp(1, 1 - self.precision_bits as i32));
        Float::with_val(64, scale.abs_ref()) * eps * n
    }
}

/// Exact rational from `"p/q"` or a decimal literal with optional exponent.
pub fn parse_rational(s: &str) -> QResult<Rational> {
    let s = s.trim();
    if s.is_empty() {
        return Err(QError::Parse("empty number".into()));
    }
    if let Some((num, den)) = s.split_once('/') {
        let n = parse_decimal(num)?;
        let d = parse_decimal(den)?;
        if d == 0 {
            return Err(QError::Parse(format!("zero denominator in {s:?}")));
        }
        return Ok(n / d);
    }
    parse_decimal(s)
}

fn parse_decimal(s: &str) -> QResult<Rational> {
    let bad = || QError::Parse(format!("not a decimal number: {s:?}"));
    let s = s.trim();
    let (mantissa, exp) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i32>().map_err(|_| bad())?),
        None => (s, 0),
    };
    let (neg, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    if !int_part
        .chars()
        .chain(frac_part.chars())
        .all(|c| c.is_ascii_digit())
    {
        return Err(bad());
    }
    let all: String = format!("{int_part}{frac_part}");
    let mut value = Rational::from(Integer::from_str_radix(&all, 10).map_err(|_| bad())?);
    let scale = exp - frac_part.len() as i32;
    let ten = Integer::from(10);
    if scale >= 0 {
        value *= Integer::from(Pow::pow(&ten, scale as u32));
    } else {
        value /= Integer::from(Pow::pow(&ten, (-scale) as u32));
    }
    if neg {
        value = -value;
    }
    Ok(value)
}
