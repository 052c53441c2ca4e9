//! q-numbers, q-Pochhammer symbols, the oscillator coefficients `b_n`, and a
//! basic hypergeometric series evaluator.
//!
//! Float results are returned at the context's working precision
//! (`precision_bits + GUARD_BITS`); callers round when presenting.

use rug::ops::Pow;
use rug::{Float, Rational};

use crate::arith::{rat_pow, CFloat};
use crate::context::PrecisionContext;
use crate::error::{QError, QResult};

/// `[n]_q = (1 - q^n) / (1 - q)` exactly.
pub fn q_number_exact(n: u32, q: &Rational) -> Rational {
    // 1 + q + ... + q^(n-1)
    let mut acc = Rational::new();
    let mut p = Rational::from(1);
    for _ in 0..n {
        acc += &p;
        p *= q;
    }
    acc
}

pub fn q_number(n: u32, ctx: &PrecisionContext) -> Float {
    let q = ctx.qf();
    let qn = Float::with_val(ctx.work_prec(), Pow::pow(&q, n));
    let num = Float::with_val(ctx.work_prec(), 1 - qn);
    num / (1 - q)
}

/// `(a; q)_k` over exact rationals.
pub fn q_pochhammer_exact(a: &Rational, k: u32, q: &Rational) -> Rational {
    let mut acc = Rational::from(1);
    let mut aq = a.clone();
    for _ in 0..k {
        acc *= Rational::from(1 - &aq);
        aq *= q;
    }
    acc
}

/// `(a; q)_k` for complex `a`, by direct product in ascending order.
pub fn q_pochhammer(a: &CFloat, k: u32, ctx: &PrecisionContext) -> CFloat {
    let p = ctx.work_prec().max(a.prec());
    let q = ctx.q_at(p);
    let mut acc = CFloat::one(p);
    let mut aq = a.with_prec(p);
    for _ in 0..k {
        let factor = CFloat::new(Float::with_val(p, 1 - &aq.re), Float::with_val(p, -&aq.im));
        acc = &acc * &factor;
        aq = aq.scale(&q);
    }
    acc
}

pub fn q_pochhammer_real(a: &Float, k: u32, ctx: &PrecisionContext) -> Float {
    let p = ctx.work_prec().max(a.prec());
    let q = ctx.q_at(p);
    let mut acc = Float::with_val(p, 1);
    let mut aq = Float::with_val(p, a);
    for _ in 0..k {
        acc *= Float::with_val(p, 1 - &aq);
        aq *= &q;
    }
    acc
}

/// `(q; q)_n` at working precision.
pub fn q_factorial(n: u32, ctx: &PrecisionContext) -> Float {
    q_pochhammer_real(&ctx.qf(), n, ctx)
}

/// Truncated infinite product with its relative error bound.
#[derive(Debug, Clone)]
pub struct ProductValue {
    pub value: CFloat,
    pub factors: usize,
    /// Bound on `|log(full / truncated)|`.
    pub log_error_bound: Float,
}

/// `(a; q)_inf`, truncated at the first `S` with `|a| q^S < series_tol`.
///
/// The neglected factors satisfy
/// `|log prod_{s>=S}(1 - a q^s)| <= |a| q^S / ((1 - q)(1 - |a| q^S))`.
pub fn q_pochhammer_inf(a: &CFloat, ctx: &PrecisionContext) -> QResult<ProductValue> {
    let p = ctx.work_prec().max(a.prec());
    let q = ctx.q_at(p);
    let tol = Float::with_val(p, ctx.series_tol());
    let mut acc = CFloat::one(p);
    let mut aq = a.with_prec(p);
    let mut mag = a.abs();
    let mut s = 0usize;
    while mag >= tol {
        if s >= ctx.max_terms() {
            return Err(QError::NoConvergence {
                what: "infinite q-product".into(),
                terms: s,
            });
        }
        let factor = CFloat::new(Float::with_val(p, 1 - &aq.re), Float::with_val(p, -&aq.im));
        acc = &acc * &factor;
        if !acc.is_finite() {
            return Err(QError::Overflow {
                what: "infinite q-product".into(),
                required_bits: p as u64,
            });
        }
        aq = aq.scale(&q);
        mag *= &q;
        s += 1;
    }
    let one_minus_q = Float::with_val(p, 1 - &q);
    let denom = Float::with_val(p, 1 - &mag) * &one_minus_q;
    let log_error_bound = Float::with_val(p, &mag / &denom);
    Ok(ProductValue {
        value: acc,
        factors: s,
        log_error_bound,
    })
}

/// `b_n^2 = q^{-(2n+1)} (1 - q^{n+1})` exactly; `b_{-1}^2 = 0`.
pub fn b_sq_exact(n: i64, q: &Rational) -> QResult<Rational> {
    if n < -1 {
        return Err(QError::Domain(format!("b_n is undefined for n = {n}")));
    }
    if n == -1 {
        return Ok(Rational::new());
    }
    let qn1 = rat_pow(q, n + 1);
    Ok(rat_pow(q, -(2 * n + 1)) * (1 - qn1))
}

pub fn b_sq(n: i64, ctx: &PrecisionContext) -> QResult<Float> {
    if n < -1 {
        return Err(QError::Domain(format!("b_n is undefined for n = {n}")));
    }
    let p = ctx.work_prec();
    if n == -1 {
        return Ok(Float::new(p));
    }
    let q = ctx.qf();
    let qn1 = Float::with_val(p, Pow::pow(&q, (n + 1) as u32));
    let inv = Float::with_val(p, Pow::pow(&q, -(2 * n + 1) as i32));
    let v = inv * Float::with_val(p, 1 - qn1);
    if !v.is_finite() {
        return Err(overflow("b_n^2", n, ctx));
    }
    Ok(v)
}

/// `b_n = q^{-(2n+1)/2} sqrt(1 - q^{n+1})`.
pub fn b_coeff(n: i64, ctx: &PrecisionContext) -> QResult<Float> {
    Ok(b_sq(n, ctx)?.sqrt())
}

fn overflow(what: &str, n: i64, ctx: &PrecisionContext) -> QError {
    let bits = (n as f64).powi(2) * (1.0 / ctx.q().to_f64()).log2();
    QError::Overflow {
        what: format!("{what} at n = {n}"),
        required_bits: bits.ceil() as u64,
    }
}

/// `rho_n! = (q/(1-q))^n q^{-n^2} (q;q)_n` from the closed form.
pub fn rho_factorial(n: u32, ctx: &PrecisionContext) -> QResult<Float> {
    let p = ctx.work_prec();
    let q = ctx.qf();
    let ratio = Float::with_val(p, &q / Float::with_val(p, 1 - &q));
    let mut v = Float::with_val(p, Pow::pow(&ratio, n));
    let sq = (n as i64) * (n as i64);
    if sq > i32::MAX as i64 {
        return Err(overflow("rho factorial", n as i64, ctx));
    }
    v *= Float::with_val(p, Pow::pow(&q, -(sq as i32)));
    v *= q_factorial(n, ctx);
    if !v.is_finite() {
        return Err(overflow("rho factorial", n as i64, ctx));
    }
    Ok(v)
}

/// `rho_n! = prod_{k=1}^n q/(1-q) b_{k-1}^2` as a running product.
pub fn rho_factorial_product(n: u32, ctx: &PrecisionContext) -> QResult<Float> {
    let p = ctx.work_prec();
    let q = ctx.qf();
    let ratio = Float::with_val(p, &q / Float::with_val(p, 1 - &q));
    let mut acc = Float::with_val(p, 1);
    for k in 1..=n as i64 {
        acc *= Float::with_val(p, &ratio * b_sq(k - 1, ctx)?);
    }
    if !acc.is_finite() {
        return Err(overflow("rho factorial", n as i64, ctx));
    }
    Ok(acc)
}

pub fn rho_factorial_exact(n: u32, q: &Rational) -> Rational {
    let ratio = q / Rational::from(1 - q);
    rat_pow(&ratio, n as i64) * rat_pow(q, -((n as i64) * (n as i64))) * q_pochhammer_exact(q, n, q)
}

/// Parameters of `_r phi_s(a_1..a_r; b_1..b_s; q, z)`.
#[derive(Debug, Clone)]
pub struct HypergeometricSpec {
    pub upper: Vec<CFloat>,
    pub lower: Vec<CFloat>,
    pub z: CFloat,
    /// Last nonzero index when an upper parameter equals `q^{-n}`.
    pub terminating_at: Option<usize>,
}

impl HypergeometricSpec {
    pub fn new(upper: Vec<CFloat>, lower: Vec<CFloat>, z: CFloat) -> Self {
        Self {
            upper,
            lower,
            z,
            terminating_at: None,
        }
    }

    pub fn terminating(mut self, n: usize) -> Self {
        self.terminating_at = Some(n);
        self
    }

    /// The exponent `1 + s - r` of the `(-1)^k q^{k(k-1)/2}` factor.
    pub fn excess(&self) -> i64 {
        1 + self.lower.len() as i64 - self.upper.len() as i64
    }

    fn max_prec(&self) -> u32 {
        self.upper
            .iter()
            .chain(self.lower.iter())
            .map(CFloat::prec)
            .chain(std::iter::once(self.z.prec()))
            .max()
            .unwrap_or(64)
    }
}

#[derive(Debug, Clone)]
pub struct SeriesSum {
    pub value: CFloat,
    /// Number of terms summed, including the leading 1.
    pub terms: usize,
    /// Truncation tail bound plus accumulated rounding estimate.
    pub error_bound: Float,
    /// Sum of term magnitudes.
    pub abs_sum: Float,
}

const STOP_WINDOW: usize = 3;

/// Evaluates a basic hypergeometric series term by term in ascending order.
///
/// Non-terminating series stop once three consecutive terms fall below
/// `series_tol * |partial sum|` and the ratio bound on the remaining tail is
/// below the same threshold.
pub fn phi_rs(spec: &HypergeometricSpec, ctx: &PrecisionContext) -> QResult<SeriesSum> {
    let p = ctx.work_prec().max(spec.max_prec());
    let q = ctx.q_at(p);
    let e = spec.excess();
    let tol = Float::with_val(p, ctx.series_tol());
    let z = spec.z.with_prec(p);

    if spec.terminating_at.is_none() && e < 0 && !z.is_zero() {
        return Err(QError::FormalSeries(format!(
            "_{}phi_{} with nonzero argument diverges unless terminating",
            spec.upper.len(),
            spec.lower.len()
        )));
    }

    let upper: Vec<CFloat> = spec.upper.iter().map(|a| a.with_prec(p)).collect();
    let lower: Vec<CFloat> = spec.lower.iter().map(|b| b.with_prec(p)).collect();
    let mut term = CFloat::one(p);
    let mut sum = CFloat::one(p);
    let mut abs_sum = Float::with_val(p, 1);
    let mut qk = Float::with_val(p, 1);
    let mut small_run = 0usize;
    let limit = spec.terminating_at.unwrap_or(ctx.max_terms());
    let sign_neg = e.rem_euclid(2) == 1;

    for k in 0..limit {
        // term_{k+1} = term_k * ratio_k
        let mut num = CFloat::one(p);
        for a in &upper {
            let aq = a.scale(&qk);
            num = &num * &CFloat::new(Float::with_val(p, 1 - &aq.re), Float::with_val(p, -&aq.im));
        }
        let mut den = CFloat::one(p);
        for b in &lower {
            let bq = b.scale(&qk);
            den = &den * &CFloat::new(Float::with_val(p, 1 - &bq.re), Float::with_val(p, -&bq.im));
        }
        if den.is_zero() {
            return Err(QError::Domain(format!(
                "lower parameter hits q^-{k}; zero denominator before termination"
            )));
        }
        let qk1 = Float::with_val(p, &qk * &q);
        let mut fac = Float::with_val(p, 1 - &qk1);
        let qe = if e >= 0 {
            Float::with_val(p, Pow::pow(qk, e as u32))
        } else {
            Float::with_val(p, Pow::pow(&qk, e as i32))
        };
        fac.recip_mut();
        fac *= &qe;
        if sign_neg {
            fac = -fac;
        }
        term = &(&term * &num) / &den;
        term = &term.scale(&fac) * &z;
        if !term.is_finite() {
            return Err(QError::Overflow {
                what: "basic hypergeometric term".into(),
                required_bits: p as u64,
            });
        }
        sum += &term;
        let tmag = term.abs();
        abs_sum += &tmag;
        qk = qk1;

        if spec.terminating_at.is_some() {
            continue;
        }
        let smag = sum.abs();
        let thresh = if smag.is_zero() {
            Float::with_val(p, &tol * &abs_sum)
        } else {
            Float::with_val(p, &tol * &smag)
        };
        if tmag <= thresh {
            small_run += 1;
        } else {
            small_run = 0;
        }
        if small_run >= STOP_WINDOW {
            if let Some(rho) = ratio_bound(&upper, &lower, &z, &qk, &q, e, p) {
                let tail = Float::with_val(p, &tmag * &rho) / Float::with_val(p, 1 - &rho);
                if tail <= thresh {
                    let error_bound = tail + rounding(&abs_sum, k + 2, p);
                    return Ok(SeriesSum {
                        value: sum,
                        terms: k + 2,
                        error_bound,
                        abs_sum,
                    });
                }
            }
        }
    }

    if let Some(n) = spec.terminating_at {
        let error_bound = rounding(&abs_sum, n + 1, p);
        return Ok(SeriesSum {
            value: sum,
            terms: n + 1,
            error_bound,
            abs_sum,
        });
    }
    Err(QError::NoConvergence {
        what: "basic hypergeometric series".into(),
        terms: ctx.max_terms(),
    })
}

/// Upper bound on every future term ratio from index `k` on, where `qk = q^k`.
fn ratio_bound(
    upper: &[CFloat],
    lower: &[CFloat],
    z: &CFloat,
    qk: &Float,
    q: &Float,
    e: i64,
    p: u32,
) -> Option<Float> {
    if e < 0 {
        return None;
    }
    let mut rho = z.abs();
    for a in upper {
        rho *= Float::with_val(p, 1 + Float::with_val(p, a.abs() * qk));
    }
    for b in lower {
        let d = Float::with_val(p, 1 - Float::with_val(p, b.abs() * qk));
        if d <= 0 {
            return None;
        }
        rho /= d;
    }
    rho /= Float::with_val(p, 1 - Float::with_val(p, qk * q));
    rho *= Float::with_val(p, Pow::pow(qk, e as u32));
    (rho < 1).then_some(rho)
}

fn rounding(abs_sum: &Float, terms: usize, p: u32) -> Float {
    let eps = Float::with_val(p, Float::i_exp(1, -(p as i32)));
    Float::with_val(p, abs_sum * &eps) * (4 * terms as u32 + 4)
}

/// `gex(x) = sum_n q^{n^2} x^n / (q;q)_n`, evaluated as `_0phi_1(-; 0; q, qx)`.
pub fn gen_exponential(x: &Float, ctx: &PrecisionContext) -> QResult<Float> {
    let z = CFloat::from_real(Float::with_val(ctx.work_prec(), x));
    Ok(gen_exponential_complex(&z, ctx)?.re)
}

pub fn gen_exponential_complex(x: &CFloat, ctx: &PrecisionContext) -> QResult<CFloat> {
    let p = ctx.work_prec().max(x.prec());
    let qx = x.scale(&ctx.q_at(p));
    let spec = HypergeometricSpec::new(vec![], vec![CFloat::zero(p)], qx);
    Ok(phi_rs(&spec, ctx)?.value)
}

/// `W(x) = 1 / ((ix;q)_inf (-ix;q)_inf) = 1 / prod_s (1 + x^2 q^{2s})`.
pub fn weight_w(x: &Float, ctx: &PrecisionContext) -> QResult<Float> {
    let p = ctx.work_prec();
    let q2 = Float::with_val(p, ctx.qf().square_ref());
    let tol = Float::with_val(p, ctx.series_tol());
    let mut t = Float::with_val(p, x.square_ref());
    let mut prod = Float::with_val(p, 1);
    let mut s = 0usize;
    while t >= tol {
        if s >= ctx.max_terms() {
            return Err(QError::NoConvergence {
                what: "weight product".into(),
                terms: s,
            });
        }
        prod *= Float::with_val(p, 1 + &t);
        t *= &q2;
        s += 1;
    }
    prod.recip_mut();
    Ok(prod)
}
