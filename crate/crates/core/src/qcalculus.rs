//! q-derivatives, the deformed derivative, Jackson sums on geometric lattices
//! and the matching integration-by-parts checks.

use rug::{Float, Rational};
use serde::Serialize;

use crate::arith::{float_pow, rat_pow, Ring};
use crate::context::PrecisionContext;
use crate::error::{QError, QResult};
use crate::poly::PolySeries;
use crate::qkernel::{b_sq_exact, q_number_exact};

/// Real function evaluated at working precision.
pub type RealFn<'a> = &'a dyn Fn(&Float) -> QResult<Float>;

fn nonzero(x: &Float) -> QResult<()> {
    if x.is_zero() {
        return Err(QError::Domain("difference quotient at x = 0".into()));
    }
    Ok(())
}

/// `(F(x) - F(qx)) / (x (1-q))`.
pub fn q_derivative(f: RealFn<'_>, x: &Float, ctx: &PrecisionContext) -> QResult<Float> {
    nonzero(x)?;
    let w = ctx.work_prec();
    let q = ctx.qf();
    let x = Float::with_val(w, x);
    let qx = Float::with_val(w, &x * &q);
    let num = Float::with_val(w, f(&x)? - f(&qx)?);
    let den = x * Float::with_val(w, 1 - &q);
    Ok(Float::with_val(w, num / den))
}

/// `(f(q^{-2}x) - f(q^{-1}x)) / (q^{-1}x)`.
pub fn deformed_derivative(f: RealFn<'_>, x: &Float, ctx: &PrecisionContext) -> QResult<Float> {
    nonzero(x)?;
    let w = ctx.work_prec();
    let q = ctx.qf();
    let x1 = Float::with_val(w, x / &q);
    let x2 = Float::with_val(w, &x1 / &q);
    let num = Float::with_val(w, f(&x2)? - f(&x1)?);
    Ok(Float::with_val(w, num / x1))
}

/// `p(s x)`.
pub fn dilate_poly(p: &PolySeries<Rational>, s: &Rational) -> PolySeries<Rational> {
    let mut pow = Rational::from(1);
    let mut out = Vec::with_capacity(p.coeffs().len());
    for c in p.coeffs() {
        out.push(Rational::from(c * &pow));
        pow *= s;
    }
    PolySeries::new(out)
}

/// Exact q-derivative: `x^n -> [n] x^{n-1}`.
pub fn q_derivative_poly(p: &PolySeries<Rational>, q: &Rational) -> PolySeries<Rational> {
    let c = p.coeffs();
    PolySeries::new(
        (1..c.len())
            .map(|n| &c[n] * q_number_exact(n as u32, q))
            .collect(),
    )
}

/// Exact deformed derivative: `x^n -> b_{n-1}^2 x^{n-1}`.
pub fn deformed_derivative_poly(p: &PolySeries<Rational>, q: &Rational) -> PolySeries<Rational> {
    let c = p.coeffs();
    PolySeries::new(
        (1..c.len())
            .map(|n| &c[n] * b_sq_exact(n as i64 - 1, q).expect("n >= 1"))
            .collect(),
    )
}

/// Residuals of both product rules for the deformed derivative, exact.
///
/// First form `D(uv) = v(q^{-2}x) Du + u(q^{-1}x) Dv`, second form with the
/// dilations swapped. Both are zero polynomials when the rules hold.
pub fn leibniz_residuals_exact(
    u: &PolySeries<Rational>,
    v: &PolySeries<Rational>,
    q: &Rational,
) -> (PolySeries<Rational>, PolySeries<Rational>) {
    let q1 = rat_pow(q, -1);
    let q2 = rat_pow(q, -2);
    let d_uv = deformed_derivative_poly(&u.mul(v), q);
    let du = deformed_derivative_poly(u, q);
    let dv = deformed_derivative_poly(v, q);
    let first = dilate_poly(v, &q2)
        .mul(&du)
        .add(&dilate_poly(u, &q1).mul(&dv));
    let second = dilate_poly(v, &q1)
        .mul(&du)
        .add(&dilate_poly(u, &q2).mul(&dv));
    (d_uv.sub(&first), d_uv.sub(&second))
}

/// Exact Jackson antiderivative vanishing at 0: `x^n -> x^{n+1} / [n+1]`.
/// Equals `x(1-q) sum_k q^k p(q^k x)` summed in closed form.
pub fn jackson_antiderivative_poly(p: &PolySeries<Rational>, q: &Rational) -> PolySeries<Rational> {
    let mut out = vec![Rational::new()];
    for (n, c) in p.coeffs().iter().enumerate() {
        out.push(c / q_number_exact(n as u32 + 1, q));
    }
    PolySeries::new(out)
}

/// `int_0^x D_q F - (F(x) - F(0))`, exact. Zero for every polynomial F.
pub fn jackson_fundamental_residual_exact(
    f: &PolySeries<Rational>,
    x: &Rational,
    q: &Rational,
) -> Rational {
    let lhs = jackson_antiderivative_poly(&q_derivative_poly(f, q), q).eval(x);
    lhs - (f.eval(x) - f.eval(&Rational::new()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum JacksonKind {
    ZeroToX,
    ZeroToInf,
    MinusInfToInf,
}

#[derive(Debug, Clone)]
pub struct LatticeSum {
    pub value: Float,
    pub terms: usize,
    /// Estimated magnitude of the discarded tails.
    pub tail_bound: Float,
}

struct Branch {
    sum: Float,
    terms: usize,
    tail: Float,
}

/// Sums `term(k)` for k = 0, 1, ... until three consecutive terms fall below
/// the series tolerance relative to the running sum.
fn sum_branch(
    what: &str,
    mut term: impl FnMut(usize) -> QResult<Float>,
    ctx: &PrecisionContext,
) -> QResult<Branch> {
    let w = ctx.work_prec();
    let tol = ctx.series_tol();
    let mut sum = Float::new(w);
    let mut small = 0;
    let mut prev: Option<Float> = None;
    for k in 0..ctx.max_terms() {
        let t = term(k)?;
        if !t.is_finite() {
            return Err(QError::NoConvergence {
                what: what.into(),
                terms: k,
            });
        }
        sum += &t;
        let scale = Float::with_val(w, sum.abs_ref()).max(&Float::with_val(w, f64::MIN_POSITIVE));
        let at = Float::with_val(w, t.abs_ref());
        if at <= Float::with_val(w, &scale * tol) {
            small += 1;
        } else {
            small = 0;
        }
        if small >= 3 {
            // ratio bound from the last two terms
            let tail = match &prev {
                Some(p) if !p.is_zero() && at < *p => {
                    let r = Float::with_val(w, &at / p);
                    Float::with_val(w, &at * &r) / Float::with_val(w, 1 - &r)
                }
                _ => at.clone(),
            };
            return Ok(Branch {
                sum,
                terms: k + 1,
                tail,
            });
        }
        prev = Some(at);
    }
    Err(QError::NoConvergence {
        what: what.into(),
        terms: ctx.max_terms(),
    })
}

/// Jackson integrals on the lattice `x q^k`.
///
/// `ZeroToX`: `x(1-q) sum_{k>=0} q^k f(q^k x)`. `ZeroToInf` sums over all
/// integer k. `MinusInfToInf` adds the mirrored lattice `-x q^k`.
pub fn jackson_integral(
    f: RealFn<'_>,
    kind: JacksonKind,
    x: &Float,
    ctx: &PrecisionContext,
) -> QResult<LatticeSum> {
    if *x <= 0 {
        return Err(QError::Domain("Jackson base point must be positive".into()));
    }
    let w = ctx.work_prec();
    let q = ctx.qf();
    let x = Float::with_val(w, x);
    let at = |e: i64, sign: i32| -> QResult<Float> {
        let qe = float_pow(&q, e);
        let pt = Float::with_val(w, &qe * &x) * sign;
        Ok(Float::with_val(w, &qe * &f(&pt)?))
    };
    let sides: &[i32] = match kind {
        JacksonKind::MinusInfToInf => &[1, -1],
        _ => &[1],
    };
    let mut value = Float::new(w);
    let mut terms = 0;
    let mut tail = Float::new(w);
    for &s in sides {
        let down = sum_branch("Jackson sum toward 0", |k| at(k as i64, s), ctx)?;
        value += &down.sum;
        terms += down.terms;
        tail += &down.tail;
        if kind != JacksonKind::ZeroToX {
            let up = sum_branch(
                "Jackson sum toward infinity",
                |k| at(-(k as i64) - 1, s),
                ctx,
            )?;
            value += &up.sum;
            terms += up.terms;
            tail += &up.tail;
        }
    }
    let factor = Float::with_val(w, 1 - &q) * &x;
    Ok(LatticeSum {
        value: Float::with_val(w, &value * &factor),
        terms,
        tail_bound: Float::with_val(w, &tail * &factor),
    })
}

/// Samples `f(x0 q^m)` for m in `[m_min, m_max]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeFunction {
    x0: Float,
    m_min: i64,
    values: Vec<Float>,
}

impl LatticeFunction {
    pub fn new(x0: Float, m_min: i64, values: Vec<Float>) -> QResult<Self> {
        if x0 <= 0 {
            return Err(QError::Domain("lattice base point must be positive".into()));
        }
        if values.is_empty() {
            return Err(QError::Domain("empty lattice function".into()));
        }
        Ok(Self { x0, m_min, values })
    }

    pub fn from_fn(
        x0: Float,
        m_min: i64,
        m_max: i64,
        mut f: impl FnMut(i64) -> QResult<Float>,
    ) -> QResult<Self> {
        let values = (m_min..=m_max).map(&mut f).collect::<QResult<Vec<_>>>()?;
        Self::new(x0, m_min, values)
    }

    pub fn base(&self) -> &Float {
        &self.x0
    }

    pub fn m_min(&self) -> i64 {
        self.m_min
    }

    pub fn m_max(&self) -> i64 {
        self.m_min + self.values.len() as i64 - 1
    }

    pub fn get(&self, m: i64) -> QResult<&Float> {
        if m < self.m_min || m > self.m_max() {
            return Err(QError::Domain(format!(
                "lattice exponent {m} outside [{}, {}]",
                self.m_min,
                self.m_max()
            )));
        }
        Ok(&self.values[(m - self.m_min) as usize])
    }
}

/// Callback or lattice sampling, both read at points `base q^e`.
#[derive(Clone, Copy)]
pub enum Integrand<'a> {
    Function(RealFn<'a>),
    Lattice(&'a LatticeFunction),
}

impl Integrand<'_> {
    pub fn sample(&self, base: &Float, e: i64, ctx: &PrecisionContext) -> QResult<Float> {
        match self {
            Integrand::Function(f) => {
                let w = ctx.work_prec();
                Ok(Float::with_val(
                    w,
                    f(&Float::with_val(w, float_pow(&ctx.qf(), e) * base))?,
                ))
            }
            Integrand::Lattice(l) => {
                if l.base() != base {
                    return Err(QError::InvalidContext(
                        "lattice function sampled on a different base point".into(),
                    ));
                }
                Ok(Float::with_val(ctx.work_prec(), l.get(e)?))
            }
        }
    }
}

/// Prefactor of the hat integral.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum HatNormalization {
    /// `1/q`: the hat integral of a deformed derivative telescopes to the
    /// endpoint difference.
    #[default]
    Telescoping,
    /// `(1-q)/q^2`.
    Scaled,
}

impl HatNormalization {
    pub fn prefactor(&self, ctx: &PrecisionContext) -> Float {
        let w = ctx.work_prec();
        let q = ctx.qf();
        match self {
            HatNormalization::Telescoping => Float::with_val(w, q.recip_ref()),
            HatNormalization::Scaled => {
                Float::with_val(w, 1 - &q) / Float::with_val(w, q.square_ref())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct HatOptions {
    /// Upward branch uses exponents `1-k` for k in `[0, upward]`.
    pub upward: usize,
    /// Downward branch uses exponents `k+2` for k in `[0, downward]`.
    pub downward: usize,
    pub normalization: HatNormalization,
}

impl Default for HatOptions {
    fn default() -> Self {
        Self {
            upward: 60,
            downward: 120,
            normalization: HatNormalization::Telescoping,
        }
    }
}

impl HatOptions {
    pub fn exponents(&self) -> impl Iterator<Item = i64> {
        let up = (0..=self.upward as i64).map(|k| 1 - k);
        let down = (0..=self.downward as i64).map(|k| k + 2);
        up.chain(down)
    }

    /// Lowest and highest lattice exponent read by a sum.
    pub fn exponent_range(&self) -> (i64, i64) {
        (1 - self.upward as i64, self.downward as i64 + 2)
    }
}

#[derive(Debug, Clone)]
pub struct HatSum {
    pub value: Float,
    /// Largest retained `|y g(y)|` on each branch.
    pub upward_max: Float,
    pub downward_max: Float,
    /// `|y g(y)|` at the last retained point of each branch.
    pub upward_last: Float,
    pub downward_last: Float,
    pub abs_sum: Float,
}

/// Lattice sum `P sum_e y_e g(y_e)` over the exponents of `opts`, with
/// `y_e = q^e`, processed in ascending k on each branch.
fn hat_sum(
    mut g: impl FnMut(i64) -> QResult<Float>,
    opts: &HatOptions,
    ctx: &PrecisionContext,
) -> QResult<HatSum> {
    let w = ctx.work_prec();
    let q = ctx.qf();
    let mut branch = |exps: Vec<i64>| -> QResult<(Float, Float, Float, Float, Option<Float>)> {
        let mut sum = Float::new(w);
        let mut abs = Float::new(w);
        let mut max = Float::new(w);
        let mut last = Float::new(w);
        let mut before_last = None;
        for e in exps {
            let t = Float::with_val(w, float_pow(&q, e) * g(e)?);
            if !t.is_finite() {
                return Err(QError::NoConvergence {
                    what: format!("hat integral term at exponent {e}"),
                    terms: 0,
                });
            }
            let a = Float::with_val(w, t.abs_ref());
            sum += &t;
            abs += &a;
            if a > max {
                max = a.clone();
            }
            before_last = Some(std::mem::replace(&mut last, a));
        }
        Ok((sum, abs, max, last, before_last))
    };
    let up: Vec<i64> = (0..=opts.upward as i64).map(|k| 1 - k).collect();
    let down: Vec<i64> = (0..=opts.downward as i64).map(|k| k + 2).collect();
    let (su, au, mu, lu, pu) = branch(up)?;
    let (sd, ad, md, ld, _) = branch(down)?;
    let total = Float::with_val(w, &su + &sd);
    let abs_sum = Float::with_val(w, &au + &ad);
    // upward terms still growing at the cut and not negligible
    if let Some(p) = pu {
        let negligible =
            Float::with_val(w, &lu) <= Float::with_val(w, abs_sum.clone() * ctx.series_tol());
        if lu > p && !negligible {
            return Err(QError::NoConvergence {
                what: "hat integral upward branch".into(),
                terms: opts.upward + 1,
            });
        }
    }
    let pf = opts.normalization.prefactor(ctx);
    Ok(HatSum {
        value: Float::with_val(w, &total * &pf),
        upward_max: mu * &pf,
        downward_max: md * &pf,
        upward_last: lu * &pf,
        downward_last: ld * &pf,
        abs_sum: abs_sum * &pf,
    })
}

/// Two-sided hat integral over the lattice `q^e` (base point 1).
pub fn hat_q_integral(
    f: Integrand<'_>,
    opts: &HatOptions,
    ctx: &PrecisionContext,
) -> QResult<HatSum> {
    let one = Float::with_val(ctx.work_prec(), 1);
    hat_sum(|e| f.sample(&one, e, ctx), opts, ctx)
}

/// Hat integral over `(0, a]`: `P' sum_{j=0}^{depth} y_j g(y_j)` with
/// `y_j = a q^{j+2}`, where `P'` is `1/q` (telescoping) or `(1-q)/q^2`.
pub fn hat_q_integral_to(
    f: Integrand<'_>,
    a: &Float,
    depth: usize,
    normalization: HatNormalization,
    ctx: &PrecisionContext,
) -> QResult<Float> {
    if *a <= 0 {
        return Err(QError::Domain("upper limit must be positive".into()));
    }
    let w = ctx.work_prec();
    let q = ctx.qf();
    let mut sum = Float::new(w);
    for j in 0..=depth as i64 {
        let y = Float::with_val(w, float_pow(&q, j + 2) * a);
        sum += y * f.sample(a, j + 2, ctx)?;
    }
    Ok(sum * normalization.prefactor(ctx))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum IbpVariant {
    /// `int u(q^{-1}x) Dv = [uv] - int v(q^{-2}x) Du`
    Ip1,
    /// `int u(q^{-2}x) Dv = [uv] - int v(q^{-1}x) Du`
    Ip2,
    /// `int u(x) D[v(q.)] = [uv] - int v(q^{-2}x) Du`, whole half-line
    Ip3,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Endpoint {
    Finite(Float),
    Infinity,
}

#[derive(Debug, Clone)]
pub struct IbpResidual {
    pub lhs: Float,
    pub rhs: Float,
    pub boundary: Float,
    pub residual: Float,
    /// Rounding bound from the magnitudes of all summed terms.
    pub bound: Float,
}

/// `|LHS - RHS|` of an integration-by-parts identity for the hat integral.
///
/// The boundary term `[uv]` is read at the outermost lattice points the
/// truncated sums reach, which is where the truncated sums telescope to.
pub fn ibp_residual(
    u: Integrand<'_>,
    v: Integrand<'_>,
    variant: IbpVariant,
    a: &Endpoint,
    opts: &HatOptions,
    ctx: &PrecisionContext,
) -> QResult<IbpResidual> {
    let w = ctx.work_prec();
    let q = ctx.qf();
    let pf = opts.normalization.prefactor(ctx);
    let base = match a {
        Endpoint::Finite(a) => {
            if variant == IbpVariant::Ip3 {
                return Err(QError::Domain(
                    "the rescaled form needs an infinite endpoint".into(),
                ));
            }
            if *a <= 0 {
                return Err(QError::Domain("upper limit must be positive".into()));
            }
            Float::with_val(w, a)
        }
        Endpoint::Infinity => Float::with_val(w, 1),
    };
    let exps: Vec<i64> = match a {
        Endpoint::Finite(_) => (2..=opts.downward as i64 + 2).collect(),
        Endpoint::Infinity => opts.exponents().collect(),
    };
    let us = |e: i64| u.sample(&base, e, ctx);
    let vs = |e: i64| v.sample(&base, e, ctx);
    // y D f(y) = q (f(q^{e-2}) - f(q^{e-1})) at y = base q^e
    let diff = |s: &dyn Fn(i64) -> QResult<Float>, e: i64| -> QResult<Float> {
        Ok(Float::with_val(w, s(e - 2)? - s(e - 1)?))
    };
    let mut lhs = Float::new(w);
    let mut rhs_int = Float::new(w);
    let mut abs = Float::new(w);
    for &e in &exps {
        let (l, r) = match variant {
            IbpVariant::Ip1 => (us(e - 1)? * diff(&vs, e)?, vs(e - 2)? * diff(&us, e)?),
            IbpVariant::Ip2 => (us(e - 2)? * diff(&vs, e)?, vs(e - 1)? * diff(&us, e)?),
            // y D[v(q.)](y) = q (v(q^{e-1}) - v(q^e))
            IbpVariant::Ip3 => (
                us(e)? * Float::with_val(w, vs(e - 1)? - vs(e)?),
                vs(e - 2)? * diff(&us, e)?,
            ),
        };
        abs += Float::with_val(w, l.abs_ref()) + Float::with_val(w, r.abs_ref());
        lhs += l;
        rhs_int += r;
    }
    let e_min = exps.iter().min().copied().unwrap_or(0);
    let e_max = exps.iter().max().copied().unwrap_or(0);
    // the sum of y D(uv) telescopes to uv at these two points
    let (top, bottom) = (e_min - 2, e_max - 1);
    let boundary =
        Float::with_val(w, us(top)? * vs(top)?) - Float::with_val(w, us(bottom)? * vs(bottom)?);
    let pq = Float::with_val(w, &pf * &q);
    // the rescaled form sums the first form over exponents shifted by one
    let edge = if variant == IbpVariant::Ip3 {
        let first = Float::with_val(w, us(e_min - 1)? * diff(&vs, e_min)?);
        let last = Float::with_val(
            w,
            us(e_max)? * Float::with_val(w, vs(e_max - 1)? - vs(e_max)?),
        );
        Float::with_val(w, first.abs_ref()) + Float::with_val(w, last.abs_ref())
    } else {
        Float::new(w)
    };
    let lhs = Float::with_val(w, &lhs * &pq);
    let rhs_int = Float::with_val(w, &rhs_int * &pq);
    let rhs = Float::with_val(w, &boundary - &rhs_int);
    let residual = Float::with_val(w, &lhs - &rhs).abs();
    let mag = Float::with_val(w, &abs * &pq) + Float::with_val(w, boundary.abs_ref());
    let bound = ctx.ulps(4 * (exps.len() as u32 + 2), &mag) + Float::with_val(w, &edge * &pq);
    Ok(IbpResidual {
        lhs,
        rhs,
        boundary,
        residual,
        bound,
    })
}

/// Linearity defect `|I(f+g) - I(f) - I(g)|` of the hat integral.
pub fn hat_additivity_defect(
    f: RealFn<'_>,
    g: RealFn<'_>,
    opts: &HatOptions,
    ctx: &PrecisionContext,
) -> QResult<(Float, Float)> {
    let w = ctx.work_prec();
    let sum_fn = |x: &Float| -> QResult<Float> { Ok(Float::with_val(w, f(x)? + g(x)?)) };
    let a = hat_q_integral(Integrand::Function(f), opts, ctx)?;
    let b = hat_q_integral(Integrand::Function(g), opts, ctx)?;
    let c = hat_q_integral(Integrand::Function(&sum_fn), opts, ctx)?;
    let defect = Float::with_val(w, &c.value - &a.value) - &b.value;
    let scale = Float::with_val(w, &a.abs_sum + &b.abs_sum);
    Ok((defect.abs(), scale))
}

/// `b_{n-1}^2` as the deformed derivative eigen-coefficient on `x^n`.
pub fn monomial_factor_exact(n: usize, q: &Rational) -> Rational {
    if n == 0 {
        Rational::zero()
    } else {
        b_sq_exact(n as i64 - 1, q).expect("n >= 1")
    }
}
