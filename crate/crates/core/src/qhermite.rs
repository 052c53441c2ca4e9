//! Discrete q-Hermite polynomials of type II, their orthonormal versions,
//! the generating-function comparison and the q-difference residual.

use rug::ops::Pow;
use rug::{Float, Rational};
use serde::Serialize;

use crate::arith::{rat_pow, CFloat, CRational, Ring};
use crate::context::{PrecisionContext, GUARD_BITS};
use crate::error::{QError, QResult};
use crate::poly::PolySeries;
use crate::qkernel::{
    b_coeff, b_sq, b_sq_exact, phi_rs, q_factorial, q_pochhammer, q_pochhammer_exact,
    q_pochhammer_inf, HypergeometricSpec,
};

/// Monic polynomials `h_0..=h_n_max` from
/// `h_{k+1} = x h_k - q^{1-2k} (1 - q^k) h_{k-1}`.
pub fn hermite2_sequence_exact(n_max: usize, q: &Rational) -> Vec<PolySeries<Rational>> {
    let mut out = Vec::with_capacity(n_max + 1);
    out.push(PolySeries::constant(Rational::from(1)));
    if n_max == 0 {
        return out;
    }
    out.push(PolySeries::monomial(1, Rational::from(1)));
    for k in 1..n_max {
        let c = b_sq_exact(k as i64 - 1, q).expect("k >= 1");
        let next = out[k].mul_x().sub(&out[k - 1].scale(&c));
        out.push(next);
    }
    out
}

pub fn hermite2_coeffs_exact(n: usize, q: &Rational) -> PolySeries<Rational> {
    hermite2_sequence_exact(n, q).pop().expect("nonempty")
}

/// Exact coefficients for the context's `q`.
pub fn hermite2_coeffs(n: usize, ctx: &PrecisionContext) -> PolySeries<Rational> {
    hermite2_coeffs_exact(n, ctx.q())
}

/// Float coefficients from the same recurrence run in working precision.
pub fn hermite2_coeffs_float(n: usize, ctx: &PrecisionContext) -> QResult<Vec<Float>> {
    let p = ctx.work_prec();
    let mut prev: Vec<Float> = vec![Float::with_val(p, 1)];
    if n == 0 {
        return Ok(prev);
    }
    let mut cur: Vec<Float> = vec![Float::new(p), Float::with_val(p, 1)];
    for k in 1..n {
        let c = b_sq(k as i64 - 1, ctx)?;
        let mut next = vec![Float::new(p); k + 2];
        for (j, a) in cur.iter().enumerate() {
            next[j + 1] += a;
        }
        for (j, a) in prev.iter().enumerate() {
            next[j] -= Float::with_val(p, a * &c);
        }
        if next.iter().any(|v| !v.is_finite()) {
            return Err(QError::Overflow {
                what: format!("hermite coefficients at n = {}", k + 1),
                required_bits: p as u64,
            });
        }
        prev = cur;
        cur = next;
    }
    Ok(cur)
}

pub fn hermite2_eval_exact(n: usize, x: &Rational, q: &Rational) -> Rational {
    hermite2_coeffs_exact(n, q).eval(x)
}

fn bits_lost(scale: &Float, value: &Float) -> u32 {
    if scale.is_zero() {
        return 0;
    }
    if value.is_zero() {
        return u32::MAX;
    }
    let s = scale.get_exp().unwrap_or(0) as i64;
    let v = value.get_exp().unwrap_or(0) as i64;
    (s - v).max(0) as u32
}

/// Precision schedule shared by both evaluation routes: rerun with enough
/// extra bits to cover the measured cancellation, capped at four times the
/// requested precision.
fn adaptive<T>(
    ctx: &PrecisionContext,
    mut eval: impl FnMut(u32) -> QResult<(T, Float, Float)>,
) -> QResult<(T, u32)> {
    let cap = 4 * ctx.precision_bits() + GUARD_BITS;
    let mut w = ctx.work_prec();
    loop {
        let (value, scale, mag) = eval(w)?;
        let lost = bits_lost(&scale, &mag);
        let available = w - ctx.precision_bits();
        if lost.saturating_add(8) <= available || w >= cap {
            return Ok((value, w));
        }
        let want = ctx
            .precision_bits()
            .saturating_add(lost)
            .saturating_add(GUARD_BITS);
        w = want.min(cap).max(w + 32).min(cap);
    }
}

/// Horner evaluation of the exact coefficients, rounded to the working
/// precision of the context.
pub fn hermite2_eval(n: usize, x: &Float, ctx: &PrecisionContext) -> Float {
    let poly = hermite2_coeffs(n, ctx);
    let (v, _) = adaptive(ctx, |w| {
        let xw = Float::with_val(w, x);
        let v = poly.eval_float(&xw);
        let scale = poly.abs_scale(&xw);
        let mag = Float::with_val(w, v.abs_ref());
        Ok((v, scale, mag))
    })
    .expect("polynomial evaluation is infallible");
    Float::with_val(ctx.work_prec(), v)
}

/// Result of the terminating `_2phi_0` evaluation.
#[derive(Debug, Clone)]
pub struct DirectEval {
    pub value: CFloat,
    /// Precision actually used for the final pass.
    pub bits_used: u32,
}

/// `h_n(x) = i^{-n} q^{-n(n-1)/2} _2phi_0(q^{-n}, ix; -; q, -q^n)`.
pub fn hermite2_eval_direct(n: usize, x: &CFloat, ctx: &PrecisionContext) -> QResult<CFloat> {
    Ok(hermite2_eval_direct_detail(n, x, ctx)?.value)
}

pub fn hermite2_eval_direct_detail(
    n: usize,
    x: &CFloat,
    ctx: &PrecisionContext,
) -> QResult<DirectEval> {
    let (value, bits_used) = adaptive(ctx, |w| {
        let wctx = ctx.with_precision(w - GUARD_BITS)?;
        let q = ctx.q_at(w);
        let qn = Float::with_val(w, Pow::pow(&q, n as u32));
        let qinv_n = Float::with_val(w, qn.recip_ref());
        let ix = x.with_prec(w).mul_i();
        let spec = HypergeometricSpec::new(
            vec![CFloat::from_real(qinv_n), ix],
            vec![],
            CFloat::from_real(Float::with_val(w, -&qn)),
        )
        .terminating(n);
        let sum = phi_rs(&spec, &wctx)?;
        let binom = (n * n.saturating_sub(1) / 2) as i32;
        let pref = Float::with_val(w, Pow::pow(&q, -binom));
        // i^{-n} = (-i)^n
        let phase = CFloat::i(w).conj().powu(n as u32);
        let v = (&sum.value * &phase).scale(&pref);
        let scale = Float::with_val(w, &sum.abs_sum * &pref);
        let mag = v.abs();
        Ok((v, scale, mag))
    })?;
    Ok(DirectEval {
        value: value.with_prec(ctx.work_prec()),
        bits_used,
    })
}

/// `q^{n^2/2} / sqrt((q;q)_n)`.
pub fn psi_prefactor(n: usize, ctx: &PrecisionContext) -> Float {
    let p = ctx.work_prec();
    let q = ctx.qf();
    let half = Float::with_val(p, Pow::pow(&q, (n * n) as u32)).sqrt();
    half / q_factorial(n as u32, ctx).sqrt()
}

/// `Psi_n(x)` through the monic polynomial.
pub fn psi_eval(n: usize, x: &Float, ctx: &PrecisionContext) -> Float {
    hermite2_eval(n, x, ctx) * psi_prefactor(n, ctx)
}

/// `Psi_0..=Psi_n_max` at `x` from `x Psi_k = b_k Psi_{k+1} + b_{k-1} Psi_{k-1}`.
pub fn psi_sequence(n_max: usize, x: &Float, ctx: &PrecisionContext) -> QResult<Vec<Float>> {
    let p = ctx.work_prec();
    let x = Float::with_val(p, x);
    let mut out = vec![Float::with_val(p, 1)];
    if n_max == 0 {
        return Ok(out);
    }
    let mut b_prev = Float::new(p);
    for k in 0..n_max {
        let b = b_coeff(k as i64, ctx)?;
        let mut next = Float::with_val(p, &x * &out[k]);
        if k > 0 {
            next -= Float::with_val(p, &b_prev * &out[k - 1]);
        }
        next /= &b;
        out.push(next);
        b_prev = b;
    }
    Ok(out)
}

/// `sum_n Psi_n(x)^2` until the terms have decayed below `series_tol` for
/// three consecutive indices. Returns the sum and the number of terms.
pub fn psi_square_sum(x: &Float, ctx: &PrecisionContext) -> QResult<(Float, usize)> {
    let p = ctx.work_prec();
    let x = Float::with_val(p, x);
    let tol = Float::with_val(p, ctx.series_tol());
    let mut prev = Float::new(p);
    let mut cur = Float::with_val(p, 1);
    let mut sum = Float::with_val(p, 1);
    let mut b_prev = Float::new(p);
    let mut small = 0;
    for k in 0..ctx.max_terms() {
        let b = b_coeff(k as i64, ctx)?;
        let mut next = Float::with_val(p, &x * &cur) - Float::with_val(p, &b_prev * &prev);
        next /= &b;
        let sq = Float::with_val(p, next.square_ref());
        sum += &sq;
        if sq <= Float::with_val(p, &tol * &sum) {
            small += 1;
            if small >= 3 {
                return Ok((sum, k + 2));
            }
        } else {
            small = 0;
        }
        prev = cur;
        cur = next;
        b_prev = b;
    }
    Err(QError::NoConvergence {
        what: "sum of squared orthonormal polynomials".into(),
        terms: ctx.max_terms(),
    })
}

/// Weight `w(n)` in the candidate identity `sum_n w(n) h_n(x) tau^n = G(tau)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightHypothesis {
    /// `w(n) = 1`.
    UnitWeight,
    /// `w(n) = 1 / (q;q)_n`.
    DividedByQPochhammer,
    /// `w(n) = q^{j n(n-1)/2} / (q;q)_n`.
    DividedWithQPower(u32),
}

impl WeightHypothesis {
    pub const MENU: [WeightHypothesis; 4] = [
        WeightHypothesis::UnitWeight,
        WeightHypothesis::DividedByQPochhammer,
        WeightHypothesis::DividedWithQPower(1),
        WeightHypothesis::DividedWithQPower(2),
    ];

    pub fn label(&self) -> String {
        match self {
            Self::UnitWeight => "unit-weight".into(),
            Self::DividedByQPochhammer => "divided-by-qpochhammer".into(),
            Self::DividedWithQPower(j) => format!("divided-with-qpower-{j}"),
        }
    }

    pub fn weight_exact(&self, n: usize, q: &Rational) -> Rational {
        let n32 = n as u32;
        match self {
            Self::UnitWeight => Rational::from(1),
            Self::DividedByQPochhammer => Rational::from(q_pochhammer_exact(q, n32, q).recip_ref()),
            Self::DividedWithQPower(j) => {
                let e = (*j as i64) * (n as i64) * (n as i64 - 1) / 2;
                rat_pow(q, e) / q_pochhammer_exact(q, n32, q)
            }
        }
    }

    pub fn weight(&self, n: usize, ctx: &PrecisionContext) -> Float {
        let p = ctx.work_prec();
        let n32 = n as u32;
        match self {
            Self::UnitWeight => Float::with_val(p, 1),
            Self::DividedByQPochhammer => q_factorial(n32, ctx).recip(),
            Self::DividedWithQPower(j) => {
                let e = j * n32 * n32.saturating_sub(1) / 2;
                Float::with_val(p, Pow::pow(&ctx.qf(), e)) / q_factorial(n32, ctx)
            }
        }
    }
}

/// Taylor coefficients in `tau` of `(i tau;q)_inf _1phi_1(ix; i tau; q, -i tau)`:
/// `c_N = q^{N(N-1)/2} sum_k (ix;q)_k i^k (-i)^{N-k} / ((q;q)_k (q;q)_{N-k})`.
pub fn generating_coeffs_exact(x: &Rational, order: usize, q: &Rational) -> Vec<CRational> {
    let ix = CRational::new(Rational::new(), x.clone());
    let mut ixq = vec![CRational::one()];
    for k in 0..order {
        let f = CRational::one().sub(&ix.mul(&CRational::real(rat_pow(q, k as i64))));
        ixq.push(ixq[k].mul(&f));
    }
    let qq: Vec<Rational> = (0..=order)
        .map(|k| q_pochhammer_exact(q, k as u32, q))
        .collect();
    let i = CRational::i();
    let mi = i.neg();
    (0..=order)
        .map(|n| {
            let mut acc = CRational::zero();
            for k in 0..=n {
                let den = Rational::from(&qq[k] * &qq[n - k]);
                let t = ixq[k]
                    .mul(&i.powu(k as u32))
                    .mul(&mi.powu((n - k) as u32))
                    .mul(&CRational::real(Rational::from(den.recip_ref())));
                acc = acc.add(&t);
            }
            acc.mul(&CRational::real(rat_pow(
                q,
                (n * n.saturating_sub(1) / 2) as i64,
            )))
        })
        .collect()
}

pub fn generating_coeffs(x: &Float, order: usize, ctx: &PrecisionContext) -> Vec<CFloat> {
    let p = ctx.work_prec();
    let q = ctx.qf();
    let ix = CFloat::new(Float::new(p), Float::with_val(p, x));
    let ixq: Vec<CFloat> = (0..=order)
        .map(|k| q_pochhammer(&ix, k as u32, ctx))
        .collect();
    let qq: Vec<Float> = (0..=order).map(|k| q_factorial(k as u32, ctx)).collect();
    let i = CFloat::i(p);
    let mi = i.conj();
    (0..=order)
        .map(|n| {
            let mut acc = CFloat::zero(p);
            for k in 0..=n {
                let den = Float::with_val(p, &qq[k] * &qq[n - k]);
                let t = &(&ixq[k] * &i.powu(k as u32)) * &mi.powu((n - k) as u32);
                acc += &t.scale(&den.recip());
            }
            let e = (n * n.saturating_sub(1) / 2) as u32;
            acc.scale(&Float::with_val(p, Pow::pow(&q, e)))
        })
        .collect()
}

/// First order at which `c_n != w(n) h_n(x)` exactly, if any up to `order`.
pub fn first_exact_mismatch(
    x: &Rational,
    order: usize,
    q: &Rational,
    hypothesis: WeightHypothesis,
) -> Option<usize> {
    let coeffs = generating_coeffs_exact(x, order, q);
    let hs = hermite2_sequence_exact(order, q);
    (0..=order).find(|&n| {
        let rhs = CRational::real(hypothesis.weight_exact(n, q) * hs[n].eval(x));
        coeffs[n] != rhs
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct HypothesisResidual {
    pub hypothesis: WeightHypothesis,
    pub label: String,
    /// Relative residual `|c_n - w(n) h_n| / max(|c_n|, |w(n) h_n|)` per order.
    pub residuals: Vec<f64>,
    pub max_residual: f64,
    /// First order whose residual exceeds the tolerance.
    pub first_failure: Option<usize>,
    pub matches: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct GenFnReport {
    pub x: f64,
    pub tau: (f64, f64),
    pub order: usize,
    pub tolerance: f64,
    pub hypotheses: Vec<HypothesisResidual>,
    /// `c_1 / h_1(x)`; equals `1/(1-q)` when `x != 0`.
    pub order_one_ratio: Option<f64>,
    /// `|G(tau) - sum_{n<=order} c_n tau^n|` with `G` summed as a series.
    pub closed_form_vs_taylor: f64,
    pub matching: Vec<String>,
}

/// Compares the Taylor coefficients of the closed form against `h_n(x)`
/// under each weight hypothesis. `tol` is the relative match threshold.
pub fn generating_fn_report(
    x: &Float,
    tau: &CFloat,
    order: usize,
    tol: f64,
    ctx: &PrecisionContext,
) -> QResult<GenFnReport> {
    if order > 20 {
        return Err(QError::Domain(format!("order {order} exceeds 20")));
    }
    if tau.abs() >= 1 {
        return Err(QError::Domain("|tau| must be below 1".into()));
    }
    let p = ctx.work_prec();
    let coeffs = generating_coeffs(x, order, ctx);
    let hs: Vec<Float> = (0..=order).map(|n| hermite2_eval(n, x, ctx)).collect();

    let mut hypotheses = Vec::new();
    for hyp in WeightHypothesis::MENU {
        let residuals: Vec<f64> = (0..=order)
            .map(|n| {
                let rhs = CFloat::from_real(Float::with_val(p, &hs[n] * hyp.weight(n, ctx)));
                relative_gap(&coeffs[n], &rhs)
            })
            .collect();
        let first_failure = residuals.iter().position(|r| *r > tol);
        let max_residual = residuals.iter().cloned().fold(0.0, f64::max);
        hypotheses.push(HypothesisResidual {
            hypothesis: hyp,
            label: hyp.label(),
            residuals,
            max_residual,
            first_failure,
            matches: first_failure.is_none(),
        });
    }

    let order_one_ratio = (order >= 1 && !hs[1].is_zero())
        .then(|| Float::with_val(p, &coeffs[1].re / &hs[1]).to_f64());

    let closed = closed_form_value(x, tau, ctx)?;
    let mut taylor = CFloat::zero(p);
    let mut tn = CFloat::one(p);
    for c in &coeffs {
        taylor += &(c * &tn);
        tn = &tn * tau;
    }
    let closed_form_vs_taylor = (&closed - &taylor).abs().to_f64();
    let matching = hypotheses
        .iter()
        .filter(|h| h.matches)
        .map(|h| h.label.clone())
        .collect();

    Ok(GenFnReport {
        x: x.to_f64(),
        tau: (tau.re.to_f64(), tau.im.to_f64()),
        order,
        tolerance: tol,
        hypotheses,
        order_one_ratio,
        closed_form_vs_taylor,
        matching,
    })
}

/// `(i tau;q)_inf _1phi_1(ix; i tau; q, -i tau)` by direct summation.
pub fn closed_form_value(x: &Float, tau: &CFloat, ctx: &PrecisionContext) -> QResult<CFloat> {
    let p = ctx.work_prec();
    let itau = tau.with_prec(p).mul_i();
    let ix = CFloat::new(Float::new(p), Float::with_val(p, x));
    let spec = HypergeometricSpec::new(vec![ix], vec![itau.clone()], -&itau);
    let series = phi_rs(&spec, ctx)?.value;
    let prod = q_pochhammer_inf(&itau, ctx)?.value;
    Ok(&prod * &series)
}

fn relative_gap(a: &CFloat, b: &CFloat) -> f64 {
    let d = (a - b).abs();
    let s = a.abs().max(&b.abs()).clone();
    if s.is_zero() {
        return 0.0;
    }
    Float::with_val(64, &d / &s).to_f64()
}

/// `RHS - LHS` of
/// `-(1-q^n) x^2 h(x) = q h(x-i) - (1+q+x^2) h(x) + (1+x^2) h(x+i)`
/// as an exact polynomial with Gaussian-rational coefficients.
pub fn qdiff_equation_check(n: usize, q: &Rational) -> PolySeries<CRational> {
    let h = hermite2_coeffs_exact(n, q).to_complex();
    let i = CRational::i();
    let qc = CRational::real(q.clone());
    let one = CRational::one();
    let x2 = PolySeries::monomial(2, one.clone());
    let h_minus = h.shift(&i.neg());
    let h_plus = h.shift(&i);
    let mid = PolySeries::constant(one.add(&qc)).add(&x2);
    let outer = PolySeries::constant(one.clone()).add(&x2);
    let rhs = h_minus
        .scale(&qc)
        .sub(&mid.mul(&h))
        .add(&outer.mul(&h_plus));
    let qn = rat_pow(q, n as i64);
    let lhs = x2.mul(&h).scale(&CRational::real(qn - 1));
    rhs.sub(&lhs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ctx(q: &str) -> PrecisionContext {
        PrecisionContext::parse(q, 256).unwrap()
    }

    fn r(n: i64, d: i64) -> Rational {
        Rational::from((n, d))
    }

    fn ints(v: &[i64]) -> PolySeries<Rational> {
        PolySeries::new(v.iter().map(|&c| Rational::from(c)).collect())
    }

    #[test]
    fn low_order_polynomials() {
        let h = r(1, 2);
        assert_eq!(hermite2_coeffs_exact(0, &h), ints(&[1]));
        assert_eq!(hermite2_coeffs_exact(1, &h), ints(&[0, 1]));
        assert_eq!(hermite2_coeffs_exact(2, &h), ints(&[-1, 0, 1]));
        // two recurrence steps by hand: x^3 - (1 + 6) x
        assert_eq!(hermite2_coeffs_exact(3, &h), ints(&[0, -7, 0, 1]));
    }

    #[test]
    fn monic_with_parity_to_forty() {
        for q in [r(1, 2), r(3, 10), r(4, 5)] {
            for (n, h) in hermite2_sequence_exact(40, &q).iter().enumerate() {
                assert_eq!(h.degree(), Some(n));
                assert_eq!(h.leading().unwrap(), &Rational::from(1));
                assert!(h.parity_violations(n).is_empty(), "n={n}");
            }
        }
    }

    #[test]
    fn float_coefficients_track_exact() {
        let c = ctx("0.3");
        let exact = hermite2_coeffs(12, &c);
        let float = hermite2_coeffs_float(12, &c).unwrap();
        for (k, f) in float.iter().enumerate() {
            let e = Float::with_val(c.work_prec(), &exact.coeff(k));
            let d = Float::with_val(64, f - &e).abs();
            assert!(d <= c.ulps(64, &e) + Float::with_val(64, 1e-300), "k={k}");
        }
    }

    #[test]
    fn direct_form_examples() {
        let c = ctx("1/2");
        let p = c.work_prec();
        let one = hermite2_eval_direct(0, &CFloat::from_f64(p, 3.3, 0.0), &c).unwrap();
        assert_eq!(one.re.to_f64(), 1.0);
        let root = hermite2_eval_direct(2, &CFloat::from_f64(p, 1.0, 0.0), &c).unwrap();
        assert!(root.abs() < Float::with_val(64, 1e-70));
        let v = hermite2_eval_direct(3, &CFloat::from_f64(p, 2.0, 0.0), &c).unwrap();
        assert!((v.re.to_f64() + 6.0).abs() < 1e-60);
        assert!(v.im.to_f64().abs() < 1e-60);
    }

    #[test]
    fn direct_form_raises_precision_under_cancellation() {
        let c = ctx("0.3");
        let d = hermite2_eval_direct_detail(15, &CFloat::from_f64(c.work_prec(), 0.0, 0.0), &c)
            .unwrap();
        assert!(d.bits_used > c.work_prec());
        assert!(d.value.abs() < Float::with_val(64, 1e-25));
    }

    #[test]
    fn psi_examples() {
        let c = ctx("0.5");
        let p = c.work_prec();
        let x = Float::with_val(p, 0.7);
        assert_eq!(psi_eval(0, &x, &c).to_f64(), 1.0);
        let d = Float::with_val(p, psi_eval(1, &x, &c) - &x).abs();
        assert!(d < Float::with_val(64, 1e-70));
        let lhs = Float::with_val(p, &x * psi_eval(1, &x, &c));
        let rhs = b_coeff(1, &c).unwrap() * psi_eval(2, &x, &c)
            + b_coeff(0, &c).unwrap() * psi_eval(0, &x, &c);
        assert!(Float::with_val(p, lhs - rhs).abs() < Float::with_val(64, 1e-30));
    }

    #[test]
    fn psi_recurrence_matches_closed_form() {
        for q in ["0.3", "0.5", "0.8"] {
            let c = ctx(q);
            for x in [-2.0, -0.5, 0.0, 0.7, 1.0, 2.0] {
                let xf = Float::with_val(c.work_prec(), x);
                let seq = psi_sequence(15, &xf, &c).unwrap();
                for (n, s) in seq.iter().enumerate() {
                    let d = Float::with_val(64, s - psi_eval(n, &xf, &c)).abs();
                    assert!(d < Float::with_val(64, 1e-25), "q={q} x={x} n={n}");
                }
            }
        }
    }

    #[test]
    fn psi_squares_converge() {
        let c = ctx("0.5");
        let (s, terms) = psi_square_sum(&Float::with_val(c.work_prec(), 1.5), &c).unwrap();
        assert!(s > 1 && s.is_finite());
        // Psi_{n+1} ~ -q Psi_{n-1}: squares decay like q^n
        assert!(terms > 200 && terms < 400, "{terms}");
    }

    #[test]
    fn generating_function_order_one() {
        // c_1 = x/(1-q) exactly
        for q in [r(1, 2), r(3, 10), r(4, 5)] {
            let x = r(7, 3);
            let c = generating_coeffs_exact(&x, 3, &q);
            assert_eq!(c[0], CRational::one());
            let expect = &x / Rational::from(1 - &q);
            assert_eq!(c[1], CRational::real(expect));
            assert_eq!(
                first_exact_mismatch(&x, 10, &q, WeightHypothesis::UnitWeight),
                Some(1)
            );
            assert_eq!(
                first_exact_mismatch(&x, 10, &q, WeightHypothesis::DividedByQPochhammer),
                Some(2)
            );
            assert_eq!(
                first_exact_mismatch(&x, 10, &q, WeightHypothesis::DividedWithQPower(2)),
                None
            );
        }
    }

    // Oracle: Cauchy contour integral of the closed form in mpmath
    // (radius 0.5, 64 nodes), q = 0.3, x = 1.3.
    #[test]
    fn generating_coefficients_match_contour_oracle() {
        let c = ctx("0.3");
        let x = Float::with_val(c.work_prec(), 1.3);
        let coeffs = generating_coeffs(&x, 4, &c);
        let oracle = [
            1.0,
            1.857_142_857_142_857_1,
            -0.090_894_819_466_248_04,
            -0.052_517_964_637_036_73,
            0.000_172_500_389_370_363,
        ];
        for (k, o) in oracle.iter().enumerate() {
            assert!((coeffs[k].re.to_f64() - o).abs() < 1e-13, "k={k}");
            assert!(coeffs[k].im.to_f64().abs() < 1e-60);
        }
    }

    #[test]
    fn report_at_zero_tau_and_order_zero() {
        let c = ctx("0.5");
        let x = Float::with_val(c.work_prec(), 0.4);
        let rep = generating_fn_report(&x, &CFloat::zero(64), 0, 1e-20, &c).unwrap();
        assert!(rep.hypotheses.iter().all(|h| h.matches));
        assert!(rep.closed_form_vs_taylor < 1e-60);
    }

    #[test]
    fn report_identifies_weight() {
        let c = ctx("0.5");
        let x = Float::with_val(c.work_prec(), 0.9);
        let tau = CFloat::from_f64(c.work_prec(), 0.2, 0.1);
        let rep = generating_fn_report(&x, &tau, 10, 1e-20, &c).unwrap();
        assert_eq!(rep.matching, vec!["divided-with-qpower-2".to_string()]);
        assert!((rep.order_one_ratio.unwrap() - 2.0).abs() < 1e-15);
        assert!(rep.closed_form_vs_taylor < 1e-10);
        assert!(generating_fn_report(&x, &CFloat::from_f64(64, 1.0, 0.0), 2, 1e-20, &c).is_err());
        assert!(generating_fn_report(&x, &tau, 21, 1e-20, &c).is_err());
    }

    #[test]
    fn qdiff_residuals() {
        let q = r(1, 2);
        assert!(qdiff_equation_check(0, &q).is_zero());
        for q in [r(1, 2), r(3, 10), r(5, 7)] {
            let res = qdiff_equation_check(1, &q);
            let omq = Rational::from(1 - &q);
            let expect = PolySeries::new(vec![
                CRational::new(Rational::new(), omq.clone()),
                CRational::zero(),
                CRational::i(),
                CRational::real(omq),
            ]);
            assert_eq!(res, expect);
        }
    }

    proptest! {
        #[test]
        fn parity_exact(n in 0usize..14, num in -30i64..30, den in 1i64..9) {
            let q = r(2, 5);
            let x = r(num, den);
            let a = hermite2_eval_exact(n, &x, &q);
            let b = hermite2_eval_exact(n, &Rational::from(-&x), &q);
            let sign = if n % 2 == 0 { 1 } else { -1 };
            prop_assert_eq!(a, b * Rational::from(sign));
        }

        #[test]
        fn normalized_recurrence(n in 1usize..14, x in -2.0f64..2.0) {
            let c = ctx("0.5");
            let p = c.work_prec();
            let xf = Float::with_val(p, x);
            let lhs = Float::with_val(p, &xf * psi_eval(n, &xf, &c));
            let rhs = b_coeff(n as i64, &c).unwrap() * psi_eval(n + 1, &xf, &c)
                + b_coeff(n as i64 - 1, &c).unwrap() * psi_eval(n - 1, &xf, &c);
            prop_assert!(Float::with_val(p, lhs - rhs).abs() < Float::with_val(64, 1e-25));
        }
    }
}
