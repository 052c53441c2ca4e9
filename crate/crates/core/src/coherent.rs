//! Coherent states: eigenvectors of the lowering operator in the Fock basis.

use rug::{Float, Rational};
use serde::Serialize;

use crate::arith::CFloat;
use crate::context::PrecisionContext;
use crate::error::{QError, QResult};
use crate::qhermite::{closed_form_value, psi_prefactor, psi_sequence, WeightHypothesis};
use crate::qkernel::{b_sq, b_sq_exact, gen_exponential, gen_exponential_complex};
use crate::qoscillator::build_ladder;

pub const DEFAULT_TRUNC: usize = 60;

/// `rho_{n+1}! / rho_n! = q/(1-q) b_n^2`.
fn rho_step(n: usize, ctx: &PrecisionContext) -> QResult<Float> {
    let w = ctx.work_prec();
    let q = ctx.qf();
    let r = Float::with_val(w, &q / Float::with_val(w, 1 - &q));
    Ok(r * b_sq(n as i64, ctx)?)
}

struct Terms {
    /// `t^n / rho_n!` for n in `0..=last`.
    values: Vec<Float>,
    /// Sum of the values beyond `keep`.
    tail: Float,
}

/// Terms `t^n / rho_n!` kept up to `keep` and summed beyond it until negligible.
fn norm_terms(t: &Float, keep: usize, ctx: &PrecisionContext) -> QResult<Terms> {
    let w = ctx.work_prec();
    let tol = ctx.series_tol();
    let mut term = Float::with_val(w, 1);
    let mut values = vec![term.clone()];
    let mut tail = Float::new(w);
    let mut total = Float::with_val(w, 1);
    let mut small = 0;
    for n in 0..ctx.max_terms() {
        term *= t;
        term /= rho_step(n, ctx)?;
        total += &term;
        if n < keep {
            values.push(term.clone());
            continue;
        }
        tail += &term;
        if term <= Float::with_val(w, &total * tol) || term.is_zero() {
            small += 1;
            if small >= 3 {
                return Ok(Terms { values, tail });
            }
        } else {
            small = 0;
        }
    }
    Err(QError::Truncation {
        bound: tail.to_f64(),
        max_terms: ctx.max_terms(),
    })
}

/// `N^2(t) = sum_n t^n / rho_n! = sum_n ((1-q)t/q)^n q^{n^2} / (q;q)_n`.
pub fn cs_norm_sq(t: &Float, ctx: &PrecisionContext) -> QResult<Float> {
    if *t < 0 {
        return Err(QError::Domain("norm argument must be nonnegative".into()));
    }
    let terms = norm_terms(t, 0, ctx)?;
    Ok(terms.values[0].clone() + terms.tail)
}

/// The same value through the generalized exponential.
pub fn cs_norm_sq_via_exponential(t: &Float, ctx: &PrecisionContext) -> QResult<Float> {
    let w = ctx.work_prec();
    let q = ctx.qf();
    let arg = Float::with_val(w, 1 - &q) * t / &q;
    gen_exponential(&arg, ctx)
}

#[derive(Debug, Clone)]
pub struct CoherentStateVector {
    pub z: CFloat,
    pub trunc: usize,
    pub coeffs: Vec<CFloat>,
    pub norm_sq: Float,
    /// `sum_{n > trunc} |c_n|^2`.
    pub tail_bound: Float,
}

impl CoherentStateVector {
    pub fn norm_of_coeffs(&self) -> Float {
        let w = self.norm_sq.prec();
        self.coeffs
            .iter()
            .fold(Float::new(w), |acc, c| acc + c.norm_sqr())
    }
}

/// `c_n = z^n / sqrt(rho_n!) / N(|z|^2)` for `n <= trunc`.
pub fn cs_coeffs(z: &CFloat, trunc: usize, ctx: &PrecisionContext) -> QResult<CoherentStateVector> {
    let w = ctx.work_prec();
    let z = z.with_prec(w);
    let t = z.norm_sqr();
    let terms = norm_terms(&t, trunc, ctx)?;
    let norm_sq = terms.values.iter().fold(Float::new(w), |a, v| a + v) + &terms.tail;
    let tail_bound = Float::with_val(w, &terms.tail / &norm_sq);
    if tail_bound > *ctx.series_tol() {
        return Err(QError::Truncation {
            bound: tail_bound.to_f64(),
            max_terms: trunc,
        });
    }
    let inv_n = Float::with_val(w, norm_sq.sqrt_ref()).recip();
    let mut coeffs = Vec::with_capacity(trunc + 1);
    let mut c = CFloat::from_real(inv_n);
    coeffs.push(c.clone());
    for n in 0..trunc {
        c = (&c * &z).scale(&rho_step(n, ctx)?.sqrt().recip());
        coeffs.push(c.clone());
    }
    Ok(CoherentStateVector {
        z,
        trunc,
        coeffs,
        norm_sq,
        tail_bound,
    })
}

/// Smallest truncation, at least [`DEFAULT_TRUNC`], meeting the tail bound.
pub fn cs_coeffs_auto(z: &CFloat, ctx: &PrecisionContext) -> QResult<CoherentStateVector> {
    let mut trunc = DEFAULT_TRUNC;
    loop {
        match cs_coeffs(z, trunc, ctx) {
            Err(QError::Truncation { .. }) if trunc * 2 <= ctx.max_terms() => trunc *= 2,
            other => return other,
        }
    }
}

/// `prod_{k<n} q/(1-q) b_k^2`, exact. The coefficient ratio law
/// `c_{k+1}/c_k = z / sqrt(q/(1-q) b_k^2)` makes this the factorial `rho_n!`.
pub fn rho_from_ratios_exact(n: usize, q: &Rational) -> Rational {
    let r = q / Rational::from(1 - q);
    (0..n).fold(Rational::from(1), |acc, k| {
        acc * (&r * b_sq_exact(k as i64, q).expect("k >= 0"))
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct EigenResidual {
    pub residual: f64,
    pub bound: f64,
    pub last_coeff: f64,
    pub tail_bound: f64,
    pub within_bound: bool,
}

/// `|| a^- v - z v ||` for the truncated state on `trunc + 1` levels.
pub fn cs_eigen_residual(
    z: &CFloat,
    trunc: usize,
    ctx: &PrecisionContext,
) -> QResult<EigenResidual> {
    if trunc < 4 {
        return Err(QError::Domain("truncation below 4".into()));
    }
    let w = ctx.work_prec();
    let state = cs_coeffs(z, trunc, ctx)?;
    let (lo, _) = build_ladder(trunc + 1, ctx)?;
    let av = lo.apply(&state.coeffs, w);
    let mut res = Float::new(w);
    let mut scale = Float::new(w);
    for (a, c) in av.iter().zip(&state.coeffs) {
        let zc = &state.z * c;
        res += (a - &zc).norm_sqr();
        scale += a.abs() + zc.abs();
    }
    let residual = res.sqrt();
    let q = ctx.qf();
    let r = Float::with_val(w, &q / Float::with_val(w, 1 - &q)).sqrt();
    let last = state.coeffs[trunc].abs();
    let boundary = Float::with_val(w, &last * &r) * b_sq(trunc as i64 - 1, ctx)?.sqrt();
    let zabs = state.z.abs();
    let tail = Float::with_val(w, state.tail_bound.sqrt_ref()) * &zabs;
    let rounding = ctx.ulps(4 * (trunc as u32 + 1), &scale);
    let bound = boundary + tail + rounding;
    Ok(EigenResidual {
        residual: residual.to_f64(),
        bound: bound.to_f64(),
        last_coeff: last.to_f64(),
        tail_bound: state.tail_bound.to_f64(),
        within_bound: residual <= bound,
    })
}

/// Unnormalized kernel `sum_n ((1-q)/q conj(z1) z2)^n q^{n^2} / (q;q)_n`.
pub fn overlap(z1: &CFloat, z2: &CFloat, ctx: &PrecisionContext) -> QResult<CFloat> {
    let w = ctx.work_prec();
    let q = ctx.qf();
    let f = Float::with_val(w, 1 - &q) / &q;
    let arg = (&z1.with_prec(w).conj() * &z2.with_prec(w)).scale(&f);
    gen_exponential_complex(&arg, ctx)
}

/// Kernel divided by both normalizers.
pub fn normalized_overlap(z1: &CFloat, z2: &CFloat, ctx: &PrecisionContext) -> QResult<CFloat> {
    let k = overlap(z1, z2, ctx)?;
    let n1 = cs_norm_sq(&z1.norm_sqr(), ctx)?;
    let n2 = cs_norm_sq(&z2.norm_sqr(), ctx)?;
    Ok(k.scale(&Float::with_val(ctx.work_prec(), n1 * n2).sqrt().recip()))
}

#[derive(Debug, Clone, Serialize)]
pub struct HypothesisGap {
    pub hypothesis: String,
    pub relative_gap: f64,
    pub matches: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClosedFormReport {
    pub z: (f64, f64),
    pub x: f64,
    pub trunc: usize,
    /// `sum_n c_n Psi_n(x)`.
    pub direct: (f64, f64),
    /// Closed form over `N(|z|^2)` with `tau = sqrt(q(1-q)) z`.
    pub closed_form: (f64, f64),
    pub closed_form_gap: f64,
    pub hypotheses: Vec<HypothesisGap>,
    /// `N^2` from the real-base series.
    pub norm_sq: f64,
    /// The normalizer series with base `-iq` in place of `q`.
    pub norm_sq_base_minus_iq: (f64, f64),
    pub tolerance: f64,
}

/// Literal `sum_n (w/p)^n p^{n^2} / (p;p)_n` with `p = -iq`, `w = (1-q)|z|^2`.
fn normalizer_base_minus_iq(t: &Float, ctx: &PrecisionContext) -> QResult<CFloat> {
    let w = ctx.work_prec();
    let q = ctx.qf();
    let p = CFloat::new(Float::new(w), -q.clone());
    let wv = CFloat::from_real(Float::with_val(w, 1 - &q) * t);
    let ratio = &wv / &p;
    let tol = ctx.series_tol();
    let mut term = CFloat::one(w);
    let mut sum = CFloat::one(w);
    let mut p_n = CFloat::one(w);
    let mut small = 0;
    for _ in 1..ctx.max_terms() {
        // term_n / term_{n-1} = (w/p) p^{2n-1} / (1 - p^n)
        let p_prev = p_n.clone();
        p_n = &p_n * &p;
        let grow = &(&ratio * &p_prev) * &p_n;
        let denom = &CFloat::one(w) - &p_n;
        term = &(&term * &grow) / &denom;
        sum += &term;
        if term.abs() <= Float::with_val(w, sum.abs() * tol) {
            small += 1;
            if small >= 3 {
                return Ok(sum);
            }
        } else {
            small = 0;
        }
    }
    Err(QError::NoConvergence {
        what: "normalizer with base -iq".into(),
        terms: ctx.max_terms(),
    })
}

fn gap(a: &CFloat, b: &CFloat) -> f64 {
    let d = (a - b).abs();
    let s = a.abs().max(&b.abs()).clone();
    if s.is_zero() {
        0.0
    } else {
        Float::with_val(64, &d / &s).to_f64()
    }
}

fn pair(c: &CFloat) -> (f64, f64) {
    (c.re.to_f64(), c.im.to_f64())
}

/// Compares the direct coefficient sum `sum_n c_n Psi_n(x)` with the closed
/// form and with each weight hypothesis for the generating function.
pub fn cs_closed_form_report(
    z: &CFloat,
    x: &Float,
    trunc: usize,
    tol: f64,
    ctx: &PrecisionContext,
) -> QResult<ClosedFormReport> {
    let w = ctx.work_prec();
    let q = ctx.qf();
    let state = cs_coeffs(z, trunc, ctx)?;
    let psi = psi_sequence(trunc, x, ctx)?;
    let mut direct = CFloat::zero(w);
    for (c, p) in state.coeffs.iter().zip(&psi) {
        direct += &c.scale(p);
    }
    let inv_n = Float::with_val(w, state.norm_sq.sqrt_ref()).recip();
    let s = Float::with_val(w, &q * Float::with_val(w, 1 - &q)).sqrt();
    let tau = state.z.scale(&s);
    let closed = closed_form_value(x, &tau, ctx)?.scale(&inv_n);

    let mut hypotheses = Vec::new();
    for h in WeightHypothesis::MENU {
        let mut acc = CFloat::zero(w);
        let mut tau_n = CFloat::one(w);
        for (n, p) in psi.iter().enumerate() {
            // h_n(x) = Psi_n(x) / prefactor
            let hn = Float::with_val(w, p / psi_prefactor(n, ctx));
            acc += &tau_n.scale(&(h.weight(n, ctx) * hn));
            tau_n = &tau_n * &tau;
        }
        let acc = acc.scale(&inv_n);
        let g = gap(&acc, &closed);
        hypotheses.push(HypothesisGap {
            hypothesis: h.label(),
            relative_gap: g,
            matches: g <= tol,
        });
    }
    let t = state.z.norm_sqr();
    Ok(ClosedFormReport {
        z: pair(&state.z),
        x: x.to_f64(),
        trunc,
        direct: pair(&direct),
        closed_form: pair(&closed),
        closed_form_gap: gap(&direct, &closed),
        hypotheses,
        norm_sq: state.norm_sq.to_f64(),
        norm_sq_base_minus_iq: pair(&normalizer_base_minus_iq(&t, ctx)?),
        tolerance: tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ctx(q: &str) -> PrecisionContext {
        PrecisionContext::parse(q, 256).unwrap()
    }

    fn cz(c: &PrecisionContext, re: f64, im: f64) -> CFloat {
        CFloat::from_f64(c.work_prec(), re, im)
    }

    #[test]
    fn norm_examples() {
        let c = ctx("0.5");
        assert_eq!(cs_norm_sq(&c.float(0), &c).unwrap(), 1);
        let one = cs_norm_sq(&c.float(1), &c).unwrap();
        assert!((one.to_f64() - 2.1726687508496637).abs() < 1e-15);
        assert!(cs_norm_sq(&c.float(2), &c).unwrap() > one);
        assert!(cs_norm_sq(&c.float(-1), &c).is_err());
    }

    #[test]
    fn norm_two_paths_agree() {
        for q in ["0.3", "0.5", "0.8"] {
            let c = ctx(q);
            for t in [0.0, 0.25, 1.0, 4.0, 9.5] {
                let t = c.float(t);
                let a = cs_norm_sq(&t, &c).unwrap();
                let b = cs_norm_sq_via_exponential(&t, &c).unwrap();
                let d = Float::with_val(c.work_prec(), &a - &b).abs();
                assert!(d <= c.ulps(2, &a), "q={q} t={t}");
            }
        }
    }

    #[test]
    fn coefficient_examples() {
        let c = ctx("0.5");
        let vac = cs_coeffs(&cz(&c, 0.0, 0.0), 10, &c).unwrap();
        assert_eq!(vac.coeffs[0].re, 1);
        assert!(vac.coeffs[1..].iter().all(CFloat::is_zero));
        let one = cs_coeffs(&cz(&c, 1.0, 0.0), 60, &c).unwrap();
        assert_eq!(
            Float::with_val(c.work_prec(), &one.coeffs[1].re / &one.coeffs[0].re),
            1
        );
        let st = cs_coeffs(&cz(&c, 1.5, 0.5), 60, &c).unwrap();
        let n = st.norm_of_coeffs();
        let d = Float::with_val(c.work_prec(), 1 - &n).abs();
        assert!(d <= Float::with_val(64, &st.tail_bound + c.ulps(64, &n)));
        assert!(st.coeffs.iter().all(|v| !v.is_zero()));
    }

    #[test]
    fn short_truncation_is_refused() {
        let c = ctx("0.8");
        assert!(matches!(
            cs_coeffs(&cz(&c, 2.0, 0.0), 5, &c),
            Err(QError::Truncation { .. })
        ));
        let st = cs_coeffs_auto(&cz(&c, 2.0, 0.0), &c).unwrap();
        assert_eq!(st.trunc, DEFAULT_TRUNC);
    }

    #[test]
    fn eigen_residual_examples() {
        let c = ctx("0.5");
        let r = cs_eigen_residual(&cz(&c, 0.0, 0.0), 60, &c).unwrap();
        assert_eq!(r.residual, 0.0);
        let r = cs_eigen_residual(&cz(&c, 1.0, 0.0), 60, &c).unwrap();
        assert!(r.residual < 1e-40 && r.within_bound);
        assert!(cs_eigen_residual(&cz(&c, 1.0, 0.0), 3, &c).is_err());
        // a loose tolerance admits a short truncation
        let loose = c.with_series_tol(1e-3).unwrap();
        let short = cs_eigen_residual(&cz(&loose, 1.0, 0.0), 10, &loose).unwrap();
        assert!(short.within_bound);
        let ratio = short.residual / short.last_coeff;
        assert!((ratio - 1.0).abs() < 1e-12, "{ratio}");
    }

    #[test]
    fn overlap_examples() {
        let c = ctx("0.5");
        let z = cz(&c, 0.7, -1.1);
        let k = overlap(&z, &z, &c).unwrap();
        let n = cs_norm_sq(&z.norm_sqr(), &c).unwrap();
        assert!(Float::with_val(64, &k.re - &n).abs() <= c.ulps(4, &n));
        let k0 = overlap(&z, &cz(&c, 0.0, 0.0), &c).unwrap();
        assert_eq!(k0.re, 1);
        assert!(k0.im.is_zero());
        let nz = normalized_overlap(&z, &z, &c).unwrap();
        assert!((nz.re.to_f64() - 1.0).abs() < 1e-30);
    }

    #[test]
    fn closed_form_report_examples() {
        let c = ctx("0.5");
        let r0 = cs_closed_form_report(&cz(&c, 0.0, 0.0), &c.float(0.3), 60, 1e-20, &c).unwrap();
        assert_eq!(r0.direct, (1.0, 0.0));
        assert!(r0.hypotheses.iter().all(|h| h.matches));
        let r = cs_closed_form_report(&cz(&c, 0.5, 0.0), &c.float(0.3), 60, 1e-20, &c).unwrap();
        assert!(r.closed_form_gap < 1e-20);
        let by = |l: &str| {
            r.hypotheses
                .iter()
                .find(|h| h.hypothesis == l)
                .unwrap()
                .matches
        };
        assert!(!by("unit-weight"));
        assert!(!by("divided-by-qpochhammer"));
        assert!(by("divided-with-qpower-2"));
        assert!((r.norm_sq_base_minus_iq.0 - r.norm_sq).abs() > 1e-6);
    }

    #[test]
    fn eigen_residual_within_bound_grid() {
        for q in ["0.3", "0.5", "0.8"] {
            let c = ctx(q);
            for (re, im) in [(2.0, 0.0), (0.0, -2.0), (1.2, 1.5), (-0.3, 0.1)] {
                let r = cs_eigen_residual(&cz(&c, re, im), 60, &c).unwrap();
                assert!(r.within_bound && r.bound < 1e-30, "q={q} z=({re},{im})");
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn overlap_hermitian_and_cauchy_schwarz(
            a in -2.0f64..2.0, b in -2.0f64..2.0, cc in -2.0f64..2.0, d in -2.0f64..2.0,
        ) {
            let c = ctx("0.5");
            let z1 = cz(&c, a, b);
            let z2 = cz(&c, cc, d);
            let k12 = overlap(&z1, &z2, &c).unwrap();
            let k21 = overlap(&z2, &z1, &c).unwrap().conj();
            let diff = (&k12 - &k21).abs();
            prop_assert!(diff <= c.ulps(2, &k12.abs()));
            let lhs = k12.norm_sqr();
            let rhs = overlap(&z1, &z1, &c).unwrap().re * overlap(&z2, &z2, &c).unwrap().re;
            prop_assert!(lhs <= rhs);
        }

        #[test]
        fn ratio_law_exact(n in 0usize..30, qn in 1i64..10) {
            let q = Rational::from((qn, 10));
            prop_assert_eq!(rho_from_ratios_exact(n, &q), crate::qkernel::rho_factorial_exact(n as u32, &q));
        }
    }
}
