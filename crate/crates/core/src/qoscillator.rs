//! Fock-basis sections of the position, momentum, ladder, number and
//! Hamiltonian operators, with the algebra checks between them.

use rug::ops::Pow;
use rug::{Float, Rational};
use serde::Serialize;

use crate::arith::{rat_pow, CFloat};
use crate::context::PrecisionContext;
use crate::error::{QError, QResult};
use crate::qkernel::{b_coeff, b_sq, b_sq_exact, q_number, q_number_exact};

/// Square matrix in the Fock basis, row-major.
///
/// `valid_block` is the size of the leading block whose entries agree with
/// the infinite operator.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedOperator {
    dim: usize,
    entries: Vec<CFloat>,
    valid_block: usize,
}

impl TruncatedOperator {
    pub fn zeros(dim: usize, prec: u32) -> Self {
        Self {
            dim,
            entries: vec![CFloat::zero(prec); dim * dim],
            valid_block: dim,
        }
    }

    pub fn diagonal(values: Vec<Float>) -> Self {
        let dim = values.len();
        let prec = values.first().map(Float::prec).unwrap_or(64);
        let mut m = Self::zeros(dim, prec);
        for (i, v) in values.into_iter().enumerate() {
            m.set(i, i, CFloat::from_real(v));
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn valid_block(&self) -> usize {
        self.valid_block
    }

    pub fn get(&self, row: usize, col: usize) -> &CFloat {
        &self.entries[row * self.dim + col]
    }

    pub fn set(&mut self, row: usize, col: usize, v: CFloat) {
        self.entries[row * self.dim + col] = v;
    }

    pub fn adjoint(&self) -> Self {
        let mut out = self.clone();
        for r in 0..self.dim {
            for c in 0..self.dim {
                out.set(r, c, self.get(c, r).conj());
            }
        }
        out
    }

    pub fn scale(&self, s: &CFloat) -> Self {
        let mut out = self.clone();
        for e in out.entries.iter_mut() {
            *e = &*e * s;
        }
        out
    }

    pub fn add(&self, o: &Self) -> Self {
        let mut out = self.clone();
        for (e, b) in out.entries.iter_mut().zip(&o.entries) {
            *e += b;
        }
        out.valid_block = self.valid_block.min(o.valid_block);
        out
    }

    /// Product at precision `prec`. Both factors are assumed to couple only
    /// neighbouring basis states, so one row and column are lost.
    pub fn mul(&self, o: &Self, prec: u32) -> Self {
        let n = self.dim;
        let mut out = Self::zeros(n, prec);
        for r in 0..n {
            for k in 0..n {
                let a = self.get(r, k);
                if a.is_zero() {
                    continue;
                }
                let a = a.with_prec(prec);
                for c in 0..n {
                    let b = o.get(k, c);
                    if b.is_zero() {
                        continue;
                    }
                    let mut acc = out.get(r, c).clone();
                    acc += &(&a * b);
                    out.set(r, c, acc);
                }
            }
        }
        out.valid_block = self.valid_block.min(o.valid_block).saturating_sub(1);
        out
    }

    /// Applies the matrix to a coefficient vector.
    pub fn apply(&self, v: &[CFloat], prec: u32) -> Vec<CFloat> {
        (0..self.dim)
            .map(|r| {
                let mut acc = CFloat::zero(prec);
                for (c, x) in v.iter().enumerate().take(self.dim) {
                    let a = self.get(r, c);
                    if !a.is_zero() {
                        acc += &(a * x);
                    }
                }
                acc
            })
            .collect()
    }

    pub fn is_hermitian(&self) -> bool {
        (0..self.dim).all(|r| (0..self.dim).all(|c| *self.get(r, c) == self.get(c, r).conj()))
    }

    pub fn is_tridiagonal(&self) -> bool {
        (0..self.dim).all(|r| (0..self.dim).all(|c| r.abs_diff(c) <= 1 || self.get(r, c).is_zero()))
    }
}

fn check_dim(dim: usize, min: usize) -> QResult<()> {
    if dim < min {
        return Err(QError::Domain(format!("dimension {dim} is below {min}")));
    }
    Ok(())
}

fn b_rounded(n: usize, ctx: &PrecisionContext) -> QResult<Float> {
    let b = b_coeff(n as i64, ctx)?;
    if !b.is_finite() {
        return Err(QError::Overflow {
            what: format!("b_{n}"),
            required_bits: ctx.work_prec() as u64,
        });
    }
    Ok(ctx.round(&b))
}

/// `X|n> = b_n |n+1> + b_{n-1} |n-1>`.
pub fn build_position(dim: usize, ctx: &PrecisionContext) -> QResult<TruncatedOperator> {
    check_dim(dim, 2)?;
    let p = ctx.precision_bits();
    let mut m = TruncatedOperator::zeros(dim, p);
    for n in 0..dim - 1 {
        let b = CFloat::from_real(b_rounded(n, ctx)?);
        m.set(n + 1, n, b.clone());
        m.set(n, n + 1, b);
    }
    Ok(m)
}

/// `P|n> = i (b_n |n+1> - b_{n-1} |n-1>)`.
pub fn build_momentum(dim: usize, ctx: &PrecisionContext) -> QResult<TruncatedOperator> {
    check_dim(dim, 2)?;
    let p = ctx.precision_bits();
    let mut m = TruncatedOperator::zeros(dim, p);
    for n in 0..dim - 1 {
        let b = b_rounded(n, ctx)?;
        m.set(n + 1, n, CFloat::new(Float::new(p), b.clone()));
        m.set(n, n + 1, CFloat::new(Float::new(p), -b));
    }
    Ok(m)
}

/// `(lowering, raising)` with `raising(n+1, n) = sqrt(q/(1-q)) b_n`.
pub fn build_ladder(
    dim: usize,
    ctx: &PrecisionContext,
) -> QResult<(TruncatedOperator, TruncatedOperator)> {
    check_dim(dim, 2)?;
    let p = ctx.precision_bits();
    let w = ctx.work_prec();
    let q = ctx.qf();
    let c = Float::with_val(w, &q / Float::with_val(w, 1 - &q)).sqrt();
    let mut raising = TruncatedOperator::zeros(dim, p);
    for n in 0..dim - 1 {
        let v = Float::with_val(w, &c * b_coeff(n as i64, ctx)?);
        raising.set(n + 1, n, CFloat::from_real(ctx.round(&v)));
    }
    Ok((raising.adjoint(), raising))
}

pub fn build_number(dim: usize, ctx: &PrecisionContext) -> TruncatedOperator {
    let p = ctx.precision_bits();
    TruncatedOperator::diagonal((0..dim).map(|n| Float::with_val(p, n)).collect())
}

/// `H = a+ a- + a- a+`, computed at working precision.
pub fn build_hamiltonian(dim: usize, ctx: &PrecisionContext) -> QResult<TruncatedOperator> {
    let (lo, hi) = build_ladder(dim, ctx)?;
    let w = ctx.work_prec();
    Ok(hi.mul(&lo, w).add(&lo.mul(&hi, w)))
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumTable {
    pub q: String,
    pub entries: Vec<(usize, String)>,
    #[serde(skip)]
    pub values: Vec<Float>,
}

/// `lambda_n = q^{-2n} [n+1] + q^{-2(n-1)} [n]`.
pub fn spectrum(n_max: usize, ctx: &PrecisionContext) -> QResult<SpectrumTable> {
    let w = ctx.work_prec();
    let q = ctx.qf();
    let mut values = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max {
        let n32 = n as i32;
        let a = Float::with_val(w, Pow::pow(&q, -2 * n32)) * q_number(n as u32 + 1, ctx);
        let b = Float::with_val(w, Pow::pow(&q, -2 * (n32 - 1))) * q_number(n as u32, ctx);
        let v = a + b;
        if !v.is_finite() {
            return Err(QError::Overflow {
                what: format!("lambda_{n}"),
                required_bits: w as u64,
            });
        }
        values.push(v);
    }
    Ok(table(ctx, values))
}

/// `lambda_n = q/(1-q) (b_{n-1}^2 + b_n^2)`.
pub fn spectrum_from_coefficients(n_max: usize, ctx: &PrecisionContext) -> QResult<SpectrumTable> {
    let w = ctx.work_prec();
    let q = ctx.qf();
    let ratio = Float::with_val(w, &q / Float::with_val(w, 1 - &q));
    let mut values = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max as i64 {
        let s = b_sq(n - 1, ctx)? + b_sq(n, ctx)?;
        values.push(Float::with_val(w, &ratio * &s));
    }
    Ok(table(ctx, values))
}

pub fn spectrum_exact(n_max: usize, q: &Rational) -> Vec<Rational> {
    (0..=n_max as i64)
        .map(|n| {
            rat_pow(q, -2 * n) * q_number_exact(n as u32 + 1, q)
                + rat_pow(q, -2 * (n - 1)) * q_number_exact(n as u32, q)
        })
        .collect()
}

fn table(ctx: &PrecisionContext, values: Vec<Float>) -> SpectrumTable {
    let digits = (ctx.precision_bits() as f64 * std::f64::consts::LOG10_2) as usize;
    SpectrumTable {
        q: ctx.q().to_string(),
        entries: values
            .iter()
            .enumerate()
            .map(|(n, v)| (n, crate::format::decimal(v, digits)))
            .collect(),
        values,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct IdentityCheck {
    pub identity: String,
    pub max_residual: f64,
    /// Largest `residual / bound` over the valid block.
    pub max_ratio: f64,
    pub worst_entry: (usize, usize),
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct AlgebraReport {
    pub dim: usize,
    pub q: String,
    pub valid_block: usize,
    pub ulps: u32,
    pub checks: Vec<IdentityCheck>,
    pub pass: bool,
}

impl AlgebraReport {
    pub fn first_violation(&self) -> Option<&IdentityCheck> {
        self.checks.iter().find(|c| !c.pass)
    }
}

struct Term<'a> {
    coef: Float,
    op: &'a TruncatedOperator,
}

fn check_identity(
    name: &str,
    lhs: &[Term<'_>],
    rhs: &TruncatedOperator,
    block: usize,
    ulps: u32,
    ctx: &PrecisionContext,
) -> IdentityCheck {
    let w = ctx.work_prec();
    let mut max_residual = Float::new(64);
    let mut max_ratio = Float::new(64);
    let mut worst = (0, 0);
    let mut pass = true;
    for r in 0..block {
        for c in 0..block {
            let mut acc = CFloat::zero(w);
            let mut scale = rhs.get(r, c).abs();
            for t in lhs {
                let e = t.op.get(r, c).with_prec(w).scale(&t.coef);
                scale += e.abs();
                acc += &e;
            }
            let res = (&acc - &rhs.get(r, c).with_prec(w)).abs();
            let bound = ctx.ulps(ulps, &scale);
            if res > bound {
                pass = false;
            }
            let ratio = if bound.is_zero() {
                if res.is_zero() {
                    Float::new(64)
                } else {
                    Float::with_val(64, f64::INFINITY)
                }
            } else {
                Float::with_val(64, &res / &bound)
            };
            if ratio > max_ratio {
                max_ratio = ratio;
                worst = (r, c);
            }
            if res > max_residual {
                max_residual = Float::with_val(64, &res);
            }
        }
    }
    IdentityCheck {
        identity: name.to_string(),
        max_residual: max_residual.to_f64(),
        max_ratio: max_ratio.to_f64(),
        worst_entry: worst,
        pass,
    }
}

/// Runs every ladder identity and the Hamiltonian checks on the valid block.
/// Violations are recorded in the report, not raised.
pub fn algebra_report(dim: usize, ctx: &PrecisionContext) -> QResult<AlgebraReport> {
    check_dim(dim, 3)?;
    const ULPS: u32 = 4;
    let w = ctx.work_prec();
    let q = ctx.qf();
    let (lo, hi) = build_ladder(dim, ctx)?;
    let x = build_position(dim, ctx)?;
    let pm = build_momentum(dim, ctx)?;
    let lo_hi = lo.mul(&hi, w);
    let hi_lo = hi.mul(&lo, w);
    let block = lo_hi.valid_block();

    let diag = |f: &dyn Fn(i32) -> Float| {
        TruncatedOperator::diagonal((0..dim as i32).map(|n| ctx.round(&f(n))).collect())
    };
    let qpow = |e: i32| Float::with_val(w, Pow::pow(&q, e));
    let one = Float::with_val(w, 1);
    let neg = |v: Float| -v;

    let upper = diag(&|n| qpow(-2 * n) * q_number(n as u32 + 1, ctx));
    let lower = diag(&|n| qpow(-2 * (n - 1)) * q_number(n as u32, ctx));
    let q2n = diag(&|n| qpow(-2 * n));
    let qn = diag(&|n| qpow(-n));
    let spec = spectrum(dim - 1, ctx)?;
    let lambda = TruncatedOperator::diagonal(spec.values.iter().map(|v| ctx.round(v)).collect());

    let mut checks = vec![
        check_identity(
            "lowering*raising = q^{-2N}[N+1]",
            &[Term {
                coef: one.clone(),
                op: &lo_hi,
            }],
            &upper,
            block,
            ULPS,
            ctx,
        ),
        check_identity(
            "raising*lowering = q^{-2(N-1)}[N]",
            &[Term {
                coef: one.clone(),
                op: &hi_lo,
            }],
            &lower,
            block,
            ULPS,
            ctx,
        ),
        check_identity(
            "lowering*raising - q^{-1} raising*lowering = q^{-2N}",
            &[
                Term {
                    coef: one.clone(),
                    op: &lo_hi,
                },
                Term {
                    coef: neg(qpow(-1)),
                    op: &hi_lo,
                },
            ],
            &q2n,
            block,
            ULPS,
            ctx,
        ),
        check_identity(
            "lowering*raising - q^{-2} raising*lowering = q^{-N}",
            &[
                Term {
                    coef: one.clone(),
                    op: &lo_hi,
                },
                Term {
                    coef: neg(qpow(-2)),
                    op: &hi_lo,
                },
            ],
            &qn,
            block,
            ULPS,
            ctx,
        ),
    ];

    // H = a+a- + a-a+ = (1/2) q/(1-q) (X^2 + P^2), diagonal with lambda_n
    let half_ratio = Float::with_val(w, &q / Float::with_val(w, 1 - &q)) / 2u32;
    let xx = x.mul(&x, w);
    let pp = pm.mul(&pm, w);
    let ham = hi_lo.add(&lo_hi);
    checks.push(check_identity(
        "raising*lowering + lowering*raising = lambda_N",
        &[
            Term {
                coef: one.clone(),
                op: &hi_lo,
            },
            Term {
                coef: one.clone(),
                op: &lo_hi,
            },
        ],
        &lambda,
        block,
        ULPS,
        ctx,
    ));
    checks.push(check_identity(
        "(1/2) q/(1-q) (X^2 + P^2) = lambda_N",
        &[
            Term {
                coef: half_ratio.clone(),
                op: &xx,
            },
            Term {
                coef: half_ratio,
                op: &pp,
            },
        ],
        &lambda,
        block,
        ULPS,
        ctx,
    ));
    checks.push(check_identity(
        "H = lambda_N (Fock-diagonal)",
        &[Term {
            coef: one,
            op: &ham,
        }],
        &lambda,
        block,
        2,
        ctx,
    ));

    let pass = checks.iter().all(|c| c.pass);
    Ok(AlgebraReport {
        dim,
        q: ctx.q().to_string(),
        valid_block: block,
        ulps: ULPS,
        checks,
        pass,
    })
}

/// As [`algebra_report`], failing with the first violated identity.
pub fn verify_algebra(dim: usize, ctx: &PrecisionContext) -> QResult<AlgebraReport> {
    let report = algebra_report(dim, ctx)?;
    if let Some(v) = report.first_violation() {
        return Err(QError::AlgebraViolation {
            identity: v.identity.clone(),
            row: v.worst_entry.0,
            col: v.worst_entry.1,
            residual: v.max_residual,
            bound: v.max_residual / v.max_ratio.max(f64::MIN_POSITIVE),
        });
    }
    Ok(report)
}

/// Exact `lambda_n` against `q/(1-q)(b_{n-1}^2 + b_n^2)` in rationals.
pub fn spectrum_paths_agree_exact(n_max: usize, q: &Rational) -> bool {
    let ratio = q / Rational::from(1 - q);
    spectrum_exact(n_max, q).iter().enumerate().all(|(n, l)| {
        let n = n as i64;
        let alt = &ratio * (b_sq_exact(n - 1, q).unwrap() + b_sq_exact(n, q).unwrap());
        *l == alt
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx(q: &str) -> PrecisionContext {
        PrecisionContext::parse(q, 256).unwrap()
    }

    fn close(a: &Float, b: f64) -> bool {
        (a.to_f64() - b).abs() <= 1e-15 * b.abs().max(1.0)
    }

    #[test]
    fn position_entries() {
        let c = ctx("0.5");
        let x = build_position(2, &c).unwrap();
        assert!(close(&x.get(0, 1).re, 1.0) && close(&x.get(1, 0).re, 1.0));
        assert!(x.get(0, 0).is_zero());
        let x3 = build_position(3, &c).unwrap();
        assert!(close(&x3.get(1, 2).re, 6f64.sqrt()));
        assert!(x3.is_tridiagonal() && x3.is_hermitian());
        assert!(build_position(1, &c).is_err());
    }

    #[test]
    fn momentum_entries() {
        let c = ctx("0.5");
        let p = build_momentum(2, &c).unwrap();
        assert!(close(&p.get(1, 0).im, 1.0) && p.get(1, 0).re.is_zero());
        assert!(close(&p.get(0, 1).im, -1.0));
        assert!(p.is_hermitian() && p.is_tridiagonal());
        let p5 = build_momentum(5, &c).unwrap();
        assert!((0..5).all(|r| (0..5).all(|k| p5.get(r, k).re.is_zero())));
    }

    #[test]
    fn ladder_entries_and_vacuum() {
        let c = ctx("0.5");
        let (lo, hi) = build_ladder(6, &c).unwrap();
        assert!(close(&hi.get(1, 0).re, 1.0));
        let p = c.work_prec();
        let mut vac = vec![CFloat::zero(p); 6];
        vac[0] = CFloat::one(p);
        assert!(lo.apply(&vac, p).iter().all(CFloat::is_zero));
        assert_eq!(lo, hi.adjoint());
    }

    #[test]
    fn ladder_from_position_and_momentum() {
        let c = ctx("0.3");
        let w = c.work_prec();
        let x = build_position(8, &c).unwrap();
        let pm = build_momentum(8, &c).unwrap();
        let (lo, hi) = build_ladder(8, &c).unwrap();
        let q = c.qf();
        let half = Float::with_val(w, &q / Float::with_val(w, 1 - &q)).sqrt() / 2u32;
        let minus_i = CFloat::new(Float::new(w), Float::with_val(w, -1));
        let raise = x
            .add(&pm.scale(&minus_i))
            .scale(&CFloat::from_real(half.clone()));
        let lower = x
            .add(&pm.scale(&minus_i.conj()))
            .scale(&CFloat::from_real(half));
        for r in 0..8 {
            for k in 0..8 {
                let d = (raise.get(r, k) - hi.get(r, k)).abs();
                assert!(d <= c.ulps(4, &hi.get(r, k).abs()), "({r},{k})");
                let d = (lower.get(r, k) - lo.get(r, k)).abs();
                assert!(d <= c.ulps(4, &lo.get(r, k).abs()));
            }
        }
    }

    #[test]
    fn spectrum_values() {
        let c = ctx("0.5");
        let s = spectrum(2, &c).unwrap();
        assert_eq!(s.values[0].to_f64(), 1.0);
        assert_eq!(s.values[1].to_f64(), 7.0);
        assert_eq!(s.values[2].to_f64(), 34.0);
        assert_eq!(spectrum_exact(2, &Rational::from((1, 2))), vec![1, 7, 34]);
        for q in ["0.3", "0.7", "0.9"] {
            assert_eq!(spectrum(0, &ctx(q)).unwrap().values[0].to_f64(), 1.0);
        }
    }

    #[test]
    fn spectrum_increasing_and_paths_agree() {
        for q in ["0.3", "0.5", "0.8"] {
            let c = ctx(q);
            let a = spectrum(40, &c).unwrap();
            let b = spectrum_from_coefficients(40, &c).unwrap();
            for n in 0..=40 {
                let d = Float::with_val(64, &a.values[n] - &b.values[n]).abs();
                assert!(d <= c.ulps(2, &a.values[n]));
                if n > 0 {
                    assert!(a.values[n] > a.values[n - 1]);
                }
            }
            assert!(spectrum_paths_agree_exact(30, c.q()));
        }
    }

    #[test]
    fn ladder_products_vacuum_entries() {
        let c = ctx("0.5");
        let (lo, hi) = build_ladder(4, &c).unwrap();
        let w = c.work_prec();
        assert!(close(&lo.mul(&hi, w).get(0, 0).re, 1.0));
        assert!(hi.mul(&lo, w).get(0, 0).is_zero());
    }

    #[test]
    fn algebra_holds_dim8() {
        let rep = verify_algebra(8, &ctx("0.5")).unwrap();
        assert_eq!(rep.valid_block, 7);
        assert!(rep.pass);
        assert_eq!(rep.checks.len(), 7);
    }

    #[test]
    fn hamiltonian_diagonal_matches_spectrum() {
        let c = ctx("0.8");
        let h = build_hamiltonian(10, &c).unwrap();
        let s = spectrum(8, &c).unwrap();
        assert!(h.is_hermitian());
        for n in 0..9 {
            let d = Float::with_val(64, &h.get(n, n).re - &s.values[n]).abs();
            assert!(d <= c.ulps(4, &s.values[n]));
            // eigenrelation H|n> = lambda_n |n>
            for m in 0..9 {
                if m != n {
                    assert!(h.get(m, n).is_zero());
                }
            }
        }
    }

    #[test]
    fn truncation_corrupts_last_diagonal() {
        let c = ctx("0.5");
        let (lo, hi) = build_ladder(5, &c).unwrap();
        let prod = lo.mul(&hi, c.work_prec());
        // a- a+ at the last index misses b_{dim-1}
        assert!(prod.get(4, 4).is_zero());
        assert_eq!(prod.valid_block(), 4);
    }
}
