//! Extremal measure of the indeterminate moment problem for the zero
//! extension: bracket numbers, first and second kind polynomials, the carrier
//! equation, its roots and the point masses.
//!
//! Polynomials here live in the rescaled variable `xi = x / b_0`, where the
//! Jacobi matrix has off-diagonal entries `sqrt([n+1])`.

use rug::ops::Pow;
use rug::{Float, Rational};
use serde::Serialize;

use crate::arith::rat_pow;
use crate::context::PrecisionContext;
use crate::error::{QError, QResult};
use crate::qhermite::{psi_sequence, psi_square_sum};
use crate::qkernel::{b_coeff, b_sq_exact};

/// `[s] = b_{s-1}^2 / b_0^2`, with `[0] = 0`.
pub fn bracket_exact(s: usize, q: &Rational) -> Rational {
    if s == 0 {
        return Rational::new();
    }
    let b0 = b_sq_exact(0, q).expect("b_0");
    b_sq_exact(s as i64 - 1, q).expect("s >= 1") / b0
}

/// `q^{-2(s-1)} (1 - q^s) / (1 - q)`.
pub fn bracket_closed_exact(s: usize, q: &Rational) -> Rational {
    if s == 0 {
        return Rational::new();
    }
    let num = 1 - rat_pow(q, s as i64);
    rat_pow(q, -2 * (s as i64 - 1)) * num / Rational::from(1 - q)
}

pub fn bracket(s: usize, prec: u32, ctx: &PrecisionContext) -> Float {
    Float::with_val(prec, &bracket_closed_exact(s, ctx.q()))
}

/// `[1][3]...[2k-1]`, exact.
pub fn odd_double_factorial_exact(k: usize, q: &Rational) -> Rational {
    (1..=k).fold(Rational::from(1), |a, j| a * bracket_exact(2 * j - 1, q))
}

/// `[2][4]...[2k-2]`, exact; empty product for k <= 1.
pub fn even_double_factorial_exact(k: usize, q: &Rational) -> Rational {
    (1..k).fold(Rational::from(1), |a, j| a * bracket_exact(2 * j, q))
}

/// `[n]! = [1][2]...[n]`.
pub fn bracket_factorial_exact(n: usize, q: &Rational) -> Rational {
    (1..=n).fold(Rational::from(1), |a, s| a * bracket_exact(s, q))
}

/// Nested sums `T[L][N] = sum_{k=start(L)}^{N} [k] T[L-1][k-2]`, `T[0][.] = 1`,
/// stored with an offset of 2 so that `N = -2, -1` are representable.
fn nested_table<R: Clone>(
    levels: usize,
    n_max: usize,
    start: impl Fn(usize) -> i64,
    br: &[R],
    zero: R,
    one: R,
    mul_add: impl Fn(&R, &R, &R) -> R,
) -> Vec<Vec<R>> {
    let width = n_max + 3;
    let mut t = vec![vec![one; width]];
    for l in 1..=levels {
        let mut row = vec![zero.clone(); width];
        for n in 0..=n_max as i64 {
            let i = (n + 2) as usize;
            row[i] = if n >= start(l) {
                mul_add(&row[i - 1], &br[n as usize], &t[l - 1][(n) as usize])
            } else {
                zero.clone()
            };
        }
        t.push(row);
    }
    t
}

/// Exact `alpha` and `beta` tables up to index `n_max`.
#[derive(Debug, Clone)]
pub struct CoefficientTables<R> {
    alpha: Vec<Vec<R>>,
    beta: Vec<Vec<R>>,
    n_max: usize,
}

impl CoefficientTables<Rational> {
    pub fn exact(n_max: usize, q: &Rational) -> Self {
        let br: Vec<Rational> = (0..=n_max).map(|s| bracket_exact(s, q)).collect();
        let levels = n_max / 2 + 1;
        let f = |acc: &Rational, b: &Rational, prev: &Rational| acc + Rational::from(b * prev);
        Self {
            alpha: nested_table(
                levels,
                n_max,
                |l| 2 * l as i64 - 1,
                &br,
                Rational::new(),
                Rational::from(1),
                f,
            ),
            beta: nested_table(
                levels,
                n_max,
                |l| 2 * l as i64,
                &br,
                Rational::new(),
                Rational::from(1),
                f,
            ),
            n_max,
        }
    }
}

impl CoefficientTables<Float> {
    pub fn float(n_max: usize, prec: u32, ctx: &PrecisionContext) -> Self {
        let br: Vec<Float> = (0..=n_max).map(|s| bracket(s, prec, ctx)).collect();
        let levels = n_max / 2 + 1;
        let f = |acc: &Float, b: &Float, prev: &Float| Float::with_val(prec, b * prev) + acc;
        Self {
            alpha: nested_table(
                levels,
                n_max,
                |l| 2 * l as i64 - 1,
                &br,
                Float::new(prec),
                Float::with_val(prec, 1),
                f,
            ),
            beta: nested_table(
                levels,
                n_max,
                |l| 2 * l as i64,
                &br,
                Float::new(prec),
                Float::with_val(prec, 1),
                f,
            ),
            n_max,
        }
    }
}

impl<R: Clone> CoefficientTables<R> {
    /// `alpha_{2m-1, n-1}`; `m = 0` gives 1.
    pub fn alpha(&self, m: usize, n: i64) -> QResult<R> {
        self.lookup(&self.alpha, m, n - 1)
    }

    /// `beta_{2m, n}`; `m = 0` gives 1.
    pub fn beta(&self, m: usize, n: i64) -> QResult<R> {
        self.lookup(&self.beta, m, n)
    }

    fn lookup(&self, t: &[Vec<R>], m: usize, idx: i64) -> QResult<R> {
        if idx < -2 || idx > self.n_max as i64 || m >= t.len() {
            return Err(QError::Domain(format!(
                "coefficient index ({m}, {idx}) outside the table"
            )));
        }
        Ok(t[m][(idx + 2) as usize].clone())
    }
}

/// `alpha_{2m-1, n-1}` exactly.
pub fn alpha_coeff(m: usize, n: i64, q: &Rational) -> QResult<Rational> {
    if n < 0 {
        return Err(QError::Domain("negative polynomial index".into()));
    }
    CoefficientTables::exact((n as usize).max(1), q)
        .alpha(m, n)
        .or_else(|_| Ok(Rational::new()))
}

/// `beta_{2m, n}` exactly.
pub fn beta_coeff(m: usize, n: i64, q: &Rational) -> QResult<Rational> {
    if n < 0 {
        return Err(QError::Domain("negative polynomial index".into()));
    }
    CoefficientTables::exact(n as usize, q)
        .beta(m, n)
        .or_else(|_| Ok(Rational::new()))
}

#[derive(Debug, Clone, Serialize)]
pub struct KindComparison {
    pub n: usize,
    pub closed_form: f64,
    pub recurrence: f64,
    pub relative_gap: f64,
}

fn compare(n: usize, a: &Float, b: &Float) -> KindComparison {
    let d = Float::with_val(a.prec(), a - b).abs();
    let s = Float::with_val(64, a.abs_ref())
        .max(&Float::with_val(64, b.abs_ref()))
        .max(&Float::with_val(64, 1e-300));
    KindComparison {
        n,
        closed_form: a.to_f64(),
        recurrence: b.to_f64(),
        relative_gap: (d / s).to_f64(),
    }
}

/// Exact polynomial coefficients (ascending powers of xi) of
/// `sqrt([n]!) P_n` and `sqrt([n]!) Q_n`.
fn kind_coeffs(n: usize, second: bool, q: &Rational) -> Vec<Rational> {
    let mut c = vec![Rational::new(); n + 1];
    if second && n == 0 {
        return c;
    }
    let t = CoefficientTables::exact(n.max(2), q);
    // P_n: alpha_{2m-1,n-1} xi^{n-2m}; Q_{n}: beta_{2m,n-1} xi^{n-1-2m}
    let deg = if second { n - 1 } else { n };
    for m in 0..=deg / 2 {
        let v = if second {
            t.beta(m, n as i64 - 1).unwrap()
        } else {
            t.alpha(m, n as i64).unwrap()
        };
        c[deg - 2 * m] = if m % 2 == 0 { v } else { -v };
    }
    c
}

fn eval_scaled(coeffs: &[Rational], n: usize, xi: &Float, prec: u32, q: &Rational) -> Float {
    let mut acc = Float::new(prec);
    for c in coeffs.iter().rev() {
        acc *= xi;
        acc += c;
    }
    let f = Float::with_val(prec, &bracket_factorial_exact(n, q)).sqrt();
    acc / f
}

fn recurrence(n: usize, xi: &Float, seed: (Float, Float), prec: u32, q: &Rational) -> Float {
    let (mut prev, mut cur) = seed;
    if n == 0 {
        return prev;
    }
    for k in 1..n {
        // xi Y_k = sqrt([k+1]) Y_{k+1} + sqrt([k]) Y_{k-1}
        let up = Float::with_val(prec, &bracket_exact(k + 1, q)).sqrt();
        let down = Float::with_val(prec, &bracket_exact(k, q)).sqrt();
        let next = (Float::with_val(prec, xi * &cur) - down * &prev) / up;
        prev = std::mem::replace(&mut cur, next);
    }
    cur
}

/// `P_n(xi)` by the closed form and by the recurrence.
pub fn first_kind_eval(n: usize, xi: &Float, ctx: &PrecisionContext) -> KindComparison {
    let p = ctx.work_prec() * 2;
    let q = ctx.q();
    let closed = eval_scaled(&kind_coeffs(n, false, q), n, xi, p, q);
    let seed = (Float::with_val(p, 1), Float::with_val(p, xi));
    compare(n, &closed, &recurrence(n, xi, seed, p, q))
}

/// `Q_n(xi)` by the closed form and by the recurrence with `Q_0 = 0`, `Q_1 = 1`.
pub fn second_kind_eval(n: usize, xi: &Float, ctx: &PrecisionContext) -> KindComparison {
    let p = ctx.work_prec() * 2;
    let q = ctx.q();
    let closed = eval_scaled(&kind_coeffs(n, true, q), n, xi, p, q);
    let seed = (Float::new(p), Float::with_val(p, 1));
    compare(n, &closed, &recurrence(n, xi, seed, p, q))
}

/// Coefficients of `P_n` in powers of xi, as floats.
pub fn first_kind_coeffs(n: usize, ctx: &PrecisionContext) -> Vec<Float> {
    let p = ctx.work_prec();
    let q = ctx.q();
    let f = Float::with_val(p, &bracket_factorial_exact(n, q)).sqrt();
    kind_coeffs(n, false, q)
        .iter()
        .map(|c| Float::with_val(p, c) / &f)
        .collect()
}

#[derive(Debug, Clone)]
pub struct CarrierValue {
    pub value: Float,
    pub terms: usize,
    pub tail_estimate: Float,
}

/// x-independent ingredients of the carrier series, extended on demand.
pub struct CarrierSeries<'c> {
    ctx: &'c PrecisionContext,
    /// `b_k`
    b: Vec<Float>,
    /// `(-1)^k sqrt([2k-2]!! / [2k-1]!!)` at index k (index 0 unused)
    coef: Vec<Float>,
    ratio_sq: Float,
}

impl<'c> CarrierSeries<'c> {
    pub fn new(ctx: &'c PrecisionContext) -> Self {
        let w = ctx.work_prec();
        Self {
            ctx,
            b: Vec::new(),
            coef: vec![Float::new(w)],
            ratio_sq: Float::with_val(w, 1),
        }
    }

    fn ensure(&mut self, k_max: usize) -> QResult<()> {
        let w = self.ctx.work_prec();
        while self.b.len() < 2 * k_max + 1 {
            self.b.push(b_coeff(self.b.len() as i64, self.ctx)?);
        }
        while self.coef.len() <= k_max {
            let k = self.coef.len();
            if k > 1 {
                self.ratio_sq *= bracket(2 * k - 2, w, self.ctx);
            }
            self.ratio_sq /= bracket(2 * k - 1, w, self.ctx);
            let c = Float::with_val(w, self.ratio_sq.sqrt_ref());
            self.coef.push(if k % 2 == 1 { -c } else { c });
        }
        Ok(())
    }

    /// See [`carrier_function`].
    pub fn eval(&mut self, x: &Float, min_terms: usize) -> QResult<CarrierValue> {
        let ctx = self.ctx;
        let w = ctx.work_prec();
        let tol = ctx.series_tol();
        let x = Float::with_val(w, x);
        let mut chunk = (min_terms + 1).max(64);
        self.ensure(chunk)?;
        let xi = Float::with_val(w, &x / &self.b[0]);
        let mut sum = Float::new(w);
        let mut small = 0;
        // Psi_{n-1}, Psi_n
        let mut prev = Float::new(w);
        let mut cur = Float::with_val(w, 1);
        let mut n = 0usize;
        let mut k = 1;
        loop {
            if k > chunk {
                chunk *= 2;
                if chunk > ctx.max_terms() {
                    return Err(QError::NoConvergence {
                        what: "carrier series".into(),
                        terms: ctx.max_terms(),
                    });
                }
                self.ensure(chunk)?;
            }
            while n < 2 * k - 1 {
                let mut next = Float::with_val(w, &x * &cur);
                if n > 0 {
                    next -= Float::with_val(w, &self.b[n - 1] * &prev);
                }
                next /= &self.b[n];
                prev = std::mem::replace(&mut cur, next);
                n += 1;
            }
            let t = Float::with_val(w, &self.coef[k] * &cur);
            sum += &t;
            let t = Float::with_val(w, &t * &xi).abs();
            let total = Float::with_val(w, &sum * &xi) + 1u32;
            if k >= min_terms && t <= Float::with_val(w, total.abs_ref()) * tol {
                small += 1;
                if small >= 3 {
                    return Ok(CarrierValue {
                        value: total,
                        terms: k,
                        tail_estimate: t,
                    });
                }
            } else {
                small = 0;
            }
            k += 1;
        }
    }
}

/// `Psi_0(x) + (x / b_0) sum_{k>=1} (-1)^k sqrt([2k-2]!! / [2k-1]!!) Psi_{2k-1}(x)`.
///
/// At least `min_terms` values of k are summed; summation continues until
/// three consecutive terms are negligible.
pub fn carrier_function(
    x: &Float,
    min_terms: usize,
    ctx: &PrecisionContext,
) -> QResult<CarrierValue> {
    CarrierSeries::new(ctx).eval(x, min_terms)
}

#[derive(Debug, Clone, Serialize)]
pub struct CarrierPoint {
    pub x: f64,
    /// Mass from the ratio of the two coefficient series.
    pub loading: f64,
    /// Mass from `1 / sum_n Psi_n(x)^2`.
    pub christoffel: f64,
    pub series_terms: usize,
    #[serde(skip)]
    pub x_exact: Float,
    #[serde(skip)]
    pub loading_exact: Float,
}

fn bisect(
    series: &mut CarrierSeries<'_>,
    mut lo: Float,
    mut hi: Float,
    min_terms: usize,
) -> QResult<Float> {
    let ctx = series.ctx;
    let w = ctx.work_prec();
    let digits = ctx.precision_bits() as f64 / 4.0;
    let rel = Float::with_val(w, 10f64).pow(-digits);
    let mut f_lo = series.eval(&lo, min_terms)?.value;
    for _ in 0..4 * ctx.precision_bits() {
        let mid = Float::with_val(w, &lo + &hi) / 2u32;
        let width = Float::with_val(w, &hi - &lo);
        if width <= Float::with_val(w, &rel * &Float::with_val(w, mid.abs_ref())) {
            return Ok(mid);
        }
        let f_mid = series.eval(&mid, min_terms)?.value;
        if f_mid.is_zero() {
            return Ok(mid);
        }
        if (f_mid < 0) == (f_lo < 0) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Ok(Float::with_val(w, &lo + &hi) / 2u32)
}

/// Roots of the carrier function in `[-bound, bound]`, found by a relative
/// grid scan on the positive axis and mirrored. Sorted ascending.
pub fn carrier_roots(bound: f64, min_terms: usize, ctx: &PrecisionContext) -> QResult<Vec<Float>> {
    if bound.is_nan() || bound <= 0.0 {
        return Err(QError::Domain("search bound must be positive".into()));
    }
    let w = ctx.work_prec();
    let mut series = CarrierSeries::new(ctx);
    let mut positive = Vec::new();
    let mut x = 0.01f64.min(bound / 2.0);
    let mut prev_x = Float::with_val(w, x);
    let mut prev_f = series.eval(&prev_x, min_terms)?.value;
    while x < bound {
        x = (x * 1.02).min(bound);
        let cx = Float::with_val(w, x);
        let f = series.eval(&cx, min_terms)?.value;
        if (f < 0) != (prev_f < 0) {
            positive.push(bisect(&mut series, prev_x.clone(), cx.clone(), min_terms)?);
        }
        prev_x = cx;
        prev_f = f;
    }
    let mut all: Vec<Float> = positive
        .iter()
        .rev()
        .map(|r| Float::with_val(w, -r))
        .collect();
    all.extend(positive);
    Ok(all)
}

/// Coefficients `d_p` of `B(xi) = sum_p d_p xi^{2p}` and `e_p` of
/// `A(xi) = sum_p e_p xi^{2p+1}` from the double series truncated at `j <= j_max`.
fn loading_series(j_max: usize, prec: u32, ctx: &PrecisionContext) -> (Vec<Float>, Vec<Float>) {
    let n_max = 2 * j_max;
    let t = CoefficientTables::float(n_max, prec, ctx);
    let mut d = vec![Float::new(prec); j_max + 1];
    let mut e = vec![Float::new(prec); j_max];
    d[0] = Float::with_val(prec, -1);
    let mut odd_df = Float::with_val(prec, 1);
    for j in 1..=j_max {
        odd_df *= bracket(2 * j - 1, prec, ctx);
        for m in 0..j {
            let sign_b = if (j + m + 1) % 2 == 0 { 1 } else { -1 };
            // alpha_{2m-1, 2j-2}
            let a = t.alpha(m, 2 * j as i64 - 1).unwrap() / &odd_df;
            d[j - m] += a * sign_b;
            let sign_a = if (j + m + 1) % 2 == 0 { 1 } else { -1 };
            let b = t.beta(m, 2 * j as i64 - 2).unwrap() / &odd_df;
            e[j - m - 1] += b * sign_a;
        }
    }
    (d, e)
}

/// Evaluates `sum_p c_p xi^{stride p + offset}` and the same with absolute values.
fn eval_even_odd(c: &[Float], xi: &Float, offset: u32, deriv: bool, prec: u32) -> (Float, Float) {
    let x2 = Float::with_val(prec, xi.square_ref());
    let mut acc = Float::new(prec);
    let mut abs = Float::new(prec);
    let mut pw = Float::with_val(prec, 1);
    for (p, cp) in c.iter().enumerate() {
        let power = 2 * p as u32 + offset;
        let term = if deriv {
            if power == 0 {
                Float::new(prec)
            } else {
                // d/dxi xi^power = power xi^{power-1}
                Float::with_val(prec, cp * &pw)
                    * power
                    * Float::with_val(prec, Pow::pow(xi, offset))
                    / xi
            }
        } else {
            Float::with_val(prec, cp * &pw) * Float::with_val(prec, Pow::pow(xi, offset))
        };
        abs += Float::with_val(prec, term.abs_ref());
        acc += term;
        pw *= &x2;
    }
    (acc, abs)
}

/// `sigma(xi) = A(xi) / B'(xi)` at one root, raising precision to cover the
/// cancellation in the alternating power series.
fn series_loading(xi: &Float, j_max: usize, ctx: &PrecisionContext) -> QResult<Float> {
    let mut prec = ctx.work_prec();
    for _ in 0..4 {
        let (d, e) = loading_series(j_max, prec, ctx);
        let x = Float::with_val(prec, xi);
        let (a, a_abs) = eval_even_odd(&e, &x, 1, false, prec);
        let (bp, bp_abs) = eval_even_odd(&d, &x, 0, true, prec);
        let lost = |v: &Float, s: &Float| -> u32 {
            if v.is_zero() {
                return prec;
            }
            let r = Float::with_val(64, s / v).abs();
            r.log2().to_f64().max(0.0).ceil() as u32
        };
        let need = lost(&a, &a_abs).max(lost(&bp, &bp_abs)) + ctx.work_prec();
        if need <= prec {
            if bp.is_zero()
                || Float::with_val(64, bp.abs_ref())
                    <= Float::with_val(64, &bp_abs) * ctx.series_tol()
            {
                return Err(QError::DegenerateRoot { x: xi.to_f64() });
            }
            return Ok(Float::with_val(ctx.work_prec(), &a / &bp));
        }
        prec = need + 32;
    }
    Err(QError::NoConvergence {
        what: "loading series precision".into(),
        terms: j_max,
    })
}

/// Point masses at the given roots, from the coefficient series and from
/// the Christoffel function.
pub fn loadings(
    roots: &[Float],
    j_max: usize,
    ctx: &PrecisionContext,
) -> QResult<Vec<CarrierPoint>> {
    let w = ctx.work_prec();
    let b0 = b_coeff(0, ctx)?;
    roots
        .iter()
        .map(|x| {
            let xi = Float::with_val(w, x / &b0);
            let sigma = series_loading(&xi, j_max, ctx)?;
            let (s, _) = psi_square_sum(x, ctx)?;
            Ok(CarrierPoint {
                x: x.to_f64(),
                loading: sigma.to_f64(),
                christoffel: s.recip().to_f64(),
                series_terms: j_max,
                x_exact: x.clone(),
                loading_exact: sigma,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct ExtremalReport {
    pub q: String,
    pub bound: f64,
    pub points: Vec<CarrierPoint>,
    pub total_mass: f64,
    pub total_christoffel_mass: f64,
    /// `sum_k sigma_k Psi_m(x_k) Psi_n(x_k)` for `m, n <= gram_size - 1`.
    pub gram: Vec<Vec<f64>>,
    pub gram_max_deviation: f64,
    /// Largest root movement when the minimum series depth is doubled.
    pub root_shift_under_doubling: f64,
    pub max_loading_gap: f64,
}

/// Roots, loadings and the Gram diagnostic in one pass.
pub fn extremal_report(
    bound: f64,
    gram_size: usize,
    ctx: &PrecisionContext,
) -> QResult<ExtremalReport> {
    let w = ctx.work_prec();
    let roots = carrier_roots(bound, 8, ctx)?;
    let mut series = CarrierSeries::new(ctx);
    let terms = roots
        .iter()
        .map(|r| series.eval(r, 8).map(|c| c.terms))
        .collect::<QResult<Vec<_>>>()?
        .into_iter()
        .max()
        .unwrap_or(8);
    let mut shift = 0f64;
    for r in &roots {
        let lo = Float::with_val(w, r * 0.999);
        let hi = Float::with_val(w, r * 1.001);
        let (lo, hi) = if lo < hi { (lo, hi) } else { (hi, lo) };
        let again = bisect(&mut series, lo, hi, 2 * terms)?;
        shift = shift.max(Float::with_val(64, &again - r).abs().to_f64());
    }
    let points = loadings(&roots, terms + 8, ctx)?;
    let total: f64 = points.iter().map(|p| p.loading).sum();
    let total_c: f64 = points.iter().map(|p| p.christoffel).sum();
    let gap = points
        .iter()
        .map(|p| ((p.loading - p.christoffel) / p.christoffel).abs())
        .fold(0f64, f64::max);
    let mut gram = vec![vec![0f64; gram_size]; gram_size];
    for p in &points {
        let psi = psi_sequence(gram_size.saturating_sub(1), &p.x_exact, ctx)?;
        for m in 0..gram_size {
            for n in 0..gram_size {
                gram[m][n] += Float::with_val(w, &psi[m] * &psi[n]).to_f64() * p.loading;
            }
        }
    }
    let dev = (0..gram_size)
        .flat_map(|m| (0..gram_size).map(move |n| (m, n)))
        .map(|(m, n)| (gram[m][n] - if m == n { 1.0 } else { 0.0 }).abs())
        .fold(0f64, f64::max);
    Ok(ExtremalReport {
        q: ctx.q().to_string(),
        bound,
        points,
        total_mass: total,
        total_christoffel_mass: total_c,
        gram,
        gram_max_deviation: dev,
        root_shift_under_doubling: shift,
        max_loading_gap: gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qhermite::psi_eval;
    use proptest::prelude::*;

    fn half() -> Rational {
        Rational::from((1, 2))
    }

    fn ctx(q: &str) -> PrecisionContext {
        PrecisionContext::parse(q, 256).unwrap()
    }

    #[test]
    fn bracket_values() {
        let q = half();
        assert_eq!(bracket_exact(0, &q), 0);
        assert_eq!(bracket_exact(1, &q), 1);
        assert_eq!(bracket_exact(2, &q), 6);
        assert_eq!(bracket_exact(3, &q), 28);
        assert_eq!(bracket_exact(4, &q), 120);
        for s in 0..40 {
            for q in [Rational::from((3, 10)), half(), Rational::from((4, 5))] {
                assert_eq!(bracket_exact(s, &q), bracket_closed_exact(s, &q));
                if s > 0 {
                    assert!(bracket_exact(s, &q) > 0);
                }
            }
        }
    }

    #[test]
    fn double_factorial_ratio_decreases() {
        for q in [Rational::from((3, 10)), half(), Rational::from((9, 10))] {
            let r =
                |k: usize| even_double_factorial_exact(k, &q) / odd_double_factorial_exact(k, &q);
            for k in 1..30 {
                assert!(r(k + 1) < r(k), "k={k}");
            }
        }
    }

    #[test]
    fn coefficient_examples() {
        let q = half();
        assert_eq!(alpha_coeff(0, 5, &q).unwrap(), 1);
        assert_eq!(alpha_coeff(1, 3, &q).unwrap(), 7);
        assert_eq!(alpha_coeff(2, 2, &q).unwrap(), 0);
        assert_eq!(alpha_coeff(1, 1, &q).unwrap(), 0);
        assert_eq!(beta_coeff(0, 3, &q).unwrap(), 1);
        assert_eq!(beta_coeff(1, 2, &q).unwrap(), 6);
        assert_eq!(beta_coeff(1, 4, &q).unwrap(), 154);
        assert!(alpha_coeff(1, -1, &q).is_err());
    }

    #[test]
    fn kinds_closed_form_matches_recurrence() {
        let c = ctx("0.5");
        let xi = c.float(0.7);
        let q0 = second_kind_eval(0, &xi, &c);
        assert_eq!(q0.closed_form, 0.0);
        let q1 = second_kind_eval(1, &xi, &c);
        assert_eq!(q1.closed_form, 1.0);
        for n in 0..=20 {
            for x in [-2.5, 0.3, 1.0, 4.0] {
                let xi = c.float(x);
                assert!(first_kind_eval(n, &xi, &c).relative_gap < 1e-40, "P n={n}");
                assert!(second_kind_eval(n, &xi, &c).relative_gap < 1e-40, "Q n={n}");
            }
        }
    }

    #[test]
    fn first_kind_is_rescaled_orthonormal_family() {
        for q in ["0.5", "0.3"] {
            let c = ctx(q);
            let b0 = b_coeff(0, &c).unwrap();
            for n in 0..=6 {
                for x in [-1.3, 0.4, 2.0] {
                    let x = c.float(x);
                    let xi = Float::with_val(c.work_prec(), &x / &b0);
                    let p = first_kind_coeffs(n, &c)
                        .iter()
                        .rev()
                        .fold(Float::new(c.work_prec()), |acc, k| acc * &xi + k);
                    let psi = psi_eval(n, &x, &c);
                    let d = Float::with_val(64, &p - &psi).abs().to_f64();
                    assert!(d < 1e-60 * psi.to_f64().abs().max(1.0), "q={q} n={n}");
                }
            }
        }
    }

    #[test]
    fn carrier_examples() {
        let c = ctx("0.5");
        assert_eq!(carrier_function(&c.float(0), 4, &c).unwrap().value, 1);
        for x in [0.3, 1.7, 4.4] {
            let a = carrier_function(&c.float(x), 4, &c).unwrap().value;
            let b = carrier_function(&c.float(-x), 4, &c).unwrap().value;
            assert!(Float::with_val(64, &a - &b).abs() < 1e-60);
        }
        let lo = carrier_function(&c.float(0.8), 4, &c).unwrap().value;
        let hi = carrier_function(&c.float(0.9), 4, &c).unwrap().value;
        assert!((lo < 0) != (hi < 0));
    }

    #[test]
    fn roots_and_masses_at_half() {
        let c = ctx("0.5");
        let roots = carrier_roots(30.0, 8, &c).unwrap();
        let expect = [0.879039211150, 5.19714951139, 22.1817697308];
        assert_eq!(roots.len(), 6);
        for (r, e) in roots[3..].iter().zip(expect) {
            assert!((r.to_f64() - e).abs() < 1e-10 * e);
        }
        for i in 0..3 {
            assert_eq!(Float::with_val(c.work_prec(), &roots[i] + &roots[5 - i]), 0);
        }
        let pts = loadings(&roots[3..], 120, &c).unwrap();
        let masses = [0.495672045569, 0.00432776161116, 1.92820011216e-7];
        for (p, m) in pts.iter().zip(masses) {
            assert!((p.christoffel - m).abs() < 1e-11 * m);
            assert!((p.loading - m).abs() < 1e-11 * m, "{} vs {m}", p.loading);
        }
        assert!(carrier_roots(-1.0, 8, &c).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn carrier_is_even(x in 0.0f64..6.0) {
            let c = ctx("0.5");
            let a = carrier_function(&c.float(x), 4, &c).unwrap().value;
            let b = carrier_function(&c.float(-x), 4, &c).unwrap().value;
            prop_assert!(Float::with_val(64, &a - &b).abs() < 1e-60);
        }
    }
}
