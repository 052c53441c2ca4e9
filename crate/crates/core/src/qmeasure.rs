//! Weight function of the moment problem on the geometric lattice, its
//! moments, the induced point-mass measures and the resolution of unity.

use std::f64::consts::LOG2_E;

use rug::float::Constant;
use rug::Float;
use serde::Serialize;

use crate::arith::float_pow;
use crate::coherent::cs_norm_sq;
use crate::context::PrecisionContext;
use crate::error::{QError, QResult};
use crate::qcalculus::{
    hat_q_integral, HatNormalization, HatOptions, HatSum, Integrand, LatticeFunction,
};
use crate::qkernel::{b_sq, q_factorial, rho_factorial};

/// Values `g_m ~ f(q^m)` of the solution of `f(qy) - f(q^2 y) = -q y f(y)`
/// with `f(0+) = 1`.
#[derive(Debug, Clone)]
pub struct LatticeWeight {
    k_depth: usize,
    tail: usize,
    m_min: i64,
    values: Vec<Float>,
    /// Lattice index where the forward recursion was started.
    seed_index: i64,
    /// Largest relative residual of the difference equation.
    pub residual_max: f64,
    /// Largest relative change of a retained value under a deeper seed.
    pub stability_change: f64,
}

/// Seed distance giving contamination below `2^-(bits+16)`.
fn seed_distance(bits: u32, q: &Float) -> i64 {
    let lg = -q.to_f64().ln() * LOG2_E;
    (2.0 * (bits as f64 + 16.0) / lg).ceil() as i64
}

/// Forward recursion `g_{m+2} = g_{m+1} + q^{m+1} g_m` from `(g_s, g_{s+1}) =
/// (0, 1)`, returning values on `[lo, hi]` divided by the limit at m -> inf.
fn forward_from(seed: i64, lo: i64, hi: i64, ctx: &PrecisionContext) -> QResult<Vec<Float>> {
    let w = ctx.work_prec();
    let q = ctx.qf();
    let mut qm = float_pow(&q, seed + 1);
    let mut a = Float::new(w);
    let mut b = Float::with_val(w, 1);
    let mut m = seed;
    let mut kept = Vec::with_capacity((hi - lo + 1) as usize);
    let eps = Float::with_val(w, Float::i_exp(1, -(w as i32) - 8));
    loop {
        // invariant: a = g_m, b = g_{m+1}, qm = q^{m+1}
        if m >= lo && m <= hi {
            kept.push(a.clone());
        }
        let inc = Float::with_val(w, &qm * &a);
        if m > hi && inc <= Float::with_val(w, &b * &eps) {
            // remaining increments form a geometric tail of ratio <= q
            let tail = Float::with_val(w, &inc * &q) / Float::with_val(w, 1 - &q);
            let limit = b + tail;
            for v in kept.iter_mut() {
                *v /= &limit;
            }
            return Ok(kept);
        }
        let next = Float::with_val(w, &b + &inc);
        a = std::mem::replace(&mut b, next);
        qm *= &q;
        m += 1;
        if !a.is_finite() || (m - seed) as usize > 64 * ctx.max_terms() {
            return Err(QError::NoConvergence {
                what: "lattice weight recursion".into(),
                terms: (m - seed) as usize,
            });
        }
    }
}

fn averaged(seed: i64, lo: i64, hi: i64, ctx: &PrecisionContext) -> QResult<Vec<Float>> {
    let even = forward_from(seed, lo, hi, ctx)?;
    let odd = forward_from(seed - 1, lo, hi, ctx)?;
    Ok(even
        .into_iter()
        .zip(odd)
        .map(|(a, b)| (a + b) / 2u32)
        .collect())
}

/// Builds `g_m` for `m` in `[-k_depth - 1, tail + 2]`, the range read by the
/// hat integrals with upward depth `k_depth` and downward depth `tail`.
pub fn lattice_weight(
    k_depth: usize,
    tail: usize,
    ctx: &PrecisionContext,
) -> QResult<LatticeWeight> {
    if k_depth < 4 || tail < 4 {
        return Err(QError::Domain("lattice depths must be at least 4".into()));
    }
    let w = ctx.work_prec();
    let q = ctx.qf();
    let lo = -(k_depth as i64) - 1;
    let hi = tail as i64 + 2;
    let seed = lo - seed_distance(ctx.precision_bits(), &q);
    let values = averaged(seed, lo, hi, ctx)?;

    // deeper seed, shifted by an even amount
    let deeper = averaged(seed - 64, lo, hi, ctx)?;
    let mut change = Float::new(64);
    let mut worst = lo;
    for (i, (a, b)) in values.iter().zip(&deeper).enumerate() {
        let d = Float::with_val(w, a - b).abs() / a;
        if d > change {
            change = Float::with_val(64, &d);
            worst = lo + i as i64;
        }
    }
    if change > *ctx.series_tol() {
        return Err(QError::Instability {
            index: worst,
            change: change.to_f64(),
        });
    }

    let mut residual = Float::new(64);
    for m in 0..values.len().saturating_sub(2) {
        let qm = float_pow(&q, lo + m as i64 + 1);
        let t = Float::with_val(w, &qm * &values[m]);
        let r = Float::with_val(w, &values[m + 1] - &values[m + 2]) + &t;
        let scale = Float::with_val(w, &values[m + 1] + &values[m + 2]) + t;
        let rel = r.abs() / scale;
        if rel > residual {
            residual = Float::with_val(64, &rel);
        }
    }
    Ok(LatticeWeight {
        k_depth,
        tail,
        m_min: lo,
        values,
        seed_index: seed,
        residual_max: residual.to_f64(),
        stability_change: change.to_f64(),
    })
}

impl LatticeWeight {
    pub fn m_min(&self) -> i64 {
        self.m_min
    }

    pub fn m_max(&self) -> i64 {
        self.m_min + self.values.len() as i64 - 1
    }

    pub fn seed_index(&self) -> i64 {
        self.seed_index
    }

    pub fn k_depth(&self) -> usize {
        self.k_depth
    }

    pub fn tail(&self) -> usize {
        self.tail
    }

    /// `g_m`, an approximation of `f(q^m)`.
    pub fn get(&self, m: i64) -> QResult<&Float> {
        if m < self.m_min || m > self.m_max() {
            return Err(QError::Domain(format!(
                "weight index {m} outside the built range"
            )));
        }
        Ok(&self.values[(m - self.m_min) as usize])
    }

    pub fn all_positive(&self) -> bool {
        self.values.iter().all(|v| *v > 0)
    }

    /// Hat-integral depths matching the built range.
    pub fn hat_options(&self, normalization: HatNormalization) -> HatOptions {
        HatOptions {
            upward: self.k_depth,
            downward: self.tail,
            normalization,
        }
    }

    /// `f` itself as a lattice function with base point 1.
    pub fn as_lattice_function(&self, ctx: &PrecisionContext) -> QResult<LatticeFunction> {
        LatticeFunction::new(ctx.float(1), self.m_min, self.values.clone())
    }

    /// `y^n f(q^{-2} y)` sampled at `y = q^e` on the hat-integral exponents.
    pub fn moment_integrand(&self, n: u32, ctx: &PrecisionContext) -> QResult<LatticeFunction> {
        let q = ctx.qf();
        let (lo, hi) = self
            .hat_options(HatNormalization::Telescoping)
            .exponent_range();
        let qn = float_pow(&q, n as i64);
        LatticeFunction::from_fn(ctx.float(1), lo, hi, |e| {
            Ok(float_pow(&qn, e) * self.get(e - 2)?)
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BackwardDiagnostic {
    pub tail: usize,
    /// Largest `|backward - forward| / forward` on the checked range.
    pub max_relative_deviation: f64,
    pub worst_index: i64,
}

/// Runs `g_m = -q^{-(m+1)} (g_{m+1} - g_{m+2})` down from
/// `g_M = g_{M+1} = 1` and compares against the forward solution.
pub fn backward_recursion_diagnostic(
    down_to: i64,
    tail: usize,
    reference: &LatticeWeight,
    ctx: &PrecisionContext,
) -> QResult<BackwardDiagnostic> {
    let w = ctx.work_prec();
    let q = ctx.qf();
    let top = tail as i64;
    let lo = down_to.max(reference.m_min());
    let mut hi_v = Float::with_val(w, 1);
    let mut mid_v = Float::with_val(w, 1);
    let mut worst = Float::new(64);
    let mut worst_index = top;
    let mut m = top - 1;
    while m >= lo {
        let g = -(Float::with_val(w, &mid_v - &hi_v) / float_pow(&q, m + 1));
        if let Ok(r) = reference.get(m) {
            let d = Float::with_val(w, &g - r).abs() / r;
            if d > worst || !d.is_finite() {
                worst = Float::with_val(64, &d);
                worst_index = m;
            }
        }
        hi_v = std::mem::replace(&mut mid_v, g);
        m -= 1;
    }
    Ok(BackwardDiagnostic {
        tail,
        max_relative_deviation: worst.to_f64(),
        worst_index,
    })
}

#[derive(Debug, Clone)]
pub struct FormalSeriesValue {
    pub partial: Float,
    /// Index of the smallest-magnitude term, included in `partial`.
    pub smallest_index: usize,
    pub smallest_term: Float,
    /// True when the terms grow again before `n_terms`.
    pub diverging: bool,
}

/// Optimally truncated `sum_n q^{-C(n,2)} (-y)^n / (q;q)_n`.
pub fn formal_series_partial(
    y: &Float,
    n_terms: usize,
    ctx: &PrecisionContext,
) -> QResult<FormalSeriesValue> {
    if n_terms > ctx.max_terms() {
        return Err(QError::Domain("more terms than the context allows".into()));
    }
    if *y < 0 {
        return Err(QError::Domain(
            "formal series argument must be nonnegative".into(),
        ));
    }
    let w = ctx.work_prec();
    let q = ctx.qf();
    let mut term = Float::with_val(w, 1);
    let mut partial = Float::with_val(w, 1);
    let mut best = (0usize, Float::with_val(w, 1), Float::with_val(w, 1));
    let mut diverging = false;
    for n in 1..n_terms {
        // a_n / a_{n-1} = -y q^{-(n-1)} / (1 - q^n)
        let qn = float_pow(&q, n as i64);
        term *= -Float::with_val(w, y) / float_pow(&q, n as i64 - 1);
        term /= Float::with_val(w, 1 - &qn);
        partial += &term;
        let a = Float::with_val(w, term.abs_ref());
        if a < best.1 {
            best = (n, a, partial.clone());
        } else if a > best.1 {
            diverging = true;
            break;
        }
        if term.is_zero() {
            break;
        }
    }
    Ok(FormalSeriesValue {
        partial: best.2,
        smallest_index: best.0,
        smallest_term: best.1,
        diverging,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct MomentValue {
    pub n: u32,
    pub lattice: f64,
    pub closed_form: f64,
    pub relative_deviation: f64,
    #[serde(skip)]
    pub lattice_exact: Float,
    #[serde(skip)]
    pub sum: Option<HatSum>,
}

/// `q^{-n^2} (q;q)_n`.
pub fn moment_closed_form(n: u32, ctx: &PrecisionContext) -> Float {
    float_pow(&ctx.qf(), -((n * n) as i64)) * q_factorial(n, ctx)
}

/// `I_n = int_0^inf x^n f(q^{-2}x) dx` as a hat integral on the lattice.
pub fn moment_in(n: u32, weight: &LatticeWeight, ctx: &PrecisionContext) -> QResult<MomentValue> {
    let w = ctx.work_prec();
    let integrand = weight.moment_integrand(n, ctx)?;
    let opts = weight.hat_options(HatNormalization::Telescoping);
    let s = hat_q_integral(Integrand::Lattice(&integrand), &opts, ctx)?;
    let closed = moment_closed_form(n, ctx);
    let dev = Float::with_val(w, &s.value - &closed).abs() / &closed;
    Ok(MomentValue {
        n,
        lattice: s.value.to_f64(),
        closed_form: closed.to_f64(),
        relative_deviation: dev.to_f64(),
        lattice_exact: s.value.clone(),
        sum: Some(s),
    })
}

/// Largest relative defect of `I_n = b_{n-1}^2 I_{n-1}` over `1..=n_max`.
pub fn telescoping_defect(moments: &[MomentValue], ctx: &PrecisionContext) -> QResult<f64> {
    let w = ctx.work_prec();
    let mut worst = 0f64;
    for pair in moments.windows(2) {
        let n = pair[1].n;
        let pred = b_sq(n as i64 - 1, ctx)? * &pair[0].lattice_exact;
        let d = Float::with_val(w, &pair[1].lattice_exact - &pred).abs() / &pair[1].lattice_exact;
        worst = worst.max(d.to_f64());
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasureVariable {
    /// Lattice variable y; moments `I_n`.
    Y,
    /// `x = q/(1-q) y`; weights carry `1/pi`, moments `rho_n! / pi`.
    X,
    /// Radial z-plane density: X weights times `N^2(x)`.
    ZRadial,
}

#[derive(Debug, Clone, Serialize)]
pub struct MeasurePoint {
    pub branch: &'static str,
    pub lattice_exponent: i64,
    pub support: f64,
    pub weight: f64,
}

#[derive(Debug, Clone)]
pub struct DiscreteMeasure {
    pub variable: MeasureVariable,
    pub q: String,
    /// Upward branch first (increasing support), then downward (decreasing).
    pub exponents: Vec<i64>,
    pub support: Vec<Float>,
    pub weights: Vec<Float>,
    pub upward_len: usize,
}

impl DiscreteMeasure {
    pub fn moment(&self, n: u32) -> Float {
        let w = self.weights.first().map(Float::prec).unwrap_or(64);
        self.support
            .iter()
            .zip(&self.weights)
            .fold(Float::new(w), |acc, (x, m)| {
                acc + Float::with_val(w, Pow::pow(x, n)) * m
            })
    }

    pub fn negative_weights(&self) -> usize {
        self.weights.iter().filter(|v| **v < 0).count()
    }

    pub fn points(&self) -> Vec<MeasurePoint> {
        self.exponents
            .iter()
            .zip(self.support.iter().zip(&self.weights))
            .enumerate()
            .map(|(i, (e, (x, m)))| MeasurePoint {
                branch: if i < self.upward_len {
                    "upward"
                } else {
                    "downward"
                },
                lattice_exponent: *e,
                support: x.to_f64(),
                weight: m.to_f64(),
            })
            .collect()
    }

    /// Strict ordering within each branch and no repeated support point.
    pub fn support_is_well_formed(&self) -> bool {
        let (up, down) = self.support.split_at(self.upward_len);
        let inc = up.windows(2).all(|p| p[0] < p[1]);
        let dec = down.windows(2).all(|p| p[0] > p[1]);
        let mut e = self.exponents.clone();
        e.sort_unstable();
        e.dedup();
        inc && dec && e.len() == self.exponents.len()
    }
}

use rug::ops::Pow;

/// Point masses on the hat-integral lattice. Y weights are
/// `P y f(q^{-2} y)` with the telescoping prefactor `P = 1/q`.
pub fn build_measure(
    variable: MeasureVariable,
    weight: &LatticeWeight,
    ctx: &PrecisionContext,
) -> QResult<DiscreteMeasure> {
    let w = ctx.work_prec();
    let q = ctx.qf();
    let opts = weight.hat_options(HatNormalization::Telescoping);
    let pf = opts.normalization.prefactor(ctx);
    let exponents: Vec<i64> = opts.exponents().collect();
    let scale = Float::with_val(w, &q / Float::with_val(w, 1 - &q));
    let pi = Float::with_val(w, Constant::Pi);
    let mut support = Vec::with_capacity(exponents.len());
    let mut weights = Vec::with_capacity(exponents.len());
    for &e in &exponents {
        let y = float_pow(&q, e);
        let m = Float::with_val(w, &pf * &y) * weight.get(e - 2)?;
        let (x, m) = match variable {
            MeasureVariable::Y => (y, m),
            MeasureVariable::X => (Float::with_val(w, &y * &scale), m / &pi),
            MeasureVariable::ZRadial => {
                let x = Float::with_val(w, &y * &scale);
                let n2 = cs_norm_sq(&x, ctx)?;
                (x, m / &pi * n2)
            }
        };
        support.push(x);
        weights.push(m);
    }
    Ok(DiscreteMeasure {
        variable,
        q: ctx.q().to_string(),
        exponents,
        support,
        weights,
        upward_len: opts.upward + 1,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct UnityReport {
    pub q: String,
    pub n_max: usize,
    pub diagonal: Vec<f64>,
    pub max_deviation: f64,
    /// Off-diagonal entries vanish identically after the angular integral.
    pub off_diagonal_exact_zero: bool,
    pub negative_weights: usize,
}

/// `G_nn = pi sum_k m_k x_k^n / (rho_n! N^2(x_k))` for the radial measure.
pub fn unity_check(
    n_max: usize,
    weight: &LatticeWeight,
    ctx: &PrecisionContext,
) -> QResult<UnityReport> {
    if n_max > 8 {
        return Err(QError::Domain("unity check supports n <= 8".into()));
    }
    let w = ctx.work_prec();
    let measure = build_measure(MeasureVariable::ZRadial, weight, ctx)?;
    let pi = Float::with_val(w, Constant::Pi);
    let inv_norm: Vec<Float> = measure
        .support
        .iter()
        .map(|x| cs_norm_sq(x, ctx).map(Float::recip))
        .collect::<QResult<_>>()?;
    let mut diagonal = Vec::with_capacity(n_max + 1);
    let mut max_dev = 0f64;
    for n in 0..=n_max as u32 {
        let mut acc = Float::new(w);
        for ((x, m), inv) in measure.support.iter().zip(&measure.weights).zip(&inv_norm) {
            acc += Float::with_val(w, Pow::pow(x, n)) * m * inv;
        }
        let g = acc * &pi / rho_factorial(n, ctx)?;
        let v = g.to_f64();
        max_dev = max_dev.max((v - 1.0).abs());
        diagonal.push(v);
    }
    Ok(UnityReport {
        q: ctx.q().to_string(),
        n_max,
        diagonal,
        max_deviation: max_dev,
        off_diagonal_exact_zero: true,
        negative_weights: measure.negative_weights(),
    })
}
