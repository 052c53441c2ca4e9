//! Verification suites with per-check records and the discrepancy ledger.

use std::fmt;
use std::str::FromStr;

use rug::{Float, Rational};
use serde::Serialize;

use crate::arith::{float_pow, CFloat};
use crate::context::PrecisionContext;
use crate::error::{QError, QResult};
use crate::extremal::extremal_report;
use crate::poly::PolySeries;
use crate::qcalculus::{
    deformed_derivative, hat_q_integral, ibp_residual, jackson_fundamental_residual_exact,
    leibniz_residuals_exact, Endpoint, HatOptions, IbpVariant, Integrand,
};
use crate::qhermite::{
    first_exact_mismatch, generating_fn_report, hermite2_coeffs, hermite2_eval_direct, psi_eval,
    psi_sequence, qdiff_equation_check, WeightHypothesis,
};
use crate::qkernel::{gen_exponential, q_pochhammer_inf};
use crate::qmeasure::{lattice_weight, moment_in, telescoping_defect, unity_check};
use crate::qoscillator::{algebra_report, spectrum_paths_agree_exact};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Recurrence,
    Qcalculus,
    Commutators,
    Generating,
    Qdiff,
    Moments,
    Unity,
    Orthonormality,
}

impl Suite {
    pub const ALL: [Suite; 8] = [
        Suite::Recurrence,
        Suite::Qcalculus,
        Suite::Commutators,
        Suite::Generating,
        Suite::Qdiff,
        Suite::Moments,
        Suite::Unity,
        Suite::Orthonormality,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Suite::Recurrence => "recurrence",
            Suite::Qcalculus => "qcalculus",
            Suite::Commutators => "commutators",
            Suite::Generating => "generating",
            Suite::Qdiff => "qdiff",
            Suite::Moments => "moments",
            Suite::Unity => "unity",
            Suite::Orthonormality => "orthonormality",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = QError;

    fn from_str(s: &str) -> QResult<Self> {
        Suite::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| QError::Parse(format!("unknown suite '{s}'")))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckRecord {
    pub id: String,
    pub params: String,
    pub residual: f64,
    pub bound: f64,
    pub pass: bool,
    /// Diagnostic checks are reported but do not decide the overall result.
    pub diagnostic: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct LedgerEntry {
    pub id: String,
    pub summary: String,
    pub observed: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub suite: Suite,
    pub q: String,
    pub precision_bits: u32,
    pub checks: Vec<CheckRecord>,
    pub pass: bool,
    pub ledger: Vec<LedgerEntry>,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyOptions {
    pub n_max: Option<usize>,
    pub dim: Option<usize>,
    pub tol: Option<f64>,
    pub k_depth: usize,
    pub tail: usize,
    pub bound: f64,
    pub x: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            n_max: None,
            dim: None,
            tol: None,
            k_depth: 60,
            tail: 120,
            bound: 100.0,
            x: 0.7,
        }
    }
}

/// Known discrepancies between the literal formulas and what holds.
pub fn discrepancy_ledger() -> Vec<LedgerEntry> {
    let e = |id: &str, s: &str| LedgerEntry {
        id: id.into(),
        summary: s.into(),
        observed: None,
    };
    vec![
        e(
            "generating-weight",
            "Taylor coefficients of (i tau;q)_inf 1phi1(ix; i tau; q, -i tau) are \
             h_n(x) q^{n(n-1)}/(q;q)_n. Weight 1 fails at order 1 by the factor 1/(1-q); \
             weight 1/(q;q)_n fails from order 2.",
        ),
        e(
            "qdiff-equation",
            "-(1-q^n) x^2 h_n(x) = q h_n(x-i) - (1+q+x^2) h_n(x) + (1+x^2) h_n(x+i) holds at n = 0 \
             and fails from n = 1 on.",
        ),
        e(
            "hat-prefactor",
            "With prefactor (1-q)/q^2 the hat integral of a deformed derivative is \
             ((1-q)/q)(F(inf) - F(0)); the default prefactor 1/q gives F(inf) - F(0).",
        ),
        e(
            "weight-recursion",
            "Backward recursion of the weight from g_M = g_{M+1} = 1 is unstable; the weight \
             is built by forward recursion from large y, normalised at y -> 0.",
        ),
        e(
            "coherent-normalizer",
            "The explicit coherent state normalizer with base -iq differs from N^2 with base q; \
             N^2 with base q is used.",
        ),
        e(
            "bracket-examples",
            "At q = 1/2: [4] = 120, beta_{2,4} = [2] + [3] + [4] = 154, alpha_{1,0} = 0.",
        ),
    ]
}

struct Builder {
    checks: Vec<CheckRecord>,
    ledger: Vec<LedgerEntry>,
}

impl Builder {
    fn new() -> Self {
        Self {
            checks: Vec::new(),
            ledger: discrepancy_ledger(),
        }
    }

    fn check(&mut self, id: &str, params: String, residual: f64, bound: f64) {
        self.checks.push(CheckRecord {
            id: id.into(),
            params,
            residual,
            bound,
            pass: residual <= bound,
            diagnostic: false,
        });
    }

    fn diagnostic(&mut self, id: &str, params: String, residual: f64, bound: f64) {
        self.checks.push(CheckRecord {
            id: id.into(),
            params,
            residual,
            bound,
            pass: residual <= bound,
            diagnostic: true,
        });
    }

    fn observe(&mut self, id: &str, text: String) {
        if let Some(e) = self.ledger.iter_mut().find(|e| e.id == id) {
            e.observed = Some(text);
        }
    }

    fn finish(self, suite: Suite, ctx: &PrecisionContext) -> VerifyReport {
        let pass = self.checks.iter().filter(|c| !c.diagnostic).all(|c| c.pass);
        VerifyReport {
            suite,
            q: ctx.q().to_string(),
            precision_bits: ctx.precision_bits(),
            checks: self.checks,
            pass,
            ledger: self.ledger,
        }
    }
}

fn rel(a: &Float, b: &Float) -> f64 {
    let d = Float::with_val(a.prec(), a - b).abs();
    let s = Float::with_val(64, b.abs_ref()).max(&Float::with_val(64, 1e-300));
    (d / s).to_f64()
}

pub fn run_suite(
    suite: Suite,
    opts: &VerifyOptions,
    ctx: &PrecisionContext,
) -> QResult<VerifyReport> {
    let mut b = Builder::new();
    match suite {
        Suite::Recurrence => recurrence(&mut b, opts, ctx)?,
        Suite::Qcalculus => qcalculus(&mut b, opts, ctx)?,
        Suite::Commutators => commutators(&mut b, opts, ctx)?,
        Suite::Generating => generating(&mut b, opts, ctx)?,
        Suite::Qdiff => qdiff(&mut b, opts, ctx),
        Suite::Moments => moments(&mut b, opts, ctx)?,
        Suite::Unity => unity(&mut b, opts, ctx)?,
        Suite::Orthonormality => orthonormality(&mut b, opts, ctx)?,
    }
    Ok(b.finish(suite, ctx))
}

pub const CROSS_CHECK_POINTS: [f64; 7] = [0.0, 0.5, -0.5, 1.0, -1.0, 2.0, -2.0];

/// `|direct - recurrence| / max(|recurrence|, 1)`.
pub fn cross_representation_gap(n: usize, x: f64, ctx: &PrecisionContext) -> QResult<f64> {
    let w = ctx.work_prec();
    let xf = Float::with_val(w, x);
    let coeff = hermite2_coeffs(n, ctx).eval_float(&xf);
    let direct = hermite2_eval_direct(n, &CFloat::from_real(xf), ctx)?;
    let mut d = CFloat::from_real(coeff.clone());
    d -= &direct;
    let scale = Float::with_val(w, coeff.abs_ref()).max(&Float::with_val(w, 1));
    Ok((d.abs() / scale).to_f64())
}

fn recurrence(b: &mut Builder, o: &VerifyOptions, ctx: &PrecisionContext) -> QResult<()> {
    let tol = o.tol.unwrap_or(1e-25);
    let n_max = o.n_max.unwrap_or(15);
    for n in 0..=n_max {
        for x in CROSS_CHECK_POINTS {
            let g = cross_representation_gap(n, x, ctx)?;
            b.check("direct-vs-recurrence", format!("n={n} x={x}"), g, tol);
        }
    }
    for x in CROSS_CHECK_POINTS {
        let xf = ctx.float(x);
        let seq = psi_sequence(n_max, &xf, ctx)?;
        let worst = seq
            .iter()
            .enumerate()
            .map(|(n, v)| {
                let p = psi_eval(n, &xf, ctx);
                let d = Float::with_val(64, v - &p).abs();
                (d / Float::with_val(64, p.abs_ref()).max(&Float::with_val(64, 1))).to_f64()
            })
            .fold(0f64, f64::max);
        b.check(
            "normalized-recurrence",
            format!("n<={n_max} x={x}"),
            worst,
            tol,
        );
    }
    Ok(())
}

fn int_poly(c: &[i64]) -> PolySeries<Rational> {
    PolySeries::new(c.iter().map(|&v| Rational::from(v)).collect())
}

const POLY_PAIRS: [(&[i64], &[i64]); 3] = [
    (&[1, 2, 3], &[0, -1, 0, 4]),
    (&[0, 0, 1], &[5, 0, -2]),
    (&[3, -1, 0, 0, 2], &[1, 1]),
];

fn qcalculus(b: &mut Builder, o: &VerifyOptions, ctx: &PrecisionContext) -> QResult<()> {
    let tol = o.tol.unwrap_or(1e-20);
    let gex = |t: &Float| gen_exponential(t, ctx);
    let mut worst = 0f64;
    for k in 1..=20 {
        let x = ctx.float(k) / 10u32;
        let d = deformed_derivative(&gex, &x, ctx)?;
        worst = worst.max(rel(&d, &gex(&x)?));
    }
    b.check(
        "deformed-derivative-fixes-gex",
        "x in 0.1..2.0".into(),
        worst,
        tol,
    );

    let q = ctx.q();
    for (i, (u, v)) in POLY_PAIRS.iter().enumerate() {
        let (u, v) = (int_poly(u), int_poly(v));
        let (r1, r2) = leibniz_residuals_exact(&u, &v, q);
        let nz = |p: &PolySeries<Rational>| if p.is_zero() { 0.0 } else { 1.0 };
        b.check(
            "leibniz-first-form",
            format!("pair {i}, exact"),
            nz(&r1),
            0.0,
        );
        b.check(
            "leibniz-second-form",
            format!("pair {i}, exact"),
            nz(&r2),
            0.0,
        );
        let uf = |t: &Float| Ok(u.eval_float(t));
        let vf = |t: &Float| Ok(v.eval_float(t));
        let opts = HatOptions {
            downward: 200,
            ..Default::default()
        };
        for var in [IbpVariant::Ip1, IbpVariant::Ip2] {
            let r = ibp_residual(
                Integrand::Function(&uf),
                Integrand::Function(&vf),
                var,
                &Endpoint::Finite(ctx.float(1.25)),
                &opts,
                ctx,
            )?;
            let scale = Float::with_val(64, r.rhs.abs_ref()).max(&Float::with_val(64, 1e-300));
            b.check(
                "integration-by-parts",
                format!("pair {i} {var:?} a=1.25"),
                (Float::with_val(64, &r.residual) / scale).to_f64(),
                tol,
            );
        }
        let x = Rational::from((7, 5));
        let j = jackson_fundamental_residual_exact(&u, &x, q);
        b.check(
            "jackson-inverts-q-derivative",
            format!("poly {i} x=7/5, exact"),
            if j == 0 { 0.0 } else { 1.0 },
            0.0,
        );
    }

    // hat integral of D[1/(-x;q)_inf] is -1
    let big_f = |t: &Float| -> QResult<Float> {
        let a = CFloat::from_real(Float::with_val(ctx.work_prec(), -t));
        Ok(q_pochhammer_inf(&a, ctx)?.value.re.recip())
    };
    let df = |t: &Float| deformed_derivative(&big_f, t, ctx);
    let opts = HatOptions {
        upward: o.k_depth,
        downward: o.tail,
        ..Default::default()
    };
    let s = hat_q_integral(Integrand::Function(&df), &opts, ctx)?;
    // F(y) ~ 1 - y/(1-q) near 0, so the dropped bottom of the lattice costs about q^{M+1}/(1-q)
    let qf = ctx.qf().to_f64();
    let cut = float_pow(&ctx.qf(), o.tail as i64 + 1).to_f64() * 2.0 / (1.0 - qf);
    b.check(
        "hat-fundamental-theorem",
        format!("K={} M={}", o.k_depth, o.tail),
        Float::with_val(s.value.prec(), &s.value + 1u32)
            .abs()
            .to_f64(),
        cut + 1e-30,
    );
    Ok(())
}

fn commutators(b: &mut Builder, o: &VerifyOptions, ctx: &PrecisionContext) -> QResult<()> {
    let dim = o.dim.unwrap_or(16);
    let r = algebra_report(dim, ctx)?;
    for c in &r.checks {
        b.check(
            &c.identity,
            format!("dim={dim} block={} ratio to bound", r.valid_block),
            c.max_ratio,
            1.0,
        );
    }
    let ok = spectrum_paths_agree_exact(dim, ctx.q());
    b.check(
        "spectrum-two-forms-exact",
        format!("n<={dim}"),
        if ok { 0.0 } else { 1.0 },
        0.0,
    );
    Ok(())
}

fn generating(b: &mut Builder, o: &VerifyOptions, ctx: &PrecisionContext) -> QResult<()> {
    let tol = o.tol.unwrap_or(1e-20);
    let order = o.n_max.unwrap_or(10);
    let x = ctx.float(o.x);
    let tau = CFloat::from_f64(ctx.work_prec(), 0.3, 0.0);
    let r = generating_fn_report(&x, &tau, order, tol, ctx)?;
    for h in &r.hypotheses {
        b.diagnostic(
            "generating-weight",
            format!("{} x={} order<={order}", h.label, o.x),
            h.max_residual,
            tol,
        );
    }
    b.check(
        "closed-form-vs-taylor",
        format!("tau=0.3 order={order}"),
        r.closed_form_vs_taylor,
        1e-3,
    );
    let xr = Rational::from_f64(o.x).unwrap_or_default();
    let first: Vec<String> = WeightHypothesis::MENU
        .iter()
        .map(|h| {
            let m = first_exact_mismatch(&xr, order, ctx.q(), *h);
            format!(
                "{}: {}",
                h.label(),
                m.map_or("none".into(), |v| format!("order {v}"))
            )
        })
        .collect();
    b.observe(
        "generating-weight",
        format!(
            "c_1/h_1 = {:?}; first exact mismatch: {}",
            r.order_one_ratio,
            first.join(", ")
        ),
    );
    Ok(())
}

fn qdiff(b: &mut Builder, o: &VerifyOptions, ctx: &PrecisionContext) {
    let n_max = o.n_max.unwrap_or(4);
    let mut seen = Vec::new();
    for n in 0..=n_max {
        let r = qdiff_equation_check(n, ctx.q());
        let nonzero = r
            .coeffs()
            .iter()
            .filter(|c| !crate::arith::Ring::is_zero(*c))
            .count();
        b.diagnostic(
            "qdiff-residual",
            format!("n={n} nonzero coefficients"),
            nonzero as f64,
            0.0,
        );
        seen.push(format!("n={n}: {r}"));
    }
    b.observe("qdiff-equation", seen.join("; "));
}

fn moments(b: &mut Builder, o: &VerifyOptions, ctx: &PrecisionContext) -> QResult<()> {
    let tol = o.tol.unwrap_or(1e-8);
    let n_max = o.n_max.unwrap_or(8);
    let g = lattice_weight(o.k_depth, o.tail, ctx)?;
    let ms = (0..=n_max as u32)
        .map(|n| moment_in(n, &g, ctx))
        .collect::<QResult<Vec<_>>>()?;
    for m in &ms {
        b.check(
            "moment-closed-form",
            format!("n={} K={} M={}", m.n, o.k_depth, o.tail),
            m.relative_deviation,
            tol,
        );
    }
    b.check(
        "moment-telescoping",
        format!("n<={n_max}"),
        telescoping_defect(&ms, ctx)?,
        tol,
    );
    b.diagnostic(
        "weight-recursion-residual",
        "relative".into(),
        g.residual_max,
        1e-30,
    );
    b.diagnostic(
        "weight-seed-stability",
        "relative".into(),
        g.stability_change,
        ctx.series_tol().to_f64(),
    );
    Ok(())
}

fn unity(b: &mut Builder, o: &VerifyOptions, ctx: &PrecisionContext) -> QResult<()> {
    let tol = o.tol.unwrap_or(1e-6);
    let n_max = o.n_max.unwrap_or(6);
    let g = lattice_weight(o.k_depth, o.tail, ctx)?;
    let r = unity_check(n_max, &g, ctx)?;
    for (n, v) in r.diagonal.iter().enumerate() {
        b.check("unity-diagonal", format!("n={n}"), (v - 1.0).abs(), tol);
    }
    b.check(
        "unity-off-diagonal",
        "angular symmetry".into(),
        if r.off_diagonal_exact_zero { 0.0 } else { 1.0 },
        0.0,
    );
    b.diagnostic(
        "negative-weights",
        "count".into(),
        r.negative_weights as f64,
        0.0,
    );
    Ok(())
}

fn orthonormality(b: &mut Builder, o: &VerifyOptions, ctx: &PrecisionContext) -> QResult<()> {
    let tol = o.tol.unwrap_or(1e-3);
    let r = extremal_report(o.bound, 4, ctx)?;
    for (m, row) in r.gram.iter().enumerate() {
        for (n, v) in row.iter().enumerate() {
            let target = if m == n { 1.0 } else { 0.0 };
            b.check(
                "extremal-gram",
                format!("m={m} n={n} bound={}", o.bound),
                (v - target).abs(),
                tol,
            );
        }
    }
    b.check(
        "root-stability",
        "depth doubling".into(),
        r.root_shift_under_doubling,
        1e-10,
    );
    b.diagnostic(
        "loading-vs-christoffel",
        "max relative gap".into(),
        r.max_loading_gap,
        1e-6,
    );
    b.diagnostic(
        "total-mass",
        format!("{} roots", r.points.len()),
        (r.total_mass - 1.0).abs(),
        tol,
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx(q: &str) -> PrecisionContext {
        PrecisionContext::parse(q, 256).unwrap()
    }

    #[test]
    fn suite_names_round_trip() {
        for s in Suite::ALL {
            assert_eq!(s.name().parse::<Suite>().unwrap(), s);
        }
        assert!("nope".parse::<Suite>().is_err());
    }

    #[test]
    fn ledger_always_present() {
        let r = run_suite(
            Suite::Commutators,
            &VerifyOptions {
                dim: Some(6),
                ..Default::default()
            },
            &ctx("0.5"),
        )
        .unwrap();
        assert!(r.pass);
        assert_eq!(r.ledger.len(), discrepancy_ledger().len());
    }

    #[test]
    fn diagnostic_suites_pass_overall() {
        let c = ctx("0.5");
        let q = run_suite(Suite::Qdiff, &VerifyOptions::default(), &c).unwrap();
        assert!(q.pass);
        assert!(!q.checks[1].pass && q.checks[0].pass);
        let obs = q.ledger.iter().find(|e| e.id == "qdiff-equation").unwrap();
        assert!(obs.observed.as_ref().unwrap().contains("n=1"));
        let g = run_suite(Suite::Generating, &VerifyOptions::default(), &c).unwrap();
        assert!(g.pass);
        let matching: Vec<_> = g
            .checks
            .iter()
            .filter(|c| c.diagnostic && c.pass)
            .map(|c| c.params.clone())
            .collect();
        assert_eq!(matching.len(), 1);
        assert!(matching[0].starts_with("divided-with-qpower-2"));
    }

    #[test]
    fn numeric_suites_pass() {
        let c = ctx("0.5");
        for s in [
            Suite::Recurrence,
            Suite::Qcalculus,
            Suite::Moments,
            Suite::Unity,
        ] {
            let r = run_suite(s, &VerifyOptions::default(), &c).unwrap();
            let bad: Vec<_> = r
                .checks
                .iter()
                .filter(|c| !c.pass && !c.diagnostic)
                .collect();
            assert!(r.pass, "{s}: {bad:?}");
        }
    }
}
