use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use qosc::coherent::{cs_coeffs, cs_eigen_residual};
use qosc::context::parse_rational;
use qosc::extremal::extremal_report;
use qosc::format::decimal;
use qosc::qhermite::{hermite2_eval_exact, psi_eval};
use qosc::qkernel::{b_coeff, q_pochhammer_exact};
use qosc::qmeasure::{build_measure, lattice_weight, MeasureVariable};
use qosc::qoscillator::spectrum_exact;
use qosc::verify::{run_suite, Suite, VerifyOptions};
use qosc::{arith::rat_pow, CFloat, PrecisionContext, QError};
use rug::{Float, Rational};
use serde_json::{json, Value};

const SCHEMA_VERSION: u32 = 1;

#[derive(Parser)]
#[command(
    name = "qh",
    version,
    about = "Discrete q-Hermite II oscillator toolkit"
)]
struct Cli {
    /// Deformation parameter, "p/q" or decimal; parsed exactly.
    #[arg(long, global = true, default_value = "0.5")]
    q: String,
    #[arg(long, global = true, env = "QH_PRECISION_BITS", default_value_t = 256)]
    precision_bits: u32,
    /// Overrides the check tolerance of the selected suite.
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolyKind {
    Hermite,
    Psi,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum TableWhat {
    Spectrum,
    Bn,
    Moments,
}

#[derive(Clone, Copy, ValueEnum)]
enum MeasureType {
    Jackson,
    Extremal,
}

#[derive(Clone, Copy, ValueEnum)]
enum Variable {
    Y,
    X,
    ZRadial,
}

#[derive(Subcommand)]
enum Cmd {
    /// Evaluate h_n and the normalized Psi_n at one or more points.
    Poly {
        #[arg(long)]
        n: usize,
        #[arg(long, required = true, allow_negative_numbers = true)]
        x: Vec<String>,
        #[arg(long, value_enum, default_value_t = PolyKind::Both)]
        kind: PolyKind,
    },
    /// Tabulate the spectrum, b_n or the moments for n = 0..=n_max.
    Table {
        #[arg(long, value_enum)]
        what: TableWhat,
        #[arg(long, default_value_t = 10)]
        n_max: usize,
    },
    /// Run a verification suite.
    Verify {
        #[arg(long)]
        suite: String,
        #[arg(long)]
        dim: Option<usize>,
        #[arg(long)]
        n_max: Option<usize>,
        #[arg(long, default_value_t = 60)]
        k_depth: usize,
        #[arg(long, default_value_t = 120)]
        tail: usize,
        #[arg(long, default_value_t = 100.0)]
        bound: f64,
        #[arg(long, default_value_t = 0.7, allow_negative_numbers = true)]
        x: f64,
    },
    /// Truncated coherent state and its eigen-residual.
    Cs {
        #[arg(long, allow_negative_numbers = true)]
        z_re: String,
        #[arg(long, default_value = "0", allow_negative_numbers = true)]
        z_im: String,
        #[arg(long, default_value_t = 60)]
        trunc: usize,
    },
    /// Export a discrete measure as (support, weight) rows.
    Measure {
        #[arg(long = "type", value_enum)]
        kind: MeasureType,
        #[arg(long, value_enum, default_value_t = Variable::Y)]
        variable: Variable,
        #[arg(long, default_value_t = 60)]
        k_depth: usize,
        #[arg(long, default_value_t = 120)]
        tail: usize,
        #[arg(long, default_value_t = 100.0)]
        bound: f64,
    },
}

struct Output {
    json: Value,
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
    pass: bool,
}

impl Output {
    fn table(json: Value, header: Vec<&'static str>, rows: Vec<Vec<String>>) -> Self {
        Self {
            json,
            header,
            rows,
            pass: true,
        }
    }

    fn render(&self, format: Format) -> String {
        match format {
            Format::Json => {
                let mut s = serde_json::to_string_pretty(&self.json).expect("json");
                s.push('\n');
                s
            }
            Format::Csv => {
                let mut s = self.header.join(",");
                s.push('\n');
                for r in &self.rows {
                    s.push_str(&r.join(","));
                    s.push('\n');
                }
                s
            }
        }
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn digits(bits: u32) -> usize {
    (bits as f64 * std::f64::consts::LOG10_2).ceil() as usize + 1
}

struct Run {
    ctx: PrecisionContext,
    digits: usize,
    tol: Option<f64>,
}

impl Run {
    // rounded to the requested precision first so that parsing the string back
    // at that precision recovers the same float
    fn dec(&self, v: &Float) -> String {
        decimal(&self.ctx.round(v), self.digits)
    }

    fn rat(&self, v: &Rational) -> String {
        self.dec(&Float::with_val(self.ctx.work_prec(), v))
    }

    fn envelope(&self, command: &str) -> serde_json::Map<String, Value> {
        let mut m = serde_json::Map::new();
        m.insert("schema_version".into(), json!(SCHEMA_VERSION));
        m.insert("command".into(), json!(command));
        m.insert("q".into(), json!(self.ctx.q().to_string()));
        m.insert("precision_bits".into(), json!(self.ctx.precision_bits()));
        m
    }

    fn rows_json(header: &[&str], rows: &[Vec<String>]) -> Value {
        Value::Array(
            rows.iter()
                .map(|r| {
                    Value::Object(
                        header
                            .iter()
                            .zip(r)
                            .map(|(h, v)| (h.to_string(), json!(v)))
                            .collect(),
                    )
                })
                .collect(),
        )
    }

    fn tabular(
        &self,
        command: &str,
        extra: &[(&str, Value)],
        header: Vec<&'static str>,
        rows: Vec<Vec<String>>,
    ) -> Output {
        let mut m = self.envelope(command);
        for (k, v) in extra {
            m.insert(k.to_string(), v.clone());
        }
        m.insert("rows".into(), Self::rows_json(&header, &rows));
        Output::table(Value::Object(m), header, rows)
    }
}

fn poly(run: &Run, n: usize, xs: &[String], kind: PolyKind) -> Result<Output, QError> {
    let ctx = &run.ctx;
    let header: Vec<&'static str> = match kind {
        PolyKind::Hermite => vec!["n", "x", "hermite"],
        PolyKind::Psi => vec!["n", "x", "psi"],
        PolyKind::Both => vec!["n", "x", "hermite", "psi"],
    };
    let mut rows = Vec::new();
    for xs in xs {
        let xr = parse_rational(xs)?;
        let xf = Float::with_val(ctx.work_prec(), &xr);
        let mut row = vec![n.to_string(), run.rat(&xr)];
        if !matches!(kind, PolyKind::Psi) {
            row.push(run.rat(&hermite2_eval_exact(n, &xr, ctx.q())));
        }
        if !matches!(kind, PolyKind::Hermite) {
            row.push(run.dec(&psi_eval(n, &xf, ctx)));
        }
        rows.push(row);
    }
    Ok(run.tabular("poly", &[], header, rows))
}

fn table(run: &Run, what: TableWhat, n_max: usize) -> Result<Output, QError> {
    let ctx = &run.ctx;
    let q = ctx.q();
    let (name, rows): (&str, Vec<Vec<String>>) = match what {
        TableWhat::Spectrum => (
            "spectrum",
            spectrum_exact(n_max, q)
                .iter()
                .enumerate()
                .map(|(n, v)| vec![n.to_string(), run.rat(v)])
                .collect(),
        ),
        TableWhat::Bn => (
            "bn",
            (0..=n_max as i64)
                .map(|n| Ok(vec![n.to_string(), run.dec(&b_coeff(n, ctx)?)]))
                .collect::<Result<_, QError>>()?,
        ),
        TableWhat::Moments => (
            "moments",
            (0..=n_max as u32)
                .map(|n| {
                    let v = rat_pow(q, -((n * n) as i64)) * q_pochhammer_exact(q, n, q);
                    vec![n.to_string(), run.rat(&v)]
                })
                .collect(),
        ),
    };
    Ok(run.tabular("table", &[("what", json!(name))], vec!["n", "value"], rows))
}

fn verify(run: &Run, suite: &str, opts: VerifyOptions) -> Result<Output, QError> {
    let suite: Suite = suite.parse()?;
    let report = run_suite(suite, &opts, &run.ctx)?;
    let mut m = run.envelope("verify");
    if let Value::Object(r) = serde_json::to_value(&report).expect("json") {
        m.extend(r);
    }
    let header = vec!["id", "params", "residual", "bound", "pass", "diagnostic"];
    let rows = report
        .checks
        .iter()
        .map(|c| {
            vec![
                c.id.clone(),
                csv_field(&c.params),
                format!("{:e}", c.residual),
                format!("{:e}", c.bound),
                c.pass.to_string(),
                c.diagnostic.to_string(),
            ]
        })
        .collect();
    Ok(Output {
        json: Value::Object(m),
        header,
        rows,
        pass: report.pass,
    })
}

fn cs(run: &Run, re: &str, im: &str, trunc: usize) -> Result<Output, QError> {
    let ctx = &run.ctx;
    let w = ctx.work_prec();
    let z = CFloat::new(
        Float::with_val(w, &parse_rational(re)?),
        Float::with_val(w, &parse_rational(im)?),
    );
    let state = cs_coeffs(&z, trunc, ctx)?;
    let res = cs_eigen_residual(&z, trunc, ctx)?;
    let header = vec!["n", "re", "im"];
    let rows: Vec<Vec<String>> = state
        .coeffs
        .iter()
        .enumerate()
        .map(|(n, c)| vec![n.to_string(), run.dec(&c.re), run.dec(&c.im)])
        .collect();
    let extra = [
        ("z", json!([run.dec(&z.re), run.dec(&z.im)])),
        ("trunc", json!(trunc)),
        ("norm_sq", json!(run.dec(&state.norm_sq))),
        ("tail_bound", json!(run.dec(&state.tail_bound))),
        ("residual", json!(res.residual)),
        ("residual_bound", json!(res.bound)),
        ("within_bound", json!(res.within_bound)),
    ];
    let mut out = run.tabular("cs", &extra, header, rows);
    out.pass = res.within_bound;
    Ok(out)
}

fn measure(
    run: &Run,
    kind: MeasureType,
    variable: Variable,
    k_depth: usize,
    tail: usize,
    bound: f64,
) -> Result<Output, QError> {
    let ctx = &run.ctx;
    match kind {
        MeasureType::Jackson => {
            let v = match variable {
                Variable::Y => MeasureVariable::Y,
                Variable::X => MeasureVariable::X,
                Variable::ZRadial => MeasureVariable::ZRadial,
            };
            let g = lattice_weight(k_depth, tail, ctx)?;
            let m = build_measure(v, &g, ctx)?;
            let header = vec!["branch", "exponent", "support", "weight"];
            let rows = m
                .exponents
                .iter()
                .zip(m.support.iter().zip(&m.weights))
                .enumerate()
                .map(|(i, (e, (s, wt)))| {
                    let branch = if i < m.upward_len {
                        "upward"
                    } else {
                        "downward"
                    };
                    vec![branch.into(), e.to_string(), run.dec(s), run.dec(wt)]
                })
                .collect();
            let extra = [
                ("type", json!("jackson")),
                ("variable", json!(m.variable)),
                ("k_depth", json!(k_depth)),
                ("tail", json!(tail)),
                ("negative_weights", json!(m.negative_weights())),
            ];
            Ok(run.tabular("measure", &extra, header, rows))
        }
        MeasureType::Extremal => {
            let r = extremal_report(bound, 4, ctx)?;
            let header = vec!["x", "loading", "christoffel"];
            let rows = r
                .points
                .iter()
                .map(|p| {
                    vec![
                        run.dec(&p.x_exact),
                        run.dec(&p.loading_exact),
                        format!("{:e}", p.christoffel),
                    ]
                })
                .collect();
            let extra = [
                ("type", json!("extremal")),
                ("bound", json!(bound)),
                ("total_mass", json!(r.total_mass)),
                ("gram_max_deviation", json!(r.gram_max_deviation)),
                (
                    "root_shift_under_doubling",
                    json!(r.root_shift_under_doubling),
                ),
            ];
            Ok(run.tabular("measure", &extra, header, rows))
        }
    }
}

fn usage_class(e: &QError) -> bool {
    matches!(
        e,
        QError::Domain(_) | QError::InvalidContext(_) | QError::Parse(_)
    )
}

fn kind_name(e: &QError) -> &'static str {
    match e {
        QError::Domain(_) => "domain",
        QError::Overflow { .. } => "overflow",
        QError::FormalSeries(_) => "formal_series",
        QError::NoConvergence { .. } => "no_convergence",
        QError::Truncation { .. } => "truncation",
        QError::Instability { .. } => "instability",
        QError::DegenerateRoot { .. } => "degenerate_root",
        QError::AlgebraViolation { .. } => "algebra_violation",
        QError::InvalidContext(_) => "invalid_context",
        QError::Parse(_) => "parse",
    }
}

fn dispatch(cli: &Cli) -> Result<Output, QError> {
    let ctx = PrecisionContext::parse(&cli.q, cli.precision_bits)?;
    let run = Run {
        digits: digits(cli.precision_bits),
        ctx,
        tol: cli.tol,
    };
    match &cli.cmd {
        Cmd::Poly { n, x, kind } => poly(&run, *n, x, *kind),
        Cmd::Table { what, n_max } => table(&run, *what, *n_max),
        Cmd::Verify {
            suite,
            dim,
            n_max,
            k_depth,
            tail,
            bound,
            x,
        } => {
            let opts = VerifyOptions {
                n_max: *n_max,
                dim: *dim,
                tol: run.tol,
                k_depth: *k_depth,
                tail: *tail,
                bound: *bound,
                x: *x,
            };
            verify(&run, suite, opts)
        }
        Cmd::Cs { z_re, z_im, trunc } => cs(&run, z_re, z_im, *trunc),
        Cmd::Measure {
            kind,
            variable,
            k_depth,
            tail,
            bound,
        } => measure(&run, *kind, *variable, *k_depth, *tail, *bound),
    }
}

fn command_name(cmd: &Cmd) -> String {
    match cmd {
        Cmd::Poly { .. } => "poly".into(),
        Cmd::Table { .. } => "table".into(),
        Cmd::Verify { suite, .. } => format!("verify:{suite}"),
        Cmd::Cs { .. } => "cs".into(),
        Cmd::Measure { .. } => "measure".into(),
    }
}

fn emit(path: Option<&PathBuf>, text: &str) -> std::io::Result<()> {
    match path {
        Some(p) => fs::write(p, text),
        None => std::io::stdout().lock().write_all(text.as_bytes()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(out) => {
            if let Err(e) = emit(cli.out.as_ref(), &out.render(cli.format)) {
                eprintln!("qh: cannot write output: {e}");
                return ExitCode::from(3);
            }
            if out.pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            let obj = json!({
                "schema_version": SCHEMA_VERSION,
                "error": {
                    "kind": kind_name(&e),
                    "message": e.to_string(),
                    "command": command_name(&cli.cmd),
                }
            });
            println!("{}", serde_json::to_string_pretty(&obj).expect("json"));
            eprintln!("qh: {e}");
            ExitCode::from(if usage_class(&e) { 2 } else { 3 })
        }
    }
}
