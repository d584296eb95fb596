mod config;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chiamp::appendix::{
    exact_identity_audit, incomplete_audit, lemma1_audit, lemma1_exclusion_audit, lemma2_bound_audit,
    parseval_audit,
};
use chiamp::chi_formula::{
    decomposition_audit, diagonal_audit, formula_audit, pi0_audit, scan_row, ScanRow, DECOMPOSITION_TOL,
};
use chiamp::expsums::{factorization_audit, gauss_audit, weil_audit};
use chiamp::{load_coefficients, make_bump, rankin_selberg_audit, AuditReport, CoefficientSource, Registry};
use clap::{Args, Parser, Subcommand};

use config::{ConfigError, Resolver, SuiteConfig};

#[derive(Parser)]
#[command(name = "chiamp", version, about = "Exact identities and exhaustive bound audits for character amplification")]
struct Cli {
    /// TOML file with per-suite defaults; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file (JSON report, CSV table or registry); stdout if absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Frozen-constant registry to audit against instead of the shipped one.
    #[arg(long, global = true)]
    registry: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exact identities.
    #[command(subcommand)]
    Verify(Verify),
    /// Bound audits against frozen constants.
    Audit(AuditArgs),
    /// Empirical |F| and |O| against their envelopes, as CSV.
    Scan(ScanArgs),
    /// Fourier tables and coefficient files.
    #[command(subcommand)]
    Export(Export),
}

#[derive(Subcommand)]
enum Verify {
    /// Additive formula for chi(u) over every primitive character and unit.
    ChiFormula {
        #[arg(long = "q", value_delimiter = ',')]
        q: Vec<u64>,
        #[arg(long = "R", value_delimiter = ',')]
        r: Vec<f64>,
    },
    /// Sigma = F - eps^-1 O and the amplified-sum identity.
    Decomposition {
        #[arg(long = "q", value_delimiter = ',')]
        q: Vec<u64>,
        #[arg(long = "R")]
        r: Option<f64>,
        #[arg(long = "S")]
        s: Option<u64>,
        #[arg(long = "T")]
        t: Option<u64>,
    },
    /// Period sum, double sum and Ramanujan prediction of Pi_0.
    Pi0 {
        #[arg(long = "q", value_delimiter = ',')]
        q: Vec<u64>,
        #[arg(long)]
        max: Option<u64>,
    },
    /// Kloosterman factorization over every d | c.
    Factorization {
        #[arg(long)]
        c_max: Option<u64>,
    },
    /// Correlation closed form for (p, p^2).
    ClosedForm {
        #[arg(long = "p", value_delimiter = ',')]
        p: Vec<u64>,
    },
    /// Correlation sums against their dual form.
    DualForm {
        #[arg(long)]
        l_max: Option<u64>,
    },
}

#[derive(Args)]
struct AuditArgs {
    /// Refit the frozen constants on the calibration grids and write the
    /// registry instead of auditing.
    #[arg(long)]
    refit: bool,
    #[command(subcommand)]
    suite: Option<AuditSuite>,
}

#[derive(Subcommand)]
enum AuditSuite {
    /// |S(a,b;p)| <= 2 sqrt(p).
    Weil {
        #[arg(long)]
        c_max: Option<u64>,
    },
    /// Unit magnitude of normalized Gauss sums.
    Gauss {
        #[arg(long)]
        q_max: Option<u64>,
    },
    /// Rational-phase sums, stationary phase and Hensel counts.
    Lemma1 {
        #[arg(long)]
        s_max: Option<u64>,
    },
    /// Rational-phase sums with one class excluded.
    Lemma1Excluded {
        #[arg(long)]
        s_max: Option<u64>,
    },
    /// Kloosterman correlation bounds.
    Lemma2 {
        #[arg(long)]
        s_max: Option<u64>,
    },
    /// Smoothed correlations, direct and via Poisson summation.
    Incomplete {
        #[arg(long)]
        l_max: Option<u64>,
        #[arg(long = "x", value_delimiter = ',')]
        x: Vec<f64>,
    },
    /// Dyadic mean-square growth of the coefficients.
    RankinSelberg {
        #[arg(long)]
        x_max: Option<u64>,
    },
    /// Diagonal tuple counts against the divisor bound.
    Diagonal {
        #[arg(long = "st", value_delimiter = ',')]
        st: Vec<u64>,
        #[arg(long = "h", value_delimiter = ',')]
        h: Vec<u64>,
    },
}

#[derive(Args)]
struct ScanArgs {
    #[arg(long = "q", value_delimiter = ',')]
    q: Vec<u64>,
    #[arg(long = "N", value_delimiter = ',')]
    n: Vec<f64>,
    #[arg(long = "R", value_delimiter = ',')]
    r: Vec<f64>,
    #[arg(long = "S", value_delimiter = ',')]
    s: Vec<u64>,
    #[arg(long = "T", value_delimiter = ',')]
    t: Vec<u64>,
    /// Character exponent k, chi(g^j) = e(k j / (q - 1)).
    #[arg(long)]
    k: Option<u64>,
    /// Coefficient CSV (n,re,im); the d3 stand-in if absent.
    #[arg(long)]
    coefficients: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Export {
    /// Tabulated transform of the bump weight as xi,re,im.
    Fourier {
        #[arg(long)]
        xi_max: Option<f64>,
        #[arg(long)]
        step: Option<f64>,
    },
    /// d3 coefficients as n,re,im.
    Coefficients {
        #[arg(long)]
        range: Option<u64>,
    },
}

enum Failure {
    Config(String),
    Numerical(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.0)
    }
}

impl From<chiamp::Error> for Failure {
    fn from(e: chiamp::Error) -> Self {
        use chiamp::Error as E;
        match e {
            E::QuadratureFailure { .. } | E::TruncationInsufficient { .. } => Failure::Numerical(e.to_string()),
            _ => Failure::Config(e.to_string()),
        }
    }
}

/// Exit status of a finished run.
enum Outcome {
    Pass,
    Violations,
}

struct Context {
    file: Option<toml::Table>,
    out: Option<PathBuf>,
    registry: Registry,
    registry_hash: String,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::Violations) => ExitCode::from(1),
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(m)) => {
            eprintln!("numerical failure: {m}");
            ExitCode::from(3)
        }
    }
}

fn run(cli: Cli) -> Result<Outcome, Failure> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::Config("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Config(e.to_string()))?;
    }
    let file = cli.config.as_deref().map(config::load).transpose()?;
    let (registry, registry_hash) = match &cli.registry {
        Some(path) => Registry::load(path)?,
        None => (Registry::builtin(), Registry::builtin_hash()),
    };
    let ctx = Context {
        file,
        out: cli.out,
        registry,
        registry_hash,
    };
    match cli.command {
        Command::Verify(v) => verify(&ctx, v),
        Command::Audit(a) => audit(&ctx, a),
        Command::Scan(s) => scan(&ctx, s),
        Command::Export(e) => export(&ctx, e),
    }
}

fn resolver(ctx: &Context, section: &str) -> Result<Resolver, Failure> {
    Ok(Resolver::new(ctx.file.as_ref(), section)?)
}

fn verify(ctx: &Context, v: Verify) -> Result<Outcome, Failure> {
    let (cfg, report) = match v {
        Verify::ChiFormula { q, r } => {
            let mut res = resolver(ctx, "verify.chi-formula")?;
            let q = res.list("q", q, vec![13])?;
            let r = res.list("R", r, vec![4.0])?;
            (res.finish(), formula_audit(&q, &r)?)
        }
        Verify::Decomposition { q, r, s, t } => {
            let mut res = resolver(ctx, "verify.decomposition")?;
            let q = res.list("q", q, vec![29, 53])?;
            let r = res.get("R", r, 4.0)?;
            let s = res.get("S", s, 2)?;
            let t = res.get("T", t, 2)?;
            (res.finish(), decomposition_audit(&q, r, s, t)?)
        }
        Verify::Pi0 { q, max } => {
            let mut res = resolver(ctx, "verify.pi0")?;
            let q = res.list("q", q, vec![5, 7, 11, 13])?;
            let max = res.get("max", max, 6)?;
            (res.finish(), pi0_audit(&q, max)?)
        }
        Verify::Factorization { c_max } => {
            let mut res = resolver(ctx, "verify.factorization")?;
            let c_max = res.get("c-max", c_max, 100)?;
            (res.finish(), factorization_audit(c_max)?)
        }
        Verify::ClosedForm { p } => {
            let mut res = resolver(ctx, "verify.closed-form")?;
            let p = res.list("p", p, vec![3, 5, 7, 11, 13])?;
            let pairs: Vec<(u64, u64)> = p.iter().map(|&p| (p, p * p)).collect();
            (res.finish(), exact_identity_audit(&pairs)?)
        }
        Verify::DualForm { l_max } => {
            let mut res = resolver(ctx, "verify.dual-form")?;
            let l_max = res.get("l-max", l_max, 256)?;
            (res.finish(), parseval_audit(l_max)?)
        }
    };
    emit(ctx, &cfg, report)
}

fn audit(ctx: &Context, a: AuditArgs) -> Result<Outcome, Failure> {
    if a.refit {
        if a.suite.is_some() {
            return Err(Failure::Config("--refit takes no suite".into()));
        }
        let (reg, observed) = chiamp::calibrate::refit(&Default::default())?;
        for (k, v) in &observed {
            eprintln!("{k:24} observed {v:.6}");
        }
        write_out(ctx.out.as_deref(), &reg.to_toml())?;
        return Ok(Outcome::Pass);
    }
    let Some(suite) = a.suite else {
        return Err(Failure::Config("audit needs a suite or --refit".into()));
    };
    let reg = &ctx.registry;
    let (cfg, report) = match suite {
        AuditSuite::Weil { c_max } => {
            let mut res = resolver(ctx, "audit.weil")?;
            let c_max = res.get("c-max", c_max, 200)?;
            (res.finish(), weil_audit(c_max)?)
        }
        AuditSuite::Gauss { q_max } => {
            let mut res = resolver(ctx, "audit.gauss")?;
            let q_max = res.get("q-max", q_max, 101)?;
            (res.finish(), gauss_audit(q_max)?)
        }
        AuditSuite::Lemma1 { s_max } => {
            let mut res = resolver(ctx, "audit.lemma1")?;
            let s_max = res.get("s-max", s_max, 343)?;
            (res.finish(), lemma1_audit(s_max, reg)?)
        }
        AuditSuite::Lemma1Excluded { s_max } => {
            let mut res = resolver(ctx, "audit.lemma1-excluded")?;
            let s_max = res.get("s-max", s_max, 128)?;
            (res.finish(), lemma1_exclusion_audit(s_max, reg)?)
        }
        AuditSuite::Lemma2 { s_max } => {
            let mut res = resolver(ctx, "audit.lemma2")?;
            let s_max = res.get("s-max", s_max, 256)?;
            (res.finish(), lemma2_bound_audit(s_max, reg)?)
        }
        AuditSuite::Incomplete { l_max, x } => {
            let mut res = resolver(ctx, "audit.incomplete")?;
            let l_max = res.get("l-max", l_max, 100)?;
            let x = res.list("x", x, vec![10.0, 100.0, 1000.0])?;
            let v = chiamp::InertFunction::standard();
            (res.finish(), incomplete_audit(l_max, &x, &v, reg)?)
        }
        AuditSuite::RankinSelberg { x_max } => {
            let mut res = resolver(ctx, "audit.rankin-selberg")?;
            let x_max = res.get("x-max", x_max, 1 << 17)?;
            let src = CoefficientSource::ternary_divisor(x_max);
            (res.finish(), rankin_selberg_audit(&src, x_max)?)
        }
        AuditSuite::Diagonal { st, h } => {
            let mut res = resolver(ctx, "audit.diagonal")?;
            let st = res.list("st", st, vec![1, 2, 4, 8])?;
            let h = res.list("h", h, vec![1, 2, 4, 8, 16])?;
            (res.finish(), diagonal_audit(&st, &h)?)
        }
    };
    emit(ctx, &cfg, report)
}

fn scan(ctx: &Context, a: ScanArgs) -> Result<Outcome, Failure> {
    let mut res = resolver(ctx, "scan")?;
    let qs = res.list("q", a.q, vec![29])?;
    let ns = res.list("N", a.n, vec![100.0])?;
    let rs = res.list("R", a.r, vec![4.0])?;
    let ss = res.list("S", a.s, vec![2])?;
    let ts = res.list("T", a.t, vec![2])?;
    let k = res.get("k", a.k, 1)?;
    let coeffs: Option<String> = res.get("coefficients", a.coefficients.map(|p| Some(p.display().to_string())), None)?;
    let _cfg = res.finish();

    let n_top = ns.iter().fold(0.0f64, |m, n| m.max(*n));
    let lambda = match coeffs {
        Some(path) => load_coefficients(Path::new(&path))?,
        None => CoefficientSource::ternary_divisor((4.0 * n_top).ceil() as u64 + 1),
    };
    let mut grid = Vec::new();
    for &q in &qs {
        for &n in &ns {
            for &r in &rs {
                for &s in &ss {
                    for &t in &ts {
                        grid.push((q, n, r, s, t));
                    }
                }
            }
        }
    }
    let rows: Vec<ScanRow> = grid
        .iter()
        .map(|&(q, n, r, s, t)| scan_row(&lambda, q, k, n, r, s, t))
        .collect::<chiamp::Result<_>>()?;

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "q",
        "N",
        "R",
        "S",
        "T",
        "sigma_abs",
        "f_abs",
        "o_abs",
        "residual",
        "predicted_F_envelope",
        "predicted_O_envelope",
    ])
    .map_err(|e| Failure::Config(e.to_string()))?;
    let mut bad = 0;
    for r in &rows {
        if !(r.residual <= DECOMPOSITION_TOL) {
            bad += 1;
        }
        w.write_record([
            r.q.to_string(),
            r.n.to_string(),
            r.r.to_string(),
            r.s.to_string(),
            r.t.to_string(),
            r.sigma_abs.to_string(),
            r.f_abs.to_string(),
            r.o_abs.to_string(),
            r.residual.to_string(),
            r.predicted_f_envelope.to_string(),
            r.predicted_o_envelope.to_string(),
        ])
        .map_err(|e| Failure::Config(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Failure::Config(e.to_string()))?;
    write_out(ctx.out.as_deref(), &String::from_utf8(bytes).expect("csv is utf-8"))?;
    eprintln!("scan: {} rows, {} above residual tolerance {DECOMPOSITION_TOL:e}", rows.len(), bad);
    Ok(if bad == 0 { Outcome::Pass } else { Outcome::Violations })
}

fn export(ctx: &Context, e: Export) -> Result<Outcome, Failure> {
    let text = match e {
        Export::Fourier { xi_max, step } => {
            let mut res = resolver(ctx, "export.fourier")?;
            let xi_max = res.get("xi-max", xi_max, 64.0)?;
            let step = res.get("step", step, 0.01)?;
            if !(xi_max > 0.0 && step > 0.0) {
                return Err(Failure::Config("xi-max and step must be positive".into()));
            }
            make_bump().table(xi_max, step)?.to_csv_string()
        }
        Export::Coefficients { range } => {
            let mut res = resolver(ctx, "export.coefficients")?;
            let range = res.get("range", range, 1000)?;
            if range == 0 {
                return Err(Failure::Config("range must be positive".into()));
            }
            let mut out = String::from("n,re,im\n");
            let src = CoefficientSource::ternary_divisor(range);
            for n in 1..=range {
                let v = src.at(n);
                out.push_str(&format!("{n},{:?},{:?}\n", v.re, v.im));
            }
            out
        }
    };
    write_out(ctx.out.as_deref(), &text)?;
    Ok(Outcome::Pass)
}

fn emit(ctx: &Context, cfg: &SuiteConfig, mut report: AuditReport) -> Result<Outcome, Failure> {
    report.stamp(&cfg.hash(), &ctx.registry_hash);
    write_out(ctx.out.as_deref(), &report.to_json())?;
    eprintln!(
        "{}: checked {}, max {:.6e} (threshold {:e}), {} violations",
        report.suite, report.checked, report.max_ratio, report.threshold, report.violation_count
    );
    for (k, v) in &report.recorded {
        eprintln!("  {k:36} {v:.6e}");
    }
    Ok(if report.passed() { Outcome::Pass } else { Outcome::Violations })
}

fn write_out(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    let io = |e: std::io::Error| Failure::Config(format!("cannot write output: {e}"));
    match path {
        Some(p) => std::fs::write(p, text).map_err(io),
        None => std::io::stdout().write_all(text.as_bytes()).map_err(io),
    }
}
