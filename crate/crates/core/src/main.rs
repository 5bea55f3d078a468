use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use tracephase::cutoff::Cutoff;
use tracephase::error::{Error, Result};
use tracephase::functionals::{combined_h, pointwise_h, pointwise_j, polydisc, uniform_h};
use tracephase::harness::{self, ExperimentConfig, FieldRef, PinnedConstants};
use tracephase::numberfield::NumberField;
use tracephase::phases::{embed_polynomial, eval_phase, grad_phase, PolySpec, TracePolynomial};
use tracephase::quadrature::oscillatory_integral;
use tracephase::tarry::{classify_eta, standard_cutoff};

#[derive(Parser)]
#[command(name = "tracephase", version, about = "Oscillatory integrals with trace-form phases over number fields")]
struct Cli {
    #[arg(long, global = true, env = "TRACEPHASE_SEED", default_value_t = 42)]
    seed: u64,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, env = "TRACEPHASE_THREADS", default_value_t = 0)]
    threads: usize,
    #[arg(long, global = true, env = "TRACEPHASE_TOL", default_value_t = 1e-7)]
    tol: f64,
    /// Output directory for CSV, JSON and manifest files.
    #[arg(long, global = true, env = "TRACEPHASE_OUT")]
    out: Option<PathBuf>,
    /// Pinned constants file (defaults to the bundled fixture).
    #[arg(long, global = true, env = "TRACEPHASE_PINS")]
    pins: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct FieldArg {
    /// Preset (Q, Q(sqrt2), Q(i), Q(cbrt2)), JSON file or inline JSON.
    #[arg(long, default_value = "Q")]
    field: String,
}

#[derive(Args, Clone)]
struct PolyArg {
    /// Polynomial as inline JSON or a path, e.g. '{"n":1,"coeffs":{"(2)":["1"]}}'.
    #[arg(long)]
    poly: String,
}

#[derive(Args, Clone)]
struct CutoffArg {
    #[arg(long, default_value_t = 0.5)]
    rho1: f64,
    #[arg(long, default_value_t = 1.0)]
    rho2: f64,
}

#[derive(Subcommand)]
enum Cmd {
    /// Field data: degree, signature, embeddings, structure and trace form.
    Field {
        #[command(subcommand)]
        cmd: FieldCmd,
    },
    /// Phase values, gradients and embedded components.
    Phase {
        #[command(subcommand)]
        cmd: PhaseCmd,
    },
    /// H functionals.
    Hfunc {
        #[command(subcommand)]
        cmd: HCmd,
    },
    /// J functional at a point.
    Jfunc {
        #[command(subcommand)]
        cmd: JCmd,
    },
    /// Polydisc radii at a point.
    Polydisc {
        #[command(flatten)]
        field: FieldArg,
        #[command(flatten)]
        poly: PolyArg,
        #[arg(long = "S", value_delimiter = ',')]
        s: Vec<usize>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x: Vec<f64>,
        #[arg(long, default_value_t = 1.0)]
        c: f64,
    },
    /// Greedy disjoint polydisc cover and its overlap number.
    Cover {
        #[command(flatten)]
        field: FieldArg,
        #[command(flatten)]
        poly: PolyArg,
        #[arg(long = "S", value_delimiter = ',')]
        s: Vec<usize>,
        #[arg(long, default_value_t = 0.05)]
        eps: f64,
        #[command(flatten)]
        cutoff: CutoffArg,
    },
    /// Oscillatory integral with a radial cutoff.
    Integrate {
        #[command(flatten)]
        field: FieldArg,
        #[command(flatten)]
        poly: PolyArg,
        #[command(flatten)]
        cutoff: CutoffArg,
    },
    /// Decay of |I| against H_S along a stock family.
    VerifyMain {
        /// rationals, sqrt2, gaussian or sqrt2-degenerate.
        #[arg(long, default_value = "sqrt2")]
        family: String,
    },
    /// Monte Carlo sublevel measure over an ε sweep.
    Sublevel {
        #[command(flatten)]
        field: FieldArg,
        #[command(flatten)]
        poly: PolyArg,
        #[arg(long = "S", value_delimiter = ',')]
        s: Vec<usize>,
        /// One multi-index per embedding in S, e.g. "(3)".
        #[arg(long, value_delimiter = ';')]
        alpha: Vec<String>,
        #[arg(long, value_delimiter = ',')]
        eps: Vec<f64>,
        #[arg(long)]
        mu: f64,
        #[arg(long, default_value_t = 1_000_000)]
        samples: u64,
    },
    /// Tarry-problem experiments.
    Tarry {
        #[command(subcommand)]
        cmd: TarryCmd,
    },
    /// Run an experiment twice and record its constants.
    Pin {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run an experiment from a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Subcommand)]
enum FieldCmd {
    Info {
        #[command(flatten)]
        field: FieldArg,
    },
}

#[derive(Subcommand)]
enum PhaseCmd {
    Eval {
        #[command(flatten)]
        field: FieldArg,
        #[command(flatten)]
        poly: PolyArg,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x: Vec<f64>,
    },
    Grad {
        #[command(flatten)]
        field: FieldArg,
        #[command(flatten)]
        poly: PolyArg,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x: Vec<f64>,
    },
    Embed {
        #[command(flatten)]
        field: FieldArg,
        #[command(flatten)]
        poly: PolyArg,
        #[arg(long)]
        sigma: usize,
    },
}

#[derive(Subcommand)]
enum HCmd {
    Point {
        #[command(flatten)]
        field: FieldArg,
        #[command(flatten)]
        poly: PolyArg,
        #[arg(long)]
        sigma: usize,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x: Vec<f64>,
    },
    Uniform {
        #[command(flatten)]
        field: FieldArg,
        #[command(flatten)]
        poly: PolyArg,
        #[arg(long)]
        sigma: usize,
        #[command(flatten)]
        cutoff: CutoffArg,
    },
    Combined {
        #[command(flatten)]
        field: FieldArg,
        #[command(flatten)]
        poly: PolyArg,
        #[arg(long = "S", value_delimiter = ',')]
        s: Vec<usize>,
        #[command(flatten)]
        cutoff: CutoffArg,
    },
}

#[derive(Subcommand)]
enum JCmd {
    Point {
        #[command(flatten)]
        field: FieldArg,
        #[command(flatten)]
        poly: PolyArg,
        #[arg(long)]
        sigma: usize,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x: Vec<f64>,
    },
}

#[derive(Subcommand)]
enum TarryCmd {
    /// Classify η = (η_1, …, η_n), given as a flat list of kn coordinates.
    Classify {
        #[command(flatten)]
        field: FieldArg,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        eta: Vec<f64>,
    },
    Sfrak {
        #[command(flatten)]
        field: FieldArg,
        #[arg(long, default_value_t = 2)]
        n: usize,
        #[arg(long = "S", value_delimiter = ',')]
        s: Vec<usize>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        alpha: Vec<i32>,
        #[arg(long, default_value_t = 20_000)]
        samples: u64,
    },
    Lq {
        #[command(flatten)]
        field: FieldArg,
        #[arg(long, default_value_t = 2)]
        n: usize,
        #[arg(long, value_delimiter = ',')]
        q: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        shells: Vec<i32>,
    },
    Sharpness {
        #[command(flatten)]
        field: FieldArg,
        #[arg(long, default_value_t = 2)]
        n: usize,
        /// JSON file with keys A, m_min, m_max, a, c1, seed.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 24)]
        trials: usize,
    },
}

fn read_arg(s: &str) -> Result<String> {
    let t = s.trim_start();
    if t.starts_with('{') || t.starts_with('[') {
        Ok(s.to_string())
    } else {
        Ok(std::fs::read_to_string(s)?)
    }
}

fn field_of(a: &FieldArg) -> Result<NumberField> {
    let r = if a.field.trim_start().starts_with('{') {
        FieldRef::Inline(serde_json::from_str(&a.field)?)
    } else {
        FieldRef::Named(a.field.clone())
    };
    Ok(r.resolve()?.0)
}

fn field_ref(a: &FieldArg) -> Result<FieldRef> {
    if a.field.trim_start().starts_with('{') {
        Ok(FieldRef::Inline(serde_json::from_str(&a.field)?))
    } else {
        Ok(FieldRef::Named(a.field.clone()))
    }
}

fn poly_of(p: &PolyArg, k: usize) -> Result<TracePolynomial> {
    TracePolynomial::from_json(&read_arg(&p.poly)?, k)
}

fn poly_value(p: &PolyArg) -> Result<Value> {
    let spec: PolySpec = serde_json::from_str(&read_arg(&p.poly)?)?;
    Ok(serde_json::to_value(spec)?)
}

fn cutoff(field: &NumberField, f: &TracePolynomial, c: &CutoffArg) -> Result<Cutoff> {
    Cutoff::centered(field.degree() * f.nvars(), c.rho1, c.rho2)
}

fn print(v: Value) {
    println!("{}", serde_json::to_string_pretty(&v).expect("serializable"));
}

fn experiment(cli: &Cli, name: &str, field: Option<FieldRef>, params: Vec<(&str, Value)>) -> Result<()> {
    let mut cfg = ExperimentConfig {
        experiment: name.into(),
        field,
        seed: cli.seed,
        tol: cli.tol,
        params: Default::default(),
        output: cli.out.clone(),
    };
    for (k, v) in params {
        cfg.params.insert(k.into(), v);
    }
    run_config(cli, cfg)
}

fn pins(cli: &Cli) -> Result<PinnedConstants> {
    match &cli.pins {
        Some(p) => PinnedConstants::load(p),
        None => Ok(PinnedConstants::bundled()),
    }
}

fn run_config(cli: &Cli, mut cfg: ExperimentConfig) -> Result<()> {
    if cli.out.is_some() {
        cfg.output = cli.out.clone();
    }
    let p = pins(cli)?;
    let res = harness::run(&cfg, Some(&p));
    match &res {
        Ok(out) if cfg.output.is_none() => print!("{}", out.table.to_csv()?),
        _ => {}
    }
    res.map(|_| ())
}

fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.cmd {
        Cmd::Field { cmd: FieldCmd::Info { field } } => {
            let k = field_of(field)?;
            let t = k.trace_form();
            print(json!({
                "degree": k.degree(),
                "signature": k.signature(),
                "roots": k.roots().iter().map(|z| [z.re, z.im]).collect::<Vec<_>>(),
                "trace_form": t.iter().map(|r| r.iter().map(|c| c.to_string()).collect::<Vec<_>>()).collect::<Vec<_>>(),
                "discriminant": [k.discriminant().re, k.discriminant().im],
                "classes": k.classes(),
            }));
        }
        Cmd::Phase { cmd } => match cmd {
            PhaseCmd::Eval { field, poly, x } => {
                let k = field_of(field)?;
                let f = poly_of(poly, k.degree())?;
                check_len(x, k.degree() * f.nvars())?;
                print(json!({"phase": eval_phase(&k, &f, x)}));
            }
            PhaseCmd::Grad { field, poly, x } => {
                let k = field_of(field)?;
                let f = poly_of(poly, k.degree())?;
                check_len(x, k.degree() * f.nvars())?;
                print(json!({"gradient": grad_phase(&k, &f, x)?}));
            }
            PhaseCmd::Embed { field, poly, sigma } => {
                let k = field_of(field)?;
                let f = poly_of(poly, k.degree())?;
                let p = embed_polynomial(&k, &f, *sigma)?;
                let terms: serde_json::Map<String, Value> =
                    p.terms.iter().map(|(m, c)| (m.to_string(), json!([c.re, c.im]))).collect();
                print(json!({"sigma": sigma, "coeffs": terms}));
            }
        },
        Cmd::Hfunc { cmd } => match cmd {
            HCmd::Point { field, poly, sigma, x } => {
                let k = field_of(field)?;
                let f = poly_of(poly, k.degree())?;
                check_len(x, k.degree() * f.nvars())?;
                print(serde_json::to_value(pointwise_h(&k, &f, *sigma, x)?)?);
            }
            HCmd::Uniform { field, poly, sigma, cutoff: c } => {
                let k = field_of(field)?;
                let f = poly_of(poly, k.degree())?;
                let psi = cutoff(&k, &f, c)?;
                print(serde_json::to_value(uniform_h(&k, &f, *sigma, &psi, None)?)?);
            }
            HCmd::Combined { field, poly, s, cutoff: c } => {
                let k = field_of(field)?;
                let f = poly_of(poly, k.degree())?;
                let psi = cutoff(&k, &f, c)?;
                print(serde_json::to_value(combined_h(&k, &f, s, &psi, None)?)?);
            }
        },
        Cmd::Jfunc { cmd: JCmd::Point { field, poly, sigma, x } } => {
            let k = field_of(field)?;
            let f = poly_of(poly, k.degree())?;
            check_len(x, k.degree() * f.nvars())?;
            print(serde_json::to_value(pointwise_j(&k, &f, *sigma, x)?)?);
        }
        Cmd::Polydisc { field, poly, s, x, c } => {
            let k = field_of(field)?;
            let f = poly_of(poly, k.degree())?;
            check_len(x, k.degree() * f.nvars())?;
            let p = polydisc(&k, &f, s, x, *c)?;
            print(json!({"center": p.center, "radii": p.radii(), "classes": k.classes()}));
        }
        Cmd::Cover { field, poly, s, eps, cutoff: c } => {
            let s: Vec<usize> = if s.is_empty() { (0..field_of(field)?.degree()).collect() } else { s.clone() };
            experiment(
                cli,
                "cover",
                Some(field_ref(field)?),
                vec![("poly", poly_value(poly)?), ("S", json!(s)), ("eps", json!(eps)), ("rho", json!([c.rho1, c.rho2]))],
            )?;
        }
        Cmd::Integrate { field, poly, cutoff: c } => {
            let k = field_of(field)?;
            let f = poly_of(poly, k.degree())?;
            let psi = cutoff(&k, &f, c)?;
            print(serde_json::to_value(oscillatory_integral(&k, &f, &psi, cli.tol)?)?);
        }
        Cmd::VerifyMain { family } => experiment(cli, "verify-main", None, vec![("family", json!(family))])?,
        Cmd::Sublevel { field, poly, s, alpha, eps, mu, samples } => {
            if s.len() != alpha.len() {
                return Err(Error::ConfigInvalid("one --alpha per embedding in --S".into()));
            }
            let conds: Vec<Value> = s.iter().zip(alpha).map(|(sg, a)| json!({"sigma": sg, "alpha": a, "mu": mu})).collect();
            experiment(
                cli,
                "sublevel",
                Some(field_ref(field)?),
                vec![("poly", poly_value(poly)?), ("conditions", json!(conds)), ("eps", json!(eps)), ("samples", json!(samples))],
            )?;
        }
        Cmd::Tarry { cmd } => match cmd {
            TarryCmd::Classify { field, eta } => {
                let k = field_of(field)?;
                if eta.is_empty() || eta.len() % k.degree() != 0 {
                    return Err(Error::DimensionMismatch { expected: k.degree(), got: eta.len() });
                }
                let blocks: Vec<Vec<f64>> = eta.chunks(k.degree()).map(|c| c.to_vec()).collect();
                print(serde_json::to_value(classify_eta(&k, &blocks, &standard_cutoff(k.degree()), None)?)?);
            }
            TarryCmd::Sfrak { field, n, s, alpha, samples } => experiment(
                cli,
                "tarry-sfrak",
                Some(field_ref(field)?),
                vec![("n", json!(n)), ("S", json!(s)), ("alpha", json!(alpha)), ("samples", json!(samples))],
            )?,
            TarryCmd::Lq { field, n, q, shells } => {
                let mut params = vec![("n", json!(n))];
                if !q.is_empty() {
                    params.push(("q", json!(q)));
                }
                if !shells.is_empty() {
                    params.push(("shells", json!(shells)));
                }
                experiment(cli, "tarry-lq", Some(field_ref(field)?), params)?
            }
            TarryCmd::Sharpness { field, n, config, trials } => {
                let mut params = vec![("n", json!(n)), ("trials", json!(trials))];
                if let Some(path) = config {
                    let v: serde_json::Map<String, Value> = serde_json::from_str(&std::fs::read_to_string(path)?)
                        .map_err(|e| Error::ConfigInvalid(e.to_string()))?;
                    for key in ["A", "m_min", "m_max", "a", "c1"] {
                        if let Some(x) = v.get(key) {
                            params.push((key, x.clone()));
                        }
                    }
                    if v.keys().any(|k| !["A", "m_min", "m_max", "a", "c1", "seed"].contains(&k.as_str())) {
                        return Err(Error::ConfigInvalid("unknown key in sharpness config".into()));
                    }
                    if let Some(seed) = v.get("seed").and_then(Value::as_u64) {
                        let mut cfg = ExperimentConfig::new("tarry-sharpness", "Q");
                        cfg.field = Some(field_ref(field)?);
                        cfg.seed = seed;
                        cfg.tol = cli.tol;
                        for (k, x) in params {
                            cfg.params.insert(k.into(), x);
                        }
                        return run_config(cli, cfg);
                    }
                }
                experiment(cli, "tarry-sharpness", Some(field_ref(field)?), params)?
            }
        },
        Cmd::Pin { config } => {
            let cfg = ExperimentConfig::load(config)?;
            let a = harness::execute(&cfg)?;
            let b = harness::execute(&cfg)?;
            let path = cli.pins.clone().unwrap_or_else(|| PathBuf::from("crates/core/fixtures/pinned_constants.json"));
            let mut p = if path.exists() { PinnedConstants::load(&path)? } else { PinnedConstants::default() };
            harness::pin_constants(&mut p, &a.measured, &b.measured)?;
            p.save(&path)?;
            print(serde_json::to_value(&a.measured)?);
        }
        Cmd::Run { config } => run_config(cli, ExperimentConfig::load(config)?)?,
    }
    Ok(())
}

fn check_len(x: &[f64], d: usize) -> Result<()> {
    if x.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: x.len() });
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::ConfigInvalid(_) | Error::Parse(_) => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
