use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use holokit::experiments::{load_domain, run_experiment, version, ExperimentConfig, ExperimentKind, SequenceSpec};
use holokit::{Error, Point, Result};
use num_complex::Complex64 as C64;

#[derive(Parser)]
#[command(name = "holokit", version, about = "Invariant metric and scaling experiments on polynomial domains")]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Subcommand)]
enum Verb {
    /// Kobayashi and Caratheodory infinitesimal metrics at a point.
    Metric(Common),
    /// Kobayashi distance between two points (give --point twice).
    Distance(Common),
    /// Scaled domains along a boundary-approaching sequence.
    Scale(Common),
    /// Kobayashi ball sandwiched between anisotropic regions.
    Sandwich(Common),
    /// Herbort pseudodistance fit on seeded near-boundary pairs.
    Herbort(Common),
    /// Fridman invariant upper bounds along a sequence.
    Fridman(Common),
    /// Metric stability on the scaled domains.
    Stability(Common),
    /// Fridman bounds approaching a polydisc corner.
    Corner(Common),
    /// Check a domain description or an experiment config.
    Validate(ValidateArgs),
}

#[derive(Args)]
struct Common {
    /// Experiment config (JSON); command-line flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Preset name, domain JSON file or inline JSON.
    #[arg(long)]
    domain: Option<String>,
    /// Comma-separated complex coordinates, e.g. `0.1+0.2i,-0.5`.
    #[arg(long)]
    point: Vec<String>,
    /// Tangent vector, same format as --point.
    #[arg(long)]
    dir: Option<String>,
    /// `normal:1e-1,1e-2` or `normal:dyadic:6:0.1` (mode `normal` or `tangential-mix`).
    #[arg(long)]
    seq: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for the CSV and JSON reports.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Wall-clock budget in seconds.
    #[arg(long)]
    budget: Option<f64>,
    /// Kobayashi ball radius (sandwich).
    #[arg(long)]
    radius: Option<f64>,
    /// Number of pairs (herbort).
    #[arg(long)]
    pairs: Option<usize>,
    /// Model domain `ball` or `polydisc` (fridman).
    #[arg(long)]
    model: Option<String>,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    domain: Option<String>,
    #[arg(long)]
    config: Option<PathBuf>,
}

fn parse_point(s: &str) -> Result<Point> {
    s.split(',')
        .map(|t| C64::from_str(&t.trim().replace(' ', "")).map_err(|_| Error::InvalidArgument(format!("bad complex number {t:?}"))))
        .collect()
}

fn build_config(kind: ExperimentKind, a: Common) -> Result<ExperimentConfig> {
    let mut cfg = match &a.config {
        Some(p) => {
            let c = ExperimentConfig::from_json(&std::fs::read_to_string(p)?)?;
            if c.kind != kind {
                return Err(Error::InvalidArgument(format!("config is for {}, not {}", c.kind.name(), kind.name())));
            }
            c
        }
        None => {
            let seed = a.seed.ok_or_else(|| Error::InvalidArgument("--seed is required".into()))?;
            let domain = a.domain.clone().ok_or_else(|| Error::InvalidArgument("--domain is required".into()))?;
            ExperimentConfig::new(kind, &domain, seed)
        }
    };
    if let Some(d) = a.domain {
        cfg.domain = d;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if !a.point.is_empty() {
        cfg.points = a.point.iter().map(|p| parse_point(p)).collect::<Result<_>>()?;
    }
    if let Some(v) = a.dir {
        cfg.direction = Some(parse_point(&v)?);
    }
    if let Some(s) = a.seq {
        cfg.sequence = Some(SequenceSpec::parse(&s)?);
    }
    if a.out.is_some() {
        cfg.out = a.out;
    }
    if a.budget.is_some() {
        cfg.budget = a.budget;
    }
    if let Some(r) = a.radius {
        cfg.radius = r;
    }
    if let Some(p) = a.pairs {
        cfg.pairs = p;
    }
    if let Some(m) = a.model {
        cfg.model = m;
    }
    Ok(cfg)
}

fn validate(a: ValidateArgs) -> Result<()> {
    if let Some(p) = a.config {
        let cfg = ExperimentConfig::from_json(&std::fs::read_to_string(p)?)?;
        cfg.validate()?;
        load_domain(&cfg.domain)?;
        println!("config ok: {} on {}", cfg.kind.name(), cfg.domain);
    }
    if let Some(d) = a.domain {
        let dom = load_domain(&d)?;
        println!("domain ok: {} (n = {}, class {}, type {:?})", dom.name, dom.n(), dom.class.name(), dom.declared_type);
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let (kind, args) = match cli.verb {
        Verb::Validate(a) => return validate(a),
        Verb::Metric(a) => (ExperimentKind::Metric, a),
        Verb::Distance(a) => (ExperimentKind::Distance, a),
        Verb::Scale(a) => (ExperimentKind::Scale, a),
        Verb::Sandwich(a) => (ExperimentKind::Sandwich, a),
        Verb::Herbort(a) => (ExperimentKind::Herbort, a),
        Verb::Fridman(a) => (ExperimentKind::Fridman, a),
        Verb::Stability(a) => (ExperimentKind::Stability, a),
        Verb::Corner(a) => (ExperimentKind::Corner, a),
    };
    let cfg = build_config(kind, args)?;
    let out = run_experiment(&cfg)?;
    if out.files.is_empty() {
        print!("{}", holokit::experiments::render_csv(&out.rows)?);
    } else {
        for f in &out.files {
            eprintln!("wrote {}", f.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    if let Some(n) = std::env::var("HOLOKIT_THREADS").ok().and_then(|s| s.parse::<usize>().ok()) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("holokit {}: error: {e}", version());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
