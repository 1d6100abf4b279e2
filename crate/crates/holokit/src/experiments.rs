//! Experiment configs, drivers and report emission.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::boundary::{herbort_sandwich_fit, near_boundary_pairs, sandwich_constants, RegionLaw, SandwichConfig};
use crate::domain::{parse_domain_spec, preset_domain, Domain, DomainClass, PolyhedronSpec};
use crate::error::{Error, Result};
use crate::fridman::{fridman_boundary_experiment, fridman_corner_experiment, fridman_zero_cert, FridmanConfig, Model, ZeroCert};
use crate::linalg::{self, c, Point};
use crate::metrics::{
    caratheodory_inf_lower, closed_form_distance, closed_form_inf_metric, kobayashi_distance_estimate, kobayashi_inf_estimate, BoundKind,
    DiscConfig, LowerConfig, ModelKind, PathConfig,
};
use crate::report::{fmt17, num17};
use crate::scaling::catlin::limit_model;
use crate::scaling::{
    catlin_chart, catlin_scaled_domain, convex_scaled_domain, limit_polynomial, poly_json, siegel_model, spsc_scaled_domain, CatlinChart,
    Pipeline, ScalingEntry, ScalingRun,
};

/// `git describe`-style version string.
pub fn version() -> String {
    match option_env!("HOLOKIT_GIT_DESCRIBE") {
        Some(v) => v.to_string(),
        None => format!("v{}", env!("CARGO_PKG_VERSION")),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentKind {
    Metric,
    Distance,
    Scale,
    Sandwich,
    Herbort,
    Fridman,
    Stability,
    Corner,
}

impl ExperimentKind {
    pub fn parse(s: &str) -> Option<Self> {
        serde_json::from_value(Value::String(s.to_string())).ok()
    }

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Metric => "metric",
            ExperimentKind::Distance => "distance",
            ExperimentKind::Scale => "scale",
            ExperimentKind::Sandwich => "sandwich",
            ExperimentKind::Herbort => "herbort",
            ExperimentKind::Fridman => "fridman",
            ExperimentKind::Stability => "stability",
            ExperimentKind::Corner => "corner",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ApproachMode {
    /// Along the inward normal at the base boundary point.
    #[default]
    Normal,
    /// Normal offset `d` plus a complex-tangential offset `√d / 2`.
    TangentialMix,
}

/// Points approaching a boundary point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceSpec {
    #[serde(default)]
    pub mode: ApproachMode,
    /// Boundary distances, each in `(0, 1)`.
    pub distances: Vec<f64>,
}

impl SequenceSpec {
    /// `d_j = d0 2^{-j}` for `j = 1..=steps`.
    pub fn dyadic(mode: ApproachMode, steps: usize, d0: f64) -> Self {
        SequenceSpec { mode, distances: (1..=steps).map(|j| d0 * 0.5f64.powi(j as i32)).collect() }
    }

    /// Parses `normal:1e-1,1e-2` or `tangential-mix:dyadic:6:0.1`.
    pub fn parse(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("bad sequence spec {s:?}"));
        let (mode, rest) = s.split_once(':').ok_or_else(bad)?;
        let mode = match mode {
            "normal" => ApproachMode::Normal,
            "tangential-mix" => ApproachMode::TangentialMix,
            _ => return Err(bad()),
        };
        if let Some(r) = rest.strip_prefix("dyadic:") {
            let (steps, d0) = r.split_once(':').ok_or_else(bad)?;
            return Ok(SequenceSpec::dyadic(mode, steps.parse().map_err(|_| bad())?, d0.parse().map_err(|_| bad())?));
        }
        let distances = rest.split(',').map(|x| x.trim().parse::<f64>().map_err(|_| bad())).collect::<Result<_>>()?;
        Ok(SequenceSpec { mode, distances })
    }
}

/// Settings of the extremal-disc estimator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimatorConfig {
    /// Disc degree `N`, in `2..=64`.
    pub degree: usize,
    /// Boundary samples `M`, in `16..=4096`.
    pub samples: usize,
    /// Relative safety margin `η`, in `(0, 0.1)`.
    pub eta: f64,
    /// Optimizer budget per estimate, at least 1.
    pub iterations: usize,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        let d = DiscConfig::default();
        EstimatorConfig { degree: d.degree, samples: d.samples, eta: d.eta, iterations: d.iterations }
    }
}

impl EstimatorConfig {
    pub fn disc(&self, seed: u64) -> DiscConfig {
        DiscConfig { degree: self.degree, samples: self.samples, eta: self.eta, iterations: self.iterations, seed }
    }
}

fn default_radius() -> f64 {
    1.0
}

fn default_pairs() -> usize {
    20
}

fn default_model() -> String {
    "ball".into()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    /// Preset name (`ball:2`, `preset:egg:2`), a domain JSON document, or a path to one.
    pub domain: String,
    /// Interior points for `metric` / `distance`; the base boundary point for sequence experiments.
    #[serde(default)]
    pub points: Vec<Point>,
    #[serde(default)]
    pub direction: Option<Point>,
    #[serde(default)]
    pub sequence: Option<SequenceSpec>,
    #[serde(default)]
    pub estimator: EstimatorConfig,
    pub seed: u64,
    /// Wall-clock budget in seconds.
    #[serde(default)]
    pub budget: Option<f64>,
    /// Kobayashi ball radius for `sandwich`.
    #[serde(default = "default_radius")]
    pub radius: f64,
    /// Number of near-boundary pairs for `herbort`, at least 10.
    #[serde(default = "default_pairs")]
    pub pairs: usize,
    /// Region exponents for `sandwich`; the Catlin bidisc when absent on finite type domains.
    #[serde(default)]
    pub exponents: Option<Vec<f64>>,
    /// `ball` or `polydisc`, for `fridman`.
    #[serde(default = "default_model")]
    pub model: String,
    /// Output directory.
    #[serde(default)]
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(kind: ExperimentKind, domain: &str, seed: u64) -> Self {
        ExperimentConfig {
            kind,
            domain: domain.to_string(),
            points: Vec::new(),
            direction: None,
            sequence: None,
            estimator: EstimatorConfig::default(),
            seed,
            budget: None,
            radius: default_radius(),
            pairs: default_pairs(),
            exponents: None,
            model: default_model(),
            out: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Schema { offset: 0, msg: e.to_string() })
    }

    /// Every out-of-range parameter, in one error.
    pub fn validate(&self) -> Result<()> {
        let mut p = Vec::new();
        let e = &self.estimator;
        if !(2..=64).contains(&e.degree) {
            p.push(format!("estimator.degree {} not in 2..=64", e.degree));
        }
        if !(16..=4096).contains(&e.samples) {
            p.push(format!("estimator.samples {} not in 16..=4096", e.samples));
        }
        if !(e.eta > 0.0 && e.eta < 0.1) {
            p.push(format!("estimator.eta {} not in (0, 0.1)", e.eta));
        }
        if e.iterations == 0 {
            p.push("estimator.iterations must be positive".into());
        }
        if let Some(b) = self.budget {
            if !(b > 0.0) {
                p.push(format!("budget {b} must be positive"));
            }
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            p.push(format!("radius {} must be positive", self.radius));
        }
        if let Some(s) = &self.sequence {
            if s.distances.is_empty() {
                p.push("sequence has no distances".into());
            }
            if s.distances.iter().any(|d| !(*d > 0.0 && *d < 1.0)) {
                p.push("sequence distances must lie in (0, 1)".into());
            }
        }
        if let Some(x) = &self.exponents {
            if x.iter().any(|e| !(*e > 0.0)) {
                p.push("exponents must be positive".into());
            }
        }
        if Model::parse(&self.model).is_none() {
            p.push(format!("unknown model {:?}", self.model));
        }
        let need_points = match self.kind {
            ExperimentKind::Metric => 1,
            ExperimentKind::Distance => 2,
            _ => 0,
        };
        if self.points.len() < need_points {
            p.push(format!("{} needs {need_points} point(s)", self.kind.name()));
        }
        let needs_seq = matches!(
            self.kind,
            ExperimentKind::Scale | ExperimentKind::Sandwich | ExperimentKind::Fridman | ExperimentKind::Stability | ExperimentKind::Corner
        );
        if needs_seq && self.sequence.is_none() {
            p.push(format!("{} needs a sequence", self.kind.name()));
        }
        if self.kind == ExperimentKind::Herbort && self.pairs < 10 {
            p.push(format!("herbort needs at least 10 pairs, got {}", self.pairs));
        }
        if p.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(p))
        }
    }
}

/// Loads a domain from a preset name, an inline JSON document, or a JSON file.
pub fn load_domain(s: &str) -> Result<Domain> {
    let t = s.trim();
    if t.starts_with('{') || t.starts_with("preset:") {
        return parse_domain_spec(t);
    }
    let path = Path::new(t);
    if path.is_file() {
        return parse_domain_spec(&std::fs::read_to_string(path)?);
    }
    preset_domain(t)
}

/// Closed-form model kind when `d` is exactly a homogeneous preset.
pub fn model_kind(d: &Domain) -> Option<ModelKind> {
    let (kind, rest) = d.name.split_once(':').unwrap_or((d.name.as_str(), ""));
    let k = ModelKind::parse(kind)?;
    (rest.is_empty() || rest == d.n().to_string()).then_some(k)
}

/// Interpretation of a reported number.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Label {
    Exact,
    UpperBound,
    LowerBound,
    /// Fitted constant or ratio of estimates.
    Fitted,
    /// Input echo or bookkeeping.
    Input,
}

impl From<BoundKind> for Label {
    fn from(b: BoundKind) -> Self {
        match b {
            BoundKind::Exact => Label::Exact,
            BoundKind::UpperBound => Label::UpperBound,
            BoundKind::LowerBound => Label::LowerBound,
        }
    }
}

impl Label {
    pub fn name(self) -> &'static str {
        match self {
            Label::Exact => "Exact",
            Label::UpperBound => "UpperBound",
            Label::LowerBound => "LowerBound",
            Label::Fitted => "Fitted",
            Label::Input => "Input",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Quantity {
    pub name: String,
    pub value: f64,
    pub bound: Label,
}

/// One row of an experiment report.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReportRow {
    pub experiment: String,
    pub index: usize,
    pub inputs: Vec<Quantity>,
    pub outputs: Vec<Quantity>,
    /// Named slacks, nonnegative when the checked inequality holds.
    pub margins: Vec<(String, f64)>,
    /// Written to the timing sidecar only.
    pub wall_time: f64,
}

impl ReportRow {
    fn new(kind: ExperimentKind, index: usize) -> Self {
        ReportRow { experiment: kind.name().into(), index, inputs: Vec::new(), outputs: Vec::new(), margins: Vec::new(), wall_time: 0.0 }
    }

    fn input(mut self, name: &str, value: f64) -> Self {
        self.inputs.push(Quantity { name: name.into(), value, bound: Label::Input });
        self
    }

    fn output(mut self, name: &str, value: f64, bound: impl Into<Label>) -> Self {
        self.outputs.push(Quantity { name: name.into(), value, bound: bound.into() });
        self
    }

    fn margin(mut self, name: &str, value: f64) -> Self {
        self.margins.push((name.into(), value));
        self
    }

    fn header(&self) -> Vec<String> {
        let mut h = vec!["experiment".to_string(), "row".to_string()];
        h.extend(self.inputs.iter().map(|q| q.name.clone()));
        for q in &self.outputs {
            h.push(q.name.clone());
            h.push(format!("{}_bound", q.name));
        }
        h.extend(self.margins.iter().map(|(n, _)| format!("margin_{n}")));
        h
    }

    fn to_json(&self) -> Value {
        let mut m = Map::new();
        m.insert("experiment".into(), json!(self.experiment));
        m.insert("row".into(), json!(self.index));
        let q = |v: &[Quantity]| -> Value {
            Value::Array(v.iter().map(|q| json!({"name": q.name, "value": num17(q.value), "bound": q.bound.name()})).collect())
        };
        m.insert("inputs".into(), q(&self.inputs));
        m.insert("outputs".into(), q(&self.outputs));
        m.insert("margins".into(), Value::Array(self.margins.iter().map(|(n, v)| json!({"name": n, "value": num17(*v)})).collect()));
        Value::Object(m)
    }
}

fn csv_float(x: f64) -> String {
    if x.is_finite() {
        fmt17(x)
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

/// CSV with the column order of the first row; every row must share it.
pub fn render_csv(rows: &[ReportRow]) -> Result<String> {
    let first = rows.first().ok_or_else(|| Error::InvalidArgument("no report rows".into()))?;
    let header = first.header();
    let mut out = header.join(",");
    out.push('\n');
    for r in rows {
        if r.header() != header {
            return Err(Error::InvalidArgument(format!("row {} has a different column layout", r.index)));
        }
        let mut cells = vec![r.experiment.clone(), r.index.to_string()];
        cells.extend(r.inputs.iter().map(|q| csv_float(q.value)));
        for q in &r.outputs {
            cells.push(csv_float(q.value));
            cells.push(q.bound.name().into());
        }
        cells.extend(r.margins.iter().map(|(_, v)| csv_float(*v)));
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    Ok(out)
}

/// JSON summary: version, config echo, rows and experiment-specific results.
pub fn render_json(rows: &[ReportRow], cfg: &ExperimentConfig, summary: &Value) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::InvalidArgument("no report rows".into()));
    }
    let mut echo = serde_json::to_value(cfg).map_err(|e| Error::Assertion(e.to_string()))?;
    echo.as_object_mut().map(|m| m.remove("out"));
    let v = json!({
        "version": version(),
        "config": echo,
        "rows": rows.iter().map(ReportRow::to_json).collect::<Vec<_>>(),
        "summary": summary,
    });
    let mut s = serde_json::to_string_pretty(&v).map_err(|e| Error::Assertion(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

/// Writes `rows` to `path` in the given format.
pub fn emit_report(rows: &[ReportRow], format: Format, path: &Path, cfg: &ExperimentConfig, summary: &Value) -> Result<()> {
    let text = match format {
        Format::Csv => render_csv(rows)?,
        Format::Json => render_json(rows, cfg, summary)?,
    };
    std::fs::write(path, text)?;
    Ok(())
}

/// Everything a run produced.
#[derive(Clone, Debug)]
pub struct ExperimentOutput {
    pub rows: Vec<ReportRow>,
    pub summary: Value,
    pub files: Vec<PathBuf>,
}

struct Budget {
    start: Instant,
    limit: Option<f64>,
}

impl Budget {
    fn check(&self, what: &str) -> Result<()> {
        match self.limit {
            Some(l) if self.start.elapsed().as_secs_f64() > l => Err(Error::Budget(format!("{l} s exhausted before {what}"))),
            _ => Ok(()),
        }
    }
}

struct Run<'a> {
    cfg: &'a ExperimentConfig,
    budget: Budget,
    rows: Vec<ReportRow>,
    summary: Map<String, Value>,
    row_start: Instant,
}

impl Run<'_> {
    fn start_row(&mut self, what: &str) -> Result<()> {
        self.budget.check(what)?;
        self.row_start = Instant::now();
        Ok(())
    }

    fn push(&mut self, mut row: ReportRow) {
        row.wall_time = self.row_start.elapsed().as_secs_f64();
        self.rows.push(row);
    }

    fn row(&self) -> ReportRow {
        ReportRow::new(self.cfg.kind, self.rows.len())
    }
}

/// Runs an experiment and writes `<kind>.csv`, `<kind>.json` and `<kind>_timing.csv`
/// into `cfg.out` when set. Rows finished before an error are still written.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let mut run = Run {
        cfg,
        budget: Budget { start: Instant::now(), limit: cfg.budget },
        rows: Vec::new(),
        summary: Map::new(),
        row_start: Instant::now(),
    };
    let result = drive(&mut run);
    let summary = Value::Object(std::mem::take(&mut run.summary));
    let mut files = Vec::new();
    if let (Some(dir), false) = (&cfg.out, run.rows.is_empty()) {
        std::fs::create_dir_all(dir)?;
        let stem = cfg.kind.name();
        let csv = dir.join(format!("{stem}.csv"));
        emit_report(&run.rows, Format::Csv, &csv, cfg, &summary)?;
        let js = dir.join(format!("{stem}.json"));
        emit_report(&run.rows, Format::Json, &js, cfg, &summary)?;
        let timing = dir.join(format!("{stem}_timing.csv"));
        let mut t = String::from("row,wall_time\n");
        for r in &run.rows {
            let _ = writeln!(t, "{},{}", r.index, fmt17(r.wall_time));
        }
        std::fs::write(&timing, t)?;
        files.extend([csv, js, timing]);
    }
    result?;
    if run.rows.is_empty() {
        return Err(Error::Assertion("experiment produced no rows".into()));
    }
    Ok(ExperimentOutput { rows: run.rows, summary, files })
}

fn drive(run: &mut Run) -> Result<()> {
    let d = load_domain(&run.cfg.domain)?;
    run.summary.insert("domain".into(), json!(d.name));
    match run.cfg.kind {
        ExperimentKind::Metric => metric(run, &d),
        ExperimentKind::Distance => distance(run, &d),
        ExperimentKind::Scale => scale(run, &d),
        ExperimentKind::Sandwich => sandwich(run, &d),
        ExperimentKind::Herbort => herbort(run, &d),
        ExperimentKind::Fridman => fridman(run, &d),
        ExperimentKind::Stability => stability(run, &d),
        ExperimentKind::Corner => corner(run, &d),
    }
}

fn check_inside(d: &Domain, p: &[C64]) -> Result<()> {
    if p.len() != d.n() {
        return Err(Error::Precondition(format!("point has {} coordinates, domain has {}", p.len(), d.n())));
    }
    if !d.contains(p) {
        return Err(Error::Precondition(format!("point {} is not inside {}", fmt_point(p), d.name)));
    }
    Ok(())
}

fn fmt_point(p: &[C64]) -> String {
    let parts: Vec<String> = p.iter().map(|z| format!("{}{:+}i", z.re, z.im)).collect();
    format!("({})", parts.join(", "))
}

fn point_json(p: &[C64]) -> Value {
    Value::Array(p.iter().map(|z| json!([num17(z.re), num17(z.im)])).collect())
}

fn unit(n: usize, i: usize) -> Point {
    (0..n).map(|k| c((k == i) as u8 as f64, 0.0)).collect()
}

fn metric(run: &mut Run, d: &Domain) -> Result<()> {
    let cfg = run.cfg;
    let p = &cfg.points[0];
    check_inside(d, p)?;
    let v = cfg.direction.clone().unwrap_or_else(|| unit(d.n(), 0));
    if v.len() != d.n() || linalg::norm(&v) == 0.0 {
        return Err(Error::Precondition("direction must be a nonzero vector of the domain's dimension".into()));
    }
    run.start_row("metric")?;
    let upper = kobayashi_inf_estimate(d, p, &v, &cfg.estimator.disc(cfg.seed))?;
    let lower = caratheodory_inf_lower(d, p, &v, &LowerConfig { seed: cfg.seed, ..LowerConfig::default() })?;
    let mut row = run.row().output("kobayashi", upper.value, upper.bound).output("caratheodory", lower.value, lower.bound);
    row = row.margin("kobayashi_minus_caratheodory", upper.value - lower.value);
    if let Some(k) = model_kind(d) {
        let exact = closed_form_inf_metric(k, p, &v)?;
        row = row.output("closed_form", exact.value, exact.bound).margin("kobayashi_minus_exact", upper.value - exact.value);
    }
    run.summary.insert("flags".into(), json!([upper.flags, lower.flags]));
    run.push(row);
    if lower.value > upper.value * (1.0 + 1e-9) {
        return Err(Error::Assertion(format!("Caratheodory lower bound {} exceeds Kobayashi upper bound {}", lower.value, upper.value)));
    }
    Ok(())
}

fn distance(run: &mut Run, d: &Domain) -> Result<()> {
    let cfg = run.cfg;
    let (p, q) = (&cfg.points[0], &cfg.points[1]);
    check_inside(d, p)?;
    check_inside(d, q)?;
    run.start_row("distance")?;
    let disc = cfg.estimator.disc(cfg.seed);
    let path = PathConfig { report: disc.clone(), search: DiscConfig { iterations: disc.iterations.min(150), ..DiscConfig::cheap().with_seed(cfg.seed) }, ..PathConfig::default() };
    let est = kobayashi_distance_estimate(d, p, q, &path)?;
    let mut row = run.row().input("euclidean", linalg::dist(p, q)).output("kobayashi", est.value, est.bound);
    if let Some(k) = model_kind(d) {
        let exact = closed_form_distance(k, p, q)?;
        row = row.output("closed_form", exact, Label::Exact).margin("kobayashi_minus_exact", est.value - exact);
    }
    run.summary.insert("path".into(), Value::Array(est.path.iter().map(|z| point_json(z)).collect()));
    run.push(row);
    Ok(())
}

/// Boundary point for sequence experiments: the given one, or the exit of the
/// base point along `+e_n`.
fn base_boundary_point(run: &Run, d: &Domain) -> Result<Point> {
    let n = d.n();
    let z = match run.cfg.points.first() {
        Some(p) => p.clone(),
        None => {
            let t = d
                .ray_exit(&d.base_point, &unit(n, n - 1), 4.0 * d.bounding_radius + linalg::norm(&d.base_point))
                .ok_or_else(|| Error::Precondition("no boundary point along +e_n from the base point".into()))?;
            linalg::axpy(&d.base_point, t, &unit(n, n - 1))
        }
    };
    if z.len() != n {
        return Err(Error::Precondition(format!("boundary point has {} coordinates, domain has {n}", z.len())));
    }
    let r = d.rho(&z);
    if r.abs() > 1e-8 * d.rho_scale().max(1.0) {
        return Err(Error::Precondition(format!("{} is not a boundary point (rho = {r:e})", fmt_point(&z))));
    }
    Ok(z)
}

/// Sequence points with their nominal distances.
fn sequence_points(run: &Run, d: &Domain) -> Result<(Point, Vec<(f64, Point)>)> {
    let seq = run.cfg.sequence.as_ref().ok_or_else(|| Error::Precondition("a sequence is required".into()))?;
    let z0 = base_boundary_point(run, d)?;
    let inward = linalg::normalized(&linalg::scale_re(&d.real_gradient(&z0), -1.0));
    let g = d.wirtinger_gradient(&z0);
    let mut tangent = linalg::zeros(d.n());
    if d.n() >= 2 {
        tangent[0] = g[1];
        tangent[1] = -g[0];
    }
    let tangent = if linalg::norm(&tangent) > 0.0 { linalg::normalized(&tangent) } else { tangent };
    let mut out = Vec::new();
    for &dist in &seq.distances {
        let mut p = linalg::axpy(&z0, dist, &inward);
        if seq.mode == ApproachMode::TangentialMix {
            p = linalg::axpy(&p, 0.5 * dist.sqrt(), &tangent);
        }
        check_inside(d, &p)?;
        out.push((dist, p));
    }
    Ok((z0, out))
}

fn scaled_entry(d: &Domain, chart: Option<&CatlinChart>, p: &[C64]) -> Result<ScalingEntry> {
    match (d.class, chart) {
        (DomainClass::StronglyPseudoconvex, _) => spsc_scaled_domain(d, p),
        (_, Some(ch)) => catlin_scaled_domain(ch, p, d.declared_type.unwrap_or(2)),
        (DomainClass::ConvexFiniteType, None) => convex_scaled_domain(d, p),
        (cl, _) => Err(Error::Precondition(format!("no scaling pipeline for class {}", cl.name()))),
    }
}

fn pipeline(d: &Domain) -> Result<Pipeline> {
    match d.class {
        DomainClass::StronglyPseudoconvex => Ok(Pipeline::StronglyPseudoconvex),
        DomainClass::FiniteType2D | DomainClass::PolynomialModel => Ok(Pipeline::FiniteType2D),
        DomainClass::ConvexFiniteType => Ok(Pipeline::Convex),
        cl => Err(Error::Precondition(format!("no scaling pipeline for class {}", cl.name()))),
    }
}

fn chart_for(d: &Domain, z0: &[C64]) -> Result<Option<CatlinChart>> {
    match pipeline(d)? {
        Pipeline::FiniteType2D => Ok(Some(catlin_chart(d, z0)?)),
        _ => Ok(None),
    }
}

/// Scaled domains along the sequence, one row each.
fn scaling_rows(run: &mut Run, d: &Domain) -> Result<(Point, Vec<ScalingEntry>)> {
    let (z0, pts) = sequence_points(run, d)?;
    let chart = chart_for(d, &z0)?;
    let mut entries = Vec::new();
    for (dist, p) in &pts {
        run.start_row("scaling step")?;
        let e = scaled_entry(d, chart.as_ref(), p)?;
        let mut row = run.row().input("d", *dist).output("boundary_distance", e.boundary_distance, Label::Exact);
        for (k, s) in e.scales.iter().enumerate() {
            row = row.output(&format!("scale_{}", k + 1), *s, Label::Exact);
        }
        row = row.output("center_error", e.center_error(), Label::Exact);
        if let Some(t) = e.tau_ratio() {
            row = row.output("tau_ratio", t, Label::Fitted);
        }
        run.push(row);
        if e.center_error() > 1e-10 * (1.0 + linalg::norm(&e.target)) {
            return Err(Error::Assertion(format!("scaled point misses its target by {:e}", e.center_error())));
        }
        entries.push(e);
    }
    Ok((z0, entries))
}

fn scale(run: &mut Run, d: &Domain) -> Result<()> {
    let (z0, entries) = scaling_rows(run, d)?;
    let pipe = pipeline(d)?;
    let mut sr = ScalingRun { pipeline: pipe, base: d.clone(), p0: z0, entries, model: None };
    match pipe {
        Pipeline::FiniteType2D => match limit_polynomial(&sr.entries) {
            Ok(p) => {
                run.summary.insert("limit_polynomial".into(), poly_json(p.poly()));
                sr.model = Some(limit_model(&p, d.declared_type.unwrap_or(2))?);
            }
            Err(e) => {
                run.summary.insert("limit_polynomial_error".into(), json!(e.to_string()));
            }
        },
        Pipeline::StronglyPseudoconvex => sr.model = Some(siegel_model(d.n())?),
        Pipeline::Convex => {}
    }
    run.summary.insert("scaling_run".into(), sr.to_json());
    Ok(())
}

fn sandwich(run: &mut Run, d: &Domain) -> Result<()> {
    let cfg = run.cfg;
    let (_, pts) = sequence_points(run, d)?;
    let law = match &cfg.exponents {
        Some(e) => RegionLaw::Polydisc { exponents: e.clone() },
        None if d.declared_type.unwrap_or(2) > 2 && d.n() == 2 => RegionLaw::CatlinBidisc,
        None => {
            let mut e = vec![0.5; d.n()];
            e[d.n() - 1] = 1.0;
            RegionLaw::Polydisc { exponents: e }
        }
    };
    let sc = SandwichConfig { radius: cfg.radius, seed: cfg.seed, ..SandwichConfig::default() };
    run.start_row("sandwich fit")?;
    let qs: Vec<Point> = pts.iter().map(|(_, p)| p.clone()).collect();
    let fit = sandwich_constants(d, &qs, &law, &sc)?;
    let per_row = run.row_start.elapsed().as_secs_f64() / qs.len() as f64;
    for ((dist, _), r) in pts.iter().zip(&fit.rows) {
        let row = run
            .row()
            .input("d", *dist)
            .output("boundary_distance", r.d, Label::Exact)
            .output("inner_constant", r.inner, Label::Fitted)
            .output("outer_constant", r.outer, Label::Fitted)
            .margin("inner", r.inner - fit.c1)
            .margin("outer", fit.c2 - r.outer);
        run.rows.push(ReportRow { wall_time: per_row, ..row });
    }
    let ratio = fit.inner_ratio.max(fit.outer_ratio);
    run.summary.insert("law".into(), serde_json::to_value(&fit.law).unwrap_or(Value::Null));
    run.summary.insert("exponents".into(), Value::Array(fit.exponents.iter().map(|x| num17(*x)).collect()));
    run.summary.insert("radius".into(), num17(fit.radius));
    run.summary.insert("c1".into(), num17(fit.c1));
    run.summary.insert("c2".into(), num17(fit.c2));
    run.summary.insert("inner_ratio".into(), num17(fit.inner_ratio));
    run.summary.insert("outer_ratio".into(), num17(fit.outer_ratio));
    run.summary.insert("stability_ratio".into(), num17(ratio));
    run.summary.insert("flags".into(), json!(fit.rows.iter().map(|r| r.flags.clone()).collect::<Vec<_>>()));
    if !(fit.c1 > 0.0 && fit.c2.is_finite()) {
        return Err(Error::Assertion(format!("no two-sided inclusion: c1 = {}, c2 = {}", fit.c1, fit.c2)));
    }
    Ok(())
}

fn herbort(run: &mut Run, d: &Domain) -> Result<()> {
    let cfg = run.cfg;
    let pairs = near_boundary_pairs(d, cfg.pairs, (1e-3, 1e-1), cfg.seed);
    let base = PathConfig::default();
    let path = PathConfig { search: base.search.clone().with_seed(cfg.seed), report: base.report.clone().with_seed(cfg.seed), ..base };
    run.start_row("herbort fit")?;
    let fit = herbort_sandwich_fit(d, &pairs, &path)?;
    let per_row = run.row_start.elapsed().as_secs_f64() / fit.pairs.len().max(1) as f64;
    for (dist, s, ratio) in &fit.pairs {
        let row = run
            .row()
            .output("distance", *dist, Label::UpperBound)
            .output("rho_star_sum", *s, Label::Exact)
            .output("ratio", *ratio, Label::Fitted)
            .margin("lower", dist - fit.c_star * s)
            .margin("upper", s / fit.c_star - dist);
        run.rows.push(ReportRow { wall_time: per_row, ..row });
    }
    run.summary.insert("c_star".into(), num17(fit.c_star));
    run.summary.insert("min_ratio".into(), num17(fit.min_ratio));
    run.summary.insert("max_ratio".into(), num17(fit.max_ratio));
    run.summary.insert("pairs".into(), json!(pairs.iter().map(|(a, b)| [point_json(a), point_json(b)]).collect::<Vec<_>>()));
    if !(fit.c_star > 0.0) {
        return Err(Error::Assertion(format!("C_* = {} is not positive", fit.c_star)));
    }
    Ok(())
}

fn fridman_config(cfg: &ExperimentConfig) -> FridmanConfig {
    FridmanConfig { seed: cfg.seed, ..FridmanConfig::default() }
}

fn zero_cert_json(z: &ZeroCert) -> Value {
    match z {
        ZeroCert::Certificate { map, description, family, roundtrip_error } => json!({
            "certificate": description,
            "map": map.describe(),
            "roundtrip_error": num17(*roundtrip_error),
            "family": family.iter().map(|(s, r)| json!({"s": num17(*s), "best_r": num17(*r), "upper": num17(1.0 / r)})).collect::<Vec<_>>(),
        }),
        ZeroCert::Refusal(msg) => json!({ "refusal": msg }),
    }
}

fn fridman(run: &mut Run, d: &Domain) -> Result<()> {
    let cfg = run.cfg;
    let model = Model::parse(&cfg.model).ok_or_else(|| Error::InvalidArgument(format!("unknown model {}", cfg.model)))?;
    let (z0, pts) = sequence_points(run, d)?;
    let zc = fridman_zero_cert(d, &pts[0].1, model)?;
    run.summary.insert("zero_certificate".into(), zero_cert_json(&zc));
    let fc = fridman_config(cfg);
    let mut witnesses = Vec::new();
    for (dist, p) in &pts {
        run.start_row("fridman step")?;
        let r = fridman_boundary_experiment(d, &z0, std::slice::from_ref(p), model, &fc)?.remove(0);
        let mut row = run.row().input("d", *dist).output("best_r", r.best_r, Label::LowerBound).output("upper", r.upper, Label::UpperBound);
        if let Some(x) = r.reference {
            row = row.output("reference", x, Label::Exact).margin("upper_minus_reference", r.upper - x);
        }
        witnesses.push(json!({"candidate": r.candidate, "log": r.log}));
        run.push(row);
    }
    monotone_summary(run);
    run.summary.insert("witnesses".into(), Value::Array(witnesses));
    Ok(())
}

/// Records whether the `upper` column is strictly decreasing.
fn monotone_summary(run: &mut Run) {
    let ups: Vec<f64> = run.rows.iter().filter_map(|r| r.outputs.iter().find(|q| q.name == "upper").map(|q| q.value)).collect();
    run.summary.insert("strictly_decreasing".into(), json!(ups.windows(2).all(|w| w[1] < w[0])));
    if let Some(last) = ups.last() {
        run.summary.insert("final_upper".into(), num17(*last));
    }
}

fn corner(run: &mut Run, d: &Domain) -> Result<()> {
    let cfg = run.cfg;
    let spec = match (d.name.split_once(':'), d.class) {
        (Some(("polydisc", _)), _) => PolyhedronSpec::polydisc(d.n()),
        _ => return Err(Error::Precondition(format!("the corner experiment needs a polydisc preset, got {}", d.name))),
    };
    let seq = cfg.sequence.as_ref().ok_or_else(|| Error::Precondition("a sequence is required".into()))?;
    let x = spec.domain(10.0, linalg::zeros(d.n()))?;
    let fc = fridman_config(cfg);
    let mut witnesses = Vec::new();
    for &dist in &seq.distances {
        run.start_row("corner step")?;
        let p: Point = spec.reference.iter().map(|z| z * (1.0 - dist)).collect();
        check_inside(&x, &p)?;
        let r = fridman_corner_experiment(&spec, &x, std::slice::from_ref(&p), &fc)?.remove(0);
        let row = run
            .row()
            .input("one_minus_modulus", dist)
            .output("corner_distance", r.d, Label::Exact)
            .output("best_r", r.best_r, Label::LowerBound)
            .output("upper", r.upper, Label::UpperBound);
        witnesses.push(json!({"candidate": r.candidate, "log": r.log}));
        run.push(row);
    }
    monotone_summary(run);
    run.summary.insert("witnesses".into(), Value::Array(witnesses));
    Ok(())
}

fn stability(run: &mut Run, d: &Domain) -> Result<()> {
    let cfg = run.cfg;
    let (_, pts) = sequence_points(run, d)?;
    let z0 = base_boundary_point(run, d)?;
    let chart = chart_for(d, &z0)?;
    let disc = cfg.estimator.disc(cfg.seed);
    let n = d.n();
    let mut entries = Vec::new();
    let mut prev: Option<Vec<f64>> = None;
    for (dist, p) in &pts {
        run.start_row("stability step")?;
        let e = scaled_entry(d, chart.as_ref(), p)?;
        let mut row = run.row().input("d", *dist);
        let mut vals = Vec::new();
        for i in 0..n {
            let m = kobayashi_inf_estimate(&e.domain, &e.image, &unit(n, i), &disc)?;
            row = row.output(&format!("fk_e{}", i + 1), m.value, m.bound);
            vals.push(m.value);
        }
        let change = prev.as_ref().map_or(f64::NAN, |pv| rel_change(pv, &vals));
        row = row.output("relative_change", change, Label::Fitted);
        prev = Some(vals);
        run.push(row);
        entries.push(e);
    }
    let model = match pipeline(d)? {
        Pipeline::StronglyPseudoconvex => Some(siegel_model(n)?),
        Pipeline::FiniteType2D => Some(limit_model(&limit_polynomial(&entries)?, d.declared_type.unwrap_or(2))?),
        Pipeline::Convex => None,
    };
    if let (Some(m), Some(last), Some(pv)) = (model, entries.last(), prev) {
        run.budget.check("limit model estimate")?;
        let vals: Vec<f64> = (0..n).map(|i| kobayashi_inf_estimate(&m, &last.image, &unit(n, i), &disc).map(|x| x.value)).collect::<Result<_>>()?;
        run.summary.insert("model_values".into(), Value::Array(vals.iter().map(|x| num17(*x)).collect()));
        run.summary.insert("model_agreement".into(), num17(rel_change(&vals, &pv)));
        run.summary.insert("model".into(), json!(m.name));
    }
    if let Some(r) = run.rows.last() {
        if let Some(q) = r.outputs.iter().find(|q| q.name == "relative_change") {
            run.summary.insert("last_relative_change".into(), num17(q.value));
        }
    }
    Ok(())
}

/// `max_i |a_i - b_i| / |b_i|`.
fn rel_change(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs() / y.abs()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sequence_spec_parsing() {
        let s = SequenceSpec::parse("normal:dyadic:3:0.1").unwrap();
        assert_eq!(s.distances, vec![0.05, 0.025, 0.0125]);
        let t = SequenceSpec::parse("tangential-mix:1e-1,1e-2").unwrap();
        assert_eq!(t.mode, ApproachMode::TangentialMix);
        assert_eq!(t.distances, vec![0.1, 0.01]);
        assert!(SequenceSpec::parse("sideways:1").is_err());
    }

    #[test]
    fn config_requires_seed() {
        assert!(ExperimentConfig::from_json(r#"{"kind": "metric", "domain": "ball:2"}"#).is_err());
        let c = ExperimentConfig::from_json(r#"{"kind": "metric", "domain": "ball:2", "seed": 1, "points": [[[0,0],[0,0]]]}"#).unwrap();
        assert!(c.validate().is_ok());
    }

    #[test]
    fn model_kinds() {
        assert_eq!(model_kind(&preset_domain("ball:2").unwrap()), Some(ModelKind::Ball));
        assert_eq!(model_kind(&preset_domain("egg:2").unwrap()), None);
    }
}
