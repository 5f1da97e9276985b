//! Config-driven experiment runner.
//!
//! A plain-text config (`[section]` headers, `key = value` lines) describes
//! one experiment: the communication topology, the streaming problem, the
//! optimizer variant, and metric toggles. Four operations consume it:
//!
//! * [`run`] — execute the rounds, write `metrics.csv`, `checkpoints.csv`,
//!   and one `report_*.txt` per evaluated bound;
//! * [`compare`] — run several configs and join their per-round columns
//!   into one `compare.csv`;
//! * [`sweep`] — rerun one config across an axis (`beta3`, `r`, or `iota`
//!   lists) and write per-cell outputs plus `sweep_summary.csv`;
//! * [`bounds`] — execute and write only the bound reports.
//!
//! Everything is deterministic: the master seed fixes the topology draw,
//! the data stream, and minibatch sampling, so identical configs produce
//! byte-identical CSVs. Exit-code contract for the CLI: 0 on success, 2
//! when a bound with exactly-known constants is violated, 1 on any error.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::metrics::{
    consensus_error, dynamic_regret, dynamic_regret_bound, local_regret, moment_bounds,
    stationarity_bound, stationarity_step, BoundReport, ConsensusReport, LocalRegret,
    MetricsError, RunRecord,
};
use crate::optimizer::{
    checkpoint_header, checkpoint_row, AgentState, HyperParams, Mode, Network, OptimizerError,
    Schedule,
};
use crate::problems::{DatasetStream, LossKind, LossOracle, ProblemError, RhoBound, Stream,
    SyntheticStream};
use crate::projections::{ConstraintSet, ProjectionError};
use crate::rng;
use crate::topology::{Graph, MixingMatrix, TopologyError};

/// Environment variable supplying the default output directory.
pub const OUT_DIR_ENV: &str = "DADAM_OUT_DIR";

/// Reserved sub-seed tags (tags 1–3 belong to the problems module: stream
/// base, per-round batches, dataset shuffle).
const TAG_TOPOLOGY: u64 = 4;
const TAG_MINIBATCH: u64 = 5;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    /// Config parse or validation failure, with the `[section] key` path.
    #[error("config {path}: {msg}")]
    Config { path: String, msg: String },
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("compare needs at least two configs")]
    TooFewConfigs,
    #[error("compare needs one shared horizon, got {first} and {other}")]
    HorizonMismatch { first: usize, other: usize },
    #[error("round {round}: {source}")]
    Round {
        round: usize,
        #[source]
        source: Box<HarnessError>,
    },
    #[error(
        "prescribed constant step did not settle after {passes} passes \
         (second-moment extrema keep moving)"
    )]
    PrescriptionDiverged { passes: usize },
    #[error("csv line {line}: {msg}")]
    Csv { line: usize, msg: String },
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Projection(#[from] ProjectionError),
    #[error(transparent)]
    Optimizer(#[from] OptimizerError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

type Result<T> = std::result::Result<T, HarnessError>;

fn io_err(path: &Path, source: std::io::Error) -> HarnessError {
    HarnessError::Io { path: path.to_path_buf(), source }
}

fn at_round<T, E: Into<HarnessError>>(
    round: usize,
    r: std::result::Result<T, E>,
) -> Result<T> {
    r.map_err(|e| HarnessError::Round { round, source: Box::new(e.into()) })
}

// ---------------------------------------------------------------------------
// Configuration model
// ---------------------------------------------------------------------------

/// Communication-graph settings.
#[derive(Debug, Clone)]
pub struct TopologyConfig {
    pub n: usize,
    /// Connection probability for the random connected graph (ignored when
    /// `edges` is given).
    pub r: f64,
    /// Metropolis weight offset.
    pub iota: f64,
    /// Explicit graph seed; defaults to a sub-seed of the master seed.
    pub seed: Option<u64>,
    /// Explicit edge list overriding the random draw.
    pub edges: Option<Vec<(usize, usize)>>,
}

/// Feasible-set shape, materialized to a [`ConstraintSet`] once the
/// dimension is known.
#[derive(Debug, Clone, PartialEq)]
pub enum SetSpec {
    Unconstrained,
    /// Same scalar bounds in every coordinate.
    Box { lo: f64, hi: f64 },
    L1Ball { radius: f64 },
    /// Ball around the constant-`center` point.
    L2Ball { center: f64, radius: f64 },
}

impl SetSpec {
    pub fn materialize(&self, dim: usize) -> ConstraintSet {
        match *self {
            SetSpec::Unconstrained => ConstraintSet::Unconstrained,
            SetSpec::Box { lo, hi } => ConstraintSet::Box {
                lo: vec![lo; dim],
                hi: vec![hi; dim],
            },
            SetSpec::L1Ball { radius } => ConstraintSet::L1Ball { radius },
            SetSpec::L2Ball { center, radius } => ConstraintSet::L2Ball {
                center: vec![center; dim],
                radius,
            },
        }
    }
}

/// Streaming-problem settings.
#[derive(Debug, Clone)]
pub struct ProblemConfig {
    pub kind: LossKind,
    /// Parameter dimension; inferred from the data file when absent.
    pub dim: Option<usize>,
    pub nu: f64,
    /// Per-round local batch size.
    pub batch: usize,
    /// Minibatch size for stochastic gradients; 0 takes the full batch.
    pub sample: usize,
    /// Number of rounds `T`.
    pub horizon: usize,
    pub drift: f64,
    pub noise: f64,
    /// CSV dataset path (label, then features); switches the stream from
    /// synthetic to file-backed.
    pub data: Option<PathBuf>,
    pub shuffle: bool,
    pub set: SetSpec,
}

/// How the base step size is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AlphaRule {
    Explicit(f64),
    /// `sqrt(1 - sigma2(W))` — the spectral-gap default.
    SpectralGap,
    /// The constant step the stationarity guarantee prescribes, settled by
    /// fixed point over observed second-moment extrema (nonconvex mode,
    /// constant schedule only).
    Prescribed,
}

#[derive(Debug, Clone)]
pub struct OptimizerConfig {
    /// Fully resolved hyper-parameters except `alpha` (see `alpha` rule).
    pub hp: HyperParams,
    pub alpha: AlphaRule,
}

#[derive(Debug, Clone)]
pub struct MetricsConfig {
    /// Evaluate and report the bounds that apply.
    pub bounds: bool,
    /// Compute the per-round comparator sequence and dynamic regret
    /// (defaults to on in convex mode).
    pub dynamic_regret: Option<bool>,
    /// Compute local regret via the evaluation pass (defaults to on in
    /// nonconvex mode; O(T^2) gradient cost).
    pub local_regret: Option<bool>,
    /// Relative displacement tolerance for the inner minimizer solver.
    pub minimizer_tol: f64,
}

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub axis: SweepAxis,
    /// Master seeds per cell: `seed, seed+1, ..`.
    pub seeds: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SweepAxis {
    Beta3(Vec<f64>),
    Radius(Vec<f64>),
    Iota(Vec<f64>),
}

impl SweepAxis {
    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::Beta3(_) => "beta3",
            SweepAxis::Radius(_) => "r",
            SweepAxis::Iota(_) => "iota",
        }
    }

    pub fn values(&self) -> &[f64] {
        match self {
            SweepAxis::Beta3(v) | SweepAxis::Radius(v) | SweepAxis::Iota(v) => v,
        }
    }
}

/// One experiment, fully described.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    /// Column/report label; defaults to the preset name (or the config file
    /// stem when loaded from disk).
    pub label: String,
    pub topology: TopologyConfig,
    pub problem: ProblemConfig,
    pub optimizer: OptimizerConfig,
    pub metrics: MetricsConfig,
    /// Master seed; every random draw in the run derives from it.
    pub seed: u64,
    pub out_dir: Option<PathBuf>,
    pub quiet: bool,
    pub checkpoints: bool,
    pub sweep: Option<SweepConfig>,
    /// Directory data paths are resolved against (the config file's home).
    pub base_dir: PathBuf,
}

// ---------------------------------------------------------------------------
// Config parsing
// ---------------------------------------------------------------------------

fn cfg_err(path: &str, msg: impl Into<String>) -> HarnessError {
    HarnessError::Config { path: path.into(), msg: msg.into() }
}

/// One parsed `[section]`, with typed takers that build field-path errors.
struct Section<'a> {
    cfg_path: &'a str,
    name: &'a str,
    map: BTreeMap<String, String>,
}

impl<'a> Section<'a> {
    fn err(&self, key: &str, msg: impl std::fmt::Display) -> HarnessError {
        cfg_err(self.cfg_path, format!("[{}] {}: {}", self.name, key, msg))
    }

    fn take(&mut self, key: &str) -> Option<String> {
        self.map.remove(key)
    }

    fn parse<T: std::str::FromStr>(&mut self, key: &str, what: &str) -> Result<Option<T>> {
        match self.take(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse::<T>()
                .map(Some)
                .map_err(|_| self.err(key, format!("expected {what}, got {raw:?}"))),
        }
    }

    fn f64(&mut self, key: &str) -> Result<Option<f64>> {
        self.parse(key, "a number")
    }

    fn usize(&mut self, key: &str) -> Result<Option<usize>> {
        self.parse(key, "a nonnegative integer")
    }

    fn u64(&mut self, key: &str) -> Result<Option<u64>> {
        self.parse(key, "a nonnegative integer")
    }

    fn bool(&mut self, key: &str) -> Result<Option<bool>> {
        match self.take(key).as_deref() {
            None => Ok(None),
            Some("true") => Ok(Some(true)),
            Some("false") => Ok(Some(false)),
            Some(raw) => Err(self.err(key, format!("expected true or false, got {raw:?}"))),
        }
    }

    fn f64_list(&mut self, key: &str) -> Result<Option<Vec<f64>>> {
        match self.take(key) {
            None => Ok(None),
            Some(raw) => {
                let mut out = Vec::new();
                for tok in raw.split(',') {
                    let tok = tok.trim();
                    out.push(tok.parse::<f64>().map_err(|_| {
                        self.err(key, format!("expected a comma-separated number list, got {tok:?}"))
                    })?);
                }
                if out.is_empty() {
                    return Err(self.err(key, "list is empty"));
                }
                Ok(Some(out))
            }
        }
    }

    /// `0-1, 1-2` style undirected edge list.
    fn edges(&mut self, key: &str) -> Result<Option<Vec<(usize, usize)>>> {
        match self.take(key) {
            None => Ok(None),
            Some(raw) => {
                let mut out = Vec::new();
                for tok in raw.split(',') {
                    let tok = tok.trim();
                    let (a, b) = tok.split_once('-').ok_or_else(|| {
                        self.err(key, format!("expected edges like 0-1, got {tok:?}"))
                    })?;
                    let a = a.trim().parse::<usize>();
                    let b = b.trim().parse::<usize>();
                    match (a, b) {
                        (Ok(a), Ok(b)) => out.push((a, b)),
                        _ => {
                            return Err(self.err(
                                key,
                                format!("expected edges like 0-1, got {tok:?}"),
                            ))
                        }
                    }
                }
                Ok(Some(out))
            }
        }
    }

    fn require<T>(&self, key: &str, v: Option<T>) -> Result<T> {
        v.ok_or_else(|| self.err(key, "required key is missing"))
    }

    fn finish(self) -> Result<()> {
        if let Some(key) = self.map.keys().next() {
            return Err(self.err(key, "unknown key"));
        }
        Ok(())
    }
}

/// Split config text into named sections of key/value pairs.
fn split_sections<'a>(
    text: &str,
    cfg_path: &'a str,
) -> Result<BTreeMap<String, BTreeMap<String, String>>> {
    let mut sections: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
    let mut current: Option<String> = None;
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let Some(name) = name.strip_suffix(']') else {
                return Err(cfg_err(cfg_path, format!("line {}: unclosed section header", idx + 1)));
            };
            let name = name.trim().to_ascii_lowercase();
            if sections.contains_key(&name) {
                return Err(cfg_err(cfg_path, format!("line {}: duplicate section [{name}]", idx + 1)));
            }
            sections.insert(name.clone(), BTreeMap::new());
            current = Some(name);
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(cfg_err(
                cfg_path,
                format!("line {}: expected key = value, got {line:?}", idx + 1),
            ));
        };
        let Some(section) = &current else {
            return Err(cfg_err(
                cfg_path,
                format!("line {}: key before any [section] header", idx + 1),
            ));
        };
        let key = key.trim().to_ascii_lowercase();
        let value = value.trim().to_string();
        let map = sections.get_mut(section).expect("section just inserted");
        if map.insert(key.clone(), value).is_some() {
            return Err(cfg_err(
                cfg_path,
                format!("line {}: duplicate key {key:?} in [{section}]", idx + 1),
            ));
        }
    }
    Ok(sections)
}

impl ExperimentConfig {
    /// Parse config text. `cfg_path` labels errors; `base_dir` anchors
    /// relative data paths.
    pub fn parse(text: &str, cfg_path: &str, base_dir: &Path) -> Result<ExperimentConfig> {
        const KNOWN: [&str; 6] = ["topology", "problem", "optimizer", "metrics", "run", "sweep"];
        let mut sections = split_sections(text, cfg_path)?;
        if let Some(name) = sections.keys().find(|k| !KNOWN.contains(&k.as_str())) {
            return Err(cfg_err(cfg_path, format!("unknown section [{name}]")));
        }
        let mut section = |name: &'static str| -> Section<'_> {
            Section {
                cfg_path,
                name,
                map: sections.remove(name).unwrap_or_default(),
            }
        };

        // [topology]
        let mut s = section("topology");
        let n = {
            let n = s.usize("n")?;
            s.require("n", n)?
        };
        if n == 0 {
            return Err(s.err("n", "need at least one agent"));
        }
        let topology = TopologyConfig {
            n,
            r: s.f64("r")?.unwrap_or(1.0),
            iota: s.f64("iota")?.unwrap_or(1.0),
            seed: s.u64("seed")?,
            edges: s.edges("edges")?,
        };
        s.finish()?;

        // [problem]
        let mut s = section("problem");
        let kind_tok = {
            let k = s.take("kind");
            s.require("kind", k)?
        };
        let kind = match kind_tok.as_str() {
            "logistic" => LossKind::Logistic,
            "squared_hinge" => LossKind::SquaredHinge,
            "quadratic" => LossKind::Quadratic,
            "softmax" => {
                let classes = s.usize("classes")?;
                let classes = s.require("classes", classes)?;
                LossKind::Softmax { classes }
            }
            other => {
                return Err(s.err(
                    "kind",
                    format!(
                        "expected logistic, squared_hinge, softmax, or quadratic, got {other:?}"
                    ),
                ))
            }
        };
        let dim = s.usize("dim")?;
        let data = s.take("data").map(PathBuf::from);
        if dim.is_none() && data.is_none() {
            return Err(s.err("dim", "required key is missing (or give a data file)"));
        }
        let horizon = {
            let h = s.usize("horizon")?;
            s.require("horizon", h)?
        };
        if horizon == 0 {
            return Err(s.err("horizon", "need at least one round"));
        }
        let batch = s.usize("batch")?.unwrap_or(10);
        if batch == 0 {
            return Err(s.err("batch", "need at least one example per round"));
        }
        let sample = s.usize("sample")?.unwrap_or(0);
        if sample > batch {
            return Err(s.err(
                "sample",
                format!("minibatch size {sample} exceeds the batch size {batch}"),
            ));
        }
        let set_tok = s.take("set").unwrap_or_else(|| "unconstrained".into());
        let set = match set_tok.as_str() {
            "unconstrained" => SetSpec::Unconstrained,
            "box" => {
                let lo = s.f64("lo")?;
                let hi = s.f64("hi")?;
                let lo = s.require("lo", lo)?;
                let hi = s.require("hi", hi)?;
                if !(lo < hi) {
                    return Err(s.err("lo", format!("need lo < hi, got {lo} >= {hi}")));
                }
                SetSpec::Box { lo, hi }
            }
            "l1_ball" => {
                let radius = s.f64("radius")?;
                SetSpec::L1Ball { radius: s.require("radius", radius)? }
            }
            "l2_ball" => {
                let radius = s.f64("radius")?;
                SetSpec::L2Ball {
                    center: s.f64("center")?.unwrap_or(0.0),
                    radius: s.require("radius", radius)?,
                }
            }
            other => {
                return Err(s.err(
                    "set",
                    format!(
                        "expected unconstrained, box, l1_ball, or l2_ball, got {other:?}"
                    ),
                ))
            }
        };
        let problem = ProblemConfig {
            kind,
            dim,
            nu: s.f64("nu")?.unwrap_or(0.0),
            batch,
            sample,
            horizon,
            drift: s.f64("drift")?.unwrap_or(0.0),
            noise: s.f64("noise")?.unwrap_or(0.0),
            data,
            shuffle: s.bool("shuffle")?.unwrap_or(true),
            set,
        };
        s.finish()?;

        // [optimizer]
        let mut s = section("optimizer");
        let preset = s.take("preset").unwrap_or_else(|| "dadam".into());
        let mut hp = HyperParams::preset(&preset)
            .map_err(|e| s.err("preset", e))?;
        if let Some(v) = s.f64("beta1")? {
            hp.beta1 = v;
        }
        if let Some(v) = s.f64("beta2")? {
            hp.beta2 = v;
        }
        if let Some(v) = s.f64("beta3")? {
            hp.beta3 = v;
        }
        if let Some(v) = s.f64("lambda")? {
            hp.lambda = v;
        }
        if let Some(v) = s.f64("epsilon")? {
            hp.epsilon = v;
        }
        if let Some(v) = s.bool("adaptive")? {
            hp.adaptive = v;
        }
        if let Some(v) = s.bool("corrected")? {
            hp.corrected = v;
        }
        if let Some(tok) = s.take("second_moment") {
            hp.second_moment = match tok.as_str() {
                "ewma" => crate::optimizer::SecondMoment::Ewma,
                "running_mean" => crate::optimizer::SecondMoment::RunningMean,
                other => {
                    return Err(s.err(
                        "second_moment",
                        format!("expected ewma or running_mean, got {other:?}"),
                    ))
                }
            };
        }
        if let Some(tok) = s.take("schedule") {
            hp.schedule = match tok.as_str() {
                "inv_sqrt_t" => Schedule::InvSqrtT,
                "constant" => Schedule::Constant,
                "inv_sqrt_nt" => Schedule::InvSqrtNT,
                other => {
                    return Err(s.err(
                        "schedule",
                        format!("expected inv_sqrt_t, constant, or inv_sqrt_nt, got {other:?}"),
                    ))
                }
            };
        }
        if let Some(tok) = s.take("mode") {
            hp.mode = match tok.as_str() {
                "convex" => Mode::Convex,
                "nonconvex" => Mode::Nonconvex,
                other => {
                    return Err(
                        s.err("mode", format!("expected convex or nonconvex, got {other:?}"))
                    )
                }
            };
        }
        let alpha = match s.take("alpha") {
            None => AlphaRule::SpectralGap,
            Some(tok) => match tok.as_str() {
                "gap" => AlphaRule::SpectralGap,
                "prescribed" => AlphaRule::Prescribed,
                _ => AlphaRule::Explicit(tok.parse::<f64>().map_err(|_| {
                    s.err("alpha", format!("expected a number, gap, or prescribed, got {tok:?}"))
                })?),
            },
        };
        if alpha == AlphaRule::Prescribed
            && (hp.schedule != Schedule::Constant || hp.mode != Mode::Nonconvex)
        {
            return Err(s.err(
                "alpha",
                "the prescribed step needs mode = nonconvex and schedule = constant",
            ));
        }
        let optimizer = OptimizerConfig { hp, alpha };
        s.finish()?;

        // [metrics]
        let mut s = section("metrics");
        let metrics = MetricsConfig {
            bounds: s.bool("bounds")?.unwrap_or(true),
            dynamic_regret: s.bool("dynamic_regret")?,
            local_regret: s.bool("local_regret")?,
            minimizer_tol: s.f64("minimizer_tol")?.unwrap_or(1e-10),
        };
        if !(metrics.minimizer_tol > 0.0) || !metrics.minimizer_tol.is_finite() {
            return Err(s.err("minimizer_tol", "must be a positive number"));
        }
        s.finish()?;

        // [run]
        let mut s = section("run");
        let label = s
            .take("label")
            .unwrap_or_else(|| preset.clone());
        let seed = s.u64("seed")?.unwrap_or(0);
        let out_dir = s.take("out_dir").map(PathBuf::from);
        let quiet = s.bool("quiet")?.unwrap_or(false);
        let checkpoints = s.bool("checkpoints")?.unwrap_or(true);
        s.finish()?;

        // [sweep]
        let mut s = section("sweep");
        let beta3 = s.f64_list("beta3")?;
        let r = s.f64_list("r")?;
        let iota = s.f64_list("iota")?;
        let seeds = s.usize("seeds")?.unwrap_or(1);
        let sweep = match (beta3, r, iota) {
            (None, None, None) => None,
            (Some(v), None, None) => Some(SweepAxis::Beta3(v)),
            (None, Some(v), None) => Some(SweepAxis::Radius(v)),
            (None, None, Some(v)) => Some(SweepAxis::Iota(v)),
            _ => {
                return Err(s.err(
                    "beta3",
                    "give exactly one sweep axis: beta3, r, or iota",
                ))
            }
        }
        .map(|axis| SweepConfig { axis, seeds: seeds.max(1) });
        s.finish()?;

        let cfg = ExperimentConfig {
            label,
            topology,
            problem,
            optimizer,
            metrics,
            seed,
            out_dir,
            quiet,
            checkpoints,
            sweep,
            base_dir: base_dir.to_path_buf(),
        };
        // Referenced files must exist at parse time.
        if let Some(data) = &cfg.problem.data {
            let resolved = cfg.data_path().expect("data is set");
            if !resolved.is_file() {
                return Err(cfg_err(
                    cfg_path,
                    format!("[problem] data: file not found: {}", data.display()),
                ));
            }
        }
        Ok(cfg)
    }

    /// Load a config file; the label defaults to the file stem and data
    /// paths resolve against the file's directory.
    pub fn from_file(path: &Path) -> Result<ExperimentConfig> {
        let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        let name = path.display().to_string();
        let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        let mut cfg = ExperimentConfig::parse(&text, &name, &base)?;
        let label_explicit = split_sections(&text, &name)?
            .get("run")
            .is_some_and(|run| run.contains_key("label"));
        if !label_explicit {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                cfg.label = stem.to_string();
            }
        }
        Ok(cfg)
    }

    /// The data file path resolved against the config's base directory.
    pub fn data_path(&self) -> Option<PathBuf> {
        self.problem.data.as_ref().map(|p| {
            if p.is_absolute() {
                p.clone()
            } else {
                self.base_dir.join(p)
            }
        })
    }
}

/// Pick the output directory: explicit override, then the config, then the
/// `DADAM_OUT_DIR` environment variable, then `./out`.
pub fn resolve_out_dir(cli: Option<&Path>, cfg: &ExperimentConfig) -> PathBuf {
    if let Some(p) = cli {
        return p.to_path_buf();
    }
    if let Some(p) = &cfg.out_dir {
        return p.clone();
    }
    if let Some(p) = std::env::var_os(OUT_DIR_ENV) {
        return PathBuf::from(p);
    }
    PathBuf::from("out")
}

// ---------------------------------------------------------------------------
// Execution
// ---------------------------------------------------------------------------

/// Everything one executed experiment produced, before any file is written.
#[derive(Debug, Clone)]
pub struct Executed {
    pub record: RunRecord,
    /// Final per-agent optimizer states (for checkpoints).
    pub final_states: Vec<AgentState>,
    /// Cumulative dynamic regret per round, when computed.
    pub reg_c: Option<Vec<f64>>,
    /// Whether the comparator sequence is closed-form.
    pub minimizers_exact: bool,
    /// Local-regret evaluation output, when computed.
    pub local: Option<LocalRegret>,
    pub consensus: ConsensusReport,
    /// Every bound evaluated, in a fixed order.
    pub reports: Vec<BoundReport>,
    /// Per-round RHS of the dynamic-regret bound, when evaluated.
    pub bound_t1: Option<Vec<f64>>,
    /// Per-round RHS of the stationarity bound, when evaluated.
    pub bound_c3: Option<Vec<f64>>,
    pub sigma2: f64,
    /// Resolved base step size.
    pub alpha: f64,
    /// Bounds that were requested but not evaluable, with reasons.
    pub skipped: Vec<String>,
}

impl Executed {
    /// A bound with exactly-known constants was violated (CLI exit 2).
    pub fn hard_violation(&self) -> bool {
        self.reports.iter().any(|r| r.hard_violation())
    }
}

fn build_stream(cfg: &ExperimentConfig) -> Result<(LossOracle, Stream, usize)> {
    let p = &cfg.problem;
    if let Some(path) = cfg.data_path() {
        let text = fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
        let shuffle_seed = p.shuffle.then_some(cfg.seed);
        let ds = DatasetStream::from_csv(&text, cfg.topology.n, p.batch, shuffle_seed)?;
        if (0..ds.n_agents()).any(|i| ds.shard_len(i) == 0) {
            return Err(cfg_err(
                &cfg.label,
                format!(
                    "[problem] data: dataset has fewer rows than the {} agents",
                    cfg.topology.n
                ),
            ));
        }
        let feature_dim = ds.batch(0, 1).examples[0].features.len();
        let dim = match p.kind {
            LossKind::Softmax { classes } => classes * feature_dim,
            _ => feature_dim,
        };
        if let Some(want) = p.dim {
            if want != dim {
                return Err(cfg_err(
                    &cfg.label,
                    format!("[problem] dim: config says {want} but the data implies {dim}"),
                ));
            }
        }
        let oracle = LossOracle::new(p.kind, dim, p.nu)?;
        Ok((oracle, Stream::Dataset(ds), dim))
    } else {
        let dim = p.dim.expect("validated at parse");
        let oracle = LossOracle::new(p.kind, dim, p.nu)?;
        let stream = SyntheticStream::new(
            p.kind,
            dim,
            cfg.topology.n,
            p.batch,
            cfg.seed,
            p.drift,
            p.noise,
        )?;
        Ok((oracle, Stream::Synthetic(stream), dim))
    }
}

/// Drive the network through all rounds, logging everything.
fn drive(
    hp: &HyperParams,
    w: &MixingMatrix,
    set: &ConstraintSet,
    oracle: &LossOracle,
    stream: &Stream,
    cfg: &ExperimentConfig,
) -> Result<(RunRecord, Vec<AgentState>)> {
    let n = cfg.topology.n;
    let p = oracle.dim();
    let t_rounds = cfg.problem.horizon;
    let init = vec![vec![0.0; p]; n];
    let mut net = Network::new(hp.clone(), w.clone(), set.clone(), &init, Some(t_rounds))?;
    let mut record = RunRecord::new(hp.clone(), w.clone(), set.clone(), net.iterates());
    for t in 1..=t_rounds {
        let block = net.iterates();
        let mut losses = Vec::with_capacity(n);
        let mut grads = Vec::with_capacity(n);
        for i in 0..n {
            let batch = stream.batch(i, t);
            losses.push(at_round(t, oracle.value(&block[i], &batch))?);
            let g = if cfg.problem.sample > 0 {
                let mut r = rng::stream(cfg.seed, &[TAG_MINIBATCH, i as u64, t as u64]);
                oracle.stochastic_grad(&block[i], &batch, cfg.problem.sample, &mut r)
            } else {
                oracle.grad(&block[i], &batch)
            };
            grads.push(at_round(t, g)?);
        }
        let info = at_round(t, net.step(&grads))?;
        let m = net.agents().iter().map(|a| a.m.clone()).collect();
        let vhat = net.agents().iter().map(|a| a.v_hat.clone()).collect();
        let corrected = hp
            .corrected
            .then(|| net.agents().iter().map(|a| a.corrected_x()).collect());
        at_round(
            t,
            record.push_round(grads, info.alpha, losses, m, vhat, net.iterates(), corrected),
        )?;
    }
    Ok((record, net.agents().to_vec()))
}

/// The per-round comparator sequence and its objective values.
fn comparator_sequence(
    oracle: &LossOracle,
    stream: &Stream,
    set: &ConstraintSet,
    t_rounds: usize,
    tol: f64,
) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let mut xs: Vec<Vec<f64>> = Vec::with_capacity(t_rounds);
    let mut vals = Vec::with_capacity(t_rounds);
    for t in 1..=t_rounds {
        let batches = stream.network_batches(t);
        let x = at_round(
            t,
            oracle.minimizer(set, &batches, xs.last().map(Vec::as_slice), tol),
        )?;
        vals.push(at_round(t, oracle.network_value(&x, &batches))?);
        xs.push(x);
    }
    Ok((xs, vals))
}

/// Smoothness constant for the stream's objectives: exact and
/// batch-independent when the loss provides that, otherwise the worst
/// data-derived estimate over the horizon.
fn rho_constant(oracle: &LossOracle, stream: &Stream, t_rounds: usize) -> Result<RhoBound> {
    let probe = oracle.rho_bound(&stream.network_batches(1))?;
    if probe.exact {
        return Ok(probe);
    }
    let mut worst = probe;
    for t in 2..=t_rounds {
        let batches = stream.network_batches(t);
        let r = oracle.rho_bound(&batches)?;
        if r.value > worst.value {
            worst = r;
        }
    }
    Ok(worst)
}

/// Loss Lipschitz constant: exact for quadratic losses on a bounded set,
/// otherwise the largest gradient norm observed in the run (estimated).
fn lipschitz_constant(
    oracle: &LossOracle,
    stream: &Stream,
    set: &ConstraintSet,
    record: &RunRecord,
) -> (f64, bool) {
    if oracle.kind() == LossKind::Quadratic {
        let mut max_center = 0.0f64;
        for t in 1..=record.rounds() {
            for b in stream.network_batches(t) {
                if let Some(c) = b.mean_features() {
                    let norm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
                    max_center = max_center.max(norm);
                }
            }
        }
        if let Some(l) = oracle.gradient_norm_bound(set, max_center) {
            return (l, true);
        }
    }
    let mut worst = 0.0f64;
    for block in record.gradients() {
        for g in block {
            let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            worst = worst.max(norm);
        }
    }
    (worst, false)
}

struct PrescribedRun {
    record: RunRecord,
    states: Vec<AgentState>,
    local: LocalRegret,
    env_lo: f64,
    env_hi: f64,
    rho: RhoBound,
}

/// Settle the prescribed constant step by fixed point: run, fold the
/// observed `sqrt(vhat)` extrema (optimizer pass and evaluation pass) into
/// a monotone envelope, recompute the step from the envelope, and stop as
/// soon as a run widens nothing — its step then reproduces itself exactly.
fn settle_prescribed(
    hp: &HyperParams,
    w: &MixingMatrix,
    set: &ConstraintSet,
    oracle: &LossOracle,
    stream: &Stream,
    cfg: &ExperimentConfig,
) -> Result<PrescribedRun> {
    const PASSES: usize = 12;
    let rho = rho_constant(oracle, stream, cfg.problem.horizon)?;
    let mut env_lo = f64::INFINITY;
    let mut env_hi = 0.0f64;
    let mut alpha = (1.0 - w.sigma2()).sqrt().max(f64::MIN_POSITIVE);
    for _ in 0..PASSES {
        let mut hp_pass = hp.clone();
        hp_pass.alpha = alpha;
        let (record, states) = drive(&hp_pass, w, set, oracle, stream, cfg)?;
        let local = local_regret(&record, oracle, stream)?;
        let (run_lo, run_hi) = record.vhat_sqrt_extrema();
        let new_lo = env_lo.min(run_lo).min(local.vhat_sqrt_min);
        let new_hi = env_hi.max(run_hi).max(local.vhat_sqrt_max);
        if !(new_lo > 0.0) {
            return Err(MetricsError::ZeroSecondMomentFloor.into());
        }
        let widened = new_lo < env_lo || new_hi > env_hi;
        env_lo = new_lo;
        if new_hi > env_hi {
            // Inflate the ceiling so the next step's slightly different
            // trajectory lands inside it; a looser ceiling stays a valid
            // upper envelope and only loosens the bound.
            env_hi = new_hi * 1.01;
        }
        let next = stationarity_step(hp, rho.value, env_lo, env_hi);
        if !widened && next == alpha {
            return Ok(PrescribedRun { record, states, local, env_lo, env_hi, rho });
        }
        alpha = next;
    }
    Err(HarnessError::PrescriptionDiverged { passes: PASSES })
}

/// Execute one experiment: build the topology, stream, and optimizer from
/// the config, run every round, and evaluate the requested metrics and
/// bounds. Pure — writes nothing.
pub fn execute(cfg: &ExperimentConfig) -> Result<Executed> {
    let topo_seed = cfg
        .topology
        .seed
        .unwrap_or_else(|| rng::subseed(cfg.seed, &[TAG_TOPOLOGY]));
    let graph = match &cfg.topology.edges {
        Some(edges) => Graph::from_edges(cfg.topology.n, edges)?,
        None => Graph::random_connected(cfg.topology.n, cfg.topology.r, topo_seed)?,
    };
    let w = MixingMatrix::metropolis(&graph, cfg.topology.iota)?;
    let sigma2 = w.sigma2();
    let (oracle, stream, dim) = build_stream(cfg)?;
    let set = cfg.problem.set.materialize(dim);
    let hp_base = &cfg.optimizer.hp;

    // Resolve the step rule; the prescribed rule already produces the run.
    let mut prescribed: Option<PrescribedRun> = None;
    let alpha = match cfg.optimizer.alpha {
        AlphaRule::Explicit(a) => a,
        AlphaRule::SpectralGap => (1.0 - sigma2).sqrt(),
        AlphaRule::Prescribed => {
            let p = settle_prescribed(hp_base, &w, &set, &oracle, &stream, cfg)?;
            let a = p.record.hyper().alpha;
            prescribed = Some(p);
            a
        }
    };

    let (record, final_states, mut local) = match &prescribed {
        Some(p) => (p.record.clone(), p.states.clone(), Some(p.local.clone())),
        None => {
            let mut hp = hp_base.clone();
            hp.alpha = alpha;
            let (record, states) = drive(&hp, &w, &set, &oracle, &stream, cfg)?;
            (record, states, None)
        }
    };
    // Keep the prescription's envelope for the bound constants.
    let prescription = prescribed.map(|p| (p.env_lo, p.env_hi, p.rho));

    // The per-round moment caps must hold on every run; a failure here is
    // an implementation fault, not a statistics question.
    moment_bounds(&record)?;

    let hp = record.hyper().clone();
    let mut skipped = Vec::new();

    // Dynamic regret (and its comparator sequence).
    let want_reg_c = cfg.metrics.dynamic_regret.unwrap_or(hp.mode == Mode::Convex);
    let mut reg_c = None;
    let mut minimizers = None;
    if want_reg_c {
        let (xs, vals) = comparator_sequence(
            &oracle,
            &stream,
            &set,
            cfg.problem.horizon,
            cfg.metrics.minimizer_tol,
        )?;
        reg_c = Some(dynamic_regret(&record, &xs, &vals)?);
        minimizers = Some(xs);
    }
    let minimizers_exact = oracle.kind() == LossKind::Quadratic;

    // Local regret via the evaluation pass.
    let want_local = cfg.metrics.local_regret.unwrap_or(hp.mode == Mode::Nonconvex);
    if want_local && local.is_none() {
        local = Some(local_regret(&record, &oracle, &stream)?);
    }
    if !want_local {
        local = local.filter(|_| cfg.optimizer.alpha == AlphaRule::Prescribed);
    }

    // Bounds.
    let consensus = consensus_error(&record)?;
    let mut reports = Vec::new();
    let mut bound_t1 = None;
    let mut bound_c3 = None;
    if cfg.metrics.bounds {
        match consensus.to_bound_report(sigma2) {
            Some(r) => reports.push(r),
            None => skipped.push(
                "consensus_bound: needs the adaptive EWMA regime with eta < 1".into(),
            ),
        }
        if let (Some(reg_c), Some(xs)) = (&reg_c, &minimizers) {
            match dynamic_regret_bound(&record, xs, reg_c, minimizers_exact) {
                Ok(series) => {
                    reports.push(series.report);
                    bound_t1 = Some(series.per_round);
                }
                Err(
                    e @ (MetricsError::WrongMode { .. }
                    | MetricsError::WrongSchedule { .. }
                    | MetricsError::NoMomentumDecay(_)
                    | MetricsError::NotAdaptive
                    | MetricsError::UnboundedSet),
                ) => skipped.push(format!("dynamic_regret_bound: {e}")),
                Err(e) => return Err(e.into()),
            }
        } else if hp.mode == Mode::Convex {
            skipped.push("dynamic_regret_bound: dynamic_regret is disabled".into());
        }
        if let Some(local) = &local {
            if let Some((env_lo, env_hi, rho)) = prescription {
                let (lipschitz, lipschitz_exact) =
                    lipschitz_constant(&oracle, &stream, &set, &record);
                match stationarity_bound(
                    &record,
                    &local.series,
                    rho,
                    lipschitz,
                    lipschitz_exact,
                    env_lo,
                    env_hi,
                ) {
                    Ok(series) => {
                        reports.push(series.report);
                        bound_c3 = Some(series.per_round);
                    }
                    Err(
                        e @ (MetricsError::WrongMode { .. }
                        | MetricsError::WrongSchedule { .. }
                        | MetricsError::NoMomentumDecay(_)
                        | MetricsError::NotAdaptive),
                    ) => skipped.push(format!("stationarity_bound: {e}")),
                    Err(e) => return Err(e.into()),
                }
            } else if hp.mode == Mode::Nonconvex {
                skipped.push(
                    "stationarity_bound: needs alpha = prescribed to pin its constants".into(),
                );
            }
        }
    }

    Ok(Executed {
        record,
        final_states,
        reg_c,
        minimizers_exact,
        local,
        consensus,
        reports,
        bound_t1,
        bound_c3,
        sigma2,
        alpha,
        skipped,
    })
}

// ---------------------------------------------------------------------------
// CSV emission and parsing
// ---------------------------------------------------------------------------

/// Column contract for `metrics.csv`.
pub const METRICS_HEADER: &str = "t,loss,regC,regN,consensus_err,Bt,bound_t1,bound_c3";

fn cell(v: Option<f64>) -> String {
    v.map(|v| format!("{v:?}")).unwrap_or_default()
}

/// Render the per-round metrics table. Row `t` describes round `t`: the
/// loss and consensus error of the iterate block entering the round,
/// cumulative regret up to it, and the bound envelopes at that prefix.
pub fn metrics_csv(ex: &Executed) -> String {
    let t_rounds = ex.record.rounds();
    let losses = ex.record.network_losses();
    let mut out = String::from(METRICS_HEADER);
    out.push('\n');
    for t in 1..=t_rounds {
        let i = t - 1;
        let row = [
            format!("{t}"),
            cell(Some(losses[i])),
            cell(ex.reg_c.as_ref().map(|v| v[i])),
            cell(ex.local.as_ref().map(|l| l.series[i])),
            cell(Some(ex.consensus.mean[i])),
            cell(ex.consensus.bound.as_ref().map(|b| b[i])),
            cell(ex.bound_t1.as_ref().map(|b| b[i])),
            cell(ex.bound_c3.as_ref().map(|b| b[i])),
        ];
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// One parsed `metrics.csv` row.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub t: usize,
    pub loss: f64,
    pub reg_c: Option<f64>,
    pub reg_n: Option<f64>,
    pub consensus_err: f64,
    pub b_t: Option<f64>,
    pub bound_t1: Option<f64>,
    pub bound_c3: Option<f64>,
}

/// Parse a `metrics.csv` produced by [`metrics_csv`].
pub fn read_metrics_csv(text: &str) -> Result<Vec<MetricsRow>> {
    let mut lines = text.lines().enumerate();
    let Some((_, header)) = lines.next() else {
        return Err(HarnessError::Csv { line: 1, msg: "empty file".into() });
    };
    if header != METRICS_HEADER {
        return Err(HarnessError::Csv {
            line: 1,
            msg: format!("unexpected header {header:?}"),
        });
    }
    let mut rows = Vec::new();
    for (idx, line) in lines {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 8 {
            return Err(HarnessError::Csv {
                line: idx + 1,
                msg: format!("expected 8 fields, got {}", fields.len()),
            });
        }
        let opt = |i: usize| -> Result<Option<f64>> {
            let f: &str = fields[i];
            if f.is_empty() {
                return Ok(None);
            }
            f.parse::<f64>().map(Some).map_err(|e| HarnessError::Csv {
                line: idx + 1,
                msg: format!("bad number {f:?}: {e}"),
            })
        };
        let need = |i: usize| -> Result<f64> {
            opt(i)?.ok_or_else(|| HarnessError::Csv {
                line: idx + 1,
                msg: format!("column {} must not be empty", i + 1),
            })
        };
        rows.push(MetricsRow {
            t: fields[0].parse().map_err(|e| HarnessError::Csv {
                line: idx + 1,
                msg: format!("bad round index {:?}: {e}", fields[0]),
            })?,
            loss: need(1)?,
            reg_c: opt(2)?,
            reg_n: opt(3)?,
            consensus_err: need(4)?,
            b_t: opt(5)?,
            bound_t1: opt(6)?,
            bound_c3: opt(7)?,
        });
    }
    Ok(rows)
}

/// Parse any all-numeric CSV with a header (compare and sweep summaries):
/// header names plus rows of optional floats (empty cells allowed).
pub fn read_table(text: &str) -> Result<(Vec<String>, Vec<Vec<Option<f64>>>)> {
    let mut lines = text.lines().enumerate();
    let Some((_, header)) = lines.next() else {
        return Err(HarnessError::Csv { line: 1, msg: "empty file".into() });
    };
    let names: Vec<String> = header.split(',').map(str::to_string).collect();
    let mut rows = Vec::new();
    for (idx, line) in lines {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != names.len() {
            return Err(HarnessError::Csv {
                line: idx + 1,
                msg: format!("expected {} fields, got {}", names.len(), fields.len()),
            });
        }
        let mut row = Vec::with_capacity(fields.len());
        for f in fields {
            if f.is_empty() {
                row.push(None);
            } else {
                row.push(Some(f.parse::<f64>().map_err(|e| HarnessError::Csv {
                    line: idx + 1,
                    msg: format!("bad number {f:?}: {e}"),
                })?));
            }
        }
        rows.push(row);
    }
    Ok((names, rows))
}

fn write_file(path: &Path, content: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    fs::write(path, content).map_err(|e| io_err(path, e))
}

fn checkpoints_csv(ex: &Executed) -> String {
    let p = ex.record.dim();
    let t_rounds = ex.record.rounds();
    let mut out = checkpoint_header(p);
    out.push('\n');
    for state in &ex.final_states {
        out.push_str(&checkpoint_row(t_rounds, state));
        out.push('\n');
    }
    out
}

fn sanitize_label(label: &str) -> String {
    let cleaned: String = label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
        .collect();
    if cleaned.is_empty() {
        "run".into()
    } else {
        cleaned
    }
}

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

/// Files one operation wrote, plus the executed result(s).
#[derive(Debug)]
pub struct RunArtifacts {
    pub executed: Executed,
    pub files: Vec<PathBuf>,
}

fn write_reports(ex: &Executed, out_dir: &Path, files: &mut Vec<PathBuf>) -> Result<()> {
    for report in &ex.reports {
        let path = out_dir.join(format!("report_{}.txt", report.name));
        write_file(&path, &report.to_text())?;
        files.push(path);
    }
    Ok(())
}

fn announce(cfg: &ExperimentConfig, ex: &Executed) {
    if cfg.quiet {
        return;
    }
    let losses = ex.record.network_losses();
    println!(
        "run {}: T={} n={} sigma2={:.6} alpha={:.6} final_loss={:.6}",
        cfg.label,
        ex.record.rounds(),
        ex.record.n(),
        ex.sigma2,
        ex.alpha,
        losses.last().copied().unwrap_or(f64::NAN),
    );
    for report in &ex.reports {
        println!(
            "bound {}: holds={} slack={:.3e} exact_constants={}",
            report.name, report.holds, report.slack, report.all_constants_exact
        );
    }
    for s in &ex.skipped {
        println!("skipped {s}");
    }
}

/// Execute and write the full artifact set: `metrics.csv`,
/// `checkpoints.csv` (unless disabled), and the bound reports.
pub fn run(cfg: &ExperimentConfig, out_dir: &Path) -> Result<RunArtifacts> {
    let executed = execute(cfg)?;
    let mut files = Vec::new();
    let metrics_path = out_dir.join("metrics.csv");
    write_file(&metrics_path, &metrics_csv(&executed))?;
    files.push(metrics_path);
    if cfg.checkpoints {
        let path = out_dir.join("checkpoints.csv");
        write_file(&path, &checkpoints_csv(&executed))?;
        files.push(path);
    }
    write_reports(&executed, out_dir, &mut files)?;
    announce(cfg, &executed);
    if !cfg.quiet {
        for f in &files {
            println!("wrote {}", f.display());
        }
    }
    Ok(RunArtifacts { executed, files })
}

/// Execute and write only the bound reports.
pub fn bounds(cfg: &ExperimentConfig, out_dir: &Path) -> Result<RunArtifacts> {
    let executed = execute(cfg)?;
    let mut files = Vec::new();
    write_reports(&executed, out_dir, &mut files)?;
    announce(cfg, &executed);
    Ok(RunArtifacts { executed, files })
}

/// Result of a multi-config comparison.
#[derive(Debug)]
pub struct CompareArtifacts {
    pub executed: Vec<Executed>,
    pub csv_path: PathBuf,
    /// Whether any run violated an exactly-known bound.
    pub hard_violation: bool,
}

/// Run every config (they must share a horizon) and join their per-round
/// loss/regret columns into `compare.csv`, one column group per label.
pub fn compare(cfgs: &[ExperimentConfig], out_dir: &Path) -> Result<CompareArtifacts> {
    if cfgs.len() < 2 {
        return Err(HarnessError::TooFewConfigs);
    }
    let horizon = cfgs[0].problem.horizon;
    for c in &cfgs[1..] {
        if c.problem.horizon != horizon {
            return Err(HarnessError::HorizonMismatch {
                first: horizon,
                other: c.problem.horizon,
            });
        }
    }
    let mut executed = Vec::with_capacity(cfgs.len());
    for cfg in cfgs {
        executed.push(execute(cfg)?);
    }
    // Distinct column labels: later duplicates get a copy index.
    let raw: Vec<String> = cfgs.iter().map(|c| sanitize_label(&c.label)).collect();
    let labels: Vec<String> = raw
        .iter()
        .enumerate()
        .map(|(i, label)| {
            let copy = 1 + raw[..i].iter().filter(|l| *l == label).count();
            if copy > 1 {
                format!("{label}_{copy}")
            } else {
                label.clone()
            }
        })
        .collect();
    let mut header = vec!["t".to_string()];
    for (ex, label) in executed.iter().zip(&labels) {
        header.push(format!("{label}_loss"));
        if ex.reg_c.is_some() {
            header.push(format!("{label}_regC"));
        }
        if ex.local.is_some() {
            header.push(format!("{label}_regN"));
        }
    }
    let mut out = header.join(",");
    out.push('\n');
    let losses: Vec<Vec<f64>> = executed.iter().map(|e| e.record.network_losses()).collect();
    for t in 1..=horizon {
        let mut row = vec![format!("{t}")];
        for (k, ex) in executed.iter().enumerate() {
            row.push(cell(Some(losses[k][t - 1])));
            if let Some(r) = &ex.reg_c {
                row.push(cell(Some(r[t - 1])));
            }
            if let Some(l) = &ex.local {
                row.push(cell(Some(l.series[t - 1])));
            }
        }
        out.push_str(&row.join(","));
        out.push('\n');
    }
    let csv_path = out_dir.join("compare.csv");
    write_file(&csv_path, &out)?;
    let hard_violation = executed.iter().any(|e| e.hard_violation());
    if !cfgs.iter().all(|c| c.quiet) {
        println!("wrote {}", csv_path.display());
    }
    Ok(CompareArtifacts { executed, csv_path, hard_violation })
}

/// Result of an axis sweep.
#[derive(Debug)]
pub struct SweepArtifacts {
    pub summary_path: PathBuf,
    /// (axis value, per-seed outputs) per cell, in axis order.
    pub cells: Vec<(f64, Vec<Executed>)>,
    pub hard_violation: bool,
}

/// Run the config once per axis value (times `seeds` master seeds), write
/// per-cell metrics CSVs, and summarize final loss/regret per cell in
/// `sweep_summary.csv`.
pub fn sweep(cfg: &ExperimentConfig, out_dir: &Path) -> Result<SweepArtifacts> {
    let Some(sweep_cfg) = &cfg.sweep else {
        return Err(cfg_err(
            &cfg.label,
            "[sweep]: section with one axis (beta3, r, or iota) is required",
        ));
    };
    let axis = &sweep_cfg.axis;
    let mut cells = Vec::new();
    let mut summary = format!("{},sigma2,final_loss,final_regC,final_regN\n", axis.name());
    for &value in axis.values() {
        let mut cell_cfg = cfg.clone();
        match axis {
            SweepAxis::Beta3(_) => cell_cfg.optimizer.hp.beta3 = value,
            SweepAxis::Radius(_) => cell_cfg.topology.r = value,
            SweepAxis::Iota(_) => cell_cfg.topology.iota = value,
        }
        let mut runs = Vec::with_capacity(sweep_cfg.seeds);
        let mut mean_sigma2 = 0.0;
        let mut mean_loss = 0.0;
        let mut mean_reg_c = Some(0.0);
        let mut mean_reg_n = Some(0.0);
        for j in 0..sweep_cfg.seeds {
            let mut seed_cfg = cell_cfg.clone();
            seed_cfg.seed = cfg.seed + j as u64;
            let ex = execute(&seed_cfg).map_err(|e| {
                cfg_err(
                    &cfg.label,
                    format!("sweep cell {}={value} seed {}: {e}", axis.name(), seed_cfg.seed),
                )
            })?;
            let dir = out_dir
                .join(format!("{}_{value:?}", axis.name()))
                .join(format!("seed_{}", seed_cfg.seed));
            write_file(&dir.join("metrics.csv"), &metrics_csv(&ex))?;
            mean_sigma2 += ex.sigma2;
            mean_loss += ex.record.network_losses().last().copied().unwrap_or(f64::NAN);
            mean_reg_c = match (&mean_reg_c, &ex.reg_c) {
                (Some(acc), Some(r)) => Some(acc + r.last().copied().unwrap_or(f64::NAN)),
                _ => None,
            };
            mean_reg_n = match (&mean_reg_n, &ex.local) {
                (Some(acc), Some(l)) => Some(acc + l.series.last().copied().unwrap_or(f64::NAN)),
                _ => None,
            };
            runs.push(ex);
        }
        let k = sweep_cfg.seeds as f64;
        summary.push_str(&format!(
            "{value:?},{:?},{:?},{},{}\n",
            mean_sigma2 / k,
            mean_loss / k,
            cell(mean_reg_c.map(|v| v / k)),
            cell(mean_reg_n.map(|v| v / k)),
        ));
        cells.push((value, runs));
    }
    let summary_path = out_dir.join("sweep_summary.csv");
    write_file(&summary_path, &summary)?;
    let hard_violation = cells
        .iter()
        .any(|(_, runs)| runs.iter().any(|e| e.hard_violation()));
    if !cfg.quiet {
        println!("wrote {}", summary_path.display());
    }
    Ok(SweepArtifacts { summary_path, cells, hard_violation })
}
