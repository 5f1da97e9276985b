//! Regret metrics and verifiable performance bounds for logged runs.
//!
//! A [`RunRecord`] is the complete history of one network run: iterates,
//! gradients, moment snapshots, step sizes, and per-agent losses. On top of
//! it this module computes
//!
//! * **dynamic regret** — cumulative loss gap against the sequence of
//!   per-round minimizers, `(1/n) Σ_i Σ_t f_{i,t}(x_{i,t}) − Σ_t f_t(x*_t)`,
//!   with the per-coordinate **path length** `D_d = Σ_t |x*_{t+1,d} − x*_{t,d}|`
//!   measuring how fast the comparator moves;
//! * **local regret** — `(1/n) Σ_i min_{t≤T} ||G(x_{i,t})||²`, where `G` is
//!   the projected gradient of the time-averaged loss (a dedicated
//!   evaluation pass re-runs the moment recursions on averaged gradients);
//! * **consensus error** — per-round distances `||x_{i,t} − x̄_t||` with the
//!   closed-form envelope `B_t = (2√n / ((1−η)√((1−β₂)(1−β₃)))) ·
//!   Σ_{s<t} α_s σ₂^{t−s−1}` that the mean distance must stay under;
//! * two **bound evaluators** that plug logged quantities into the method's
//!   guarantee formulas — a four-term bound on dynamic regret for the
//!   diminishing-step convex regime ([`dynamic_regret_bound`]) and a
//!   two-term `O((2+log T)/T)` bound on local regret for the constant-step
//!   nonconvex regime ([`stationarity_bound`]) — and report measured value,
//!   bound, slack, and every constant used with an exact/estimated flag.

use crate::optimizer::{AgentState, HyperParams, Mode, Schedule, SecondMoment};
use crate::problems::{LossOracle, ProblemError, RhoBound, Stream};
use crate::projections::{project, ConstraintSet, Metric, ProjectionError};
use crate::topology::{MixingMatrix, TopologyError};
use crate::vecmath::row_mean;

/// Errors from metric computation and bound evaluation.
#[derive(Debug, thiserror::Error)]
pub enum MetricsError {
    #[error("run record holds no rounds")]
    EmptyRun,
    #[error("record shape error: {0}")]
    Shape(String),
    #[error("minimizer for round {round} is outside the feasible set")]
    InfeasibleMinimizer { round: usize },
    #[error("got {got} minimizers for {expected} rounds")]
    MinimizerCount { got: usize, expected: usize },
    #[error("bound needs a bounded feasible set (finite sup-norm diameter)")]
    UnboundedSet,
    #[error("bound needs the {expected} step schedule")]
    WrongSchedule { expected: &'static str },
    #[error("bound applies to {expected}-mode runs only")]
    WrongMode { expected: &'static str },
    #[error("bound needs momentum decay lambda < 1, got {0}")]
    NoMomentumDecay(f64),
    #[error("bound needs the adaptive EWMA second moment with beta2 > 0")]
    NotAdaptive,
    #[error("projected gradient undefined: zero curvature at coordinate {coord} with eps = 0")]
    ZeroCurvature { coord: usize },
    #[error("step size {0} must be positive and finite")]
    BadAlpha(f64),
    #[error(
        "run used step size {got} but the constant-step stationarity bound \
         requires (2-beta1) lo^2 / (2 rho hi) = {expected}"
    )]
    StepSizeMismatch { expected: f64, got: f64 },
    #[error(
        "observed second-moment floor is zero (some first-round gradient \
         coordinate vanished), so the stationarity constants are undefined"
    )]
    ZeroSecondMomentFloor,
    #[error("first-moment cap broken at round {round}, agent {agent}")]
    MomentBound { round: usize, agent: usize },
    #[error("second-moment estimate decreased at round {round}, agent {agent}, coordinate {coord}")]
    VhatMonotonicity { round: usize, agent: usize, coord: usize },
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Projection(#[from] ProjectionError),
    #[error(transparent)]
    Topology(#[from] TopologyError),
}

type Result<T> = std::result::Result<T, MetricsError>;

/// Complete append-only history of one run.
#[derive(Debug, Clone)]
pub struct RunRecord {
    hp: HyperParams,
    w: MixingMatrix,
    set: ConstraintSet,
    /// `iterates[k]` is the iterate block after `k` rounds; `[0]` is the
    /// initial block.
    iterates: Vec<Vec<Vec<f64>>>,
    /// Corrected outputs aligned with `iterates` (populated when the
    /// corrected rule is on; `[0]` equals the initial block).
    corrected: Option<Vec<Vec<Vec<f64>>>>,
    /// `gradients[t-1]` is the per-agent gradient block used at round `t`.
    gradients: Vec<Vec<Vec<f64>>>,
    /// Post-update first moments at round `t` live at `[t-1]`.
    m_hist: Vec<Vec<Vec<f64>>>,
    /// Post-update relaxed second moments at round `t` live at `[t-1]`.
    vhat_hist: Vec<Vec<Vec<f64>>>,
    /// `alphas[t-1]` is the step size of round `t`.
    alphas: Vec<f64>,
    /// `losses[t-1][i] = f_{i,t}` evaluated at the iterate entering round `t`.
    losses: Vec<Vec<f64>>,
}

impl RunRecord {
    pub fn new(
        hp: HyperParams,
        w: MixingMatrix,
        set: ConstraintSet,
        init: Vec<Vec<f64>>,
    ) -> RunRecord {
        let corrected = if hp.corrected { Some(vec![init.clone()]) } else { None };
        RunRecord {
            hp,
            w,
            set,
            iterates: vec![init],
            corrected,
            gradients: Vec::new(),
            m_hist: Vec::new(),
            vhat_hist: Vec::new(),
            alphas: Vec::new(),
            losses: Vec::new(),
        }
    }

    /// Append one executed round.
    #[allow(clippy::too_many_arguments)]
    pub fn push_round(
        &mut self,
        grads: Vec<Vec<f64>>,
        alpha: f64,
        losses: Vec<f64>,
        m: Vec<Vec<f64>>,
        vhat: Vec<Vec<f64>>,
        new_iterates: Vec<Vec<f64>>,
        new_corrected: Option<Vec<Vec<f64>>>,
    ) -> Result<()> {
        let n = self.n();
        let p = self.dim();
        for (name, block) in [
            ("gradients", &grads),
            ("first moments", &m),
            ("second moments", &vhat),
            ("iterates", &new_iterates),
        ] {
            if block.len() != n || block.iter().any(|row| row.len() != p) {
                return Err(MetricsError::Shape(format!(
                    "{name} block must be {n} rows of {p} coordinates"
                )));
            }
        }
        if losses.len() != n {
            return Err(MetricsError::Shape(format!("need {n} loss values")));
        }
        match (&mut self.corrected, new_corrected) {
            (Some(hist), Some(block)) => {
                if block.len() != n || block.iter().any(|row| row.len() != p) {
                    return Err(MetricsError::Shape(format!(
                        "corrected block must be {n} rows of {p} coordinates"
                    )));
                }
                hist.push(block);
            }
            (None, None) => {}
            _ => {
                return Err(MetricsError::Shape(
                    "corrected blocks must be supplied exactly when the record tracks them"
                        .into(),
                ))
            }
        }
        self.gradients.push(grads);
        self.alphas.push(alpha);
        self.losses.push(losses);
        self.m_hist.push(m);
        self.vhat_hist.push(vhat);
        self.iterates.push(new_iterates);
        Ok(())
    }

    /// Number of executed rounds `T`.
    pub fn rounds(&self) -> usize {
        self.gradients.len()
    }

    pub fn n(&self) -> usize {
        self.iterates[0].len()
    }

    pub fn dim(&self) -> usize {
        self.iterates[0][0].len()
    }

    pub fn hyper(&self) -> &HyperParams {
        &self.hp
    }

    pub fn mixing(&self) -> &MixingMatrix {
        &self.w
    }

    pub fn set(&self) -> &ConstraintSet {
        &self.set
    }

    pub fn iterates(&self) -> &[Vec<Vec<f64>>] {
        &self.iterates
    }

    pub fn corrected(&self) -> Option<&[Vec<Vec<f64>>]> {
        self.corrected.as_deref()
    }

    pub fn gradients(&self) -> &[Vec<Vec<f64>>] {
        &self.gradients
    }

    pub fn m_hist(&self) -> &[Vec<Vec<f64>>] {
        &self.m_hist
    }

    pub fn vhat_hist(&self) -> &[Vec<Vec<f64>>] {
        &self.vhat_hist
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn losses(&self) -> &[Vec<f64>] {
        &self.losses
    }

    /// Agent-average loss per round (the time series a training curve plots).
    pub fn network_losses(&self) -> Vec<f64> {
        self.losses
            .iter()
            .map(|row| row.iter().sum::<f64>() / row.len() as f64)
            .collect()
    }

    /// Observed gradient sup-norm over the whole run.
    pub fn gradient_sup_norm(&self) -> f64 {
        let mut g_inf: f64 = 0.0;
        for block in &self.gradients {
            for row in block {
                for v in row {
                    g_inf = g_inf.max(v.abs());
                }
            }
        }
        g_inf
    }

    /// Extrema of `sqrt(vhat)` over all agents, rounds, coordinates of the
    /// optimizer pass.
    pub fn vhat_sqrt_extrema(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi: f64 = 0.0;
        for block in &self.vhat_hist {
            for row in block {
                for v in row {
                    let s = v.sqrt();
                    lo = lo.min(s);
                    hi = hi.max(s);
                }
            }
        }
        if self.vhat_hist.is_empty() {
            (0.0, 0.0)
        } else {
            (lo, hi)
        }
    }
}

/// One named constant entering a bound, with provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct Constant {
    pub name: String,
    pub value: f64,
    /// `true` when the value is exactly known (loss algebra, logged data);
    /// `false` for data-derived estimates.
    pub exact: bool,
}

impl Constant {
    fn exact(name: &str, value: f64) -> Constant {
        Constant { name: name.into(), value, exact: true }
    }

    fn flagged(name: &str, value: f64, exact: bool) -> Constant {
        Constant { name: name.into(), value, exact }
    }
}

/// Outcome of evaluating one bound against a measured quantity.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    /// Which bound: `dynamic_regret_bound`, `stationarity_bound`,
    /// `consensus_bound`.
    pub name: String,
    pub measured: f64,
    pub bound: f64,
    /// `bound - measured`; negative means violated.
    pub slack: f64,
    /// `measured <= bound + 1e-9`.
    pub holds: bool,
    /// Whether every constant used is exactly known; only then is a
    /// violation treated as a hard failure.
    pub all_constants_exact: bool,
    pub constants: Vec<Constant>,
    pub terms: Vec<(String, f64)>,
}

/// Slack tolerance on every bound comparison.
pub const BOUND_TOL: f64 = 1e-9;

impl BoundReport {
    fn assemble(
        name: &str,
        measured: f64,
        bound: f64,
        constants: Vec<Constant>,
        terms: Vec<(String, f64)>,
    ) -> BoundReport {
        let all_exact = constants.iter().all(|c| c.exact);
        BoundReport {
            name: name.into(),
            measured,
            bound,
            slack: bound - measured,
            holds: measured <= bound + BOUND_TOL,
            all_constants_exact: all_exact,
            constants,
            terms,
        }
    }

    /// A violation that must fail the run: the bound broke with every
    /// constant exactly known.
    pub fn hard_violation(&self) -> bool {
        !self.holds && self.all_constants_exact
    }

    /// Flat `key = value` text block.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("report = {}\n", self.name));
        out.push_str(&format!("holds = {}\n", self.holds));
        out.push_str(&format!("measured = {:?}\n", self.measured));
        out.push_str(&format!("bound = {:?}\n", self.bound));
        out.push_str(&format!("slack = {:?}\n", self.slack));
        out.push_str(&format!(
            "all_constants_exact = {}\n",
            self.all_constants_exact
        ));
        for (name, value) in &self.terms {
            out.push_str(&format!("term.{name} = {value:?}\n"));
        }
        for c in &self.constants {
            out.push_str(&format!("const.{} = {:?}\n", c.name, c.value));
            out.push_str(&format!(
                "const.{}.provenance = {}\n",
                c.name,
                if c.exact { "exact" } else { "estimated" }
            ));
        }
        out
    }
}

/// Cumulative dynamic regret per prefix:
/// `reg[t-1] = Σ_{s≤t} [ (1/n) Σ_i f_{i,s}(x_{i,s}) − f_s(x*_s) ]`,
/// with recorded losses on the left and supplied minimizer values
/// `f_s(x*_s)` on the right. Minimizers must be feasible.
pub fn dynamic_regret(
    record: &RunRecord,
    minimizers: &[Vec<f64>],
    minimizer_values: &[f64],
) -> Result<Vec<f64>> {
    let t_rounds = record.rounds();
    if t_rounds == 0 {
        return Err(MetricsError::EmptyRun);
    }
    if minimizers.len() != t_rounds || minimizer_values.len() != t_rounds {
        return Err(MetricsError::MinimizerCount {
            got: minimizers.len().min(minimizer_values.len()),
            expected: t_rounds,
        });
    }
    for (t, x) in minimizers.iter().enumerate() {
        if !record.set.contains(x, 1e-6) {
            return Err(MetricsError::InfeasibleMinimizer { round: t + 1 });
        }
    }
    let mut out = Vec::with_capacity(t_rounds);
    let mut acc = 0.0;
    for (t, row) in record.losses.iter().enumerate() {
        let mean = row.iter().sum::<f64>() / row.len() as f64;
        acc += mean - minimizer_values[t];
        out.push(acc);
    }
    Ok(out)
}

/// Per-coordinate comparator variation `D_d = Σ_{t<T} |x*_{t+1,d} − x*_{t,d}|`
/// and its total `Σ_d D_d`. A single point (or empty sequence) has zero path.
pub fn path_length(minimizers: &[Vec<f64>]) -> (Vec<f64>, f64) {
    let Some(first) = minimizers.first() else {
        return (Vec::new(), 0.0);
    };
    let mut per_coord = vec![0.0; first.len()];
    for pair in minimizers.windows(2) {
        for (d, acc) in per_coord.iter_mut().enumerate() {
            *acc += (pair[1][d] - pair[0][d]).abs();
        }
    }
    let total = per_coord.iter().sum();
    (per_coord, total)
}

/// The projected gradient of a loss at `x` given moment state:
/// `x⁺ = Proj[ mixed − α m / (√v̂ + ε) ]` (Euclidean projection) and
/// `G_d = ((√v̂_d + ε)/α)(x_d − x⁺_d)`. With no constraint and `mixed = x`
/// this reduces to `G = m` exactly.
pub fn projected_gradient(
    set: &ConstraintSet,
    x: &[f64],
    mixed: &[f64],
    m: &[f64],
    v_hat: &[f64],
    epsilon: f64,
    alpha: f64,
) -> Result<Vec<f64>> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(MetricsError::BadAlpha(alpha));
    }
    let p = x.len();
    let mut denom = Vec::with_capacity(p);
    for d in 0..p {
        let s = v_hat[d].sqrt() + epsilon;
        if s == 0.0 {
            return Err(MetricsError::ZeroCurvature { coord: d });
        }
        denom.push(s);
    }
    let mut target = Vec::with_capacity(p);
    for d in 0..p {
        target.push(mixed[d] - alpha * m[d] / denom[d]);
    }
    let xplus = project(set, &Metric::Identity, &target)?;
    Ok((0..p).map(|d| denom[d] / alpha * (x[d] - xplus[d])).collect())
}

/// Output of the local-regret evaluation pass.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalRegret {
    /// `series[t-1] = (1/n) Σ_i min_{s≤t} ||G_{i,s}||²` — nonincreasing.
    pub series: Vec<f64>,
    /// Raw per-round, per-agent squared projected-gradient norms.
    pub per_agent_sq: Vec<Vec<f64>>,
    /// Final per-agent running minima.
    pub per_agent_min: Vec<f64>,
    /// Extrema of `sqrt(vhat)` over the evaluation pass.
    pub vhat_sqrt_min: f64,
    pub vhat_sqrt_max: f64,
}

/// Local regret via a dedicated evaluation pass: at each round the
/// time-averaged gradient `ḡ_{i,t} = (1/t) Σ_{s≤t} ∇f_{i,s}(x_{i,t})` (all
/// past losses re-evaluated at the current iterate) drives a shadow copy of
/// the moment recursions, and the projected gradient of Definition-style
/// mapping is measured at the logged iterates. Cost is O(T²) gradient
/// evaluations.
pub fn local_regret(
    record: &RunRecord,
    oracle: &LossOracle,
    stream: &Stream,
) -> Result<LocalRegret> {
    let t_rounds = record.rounds();
    if t_rounds == 0 {
        return Err(MetricsError::EmptyRun);
    }
    let n = record.n();
    let p = record.dim();
    if stream.n_agents() != n {
        return Err(MetricsError::Shape(format!(
            "stream feeds {} agents, record holds {n}",
            stream.n_agents()
        )));
    }
    if oracle.dim() != p {
        return Err(MetricsError::Shape(format!(
            "oracle dimension {} differs from record dimension {p}",
            oracle.dim()
        )));
    }
    let mut shadow: Vec<AgentState> = (0..n).map(|_| AgentState::fresh(vec![0.0; p])).collect();
    let mut per_agent_sq = Vec::with_capacity(t_rounds);
    let mut running_min = vec![f64::INFINITY; n];
    let mut series = Vec::with_capacity(t_rounds);
    let mut vlo = f64::INFINITY;
    let mut vhi: f64 = 0.0;
    for t in 1..=t_rounds {
        let block = &record.iterates[t - 1];
        let mixed = record.w.mix(block)?;
        let alpha = record.alphas[t - 1];
        let mut row = Vec::with_capacity(n);
        for i in 0..n {
            let mut gbar = vec![0.0; p];
            for s in 1..=t {
                let g = oracle.grad(&block[i], &stream.batch(i, s))?;
                for (acc, v) in gbar.iter_mut().zip(&g) {
                    *acc += v;
                }
            }
            let inv = 1.0 / t as f64;
            for v in &mut gbar {
                *v *= inv;
            }
            shadow[i].update_moments(&gbar, t, &record.hp);
            for v in &shadow[i].v_hat {
                let s = v.sqrt();
                vlo = vlo.min(s);
                vhi = vhi.max(s);
            }
            let g_map = projected_gradient(
                &record.set,
                &block[i],
                &mixed[i],
                &shadow[i].m,
                &shadow[i].v_hat,
                record.hp.epsilon,
                alpha,
            )?;
            let sq = g_map.iter().map(|v| v * v).sum::<f64>();
            row.push(sq);
            running_min[i] = running_min[i].min(sq);
        }
        series.push(running_min.iter().sum::<f64>() / n as f64);
        per_agent_sq.push(row);
    }
    Ok(LocalRegret {
        series,
        per_agent_sq,
        per_agent_min: running_min,
        vhat_sqrt_min: vlo,
        vhat_sqrt_max: vhi,
    })
}

/// Per-round disagreement diagnostics with the closed-form envelope.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsensusReport {
    /// `per_agent[t-1][i] = ||x_{i,t} − x̄_t||` at the iterate entering
    /// round `t`.
    pub per_agent: Vec<Vec<f64>>,
    pub mean: Vec<f64>,
    pub max: Vec<f64>,
    /// Envelope `B_t`; `None` when the run is outside the adaptive EWMA
    /// regime (the constant would be undefined).
    pub bound: Option<Vec<f64>>,
    /// `mean_t <= B_t + 1e-9` at every round; `None` when not evaluable.
    pub holds: Option<bool>,
}

impl ConsensusReport {
    /// Condense to a standard report at the round with least slack.
    pub fn to_bound_report(&self, sigma2: f64) -> Option<BoundReport> {
        let bound = self.bound.as_ref()?;
        let mut worst = 0usize;
        let mut worst_slack = f64::INFINITY;
        for (t, (m, b)) in self.mean.iter().zip(bound).enumerate() {
            if b - m < worst_slack {
                worst_slack = b - m;
                worst = t;
            }
        }
        let mut report = BoundReport::assemble(
            "consensus_bound",
            self.mean[worst],
            bound[worst],
            vec![Constant::exact("sigma2", sigma2)],
            vec![("worst_round".into(), (worst + 1) as f64)],
        );
        // `holds` must reflect every round, not only the reported one.
        report.holds = self.holds.unwrap_or(false);
        report
            .terms
            .push(("rounds_checked".into(), self.mean.len() as f64));
        Some(report)
    }
}

/// Mean/max agent disagreement per round plus the `B_t` envelope.
///
/// Round `t` measures the iterate block the round started from, which is
/// what the envelope indexes; the step size for the `s = 0` term follows
/// the first round's value.
pub fn consensus_error(record: &RunRecord) -> Result<ConsensusReport> {
    let t_rounds = record.rounds();
    if t_rounds == 0 {
        return Err(MetricsError::EmptyRun);
    }
    let n = record.n();
    let mut per_agent = Vec::with_capacity(t_rounds);
    let mut mean = Vec::with_capacity(t_rounds);
    let mut max = Vec::with_capacity(t_rounds);
    for t in 1..=t_rounds {
        let block = &record.iterates[t - 1];
        let center = row_mean(block);
        let mut row = Vec::with_capacity(n);
        for x in block {
            let d = x
                .iter()
                .zip(&center)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            row.push(d);
        }
        mean.push(row.iter().sum::<f64>() / n as f64);
        max.push(row.iter().cloned().fold(0.0, f64::max));
        per_agent.push(row);
    }
    let bound = record.hp.direction_bound().map(|db| {
        let sigma2 = record.w.sigma2();
        let c = 2.0 * (n as f64).sqrt() * db;
        let mut series = Vec::with_capacity(t_rounds);
        let mut s = record.alphas[0]; // s = 0 term uses the round-1 step
        series.push(c * s);
        for t in 2..=t_rounds {
            s = sigma2 * s + record.alphas[t - 2];
            series.push(c * s);
        }
        series
    });
    let holds = bound.as_ref().map(|b| {
        mean.iter()
            .zip(b)
            .all(|(m, bt)| *m <= *bt + BOUND_TOL)
    });
    Ok(ConsensusReport { per_agent, mean, max, bound, holds })
}

/// A bound evaluation with its per-prefix series (for CSV columns).
#[derive(Debug, Clone, PartialEq)]
pub struct BoundSeries {
    /// RHS evaluated on the prefix ending at each round.
    pub per_round: Vec<f64>,
    /// Full-horizon report.
    pub report: BoundReport,
}

/// Four-term guarantee on dynamic regret for convex-mode runs with the
/// `α/√t` schedule, evaluated from logged quantities:
///
/// ```text
/// (α√(1+ln T) / (2√n √((1−β₂)(1−β₃)))) Σ_d ||g_{1:T,d}||
/// + p G∞ γ∞ (1 + γ∞/(2α)) / ((1−β₁)²(1−λ)²)
/// + Σ_d γ∞ (γ∞ + D_d) √(T v̂_{T,d}) / (√n (1−β₁) α)
/// + 4α√(1+ln T) Σ_d ||g_{1:T,d}|| / ((1−σ₂)√(1−β₁)√(1−η)√((1−β₂)(1−β₃)))
/// ```
///
/// `||g_{1:T,d}||` stacks every agent's round-`s` gradients into one column
/// per coordinate; `v̂_{T,d}` is the network max of the final second moment;
/// `G∞` is the observed gradient sup-norm. `minimizers_exact` records
/// whether the comparator sequence is closed-form (then a violation is a
/// hard failure) or from the numeric inner solver.
pub fn dynamic_regret_bound(
    record: &RunRecord,
    minimizers: &[Vec<f64>],
    reg_c: &[f64],
    minimizers_exact: bool,
) -> Result<BoundSeries> {
    let t_rounds = record.rounds();
    if t_rounds == 0 {
        return Err(MetricsError::EmptyRun);
    }
    let hp = &record.hp;
    if hp.mode != Mode::Convex {
        return Err(MetricsError::WrongMode { expected: "convex" });
    }
    if hp.schedule != Schedule::InvSqrtT {
        return Err(MetricsError::WrongSchedule { expected: "alpha/sqrt(t)" });
    }
    if !(hp.lambda < 1.0) {
        return Err(MetricsError::NoMomentumDecay(hp.lambda));
    }
    if !hp.adaptive || hp.second_moment != SecondMoment::Ewma || hp.beta2 <= 0.0 {
        return Err(MetricsError::NotAdaptive);
    }
    let gamma_inf = record.set.diameter_inf();
    if !gamma_inf.is_finite() {
        return Err(MetricsError::UnboundedSet);
    }
    if minimizers.len() != t_rounds || reg_c.len() != t_rounds {
        return Err(MetricsError::MinimizerCount {
            got: minimizers.len().min(reg_c.len()),
            expected: t_rounds,
        });
    }
    let n = record.n() as f64;
    let p = record.dim();
    let alpha = hp.alpha;
    let eta = hp.eta();
    let sigma2 = record.w.sigma2();
    let c1 = alpha / (2.0 * n.sqrt() * ((1.0 - hp.beta2) * (1.0 - hp.beta3)).sqrt());
    let c2 = gamma_inf * (1.0 + gamma_inf / (2.0 * alpha))
        / ((1.0 - hp.beta1).powi(2) * (1.0 - hp.lambda).powi(2));
    let c3 = gamma_inf / (n.sqrt() * (1.0 - hp.beta1) * alpha);
    let c4 = 4.0 * alpha
        / ((1.0 - sigma2)
            * (1.0 - hp.beta1).sqrt()
            * (1.0 - eta).sqrt()
            * ((1.0 - hp.beta2) * (1.0 - hp.beta3)).sqrt());

    let mut sumsq = vec![0.0; p];
    let mut g_inf: f64 = 0.0;
    let mut d_path = vec![0.0; p];
    let mut per_round = Vec::with_capacity(t_rounds);
    let mut final_terms = [0.0; 4];
    for t in 1..=t_rounds {
        for row in &record.gradients[t - 1] {
            for (d, g) in row.iter().enumerate() {
                sumsq[d] += g * g;
                g_inf = g_inf.max(g.abs());
            }
        }
        if t >= 2 {
            for (d, acc) in d_path.iter_mut().enumerate() {
                *acc += (minimizers[t - 1][d] - minimizers[t - 2][d]).abs();
            }
        }
        let block = &record.vhat_hist[t - 1];
        let sum_col_norms: f64 = sumsq.iter().map(|s| s.sqrt()).sum();
        let log_factor = (1.0 + (t as f64).ln()).sqrt();
        let term1 = c1 * log_factor * sum_col_norms;
        let term2 = p as f64 * g_inf * c2;
        let mut term3 = 0.0;
        for d in 0..p {
            let vhat_td = block.iter().map(|row| row[d]).fold(0.0, f64::max);
            term3 += c3 * (gamma_inf + d_path[d]) * (t as f64 * vhat_td).sqrt();
        }
        let term4 = c4 * log_factor * sum_col_norms;
        per_round.push(term1 + term2 + term3 + term4);
        if t == t_rounds {
            final_terms = [term1, term2, term3, term4];
        }
    }
    let constants = vec![
        Constant::exact("alpha", alpha),
        Constant::exact("beta1", hp.beta1),
        Constant::exact("beta2", hp.beta2),
        Constant::exact("beta3", hp.beta3),
        Constant::exact("lambda", hp.lambda),
        Constant::exact("eta", eta),
        Constant::exact("sigma2", sigma2),
        Constant::exact("gamma_inf", gamma_inf),
        Constant::exact("g_inf", g_inf),
        Constant::flagged("path_total", d_path.iter().sum(), minimizers_exact),
    ];
    let terms = vec![
        ("gradient_energy".into(), final_terms[0]),
        ("diameter".into(), final_terms[1]),
        ("comparator_drift".into(), final_terms[2]),
        ("network".into(), final_terms[3]),
    ];
    let report = BoundReport::assemble(
        "dynamic_regret_bound",
        *reg_c.last().unwrap(),
        *per_round.last().unwrap(),
        constants,
        terms,
    );
    Ok(BoundSeries { per_round, report })
}

/// The constant step size the stationarity guarantee prescribes:
/// `(2−β₁) lo² / (2 ρ hi)` with `lo`/`hi` the observed extrema of `√v̂`.
pub fn stationarity_step(hp: &HyperParams, rho: f64, upsilon_lo: f64, upsilon_hi: f64) -> f64 {
    (2.0 - hp.beta1) * upsilon_lo * upsilon_lo / (2.0 * rho * upsilon_hi)
}

/// Two-term `O((2+ln T)/T)` guarantee on local regret for nonconvex-mode
/// constant-step runs:
///
/// ```text
/// (2 hi² / ((2−β₁)(1−β₁)(1−η)²(1−β₂)(1−λ))) · 1/T
/// + (16 √n hi L / ((2−β₁)(1−η)√((1−β₂)(1−β₃))(1−σ₂))) · (2+ln T)/T
/// ```
///
/// `lo`/`hi` bound `√v̂` over both the optimizer and evaluation passes;
/// `rho` is the gradient smoothness constant and `lipschitz` the loss
/// Lipschitz constant, each carrying an exact/estimated flag. The run's
/// step size must equal [`stationarity_step`] (relative tolerance 1e-6).
#[allow(clippy::too_many_arguments)]
pub fn stationarity_bound(
    record: &RunRecord,
    reg_n: &[f64],
    rho: RhoBound,
    lipschitz: f64,
    lipschitz_exact: bool,
    upsilon_lo: f64,
    upsilon_hi: f64,
) -> Result<BoundSeries> {
    let t_rounds = record.rounds();
    if t_rounds == 0 {
        return Err(MetricsError::EmptyRun);
    }
    let hp = &record.hp;
    if hp.mode != Mode::Nonconvex {
        return Err(MetricsError::WrongMode { expected: "nonconvex" });
    }
    if hp.schedule != Schedule::Constant {
        return Err(MetricsError::WrongSchedule { expected: "constant" });
    }
    if !(hp.lambda < 1.0) {
        return Err(MetricsError::NoMomentumDecay(hp.lambda));
    }
    if !hp.adaptive || hp.second_moment != SecondMoment::Ewma || hp.beta2 <= 0.0 {
        return Err(MetricsError::NotAdaptive);
    }
    if reg_n.len() != t_rounds {
        return Err(MetricsError::MinimizerCount { got: reg_n.len(), expected: t_rounds });
    }
    if !(upsilon_lo > 0.0) {
        return Err(MetricsError::ZeroSecondMomentFloor);
    }
    let expected_alpha = stationarity_step(hp, rho.value, upsilon_lo, upsilon_hi);
    if (hp.alpha - expected_alpha).abs() > 1e-6 * expected_alpha.max(f64::MIN_POSITIVE) {
        return Err(MetricsError::StepSizeMismatch {
            expected: expected_alpha,
            got: hp.alpha,
        });
    }
    let n = record.n() as f64;
    let eta = hp.eta();
    let sigma2 = record.w.sigma2();
    let e1 = 2.0 * upsilon_hi * upsilon_hi
        / ((2.0 - hp.beta1)
            * (1.0 - hp.beta1)
            * (1.0 - eta).powi(2)
            * (1.0 - hp.beta2)
            * (1.0 - hp.lambda));
    let e2 = 16.0 * n.sqrt() * upsilon_hi * lipschitz
        / ((2.0 - hp.beta1)
            * (1.0 - eta)
            * ((1.0 - hp.beta2) * (1.0 - hp.beta3)).sqrt()
            * (1.0 - sigma2));
    let per_round: Vec<f64> = (1..=t_rounds)
        .map(|t| {
            let tf = t as f64;
            e1 / tf + e2 * (2.0 + tf.ln()) / tf
        })
        .collect();
    let constants = vec![
        Constant::exact("alpha", hp.alpha),
        Constant::exact("beta1", hp.beta1),
        Constant::exact("beta2", hp.beta2),
        Constant::exact("beta3", hp.beta3),
        Constant::exact("lambda", hp.lambda),
        Constant::exact("eta", eta),
        Constant::exact("sigma2", sigma2),
        Constant::exact("upsilon_lo", upsilon_lo),
        Constant::exact("upsilon_hi", upsilon_hi),
        Constant::flagged("rho", rho.value, rho.exact),
        Constant::flagged("lipschitz", lipschitz, lipschitz_exact),
    ];
    let terms = vec![
        ("momentum".into(), e1 / t_rounds as f64),
        (
            "network".into(),
            e2 * (2.0 + (t_rounds as f64).ln()) / t_rounds as f64,
        ),
    ];
    let report = BoundReport::assemble(
        "stationarity_bound",
        *reg_n.last().unwrap(),
        *per_round.last().unwrap(),
        constants,
        terms,
    );
    Ok(BoundSeries { per_round, report })
}

/// Verify the per-round moment caps on a logged run, exactly:
/// `||m_{i,t}||∞ ≤ max(||g_{i,t}||∞, ||m_{i,t−1}||∞)` and elementwise
/// `v̂_{i,t} ≥ v̂_{i,t−1}`.
pub fn moment_bounds(record: &RunRecord) -> Result<()> {
    let n = record.n();
    let p = record.dim();
    let mut prev_m_inf = vec![0.0f64; n];
    let mut prev_vhat = vec![vec![0.0f64; p]; n];
    for t in 1..=record.rounds() {
        for i in 0..n {
            let g_inf = record.gradients[t - 1][i]
                .iter()
                .fold(0.0f64, |a, v| a.max(v.abs()));
            let m_inf = record.m_hist[t - 1][i]
                .iter()
                .fold(0.0f64, |a, v| a.max(v.abs()));
            if m_inf > g_inf.max(prev_m_inf[i]) {
                return Err(MetricsError::MomentBound { round: t, agent: i });
            }
            prev_m_inf[i] = m_inf;
            for d in 0..p {
                let v = record.vhat_hist[t - 1][i][d];
                if v < prev_vhat[i][d] {
                    return Err(MetricsError::VhatMonotonicity { round: t, agent: i, coord: d });
                }
                prev_vhat[i][d] = v;
            }
        }
    }
    Ok(())
}

/// Verify the corrected-output identity against a literal recomputation:
/// the logged corrected block after round `t` must equal
/// `x_{t} + Σ_{s<t} (W − (I+W)/2) X_s` summed from the logged history.
pub fn corrected_rule_residual(record: &RunRecord) -> Result<f64> {
    let Some(corrected) = record.corrected() else {
        return Err(MetricsError::Shape(
            "record holds no corrected iterates".into(),
        ));
    };
    let n = record.n();
    let p = record.dim();
    let mut acc = vec![vec![0.0; p]; n];
    let mut worst: f64 = 0.0;
    for t in 1..=record.rounds() {
        let block = &record.iterates[t - 1];
        let mixed = record.w.mix(block)?;
        for i in 0..n {
            for d in 0..p {
                acc[i][d] += 0.5 * (mixed[i][d] - block[i][d]);
            }
        }
        let plain = &record.iterates[t];
        let logged = &corrected[t];
        for i in 0..n {
            for d in 0..p {
                let expect = plain[i][d] + acc[i][d];
                worst = worst.max((logged[i][d] - expect).abs());
            }
        }
    }
    Ok(worst)
}
