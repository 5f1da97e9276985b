//! Distributed adaptive-moment descent over a mixing network.
//!
//! Each round `t`, every agent `i` takes a gradient `g_{i,t}` of its private
//! loss at its own iterate and updates exponential moments
//!
//! ```text
//! m <- beta1_t m + (1 - beta1_t) g          (beta1_t = beta1 * lambda^(t-1))
//! v <- beta2 v + (1 - beta2) g (.) g        (or a running mean, see presets)
//! vhat <- beta3 vhat + (1 - beta3) max(vhat, v)
//! ```
//!
//! then gossips with its neighbours and takes a projected adaptive step
//!
//! ```text
//! x_i <- Proj[ sum_j W_ij x_j - alpha_t m / (sqrt(vhat) + eps) ]
//! ```
//!
//! where the projection is weighted by `sqrt(vhat) + eps` per coordinate in
//! convex mode and is plain Euclidean in nonconvex mode. The `vhat` recursion
//! never decreases, which is what makes the effective step sizes
//! `alpha_t / sqrt(vhat)` monotone and the method analyzable; the update
//! direction is bounded by `1 / ((1 - eta) sqrt((1-beta2)(1-beta3)))` with
//! `eta = beta1 / sqrt(beta2) < 1` enforced at construction.
//!
//! The optional corrected output rule accumulates the disagreement term
//! `corr_t = sum_{s<t} (W - (I+W)/2) X_s` and reports `x + corr` alongside
//! the plain iterate; the corrected point may leave the feasible set.

use crate::projections::{project, ConstraintSet, Metric, ProjectionError};
use crate::topology::{MixingMatrix, TopologyError};
use crate::vecmath::all_finite;

/// Errors from hyper-parameter validation and stepping.
#[derive(Debug, thiserror::Error)]
pub enum OptimizerError {
    #[error("step scale alpha = {0} must be positive and finite")]
    BadAlpha(f64),
    #[error("{name} = {value} must lie in [0, 1)")]
    BadBeta { name: &'static str, value: f64 },
    #[error("lambda = {0} must lie in (0, 1]")]
    BadLambda(f64),
    #[error("epsilon = {0} must be nonnegative and finite")]
    BadEpsilon(f64),
    #[error(
        "momentum/curvature ratio beta1/sqrt(beta2) = {eta} must be < 1 \
         (beta1 = {beta1}, beta2 = {beta2})"
    )]
    MomentumDominates { eta: f64, beta1: f64, beta2: f64 },
    #[error("unknown preset {0:?}")]
    UnknownPreset(String),
    #[error("the 1/sqrt(n T) schedule needs a declared horizon")]
    MissingHorizon,
    #[error("network needs {expected} initial rows, got {got}")]
    InitCount { got: usize, expected: usize },
    #[error("gradient block has {got} rows, expected {expected}")]
    GradientCount { got: usize, expected: usize },
    #[error("agent {agent}: gradient has {got} coordinates, expected {expected}")]
    GradientShape { agent: usize, got: usize, expected: usize },
    #[error("agent {agent}: non-finite gradient at coordinate {coord}")]
    NonFiniteGradient { agent: usize, coord: usize },
    #[error(
        "agent {agent}: adaptive denominator is zero at coordinate {coord} \
         with a nonzero first moment (set eps > 0 or ensure a nonzero first gradient)"
    )]
    ZeroDenominator { agent: usize, coord: usize },
    #[error(
        "agent {agent}: coordinate {coord} has never seen a gradient, so the \
         weighted ball projection metric is degenerate (set eps > 0)"
    )]
    DegenerateMetric { agent: usize, coord: usize },
    #[error("checkpoint parse error at line {line}: {msg}")]
    CheckpointParse { line: usize, msg: String },
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Projection(#[from] ProjectionError),
}

type Result<T> = std::result::Result<T, OptimizerError>;

/// Step-size schedule for round `t` (1-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Schedule {
    /// `alpha / sqrt(t)` — the default diminishing schedule.
    InvSqrtT,
    /// `alpha` every round.
    Constant,
    /// `alpha / sqrt(n T)` — constant in `t`, needs the horizon up front.
    InvSqrtNT,
}

/// Whether the projection step uses the adaptive diagonal metric (convex
/// analysis mode) or the plain Euclidean projection (nonconvex mode).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Convex,
    Nonconvex,
}

/// Second-moment recursion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SecondMoment {
    /// `v <- beta2 v + (1 - beta2) g^2`.
    Ewma,
    /// `v_t = ((t-1) v_{t-1} + g^2) / t` — the normalized-adagrad form.
    RunningMean,
}

/// Hyper-parameters for the network update.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperParams {
    /// Base step scale; the schedule turns it into `alpha_t`.
    pub alpha: f64,
    pub schedule: Schedule,
    pub beta1: f64,
    pub beta2: f64,
    pub beta3: f64,
    /// Momentum decay: `beta1_t = beta1 * lambda^(t-1)`.
    pub lambda: f64,
    /// Stabilizer added to `sqrt(vhat)` in the denominator and the metric.
    pub epsilon: f64,
    pub mode: Mode,
    /// Emit disagreement-corrected iterates alongside the plain ones.
    pub corrected: bool,
    /// `false` bypasses the adaptive denominator entirely (plain gossip
    /// descent on the first moment).
    pub adaptive: bool,
    pub second_moment: SecondMoment,
}

impl Default for HyperParams {
    /// The standard configuration: beta1 = beta3 = 0.9, beta2 = 0.999.
    fn default() -> Self {
        HyperParams {
            alpha: 1.0,
            schedule: Schedule::InvSqrtT,
            beta1: 0.9,
            beta2: 0.999,
            beta3: 0.9,
            lambda: 1.0,
            epsilon: 1e-8,
            mode: Mode::Convex,
            corrected: false,
            adaptive: true,
            second_moment: SecondMoment::Ewma,
        }
    }
}

impl HyperParams {
    /// Named method variants.
    ///
    /// * `dadam` — the full adaptive method (defaults above);
    /// * `damsgrad` — beta3 = 0, i.e. a hard running max denominator;
    /// * `drmsprop` — no first moment, EWMA denominator;
    /// * `dadagrad` — no first moment, running-mean denominator;
    /// * `dsgd` — plain distributed gradient descent (no adaptivity);
    /// * `dsgd_momentum` — dsgd plus a beta1 = 0.9 first moment.
    pub fn preset(name: &str) -> Result<HyperParams> {
        let base = HyperParams::default();
        Ok(match name {
            "dadam" => base,
            "damsgrad" => HyperParams { beta3: 0.0, ..base },
            "drmsprop" => HyperParams { beta1: 0.0, beta3: 0.0, ..base },
            "dadagrad" => HyperParams {
                beta1: 0.0,
                beta2: 0.0,
                beta3: 0.0,
                second_moment: SecondMoment::RunningMean,
                ..base
            },
            "dsgd" => HyperParams {
                beta1: 0.0,
                beta2: 0.0,
                beta3: 0.0,
                epsilon: 0.0,
                adaptive: false,
                ..base
            },
            "dsgd_momentum" => HyperParams {
                beta1: 0.9,
                beta2: 0.0,
                beta3: 0.0,
                epsilon: 0.0,
                adaptive: false,
                ..base
            },
            other => return Err(OptimizerError::UnknownPreset(other.to_string())),
        })
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return Err(OptimizerError::BadAlpha(self.alpha));
        }
        for (name, value) in [
            ("beta1", self.beta1),
            ("beta2", self.beta2),
            ("beta3", self.beta3),
        ] {
            if !(0.0..1.0).contains(&value) || !value.is_finite() {
                return Err(OptimizerError::BadBeta { name, value });
            }
        }
        if !(self.lambda > 0.0 && self.lambda <= 1.0) {
            return Err(OptimizerError::BadLambda(self.lambda));
        }
        if !(self.epsilon >= 0.0) || !self.epsilon.is_finite() {
            return Err(OptimizerError::BadEpsilon(self.epsilon));
        }
        if self.beta2 > 0.0 {
            let eta = self.eta();
            if !(eta < 1.0) {
                return Err(OptimizerError::MomentumDominates {
                    eta,
                    beta1: self.beta1,
                    beta2: self.beta2,
                });
            }
        }
        Ok(())
    }

    /// Momentum/curvature ratio `beta1 / sqrt(beta2)`.
    pub fn eta(&self) -> f64 {
        if self.beta2 > 0.0 {
            self.beta1 / self.beta2.sqrt()
        } else if self.beta1 == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }

    /// Round-dependent momentum coefficient `beta1 * lambda^(t-1)`.
    pub fn beta1_at(&self, t: usize) -> f64 {
        if self.lambda == 1.0 {
            self.beta1
        } else {
            self.beta1 * self.lambda.powi(t as i32 - 1)
        }
    }

    /// Uniform bound on `||m / sqrt(vhat)||_inf`:
    /// `1 / ((1 - eta) sqrt((1 - beta2)(1 - beta3)))`.
    /// `None` when the run is outside the adaptive EWMA regime.
    pub fn direction_bound(&self) -> Option<f64> {
        if !self.adaptive || self.second_moment != SecondMoment::Ewma {
            return None;
        }
        let eta = self.eta();
        if !(eta < 1.0) || self.beta2 >= 1.0 || self.beta3 >= 1.0 {
            return None;
        }
        Some(1.0 / ((1.0 - eta) * ((1.0 - self.beta2) * (1.0 - self.beta3)).sqrt()))
    }
}

/// Per-agent optimizer state.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentState {
    pub x: Vec<f64>,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub v_hat: Vec<f64>,
    /// Accumulated disagreement correction (zero unless enabled).
    pub corr: Vec<f64>,
    /// Rounds this agent has absorbed (drives the running-mean recursion).
    pub rounds_done: usize,
}

impl AgentState {
    pub fn fresh(x: Vec<f64>) -> AgentState {
        let p = x.len();
        AgentState {
            x,
            m: vec![0.0; p],
            v: vec![0.0; p],
            v_hat: vec![0.0; p],
            corr: vec![0.0; p],
            rounds_done: 0,
        }
    }

    /// Rebuild a state from checkpointed moments (corrections restart at
    /// zero; corrected runs must replay history to recover them).
    pub fn from_checkpoint(round: usize, x: Vec<f64>, m: Vec<f64>, v: Vec<f64>, v_hat: Vec<f64>) -> AgentState {
        let p = x.len();
        AgentState { x, m, v, v_hat, corr: vec![0.0; p], rounds_done: round }
    }

    /// The emitted corrected iterate `x + corr`.
    pub fn corrected_x(&self) -> Vec<f64> {
        self.x.iter().zip(&self.corr).map(|(a, b)| a + b).collect()
    }

    pub(crate) fn update_moments(&mut self, g: &[f64], t: usize, hp: &HyperParams) {
        let b1t = hp.beta1_at(t);
        for d in 0..g.len() {
            self.m[d] = b1t * self.m[d] + (1.0 - b1t) * g[d];
        }
        match hp.second_moment {
            SecondMoment::Ewma => {
                for d in 0..g.len() {
                    self.v[d] = hp.beta2 * self.v[d] + (1.0 - hp.beta2) * g[d] * g[d];
                }
            }
            SecondMoment::RunningMean => {
                let k = (self.rounds_done + 1) as f64;
                for d in 0..g.len() {
                    self.v[d] = ((k - 1.0) * self.v[d] + g[d] * g[d]) / k;
                }
            }
        }
        for d in 0..g.len() {
            let blended =
                hp.beta3 * self.v_hat[d] + (1.0 - hp.beta3) * self.v_hat[d].max(self.v[d]);
            // Algebraically blended >= v_hat always; the outer max only
            // strips <= 1 ulp of rounding so monotonicity holds exactly.
            self.v_hat[d] = self.v_hat[d].max(blended);
        }
        self.rounds_done += 1;
    }
}

/// What one network round did.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    /// The (1-based) round index that was just executed.
    pub round: usize,
    /// The step size used.
    pub alpha: f64,
}

/// The agent network: shared mixing matrix, shared feasible set, per-agent
/// adaptive states, and a bulk-synchronous `step`.
#[derive(Debug, Clone)]
pub struct Network {
    hp: HyperParams,
    w: MixingMatrix,
    set: ConstraintSet,
    agents: Vec<AgentState>,
    /// Next round to execute (1-based).
    t: usize,
    horizon: Option<usize>,
    p: usize,
}

impl Network {
    /// Build a network with one initial iterate per agent. Initial points
    /// are projected into the feasible set (Euclidean projection).
    pub fn new(
        hp: HyperParams,
        w: MixingMatrix,
        set: ConstraintSet,
        init: &[Vec<f64>],
        horizon: Option<usize>,
    ) -> Result<Network> {
        hp.validate()?;
        if hp.schedule == Schedule::InvSqrtNT && horizon.is_none() {
            return Err(OptimizerError::MissingHorizon);
        }
        if init.len() != w.n() {
            return Err(OptimizerError::InitCount { got: init.len(), expected: w.n() });
        }
        let p = init[0].len();
        set.validate(p)?;
        let mut agents = Vec::with_capacity(init.len());
        for row in init {
            if row.len() != p {
                return Err(OptimizerError::InitCount { got: row.len(), expected: p });
            }
            let feasible = project(&set, &Metric::Identity, row)?;
            agents.push(AgentState::fresh(feasible));
        }
        Ok(Network { hp, w, set, agents, t: 1, horizon, p })
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

    pub fn agents(&self) -> &[AgentState] {
        &self.agents
    }

    pub fn n(&self) -> usize {
        self.agents.len()
    }

    pub fn dim(&self) -> usize {
        self.p
    }

    /// Next round to execute (1-based).
    pub fn round(&self) -> usize {
        self.t
    }

    /// Step size for round `t` under the configured schedule.
    pub fn step_size(&self, t: usize) -> f64 {
        match self.hp.schedule {
            Schedule::InvSqrtT => self.hp.alpha / (t as f64).sqrt(),
            Schedule::Constant => self.hp.alpha,
            Schedule::InvSqrtNT => {
                let horizon = self.horizon.expect("validated at construction") as f64;
                self.hp.alpha / (self.n() as f64 * horizon).sqrt()
            }
        }
    }

    /// Current iterates as rows.
    pub fn iterates(&self) -> Vec<Vec<f64>> {
        self.agents.iter().map(|a| a.x.clone()).collect()
    }

    /// Network average of the current iterates — the quantity the method
    /// outputs after the final round.
    pub fn average_iterate(&self) -> Vec<f64> {
        crate::vecmath::row_mean(&self.iterates())
    }

    /// Execute one bulk-synchronous round with the given per-agent
    /// gradients (evaluated at the current iterates).
    pub fn step(&mut self, grads: &[Vec<f64>]) -> Result<StepInfo> {
        let n = self.n();
        let p = self.p;
        if grads.len() != n {
            return Err(OptimizerError::GradientCount { got: grads.len(), expected: n });
        }
        for (i, g) in grads.iter().enumerate() {
            if g.len() != p {
                return Err(OptimizerError::GradientShape { agent: i, got: g.len(), expected: p });
            }
            if let Some(coord) = g.iter().position(|v| !v.is_finite()) {
                return Err(OptimizerError::NonFiniteGradient { agent: i, coord });
            }
        }
        let t = self.t;
        let alpha = self.step_size(t);

        let current = self.iterates();
        let mixed = self.w.mix(&current)?;

        // Corrected rule: one accumulation per round using the iterates the
        // round started from, so corr_t = sum_{s<t} (W - (I+W)/2) X_s with
        // X_0 the initial block. (W - (I+W)/2) row i of X is
        // 0.5 * (mixed_i - x_i).
        if self.hp.corrected {
            for (agent, mixed_row) in self.agents.iter_mut().zip(&mixed) {
                for d in 0..p {
                    agent.corr[d] += 0.5 * (mixed_row[d] - agent.x[d]);
                }
            }
        }

        let ball_metric = self.hp.adaptive
            && self.hp.mode == Mode::Convex
            && matches!(
                self.set,
                ConstraintSet::L1Ball { .. } | ConstraintSet::L2Ball { .. }
            );

        for i in 0..n {
            self.agents[i].update_moments(&grads[i], t, &self.hp);

            let mut target = mixed[i].clone();
            let mut weights = if ball_metric { Vec::with_capacity(p) } else { Vec::new() };
            for d in 0..p {
                let step = if self.hp.adaptive {
                    let denom = self.agents[i].v_hat[d].sqrt() + self.hp.epsilon;
                    if denom == 0.0 {
                        if self.agents[i].m[d] == 0.0 {
                            if ball_metric {
                                return Err(OptimizerError::DegenerateMetric {
                                    agent: i,
                                    coord: d,
                                });
                            }
                            0.0
                        } else {
                            return Err(OptimizerError::ZeroDenominator { agent: i, coord: d });
                        }
                    } else {
                        if ball_metric {
                            weights.push(denom);
                        }
                        alpha * self.agents[i].m[d] / denom
                    }
                } else {
                    alpha * self.agents[i].m[d]
                };
                target[d] -= step;
            }
            let metric = if ball_metric {
                Metric::Diagonal(weights)
            } else {
                Metric::Identity
            };
            debug_assert!(all_finite(&target));
            self.agents[i].x = project(&self.set, &metric, &target)?;
        }
        self.t += 1;
        Ok(StepInfo { round: t, alpha })
    }
}

/// Plain average of iterate rows (the network output point).
pub fn network_average(rows: &[Vec<f64>]) -> Vec<f64> {
    crate::vecmath::row_mean(rows)
}

/// Header line for a per-agent checkpoint CSV with `p` coordinates:
/// `round, x0.., m0.., v0.., vhat0..`.
pub fn checkpoint_header(p: usize) -> String {
    let mut cols = vec!["round".to_string()];
    for prefix in ["x", "m", "v", "vhat"] {
        cols.extend((0..p).map(|d| format!("{prefix}{d}")));
    }
    cols.join(",")
}

/// One checkpoint row: the agent's state after completing `round`.
pub fn checkpoint_row(round: usize, state: &AgentState) -> String {
    let mut fields = vec![round.to_string()];
    for block in [&state.x, &state.m, &state.v, &state.v_hat] {
        fields.extend(block.iter().map(|v| format!("{v:?}")));
    }
    fields.join(",")
}

/// Parse a checkpoint CSV back into `(round, state)` rows.
pub fn read_checkpoint(text: &str) -> Result<Vec<(usize, AgentState)>> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(OptimizerError::CheckpointParse {
        line: 1,
        msg: "empty checkpoint".into(),
    })?;
    let cols = header.split(',').count();
    if cols < 5 || (cols - 1) % 4 != 0 {
        return Err(OptimizerError::CheckpointParse {
            line: 1,
            msg: format!("header has {cols} columns, expected 1 + 4p"),
        });
    }
    let p = (cols - 1) / 4;
    let mut out = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != cols {
            return Err(OptimizerError::CheckpointParse {
                line: idx + 1,
                msg: format!("expected {cols} fields, got {}", fields.len()),
            });
        }
        let parse_f = |tok: &str| -> Result<f64> {
            tok.parse().map_err(|e| OptimizerError::CheckpointParse {
                line: idx + 1,
                msg: format!("bad float {tok:?}: {e}"),
            })
        };
        let round: usize = fields[0].parse().map_err(|e| OptimizerError::CheckpointParse {
            line: idx + 1,
            msg: format!("bad round {:?}: {e}", fields[0]),
        })?;
        let mut blocks = Vec::with_capacity(4);
        for b in 0..4 {
            let mut block = Vec::with_capacity(p);
            for d in 0..p {
                block.push(parse_f(fields[1 + b * p + d])?);
            }
            blocks.push(block);
        }
        let v_hat = blocks.pop().unwrap();
        let v = blocks.pop().unwrap();
        let m = blocks.pop().unwrap();
        let x = blocks.pop().unwrap();
        out.push((round, AgentState::from_checkpoint(round, x, m, v, v_hat)));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::Graph;

    fn single_node() -> MixingMatrix {
        let g = Graph::from_edges(1, &[]).unwrap();
        MixingMatrix::metropolis(&g, 1.0).unwrap()
    }

    #[test]
    fn one_moment_update_matches_hand_values() {
        let hp = HyperParams { epsilon: 0.0, ..HyperParams::default() };
        let mut s = AgentState::fresh(vec![0.0]);
        s.update_moments(&[1.0], 1, &hp);
        assert!((s.m[0] - 0.1).abs() <= 1e-15, "m = {}", s.m[0]);
        assert!((s.v[0] - 0.001).abs() <= 1e-15, "v = {}", s.v[0]);
        // vhat = 0.9 * 0 + 0.1 * max(0, 0.001) = 1e-4.
        assert!((s.v_hat[0] - 1e-4).abs() <= 1e-18, "vhat = {}", s.v_hat[0]);
    }

    #[test]
    fn momentum_dominating_curvature_is_rejected() {
        let hp = HyperParams { beta1: 0.95, beta2: 0.9, ..HyperParams::default() };
        match hp.validate() {
            Err(OptimizerError::MomentumDominates { eta, .. }) => {
                assert!(eta > 1.0 && eta < 1.01, "eta = {eta}");
            }
            other => panic!("expected momentum-dominates error, got {other:?}"),
        }
    }

    #[test]
    fn presets_carry_their_advertised_coefficients() {
        let dadam = HyperParams::preset("dadam").unwrap();
        assert_eq!((dadam.beta1, dadam.beta2, dadam.beta3), (0.9, 0.999, 0.9));
        assert!(dadam.adaptive);
        let ams = HyperParams::preset("damsgrad").unwrap();
        assert_eq!(ams.beta3, 0.0);
        let rms = HyperParams::preset("drmsprop").unwrap();
        assert_eq!((rms.beta1, rms.beta3), (0.0, 0.0));
        let ada = HyperParams::preset("dadagrad").unwrap();
        assert_eq!(ada.second_moment, SecondMoment::RunningMean);
        let sgd = HyperParams::preset("dsgd").unwrap();
        assert!(!sgd.adaptive);
        assert!(HyperParams::preset("sgd").is_err());
    }

    #[test]
    fn single_agent_step_reproduces_hand_computation() {
        // g = 1 gives m/sqrt(vhat) = 0.1/0.01 = 10; with alpha = 0.1 the
        // iterate moves by exactly 1: from 1 to 0.
        let hp = HyperParams {
            alpha: 0.1,
            schedule: Schedule::Constant,
            epsilon: 0.0,
            ..HyperParams::default()
        };
        let mut net = Network::new(
            hp,
            single_node(),
            ConstraintSet::Unconstrained,
            &[vec![1.0]],
            None,
        )
        .unwrap();
        let info = net.step(&[vec![1.0]]).unwrap();
        assert_eq!(info.round, 1);
        assert_eq!(info.alpha, 0.1);
        assert!(net.agents()[0].x[0].abs() <= 1e-15, "x = {}", net.agents()[0].x[0]);
    }

    #[test]
    fn dsgd_step_is_plain_gradient_descent() {
        let hp = HyperParams {
            alpha: 0.1,
            schedule: Schedule::Constant,
            ..HyperParams::preset("dsgd").unwrap()
        };
        let mut net = Network::new(
            hp,
            single_node(),
            ConstraintSet::Unconstrained,
            &[vec![1.0]],
            None,
        )
        .unwrap();
        net.step(&[vec![1.0]]).unwrap();
        let expected = 1.0 - 0.1;
        assert_eq!(net.agents()[0].x[0], expected);
    }

    #[test]
    fn corrected_accumulator_matches_two_node_hand_case() {
        // Path on 2 nodes: W = [[.5, .5], [.5, .5]]; (W - (I+W)/2) X_0 =
        // 0.5 (W X_0 - X_0) = [[0.5], [-0.5]] for starts (1, 3).
        let g = Graph::from_edges(2, &[(0, 1)]).unwrap();
        let w = MixingMatrix::metropolis(&g, 1.0).unwrap();
        let hp = HyperParams { corrected: true, ..HyperParams::default() };
        let mut net = Network::new(
            hp,
            w,
            ConstraintSet::Unconstrained,
            &[vec![1.0], vec![3.0]],
            None,
        )
        .unwrap();
        net.step(&[vec![0.5], vec![0.5]]).unwrap();
        assert!((net.agents()[0].corr[0] - 0.5).abs() <= 1e-15);
        assert!((net.agents()[1].corr[0] + 0.5).abs() <= 1e-15);
        let c0 = net.agents()[0].corrected_x();
        assert!((c0[0] - (net.agents()[0].x[0] + 0.5)).abs() <= 1e-15);
    }

    #[test]
    fn zero_gradients_from_consensus_leave_everything_in_place() {
        let g = Graph::from_edges(2, &[(0, 1)]).unwrap();
        let w = MixingMatrix::metropolis(&g, 1.0).unwrap();
        let hp = HyperParams { corrected: true, epsilon: 0.0, ..HyperParams::default() };
        let mut net = Network::new(
            hp,
            w,
            ConstraintSet::Unconstrained,
            &[vec![0.0, 0.0], vec![0.0, 0.0]],
            None,
        )
        .unwrap();
        for _ in 0..5 {
            net.step(&[vec![0.0, 0.0], vec![0.0, 0.0]]).unwrap();
        }
        for agent in net.agents() {
            assert_eq!(agent.x, vec![0.0, 0.0]);
            assert_eq!(agent.corr, vec![0.0, 0.0]);
            assert_eq!(agent.v_hat, vec![0.0, 0.0]);
        }
    }

    #[test]
    fn direction_stays_under_the_uniform_bound() {
        let hp = HyperParams { epsilon: 0.0, ..HyperParams::default() };
        let cap = hp.direction_bound().unwrap();
        let mut s = AgentState::fresh(vec![0.0; 3]);
        let mut r = crate::rng::stream(5, &[0]);
        use rand::Rng;
        let mut max_g: f64 = 0.0;
        for t in 1..=200 {
            let g: Vec<f64> = (0..3).map(|_| r.random::<f64>() * 6.0 - 3.0).collect();
            max_g = g.iter().fold(max_g, |acc, v| acc.max(v.abs()));
            s.update_moments(&g, t, &hp);
            for d in 0..3 {
                let m_inf = s.m[d].abs();
                assert!(
                    m_inf <= max_g + 1e-12,
                    "first-moment bound broken: |m| = {m_inf} > {max_g}"
                );
                if s.v_hat[d] > 0.0 {
                    let ratio = s.m[d].abs() / s.v_hat[d].sqrt();
                    assert!(ratio <= cap + 1e-9, "t={t} d={d}: {ratio} > {cap}");
                }
            }
        }
    }

    #[test]
    fn vhat_never_decreases() {
        for preset in ["dadam", "damsgrad", "drmsprop", "dadagrad"] {
            let hp = HyperParams::preset(preset).unwrap();
            let mut s = AgentState::fresh(vec![0.0; 2]);
            let mut r = crate::rng::stream(9, &[1]);
            use rand::Rng;
            let mut prev = s.v_hat.clone();
            for t in 1..=300 {
                let g: Vec<f64> = (0..2).map(|_| r.random::<f64>() * 2.0 - 1.0).collect();
                s.update_moments(&g, t, &hp);
                for d in 0..2 {
                    assert!(
                        s.v_hat[d] >= prev[d],
                        "{preset}: vhat dropped at t={t}, {} < {}",
                        s.v_hat[d],
                        prev[d]
                    );
                }
                prev = s.v_hat.clone();
            }
        }
    }

    #[test]
    fn nan_gradient_aborts_with_location() {
        let mut net = Network::new(
            HyperParams::default(),
            single_node(),
            ConstraintSet::Unconstrained,
            &[vec![0.0, 0.0]],
            None,
        )
        .unwrap();
        match net.step(&[vec![0.0, f64::NAN]]) {
            Err(OptimizerError::NonFiniteGradient { agent: 0, coord: 1 }) => {}
            other => panic!("expected non-finite gradient error, got {other:?}"),
        }
    }

    #[test]
    fn nt_schedule_requires_horizon() {
        let hp = HyperParams { schedule: Schedule::InvSqrtNT, ..HyperParams::default() };
        assert!(matches!(
            Network::new(
                hp.clone(),
                single_node(),
                ConstraintSet::Unconstrained,
                &[vec![0.0]],
                None
            ),
            Err(OptimizerError::MissingHorizon)
        ));
        let net = Network::new(
            hp,
            single_node(),
            ConstraintSet::Unconstrained,
            &[vec![0.0]],
            Some(100),
        )
        .unwrap();
        assert!((net.step_size(1) - 1.0 / (100.0f64).sqrt()).abs() <= 1e-15);
        assert_eq!(net.step_size(1), net.step_size(50));
    }

    #[test]
    fn checkpoint_rows_round_trip() {
        let state = AgentState {
            x: vec![0.5, -1.25],
            m: vec![1e-9, 2.0],
            v: vec![0.25, 0.125],
            v_hat: vec![0.25, 0.5],
            corr: vec![0.0, 0.0],
            rounds_done: 7,
        };
        let text = format!("{}\n{}\n", checkpoint_header(2), checkpoint_row(7, &state));
        let rows = read_checkpoint(&text).unwrap();
        assert_eq!(rows.len(), 1);
        let (round, back) = &rows[0];
        assert_eq!(*round, 7);
        assert_eq!(back.x, state.x);
        assert_eq!(back.m, state.m);
        assert_eq!(back.v, state.v);
        assert_eq!(back.v_hat, state.v_hat);
        assert_eq!(back.rounds_done, 7);
    }
}
