//! Loss families, per-agent data streams, and exact/numeric minimizers.
//!
//! A problem assigns every agent `i` at every round `t` a private loss
//! `f_{i,t}(x) = mean over the round's batch of a per-example loss, plus
//! `nu ||x||^2`. Four per-example families are supported:
//!
//! * `logistic` — `ln(1 + exp(-y <w, x>))`, labels in {-1, +1};
//! * `squared_hinge` — `max(0, 1 - y <w, x>)^2`, labels in {-1, +1};
//! * `softmax` — cross-entropy over `k` classes; the parameter is the
//!   row-major `k x q` matrix of class weights, so `dim = k * q`;
//! * `quadratic` — `0.5 ||x - c||^2` tracking a drifting center `c`.
//!
//! Streams are either synthetic (counter-seeded, so the batch for
//! `(agent, round)` is a pure function of the master seed) or a CSV dataset
//! dealt round-robin to agents and re-cycled when exhausted. Synthetic
//! streams drift their ground truth along the first coordinate by `delta`
//! per round, which makes minimizer paths move at a known speed.

use crate::projections::{project, ConstraintSet, Metric, ProjectionError};
use crate::rng;
use crate::vecmath::{all_finite, dot, norm2};
use rand::Rng;

/// Errors from problem construction, data loading, and evaluation.
#[derive(Debug, thiserror::Error)]
pub enum ProblemError {
    #[error("parameter dimension must be >= 1")]
    BadDim,
    #[error("regularizer nu = {0} must be nonnegative and finite")]
    BadNu(f64),
    #[error("softmax needs >= 2 classes, got {0}")]
    BadClasses(usize),
    #[error("softmax with {classes} classes needs dim divisible by {classes}, got {dim}")]
    ClassesDontDivide { classes: usize, dim: usize },
    #[error("example has {got} features, expected {expected}")]
    FeatureDim { got: usize, expected: usize },
    #[error("label {0} is not a valid sign label (-1 or +1)")]
    BadSignLabel(f64),
    #[error("label {label} is not a class index in 0..{classes}")]
    BadClassLabel { label: f64, classes: usize },
    #[error("batch is empty")]
    EmptyBatch,
    #[error("batch size must be >= 1")]
    BadBatchSize,
    #[error("subsample of {requested} from a batch of {available}")]
    BadSampleSize { requested: usize, available: usize },
    #[error("need at least one agent")]
    NoAgents,
    #[error("drift = {0} must be finite")]
    BadDrift(f64),
    #[error("noise = {0} must be nonnegative and finite")]
    BadNoise(f64),
    #[error("dataset csv parse error at line {line}: {msg}")]
    Csv { line: usize, msg: String },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("point has {got} coordinates, expected {expected}")]
    PointDim { got: usize, expected: usize },
    #[error("non-finite value while evaluating the loss")]
    NonFinite,
    #[error("minimizer search did not converge within the iteration cap")]
    MinimizerStalled,
    #[error(transparent)]
    Projection(#[from] ProjectionError),
}

type Result<T> = std::result::Result<T, ProblemError>;

/// Per-example loss family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    Logistic,
    SquaredHinge,
    Softmax { classes: usize },
    Quadratic,
}

/// One observation: a feature vector and a label. For `quadratic` the
/// features are the tracked center and the label is ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub features: Vec<f64>,
    pub label: f64,
}

/// The examples one agent sees in one round.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DataBatch {
    pub examples: Vec<Example>,
}

impl DataBatch {
    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    /// Mean feature vector (the batch center for quadratic losses).
    pub fn mean_features(&self) -> Option<Vec<f64>> {
        let first = self.examples.first()?;
        let mut acc = vec![0.0; first.features.len()];
        for e in &self.examples {
            for (a, f) in acc.iter_mut().zip(&e.features) {
                *a += f;
            }
        }
        let inv = 1.0 / self.examples.len() as f64;
        for a in &mut acc {
            *a *= inv;
        }
        Some(acc)
    }
}

/// A smoothness bound for the round objective, flagged by provenance:
/// `exact` means it follows from the loss algebra alone, otherwise it is
/// derived from the data at hand.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RhoBound {
    pub value: f64,
    pub exact: bool,
}

/// Evaluates one loss family at given points on given batches.
#[derive(Debug, Clone, PartialEq)]
pub struct LossOracle {
    kind: LossKind,
    /// Parameter dimension (for softmax, `classes * feature_dim`).
    dim: usize,
    /// Coefficient of the `||x||^2` regularizer.
    nu: f64,
}

impl LossOracle {
    pub fn new(kind: LossKind, dim: usize, nu: f64) -> Result<LossOracle> {
        if dim == 0 {
            return Err(ProblemError::BadDim);
        }
        if !(nu >= 0.0) || !nu.is_finite() {
            return Err(ProblemError::BadNu(nu));
        }
        if let LossKind::Softmax { classes } = kind {
            if classes < 2 {
                return Err(ProblemError::BadClasses(classes));
            }
            if dim % classes != 0 {
                return Err(ProblemError::ClassesDontDivide { classes, dim });
            }
        }
        Ok(LossOracle { kind, dim, nu })
    }

    pub fn kind(&self) -> LossKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    /// Feature dimension expected of examples.
    pub fn feature_dim(&self) -> usize {
        match self.kind {
            LossKind::Softmax { classes } => self.dim / classes,
            _ => self.dim,
        }
    }

    fn check_example(&self, e: &Example) -> Result<()> {
        if e.features.len() != self.feature_dim() {
            return Err(ProblemError::FeatureDim {
                got: e.features.len(),
                expected: self.feature_dim(),
            });
        }
        match self.kind {
            LossKind::Logistic | LossKind::SquaredHinge => {
                if e.label != 1.0 && e.label != -1.0 {
                    return Err(ProblemError::BadSignLabel(e.label));
                }
            }
            LossKind::Softmax { classes } => {
                let c = e.label;
                if c.fract() != 0.0 || c < 0.0 || c >= classes as f64 {
                    return Err(ProblemError::BadClassLabel { label: c, classes });
                }
            }
            LossKind::Quadratic => {}
        }
        Ok(())
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(ProblemError::PointDim { got: x.len(), expected: self.dim });
        }
        if !all_finite(x) {
            return Err(ProblemError::NonFinite);
        }
        Ok(())
    }

    /// Per-example loss (no regularizer).
    fn example_value(&self, x: &[f64], e: &Example) -> f64 {
        match self.kind {
            LossKind::Logistic => {
                let u = e.label * dot(x, &e.features);
                // ln(1 + e^{-u}) without overflow on either tail.
                if u >= 0.0 {
                    (-u).exp().ln_1p()
                } else {
                    -u + u.exp().ln_1p()
                }
            }
            LossKind::SquaredHinge => {
                let h = (1.0 - e.label * dot(x, &e.features)).max(0.0);
                h * h
            }
            LossKind::Softmax { classes } => {
                let q = self.dim / classes;
                let mut zmax = f64::NEG_INFINITY;
                let mut z = vec![0.0; classes];
                for (c, zc) in z.iter_mut().enumerate() {
                    *zc = dot(&x[c * q..(c + 1) * q], &e.features);
                    zmax = zmax.max(*zc);
                }
                let lse = zmax + z.iter().map(|zc| (zc - zmax).exp()).sum::<f64>().ln();
                lse - z[e.label as usize]
            }
            LossKind::Quadratic => {
                let mut acc = 0.0;
                for (xd, cd) in x.iter().zip(&e.features) {
                    let d = xd - cd;
                    acc += d * d;
                }
                0.5 * acc
            }
        }
    }

    /// Per-example gradient added into `out` with coefficient `scale`.
    fn example_grad_into(&self, x: &[f64], e: &Example, scale: f64, out: &mut [f64]) {
        match self.kind {
            LossKind::Logistic => {
                let u = e.label * dot(x, &e.features);
                // sigma(-u) = 1 / (1 + e^u), computed on the safe tail.
                let s = if u >= 0.0 {
                    let t = (-u).exp();
                    t / (1.0 + t)
                } else {
                    1.0 / (1.0 + u.exp())
                };
                let c = -e.label * s * scale;
                for (o, f) in out.iter_mut().zip(&e.features) {
                    *o += c * f;
                }
            }
            LossKind::SquaredHinge => {
                let h = (1.0 - e.label * dot(x, &e.features)).max(0.0);
                if h > 0.0 {
                    let c = -2.0 * h * e.label * scale;
                    for (o, f) in out.iter_mut().zip(&e.features) {
                        *o += c * f;
                    }
                }
            }
            LossKind::Softmax { classes } => {
                let q = self.dim / classes;
                let mut zmax = f64::NEG_INFINITY;
                let mut z = vec![0.0; classes];
                for (c, zc) in z.iter_mut().enumerate() {
                    *zc = dot(&x[c * q..(c + 1) * q], &e.features);
                    zmax = zmax.max(*zc);
                }
                let denom: f64 = z.iter().map(|zc| (zc - zmax).exp()).sum();
                for c in 0..classes {
                    let mut pc = (z[c] - zmax).exp() / denom;
                    if c == e.label as usize {
                        pc -= 1.0;
                    }
                    let coef = pc * scale;
                    for d in 0..q {
                        out[c * q + d] += coef * e.features[d];
                    }
                }
            }
            LossKind::Quadratic => {
                for (d, o) in out.iter_mut().enumerate() {
                    *o += scale * (x[d] - e.features[d]);
                }
            }
        }
    }

    /// Agent loss on one batch: batch-mean example loss plus `nu ||x||^2`.
    pub fn value(&self, x: &[f64], batch: &DataBatch) -> Result<f64> {
        self.check_point(x)?;
        if batch.is_empty() {
            return Err(ProblemError::EmptyBatch);
        }
        let mut acc = 0.0;
        for e in &batch.examples {
            self.check_example(e)?;
            acc += self.example_value(x, e);
        }
        let mut val = acc / batch.len() as f64;
        if self.nu > 0.0 {
            val += self.nu * dot(x, x);
        }
        if !val.is_finite() {
            return Err(ProblemError::NonFinite);
        }
        Ok(val)
    }

    /// Gradient of [`value`](Self::value).
    pub fn grad(&self, x: &[f64], batch: &DataBatch) -> Result<Vec<f64>> {
        self.check_point(x)?;
        if batch.is_empty() {
            return Err(ProblemError::EmptyBatch);
        }
        let mut g = vec![0.0; self.dim];
        let scale = 1.0 / batch.len() as f64;
        for e in &batch.examples {
            self.check_example(e)?;
            self.example_grad_into(x, e, scale, &mut g);
        }
        if self.nu > 0.0 {
            for (gd, xd) in g.iter_mut().zip(x) {
                *gd += 2.0 * self.nu * xd;
            }
        }
        if !all_finite(&g) {
            return Err(ProblemError::NonFinite);
        }
        Ok(g)
    }

    /// Network objective: mean over agents of their batch losses.
    pub fn network_value(&self, x: &[f64], batches: &[DataBatch]) -> Result<f64> {
        if batches.is_empty() {
            return Err(ProblemError::NoAgents);
        }
        let mut acc = 0.0;
        for b in batches {
            acc += self.value(x, b)?;
        }
        Ok(acc / batches.len() as f64)
    }

    /// Gradient of [`network_value`](Self::network_value).
    pub fn network_grad(&self, x: &[f64], batches: &[DataBatch]) -> Result<Vec<f64>> {
        if batches.is_empty() {
            return Err(ProblemError::NoAgents);
        }
        let mut g = vec![0.0; self.dim];
        for b in batches {
            let gb = self.grad(x, b)?;
            for (acc, v) in g.iter_mut().zip(&gb) {
                *acc += v;
            }
        }
        let inv = 1.0 / batches.len() as f64;
        for v in &mut g {
            *v *= inv;
        }
        Ok(g)
    }

    /// Unbiased minibatch gradient: `sample` examples drawn from the batch
    /// without replacement. Sampling the whole batch reproduces
    /// [`grad`](Self::grad) exactly (same summation order).
    pub fn stochastic_grad<R: Rng>(
        &self,
        x: &[f64],
        batch: &DataBatch,
        sample: usize,
        rng: &mut R,
    ) -> Result<Vec<f64>> {
        if sample == 0 || sample > batch.len() {
            return Err(ProblemError::BadSampleSize {
                requested: sample,
                available: batch.len(),
            });
        }
        if sample == batch.len() {
            return self.grad(x, batch);
        }
        self.check_point(x)?;
        let mut idx = rand::seq::index::sample(rng, batch.len(), sample).into_vec();
        idx.sort_unstable();
        let mut g = vec![0.0; self.dim];
        let scale = 1.0 / sample as f64;
        for i in idx {
            let e = &batch.examples[i];
            self.check_example(e)?;
            self.example_grad_into(x, e, scale, &mut g);
        }
        if self.nu > 0.0 {
            for (gd, xd) in g.iter_mut().zip(x) {
                *gd += 2.0 * self.nu * xd;
            }
        }
        if !all_finite(&g) {
            return Err(ProblemError::NonFinite);
        }
        Ok(g)
    }

    /// Smoothness bound for the network objective. Exact `1 + 2 nu` for
    /// quadratic; for the classification families it is the standard
    /// curvature cap times the worst squared feature norm in the data.
    pub fn rho_bound(&self, batches: &[DataBatch]) -> Result<RhoBound> {
        let reg = 2.0 * self.nu;
        match self.kind {
            LossKind::Quadratic => Ok(RhoBound { value: 1.0 + reg, exact: true }),
            _ => {
                let mut worst: f64 = 0.0;
                for b in batches {
                    for e in &b.examples {
                        self.check_example(e)?;
                        worst = worst.max(dot(&e.features, &e.features));
                    }
                }
                let curvature = match self.kind {
                    LossKind::Logistic => 0.25,
                    LossKind::SquaredHinge => 2.0,
                    LossKind::Softmax { .. } => 0.5,
                    LossKind::Quadratic => unreachable!(),
                };
                Ok(RhoBound { value: curvature * worst + reg, exact: false })
            }
        }
    }

    /// Exact gradient-norm cap for quadratic losses on a bounded set:
    /// `(1 + 2 nu) M + max_t ||center||`. `None` outside that regime.
    pub fn gradient_norm_bound(
        &self,
        set: &ConstraintSet,
        max_center_norm: f64,
    ) -> Option<f64> {
        if self.kind != LossKind::Quadratic {
            return None;
        }
        let m = set.sup_norm2()?;
        Some((1.0 + 2.0 * self.nu) * m + max_center_norm)
    }

    /// Minimizer of the round's network objective over `set`.
    ///
    /// Quadratic losses have the closed form `Proj[ cbar / (1 + 2 nu) ]`
    /// (the objective is an isotropic quadratic, so Euclidean projection of
    /// its free minimizer is optimal). Everything else runs projected
    /// gradient descent with backtracking until the iterate's relative
    /// displacement drops below `tol` (1e-10 is the house default) or no
    /// representable step still achieves model descent — whichever comes
    /// first. `warm` seeds the search (use the previous round's minimizer).
    pub fn minimizer(
        &self,
        set: &ConstraintSet,
        batches: &[DataBatch],
        warm: Option<&[f64]>,
        tol: f64,
    ) -> Result<Vec<f64>> {
        if batches.is_empty() {
            return Err(ProblemError::NoAgents);
        }
        if self.kind == LossKind::Quadratic {
            let mut center = vec![0.0; self.dim];
            let mut count = 0usize;
            for b in batches {
                if b.is_empty() {
                    return Err(ProblemError::EmptyBatch);
                }
                for e in &b.examples {
                    self.check_example(e)?;
                    for (c, f) in center.iter_mut().zip(&e.features) {
                        *c += f;
                    }
                    count += 1;
                }
            }
            let scale = 1.0 / (count as f64 * (1.0 + 2.0 * self.nu));
            for c in &mut center {
                *c *= scale;
            }
            return Ok(project(set, &Metric::Identity, &center)?);
        }

        let start = match warm {
            Some(w) if w.len() == self.dim => w.to_vec(),
            _ => vec![0.0; self.dim],
        };
        let mut x = project(set, &Metric::Identity, &start)?;
        let mut fx = self.network_value(&x, batches)?;
        let rho = self.rho_bound(batches)?.value.max(1e-8);
        let mut step = 1.0 / rho;
        let tol = if tol > 0.0 && tol.is_finite() { tol } else { 1e-10 };
        for _ in 0..300_000 {
            let g = self.network_grad(&x, batches)?;
            // Backtracking proximal-gradient: grow the step, then shrink
            // until the quadratic upper model holds. The model test carries
            // no noise slack — one would let oversized steps pass near the
            // optimum and pin the iterates in a wobble above the tolerance.
            step = (step * 2.0).min(1e6 / rho.max(1e-300));
            let mut accepted = None;
            while step >= 1e-18 {
                let mut target = x.clone();
                for (t, gd) in target.iter_mut().zip(&g) {
                    *t -= step * gd;
                }
                let cand = project(set, &Metric::Identity, &target)?;
                let fc = self.network_value(&cand, batches)?;
                let mut lin = 0.0;
                let mut sq = 0.0;
                for d in 0..self.dim {
                    let delta = cand[d] - x[d];
                    lin += g[d] * delta;
                    sq += delta * delta;
                }
                if fc <= fx + lin + sq / (2.0 * step) {
                    accepted = Some((cand, fc));
                    break;
                }
                step *= 0.5;
            }
            // No representable step achieves model descent: the point is
            // optimal to the arithmetic's resolution, which can sit above a
            // very tight displacement tolerance.
            let Some((next, fnext)) = accepted else {
                return Ok(x);
            };
            let mut moved = 0.0;
            for d in 0..self.dim {
                let delta = next[d] - x[d];
                moved += delta * delta;
            }
            let scale = norm2(&x).max(1.0);
            x = next;
            fx = fnext;
            if moved.sqrt() <= tol * scale {
                return Ok(x);
            }
        }
        Err(ProblemError::MinimizerStalled)
    }
}

/// Synthetic per-agent stream. The batch for `(agent, round)` is generated
/// from a counter-derived substream of the master seed, so it is identical
/// no matter when or how often it is asked for.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticStream {
    kind: LossKind,
    dim: usize,
    feature_dim: usize,
    n_agents: usize,
    batch_size: usize,
    seed: u64,
    /// Ground-truth shift per round along the first coordinate.
    drift: f64,
    /// Scale of the label/center noise.
    noise: f64,
    /// Ground truth at round 1: class weights (classification) or the
    /// tracked center (quadratic).
    base: Vec<f64>,
}

impl SyntheticStream {
    pub fn new(
        kind: LossKind,
        dim: usize,
        n_agents: usize,
        batch_size: usize,
        seed: u64,
        drift: f64,
        noise: f64,
    ) -> Result<SyntheticStream> {
        // Dimension/class validity is shared with the oracle's rules.
        LossOracle::new(kind, dim, 0.0)?;
        if n_agents == 0 {
            return Err(ProblemError::NoAgents);
        }
        if batch_size == 0 {
            return Err(ProblemError::BadBatchSize);
        }
        if !drift.is_finite() {
            return Err(ProblemError::BadDrift(drift));
        }
        if !(noise >= 0.0) || !noise.is_finite() {
            return Err(ProblemError::BadNoise(noise));
        }
        let feature_dim = match kind {
            LossKind::Softmax { classes } => dim / classes,
            _ => dim,
        };
        let mut r = rng::stream(seed, &[1]);
        let mut base: Vec<f64> = (0..dim).map(|_| rng::normal(&mut r)).collect();
        if kind != LossKind::Quadratic {
            // Unit-norm ground truth keeps classification margins O(1).
            let n = norm2(&base);
            if n > 0.0 {
                for b in &mut base {
                    *b /= n;
                }
            }
        }
        Ok(SyntheticStream {
            kind,
            dim,
            feature_dim,
            n_agents,
            batch_size,
            seed,
            drift,
            noise,
            base,
        })
    }

    pub fn n_agents(&self) -> usize {
        self.n_agents
    }

    pub fn batch_size(&self) -> usize {
        self.batch_size
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Ground truth at round `t`: the base shifted by `drift * (t-1)` along
    /// the first coordinate.
    pub fn truth_at(&self, t: usize) -> Vec<f64> {
        let mut w = self.base.clone();
        w[0] += self.drift * (t as f64 - 1.0);
        w
    }

    /// The batch agent `agent` observes at round `t` (1-based).
    pub fn batch(&self, agent: usize, t: usize) -> DataBatch {
        let mut r = rng::stream(self.seed, &[2, agent as u64, t as u64]);
        let truth = self.truth_at(t);
        let mut examples = Vec::with_capacity(self.batch_size);
        for _ in 0..self.batch_size {
            let e = match self.kind {
                LossKind::Quadratic => {
                    let mut c = truth.clone();
                    if self.noise > 0.0 {
                        for cd in &mut c {
                            *cd += self.noise * rng::normal(&mut r);
                        }
                    }
                    Example { features: c, label: 0.0 }
                }
                LossKind::Logistic | LossKind::SquaredHinge => {
                    let features: Vec<f64> =
                        (0..self.feature_dim).map(|_| rng::normal(&mut r)).collect();
                    let margin = dot(&truth, &features) + self.noise * rng::normal(&mut r);
                    let label = if margin >= 0.0 { 1.0 } else { -1.0 };
                    Example { features, label }
                }
                LossKind::Softmax { classes } => {
                    let features: Vec<f64> =
                        (0..self.feature_dim).map(|_| rng::normal(&mut r)).collect();
                    let q = self.feature_dim;
                    let mut best = 0usize;
                    let mut best_score = f64::NEG_INFINITY;
                    for c in 0..classes {
                        let score = dot(&truth[c * q..(c + 1) * q], &features)
                            + self.noise * rng::normal(&mut r);
                        if score > best_score {
                            best_score = score;
                            best = c;
                        }
                    }
                    Example { features, label: best as f64 }
                }
            };
            examples.push(e);
        }
        DataBatch { examples }
    }

    /// All agents' batches for round `t`.
    pub fn network_batches(&self, t: usize) -> Vec<DataBatch> {
        (0..self.n_agents).map(|i| self.batch(i, t)).collect()
    }
}

/// A fixed dataset dealt to agents round-robin by row, then chunked into
/// per-round batches that cycle when the shard runs out.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetStream {
    shards: Vec<Vec<Example>>,
    batch_size: usize,
}

impl DatasetStream {
    /// Parse `label,feat0,feat1,...` rows. Lines starting with `#` and
    /// blank lines are skipped; a first row whose leading field is not a
    /// number is treated as a header. `shuffle_seed` permutes rows before
    /// dealing.
    pub fn from_csv(
        text: &str,
        n_agents: usize,
        batch_size: usize,
        shuffle_seed: Option<u64>,
    ) -> Result<DatasetStream> {
        if n_agents == 0 {
            return Err(ProblemError::NoAgents);
        }
        if batch_size == 0 {
            return Err(ProblemError::BadBatchSize);
        }
        let mut rows: Vec<Example> = Vec::new();
        let mut width: Option<usize> = None;
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if rows.is_empty() && width.is_none() && fields[0].parse::<f64>().is_err() {
                continue; // header row
            }
            if fields.len() < 2 {
                return Err(ProblemError::Csv {
                    line: idx + 1,
                    msg: "need a label and at least one feature".into(),
                });
            }
            match width {
                None => width = Some(fields.len()),
                Some(w) if w != fields.len() => {
                    return Err(ProblemError::Csv {
                        line: idx + 1,
                        msg: format!("expected {w} fields, got {}", fields.len()),
                    });
                }
                Some(_) => {}
            }
            let mut parsed = Vec::with_capacity(fields.len());
            for f in &fields {
                parsed.push(f.parse::<f64>().map_err(|e| ProblemError::Csv {
                    line: idx + 1,
                    msg: format!("bad number {f:?}: {e}"),
                })?);
            }
            let label = parsed[0];
            let features = parsed[1..].to_vec();
            rows.push(Example { features, label });
        }
        if rows.is_empty() {
            return Err(ProblemError::EmptyDataset);
        }
        if let Some(seed) = shuffle_seed {
            let mut r = rng::stream(seed, &[3]);
            // Fisher-Yates.
            for i in (1..rows.len()).rev() {
                let j = r.random_range(0..=i);
                rows.swap(i, j);
            }
        }
        let mut shards: Vec<Vec<Example>> = vec![Vec::new(); n_agents];
        for (j, row) in rows.into_iter().enumerate() {
            shards[j % n_agents].push(row);
        }
        Ok(DatasetStream { shards, batch_size })
    }

    pub fn n_agents(&self) -> usize {
        self.shards.len()
    }

    pub fn batch_size(&self) -> usize {
        self.batch_size
    }

    pub fn shard_len(&self, agent: usize) -> usize {
        self.shards[agent].len()
    }

    /// The batch agent `agent` sees at round `t` (1-based): the next
    /// `batch_size` rows of its shard, wrapping around.
    pub fn batch(&self, agent: usize, t: usize) -> DataBatch {
        let shard = &self.shards[agent];
        let start = (t - 1) * self.batch_size;
        let examples = (0..self.batch_size)
            .map(|j| shard[(start + j) % shard.len()].clone())
            .collect();
        DataBatch { examples }
    }

    pub fn network_batches(&self, t: usize) -> Vec<DataBatch> {
        (0..self.n_agents()).map(|i| self.batch(i, t)).collect()
    }
}

/// Either stream behind one interface.
#[derive(Debug, Clone, PartialEq)]
pub enum Stream {
    Synthetic(SyntheticStream),
    Dataset(DatasetStream),
}

impl Stream {
    pub fn n_agents(&self) -> usize {
        match self {
            Stream::Synthetic(s) => s.n_agents(),
            Stream::Dataset(s) => s.n_agents(),
        }
    }

    pub fn batch(&self, agent: usize, t: usize) -> DataBatch {
        match self {
            Stream::Synthetic(s) => s.batch(agent, t),
            Stream::Dataset(s) => s.batch(agent, t),
        }
    }

    pub fn network_batches(&self, t: usize) -> Vec<DataBatch> {
        match self {
            Stream::Synthetic(s) => s.network_batches(t),
            Stream::Dataset(s) => s.network_batches(t),
        }
    }
}
