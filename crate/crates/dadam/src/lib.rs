//! Consensus-based distributed adaptive gradient methods over agent networks.
//!
//! A network of `n` agents repeatedly exchanges iterates through a doubly
//! stochastic mixing matrix while each agent runs an adaptive-moment gradient
//! update (Adam/AMSGrad-style first and second moments with a max-tracked
//! denominator) against its own streaming losses. The library provides:
//!
//! - [`topology`]: communication graphs, Metropolis mixing weights, and the
//!   second-largest singular value that controls information spread;
//! - [`projections`]: weighted projections onto boxes and l1/l2 balls, the
//!   feasible-set geometry the updates need;
//! - [`optimizer`]: the per-agent moment recursions, the gossip step, preset
//!   method variants, and the disagreement-corrected output rule;
//! - [`problems`]: synthetic and file-backed streaming losses (logistic,
//!   softmax, squared hinge, quadratic tracking) with exact and stochastic
//!   gradients plus per-round minimizer oracles;
//! - [`metrics`]: dynamic regret, path length, consensus error, projected
//!   gradients, and evaluators for the theoretical upper bounds the method
//!   satisfies;
//! - [`harness`]: config-file driven experiment runner with deterministic
//!   CSV artifacts (`run`, `compare`, `sweep`, `bounds`).
//!
//! Everything is deterministic: randomness flows through counter-based
//! sub-seeds of a single master seed, so identical configs produce
//! byte-identical outputs.

pub mod harness;
pub mod metrics;
pub mod optimizer;
pub mod problems;
pub mod projections;
pub mod rng;
pub mod topology;

pub(crate) mod vecmath;
