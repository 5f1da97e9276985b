//! Shared helpers for the integration test targets: an independent
//! single-machine AMSGrad reference, an independent brute-force projection
//! oracle, and small path/statistics utilities.

#![allow(dead_code)] // each integration target uses its own subset

use std::path::{Path, PathBuf};

use dadam::projections::ConstraintSet;
use rand::Rng;

/// Path to one of the shipped experiment configs at the workspace root.
pub fn config_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
}

/// Mean of a slice.
pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

// ---------------------------------------------------------------------------
// Independent AMSGrad reference (single machine, no network)
// ---------------------------------------------------------------------------

/// A from-scratch AMSGrad loop: EWMA first/second moments, hard running-max
/// denominator, `alpha / sqrt(t)` steps, unconstrained iterates. Written
/// without reference to the library's update code so trajectory agreement
/// is meaningful.
pub struct ReferenceAmsGrad {
    pub x: Vec<f64>,
    m: Vec<f64>,
    v: Vec<f64>,
    vhat: Vec<f64>,
    alpha: f64,
    beta1: f64,
    beta2: f64,
    t: usize,
}

impl ReferenceAmsGrad {
    pub fn new(x0: Vec<f64>, alpha: f64, beta1: f64, beta2: f64) -> ReferenceAmsGrad {
        let p = x0.len();
        ReferenceAmsGrad {
            x: x0,
            m: vec![0.0; p],
            v: vec![0.0; p],
            vhat: vec![0.0; p],
            alpha,
            beta1,
            beta2,
            t: 1,
        }
    }

    /// One round with gradient `g`. A coordinate whose denominator is still
    /// zero has never seen gradient mass and stays put.
    pub fn step(&mut self, g: &[f64]) {
        let alpha_t = self.alpha / (self.t as f64).sqrt();
        for d in 0..self.x.len() {
            self.m[d] = self.beta1 * self.m[d] + (1.0 - self.beta1) * g[d];
            self.v[d] = self.beta2 * self.v[d] + (1.0 - self.beta2) * g[d] * g[d];
            self.vhat[d] = self.vhat[d].max(self.v[d]);
            let denom = self.vhat[d].sqrt();
            if denom > 0.0 {
                self.x[d] -= alpha_t * self.m[d] / denom;
            }
        }
        self.t += 1;
    }
}

// ---------------------------------------------------------------------------
// Brute-force weighted projection oracle
// ---------------------------------------------------------------------------

/// Weighted squared distance `sum_d a_d (z_d - x_d)^2`.
pub fn weighted_sq_dist(weights: &[f64], z: &[f64], x: &[f64]) -> f64 {
    weights
        .iter()
        .zip(z.iter().zip(x))
        .map(|(a, (zd, xd))| a * (zd - xd) * (zd - xd))
        .sum()
}

/// Exact minimization of coordinate `d` toward `target` with the other
/// coordinates of `z` held fixed: the feasible interval for `z_d` is
/// computed from the set's defining inequality and `target` is clamped
/// into it. The coordinate's weight never matters — a one-dimensional
/// weighted quadratic is minimized at the clamp point regardless.
fn coord_min(set: &ConstraintSet, z: &[f64], d: usize, target: f64) -> f64 {
    match set {
        ConstraintSet::Unconstrained => target,
        ConstraintSet::Box { lo, hi } => target.clamp(lo[d], hi[d]),
        ConstraintSet::L1Ball { radius } => {
            let others: f64 = z
                .iter()
                .enumerate()
                .filter(|(e, _)| *e != d)
                .map(|(_, v)| v.abs())
                .sum();
            let s = (radius - others).max(0.0);
            target.clamp(-s, s)
        }
        ConstraintSet::L2Ball { center, radius } => {
            let others: f64 = z
                .iter()
                .enumerate()
                .filter(|(e, _)| *e != d)
                .map(|(e, v)| (v - center[e]) * (v - center[e]))
                .sum();
            let s = (radius * radius - others).max(0.0).sqrt();
            target.clamp(center[d] - s, center[d] + s)
        }
    }
}

/// A feasible point for the set (used to seed the search).
fn feasible_point(set: &ConstraintSet, p: usize) -> Vec<f64> {
    match set {
        ConstraintSet::Unconstrained | ConstraintSet::L1Ball { .. } => vec![0.0; p],
        ConstraintSet::Box { lo, hi } => lo.iter().zip(hi).map(|(l, h)| 0.5 * (l + h)).collect(),
        ConstraintSet::L2Ball { center, .. } => center.clone(),
    }
}

/// Repeated exact coordinate minimization sweeps until the point stops
/// moving.
fn cd_sweeps(set: &ConstraintSet, x: &[f64], z: &mut [f64], sweeps: usize) {
    for _ in 0..sweeps {
        let mut moved = 0.0;
        for d in 0..z.len() {
            let old = z[d];
            z[d] = coord_min(set, z, d, x[d]);
            moved += (z[d] - old).abs();
        }
        if moved <= 1e-15 {
            break;
        }
    }
}

/// Brute-force weighted projection for dimensions up to ~4: projected
/// coordinate descent from 64 random feasible starts, then grid refinement
/// over every {-1,0,+1}^p offset at shrinking scales. The combined-coordinate
/// offsets slide the iterate along active ball faces, the move plain
/// coordinate descent cannot make once every single-coordinate interval
/// degenerates on the boundary.
pub fn projection_oracle<R: Rng>(
    set: &ConstraintSet,
    weights: &[f64],
    x: &[f64],
    rng: &mut R,
) -> Vec<f64> {
    let p = x.len();
    let mut best = feasible_point(set, p);
    cd_sweeps(set, x, &mut best, 500);
    let mut best_f = weighted_sq_dist(weights, &best, x);

    for _ in 0..63 {
        let mut z = feasible_point(set, p);
        for zd in z.iter_mut() {
            *zd += 3.0 * (rng.random::<f64>() - 0.5);
        }
        // Re-feasibilize the random start by a clamping sweep toward itself.
        let start = z.clone();
        for d in 0..p {
            z[d] = coord_min(set, &z, d, start[d]);
        }
        cd_sweeps(set, x, &mut z, 500);
        let f = weighted_sq_dist(weights, &z, x);
        if f < best_f {
            best_f = f;
            best = z;
        }
    }

    // Grid refinement: at each scale try every nonzero offset in
    // {-1,0,+1}^p, feasibilized by clamping sweeps from the incumbent
    // toward the offset point, then polished by descent sweeps; keep
    // improvements and shrink the scale once none remain.
    let offsets: Vec<Vec<f64>> = (0..3usize.pow(p as u32))
        .map(|code| {
            let mut off = vec![0.0; p];
            let mut rest = code;
            for slot in off.iter_mut() {
                *slot = (rest % 3) as f64 - 1.0;
                rest /= 3;
            }
            off
        })
        .filter(|off| off.iter().any(|&o| o != 0.0))
        .collect();
    let mut delta = 2.0f64;
    while delta > 1e-10 {
        let mut improved = true;
        while improved {
            improved = false;
            for off in &offsets {
                let mut z = best.clone();
                for _ in 0..2 {
                    for d in 0..p {
                        z[d] = coord_min(set, &z, d, best[d] + delta * off[d]);
                    }
                }
                // Score the slid point as-is: descent sweeps from a point on
                // an active face clamp straight back to the face and would
                // undo the slide, so polishing is tried on a copy instead.
                let f = weighted_sq_dist(weights, &z, x);
                if f < best_f - 1e-18 {
                    best_f = f;
                    best = z.clone();
                    improved = true;
                }
                cd_sweeps(set, x, &mut z, 20);
                let f = weighted_sq_dist(weights, &z, x);
                if f < best_f - 1e-18 {
                    best_f = f;
                    best = z;
                    improved = true;
                }
            }
        }
        delta *= 0.5;
    }
    best
}
