//! Acceptance suite: one test per shipped guarantee, each printing a
//! single PASS/FAIL line (run with `-- --nocapture` to see them). Every
//! tolerance is pinned in code next to its check.

mod common;

use std::time::Instant;

use common::{config_path, mean, projection_oracle, ReferenceAmsGrad};
use dadam::harness::{self, ExperimentConfig};
use dadam::metrics::{corrected_rule_residual, moment_bounds};
use dadam::optimizer::{HyperParams, Network};
use dadam::problems::{LossKind, LossOracle, SyntheticStream};
use dadam::projections::{nonexpansive, project, ConstraintSet, Metric};
use dadam::rng;
use dadam::topology::{consensus_distance, Graph, MixingMatrix};
use rand::Rng;

/// Print the criterion's verdict line, then enforce it.
fn verdict(id: usize, name: &str, pass: bool, detail: String) {
    let status = if pass { "PASS" } else { "FAIL" };
    println!("ACCEPTANCE {id} ({name}): {status} — {detail}");
    assert!(pass, "acceptance criterion {id} ({name}) failed: {detail}");
}

fn load_config(file: &str) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::from_file(&config_path(file))
        .unwrap_or_else(|e| panic!("loading {file}: {e}"));
    cfg.quiet = true;
    cfg
}

// -------------------------------------------------------------------------
// 1. Single-agent trajectory equals an independent AMSGrad loop.
// -------------------------------------------------------------------------

#[test]
fn single_agent_trajectory_matches_reference_amsgrad() {
    const TOL: f64 = 1e-12;
    let started = Instant::now();

    let mut hp = HyperParams::preset("damsgrad").unwrap();
    hp.epsilon = 0.0; // pure max-denominator rule, as the reference implements
    let dim = 5;
    let oracle = LossOracle::new(LossKind::Logistic, dim, 0.1).unwrap();
    let stream = SyntheticStream::new(LossKind::Logistic, dim, 1, 8, 123, 0.0, 0.3).unwrap();

    let graph = Graph::from_edges(1, &[]).unwrap();
    let w = MixingMatrix::metropolis(&graph, 1.0).unwrap();
    let mut net = Network::new(
        hp.clone(),
        w,
        ConstraintSet::Unconstrained,
        &[vec![0.0; dim]],
        Some(100),
    )
    .unwrap();
    let mut reference = ReferenceAmsGrad::new(vec![0.0; dim], hp.alpha, hp.beta1, hp.beta2);

    let mut worst: f64 = 0.0;
    for t in 1..=100 {
        let batch = stream.batch(0, t);
        let g_net = oracle.grad(&net.iterates()[0], &batch).unwrap();
        net.step(&[g_net]).unwrap();
        let g_ref = oracle.grad(&reference.x, &batch).unwrap();
        reference.step(&g_ref);
        for (a, b) in net.iterates()[0].iter().zip(&reference.x) {
            worst = worst.max((a - b).abs());
        }
    }

    let elapsed = started.elapsed();
    let pass = worst <= TOL && elapsed.as_secs_f64() < 1.0;
    verdict(
        1,
        "centralized equivalence",
        pass,
        format!("max coordinate gap {worst:.3e} over 100 rounds (tol {TOL:.0e}), {elapsed:.2?}"),
    );
}

// -------------------------------------------------------------------------
// 2. Metropolis matrices: stochasticity, diagonal, contraction, flattening.
// -------------------------------------------------------------------------

#[test]
fn metropolis_matrices_mix_doubly_stochastically() {
    const SUM_TOL: f64 = 1e-12;
    const RATE_TOL: f64 = 1e-9;
    let started = Instant::now();

    let mut checked = 0usize;
    for case in 0..50u64 {
        let n = 2 + (case as usize * 7) % 19; // spread over [2, 20]
        let r = [0.2, 0.5, 1.0][case as usize % 3];
        let graph = Graph::random_connected(n, r, 1000 + case).unwrap();
        let w = MixingMatrix::metropolis(&graph, 1.0).unwrap();
        let sigma2 = w.sigma2();

        for i in 0..n {
            let row: f64 = (0..n).map(|j| w.get(i, j)).sum();
            let col: f64 = (0..n).map(|j| w.get(j, i)).sum();
            assert!((row - 1.0).abs() <= SUM_TOL, "row {i} sums to {row}");
            assert!((col - 1.0).abs() <= SUM_TOL, "col {i} sums to {col}");
            assert!(w.get(i, i) > 0.0, "diagonal {i} not positive");
        }

        // One random block: mixing contracts the consensus distance.
        let mut rng = rng::stream(5, &[case]);
        let x: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..3).map(|_| rng::normal(&mut rng)).collect())
            .collect();
        let mixed = w.mix(&x).unwrap();
        let before = consensus_distance(&x);
        let after = consensus_distance(&mixed);
        assert!(
            after <= sigma2 * before + RATE_TOL,
            "contraction violated: {after} > {sigma2} * {before}"
        );

        // Powers flatten toward the all-average matrix at the sigma2 rate.
        for t in 1..=20usize {
            let p = w.power(t);
            let envelope = (n as f64).sqrt() * sigma2.powi(t as i32) + RATE_TOL;
            for i in 0..n {
                let dev: f64 = (0..n).map(|j| (p[i * n + j] - 1.0 / n as f64).abs()).sum();
                assert!(
                    dev <= envelope,
                    "power deviation {dev} > {envelope} at n={n} t={t} row {i}"
                );
            }
        }
        checked += 1;
    }

    let elapsed = started.elapsed();
    let pass = checked == 50 && elapsed.as_secs_f64() < 5.0;
    verdict(
        2,
        "mixing invariants",
        pass,
        format!("{checked} random graphs, n in [2,20], powers to t=20, {elapsed:.2?}"),
    );
}

// -------------------------------------------------------------------------
// 3. Weighted projections agree with the brute-force oracle; idempotence
//    and nonexpansiveness on random pairs.
// -------------------------------------------------------------------------

#[test]
fn weighted_projections_agree_with_brute_force() {
    const ORACLE_TOL: f64 = 1e-5;
    const IDEM_TOL: f64 = 1e-10;
    let started = Instant::now();

    let mut worst_gap: f64 = 0.0;
    for case in 0..100u64 {
        let mut rng = rng::stream(77, &[case]);
        let p = 1 + (case as usize) % 4;
        let weights: Vec<f64> = (0..p)
            .map(|_| 10f64.powf(2.0 * rng.random::<f64>() - 1.0))
            .collect();
        let x: Vec<f64> = (0..p).map(|_| 3.0 * rng::normal(&mut rng)).collect();
        let set = match case % 3 {
            0 => ConstraintSet::Box {
                lo: (0..p).map(|_| -1.5 - rng.random::<f64>()).collect(),
                hi: (0..p).map(|_| 0.5 + rng.random::<f64>()).collect(),
            },
            1 => ConstraintSet::L1Ball { radius: 0.8 + rng.random::<f64>() },
            _ => ConstraintSet::L2Ball {
                center: (0..p).map(|_| 0.5 * rng::normal(&mut rng)).collect(),
                radius: 0.8 + rng.random::<f64>(),
            },
        };
        let got = project(&set, &Metric::Diagonal(weights.clone()), &x).unwrap();
        let want = projection_oracle(&set, &weights, &x, &mut rng);
        for d in 0..p {
            worst_gap = worst_gap.max((got[d] - want[d]).abs());
        }
    }
    assert!(
        worst_gap <= ORACLE_TOL,
        "projection differs from the brute-force oracle by {worst_gap}"
    );

    let mut pairs = 0usize;
    for case in 0..1000u64 {
        let mut rng = rng::stream(78, &[case]);
        let p = 1 + (case as usize) % 6;
        let metric = if case % 2 == 0 {
            Metric::Identity
        } else {
            Metric::Diagonal(
                (0..p)
                    .map(|_| 10f64.powf(2.0 * rng.random::<f64>() - 1.0))
                    .collect(),
            )
        };
        let set = match case % 3 {
            0 => ConstraintSet::Box {
                lo: vec![-1.0; p],
                hi: vec![1.0; p],
            },
            1 => ConstraintSet::L1Ball { radius: 1.5 },
            _ => ConstraintSet::L2Ball { center: vec![0.0; p], radius: 1.5 },
        };
        let a: Vec<f64> = (0..p).map(|_| 4.0 * rng::normal(&mut rng)).collect();
        let b: Vec<f64> = (0..p).map(|_| 4.0 * rng::normal(&mut rng)).collect();
        let pa = project(&set, &metric, &a).unwrap();
        let paa = project(&set, &metric, &pa).unwrap();
        for d in 0..p {
            assert!(
                (paa[d] - pa[d]).abs() <= IDEM_TOL,
                "projection not idempotent: moved {} on re-projection",
                (paa[d] - pa[d]).abs()
            );
        }
        assert!(
            nonexpansive(&set, &metric, &a, &b).unwrap(),
            "projection pair expanded the metric distance"
        );
        pairs += 1;
    }

    let elapsed = started.elapsed();
    let pass = pairs == 1000 && elapsed.as_secs_f64() < 30.0;
    verdict(
        3,
        "projection oracle equivalence",
        pass,
        format!(
            "worst oracle gap {worst_gap:.3e} over 100 instances (tol {ORACLE_TOL:.0e}), \
             {pairs} idempotence/nonexpansiveness pairs, {elapsed:.2?}"
        ),
    );
}

// -------------------------------------------------------------------------
// 4. Exact moment invariants on every shipped config.
// -------------------------------------------------------------------------

#[test]
fn shipped_configs_keep_exact_moment_invariants() {
    let files = [
        "quadratic_tracking.ini",
        "logistic_consensus.ini",
        "quadratic_stationary.ini",
        "method_comparison.ini",
        "beta3_sensitivity.ini",
    ];
    let started = Instant::now();
    let mut rounds_checked = 0usize;
    for file in files {
        let cfg = load_config(file);
        let ex = harness::execute(&cfg).unwrap_or_else(|e| panic!("executing {file}: {e}"));
        moment_bounds(&ex.record)
            .unwrap_or_else(|e| panic!("moment invariant broken in {file}: {e}"));
        rounds_checked += ex.record.rounds();
    }
    let elapsed = started.elapsed();
    verdict(
        4,
        "moment invariants on shipped configs",
        true,
        format!(
            "second-moment monotonicity and momentum caps exact over {rounds_checked} rounds \
             across {} configs, {elapsed:.2?}",
            files.len()
        ),
    );
}

// -------------------------------------------------------------------------
// 5. The dynamic-regret guarantee holds with positive slack on the
//    drifting constrained quadratic.
// -------------------------------------------------------------------------

#[test]
fn tracking_run_stays_under_dynamic_regret_bound() {
    let started = Instant::now();
    let cfg = load_config("quadratic_tracking.ini");
    let ex = harness::execute(&cfg).unwrap();
    let elapsed = started.elapsed();

    let report = ex
        .reports
        .iter()
        .find(|r| r.name == "dynamic_regret_bound")
        .expect("the tracking config must produce the dynamic-regret report");
    let pass = report.holds
        && report.slack > 0.0
        && report.all_constants_exact
        && ex.minimizers_exact
        && elapsed.as_secs_f64() < 10.0;
    verdict(
        5,
        "dynamic-regret guarantee",
        pass,
        format!(
            "measured {:.4e} <= bound {:.4e}, slack {:.4e}, constants exact: {}, {elapsed:.2?}",
            report.measured, report.bound, report.slack, report.all_constants_exact
        ),
    );
}

// -------------------------------------------------------------------------
// 6. The consensus envelope B_t dominates mean disagreement every round.
// -------------------------------------------------------------------------

#[test]
fn logistic_network_stays_under_consensus_envelope() {
    const TOL: f64 = 1e-9;
    let started = Instant::now();
    let cfg = load_config("logistic_consensus.ini");
    let ex = harness::execute(&cfg).unwrap();
    let elapsed = started.elapsed();

    let bound = ex
        .consensus
        .bound
        .as_ref()
        .expect("adaptive run must carry the consensus envelope");
    let mut worst_slack = f64::INFINITY;
    let mut violations = 0usize;
    for (m, b) in ex.consensus.mean.iter().zip(bound) {
        worst_slack = worst_slack.min(b - m);
        if *m > b + TOL {
            violations += 1;
        }
    }
    let pass = violations == 0
        && ex.consensus.holds == Some(true)
        && ex.consensus.mean.len() == 1000
        && elapsed.as_secs_f64() < 30.0;
    verdict(
        6,
        "consensus envelope",
        pass,
        format!(
            "{} rounds, {violations} violations, tightest slack {worst_slack:.4e}, {elapsed:.2?}",
            ex.consensus.mean.len()
        ),
    );
}

// -------------------------------------------------------------------------
// 7. The stationarity guarantee holds with exact constants on the
//    prescribed-step nonconvex quadratic, and the measured series is a
//    running minimum.
// -------------------------------------------------------------------------

#[test]
fn prescribed_run_stays_under_stationarity_bound() {
    let started = Instant::now();
    let cfg = load_config("quadratic_stationary.ini");
    let ex = harness::execute(&cfg).unwrap();
    let elapsed = started.elapsed();

    let report = ex
        .reports
        .iter()
        .find(|r| r.name == "stationarity_bound")
        .expect("the prescribed-step config must produce the stationarity report");
    let series = &ex.local.as_ref().expect("local pass must run").series;
    let nonincreasing = series.windows(2).all(|w| w[1] <= w[0]);
    let pass = report.holds
        && report.all_constants_exact
        && nonincreasing
        && elapsed.as_secs_f64() < 10.0;
    verdict(
        7,
        "stationarity guarantee",
        pass,
        format!(
            "measured {:.4e} <= bound {:.4e}, constants exact: {}, series nonincreasing: \
             {nonincreasing}, step {:.4e}, {elapsed:.2?}",
            report.measured, report.bound, report.all_constants_exact, ex.alpha
        ),
    );
}

// -------------------------------------------------------------------------
// 8. Adaptive presets match or beat plain distributed gradient descent on
//    the shared logistic problem (3 seeds).
// -------------------------------------------------------------------------

#[test]
fn adaptive_presets_match_or_beat_plain_descent() {
    let started = Instant::now();
    let base = load_config("method_comparison.ini");

    // Final training loss: the last five rounds averaged, then averaged
    // over seeds 0..3.
    let final_loss = |preset: &str| -> f64 {
        let mut across_seeds = Vec::new();
        for seed in 0..3u64 {
            let mut cfg = base.clone();
            cfg.optimizer.hp = HyperParams::preset(preset).unwrap();
            cfg.label = preset.to_string();
            cfg.seed = seed;
            let ex = harness::execute(&cfg).unwrap();
            let losses = ex.record.network_losses();
            across_seeds.push(mean(&losses[losses.len() - 5..]));
        }
        mean(&across_seeds)
    };

    let dsgd = final_loss("dsgd");
    let dadam = final_loss("dadam");
    let damsgrad = final_loss("damsgrad");
    let drmsprop = final_loss("drmsprop");

    let elapsed = started.elapsed();
    let pass = dadam <= dsgd && damsgrad <= dsgd && drmsprop <= dsgd
        && elapsed.as_secs_f64() < 120.0;
    verdict(
        8,
        "adaptive-vs-plain ordering",
        pass,
        format!(
            "final losses: dadam {dadam:.4}, damsgrad {damsgrad:.4}, drmsprop {drmsprop:.4} \
             vs dsgd {dsgd:.4} (3 seeds), {elapsed:.2?}"
        ),
    );
}

// -------------------------------------------------------------------------
// 9. The incremental corrected-output accumulation equals the literal
//    cumulative recomputation; from a zero consensus start with zero
//    gradients it stays identically zero.
// -------------------------------------------------------------------------

#[test]
fn corrected_outputs_equal_their_cumulative_recomputation() {
    const TOL: f64 = 1e-12;
    let started = Instant::now();

    let text = "\
[topology]
n = 4
r = 0.8

[problem]
kind = quadratic
dim = 3
batch = 4
horizon = 200
drift = 0.02
noise = 0.3

[optimizer]
preset = dadam
corrected = true

[metrics]
bounds = false
dynamic_regret = false

[run]
seed = 17
quiet = true
";
    let cfg = ExperimentConfig::parse(text, "inline", std::path::Path::new(".")).unwrap();
    let ex = harness::execute(&cfg).unwrap();
    let residual = corrected_rule_residual(&ex.record).unwrap();
    assert!(
        residual <= TOL,
        "corrected outputs drift {residual} from the recomputed cumulative sum"
    );

    // Zero start, zero gradients: the correction never leaves zero.
    let graph = Graph::random_connected(3, 0.8, 9).unwrap();
    let w = MixingMatrix::metropolis(&graph, 1.0).unwrap();
    let mut hp = HyperParams::preset("dadam").unwrap();
    hp.corrected = true;
    let mut net = Network::new(
        hp,
        w,
        ConstraintSet::Unconstrained,
        &[vec![0.0; 2], vec![0.0; 2], vec![0.0; 2]],
        Some(50),
    )
    .unwrap();
    let zeros = vec![vec![0.0; 2]; 3];
    for _ in 0..50 {
        net.step(&zeros).unwrap();
        for agent in net.agents() {
            assert!(
                agent.corr.iter().all(|c| *c == 0.0),
                "correction left zero from a zero consensus start"
            );
            assert!(agent.x.iter().all(|v| *v == 0.0));
        }
    }

    let elapsed = started.elapsed();
    let pass = elapsed.as_secs_f64() < 5.0;
    verdict(
        9,
        "corrected-rule recomputation",
        pass,
        format!(
            "incremental vs recomputed residual {residual:.3e} over 200 rounds (tol {TOL:.0e}); \
             zero-start correction identically zero over 50 rounds, {elapsed:.2?}"
        ),
    );
}

// -------------------------------------------------------------------------
// 10. Minibatch gradients are unbiased for the sign-label losses.
// -------------------------------------------------------------------------

#[test]
fn minibatch_gradients_are_unbiased() {
    const DRAWS: usize = 10_000;
    let started = Instant::now();

    let mut details = Vec::new();
    for (k, kind) in [LossKind::Logistic, LossKind::SquaredHinge].iter().enumerate() {
        let dim = 6;
        let oracle = LossOracle::new(*kind, dim, 0.01).unwrap();
        let stream = SyntheticStream::new(*kind, dim, 1, 40, 2024, 0.0, 0.5).unwrap();
        let batch = stream.batch(0, 1);

        let mut point_rng = rng::stream(9, &[k as u64]);
        let x: Vec<f64> = (0..dim).map(|_| 0.5 * rng::normal(&mut point_rng)).collect();
        let exact = oracle.grad(&x, &batch).unwrap();

        let mut draw_rng = rng::stream(31, &[k as u64]);
        let mut sum = vec![0.0; dim];
        let mut sumsq = vec![0.0; dim];
        for _ in 0..DRAWS {
            let g = oracle.stochastic_grad(&x, &batch, 10, &mut draw_rng).unwrap();
            for d in 0..dim {
                sum[d] += g[d];
                sumsq[d] += g[d] * g[d];
            }
        }
        let mut worst_sigmas: f64 = 0.0;
        for d in 0..dim {
            let m = sum[d] / DRAWS as f64;
            let var = (sumsq[d] - DRAWS as f64 * m * m) / (DRAWS as f64 - 1.0);
            let se = (var / DRAWS as f64).sqrt().max(1e-15);
            let sigmas = (m - exact[d]).abs() / se;
            worst_sigmas = worst_sigmas.max(sigmas);
            assert!(
                sigmas <= 3.0,
                "coordinate {d} of {kind:?} off by {sigmas:.2} standard errors"
            );
        }
        details.push(format!("{kind:?} worst deviation {worst_sigmas:.2} se"));
    }

    let elapsed = started.elapsed();
    let pass = elapsed.as_secs_f64() < 30.0;
    verdict(
        10,
        "stochastic-gradient unbiasedness",
        pass,
        format!("{} over {DRAWS} draws each, {elapsed:.2?}", details.join("; ")),
    );
}
