//! One PASS/FAIL line per acceptance criterion. Run with `--nocapture` to see
//! the report.

mod common;

use std::time::{Duration, Instant};

use catmc::divergence::{hellinger_lb_gap, kl_categorical, kl_upper_bound};
use catmc::evaluation::{baseline_real_completion, BoundConstants};
use catmc::experiment::{run_movielens, run_sweep, MovieLensConfig, SweepConfig};
use catmc::fitting::{fit_logit, FitConfig, TrainingPairs};
use catmc::io::read_udata;
use catmc::linalg::frobenius_norm;
use catmc::links::smoothness_constants;
use catmc::sampling::{default_labels, derive_seed, draw_category, sample_mask, sample_observations, synth_low_rank};
use catmc::solver::{
    log_likelihood, log_likelihood_grad, maximize, project_box, project_constraint_set, project_nuclear_ball, solve,
    Estimate, SolverConfig,
};
use catmc::{ConstraintSpec, LinkFamily, MultinomialLogitFamily};
use common::*;
use ndarray::Array2;
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

/// Contract violations found while running solver instances, for criterion 5.
#[derive(Default)]
struct Contracts {
    checked: usize,
    violations: Vec<String>,
}

impl Contracts {
    fn check(&mut self, label: &str, est: &Estimate, spec: &ConstraintSpec) {
        self.checked += 1;
        if let Some(w) = est.trace.windows(2).find(|w| w[1] < w[0]) {
            self.violations.push(format!("{label}: trace fell from {} to {}", w[0], w[1]));
        }
        if est.trace.len() != est.iters + 1 {
            self.violations.push(format!("{label}: trace length {} for {} iterations", est.trace.len(), est.iters));
        }
        if est.nuclear_residual > 1e-6 * spec.radius() || est.box_residual > 1e-9 {
            self.violations.push(format!(
                "{label}: residuals nuclear {:e}, box {:e}",
                est.nuclear_residual, est.box_residual
            ));
        }
    }
}

fn gradient_check() -> Outcome {
    let mut rng = rng(1);
    let mut worst: f64 = 0.0;
    for instance in 0..20 {
        let k = [2, 3, 5][instance % 3];
        let (d1, d2) = (rng.random_range(2..=10), rng.random_range(2..=10));
        let fam = random_family(&mut rng, k);
        let obs = random_obs(&mut rng, d1, d2, k, 0.7);
        let x = uniform_matrix(&mut rng, d1, d2, 2.0);
        let g = log_likelihood_grad(&fam, &obs, &x).unwrap();
        let f = |m: &Array2<f64>| log_likelihood(&fam, &obs, m).unwrap();
        for o in obs.entries() {
            let fd = central_difference(f, &x, o.row, o.col, 1e-5);
            let an = g[[o.row, o.col]];
            worst = worst.max((an - fd).abs() / an.abs().max(1e-3));
        }
    }
    outcome(worst <= 1e-5, format!("worst relative error {worst:.2e} over 20 instances"))
}

fn projection_check() -> Outcome {
    let mut rng = rng(2);
    let cfg = SolverConfig::default();
    let spec = ConstraintSpec::new(1.0, 1, 4, 4).unwrap();
    let mut worst_oracle: f64 = 0.0;
    for _ in 0..20 {
        let x = normal_matrix(&mut rng, 4, 4, 1.5);
        let proj = project_constraint_set(&x, &spec, &cfg).unwrap();
        let oracle = admm_projection(&x, &spec, 20_000);
        worst_oracle = worst_oracle.max(frobenius_norm(&(&proj.matrix - &oracle)));
    }
    let mut worst_idem: f64 = 0.0;
    let mut worst_expand: f64 = 0.0;
    let radius = spec.radius();
    for _ in 0..100 {
        let a = normal_matrix(&mut rng, 4, 4, 2.0);
        let b = normal_matrix(&mut rng, 4, 4, 2.0);
        let gap = frobenius_norm(&(&a - &b));
        let pb = |m: &Array2<f64>| project_box(m, spec.alpha);
        let pn = |m: &Array2<f64>| project_nuclear_ball(m, radius).unwrap();
        for p in [&pb as &dyn Fn(&Array2<f64>) -> Array2<f64>, &pn] {
            let (qa, qb) = (p(&a), p(&b));
            worst_idem = worst_idem.max(frobenius_norm(&(&p(&qa) - &qa)));
            worst_expand = worst_expand.max(frobenius_norm(&(&qa - &qb)) - gap);
        }
    }
    outcome(
        worst_oracle <= 1e-4 && worst_idem <= 1e-10 && worst_expand <= 1e-10,
        format!(
            "oracle distance {worst_oracle:.2e}, idempotence {worst_idem:.2e}, expansion {worst_expand:.2e}"
        ),
    )
}

fn hellinger_check() -> Outcome {
    let mut rng = rng(3);
    let alpha = 1.0;
    let mut worst = f64::INFINITY;
    for k in [2, 3, 5] {
        for _ in 0..100 {
            let fam = random_family(&mut rng, k);
            let beta_minus = smoothness_constants(&fam, alpha, 2001).unwrap().beta_minus;
            let m = uniform_matrix(&mut rng, 4, 5, alpha);
            let m_hat = uniform_matrix(&mut rng, 4, 5, alpha);
            worst = worst.min(hellinger_lb_gap(&fam, &m, &m_hat, alpha, beta_minus).unwrap());
        }
    }
    outcome(worst >= -1e-10, format!("smallest gap {worst:.3e} over 300 pairs"))
}

fn kl_bound_check() -> Outcome {
    let mut rng = rng(4);
    let mut violations = 0;
    for k in [2, 3, 5, 10] {
        for _ in 0..1000 {
            let p = dirichlet(&mut rng, k);
            let q = dirichlet(&mut rng, k);
            if p.iter().chain(&q).any(|&v| v <= 0.0) {
                continue;
            }
            if kl_upper_bound(&p, &q).unwrap() < kl_categorical(&p, &q).unwrap() {
                violations += 1;
            }
        }
    }
    outcome(violations == 0, format!("{violations} violations over 4000 pairs"))
}

fn contract_battery(contracts: &mut Contracts) {
    let mut rng = rng(5);
    let cfg = SolverConfig::default();
    for instance in 0..8 {
        let k = [2, 3, 5][instance % 3];
        let (d1, d2) = (rng.random_range(3..=15), rng.random_range(3..=15));
        let r = rng.random_range(1..=d1.min(d2).min(3));
        let alpha = rng.random_range(0.5..3.0);
        let link = LinkFamily::from(random_family(&mut rng, k));
        let truth = synth_low_rank(d1, d2, r, alpha, derive_seed(instance as u64, 0)).unwrap();
        let mask = sample_mask(d1, d2, (d1 * d2) as f64 * 0.6, derive_seed(instance as u64, 1)).unwrap();
        if mask.is_empty() {
            continue;
        }
        let obs = sample_observations(&link, &truth, &mask, &default_labels(k), derive_seed(instance as u64, 2)).unwrap();
        let est = solve(&link, &obs, &truth.spec, &cfg).unwrap();
        contracts.check(&format!("categorical {instance}"), &est, &truth.spec);
        let wide = ConstraintSpec::new(k as f64, r, d1, d2).unwrap();
        let base = baseline_real_completion(&obs, &wide, &cfg).unwrap();
        contracts.check(&format!("least squares {instance}"), &base, &wide);
    }
}

fn sweep_check() -> Outcome {
    let cfg = SweepConfig {
        d1: 100,
        d2: 100,
        rank: 3,
        k: 5,
        alpha: 5.0,
        m_grid: vec![2000.0, 4000.0, 8000.0, 10000.0],
        replicates: 5,
        seed: 0,
        solver: SolverConfig::default(),
        constants: BoundConstants::default(),
        grid_size: 2001,
    };
    let family = MultinomialLogitFamily::evenly_spaced(5).unwrap();
    let result = run_sweep(&family, &cfg).unwrap();
    let slope = result.summary.slope;
    let medians: Vec<String> = result
        .summary
        .medians
        .iter()
        .map(|(m, v)| format!("{m}:{v:.3}"))
        .collect();
    let stalled = result.rows.iter().filter(|r| !r.converged).count();
    outcome(
        (-0.7..=-0.3).contains(&slope),
        format!(
            "slope {slope:.3}; median MSE {}; {stalled}/{} solves unconverged",
            medians.join(" "),
            result.rows.len()
        ),
    )
}

fn one_bit_check(contracts: &mut Contracts) -> Outcome {
    let cfg = SolverConfig {
        grad_tol: 1e-8,
        max_iters: 5000,
        ..Default::default()
    };
    let mut worst: f64 = 0.0;
    for seed in 0..5u64 {
        let mut rng = rng(700 + seed);
        let a = rng.random_range(-0.5..0.5);
        let b = rng.random_range(0.5..2.0);
        let link = LinkFamily::from(MultinomialLogitFamily::new(vec![a, 0.0], vec![b, 0.0]).unwrap());
        let truth = synth_low_rank(12, 10, 2, 1.0, derive_seed(seed, 0)).unwrap();
        let mask = sample_mask(12, 10, 70.0, derive_seed(seed, 1)).unwrap();
        let obs = sample_observations(&link, &truth, &mask, &default_labels(2), derive_seed(seed, 2)).unwrap();
        let cat = solve(&link, &obs, &truth.spec, &cfg).unwrap();
        let bin = maximize(&OneBit { a, b, obs: &obs }, &truth.spec, &cfg).unwrap();
        contracts.check(&format!("one-bit categorical {seed}"), &cat, &truth.spec);
        contracts.check(&format!("one-bit binary {seed}"), &bin, &truth.spec);
        worst = worst.max(frobenius_norm(&(&cat.x - &bin.x)));
    }
    outcome(worst <= 1e-4, format!("largest Frobenius difference {worst:.2e} over 5 instances"))
}

fn movielens_check() -> Option<Outcome> {
    let path = std::env::var_os("MOVIELENS_UDATA")?;
    let file = std::fs::File::open(&path).expect("cannot open MOVIELENS_UDATA");
    let ratings = read_udata(std::io::BufReader::new(file)).expect("cannot parse MOVIELENS_UDATA");
    let mut wins = 0;
    let mut details = Vec::new();
    for seed in 0..5 {
        let cfg = MovieLensConfig {
            seed,
            ..MovieLensConfig::default()
        };
        let out = run_movielens(&ratings, &cfg).unwrap();
        let overall = out.categorical.overall;
        let beats = |k: usize| match (out.categorical.per_category[k], out.baseline.per_category[k]) {
            (Some(c), Some(b)) => c < b,
            _ => false,
        };
        let ok = (0.55..=0.90).contains(&overall) && beats(3) && beats(4);
        wins += usize::from(ok);
        details.push(format!("split {seed}: {overall:.3} vs {:.3}", out.baseline.overall));
    }
    Some(outcome(wins >= 3, format!("{wins}/5 splits pass; {}", details.join(", "))))
}

fn link_fit_check() -> Outcome {
    let truth = MultinomialLogitFamily::new(vec![0.5, -0.5, 0.0], vec![1.0, -1.0, 0.0]).unwrap();
    let mut rng = rng(9);
    let pairs = (0..100_000)
        .map(|_| {
            let x = rng.random_range(-2.0..=2.0);
            (x, draw_category(&truth.probs(x), rng.random()))
        })
        .collect();
    let fit = fit_logit(&TrainingPairs::new(3, pairs).unwrap(), 1e-6, &FitConfig::default()).unwrap();
    let worst = (0..3)
        .map(|k| {
            (fit.family.alphas()[k] - truth.alphas()[k])
                .abs()
                .max((fit.family.betas()[k] - truth.betas()[k]).abs())
        })
        .fold(0.0, f64::max);
    outcome(worst <= 0.05, format!("largest parameter error {worst:.4}"))
}

fn timed(f: impl FnOnce() -> Outcome) -> (Outcome, Duration) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed())
}

/// Criteria whose failure is analysed in the project notes rather than fixed.
const KNOWN_FAILURES: &[usize] = &[];

#[test]
fn acceptance_report() {
    let mut contracts = Contracts::default();
    let mut results: Vec<(usize, &str, Option<(Outcome, Duration)>, Duration)> = Vec::new();

    results.push((1, "gradient matches finite differences", Some(timed(gradient_check)), Duration::from_secs(10)));
    results.push((2, "projection matches oracle", Some(timed(projection_check)), Duration::from_secs(30)));
    results.push((3, "Hellinger lower bound", Some(timed(hellinger_check)), Duration::from_secs(10)));
    results.push((4, "KL upper bound", Some(timed(kl_bound_check)), Duration::from_secs(5)));
    let seven = timed(|| one_bit_check(&mut contracts));
    contract_battery(&mut contracts);
    let five = outcome(
        contracts.violations.is_empty(),
        format!(
            "{} solver runs checked; {}",
            contracts.checked,
            if contracts.violations.is_empty() {
                "no violations".to_string()
            } else {
                contracts.violations.join("; ")
            }
        ),
    );
    results.push((5, "ascent and feasibility", Some((five, Duration::ZERO)), Duration::MAX));
    results.push((6, "error decay slope", Some(timed(sweep_check)), Duration::from_secs(15 * 60)));
    results.push((7, "one-bit reduction", Some(seven), Duration::from_secs(120)));
    let start = Instant::now();
    let eight = movielens_check().map(|o| (o, start.elapsed()));
    results.push((8, "MovieLens protocol", eight, Duration::from_secs(30 * 60)));
    results.push((9, "link fit recovery", Some(timed(link_fit_check)), Duration::from_secs(60)));

    let mut unexpected = Vec::new();
    println!();
    for (id, name, result, budget) in &results {
        match result {
            Some((o, elapsed)) => {
                let in_time = elapsed <= budget;
                let pass = o.pass && in_time;
                let time = if *budget == Duration::MAX {
                    String::new()
                } else {
                    format!(" [{:.1}s, budget {}s]", elapsed.as_secs_f64(), budget.as_secs())
                };
                println!(
                    "criterion {id} {}: {name}: {}{time}",
                    if pass { "PASS" } else { "FAIL" },
                    o.detail
                );
                if !pass && !KNOWN_FAILURES.contains(id) {
                    unexpected.push(*id);
                }
            }
            None => println!("criterion {id} NOT RUN: {name}: set MOVIELENS_UDATA to a u.data file"),
        }
    }
    assert!(unexpected.is_empty(), "criteria failed: {unexpected:?}");
}
