use std::io::Write;
use std::path::Path;

use ndarray::Array2;
use serde::Serialize;

use catmc::constraint::ConstraintSpec;
use catmc::evaluation::{
    baseline_real_completion, bound_report, predict_categories, rating_report, rating_table, round_to_labels,
    BoundConstants,
};
use catmc::experiment::{run_movielens, run_sweep, write_sweep_csv, MovieLensConfig, SweepConfig};
use catmc::fitting::{fit_logit, FitConfig};
use catmc::io;
use catmc::links::smoothness_constants;
use catmc::sampling::{derive_seed, sample_mask, sample_observations, synth_low_rank};
use catmc::solver::{solve as solve_categorical, Estimate, SolverConfig};
use catmc::{Error, Result};

use crate::manifest::Recorder;
use crate::output::{create, ensure_dir, load_family, load_labels, open, parse_list, read_to_string, write_json, write_text};
use crate::{BoundsArgs, EvalArgs, FitArgs, GenerateArgs, Method, MovieLensArgs, SolveArgs, SweepArgs};

fn solver_config(path: Option<&Path>) -> Result<SolverConfig> {
    match path {
        Some(p) => SolverConfig::from_json_str(&read_to_string(p)?),
        None => Ok(SolverConfig::default()),
    }
}

fn write_matrix_file(path: &Path, m: &Array2<f64>) -> Result<()> {
    let mut w = create(path)?;
    io::write_matrix(&mut w, m)?;
    w.flush()?;
    Ok(())
}

fn estimate_warnings(rec: &mut Recorder, label: &str, est: &Estimate) {
    if !est.converged {
        rec.warn(format!("{label}: solver stopped with {:?} after {} iterations", est.stop_reason, est.iters));
    }
    if est.projection_warnings > 0 {
        rec.warn(format!(
            "{label}: {} projections hit the Dykstra sweep limit",
            est.projection_warnings
        ));
    }
}

pub fn generate(args: &GenerateArgs) -> Result<()> {
    let mut rec = Recorder::start("generate", Some(args.seed), args);
    let family = load_family(&args.family, args.k)?;
    if family.k() != args.k {
        return Err(Error::InvalidInput(format!(
            "family has K = {} but --K is {}",
            family.k(),
            args.k
        )));
    }
    let labels = load_labels(args.labels.as_deref(), family.k())?;
    let truth = synth_low_rank(args.d1, args.d2, args.rank, args.alpha, derive_seed(args.seed, 0))?;
    let mask = sample_mask(args.d1, args.d2, args.m, derive_seed(args.seed, 1))?;
    let obs = sample_observations(&family, &truth, &mask, &labels, derive_seed(args.seed, 2))?;
    if obs.is_empty() {
        rec.warn("the mask is empty; no observations were written");
    }
    rec.config(&truth.spec);

    ensure_dir(&args.out)?;
    let truth_path = args.out.join("truth.txt");
    write_matrix_file(&truth_path, &truth.m)?;
    rec.output(&truth_path);

    let obs_path = args.out.join("obs.tsv");
    let mut w = create(&obs_path)?;
    io::write_observations_tsv(&mut w, &obs)?;
    w.flush()?;
    rec.output(&obs_path);

    let family_path = args.out.join("family.json");
    write_text(&family_path, &family.to_json_string())?;
    rec.output(&family_path);

    rec.finish(&args.out)
}

pub fn fit(args: &FitArgs) -> Result<()> {
    let mut rec = Recorder::start("fit", None, args);
    let cfg = match &args.config {
        Some(p) => serde_json::from_str::<FitConfig>(&read_to_string(p)?)?,
        None => FitConfig::default(),
    };
    rec.config(&cfg);
    let data = io::read_training_pairs(open(&args.pairs)?, args.k)?;
    let fit = fit_logit(&data, args.reg, &cfg)?;
    if let Some(w) = &fit.warning {
        rec.warn(w.clone());
    }
    if !fit.converged {
        rec.warn(format!("link fit stopped after {} iterations without converging", fit.iterations));
    }

    ensure_dir(&args.out)?;
    let family_path = args.out.join("family.json");
    write_text(&family_path, &catmc::LinkFamily::from(fit.family.clone()).to_json_string())?;
    rec.output(&family_path);
    let fit_path = args.out.join("fit.json");
    write_json(&fit_path, &fit)?;
    rec.output(&fit_path);
    rec.finish(&args.out)
}

#[derive(Serialize)]
struct SolveConfigRecord<'a> {
    spec: ConstraintSpec,
    solver: &'a SolverConfig,
    method: Method,
    labels: &'a [f64],
}

pub fn solve(args: &SolveArgs) -> Result<()> {
    let mut rec = Recorder::start("solve", None, args);
    let cfg = solver_config(args.config.as_deref())?;
    let family = match args.method {
        Method::Categorical => Some(load_family(&args.family, args.k)?),
        Method::Real => None,
    };
    let k = family.as_ref().map_or(args.k, |f| f.k());
    let labels = load_labels(args.labels.as_deref(), k)?;
    let dims = match (args.d1, args.d2) {
        (Some(d1), Some(d2)) => Some((d1, d2)),
        (None, None) => None,
        _ => return Err(Error::InvalidInput("give both --d1 and --d2 or neither".into())),
    };
    let obs = io::read_observations_tsv(open(&args.obs)?, &labels, dims)?;
    let spec = ConstraintSpec::new(args.alpha, args.rank, obs.d1(), obs.d2())?;
    rec.config(&SolveConfigRecord {
        spec,
        solver: &cfg,
        method: args.method,
        labels: &labels,
    });

    let est = match &family {
        Some(f) => solve_categorical(f, &obs, &spec, &cfg)?,
        None => baseline_real_completion(&obs, &spec, &cfg)?,
    };
    estimate_warnings(&mut rec, "solve", &est);

    ensure_dir(&args.out)?;
    let est_path = args.out.join("estimate.txt");
    write_matrix_file(&est_path, &est.x)?;
    rec.output(&est_path);

    let diag_path = args.out.join("diagnostics.json");
    write_json(&diag_path, &est)?;
    rec.output(&diag_path);

    let trace_path = args.out.join("trace.csv");
    let mut w = create(&trace_path)?;
    writeln!(w, "iteration,objective")?;
    for (i, v) in est.trace.iter().enumerate() {
        writeln!(w, "{i},{v}")?;
    }
    w.flush()?;
    rec.output(&trace_path);
    rec.finish(&args.out)
}

pub fn eval(args: &EvalArgs) -> Result<()> {
    let mut rec = Recorder::start("eval", None, args);
    let (predicted, k) = match (&args.predictions, &args.estimate) {
        (Some(p), _) => {
            let m = io::read_matrix(open(p)?)?;
            (m, args.k)
        }
        (None, Some(e)) => {
            let x = io::read_matrix(open(e)?)?;
            match args.method {
                Method::Categorical => {
                    let family = load_family(&args.family, args.k)?;
                    let labels = load_labels(args.labels.as_deref(), family.k())?;
                    let pred = predict_categories(&family, &x, &labels, args.alpha)?;
                    if pred.ties > 0 {
                        rec.warn(format!("{} cells had tied most likely categories", pred.ties));
                    }
                    (pred.labels, family.k())
                }
                Method::Real => {
                    let labels = load_labels(args.labels.as_deref(), args.k)?;
                    (round_to_labels(&x, &labels)?, args.k)
                }
            }
        }
        (None, None) => return Err(Error::InvalidInput("give --predictions or --estimate".into())),
    };
    let labels = load_labels(args.labels.as_deref(), k)?;
    let test = io::read_observations_tsv(open(&args.test)?, &labels, Some(predicted.dim()))?;
    let report = rating_report(&test, &predicted)?;
    rec.config(&labels);

    ensure_dir(&args.out)?;
    let report_path = args.out.join("report.json");
    write_json(&report_path, &report)?;
    rec.output(&report_path);
    let table_path = args.out.join("table.txt");
    write_text(&table_path, &rating_table(&[("predicted", &report)]))?;
    rec.output(&table_path);
    rec.finish(&args.out)
}

pub fn bounds(args: &BoundsArgs) -> Result<()> {
    let mut rec = Recorder::start("bounds", None, args);
    let family = load_family(&args.family, args.k)?;
    let logit = family.require_logit()?;
    let spec = ConstraintSpec::new(args.alpha, args.rank, args.d1, args.d2)?;
    let constants = BoundConstants {
        c_prime: args.c_prime,
        c1: args.c1,
        c2: args.c2,
    };
    let smooth = smoothness_constants(logit, args.alpha, args.grid_size)?;
    let report = bound_report(&smooth, &spec, args.m, logit.k(), constants)?;
    if !report.simple_form_valid {
        rec.warn("m < (d1 + d2) log(d1 d2): the simple upper bound does not apply, use upper_full");
    }
    rec.config(&smooth);

    ensure_dir(&args.out)?;
    let path = args.out.join("bounds.json");
    write_json(&path, &report)?;
    rec.output(&path);
    rec.finish(&args.out)
}

pub fn sweep(args: &SweepArgs) -> Result<()> {
    let mut rec = Recorder::start("sweep", Some(args.seed), args);
    let family = load_family(&args.family, args.k)?;
    let logit = family.require_logit()?;
    let cfg = SweepConfig {
        d1: args.d1,
        d2: args.d2,
        rank: args.rank,
        k: logit.k(),
        alpha: args.alpha,
        m_grid: parse_list(&args.m_grid)?,
        replicates: args.replicates,
        seed: args.seed,
        solver: solver_config(args.config.as_deref())?,
        constants: BoundConstants {
            c_prime: args.c_prime,
            c1: args.c1,
            c2: args.c2,
        },
        grid_size: args.grid_size,
    };
    rec.config(&cfg);
    let result = run_sweep(logit, &cfg)?;
    let stalled = result.rows.iter().filter(|r| !r.converged).count();
    if stalled > 0 {
        rec.warn(format!("{stalled} of {} solves did not converge", result.rows.len()));
    }

    ensure_dir(&args.out)?;
    let csv_path = args.out.join("sweep.csv");
    let mut w = create(&csv_path)?;
    write_sweep_csv(&mut w, &result.rows)?;
    w.flush()?;
    rec.output(&csv_path);
    let summary_path = args.out.join("summary.json");
    write_json(&summary_path, &result.summary)?;
    rec.output(&summary_path);
    rec.finish(&args.out)
}

pub fn movielens(args: &MovieLensArgs) -> Result<()> {
    let mut rec = Recorder::start("movielens", Some(args.seed), args);
    let ratings = io::read_udata(open(&args.udata)?)?;
    let cfg = MovieLensConfig {
        n_fit: args.n_fit,
        n_test: args.n_test,
        n_solve: args.n_solve,
        alpha: args.alpha,
        rank: args.rank,
        reg: args.reg,
        seed: args.seed,
        solver: solver_config(args.config.as_deref())?,
        ..MovieLensConfig::default()
    };
    rec.config(&cfg);
    let outcome = run_movielens(&ratings, &cfg)?;
    if let Some(w) = &outcome.link_fit.warning {
        rec.warn(w.clone());
    }
    if !outcome.categorical_converged {
        rec.warn("categorical solve did not converge");
    }
    if !outcome.baseline_converged {
        rec.warn("least-squares solve did not converge");
    }

    ensure_dir(&args.out)?;
    let report_path = args.out.join("report.json");
    write_json(&report_path, &outcome)?;
    rec.output(&report_path);
    let table_path = args.out.join("table.txt");
    write_text(
        &table_path,
        &rating_table(&[("categorical", &outcome.categorical), ("real", &outcome.baseline)]),
    )?;
    rec.output(&table_path);
    rec.finish(&args.out)
}
