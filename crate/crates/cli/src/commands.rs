use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use bar_core::cache::Prepared;
use bar_core::dataset::{load_csv, load_netflix, Partition, RatingsDataset};
use bar_core::fit::{BarModel, Provenance};
use bar_core::interpret::{attribute_reports, write_histograms, write_prevalence, write_ranking};
use bar_core::model_io::{export_bits, export_weights, read_model, read_solve, sniff, write_model, write_solve, FileKind};
use bar_core::rng::{child_seed, Stream};
use bar_core::{assemble, evaluate, fit_weights, select_subset, solve, EvalReport, SolveResult, SolverConfig, SyntheticSpec};
use log::info;

use crate::{Cli, Command, EvalArgs, ExtendArgs, InspectArgs, PrepArgs, SolverArgs, SweepArgs, SynthArgs, TrainArgs};

const SCHEMA: &str = "#schema=1";
const SWEEP_HEADER: &str = "fraction,d,trial,subset_rmse,entire_rmse,probe_rmse";

pub fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            bail!("--threads must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    let seed = cli.seed;
    match cli.command {
        Command::Prep(a) => prep(&a),
        Command::Synth(a) => synth(&a, seed),
        Command::Train(a) => train(&a, seed),
        Command::Extend(a) => extend(&a),
        Command::Eval(a) => eval(&a),
        Command::Sweep(a) => sweep(&a, seed),
        Command::Inspect(a) => inspect(&a),
    }
}

fn load_cache(path: &Path) -> Result<Prepared> {
    Prepared::read(path).with_context(|| format!("loading cache {}", path.display()))
}

fn solver_config(args: &SolverArgs, d: usize, seed: u64) -> SolverConfig {
    SolverConfig {
        d,
        beta: args.beta,
        max_iterations: args.max_iterations,
        restart_rmse_threshold: args.restart_threshold,
        seed,
        mode: args.mode,
        gamma: args.gamma,
        root_find_tolerance: args.tolerance,
    }
}

fn prep(a: &PrepArgs) -> Result<()> {
    let dataset = if a.source.is_dir() {
        load_netflix(&a.source)?
    } else {
        load_csv(&a.source)?
    };
    let prepared = Prepared::new(dataset)?;
    prepared.write(&a.cache)?;
    let ds = &prepared.dataset;
    info!(
        "{} viewers, {} movies, {} train and {} probe ratings",
        ds.num_viewers(),
        ds.num_movies(),
        ds.count(Partition::Train),
        ds.count(Partition::Probe)
    );
    Ok(())
}

fn synth(a: &SynthArgs, seed: u64) -> Result<()> {
    let spec = SyntheticSpec {
        viewers: a.viewers,
        movies: a.movies,
        d: a.d,
        density: a.density,
        bit_probability: a.bit_probability,
        weight_scale: a.weight_scale,
        noise_sigma: a.noise_sigma,
        quantize: a.quantize,
        probe_fraction: a.probe_fraction,
        seed,
    };
    let (dataset, planted) = bar_core::synthesize(&spec)?;
    dataset.write_csv(&a.out_csv)?;
    write_model(&planted, &a.out_model)?;
    if let Some(cache) = &a.cache {
        Prepared::new(dataset)?.write(cache)?;
    }
    Ok(())
}

/// Selects the subset and runs the solver.
fn train_on(prep: &Prepared, fraction: f64, config: &SolverConfig) -> Result<SolveResult> {
    let subset = select_subset(&prep.ranking, fraction)?;
    if subset.is_empty() {
        bail!("no movie has nonzero baseline error; nothing to train on");
    }
    let view = prep.centered.restrict(&subset)?;
    info!("training d={} on {} movies, {} ratings", config.d, view.num_movies(), view.len());
    let result = solve(config, &view)?;
    if result.all_restarted {
        log::warn!("every iteration restarted; the result is the best snapshot seen");
    }
    Ok(result)
}

/// Refits weights for every movie with the trained bits.
fn extend_to_model(prep: &Prepared, result: &SolveResult) -> Result<BarModel> {
    let centered = &prep.centered;
    if result.num_viewers != centered.num_viewers() {
        bail!(
            "solve file has {} viewers, cache has {}",
            result.num_viewers,
            centered.num_viewers()
        );
    }
    if let Some(&m) = result.movies.iter().find(|&&m| m as usize >= centered.num_movies()) {
        bail!("solve file names movie index {m}, cache has {} movies", centered.num_movies());
    }
    let d = result.d();
    let weights = fit_weights(&result.bits, d, centered)?;
    let provenance = Provenance {
        training_subset: result.movies.clone(),
        config_hash: result.config.fingerprint(),
    };
    Ok(assemble(result.bits.clone(), d, weights, &prep.dataset, centered, provenance)?)
}

/// A model over only the solve file's training movies, with their
/// concurred weights, and the dataset restricted to those movies.
fn subset_model(prep: &Prepared, result: &SolveResult) -> Result<(BarModel, RatingsDataset)> {
    let ds = &prep.dataset;
    let c = &prep.centered;
    let d = result.d();
    if result.num_viewers != ds.num_viewers() {
        bail!("solve file has {} viewers, cache has {}", result.num_viewers, ds.num_viewers());
    }
    let mut local = vec![None; ds.num_movies()];
    for (i, &m) in result.movies.iter().enumerate() {
        let m = m as usize;
        if m >= ds.num_movies() {
            bail!("solve file names movie index {m}, cache has {} movies", ds.num_movies());
        }
        local[m] = Some(i as u32);
    }
    let movies = &result.movies;
    let model = BarModel {
        d,
        viewer_ids: ds.viewers().to_vec(),
        movie_ids: movies.iter().map(|&m| ds.movies()[m as usize].clone()).collect(),
        titles: movies.iter().map(|&m| ds.titles()[m as usize].clone()).collect(),
        bits: result.bits.clone(),
        weights: result.weights.clone(),
        movie_means: movies.iter().map(|&m| c.movie_means[m as usize]).collect(),
        viewer_means: c.viewer_means.clone(),
        global_mean: c.global_mean,
        provenance: Provenance {
            training_subset: movies.clone(),
            config_hash: result.config.fingerprint(),
        },
    };
    let entries = ds
        .entries()
        .iter()
        .filter_map(|e| {
            local[e.movie as usize].map(|lm| bar_core::Rating { movie: lm, ..*e })
        })
        .collect();
    let restricted = RatingsDataset::from_parts(
        ds.viewers().to_vec(),
        model.movie_ids.clone(),
        model.titles.clone(),
        entries,
    )?;
    Ok((model, restricted))
}

fn train(a: &TrainArgs, seed: u64) -> Result<()> {
    let prep = load_cache(&a.cache)?;
    let config = solver_config(&a.solver, a.solver.d, seed);
    let result = train_on(&prep, a.fraction, &config)?;
    write_solve(&result, &a.out)?;
    if let Some(stats) = &a.stats {
        result.write_stats_csv(stats)?;
    }
    info!(
        "best training RMSE {:.6} at iteration {} ({} restarts)",
        result.best_rmse, result.best_iteration, result.restarts
    );
    Ok(())
}

fn extend(a: &ExtendArgs) -> Result<()> {
    let prep = load_cache(&a.cache)?;
    let result = read_solve(&a.model).with_context(|| format!("loading solve file {}", a.model.display()))?;
    let model = extend_to_model(&prep, &result)?;
    write_model(&model, &a.out)?;
    if let Some(p) = &a.export_weights {
        export_weights(&model, p)?;
    }
    if let Some(p) = &a.export_bits {
        export_bits(&model, p)?;
    }
    Ok(())
}

fn eval(a: &EvalArgs) -> Result<()> {
    let prep = load_cache(&a.cache)?;
    let report = match sniff(&a.model)? {
        FileKind::Model => {
            let model = read_model(&a.model)?;
            evaluate_clamped(&model, &prep.dataset, a.partition, a.clamp)?
        }
        FileKind::Solve => {
            let result = read_solve(&a.model)?;
            let (model, restricted) = subset_model(&prep, &result)?;
            evaluate_clamped(&model, &restricted, a.partition, a.clamp)?
        }
    };
    let text = format!("{SCHEMA}\n{}\n{}\n", EvalReport::CSV_HEADER, report.to_csv_record());
    match &a.out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{text}"),
    }
    Ok(())
}

fn evaluate_clamped(model: &BarModel, ds: &RatingsDataset, partition: Partition, clamp: bool) -> Result<EvalReport> {
    if !clamp {
        return Ok(evaluate(model, ds, partition)?);
    }
    // evaluate() matches by id; with identical id tables the indices agree
    if model.viewer_ids != ds.viewers() || model.movie_ids != ds.movies() {
        bail!("--clamp needs the model and cache to share their id tables");
    }
    let mut sum = 0.0;
    let mut n = 0usize;
    for e in ds.entries().iter().filter(|e| e.partition == partition) {
        let p = model.predict(Some(e.viewer as usize), Some(e.movie as usize), true);
        sum += (e.stars - p) * (e.stars - p);
        n += 1;
    }
    if n == 0 {
        bail!("the {partition} partition is empty");
    }
    Ok(EvalReport {
        partition,
        edges: n,
        rmse: (sum / n as f64).sqrt(),
    })
}

fn sweep(a: &SweepArgs, seed: u64) -> Result<()> {
    if a.fractions.is_empty() || a.d_values.is_empty() {
        bail!("--fractions and --d-values must be nonempty");
    }
    if a.trials == 0 {
        bail!("--trials must be at least 1");
    }
    let prep = load_cache(&a.cache)?;
    let has_probe = prep.dataset.count(Partition::Probe) > 0;
    let file = File::create(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let mut out = BufWriter::new(file);
    writeln!(out, "{SCHEMA}")?;
    writeln!(out, "{SWEEP_HEADER}")?;
    for &fraction in &a.fractions {
        for &d in &a.d_values {
            for trial in 0..a.trials {
                let trial_seed = child_seed(seed, Stream::Trial, trial as u64);
                let config = solver_config(&a.solver, d, trial_seed);
                let result = train_on(&prep, fraction, &config)?;
                let model = extend_to_model(&prep, &result)?;
                let entire = evaluate(&model, &prep.dataset, Partition::Train)?.rmse;
                let probe = if has_probe {
                    evaluate(&model, &prep.dataset, Partition::Probe)?.rmse.to_string()
                } else {
                    String::new()
                };
                writeln!(out, "{fraction},{d},{trial},{},{entire},{probe}", result.best_rmse)?;
                out.flush()?;
                info!("fraction {fraction} d {d} trial {trial}: subset {:.4} entire {entire:.4}", result.best_rmse);
            }
        }
    }
    Ok(())
}

fn inspect(a: &InspectArgs) -> Result<()> {
    let model = read_model(&a.model).with_context(|| format!("loading model {}", a.model.display()))?;
    let reports = attribute_reports(&model, a.k, a.bins)?;
    std::fs::create_dir_all(&a.out_dir).with_context(|| format!("creating {}", a.out_dir.display()))?;
    write_histograms(&reports, &a.out_dir.join("histograms.csv"))?;
    for r in &reports {
        write_ranking(r, &a.out_dir.join(format!("ranking_attr{}.csv", r.attribute)))?;
    }
    write_prevalence(&reports, &a.out_dir.join("prevalence.csv"))?;
    Ok(())
}
