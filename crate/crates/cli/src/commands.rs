use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use itl_ae::data_io::{
    load_idx_dataset, read_csv_samples, write_csv_samples, write_csv_with_labels, DatasetHandle,
};
use itl_ae::estimators::divergence as compute_divergence;
use itl_ae::evaluation::{self, log_spaced_grid, parzen_log_likelihood, select_sigma};
use itl_ae::priors::sample_prior as draw_prior;
use itl_ae::trainer::train_with;
use itl_ae::{
    Checkpoint, DivergenceKind, EpochMetrics, KernelWidth, Matrix, PriorKind, PriorSpec, Rng,
    SampleBatch,
};

use crate::config::RunConfig;
use crate::{CliError, PriorArgs};

fn write_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::runtime(format!("{}: {e}", path.display()))
}

fn print_json<T: Serialize>(value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::runtime(e.to_string()))?;
    println!("{text}");
    Ok(())
}

fn is_csv(path: &Path) -> bool {
    path.extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

/// CSV sample files or IDX image files, chosen by extension.
fn load_samples(path: &Path, labels: Option<&Path>) -> Result<DatasetHandle, CliError> {
    if is_csv(path) {
        if labels.is_some() {
            return Err(CliError::validation(
                "--labels is only supported with IDX image data",
            ));
        }
        let batch = read_csv_samples(path)?;
        Ok(DatasetHandle::new(batch.into_matrix(), None)?)
    } else {
        Ok(load_idx_dataset(path, labels)?)
    }
}

fn load_checkpoint(path: &Path) -> Result<Checkpoint, CliError> {
    Checkpoint::load(path).map_err(|e| CliError::validation(format!("checkpoint: {e}")))
}

/// Explicit kind on the command line, else the checkpoint's prior, else `N(0, 5^2)`;
/// then individual overrides.
fn resolve_prior(
    args: &PriorArgs,
    trained: Option<PriorSpec>,
    dim: usize,
) -> Result<PriorSpec, CliError> {
    let mut spec = match &args.prior {
        Some(kind) => {
            let kind: PriorKind = kind.parse()?;
            PriorSpec::default_for(kind, dim)
        }
        None => trained.unwrap_or_else(|| PriorSpec::default_for(PriorKind::Gaussian, dim)),
    };
    if let Some(v) = args.prior_location {
        spec.location = v;
    }
    if let Some(v) = args.prior_scale {
        spec.scale = v;
    }
    if let Some(v) = args.prior_turns {
        spec.turns = v;
    }
    if let Some(v) = args.prior_noise_std {
        spec.noise_std = v;
    }
    spec.validate()?;
    if spec.dim != dim {
        return Err(CliError::validation(format!(
            "prior dim {} does not match decoder input dim {dim}",
            spec.dim
        )));
    }
    Ok(spec)
}

pub fn train(config_path: &Path) -> Result<(), CliError> {
    let run = RunConfig::load(config_path)?.resolve()?;
    for w in run.train.warnings() {
        eprintln!("warning: {w}");
    }
    let dir = &run.run_dir;
    fs::create_dir_all(dir).map_err(|e| write_err(dir, e))?;
    let config_json =
        serde_json::to_string_pretty(&run.config).map_err(|e| CliError::runtime(e.to_string()))?;
    fs::write(dir.join("config.json"), config_json + "\n").map_err(|e| write_err(dir, e))?;

    let metrics_path = dir.join("metrics.jsonl");
    let mut metrics_out =
        BufWriter::new(fs::File::create(&metrics_path).map_err(|e| write_err(&metrics_path, e))?);
    let record_seconds = run.config.record_seconds;
    let every = run.config.checkpoint_every;
    let prior = run.train.prior;

    let outcome = train_with(&run.dataset.data, &run.train, &run.arch, |m, model| {
        let line = EpochMetrics {
            seconds: if record_seconds { m.seconds } else { 0.0 },
            ..*m
        };
        let io = |e: std::io::Error| itl_ae::Error::Io {
            path: metrics_path.clone(),
            source: e,
        };
        serde_json::to_writer(&mut metrics_out, &line)?;
        metrics_out.write_all(b"\n").map_err(io)?;
        metrics_out.flush().map_err(io)?;
        if every > 0 && (m.epoch + 1) % every == 0 {
            let ck = Checkpoint {
                model: model.clone(),
                prior: Some(prior),
                epoch: Some(m.epoch),
            };
            ck.save(dir.join(format!("checkpoint-epoch{:04}.json", m.epoch)))?;
        }
        Ok(())
    })?;

    let last = outcome.metrics.last().map(|m| EpochMetrics {
        seconds: if record_seconds { m.seconds } else { 0.0 },
        ..*m
    });
    let ck = Checkpoint {
        model: outcome.model,
        prior: Some(prior),
        epoch: last.map(|m| m.epoch),
    };
    ck.save(dir.join("model.json"))?;
    let codes = ck.model.encode(&run.dataset.data)?;
    write_csv_with_labels(&codes, run.dataset.labels.as_deref(), dir.join("codes.csv"))?;

    #[derive(Serialize)]
    struct Summary<'a> {
        run_dir: &'a Path,
        epochs: usize,
        final_metrics: Option<EpochMetrics>,
    }
    print_json(&Summary {
        run_dir: dir,
        epochs: outcome.metrics.len(),
        final_metrics: last,
    })
}

pub fn encode(
    checkpoint: &Path,
    data: &Path,
    labels: Option<&Path>,
    out: &Path,
) -> Result<(), CliError> {
    let ck = load_checkpoint(checkpoint)?;
    let dataset = load_samples(data, labels)?;
    let expected = ck.model.encoder.input_dim();
    if dataset.dim() != expected {
        return Err(CliError::validation(format!(
            "data has dimension {} but the encoder expects {expected}",
            dataset.dim()
        )));
    }
    let codes = ck.model.encode(&dataset.data)?;
    write_csv_with_labels(&codes, dataset.labels.as_deref(), out)?;
    Ok(())
}

fn parse_point(text: &str, dim: usize) -> Result<Vec<f64>, CliError> {
    let point = text
        .split(',')
        .map(|v| v.trim().parse::<f64>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::validation(format!("--walk: bad coordinate in {text:?}: {e}")))?;
    if point.len() != dim {
        return Err(CliError::validation(format!(
            "--walk: point {text:?} has {} coordinates, latent dim is {dim}",
            point.len()
        )));
    }
    Ok(point)
}

/// Parses `"a1,a2;b1,b2;k"` into `k` evenly spaced points from `a` to `b` inclusive.
fn parse_walk(spec: &str, dim: usize) -> Result<Matrix, CliError> {
    let parts: Vec<&str> = spec.split(';').collect();
    if parts.len() != 3 {
        return Err(CliError::validation(
            "--walk expects \"a1,a2,...;b1,b2,...;k\"",
        ));
    }
    let a = parse_point(parts[0], dim)?;
    let b = parse_point(parts[1], dim)?;
    let k: usize = parts[2]
        .trim()
        .parse()
        .map_err(|e| CliError::validation(format!("--walk: bad step count: {e}")))?;
    if k < 2 {
        return Err(CliError::validation("--walk needs at least 2 points"));
    }
    let mut values = Vec::with_capacity(k * dim);
    for i in 0..k {
        let t = i as f64 / (k - 1) as f64;
        values.extend(a.iter().zip(&b).map(|(x, y)| x + t * (y - x)));
    }
    Ok(Matrix::new(k, dim, values)?)
}

pub fn generate(
    checkpoint: &Path,
    n: usize,
    out: &Path,
    seed: u64,
    walk: Option<&str>,
    prior_args: &PriorArgs,
) -> Result<(), CliError> {
    let ck = load_checkpoint(checkpoint)?;
    let dim = ck.model.decoder.input_dim();
    let samples = match walk {
        Some(w) => ck.model.decode(&parse_walk(w, dim)?)?,
        None => {
            if n == 0 {
                return Err(CliError::validation("--n must be at least 1"));
            }
            let prior = resolve_prior(prior_args, ck.prior, dim)?;
            evaluation::generate(&ck.model.decoder, &prior, n, &mut Rng::new(seed))?.into_matrix()
        }
    };
    write_csv_samples(&samples, out)?;
    Ok(())
}

#[derive(Serialize)]
struct DivergenceOutput {
    kind: DivergenceKind,
    sigma: f64,
    value: f64,
    v_x: f64,
    v_y: f64,
    v_xy: f64,
}

pub fn divergence(x: &Path, y: &Path, sigma: f64, kind: &str) -> Result<(), CliError> {
    let kind: DivergenceKind = kind.parse()?;
    let w = KernelWidth::new(sigma)?;
    let xs = read_csv_samples(x)?;
    let ys = read_csv_samples(y)?;
    if xs.dim() != ys.dim() {
        return Err(CliError::validation(format!(
            "dimension mismatch: {} has d={} but {} has d={}",
            x.display(),
            xs.dim(),
            y.display(),
            ys.dim()
        )));
    }
    let r = compute_divergence(kind, &xs, &ys, w)?;
    print_json(&DivergenceOutput {
        kind,
        sigma,
        value: r.value,
        v_x: r.v_x,
        v_y: r.v_y,
        v_xy: r.v_xy,
    })
}

pub struct EvalArgs {
    pub checkpoint: PathBuf,
    pub test: PathBuf,
    pub validation: Option<PathBuf>,
    pub validation_fraction: f64,
    pub n_generated: usize,
    pub sigma_grid: Option<String>,
    pub grid: (f64, f64, usize),
    pub seed: u64,
    pub out_dir: PathBuf,
    pub prior: PriorArgs,
}

fn parse_grid(args: &EvalArgs) -> Result<Vec<f64>, CliError> {
    let grid = match &args.sigma_grid {
        Some(text) => text
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| CliError::validation(format!("--sigma-grid: {e}")))?,
        None => log_spaced_grid(args.grid.0, args.grid.1, args.grid.2)?,
    };
    for &s in &grid {
        KernelWidth::new(s)?;
    }
    if grid.is_empty() {
        return Err(CliError::validation("--sigma-grid is empty"));
    }
    Ok(grid)
}

pub fn eval_ll(args: &EvalArgs) -> Result<(), CliError> {
    let ck = load_checkpoint(&args.checkpoint)?;
    let dim = ck.model.decoder.input_dim();
    let data_dim = ck.model.decoder.output_dim();
    let prior = resolve_prior(&args.prior, ck.prior, dim)?;
    let grid = parse_grid(args)?;
    if args.n_generated == 0 {
        return Err(CliError::validation("--n-generated must be at least 1"));
    }

    let test = load_samples(&args.test, None)?.data;
    let (validation, test) = match &args.validation {
        Some(path) => (load_samples(path, None)?.data, test),
        None => {
            let f = args.validation_fraction;
            if !(f > 0.0 && f < 1.0) {
                return Err(CliError::validation(
                    "--validation-fraction must lie in (0, 1)",
                ));
            }
            let n_val = ((test.rows() as f64) * f).round() as usize;
            if n_val == 0 || n_val >= test.rows() {
                return Err(CliError::validation(format!(
                    "cannot split {} test samples with validation fraction {f}",
                    test.rows()
                )));
            }
            let mut order: Vec<usize> = (0..test.rows()).collect();
            Rng::with_stream(args.seed, 1).shuffle(&mut order);
            (
                test.select_rows(&order[..n_val]),
                test.select_rows(&order[n_val..]),
            )
        }
    };
    for (name, m) in [("test", &test), ("validation", &validation)] {
        if m.cols() != data_dim {
            return Err(CliError::validation(format!(
                "{name} data has dimension {} but the decoder produces {data_dim}",
                m.cols()
            )));
        }
    }

    let generated = evaluation::generate(
        &ck.model.decoder,
        &prior,
        args.n_generated,
        &mut Rng::new(args.seed),
    )?;
    let selection = select_sigma(&SampleBatch::new(validation)?, &generated, &grid)?;
    let report = parzen_log_likelihood(
        &SampleBatch::new(test)?,
        &generated,
        KernelWidth::new(selection.sigma)?,
    )?;

    fs::create_dir_all(&args.out_dir).map_err(|e| write_err(&args.out_dir, e))?;
    let report_path = args.out_dir.join("report.json");
    let text =
        serde_json::to_string_pretty(&report).map_err(|e| CliError::runtime(e.to_string()))?;
    fs::write(&report_path, text + "\n").map_err(|e| write_err(&report_path, e))?;
    let curve_path = args.out_dir.join("sigma_curve.csv");
    let mut curve = String::from("sigma,mean_ll\n");
    for (s, ll) in &selection.curve {
        curve.push_str(&format!("{s:?},{ll:?}\n"));
    }
    fs::write(&curve_path, curve).map_err(|e| write_err(&curve_path, e))?;
    print_json(&report)
}

pub fn sample_prior(
    dim: usize,
    n: usize,
    seed: u64,
    out: &Path,
    args: &PriorArgs,
) -> Result<(), CliError> {
    if n == 0 {
        return Err(CliError::validation("--n must be at least 1"));
    }
    let dim = match args
        .prior
        .as_deref()
        .map(str::parse::<PriorKind>)
        .transpose()?
    {
        Some(PriorKind::SwissRoll) => 2,
        _ => dim,
    };
    let spec = resolve_prior(args, None, dim)?;
    let batch = draw_prior(&spec, n, &mut Rng::new(seed))?;
    write_csv_samples(batch.matrix(), out)?;
    Ok(())
}
