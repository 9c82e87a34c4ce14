//! Command-line front end for the object-categorization toolkit.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or format error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use kernelboost_core::descriptors::{dense_sift_lite, Channel, DescriptorSpec};
use kernelboost_core::harness::persist::{
    load_model, parse_codebook, render_codebook, render_descriptor_cache, save_model, ToolkitModel,
};
use kernelboost_core::harness::{
    build_feature_space, crossval, emit_report, evaluate_with_space, render_crossval,
    train_method, ExperimentConfig, Method,
};
use kernelboost_core::imagecore::{ingest_directory, load_pgm, resize_bilinear, Dataset};

#[derive(Parser)]
#[command(
    name = "kernelboost",
    about = "Object categorization with multi-descriptor kernels, SVMs, SVM-KNN and AdaBoost"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute descriptors for every sample and write a cache file.
    Extract {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Channel to extract: phog, siftbow or tinyimage.
        #[arg(long)]
        channel: String,
        #[arg(long)]
        out: PathBuf,
        /// Codebook file for the siftbow channel; built from the data when absent.
        #[arg(long)]
        codebook: Option<PathBuf>,
    },
    /// Build a bag-of-words codebook from the dataset's local descriptors.
    Codebook {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a classifier and persist the model.
    Train {
        #[arg(long)]
        method: String,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        model: PathBuf,
    },
    /// Classify a single PGM image with a saved model.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        image: PathBuf,
    },
    /// Evaluate a saved model on a dataset tree and emit a CSV report.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Stratified cross-validation; the CSV output is byte-deterministic.
    Crossval {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        folds: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated method list; all six when absent.
        #[arg(long)]
        method: Option<String>,
    },
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Data(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Data(m) => f.write_str(m),
        }
    }
}

fn data_err(e: impl std::fmt::Display) -> CliError {
    CliError::Data(e.to_string())
}

fn load_config(path: &Option<PathBuf>) -> Result<ExperimentConfig, CliError> {
    match path {
        None => Ok(ExperimentConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Data(format!("cannot read config {}: {e}", p.display())))?;
            ExperimentConfig::parse(&text).map_err(data_err)
        }
    }
}

fn load_dataset(path: &Path, config: &ExperimentConfig) -> Result<Dataset, CliError> {
    ingest_directory(path, config.canonical_size).map_err(data_err)
}

fn write_out(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text)
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))
}

fn build_space_for(
    config: &ExperimentConfig,
    dataset: &Dataset,
) -> Result<kernelboost_core::harness::FeatureSpace, CliError> {
    let labels = dataset.labels();
    let images: Vec<_> = dataset.samples.iter().map(|(img, _)| img).collect();
    build_feature_space(config, &images, &labels, dataset.classes.len()).map_err(data_err)
}

fn sift_params(config: &ExperimentConfig) -> Result<(usize, usize, usize, u64), CliError> {
    for ch in &config.channels {
        if let DescriptorSpec::SiftBow {
            step,
            patch,
            words,
            seed,
        } = ch.spec
        {
            return Ok((step, patch, words, seed));
        }
    }
    Err(CliError::Usage(
        "siftbow channel is not enabled in the config".to_string(),
    ))
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Extract {
            data,
            config,
            channel,
            out,
            codebook,
        } => {
            let config = load_config(&config)?;
            let channel = Channel::parse(&channel)
                .ok_or_else(|| CliError::Usage(format!("unknown channel {channel}")))?;
            let dataset = load_dataset(&data, &config)?;
            let chan_cfg = config
                .channels
                .iter()
                .find(|c| c.spec.channel() == channel)
                .ok_or_else(|| {
                    CliError::Usage(format!("channel {channel} not enabled in config"))
                })?;
            let cb = match (&chan_cfg.spec, codebook) {
                (DescriptorSpec::SiftBow { .. }, Some(path)) => {
                    let text = std::fs::read_to_string(&path).map_err(|e| {
                        CliError::Data(format!("cannot read codebook {}: {e}", path.display()))
                    })?;
                    Some(parse_codebook(&text).map_err(data_err)?)
                }
                (DescriptorSpec::SiftBow { step, patch, words, seed }, None) => {
                    let mut locals = Vec::new();
                    for (img, _) in &dataset.samples {
                        locals.extend(dense_sift_lite(img, *step, *patch).map_err(data_err)?);
                    }
                    Some(
                        kernelboost_core::descriptors::build_codebook(&locals, *words, *seed)
                            .map_err(data_err)?,
                    )
                }
                _ => None,
            };
            let mut records = Vec::new();
            for (i, (img, _)) in dataset.samples.iter().enumerate() {
                let d = kernelboost_core::descriptors::compute_descriptor(
                    img,
                    &chan_cfg.spec,
                    cb.as_ref(),
                )
                .map_err(data_err)?;
                records.push((i, d.values));
            }
            let borrowed: Vec<(usize, &[f64])> =
                records.iter().map(|(i, v)| (*i, v.as_slice())).collect();
            let params = format!("{:?}", chan_cfg.spec).replace(' ', "");
            write_out(&out, &render_descriptor_cache(channel, &params, &borrowed))?;
            println!("extracted {} descriptors to {}", records.len(), out.display());
            Ok(())
        }
        Command::Codebook { data, config, out } => {
            let config = load_config(&config)?;
            let (step, patch, words, seed) = sift_params(&config)?;
            let dataset = load_dataset(&data, &config)?;
            let mut locals = Vec::new();
            for (img, _) in &dataset.samples {
                locals.extend(dense_sift_lite(img, step, patch).map_err(data_err)?);
            }
            let cb = kernelboost_core::descriptors::build_codebook(&locals, words, seed)
                .map_err(data_err)?;
            write_out(&out, &render_codebook(&cb))?;
            println!(
                "codebook with {} words (inertia {:.6}) written to {}",
                cb.words.len(),
                cb.inertia,
                out.display()
            );
            Ok(())
        }
        Command::Train {
            method,
            data,
            config,
            model,
        } => {
            let method = Method::parse(&method).map_err(|e| CliError::Usage(e.to_string()))?;
            let config = load_config(&config)?;
            let dataset = load_dataset(&data, &config)?;
            if dataset.classes.len() < 2 {
                return Err(CliError::Data(
                    "training needs at least 2 classes".to_string(),
                ));
            }
            let space = build_space_for(&config, &dataset)?;
            let trained = train_method(method, &config, &space).map_err(data_err)?;
            let toolkit = ToolkitModel {
                method,
                classes: dataset.classes.clone(),
                config,
                space,
                model: trained,
            };
            save_model(&model, &toolkit).map_err(data_err)?;
            println!("trained {} model written to {}", method, model.display());
            Ok(())
        }
        Command::Predict { model, image } => {
            let toolkit = load_model(&model).map_err(data_err)?;
            let bytes = std::fs::read(&image)
                .map_err(|e| CliError::Data(format!("cannot read {}: {e}", image.display())))?;
            let img = load_pgm(&bytes).map_err(data_err)?;
            let img = resize_bilinear(
                &img,
                toolkit.config.canonical_size,
                toolkit.config.canonical_size,
            )
            .map_err(data_err)?;
            let (label, _) = kernelboost_core::harness::predict_one(
                &toolkit.model,
                &toolkit.config,
                &toolkit.space,
                &img,
            )
            .map_err(data_err)?;
            println!("{}", toolkit.classes[label]);
            Ok(())
        }
        Command::Eval { model, data, out } => {
            let toolkit = load_model(&model).map_err(data_err)?;
            let dataset = load_dataset(&data, &toolkit.config)?;
            if dataset.classes != toolkit.classes {
                return Err(CliError::Data(format!(
                    "dataset classes {:?} do not match model classes {:?}",
                    dataset.classes, toolkit.classes
                )));
            }
            let test_idx: Vec<usize> = (0..dataset.samples.len()).collect();
            let report = evaluate_with_space(
                toolkit.method,
                &toolkit.config,
                &dataset,
                &toolkit.space,
                &test_idx,
            )
            .map_err(data_err)?;
            emit_report(&report, &dataset.classes, &out).map_err(data_err)?;
            println!(
                "{}: accuracy {:.6} over {} samples -> {}",
                report.method,
                report.accuracy,
                report.total(),
                out.display()
            );
            Ok(())
        }
        Command::Crossval {
            data,
            config,
            folds,
            seed,
            out,
            method,
        } => {
            let config = load_config(&config)?;
            let folds = folds.unwrap_or(config.folds);
            let seed = seed.unwrap_or(config.seed);
            let methods: Vec<Method> = match method {
                None => Method::ALL.to_vec(),
                Some(list) => list
                    .split(',')
                    .map(|m| Method::parse(m.trim()).map_err(|e| CliError::Usage(e.to_string())))
                    .collect::<Result<_, _>>()?,
            };
            let dataset = load_dataset(&data, &config)?;
            let results =
                crossval(&methods, &config, &dataset, folds, seed).map_err(data_err)?;
            write_out(&out, &render_crossval(&results))?;
            for r in &results {
                println!("{}: cv accuracy {:.6}", r.method.name(), r.accuracy);
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are successful exits.
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(m)) => {
            eprintln!("usage error: {m}");
            ExitCode::from(1)
        }
        Err(CliError::Data(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}
