//! Experiment harness: flat key=value configuration, stratified k-fold
//! splitting, the method evaluation pipeline, and CSV report emission.
//! Codebooks and kernel bandwidths are always estimated on the training
//! split only.

pub mod persist;

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::time::Instant;

use thiserror::Error;

use crate::boosting::{
    adaboost_train, AdaboostConfig, BoostError, BoostedEnsemble, WeakLearnerSpec,
};
use crate::descriptors::{
    build_codebook, compute_descriptor, dense_sift_lite, distance, Channel, Codebook,
    DescriptorError, DescriptorSpec, DescriptorVector, DistanceKind,
};
use crate::imagecore::{Dataset, GrayImage};
use crate::kernels::{build_kernel_matrix, default_gamma, BaseKernel, KernelError, KernelMatrix};
use crate::neighbors::{
    knn_classify, svm_knn_naive, svm_knn_two_stage, NeighborError, NeighborQueryStats,
};
use crate::rng::Lcg;
use crate::svm::{train_multiclass, MulticlassStrategy, MulticlassSvmModel, SvmError};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },
    #[error("unknown method {0}")]
    UnknownMethod(String),
    #[error("folds must be >= 2, got {0}")]
    BadFolds(usize),
    #[error("class {class} has {size} samples, fewer than {folds} folds")]
    ClassTooSmall {
        class: usize,
        size: usize,
        folds: usize,
    },
    #[error("dataset needs >= 2 classes, got {0}")]
    TooFewClasses(usize),
    #[error("empty test split")]
    EmptyTestSplit,
    #[error("config references channel {0} which is not enabled")]
    MissingChannel(Channel),
    #[error("failed to write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Descriptor(#[from] DescriptorError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Svm(#[from] SvmError),
    #[error(transparent)]
    Boost(#[from] BoostError),
    #[error(transparent)]
    Neighbor(#[from] NeighborError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Nn,
    Knn,
    Svm,
    SvmKnn,
    SvmKnn2,
    Adaboost,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Nn,
        Method::Knn,
        Method::Svm,
        Method::SvmKnn,
        Method::SvmKnn2,
        Method::Adaboost,
    ];

    pub fn parse(s: &str) -> Result<Method, HarnessError> {
        match s.to_ascii_uppercase().as_str() {
            "NN" => Ok(Method::Nn),
            "KNN" => Ok(Method::Knn),
            "SVM" => Ok(Method::Svm),
            "SVMKNN" => Ok(Method::SvmKnn),
            "SVMKNN2" => Ok(Method::SvmKnn2),
            "ADABOOST" => Ok(Method::Adaboost),
            other => Err(HarnessError::UnknownMethod(other.to_string())),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Method::Nn => "NN",
            Method::Knn => "KNN",
            Method::Svm => "SVM",
            Method::SvmKnn => "SVMKNN",
            Method::SvmKnn2 => "SVMKNN2",
            Method::Adaboost => "ADABOOST",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One enabled descriptor channel with its kernel settings. `gamma: None`
/// means AUTO: estimated from the training split's mean positive distance.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelConfig {
    pub spec: DescriptorSpec,
    pub distance: DistanceKind,
    pub gamma: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub canonical_size: usize,
    pub channels: Vec<ChannelConfig>,
    pub svm_c: f64,
    pub svm_tol: f64,
    pub strategy: MulticlassStrategy,
    pub svm_channel: Channel,
    pub knn_k: usize,
    pub knn_channel: Channel,
    pub svmknn_k: usize,
    pub svmknn_shortlist: usize,
    pub svmknn_channel: Channel,
    pub svmknn_cheap: DistanceKind,
    pub boost_rounds: usize,
    pub folds: usize,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            canonical_size: 128,
            channels: vec![
                ChannelConfig {
                    spec: DescriptorSpec::Phog {
                        levels: 2,
                        bins: 8,
                        signed: false,
                    },
                    distance: DistanceKind::Chi2,
                    gamma: None,
                },
                ChannelConfig {
                    spec: DescriptorSpec::SiftBow {
                        step: 8,
                        patch: 16,
                        words: 64,
                        seed: 1,
                    },
                    distance: DistanceKind::Chi2,
                    gamma: None,
                },
            ],
            svm_c: 10.0,
            svm_tol: 1e-3,
            strategy: MulticlassStrategy::Vote,
            svm_channel: Channel::Phog,
            knn_k: 5,
            knn_channel: Channel::Phog,
            svmknn_k: 10,
            svmknn_shortlist: 30,
            svmknn_channel: Channel::Phog,
            svmknn_cheap: DistanceKind::L2,
            boost_rounds: 8,
            folds: 5,
            seed: 42,
        }
    }
}

struct RawConfig {
    entries: BTreeMap<String, (usize, String)>,
}

impl RawConfig {
    fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|(_, v)| v.as_str())
    }

    fn parse_as<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, HarnessError> {
        match self.entries.get(key) {
            None => Ok(None),
            Some((line, v)) => v.parse::<T>().map(Some).map_err(|_| HarnessError::Config {
                line: *line,
                message: format!("cannot parse value {v:?} for key {key}"),
            }),
        }
    }
}

const KNOWN_KEYS: &[&str] = &[
    "size",
    "channels",
    "phog.levels",
    "phog.bins",
    "phog.signed",
    "sift.step",
    "sift.patch",
    "sift.words",
    "sift.seed",
    "tiny.side",
    "kernel.phog.distance",
    "kernel.phog.gamma",
    "kernel.siftbow.distance",
    "kernel.siftbow.gamma",
    "kernel.tinyimage.distance",
    "kernel.tinyimage.gamma",
    "svm.c",
    "svm.tol",
    "svm.strategy",
    "svm.channel",
    "knn.k",
    "knn.channel",
    "svmknn.k",
    "svmknn.shortlist",
    "svmknn.channel",
    "svmknn.cheap",
    "boost.rounds",
    "folds",
    "seed",
];

impl ExperimentConfig {
    /// Parse flat `key=value` lines; `#` starts a comment, blank lines are
    /// skipped, unknown keys are rejected with their line number.
    pub fn parse(text: &str) -> Result<ExperimentConfig, HarnessError> {
        let mut entries = BTreeMap::new();
        for (idx, raw_line) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw_line.split('#').next().unwrap().trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or(HarnessError::Config {
                line,
                message: format!("expected key=value, got {content:?}"),
            })?;
            let key = key.trim().to_string();
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(HarnessError::Config {
                    line,
                    message: format!("unknown key {key}"),
                });
            }
            entries.insert(key, (line, value.trim().to_string()));
        }
        let raw = RawConfig { entries };
        let mut cfg = ExperimentConfig::default();

        if let Some(v) = raw.parse_as::<usize>("size")? {
            cfg.canonical_size = v;
        }
        let levels = raw.parse_as::<usize>("phog.levels")?.unwrap_or(2);
        let bins = raw.parse_as::<usize>("phog.bins")?.unwrap_or(8);
        let signed = raw.parse_as::<bool>("phog.signed")?.unwrap_or(false);
        let step = raw.parse_as::<usize>("sift.step")?.unwrap_or(8);
        let patch = raw.parse_as::<usize>("sift.patch")?.unwrap_or(16);
        let words = raw.parse_as::<usize>("sift.words")?.unwrap_or(64);
        let sift_seed = raw.parse_as::<u64>("sift.seed")?.unwrap_or(1);
        let tiny_side = raw.parse_as::<usize>("tiny.side")?.unwrap_or(16);

        let channel_list = raw.get("channels").unwrap_or("phog,siftbow").to_string();
        let mut channels = Vec::new();
        for name in channel_list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let channel = Channel::parse(name).ok_or(HarnessError::Config {
                line: 0,
                message: format!("unknown channel {name}"),
            })?;
            let spec = match channel {
                Channel::Phog => DescriptorSpec::Phog {
                    levels,
                    bins,
                    signed,
                },
                Channel::SiftBow => DescriptorSpec::SiftBow {
                    step,
                    patch,
                    words,
                    seed: sift_seed,
                },
                Channel::TinyImage => DescriptorSpec::TinyImage { side: tiny_side },
            };
            if channels
                .iter()
                .any(|c: &ChannelConfig| c.spec.channel() == channel)
            {
                return Err(HarnessError::Config {
                    line: 0,
                    message: format!("channel {name} listed twice"),
                });
            }
            let default_distance = match channel {
                Channel::TinyImage => DistanceKind::L2,
                _ => DistanceKind::Chi2,
            };
            let dist_key = format!("kernel.{channel}.distance");
            let distance = match raw.get(&dist_key) {
                None => default_distance,
                Some(v) => DistanceKind::parse(v).ok_or(HarnessError::Config {
                    line: 0,
                    message: format!("bad distance kind {v:?} for {dist_key}"),
                })?,
            };
            let gamma_key = format!("kernel.{channel}.gamma");
            let gamma = match raw.get(&gamma_key) {
                None => None,
                Some("auto") => None,
                Some(v) => Some(v.parse::<f64>().map_err(|_| HarnessError::Config {
                    line: 0,
                    message: format!("bad gamma {v:?} for {gamma_key}"),
                })?),
            };
            channels.push(ChannelConfig {
                spec,
                distance,
                gamma,
            });
        }
        if channels.is_empty() {
            return Err(HarnessError::Config {
                line: 0,
                message: "no channels enabled".to_string(),
            });
        }
        cfg.channels = channels;

        if let Some(v) = raw.parse_as::<f64>("svm.c")? {
            cfg.svm_c = v;
        }
        if let Some(v) = raw.parse_as::<f64>("svm.tol")? {
            cfg.svm_tol = v;
        }
        if let Some(v) = raw.get("svm.strategy") {
            cfg.strategy = MulticlassStrategy::parse(v).ok_or(HarnessError::Config {
                line: 0,
                message: format!("bad svm.strategy {v:?}"),
            })?;
        }
        let parse_channel = |key: &str, default: Channel| -> Result<Channel, HarnessError> {
            match raw.get(key) {
                None => Ok(default),
                Some(v) => Channel::parse(v).ok_or(HarnessError::Config {
                    line: 0,
                    message: format!("bad channel {v:?} for {key}"),
                }),
            }
        };
        cfg.svm_channel = parse_channel("svm.channel", cfg.svm_channel)?;
        cfg.knn_channel = parse_channel("knn.channel", cfg.knn_channel)?;
        cfg.svmknn_channel = parse_channel("svmknn.channel", cfg.svmknn_channel)?;
        if let Some(v) = raw.parse_as::<usize>("knn.k")? {
            cfg.knn_k = v;
        }
        if let Some(v) = raw.parse_as::<usize>("svmknn.k")? {
            cfg.svmknn_k = v;
        }
        if let Some(v) = raw.parse_as::<usize>("svmknn.shortlist")? {
            cfg.svmknn_shortlist = v;
        }
        if let Some(v) = raw.get("svmknn.cheap") {
            cfg.svmknn_cheap = DistanceKind::parse(v).ok_or(HarnessError::Config {
                line: 0,
                message: format!("bad svmknn.cheap {v:?}"),
            })?;
        }
        if let Some(v) = raw.parse_as::<usize>("boost.rounds")? {
            cfg.boost_rounds = v;
        }
        if let Some(v) = raw.parse_as::<usize>("folds")? {
            cfg.folds = v;
        }
        if let Some(v) = raw.parse_as::<u64>("seed")? {
            cfg.seed = v;
        }
        for needed in [cfg.svm_channel, cfg.knn_channel, cfg.svmknn_channel] {
            if !cfg.channels.iter().any(|c| c.spec.channel() == needed) {
                return Err(HarnessError::MissingChannel(needed));
            }
        }
        Ok(cfg)
    }

    /// Render back to key=value lines (the persisted-model config block).
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut names: Vec<String> = Vec::new();
        out.push_str(&format!("size={}\n", self.canonical_size));
        for ch in &self.channels {
            names.push(ch.spec.channel().to_string());
        }
        out.push_str(&format!("channels={}\n", names.join(",")));
        for ch in &self.channels {
            match &ch.spec {
                DescriptorSpec::Phog {
                    levels,
                    bins,
                    signed,
                } => {
                    out.push_str(&format!("phog.levels={levels}\n"));
                    out.push_str(&format!("phog.bins={bins}\n"));
                    out.push_str(&format!("phog.signed={signed}\n"));
                }
                DescriptorSpec::SiftBow {
                    step,
                    patch,
                    words,
                    seed,
                } => {
                    out.push_str(&format!("sift.step={step}\n"));
                    out.push_str(&format!("sift.patch={patch}\n"));
                    out.push_str(&format!("sift.words={words}\n"));
                    out.push_str(&format!("sift.seed={seed}\n"));
                }
                DescriptorSpec::TinyImage { side } => {
                    out.push_str(&format!("tiny.side={side}\n"));
                }
            }
            let name = ch.spec.channel();
            out.push_str(&format!("kernel.{name}.distance={}\n", ch.distance));
            match ch.gamma {
                None => out.push_str(&format!("kernel.{name}.gamma=auto\n")),
                Some(g) => out.push_str(&format!("kernel.{name}.gamma={g}\n")),
            }
        }
        out.push_str(&format!("svm.c={}\n", self.svm_c));
        out.push_str(&format!("svm.tol={}\n", self.svm_tol));
        out.push_str(&format!("svm.strategy={}\n", self.strategy.name()));
        out.push_str(&format!("svm.channel={}\n", self.svm_channel));
        out.push_str(&format!("knn.k={}\n", self.knn_k));
        out.push_str(&format!("knn.channel={}\n", self.knn_channel));
        out.push_str(&format!("svmknn.k={}\n", self.svmknn_k));
        out.push_str(&format!("svmknn.shortlist={}\n", self.svmknn_shortlist));
        out.push_str(&format!("svmknn.channel={}\n", self.svmknn_channel));
        out.push_str(&format!("svmknn.cheap={}\n", self.svmknn_cheap));
        out.push_str(&format!("boost.rounds={}\n", self.boost_rounds));
        out.push_str(&format!("folds={}\n", self.folds));
        out.push_str(&format!("seed={}\n", self.seed));
        out
    }
}

/// One cross-validation split: (train indices, test indices).
pub type FoldSplit = (Vec<usize>, Vec<usize>);

/// Per class: shuffle with the seeded generator, deal round-robin into
/// folds. Every sample lands in exactly one test fold.
pub fn stratified_kfold(
    labels: &[usize],
    folds: usize,
    seed: u64,
) -> Result<Vec<FoldSplit>, HarnessError> {
    if folds < 2 {
        return Err(HarnessError::BadFolds(folds));
    }
    let n_classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut rng = Lcg::new(seed);
    let mut fold_of = vec![0usize; labels.len()];
    for class in 0..n_classes {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if members.len() < folds {
            return Err(HarnessError::ClassTooSmall {
                class,
                size: members.len(),
                folds,
            });
        }
        rng.shuffle(&mut members);
        for (pos, &i) in members.iter().enumerate() {
            fold_of[i] = pos % folds;
        }
    }
    let mut out = Vec::with_capacity(folds);
    for f in 0..folds {
        let test: Vec<usize> = (0..labels.len()).filter(|&i| fold_of[i] == f).collect();
        let train: Vec<usize> = (0..labels.len()).filter(|&i| fold_of[i] != f).collect();
        out.push((train, test));
    }
    Ok(out)
}

/// A descriptor channel fitted to one training split: its codebook (for
/// bag-of-words), training descriptors, bandwidth, and Gram matrix.
#[derive(Debug, Clone)]
pub struct TrainedChannel {
    pub config: ChannelConfig,
    pub kernel: BaseKernel,
    pub codebook: Option<Codebook>,
    pub train_vectors: Vec<DescriptorVector>,
    pub gram: KernelMatrix,
}

impl TrainedChannel {
    pub fn describe(&self, img: &GrayImage) -> Result<DescriptorVector, HarnessError> {
        Ok(compute_descriptor(img, &self.config.spec, self.codebook.as_ref())?)
    }

    /// Kernel row: query descriptor against every training descriptor.
    pub fn kernel_row(&self, query: &DescriptorVector) -> Vec<f64> {
        self.train_vectors
            .iter()
            .map(|t| self.kernel.eval(&query.values, &t.values))
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct FeatureSpace {
    pub channels: Vec<TrainedChannel>,
    pub labels: Vec<usize>,
    pub n_classes: usize,
}

impl FeatureSpace {
    pub fn channel(&self, ch: Channel) -> Result<&TrainedChannel, HarnessError> {
        self.channels
            .iter()
            .find(|c| c.config.spec.channel() == ch)
            .ok_or(HarnessError::MissingChannel(ch))
    }

    pub fn grams(&self) -> BTreeMap<String, KernelMatrix> {
        self.channels
            .iter()
            .map(|c| (c.kernel.id.clone(), c.gram.clone()))
            .collect()
    }
}

/// Fit every configured channel on the training images only: codebooks from
/// training locals, gamma from training pairwise distances, Gram matrices
/// over the training split.
pub fn build_feature_space(
    config: &ExperimentConfig,
    images: &[&GrayImage],
    labels: &[usize],
    n_classes: usize,
) -> Result<FeatureSpace, HarnessError> {
    let mut channels = Vec::with_capacity(config.channels.len());
    for ch in &config.channels {
        let codebook = match &ch.spec {
            DescriptorSpec::SiftBow {
                step,
                patch,
                words,
                seed,
            } => {
                let mut locals = Vec::new();
                for img in images {
                    locals.extend(dense_sift_lite(img, *step, *patch)?);
                }
                Some(build_codebook(&locals, *words, *seed)?)
            }
            _ => None,
        };
        let mut vectors = Vec::with_capacity(images.len());
        for img in images {
            vectors.push(compute_descriptor(img, &ch.spec, codebook.as_ref())?);
        }
        let gamma = match ch.gamma {
            Some(g) => g,
            None => {
                let mut dists = Vec::new();
                for i in 0..vectors.len() {
                    for j in 0..i {
                        dists.push(distance(&vectors[i], &vectors[j], ch.distance)?);
                    }
                }
                default_gamma(&dists)?
            }
        };
        let kernel = BaseKernel::new(
            ch.spec.channel().to_string(),
            ch.spec.channel(),
            ch.distance,
            gamma,
        )?;
        let gram = build_kernel_matrix(&vectors, &kernel)?;
        channels.push(TrainedChannel {
            config: ch.clone(),
            kernel,
            codebook,
            train_vectors: vectors,
            gram,
        });
    }
    Ok(FeatureSpace {
        channels,
        labels: labels.to_vec(),
        n_classes,
    })
}

/// A trained classifier over a feature space. Neighbor methods carry no
/// state beyond the feature space itself.
#[derive(Debug, Clone)]
pub enum MethodModel {
    Nn,
    Knn,
    Svm(MulticlassSvmModel),
    SvmKnn,
    SvmKnn2,
    Adaboost(BoostedEnsemble),
}

pub fn train_method(
    method: Method,
    config: &ExperimentConfig,
    space: &FeatureSpace,
) -> Result<MethodModel, HarnessError> {
    if space.n_classes < 2 {
        return Err(HarnessError::TooFewClasses(space.n_classes));
    }
    match method {
        Method::Nn => Ok(MethodModel::Nn),
        Method::Knn => Ok(MethodModel::Knn),
        Method::SvmKnn => Ok(MethodModel::SvmKnn),
        Method::SvmKnn2 => Ok(MethodModel::SvmKnn2),
        Method::Svm => {
            let tc = space.channel(config.svm_channel)?;
            let costs = vec![config.svm_c; space.labels.len()];
            let model = train_multiclass(
                &tc.gram,
                &space.labels,
                &costs,
                space.n_classes,
                config.svm_tol,
                config.strategy,
            )?;
            Ok(MethodModel::Svm(model))
        }
        Method::Adaboost => {
            let pool: Vec<WeakLearnerSpec> = space
                .channels
                .iter()
                .map(|c| WeakLearnerSpec {
                    kernel_id: c.kernel.id.clone(),
                    c: config.svm_c,
                })
                .collect();
            let ensemble = adaboost_train(
                &space.labels,
                space.n_classes,
                &space.grams(),
                &pool,
                &AdaboostConfig {
                    rounds: config.boost_rounds,
                    tol: config.svm_tol,
                    strategy: config.strategy,
                },
            )?;
            Ok(MethodModel::Adaboost(ensemble))
        }
    }
}

/// Classify one image, returning the class index and the query's
/// instrumentation counters.
pub fn predict_one(
    model: &MethodModel,
    config: &ExperimentConfig,
    space: &FeatureSpace,
    img: &GrayImage,
) -> Result<(usize, NeighborQueryStats), HarnessError> {
    match model {
        MethodModel::Nn | MethodModel::Knn => {
            let tc = space.channel(config.knn_channel)?;
            let query = tc.describe(img)?;
            let k = if matches!(model, MethodModel::Nn) {
                1
            } else {
                config.knn_k
            };
            let (label, stats) = knn_classify(
                &query,
                &tc.train_vectors,
                &space.labels,
                k.min(space.labels.len()),
                tc.config.distance,
            )?;
            Ok((label, stats))
        }
        MethodModel::Svm(m) => {
            let tc = space.channel(config.svm_channel)?;
            let query = tc.describe(img)?;
            let row = tc.kernel_row(&query);
            let (label, evals) = m.predict_with_stats(&row)?;
            Ok((
                label,
                NeighborQueryStats {
                    cheap_evals: 0,
                    costly_evals: row.len(),
                    svm_invocations: evals,
                },
            ))
        }
        MethodModel::SvmKnn => {
            let tc = space.channel(config.svmknn_channel)?;
            let query = tc.describe(img)?;
            let (label, stats) = svm_knn_naive(
                &query,
                &tc.train_vectors,
                &space.labels,
                config.svmknn_k.min(space.labels.len()),
                &tc.kernel,
                config.svm_c,
                config.svm_tol,
                config.strategy,
            )?;
            Ok((label, stats))
        }
        MethodModel::SvmKnn2 => {
            let tc = space.channel(config.svmknn_channel)?;
            let query = tc.describe(img)?;
            let shortlist = config.svmknn_shortlist.min(space.labels.len());
            let (label, stats) = svm_knn_two_stage(
                &query,
                &tc.train_vectors,
                &space.labels,
                shortlist,
                config.svmknn_k.min(shortlist),
                config.svmknn_cheap,
                tc.config.distance,
                &tc.kernel,
                config.svm_c,
                config.svm_tol,
                config.strategy,
            )?;
            Ok((label, stats))
        }
        MethodModel::Adaboost(ens) => {
            let mut rows = BTreeMap::new();
            for tc in &space.channels {
                let query = tc.describe(img)?;
                rows.insert(tc.kernel.id.clone(), tc.kernel_row(&query));
            }
            let label = ens.predict(&rows)?;
            Ok((label, NeighborQueryStats::default()))
        }
    }
}

#[derive(Debug, Clone)]
pub struct EvaluationReport {
    pub method: String,
    pub confusion: Vec<Vec<usize>>,
    pub accuracy: f64,
    pub per_query: Vec<NeighborQueryStats>,
    pub wall_time_secs: f64,
}

impl EvaluationReport {
    pub fn total(&self) -> usize {
        self.confusion.iter().flatten().sum()
    }
}

/// Train on the train split, classify every test sample, fill the confusion
/// matrix. Codebooks and bandwidths are fitted inside on the train split
/// only.
pub fn evaluate(
    method: Method,
    config: &ExperimentConfig,
    dataset: &Dataset,
    train_idx: &[usize],
    test_idx: &[usize],
) -> Result<EvaluationReport, HarnessError> {
    let labels: Vec<usize> = train_idx.iter().map(|&i| dataset.samples[i].1).collect();
    let images: Vec<&GrayImage> = train_idx.iter().map(|&i| &dataset.samples[i].0).collect();
    let space = build_feature_space(config, &images, &labels, dataset.classes.len())?;
    evaluate_with_space(method, config, dataset, &space, test_idx)
}

/// Evaluation against a pre-built feature space, so several methods can
/// share one per-fold fit.
pub fn evaluate_with_space(
    method: Method,
    config: &ExperimentConfig,
    dataset: &Dataset,
    space: &FeatureSpace,
    test_idx: &[usize],
) -> Result<EvaluationReport, HarnessError> {
    if test_idx.is_empty() {
        return Err(HarnessError::EmptyTestSplit);
    }
    let start = Instant::now();
    let n_classes = dataset.classes.len();
    let model = train_method(method, config, space)?;
    let mut confusion = vec![vec![0usize; n_classes]; n_classes];
    let mut per_query = Vec::with_capacity(test_idx.len());
    for &i in test_idx {
        let (img, truth) = &dataset.samples[i];
        let (predicted, stats) = predict_one(&model, config, space, img)?;
        confusion[*truth][predicted] += 1;
        per_query.push(stats);
    }
    let correct: usize = (0..n_classes).map(|c| confusion[c][c]).sum();
    let accuracy = correct as f64 / test_idx.len() as f64;
    Ok(EvaluationReport {
        method: method.name().to_string(),
        confusion,
        accuracy,
        per_query,
        wall_time_secs: start.elapsed().as_secs_f64(),
    })
}

/// Render one evaluation report as CSV: class-name header, C confusion
/// rows, a `method,accuracy,wall_time` summary, then per-query stats.
pub fn render_report(report: &EvaluationReport, classes: &[String]) -> String {
    let mut out = String::new();
    out.push_str("class,");
    out.push_str(&classes.join(","));
    out.push('\n');
    for (c, row) in report.confusion.iter().enumerate() {
        out.push_str(&classes[c]);
        for v in row {
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    out.push_str(&format!(
        "{},{:.6},{:.3}\n",
        report.method, report.accuracy, report.wall_time_secs
    ));
    out.push_str("query,cheap_evals,costly_evals,svm_invocations\n");
    for (i, s) in report.per_query.iter().enumerate() {
        out.push_str(&format!(
            "{i},{},{},{}\n",
            s.cheap_evals, s.costly_evals, s.svm_invocations
        ));
    }
    out
}

pub fn emit_report(
    report: &EvaluationReport,
    classes: &[String],
    path: &Path,
) -> Result<(), HarnessError> {
    std::fs::write(path, render_report(report, classes)).map_err(|e| HarnessError::Io {
        path: path.display().to_string(),
        source: e,
    })
}

#[derive(Debug, Clone)]
pub struct CrossvalResult {
    pub method: Method,
    pub fold_reports: Vec<EvaluationReport>,
    /// Pooled accuracy: total correct over total queries across folds.
    pub accuracy: f64,
}

/// Cross-validate the given methods over stratified folds. One feature
/// space is fitted per fold and shared by all methods.
pub fn crossval(
    methods: &[Method],
    config: &ExperimentConfig,
    dataset: &Dataset,
    folds: usize,
    seed: u64,
) -> Result<Vec<CrossvalResult>, HarnessError> {
    if dataset.classes.len() < 2 {
        return Err(HarnessError::TooFewClasses(dataset.classes.len()));
    }
    let labels = dataset.labels();
    let splits = stratified_kfold(&labels, folds, seed)?;
    let mut reports: Vec<Vec<EvaluationReport>> = vec![Vec::new(); methods.len()];
    for (train_idx, test_idx) in &splits {
        let fold_labels: Vec<usize> = train_idx.iter().map(|&i| dataset.samples[i].1).collect();
        let images: Vec<&GrayImage> = train_idx.iter().map(|&i| &dataset.samples[i].0).collect();
        let space = build_feature_space(config, &images, &fold_labels, dataset.classes.len())?;
        for (m, method) in methods.iter().enumerate() {
            reports[m].push(evaluate_with_space(*method, config, dataset, &space, test_idx)?);
        }
    }
    Ok(methods
        .iter()
        .zip(reports)
        .map(|(&method, fold_reports)| {
            let correct: usize = fold_reports
                .iter()
                .map(|r| {
                    (0..r.confusion.len())
                        .map(|c| r.confusion[c][c])
                        .sum::<usize>()
                })
                .sum();
            let total: usize = fold_reports.iter().map(|r| r.total()).sum();
            CrossvalResult {
                method,
                fold_reports,
                accuracy: correct as f64 / total as f64,
            }
        })
        .collect())
}

/// Deterministic crossval CSV: per-fold accuracy lines then a pooled
/// summary per method. Wall time is deliberately excluded so two runs with
/// the same config and seed are byte-identical.
pub fn render_crossval(results: &[CrossvalResult]) -> String {
    let mut out = String::from("method,fold,accuracy\n");
    for r in results {
        for (f, rep) in r.fold_reports.iter().enumerate() {
            out.push_str(&format!("{},{f},{:.6}\n", r.method.name(), rep.accuracy));
        }
    }
    out.push_str("method,accuracy\n");
    for r in results {
        out.push_str(&format!("{},{:.6}\n", r.method.name(), r.accuracy));
    }
    out
}
