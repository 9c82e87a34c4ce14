//! Versioned structured-text persistence for trained models, descriptor
//! caches and kernel caches. All reals are written in shortest round-trip
//! decimal form, so every numeric field survives save/load bit-exactly.

use std::collections::BTreeMap;
use std::path::Path;

use thiserror::Error;

use crate::boosting::{BoostRound, BoostedEnsemble};
use crate::descriptors::{Channel, Codebook, DescriptorVector, DistanceKind};
use crate::harness::{
    ChannelConfig, ExperimentConfig, FeatureSpace, Method, MethodModel, TrainedChannel,
};
use crate::kernels::{BaseKernel, KernelMatrix};
use crate::svm::{BinarySvmModel, MulticlassStrategy, MulticlassSvmModel, PairwiseModel};

const MODEL_MAGIC: &str = "kernelboost-model v1";
const DESC_MAGIC: &str = "kernelboost-descriptors v1";
const KERNEL_MAGIC: &str = "kernelboost-kernel v1";

#[derive(Debug, Error)]
pub enum PersistError {
    #[error("version mismatch: expected {expected:?}, found {found:?}")]
    Version { expected: String, found: String },
    #[error("schema violation at field {field}: {message}")]
    Schema { field: String, message: String },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn schema(field: &str, message: impl Into<String>) -> PersistError {
    PersistError::Schema {
        field: field.to_string(),
        message: message.into(),
    }
}

/// Everything needed to classify new images: class names, configuration,
/// the fitted feature space, and the method-specific model.
#[derive(Debug, Clone)]
pub struct ToolkitModel {
    pub method: Method,
    pub classes: Vec<String>,
    pub config: ExperimentConfig,
    pub space: FeatureSpace,
    pub model: MethodModel,
}

fn join_f64(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

fn join_usize(values: &[usize]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn render_model(model: &ToolkitModel) -> String {
    let mut out = String::new();
    out.push_str(MODEL_MAGIC);
    out.push('\n');
    out.push_str(&format!("method {}\n", model.method.name()));
    out.push_str(&format!("classes {}\n", model.classes.len()));
    for c in &model.classes {
        out.push_str(&format!("class {c}\n"));
    }
    let config_text = model.config.to_text();
    let config_lines: Vec<&str> = config_text.lines().collect();
    out.push_str(&format!("config {}\n", config_lines.len()));
    for line in config_lines {
        out.push_str(line);
        out.push('\n');
    }
    out.push_str(&format!("labels {}\n", model.space.labels.len()));
    out.push_str(&join_usize(&model.space.labels));
    out.push('\n');
    out.push_str(&format!("channels {}\n", model.space.channels.len()));
    for tc in &model.space.channels {
        out.push_str(&format!("channel {}\n", tc.kernel.channel));
        out.push_str(&format!("gamma {}\n", tc.kernel.gamma));
        out.push_str(&format!("distance {}\n", tc.kernel.distance_kind));
        match &tc.codebook {
            None => out.push_str("codebook none\n"),
            Some(cb) => {
                let dim = cb.words.first().map_or(0, |w| w.len());
                out.push_str(&format!(
                    "codebook {} {} {} {}\n",
                    cb.words.len(),
                    dim,
                    cb.seed,
                    cb.inertia
                ));
                for w in &cb.words {
                    out.push_str(&join_f64(w));
                    out.push('\n');
                }
            }
        }
        let len = tc.train_vectors.first().map_or(0, |v| v.values.len());
        out.push_str(&format!("vectors {} {}\n", tc.train_vectors.len(), len));
        for v in &tc.train_vectors {
            out.push_str(&join_f64(&v.values));
            out.push('\n');
        }
        out.push_str(&format!("gram {} {}\n", tc.gram.n(), tc.gram.jitter()));
        for i in 0..tc.gram.n() {
            let row: Vec<f64> = (0..=i).map(|j| tc.gram.get(i, j)).collect();
            out.push_str(&join_f64(&row));
            out.push('\n');
        }
    }
    match &model.model {
        MethodModel::Nn | MethodModel::Knn | MethodModel::SvmKnn | MethodModel::SvmKnn2 => {
            out.push_str("model none\n");
        }
        MethodModel::Svm(m) => {
            out.push_str("model svm\n");
            render_multiclass(&mut out, m);
        }
        MethodModel::Adaboost(ens) => {
            out.push_str("model adaboost\n");
            out.push_str(&format!("nclasses {}\n", ens.n_classes));
            out.push_str(&format!("rounds {}\n", ens.rounds.len()));
            for r in &ens.rounds {
                out.push_str(&format!("round {} {}\n", r.kernel_id, r.alpha));
                render_multiclass(&mut out, &r.model);
            }
        }
    }
    out.push_str("end\n");
    out
}

fn render_multiclass(out: &mut String, m: &MulticlassSvmModel) {
    out.push_str(&format!(
        "multiclass {} {} {}\n",
        m.n_classes,
        m.strategy.name(),
        m.pairwise.len()
    ));
    for p in &m.pairwise {
        out.push_str(&format!(
            "pair {} {} {} {} {} {}\n",
            p.class_pos,
            p.class_neg,
            p.model.indices.len(),
            p.model.bias,
            p.model.c,
            p.model.tol
        ));
        out.push_str("indices");
        for i in &p.model.indices {
            out.push_str(&format!(" {i}"));
        }
        out.push('\n');
        out.push_str("coef");
        for c in &p.model.coef {
            out.push_str(&format!(" {c}"));
        }
        out.push('\n');
    }
}

struct Lines<'a> {
    lines: std::str::Lines<'a>,
    current: usize,
}

impl<'a> Lines<'a> {
    fn next_line(&mut self, field: &str) -> Result<&'a str, PersistError> {
        self.current += 1;
        self.lines
            .next()
            .ok_or_else(|| schema(field, format!("file truncated at line {}", self.current)))
    }

    /// Read a line expected to start with `tag`; returns the remainder.
    fn tagged(&mut self, tag: &str) -> Result<&'a str, PersistError> {
        let line = self.next_line(tag)?;
        line.strip_prefix(tag)
            .map(str::trim_start)
            .ok_or_else(|| schema(tag, format!("expected {tag:?}, found {line:?}")))
    }
}

fn parse_f64(s: &str, field: &str) -> Result<f64, PersistError> {
    s.parse()
        .map_err(|_| schema(field, format!("bad real {s:?}")))
}

fn parse_usize(s: &str, field: &str) -> Result<usize, PersistError> {
    s.parse()
        .map_err(|_| schema(field, format!("bad integer {s:?}")))
}

fn parse_f64_list(s: &str, field: &str, expected: usize) -> Result<Vec<f64>, PersistError> {
    let vals: Vec<f64> = s
        .split_whitespace()
        .map(|t| parse_f64(t, field))
        .collect::<Result<_, _>>()?;
    if vals.len() != expected {
        return Err(schema(
            field,
            format!("expected {expected} values, found {}", vals.len()),
        ));
    }
    Ok(vals)
}

pub fn parse_model(text: &str) -> Result<ToolkitModel, PersistError> {
    let mut cur = Lines {
        lines: text.lines(),
        current: 0,
    };
    let magic = cur.next_line("magic")?;
    if magic != MODEL_MAGIC {
        return Err(PersistError::Version {
            expected: MODEL_MAGIC.to_string(),
            found: magic.to_string(),
        });
    }
    let method = Method::parse(cur.tagged("method")?)
        .map_err(|e| schema("method", e.to_string()))?;
    let n_classes = parse_usize(cur.tagged("classes")?, "classes")?;
    let mut classes = Vec::with_capacity(n_classes);
    for _ in 0..n_classes {
        classes.push(cur.tagged("class")?.to_string());
    }
    let n_config = parse_usize(cur.tagged("config")?, "config")?;
    let mut config_text = String::new();
    for _ in 0..n_config {
        config_text.push_str(cur.next_line("config line")?);
        config_text.push('\n');
    }
    let config = ExperimentConfig::parse(&config_text)
        .map_err(|e| schema("config", e.to_string()))?;
    let n_labels = parse_usize(cur.tagged("labels")?, "labels")?;
    let labels: Vec<usize> = cur
        .next_line("labels values")?
        .split_whitespace()
        .map(|t| parse_usize(t, "labels values"))
        .collect::<Result<_, _>>()?;
    if labels.len() != n_labels {
        return Err(schema("labels values", "label count mismatch"));
    }
    let n_channels = parse_usize(cur.tagged("channels")?, "channels")?;
    let mut channels = Vec::with_capacity(n_channels);
    for _ in 0..n_channels {
        let name = cur.tagged("channel")?;
        let channel = Channel::parse(name)
            .ok_or_else(|| schema("channel", format!("unknown channel {name:?}")))?;
        let gamma = parse_f64(cur.tagged("gamma")?, "gamma")?;
        let dist_name = cur.tagged("distance")?;
        let distance = DistanceKind::parse(dist_name)
            .ok_or_else(|| schema("distance", format!("unknown distance {dist_name:?}")))?;
        let cb_header = cur.tagged("codebook")?;
        let codebook = if cb_header == "none" {
            None
        } else {
            let parts: Vec<&str> = cb_header.split_whitespace().collect();
            if parts.len() != 4 {
                return Err(schema("codebook", "expected k dim seed inertia"));
            }
            let k = parse_usize(parts[0], "codebook")?;
            let dim = parse_usize(parts[1], "codebook")?;
            let seed = parts[2]
                .parse::<u64>()
                .map_err(|_| schema("codebook", "bad seed"))?;
            let inertia = parse_f64(parts[3], "codebook")?;
            let mut words = Vec::with_capacity(k);
            for _ in 0..k {
                words.push(parse_f64_list(cur.next_line("codebook word")?, "codebook word", dim)?);
            }
            Some(Codebook {
                words,
                seed,
                inertia,
            })
        };
        let vec_header = cur.tagged("vectors")?;
        let parts: Vec<&str> = vec_header.split_whitespace().collect();
        if parts.len() != 2 {
            return Err(schema("vectors", "expected count and length"));
        }
        let count = parse_usize(parts[0], "vectors")?;
        let len = parse_usize(parts[1], "vectors")?;
        let mut train_vectors = Vec::with_capacity(count);
        for _ in 0..count {
            train_vectors.push(DescriptorVector {
                channel,
                values: parse_f64_list(cur.next_line("vector")?, "vector", len)?,
            });
        }
        let gram_header = cur.tagged("gram")?;
        let parts: Vec<&str> = gram_header.split_whitespace().collect();
        if parts.len() != 2 {
            return Err(schema("gram", "expected n and jitter"));
        }
        let n = parse_usize(parts[0], "gram")?;
        let jitter = parse_f64(parts[1], "gram")?;
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            let row = parse_f64_list(cur.next_line("gram row")?, "gram row", i + 1)?;
            for (j, v) in row.into_iter().enumerate() {
                entries[i * n + j] = v;
                entries[j * n + i] = v;
            }
        }
        let spec = config
            .channels
            .iter()
            .find(|c| c.spec.channel() == channel)
            .cloned()
            .unwrap_or(ChannelConfig {
                spec: crate::descriptors::DescriptorSpec::TinyImage { side: 16 },
                distance,
                gamma: Some(gamma),
            });
        let kernel = BaseKernel::new(channel.to_string(), channel, distance, gamma)
            .map_err(|e| schema("gamma", e.to_string()))?;
        channels.push(TrainedChannel {
            config: spec,
            kernel,
            codebook,
            train_vectors,
            gram: KernelMatrix::from_entries(n, entries, jitter),
        });
    }
    let space = FeatureSpace {
        channels,
        labels,
        n_classes,
    };
    let model_kind = cur.tagged("model")?;
    let model = match model_kind {
        "none" => match method {
            Method::Nn => MethodModel::Nn,
            Method::Knn => MethodModel::Knn,
            Method::SvmKnn => MethodModel::SvmKnn,
            Method::SvmKnn2 => MethodModel::SvmKnn2,
            _ => return Err(schema("model", "method requires a stored model")),
        },
        "svm" => MethodModel::Svm(parse_multiclass(&mut cur)?),
        "adaboost" => {
            let n_classes = parse_usize(cur.tagged("nclasses")?, "nclasses")?;
            let n_rounds = parse_usize(cur.tagged("rounds")?, "rounds")?;
            let mut rounds = Vec::with_capacity(n_rounds);
            for _ in 0..n_rounds {
                let header = cur.tagged("round")?;
                let (kernel_id, alpha_text) = header
                    .split_once(' ')
                    .ok_or_else(|| schema("round", "expected kernel id and alpha"))?;
                let alpha = parse_f64(alpha_text, "round alpha")?;
                rounds.push(BoostRound {
                    kernel_id: kernel_id.to_string(),
                    alpha,
                    model: parse_multiclass(&mut cur)?,
                });
            }
            MethodModel::Adaboost(BoostedEnsemble { n_classes, rounds })
        }
        other => return Err(schema("model", format!("unknown model kind {other:?}"))),
    };
    let end = cur.next_line("end")?;
    if end != "end" {
        return Err(schema("end", format!("expected end marker, found {end:?}")));
    }
    Ok(ToolkitModel {
        method,
        classes,
        config,
        space,
        model,
    })
}

fn parse_multiclass(cur: &mut Lines<'_>) -> Result<MulticlassSvmModel, PersistError> {
    let header = cur.tagged("multiclass")?;
    let parts: Vec<&str> = header.split_whitespace().collect();
    if parts.len() != 3 {
        return Err(schema("multiclass", "expected n_classes strategy n_pairs"));
    }
    let n_classes = parse_usize(parts[0], "multiclass")?;
    let strategy = MulticlassStrategy::parse(parts[1])
        .ok_or_else(|| schema("multiclass", format!("unknown strategy {:?}", parts[1])))?;
    let n_pairs = parse_usize(parts[2], "multiclass")?;
    let mut pairwise = Vec::with_capacity(n_pairs);
    for _ in 0..n_pairs {
        let header = cur.tagged("pair")?;
        let parts: Vec<&str> = header.split_whitespace().collect();
        if parts.len() != 6 {
            return Err(schema("pair", "expected pos neg nsv bias c tol"));
        }
        let class_pos = parse_usize(parts[0], "pair")?;
        let class_neg = parse_usize(parts[1], "pair")?;
        let nsv = parse_usize(parts[2], "pair")?;
        let bias = parse_f64(parts[3], "pair bias")?;
        let c = parse_f64(parts[4], "pair c")?;
        let tol = parse_f64(parts[5], "pair tol")?;
        let indices: Vec<usize> = cur
            .tagged("indices")?
            .split_whitespace()
            .map(|t| parse_usize(t, "indices"))
            .collect::<Result<_, _>>()?;
        let coef: Vec<f64> = cur
            .tagged("coef")?
            .split_whitespace()
            .map(|t| parse_f64(t, "coef"))
            .collect::<Result<_, _>>()?;
        if indices.len() != nsv || coef.len() != nsv {
            return Err(schema("coef", "support vector count mismatch"));
        }
        pairwise.push(PairwiseModel {
            class_pos,
            class_neg,
            model: BinarySvmModel {
                indices,
                coef,
                bias,
                c,
                tol,
            },
        });
    }
    Ok(MulticlassSvmModel {
        n_classes,
        pairwise,
        strategy,
    })
}

pub fn save_model(path: &Path, model: &ToolkitModel) -> Result<(), PersistError> {
    std::fs::write(path, render_model(model)).map_err(|e| PersistError::Io {
        path: path.display().to_string(),
        source: e,
    })
}

pub fn load_model(path: &Path) -> Result<ToolkitModel, PersistError> {
    let text = std::fs::read_to_string(path).map_err(|e| PersistError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    parse_model(&text)
}

/// Descriptor cache: a documented header line with the spec parameters,
/// then one `sample_id v0 v1 ...` record per sample.
pub fn render_descriptor_cache(
    channel: Channel,
    params: &str,
    vectors: &[(usize, &[f64])],
) -> String {
    let len = vectors.first().map_or(0, |(_, v)| v.len());
    let mut out = format!("{DESC_MAGIC} channel={channel} len={len} spec={params}\n");
    for (id, values) in vectors {
        out.push_str(&id.to_string());
        for v in *values {
            out.push_str(&format!(" {v}"));
        }
        out.push('\n');
    }
    out
}

pub fn parse_descriptor_cache(text: &str) -> Result<Vec<(usize, Vec<f64>)>, PersistError> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| schema("header", "empty file"))?;
    if !header.starts_with(DESC_MAGIC) {
        return Err(PersistError::Version {
            expected: DESC_MAGIC.to_string(),
            found: header.chars().take(40).collect(),
        });
    }
    let len_field = header
        .split_whitespace()
        .find_map(|t| t.strip_prefix("len="))
        .ok_or_else(|| schema("len", "missing len field in header"))?;
    let len = parse_usize(len_field, "len")?;
    let mut out = Vec::new();
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let id = parse_usize(parts.next().unwrap(), "sample id")?;
        let values: Vec<f64> = parts
            .map(|t| parse_f64(t, "descriptor value"))
            .collect::<Result<_, _>>()?;
        if values.len() != len {
            return Err(schema("descriptor value", "length mismatch"));
        }
        out.push((id, values));
    }
    Ok(out)
}

const CODEBOOK_MAGIC: &str = "kernelboost-codebook v1";

/// Codebook file: header with shape, seed and final objective, then one
/// centroid per line.
pub fn render_codebook(cb: &Codebook) -> String {
    let dim = cb.words.first().map_or(0, |w| w.len());
    let mut out = format!(
        "{CODEBOOK_MAGIC} k={} dim={} seed={} inertia={}\n",
        cb.words.len(),
        dim,
        cb.seed,
        cb.inertia
    );
    for w in &cb.words {
        out.push_str(&join_f64(w));
        out.push('\n');
    }
    out
}

pub fn parse_codebook(text: &str) -> Result<Codebook, PersistError> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| schema("header", "empty file"))?;
    if !header.starts_with(CODEBOOK_MAGIC) {
        return Err(PersistError::Version {
            expected: CODEBOOK_MAGIC.to_string(),
            found: header.chars().take(40).collect(),
        });
    }
    let field = |k: &str| -> Result<String, PersistError> {
        header
            .split_whitespace()
            .find_map(|t| t.strip_prefix(&format!("{k}=")).map(str::to_string))
            .ok_or_else(|| schema(k, "missing header field"))
    };
    let k = parse_usize(&field("k")?, "k")?;
    let dim = parse_usize(&field("dim")?, "dim")?;
    let seed = field("seed")?
        .parse::<u64>()
        .map_err(|_| schema("seed", "bad seed"))?;
    let inertia = parse_f64(&field("inertia")?, "inertia")?;
    let mut words = Vec::with_capacity(k);
    for _ in 0..k {
        let line = lines
            .next()
            .ok_or_else(|| schema("centroid", "file truncated"))?;
        words.push(parse_f64_list(line, "centroid", dim)?);
    }
    Ok(Codebook {
        words,
        seed,
        inertia,
    })
}

/// Kernel cache: header with identity and bandwidth, then the Gram
/// lower-triangle row by row.
pub fn render_kernel_cache(kernel: &BaseKernel, gram: &KernelMatrix) -> String {
    let mut out = format!(
        "{KERNEL_MAGIC} id={} channel={} distance={} gamma={} n={} jitter={}\n",
        kernel.id,
        kernel.channel,
        kernel.distance_kind,
        kernel.gamma,
        gram.n(),
        gram.jitter()
    );
    for i in 0..gram.n() {
        let row: Vec<f64> = (0..=i).map(|j| gram.get(i, j)).collect();
        out.push_str(&join_f64(&row));
        out.push('\n');
    }
    out
}

pub fn parse_kernel_cache(text: &str) -> Result<(BaseKernel, KernelMatrix), PersistError> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| schema("header", "empty file"))?;
    if !header.starts_with(KERNEL_MAGIC) {
        return Err(PersistError::Version {
            expected: KERNEL_MAGIC.to_string(),
            found: header.chars().take(40).collect(),
        });
    }
    let mut fields = BTreeMap::new();
    for token in header.split_whitespace().skip(2) {
        if let Some((k, v)) = token.split_once('=') {
            fields.insert(k.to_string(), v.to_string());
        }
    }
    let get = |k: &str| -> Result<&str, PersistError> {
        fields
            .get(k)
            .map(String::as_str)
            .ok_or_else(|| schema(k, "missing header field"))
    };
    let id = get("id")?.to_string();
    let channel = Channel::parse(get("channel")?)
        .ok_or_else(|| schema("channel", "unknown channel"))?;
    let distance = DistanceKind::parse(get("distance")?)
        .ok_or_else(|| schema("distance", "unknown distance"))?;
    let gamma = parse_f64(get("gamma")?, "gamma")?;
    let n = parse_usize(get("n")?, "n")?;
    let jitter = parse_f64(get("jitter")?, "jitter")?;
    let mut entries = vec![0.0; n * n];
    for i in 0..n {
        let line = lines
            .next()
            .ok_or_else(|| schema("gram row", "file truncated"))?;
        let row = parse_f64_list(line, "gram row", i + 1)?;
        for (j, v) in row.into_iter().enumerate() {
            entries[i * n + j] = v;
            entries[j * n + i] = v;
        }
    }
    let kernel = BaseKernel::new(id, channel, distance, gamma)
        .map_err(|e| schema("gamma", e.to_string()))?;
    Ok((kernel, KernelMatrix::from_entries(n, entries, jitter)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::KernelMatrix;

    fn toy_model() -> ToolkitModel {
        let config = ExperimentConfig::default();
        let channel_cfg = config.channels[0].clone();
        let kernel = BaseKernel::new("phog", Channel::Phog, DistanceKind::Chi2, 0.7352941).unwrap();
        let gram = KernelMatrix::from_entries(
            2,
            vec![1.0, 0.12345678901234567, 0.12345678901234567, 1.0],
            1e-10,
        );
        let train_vectors = vec![
            DescriptorVector {
                channel: Channel::Phog,
                values: vec![0.1, 0.9],
            },
            DescriptorVector {
                channel: Channel::Phog,
                values: vec![0.30000000000000004, 0.7],
            },
        ];
        let space = FeatureSpace {
            channels: vec![TrainedChannel {
                config: channel_cfg,
                kernel,
                codebook: None,
                train_vectors,
                gram,
            }],
            labels: vec![0, 1],
            n_classes: 2,
        };
        let svm = MulticlassSvmModel {
            n_classes: 2,
            pairwise: vec![PairwiseModel {
                class_pos: 0,
                class_neg: 1,
                model: BinarySvmModel {
                    indices: vec![0, 1],
                    coef: vec![0.3333333333333333, -0.3333333333333333],
                    bias: -1.2345678901234567e-5,
                    c: 10.0,
                    tol: 0.001,
                },
            }],
            strategy: MulticlassStrategy::Vote,
        };
        ToolkitModel {
            method: Method::Svm,
            classes: vec!["cat".to_string(), "dog".to_string()],
            config,
            space,
            model: MethodModel::Svm(svm),
        }
    }

    #[test]
    fn model_roundtrip_bit_exact() {
        let m = toy_model();
        let text = render_model(&m);
        let parsed = parse_model(&text).unwrap();
        assert_eq!(parsed.method, m.method);
        assert_eq!(parsed.classes, m.classes);
        assert_eq!(parsed.config, m.config);
        assert_eq!(parsed.space.labels, m.space.labels);
        let (a, b) = (&parsed.space.channels[0], &m.space.channels[0]);
        assert_eq!(a.kernel, b.kernel);
        assert_eq!(a.train_vectors, b.train_vectors);
        assert_eq!(a.gram, b.gram);
        match (&parsed.model, &m.model) {
            (MethodModel::Svm(x), MethodModel::Svm(y)) => assert_eq!(x, y),
            other => panic!("unexpected {other:?}"),
        }
        // Idempotent second round trip.
        assert_eq!(render_model(&parsed), text);
    }

    #[test]
    fn model_version_guard() {
        let text = render_model(&toy_model()).replace("kernelboost-model v1", "kernelboost-model v9");
        assert!(matches!(
            parse_model(&text),
            Err(PersistError::Version { .. })
        ));
    }

    #[test]
    fn model_truncation_names_field() {
        let text = render_model(&toy_model());
        let cut = &text[..text.find("gram ").unwrap()];
        let err = parse_model(cut).unwrap_err();
        assert!(err.to_string().contains("gram"), "{err}");
    }

    #[test]
    fn adaboost_roundtrip() {
        let mut m = toy_model();
        let svm = match &m.model {
            MethodModel::Svm(s) => s.clone(),
            _ => unreachable!(),
        };
        m.method = Method::Adaboost;
        m.model = MethodModel::Adaboost(BoostedEnsemble {
            n_classes: 2,
            rounds: vec![
                BoostRound {
                    kernel_id: "phog".to_string(),
                    alpha: 1.791759469228055,
                    model: svm.clone(),
                },
                BoostRound {
                    kernel_id: "siftbow".to_string(),
                    alpha: 0.5,
                    model: svm,
                },
            ],
        });
        let text = render_model(&m);
        let parsed = parse_model(&text).unwrap();
        match &parsed.model {
            MethodModel::Adaboost(e) => {
                assert_eq!(e.rounds.len(), 2);
                assert_eq!(e.rounds[0].alpha, 1.791759469228055);
                assert_eq!(e.rounds[1].kernel_id, "siftbow");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn neighbor_method_roundtrip() {
        let mut m = toy_model();
        m.method = Method::SvmKnn2;
        m.model = MethodModel::SvmKnn2;
        let parsed = parse_model(&render_model(&m)).unwrap();
        assert!(matches!(parsed.model, MethodModel::SvmKnn2));
    }

    #[test]
    fn descriptor_cache_roundtrip() {
        let a = vec![0.1, 0.2, 0.7000000000000001];
        let b = vec![1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0];
        let text = render_descriptor_cache(
            Channel::Phog,
            "levels=2,bins=8,signed=false",
            &[(0, &a), (5, &b)],
        );
        let parsed = parse_descriptor_cache(&text).unwrap();
        assert_eq!(parsed, vec![(0, a), (5, b)]);
    }

    #[test]
    fn descriptor_cache_bad_magic() {
        assert!(matches!(
            parse_descriptor_cache("something else\n"),
            Err(PersistError::Version { .. })
        ));
    }

    #[test]
    fn kernel_cache_roundtrip() {
        let kernel = BaseKernel::new("phog", Channel::Phog, DistanceKind::Chi2, 0.25).unwrap();
        let gram = KernelMatrix::from_entries(
            3,
            vec![
                1.1, 0.5, 0.25, 0.5, 1.1, 0.3333333333333333, 0.25, 0.3333333333333333, 1.1,
            ],
            0.1,
        );
        let text = render_kernel_cache(&kernel, &gram);
        let (k2, g2) = parse_kernel_cache(&text).unwrap();
        assert_eq!(k2, kernel);
        assert_eq!(g2, gram);
    }
}
