//! Gaussian Naive Bayes sentiment classifier with a rejection threshold.
//!
//! Documents are mapped to relative term-frequency vectors over a
//! lexicographically ordered vocabulary. Training fits per-class feature
//! Gaussians (mean and floored variance) plus empirical class priors; scoring
//! runs in log space and normalizes with the max-shift exponential sum, so
//! posteriors stay finite for any valid input. A classification is accepted
//! only when the winning posterior exceeds the rejection threshold.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::preprocess::ProcessedDoc;
use crate::types::{ClassLabel, Engine, Prediction, SentimentScore};

#[derive(Debug, Error)]
pub enum NBayesError {
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("vocabulary is empty after applying min_count cutoff {0}")]
    EmptyVocabulary(usize),
    #[error("vocabulary tokens must be unique and sorted; `{0}` violates that")]
    BadVocabulary(String),
    #[error("training corpus has no `{0}` documents")]
    MissingClass(ClassLabel),
    #[error("feature vector has {got} entries, model expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid feature vector: {0}")]
    BadFeatures(String),
    #[error("invalid NB config: {0}")]
    BadConfig(String),
    #[error("invalid model parameters: {0}")]
    BadModel(String),
    #[error("model file {path}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("model file line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// Training and rejection parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NBConfig {
    /// Minimum total corpus occurrences for a token to enter the vocabulary.
    pub min_count: usize,
    /// Variance floor as a fraction of the largest pooled feature variance.
    pub variance_floor_scale: f64,
    /// Minimum winning posterior for a classification to be accepted.
    pub rejection_threshold: f64,
}

impl Default for NBConfig {
    fn default() -> NBConfig {
        NBConfig {
            min_count: 2,
            variance_floor_scale: 1e-9,
            rejection_threshold: 0.5,
        }
    }
}

impl NBConfig {
    pub fn validate(&self) -> Result<(), NBayesError> {
        if self.min_count < 1 {
            return Err(NBayesError::BadConfig("min_count must be >= 1".into()));
        }
        if !(self.variance_floor_scale.is_finite() && self.variance_floor_scale > 0.0) {
            return Err(NBayesError::BadConfig(format!(
                "variance_floor_scale must be > 0, got {}",
                self.variance_floor_scale
            )));
        }
        if !(0.0..1.0).contains(&self.rejection_threshold) {
            return Err(NBayesError::BadConfig(format!(
                "rejection_threshold must be in [0, 1), got {}",
                self.rejection_threshold
            )));
        }
        Ok(())
    }
}

/// Token -> dense index map in lexicographic order.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    min_count: usize,
}

impl Vocabulary {
    /// Builds a vocabulary from an explicit token list; tokens must be
    /// strictly sorted (this also guarantees uniqueness).
    pub fn new(tokens: Vec<String>, min_count: usize) -> Result<Vocabulary, NBayesError> {
        for pair in tokens.windows(2) {
            if pair[0] >= pair[1] {
                return Err(NBayesError::BadVocabulary(pair[1].clone()));
            }
        }
        if tokens.is_empty() {
            return Err(NBayesError::EmptyVocabulary(min_count));
        }
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Ok(Vocabulary {
            tokens,
            index,
            min_count,
        })
    }

    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn min_count(&self) -> usize {
        self.min_count
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Collects tokens whose total corpus occurrence count reaches `min_count`,
/// in lexicographic order.
pub fn build_vocabulary(
    corpus: &[ProcessedDoc],
    min_count: usize,
) -> Result<Vocabulary, NBayesError> {
    if corpus.is_empty() {
        return Err(NBayesError::EmptyCorpus);
    }
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for doc in corpus {
        for token in &doc.tokens {
            *counts.entry(token).or_insert(0) += 1;
        }
    }
    let tokens: Vec<String> = counts
        .into_iter()
        .filter(|&(_, n)| n >= min_count)
        .map(|(t, _)| t.to_string())
        .collect();
    if tokens.is_empty() {
        return Err(NBayesError::EmptyVocabulary(min_count));
    }
    Vocabulary::new(tokens, min_count)
}

/// Relative term frequencies of one document against a vocabulary:
/// `x_i = count(token_i) / max(1, doc length)`. Out-of-vocabulary tokens
/// contribute nothing to the numerator but still count toward the length,
/// so every entry lies in [0, 1] and the entries sum to at most 1.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Result<FeatureVector, NBayesError> {
        let mut total = 0.0;
        for &v in &values {
            if !(0.0..=1.0).contains(&v) {
                return Err(NBayesError::BadFeatures(format!(
                    "entry {v} outside [0, 1]"
                )));
            }
            total += v;
        }
        if total > 1.0 + 1e-9 {
            return Err(NBayesError::BadFeatures(format!(
                "entries sum to {total} > 1"
            )));
        }
        Ok(FeatureVector(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

pub fn featurize(doc: &ProcessedDoc, vocab: &Vocabulary) -> FeatureVector {
    let mut counts = vec![0usize; vocab.len()];
    for token in &doc.tokens {
        if let Some(i) = vocab.index_of(token) {
            counts[i] += 1;
        }
    }
    let denom = doc.tokens.len().max(1) as f64;
    FeatureVector(counts.into_iter().map(|c| c as f64 / denom).collect())
}

/// Per-class feature Gaussians, indexed by [`ClassLabel::index`].
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianParams {
    pub means: [Vec<f64>; 3],
    pub variances: [Vec<f64>; 3],
}

/// A trained Gaussian Naive Bayes model. Immutable once built; safe to share
/// across concurrent classifiers.
#[derive(Debug, Clone, PartialEq)]
pub struct NBModel {
    vocabulary: Vocabulary,
    priors: [f64; 3],
    params: GaussianParams,
    config: NBConfig,
    variance_floor: f64,
}

impl NBModel {
    /// Assembles a model from explicit parameters, validating the invariants:
    /// positive priors summing to 1 (within 1e-12), per-class parameter
    /// vectors matching the vocabulary size, and variances at or above a
    /// positive floor.
    pub fn from_parts(
        vocabulary: Vocabulary,
        priors: [f64; 3],
        params: GaussianParams,
        config: NBConfig,
        variance_floor: f64,
    ) -> Result<NBModel, NBayesError> {
        config.validate()?;
        if !(variance_floor.is_finite() && variance_floor > 0.0) {
            return Err(NBayesError::BadModel(format!(
                "variance floor must be > 0, got {variance_floor}"
            )));
        }
        let sum: f64 = priors.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(NBayesError::BadModel(format!(
                "priors sum to {sum}, expected 1"
            )));
        }
        for &p in &priors {
            if !(p.is_finite() && p > 0.0) {
                return Err(NBayesError::BadModel(format!("prior {p} must be > 0")));
            }
        }
        let n = vocabulary.len();
        for label in ClassLabel::ALL {
            let i = label.index();
            if params.means[i].len() != n || params.variances[i].len() != n {
                return Err(NBayesError::BadModel(format!(
                    "parameter vectors for {label} do not match vocabulary size {n}"
                )));
            }
            for &v in &params.variances[i] {
                if v < variance_floor {
                    return Err(NBayesError::BadModel(format!(
                        "variance {v} below floor {variance_floor}"
                    )));
                }
            }
            for &m in &params.means[i] {
                if !m.is_finite() {
                    return Err(NBayesError::BadModel("non-finite mean".into()));
                }
            }
        }
        Ok(NBModel {
            vocabulary,
            priors,
            params,
            config,
            variance_floor,
        })
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }

    pub fn priors(&self) -> [f64; 3] {
        self.priors
    }

    pub fn params(&self) -> &GaussianParams {
        &self.params
    }

    pub fn config(&self) -> NBConfig {
        self.config
    }

    pub fn variance_floor(&self) -> f64 {
        self.variance_floor
    }

    /// Normalized class posteriors (negative, neutral, positive) for one
    /// feature vector, computed in log space with a max shift. The result is
    /// finite and sums to 1 within 1e-12 for any valid model and input.
    pub fn posterior(&self, features: &FeatureVector) -> Result<[f64; 3], NBayesError> {
        if features.len() != self.vocabulary.len() {
            return Err(NBayesError::DimensionMismatch {
                expected: self.vocabulary.len(),
                got: features.len(),
            });
        }
        let mut log_joint = [0.0f64; 3];
        for label in ClassLabel::ALL {
            let k = label.index();
            let mut lp = self.priors[k].ln();
            for (i, &x) in features.values().iter().enumerate() {
                lp += log_gaussian(x, self.params.means[k][i], self.params.variances[k][i]);
            }
            log_joint[k] = lp;
        }
        Ok(normalize_log_scores(log_joint))
    }

    /// MAP decision with rejection: the winning class is returned only when
    /// its posterior strictly exceeds the rejection threshold. Exact ties
    /// break toward neutral, then negative before positive.
    pub fn classify(&self, features: &FeatureVector) -> Result<Prediction, NBayesError> {
        let posteriors = self.posterior(features)?;
        Ok(decide(posteriors, self.config.rejection_threshold))
    }

    /// Directional score `P(positive) - P(negative)` tagged with the nbayes
    /// engine. Callers must exclude documents whose [`classify`] result is
    /// `Rejected` from window aggregation.
    ///
    /// [`classify`]: NBModel::classify
    pub fn sentiment_score(&self, features: &FeatureVector) -> Result<SentimentScore, NBayesError> {
        let posteriors = self.posterior(features)?;
        Ok(score_from_posteriors(posteriors))
    }
}

/// Log density of N(mean, var) at x.
fn log_gaussian(x: f64, mean: f64, var: f64) -> f64 {
    let d = x - mean;
    -0.5 * ((std::f64::consts::TAU * var).ln() + d * d / var)
}

/// Max-shift exponential-sum normalization of log scores.
fn normalize_log_scores(log_scores: [f64; 3]) -> [f64; 3] {
    let m = log_scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps = log_scores.map(|lp| (lp - m).exp());
    let sum: f64 = exps.iter().sum();
    exps.map(|e| e / sum)
}

/// Picks the argmax posterior, subject to the rejection threshold. Ties on
/// the exact maximum prefer neutral, then negative, then positive.
pub fn decide(posteriors: [f64; 3], rejection_threshold: f64) -> Prediction {
    let max = posteriors.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let tie_order = [
        ClassLabel::Neutral,
        ClassLabel::Negative,
        ClassLabel::Positive,
    ];
    let winner = tie_order
        .into_iter()
        .find(|label| posteriors[label.index()] == max)
        .expect("max always matches one class");
    if max > rejection_threshold {
        Prediction::Class(winner)
    } else {
        Prediction::Rejected
    }
}

/// `P(positive) - P(negative)`, clamped into the open interval (-1, +1).
pub fn score_from_posteriors(posteriors: [f64; 3]) -> SentimentScore {
    let value = posteriors[ClassLabel::Positive.index()] - posteriors[ClassLabel::Negative.index()];
    SentimentScore::clamped(value, Engine::NBayes)
}

/// Trains a model: empirical class priors plus per-class per-feature sample
/// mean and (population) variance, with variances clamped up to
/// `variance_floor_scale x max pooled feature variance` (falling back to the
/// scale itself when every pooled variance is zero).
pub fn train(
    labeled: &[(ProcessedDoc, ClassLabel)],
    config: NBConfig,
) -> Result<NBModel, NBayesError> {
    config.validate()?;
    if labeled.is_empty() {
        return Err(NBayesError::EmptyCorpus);
    }
    let mut class_counts = [0usize; 3];
    for (_, label) in labeled {
        class_counts[label.index()] += 1;
    }
    for label in ClassLabel::ALL {
        if class_counts[label.index()] == 0 {
            return Err(NBayesError::MissingClass(label));
        }
    }

    let docs: Vec<&ProcessedDoc> = labeled.iter().map(|(d, _)| d).collect();
    let owned: Vec<ProcessedDoc> = docs.iter().map(|d| (*d).clone()).collect();
    let vocabulary = build_vocabulary(&owned, config.min_count)?;
    let n = vocabulary.len();
    let features: Vec<FeatureVector> = labeled
        .iter()
        .map(|(doc, _)| featurize(doc, &vocabulary))
        .collect();

    let total = labeled.len() as f64;
    let mut priors = [0.0f64; 3];
    for label in ClassLabel::ALL {
        priors[label.index()] = class_counts[label.index()] as f64 / total;
    }

    // Pooled per-feature variance over the whole corpus sets the floor scale.
    let pooled_var = population_variances(features.iter().collect::<Vec<_>>().as_slice(), n);
    let max_pooled = pooled_var.iter().cloned().fold(0.0f64, f64::max);
    let base = if max_pooled > 0.0 { max_pooled } else { 1.0 };
    let variance_floor = config.variance_floor_scale * base;

    let mut means: [Vec<f64>; 3] = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    let mut variances: [Vec<f64>; 3] = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    for label in ClassLabel::ALL {
        let k = label.index();
        let class_features: Vec<&FeatureVector> = labeled
            .iter()
            .zip(&features)
            .filter(|((_, l), _)| *l == label)
            .map(|(_, f)| f)
            .collect();
        let class_means = column_means(&class_features, n);
        let class_vars = population_variances(&class_features, n);
        means[k] = class_means;
        variances[k] = class_vars
            .into_iter()
            .map(|v| v.max(variance_floor))
            .collect();
    }

    NBModel::from_parts(
        vocabulary,
        priors,
        GaussianParams { means, variances },
        config,
        variance_floor,
    )
}

fn column_means(rows: &[&FeatureVector], n: usize) -> Vec<f64> {
    let mut sums = vec![0.0f64; n];
    for row in rows {
        for (i, &x) in row.values().iter().enumerate() {
            sums[i] += x;
        }
    }
    let count = rows.len() as f64;
    sums.into_iter().map(|s| s / count).collect()
}

fn population_variances(rows: &[&FeatureVector], n: usize) -> Vec<f64> {
    let means = column_means(rows, n);
    let mut sums = vec![0.0f64; n];
    for row in rows {
        for (i, &x) in row.values().iter().enumerate() {
            let d = x - means[i];
            sums[i] += d * d;
        }
    }
    let count = rows.len() as f64;
    sums.into_iter().map(|s| s / count).collect()
}

const MODEL_MAGIC: &str = "fxsent-nbmodel v1";

impl NBModel {
    /// Serializes the model to the versioned plain-text format. Identical
    /// corpus and config always produce byte-identical output.
    pub fn to_writer<W: Write>(&self, mut writer: W) -> std::io::Result<()> {
        writeln!(writer, "{MODEL_MAGIC}")?;
        writeln!(writer, "min_count {}", self.config.min_count)?;
        writeln!(
            writer,
            "variance_floor_scale {}",
            self.config.variance_floor_scale
        )?;
        writeln!(
            writer,
            "rejection_threshold {}",
            self.config.rejection_threshold
        )?;
        writeln!(writer, "variance_floor {}", self.variance_floor)?;
        writeln!(writer, "vocab {}", self.vocabulary.len())?;
        for token in self.vocabulary.tokens() {
            writeln!(writer, "{token}")?;
        }
        writeln!(
            writer,
            "priors {} {} {}",
            self.priors[0], self.priors[1], self.priors[2]
        )?;
        for (section, table) in [
            ("mean", &self.params.means),
            ("var", &self.params.variances),
        ] {
            for label in ClassLabel::ALL {
                let row: Vec<String> = table[label.index()].iter().map(|v| v.to_string()).collect();
                writeln!(writer, "{section} {label} {}", row.join(" "))?;
            }
        }
        Ok(())
    }

    pub fn to_model_string(&self) -> String {
        let mut buf = Vec::new();
        self.to_writer(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("model text is UTF-8")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), NBayesError> {
        let path = path.as_ref();
        let mut file = File::create(path).map_err(|source| NBayesError::Io {
            path: path.display().to_string(),
            source,
        })?;
        self.to_writer(&mut file).map_err(|source| NBayesError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn from_reader<R: Read>(reader: R) -> Result<NBModel, NBayesError> {
        let mut lines = BufReader::new(reader).lines().enumerate();
        let mut next_line = |what: &str| -> Result<(usize, String), NBayesError> {
            match lines.next() {
                Some((i, Ok(line))) => Ok((i + 1, line)),
                Some((i, Err(e))) => Err(NBayesError::Parse {
                    line: i + 1,
                    message: e.to_string(),
                }),
                None => Err(NBayesError::Parse {
                    line: 0,
                    message: format!("unexpected end of file, expected {what}"),
                }),
            }
        };

        let (line_no, magic) = next_line("header")?;
        if magic.trim() != MODEL_MAGIC {
            return Err(NBayesError::Parse {
                line: line_no,
                message: format!("bad header `{magic}`, expected `{MODEL_MAGIC}`"),
            });
        }

        fn field<T: std::str::FromStr>(
            line_no: usize,
            line: &str,
            key: &str,
        ) -> Result<T, NBayesError> {
            let rest = line
                .strip_prefix(key)
                .ok_or_else(|| NBayesError::Parse {
                    line: line_no,
                    message: format!("expected `{key} <value>`, got `{line}`"),
                })?
                .trim();
            rest.parse().map_err(|_| NBayesError::Parse {
                line: line_no,
                message: format!("bad value `{rest}` for {key}"),
            })
        }

        let (l, line) = next_line("min_count")?;
        let min_count: usize = field(l, &line, "min_count")?;
        let (l, line) = next_line("variance_floor_scale")?;
        let variance_floor_scale: f64 = field(l, &line, "variance_floor_scale")?;
        let (l, line) = next_line("rejection_threshold")?;
        let rejection_threshold: f64 = field(l, &line, "rejection_threshold")?;
        let (l, line) = next_line("variance_floor")?;
        let variance_floor: f64 = field(l, &line, "variance_floor")?;
        let (l, line) = next_line("vocab")?;
        let vocab_len: usize = field(l, &line, "vocab")?;

        let mut tokens = Vec::with_capacity(vocab_len);
        for _ in 0..vocab_len {
            let (_, token) = next_line("vocabulary token")?;
            tokens.push(token.trim().to_string());
        }

        let parse_floats = |line_no: usize, text: &str| -> Result<Vec<f64>, NBayesError> {
            text.split_whitespace()
                .map(|t| {
                    t.parse().map_err(|_| NBayesError::Parse {
                        line: line_no,
                        message: format!("bad float `{t}`"),
                    })
                })
                .collect()
        };

        let (l, line) = next_line("priors")?;
        let priors_vec = parse_floats(
            l,
            line.strip_prefix("priors")
                .ok_or_else(|| NBayesError::Parse {
                    line: l,
                    message: format!("expected `priors ...`, got `{line}`"),
                })?,
        )?;
        if priors_vec.len() != 3 {
            return Err(NBayesError::Parse {
                line: l,
                message: format!("expected 3 priors, got {}", priors_vec.len()),
            });
        }
        let priors = [priors_vec[0], priors_vec[1], priors_vec[2]];

        let mut means: [Vec<f64>; 3] = Default::default();
        let mut variances: [Vec<f64>; 3] = Default::default();
        for (section, table) in [("mean", &mut means), ("var", &mut variances)] {
            for label in ClassLabel::ALL {
                let key = format!("{section} {label} ");
                let (l, line) = next_line(&key)?;
                let rest = line.strip_prefix(&key).ok_or_else(|| NBayesError::Parse {
                    line: l,
                    message: format!("expected `{key}...`, got `{line}`"),
                })?;
                let row = parse_floats(l, rest)?;
                if row.len() != vocab_len {
                    return Err(NBayesError::Parse {
                        line: l,
                        message: format!("expected {vocab_len} values, got {}", row.len()),
                    });
                }
                table[label.index()] = row;
            }
        }

        NBModel::from_parts(
            Vocabulary::new(tokens, min_count)?,
            priors,
            GaussianParams { means, variances },
            NBConfig {
                min_count,
                variance_floor_scale,
                rejection_threshold,
            },
            variance_floor,
        )
    }

    pub fn load(path: impl AsRef<Path>) -> Result<NBModel, NBayesError> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|source| NBayesError::Io {
            path: path.display().to_string(),
            source,
        })?;
        NBModel::from_reader(file)
    }
}
