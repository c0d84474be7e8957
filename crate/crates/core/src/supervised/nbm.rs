//! Naive Bayes Multinomial over bags of words, with Laplace smoothing and an
//! "others" bucket that absorbs out-of-vocabulary words at test time.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Reserved vocabulary entry aggregating words outside the vocabulary.
pub const OTHERS_TOKEN: &str = "others";

/// Occurrence counts of nominal tokens within one instance window.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BagOfWords {
    counts: BTreeMap<String, u64>,
}

impl BagOfWords {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, word: impl Into<String>, count: u64) {
        if count > 0 {
            *self.counts.entry(word.into()).or_insert(0) += count;
        }
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u64)> {
        self.counts.iter().map(|(w, &c)| (w.as_str(), c))
    }
}

impl<S: Into<String>> FromIterator<(S, u64)> for BagOfWords {
    fn from_iter<T: IntoIterator<Item = (S, u64)>>(iter: T) -> Self {
        let mut bag = BagOfWords::new();
        for (w, c) in iter {
            bag.add(w, c);
        }
        bag
    }
}

/// Trained multinomial model: class priors and per-class word
/// log-probabilities over a fixed vocabulary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NbmModel {
    pub classes: Vec<String>,
    pub priors: Vec<f64>,
    pub vocabulary: Vec<String>,
    /// `log_prob[class][word]`, Laplace-smoothed.
    pub log_prob: Vec<Vec<f64>>,
    others_index: Option<usize>,
}

/// Trains the model. With `vocabulary = None` the vocabulary is the set of
/// training words plus the [`OTHERS_TOKEN`] bucket; an explicit vocabulary
/// is used verbatim (include the bucket yourself if you want one).
///
/// `Pr(w|c) = (1 + count of w in class c) / (N + total count in class c)`,
/// with N the vocabulary size; priors are class instance shares.
pub fn nbm_train(
    examples: &[(String, BagOfWords)],
    vocabulary: Option<Vec<String>>,
) -> Result<NbmModel> {
    if examples.is_empty() {
        return Err(Error::invalid("nbm_train needs at least one instance"));
    }
    let vocabulary = match vocabulary {
        Some(v) => v,
        None => {
            let mut words: BTreeSet<String> = examples
                .iter()
                .flat_map(|(_, bag)| bag.iter().map(|(w, _)| w.to_string()))
                .collect();
            words.insert(OTHERS_TOKEN.to_string());
            words.into_iter().collect()
        }
    };
    if vocabulary.is_empty() {
        return Err(Error::invalid("empty vocabulary"));
    }
    let word_index: BTreeMap<&str, usize> = vocabulary
        .iter()
        .enumerate()
        .map(|(i, w)| (w.as_str(), i))
        .collect();
    let others_index = word_index.get(OTHERS_TOKEN).copied();

    let classes: Vec<String> = examples
        .iter()
        .map(|(c, _)| c.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let class_index: BTreeMap<&str, usize> = classes
        .iter()
        .enumerate()
        .map(|(i, c)| (c.as_str(), i))
        .collect();

    let n_vocab = vocabulary.len();
    let mut word_counts = vec![vec![0u64; n_vocab]; classes.len()];
    let mut instance_counts = vec![0u64; classes.len()];
    for (class, bag) in examples {
        let ci = class_index[class.as_str()];
        instance_counts[ci] += 1;
        for (word, count) in bag.iter() {
            match word_index.get(word).copied().or(others_index) {
                Some(wi) => word_counts[ci][wi] += count,
                None => {} // no bucket: the word cannot be represented
            }
        }
    }

    let log_prob = word_counts
        .iter()
        .map(|counts| {
            let total: u64 = counts.iter().sum();
            let denom = (n_vocab as u64 + total) as f64;
            counts
                .iter()
                .map(|&c| ((1 + c) as f64 / denom).ln())
                .collect()
        })
        .collect();
    let total_instances: u64 = instance_counts.iter().sum();
    let priors = instance_counts
        .iter()
        .map(|&c| c as f64 / total_instances as f64)
        .collect();

    Ok(NbmModel {
        classes,
        priors,
        vocabulary,
        log_prob,
        others_index,
    })
}

/// A prediction: the winning class, per-class log scores, and the winner's
/// normalized posterior (the stage-0 "confidence").
#[derive(Debug, Clone, PartialEq)]
pub struct NbmPrediction {
    pub class: String,
    pub class_idx: usize,
    pub log_scores: Vec<f64>,
    pub posterior: Vec<f64>,
    pub confidence: f64,
}

impl NbmModel {
    /// `score(c) = log P(c) + sum_w n_w log Pr(w|c)`; unknown words map to
    /// the "others" bucket when present, otherwise they are ignored. An
    /// empty bag reduces to the prior argmax.
    pub fn predict(&self, bag: &BagOfWords) -> NbmPrediction {
        let word_index: BTreeMap<&str, usize> = self
            .vocabulary
            .iter()
            .enumerate()
            .map(|(i, w)| (w.as_str(), i))
            .collect();
        let mut log_scores: Vec<f64> = self.priors.iter().map(|p| p.ln()).collect();
        for (word, count) in bag.iter() {
            if let Some(wi) = word_index.get(word).copied().or(self.others_index) {
                for (ci, score) in log_scores.iter_mut().enumerate() {
                    *score += count as f64 * self.log_prob[ci][wi];
                }
            }
        }
        let class_idx = log_scores
            .iter()
            .enumerate()
            .max_by(|(_, a), (_, b)| a.total_cmp(b))
            .map(|(i, _)| i)
            .unwrap();
        // softmax for a normalized posterior
        let max = log_scores[class_idx];
        let exps: Vec<f64> = log_scores.iter().map(|s| (s - max).exp()).collect();
        let z: f64 = exps.iter().sum();
        let posterior: Vec<f64> = exps.into_iter().map(|e| e / z).collect();
        NbmPrediction {
            class: self.classes[class_idx].clone(),
            class_idx,
            confidence: posterior[class_idx],
            log_scores,
            posterior,
        }
    }
}
