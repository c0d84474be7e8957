//! Information-gain attribute ranking with equal-frequency discretization.

use std::collections::BTreeMap;

use crate::ingest::Dataset;
use crate::{Error, Result};

const BINS: usize = 10;

fn entropy_of_counts(counts: impl IntoIterator<Item = usize>, total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let t = total as f64;
    counts
        .into_iter()
        .filter(|&c| c > 0)
        .map(|c| {
            let p = c as f64 / t;
            -p * p.log2()
        })
        .sum()
}

/// Assigns each value a bin in 0..BINS by equal-frequency split of the
/// sorted order; equal values always share a bin.
fn equal_frequency_bins(values: &[f64]) -> Vec<usize> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut bins = vec![0usize; n];
    let mut i = 0;
    while i < n {
        // run of equal values takes the bin of its first element
        let bin = i * BINS / n;
        let mut j = i;
        while j < n && values[order[j]] == values[order[i]] {
            bins[order[j]] = bin;
            j += 1;
        }
        i = j;
    }
    bins
}

/// IG = H(class) - H(class | binned attribute), in bits.
pub fn info_gain(values: &[f64], labels: &[&str]) -> f64 {
    let n = values.len();
    if n == 0 {
        return 0.0;
    }
    let mut class_counts: BTreeMap<&str, usize> = BTreeMap::new();
    for &l in labels {
        *class_counts.entry(l).or_insert(0) += 1;
    }
    let h_class = entropy_of_counts(class_counts.values().copied(), n);

    let bins = equal_frequency_bins(values);
    let mut per_bin: BTreeMap<usize, BTreeMap<&str, usize>> = BTreeMap::new();
    for (&bin, &label) in bins.iter().zip(labels) {
        *per_bin.entry(bin).or_default().entry(label).or_insert(0) += 1;
    }
    let h_cond: f64 = per_bin
        .values()
        .map(|counts| {
            let bin_total: usize = counts.values().sum();
            bin_total as f64 / n as f64 * entropy_of_counts(counts.values().copied(), bin_total)
        })
        .sum();
    (h_class - h_cond).max(0.0)
}

/// Ranks every attribute of a labeled dataset by information gain,
/// descending; ties break by attribute name for determinism.
pub fn rank_attributes(dataset: &Dataset) -> Result<Vec<(String, f64)>> {
    if dataset.rows.is_empty() {
        return Err(Error::invalid("rank_attributes needs a non-empty dataset"));
    }
    let labels: Vec<&str> = dataset
        .rows
        .iter()
        .map(|r| {
            r.label
                .as_deref()
                .ok_or_else(|| Error::invalid(format!("unlabeled instance for {}", r.device)))
        })
        .collect::<Result<_>>()?;
    let mut ranked: Vec<(String, f64)> = dataset
        .attributes
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let column: Vec<f64> = dataset.rows.iter().map(|r| r.values[j]).collect();
            (name.clone(), info_gain(&column, &labels))
        })
        .collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    Ok(ranked)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::InstanceRow;
    use crate::Mac;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn perfect_predictor_gains_class_entropy() {
        let values: Vec<f64> = (0..100).map(|i| if i < 50 { 0.0 } else { 1.0 }).collect();
        let labels: Vec<&str> = (0..100).map(|i| if i < 50 { "a" } else { "b" }).collect();
        let ig = info_gain(&values, &labels);
        assert!((ig - 1.0).abs() < 1e-12); // H(class) = 1 bit for a 50/50 split
    }

    #[test]
    fn independent_attribute_gains_little() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let values: Vec<f64> = (0..2000).map(|_| rng.gen()).collect();
        let labels: Vec<&str> = (0..2000)
            .map(|_| if rng.gen::<bool>() { "a" } else { "b" })
            .collect();
        let ig = info_gain(&values, &labels);
        assert!(ig < 0.02, "noise IG {ig}");
    }

    #[test]
    fn constant_attribute_zero_gain() {
        let values = vec![3.5; 40];
        let labels: Vec<&str> = (0..40).map(|i| if i % 2 == 0 { "a" } else { "b" }).collect();
        assert_eq!(info_gain(&values, &labels), 0.0);
    }

    fn build_dataset() -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let mut rows = Vec::new();
        for i in 0..400 {
            let label = if i % 2 == 0 { "a" } else { "b" };
            let informative = if label == "a" {
                rng.gen::<f64>()
            } else {
                5.0 + rng.gen::<f64>()
            };
            rows.push(InstanceRow {
                device: Mac::new([0, 0, 0, 0, 0, 1]),
                window_start: i as f64,
                label: Some(label.to_string()),
                values: vec![rng.gen(), informative, rng.gen(), 7.0],
            });
        }
        Dataset {
            attributes: vec!["noise1".into(), "signal".into(), "noise2".into(), "const".into()],
            rows,
        }
    }

    #[test]
    fn planted_attribute_ranks_first() {
        let ranked = rank_attributes(&build_dataset()).unwrap();
        assert_eq!(ranked[0].0, "signal");
        assert!(ranked[0].1 > 0.9);
    }

    #[test]
    fn constant_attribute_does_not_perturb_ranking() {
        let ds = build_dataset();
        let with_const = rank_attributes(&ds).unwrap();
        let mut without = ds.clone();
        without.attributes.pop();
        for r in without.rows.iter_mut() {
            r.values.pop();
        }
        let without = rank_attributes(&without).unwrap();
        let order_a: Vec<&String> = with_const
            .iter()
            .map(|(n, _)| n)
            .filter(|n| *n != "const")
            .collect();
        let order_b: Vec<&String> = without.iter().map(|(n, _)| n).collect();
        assert_eq!(order_a, order_b);
    }
}
