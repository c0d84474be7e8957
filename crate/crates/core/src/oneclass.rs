//! Per-device one-class clustering models.
//!
//! Training: K-means over the projected training instances with a
//! power-of-two K sweep and an elbow rule, a boundary radius per cluster
//! covering the first 97.5% of members, ten equal-width distance bands with
//! Laplace-smoothed probabilities, and the empirical CDF of training
//! associate probabilities for cross-model confidence.
//!
//! Testing: nearest centroid, inside/outside the boundary, associate
//! probability = cluster likelihood x band probability, confidence = fraction
//! of training probabilities strictly below the test instance's.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ingest::Dataset;
use crate::preprocess::{Projector, Scaler};
use crate::{Error, Result};

pub const BAND_COUNT: usize = 10;

/// Floor for a degenerate single-point cluster radius (projected units).
const RADIUS_FLOOR: f64 = 1e-9;

const MAX_LLOYD_ITERS: usize = 300;

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Result of one K-means fit.
#[derive(Debug, Clone)]
pub struct KmeansFit {
    pub centroids: Vec<Vec<f64>>,
    pub assignment: Vec<usize>,
    /// Sum of squared distances to assigned centroids.
    pub inertia: f64,
}

/// Number of distinct point locations; K values beyond it are infeasible
/// (some cluster would have to be empty).
pub fn distinct_points(points: &[Vec<f64>]) -> usize {
    let mut sorted: Vec<&Vec<f64>> = points.iter().collect();
    sorted.sort_by(|a, b| {
        a.iter()
            .zip(b.iter())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    1 + sorted
        .windows(2)
        .filter(|w| w[0].iter().zip(w[1].iter()).any(|(x, y)| x.total_cmp(y).is_ne()))
        .count()
}

/// Lloyd's iterations from k-means++ seeding, deterministic given the seed.
/// Converges when no assignment changes, or after 300 iterations. Empty
/// clusters are re-seeded to the farthest point from its centroid.
pub fn kmeans_fit(points: &[Vec<f64>], k: usize, seed: u64) -> Result<KmeansFit> {
    if k == 0 || k > points.len() || k > distinct_points(points) {
        return Err(Error::invalid(format!(
            "K = {k} not feasible for {} points ({} distinct)",
            points.len(),
            distinct_points(points)
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = kmeanspp_seed(points, k, &mut rng);
    let mut assignment = vec![usize::MAX; points.len()];
    for _ in 0..MAX_LLOYD_ITERS {
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let nearest = nearest_centroid(p, &centroids).0;
            if assignment[i] != nearest {
                assignment[i] = nearest;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        // recompute means
        let dim = points[0].len();
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &a) in points.iter().zip(&assignment) {
            counts[a] += 1;
            for (s, v) in sums[a].iter_mut().zip(p) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                for s in sums[c].iter_mut() {
                    *s /= counts[c] as f64;
                }
                centroids[c] = std::mem::take(&mut sums[c]);
            } else {
                // re-seed to the point farthest from its assigned centroid
                let far = points
                    .iter()
                    .enumerate()
                    .max_by(|(i, p), (j, q)| {
                        sq_dist(p, &centroids[assignment[*i]])
                            .total_cmp(&sq_dist(q, &centroids[assignment[*j]]))
                    })
                    .map(|(i, _)| i)
                    .unwrap();
                centroids[c] = points[far].clone();
            }
        }
    }
    let inertia = points
        .iter()
        .zip(&assignment)
        .map(|(p, &a)| sq_dist(p, &centroids[a]))
        .sum();
    Ok(KmeansFit {
        centroids,
        assignment,
        inertia,
    })
}

fn kmeanspp_seed(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut centroids = Vec::with_capacity(k);
    centroids.push(points[rng.gen_range(0..points.len())].clone());
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.gen::<f64>() * total;
            let mut chosen = points.len() - 1;
            for (i, w) in d2.iter().enumerate() {
                if target < *w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            chosen
        } else {
            rng.gen_range(0..points.len())
        };
        centroids.push(points[next].clone());
        for (i, p) in points.iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(p, centroids.last().unwrap()));
        }
    }
    centroids
}

fn nearest_centroid(p: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, c) in centroids.iter().enumerate() {
        let d = sq_dist(p, c);
        if d < best.1 {
            best = (i, d);
        }
    }
    (best.0, best.1.sqrt())
}

/// Elbow selection over a candidate K list.
#[derive(Debug, Clone)]
pub struct KSelection {
    pub k: usize,
    /// (K, inertia per instance) for every candidate fitted.
    pub curve: Vec<(usize, f64)>,
    /// True when candidates larger than the point count were dropped.
    pub truncated: bool,
}

pub fn default_k_candidates() -> Vec<usize> {
    (1..=10).map(|i| 1usize << i).collect()
}

/// Fits every candidate K and picks the smallest one whose forward derivative
/// of inertia-per-instance exceeds `deriv_threshold` (a small negative
/// number). When no candidate qualifies, the largest candidate wins.
pub fn select_k(
    points: &[Vec<f64>],
    candidates: &[usize],
    deriv_threshold: f64,
    seed: u64,
) -> Result<KSelection> {
    let limit = distinct_points(points);
    let feasible: Vec<usize> = candidates.iter().copied().filter(|&k| k <= limit).collect();
    let truncated = feasible.len() != candidates.len();
    if feasible.is_empty() {
        return Err(Error::invalid(format!(
            "no feasible K among {candidates:?} for {} points",
            points.len()
        )));
    }
    let mut curve = Vec::with_capacity(feasible.len());
    for &k in &feasible {
        let fit = kmeans_fit(points, k, seed)?;
        curve.push((k, fit.inertia / points.len() as f64));
    }
    let mut chosen = *feasible.last().unwrap();
    for w in curve.windows(2) {
        let (k0, i0) = w[0];
        let (k1, i1) = w[1];
        let deriv = (i1 - i0) / (k1 - k0) as f64;
        if deriv > deriv_threshold {
            chosen = k0;
            break;
        }
    }
    Ok(KSelection {
        k: chosen,
        curve,
        truncated,
    })
}

/// How the cluster boundary radius is derived from member distances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryRule {
    /// 97.5th percentile of member distances (default).
    Percentile,
    /// Upper Tukey fence: Q3 + 1.5 * IQR, capped at the farthest member.
    IqrFence,
}

/// Linear-interpolation percentile over a sorted slice, rank = q * (n - 1).
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let rank = q * (n - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    let frac = rank - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Per-cluster geometry and probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterGeometry {
    pub boundary_radius: Vec<f64>,
    /// Member share per cluster, computed before boundary exclusion.
    pub cluster_likelihood: Vec<f64>,
    /// Laplace-smoothed probability of each of the 10 distance bands,
    /// `(1 + N_band) / (10 + N_retained)` per cluster.
    pub band_prob: Vec<[f64; BAND_COUNT]>,
}

/// Band index (1..=10) for a distance within a boundary radius. Distance 0
/// falls in band 1; a distance exactly at the boundary falls in band 10.
pub fn band_index(distance: f64, radius: f64) -> usize {
    if distance <= 0.0 {
        return 1;
    }
    let l = (BAND_COUNT as f64 * distance / radius).ceil() as usize;
    l.clamp(1, BAND_COUNT)
}

/// Derives boundary radii, cluster likelihoods, and band probabilities from
/// an assignment. Members beyond the boundary are excluded from band
/// statistics; likelihoods keep the pre-exclusion member shares.
pub fn fit_boundaries_and_bands(
    points: &[Vec<f64>],
    centroids: &[Vec<f64>],
    assignment: &[usize],
    rule: BoundaryRule,
) -> Result<ClusterGeometry> {
    let k = centroids.len();
    let mut member_dists: Vec<Vec<f64>> = vec![Vec::new(); k];
    for (p, &a) in points.iter().zip(assignment) {
        member_dists[a].push(sq_dist(p, &centroids[a]).sqrt());
    }
    let total = points.len() as f64;
    let mut boundary_radius = Vec::with_capacity(k);
    let mut cluster_likelihood = Vec::with_capacity(k);
    let mut band_prob = Vec::with_capacity(k);
    for dists in member_dists.iter_mut() {
        if dists.is_empty() {
            return Err(Error::invalid("empty cluster in boundary fit"));
        }
        dists.sort_by(f64::total_cmp);
        let radius = match rule {
            BoundaryRule::Percentile => percentile(dists, 0.975),
            BoundaryRule::IqrFence => {
                let q1 = percentile(dists, 0.25);
                let q3 = percentile(dists, 0.75);
                (q3 + 1.5 * (q3 - q1)).min(*dists.last().unwrap())
            }
        }
        .max(RADIUS_FLOOR);
        let mut band_counts = [0usize; BAND_COUNT];
        let mut retained = 0usize;
        for &d in dists.iter() {
            if d <= radius {
                retained += 1;
                band_counts[band_index(d, radius) - 1] += 1;
            }
        }
        let denom = (BAND_COUNT + retained) as f64;
        let mut probs = [0.0; BAND_COUNT];
        for (p, &c) in probs.iter_mut().zip(&band_counts) {
            *p = (1 + c) as f64 / denom;
        }
        boundary_radius.push(radius);
        cluster_likelihood.push(dists.len() as f64 / total);
        band_prob.push(probs);
    }
    Ok(ClusterGeometry {
        boundary_radius,
        cluster_likelihood,
        band_prob,
    })
}

/// A trained one-class model for one device class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceModel {
    pub version: u32,
    pub device_class: String,
    pub attributes: Vec<String>,
    pub seed: u64,
    pub scaler: Scaler,
    pub projector: Projector,
    pub k: usize,
    pub centroids: Vec<Vec<f64>>,
    pub geometry: ClusterGeometry,
    /// Sorted ascending associate probabilities of positive training
    /// instances (the empirical CDF backing confidence).
    pub train_prob_cdf: Vec<f64>,
}

/// Verdict of one model on one instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelVerdict {
    pub positive: bool,
    pub nearest_cluster: usize,
    /// Distance band 1..=10, present only for positive verdicts.
    pub band: Option<usize>,
    pub associate_prob: f64,
    /// Fraction of training probabilities strictly below; 0 when negative.
    pub confidence: f64,
}

/// Training knobs for one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneClassConfig {
    pub cumvar_target: f64,
    pub k_candidates: Vec<usize>,
    pub deriv_threshold: f64,
    pub boundary_rule: BoundaryRule,
    pub seed: u64,
    /// Skip the elbow sweep and use this K directly.
    pub fixed_k: Option<usize>,
}

impl Default for OneClassConfig {
    fn default() -> Self {
        OneClassConfig {
            cumvar_target: 0.95,
            k_candidates: default_k_candidates(),
            deriv_threshold: -0.01,
            boundary_rule: BoundaryRule::Percentile,
            seed: 0,
            fixed_k: None,
        }
    }
}

/// The full training pipeline for one device class: scale, project, pick K,
/// cluster, fit boundaries and bands, and freeze the training-probability
/// CDF.
pub fn train_device_model(
    device_class: &str,
    dataset: &Dataset,
    config: &OneClassConfig,
) -> Result<DeviceModel> {
    let raw: Vec<Vec<f64>> = dataset.rows.iter().map(|r| r.values.clone()).collect();
    if raw.len() < 2 {
        return Err(Error::invalid(format!(
            "training {device_class}: need >= 2 instances, got {}",
            raw.len()
        )));
    }
    let scaler = Scaler::fit(&raw)?;
    let scaled = scaler.apply_all(&raw);
    let projector = Projector::fit(&scaled, config.cumvar_target)?;
    let projected = projector.project_all(&scaled);
    let k = match config.fixed_k {
        Some(k) => k,
        None => {
            select_k(
                &projected,
                &config.k_candidates,
                config.deriv_threshold,
                config.seed,
            )?
            .k
        }
    };
    let fit = kmeans_fit(&projected, k, config.seed)?;
    let geometry = fit_boundaries_and_bands(
        &projected,
        &fit.centroids,
        &fit.assignment,
        config.boundary_rule,
    )?;
    let mut model = DeviceModel {
        version: 1,
        device_class: device_class.to_string(),
        attributes: dataset.attributes.clone(),
        seed: config.seed,
        scaler,
        projector,
        k,
        centroids: fit.centroids,
        geometry,
        train_prob_cdf: Vec::new(),
    };
    let mut probs: Vec<f64> = projected
        .iter()
        .filter_map(|z| {
            let v = model.test_projected(z);
            v.positive.then_some(v.associate_prob)
        })
        .collect();
    probs.sort_by(f64::total_cmp);
    model.train_prob_cdf = probs;
    Ok(model)
}

impl DeviceModel {
    /// Index of each model attribute within a caller's attribute list.
    /// Fatal when the name sets differ, naming missing and extra attributes.
    pub fn binding(&self, attributes: &[String]) -> Result<Vec<usize>> {
        let positions: HashMap<&str, usize> = attributes
            .iter()
            .enumerate()
            .map(|(i, a)| (a.as_str(), i))
            .collect();
        let missing: Vec<String> = self
            .attributes
            .iter()
            .filter(|a| !positions.contains_key(a.as_str()))
            .cloned()
            .collect();
        let extra: Vec<String> = attributes
            .iter()
            .filter(|a| !self.attributes.contains(a))
            .cloned()
            .collect();
        if !missing.is_empty() || !extra.is_empty() {
            return Err(Error::AttributeMismatch { missing, extra });
        }
        Ok(self
            .attributes
            .iter()
            .map(|a| positions[a.as_str()])
            .collect())
    }

    /// Tests a raw instance carrying the model's attribute-name set.
    pub fn test_instance(&self, attributes: &[String], raw: &[f64]) -> Result<ModelVerdict> {
        let binding = self.binding(attributes)?;
        Ok(self.test_bound(&binding, raw))
    }

    /// Tests a raw instance through a precomputed [`binding`](Self::binding).
    pub fn test_bound(&self, binding: &[usize], raw: &[f64]) -> ModelVerdict {
        let aligned: Vec<f64> = binding.iter().map(|&i| raw[i]).collect();
        let z = self.projector.project(&self.scaler.apply(&aligned));
        self.test_projected(&z)
    }

    /// Tests a point already in the model's projected space.
    pub fn test_projected(&self, z: &[f64]) -> ModelVerdict {
        let (nearest, distance) = nearest_centroid(z, &self.centroids);
        let radius = self.geometry.boundary_radius[nearest];
        if distance > radius {
            return ModelVerdict {
                positive: false,
                nearest_cluster: nearest,
                band: None,
                associate_prob: 0.0,
                confidence: 0.0,
            };
        }
        let band = band_index(distance, radius);
        let associate_prob =
            self.geometry.cluster_likelihood[nearest] * self.geometry.band_prob[nearest][band - 1];
        ModelVerdict {
            positive: true,
            nearest_cluster: nearest,
            band: Some(band),
            associate_prob,
            confidence: self.confidence_of(associate_prob),
        }
    }

    /// Fraction of training associate probabilities strictly below `prob`.
    pub fn confidence_of(&self, prob: f64) -> f64 {
        if self.train_prob_cdf.is_empty() {
            return 0.0;
        }
        let below = self.train_prob_cdf.partition_point(|p| *p < prob);
        below as f64 / self.train_prob_cdf.len() as f64
    }

    /// Writes the model as a versioned JSON document. Field order is fixed,
    /// so re-serializing a loaded model is byte-identical.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        serde_json::to_writer_pretty(&mut w, self).map_err(|e| Error::Model(e.to_string()))?;
        writeln!(w).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<DeviceModel> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let model: DeviceModel = serde_json::from_reader(BufReader::new(file))
            .map_err(|e| Error::Model(format!("{}: {e}", path.display())))?;
        if model.version != 1 {
            return Err(Error::Model(format!(
                "unsupported model version {}",
                model.version
            )));
        }
        Ok(model)
    }
}
