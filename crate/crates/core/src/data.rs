//! Labeled frozen-feature datasets, `B-m Inc-n` class splits and the
//! synthetic Gaussian benchmark.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::check_len;
use crate::rng;

/// Largest feature dimension accepted by the on-disk format.
pub const MAX_DIM: usize = 1 << 20;

/// Default seed for class-order shuffling.
pub const DEFAULT_SPLIT_SEED: u64 = 1993;

/// Labeled `d`-dimensional feature vectors, stored flat.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureDataset {
    pub name: String,
    dim: usize,
    labels: Vec<u32>,
    features: Vec<f32>,
}

impl FeatureDataset {
    pub fn new(name: impl Into<String>, dim: usize) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::InvalidDimension("feature dimension must be in 1..=2^20"));
        }
        Ok(FeatureDataset { name: name.into(), dim, labels: Vec::new(), features: Vec::new() })
    }

    /// Builds a dataset from parallel flat buffers.
    pub fn from_parts(
        name: impl Into<String>,
        dim: usize,
        labels: Vec<u32>,
        features: Vec<f32>,
    ) -> Result<Self> {
        let mut ds = Self::new(name, dim)?;
        check_len(labels.len() * dim, features.len())?;
        ds.labels = labels;
        ds.features = features;
        Ok(ds)
    }

    pub fn push(&mut self, label: u32, features: &[f32]) -> Result<()> {
        check_len(self.dim, features.len())?;
        self.labels.push(label);
        self.features.extend_from_slice(features);
        Ok(())
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    #[inline]
    pub fn label(&self, i: usize) -> u32 {
        self.labels[i]
    }

    #[inline]
    pub fn features(&self, i: usize) -> &[f32] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn raw_features(&self) -> &[f32] {
        &self.features
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, &[f32])> + '_ {
        self.labels.iter().copied().zip(self.features.chunks_exact(self.dim))
    }

    pub fn classes(&self) -> BTreeSet<u32> {
        self.labels.iter().copied().collect()
    }

    /// Samples whose label satisfies `keep`, in original order.
    pub fn filter(&self, mut keep: impl FnMut(u32) -> bool) -> FeatureDataset {
        let mut out = FeatureDataset {
            name: self.name.clone(),
            dim: self.dim,
            labels: Vec::new(),
            features: Vec::new(),
        };
        for (label, x) in self.iter() {
            if keep(label) {
                out.labels.push(label);
                out.features.extend_from_slice(x);
            }
        }
        out
    }

    pub fn subset(&self, classes: &[u32]) -> FeatureDataset {
        let set: BTreeSet<u32> = classes.iter().copied().collect();
        self.filter(|label| set.contains(&label))
    }

    /// Splits off `fraction` of every class's samples as a test set.
    ///
    /// Each class keeps at least one training sample; the number held out is
    /// `floor(count * fraction)`. Which samples go where is a seeded shuffle,
    /// and both halves keep the original sample order.
    pub fn holdout(&self, fraction: f64, seed: u64) -> Result<(FeatureDataset, FeatureDataset)> {
        if !(0.0..1.0).contains(&fraction) {
            return Err(Error::InvalidParameter("holdout fraction must be in [0, 1)"));
        }
        let mut stream = rng::seeded(rng::derive_seed(seed, rng::stream::HOLDOUT));
        let mut is_test = alloc::vec![false; self.len()];
        for class in self.classes() {
            let mut idx: Vec<usize> = (0..self.len()).filter(|&i| self.labels[i] == class).collect();
            let take = ((idx.len() as f64 * fraction) as usize).min(idx.len() - 1);
            rng::shuffle(&mut stream, &mut idx);
            for &i in &idx[..take] {
                is_test[i] = true;
            }
        }
        let mut train = FeatureDataset::new(self.name.clone(), self.dim)?;
        let mut test = FeatureDataset::new(self.name.clone(), self.dim)?;
        for (i, (label, x)) in self.iter().enumerate() {
            if is_test[i] { &mut test } else { &mut train }.push(label, x)?;
        }
        Ok((train, test))
    }

    pub fn concat(&self, other: &FeatureDataset) -> Result<FeatureDataset> {
        check_len(self.dim, other.dim)?;
        let mut out = self.clone();
        out.labels.extend_from_slice(&other.labels);
        out.features.extend_from_slice(&other.features);
        Ok(out)
    }
}

/// Ordered class-id sets, one per incremental stage.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub stages: Vec<Vec<u32>>,
    pub seed: u64,
}

impl SplitPlan {
    pub fn num_stages(&self) -> usize {
        self.stages.len()
    }

    /// Classes of stages `0..=stage`.
    pub fn seen_through(&self, stage: usize) -> Vec<u32> {
        self.stages[..=stage].iter().flatten().copied().collect()
    }

    /// Checks that stages are nonempty, pairwise disjoint and cover exactly
    /// `classes`.
    pub fn validate(&self, classes: &BTreeSet<u32>) -> Result<()> {
        if self.stages.is_empty() {
            return Err(Error::MalformedSplits("no stages"));
        }
        let mut seen = BTreeSet::new();
        for stage in &self.stages {
            if stage.is_empty() {
                return Err(Error::MalformedSplits("empty stage"));
            }
            for &c in stage {
                if !seen.insert(c) {
                    return Err(Error::MalformedSplits("stages overlap"));
                }
            }
        }
        if &seen != classes {
            return Err(Error::MalformedSplits("stages do not cover the dataset classes"));
        }
        Ok(())
    }
}

/// `B-m Inc-n` split: classes are sorted, Fisher-Yates shuffled with `seed`,
/// then cut into a first stage of `m` classes (omitted when `m == 0`) and
/// consecutive chunks of `n`.
pub fn make_splits(classes: &BTreeSet<u32>, m: usize, n: usize, seed: u64) -> Result<SplitPlan> {
    if n == 0 {
        return Err(Error::InvalidParameter("increment must be at least 1"));
    }
    if classes.is_empty() || m > classes.len() || (classes.len() - m) % n != 0 {
        return Err(Error::SplitMismatch);
    }
    let mut order: Vec<u32> = classes.iter().copied().collect();
    rng::shuffle(&mut rng::seeded(seed), &mut order);
    let mut stages = Vec::new();
    if m > 0 {
        stages.push(order[..m].to_vec());
    }
    stages.extend(order[m..].chunks(n).map(|c| c.to_vec()));
    Ok(SplitPlan { stages, seed })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub dim: usize,
    pub num_classes: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub separation: f64,
    pub sigma: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            dim: 32,
            num_classes: 50,
            n_train: 100,
            n_test: 50,
            separation: 6.0,
            sigma: 1.0,
            seed: 1993,
        }
    }
}

/// Gaussian class clusters with means uniform on the sphere of radius
/// `separation`.
///
/// Means come from the seeded stream, train samples from its first jump and
/// test samples from its second jump, so the two splits never share draws.
/// Samples are emitted class by class, labels `0..num_classes`.
pub fn synth_gaussian(cfg: &SynthConfig) -> Result<(FeatureDataset, FeatureDataset)> {
    if cfg.dim < 2 {
        return Err(Error::InvalidParameter("synthetic dimension must be at least 2"));
    }
    if cfg.num_classes < 2 {
        return Err(Error::InvalidParameter("need at least two classes"));
    }
    if !(cfg.separation > 0.0 && cfg.separation.is_finite()) {
        return Err(Error::InvalidParameter("separation must be positive"));
    }
    if !(cfg.sigma > 0.0 && cfg.sigma.is_finite()) {
        return Err(Error::InvalidParameter("sigma must be positive"));
    }

    let mut mean_stream = rng::seeded(cfg.seed);
    let mut train_stream = rng::jumped(&mean_stream);
    let mut test_stream = rng::jumped(&train_stream);

    let means = draw_means(cfg, &mut mean_stream);

    let draw = |name: &str, per_class: usize, stream: &mut rng::Rng| -> Result<FeatureDataset> {
        let mut ds = FeatureDataset::new(name, cfg.dim)?;
        let mut buf = Vec::with_capacity(cfg.dim);
        for (class, mean) in means.iter().enumerate() {
            for _ in 0..per_class {
                buf.clear();
                buf.extend(mean.iter().map(|&m| (m + cfg.sigma * rng::standard_normal(stream)) as f32));
                ds.push(class as u32, &buf)?;
            }
        }
        Ok(ds)
    };
    let train = draw("synthetic-train", cfg.n_train, &mut train_stream)?;
    let test = draw("synthetic-test", cfg.n_test, &mut test_stream)?;
    Ok((train, test))
}

/// Class means used by [`synth_gaussian`].
pub fn synth_means(cfg: &SynthConfig) -> Vec<Vec<f64>> {
    draw_means(cfg, &mut rng::seeded(cfg.seed))
}

fn draw_means(cfg: &SynthConfig, stream: &mut rng::Rng) -> Vec<Vec<f64>> {
    (0..cfg.num_classes)
        .map(|_| {
            let v: Vec<f64> = (0..cfg.dim).map(|_| rng::standard_normal(stream)).collect();
            let norm = libm::sqrt(v.iter().map(|x| x * x).sum());
            v.into_iter().map(|x| x * cfg.separation / norm).collect()
        })
        .collect()
}
