//! Per-session linear heads and the class-prototype baseline.

use alloc::collections::BTreeMap;
use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::data::FeatureDataset;
use crate::error::{Error, Result};
use crate::numerics::{check_len, cosine, Matrix, Real};

/// Bias-free linear classifier over one session's classes.
///
/// Column `j` of the `d x K` weight matrix scores `class_ids[j]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionHead {
    pub weights: Matrix<f32>,
    class_ids: Vec<u32>,
}

impl SessionHead {
    /// Zero-initialized head, so the initial softmax is uniform.
    pub fn zeros(dim: usize, class_ids: Vec<u32>) -> Result<Self> {
        Self::new(Matrix::zeros(dim, class_ids.len()), class_ids)
    }

    pub fn new(weights: Matrix<f32>, class_ids: Vec<u32>) -> Result<Self> {
        if class_ids.is_empty() {
            return Err(Error::InvalidParameter("a head needs at least one class"));
        }
        if weights.rows() == 0 {
            return Err(Error::InvalidDimension("head dimension must be positive"));
        }
        check_len(class_ids.len(), weights.cols())?;
        check_unique(&class_ids)?;
        Ok(SessionHead { weights, class_ids })
    }

    pub fn dim(&self) -> usize {
        self.weights.rows()
    }

    pub fn num_classes(&self) -> usize {
        self.class_ids.len()
    }

    pub fn class_ids(&self) -> &[u32] {
        &self.class_ids
    }

    pub fn param_count(&self) -> usize {
        self.weights.len()
    }

    pub fn column_of(&self, class_id: u32) -> Option<usize> {
        self.class_ids.iter().position(|&c| c == class_id)
    }

    /// `logits[j] = <W[:, j], phi>`.
    pub fn forward(&self, phi: &[f64]) -> Result<Vec<f64>> {
        self.weights.vec_mul(phi)
    }

    /// Appends zero columns for `new_ids`.
    pub fn extend_classes(&mut self, new_ids: &[u32]) -> Result<()> {
        let mut ids = self.class_ids.clone();
        ids.extend_from_slice(new_ids);
        check_unique(&ids)?;
        let (d, k_old) = (self.dim(), self.num_classes());
        let old = &self.weights;
        self.weights = Matrix::from_fn(d, ids.len(), |i, j| if j < k_old { old.get(i, j) } else { 0.0 });
        self.class_ids = ids;
        Ok(())
    }

    /// Class with the largest entry of `scores`; ties go to the lowest class id.
    pub fn best_class(&self, scores: &[f64]) -> u32 {
        best_class(&self.class_ids, scores)
    }
}

pub(crate) fn best_class(class_ids: &[u32], scores: &[f64]) -> u32 {
    let mut best = 0;
    for j in 1..class_ids.len() {
        if scores[j] > scores[best] || (scores[j] == scores[best] && class_ids[j] < class_ids[best]) {
            best = j;
        }
    }
    class_ids[best]
}

fn check_unique(ids: &[u32]) -> Result<()> {
    let mut seen = BTreeSet::new();
    for &c in ids {
        if !seen.insert(c) {
            return Err(Error::DuplicateClass(c));
        }
    }
    Ok(())
}

pub fn head_forward(phi: &[f64], head: &SessionHead) -> Result<Vec<f64>> {
    head.forward(phi)
}

/// Per-class mean feature vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct PrototypeBank {
    dim: usize,
    prototypes: BTreeMap<u32, Vec<f64>>,
    counts: BTreeMap<u32, usize>,
}

impl PrototypeBank {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.prototypes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prototypes.is_empty()
    }

    pub fn prototype(&self, class_id: u32) -> Option<&[f64]> {
        self.prototypes.get(&class_id).map(|v| v.as_slice())
    }

    pub fn count(&self, class_id: u32) -> Option<usize> {
        self.counts.get(&class_id).copied()
    }

    /// Cosine nearest prototype; ties resolve to the lowest class id.
    pub fn classify<T: Real>(&self, x: &[T]) -> Result<u32> {
        self.classify_among(x, |_| true)
    }

    /// Like [`classify`](Self::classify) but restricted to classes accepted by `allow`.
    pub fn classify_among<T: Real>(&self, x: &[T], mut allow: impl FnMut(u32) -> bool) -> Result<u32> {
        let mut best: Option<(u32, f64)> = None;
        for (&class, proto) in &self.prototypes {
            if !allow(class) {
                continue;
            }
            let sim = cosine(x, proto)?;
            if best.map_or(true, |(_, s)| sim > s) {
                best = Some((class, sim));
            }
        }
        best.map(|(c, _)| c).ok_or(Error::NoSamples)
    }
}

/// Mean feature vector of every class present in `data`.
pub fn build_prototypes(data: &FeatureDataset) -> Result<PrototypeBank> {
    if data.is_empty() {
        return Err(Error::NoSamples);
    }
    let mut sums: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
    let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
    for (label, x) in data.iter() {
        let sum = sums.entry(label).or_insert_with(|| vec![0.0; data.dim()]);
        for (s, &v) in sum.iter_mut().zip(x) {
            *s += v as f64;
        }
        *counts.entry(label).or_insert(0) += 1;
    }
    let prototypes = sums
        .into_iter()
        .map(|(c, mut s)| {
            let n = counts[&c] as f64;
            s.iter_mut().for_each(|v| *v /= n);
            (c, s)
        })
        .collect();
    Ok(PrototypeBank { dim: data.dim(), prototypes, counts })
}

pub fn prototype_classify<T: Real>(x: &[T], bank: &PrototypeBank) -> Result<u32> {
    bank.classify(x)
}
