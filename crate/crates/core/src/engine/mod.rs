//! Session training, the module bank and entropy-based inference.
//!
//! Every session appends one (module, head) pair trained on that session's
//! data alone. At test time the shared frozen feature is passed through all
//! modules; the session whose softmax has the lowest entropy answers.

mod scenario;

pub use scenario::{
    run_scenario, Method, ScenarioConfig, ScenarioOutcome, ScenarioReport, StageReport,
    SPARSITY_THRESHOLD,
};

use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::data::FeatureDataset;
use crate::error::{Error, Result};
use crate::heads::SessionHead;
use crate::luca::{LucaConfig, LucaModule};
use crate::numerics::{check_len, cosine, norm, softmax, ProbVector, Real};
use crate::optim::{train_epochs, OptimConfig, TrainTrace};
use crate::rng;

/// Default bottleneck rank.
pub const DEFAULT_RANK: usize = 48;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub rank: usize,
    pub luca: LucaConfig,
    pub optim: OptimConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { rank: DEFAULT_RANK, luca: LucaConfig::default(), optim: OptimConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceConfig {
    /// Divide each session's entropy by `ln K_b` when sessions differ in size.
    pub normalize_entropy: bool,
    /// Session priors; `None` means uniform. A prior shifts the selection
    /// score by `-ln(B * prior)`, which is zero for uniform priors.
    pub priors: Option<Vec<f64>>,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        InferenceConfig { normalize_entropy: true, priors: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BankEntry {
    /// 1-based session index.
    pub session: u32,
    pub module: LucaModule,
    pub head: SessionHead,
}

impl BankEntry {
    pub fn class_ids(&self) -> &[u32] {
        self.head.class_ids()
    }

    /// Module parameters plus head weights.
    pub fn trainable_params(&self) -> usize {
        self.module.param_count() + self.head.param_count()
    }

    /// Output distribution of this session for a frozen feature.
    pub fn distribution<T: Real>(&self, features: &[T]) -> Result<ProbVector> {
        let refined = self.module.forward(features)?;
        softmax(&self.head.forward(&refined)?)
    }
}

/// Result of entropy-based inference for one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub class_id: u32,
    /// 1-based index of the selected session.
    pub chosen_session: u32,
    /// Raw Shannon entropy (nats) of every session, in bank order.
    pub per_session_entropy: Vec<f64>,
    pub per_session_distribution: Vec<ProbVector>,
}

/// Ordered, append-only collection of trained sessions.
#[derive(Debug, Clone, PartialEq)]
pub struct ModuleBank {
    dim: usize,
    entries: Vec<BankEntry>,
}

/// Produces the frozen feature vector for a raw input.
pub trait FeatureSource {
    type Input: ?Sized;
    fn embed(&self, input: &Self::Input) -> Vec<f32>;
}

/// Feature source for inputs that already are stored features.
pub struct StoredFeatures;

impl FeatureSource for StoredFeatures {
    type Input = [f32];
    fn embed(&self, input: &[f32]) -> Vec<f32> {
        input.to_vec()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageEval {
    /// Top-1 accuracy in percent.
    pub accuracy: f64,
    /// Percent of samples routed to the session owning their label.
    pub selection_accuracy: f64,
    pub samples: usize,
}

impl ModuleBank {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidDimension("feature dimension must be positive"));
        }
        Ok(ModuleBank { dim, entries: Vec::new() })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Rank shared by every module, if any entry exists.
    pub fn rank(&self) -> Option<usize> {
        self.entries.first().map(|e| e.module.rank())
    }

    pub fn config(&self) -> Option<LucaConfig> {
        self.entries.first().map(|e| e.module.config)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[BankEntry] {
        &self.entries
    }

    pub fn classes(&self) -> BTreeSet<u32> {
        self.entries.iter().flat_map(|e| e.class_ids().iter().copied()).collect()
    }

    /// Session (1-based) owning `class_id`.
    pub fn session_of(&self, class_id: u32) -> Option<u32> {
        self.entries.iter().find(|e| e.class_ids().contains(&class_id)).map(|e| e.session)
    }

    /// Appends a trained entry. Its class set must be disjoint from the bank,
    /// and its module must share the bank's dimension, rank and config.
    pub fn push(&mut self, module: LucaModule, head: SessionHead) -> Result<()> {
        check_len(self.dim, module.dim())?;
        check_len(self.dim, head.dim())?;
        if let Some(first) = self.entries.first() {
            check_len(first.module.rank(), module.rank())?;
            if first.module.config != module.config {
                return Err(Error::InvalidParameter("all modules in a bank share one config"));
            }
        }
        let existing = self.classes();
        if let Some(&c) = head.class_ids().iter().find(|c| existing.contains(c)) {
            return Err(Error::OverlappingClasses(c));
        }
        let session = self.entries.len() as u32 + 1;
        self.entries.push(BankEntry { session, module, head });
        Ok(())
    }

    /// Trains a fresh module and head on `data` (this session's samples only)
    /// and appends them. Earlier entries are never touched.
    pub fn train_session(
        &mut self,
        data: &FeatureDataset,
        class_ids: &[u32],
        cfg: &TrainConfig,
        seed: u64,
    ) -> Result<TrainTrace> {
        if data.is_empty() {
            return Err(Error::EmptyDataset);
        }
        check_len(self.dim, data.dim())?;
        let existing = self.classes();
        if let Some(&c) = class_ids.iter().find(|c| existing.contains(c)) {
            return Err(Error::OverlappingClasses(c));
        }
        let mut module = LucaModule::init(self.dim, cfg.rank, cfg.luca, rng::derive_seed(seed, rng::stream::INIT))?;
        let mut head = SessionHead::zeros(self.dim, class_ids.to_vec())?;
        let mut shuffle = rng::seeded(rng::derive_seed(seed, rng::stream::SHUFFLE));
        let trace = train_epochs(&mut module, &mut head, data, &cfg.optim, &mut shuffle)?;
        self.push(module, head)?;
        Ok(trace)
    }

    /// Entropy-minimizing session selection followed by the selected head's
    /// argmax. Entropy ties go to the lowest session, probability ties to the
    /// lowest class id.
    pub fn predict<T: Real>(&self, features: &[T], cfg: &InferenceConfig) -> Result<Prediction> {
        if self.entries.is_empty() {
            return Err(Error::EmptyBank);
        }
        check_len(self.dim, features.len())?;
        let distributions = self
            .entries
            .iter()
            .map(|e| e.distribution(features))
            .collect::<Result<Vec<_>>>()?;
        let entropies: Vec<f64> = distributions.iter().map(|p| p.entropy()).collect();
        let scores = self.selection_scores(&entropies, cfg)?;

        let mut best = 0;
        for (b, &s) in scores.iter().enumerate().skip(1) {
            if s < scores[best] {
                best = b;
            }
        }
        let entry = &self.entries[best];
        let class_id = entry.head.best_class(distributions[best].as_slice());
        Ok(Prediction {
            class_id,
            chosen_session: entry.session,
            per_session_entropy: entropies,
            per_session_distribution: distributions,
        })
    }

    /// Embeds `input` once through `source`, then predicts.
    pub fn predict_from<S: FeatureSource>(
        &self,
        source: &S,
        input: &S::Input,
        cfg: &InferenceConfig,
    ) -> Result<Prediction> {
        let features = source.embed(input);
        self.predict(&features, cfg)
    }

    fn selection_scores(&self, entropies: &[f64], cfg: &InferenceConfig) -> Result<Vec<f64>> {
        let sizes: Vec<usize> = self.entries.iter().map(|e| e.head.num_classes()).collect();
        let unequal = sizes.iter().any(|&k| k != sizes[0]);
        let mut scores: Vec<f64> = entropies
            .iter()
            .zip(&sizes)
            .map(|(&h, &k)| {
                if cfg.normalize_entropy && unequal {
                    if k > 1 {
                        h / libm::log(k as f64)
                    } else {
                        0.0
                    }
                } else {
                    h
                }
            })
            .collect();
        if let Some(priors) = &cfg.priors {
            check_len(self.entries.len(), priors.len())?;
            let b = priors.len() as f64;
            for (s, &p) in scores.iter_mut().zip(priors) {
                if !(p > 0.0 && p.is_finite()) {
                    return Err(Error::InvalidParameter("priors must be positive"));
                }
                *s -= libm::log(b * p);
            }
        }
        Ok(scores)
    }

    /// Top-1 and routing accuracy over `test`, whose labels must all belong
    /// to the bank.
    pub fn evaluate_stage(&self, test: &FeatureDataset, cfg: &InferenceConfig) -> Result<StageEval> {
        if test.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let (mut correct, mut routed) = (0usize, 0usize);
        for (label, x) in test.iter() {
            let owner = self.session_of(label).ok_or(Error::LabelOutsideClassSet(label))?;
            let p = self.predict(x, cfg)?;
            correct += usize::from(p.class_id == label);
            routed += usize::from(p.chosen_session == owner);
        }
        let n = test.len() as f64;
        Ok(StageEval {
            accuracy: 100.0 * correct as f64 / n,
            selection_accuracy: 100.0 * routed as f64 / n,
            samples: test.len(),
        })
    }

    /// Mean pairwise `|cos|` between flattened module parameter vectors.
    pub fn module_orthogonality(&self) -> Result<f64> {
        if self.entries.len() < 2 {
            return Err(Error::TooFewEntries);
        }
        let flat: Vec<Vec<f32>> = self.entries.iter().map(|e| e.module.parameters().collect()).collect();
        let (mut total, mut pairs) = (0.0, 0usize);
        for i in 0..flat.len() {
            for j in i + 1..flat.len() {
                total += cosine(&flat[i], &flat[j])?.abs();
                pairs += 1;
            }
        }
        Ok(total / pairs as f64)
    }

    /// Fraction of all module parameters in the bank with `|theta| < threshold`.
    pub fn sparsity_ratio(&self, threshold: f64) -> f64 {
        let (small, total) = self.entries.iter().fold((0.0, 0usize), |(s, t), e| {
            let n = e.module.param_count();
            (s + e.module.sparsity_ratio(threshold) * n as f64, t + n)
        });
        if total == 0 {
            0.0
        } else {
            small / total as f64
        }
    }

    /// Mean relative feature change `||L_b(x) - x|| / ||x||` of each session's
    /// module on test samples of that session's classes (`0` if none).
    pub fn feature_drift(&self, test: &FeatureDataset) -> Result<Vec<f64>> {
        self.entries
            .iter()
            .map(|e| {
                let (mut sum, mut n) = (0.0, 0usize);
                for (label, x) in test.iter() {
                    if !e.class_ids().contains(&label) {
                        continue;
                    }
                    let base = norm(x);
                    if base == 0.0 {
                        continue;
                    }
                    let out = e.module.forward(x)?;
                    let diff: f64 = out.iter().zip(x).map(|(&o, &v)| (o - v as f64) * (o - v as f64)).sum();
                    sum += libm::sqrt(diff) / base;
                    n += 1;
                }
                Ok(if n == 0 { 0.0 } else { sum / n as f64 })
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{synth_gaussian, SynthConfig};
    use crate::numerics::Matrix;
    use core::cell::Cell;

    /// Module that is the identity map: zero up-projections with a residual gate.
    fn identity_module(d: usize) -> LucaModule {
        let cfg = LucaConfig { gate_residual: true, ..LucaConfig::default() };
        LucaModule::zeros(d, 1, cfg).unwrap()
    }

    fn head(weights: &[&[f32]], ids: &[u32]) -> SessionHead {
        SessionHead::new(Matrix::from_rows(weights).unwrap(), ids.to_vec()).unwrap()
    }

    /// Session 1 scores x[0] strongly for class 10, session 2 is all-zero.
    fn one_hot_vs_uniform() -> ModuleBank {
        let mut bank = ModuleBank::new(2).unwrap();
        bank.push(identity_module(2), head(&[&[1000.0, 0.0, 0.0], &[0.0, 0.0, 0.0]], &[10, 11, 12]))
            .unwrap();
        bank.push(identity_module(2), SessionHead::zeros(2, alloc::vec![20, 21, 22]).unwrap()).unwrap();
        bank
    }

    #[test]
    fn one_hot_session_wins() {
        let bank = one_hot_vs_uniform();
        let p = bank.predict(&[1.0f32, 0.0], &InferenceConfig::default()).unwrap();
        assert_eq!(p.chosen_session, 1);
        assert_eq!(p.class_id, 10);
        assert_eq!(p.per_session_entropy[0], 0.0);
        assert!((p.per_session_entropy[1] - libm::log(3.0)).abs() < 1e-12);
    }

    #[test]
    fn entropy_ties_go_to_first_session() {
        let mut bank = ModuleBank::new(2).unwrap();
        bank.push(identity_module(2), head(&[&[1.0, 0.0], &[0.0, 1.0]], &[5, 6])).unwrap();
        bank.push(identity_module(2), head(&[&[1.0, 0.0], &[0.0, 1.0]], &[1, 2])).unwrap();
        let p = bank.predict(&[0.3f32, 0.9], &InferenceConfig::default()).unwrap();
        assert_eq!(p.chosen_session, 1);
        assert_eq!(p.class_id, 6);
    }

    #[test]
    fn single_entry_reduces_to_argmax() {
        let mut bank = ModuleBank::new(2).unwrap();
        bank.push(identity_module(2), head(&[&[1.0, -1.0, 0.0], &[0.0, 2.0, 0.0]], &[7, 3, 9])).unwrap();
        let p = bank.predict(&[1.0f32, 1.0], &InferenceConfig::default()).unwrap();
        assert_eq!(p.class_id, 3);
        // Uniform distribution: lowest class id wins the argmax tie.
        let p = bank.predict(&[0.0f32, 0.0], &InferenceConfig::default()).unwrap();
        assert_eq!(p.class_id, 3);
    }

    #[test]
    fn prediction_errors() {
        let empty = ModuleBank::new(2).unwrap();
        assert_eq!(empty.predict(&[1.0f32, 0.0], &InferenceConfig::default()), Err(Error::EmptyBank));
        let bank = one_hot_vs_uniform();
        assert!(bank.predict(&[1.0f32], &InferenceConfig::default()).is_err());
        let bad_priors = InferenceConfig { priors: Some(alloc::vec![1.0]), ..Default::default() };
        assert!(bank.predict(&[1.0f32, 0.0], &bad_priors).is_err());
    }

    #[test]
    fn unequal_sessions_are_normalized() {
        // Session 1: 2 classes at p = (0.5, 0.5): H = ln 2, normalized 1.
        // Session 2: 8 classes, mildly peaked: H ~ 1.9 > ln 2, normalized < 1.
        let mut bank = ModuleBank::new(1).unwrap();
        bank.push(identity_module(1), SessionHead::zeros(1, alloc::vec![0, 1]).unwrap()).unwrap();
        let w: Vec<f32> = (0..8).map(|j| if j == 0 { 1.0 } else { 0.0 }).collect();
        bank.push(identity_module(1), SessionHead::new(Matrix::from_vec(1, 8, w).unwrap(), (10..18).collect()).unwrap())
            .unwrap();
        let x = [1.0f32];
        let p = bank.predict(&x, &InferenceConfig::default()).unwrap();
        assert_eq!(p.chosen_session, 2);
        let raw = InferenceConfig { normalize_entropy: false, priors: None };
        assert_eq!(bank.predict(&x, &raw).unwrap().chosen_session, 1);
        // A strong prior on session 1 flips the normalized choice back.
        let prior = InferenceConfig { priors: Some(alloc::vec![0.99, 0.01]), ..Default::default() };
        assert_eq!(bank.predict(&x, &prior).unwrap().chosen_session, 1);
    }

    #[test]
    fn push_rejects_overlap_and_mismatch() {
        let mut bank = one_hot_vs_uniform();
        let err = bank.push(identity_module(2), SessionHead::zeros(2, alloc::vec![30, 11]).unwrap());
        assert_eq!(err, Err(Error::OverlappingClasses(11)));
        assert!(bank.push(identity_module(3), SessionHead::zeros(3, alloc::vec![40]).unwrap()).is_err());
        let other_rank = LucaModule::zeros(2, 2, bank.config().unwrap()).unwrap();
        assert!(bank.push(other_rank, SessionHead::zeros(2, alloc::vec![41]).unwrap()).is_err());
        assert_eq!(bank.len(), 2);
        assert_eq!(bank.entries()[1].session, 2);
    }

    #[test]
    fn evaluation_percentages() {
        let bank = one_hot_vs_uniform();
        let mut test = FeatureDataset::new("t", 2).unwrap();
        test.push(10, &[1.0, 0.0]).unwrap();
        assert_eq!(bank.evaluate_stage(&test, &InferenceConfig::default()).unwrap().accuracy, 100.0);
        test.push(11, &[1.0, 0.0]).unwrap();
        let eval = bank.evaluate_stage(&test, &InferenceConfig::default()).unwrap();
        assert_eq!(eval.accuracy, 50.0);
        assert_eq!(eval.selection_accuracy, 100.0);
        let mut wrong = FeatureDataset::new("w", 2).unwrap();
        wrong.push(12, &[1.0, 0.0]).unwrap();
        assert_eq!(bank.evaluate_stage(&wrong, &InferenceConfig::default()).unwrap().accuracy, 0.0);
        let empty = FeatureDataset::new("e", 2).unwrap();
        assert_eq!(bank.evaluate_stage(&empty, &InferenceConfig::default()), Err(Error::EmptyDataset));
        let mut foreign = FeatureDataset::new("f", 2).unwrap();
        foreign.push(99, &[1.0, 0.0]).unwrap();
        assert!(bank.evaluate_stage(&foreign, &InferenceConfig::default()).is_err());
    }

    #[test]
    fn orthogonality_examples() {
        let cfg = LucaConfig::default();
        let a = LucaModule::init(4, 2, cfg, 1).unwrap();
        let mut bank = ModuleBank::new(4).unwrap();
        bank.push(a.clone(), SessionHead::zeros(4, alloc::vec![0]).unwrap()).unwrap();
        assert_eq!(bank.module_orthogonality(), Err(Error::TooFewEntries));
        bank.push(a, SessionHead::zeros(4, alloc::vec![1]).unwrap()).unwrap();
        assert!((bank.module_orthogonality().unwrap() - 1.0).abs() < 1e-12);

        let mut left = LucaModule::zeros(4, 2, cfg).unwrap();
        left.w_down.as_mut_slice().fill(0.3);
        let mut right = LucaModule::zeros(4, 2, cfg).unwrap();
        right.v_up.as_mut_slice().fill(-0.7);
        let mut disjoint = ModuleBank::new(4).unwrap();
        disjoint.push(left, SessionHead::zeros(4, alloc::vec![0]).unwrap()).unwrap();
        disjoint.push(right, SessionHead::zeros(4, alloc::vec![1]).unwrap()).unwrap();
        assert_eq!(disjoint.module_orthogonality().unwrap(), 0.0);
    }

    fn toy_sessions() -> (FeatureDataset, FeatureDataset, Vec<Vec<u32>>) {
        let cfg = SynthConfig { dim: 8, num_classes: 6, n_train: 40, n_test: 10, seed: 21, ..Default::default() };
        let (train, test) = synth_gaussian(&cfg).unwrap();
        (train, test, alloc::vec![alloc::vec![0, 1], alloc::vec![2, 3], alloc::vec![4, 5]])
    }

    fn small_cfg() -> TrainConfig {
        TrainConfig { rank: 4, ..TrainConfig::default() }
    }

    #[test]
    fn sessions_append_and_freeze_the_past() {
        let (train, _, stages) = toy_sessions();
        let mut bank = ModuleBank::new(8).unwrap();
        for (b, stage) in stages.iter().enumerate() {
            let before: Vec<BankEntry> = bank.entries().to_vec();
            bank.train_session(&train.subset(stage), stage, &small_cfg(), 100 + b as u64).unwrap();
            assert_eq!(bank.len(), b + 1);
            assert_eq!(&bank.entries()[..b], &before[..]);
            let added = bank.entries()[b].trainable_params();
            assert_eq!(added, 4 * 8 * 4 + 8 * stage.len());
        }
        let err = bank.train_session(&train.subset(&[0]), &[0], &small_cfg(), 1);
        assert_eq!(err, Err(Error::OverlappingClasses(0)));
        let empty = FeatureDataset::new("e", 8).unwrap();
        assert_eq!(bank.train_session(&empty, &[9], &small_cfg(), 1), Err(Error::EmptyDataset));
    }

    #[test]
    fn training_ignores_earlier_sessions_data() {
        let (train, _, stages) = toy_sessions();
        let mut with_history = ModuleBank::new(8).unwrap();
        with_history.train_session(&train.subset(&stages[0]), &stages[0], &small_cfg(), 1).unwrap();
        let mut later = with_history.clone();
        // The full dataset is dropped before session 2; only its slice survives.
        let session_two = train.subset(&stages[1]);
        drop(train);
        later.train_session(&session_two, &stages[1], &small_cfg(), 2).unwrap();
        let mut fresh = ModuleBank::new(8).unwrap();
        fresh.train_session(&session_two, &stages[1], &small_cfg(), 2).unwrap();
        assert_eq!(later.entries()[1].module, fresh.entries()[0].module);
        assert_eq!(later.entries()[1].head, fresh.entries()[0].head);
    }

    struct CountingSource<'a>(&'a Cell<usize>);

    impl FeatureSource for CountingSource<'_> {
        type Input = [f32];
        fn embed(&self, input: &[f32]) -> Vec<f32> {
            self.0.set(self.0.get() + 1);
            input.to_vec()
        }
    }

    #[test]
    fn feature_is_extracted_once_per_sample() {
        let (train, test, stages) = toy_sessions();
        let mut bank = ModuleBank::new(8).unwrap();
        for (b, stage) in stages.iter().enumerate() {
            bank.train_session(&train.subset(stage), stage, &small_cfg(), b as u64).unwrap();
        }
        let calls = Cell::new(0);
        let source = CountingSource(&calls);
        for (_, x) in test.iter() {
            bank.predict_from(&source, x, &InferenceConfig::default()).unwrap();
        }
        assert_eq!(calls.get(), test.len());
        let direct = bank.predict_from(&StoredFeatures, test.features(0), &InferenceConfig::default()).unwrap();
        assert_eq!(direct, bank.predict(test.features(0), &InferenceConfig::default()).unwrap());
    }

    #[test]
    fn stage_metrics_match_brute_force_routing() {
        let (train, test, stages) = toy_sessions();
        let mut bank = ModuleBank::new(8).unwrap();
        for (b, stage) in stages.iter().enumerate() {
            bank.train_session(&train.subset(stage), stage, &small_cfg(), b as u64).unwrap();
        }
        let eval = bank.evaluate_stage(&test, &InferenceConfig::default()).unwrap();
        // Recompute routing by hand: all sessions have equal size, so raw
        // entropies are compared and the first minimum wins.
        let (mut correct, mut routed) = (0, 0);
        for (label, x) in test.iter() {
            let mut best: Option<(usize, f64)> = None;
            for (i, e) in bank.entries().iter().enumerate() {
                let p = e.distribution(x).unwrap();
                let h: f64 = p.as_slice().iter().filter(|&&v| v > 0.0).map(|v| -v * v.ln()).sum();
                if best.map_or(true, |(_, b)| h < b) {
                    best = Some((i, h));
                }
            }
            let entry = &bank.entries()[best.unwrap().0];
            routed += usize::from(entry.class_ids().contains(&label));
            let p = entry.distribution(x).unwrap();
            correct += usize::from(entry.head.best_class(p.as_slice()) == label);
        }
        let n = test.len() as f64;
        assert!((eval.accuracy - 100.0 * correct as f64 / n).abs() < 1e-9);
        assert!((eval.selection_accuracy - 100.0 * routed as f64 / n).abs() < 1e-9);
        assert!(eval.selection_accuracy >= 50.0);
    }

    #[test]
    fn duplicate_module_never_changes_the_class() {
        let (train, test, stages) = toy_sessions();
        let mut bank = ModuleBank::new(8).unwrap();
        for (b, stage) in stages.iter().enumerate() {
            bank.train_session(&train.subset(stage), stage, &small_cfg(), b as u64).unwrap();
        }
        let cfg = InferenceConfig::default();
        for copy_of in 0..bank.len() {
            let mut extended = bank.clone();
            let src = &bank.entries()[copy_of];
            let relabeled: Vec<u32> = src.class_ids().iter().map(|c| c + 1000).collect();
            let head = SessionHead::new(src.head.weights.clone(), relabeled).unwrap();
            extended.push(src.module.clone(), head).unwrap();
            for (_, x) in test.iter() {
                assert_eq!(bank.predict(x, &cfg).unwrap().class_id, extended.predict(x, &cfg).unwrap().class_id);
            }
        }
    }

    #[test]
    fn drift_and_sparsity_reporting() {
        let (train, test, stages) = toy_sessions();
        let mut bank = ModuleBank::new(8).unwrap();
        bank.train_session(&train.subset(&stages[0]), &stages[0], &small_cfg(), 0).unwrap();
        let drift = bank.feature_drift(&test).unwrap();
        assert_eq!(drift.len(), 1);
        assert!(drift[0].is_finite() && drift[0] > 0.0);
        let s = bank.sparsity_ratio(1e-3);
        assert!((0.0..=1.0).contains(&s));
        assert_eq!(s, bank.entries()[0].module.sparsity_ratio(1e-3));
    }
}
