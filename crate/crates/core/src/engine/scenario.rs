use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{InferenceConfig, ModuleBank, TrainConfig};
use crate::data::{FeatureDataset, SplitPlan};
use crate::error::{Error, Result};
use crate::heads::{build_prototypes, SessionHead};
use crate::luca::LucaModule;
use crate::optim::train_epochs;
use crate::rng;

/// Threshold used for the sparsity figures in reports.
pub const SPARSITY_THRESHOLD: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    /// One module and head per session, entropy-based selection.
    #[serde(rename = "tosca")]
    Tosca,
    /// Same with the calibrator applied before the adapter.
    #[serde(rename = "tosca_r")]
    ToscaR,
    /// One shared module and a growing head, trained session by session.
    #[serde(rename = "finetune")]
    Finetune,
    /// One module and head trained once on every session's data.
    #[serde(rename = "joint")]
    Joint,
    /// Cosine nearest class mean on the raw frozen features.
    #[serde(rename = "simplecil")]
    SimpleCil,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Tosca, Method::ToscaR, Method::Finetune, Method::Joint, Method::SimpleCil];

    pub fn name(self) -> &'static str {
        match self {
            Method::Tosca => "tosca",
            Method::ToscaR => "tosca_r",
            Method::Finetune => "finetune",
            Method::Joint => "joint",
            Method::SimpleCil => "simplecil",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::UnknownMethod(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub train: TrainConfig,
    pub inference: InferenceConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    /// 1-based stage index.
    pub index: usize,
    #[serde(rename = "A_b")]
    pub accuracy: f64,
    /// Only defined for methods that route between sessions.
    pub selection_accuracy: Option<f64>,
    pub classes_seen: usize,
    pub params_added: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub method: Method,
    pub seed: u64,
    pub rng: String,
    pub config: ScenarioConfig,
    pub splits: SplitPlan,
    pub stages: Vec<StageReport>,
    #[serde(rename = "A_bar")]
    pub average_accuracy: f64,
    /// Final-stage routing accuracy, where defined.
    pub selection_accuracy: Option<f64>,
    /// Mean trainable parameters added per stage.
    pub params_per_task: f64,
    pub sparsity_ratio: Option<f64>,
    pub orthogonality: Option<f64>,
    /// Mean `||L_b(x) - x|| / ||x||` per session.
    pub feature_drift: Vec<f64>,
    pub wall_time_s: f64,
}

impl ScenarioReport {
    pub fn final_accuracy(&self) -> f64 {
        self.stages.last().map_or(0.0, |s| s.accuracy)
    }

    /// Recomputes `A_bar` as the mean of the per-stage accuracies.
    pub fn average_of(stages: &[StageReport]) -> f64 {
        if stages.is_empty() {
            return 0.0;
        }
        stages.iter().map(|s| s.accuracy).sum::<f64>() / stages.len() as f64
    }
}

#[derive(Debug, Clone)]
pub struct ScenarioOutcome {
    pub report: ScenarioReport,
    /// The trained bank, for the per-session methods.
    pub bank: Option<ModuleBank>,
}

/// Runs one class-incremental scenario.
///
/// `wall_time_s` is left at zero; callers with a clock fill it in.
pub fn run_scenario(
    train: &FeatureDataset,
    test: &FeatureDataset,
    splits: &SplitPlan,
    method: Method,
    cfg: &ScenarioConfig,
    seed: u64,
) -> Result<ScenarioOutcome> {
    let classes = train.classes();
    splits.validate(&classes)?;
    if let Some(&c) = test.classes().iter().find(|c| !classes.contains(c)) {
        return Err(Error::LabelOutsideClassSet(c));
    }
    if train.dim() != test.dim() {
        return Err(Error::DimensionMismatch { expected: train.dim(), found: test.dim() });
    }
    cfg.train.optim.validate()?;
    // tosca_r always uses reversed modules; the report records the effective config.
    let mut cfg = cfg.clone();
    if method == Method::ToscaR {
        cfg.train.luca.reversed = true;
    }

    let mut stages = Vec::with_capacity(splits.num_stages());
    let mut bank = None;
    let mut sparsity_ratio = None;
    let mut orthogonality = None;
    let mut feature_drift = Vec::new();

    match method {
        Method::Tosca | Method::ToscaR => {
            let train_cfg = cfg.train;
            let mut b = ModuleBank::new(train.dim())?;
            for (s, stage) in splits.stages.iter().enumerate() {
                b.train_session(&train.subset(stage), stage, &train_cfg, rng::session_seed(seed, s))?;
                let seen = splits.seen_through(s);
                let eval = b.evaluate_stage(&non_empty(test.subset(&seen))?, &cfg.inference)?;
                stages.push(StageReport {
                    index: s + 1,
                    accuracy: eval.accuracy,
                    selection_accuracy: Some(eval.selection_accuracy),
                    classes_seen: seen.len(),
                    params_added: b.entries()[s].trainable_params(),
                });
            }
            sparsity_ratio = Some(b.sparsity_ratio(SPARSITY_THRESHOLD));
            orthogonality = b.module_orthogonality().ok();
            feature_drift = b.feature_drift(test)?;
            bank = Some(b);
        }
        Method::Finetune => {
            let tc = &cfg.train;
            let mut module = LucaModule::init(train.dim(), tc.rank, tc.luca, rng::derive_seed(seed, rng::stream::INIT))?;
            let mut head: Option<SessionHead> = None;
            for (s, stage) in splits.stages.iter().enumerate() {
                let params_before = head.as_ref().map_or(0, |h| h.param_count());
                let h = match head.as_mut() {
                    Some(h) => {
                        h.extend_classes(stage)?;
                        h
                    }
                    None => head.insert(SessionHead::zeros(train.dim(), stage.clone())?),
                };
                let mut shuffle = rng::seeded(rng::derive_seed(rng::session_seed(seed, s), rng::stream::SHUFFLE));
                train_epochs(&mut module, h, &train.subset(stage), &tc.optim, &mut shuffle)?;
                let seen = splits.seen_through(s);
                let accuracy = head_accuracy(&module, h, &non_empty(test.subset(&seen))?)?;
                let added = h.param_count() - params_before + if s == 0 { module.param_count() } else { 0 };
                stages.push(StageReport {
                    index: s + 1,
                    accuracy,
                    selection_accuracy: None,
                    classes_seen: seen.len(),
                    params_added: added,
                });
            }
            sparsity_ratio = Some(module.sparsity_ratio(SPARSITY_THRESHOLD));
        }
        Method::Joint => {
            let tc = &cfg.train;
            let all: Vec<u32> = splits.stages.iter().flatten().copied().collect();
            let mut module = LucaModule::init(train.dim(), tc.rank, tc.luca, rng::derive_seed(seed, rng::stream::INIT))?;
            let mut head = SessionHead::zeros(train.dim(), all.clone())?;
            let mut shuffle = rng::seeded(rng::derive_seed(seed, rng::stream::SHUFFLE));
            train_epochs(&mut module, &mut head, &train.subset(&all), &tc.optim, &mut shuffle)?;
            for s in 0..splits.num_stages() {
                let seen = splits.seen_through(s);
                let restricted = restrict_head(&head, &seen)?;
                let accuracy = head_accuracy(&module, &restricted, &non_empty(test.subset(&seen))?)?;
                stages.push(StageReport {
                    index: s + 1,
                    accuracy,
                    selection_accuracy: None,
                    classes_seen: seen.len(),
                    params_added: if s == 0 { module.param_count() + head.param_count() } else { 0 },
                });
            }
            sparsity_ratio = Some(module.sparsity_ratio(SPARSITY_THRESHOLD));
        }
        Method::SimpleCil => {
            for s in 0..splits.num_stages() {
                let seen = splits.seen_through(s);
                let protos = build_prototypes(&train.subset(&seen))?;
                let test_seen = non_empty(test.subset(&seen))?;
                let mut correct = 0usize;
                for (label, x) in test_seen.iter() {
                    correct += usize::from(protos.classify(x)? == label);
                }
                stages.push(StageReport {
                    index: s + 1,
                    accuracy: 100.0 * correct as f64 / test_seen.len() as f64,
                    selection_accuracy: None,
                    classes_seen: seen.len(),
                    params_added: 0,
                });
            }
        }
    }

    let average_accuracy = ScenarioReport::average_of(&stages);
    let params_per_task = stages.iter().map(|s| s.params_added as f64).sum::<f64>() / stages.len() as f64;
    let selection_accuracy = stages.last().and_then(|s| s.selection_accuracy);
    Ok(ScenarioOutcome {
        report: ScenarioReport {
            method,
            seed,
            rng: rng::ALGORITHM.to_string(),
            config: cfg,
            splits: splits.clone(),
            stages,
            average_accuracy,
            selection_accuracy,
            params_per_task,
            sparsity_ratio,
            orthogonality,
            feature_drift,
            wall_time_s: 0.0,
        },
        bank,
    })
}

fn non_empty(ds: FeatureDataset) -> Result<FeatureDataset> {
    if ds.is_empty() {
        Err(Error::EmptyDataset)
    } else {
        Ok(ds)
    }
}

/// Head over the `keep` classes only, columns in `keep` order.
fn restrict_head(head: &SessionHead, keep: &[u32]) -> Result<SessionHead> {
    let cols: Vec<usize> = keep
        .iter()
        .map(|&c| head.column_of(c).ok_or(Error::LabelOutsideClassSet(c)))
        .collect::<Result<_>>()?;
    let w = crate::numerics::Matrix::from_fn(head.dim(), cols.len(), |i, j| head.weights.get(i, cols[j]));
    SessionHead::new(w, keep.to_vec())
}

fn head_accuracy(module: &LucaModule, head: &SessionHead, test: &FeatureDataset) -> Result<f64> {
    let mut correct = 0usize;
    for (label, x) in test.iter() {
        let logits = head.forward(&module.forward(x)?)?;
        correct += usize::from(head.best_class(&logits) == label);
    }
    Ok(100.0 * correct as f64 / test.len() as f64)
}
