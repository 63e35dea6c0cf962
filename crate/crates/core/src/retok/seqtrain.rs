use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Adam, AdamConfig, Gradients, Graph, ParamSet, Var};
use crate::error::{Error, Result};
use crate::exec;
use crate::lattice::Segmentation;
use crate::metrics;
use crate::rng;

/// Optimization settings shared by the two neural tokenizers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Stop once reproducibility accuracy has not improved for this many
    /// epochs; `None` always runs `epochs`.
    pub patience: Option<usize>,
    pub batch_size: usize,
    pub adam: AdamConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 200,
            patience: Some(20),
            batch_size: 16,
            adam: AdamConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if self.patience == Some(0) {
            return Err(Error::Config("patience must be positive when set".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub mean_loss: f64,
    /// BI-tag accuracy of the model's own output against the training data.
    pub accuracy: f64,
}

pub(crate) struct Example {
    pub chars: Vec<char>,
    pub gold: Segmentation,
}

pub(crate) trait SeqModel: Sync {
    fn params(&self) -> &ParamSet;
    fn params_mut(&mut self) -> &mut ParamSet;
    /// `None` when the example contributes nothing to the loss.
    fn example_loss(&self, g: &mut Graph, ex: &Example) -> Result<Option<Var>>;
    fn tokenize(&self, chars: &[char]) -> Segmentation;
}

pub(crate) fn reproducibility<M: SeqModel>(model: &M, data: &[Example]) -> Result<f64> {
    let pairs = exec::map(data, |ex| (model.tokenize(&ex.chars), ex.gold.clone()));
    metrics::corpus_bi_tag_accuracy(&pairs)
}

/// Minibatch Adam over `data`; returns one record per completed epoch.
pub(crate) fn train<M: SeqModel>(
    model: &mut M,
    data: &[Example],
    config: &TrainConfig,
    seed: u64,
    component: &str,
) -> Result<Vec<EpochRecord>> {
    config.validate()?;
    let mut log = Vec::new();
    if config.epochs == 0 {
        return Ok(log);
    }
    let mut adam = Adam::new(model.params(), config.adam);
    let mut best = (f64::NEG_INFINITY, 0usize);
    for epoch in 1..=config.epochs {
        let mut order: Vec<usize> = (0..data.len()).collect();
        order.shuffle(&mut rng::stream(seed, component, epoch as u64));
        let mut total = 0.0;
        for batch in order.chunks(config.batch_size) {
            let mut grads = Gradients::zeros_like(model.params());
            for &i in batch {
                let mut g = Graph::new(model.params());
                if let Some(loss) = model.example_loss(&mut g, &data[i])? {
                    total += g.value(loss).item();
                    g.backward_into(loss, &mut grads)?;
                }
            }
            grads.scale(1.0 / batch.len() as f64);
            adam.step(model.params_mut(), &mut grads);
        }
        let accuracy = reproducibility(model, data)?;
        log.push(EpochRecord {
            epoch,
            mean_loss: total / data.len().max(1) as f64,
            accuracy,
        });
        if accuracy > best.0 {
            best = (accuracy, epoch);
        }
        if let Some(p) = config.patience {
            if epoch - best.1 >= p {
                break;
            }
        }
    }
    Ok(log)
}
