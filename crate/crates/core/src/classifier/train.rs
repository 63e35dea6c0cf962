use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{argmax, ClassifierConfig, ClassifierModel};
use crate::autodiff::{Adam, Gradients, Graph};
use crate::corpus::{Dataset, LabeledExample, TokenId};
use crate::error::Result;
use crate::exec;
use crate::metrics;
use crate::rng;
use crate::tokenizers::Tokenizer;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    /// 1-based.
    pub epoch: usize,
    pub train_loss: f64,
    pub valid_macro_f1: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub epochs: Vec<EpochLog>,
    pub best_epoch: Option<usize>,
}

impl TrainingLog {
    pub fn best_valid_f1(&self) -> Option<f64> {
        let best = self.best_epoch?;
        self.epochs.iter().find(|e| e.epoch == best).map(|e| e.valid_macro_f1)
    }
}

/// Deterministically tokenized predictions for a split.
pub fn predict_split(model: &ClassifierModel, tokenizer: &Tokenizer, examples: &[LabeledExample]) -> Result<Vec<usize>> {
    exec::map(examples, |ex| {
        let chars = ex.chars();
        let seg = tokenizer.encode(&chars);
        Ok(argmax(&model.predict(&chars, &seg)?))
    })
    .into_iter()
    .collect()
}

/// Macro-F1 of [`predict_split`].
pub fn evaluate_split(model: &ClassifierModel, tokenizer: &Tokenizer, examples: &[LabeledExample]) -> Result<f64> {
    let pred = predict_split(model, tokenizer, examples)?;
    let gold: Vec<usize> = examples.iter().map(|e| e.label).collect();
    metrics::macro_f1(&pred, &gold, model.num_labels())
}

/// Train with stochastic tokenization, select the epoch with the best
/// validation macro-F1 (deterministic tokenization). Ties keep the earlier
/// epoch.
pub fn train_classifier(
    config: &ClassifierConfig,
    dataset: &Dataset,
    tokenizer: &Tokenizer,
    seed: u64,
) -> Result<(ClassifierModel, TrainingLog)> {
    config.validate()?;
    let mut model = ClassifierModel::new(
        config.clone(),
        tokenizer.vocab().clone(),
        dataset.num_labels,
        &mut rng::stream(seed, "classifier.init", 0),
    )?;
    let mut log = TrainingLog::default();
    if config.epochs == 0 {
        return Ok((model, log));
    }
    let mut adam = Adam::new(model.params(), config.adam);
    let mut best: Option<(f64, crate::autodiff::ParamSet)> = None;
    let sampling = config.sampling;
    for epoch in 1..=config.epochs {
        let inputs: Vec<Vec<TokenId>> = exec::map(&dataset.train, |ex| {
            let chars = ex.chars();
            let mut r = rng::stream(seed, "classifier.tokenize", ((epoch as u64) << 40) | ex.id);
            let seg = tokenizer.sample(&chars, sampling, &mut r);
            model.token_ids(&chars, &seg)
        });
        let mut order: Vec<usize> = (0..dataset.train.len()).collect();
        order.shuffle(&mut rng::stream(seed, "classifier.shuffle", epoch as u64));
        let mut total_loss = 0.0;
        for batch in order.chunks(config.batch_size) {
            let mut grads = Gradients::zeros_like(model.params());
            for &i in batch {
                if inputs[i].is_empty() {
                    continue;
                }
                let mut g = Graph::new(model.params());
                let loss = model.loss_var(&mut g, &inputs[i], dataset.train[i].label)?;
                total_loss += g.value(loss).item();
                g.backward_into(loss, &mut grads)?;
            }
            grads.scale(1.0 / batch.len() as f64);
            adam.step(model.params_mut(), &mut grads);
        }
        let valid_f1 = evaluate_split(&model, tokenizer, &dataset.valid)?;
        log.epochs.push(EpochLog {
            epoch,
            train_loss: total_loss / dataset.train.len().max(1) as f64,
            valid_macro_f1: valid_f1,
        });
        if best.as_ref().map_or(true, |(f, _)| valid_f1 > *f) {
            best = Some((valid_f1, model.params().clone()));
            log.best_epoch = Some(epoch);
        }
    }
    if let Some((_, params)) = best {
        *model.params_mut() = params;
    }
    Ok((model, log))
}
