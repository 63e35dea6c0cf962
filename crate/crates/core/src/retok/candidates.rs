use serde::{Deserialize, Serialize};

use super::records::{RetokDataset, RetokRecord};
use crate::classifier::{argmax, ClassifierModel};
use crate::corpus::LabeledExample;
use crate::error::{Error, Result};
use crate::exec;
use crate::lattice::Segmentation;
use crate::metrics;
use crate::rng;
use crate::tokenizers::{CandidateMode, Sampling, Tokenizer};

/// How candidates are generated for every sentence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CandidateOptions {
    pub n: usize,
    pub mode: CandidateMode,
    pub sampling: Sampling,
    pub dedup: bool,
}

impl Default for CandidateOptions {
    fn default() -> Self {
        CandidateOptions {
            n: 100,
            mode: CandidateMode::Nbest,
            sampling: Sampling::default(),
            dedup: true,
        }
    }
}

impl CandidateOptions {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Config("candidates: n must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub segmentation: Segmentation,
    pub loss: f64,
    /// Position in the generated list: the n-best rank, or the draw order
    /// for sampled candidates (0 is the deterministic tokenization).
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet {
    pub sentence_id: u64,
    pub n_requested: usize,
    pub candidates: Vec<Candidate>,
}

impl CandidateSet {
    /// Index of the smallest loss; ties go to the lower index.
    pub fn best_index(&self) -> usize {
        select_best(self.candidates.iter().map(|c| c.loss))
    }

    pub fn best(&self) -> &Candidate {
        &self.candidates[self.best_index()]
    }
}

/// Argmin with ties resolved towards the lower index.
pub fn select_best(losses: impl IntoIterator<Item = f64>) -> usize {
    let mut best = (0, f64::INFINITY);
    for (i, l) in losses.into_iter().enumerate() {
        if l < best.1 {
            best = (i, l);
        }
    }
    best.0
}

/// Candidates for one sentence with losses left at NaN. The random stream
/// depends only on `seed` and the sentence id, so a larger `n` extends the
/// candidate list of a smaller one.
pub fn generate_candidates(
    example: &LabeledExample,
    tokenizer: &Tokenizer,
    options: &CandidateOptions,
    seed: u64,
) -> CandidateSet {
    let chars = example.chars();
    let mut r = rng::stream(seed, "candidates", example.id);
    let segs = tokenizer.candidates(&chars, options.n, options.mode, options.sampling, options.dedup, &mut r);
    CandidateSet {
        sentence_id: example.id,
        n_requested: options.n,
        candidates: segs
            .into_iter()
            .enumerate()
            .map(|(rank, segmentation)| Candidate {
                segmentation,
                loss: f64::NAN,
                rank,
            })
            .collect(),
    }
}

fn scored_candidates(
    example: &LabeledExample,
    model: &ClassifierModel,
    tokenizer: &Tokenizer,
    options: &CandidateOptions,
    seed: u64,
) -> Result<CandidateSet> {
    let chars = example.chars();
    let mut set = generate_candidates(example, tokenizer, options, seed);
    for c in &mut set.candidates {
        c.loss = model.classify_loss(&chars, &c.segmentation, example.label)?;
    }
    Ok(set)
}

/// Build D̂′: for every training sentence keep the candidate with the lowest
/// classifier loss.
pub fn collect_best(
    train: &[LabeledExample],
    model: &ClassifierModel,
    tokenizer: &Tokenizer,
    options: &CandidateOptions,
    seed: u64,
) -> Result<RetokDataset> {
    Ok(collect_with_baseline(train, model, tokenizer, options, seed)?.0)
}

/// [`collect_best`] plus the loss of every sentence's deterministic tokenization.
pub fn collect_with_baseline(
    train: &[LabeledExample],
    model: &ClassifierModel,
    tokenizer: &Tokenizer,
    options: &CandidateOptions,
    seed: u64,
) -> Result<(RetokDataset, Vec<f64>)> {
    options.validate()?;
    let records = exec::map(train, |ex| -> Result<(RetokRecord, f64)> {
        let set = scored_candidates(ex, model, tokenizer, options, seed)?;
        let best = set.best();
        let chars = ex.chars();
        let record = RetokRecord {
            id: ex.id,
            text: ex.text.clone(),
            tokens: best.segmentation.tokens(&chars),
            spans: best.segmentation.spans().to_vec(),
            loss: best.loss,
            label: ex.label,
            n_candidates: set.candidates.len(),
        };
        Ok((record, set.candidates[0].loss))
    });
    let (records, baseline) = records.into_iter().collect::<Result<Vec<_>>>()?.into_iter().unzip();
    Ok((RetokDataset { records }, baseline))
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub segmentations: Vec<Segmentation>,
    pub losses: Vec<f64>,
    /// Loss of the deterministic tokenization, per sentence.
    pub deterministic_losses: Vec<f64>,
    pub predictions: Vec<usize>,
    pub macro_f1: f64,
}

/// Per-sentence minimum-loss candidate on a labelled evaluation split.
pub fn oracle_select(
    examples: &[LabeledExample],
    model: &ClassifierModel,
    tokenizer: &Tokenizer,
    options: &CandidateOptions,
    seed: u64,
) -> Result<OracleResult> {
    options.validate()?;
    let picked = exec::map(examples, |ex| -> Result<(Segmentation, f64, f64, usize)> {
        let set = scored_candidates(ex, model, tokenizer, options, seed)?;
        let best = set.best();
        let chars = ex.chars();
        let pred = argmax(&model.predict(&chars, &best.segmentation)?);
        Ok((best.segmentation.clone(), best.loss, set.candidates[0].loss, pred))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let gold: Vec<usize> = examples.iter().map(|e| e.label).collect();
    let predictions: Vec<usize> = picked.iter().map(|p| p.3).collect();
    let macro_f1 = metrics::macro_f1(&predictions, &gold, model.num_labels())?;
    let mut out = OracleResult {
        segmentations: Vec::with_capacity(picked.len()),
        losses: Vec::with_capacity(picked.len()),
        deterministic_losses: Vec::with_capacity(picked.len()),
        predictions,
        macro_f1,
    };
    for (seg, loss, det, _) in picked {
        out.segmentations.push(seg);
        out.losses.push(loss);
        out.deterministic_losses.push(det);
    }
    Ok(out)
}
