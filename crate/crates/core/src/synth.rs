//! Seeded generator for the planted-ambiguity classification corpus.
//!
//! Sentences are words built from consonant-vowel syllables. A handful of
//! one-syllable function words are very frequent, and every signal word is
//! the concatenation of two of them, so a unigram model trained on the
//! corpus prefers splitting a signal into its two function words even though
//! the whole signal is frequent enough to be a vocabulary entry. Each sentence
//! carries exactly one signal, drawn from the set of its label; which pair
//! of function words forms the signal is what decides the label.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Dataset, LabeledExample};
use crate::error::{Error, Result};
use crate::rng;

const CONSONANTS: &[char] = &['k', 's', 't', 'n', 'm', 'r', 'l', 'p'];
const VOWELS: &[char] = &['a', 'e', 'i', 'o', 'u'];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthSpec {
    pub train: usize,
    pub valid: usize,
    pub test: usize,
    pub num_labels: usize,
    /// One-syllable words; signals are ordered pairs of distinct ones.
    pub function_words: usize,
    pub signals_per_label: usize,
    /// Distractor lexicon size (words of two or more syllables).
    pub content_words: usize,
    pub max_word_syllables: usize,
    /// Distractor words per sentence, besides the signal.
    pub min_words: usize,
    pub max_words: usize,
    /// Probability that a distractor slot holds a function word.
    pub function_prob: f64,
    /// Probability that the signal is written without a space next to a neighbour.
    pub glue_prob: f64,
    /// Probability that a sentence's label is replaced by a different one.
    pub label_noise: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            train: 2000,
            valid: 500,
            test: 500,
            num_labels: 2,
            function_words: 4,
            signals_per_label: 6,
            content_words: 80,
            max_word_syllables: 3,
            min_words: 4,
            max_words: 8,
            function_prob: 0.8,
            glue_prob: 0.0,
            label_noise: 0.05,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("synth: {m}")));
        if self.train == 0 || self.valid == 0 || self.test == 0 {
            return bad("every split needs at least one sentence");
        }
        if self.num_labels < 2 || self.signals_per_label == 0 {
            return bad("need two labels and one signal per label");
        }
        let syllables = CONSONANTS.len() * VOWELS.len();
        if self.function_words < 2 || self.function_words > syllables / 2 {
            return bad("function_words must be between 2 and half the syllable inventory");
        }
        if self.num_labels * self.signals_per_label > self.function_words * (self.function_words - 1) {
            return bad("too many signals for the number of function words");
        }
        if self.content_words == 0 || self.max_word_syllables < 2 {
            return bad("need content words of two or more syllables");
        }
        if self.min_words > self.max_words {
            return bad("min_words must not exceed max_words");
        }
        for (name, p) in [("function_prob", self.function_prob), ("glue_prob", self.glue_prob)] {
            if !(0.0..=1.0).contains(&p) {
                return bad(&format!("{name} must be in [0, 1]"));
            }
        }
        if !(0.0..1.0).contains(&self.label_noise) {
            return bad("label_noise must be in [0, 1)");
        }
        Ok(())
    }
}

/// The generated dataset and the signal words of every label.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub dataset: Dataset,
    pub signals: Vec<Vec<String>>,
}

fn syllables() -> Vec<String> {
    let mut out = Vec::new();
    for c in CONSONANTS {
        for v in VOWELS {
            out.push(format!("{c}{v}"));
        }
    }
    out
}

fn count_occurrences(text: &str, needle: &str) -> usize {
    (0..text.len()).filter(|&i| text[i..].starts_with(needle)).count()
}

struct Generator<'a> {
    spec: &'a SynthSpec,
    function: Vec<String>,
    content: Vec<String>,
    signals: Vec<Vec<String>>,
}

impl Generator<'_> {
    fn distractor<R: Rng>(&self, rng: &mut R) -> &str {
        if rng.gen::<f64>() < self.spec.function_prob {
            self.function.choose(rng).unwrap()
        } else {
            self.content.choose(rng).unwrap()
        }
    }

    /// One sentence containing exactly one signal occurrence, the planted one.
    fn sentence<R: Rng>(&self, label: usize, rng: &mut R) -> String {
        let all: Vec<&String> = self.signals.iter().flatten().collect();
        loop {
            let signal = self.signals[label].choose(rng).unwrap();
            let n = rng.gen_range(self.spec.min_words..=self.spec.max_words);
            let mut words: Vec<&str> = (0..n).map(|_| self.distractor(rng)).collect();
            let at = rng.gen_range(0..=words.len());
            words.insert(at, signal);
            let mut text = String::new();
            let glue = rng.gen::<f64>() < self.spec.glue_prob;
            let glue_left = rng.gen::<bool>();
            for (i, w) in words.iter().enumerate() {
                let joined = glue && ((glue_left && i == at && at > 0) || (!glue_left && i == at + 1));
                if i > 0 && !joined {
                    text.push(' ');
                }
                text.push_str(w);
            }
            let total: usize = all.iter().map(|s| count_occurrences(&text, s)).sum();
            if total == 1 {
                return text;
            }
        }
    }

    fn split<R: Rng>(&self, size: usize, rng: &mut R) -> Vec<LabeledExample> {
        (0..size)
            .map(|i| {
                let label = i % self.spec.num_labels;
                let text = self.sentence(label, rng);
                let label = if rng.gen::<f64>() < self.spec.label_noise {
                    (label + rng.gen_range(1..self.spec.num_labels)) % self.spec.num_labels
                } else {
                    label
                };
                LabeledExample { text, label, id: 0 }
            })
            .collect()
    }
}

/// Generate the corpus for `seed`.
pub fn generate(spec: &SynthSpec, seed: u64) -> Result<SynthCorpus> {
    spec.validate()?;
    let mut inventory = syllables();
    let mut r = rng::stream(seed, "synth.lexicon", 0);
    inventory.shuffle(&mut r);
    let function: Vec<String> = inventory[..spec.function_words].to_vec();
    let rest = &inventory[spec.function_words..];

    let mut pairs: Vec<String> = Vec::new();
    for a in &function {
        for b in &function {
            if a != b {
                pairs.push(format!("{a}{b}"));
            }
        }
    }
    pairs.shuffle(&mut r);
    let signals: Vec<Vec<String>> = pairs
        .chunks(spec.signals_per_label)
        .take(spec.num_labels)
        .map(|c| c.to_vec())
        .collect();

    // content words never contain a signal or a function word
    let mut content: Vec<String> = Vec::new();
    let mut attempts = 0usize;
    while content.len() < spec.content_words {
        attempts += 1;
        if attempts > 1000 * spec.content_words {
            return Err(Error::Config("synth: cannot build the content lexicon".into()));
        }
        let k = r.gen_range(2..=spec.max_word_syllables);
        let w: String = (0..k).map(|_| rest.choose(&mut r).unwrap().as_str()).collect();
        if content.contains(&w) || pairs.iter().any(|p| w.contains(p.as_str())) {
            continue;
        }
        content.push(w);
    }

    let g = Generator {
        spec,
        function,
        content,
        signals,
    };
    let make = |name: &str, size: usize| g.split(size, &mut rng::stream(seed, name, 0));
    let train = make("synth.train", spec.train);
    let valid = make("synth.valid", spec.valid);
    let test = make("synth.test", spec.test);
    let mut dataset = Dataset::from_splits(train, valid, test, Some(spec.num_labels))?;
    for (k, split) in [&mut dataset.train, &mut dataset.valid, &mut dataset.test].into_iter().enumerate() {
        split.shuffle(&mut rng::stream(seed, "synth.order", k as u64));
    }
    Ok(SynthCorpus {
        dataset,
        signals: g.signals,
    })
}
