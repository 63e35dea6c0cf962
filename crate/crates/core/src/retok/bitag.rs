//! BiLSTM-CRF tagger over characters, trained on the BI tags of D̂′.
//! Nothing restricts its output to the downstream vocabulary.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::seqtrain::{self, EpochRecord, Example, SeqModel, TrainConfig};
use super::span::{examples, NeuralMeta, NEURAL_FORMAT_VERSION};
use super::RetokDataset;
use crate::autodiff::{crf, BiLstm, Graph, Mlp, ParamId, ParamSet, Var};
use crate::corpus::CharTable;
use crate::error::{Error, Result};
use crate::lattice::Segmentation;
use crate::rng;

pub const TAG_B: usize = 0;
pub const TAG_I: usize = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BiTagConfig {
    pub char_dim: usize,
    pub hidden: usize,
    pub train: TrainConfig,
}

impl Default for BiTagConfig {
    fn default() -> Self {
        BiTagConfig {
            char_dim: 128,
            hidden: 256,
            train: TrainConfig::default(),
        }
    }
}

impl BiTagConfig {
    pub fn validate(&self) -> Result<()> {
        if self.char_dim == 0 || self.hidden == 0 {
            return Err(Error::Config("bitag dimensions must be positive".into()));
        }
        self.train.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiTagTokenizer {
    config: BiTagConfig,
    chars: CharTable,
    params: ParamSet,
    embedding: ParamId,
    encoder: BiLstm,
    emission: Mlp,
    transitions: ParamId,
    log: Vec<EpochRecord>,
}

fn tags_of(seg: &Segmentation) -> Vec<usize> {
    seg.bi_tags().into_iter().map(|b| if b { TAG_B } else { TAG_I }).collect()
}

impl BiTagTokenizer {
    pub fn new<R: Rng + ?Sized>(config: BiTagConfig, chars: CharTable, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let mut params = ParamSet::new();
        let embedding = params.add_xavier("embedding", chars.len(), config.char_dim, rng)?;
        let encoder = BiLstm::new(&mut params, "encoder", config.char_dim, config.hidden, rng)?;
        let emission = Mlp::new(&mut params, "emission", &[2 * config.hidden, 2], rng)?;
        let transitions = params.add_zeros("transitions", 2, 2)?;
        Ok(BiTagTokenizer {
            config,
            chars,
            params,
            embedding,
            encoder,
            emission,
            transitions,
            log: Vec::new(),
        })
    }

    pub fn from_params(config: BiTagConfig, chars: CharTable, params: ParamSet) -> Result<Self> {
        config.validate()?;
        let find = |name: &str| {
            params
                .id(name)
                .ok_or_else(|| Error::Schema(format!("missing parameter `{name}`")))
        };
        let embedding = find("embedding")?;
        let transitions = find("transitions")?;
        if params.value(embedding).shape() != (chars.len(), config.char_dim)
            || params.value(transitions).shape() != (2, 2)
        {
            return Err(Error::Shape {
                op: "bitag",
                detail: "embedding or transition shape mismatch".into(),
            });
        }
        let encoder = BiLstm::bind(&params, "encoder", config.char_dim, config.hidden)?;
        let emission = Mlp::bind(&params, "emission", &[2 * config.hidden, 2])?;
        Ok(BiTagTokenizer {
            config,
            chars,
            params,
            embedding,
            encoder,
            emission,
            transitions,
            log: Vec::new(),
        })
    }

    pub fn config(&self) -> &BiTagConfig {
        &self.config
    }

    pub fn char_table(&self) -> &CharTable {
        &self.chars
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn log(&self) -> &[EpochRecord] {
        &self.log
    }

    /// `T × 2` emission scores and the transition matrix.
    pub fn emissions_var(&self, g: &mut Graph, chars: &[char]) -> Result<(Var, Var)> {
        if chars.is_empty() {
            return Err(Error::Invalid("tagging an empty sentence".into()));
        }
        let table = g.param(self.embedding);
        let x = g.row_select(table, &self.chars.encode(chars))?;
        let h = self.encoder.forward(g, x)?.states;
        let e = self.emission.forward(g, h)?;
        Ok((e, g.param(self.transitions)))
    }

    /// CRF negative log-likelihood of the gold BI tags.
    pub fn loss_var(&self, g: &mut Graph, chars: &[char], gold: &Segmentation) -> Result<Var> {
        if gold.char_len() != chars.len() {
            return Err(Error::Invalid("gold segmentation does not cover the sentence".into()));
        }
        let (e, t) = self.emissions_var(g, chars)?;
        g.crf_nll(e, t, &tags_of(gold))
    }

    pub fn tags(&self, chars: &[char]) -> Vec<usize> {
        if chars.is_empty() {
            return Vec::new();
        }
        let mut g = Graph::new(&self.params);
        let (e, t) = self.emissions_var(&mut g, chars).expect("non-empty sentence with a bound model");
        crf::decode(g.value(e), g.value(t))
    }

    pub fn tokenize(&self, chars: &[char]) -> Segmentation {
        let tags: Vec<bool> = self.tags(chars).into_iter().map(|t| t == TAG_B).collect();
        Segmentation::from_bi_tags(&tags)
    }

    pub fn save(&self, dir: &Path, stem: &str) -> Result<()> {
        let meta = NeuralMeta {
            format_version: NEURAL_FORMAT_VERSION,
            kind: "bitag".into(),
            config: self.config,
            vocab: None,
            char_table: self.chars.clone(),
            log: self.log.clone(),
        };
        meta.save(&self.params, dir, stem)
    }

    pub fn load(dir: &Path, stem: &str) -> Result<Self> {
        let (meta, params) = NeuralMeta::<BiTagConfig>::load(dir, stem, "bitag")?;
        let mut tok = Self::from_params(meta.config, meta.char_table, params)?;
        tok.log = meta.log;
        Ok(tok)
    }
}

impl SeqModel for BiTagTokenizer {
    fn params(&self) -> &ParamSet {
        &self.params
    }

    fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    fn example_loss(&self, g: &mut Graph, ex: &Example) -> Result<Option<Var>> {
        self.loss_var(g, &ex.chars, &ex.gold).map(Some)
    }

    fn tokenize(&self, chars: &[char]) -> Segmentation {
        BiTagTokenizer::tokenize(self, chars)
    }
}

pub fn bitag_tokenize(tok: &BiTagTokenizer, chars: &[char]) -> Segmentation {
    tok.tokenize(chars)
}

pub fn train_bitag(data: &RetokDataset, chars: &CharTable, config: &BiTagConfig, seed: u64) -> Result<BiTagTokenizer> {
    let examples = examples(data)?;
    let mut tok = BiTagTokenizer::new(*config, chars.clone(), &mut rng::stream(seed, "bitag.init", 0))?;
    tok.log = seqtrain::train(&mut tok, &examples, &config.train, seed, "bitag.shuffle")?;
    Ok(tok)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bi_conversion() {
        let seg = Segmentation::from_tokens(&["ab", "c"]).unwrap();
        assert_eq!(tags_of(&seg), vec![TAG_B, TAG_I, TAG_B]);
        let c: Vec<char> = "abc".chars().collect();
        let back = Segmentation::from_bi_tags(&[true, true, true]);
        assert_eq!(back.tokens(&c), vec!["a", "b", "c"]);
    }

    #[test]
    fn decode_starts_with_b() {
        let table = CharTable::from_texts(["abc"]);
        let config = BiTagConfig {
            char_dim: 3,
            hidden: 2,
            ..BiTagConfig::default()
        };
        for seed in 0..20 {
            let tok = BiTagTokenizer::new(config, table.clone(), &mut rng::stream(seed, "t", 0)).unwrap();
            let tags = tok.tags(&"abcab".chars().collect::<Vec<_>>());
            assert_eq!(tags[0], TAG_B);
        }
    }

    #[test]
    fn save_load_round_trip() {
        let table = CharTable::from_texts(["abc"]);
        let config = BiTagConfig {
            char_dim: 3,
            hidden: 2,
            ..BiTagConfig::default()
        };
        let tok = BiTagTokenizer::new(config, table, &mut rng::stream(0, "t", 0)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        tok.save(dir.path(), "bt").unwrap();
        assert_eq!(BiTagTokenizer::load(dir.path(), "bt").unwrap(), tok);
        assert!(crate::retok::SpanTokenizer::load(dir.path(), "bt").is_err());
    }
}
