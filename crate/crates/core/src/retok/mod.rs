//! Minimum-loss retokenization: harvest the best candidate tokenization of
//! every training sentence under a frozen classifier, and fit tokenizers
//! that reproduce the harvested data.

mod bitag;
mod candidates;
mod records;
mod seqtrain;
mod span;
mod unigram_opt;

pub use bitag::{bitag_tokenize, train_bitag, BiTagConfig, BiTagTokenizer, TAG_B, TAG_I};
pub use candidates::{
    collect_best, collect_with_baseline, generate_candidates, oracle_select, select_best, Candidate, CandidateOptions, CandidateSet,
    OracleResult,
};
pub use records::{RetokDataset, RetokRecord};
pub use seqtrain::{EpochRecord, TrainConfig};
pub use span::{span_tokenize, train_span_tokenizer, SpanConfig, SpanScores, SpanTokenizer};
pub use unigram_opt::{build_unigram_opt, BACKOFF_COUNT};
