use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type TokenId = u32;

pub const UNK_TOKEN: &str = "<unk>";
pub const PAD_TOKEN: &str = "<pad>";
pub const UNK_ID: TokenId = 0;
pub const PAD_ID: TokenId = 1;
const SPECIALS: usize = 2;

/// Token inventory of a downstream model.
///
/// Ids `0` and `1` are the unknown and padding tokens; every other id is a
/// piece that can be matched against text. When a continuation prefix is
/// set, spans that start inside a word are looked up with the prefix
/// prepended (WordPiece convention).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "VocabularyRepr", into = "VocabularyRepr")]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, TokenId>,
    max_token_chars: usize,
    continuation_prefix: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct VocabularyRepr {
    tokens: Vec<String>,
    continuation_prefix: Option<String>,
}

impl TryFrom<VocabularyRepr> for Vocabulary {
    type Error = Error;

    fn try_from(repr: VocabularyRepr) -> Result<Self> {
        if repr.tokens.len() < SPECIALS || repr.tokens[0] != UNK_TOKEN || repr.tokens[1] != PAD_TOKEN {
            return Err(Error::Schema("vocabulary must start with <unk>, <pad>".into()));
        }
        let len = repr.tokens.len();
        let vocab = Vocabulary::new(repr.tokens.into_iter().skip(SPECIALS), repr.continuation_prefix);
        if vocab.len() != len {
            return Err(Error::Schema("vocabulary contains duplicate or empty tokens".into()));
        }
        Ok(vocab)
    }
}

impl From<Vocabulary> for VocabularyRepr {
    fn from(v: Vocabulary) -> Self {
        VocabularyRepr {
            tokens: v.tokens,
            continuation_prefix: v.continuation_prefix,
        }
    }
}

impl Vocabulary {
    /// Build from pieces in order; duplicates and empty strings are dropped.
    pub fn new<I, S>(pieces: I, continuation_prefix: Option<String>) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut vocab = Vocabulary {
            tokens: Vec::new(),
            index: HashMap::new(),
            max_token_chars: 0,
            continuation_prefix: continuation_prefix.filter(|p| !p.is_empty()),
        };
        vocab.push(UNK_TOKEN.to_string());
        vocab.push(PAD_TOKEN.to_string());
        vocab.max_token_chars = 0;
        for piece in pieces {
            vocab.push(piece.into());
        }
        vocab
    }

    fn push(&mut self, token: String) -> Option<TokenId> {
        if token.is_empty() || self.index.contains_key(&token) {
            return None;
        }
        let id = self.tokens.len() as TokenId;
        let surface = self.surface_len(&token);
        self.max_token_chars = self.max_token_chars.max(surface);
        self.index.insert(token.clone(), id);
        self.tokens.push(token);
        Some(id)
    }

    fn surface_len(&self, token: &str) -> usize {
        let body = match &self.continuation_prefix {
            Some(p) => token.strip_prefix(p.as_str()).filter(|b| !b.is_empty()).unwrap_or(token),
            None => token,
        };
        body.chars().count()
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.len() <= SPECIALS
    }

    /// Number of matchable pieces (excludes specials).
    pub fn num_pieces(&self) -> usize {
        self.tokens.len() - SPECIALS
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn token(&self, id: TokenId) -> &str {
        &self.tokens[id as usize]
    }

    pub fn lookup(&self, token: &str) -> Option<TokenId> {
        self.index.get(token).copied()
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn is_special(id: TokenId) -> bool {
        (id as usize) < SPECIALS
    }

    /// Ids of matchable pieces.
    pub fn piece_ids(&self) -> impl Iterator<Item = TokenId> {
        SPECIALS as TokenId..self.tokens.len() as TokenId
    }

    /// Longest piece, in characters (continuation prefix not counted).
    pub fn max_token_chars(&self) -> usize {
        self.max_token_chars
    }

    pub fn continuation_prefix(&self) -> Option<&str> {
        self.continuation_prefix.as_deref()
    }

    /// Whether a span starting at `start` continues a word.
    pub fn is_word_internal(chars: &[char], start: usize) -> bool {
        start > 0 && !chars[start - 1].is_whitespace() && !chars[start].is_whitespace()
    }

    /// Token string for the span `[start, end)`, with the continuation prefix when applicable.
    pub fn span_string(&self, chars: &[char], start: usize, end: usize) -> String {
        let mut s = String::with_capacity((end - start) * 4 + 2);
        if let Some(p) = &self.continuation_prefix {
            if Self::is_word_internal(chars, start) {
                s.push_str(p);
            }
        }
        s.extend(&chars[start..end]);
        s
    }

    /// Id of the piece covering `[start, end)`, if it is in the vocabulary.
    pub fn lookup_span(&self, chars: &[char], start: usize, end: usize) -> Option<TokenId> {
        if end <= start || end - start > self.max_token_chars {
            return None;
        }
        self.index
            .get(&self.span_string(chars, start, end))
            .copied()
            .filter(|id| !Self::is_special(*id))
    }

    /// Id used by a downstream model for the span: the piece id or UNK.
    pub fn span_id(&self, chars: &[char], start: usize, end: usize) -> TokenId {
        self.lookup_span(chars, start, end).unwrap_or(UNK_ID)
    }
}

/// Character inventory of the training split; the last id is the unknown character.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<char>", into = "Vec<char>")]
pub struct CharTable {
    chars: Vec<char>,
    index: HashMap<char, u32>,
}

impl From<Vec<char>> for CharTable {
    fn from(chars: Vec<char>) -> Self {
        let mut table = CharTable {
            chars: Vec::new(),
            index: HashMap::new(),
        };
        for c in chars {
            table.insert(c);
        }
        table
    }
}

impl From<CharTable> for Vec<char> {
    fn from(t: CharTable) -> Self {
        t.chars
    }
}

impl CharTable {
    pub fn from_texts<'a>(texts: impl IntoIterator<Item = &'a str>) -> Self {
        let mut table = CharTable::from(Vec::new());
        for t in texts {
            for c in t.chars() {
                table.insert(c);
            }
        }
        table
    }

    fn insert(&mut self, c: char) {
        if !self.index.contains_key(&c) {
            self.index.insert(c, self.chars.len() as u32);
            self.chars.push(c);
        }
    }

    pub fn chars(&self) -> &[char] {
        &self.chars
    }

    /// Table size including the unknown-character row.
    pub fn len(&self) -> usize {
        self.chars.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        self.chars.is_empty()
    }

    pub fn unk_id(&self) -> u32 {
        self.chars.len() as u32
    }

    pub fn contains(&self, c: char) -> bool {
        self.index.contains_key(&c)
    }

    pub fn id(&self, c: char) -> u32 {
        self.index.get(&c).copied().unwrap_or(self.unk_id())
    }

    pub fn encode(&self, chars: &[char]) -> Vec<usize> {
        chars.iter().map(|c| self.id(*c) as usize).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_dense_and_bijective() {
        let v = Vocabulary::new(["a", "b", "ab", "a", ""], None);
        assert_eq!(v.len(), 5);
        for (i, t) in v.tokens().iter().enumerate() {
            assert_eq!(v.lookup(t), Some(i as TokenId));
        }
        assert_eq!(v.lookup(UNK_TOKEN), Some(UNK_ID));
        assert_eq!(v.max_token_chars(), 2);
    }

    #[test]
    fn specials_never_match_text() {
        let v = Vocabulary::new(["<", "u"], None);
        let chars: Vec<char> = "<unk>".chars().collect();
        assert_eq!(v.lookup_span(&chars, 0, 5), None);
    }

    #[test]
    fn continuation_lookup() {
        let v = Vocabulary::new(["ab", "##ab", "a", "##b", "b"], Some("##".into()));
        let chars: Vec<char> = "abab b".chars().collect();
        assert_eq!(v.max_token_chars(), 2);
        assert_eq!(v.lookup_span(&chars, 0, 2), v.lookup("ab"));
        assert_eq!(v.lookup_span(&chars, 2, 4), v.lookup("##ab"));
        assert_eq!(v.lookup_span(&chars, 5, 6), v.lookup("b"));
        assert_eq!(v.span_string(&chars, 3, 4), "##b");
    }

    #[test]
    fn serde_round_trip() {
        let v = Vocabulary::new(["x", "yz"], Some("##".into()));
        let s = serde_json::to_string(&v).unwrap();
        let back: Vocabulary = serde_json::from_str(&s).unwrap();
        assert_eq!(v, back);
        let bad = r#"{"tokens":["x"],"continuation_prefix":null}"#;
        assert!(serde_json::from_str::<Vocabulary>(bad).is_err());
    }
}
