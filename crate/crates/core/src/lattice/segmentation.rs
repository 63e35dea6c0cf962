use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A partition of a sentence into contiguous character spans `[start, end)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Segmentation {
    spans: Vec<(usize, usize)>,
}

impl Segmentation {
    /// Validate and wrap spans covering `len` characters.
    pub fn from_spans(spans: Vec<(usize, usize)>, len: usize) -> Result<Self> {
        let mut pos = 0;
        for &(s, e) in &spans {
            if s != pos || e <= s {
                return Err(Error::Invalid(format!("non-contiguous span ({s}, {e}) at position {pos}")));
            }
            pos = e;
        }
        if pos != len {
            return Err(Error::Invalid(format!("spans cover {pos} of {len} characters")));
        }
        Ok(Segmentation { spans })
    }

    pub(crate) fn from_spans_unchecked(spans: Vec<(usize, usize)>) -> Self {
        Segmentation { spans }
    }

    /// Spans from consecutive token lengths.
    pub fn from_lengths(lengths: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut spans = Vec::new();
        let mut pos = 0;
        for l in lengths {
            if l == 0 {
                return Err(Error::Invalid("zero-length token".into()));
            }
            spans.push((pos, pos + l));
            pos += l;
        }
        Ok(Segmentation { spans })
    }

    /// Spans from surface token strings (lengths in characters).
    pub fn from_tokens<S: AsRef<str>>(tokens: &[S]) -> Result<Self> {
        Self::from_lengths(tokens.iter().map(|t| t.as_ref().chars().count()))
    }

    pub fn single_chars(len: usize) -> Self {
        Segmentation {
            spans: (0..len).map(|i| (i, i + 1)).collect(),
        }
    }

    pub fn spans(&self) -> &[(usize, usize)] {
        &self.spans
    }

    /// Number of tokens.
    pub fn len(&self) -> usize {
        self.spans.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spans.is_empty()
    }

    /// Number of characters covered.
    pub fn char_len(&self) -> usize {
        self.spans.last().map_or(0, |s| s.1)
    }

    /// Surface strings of the tokens.
    pub fn tokens(&self, chars: &[char]) -> Vec<String> {
        self.spans.iter().map(|&(s, e)| chars[s..e].iter().collect()).collect()
    }

    /// Per-character tags: `true` marks the first character of a token (B), `false` an interior one (I).
    pub fn bi_tags(&self) -> Vec<bool> {
        let mut tags = vec![false; self.char_len()];
        for &(s, _) in &self.spans {
            tags[s] = true;
        }
        tags
    }

    /// Cut at every B tag; the first position is always treated as B.
    pub fn from_bi_tags(tags: &[bool]) -> Self {
        let mut spans = Vec::new();
        let mut start = 0;
        for i in 1..tags.len() {
            if tags[i] {
                spans.push((start, i));
                start = i;
            }
        }
        if !tags.is_empty() {
            spans.push((start, tags.len()));
        }
        Segmentation { spans }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(Segmentation::from_spans(vec![(0, 2), (2, 3)], 3).is_ok());
        assert!(Segmentation::from_spans(vec![(0, 2), (3, 4)], 4).is_err());
        assert!(Segmentation::from_spans(vec![(0, 2)], 3).is_err());
        assert!(Segmentation::from_spans(vec![(0, 0), (0, 1)], 1).is_err());
    }

    #[test]
    fn bi_tag_conversion() {
        let seg = Segmentation::from_tokens(&["ab", "c"]).unwrap();
        assert_eq!(seg.bi_tags(), vec![true, false, true]);
        assert_eq!(Segmentation::from_bi_tags(&[true, true, true]), Segmentation::single_chars(3));
        assert_eq!(Segmentation::from_bi_tags(&seg.bi_tags()), seg);
    }
}
