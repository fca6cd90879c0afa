//! Fixed-width sub-word tokenizer: words are cut into 4-character chunks.

use std::collections::{BTreeMap, HashMap};

use crate::error::{CoreError, Result};

pub const CHUNK_CHARS: usize = 4;
pub const UNK: &str = "<unk>";
pub const UNK_ID: usize = 0;

/// Splits a word into chunks of at most [`CHUNK_CHARS`] characters.
pub fn chunks(word: &str) -> Vec<String> {
    let chars: Vec<char> = word.chars().collect();
    chars.chunks(CHUNK_CHARS).map(|c| c.iter().collect()).collect()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    /// Builds from corpus words, keeping the `max_size - 1` most frequent
    /// chunks (ties in lexical order) after the reserved UNK.
    pub fn build<'a>(words: impl IntoIterator<Item = &'a str>, max_size: usize) -> Result<Self> {
        if max_size < 2 {
            return Err(CoreError::InvalidConfig(format!("vocabulary size {max_size} < 2")));
        }
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for w in words {
            for c in chunks(w) {
                *counts.entry(c).or_default() += 1;
            }
        }
        let mut ranked: Vec<(String, usize)> = counts.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        ranked.truncate(max_size - 1);
        let mut tokens: Vec<String> = ranked.into_iter().map(|(t, _)| t).collect();
        tokens.sort();
        tokens.insert(0, UNK.to_string());
        Self::from_tokens(tokens)
    }

    /// Token list in id order; id 0 must be UNK.
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        if tokens.first().map(String::as_str) != Some(UNK) {
            return Err(CoreError::InvalidConfig("vocabulary must start with <unk>".into()));
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(CoreError::InvalidConfig(format!("duplicate vocabulary token `{t}`")));
            }
        }
        Ok(Self { tokens, index })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK_ID)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TokenizedWindow {
    pub sub_word_ids: Vec<usize>,
    /// Index of each word's first token.
    pub word_boundaries: Vec<usize>,
    pub is_first_subword: Vec<bool>,
}

impl TokenizedWindow {
    pub fn num_tokens(&self) -> usize {
        self.sub_word_ids.len()
    }

    pub fn num_words(&self) -> usize {
        self.word_boundaries.len()
    }

    /// Word index owning each token.
    pub fn token_words(&self) -> Vec<usize> {
        let mut owner = Vec::with_capacity(self.num_tokens());
        let mut word = 0;
        for (t, &first) in self.is_first_subword.iter().enumerate() {
            if first && t > 0 {
                word += 1;
            }
            owner.push(word);
        }
        owner
    }
}

pub fn tokenize<S: AsRef<str>>(words: &[S], vocab: &Vocabulary) -> Result<TokenizedWindow> {
    if words.is_empty() {
        return Err(CoreError::Empty("word list"));
    }
    let mut out = TokenizedWindow {
        sub_word_ids: Vec::new(),
        word_boundaries: Vec::with_capacity(words.len()),
        is_first_subword: Vec::new(),
    };
    for w in words {
        let w = w.as_ref();
        if w.is_empty() {
            return Err(CoreError::Empty("word text"));
        }
        out.word_boundaries.push(out.sub_word_ids.len());
        for (k, c) in chunks(w).iter().enumerate() {
            out.sub_word_ids.push(vocab.id(c));
            out.is_first_subword.push(k == 0);
        }
    }
    Ok(out)
}
