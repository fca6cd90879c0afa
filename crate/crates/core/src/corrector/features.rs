use aglsec_nn::Tensor;

use crate::error::{CoreError, Result};
use crate::tokenizer::TokenizedWindow;

/// Per-token feature width: two speaker channels plus a continuation flag.
pub const FEATURE_DIM: usize = 3;

/// Feature row for every non-first sub-word token.
pub const DONT_CARE: [f64; FEATURE_DIM] = [0.5, 0.5, 1.0];

/// Tokens of one window with a feature row per token. First sub-words carry
/// the word's two-speaker vector and a zero flag; continuations carry
/// [`DONT_CARE`].
#[derive(Clone, Debug, PartialEq)]
pub struct WindowFeatures {
    pub tokens: TokenizedWindow,
    pub per_token: Tensor,
}

impl WindowFeatures {
    /// Soft per-word scores over the two local speakers.
    pub fn from_scores(tokens: TokenizedWindow, scores: &[[f64; 2]]) -> Result<Self> {
        if scores.len() != tokens.num_words() {
            return Err(CoreError::LengthMismatch(format!(
                "{} score rows for {} words",
                scores.len(),
                tokens.num_words()
            )));
        }
        let owners = tokens.token_words();
        let mut data = Vec::with_capacity(tokens.num_tokens() * FEATURE_DIM);
        for (t, &first) in tokens.is_first_subword.iter().enumerate() {
            if first {
                let [a, b] = scores[owners[t]];
                data.extend_from_slice(&[a, b, 0.0]);
            } else {
                data.extend_from_slice(&DONT_CARE);
            }
        }
        let per_token = Tensor::matrix(tokens.num_tokens(), FEATURE_DIM, data)?;
        Ok(Self { tokens, per_token })
    }

    /// Hard local labels (0 or 1) encoded one-hot.
    pub fn from_labels(tokens: TokenizedWindow, labels: &[usize]) -> Result<Self> {
        let rows = one_hot_rows(labels)?;
        Self::from_scores(tokens, &rows)
    }
}

pub fn one_hot_rows(labels: &[usize]) -> Result<Vec<[f64; 2]>> {
    labels
        .iter()
        .map(|&l| match l {
            0 => Ok([1.0, 0.0]),
            1 => Ok([0.0, 1.0]),
            _ => Err(CoreError::TooManyWindowSpeakers(l + 1)),
        })
        .collect()
}

/// Rounds each row to the one-hot vector of its argmax (first index on ties).
pub fn binarize_rows(rows: &[[f64; 2]]) -> Vec<[f64; 2]> {
    rows.iter()
        .map(|r| if r[1] > r[0] { [0.0, 1.0] } else { [1.0, 0.0] })
        .collect()
}

/// Corrected per-word posteriors over the two local speakers.
#[derive(Clone, Debug, PartialEq)]
pub struct WordPosteriors {
    pub rows: Vec<[f64; 2]>,
}

impl WordPosteriors {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Local speaker index per word, first index on ties.
    pub fn argmax(&self) -> Vec<usize> {
        self.rows.iter().map(|r| usize::from(r[1] > r[0])).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tokenizer::{tokenize, Vocabulary};

    #[test]
    fn continuation_rows_are_dont_care() {
        let v = Vocabulary::build(["absolutely", "hi"], 32).unwrap();
        let t = tokenize(&["absolutely", "hi"], &v).unwrap();
        let f = WindowFeatures::from_scores(t, &[[0.8, 0.2], [0.1, 0.9]]).unwrap();
        assert_eq!(f.per_token.row(0), &[0.8, 0.2, 0.0]);
        assert_eq!(f.per_token.row(1), &DONT_CARE);
        assert_eq!(f.per_token.row(2), &DONT_CARE);
        assert_eq!(f.per_token.row(3), &[0.1, 0.9, 0.0]);
    }

    #[test]
    fn label_validation() {
        assert!(one_hot_rows(&[0, 1, 2]).is_err());
        assert_eq!(binarize_rows(&[[0.5, 0.5], [0.2, 0.8]]), vec![[1.0, 0.0], [0.0, 1.0]]);
    }
}
