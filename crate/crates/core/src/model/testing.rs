//! Hand-constructed models with known decoding behavior, for tests and
//! worst-case studies.

use super::{LogitModel, LogitRow, MaskMode, ModelError, TokenId};

/// A model whose greedy output at slot `i` is always
/// `previous token + 1 (mod vocab)`. Under causal Jacobi decoding this is the
/// adversarial chain: no slot can be predicted early, so every pass fixes
/// exactly one more slot and the pass count hits the sequential worst case.
#[derive(Debug, Clone)]
pub struct ShiftModel {
    pub vocab_size: usize,
    pub max_seq: usize,
}

impl ShiftModel {
    pub fn new(vocab_size: usize, max_seq: usize) -> Self {
        ShiftModel {
            vocab_size,
            max_seq,
        }
    }

    fn one_hot(&self, target: TokenId) -> LogitRow {
        let mut row = vec![0.0f32; self.vocab_size];
        row[target as usize] = 1.0;
        row
    }

    fn successor(&self, token: TokenId) -> TokenId {
        ((token as usize + 1) % self.vocab_size) as TokenId
    }

    fn check_len(&self, len: usize) -> Result<(), ModelError> {
        if len > self.max_seq {
            return Err(ModelError::Capacity {
                needed: len,
                max_seq: self.max_seq,
            });
        }
        Ok(())
    }
}

impl LogitModel for ShiftModel {
    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn max_seq(&self) -> usize {
        self.max_seq
    }

    // The mask mode is irrelevant: slot i's row depends on exactly the
    // preceding token, which both masks expose.
    fn forward_logits(
        &self,
        prompt: &[TokenId],
        response: &[TokenId],
        _mode: MaskMode,
    ) -> Result<Vec<LogitRow>, ModelError> {
        if prompt.is_empty() {
            return Err(ModelError::Config("prompt must be nonempty".into()));
        }
        self.check_len(prompt.len() + response.len())?;
        let mut rows = Vec::with_capacity(response.len());
        let mut prev = *prompt.last().expect("nonempty");
        for (i, &slot) in response.iter().enumerate() {
            rows.push(self.one_hot(self.successor(prev)));
            let _ = i;
            prev = slot;
        }
        Ok(rows)
    }

    fn next_token_row(&self, ctx: &[TokenId]) -> Result<LogitRow, ModelError> {
        if ctx.is_empty() {
            return Err(ModelError::Config("prompt must be nonempty".into()));
        }
        self.check_len(ctx.len())?;
        Ok(self.one_hot(self.successor(*ctx.last().expect("nonempty"))))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::greedy_argmax;

    #[test]
    fn shift_model_chains_from_context() {
        let m = ShiftModel::new(16, 64);
        let rows = m.forward_logits(&[3], &[7, 9], MaskMode::Causal).unwrap();
        assert_eq!(greedy_argmax(&rows[0]), 4);
        assert_eq!(greedy_argmax(&rows[1]), 8);
        assert_eq!(greedy_argmax(&m.next_token_row(&[15]).unwrap()), 0);
    }
}
