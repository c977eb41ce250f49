//! Greedy and beam-search decoding.

use std::cmp::Ordering;

use super::model::{DecoderStep, NmtParams};
use super::tensor::log_sum_exp;
use crate::error::{Error, Result};
use crate::vocab::{BOS_ID, EOS_ID};

#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    /// Output ids, end-of-sentence excluded.
    pub tokens: Vec<usize>,
    pub log_prob: f64,
    /// Scored positions: `tokens.len()`, plus one when the hypothesis ended at end-of-sentence.
    pub steps: usize,
    pub finished: bool,
}

impl Hypothesis {
    /// Length-normalized log-probability.
    pub fn score(&self) -> f64 {
        self.log_prob / self.steps as f64
    }
}

struct Live {
    tokens: Vec<usize>,
    log_prob: f64,
    state: DecoderStep,
}

fn check(max_len: usize) -> Result<()> {
    if max_len == 0 {
        return Err(Error::validation("max_len must be positive"));
    }
    Ok(())
}

/// Arg-max decoding; stops at end-of-sentence or after `max_len` positions.
pub fn greedy(params: &NmtParams, source: &[usize], max_len: usize) -> Result<Hypothesis> {
    check(max_len)?;
    let enc = params.encode(source)?;
    let top = enc.top();
    let mut state = DecoderStep::initial(&params.config);
    let mut tokens = Vec::new();
    let mut log_prob = 0.0;
    for step in 1..=max_len {
        let y_prev = tokens.last().copied().unwrap_or(BOS_ID);
        let (next, logits) = params.advance(&state, y_prev, top);
        let lse = log_sum_exp(&logits);
        let best = logits
            .iter()
            .enumerate()
            .fold(0, |b, (i, &l)| if l > logits[b] { i } else { b });
        log_prob = log_prob + logits[best] - lse;
        if best == EOS_ID {
            return Ok(Hypothesis { tokens, log_prob, steps: step, finished: true });
        }
        tokens.push(best);
        state = next;
    }
    Ok(Hypothesis { tokens, log_prob, steps: max_len, finished: false })
}

/// Beam search ranked by length-normalized log-probability.
///
/// The last position is expanded without pruning, and the greedy hypothesis is
/// kept as a candidate, so the result never scores below greedy decoding.
pub fn beam_search(params: &NmtParams, source: &[usize], beam: usize, max_len: usize) -> Result<Hypothesis> {
    if beam == 0 {
        return Err(Error::validation("beam size must be at least 1"));
    }
    check(max_len)?;
    let enc = params.encode(source)?;
    let top = enc.top();
    let mut live = vec![Live {
        tokens: Vec::new(),
        log_prob: 0.0,
        state: DecoderStep::initial(&params.config),
    }];
    let mut finished: Vec<Hypothesis> = Vec::new();
    for step in 1..=max_len {
        let last = step == max_len;
        let mut states = Vec::with_capacity(live.len());
        let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
        for (parent, hyp) in live.iter().enumerate() {
            let y_prev = hyp.tokens.last().copied().unwrap_or(BOS_ID);
            let (state, logits) = params.advance(&hyp.state, y_prev, top);
            let lse = log_sum_exp(&logits);
            candidates.extend(logits.iter().enumerate().map(|(tok, l)| (hyp.log_prob + l - lse, parent, tok)));
            states.push(state);
        }
        candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        if !last {
            candidates.truncate(beam);
        }
        let mut next = Vec::new();
        for (log_prob, parent, tok) in candidates {
            let mut tokens = live[parent].tokens.clone();
            if tok == EOS_ID {
                finished.push(Hypothesis { tokens, log_prob, steps: step, finished: true });
            } else if last {
                tokens.push(tok);
                finished.push(Hypothesis { tokens, log_prob, steps: step, finished: false });
            } else {
                tokens.push(tok);
                next.push(Live { tokens, log_prob, state: states[parent].clone() });
            }
        }
        live = next;
        if live.is_empty() {
            break;
        }
    }
    let mut best = greedy(params, source, max_len)?;
    for hyp in finished {
        if hyp.score().total_cmp(&best.score()) == Ordering::Greater {
            best = hyp;
        }
    }
    Ok(best)
}
