//! Corpus BLEU with multi-bleu arithmetic, length buckets and granularity
//! statistics.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use crate::corpus::{Corpus, Sentence};
use crate::error::{Error, Result};
use crate::segmenters::Segmenter;

pub const MAX_ORDER: usize = 4;
pub const DEFAULT_BUCKET_WIDTH: usize = 10;
pub const DEFAULT_BUCKET_CAP: usize = 80;

/// Stand-in for `log 0`, as in multi-bleu.
const LOG_ZERO: f64 = -9_999_999_999.0;

/// What BLEU counts as a token.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BleuUnit {
    /// Whitespace tokens as given.
    Token,
    /// Every non-space character.
    Char,
}

impl FromStr for BleuUnit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "token" => Ok(BleuUnit::Token),
            "char" => Ok(BleuUnit::Char),
            _ => Err(Error::validation(format!("unknown BLEU unit {s:?} (expected token or char)"))),
        }
    }
}

impl fmt::Display for BleuUnit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BleuUnit::Token => "token",
            BleuUnit::Char => "char",
        })
    }
}

pub fn units(sentence: &Sentence, unit: BleuUnit) -> Vec<String> {
    match unit {
        BleuUnit::Token => sentence.tokens().to_vec(),
        BleuUnit::Char => sentence
            .text()
            .chars()
            .filter(|c| !c.is_whitespace())
            .map(String::from)
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BleuReport {
    /// Percentage in `[0, 100]`.
    pub bleu: f64,
    /// Modified precisions `p1..p4` as fractions.
    pub precisions: [f64; MAX_ORDER],
    pub brevity_penalty: f64,
    pub hyp_length: usize,
    pub ref_length: usize,
}

impl BleuReport {
    pub fn ratio(&self) -> f64 {
        if self.ref_length == 0 {
            0.0
        } else {
            self.hyp_length as f64 / self.ref_length as f64
        }
    }

    /// The multi-bleu summary line.
    pub fn to_human(&self) -> String {
        let p = self.precisions.map(|v| 100.0 * v);
        format!(
            "BLEU = {:.2}, {:.1}/{:.1}/{:.1}/{:.1} (BP={:.3}, ratio={:.3}, hyp_len={}, ref_len={})",
            self.bleu,
            p[0],
            p[1],
            p[2],
            p[3],
            self.brevity_penalty,
            self.ratio(),
            self.hyp_length,
            self.ref_length
        )
    }

    pub fn to_key_value(&self) -> String {
        let mut out = format!("bleu={:.2}\n", self.bleu);
        for (n, p) in self.precisions.iter().enumerate() {
            out.push_str(&format!("p{}={:.4}\n", n + 1, p));
        }
        out.push_str(&format!(
            "bp={:.4}\nratio={:.4}\nhyp_len={}\nref_len={}\n",
            self.brevity_penalty,
            self.ratio(),
            self.hyp_length,
            self.ref_length
        ));
        out
    }
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

/// Sufficient statistics of one sentence.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Stats {
    correct: [usize; MAX_ORDER],
    total: [usize; MAX_ORDER],
    hyp: usize,
    reference: usize,
}

fn sentence_stats(hyp: &[String], refs: &[Vec<String>]) -> Stats {
    let mut s = Stats {
        hyp: hyp.len(),
        ..Stats::default()
    };
    let mut closest: Option<(usize, usize)> = None;
    for r in refs {
        let diff = r.len().abs_diff(hyp.len());
        closest = match closest {
            Some((d, l)) if diff > d || (diff == d && l <= r.len()) => Some((d, l)),
            _ => Some((diff, r.len())),
        };
    }
    s.reference = closest.map_or(0, |(_, l)| l);
    for n in 1..=MAX_ORDER {
        let mut max_ref: HashMap<&[String], usize> = HashMap::new();
        for r in refs {
            for (g, c) in ngram_counts(r, n) {
                let e = max_ref.entry(g).or_insert(0);
                *e = (*e).max(c);
            }
        }
        for (g, c) in ngram_counts(hyp, n) {
            s.total[n - 1] += c;
            s.correct[n - 1] += c.min(max_ref.get(g).copied().unwrap_or(0));
        }
    }
    s
}

fn report(stats: Stats) -> BleuReport {
    let mut precisions = [0.0; MAX_ORDER];
    for (n, p) in precisions.iter_mut().enumerate() {
        if stats.total[n] > 0 {
            *p = stats.correct[n] as f64 / stats.total[n] as f64;
        }
    }
    let (c, r) = (stats.hyp as f64, stats.reference as f64);
    let brevity_penalty = if stats.hyp < stats.reference { (1.0 - r / c).exp() } else { 1.0 };
    let log_mean = precisions
        .iter()
        .map(|&p| if p > 0.0 { p.ln() } else { LOG_ZERO })
        .sum::<f64>()
        / MAX_ORDER as f64;
    BleuReport {
        bleu: 100.0 * brevity_penalty * log_mean.exp(),
        precisions,
        brevity_penalty,
        hyp_length: stats.hyp,
        ref_length: stats.reference,
    }
}

fn check_aligned(hyps: usize, refs: usize) -> Result<()> {
    if hyps == 0 {
        return Err(Error::validation("no hypotheses to score"));
    }
    if hyps != refs {
        return Err(Error::Alignment {
            source_lines: hyps,
            target_lines: refs,
        });
    }
    Ok(())
}

/// Corpus BLEU over pre-split units. `references[i]` holds every reference of hypothesis `i`.
pub fn bleu_units(hypotheses: &[Vec<String>], references: &[Vec<Vec<String>>]) -> Result<BleuReport> {
    check_aligned(hypotheses.len(), references.len())?;
    if let Some(i) = references.iter().position(Vec::is_empty) {
        return Err(Error::validation(format!("hypothesis {} has no reference", i + 1)));
    }
    let mut total = Stats::default();
    for (h, rs) in hypotheses.iter().zip(references) {
        let s = sentence_stats(h, rs);
        for n in 0..MAX_ORDER {
            total.correct[n] += s.correct[n];
            total.total[n] += s.total[n];
        }
        total.hyp += s.hyp;
        total.reference += s.reference;
    }
    Ok(report(total))
}

/// Corpus BLEU. `reference_sets[k][i]` is the `k`-th reference of hypothesis `i`.
pub fn bleu(hypotheses: &[Sentence], reference_sets: &[Vec<Sentence>], unit: BleuUnit) -> Result<BleuReport> {
    if reference_sets.is_empty() {
        return Err(Error::validation("at least one reference set is required"));
    }
    for set in reference_sets {
        check_aligned(hypotheses.len(), set.len())?;
    }
    let hyps: Vec<Vec<String>> = hypotheses.iter().map(|s| units(s, unit)).collect();
    let refs: Vec<Vec<Vec<String>>> = (0..hypotheses.len())
        .map(|i| reference_sets.iter().map(|set| units(&set[i], unit)).collect())
        .collect();
    bleu_units(&hyps, &refs)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LengthBucket {
    pub start: usize,
    /// Exclusive end; `None` for the open last bucket.
    pub end: Option<usize>,
    pub count: usize,
    /// Omitted for empty buckets.
    pub bleu: Option<f64>,
}

impl LengthBucket {
    pub fn label(&self) -> String {
        match self.end {
            Some(e) => format!("[{},{})", self.start, e),
            None => format!(">={}", self.start),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LengthBucketReport {
    pub buckets: Vec<LengthBucket>,
}

impl LengthBucketReport {
    pub fn to_human(&self) -> String {
        let mut out = format!("{:<10} {:>7} {:>7}\n", "length", "count", "bleu");
        for b in &self.buckets {
            let score = b.bleu.map_or_else(|| "-".to_string(), |v| format!("{v:.2}"));
            out.push_str(&format!("{:<10} {:>7} {:>7}\n", b.label(), b.count, score));
        }
        out
    }

    pub fn to_key_value(&self) -> String {
        let mut out = String::new();
        for b in &self.buckets {
            let score = b.bleu.map_or_else(String::new, |v| format!(" bleu={v:.2}"));
            out.push_str(&format!("bucket={} count={}{}\n", b.label(), b.count, score));
        }
        out
    }
}

/// Groups sentences by source length into `[0,w), [w,2w), …` with an open
/// bucket from `cap`. With no cap, the open bucket starts past the longest
/// sentence.
pub fn bleu_by_length(
    hypotheses: &[Sentence],
    reference_sets: &[Vec<Sentence>],
    source_lengths: &[usize],
    width: usize,
    cap: Option<usize>,
    unit: BleuUnit,
) -> Result<LengthBucketReport> {
    if width == 0 {
        return Err(Error::validation("bucket width must be positive"));
    }
    if let Some(c) = cap {
        if c == 0 || c % width != 0 {
            return Err(Error::validation(format!("bucket cap {c} must be a positive multiple of width {width}")));
        }
    }
    check_aligned(hypotheses.len(), source_lengths.len())?;
    // validates alignment and references once for the whole corpus
    bleu(hypotheses, reference_sets, unit)?;
    let max = source_lengths.iter().copied().max().unwrap_or(0);
    let cap = cap.unwrap_or((max / width + 1) * width);
    let n_closed = cap / width;
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_closed + 1];
    for (i, &len) in source_lengths.iter().enumerate() {
        members[(len / width).min(n_closed)].push(i);
    }
    let mut buckets = Vec::with_capacity(members.len());
    for (b, idx) in members.iter().enumerate() {
        let score = if idx.is_empty() {
            None
        } else {
            let hyps: Vec<Sentence> = idx.iter().map(|&i| hypotheses[i].clone()).collect();
            let refs: Vec<Vec<Sentence>> = reference_sets
                .iter()
                .map(|set| idx.iter().map(|&i| set[i].clone()).collect())
                .collect();
            Some(bleu(&hyps, &refs, unit)?.bleu)
        };
        buckets.push(LengthBucket {
            start: b * width,
            end: (b < n_closed).then_some((b + 1) * width),
            count: idx.len(),
            bleu: score,
        });
    }
    Ok(LengthBucketReport { buckets })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SideStats {
    pub sentences: usize,
    pub tokens: usize,
}

impl SideStats {
    pub fn average(&self) -> f64 {
        if self.sentences == 0 {
            0.0
        } else {
            self.tokens as f64 / self.sentences as f64
        }
    }
}

/// Token counts of one side after segmentation.
pub fn side_stats(side: &[Sentence], segmenter: &dyn Segmenter) -> SideStats {
    SideStats {
        sentences: side.len(),
        tokens: side.iter().map(|s| segmenter.encode(s).len()).sum(),
    }
}

/// Mean tokens per sentence on each side of `corpus`.
pub fn granularity_stats(corpus: &Corpus, source: &dyn Segmenter, target: &dyn Segmenter) -> (SideStats, SideStats) {
    (side_stats(&corpus.sources(), source), side_stats(&corpus.targets(), target))
}
