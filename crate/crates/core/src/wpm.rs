//! Wordpiece model: a likelihood-driven subword inventory whose word-initial
//! pieces carry a leading `_`.
//!
//! Training starts from single characters (each in a word-initial `_c` and
//! a word-internal `c` form) and repeatedly adds the concatenation of two
//! adjacent pieces that most increases the corpus unigram log-likelihood
//! under the current greedy segmentation. Application is greedy
//! longest-match-first.
//!
//! Input containing a literal `_` does not round-trip: the decoder reads
//! every `_` as a word boundary.

use std::collections::{HashMap, HashSet};
use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;

use crate::corpus::Sentence;
use crate::error::{Error, Result};
use crate::segmenters::{Decoded, Granularity, Segmenter};
use crate::vocab::UNK;

pub const MARKER: char = '_';
const HEADER: &str = "#granulate-wpm v1";
const CANDIDATE_CAP: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WpmMode {
    /// Lines are consumed as-is; `_` is placed at line start and after each space.
    Raw,
    /// Input is already word-segmented; every token receives a leading `_`.
    PreSegmented,
}

impl fmt::Display for WpmMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            WpmMode::Raw => "raw",
            WpmMode::PreSegmented => "pre_segmented",
        })
    }
}

impl FromStr for WpmMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw" => Ok(WpmMode::Raw),
            "pre_segmented" | "pre-segmented" => Ok(WpmMode::PreSegmented),
            _ => Err(Error::validation(format!("unknown wordpiece mode {s:?}"))),
        }
    }
}

/// Splits a sentence into marked words.
pub fn mark_words(sentence: &Sentence, mode: WpmMode) -> Vec<String> {
    match mode {
        WpmMode::PreSegmented => sentence
            .tokens()
            .iter()
            .map(|t| format!("{MARKER}{t}"))
            .collect(),
        WpmMode::Raw => {
            if sentence.is_empty() {
                return Vec::new();
            }
            let stream: String = std::iter::once(MARKER)
                .chain(sentence.text().chars().map(|c| if c == ' ' { MARKER } else { c }))
                .collect();
            let mut words = Vec::new();
            for ch in stream.chars() {
                if ch == MARKER {
                    words.push(String::new());
                }
                words.last_mut().expect("stream starts with the marker").push(ch);
            }
            words
        }
    }
}

#[derive(Debug, Clone)]
struct PieceSet {
    pieces: HashSet<String>,
    max_chars: usize,
}

impl PieceSet {
    fn insert(&mut self, p: String) {
        self.max_chars = self.max_chars.max(p.chars().count());
        self.pieces.insert(p);
    }

    /// Greedy longest-match-first. Uncovered positions yield `<unk>`
    /// (`_<unk>` at word start, so the boundary survives).
    fn segment(&self, word: &str) -> Vec<String> {
        let chars: Vec<char> = word.chars().collect();
        let mut out = Vec::new();
        let mut pos = 0;
        while pos < chars.len() {
            let at_start = pos == 0 && chars[0] == MARKER;
            let min_len = if at_start { 2 } else { 1 };
            let max_len = self.max_chars.min(chars.len() - pos);
            let mut found = None;
            for len in (min_len..=max_len).rev() {
                let cand: String = chars[pos..pos + len].iter().collect();
                if self.pieces.contains(&cand) {
                    found = Some((cand, len));
                    break;
                }
            }
            match found {
                Some((p, len)) => {
                    out.push(p);
                    pos += len;
                }
                None if at_start && chars.len() >= 2 => {
                    out.push(format!("{MARKER}{UNK}"));
                    pos += 2;
                }
                None => {
                    out.push(UNK.to_string());
                    pos += 1;
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct WpmModel {
    set: PieceSet,
    scores: Vec<(String, f64)>,
    mode: WpmMode,
}

impl PartialEq for WpmModel {
    fn eq(&self, other: &Self) -> bool {
        self.mode == other.mode && self.scores == other.scores
    }
}

impl WpmModel {
    fn from_scores(mut scores: Vec<(String, f64)>, mode: WpmMode) -> Self {
        scores.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let mut set = PieceSet {
            pieces: HashSet::new(),
            max_chars: 0,
        };
        for (p, _) in &scores {
            set.insert(p.clone());
        }
        Self { set, scores, mode }
    }

    pub fn mode(&self) -> WpmMode {
        self.mode
    }

    /// Pieces with log-probability scores, highest first.
    pub fn pieces(&self) -> &[(String, f64)] {
        &self.scores
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn contains(&self, piece: &str) -> bool {
        self.set.pieces.contains(piece)
    }

    pub fn score(&self, piece: &str) -> Option<f64> {
        self.scores.iter().find(|(p, _)| p == piece).map(|(_, s)| *s)
    }

    pub fn segment_word(&self, marked_word: &str) -> Vec<String> {
        self.set.segment(marked_word)
    }

    pub fn to_file_string(&self) -> String {
        let mut out = format!("{HEADER} mode={}\n", self.mode);
        for (p, s) in &self.scores {
            // {:?} on f64 round-trips exactly
            writeln!(out, "{p}\t{s:?}").unwrap();
        }
        out
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().unwrap_or("");
        let mode = header
            .strip_prefix(HEADER)
            .and_then(|r| r.trim().strip_prefix("mode="))
            .ok_or_else(|| Error::format(path, 1, format!("expected header \"{HEADER} mode=<raw|pre_segmented>\"")))?
            .parse::<WpmMode>()
            .map_err(|e| Error::format(path, 1, e.to_string()))?;
        let mut scores = Vec::new();
        let mut seen = HashSet::new();
        for (i, line) in lines.enumerate() {
            let lineno = i + 2;
            if line.is_empty() {
                continue;
            }
            let (p, s) = line
                .split_once('\t')
                .ok_or_else(|| Error::format(path, lineno, "expected piece<TAB>score"))?;
            let s: f64 = s
                .parse()
                .map_err(|_| Error::format(path, lineno, format!("bad score {s:?}")))?;
            if !s.is_finite() || s >= 0.0 {
                return Err(Error::format(path, lineno, "score must be finite and negative"));
            }
            if p.is_empty() || !seen.insert(p.to_string()) {
                return Err(Error::format(path, lineno, format!("empty or duplicate piece {p:?}")));
            }
            scores.push((p.to_string(), s));
        }
        Ok(Self::from_scores(scores, mode))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_file_string()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let lines = crate::corpus::read_lines(path)?;
        Self::parse(&lines.join("\n"), path)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WpmTrainConfig {
    pub vocab_budget: usize,
    pub mode: WpmMode,
    /// Pieces added between re-segmentations; `None` picks about 1% of the
    /// pieces still to be added.
    pub batch_size: Option<usize>,
}

impl WpmTrainConfig {
    pub fn new(vocab_budget: usize, mode: WpmMode) -> Self {
        Self {
            vocab_budget,
            mode,
            batch_size: None,
        }
    }
}

fn xlogx(c: f64) -> f64 {
    if c > 0.0 {
        c * c.ln()
    } else {
        0.0
    }
}

struct Tally {
    counts: HashMap<String, f64>,
    total: f64,
    adjacent: HashMap<(String, String), f64>,
}

fn tally(set: &PieceSet, words: &[(String, u64)]) -> Tally {
    let mut counts: HashMap<String, f64> = HashMap::new();
    let mut adjacent: HashMap<(String, String), f64> = HashMap::new();
    let mut total = 0.0;
    for (w, f) in words {
        let f = *f as f64;
        let seg = set.segment(w);
        total += f * seg.len() as f64;
        let mut skip = false;
        for (i, p) in seg.iter().enumerate() {
            *counts.entry(p.clone()).or_default() += f;
            if i == 0 {
                continue;
            }
            // identical neighbours merge without overlap: a a a → (aa) a
            if skip {
                skip = false;
                continue;
            }
            let prev = &seg[i - 1];
            if prev == UNK || p == UNK || prev.ends_with(UNK) {
                continue;
            }
            if prev == p {
                skip = true;
            }
            *adjacent.entry((prev.clone(), p.clone())).or_default() += f;
        }
    }
    Tally {
        counts,
        total,
        adjacent,
    }
}

/// Log-likelihood change from replacing `n` adjacent (x, y) occurrences by
/// one new piece.
fn merge_gain(t: &Tally, x: &str, y: &str, n: f64) -> f64 {
    let cx = t.counts[x];
    let mut delta = xlogx(n) - (xlogx(t.total - n) - xlogx(t.total));
    if x == y {
        delta += xlogx(cx - 2.0 * n) - xlogx(cx);
    } else {
        let cy = t.counts[y];
        delta += xlogx(cx - n) - xlogx(cx) + xlogx(cy - n) - xlogx(cy);
    }
    delta
}

/// Trains a wordpiece inventory of at most `config.vocab_budget` pieces.
pub fn train_wpm(side: &[Sentence], config: &WpmTrainConfig) -> Result<WpmModel> {
    let mut word_counts: HashMap<String, u64> = HashMap::new();
    for s in side {
        for w in mark_words(s, config.mode) {
            *word_counts.entry(w).or_default() += 1;
        }
    }
    let mut words: Vec<(String, u64)> = word_counts.into_iter().collect();
    words.sort();

    let mut alphabet: Vec<String> = words
        .iter()
        .flat_map(|(w, _)| w.chars().skip(1))
        .flat_map(|c| [c.to_string(), format!("{MARKER}{c}")])
        .collect::<HashSet<_>>()
        .into_iter()
        .collect();
    alphabet.sort();
    if alphabet.is_empty() {
        return Err(Error::validation("cannot train a wordpiece model on an empty corpus side"));
    }
    if config.vocab_budget < alphabet.len() {
        return Err(Error::validation(format!(
            "wordpiece budget {} is below the alphabet size {}",
            config.vocab_budget,
            alphabet.len()
        )));
    }

    let mut set = PieceSet {
        pieces: HashSet::new(),
        max_chars: 0,
    };
    for a in alphabet {
        set.insert(a);
    }
    let batch = config
        .batch_size
        .unwrap_or_else(|| (config.vocab_budget - set.pieces.len()).div_ceil(100))
        .max(1);

    while set.pieces.len() < config.vocab_budget {
        let t = tally(&set, &words);
        let mut adj: Vec<(&(String, String), f64)> = t.adjacent.iter().map(|(k, v)| (k, *v)).collect();
        adj.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        adj.truncate(CANDIDATE_CAP);

        let mut scored: Vec<(f64, String, &(String, String))> = adj
            .into_iter()
            .filter_map(|(pair, n)| {
                let piece = format!("{}{}", pair.0, pair.1);
                if set.pieces.contains(&piece) {
                    return None;
                }
                let gain = merge_gain(&t, &pair.0, &pair.1, n);
                (gain > 0.0).then_some((gain, piece, pair))
            })
            .collect();
        scored.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(&b.1)).then_with(|| a.2.cmp(b.2)));

        let room = (config.vocab_budget - set.pieces.len()).min(batch);
        let mut added = 0;
        for (_, piece, _) in scored {
            if added == room {
                break;
            }
            if !set.pieces.contains(&piece) {
                set.insert(piece);
                added += 1;
            }
        }
        if added == 0 {
            break;
        }
    }

    let t = tally(&set, &words);
    let denom = t.total + set.pieces.len() as f64;
    let scores = set
        .pieces
        .iter()
        .map(|p| {
            let c = t.counts.get(p).copied().unwrap_or(0.0);
            (p.clone(), ((c + 1.0) / denom).ln())
        })
        .collect();
    Ok(WpmModel::from_scores(scores, config.mode))
}

/// Greedy segmentation of every marked word of `sentence`.
pub fn apply_wpm(model: &WpmModel, sentence: &Sentence) -> Vec<String> {
    mark_words(sentence, model.mode)
        .iter()
        .flat_map(|w| model.set.segment(w))
        .collect()
}

/// Concatenates pieces and turns each `_` into a word boundary.
pub fn wpm_decode(tokens: &[String]) -> Sentence {
    let joined: String = tokens.concat();
    Sentence::lossy(&joined.replace(MARKER, " "))
}

/// Maximum-score segmentation of a marked word, for comparison with the
/// greedy segmenter. `None` when some position is not covered.
pub fn viterbi_segment(model: &WpmModel, marked_word: &str) -> Option<Vec<String>> {
    let scores: HashMap<&str, f64> = model.scores.iter().map(|(p, s)| (p.as_str(), *s)).collect();
    let chars: Vec<char> = marked_word.chars().collect();
    let n = chars.len();
    let mut best: Vec<Option<(f64, usize)>> = vec![None; n + 1];
    best[0] = Some((0.0, 0));
    for end in 1..=n {
        for start in end.saturating_sub(model.set.max_chars)..end {
            let Some((base, _)) = best[start] else { continue };
            let piece: String = chars[start..end].iter().collect();
            if let Some(&s) = scores.get(piece.as_str()) {
                let cand = base + s;
                if best[end].is_none_or(|(b, _)| cand > b) {
                    best[end] = Some((cand, start));
                }
            }
        }
    }
    best[n]?;
    let mut out = Vec::new();
    let mut end = n;
    while end > 0 {
        let (_, start) = best[end].expect("reachable");
        out.push(chars[start..end].iter().collect());
        end = start;
    }
    out.reverse();
    Some(out)
}

impl Segmenter for WpmModel {
    fn granularity(&self) -> Granularity {
        Granularity::Wpm
    }

    fn encode(&self, sentence: &Sentence) -> Vec<String> {
        apply_wpm(self, sentence)
    }

    fn decode(&self, tokens: &[String]) -> Decoded {
        Decoded {
            sentence: wpm_decode(tokens),
            warnings: 0,
        }
    }
}
