//! Byte-pair-encoding merges over a word-segmented corpus.
//!
//! Words are learned as character sequences whose last symbol carries the
//! `</w>` end-of-word sentinel, so merges never cross word boundaries and
//! word-final units stay distinct from word-internal ones. Applied output
//! marks every non-final piece of a word with the `@@` suffix.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;
use std::sync::{Arc, RwLock};

use crate::corpus::Sentence;
use crate::error::{Error, Result};
use crate::segmenters::{Decoded, Granularity, Segmenter};

pub const END_OF_WORD: &str = "</w>";
pub const CONTINUATION: &str = "@@";
pub const DEFAULT_MERGE_OPS: usize = 30_000;

const HEADER: &str = "#granulate-bpe v1";

pub type Pair = (String, String);

/// Learned merges in the order they were learned.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MergeTable {
    merges: Vec<Pair>,
    rank: HashMap<String, HashMap<String, usize>>,
}

impl MergeTable {
    pub fn new(merges: Vec<Pair>) -> Result<Self> {
        let mut rank: HashMap<String, HashMap<String, usize>> = HashMap::new();
        for (i, p) in merges.iter().enumerate() {
            if rank.entry(p.0.clone()).or_default().insert(p.1.clone(), i).is_some() {
                return Err(Error::validation(format!("duplicate merge {} {}", p.0, p.1)));
            }
        }
        Ok(Self { merges, rank })
    }

    pub fn merges(&self) -> &[Pair] {
        &self.merges
    }

    pub fn len(&self) -> usize {
        self.merges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.merges.is_empty()
    }

    pub fn rank(&self, left: &str, right: &str) -> Option<usize> {
        self.rank.get(left)?.get(right).copied()
    }

    /// Keeps the first `n` merges.
    pub fn prefix(&self, n: usize) -> Self {
        Self::new(self.merges[..n.min(self.merges.len())].to_vec()).expect("prefix of a valid table")
    }

    pub fn to_file_string(&self) -> String {
        let mut out = String::from(HEADER);
        out.push('\n');
        for (l, r) in &self.merges {
            writeln!(out, "{l} {r}").unwrap();
        }
        out
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next().map(str::trim_end) != Some(HEADER) {
            return Err(Error::format(path, 1, format!("expected header {HEADER:?}")));
        }
        let mut merges = Vec::new();
        let mut seen = HashSet::new();
        for (i, line) in lines.enumerate() {
            let lineno = i + 2;
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split(' ');
            let (Some(l), Some(r), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(Error::format(path, lineno, "expected \"left right\""));
            };
            if l.is_empty() || r.is_empty() {
                return Err(Error::format(path, lineno, "empty merge symbol"));
            }
            let pair = (l.to_string(), r.to_string());
            if !seen.insert(pair.clone()) {
                return Err(Error::format(path, lineno, format!("duplicate merge {l} {r}")));
            }
            merges.push(pair);
        }
        Self::new(merges)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_file_string()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let lines = crate::corpus::read_lines(path)?;
        Self::parse(&lines.join("\n"), path)
    }
}

/// Characters of `word` with the sentinel attached to the last one.
pub fn initial_symbols(word: &str) -> Vec<String> {
    let mut syms: Vec<String> = word.chars().map(String::from).collect();
    if let Some(last) = syms.last_mut() {
        last.push_str(END_OF_WORD);
    }
    syms
}

// Candidate ordering: highest count first, then ascending (left, right).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct Candidate {
    neg_count: std::cmp::Reverse<u64>,
    left: Arc<str>,
    right: Arc<str>,
}

struct Learner {
    words: Vec<Vec<u32>>,
    freqs: Vec<u64>,
    symbols: Vec<Arc<str>>,
    symbol_ids: HashMap<Arc<str>, u32>,
    counts: HashMap<(u32, u32), u64>,
    where_: HashMap<(u32, u32), HashSet<usize>>,
    queue: BTreeSet<Candidate>,
}

impl Learner {
    fn intern(&mut self, s: &str) -> u32 {
        if let Some(&id) = self.symbol_ids.get(s) {
            return id;
        }
        let id = self.symbols.len() as u32;
        let s: Arc<str> = Arc::from(s);
        self.symbols.push(s.clone());
        self.symbol_ids.insert(s, id);
        id
    }

    fn candidate(&self, pair: (u32, u32), count: u64) -> Candidate {
        Candidate {
            neg_count: std::cmp::Reverse(count),
            left: self.symbols[pair.0 as usize].clone(),
            right: self.symbols[pair.1 as usize].clone(),
        }
    }

    fn adjust(&mut self, pair: (u32, u32), word: usize, delta: i64) {
        let old = self.counts.get(&pair).copied().unwrap_or(0);
        let new = (old as i64 + delta) as u64;
        if old > 0 {
            let c = self.candidate(pair, old);
            self.queue.remove(&c);
        }
        if new > 0 {
            self.counts.insert(pair, new);
            let c = self.candidate(pair, new);
            self.queue.insert(c);
            if delta > 0 {
                self.where_.entry(pair).or_default().insert(word);
            }
        } else {
            self.counts.remove(&pair);
        }
    }

    fn add_word_pairs(&mut self, w: usize, sign: i64) {
        let f = self.freqs[w] as i64;
        for k in 1..self.words[w].len() {
            let pair = (self.words[w][k - 1], self.words[w][k]);
            self.adjust(pair, w, sign * f);
        }
    }
}

/// Merges `pair` left to right, non-overlapping, within one symbol sequence.
fn merge_in<T: PartialEq + Clone>(syms: &[T], left: &T, right: &T, merged: &T) -> Vec<T> {
    let mut out = Vec::with_capacity(syms.len());
    let mut i = 0;
    while i < syms.len() {
        if i + 1 < syms.len() && syms[i] == *left && syms[i + 1] == *right {
            out.push(merged.clone());
            i += 2;
        } else {
            out.push(syms[i].clone());
            i += 1;
        }
    }
    out
}

/// Learns up to `num_merges` merges. Pair counts are maintained
/// incrementally: after each merge only the words containing the merged
/// pair are recounted.
pub fn learn_bpe(word_frequencies: &HashMap<String, u64>, num_merges: usize) -> Result<MergeTable> {
    if num_merges == 0 {
        return Err(Error::validation("number of merge operations must be at least 1"));
    }
    if word_frequencies.is_empty() {
        return Err(Error::validation("cannot learn BPE from an empty word table"));
    }
    let mut sorted: Vec<(&String, &u64)> = word_frequencies.iter().filter(|(_, &f)| f > 0).collect();
    sorted.sort();

    let mut learner = Learner {
        words: Vec::with_capacity(sorted.len()),
        freqs: Vec::with_capacity(sorted.len()),
        symbols: Vec::new(),
        symbol_ids: HashMap::new(),
        counts: HashMap::new(),
        where_: HashMap::new(),
        queue: BTreeSet::new(),
    };
    for (w, &f) in sorted {
        let ids = initial_symbols(w).iter().map(|s| learner.intern(s)).collect();
        learner.words.push(ids);
        learner.freqs.push(f);
    }
    for w in 0..learner.words.len() {
        learner.add_word_pairs(w, 1);
    }

    let mut merges = Vec::new();
    while merges.len() < num_merges {
        let Some(best) = learner.queue.first().cloned() else {
            break;
        };
        if best.neg_count.0 < 2 {
            break;
        }
        let left = learner.symbol_ids[&best.left];
        let right = learner.symbol_ids[&best.right];
        let merged_str = format!("{}{}", best.left, best.right);
        let merged = learner.intern(&merged_str);
        merges.push((best.left.to_string(), best.right.to_string()));

        let mut touched: Vec<usize> = learner
            .where_
            .remove(&(left, right))
            .map(|s| s.into_iter().collect())
            .unwrap_or_default();
        touched.sort_unstable();
        for w in touched {
            let has = learner.words[w].windows(2).any(|p| p[0] == left && p[1] == right);
            if !has {
                continue;
            }
            learner.add_word_pairs(w, -1);
            learner.words[w] = merge_in(&learner.words[w], &left, &right, &merged);
            learner.add_word_pairs(w, 1);
        }
    }
    MergeTable::new(merges)
}

/// Counts whitespace tokens of a corpus side for [`learn_bpe`].
pub fn word_frequencies<'a, I: IntoIterator<Item = &'a Sentence>>(side: I) -> HashMap<String, u64> {
    crate::vocab::count_tokens(side)
}

/// Segments one word into pieces (sentinel still attached to the last).
pub fn segment_word(model: &MergeTable, word: &str) -> Vec<String> {
    let mut syms = initial_symbols(word);
    loop {
        let best = syms
            .windows(2)
            .filter_map(|p| model.rank(&p[0], &p[1]).map(|r| (r, p)))
            .min_by_key(|(r, _)| *r);
        let Some((_, pair)) = best else {
            break;
        };
        let (l, r) = (pair[0].clone(), pair[1].clone());
        let merged = format!("{l}{r}");
        syms = merge_in(&syms, &l, &r, &merged);
    }
    syms
}

fn mark_pieces(mut pieces: Vec<String>) -> Vec<String> {
    let n = pieces.len();
    for (i, p) in pieces.iter_mut().enumerate() {
        if i + 1 < n {
            p.push_str(CONTINUATION);
        } else if let Some(stripped) = p.strip_suffix(END_OF_WORD) {
            *p = stripped.to_string();
        }
    }
    pieces
}

/// Applies merges to every word of `sentence`; non-final pieces get `@@`.
pub fn apply_bpe(model: &MergeTable, sentence: &Sentence) -> Vec<String> {
    sentence
        .tokens()
        .iter()
        .flat_map(|w| mark_pieces(segment_word(model, w)))
        .collect()
}

/// Joins `@@`-suffixed pieces to their successor. A dangling suffix on the
/// last piece is stripped and counted as a warning.
pub fn bpe_decode(tokens: &[String]) -> Decoded {
    let mut words: Vec<String> = Vec::new();
    let mut current = String::new();
    let mut open = false;
    for t in tokens {
        if let Some(stem) = t.strip_suffix(CONTINUATION) {
            current.push_str(stem);
            open = true;
        } else {
            current.push_str(t);
            words.push(std::mem::take(&mut current));
            open = false;
        }
    }
    let mut warnings = 0;
    if open {
        warnings += 1;
        words.push(current);
    }
    Decoded {
        sentence: Sentence::lossy(&words.join(" ")),
        warnings,
    }
}

/// A merge table plus a shared word → pieces cache.
#[derive(Debug, Default)]
pub struct BpeModel {
    table: MergeTable,
    cache: RwLock<HashMap<String, Arc<[String]>>>,
}

impl Clone for BpeModel {
    fn clone(&self) -> Self {
        Self::new(self.table.clone())
    }
}

impl BpeModel {
    pub fn new(table: MergeTable) -> Self {
        Self {
            table,
            cache: RwLock::new(HashMap::new()),
        }
    }

    pub fn table(&self) -> &MergeTable {
        &self.table
    }

    fn word_pieces(&self, word: &str) -> Arc<[String]> {
        if let Some(p) = self.cache.read().expect("cache lock").get(word) {
            return p.clone();
        }
        let pieces: Arc<[String]> = mark_pieces(segment_word(&self.table, word)).into();
        self.cache
            .write()
            .expect("cache lock")
            .insert(word.to_string(), pieces.clone());
        pieces
    }
}

impl Segmenter for BpeModel {
    fn granularity(&self) -> Granularity {
        Granularity::Bpe
    }

    fn encode(&self, sentence: &Sentence) -> Vec<String> {
        sentence
            .tokens()
            .iter()
            .flat_map(|w| self.word_pieces(w).to_vec())
            .collect()
    }

    fn decode(&self, tokens: &[String]) -> Decoded {
        bpe_decode(tokens)
    }
}
