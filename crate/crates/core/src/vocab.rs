//! Frequency-ranked token vocabularies.
//!
//! Ids 0, 1 and 2 are reserved for `<unk>`, `<s>` and `</s>`; ranked entries
//! follow from id 3. Ranking is by descending frequency with ties broken by
//! ascending byte order, so every cut of the table is deterministic.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::corpus::Sentence;
use crate::error::{Error, Result};

pub const UNK: &str = "<unk>";
pub const BOS: &str = "<s>";
pub const EOS: &str = "</s>";
pub const RESERVED: [&str; 3] = [UNK, BOS, EOS];
pub const UNK_ID: usize = 0;
pub const BOS_ID: usize = 1;
pub const EOS_ID: usize = 2;

pub fn is_reserved(token: &str) -> bool {
    RESERVED.contains(&token)
}

/// Counts whitespace tokens across sentences.
pub fn count_tokens<'a, I>(sentences: I) -> HashMap<String, u64>
where
    I: IntoIterator<Item = &'a Sentence>,
{
    let mut counts: HashMap<String, u64> = HashMap::new();
    for s in sentences {
        for t in s.tokens() {
            *counts.entry(t.clone()).or_default() += 1;
        }
    }
    counts
}

fn rank_order(a: &(String, u64), b: &(String, u64)) -> std::cmp::Ordering {
    b.1.cmp(&a.1).then_with(|| a.0.as_bytes().cmp(b.0.as_bytes()))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    entries: Vec<(String, u64)>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    /// Ranks every counted token. Reserved spellings in the counts are ignored.
    pub fn from_counts(counts: HashMap<String, u64>) -> Self {
        let mut entries: Vec<(String, u64)> = counts
            .into_iter()
            .filter(|(t, _)| !is_reserved(t))
            .collect();
        entries.sort_by(rank_order);
        Self::from_ranked(entries)
    }

    fn from_ranked(entries: Vec<(String, u64)>) -> Self {
        let mut index: HashMap<String, usize> = RESERVED
            .iter()
            .enumerate()
            .map(|(i, t)| (t.to_string(), i))
            .collect();
        for (i, (t, _)) in entries.iter().enumerate() {
            index.insert(t.clone(), i + RESERVED.len());
        }
        Self { entries, index }
    }

    /// Keeps the `max_size - 3` highest-ranked entries.
    pub fn truncated(&self, max_size: usize) -> Self {
        let keep = max_size.saturating_sub(RESERVED.len());
        Self::from_ranked(self.entries.iter().take(keep).cloned().collect())
    }

    /// Keeps entries whose frequency is at least `threshold`.
    pub fn with_min_frequency(&self, threshold: u64) -> Self {
        Self::from_ranked(
            self.entries
                .iter()
                .filter(|(_, f)| *f >= threshold)
                .cloned()
                .collect(),
        )
    }

    /// Ranked, non-reserved entries.
    pub fn entries(&self) -> &[(String, u64)] {
        &self.entries
    }

    /// Number of ids, reserved symbols included.
    pub fn len(&self) -> usize {
        self.entries.len() + RESERVED.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn id_or_unk(&self, token: &str) -> usize {
        self.id(token).unwrap_or(UNK_ID)
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        if id < RESERVED.len() {
            Some(RESERVED[id])
        } else {
            self.entries.get(id - RESERVED.len()).map(|(t, _)| t.as_str())
        }
    }

    /// Frequency of a ranked token; reserved and unknown tokens report 0.
    pub fn frequency(&self, token: &str) -> u64 {
        match self.id(token) {
            Some(id) if id >= RESERVED.len() => self.entries[id - RESERVED.len()].1,
            _ => 0,
        }
    }

    /// `token<TAB>frequency` lines in rank order; reserved symbols omitted.
    pub fn to_file_string(&self) -> String {
        let mut out = String::new();
        for (t, f) in &self.entries {
            writeln!(out, "{t}\t{f}").unwrap();
        }
        out
    }

    /// Parses the output of [`Vocabulary::to_file_string`]. `first_line` is
    /// the 1-based line number of `text` within `path`, used in errors.
    pub fn parse(text: &str, path: &Path, first_line: usize) -> Result<Self> {
        let mut entries = Vec::new();
        let mut seen = std::collections::HashSet::new();
        for (i, line) in text.lines().enumerate() {
            let lineno = first_line + i;
            if line.is_empty() {
                continue;
            }
            let (tok, freq) = line
                .split_once('\t')
                .ok_or_else(|| Error::format(path, lineno, "expected token<TAB>frequency"))?;
            if tok.is_empty() || tok.contains([' ', '\t']) {
                return Err(Error::format(path, lineno, "token must be non-empty without whitespace"));
            }
            let freq: u64 = freq
                .parse()
                .map_err(|_| Error::format(path, lineno, format!("bad frequency {freq:?}")))?;
            if is_reserved(tok) {
                return Err(Error::format(path, lineno, format!("reserved symbol {tok} in vocabulary file")));
            }
            if !seen.insert(tok.to_string()) {
                return Err(Error::format(path, lineno, format!("duplicate token {tok}")));
            }
            entries.push((tok.to_string(), freq));
        }
        Ok(Self::from_ranked(entries))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_file_string()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let lines = crate::corpus::read_lines(path)?;
        Self::parse(&lines.join("\n"), path, 1)
    }
}

/// Counts one side of a corpus and keeps the `max_size - 3` most frequent
/// tokens.
pub fn build_vocabulary(side: &[Sentence], max_size: usize) -> Result<Vocabulary> {
    if max_size < RESERVED.len() + 1 {
        return Err(Error::validation(format!(
            "vocabulary size {max_size} leaves no room beyond the {} reserved symbols",
            RESERVED.len()
        )));
    }
    if side.iter().all(Sentence::is_empty) {
        return Err(Error::validation("cannot build a vocabulary from an empty corpus side"));
    }
    Ok(Vocabulary::from_counts(count_tokens(side)).truncated(max_size))
}

/// Frequency of the lowest-ranked token retained under `max_size` (reserved
/// symbols included in the size). Tokens below it are out of vocabulary.
/// Returns 0 when everything fits.
pub fn segmentation_threshold(vocabulary: &Vocabulary, max_size: usize) -> u64 {
    let keep = max_size.saturating_sub(RESERVED.len());
    if keep >= vocabulary.entries.len() || keep == 0 {
        return 0;
    }
    vocabulary.entries[keep - 1].1
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sents(lines: &[&str]) -> Vec<Sentence> {
        lines.iter().map(|l| Sentence::new(l).unwrap()).collect()
    }

    #[test]
    fn direct_count() {
        let v = build_vocabulary(&sents(&["a a b"]), 5).unwrap();
        assert_eq!(v.entries(), [("a".to_string(), 2), ("b".to_string(), 1)]);
        assert_eq!(v.id("<unk>"), Some(0));
        assert_eq!(v.id("a"), Some(3));
        assert_eq!(v.token(4), Some("b"));
        assert_eq!(v.len(), 5);
    }

    #[test]
    fn frequency_then_lexicographic() {
        let v = build_vocabulary(&sents(&["b a", "a"]), 10).unwrap();
        assert_eq!(v.entries()[0].0, "a");
        let v = build_vocabulary(&sents(&["b a c"]), 10).unwrap();
        let order: Vec<&str> = v.entries().iter().map(|(t, _)| t.as_str()).collect();
        assert_eq!(order, ["a", "b", "c"]);
    }

    #[test]
    fn size_and_empty_errors() {
        assert!(build_vocabulary(&sents(&["a"]), 3).is_err());
        assert!(build_vocabulary(&[], 10).is_err());
        assert!(build_vocabulary(&sents(&[""]), 10).is_err());
    }

    #[test]
    fn unk_lookup() {
        let v = build_vocabulary(&sents(&["a a b"]), 4).unwrap();
        assert_eq!(v.id_or_unk("b"), UNK_ID);
        assert_eq!(v.id_or_unk("a"), 3);
    }

    #[test]
    fn threshold_rank_cut() {
        let mut counts = HashMap::new();
        counts.insert("a".to_string(), 5);
        counts.insert("b".to_string(), 3);
        counts.insert("c".to_string(), 1);
        let v = Vocabulary::from_counts(counts);
        assert_eq!(segmentation_threshold(&v, 3 + 2), 3);
        assert_eq!(segmentation_threshold(&v, 3 + 3), 0);
        assert_eq!(segmentation_threshold(&v, 1000), 0);
    }

    #[test]
    fn threshold_on_zipf_matches_sort_oracle() {
        let mut lines = Vec::new();
        for rank in 1..=3000usize {
            let freq = (30000 / rank).max(1);
            let word = format!("w{rank}");
            for _ in 0..freq.min(60) {
                lines.push(word.clone());
            }
        }
        let side: Vec<Sentence> = lines.chunks(17).map(|c| Sentence::from_tokens(c.to_vec())).collect();
        let v = Vocabulary::from_counts(count_tokens(&side));

        let mut oracle: HashMap<&str, u64> = HashMap::new();
        for w in &lines {
            *oracle.entry(w.as_str()).or_default() += 1;
        }
        let mut freqs: Vec<u64> = oracle.values().copied().collect();
        freqs.sort_unstable_by(|a, b| b.cmp(a));
        assert_eq!(segmentation_threshold(&v, 1000 + 3), freqs[999]);
    }

    #[test]
    fn counts_match_hash_oracle() {
        let mut side = Vec::new();
        let mut state = 12345u64;
        for _ in 0..10_000 {
            let mut toks = Vec::new();
            for _ in 0..5 {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                toks.push(format!("t{}", (state >> 33) % 97));
            }
            side.push(Sentence::from_tokens(toks));
        }
        let v = build_vocabulary(&side, 1000).unwrap();
        let mut oracle: HashMap<String, u64> = HashMap::new();
        for s in &side {
            for t in s.text().split(' ') {
                *oracle.entry(t.to_string()).or_insert(0) += 1;
            }
        }
        assert_eq!(v.entries().len(), oracle.len());
        for (t, f) in v.entries() {
            assert_eq!(oracle[t], *f);
        }
    }

    #[test]
    fn file_round_trip_and_errors() {
        let v = build_vocabulary(&sents(&["龙年 快乐 龙年", "x"]), 10).unwrap();
        let text = v.to_file_string();
        assert_eq!(text, "龙年\t2\nx\t1\n快乐\t1\n");
        let p = Path::new("v");
        assert_eq!(Vocabulary::parse(&text, p, 1).unwrap(), v);
        assert!(matches!(Vocabulary::parse("a\t1\na\t2\n", p, 1), Err(Error::Format { line: 2, .. })));
        assert!(matches!(Vocabulary::parse("a 1\n", p, 1), Err(Error::Format { line: 1, .. })));
        assert!(matches!(Vocabulary::parse("<unk>\t1\n", p, 1), Err(Error::Format { .. })));
    }

    proptest! {
        #[test]
        fn cut_respects_ranks(words in prop::collection::vec("[a-e]{1,2}", 1..200), size in 4usize..30) {
            let side = vec![Sentence::from_tokens(words)];
            let full = Vocabulary::from_counts(count_tokens(&side));
            let cut = full.truncated(size);
            let thr = segmentation_threshold(&full, size);
            for (t, f) in full.entries() {
                if cut.contains(t) {
                    prop_assert!(*f >= thr);
                } else {
                    prop_assert!(*f <= thr);
                    // dropped tokens rank strictly after every retained one
                    let last = cut.entries().last().unwrap();
                    prop_assert_eq!(rank_order(last, &(t.clone(), *f)), std::cmp::Ordering::Less);
                }
            }
        }
    }
}
