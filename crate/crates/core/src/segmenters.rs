//! Word, character and hybrid word-character granularities behind one
//! encode/decode interface shared with the BPE and wordpiece models.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::corpus::{is_cjk, Sentence};
use crate::error::{Error, Result};
use crate::vocab::{count_tokens, Vocabulary, RESERVED, UNK};

pub const MARK_BEGIN: &str = "<B>";
pub const MARK_MIDDLE: &str = "<M>";
pub const MARK_END: &str = "<E>";
pub const MARKERS: [&str; 3] = [MARK_BEGIN, MARK_MIDDLE, MARK_END];

const HYBRID_HEADER: &str = "#granulate-hybrid v1 markers=<B>,<M>,<E>";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Granularity {
    Word,
    Char,
    Hybrid,
    Bpe,
    Wpm,
}

impl Granularity {
    pub const ALL: [Granularity; 5] = [
        Granularity::Word,
        Granularity::Char,
        Granularity::Hybrid,
        Granularity::Bpe,
        Granularity::Wpm,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Granularity::Word => "word",
            Granularity::Char => "char",
            Granularity::Hybrid => "hybrid",
            Granularity::Bpe => "bpe",
            Granularity::Wpm => "wpm",
        }
    }
}

impl fmt::Display for Granularity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Granularity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Granularity::ALL
            .into_iter()
            .find(|g| g.as_str() == s)
            .ok_or_else(|| Error::validation(format!("unknown granularity {s:?}")))
    }
}

/// Decoder output plus the number of malformed marker sequences repaired.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decoded {
    pub sentence: Sentence,
    pub warnings: usize,
}

impl Decoded {
    fn clean(text: &str) -> Self {
        Self {
            sentence: Sentence::lossy(text),
            warnings: 0,
        }
    }
}

/// A reversible sentence segmentation.
pub trait Segmenter: Send + Sync {
    fn granularity(&self) -> Granularity;
    fn encode(&self, sentence: &Sentence) -> Vec<String>;
    fn decode(&self, tokens: &[String]) -> Decoded;
}

// ---------------------------------------------------------------------------
// word

/// Maps out-of-vocabulary tokens to `<unk>`; without a vocabulary every
/// token passes through.
pub fn word_encode(vocabulary: Option<&Vocabulary>, sentence: &Sentence) -> Vec<String> {
    sentence
        .tokens()
        .iter()
        .map(|t| match vocabulary {
            Some(v) if !v.contains(t) => UNK.to_string(),
            _ => t.clone(),
        })
        .collect()
}

pub fn word_decode(tokens: &[String]) -> Sentence {
    Sentence::lossy(&tokens.join(" "))
}

#[derive(Debug, Clone, Default)]
pub struct WordSegmenter {
    pub vocabulary: Option<Vocabulary>,
}

impl Segmenter for WordSegmenter {
    fn granularity(&self) -> Granularity {
        Granularity::Word
    }

    fn encode(&self, sentence: &Sentence) -> Vec<String> {
        word_encode(self.vocabulary.as_ref(), sentence)
    }

    fn decode(&self, tokens: &[String]) -> Decoded {
        Decoded {
            sentence: word_decode(tokens),
            warnings: 0,
        }
    }
}

// ---------------------------------------------------------------------------
// character

/// Splits every CJK character into its own token; runs of other characters
/// stay whole.
pub fn char_encode(sentence: &Sentence) -> Vec<String> {
    let mut out = Vec::new();
    for token in sentence.tokens() {
        let mut run = String::new();
        for ch in token.chars() {
            if is_cjk(ch) {
                if !run.is_empty() {
                    out.push(std::mem::take(&mut run));
                }
                out.push(ch.to_string());
            } else {
                run.push(ch);
            }
        }
        if !run.is_empty() {
            out.push(run);
        }
    }
    out
}

fn is_cjk_token(token: &str) -> bool {
    !token.is_empty() && token.chars().all(is_cjk)
}

/// Joins adjacent CJK tokens without a space; every other boundary gets one.
pub fn char_decode(tokens: &[String]) -> Sentence {
    let mut text = String::new();
    let mut prev_cjk = false;
    for (i, t) in tokens.iter().enumerate() {
        let cjk = is_cjk_token(t);
        if i > 0 && !(cjk && prev_cjk) {
            text.push(' ');
        }
        text.push_str(t);
        prev_cjk = cjk;
    }
    Sentence::lossy(&text)
}

/// Removes every space adjacent to a CJK character. Character-level round
/// trips are exact under this equivalence, since spaces next to Chinese text
/// only ever record an upstream word segmentation.
pub fn strip_cjk_spaces(text: &str) -> String {
    let chars: Vec<char> = text.chars().collect();
    let mut out = String::with_capacity(text.len());
    for (i, &ch) in chars.iter().enumerate() {
        if ch == ' ' {
            let prev = i.checked_sub(1).map(|j| chars[j]);
            let next = chars.get(i + 1).copied();
            if prev.is_some_and(is_cjk) || next.is_some_and(is_cjk) {
                continue;
            }
        }
        out.push(ch);
    }
    out
}

#[derive(Debug, Clone, Copy, Default)]
pub struct CharSegmenter;

impl Segmenter for CharSegmenter {
    fn granularity(&self) -> Granularity {
        Granularity::Char
    }

    fn encode(&self, sentence: &Sentence) -> Vec<String> {
        char_encode(sentence)
    }

    fn decode(&self, tokens: &[String]) -> Decoded {
        Decoded {
            sentence: char_decode(tokens),
            warnings: 0,
        }
    }
}

// ---------------------------------------------------------------------------
// hybrid word-character

/// How many words the hybrid model keeps before spending the rest of the
/// budget on position-marked characters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WordCut {
    /// The most words such that every marked character of the remaining
    /// words still fits in the budget.
    Auto,
    /// Keep words with frequency at least this value.
    Threshold(u64),
    /// Keep this many top-ranked words.
    Size(usize),
}

fn has_marker(token: &str) -> bool {
    MARKERS.iter().any(|m| token.contains(m))
}

fn starts_with_marker(token: &str) -> bool {
    MARKERS.iter().any(|m| token.starts_with(m))
}

fn marked_chars(word: &str) -> Vec<String> {
    let chars: Vec<char> = word.chars().collect();
    let last = chars.len().saturating_sub(1);
    chars
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let marker = if i == 0 {
                MARK_BEGIN
            } else if i == last {
                MARK_END
            } else {
                MARK_MIDDLE
            };
            format!("{marker}{c}")
        })
        .collect()
}

/// Word vocabulary extended with `<B>`/`<M>`/`<E>`-marked characters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HybridModel {
    vocabulary: Vocabulary,
    word_count: usize,
    threshold: u64,
}

impl HybridModel {
    /// Builds the model within `max_size` ids (reserved symbols included).
    pub fn build(side: &[Sentence], max_size: usize, cut: WordCut) -> Result<Self> {
        if max_size <= RESERVED.len() {
            return Err(Error::validation(format!(
                "vocabulary size {max_size} leaves no room beyond the reserved symbols"
            )));
        }
        let counts = count_tokens(side);
        if counts.is_empty() {
            return Err(Error::validation("cannot build a hybrid model from an empty corpus side"));
        }
        if let Some(bad) = counts.keys().filter(|t| has_marker(t)).min() {
            return Err(Error::validation(format!(
                "corpus token {bad:?} contains a reserved hybrid marker"
            )));
        }
        let full = Vocabulary::from_counts(counts);
        let entries = full.entries();
        let budget = max_size - RESERVED.len();

        let keep = match cut {
            WordCut::Threshold(t) => entries.iter().take_while(|(_, f)| *f >= t).count().min(budget),
            WordCut::Size(k) => k.min(budget).min(entries.len()),
            WordCut::Auto => {
                let mut pieces: HashSet<String> = HashSet::new();
                let mut chosen = 0;
                for k in (0..=entries.len()).rev() {
                    if k < entries.len() {
                        pieces.extend(marked_chars(&entries[k].0));
                    }
                    if k + pieces.len() <= budget {
                        chosen = k;
                        break;
                    }
                }
                chosen
            }
        };

        let mut piece_counts: HashMap<String, u64> = HashMap::new();
        for (word, freq) in &entries[keep..] {
            for p in marked_chars(word) {
                *piece_counts.entry(p).or_default() += freq;
            }
        }
        let pieces = Vocabulary::from_counts(piece_counts).truncated(RESERVED.len() + budget - keep);

        let mut all: HashMap<String, u64> = entries[..keep].iter().cloned().collect();
        all.extend(pieces.entries().iter().cloned());
        let threshold = if keep < entries.len() && keep > 0 {
            entries[keep - 1].1
        } else if keep == 0 {
            u64::MAX
        } else {
            0
        };
        Ok(Self {
            vocabulary: Vocabulary::from_counts(all),
            word_count: keep,
            threshold,
        })
    }

    /// Extended vocabulary: retained words plus marked characters.
    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }

    /// Number of whole words retained.
    pub fn word_count(&self) -> usize {
        self.word_count
    }

    /// Frequency of the lowest retained word; rarer words are split. 0 when
    /// nothing was split, `u64::MAX` when no word was kept.
    pub fn threshold(&self) -> u64 {
        self.threshold
    }

    fn is_word(&self, token: &str) -> bool {
        !starts_with_marker(token) && self.vocabulary.contains(token)
    }

    pub fn encode_tokens(&self, sentence: &Sentence) -> Vec<String> {
        let mut out = Vec::with_capacity(sentence.len());
        for t in sentence.tokens() {
            if self.is_word(t) {
                out.push(t.clone());
                continue;
            }
            for p in marked_chars(t) {
                if self.vocabulary.contains(&p) {
                    out.push(p);
                } else {
                    out.push(UNK.to_string());
                }
            }
        }
        out
    }

    pub fn to_file_string(&self) -> String {
        format!(
            "{HYBRID_HEADER} words={} threshold={}\n{}",
            self.word_count,
            self.threshold,
            self.vocabulary.to_file_string()
        )
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let (header, body) = text.split_once('\n').unwrap_or((text, ""));
        let rest = header
            .strip_prefix(HYBRID_HEADER)
            .ok_or_else(|| Error::format(path, 1, format!("expected header {HYBRID_HEADER:?}")))?;
        let mut word_count = None;
        let mut threshold = None;
        for kv in rest.split_whitespace() {
            match kv.split_once('=') {
                Some(("words", v)) => word_count = v.parse().ok(),
                Some(("threshold", v)) => threshold = v.parse().ok(),
                _ => return Err(Error::format(path, 1, format!("unexpected header field {kv:?}"))),
            }
        }
        let (Some(word_count), Some(threshold)) = (word_count, threshold) else {
            return Err(Error::format(path, 1, "header needs words= and threshold="));
        };
        let vocabulary = Vocabulary::parse(body, path, 2)?;
        Ok(Self {
            vocabulary,
            word_count,
            threshold,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_file_string()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let lines = crate::corpus::read_lines(path)?;
        Self::parse(&lines.join("\n"), path)
    }
}

/// Reassembles `<B>`/`<M>`/`<E>` runs into words. Malformed runs are
/// repaired by merging into the currently open word and counted.
pub fn hybrid_decode(tokens: &[String]) -> Decoded {
    struct Open {
        text: String,
        pieces: usize,
        warned: bool,
    }

    let mut words: Vec<String> = Vec::new();
    let mut warnings = 0;
    let mut open: Option<Open> = None;

    // A lone <B>x is a complete word; a longer run must end with <E>.
    let close = |open: &mut Option<Open>, words: &mut Vec<String>, warnings: &mut usize| {
        if let Some(o) = open.take() {
            if o.pieces > 1 && !o.warned {
                *warnings += 1;
            }
            words.push(o.text);
        }
    };

    for t in tokens {
        if let Some(rest) = t.strip_prefix(MARK_BEGIN) {
            close(&mut open, &mut words, &mut warnings);
            open = Some(Open {
                text: rest.to_string(),
                pieces: 1,
                warned: false,
            });
        } else if let Some(rest) = t.strip_prefix(MARK_MIDDLE) {
            match open.as_mut() {
                Some(o) => {
                    o.text.push_str(rest);
                    o.pieces += 1;
                }
                None => {
                    warnings += 1;
                    open = Some(Open {
                        text: rest.to_string(),
                        pieces: 2,
                        warned: true,
                    });
                }
            }
        } else if let Some(rest) = t.strip_prefix(MARK_END) {
            match open.take() {
                Some(mut o) => {
                    o.text.push_str(rest);
                    words.push(o.text);
                }
                None => {
                    warnings += 1;
                    words.push(rest.to_string());
                }
            }
        } else {
            close(&mut open, &mut words, &mut warnings);
            words.push(t.clone());
        }
    }
    close(&mut open, &mut words, &mut warnings);

    Decoded {
        sentence: Sentence::lossy(&words.join(" ")),
        warnings,
    }
}

impl Segmenter for HybridModel {
    fn granularity(&self) -> Granularity {
        Granularity::Hybrid
    }

    fn encode(&self, sentence: &Sentence) -> Vec<String> {
        self.encode_tokens(sentence)
    }

    fn decode(&self, tokens: &[String]) -> Decoded {
        hybrid_decode(tokens)
    }
}

/// Decoding that needs no model: every granularity except `word` with UNK
/// substitution is invertible from the tokens alone.
pub fn decode_tokens(granularity: Granularity, tokens: &[String]) -> Decoded {
    match granularity {
        Granularity::Word => Decoded::clean(&tokens.join(" ")),
        Granularity::Char => Decoded {
            sentence: char_decode(tokens),
            warnings: 0,
        },
        Granularity::Hybrid => hybrid_decode(tokens),
        Granularity::Bpe => crate::bpe::bpe_decode(tokens),
        Granularity::Wpm => Decoded {
            sentence: crate::wpm::wpm_decode(tokens),
            warnings: 0,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn s(text: &str) -> Sentence {
        Sentence::new(text).unwrap()
    }

    fn toks(v: &[&str]) -> Vec<String> {
        v.iter().map(|t| t.to_string()).collect()
    }

    #[test]
    fn char_examples() {
        assert_eq!(char_encode(&s("龙年 快乐")), ["龙", "年", "快", "乐"]);
        assert_eq!(char_encode(&s("NBA 球员")), ["NBA", "球", "员"]);
        assert_eq!(char_encode(&s("NBA球员x")), ["NBA", "球", "员", "x"]);
        assert_eq!(char_decode(&toks(&["龙", "年", "快", "乐"])).text(), "龙年快乐");
        assert_eq!(char_decode(&toks(&["NBA", "球", "员"])).text(), "NBA 球员");
        assert_eq!(char_decode(&toks(&["a", "b"])).text(), "a b");
    }

    #[test]
    fn cjk_space_equivalence() {
        assert_eq!(strip_cjk_spaces("龙年 快乐"), "龙年快乐");
        assert_eq!(strip_cjk_spaces("NBA 球员 and more"), "NBA球员and more");
        assert_eq!(strip_cjk_spaces("a b"), "a b");
    }

    fn oov_model() -> HybridModel {
        // 今天 frequent, the idioms rare
        let side = vec![
            s("今天 今天 今天 今天 龙年"),
            s("今天 繁花似锦"),
        ];
        HybridModel::build(&side, 3 + 1 + 6, WordCut::Size(1)).unwrap()
    }

    #[test]
    fn hybrid_marks_oov_words() {
        let m = oov_model();
        assert_eq!(m.encode_tokens(&s("龙年")), ["<B>龙", "<E>年"]);
        assert_eq!(m.encode_tokens(&s("繁花似锦")), ["<B>繁", "<M>花", "<M>似", "<E>锦"]);
        assert_eq!(m.encode_tokens(&s("今天")), ["今天"]);
        // 花 never appeared word-initially
        assert_eq!(m.encode_tokens(&s("花")), ["<unk>"]);
    }

    #[test]
    fn hybrid_single_char_uses_begin_marker() {
        let side = vec![s("a a a b")];
        let m = HybridModel::build(&side, 3 + 2, WordCut::Size(1)).unwrap();
        assert_eq!(m.encode_tokens(&s("b")), ["<B>b"]);
        assert_eq!(hybrid_decode(&toks(&["a", "<B>b", "a"])).sentence.text(), "a b a");
    }

    #[test]
    fn hybrid_decode_cases() {
        let d = hybrid_decode(&toks(&["<B>龙", "<E>年"]));
        assert_eq!((d.sentence.text(), d.warnings), ("龙年", 0));
        let d = hybrid_decode(&toks(&["<M>花"]));
        assert_eq!((d.sentence.text(), d.warnings), ("花", 1));
        let d = hybrid_decode(&toks(&["<B>繁", "<M>花", "x"]));
        assert_eq!((d.sentence.text(), d.warnings), ("繁花 x", 1));
        let d = hybrid_decode(&toks(&["<E>锦", "<B>a", "<B>b", "<E>c"]));
        assert_eq!((d.sentence.text(), d.warnings), ("锦 a bc", 1));
    }

    #[test]
    fn marker_in_corpus_rejected() {
        let side = vec![s("a<B>b c")];
        assert!(HybridModel::build(&side, 10, WordCut::Auto).is_err());
    }

    #[test]
    fn auto_cut_fits_all_marked_chars() {
        let side = vec![s("ab ab ab cd cdd cddd cdddd x x x x")];
        let m = HybridModel::build(&side, 3 + 5, WordCut::Auto).unwrap();
        // keeping x, ab leaves the c…d words → <B>c <M>d <E>d: 2 + 3 = 5
        assert_eq!(m.word_count(), 2);
        assert_eq!(m.vocabulary().len(), 8);
        assert_eq!(m.encode_tokens(&s("cddd")), ["<B>c", "<M>d", "<M>d", "<E>d"]);
        assert_eq!(m.threshold(), 3);
    }

    #[test]
    fn threshold_cut() {
        let side = vec![s("a a a b b c")];
        let m = HybridModel::build(&side, 100, WordCut::Threshold(2)).unwrap();
        assert_eq!(m.word_count(), 2);
        assert_eq!(m.encode_tokens(&s("c b")), ["<B>c", "b"]);
    }

    #[test]
    fn file_round_trip() {
        let m = oov_model();
        let text = m.to_file_string();
        assert!(text.starts_with("#granulate-hybrid v1 markers=<B>,<M>,<E>"));
        assert_eq!(HybridModel::parse(&text, Path::new("m")).unwrap(), m);
        assert!(HybridModel::parse("龙\t1\n", Path::new("m")).is_err());
    }

    #[test]
    fn word_examples() {
        let v = crate::vocab::build_vocabulary(&[s("今天 天气")], 10).unwrap();
        assert_eq!(word_encode(Some(&v), &s("今天 祥和")), ["今天", "<unk>"]);
        assert_eq!(word_encode(Some(&v), &s("今天 天气")), ["今天", "天气"]);
        assert_eq!(word_decode(&toks(&["今天", "天气"])).text(), "今天 天气");
    }

    #[test]
    fn unk_rate_matches_membership_oracle() {
        let train: Vec<Sentence> = (0..200).map(|i| s(&format!("w{} w{} w{}", i % 17, i % 31, i % 5))).collect();
        let v = crate::vocab::build_vocabulary(&train, 3 + 20).unwrap();
        let kept: HashSet<&str> = v.entries().iter().map(|(t, _)| t.as_str()).collect();
        let held: Vec<Sentence> = (0..100).map(|i| s(&format!("w{} w{}", i % 40, i % 7))).collect();
        let expected: usize = held
            .iter()
            .flat_map(|x| x.tokens())
            .filter(|t| !kept.contains(t.as_str()))
            .count();
        let got: usize = held
            .iter()
            .flat_map(|x| word_encode(Some(&v), x))
            .filter(|t| t == UNK)
            .count();
        assert_eq!(got, expected);
    }

    #[test]
    fn granularity_parse() {
        for g in Granularity::ALL {
            assert_eq!(g.as_str().parse::<Granularity>().unwrap(), g);
        }
        assert!("chars".parse::<Granularity>().is_err());
    }

    fn cjk_word() -> impl Strategy<Value = String> {
        prop::collection::vec(prop::char::range('\u{4e00}', '\u{4e40}'), 1..5)
            .prop_map(|cs| cs.into_iter().collect())
    }

    proptest! {
        #[test]
        fn hybrid_round_trip_and_counts(
            train in prop::collection::vec(prop::collection::vec(cjk_word(), 1..8), 1..30),
            size in 4usize..80,
        ) {
            let side: Vec<Sentence> = train.iter().map(|w| Sentence::from_tokens(w.clone())).collect();
            let m = HybridModel::build(&side, size, WordCut::Auto).unwrap();
            prop_assert!(m.vocabulary().len() <= size);
            for sent in &side {
                let enc = m.encode_tokens(sent);
                let hc = enc.len();
                prop_assert!(char_encode(sent).len() >= hc);
                prop_assert!(hc >= sent.len());
                for t in &enc {
                    prop_assert!(!t.contains(' '));
                    prop_assert!(m.vocabulary().contains(t) || t == UNK);
                    let markers = MARKERS.iter().filter(|mk| t.contains(*mk)).count();
                    prop_assert!(markers <= 1);
                    if markers == 1 { prop_assert!(starts_with_marker(t)); }
                }
                if !enc.iter().any(|t| t == UNK) {
                    let d = hybrid_decode(&enc);
                    prop_assert_eq!(d.sentence.text(), sent.text());
                    prop_assert_eq!(d.warnings, 0);
                }
            }
        }

        #[test]
        fn char_round_trip(words in prop::collection::vec(
            prop_oneof![cjk_word(), "[a-zA-Z0-9]{1,5}", "[a-z]{1,3}[\u{4e00}-\u{4e20}]{1,2}[a-z]{0,2}"], 1..10)) {
            let sent = Sentence::from_tokens(words);
            let dec = char_decode(&char_encode(&sent));
            prop_assert_eq!(strip_cjk_spaces(dec.text()), strip_cjk_spaces(sent.text()));
            prop_assert!(char_encode(&sent).len() >= sent.len());
        }
    }
}
