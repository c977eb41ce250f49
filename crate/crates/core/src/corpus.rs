//! Parallel text loading, whitespace normalization and character classes.
//!
//! All reversibility guarantees in this crate are stated relative to
//! whitespace-normalized text: runs of spaces and tabs collapse to a single
//! space and leading/trailing whitespace is removed. No Unicode
//! normalization is applied.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Default training length limit, in tokens per side.
pub const DEFAULT_MAX_LEN: usize = 120;

fn is_space(ch: char) -> bool {
    ch == ' ' || ch == '\t'
}

/// Splits on runs of spaces and tabs.
pub fn tokenize(text: &str) -> Vec<&str> {
    text.split(is_space).filter(|t| !t.is_empty()).collect()
}

/// Collapses runs of spaces/tabs to one space and strips both ends.
pub fn normalize_whitespace(text: &str) -> String {
    tokenize(text).join(" ")
}

/// One line of text and its whitespace tokens.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Sentence {
    text: String,
    tokens: Vec<String>,
}

impl Sentence {
    /// Normalizes `text`; fails if it contains a line break.
    pub fn new(text: &str) -> Result<Self> {
        if text.contains(['\n', '\r']) {
            return Err(Error::validation("sentence text contains a line break"));
        }
        Ok(Self::from_tokens(tokenize(text)))
    }

    /// Like [`Sentence::new`] but treats line breaks as ordinary whitespace.
    /// Used when rebuilding text from model output, which must always succeed.
    pub fn lossy(text: &str) -> Self {
        if text.contains(['\n', '\r']) {
            Self::new(&text.replace(['\n', '\r'], " ")).expect("line breaks removed")
        } else {
            Self::new(text).expect("no line breaks")
        }
    }

    /// Builds a sentence from tokens that are assumed to contain no whitespace.
    pub fn from_tokens<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let tokens: Vec<String> = tokens.into_iter().map(Into::into).collect();
        let text = tokens.join(" ");
        Self { text, tokens }
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

impl std::fmt::Display for Sentence {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.text)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SentencePair {
    pub source: Sentence,
    pub target: Sentence,
    /// 1-based line number in the input files.
    pub line_number: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Corpus {
    pub pairs: Vec<SentencePair>,
    pub side_labels: (String, String),
}

impl Corpus {
    /// Builds a corpus from in-memory line pairs, numbering lines from 1.
    pub fn from_pairs<S: AsRef<str>, T: AsRef<str>>(pairs: &[(S, T)]) -> Result<Self> {
        let mut out = Vec::with_capacity(pairs.len());
        for (i, (s, t)) in pairs.iter().enumerate() {
            let line = i + 1;
            let source = Sentence::new(s.as_ref())?;
            let target = Sentence::new(t.as_ref())?;
            if source.is_empty() || target.is_empty() {
                return Err(Error::validation(format!("line {line}: empty sentence")));
            }
            out.push(SentencePair {
                source,
                target,
                line_number: line,
            });
        }
        Ok(Self {
            pairs: out,
            side_labels: ("src".into(), "tgt".into()),
        })
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn sources(&self) -> Vec<Sentence> {
        self.pairs.iter().map(|p| p.source.clone()).collect()
    }

    pub fn targets(&self) -> Vec<Sentence> {
        self.pairs.iter().map(|p| p.target.clone()).collect()
    }
}

/// Decodes UTF-8 bytes into lines. LF and CRLF terminators are accepted; a
/// final terminator does not start a new line.
pub fn lines_from_bytes(bytes: &[u8], path: &Path) -> Result<Vec<String>> {
    let text = std::str::from_utf8(bytes).map_err(|e| {
        let offset = e.valid_up_to();
        Error::Decode {
            path: path.to_path_buf(),
            line: 1 + bytes[..offset].iter().filter(|&&b| b == b'\n').count(),
            offset,
        }
    })?;
    let mut lines: Vec<String> = text
        .split('\n')
        .map(|l| l.strip_suffix('\r').unwrap_or(l).to_string())
        .collect();
    if text.is_empty() || text.ends_with('\n') {
        lines.pop();
    }
    for (i, l) in lines.iter().enumerate() {
        if l.contains('\r') {
            return Err(Error::format(path, i + 1, "stray carriage return"));
        }
    }
    Ok(lines)
}

pub fn read_lines(path: &Path) -> Result<Vec<String>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    lines_from_bytes(&bytes, path)
}

/// Reads one side of a corpus; empty lines are kept as empty sentences.
pub fn read_sentences(path: &Path) -> Result<Vec<Sentence>> {
    read_lines(path)?
        .iter()
        .map(|l| Sentence::new(l))
        .collect()
}

fn side_label(path: &Path) -> String {
    path.extension()
        .and_then(|e| e.to_str())
        .unwrap_or("")
        .to_string()
}

/// Loads two line-aligned files into a [`Corpus`].
pub fn load_parallel(source_path: &Path, target_path: &Path) -> Result<Corpus> {
    let src = read_lines(source_path)?;
    let tgt = read_lines(target_path)?;
    if src.len() != tgt.len() {
        return Err(Error::Alignment {
            source_lines: src.len(),
            target_lines: tgt.len(),
        });
    }
    let mut pairs = Vec::with_capacity(src.len());
    for (i, (s, t)) in src.iter().zip(&tgt).enumerate() {
        let line = i + 1;
        let source = Sentence::new(s)?;
        if source.is_empty() {
            return Err(Error::format(source_path, line, "empty line"));
        }
        let target = Sentence::new(t)?;
        if target.is_empty() {
            return Err(Error::format(target_path, line, "empty line"));
        }
        pairs.push(SentencePair {
            source,
            target,
            line_number: line,
        });
    }
    Ok(Corpus {
        pairs,
        side_labels: (side_label(source_path), side_label(target_path)),
    })
}

/// Keeps pairs whose sides both have at most `max_len` tokens.
pub fn length_filter(corpus: &Corpus, max_len: usize) -> Corpus {
    Corpus {
        pairs: corpus
            .pairs
            .iter()
            .filter(|p| p.source.len() <= max_len && p.target.len() <= max_len)
            .cloned()
            .collect(),
        side_labels: corpus.side_labels.clone(),
    }
}

/// CJK unified ideographs (BMP, Extension A, Extensions B-F) and CJK /
/// fullwidth punctuation.
pub fn is_cjk(ch: char) -> bool {
    matches!(ch as u32,
        0x4E00..=0x9FFF
        | 0x3400..=0x4DBF
        | 0x20000..=0x2A6DF
        | 0x2A700..=0x2B73F
        | 0x2B740..=0x2B81F
        | 0x2B820..=0x2CEAF
        | 0x2CEB0..=0x2EBEF
        | 0x3000..=0x303F
        | 0xFF00..=0xFFEF)
}

/// Rule-based tokenizer for Latin-script text: detaches ASCII punctuation
/// from words, except `.`/`,` between digits and `'`/`-` between letters.
pub fn rule_tokenize(text: &str) -> String {
    let chars: Vec<char> = text.chars().collect();
    let mut out = String::with_capacity(text.len() + 8);
    for (i, &ch) in chars.iter().enumerate() {
        let prev = i.checked_sub(1).map(|j| chars[j]);
        let next = chars.get(i + 1).copied();
        let split = ch.is_ascii_punctuation()
            && !match ch {
                '.' | ',' => {
                    prev.is_some_and(|c| c.is_ascii_digit()) && next.is_some_and(|c| c.is_ascii_digit())
                }
                '\'' | '-' => {
                    prev.is_some_and(char::is_alphanumeric) && next.is_some_and(char::is_alphanumeric)
                }
                _ => false,
            };
        if split {
            out.push(' ');
            out.push(ch);
            out.push(' ');
        } else {
            out.push(ch);
        }
    }
    normalize_whitespace(&out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::io::Write;

    fn write_tmp(dir: &tempfile::TempDir, name: &str, bytes: &[u8]) -> std::path::PathBuf {
        let p = dir.path().join(name);
        fs::File::create(&p).unwrap().write_all(bytes).unwrap();
        p
    }

    #[test]
    fn loads_aligned_files() {
        let dir = tempfile::tempdir().unwrap();
        let s = write_tmp(&dir, "a.zh", b"a b\nc");
        let t = write_tmp(&dir, "a.en", b"x\ny z");
        let c = load_parallel(&s, &t).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c.pairs[0].source.text(), "a b");
        assert_eq!(c.pairs[0].target.text(), "x");
        assert_eq!(c.pairs[1].line_number, 2);
        assert_eq!(c.side_labels, ("zh".to_string(), "en".to_string()));
    }

    #[test]
    fn line_count_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let s = write_tmp(&dir, "s", b"a\nb\nc\n");
        let t = write_tmp(&dir, "t", b"x\ny\n");
        match load_parallel(&s, &t) {
            Err(Error::Alignment {
                source_lines: 3,
                target_lines: 2,
            }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn invalid_utf8_reports_offset() {
        let dir = tempfile::tempdir().unwrap();
        let s = write_tmp(&dir, "s", b"ab\xffc\n");
        let t = write_tmp(&dir, "t", b"x\n");
        match load_parallel(&s, &t) {
            Err(Error::Decode { line: 1, offset: 2, .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn empty_line_names_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let s = write_tmp(&dir, "s", b"a\n  \n");
        let t = write_tmp(&dir, "t", b"x\ny\n");
        match load_parallel(&s, &t) {
            Err(Error::Format { line: 2, .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn crlf_accepted() {
        let lines = lines_from_bytes("a b\r\nc\r\n".as_bytes(), Path::new("x")).unwrap();
        assert_eq!(lines, vec!["a b", "c"]);
    }

    #[test]
    fn normalization_of_cjk_line() {
        let s = Sentence::new("  龙年  快乐 ").unwrap();
        assert_eq!(s.tokens(), ["龙年", "快乐"]);
        assert_eq!(s.text(), "龙年 快乐");
        let s = Sentence::new("a\t\tb").unwrap();
        assert_eq!(s.text(), "a b");
        assert!(Sentence::new("a\nb").is_err());
    }

    #[test]
    fn length_filter_cases() {
        let c = Corpus::from_pairs(&[("a b", "x")]).unwrap();
        assert!(length_filter(&c, 1).is_empty());
        assert_eq!(length_filter(&c, DEFAULT_MAX_LEN), c);
    }

    #[test]
    fn length_filter_matches_recount() {
        let pairs: Vec<(String, String)> = (0..100)
            .map(|i| {
                let s = vec!["w"; 1 + (i * 7) % 13].join(" ");
                let t = vec!["v"; 1 + (i * 5) % 11].join(" ");
                (s, t)
            })
            .collect();
        let c = Corpus::from_pairs(&pairs).unwrap();
        let expected = pairs
            .iter()
            .filter(|(s, t)| s.split(' ').count() <= 6 && t.split(' ').count() <= 6)
            .count();
        assert_eq!(length_filter(&c, 6).len(), expected);
    }

    #[test]
    fn cjk_predicate() {
        assert!(is_cjk('龙'));
        assert!(!is_cjk('a'));
        assert!(is_cjk('，'));
        assert!(is_cjk('。'));
        assert!(is_cjk('\u{20000}'));
        assert!(!is_cjk('é'));
    }

    #[test]
    fn rule_tokenizer() {
        assert_eq!(rule_tokenize("Hello, world!"), "Hello , world !");
        assert_eq!(rule_tokenize("it's 3.14 (approx)"), "it's 3.14 ( approx )");
        assert_eq!(rule_tokenize("well-known 1,000."), "well-known 1,000 .");
    }

    proptest! {
        #[test]
        fn filter_composes_as_min(lens in prop::collection::vec((1usize..15, 1usize..15), 0..40),
                                  m1 in 1usize..15, m2 in 1usize..15) {
            let pairs: Vec<(String, String)> = lens
                .iter()
                .map(|&(a, b)| (vec!["a"; a].join(" "), vec!["b"; b].join(" ")))
                .collect();
            let c = Corpus::from_pairs(&pairs).unwrap();
            prop_assert_eq!(length_filter(&length_filter(&c, m1), m2), length_filter(&c, m1.min(m2)));
        }

        #[test]
        fn token_join_resplit(tokens in prop::collection::vec("[^ \t\r\n]{1,6}", 0..12)) {
            let joined = tokens.join(" ");
            let again: Vec<String> = tokenize(&joined).into_iter().map(String::from).collect();
            prop_assert_eq!(again, tokens);
        }
    }
}
