//! Test corpora and reference implementations shared by the integration tests.
#![allow(dead_code)]

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const HANZI: &str = "的一是在不了有和人这中大为上个国我以要他时来用们生到作地于出就分对成会可主发年动同工也能下过子说产种面而方后多定行学法所民得经十三之进着等部度家电力里如水化高自二理起小物现实加量都两体制机当使点从业本去把性好应开它合还因由其些然前外天政四日那社义事平形相全表间样与关各重新线内数正心反你明看原又么利比或但质气第向道命此变条只没结解问意建月公无系军很情者最立代想已通并提直题党程展五果料象员革位入常文总次品式活设及管特件长求老头基资边流路级少图山统接知较将组见计别她手角期根论运农指几九区强放决西被干做必战先回则任取据处队南给色光门即保治北造百规热领七海口东导器压志世金增争济阶油思术极交受联什认六共权收证改清己美再采转更单风切打白教速花带安场身车例真务具万每目至达走积示议声报斗完类八离华名确才科张信马节话米整空元况今集温传土许步群广石记需段研界拉林律叫且究观越织装影算低持音众书布复容儿须际商非验连断深难近矿千周委素技备半办青省列习响约支般史感劳便团往酸历市克何除消构府称太准精值号率族维划选标写存候毛亲快效斯院查江型眼王按格养易置派层片始却专状育厂京识适属圆包火住调满县局照参红细引听该铁价严龙";

const LATIN: &[&str] = &[
    "NBA", "iPhone", "Google", "CPU", "GDP", "WTO", "the", "of", "and", "market", "data", "model",
    "Beijing", "Shanghai", "2008", "3.5", "100", "x86", "e-mail", "DNA", "USB", "online", "world",
    "news", "team", "cup", ".", ",", "?", "!", "(", ")", "%",
];

const CJK_PUNCT: &[&str] = &["，", "。", "：", "？", "“", "”", "（", "）"];

/// Deterministic lexicon of CJK words with 1 to 4 characters.
pub fn cjk_lexicon(seed: u64, size: usize) -> Vec<String> {
    let chars: Vec<char> = HANZI.chars().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut words = Vec::with_capacity(size);
    let mut seen = std::collections::HashSet::new();
    while words.len() < size {
        let n = match rng.random_range(0..10) {
            0..=2 => 1,
            3..=7 => 2,
            8 => 3,
            _ => 4,
        };
        let w: String = (0..n).map(|_| chars[rng.random_range(0..chars.len())]).collect();
        if seen.insert(w.clone()) {
            words.push(w);
        }
    }
    words
}

fn zipf_index<R: Rng>(rng: &mut R, n: usize) -> usize {
    // Inverse-CDF of a 1/r law, rounded down.
    let u: f64 = rng.random();
    let r = ((n as f64 + 1.0).powf(u) - 1.0).floor() as usize;
    r.min(n - 1)
}

/// Word-segmented sentences mixing Chinese words, Latin tokens and punctuation.
pub fn mixed_corpus(seed: u64, sentences: usize) -> Vec<String> {
    let lexicon = cjk_lexicon(seed ^ 0x5eed, 600);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..sentences)
        .map(|_| {
            let n = rng.random_range(3..=20);
            (0..n)
                .map(|_| match rng.random_range(0..100) {
                    0..=74 => lexicon[zipf_index(&mut rng, lexicon.len())].clone(),
                    75..=89 => LATIN[rng.random_range(0..LATIN.len())].to_string(),
                    _ => CJK_PUNCT[rng.random_range(0..CJK_PUNCT.len())].to_string(),
                })
                .collect::<Vec<_>>()
                .join(" ")
        })
        .collect()
}

/// Word-segmented Chinese sentences with no Latin material.
pub fn chinese_corpus(seed: u64, sentences: usize) -> Vec<String> {
    let lexicon = cjk_lexicon(seed ^ 0xc0de, 800);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..sentences)
        .map(|_| {
            let n = rng.random_range(3..=25);
            (0..n)
                .map(|_| lexicon[zipf_index(&mut rng, lexicon.len())].clone())
                .collect::<Vec<_>>()
                .join(" ")
        })
        .collect()
}

pub mod bpe_ref {
    //! Quadratic BPE: recount every pair after each merge.
    use super::*;

    pub type Pair = (String, String);

    pub fn symbols(word: &str) -> Vec<String> {
        let mut s: Vec<String> = word.chars().map(|c| c.to_string()).collect();
        if let Some(last) = s.last_mut() {
            last.push_str("</w>");
        }
        s
    }

    fn merge(syms: &[String], a: &str, b: &str) -> Vec<String> {
        let mut out = Vec::with_capacity(syms.len());
        let mut i = 0;
        while i < syms.len() {
            if i + 1 < syms.len() && syms[i] == a && syms[i + 1] == b {
                out.push(format!("{a}{b}"));
                i += 2;
            } else {
                out.push(syms[i].clone());
                i += 1;
            }
        }
        out
    }

    /// Most frequent pair first; ties go to the smaller `(left, right)`; stops
    /// when no pair occurs twice.
    pub fn learn(freqs: &HashMap<String, u64>, merges: usize) -> Vec<Pair> {
        let mut words: Vec<(Vec<String>, u64)> = freqs.iter().map(|(w, &f)| (symbols(w), f)).collect();
        let mut out = Vec::new();
        while out.len() < merges {
            let mut counts: HashMap<Pair, u64> = HashMap::new();
            for (s, f) in &words {
                for w in s.windows(2) {
                    *counts.entry((w[0].clone(), w[1].clone())).or_insert(0) += f;
                }
            }
            let mut best: Option<(Pair, u64)> = None;
            for (p, c) in counts {
                let better = match &best {
                    None => true,
                    Some((bp, bc)) => c > *bc || (c == *bc && p < *bp),
                };
                if better {
                    best = Some((p, c));
                }
            }
            match best {
                Some((p, c)) if c >= 2 => {
                    for (s, _) in words.iter_mut() {
                        *s = merge(s, &p.0, &p.1);
                    }
                    out.push(p);
                }
                _ => break,
            }
        }
        out
    }

    /// Repeatedly merges the lowest-ranked adjacent pair, leftmost first.
    pub fn apply_word(merges: &[Pair], word: &str) -> Vec<String> {
        let mut s = symbols(word);
        loop {
            let mut best: Option<(usize, usize)> = None;
            for i in 0..s.len().saturating_sub(1) {
                let rank = merges.iter().position(|(a, b)| *a == s[i] && *b == s[i + 1]);
                if let Some(r) = rank {
                    if best.is_none_or(|(br, _)| r < br) {
                        best = Some((r, i));
                    }
                }
            }
            let Some((_, i)) = best else { break };
            let joined = format!("{}{}", s[i], s[i + 1]);
            s.splice(i..i + 2, [joined]);
        }
        let n = s.len();
        s.into_iter()
            .enumerate()
            .map(|(i, p)| {
                if i + 1 < n {
                    format!("{p}@@")
                } else {
                    p.trim_end_matches("</w>").to_string()
                }
            })
            .collect()
    }
}

pub mod bleu_ref {
    //! Line-by-line transcription of multi-bleu.perl's arithmetic.
    use std::collections::HashMap;

    fn ngrams(words: &[&str], n: usize) -> HashMap<String, usize> {
        let mut m = HashMap::new();
        if words.len() >= n {
            for i in 0..=words.len() - n {
                *m.entry(words[i..i + n].join(" ")).or_insert(0) += 1;
            }
        }
        m
    }

    /// Returns BLEU on the 0-100 scale. `refs[k][i]` is reference set k, line i.
    pub fn multi_bleu(hyps: &[String], refs: &[Vec<String>]) -> f64 {
        let mut correct = [0usize; 4];
        let mut total = [0usize; 4];
        let (mut len_t, mut len_r) = (0usize, 0usize);
        for (i, h) in hyps.iter().enumerate() {
            let words: Vec<&str> = h.split_whitespace().collect();
            let mut max_ref: HashMap<String, usize> = HashMap::new();
            let mut closest_diff = usize::MAX;
            let mut closest_len = usize::MAX;
            for set in refs {
                let r: Vec<&str> = set[i].split_whitespace().collect();
                let diff = r.len().abs_diff(words.len());
                if diff < closest_diff || (diff == closest_diff && r.len() < closest_len) {
                    closest_diff = diff;
                    closest_len = r.len();
                }
                for n in 1..=4 {
                    for (g, c) in ngrams(&r, n) {
                        let e = max_ref.entry(g).or_insert(0);
                        *e = (*e).max(c);
                    }
                }
            }
            len_t += words.len();
            len_r += closest_len;
            for n in 1..=4 {
                for (g, c) in ngrams(&words, n) {
                    total[n - 1] += c;
                    correct[n - 1] += c.min(max_ref.get(&g).copied().unwrap_or(0));
                }
            }
        }
        let mut log_sum = 0.0;
        for n in 0..4 {
            if total[n] == 0 || correct[n] == 0 {
                return 0.0;
            }
            log_sum += (correct[n] as f64 / total[n] as f64).ln();
        }
        let bp = if len_t < len_r {
            (1.0 - len_r as f64 / len_t as f64).exp()
        } else {
            1.0
        };
        100.0 * bp * (log_sum / 4.0).exp()
    }
}
