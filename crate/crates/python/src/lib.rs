use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use granulate::bpe::{self, BpeModel, MergeTable};
use granulate::eval::{self, BleuUnit};
use granulate::nmt::{self, Checkpoint};
use granulate::segmenters::{CharSegmenter, HybridModel, WordCut, WordSegmenter};
use granulate::wpm::{self, WpmMode, WpmModel, WpmTrainConfig};
use granulate::{vocab, Error, Granularity, Sentence};

fn py_err(e: Error) -> PyErr {
    if e.is_io() {
        PyIOError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

fn sentence(text: &str) -> PyResult<Sentence> {
    Sentence::new(text).map_err(py_err)
}

fn sentences(texts: Vec<String>) -> PyResult<Vec<Sentence>> {
    texts.iter().map(|t| sentence(t)).collect()
}

#[pyclass(name = "Vocabulary", module = "granulate", frozen)]
struct PyVocabulary {
    inner: vocab::Vocabulary,
}

#[pymethods]
impl PyVocabulary {
    #[staticmethod]
    #[pyo3(signature = (lines, max_size=30000))]
    fn build(lines: Vec<String>, max_size: usize) -> PyResult<Self> {
        let inner = vocab::build_vocabulary(&sentences(lines)?, max_size).map_err(py_err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: vocab::Vocabulary::load(&path).map_err(py_err)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(&path).map_err(py_err)
    }

    /// Id of `token`, or the `<unk>` id.
    fn id(&self, token: &str) -> usize {
        self.inner.id_or_unk(token)
    }

    fn token(&self, id: usize) -> Option<String> {
        self.inner.token(id).map(str::to_string)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __contains__(&self, token: &str) -> bool {
        self.inner.contains(token)
    }
}

enum Kind {
    Word(WordSegmenter),
    Char(CharSegmenter),
    Hybrid(HybridModel),
    Bpe(BpeModel),
    Wpm(WpmModel),
}

impl Kind {
    fn get(&self) -> &dyn granulate::Segmenter {
        match self {
            Kind::Word(s) => s,
            Kind::Char(s) => s,
            Kind::Hybrid(s) => s,
            Kind::Bpe(s) => s,
            Kind::Wpm(s) => s,
        }
    }
}

/// A segmentation at one granularity.
#[pyclass(name = "Segmenter", module = "granulate", frozen)]
struct PySegmenter {
    kind: Kind,
}

#[pymethods]
impl PySegmenter {
    /// Loads a segmenter; `model` names the model file for hybrid, bpe and
    /// wpm, and an optional vocabulary for word.
    #[new]
    #[pyo3(signature = (granularity, model=None))]
    fn new(granularity: &str, model: Option<PathBuf>) -> PyResult<Self> {
        let g: Granularity = granularity.parse().map_err(py_err)?;
        let need = |m: Option<PathBuf>| {
            m.ok_or_else(|| PyValueError::new_err(format!("{g} granularity needs a model file")))
        };
        let kind = match g {
            Granularity::Word => Kind::Word(WordSegmenter {
                vocabulary: model.map(|p| vocab::Vocabulary::load(&p)).transpose().map_err(py_err)?,
            }),
            Granularity::Char => Kind::Char(CharSegmenter),
            Granularity::Hybrid => Kind::Hybrid(HybridModel::load(&need(model)?).map_err(py_err)?),
            Granularity::Bpe => Kind::Bpe(BpeModel::new(MergeTable::load(&need(model)?).map_err(py_err)?)),
            Granularity::Wpm => Kind::Wpm(WpmModel::load(&need(model)?).map_err(py_err)?),
        };
        Ok(Self { kind })
    }

    #[staticmethod]
    #[pyo3(signature = (lines, max_size=30000, threshold=None, word_count=None))]
    fn train_hybrid(lines: Vec<String>, max_size: usize, threshold: Option<u64>, word_count: Option<usize>) -> PyResult<Self> {
        let cut = match (threshold, word_count) {
            (Some(_), Some(_)) => return Err(PyValueError::new_err("give threshold or word_count, not both")),
            (Some(t), None) => WordCut::Threshold(t),
            (None, Some(k)) => WordCut::Size(k),
            (None, None) => WordCut::Auto,
        };
        let model = HybridModel::build(&sentences(lines)?, max_size, cut).map_err(py_err)?;
        Ok(Self { kind: Kind::Hybrid(model) })
    }

    #[staticmethod]
    #[pyo3(signature = (lines, merge_ops=30000))]
    fn train_bpe(lines: Vec<String>, merge_ops: usize) -> PyResult<Self> {
        let side = sentences(lines)?;
        let table = bpe::learn_bpe(&bpe::word_frequencies(&side), merge_ops).map_err(py_err)?;
        Ok(Self { kind: Kind::Bpe(BpeModel::new(table)) })
    }

    #[staticmethod]
    #[pyo3(signature = (lines, vocab_size=30000, mode="pre_segmented", batch_size=None))]
    fn train_wpm(lines: Vec<String>, vocab_size: usize, mode: &str, batch_size: Option<usize>) -> PyResult<Self> {
        let mode: WpmMode = mode.parse().map_err(py_err)?;
        let config = WpmTrainConfig {
            batch_size,
            ..WpmTrainConfig::new(vocab_size, mode)
        };
        let model = wpm::train_wpm(&sentences(lines)?, &config).map_err(py_err)?;
        Ok(Self { kind: Kind::Wpm(model) })
    }

    #[getter]
    fn granularity(&self) -> &'static str {
        self.kind.get().granularity().as_str()
    }

    fn encode(&self, text: &str) -> PyResult<Vec<String>> {
        Ok(self.kind.get().encode(&sentence(text)?))
    }

    /// Returns the text and the number of repaired malformed sequences.
    fn decode(&self, tokens: Vec<String>) -> (String, usize) {
        let d = self.kind.get().decode(&tokens);
        (d.sentence.text().to_string(), d.warnings)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        match &self.kind {
            Kind::Word(WordSegmenter { vocabulary: Some(v) }) => v.save(&path),
            Kind::Word(_) | Kind::Char(_) => return Err(PyValueError::new_err("this segmenter has no model to save")),
            Kind::Hybrid(m) => m.save(&path),
            Kind::Bpe(m) => m.table().save(&path),
            Kind::Wpm(m) => m.save(&path),
        }
        .map_err(py_err)
    }

    fn __repr__(&self) -> String {
        format!("Segmenter({:?})", self.granularity())
    }
}

/// A trained toy translation model.
#[pyclass(name = "Translator", module = "granulate", frozen)]
struct PyTranslator {
    inner: Checkpoint,
}

impl PyTranslator {
    fn ids(&self, text: &str) -> PyResult<Vec<usize>> {
        let s = sentence(text)?;
        Ok(s.tokens().iter().map(|t| self.inner.source_vocab.id_or_unk(t)).collect())
    }

    fn words(&self, ids: &[usize]) -> String {
        ids.iter()
            .map(|&i| self.inner.target_vocab.token(i).unwrap_or(vocab::UNK))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

#[pymethods]
impl PyTranslator {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: Checkpoint::load(&path).map_err(py_err)?,
        })
    }

    /// Beam-search translation; returns the output text and its
    /// length-normalized log-probability.
    #[pyo3(signature = (text, beam=nmt::DEFAULT_BEAM, max_len=None))]
    fn translate(&self, py: Python<'_>, text: &str, beam: usize, max_len: Option<usize>) -> PyResult<(String, f64)> {
        let src = self.ids(text)?;
        if src.is_empty() {
            return Ok((String::new(), 0.0));
        }
        let max_len = max_len.unwrap_or(2 * src.len() + 10);
        let hyp = py
            .detach(|| nmt::beam_search(&self.inner.params, &src, beam, max_len))
            .map_err(py_err)?;
        Ok((self.words(&hyp.tokens), hyp.score()))
    }

    fn perplexity(&self, sources: Vec<String>, targets: Vec<String>) -> PyResult<f64> {
        if sources.len() != targets.len() {
            return Err(PyValueError::new_err("sources and targets differ in length"));
        }
        let pairs = sources
            .iter()
            .zip(&targets)
            .map(|(s, t)| {
                let t = sentence(t)?;
                let t = t.tokens().iter().map(|w| self.inner.target_vocab.id_or_unk(w)).collect();
                Ok((self.ids(s)?, t))
            })
            .collect::<PyResult<Vec<_>>>()?;
        nmt::perplexity(&self.inner.params, &pairs).map_err(py_err)
    }

    #[getter]
    fn num_parameters(&self) -> usize {
        self.inner.params.num_parameters()
    }
}

/// Corpus BLEU. `references` holds one list of lines per reference set.
#[pyfunction]
#[pyo3(signature = (hypotheses, references, unit))]
fn bleu<'py>(py: Python<'py>, hypotheses: Vec<String>, references: Vec<Vec<String>>, unit: &str) -> PyResult<Bound<'py, PyDict>> {
    let unit: BleuUnit = unit.parse().map_err(py_err)?;
    let hyps = sentences(hypotheses)?;
    let refs = references.into_iter().map(sentences).collect::<PyResult<Vec<_>>>()?;
    let r = eval::bleu(&hyps, &refs, unit).map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("bleu", r.bleu)?;
    d.set_item("precisions", r.precisions.to_vec())?;
    d.set_item("brevity_penalty", r.brevity_penalty)?;
    d.set_item("hyp_length", r.hyp_length)?;
    d.set_item("ref_length", r.ref_length)?;
    d.set_item("line", r.to_human())?;
    Ok(d)
}

#[pyfunction]
fn tokenize(text: &str) -> String {
    granulate::corpus::rule_tokenize(text)
}

#[pyfunction]
fn strip_cjk_spaces(text: &str) -> String {
    granulate::segmenters::strip_cjk_spaces(text)
}

#[pymodule(name = "granulate")]
pub fn granulate_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyVocabulary>()?;
    m.add_class::<PySegmenter>()?;
    m.add_class::<PyTranslator>()?;
    m.add_function(wrap_pyfunction!(bleu, m)?)?;
    m.add_function(wrap_pyfunction!(tokenize, m)?)?;
    m.add_function(wrap_pyfunction!(strip_cjk_spaces, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
