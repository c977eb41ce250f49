use pyo3::prelude::*;
use pyo3::types::PyDict;

fn with_module<F: FnOnce(Python<'_>, &Bound<'_, PyDict>)>(f: F) {
    Python::initialize();
    Python::attach(|py| {
        let m = pyo3::wrap_pymodule!(granulate_py::granulate_module)(py);
        let globals = PyDict::new(py);
        globals.set_item("granulate", m).unwrap();
        f(py, &globals);
    });
}

fn run(py: Python<'_>, globals: &Bound<'_, PyDict>, code: &str) {
    let code = std::ffi::CString::new(code).unwrap();
    if let Err(e) = py.run(&code, Some(globals), None) {
        e.print(py);
        panic!("python code failed");
    }
}

#[test]
fn segmenters_round_trip() {
    with_module(|py, g| {
        run(
            py,
            g,
            r#"
lines = ["the cat sat .", "我 爱 北京"]
for seg in [granulate.Segmenter("char"),
            granulate.Segmenter.train_hybrid(lines, max_size=30),
            granulate.Segmenter.train_bpe(lines, merge_ops=5),
            granulate.Segmenter.train_wpm(lines, vocab_size=40)]:
    for line in lines:
        text, warnings = seg.decode(seg.encode(line))
        assert warnings == 0, seg
        if seg.granularity != "char":
            assert text == line, (seg, text)
assert granulate.Segmenter("char").decode(["北", "京"]) == ("北京", 0)
"#,
        );
    });
}

#[test]
fn bleu_and_errors() {
    with_module(|py, g| {
        run(
            py,
            g,
            r#"
r = granulate.bleu(["a b c d"], [["a b c d"]], "token")
assert r["bleu"] == 100.0 and r["precisions"] == [1.0] * 4
try:
    granulate.bleu(["a"], [["a"]], "word")
    raise AssertionError("unit must be token or char")
except ValueError:
    pass
try:
    granulate.Vocabulary.load("/nonexistent/vocab")
    raise AssertionError("missing file")
except OSError:
    pass
"#,
        );
    });
}
