use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

fn granulate(args: &[&str], stdin: &str) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_granulate"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    // The process may exit before reading its input.
    let _ = child.stdin.take().unwrap().write_all(stdin.as_bytes());
    child.wait_with_output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

#[test]
fn char_segmentation_over_pipes() {
    let o = granulate(&["segment", "--granularity", "char"], "我 爱 北京 NBA\n");
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "我 爱 北 京 NBA\n");
    let o = granulate(&["desegment", "--granularity", "char"], "我 爱 北 京 NBA\n");
    assert_eq!(stdout(&o), "我爱北京 NBA\n");
}

#[test]
fn hybrid_round_trip_through_files() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    std::fs::write(d.join("zh"), "他们 喜欢 北京\n他们 喜欢 北京\n龙年 快乐\n").unwrap();
    let o = granulate(&["build-vocab", "--hybrid", "--threshold", "2", &path(d, "zh"), "-o", &path(d, "m")], "");
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(std::fs::read_to_string(d.join("m")).unwrap().starts_with("#granulate-hybrid v1"));
    let o = granulate(&["segment", "--granularity", "hybrid", "--model", &path(d, "m")], "龙年 北京\n");
    assert_eq!(stdout(&o), "<B>龙 <E>年 北京\n");
    let o = granulate(&["desegment", "--granularity", "hybrid"], &stdout(&o));
    assert_eq!(stdout(&o), "龙年 北京\n");
}

#[test]
fn malformed_markers_warn_on_stderr() {
    let o = granulate(&["desegment", "--granularity", "hybrid"], "<M>a <E>b\n");
    assert_eq!(o.status.code(), Some(0));
    assert!(stderr(&o).contains("warning"), "{}", stderr(&o));
    let o = granulate(&["desegment", "--granularity", "bpe"], "ab@@ c@@\n");
    assert_eq!(stdout(&o), "abc\n");
    assert!(stderr(&o).contains("warning"));
}

#[test]
fn bpe_learn_and_apply() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let o = granulate(&["learn-bpe", "--merge-ops", "10", "-o", &path(d, "codes")], "low lower lowest low\n");
    assert!(o.status.success());
    let codes = std::fs::read_to_string(d.join("codes")).unwrap();
    assert!(codes.starts_with("#granulate-bpe v1"));
    let o = granulate(&["apply-bpe", "--model", &path(d, "codes")], "lowest slow\n");
    let pieces = stdout(&o);
    assert!(pieces.contains("@@"), "{pieces}");
    let o = granulate(&["desegment", "--granularity", "bpe"], &pieces);
    assert_eq!(stdout(&o), "lowest slow\n");
}

#[test]
fn wpm_train_and_apply() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let text = "the cat sat\nthe hat sat\n";
    let o = granulate(&["train-wpm", "--vocab-size", "30", "--mode", "raw", "-o", &path(d, "w")], text);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(std::fs::read_to_string(d.join("w")).unwrap().starts_with("#granulate-wpm v1 mode=raw"));
    let o = granulate(&["apply-wpm", "--model", &path(d, "w")], text);
    let pieces = stdout(&o);
    assert!(pieces.lines().all(|l| l.starts_with('_')));
    let o = granulate(&["desegment", "--granularity", "wpm"], &pieces);
    assert_eq!(stdout(&o), text);
}

#[test]
fn score_bleu_formats() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    std::fs::write(d.join("hyp"), "the cat sat on mat\n").unwrap();
    std::fs::write(d.join("ref"), "the cat sat on the mat\n").unwrap();
    let o = granulate(&["score-bleu", "--unit", "token", &path(d, "hyp"), &path(d, "ref")], "");
    assert_eq!(
        stdout(&o),
        "BLEU = 57.89, 100.0/75.0/66.7/50.0 (BP=0.819, ratio=0.833, hyp_len=5, ref_len=6)\n"
    );
    let o = granulate(&["score-bleu", "--unit", "token", "--format", "kv", &path(d, "hyp"), &path(d, "ref")], "");
    assert!(stdout(&o).starts_with("bleu=57.89\n"));
    let o = granulate(
        &["score-bleu", "--unit", "token", "--source", &path(d, "ref"), "--bucket-width", "5", "--bucket-cap", "10", &path(d, "hyp"), &path(d, "ref")],
        "",
    );
    assert!(stdout(&o).contains("[5,10)"), "{}", stdout(&o));
}

#[test]
fn score_bleu_requires_unit() {
    let o = granulate(&["score-bleu", "a", "b"], "");
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("--unit"));
}

#[test]
fn exit_codes() {
    assert_eq!(granulate(&["no-such-command"], "").status.code(), Some(1));
    assert_eq!(granulate(&["--help"], "").status.code(), Some(0));
    let o = granulate(&["segment", "--granularity", "word", "/nonexistent/input"], "");
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with("granulate: error: /nonexistent/input"));
    let o = granulate(&["segment", "--granularity", "bpe"], "a\n");
    assert_eq!(o.status.code(), Some(1));

    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("bad"), "#granulate-bpe v1\nonly-one-field\n").unwrap();
    let o = granulate(&["apply-bpe", "--model", &path(tmp.path(), "bad")], "a\n");
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains(":2:"), "{}", stderr(&o));
}

#[test]
fn invalid_utf8_is_reported_with_line() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("x"), b"fine\n\xff\xfe\n").unwrap();
    let o = granulate(&["tokenize", &path(tmp.path(), "x")], "");
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains(":2"), "{}", stderr(&o));
}

#[test]
fn config_file_fills_flags_and_command_line_wins() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = path(tmp.path(), "cfg");
    std::fs::write(&cfg, "# defaults\nsegment.granularity=char\nmax-size=5\n").unwrap();
    let o = granulate(&["--config", &cfg, "segment"], "北京\n");
    assert_eq!(stdout(&o), "北 京\n");
    let o = granulate(&["--config", &cfg, "segment", "--granularity", "word"], "北京\n");
    assert_eq!(stdout(&o), "北京\n");

    std::fs::write(&cfg, "segment.nonsense=1\n").unwrap();
    let o = granulate(&["--config", &cfg, "segment"], "a\n");
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("cfg:1"));
}

#[test]
fn tokenize_and_stats() {
    let o = granulate(&["tokenize"], "Hello, world! 3.5 it's\n");
    assert_eq!(stdout(&o), "Hello , world ! 3.5 it's\n");

    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("zh"), "我 爱 北京\n天安门\n").unwrap();
    let o = granulate(&["stats", "--source", &path(tmp.path(), "zh"), "--source-granularity", "char", "--format", "kv"], "");
    assert_eq!(
        stdout(&o),
        "source.granularity=char\nsource.sentences=2\nsource.tokens=7\nsource.average=3.50\n"
    );
}

#[test]
fn train_and_translate_toy() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    std::fs::write(d.join("src"), "a b\nb c\nc a\na c\n").unwrap();
    std::fs::write(d.join("tgt"), "x y\ny z\nz x\nx z\n").unwrap();
    let o = granulate(
        &[
            "train-toy", "--source", &path(d, "src"), "--target", &path(d, "tgt"), "-o", &path(d, "m"),
            "--report", &path(d, "r"), "--dim", "8", "--adam-epochs", "2", "--sgd-epochs", "1",
        ],
        "",
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stderr(&o).lines().filter(|l| l.starts_with("epoch")).count(), 3);
    assert!(std::fs::read_to_string(d.join("r")).unwrap().contains("optimizer=sgd"));
    let o = granulate(&["--jobs", "2", "translate", "--model", &path(d, "m"), "--beam", "3"], "a b\n\nq\n");
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 3);
    assert_eq!(lines[1], "");

    std::fs::write(d.join("broken"), b"GRANNMT\0junk").unwrap();
    let o = granulate(&["translate", "--model", &path(d, "broken")], "a\n");
    assert_eq!(o.status.code(), Some(1));
}
