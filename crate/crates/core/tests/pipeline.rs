mod common;

use common::pipe::{artifacts, out_layout, run_all, tiny_setup};
use tokopt::corpus::Split;
use tokopt::pipeline::{self, Layout};
use tokopt::tokenizers::TokenizerKind;
use tokopt::Error;

#[test]
fn tiny_run_reports_every_method() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_setup(dir.path(), 5, TokenizerKind::Unigram);
    let report = run_all(&cfg, &out_layout(dir.path()));
    let names: Vec<&str> = report.methods.iter().map(|m| m.method.as_str()).collect();
    assert_eq!(names, ["Original", "Unigram^OPT", "BI-Tag", "Proposed", "Oracle"]);
    for m in &report.methods {
        let f1 = m.macro_f1.unwrap();
        assert!((0.0..=1.0).contains(&f1), "{}: {f1}", m.method);
    }
    assert_eq!(report.train_statistics.len(), 2);
    let layout = out_layout(dir.path());
    for p in [layout.report(Split::Test), layout.sweep(Split::Test), layout.dprime()] {
        assert!(p.exists(), "{}", p.display());
    }
}

#[test]
fn every_downstream_kind_runs() {
    for kind in [TokenizerKind::Bpe, TokenizerKind::Maxmatch] {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = tiny_setup(dir.path(), 2, kind);
        cfg.candidates.mode = tokopt::tokenizers::CandidateMode::Sample;
        let report = run_all(&cfg, &out_layout(dir.path()));
        assert_eq!(report.tokenizer_kind, kind.as_str());
    }
}

#[test]
fn rerun_is_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ca = tiny_setup(a.path(), 9, TokenizerKind::Unigram);
    let cb = tiny_setup(b.path(), 9, TokenizerKind::Unigram);
    run_all(&ca, &out_layout(a.path()));
    run_all(&cb, &out_layout(b.path()));
    let fa = artifacts(&a.path().join("out"));
    let fb = artifacts(&b.path().join("out"));
    assert_eq!(fa.keys().collect::<Vec<_>>(), fb.keys().collect::<Vec<_>>());
    for (k, v) in &fa {
        assert!(v == &fb[k], "{} differs", k.display());
    }
}

#[test]
fn missing_upstream_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_setup(dir.path(), 1, TokenizerKind::Unigram);
    let layout = out_layout(dir.path());
    match pipeline::collect(&cfg, &layout, false) {
        Err(Error::MissingArtifact { path, .. }) => assert_eq!(path, layout.tokenizer()),
        other => panic!("expected a missing artifact, got {other:?}"),
    }
}

#[test]
fn changed_upstream_is_stale() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = tiny_setup(dir.path(), 1, TokenizerKind::Unigram);
    let layout = out_layout(dir.path());
    pipeline::train_tokenizer(&cfg, &layout).unwrap();
    pipeline::train_downstream(&cfg, &layout, false).unwrap();
    cfg.tokenizer.vocab_size = 100;
    pipeline::train_tokenizer(&cfg, &layout).unwrap();
    assert!(matches!(pipeline::collect(&cfg, &layout, false), Err(Error::Stale(_))));
    // forcing skips the staleness check, not the vocabulary check
    assert!(matches!(pipeline::collect(&cfg, &layout, true), Err(Error::Schema(_))));
}

#[test]
fn edited_dataset_is_stale() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_setup(dir.path(), 1, TokenizerKind::Unigram);
    let layout = Layout::new(dir.path().join("out"));
    pipeline::train_tokenizer(&cfg, &layout).unwrap();
    let train = cfg.dataset_dir.join(Split::Train.file_name());
    let text = std::fs::read_to_string(&train).unwrap();
    std::fs::write(&train, text.lines().skip(1).collect::<Vec<_>>().join("\n") + "\n").unwrap();
    assert!(matches!(pipeline::train_downstream(&cfg, &layout, false), Err(Error::Stale(_))));
}
