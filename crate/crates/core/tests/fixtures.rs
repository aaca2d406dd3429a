mod common;

use std::path::PathBuf;

use symgen::data_io::{load_structures, save_structures};

fn corpus_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/corpus.jsonl")
}

/// The checked-in corpus is what the builders produce. Set
/// `SYMGEN_BLESS=1` to rewrite it.
#[test]
fn checked_in_corpus_is_current() {
    let records = common::fixture_corpus();
    let path = corpus_path();
    if std::env::var_os("SYMGEN_BLESS").is_some() {
        save_structures(&path, &records).unwrap();
    }
    let loaded = load_structures(&path, true).unwrap();
    assert_eq!(loaded, records);
}

#[test]
fn fixtures_are_symmetric() {
    for r in common::fixture_corpus() {
        r.check_symmetry(1e-9).unwrap();
    }
}
