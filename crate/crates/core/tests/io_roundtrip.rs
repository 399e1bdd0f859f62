use std::fs;
use std::path::Path;

use srcattr::io;
use srcattr::model::Source;
use srcattr::neural::Prediction;
use srcattr::synthetic::{generate, SyntheticConfig};
use srcattr::{Document, DocumentAttribution, Error, InformationChannel};

fn corpus() -> srcattr::synthetic::SyntheticCorpus {
    generate(&SyntheticConfig {
        seed: 3,
        n_docs: 12,
        versions: 2,
        ..SyntheticConfig::default()
    })
}

fn read_docs(path: &Path) -> Vec<Document> {
    io::read_corpus(path).unwrap().map(Result::unwrap).collect()
}

#[test]
fn documents_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("docs.jsonl");
    let docs = corpus().documents;
    assert_eq!(io::write_corpus(&path, &docs).unwrap(), docs.len());
    assert_eq!(read_docs(&path), docs);
}

#[test]
fn multi_source_attributions_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("attr.jsonl");
    let doc = &corpus().documents[0];
    let mut attr = DocumentAttribution::empty(doc);
    for (id, name) in ["Ana Sol", "police"].iter().enumerate() {
        attr.sources.push(Source {
            source_id: id,
            canonical_name: (*name).into(),
            mentions: Vec::new(),
            is_passive: false,
        });
    }
    attr.sources.push(Source::passive(2));
    attr.map.insert(0, 0, InformationChannel::DirectQuote);
    attr.map.insert(0, 1, InformationChannel::Statement);
    attr.map.insert(1, 2, InformationChannel::ProposalOrderLaw);
    io::write_attributions(&path, [&attr]).unwrap();
    let back: Vec<DocumentAttribution> = io::read_attributions(&path).unwrap().map(Result::unwrap).collect();
    assert_eq!(back, vec![attr]);
    assert_eq!(back[0].map.get(0).unwrap().len(), 2);
}

#[test]
fn predictions_round_trip_at_six_decimals() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("pred.jsonl");
    let preds = vec![
        Prediction {
            doc_id: "d".into(),
            sentence_index: 0,
            detector_score: Some(0.123456),
            retrieved_source: Some("None".into()),
        },
        Prediction {
            doc_id: "d".into(),
            sentence_index: 1,
            detector_score: Some(1.0 / 3.0),
            retrieved_source: None,
        },
    ];
    io::write_predictions(&path, &preds).unwrap();
    let raw = fs::read_to_string(&path).unwrap();
    assert!(raw.contains("0.333333"), "{raw}");
    let back: Vec<Prediction> = io::read_predictions(&path).unwrap().map(Result::unwrap).collect();
    assert_eq!(back[0], preds[0]);
    assert!((back[1].detector_score.unwrap() - 1.0 / 3.0).abs() < 1e-6);
}

#[test]
fn version_pairs_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("pairs.jsonl");
    let pairs = corpus().version_pairs;
    assert!(!pairs.is_empty());
    io::write_version_pairs(&path, &pairs).unwrap();
    let back: Vec<_> = io::read_version_pairs(&path).unwrap().map(Result::unwrap).collect();
    assert_eq!(back, pairs);
}

#[test]
fn empty_file_reads_as_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.jsonl");
    fs::write(&path, "").unwrap();
    assert_eq!(io::read_corpus(&path).unwrap().count(), 0);
    fs::write(&path, "\n\n").unwrap();
    assert_eq!(io::read_corpus(&path).unwrap().count(), 0);
}

#[test]
fn head_out_of_range_names_document() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.jsonl");
    let mut docs = corpus().documents[..2].to_vec();
    docs[1].sentences[0].tokens[0].head = Some(999);
    io::write_corpus(&path, &docs).unwrap();
    let results: Vec<_> = io::read_corpus(&path).unwrap().collect();
    assert!(results[0].is_ok());
    match &results[1] {
        Err(Error::Record { line, doc_id, message }) => {
            assert_eq!(*line, 2);
            assert_eq!(doc_id.as_deref(), Some(docs[1].doc_id.as_str()));
            assert!(message.contains("sentence 0"), "{message}");
        }
        other => panic!("expected a record error, got {other:?}"),
    }
}

#[test]
fn malformed_line_is_skipped_not_fatal() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("mixed.jsonl");
    let docs = corpus().documents;
    io::write_corpus(&path, &docs[..1]).unwrap();
    let mut raw = fs::read_to_string(&path).unwrap();
    raw.push_str("{\"doc_id\": \"broken\", \"sentences\": 7}\n");
    raw.push_str(&io::to_json_line(&io::DocumentRecord::from(&docs[1])).unwrap());
    raw.push('\n');
    fs::write(&path, raw).unwrap();
    let results: Vec<_> = io::read_corpus(&path).unwrap().collect();
    assert_eq!(results.len(), 3);
    assert!(matches!(&results[1], Err(Error::Record { line: 2, doc_id: Some(d), .. }) if d == "broken"));
    assert_eq!(results[2].as_ref().unwrap(), &docs[1]);
}

#[test]
fn writes_are_atomic_replacements() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("out.jsonl");
    fs::write(&path, "old contents\n").unwrap();
    io::write_corpus(&path, &corpus().documents[..3]).unwrap();
    assert_eq!(read_docs(&path).len(), 3);
    let leftovers: Vec<_> = fs::read_dir(dir.path()).unwrap().collect();
    assert_eq!(leftovers.len(), 1);
}
