mod common;

use affect_mtl::features::{
    lexicon_features, ExternalFeatureSet, FeatureAssembler, FeatureLayout, FeatureSource, ScoredLexicon,
    DEEPMOJI_ATTENTION_DIM, DEEPMOJI_SOFTMAX_DIM, LEXICON_SOURCE, SENTIMENT_NEURON_DIM, SKIP_THOUGHT_DIM,
};
use affect_mtl::Error;
use common::data;
use proptest::prelude::*;

fn lexicons() -> Vec<ScoredLexicon> {
    vec![
        ScoredLexicon::load(&data("afinn.tsv")).unwrap(),
        ScoredLexicon::load(&data("nrc.tsv")).unwrap(),
        ScoredLexicon::from_sentiwordnet(&data("swn.txt")).unwrap(),
    ]
}

fn toks(s: &[&str]) -> Vec<String> {
    s.iter().map(|t| t.to_string()).collect()
}

#[test]
fn loads_lexicons() {
    let l = lexicons();
    assert_eq!(l[0].arity(), 1);
    assert_eq!(l[1].arity(), 2);
    assert_eq!(l[2].arity(), 3);
    assert_eq!(l[0].get("good"), Some(&[3.0][..]));
    assert_eq!(l[1].get("hate"), Some(&[0.0, 1.0][..]));
    assert_eq!(lexicon_features(&toks(&["love", "hate", "love"]), &l[1..2]), vec![2.0, 1.0, 3.0]);
}

#[test]
fn sentiwordnet_averages_synsets() {
    let swn = ScoredLexicon::from_sentiwordnet(&data("swn.txt")).unwrap();
    let good = swn.get("good").unwrap();
    let want = [0.5, 0.0625, 0.4375];
    for (a, b) in good.iter().zip(want) {
        assert!((a - b).abs() < 1e-12);
    }
    let sad = swn.get("sad").unwrap();
    assert!((sad[1] - 0.625).abs() < 1e-12 && (sad[2] - 0.375).abs() < 1e-12);
    assert_eq!(swn.get("great").unwrap()[0], 0.75);
}

proptest! {
    #[test]
    fn lexicon_features_are_additive(
        a in prop::collection::vec(prop::sample::select(vec!["good", "love", "hate", "sad", "the", "joy", "great"]), 0..20),
        b in prop::collection::vec(prop::sample::select(vec!["good", "love", "hate", "sad", "the", "joy", "great"]), 0..20),
    ) {
        let l = lexicons();
        let ta = toks(&a);
        let tb = toks(&b);
        let joined: Vec<String> = ta.iter().chain(&tb).cloned().collect();
        let fa = lexicon_features(&ta, &l);
        let fb = lexicon_features(&tb, &l);
        let fj = lexicon_features(&joined, &l);
        for ((x, y), z) in fa.iter().zip(&fb).zip(&fj) {
            prop_assert!((x + y - z).abs() < 1e-12);
        }
        let mut rev = joined.clone();
        rev.reverse();
        let fr = lexicon_features(&rev, &l);
        for (x, y) in fr.iter().zip(&fj) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }
}

fn external(name: &str, dim: usize, ids: &[&str]) -> ExternalFeatureSet {
    let mut s = ExternalFeatureSet::new(name, dim);
    for (i, id) in ids.iter().enumerate() {
        s.insert(id, vec![i as f64 + 1.0; dim]).unwrap();
    }
    s
}

#[test]
fn full_layout_width() {
    let l = lexicons();
    let lex_width: usize = l.iter().map(ScoredLexicon::block_width).sum();
    assert_eq!(lex_width, 2 + 3 + 4);
    let sources = vec![
        (LEXICON_SOURCE.to_string(), FeatureSource::Lexicons(l)),
        ("deepmoji_softmax".into(), FeatureSource::External(external("a", DEEPMOJI_SOFTMAX_DIM, &["t"]))),
        ("deepmoji_attention".into(), FeatureSource::External(external("b", DEEPMOJI_ATTENTION_DIM, &["t"]))),
        ("skip_thought".into(), FeatureSource::External(external("c", SKIP_THOUGHT_DIM, &["t"]))),
        ("sentiment_neuron".into(), FeatureSource::External(external("d", SENTIMENT_NEURON_DIM, &["t"]))),
    ];
    let asm = FeatureAssembler::new(sources, false).unwrap();
    assert_eq!(asm.width(), 64 + 2304 + 4800 + 4096 + lex_width);
    let v = asm.assemble("t", &toks(&["good"])).unwrap();
    assert_eq!(v.values.len(), asm.width());
    assert_eq!(&v.values[..2], &[3.0, 1.0]);

    let json = serde_json::to_string(asm.layout()).unwrap();
    let back: FeatureLayout = serde_json::from_str(&json).unwrap();
    assert_eq!(&back, asm.layout());
    let e = &back.entries[3];
    assert_eq!((e.offset, e.width), (lex_width + 64 + 2304, 4800));
}

#[test]
fn missing_external_rows() {
    let mk = |allow| {
        FeatureAssembler::new(
            vec![("ext".into(), FeatureSource::External(external("ext", 3, &["a"])))],
            allow,
        )
        .unwrap()
    };
    match mk(false).assemble("b", &[]) {
        Err(Error::MissingFeature { source_name, id }) => assert_eq!((source_name.as_str(), id.as_str()), ("ext", "b")),
        other => panic!("unexpected {other:?}"),
    }
    assert_eq!(mk(true).assemble("b", &[]).unwrap().values, vec![0.0; 3]);
    assert_eq!(mk(true).assemble("a", &[]).unwrap().values, vec![1.0; 3]);
}

#[test]
fn assembler_rejects_bad_source_lists() {
    assert!(FeatureAssembler::new(vec![], false).is_err());
    assert!(FeatureAssembler::new(vec![("x".into(), FeatureSource::Lexicons(vec![]))], false).is_err());
    let twice = vec![
        ("x".into(), FeatureSource::External(external("x", 1, &[]))),
        ("x".into(), FeatureSource::External(external("x", 1, &[]))),
    ];
    assert!(FeatureAssembler::new(twice, false).is_err());
}

#[test]
fn external_file_loading() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("f.tsv");
    std::fs::write(&p, "#features\tdm\t3\nt1\t0.1 0.2 0.3\nt2\t1 2 3\n").unwrap();
    let s = ExternalFeatureSet::load(&p, 3).unwrap();
    assert_eq!(s.len(), 2);
    assert_eq!(s.get("t2"), Some(&[1.0, 2.0, 3.0][..]));
    assert!(matches!(ExternalFeatureSet::load(&p, 4), Err(Error::Width { .. })));

    std::fs::write(&p, "#features\tdm\t2\nt1\t1 2\nt1\t3 4\n").unwrap();
    assert!(matches!(ExternalFeatureSet::load(&p, 2), Err(Error::Parse { line: 3, .. })));
    std::fs::write(&p, "#features\tdm\t2\nt1\t1 2 3\n").unwrap();
    assert!(ExternalFeatureSet::load(&p, 2).is_err());
    std::fs::write(&p, "t1\t1 2\n").unwrap();
    assert!(ExternalFeatureSet::load(&p, 2).is_err());
}

#[test]
fn lexicon_file_errors() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("l.tsv");
    std::fs::write(&p, "#lexicon\tx\t2\nword\t1\n").unwrap();
    assert!(matches!(ScoredLexicon::load(&p), Err(Error::Parse { line: 2, .. })));
    std::fs::write(&p, "word\t1\n").unwrap();
    assert!(ScoredLexicon::load(&p).is_err());
    std::fs::write(&p, "#lexicon\tx\t1\nword\tabc\n").unwrap();
    assert!(ScoredLexicon::load(&p).is_err());
}
