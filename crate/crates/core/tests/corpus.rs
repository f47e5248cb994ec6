use std::path::Path;

use affect_mtl::corpus::{
    detect_kind, histogram, join_labels, load_dataset, parse_dataset, write_dataset, DatasetSplit, LabelKind,
    LabeledTweet, ValenceClass,
};
use affect_mtl::Error;
use proptest::prelude::*;

fn origin() -> &'static Path {
    Path::new("mem.tsv")
}

fn tweet_strategy() -> impl Strategy<Value = LabeledTweet> {
    ("[a-z0-9]{1,8}", "[^\t\r\n]{0,40}", 0usize..7, 0u32..=1000).prop_map(|(id, text, c, s)| LabeledTweet {
        id,
        text,
        valence: ValenceClass::from_index(c),
        intensity: Some(s as f64 / 1000.0),
    })
}

proptest! {
    #[test]
    fn write_then_parse_round_trips(mut tweets in prop::collection::vec(tweet_strategy(), 0..30)) {
        tweets.retain(|t| t.text.trim() != "NONE");
        let mut seen = std::collections::HashSet::new();
        tweets.retain(|t| seen.insert(t.id.clone()));
        let split = DatasetSplit { name: "mem".into(), examples: tweets };
        for kind in [LabelKind::Classification, LabelKind::Intensity, LabelKind::Both] {
            let mut buf = Vec::new();
            write_dataset(&split, kind, &mut buf).unwrap();
            let text = String::from_utf8(buf).unwrap();
            prop_assert_eq!(detect_kind(&text).unwrap_or(kind), kind);
            let back = parse_dataset(&text, kind, origin()).unwrap();
            prop_assert_eq!(back.len(), split.len());
            for (a, b) in back.examples.iter().zip(&split.examples) {
                prop_assert_eq!(&a.id, &b.id);
                prop_assert_eq!(&a.text, &b.text);
                if kind != LabelKind::Intensity {
                    prop_assert_eq!(a.valence, b.valence);
                }
                if kind != LabelKind::Classification {
                    prop_assert_eq!(a.intensity, b.intensity);
                }
            }
        }
    }

    #[test]
    fn ordinal_mapping_is_a_bijection(o in -3i32..=3) {
        let c = ValenceClass::from_ordinal(o).unwrap();
        prop_assert_eq!(c.ordinal(), o);
        prop_assert_eq!(ValenceClass::from_index(c.index()), Some(c));
    }
}

#[test]
fn ordinals_outside_range_are_rejected() {
    for o in [-4, 4, 100] {
        assert!(ValenceClass::from_ordinal(o).is_none());
    }
    assert!(ValenceClass::from_index(7).is_none());
}

#[test]
fn loads_files_and_reports_line_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("dev.tsv");
    std::fs::write(
        &path,
        "ID\tTweet\tAffect Dimension\tIntensity Class\n\
         a1\tso happy today\tvalence\t2: moderately positive mental state can be inferred\n\
         a2\tmeh\tvalence\t0: neutral or mixed mental state can be inferred\n\
         a3\tawful\tvalence\t7: nonsense\n",
    )
    .unwrap();
    match load_dataset(&path, LabelKind::Classification) {
        Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
        other => panic!("unexpected {other:?}"),
    }
    let missing = dir.path().join("nope.tsv");
    let err = load_dataset(&missing, LabelKind::Intensity).unwrap_err();
    assert!(err.to_string().contains("nope.tsv"));
}

#[test]
fn header_only_file_is_empty() {
    let s = parse_dataset("ID\tTweet\tAffect Dimension\tIntensity Score\n", LabelKind::Intensity, origin()).unwrap();
    assert!(s.is_empty());
    assert_eq!(histogram(&DatasetSplit::default()).unwrap().total(), 0);
}

#[test]
fn rejects_bad_rows() {
    let h = "ID\tTweet\tAffect Dimension\tIntensity Score\n";
    for body in [
        "x\tNONE\tvalence\t0.5\n",
        "x\thi\tvalence\t1.5\n",
        "x\thi\tvalence\t\n",
        "x\thi\tvalence\n",
        "x\thi\tvalence\t0.2\nx\tagain\tvalence\t0.3\n",
    ] {
        assert!(parse_dataset(&format!("{h}{body}"), LabelKind::Intensity, origin()).is_err(), "{body:?}");
    }
}

#[test]
fn detects_layouts() {
    assert_eq!(detect_kind("a\tb\tc\td\te\n"), Some(LabelKind::Both));
    assert_eq!(detect_kind("ID\tTweet\tAffect Dimension\tIntensity Class\n"), Some(LabelKind::Classification));
    assert_eq!(detect_kind("ID\tTweet\tAffect Dimension\tIntensity Score\n"), Some(LabelKind::Intensity));
    assert_eq!(detect_kind("a\tb\tc\td\n1\tx\tv\t0.4\n"), Some(LabelKind::Intensity));
    assert_eq!(detect_kind("a\tb\tc\td\n1\tx\tv\t-1: slightly\n"), Some(LabelKind::Classification));
    assert_eq!(detect_kind("a\tb\n"), None);
}

#[test]
fn join_requires_matching_ids() {
    let t = |id: &str, c: Option<ValenceClass>, s: Option<f64>| LabeledTweet {
        id: id.into(),
        text: "x".into(),
        valence: c,
        intensity: s,
    };
    let classes = DatasetSplit {
        name: "c".into(),
        examples: vec![t("1", Some(ValenceClass::Neu), None), t("2", Some(ValenceClass::PosV), None)],
    };
    let scores = DatasetSplit {
        name: "s".into(),
        examples: vec![t("2", None, Some(0.9)), t("1", None, Some(0.5))],
    };
    let both = join_labels(&classes, &scores).unwrap();
    assert_eq!(both.examples[0].intensity, Some(0.5));
    assert_eq!(both.examples[1].valence, Some(ValenceClass::PosV));

    let short = DatasetSplit {
        name: "s".into(),
        examples: vec![t("2", None, Some(0.9))],
    };
    assert!(matches!(join_labels(&classes, &short), Err(Error::MissingIntensity(ids)) if ids == ["1"]));
}

#[test]
fn histogram_counts_classes_and_round_trips() {
    let examples = [0, 6, 6, 3, 3, 3]
        .iter()
        .enumerate()
        .map(|(i, &c)| LabeledTweet {
            id: i.to_string(),
            text: String::new(),
            valence: ValenceClass::from_index(c),
            intensity: None,
        })
        .collect();
    let h = histogram(&DatasetSplit {
        name: "h".into(),
        examples,
    })
    .unwrap();
    assert_eq!(h.get(ValenceClass::Neu), 3);
    assert_eq!(h.get(ValenceClass::PosV), 2);
    assert_eq!(h.total(), 6);
    let json = serde_json::to_string(&h).unwrap();
    assert_eq!(serde_json::from_str::<affect_mtl::corpus::ClassHistogram>(&json).unwrap(), h);
}
