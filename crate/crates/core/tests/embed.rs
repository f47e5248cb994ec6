use affect_mtl::embed::{EmbeddingTable, VectorSource, WordComposer};
use affect_mtl::Error;
use proptest::prelude::*;

fn table(name: &str, dim: usize, rows: &[(&str, &[f64])]) -> EmbeddingTable {
    let mut t = EmbeddingTable::new(name, dim);
    for (k, v) in rows {
        t.insert(k, v).unwrap();
    }
    t
}

fn composer() -> WordComposer {
    let glove = table("glove", 2, &[("cat", &[1.0, 2.0]), ("😂", &[5.0, 5.0])]);
    let emoji = table("emoji", 3, &[("😂", &[9.0, 9.0, 9.0]), ("❤", &[0.5, 0.25, 0.125])]);
    let chars = table("chars", 3, &[("a", &[3.0, 0.0, 0.0]), ("b", &[0.0, 3.0, 6.0])]);
    WordComposer::new(glove, Some(emoji), Some(chars), 3).unwrap()
}

#[test]
fn every_lookup_branch() {
    let c = composer();
    let cases: [(&str, Vec<f64>, VectorSource); 7] = [
        ("cat", vec![1.0, 2.0, 0.0], VectorSource::Glove),
        ("😂", vec![5.0, 5.0, 0.0], VectorSource::Glove),
        ("❤", vec![0.5, 0.25, 0.125], VectorSource::Emoji),
        ("ab", vec![1.5, 1.5, 3.0], VectorSource::Characters),
        ("abz", vec![1.0, 1.0, 2.0], VectorSource::Characters),
        ("zzz", vec![0.0, 0.0, 0.0], VectorSource::Characters),
        ("", vec![0.0, 0.0, 0.0], VectorSource::Characters),
    ];
    for (word, want, src) in cases {
        assert_eq!(c.compose_with_source(word), (want, src), "{word:?}");
    }
}

#[test]
fn table_widths_are_checked() {
    let g = || table("g", 4, &[]);
    assert!(matches!(WordComposer::new(g(), None, None, 3), Err(Error::Width { .. })));
    assert!(WordComposer::new(g(), Some(EmbeddingTable::new("e", 3)), None, 4).is_err());
    assert!(WordComposer::new(g(), None, Some(EmbeddingTable::new("c", 5)), 4).is_err());
    assert!(WordComposer::new(g(), None, None, 4).is_ok());
    let mut t = EmbeddingTable::new("t", 2);
    assert!(t.insert("x", &[1.0]).is_err());
}

#[test]
fn file_loading() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("vec.txt");
    std::fs::write(&p, "the 0.1 0.2\n  1 2\nthe 9 9\nnew york 3 4 \n").unwrap();
    let t = EmbeddingTable::load(&p, 2).unwrap();
    assert_eq!(t.len(), 3);
    assert_eq!(t.get("the"), Some(&[0.1, 0.2][..]));
    assert_eq!(t.get(" "), Some(&[1.0, 2.0][..]));
    assert_eq!(t.get("new york"), Some(&[3.0, 4.0][..]));

    std::fs::write(&p, "ok 1 2\nbad 1 x\n").unwrap();
    match EmbeddingTable::load(&p, 2) {
        Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
        other => panic!("unexpected {other:?}"),
    }
    std::fs::write(&p, "short 1\n").unwrap();
    assert!(EmbeddingTable::load(&p, 2).is_err());
    assert!(EmbeddingTable::load(&dir.path().join("missing.txt"), 2).is_err());
}

#[test]
fn encode_pads_and_truncates() {
    let c = composer();
    let toks: Vec<String> = ["cat", "ab", "❤"].iter().map(|s| s.to_string()).collect();
    let m = c.encode(&toks, 5);
    assert_eq!(m.length, 3);
    assert_eq!(m.mask(), vec![true, true, true, false, false]);
    assert_eq!(m.row(2), &[0.5, 0.25, 0.125]);
    assert!(m.values[9..].iter().all(|&v| v == 0.0));
    let short = c.encode(&toks, 2);
    assert_eq!(short.length, 2);
    assert_eq!(short.values, m.values[..6]);
    assert_eq!(c.encode(&[], 4).length, 0);
}

proptest! {
    #[test]
    fn character_vector_is_mean_over_chars(word in "[ab]{1,12}") {
        let c = composer();
        let (v, src) = c.compose_with_source(&word);
        prop_assert_eq!(src, VectorSource::Characters);
        let n = word.chars().count() as f64;
        let na = word.chars().filter(|&ch| ch == 'a').count() as f64;
        let nb = n - na;
        let want = [3.0 * na / n, 3.0 * nb / n, 6.0 * nb / n];
        for (a, b) in v.iter().zip(want) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }
}
