mod common;

use affect_mtl::normalize::{correct_spelling, replace_entities, segment_hashtag, FrequencyLexicon, NormalizeOptions, Normalizer};
use proptest::prelude::*;

#[test]
fn golden_transformations() {
    let n = common::normalizer();
    for (raw, want) in common::goldens() {
        assert_eq!(n.tokens(&raw).join(" "), want, "input {raw:?}");
    }
}

#[test]
fn normalization_is_idempotent_on_goldens() {
    let n = common::normalizer();
    for (raw, _) in common::goldens() {
        let once = n.tokens(&raw).join(" ");
        assert_eq!(n.tokens(&once).join(" "), once);
    }
}

/// Every split of `tag` into non-empty pieces, scored by the same unigram
/// model.
fn brute_force(tag: &str, freq: &FrequencyLexicon) -> Vec<(f64, Vec<String>)> {
    let chars: Vec<char> = tag.chars().collect();
    let n = chars.len();
    let mut out = Vec::new();
    for mask in 0u32..(1 << (n - 1)) {
        let mut words = Vec::new();
        let mut start = 0;
        for i in 1..n {
            if mask & (1 << (i - 1)) != 0 {
                words.push(chars[start..i].iter().collect::<String>());
                start = i;
            }
        }
        words.push(chars[start..].iter().collect::<String>());
        let score = words.iter().map(|w| freq.log_prob(w)).sum();
        out.push((score, words));
    }
    out
}

#[test]
fn segmentation_matches_brute_force() {
    let freq = common::freq();
    let tags = std::fs::read_to_string(common::data("hashtags.txt")).unwrap();
    for tag in tags.lines().filter(|t| !t.is_empty()) {
        assert!(tag.chars().count() <= 12, "{tag}");
        let got = segment_hashtag(tag, &freq);
        let got_score: f64 = got.iter().map(|w| freq.log_prob(w)).sum();
        let mut all = brute_force(tag, &freq);
        all.sort_by(|a, b| b.0.total_cmp(&a.0));
        assert!((all[0].0 - got_score).abs() < 1e-9, "{tag}: {got:?} vs {:?}", all[0].1);
        if all.len() > 1 && all[0].0 - all[1].0 > 1e-9 {
            assert_eq!(got, all[0].1, "{tag}");
        }
    }
}

#[test]
fn iamcool_segments() {
    assert_eq!(segment_hashtag("iamcool", &common::freq()), vec!["i", "am", "cool"]);
}

#[test]
fn spelling_examples() {
    let f = common::freq();
    assert_eq!(correct_spelling("facbok", &f, 2), "facebook");
    assert_eq!(correct_spelling("happpy", &f, 2), "happy");
    assert_eq!(correct_spelling("zzzzzzzz", &f, 2), "zzzzzzzz");
    assert_eq!(correct_spelling("cool", &f, 2), "cool");
}

#[test]
fn entities() {
    assert_eq!(replace_entities("@handle hi"), "username hi");
    assert_eq!(replace_entities("a http://t.co/x b"), "a url b");
}

#[test]
fn stages_can_be_disabled() {
    let opts = NormalizeOptions {
        correct_spelling: false,
        segment_hashtags: false,
        ..NormalizeOptions::default()
    };
    let n = Normalizer::new(common::freq(), common::emoji(), opts);
    assert_eq!(n.tokens("facbok #iamcool").join(" "), "facbok iamcool");
}

#[test]
fn unmatched_emoji_survive_when_asked() {
    let opts = NormalizeOptions {
        keep_unmatched_emoji: true,
        ..NormalizeOptions::default()
    };
    let keep = Normalizer::new(common::freq(), common::emoji(), opts);
    assert_eq!(keep.tokens("good 🐍").join(" "), "good 🐍");
    assert_eq!(common::normalizer().tokens("good 🐍").join(" "), "good");
}

proptest! {
    #[test]
    fn idempotent_on_random_text(s in "[a-zA-Z #@!?.,'😂]{0,40}") {
        let n = common::normalizer();
        let once = n.tokens(&s).join(" ");
        prop_assert_eq!(n.tokens(&once).join(" "), once);
    }
}
