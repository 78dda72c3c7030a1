use changekit_core::metrics::{lcs_length, meteor, meteor_detail, rouge_l, MetricConfig, TokenSeq};
use proptest::prelude::*;

const VOCAB: [&str; 10] = [
    "road",
    "roads",
    "building",
    "buildings",
    "built",
    "tree",
    "trees",
    "the",
    "a",
    "new",
];

fn sentence(max: usize) -> impl Strategy<Value = TokenSeq> {
    proptest::collection::vec(0..VOCAB.len(), 1..=max)
        .prop_map(|ix| TokenSeq::from_tokens(ix.into_iter().map(|i| VOCAB[i])))
}

fn small_seq() -> impl Strategy<Value = Vec<String>> {
    proptest::collection::vec(prop_oneof![Just("a"), Just("b"), Just("c")], 0..=8)
        .prop_map(|v| v.into_iter().map(str::to_owned).collect())
}

/// Longest common subsequence by enumerating the subsequences of `a`.
fn exhaustive_lcs(a: &[String], b: &[String]) -> usize {
    (0u32..1 << a.len())
        .filter(|bits| {
            let mut rest = b.iter();
            (0..a.len())
                .filter(|i| bits & (1 << i) != 0)
                .all(|i| rest.any(|t| *t == a[i]))
        })
        .map(u32::count_ones)
        .max()
        .unwrap_or(0) as usize
}

proptest! {
    #[test]
    fn lcs_matches_exhaustive_search(a in small_seq(), b in small_seq()) {
        let got = lcs_length(&a, &b);
        prop_assert_eq!(got, exhaustive_lcs(&a, &b));
        prop_assert_eq!(got, lcs_length(&b, &a));
        prop_assert!(got <= a.len().min(b.len()));
    }

    #[test]
    fn scores_lie_in_unit_interval(c in sentence(12), refs in proptest::collection::vec(sentence(12), 1..4)) {
        let config = MetricConfig::default();
        for score in [rouge_l(&c, &refs, &config).unwrap(), meteor(&c, &refs, &config).unwrap()] {
            prop_assert!((0.0..=1.0).contains(&score), "score {}", score);
        }
    }

    #[test]
    fn another_reference_never_hurts(
        c in sentence(12),
        refs in proptest::collection::vec(sentence(12), 1..4),
        extra in sentence(12),
    ) {
        let config = MetricConfig::default();
        let mut more = refs.clone();
        more.push(extra);
        prop_assert!(rouge_l(&c, &more, &config).unwrap() >= rouge_l(&c, &refs, &config).unwrap());
        prop_assert!(meteor(&c, &more, &config).unwrap() >= meteor(&c, &refs, &config).unwrap());
    }

    #[test]
    fn chunks_bounded_by_matches(c in sentence(14), r in sentence(14)) {
        let d = meteor_detail(&c, &[r], &MetricConfig::default()).unwrap();
        prop_assert!(d.chunks <= d.matches);
        prop_assert_eq!(d.chunks == 0, d.matches == 0);
    }

    #[test]
    fn identical_sentences_form_one_chunk(c in sentence(20)) {
        let d = meteor_detail(&c, std::slice::from_ref(&c), &MetricConfig::default()).unwrap();
        prop_assert_eq!(d.matches, c.len());
        prop_assert_eq!(d.chunks, 1);
        let expected = 1.0 - 0.5 * (1.0 / c.len() as f64).powi(3);
        prop_assert!((d.score - expected).abs() < 1e-12);
    }

    #[test]
    fn scoring_is_deterministic(c in sentence(10), r in sentence(10)) {
        let config = MetricConfig::default();
        let a = meteor_detail(&c, std::slice::from_ref(&r), &config).unwrap();
        let b = meteor_detail(&c, &[r], &config).unwrap();
        prop_assert_eq!(a.score.to_bits(), b.score.to_bits());
        prop_assert_eq!(a.path, b.path);
    }
}
