use std::collections::BTreeMap;

use keychord::evalkit::{jsd, self_bleu, NGramDistribution, BLEU_EPSILON};
use proptest::prelude::*;

fn hist(order: usize, counts: &[u64]) -> NGramDistribution {
    let map: BTreeMap<Vec<String>, u64> = counts
        .iter()
        .enumerate()
        .map(|(i, &c)| ((0..order).map(|k| format!("T{}", (i + k) % 7)).collect(), c))
        .collect();
    NGramDistribution::from_counts(order, map)
}

/// JSD as entropy of the mixture minus mean entropy, base 2.
fn jsd_entropy_form(a: &NGramDistribution, b: &NGramDistribution) -> f64 {
    let h = |ps: &mut dyn Iterator<Item = f64>| -> f64 {
        ps.filter(|&p| p > 0.0).map(|p| -p * p.log2()).sum()
    };
    let keys: std::collections::BTreeSet<_> = a.counts().keys().chain(b.counts().keys()).collect();
    let pa: Vec<f64> = keys.iter().map(|k| a.probability(k)).collect();
    let pb: Vec<f64> = keys.iter().map(|k| b.probability(k)).collect();
    let mix = h(&mut pa.iter().zip(&pb).map(|(x, y)| 0.5 * (x + y)));
    mix - 0.5 * (h(&mut pa.iter().copied()) + h(&mut pb.iter().copied()))
}

fn counts() -> impl Strategy<Value = Vec<u64>> {
    prop::collection::vec(0..50u64, 1..12).prop_filter("non-empty", |v| v.iter().any(|&c| c > 0))
}

fn progression_set() -> impl Strategy<Value = Vec<Vec<String>>> {
    let chord = prop::sample::select(vec!["C", "G", "Am", "F", "Dm7", "E7", "Bb", "G/B"]);
    prop::collection::vec(prop::collection::vec(chord.prop_map(String::from), 2..6), 2..12)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn jsd_matches_oracle_and_is_symmetric(a in counts(), b in counts(), order in 1..3usize) {
        let (x, y) = (hist(order, &a), hist(order, &b));
        let d = jsd(&x, &y).unwrap();
        prop_assert!((0.0..=1.0).contains(&d));
        prop_assert!((d - jsd(&y, &x).unwrap()).abs() <= 1e-12);
        prop_assert!((d - jsd_entropy_form(&x, &y)).abs() <= 1e-12);
        prop_assert_eq!(jsd(&x, &x).unwrap(), 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn self_bleu_ignores_order(set in progression_set(), rot in 0..12usize, n in 1..5usize) {
        let mut shuffled = set.clone();
        shuffled.reverse();
        let len = shuffled.len();
        shuffled.rotate_left(rot % len);
        let a = self_bleu(&set, n, BLEU_EPSILON).unwrap();
        let b = self_bleu(&shuffled, n, BLEU_EPSILON).unwrap();
        prop_assert!((a - b).abs() <= 1e-12, "{} vs {}", a, b);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&a));
    }

    #[test]
    fn duplicating_an_item_never_lowers_self_bleu(set in progression_set(), pick in 0..12usize, n in 1..5usize) {
        let before = self_bleu(&set, n, BLEU_EPSILON).unwrap();
        let mut bigger = set.clone();
        bigger.push(set[pick % set.len()].clone());
        let after = self_bleu(&bigger, n, BLEU_EPSILON).unwrap();
        prop_assert!(after >= before - 1e-12, "{} -> {}", before, after);
    }
}
