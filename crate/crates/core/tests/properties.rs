use std::collections::BTreeMap;

use proptest::prelude::*;

use landuse_coding::encoder::{encode_cooccurrence, encode_layout, reverse_for_unidirectional, SemanticVector};
use landuse_coding::heatmap::{box_heatmap, overlay_normalize};
use landuse_coding::metrics::{confusion, macro_metrics};
use landuse_coding::scene::{rebalance, split_dataset};
use landuse_coding::synth::{tamper, tamper_label};
use landuse_coding::{BBox, EncoderConfig, SceneRecord, Taxonomy};

fn arb_box() -> impl Strategy<Value = BBox> {
    (0usize..8, 0.0..=1.0f64, 0.0..0.8f64, 0.0..0.8f64, 0.01..0.2f64, 0.01..0.2f64)
        .prop_map(|(c, p, x, y, w, h)| BBox::new(c, p, x, y, w, h))
}

fn record(id: usize, landuse: usize) -> SceneRecord {
    SceneRecord {
        scene_id: format!("r{id}"),
        landuse: Some(landuse),
        width: 32,
        height: 32,
        lat: None,
        lon: None,
        boxes: vec![],
    }
}

proptest! {
    #[test]
    fn encoders_keep_every_box_up_to_length(boxes in proptest::collection::vec(arb_box(), 0..40), l in 1usize..30) {
        let cfg = EncoderConfig::with_length(l);
        for meta in [encode_layout(&boxes, &cfg), encode_cooccurrence(&boxes, &cfg)] {
            prop_assert_eq!(meta.len(), l);
            let kept = boxes.iter().filter(|b| b.score > 0.0).count().min(l);
            prop_assert_eq!(meta.nonzero_count(), kept);
            // padding only trails
            let first_pad = meta.sequence.iter().position(SemanticVector::is_padding).unwrap_or(l);
            prop_assert!(meta.sequence[first_pad..].iter().all(SemanticVector::is_padding));
        }
    }

    #[test]
    fn cooccurrence_scores_never_increase(boxes in proptest::collection::vec(arb_box(), 0..30)) {
        let meta = encode_cooccurrence(&boxes, &EncoderConfig::default());
        let scores: Vec<f64> = meta.sequence.iter().map(|v| v.0.iter().cloned().fold(0.0, f64::max)).collect();
        prop_assert!(scores.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn reversal_is_an_involution(boxes in proptest::collection::vec(arb_box(), 0..30)) {
        let meta = encode_layout(&boxes, &EncoderConfig::default());
        let back = reverse_for_unidirectional(&reverse_for_unidirectional(&meta));
        prop_assert_eq!(back.sequence, meta.sequence);
    }

    #[test]
    fn tamper_steps_differ_in_one_box(boxes in proptest::collection::vec(arb_box(), 1..12)) {
        let steps = tamper(&boxes, boxes.len()).unwrap();
        prop_assert_eq!(&steps[0], &boxes);
        for w in steps.windows(2) {
            let changed: Vec<usize> = (0..boxes.len()).filter(|&i| w[0][i] != w[1][i]).collect();
            prop_assert_eq!(changed.len(), 1);
            let i = changed[0];
            prop_assert_eq!(w[1][i].category, tamper_label(w[0][i].category));
        }
        prop_assert!(tamper(&boxes, boxes.len() + 1).is_err());
    }

    #[test]
    fn macro_metrics_ignore_class_order(pairs in proptest::collection::vec((0usize..4, 0usize..4), 1..80), perm in Just([0usize, 1, 2, 3]).prop_shuffle()) {
        let (pred, truth): (Vec<usize>, Vec<usize>) = pairs.iter().cloned().unzip();
        let a = macro_metrics(&confusion(&pred, &truth, 4).unwrap());
        let pp: Vec<usize> = pred.iter().map(|&c| perm[c]).collect();
        let tp: Vec<usize> = truth.iter().map(|&c| perm[c]).collect();
        let b = macro_metrics(&confusion(&pp, &tp, 4).unwrap());
        prop_assert!((a.precision - b.precision).abs() < 1e-12);
        prop_assert!((a.recall - b.recall).abs() < 1e-12);
        prop_assert!((a.f1 - b.f1).abs() < 1e-12);
        for v in [a.precision, a.recall, a.f1, a.mean_class_f1] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn split_is_stratified_and_total(counts in proptest::array::uniform4(3usize..40), seed in any::<u64>()) {
        let records: Vec<SceneRecord> = counts.iter().enumerate()
            .flat_map(|(c, &n)| (0..n).map(move |i| (c, i)))
            .enumerate()
            .map(|(id, (c, _))| record(id, c))
            .collect();
        let s = split_dataset(&records, seed, 0.25, 0.1).unwrap();
        prop_assert_eq!(s.train.len() + s.val.len() + s.test.len(), records.len());
        for (c, &n) in counts.iter().enumerate() {
            let in_test = s.test.iter().filter(|r| r.landuse == Some(c)).count();
            prop_assert_eq!(in_test, ((n as f64) * 0.25).round() as usize);
        }
        prop_assert_eq!(s, split_dataset(&records, seed, 0.25, 0.1).unwrap());
    }

    #[test]
    fn rebalance_counts(n in 1usize..30, factor in 1.0..4.0f64, seed in any::<u64>()) {
        let records: Vec<SceneRecord> = (0..n).map(|i| record(i, 2)).chain((0..5).map(|i| record(100 + i, 0))).collect();
        let factors = BTreeMap::from([(2usize, factor)]);
        let out = rebalance(&records, &factors, seed).unwrap();
        let public = out.iter().filter(|r| r.landuse == Some(2)).count();
        let expected = n * factor.floor() as usize + ((factor - factor.floor()) * n as f64).round() as usize;
        prop_assert_eq!(public, expected);
        prop_assert_eq!(out.len() - public, 5);
    }

    #[test]
    fn overlay_peaks_at_one(boxes in proptest::collection::vec((0.0..50.0f64, 0.0..50.0f64, 2.0..30.0f64, 2.0..30.0f64), 1..4)) {
        let fields: Vec<_> = boxes.iter().map(|&b| box_heatmap::<f64>(b, 64, 48).unwrap()).collect();
        let o = overlay_normalize(&fields).unwrap();
        prop_assert!((o.max() - 1.0).abs() < 1e-12);
        prop_assert!(o.values.iter().all(|v| (0.0..=1.0).contains(v)));
    }
}

#[test]
fn taxonomy_round_trips_names() {
    for (i, n) in Taxonomy::BUILDINGS.iter().enumerate() {
        assert_eq!(Taxonomy::building_index(n).unwrap(), i);
    }
    for (i, n) in Taxonomy::LANDUSES.iter().enumerate() {
        assert_eq!(Taxonomy::landuse_index(n).unwrap(), i);
    }
}
