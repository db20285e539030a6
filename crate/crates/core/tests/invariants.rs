use chrono::NaiveDateTime;
use egoact::dataset::{
    apportion, class_counts, manifest_text, parse_manifest, stratified_split, ActivityLabelSet,
    Dataset, ImageRecord, Partition, SplitRatios, TIMESTAMP_FORMAT,
};
use egoact::features::{color_histogram, fit_minmax_scaler};
use egoact::metrics::{aggregate, confusion};
use egoact::pixel::{softmax, ProbabilityTable};
use egoact::tabular::{forest_fit, knn_fit, ForestConfig, KnnModel, RandomForest};
use image::{Rgb, RgbImage};
use proptest::prelude::*;

const LABELS: [&str; 4] = ["Eating", "Working", "TV", "Family"];

fn records_strategy() -> impl Strategy<Value = Vec<(u32, Option<usize>, bool)>> {
    prop::collection::vec(
        (0u32..100_000, prop::option::of(0usize..4), any::<bool>()),
        1..80,
    )
}

fn dataset(raw: &[(u32, Option<usize>, bool)]) -> Dataset {
    let base = NaiveDateTime::parse_from_str("2024-01-01T00:00:00", TIMESTAMP_FORMAT).unwrap();
    let records = raw
        .iter()
        .enumerate()
        .map(|(i, &(minute, label, deleted))| ImageRecord {
            id: format!("img{i}"),
            path: format!("d/img{i}.jpg"),
            timestamp: base + chrono::Duration::minutes(minute as i64),
            label: label.map(|l| LABELS[l].to_string()),
            user_id: "u".into(),
            deleted,
        })
        .collect();
    Dataset::new(ActivityLabelSet::new(LABELS).unwrap(), records).unwrap()
}

proptest! {
    #[test]
    fn manifest_round_trip(raw in records_strategy()) {
        let ds = dataset(&raw);
        let text = manifest_text(&ds);
        let back = parse_manifest(&text).unwrap();
        prop_assert_eq!(&back, &ds);
        prop_assert_eq!(manifest_text(&back), text);
    }

    #[test]
    fn split_partitions_every_class(raw in records_strategy(), seed in any::<u64>()) {
        let ds = dataset(&raw);
        prop_assume!(class_counts(&ds).iter().all(|&c| c > 0));
        let ratios = SplitRatios::default();
        let split = stratified_split(&ds, ratios, seed).unwrap();
        prop_assert_eq!(split.len(), ds.labeled().len());
        for (class, &n) in class_counts(&ds).iter().enumerate() {
            let want = apportion(n, &ratios);
            for (slot, part) in [Partition::Train, Partition::Validation, Partition::Test].into_iter().enumerate() {
                let got = ds
                    .labeled()
                    .iter()
                    .filter(|(r, c)| *c == class && split.get(&r.id) == Some(part))
                    .count();
                prop_assert_eq!(got, want[slot]);
            }
        }
        prop_assert_eq!(stratified_split(&ds, ratios, seed).unwrap(), split);
    }

    #[test]
    fn probability_table_round_trip(rows in prop::collection::vec(prop::collection::vec(-30.0f64..30.0, 4), 1..30)) {
        let set = ActivityLabelSet::new(LABELS).unwrap();
        let mut table = ProbabilityTable::<f64>::new(set.clone());
        for (i, logits) in rows.iter().enumerate() {
            table.insert(format!("img{i}"), softmax(logits)).unwrap();
        }
        prop_assert_eq!(ProbabilityTable::<f64>::from_text(&table.to_text(), &set).unwrap(), table);
    }

    #[test]
    fn model_text_round_trip(
        rows in prop::collection::vec(prop::collection::vec(-1e3f64..1e3, 3), 2..40),
        seed in any::<u64>(),
    ) {
        let labels: Vec<usize> = (0..rows.len()).map(|i| i % 3).collect();
        let forest = forest_fit(&rows, &labels, 3, &ForestConfig { n_trees: 4, seed, ..Default::default() }).unwrap();
        let back = RandomForest::<f64>::from_text(&forest.to_text()).unwrap();
        prop_assert_eq!(&back, &forest);
        let knn = knn_fit(&rows, &labels, 3, 1).unwrap();
        prop_assert_eq!(KnnModel::<f64>::from_text(&knn.to_text()).unwrap(), knn);
        for r in &rows {
            prop_assert_eq!(back.predict_proba(r).unwrap(), forest.predict_proba(r).unwrap());
        }
    }

    #[test]
    fn forest_is_exact_on_distinct_training_rows(
        rows in prop::collection::btree_set((-100i32..100, -100i32..100), 2..40),
        seed in any::<u64>(),
    ) {
        // Without bootstrap and with every feature examined, fully grown
        // trees separate any distinct points.
        let rows: Vec<Vec<f64>> = rows.into_iter().map(|(a, b)| vec![a as f64, b as f64]).collect();
        let labels: Vec<usize> = (0..rows.len()).map(|i| (i * 7) % 3).collect();
        let cfg = ForestConfig { n_trees: 3, bootstrap: false, features_per_split: Some(2), seed, ..Default::default() };
        let forest = forest_fit(&rows, &labels, 3, &cfg).unwrap();
        for (r, &l) in rows.iter().zip(&labels) {
            prop_assert_eq!(forest.predict_proba(r).unwrap()[l], 1.0);
        }
    }

    #[test]
    fn histogram_of_flat_image_is_one_hot(rgb in any::<[u8; 3]>(), bins in 1usize..32, side in 1u32..8) {
        let img = RgbImage::from_pixel(side, side, Rgb(rgb));
        let h = color_histogram::<f32>(&img, bins).unwrap();
        for c in 0..3 {
            prop_assert_eq!(h.channel(c).iter().filter(|&&v| v == 1.0).count(), 1);
            prop_assert_eq!(h.channel(c).iter().filter(|&&v| v == 0.0).count(), bins - 1);
        }
    }

    #[test]
    fn scaler_maps_extremes_to_unit_bounds(rows in prop::collection::vec(prop::collection::vec(-1e3f32..1e3, 3), 2..20)) {
        let scaler = fit_minmax_scaler(&rows).unwrap();
        let scaled = scaler.apply_all(&rows).unwrap();
        for j in 0..3 {
            let col: Vec<f32> = scaled.iter().map(|r| r[j]).collect();
            let varying = rows.iter().any(|r| r[j] != rows[0][j]);
            let lo = col.iter().cloned().fold(f32::INFINITY, f32::min);
            let hi = col.iter().cloned().fold(f32::NEG_INFINITY, f32::max);
            if varying {
                prop_assert_eq!((lo, hi), (0.0, 1.0));
            } else {
                prop_assert!(col.iter().all(|&v| v == 0.0));
            }
        }
    }

    #[test]
    fn aggregate_agrees_with_confusion(pairs in prop::collection::vec((0usize..4, 0usize..4), 1..300)) {
        let set = ActivityLabelSet::new(LABELS).unwrap();
        let truth: Vec<usize> = pairs.iter().map(|p| p.0).collect();
        let pred: Vec<usize> = pairs.iter().map(|p| p.1).collect();
        let cm = confusion(&pred, &truth, &set).unwrap();
        let report = cm.report();
        let supports: Vec<f64> = cm.supports().iter().map(|&s| s as f64).collect();
        let (total, avg) = aggregate(&report.per_class_recall, &supports);
        prop_assert!((total - report.total_accuracy).abs() < 1e-9);
        prop_assert!((avg - report.avg_class_accuracy).abs() < 1e-9);
    }
}
