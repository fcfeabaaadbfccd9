use hashspread::classify::{cross_validate, Dataset, LabeledSet, ModelKind, ModelSpec};
use hashspread::corpus::{build_index, IndexOptions, OccurrenceIndex};
use hashspread::features::{assemble_all, read_features_csv, write_features_csv};
use hashspread::synth::{generate, verify, DiscrepancyKind, Ledger, WorldSpec};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn world() -> (OccurrenceIndex, Ledger) {
    let spec = WorldSpec {
        cities: 60,
        total_uses: 40_000,
        seed: 11,
        ..WorldSpec::default()
    }
    .with_hashtags(160);
    let corpus = generate(&spec).unwrap();
    let index = build_index(&corpus.records, corpus.locations, IndexOptions::default());
    (index, corpus.ledger)
}

fn dataset(index: &OccurrenceIndex, ledger: &Ledger) -> Dataset {
    let features = assemble_all(index, 30);
    let labels = LabeledSet::new(ledger.labels()).unwrap();
    Dataset::from_features(&features, &labels).unwrap()
}

#[test]
fn synthetic_world_verifies_clean() {
    let (index, ledger) = world();
    let report = verify(&ledger, &index);
    assert!(
        report.is_clean(),
        "{:?}",
        &report.discrepancies[..report.discrepancies.len().min(3)]
    );
    assert_eq!(report.found_uses, 40_000);
}

#[test]
fn dropping_a_hashtag_is_reported_missing() {
    let (index, mut ledger) = world();
    let victim = ledger.hashtags[0].hashtag.clone();
    let cutoff = index.first_use(index.require(&victim).unwrap());
    let filtered = index.filter_first_use(chrono::DateTime::from_timestamp(cutoff + 1, 0).unwrap());
    let report = verify(&ledger, &filtered);
    assert!(report
        .discrepancies
        .iter()
        .any(|d| d.hashtag == victim && d.kind == DiscrepancyKind::Missing));
    ledger.hashtags.retain(|e| e.hashtag != victim);
    let report = verify(&ledger, &index);
    assert!(report
        .discrepancies
        .iter()
        .any(|d| d.hashtag == victim && d.kind == DiscrepancyKind::Unexpected));
}

#[test]
fn features_survive_csv() {
    let (index, _) = world();
    let rows = assemble_all(&index, 30);
    let mut buf = Vec::new();
    write_features_csv(&mut buf, &rows).unwrap();
    let back = read_features_csv(&buf[..]).unwrap();
    assert_eq!(back.len(), rows.len());
    for (a, b) in rows.iter().zip(&back) {
        assert_eq!(a.hashtag, b.hashtag);
        for (x, y) in a.values().iter().zip(b.values()) {
            match (x, y) {
                (Some(x), Some(y)) => assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0)),
                (None, None) => {}
                other => panic!("{other:?}"),
            }
        }
    }
}

#[test]
fn shuffled_labels_fall_to_chance() {
    let (index, ledger) = world();
    let data = dataset(&index, &ledger);
    let spec = ModelSpec::new(ModelKind::Cart);
    let real = cross_validate(&spec, &data, 5, 2, 3)
        .unwrap()
        .summary
        .accuracy
        .mean;
    let mut labels = data.labels.clone();
    labels.shuffle(&mut ChaCha8Rng::seed_from_u64(99));
    let shuffled = cross_validate(&spec, &data.with_labels(labels), 5, 2, 3)
        .unwrap()
        .summary
        .accuracy
        .mean;
    assert!(real > 0.9, "real {real}");
    assert!(shuffled < 0.45, "shuffled {shuffled}");
}

#[test]
fn cross_validation_is_seed_deterministic() {
    let (index, ledger) = world();
    let data = dataset(&index, &ledger);
    let spec = ModelSpec::new(ModelKind::NaiveBayes);
    let a = cross_validate(&spec, &data, 4, 3, 5).unwrap();
    let b = cross_validate(&spec, &data, 4, 3, 5).unwrap();
    assert_eq!(
        serde_json::to_string(&a).unwrap(),
        serde_json::to_string(&b).unwrap()
    );
    let pooled: u64 = a.pooled_confusion.iter().flatten().sum();
    assert_eq!(pooled as usize, data.len() * 3);
}
