use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sdq_core::corpus::{load_corpus, save_corpus, Corpus};
use sdq_core::synth::{random_record, random_records};

#[test]
fn thousand_random_records_survive_save_and_load() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.jsonl");
    let records = random_records(1000, 11);
    let corpus = Corpus::from_records(records.clone()).unwrap();
    save_corpus(&corpus, &path).unwrap();
    let first = std::fs::read(&path).unwrap();
    let loaded = load_corpus(&path).unwrap();
    assert_eq!(loaded.records(), &records[..]);
    save_corpus(&loaded, &path).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), first);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn load_after_save_is_identity(seed in any::<u64>(), n in 0usize..20) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let records: Vec<_> = (0..n).map(|i| random_record(&mut rng, &format!("p{i}"))).collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        save_corpus(&Corpus::from_records(records.clone()).unwrap(), &path).unwrap();
        let loaded = load_corpus(&path).unwrap();
        prop_assert_eq!(loaded.records(), &records[..]);
    }

    #[test]
    fn arbitrary_scores_round_trip_exactly(v in 0.0f64..=1.0) {
        let mut r = random_record(&mut ChaCha8Rng::seed_from_u64(0), "p");
        r.reviews = vec![sdq_core::corpus::ReviewRecord { score: Some(v), ..Default::default() }];
        let back: sdq_core::corpus::PaperRecord =
            serde_json::from_str(&sdq_core::corpus::canonical_json(&r)).unwrap();
        prop_assert_eq!(back, r);
    }
}
