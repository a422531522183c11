use pqf_credit::cli::config::CsvSource;
use pqf_credit::cli::data::read_csv;
use pqf_credit::cli::{ExperimentConfig, RunReport};
use proptest::prelude::*;

fn source() -> CsvSource {
    CsvSource {
        path: "in.csv".into(),
        label_column: "target".into(),
        drop_columns: vec![],
        id_column: None,
        date_column: None,
    }
}

proptest! {
    #[test]
    fn csv_reader_never_panics(bytes in proptest::collection::vec(any::<u8>(), 0..512)) {
        let _ = read_csv(bytes.as_slice(), &source());
    }

    #[test]
    fn csv_like_text_never_panics(
        cells in proptest::collection::vec(
            proptest::collection::vec(prop_oneof!["", "0", "1", "2", "nan", "-1.5e3", "x"], 3),
            0..20,
        ),
    ) {
        let mut text = String::from("a,b,target\n");
        for row in cells {
            text.push_str(&row.join(","));
            text.push('\n');
        }
        if let Ok((ds, _)) = read_csv(text.as_bytes(), &source()) {
            prop_assert!(ds.labels.iter().all(|&y| y <= 1));
            prop_assert_eq!(ds.features.len(), ds.labels.len());
        }
    }

    #[test]
    fn config_parser_never_panics(text in "\\PC{0,300}") {
        if let Ok(cfg) = ExperimentConfig::from_toml_str(&text) {
            let _ = cfg.validate();
        }
    }

    #[test]
    fn report_parser_never_panics(text in "\\PC{0,300}") {
        let _ = RunReport::from_json(&text);
    }
}

#[test]
fn valid_csv_round_trips() {
    let text = "a,b,target\n0.5,,1\n1.5,2,0\n2.5,3,1\n";
    let (ds, summary) = read_csv(text.as_bytes(), &source()).unwrap();
    assert_eq!(ds.labels, vec![1, 0, 1]);
    assert!(ds.features[0][1].is_nan());
    assert!(summary.dropped_columns.is_empty());
}

#[test]
fn shipped_configs_round_trip_through_toml() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for name in ["smoke.toml", "accuracy_desk.toml", "ensemble_desk.toml", "backend_equivalence.toml"] {
        let cfg = ExperimentConfig::from_toml_str(&std::fs::read_to_string(dir.join(name)).unwrap()).unwrap();
        let back = ExperimentConfig::from_toml_str(&cfg.to_toml_string().unwrap()).unwrap();
        assert_eq!(back.hash(), cfg.hash(), "{name}");
    }
}

#[test]
fn report_corpus_seed_parses() {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus/report_json/smoke.json");
    let report = RunReport::from_json(&std::fs::read_to_string(path).unwrap()).unwrap();
    assert!(report.model("classical").is_some());
}
