#![no_main]

use libfuzzer_sys::fuzz_target;
use pqf_credit::cli::config::CsvSource;
use pqf_credit::cli::data::read_csv;

fuzz_target!(|data: &[u8]| {
    let plain = CsvSource {
        path: "fuzz.csv".into(),
        label_column: "target".into(),
        drop_columns: vec!["note".into()],
        id_column: None,
        date_column: None,
    };
    if let Ok((ds, _)) = read_csv(data, &plain) {
        assert_eq!(ds.features.len(), ds.labels.len());
        assert!(ds.labels.iter().all(|&y| y <= 1));
    }
    let latest = CsvSource {
        id_column: Some("id".into()),
        date_column: Some("date".into()),
        ..plain
    };
    let _ = read_csv(data, &latest);
});
