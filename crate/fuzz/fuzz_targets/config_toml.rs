#![no_main]

use libfuzzer_sys::fuzz_target;
use pqf_credit::cli::ExperimentConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = ExperimentConfig::from_toml_str(text) {
        let _ = cfg.validate();
        // serialised form must parse back to the same hash
        if let Ok(again) = cfg.to_toml_string() {
            let back = ExperimentConfig::from_toml_str(&again).expect("round trip");
            assert_eq!(back.hash(), cfg.hash());
        }
    }
});
