#![no_main]

use libfuzzer_sys::fuzz_target;
use pqf_credit::cli::{render_text, RunReport};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(report) = RunReport::from_json(text) {
        let _ = render_text(&report);
        let _ = report.body_json();
    }
});
