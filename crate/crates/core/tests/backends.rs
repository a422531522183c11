use std::path::PathBuf;

use pqf_credit::cli::{run_experiment, ExperimentConfig};

#[test]
fn exact_and_untruncated_mps_runs_agree() {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/backend_equivalence.toml");
    let cfg = ExperimentConfig::load(&path).unwrap();
    let (report, exports) = run_experiment(&cfg).unwrap();
    let exact = report.model("quantum[exact]").unwrap();
    let mps = report.model("quantum[mps(chi=64,tol=0e0)]").unwrap();
    for (a, b) in [
        (exact.test.accuracy.mean, mps.test.accuracy.mean),
        (exact.test.auc.mean, mps.test.auc.mean),
        (exact.test.cdr.mean, mps.test.cdr.mean),
    ] {
        assert!((a - b).abs() <= 1e-6, "{a} vs {b}");
    }
    let find = |label: &str| exports.iter().find(|e| e.name.contains(label)).map(|e| &e.data);
    if let (Some(a), Some(b)) = (find("exact"), find("mps")) {
        for (ra, rb) in a.features.iter().zip(&b.features) {
            for (x, y) in ra.iter().zip(rb) {
                assert!((x - y).abs() <= 1e-8);
            }
        }
    }
}
