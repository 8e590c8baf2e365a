#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(doc) = adacov::config::parse_domain(text) {
        let d = doc.distribution().expect("validated document has a distribution");
        let total: f64 = d.probs().iter().sum();
        assert!((total - 1.0).abs() < 1e-9);
        for q in &doc.queries {
            assert_eq!(q.domain_size(), d.len());
        }
    }
});
