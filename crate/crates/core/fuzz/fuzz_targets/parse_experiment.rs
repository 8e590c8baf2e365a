#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = adacov::config::parse_experiment(text) {
        assert!(cfg.trials >= 1);
        assert!(cfg.alpha_grid.windows(2).all(|w| w[0] < w[1]));
        // Round trip through JSON must validate again.
        let again = serde_json::to_string(&cfg).unwrap();
        adacov::config::parse_experiment(&again).expect("round trip validates");
    }
});
