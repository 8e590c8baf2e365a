#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = adacov::config::parse_instance(text) {
        let prior = cfg.validate().expect("parsed instance validates");
        assert!(adacov::oracle::check_enumerable(cfg.n, prior.len()).is_ok());
    }
});
