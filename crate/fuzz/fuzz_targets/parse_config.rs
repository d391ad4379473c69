#![no_main]

use anneal_lab::config::ExperimentConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(cfg) = ExperimentConfig::parse(text) {
        let back = ExperimentConfig::parse(&cfg.to_json()).expect("serialized config reloads");
        assert_eq!(back, cfg);
    }
});
