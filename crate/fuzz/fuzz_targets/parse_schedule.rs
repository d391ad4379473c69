#![no_main]

use anneal_lab::{Schedule, TailFunctions};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(s) = text.parse::<Schedule>() {
        // Anything that parses must display back to itself and evaluate.
        let again: Schedule = s.to_string().parse().expect("display round-trips");
        assert_eq!(again, s);
        if let Ok(h) = s.eval(0.5) {
            assert!((0.0..=1.0).contains(&h));
        }
        let _ = TailFunctions::analytic(s);
    }
});
