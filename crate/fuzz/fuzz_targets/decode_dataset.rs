#![no_main]

use anneal_lab::problems::{decode_dataset, encode_dataset};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(p) = decode_dataset(data) {
        let again = decode_dataset(&encode_dataset(&p)).expect("re-encoded dataset decodes");
        assert_eq!(encode_dataset(&again), encode_dataset(&p));
    }
});
