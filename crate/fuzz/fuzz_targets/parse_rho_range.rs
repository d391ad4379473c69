#![no_main]

use anneal_lab::bounds::RhoRange;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(r) = text.parse::<RhoRange>() {
        assert!(r.lo >= 1.0 && r.lo <= r.hi && r.hi.is_finite());
        for points in [1, 2, 7] {
            let v = r.geometric(points);
            assert_eq!(v.len(), points);
            assert!(v.iter().all(|x| (r.lo..=r.hi).contains(x)));
        }
    }
});
