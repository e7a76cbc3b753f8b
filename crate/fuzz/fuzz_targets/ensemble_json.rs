#![no_main]

use libfuzzer_sys::fuzz_target;
use proxyfair::downstream::Ensemble;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(ensemble) = Ensemble::from_json(text) {
        assert_eq!(Ensemble::from_json(&ensemble.to_json().unwrap()).unwrap(), ensemble);
    }
});
