#![no_main]

use libfuzzer_sys::fuzz_target;
use proxyfair::proxy::ProxyModel;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(model) = ProxyModel::from_json(text) {
        let again = ProxyModel::from_json(&model.to_json().unwrap()).unwrap();
        assert_eq!(again.to_json().unwrap(), model.to_json().unwrap());
    }
});
