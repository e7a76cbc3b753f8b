#![no_main]

use libfuzzer_sys::fuzz_target;
use proxyfair::data::{parse_csv, Schema};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(schema) = Schema::from_json(text) {
        let _ = parse_csv(b"a,b,c\n1,2,3\n0,1,x\n", &schema);
    }
});
