#![no_main]

use libfuzzer_sys::fuzz_target;
use proxyfair::data::{parse_csv, Schema};

fuzz_target!(|data: &[u8]| {
    let schema = Schema {
        sensitive: vec!["s".into()],
        labels: vec!["y".into()],
        categorical: vec!["c".into()],
        ..Schema::default()
    };
    let _ = parse_csv(data, &schema);
});
