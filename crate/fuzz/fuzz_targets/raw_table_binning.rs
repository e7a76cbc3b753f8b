#![no_main]

use libfuzzer_sys::fuzz_target;
use proxyfair::data::{acs_recipes, apply_binning, RawTable};

fuzz_target!(|data: &[u8]| {
    if let Ok(table) = RawTable::read(data) {
        let _ = apply_binning(&table, &acs_recipes());
    }
});
