#![no_main]

use ibgan::dataio::{parse_long_csv, write_long_csv};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(ds) = parse_long_csv(text) {
        // anything accepted must survive a write/parse round trip
        let again = parse_long_csv(&write_long_csv(&ds)).expect("re-parse of written dataset");
        assert_eq!(again.len(), ds.len());
        assert_eq!(again.flat_dim(), ds.flat_dim());
    }
});
