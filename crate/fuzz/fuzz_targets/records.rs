#![no_main]

use ibgan::experiment::{parse_records, summarize, summary_csv, summary_table};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(records) = parse_records(text) {
        if let Ok(rows) = summarize(&records) {
            let _ = summary_csv(&rows);
            let _ = summary_table(&rows);
        }
    }
});
