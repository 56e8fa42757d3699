#![no_main]

use equitrust_cli::parse_summary_csv;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(rows) = parse_summary_csv(text) {
        for r in rows {
            if let (Some(lo), Some(hi)) = (r.min, r.max) {
                assert!(lo <= hi);
            }
        }
    }
});
