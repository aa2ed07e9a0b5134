#![no_main]

use kws_core::search::ScoreTable;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(table) = ScoreTable::parse(text) {
        assert!(table.len() <= text.lines().count());
    }
});
