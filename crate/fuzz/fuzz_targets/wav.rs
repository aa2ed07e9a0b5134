#![no_main]

use kws_core::features::wav::{decode_wav, EXPECTED_SAMPLE_RATE};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(samples) = decode_wav(std::io::Cursor::new(data), EXPECTED_SAMPLE_RATE) {
        assert!(samples.iter().all(|s| (-1.0..1.0).contains(s)));
    }
});
