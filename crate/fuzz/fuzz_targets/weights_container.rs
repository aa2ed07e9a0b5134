#![no_main]

use kws_core::container::{decode, encode};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(tensors) = decode(data) {
        let bytes = encode(&tensors).expect("decoded tensors encode");
        assert_eq!(decode(&bytes).expect("encoded tensors decode"), tensors);
    }
});
