#![no_main]

use kws_core::model::{parse_model_dsl, Family};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Some((&selector, rest)) = data.split_first() else { return };
    let Ok(text) = std::str::from_utf8(rest) else { return };
    let family = Family::ALL[usize::from(selector) % Family::ALL.len()];
    if let Ok(spec) = parse_model_dsl(text, family, 49, 10, 12) {
        let again = parse_model_dsl(&spec.to_dsl(), family, 49, 10, 12).expect("printed notation parses");
        assert_eq!(again, spec);
    }
});
