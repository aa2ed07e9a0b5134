#![no_main]

use kws_core::model::ModelFile;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(file) = ModelFile::parse(text) {
        assert_eq!(ModelFile::parse(&file.to_text()).expect("printed model file parses"), file);
    }
});
