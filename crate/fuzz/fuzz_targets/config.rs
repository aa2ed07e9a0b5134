#![no_main]

use kws_core::config::Config;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = Config::parse(text) {
        for key in cfg.keys() {
            let _ = cfg.get_list(key);
        }
    }
});
