#![no_main]

use binoisy_cli::parse::{parse_config, CONFIG_KEYS};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = parse_config(text) {
        for key in CONFIG_KEYS {
            if let Some(v) = cfg.get(key) {
                assert!(!v.is_empty());
            }
        }
    }
});
