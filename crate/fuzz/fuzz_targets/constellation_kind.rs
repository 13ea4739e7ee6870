#![no_main]

use binoisy_cli::parse::parse_constellation_list;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(kinds) = parse_constellation_list(text) {
        // Names round-trip through their display form.
        let shown: Vec<String> = kinds.iter().map(|k| k.to_string()).collect();
        assert_eq!(parse_constellation_list(&shown.join(",")).unwrap(), kinds);
    }
});
