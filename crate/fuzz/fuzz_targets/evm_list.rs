#![no_main]

use binoisy_cli::parse::{parse_evm_list, MAX_RANGE_POINTS};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(values) = parse_evm_list(text) {
        assert!(!values.is_empty() && values.len() <= MAX_RANGE_POINTS);
        assert!(values.iter().all(|v| !v.is_nan() && *v != f64::INFINITY));
    }
});
