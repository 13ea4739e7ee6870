#![no_main]

use binoisy_cli::parse::{parse_snr_range, MAX_RANGE_POINTS};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(values) = parse_snr_range(text) {
        assert!(!values.is_empty() && values.len() <= MAX_RANGE_POINTS);
        assert!(values.iter().all(|v| v.is_finite()));
        assert!(values.windows(2).all(|w| w[0] <= w[1]));
    }
});
