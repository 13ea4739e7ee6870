#![no_main]

use binoisy_cli::spec::SweepSpec;
use libfuzzer_sys::fuzz_target;

// Arguments are NUL-separated so that any byte string maps to an argv.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let args: Vec<&str> = text.split('\0').collect();
    // Config files would make the outcome depend on the host filesystem.
    if args.iter().any(|a| a.starts_with("--config")) {
        return;
    }
    let argv = std::iter::once("binoisy").chain(args);
    if let Ok(spec) = SweepSpec::from_argv(argv) {
        assert!(!spec.snr_db.is_empty() && !spec.evm_db.is_empty());
    }
});
