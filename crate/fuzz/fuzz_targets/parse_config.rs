#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        let _ = gamma_filter::experiments::ExperimentConfig::from_json_str(s);
    }
});
