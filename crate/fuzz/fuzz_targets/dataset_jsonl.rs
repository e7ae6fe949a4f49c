#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    // The dataset parser must never panic on arbitrary input. Cap the
    // size so pathological inputs stay cheap.
    if data.len() > 64 * 1024 {
        return;
    }
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = oim::io::parse_dataset_str(text);
    }
});
