#![no_main]

use libfuzzer_sys::fuzz_target;

use oim::io::config::{apply_synth_config, apply_train_config, parse_key_values};
use oim::synth::SynthConfig;
use oim::trainer::TrainConfig;

fuzz_target!(|data: &[u8]| {
    if data.len() > 16 * 1024 {
        return;
    }
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(entries) = parse_key_values(text) {
            let _ = apply_train_config(&mut TrainConfig::default(), &entries);
            let _ = apply_synth_config(&mut SynthConfig::default(), &entries);
        }
    }
});
