#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    // The decoder validates magic, header bounds, and exact length; it
    // must reject anything malformed without panicking or allocating
    // absurdly.
    let _ = oim::io::decode_checkpoint(data);
});
