//! Feeds arbitrary text to the config parser; it must reject bad input
//! with an error, never a panic.

#![no_main]

use libfuzzer_sys::fuzz_target;
use planview::config::Config;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = Config::parse(text);
    }
});
