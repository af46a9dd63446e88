//! Feeds arbitrary bytes to the dataset decoder; malformed gzip streams,
//! bad JSON, and out-of-range fields must all surface as errors.

#![no_main]

use libfuzzer_sys::fuzz_target;
use planview::imitation::Dataset;

fuzz_target!(|data: &[u8]| {
    let _ = Dataset::decode(data);
});
