//! Feeds arbitrary bytes to the weights decoder; truncated or corrupt
//! files must come back as errors, never panics.

#![no_main]

use libfuzzer_sys::fuzz_target;
use planview::policy::LinearPolicyWeights;

fuzz_target!(|data: &[u8]| {
    let _ = LinearPolicyWeights::decode(data);
});
