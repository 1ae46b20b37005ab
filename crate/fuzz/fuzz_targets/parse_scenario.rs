#![no_main]

use conjsynth::config::parse_scenario;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    let _ = parse_scenario(text);
});
