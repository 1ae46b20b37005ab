#![no_main]

use conjsynth::stl::parse_formula;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    if let Ok(f) = parse_formula(text) {
        // printing is fully parenthesized and must parse back to the same tree
        let again = parse_formula(&f.to_string()).expect("printed formula must parse");
        assert_eq!(again, f);
    }
});
