#![no_main]

use conjsynth::stl::{parse_formula, robustness, Trace};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(trace) = Trace::from_csv_reader(data) else {
        return;
    };
    let name = &trace.variables()[0];
    let f = parse_formula(&format!("alw_[0,1] ({name} > 0) /\\ ev_[0,inf] ({name} < 1)"));
    if let Ok(f) = f {
        let _ = robustness(&trace, &f, 0);
    }
});
