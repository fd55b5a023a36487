#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(t) = regkit_cli::parse_trace_csv(text) {
        let _ = regkit_cli::parse_trace_csv(&t.to_csv()).expect("written trace parses");
    }
});
