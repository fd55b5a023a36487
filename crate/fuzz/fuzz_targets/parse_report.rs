#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(rec) = regkit_cli::parse_report(text) {
        let _ = rec.to_csv();
        let _ = regkit_cli::parse_report(&rec.to_json()).expect("written report parses");
    }
});
