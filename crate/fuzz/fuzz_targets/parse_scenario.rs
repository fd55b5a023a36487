#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(file) = regkit_cli::parse_scenario(text) {
        // The canonical form must parse back to the same scenario.
        let again = regkit_cli::parse_scenario(&file.to_text()).expect("canonical text parses");
        assert_eq!(again, file);
        let _ = file.build();
    }
});
