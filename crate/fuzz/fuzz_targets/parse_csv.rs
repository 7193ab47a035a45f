#![no_main]

use libfuzzer_sys::fuzz_target;

// The CSV reader is the main untrusted-input surface: it must reject
// malformed input with an error, never a panic.
fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = msde::dataset::parse_csv(text, None);
        let _ = msde::dataset::parse_csv(text, Some("label"));
        // any header token may be named as the label column
        if let Some(header) = text.lines().next() {
            if let Some(first) = header.split(',').next() {
                let _ = msde::dataset::parse_csv(text, Some(first.trim()));
            }
        }
    }
});
