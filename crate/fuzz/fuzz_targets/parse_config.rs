#![no_main]

use libfuzzer_sys::fuzz_target;

use msde_cli::config::{parse_config_text, RunConfig};

// key=value config files are user-supplied; parsing and applying them must
// never panic.
fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(overlay) = parse_config_text(text) {
            let mut cfg = RunConfig::default();
            overlay.apply_to(&mut cfg);
            let _ = cfg.validate();
            let _ = cfg.render();
        }
    }
});
