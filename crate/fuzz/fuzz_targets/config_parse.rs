#![no_main]
use fermiohm::config::Config;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(config) = Config::from_bytes(data) {
        // validation must never panic on a parsed document
        let _ = config.validate(None);
        let _ = config.times();
        let _ = config.closed_times();
    }
});
