#![no_main]
use fermiohm::lattice::DisorderRealization;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(omega) = DisorderRealization::from_json(text) {
        let again = DisorderRealization::from_json(&omega.to_json()).expect("re-encoded realization decodes");
        assert_eq!(again, omega);
    }
});
