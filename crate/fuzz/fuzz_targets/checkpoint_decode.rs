#![no_main]
use fermiohm::equilibrium::Checkpoint;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(cp) = Checkpoint::decode(data) {
        assert_eq!(cp.encode(), data);
    }
});
