#![no_main]
use edgecurve::io::sidecar::read_sidecar;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    // The first byte picks the cloud size the file is checked against.
    let Some((&n, rest)) = data.split_first() else { return };
    if let Ok(s) = read_sidecar(rest, n as usize * 4) {
        assert_eq!(s.len(), n as usize * 4);
    }
});
