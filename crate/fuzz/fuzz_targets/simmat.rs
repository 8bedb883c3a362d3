#![no_main]
use edgecurve::io::simmat::read_simmat;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok((m, values)) = read_simmat(data) {
        assert_eq!(values.len(), m * m);
    }
});
