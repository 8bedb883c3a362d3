#![no_main]
use edgecurve::pipeline::{read_proposals, write_proposals};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(dump) = read_proposals(text) {
        let mut out = Vec::new();
        write_proposals(&mut out, &dump).unwrap();
        assert_eq!(read_proposals(std::str::from_utf8(&out).unwrap()).unwrap(), dump);
    }
});
