#![no_main]
use edgecurve::pipeline::read_curve_file;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(file) = read_curve_file(text) {
        let back = serde_json::to_string(&file).unwrap();
        assert_eq!(read_curve_file(&back).unwrap(), file);
    }
});
