#![no_main]
use edgecurve::synthdata::SceneMeta;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = serde_json::from_slice::<SceneMeta>(data);
});
