#![no_main]
use edgecurve::io::ply::{read_ply, write_ply};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(cloud) = read_ply(data) else { return };
    // Written clouds are f32 binary, so a second round trip is exact.
    // Coordinates beyond the f32 range are refused rather than written as inf.
    let mut out = Vec::new();
    if write_ply(&mut out, &cloud.points, cloud.labels.as_deref()).is_err() {
        return;
    }
    let once = read_ply(&out).unwrap();
    let mut again = Vec::new();
    write_ply(&mut again, &once.points, once.labels.as_deref()).unwrap();
    assert_eq!(read_ply(&again).unwrap(), once);
    assert_eq!(once.points.len(), cloud.points.len());
});
