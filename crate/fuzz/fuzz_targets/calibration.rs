#![no_main]

use calibmoo::data::calib::parse_calibration;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(c) = parse_calibration(text, "P2") {
            assert!(c.intrinsics.validate().is_ok());
        }
    }
});
