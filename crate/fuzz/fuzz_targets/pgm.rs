#![no_main]

use calibmoo::data::pgm::parse_pgm;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(img) = parse_pgm(data) {
        assert_eq!(img.data.len(), img.width * img.height);
    }
});
