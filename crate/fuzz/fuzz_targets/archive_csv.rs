#![no_main]

use calibmoo::data::artifacts::{parse_archive_csv, write_archive_csv};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(entries) = parse_archive_csv(data) {
        let mut out = Vec::new();
        write_archive_csv(&mut out, &entries).expect("in-memory write");
        assert_eq!(parse_archive_csv(&out).expect("round trip"), entries);
    }
});
