#![no_main]

use calibmoo::data::manifest::SceneManifest;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(m) = SceneManifest::parse(text) {
            let again = SceneManifest::parse(&m.to_json()).expect("serialized manifest parses");
            assert_eq!(again.cloud, m.cloud);
        }
    }
});
