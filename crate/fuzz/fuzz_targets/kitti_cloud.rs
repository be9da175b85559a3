#![no_main]

use calibmoo::data::kitti::parse_kitti_cloud;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(cloud) = parse_kitti_cloud(data) {
        assert_eq!(cloud.len() * 16, data.len());
        assert!(cloud.intensities.iter().all(|r| (0.0..=1.0).contains(r)));
    }
});
