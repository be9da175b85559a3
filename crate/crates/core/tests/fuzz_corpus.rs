//! Replays the checked-in fuzz seeds through the same checks as the fuzz targets.

use std::path::PathBuf;

use calibmoo::data::artifacts::{parse_archive_csv, write_archive_csv};
use calibmoo::data::calib::parse_calibration;
use calibmoo::data::kitti::parse_kitti_cloud;
use calibmoo::data::manifest::SceneManifest;
use calibmoo::data::pgm::parse_pgm;

fn seeds(target: &str) -> Vec<(String, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<_> = std::fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap())
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

/// Returns how many seeds parsed successfully.
fn replay(target: &str, check: impl Fn(&[u8]) -> bool) -> usize {
    seeds(target).iter().filter(|(_, data)| check(data)).count()
}

#[test]
fn kitti_cloud_seeds() {
    let ok = replay("kitti_cloud", |data| match parse_kitti_cloud(data) {
        Ok(cloud) => {
            assert_eq!(cloud.len() * 16, data.len());
            true
        }
        Err(_) => false,
    });
    assert!(ok >= 1);
}

#[test]
fn calibration_seeds() {
    let ok = replay("calibration", |data| {
        match std::str::from_utf8(data).ok().map(|t| parse_calibration(t, "P2")) {
            Some(Ok(c)) => {
                assert!(c.intrinsics.validate().is_ok());
                true
            }
            _ => false,
        }
    });
    assert!(ok >= 1);
}

#[test]
fn pgm_seeds() {
    let ok = replay("pgm", |data| match parse_pgm(data) {
        Ok(img) => {
            assert_eq!(img.data.len(), img.width * img.height);
            true
        }
        Err(_) => false,
    });
    assert!(ok >= 1);
}

#[test]
fn manifest_seeds() {
    let ok = replay("manifest", |data| {
        match std::str::from_utf8(data).ok().map(SceneManifest::parse) {
            Some(Ok(m)) => {
                assert_eq!(SceneManifest::parse(&m.to_json()).unwrap(), m);
                true
            }
            _ => false,
        }
    });
    assert!(ok >= 1);
}

#[test]
fn archive_csv_seeds() {
    let ok = replay("archive_csv", |data| match parse_archive_csv(data) {
        Ok(entries) => {
            let mut out = Vec::new();
            write_archive_csv(&mut out, &entries).unwrap();
            assert_eq!(parse_archive_csv(&out).unwrap(), entries);
            true
        }
        Err(_) => false,
    });
    assert!(ok >= 1);
}
