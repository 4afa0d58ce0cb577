use std::fs;
use std::path::Path;

use pdbench_core::{
    Box3D, Calibration, CameraImage, Dataset, FrameSample, GroundTruth, Occlusion, Point3, PointCloud,
};
use pdbench_io::{write_dataset, AdapterConfig, IoError, JrdbAdapter};

fn frame(seq: &str, i: usize) -> FrameSample {
    let id = format!("{seq}_{i:06}");
    FrameSample {
        frame_id: id.clone(),
        sequence_id: seq.into(),
        index_in_sequence: i,
        cloud: PointCloud::new(
            &id,
            vec![Point3::new(i as f32, 1.0, 0.5).with_intensity(0.5), Point3::new(2.0, -1.0, 0.0).with_intensity(1.0)],
        ),
        images: vec![CameraImage::filled("cam0", 3, 2, 0.0), CameraImage::filled("cam1", 3, 2, 1.0)],
        calibrations: vec![Calibration::identity("cam0"), Calibration::identity("cam1")],
        ground_truth: vec![GroundTruth {
            bbox: Box3D::new([4.0 + i as f64, 0.0, 0.0], [0.6, 0.6, 1.7], 0.25),
            occlusion: Occlusion::SeverelyOccluded,
            track_id: "p0".into(),
        }],
    }
}

fn fixture(root: &Path, config: &AdapterConfig) -> Dataset {
    let ds = Dataset::from_frames((0..3).rev().map(|i| frame("seqA", i)));
    write_dataset(root, "val", &ds, config).unwrap();
    ds
}

#[test]
fn empty_root_yields_no_frames() {
    let dir = tempfile::tempdir().unwrap();
    let a = JrdbAdapter::open(dir.path(), "val").unwrap();
    assert!(a.is_empty());
    assert_eq!(a.frames().count(), 0);
}

#[test]
fn mini_split_reads_in_index_order() {
    let dir = tempfile::tempdir().unwrap();
    let ds = fixture(dir.path(), &AdapterConfig::default());
    assert!(dir.path().join("val/pointclouds/seqA/000002.r3pc").is_file());
    assert!(dir.path().join("val/images/cam1/seqA/000000.png").is_file());
    let a = JrdbAdapter::open(dir.path(), "val").unwrap();
    let frames: Vec<FrameSample> = a.frames().collect::<Result<_, _>>().unwrap();
    assert_eq!(frames.len(), 3);
    for (i, f) in frames.iter().enumerate() {
        assert_eq!(f.index_in_sequence, i);
        assert_eq!(f, &ds.sequences[0].frames[i]);
    }
}

#[test]
fn missing_cloud_strict_names_the_frame() {
    let dir = tempfile::tempdir().unwrap();
    fixture(dir.path(), &AdapterConfig::default());
    fs::remove_file(dir.path().join("val/pointclouds/seqA/000001.r3pc")).unwrap();
    let a = JrdbAdapter::open(dir.path(), "val").unwrap();
    let results: Vec<_> = a.frames().collect();
    match &results[1] {
        Err(IoError::MissingModality { frame_id, modality, .. }) => {
            assert_eq!(frame_id, "seqA_000001");
            assert_eq!(*modality, "point cloud");
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn missing_image_lenient_skips() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = AdapterConfig { strict: false, ..AdapterConfig::default() };
    fixture(dir.path(), &cfg);
    fs::remove_file(dir.path().join("val/images/cam0/seqA/000002.png")).unwrap();
    let a = JrdbAdapter::open(dir.path(), "val").unwrap();
    let ids: Vec<String> = a.frames().map(|f| f.unwrap().frame_id).collect();
    assert_eq!(ids, ["seqA_000000", "seqA_000001"]);
}

#[test]
fn yaw_convention_is_applied_and_inverted() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = AdapterConfig { yaw_sign: -1.0, ..AdapterConfig::default() };
    let ds = fixture(dir.path(), &cfg);
    let text = fs::read_to_string(dir.path().join("val/labels_3d/seqA.jsonl")).unwrap();
    assert!(text.contains("\"yaw\":-0.25"), "{text}");
    let back = JrdbAdapter::open(dir.path(), "val").unwrap().load_dataset().unwrap();
    assert_eq!(back, ds);
}

#[test]
fn invalid_frame_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    fixture(dir.path(), &AdapterConfig::default());
    // a calibration with a zero rotation fails validation
    fs::write(
        dir.path().join("val/calibration/seqA/000000.json"),
        r#"{"cameras":[{"camera_id":"cam0","rotation":[[0,0,0],[0,0,0],[0,0,0]],"translation":[0,0,0]},{"camera_id":"cam1","rotation":[[1,0,0],[0,1,0],[0,0,1]],"translation":[0,0,0]}]}"#,
    )
    .unwrap();
    let a = JrdbAdapter::open(dir.path(), "val").unwrap();
    assert!(matches!(a.frames().next(), Some(Err(IoError::InvalidFrame { .. }))));
}

#[test]
fn bad_config_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("adapter.toml"), "yaw_sign = 2.0\n").unwrap();
    assert!(matches!(JrdbAdapter::open(dir.path(), "val"), Err(IoError::Format { .. })));
    fs::write(dir.path().join("adapter.toml"), "no_such_key = 1\n").unwrap();
    assert!(JrdbAdapter::open(dir.path(), "val").is_err());
}
