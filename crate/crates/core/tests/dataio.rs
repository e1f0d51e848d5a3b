use std::fs;

use keytrack::dataio::{format_boxes, generate_synthetic, load_sequence, SynthSpec, GROUNDTRUTH_FILE, IMAGE_DIR};
use keytrack::eval::iou;
use keytrack::{BoundingBox, Error};

#[test]
fn save_then_load_round_trip() {
    let seq = generate_synthetic(&SynthSpec {
        frames: 5,
        ..SynthSpec::moving_target(1)
    })
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    seq.save(dir.path()).unwrap();
    let back = load_sequence(dir.path()).unwrap();
    assert_eq!(back.len(), 5);
    assert_eq!(back.name, dir.path().file_name().unwrap().to_string_lossy());
    for (a, b) in back.frames.iter().zip(&seq.frames) {
        assert_eq!(a.pixels, b.pixels);
    }
    for (a, b) in back.groundtruth.iter().zip(&seq.groundtruth) {
        assert!((a.cx - b.cx).abs() < 1e-9 && (a.cy - b.cy).abs() < 1e-9);
        assert!((a.w - b.w).abs() < 1e-9 && (a.h - b.h).abs() < 1e-9);
    }
    // loading is a pure function of directory content
    assert_eq!(load_sequence(dir.path()).unwrap().groundtruth, back.groundtruth);
}

#[test]
fn count_mismatch_names_missing_line() {
    let seq = generate_synthetic(&SynthSpec {
        frames: 100,
        ..SynthSpec::static_target(1)
    })
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    seq.save(dir.path()).unwrap();
    let gt: Vec<BoundingBox> = seq.groundtruth[..99].to_vec();
    fs::write(dir.path().join(GROUNDTRUTH_FILE), format_boxes(&gt)).unwrap();
    match load_sequence(dir.path()) {
        Err(Error::CountMismatch { line, frames, .. }) => {
            assert_eq!(line, 100);
            assert_eq!(frames, 100);
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn missing_pieces_are_distinct_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(
        load_sequence(&dir.path().join("absent")),
        Err(Error::MissingDirectory(_))
    ));
    fs::create_dir_all(dir.path().join(IMAGE_DIR)).unwrap();
    assert!(matches!(load_sequence(dir.path()), Err(Error::MissingFile(_))));

    fs::write(dir.path().join(GROUNDTRUTH_FILE), "1,1,10,10\n1,1,10,10\n").unwrap();
    fs::write(dir.path().join(IMAGE_DIR).join("0001.png"), b"not a png").unwrap();
    fs::write(dir.path().join(IMAGE_DIR).join("0002.png"), b"not a png").unwrap();
    assert!(matches!(load_sequence(dir.path()), Err(Error::UnreadableImage { .. })));
}

#[test]
fn bad_annotation_lines() {
    let seq = generate_synthetic(&SynthSpec {
        frames: 2,
        ..SynthSpec::static_target(1)
    })
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    seq.save(dir.path()).unwrap();
    fs::write(dir.path().join(GROUNDTRUTH_FILE), "10,20,40,30\n5 5 0 10\n").unwrap();
    assert!(matches!(
        load_sequence(dir.path()),
        Err(Error::NonPositiveExtent { line: 2, .. })
    ));
    fs::write(dir.path().join(GROUNDTRUTH_FILE), "10,20,40,30\n5;5;x\n").unwrap();
    assert!(matches!(
        load_sequence(dir.path()),
        Err(Error::MalformedAnnotation { line: 2, .. })
    ));
}

#[test]
fn presets_respect_generator_contract() {
    for spec in [
        SynthSpec::static_target(3),
        SynthSpec::moving_target(3),
        SynthSpec::blur_distractor(3),
        SynthSpec::context_instance(3),
    ] {
        let seq = generate_synthetic(&spec).unwrap();
        assert_eq!(seq.len(), spec.frames);
        for (k, b) in seq.groundtruth.iter().enumerate() {
            assert!(b.inside(spec.width as f64, spec.height as f64));
            for i in 0..spec.distractors.len() {
                assert!(iou(&spec.distractor_box(i, k + 1), b) <= 0.10);
            }
        }
        let again = generate_synthetic(&spec).unwrap();
        assert!(seq.frames.iter().zip(&again.frames).all(|(a, b)| a.pixels == b.pixels));
    }
}
