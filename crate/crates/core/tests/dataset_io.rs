use std::fs;

use mtscene_core::dataset::{load_sample, save_sample, synth_scene, Dataset, SampleRecord, SynthOptions};
use mtscene_core::spectrum::{ClassSpectrum, SceneSpectrum};
use mtscene_core::{Error, LabelMap};

#[test]
fn saved_samples_load_back_identically() {
    let s = ClassSpectrum::nyuv2_40();
    let dir = tempfile::tempdir().unwrap();
    let mut ds = Dataset::create(dir.path(), "test").unwrap();
    let samples: Vec<_> = (0..4).map(|seed| synth_scene(seed, &SynthOptions::new(48, 64, 4), &s).unwrap()).collect();
    for sample in &samples {
        ds.add(sample).unwrap();
    }
    ds.write_manifest().unwrap();

    let reopened = Dataset::open(dir.path()).unwrap();
    assert_eq!(reopened.manifest, ds.manifest);
    for (rec, orig) in reopened.records().iter().zip(&samples) {
        let back = load_sample(rec, &s).unwrap();
        assert_eq!(back.semantic, orig.semantic);
        assert_eq!(back.instance, orig.instance);
        assert_eq!(back.scene, orig.scene);
        assert_eq!(back.orientations.keys().collect::<Vec<_>>(), orig.orientations.keys().collect::<Vec<_>>());
        for (a, b) in back.orientations.values().zip(orig.orientations.values()) {
            assert!((a.degrees() - b.degrees()).abs() < 1e-9);
        }
        assert!(back.rgb.max_abs_diff(&orig.rgb) <= 0.5 / 255.0 + 1e-6);
        assert!(back.depth.max_abs_diff(&orig.depth) <= 0.0005 + 1e-6);
    }
}

#[test]
fn orientation_for_absent_instance_is_rejected() {
    let s = ClassSpectrum::nyuv2_40();
    let dir = tempfile::tempdir().unwrap();
    let sample = synth_scene(2, &SynthOptions::new(32, 32, 2), &s).unwrap();
    save_sample(dir.path(), &sample).unwrap();
    fs::write(dir.path().join("orientations.csv"), "instance_id,angle_deg\n77,10.0\n").unwrap();
    let err = load_sample(&SampleRecord::in_dir(dir.path(), "x"), &s).unwrap_err();
    assert!(matches!(err, Error::Dataset { .. }), "{err}");
    assert!(err.to_string().contains("77"));
}

#[test]
fn mismatched_extents_are_rejected() {
    let s = ClassSpectrum::nyuv2_40();
    let dir = tempfile::tempdir().unwrap();
    let sample = synth_scene(3, &SynthOptions::new(32, 32, 1), &s).unwrap();
    save_sample(dir.path(), &sample).unwrap();
    mtscene_core::dataset::write_label_png(&dir.path().join("semantic.png"), &LabelMap::filled(16, 32, 1), false)
        .unwrap();
    let err = load_sample(&SampleRecord::in_dir(dir.path(), "x"), &s).unwrap_err();
    assert!(matches!(err, Error::Extent { .. }), "{err}");
}

#[test]
fn unknown_scene_and_classes_are_rejected() {
    let s = ClassSpectrum::nyuv2_40();
    let dir = tempfile::tempdir().unwrap();
    let sample = synth_scene(4, &SynthOptions::new(32, 32, 1), &s).unwrap();
    save_sample(dir.path(), &sample).unwrap();
    let rec = SampleRecord::in_dir(dir.path(), "x");
    fs::write(&rec.scene, "spaceship\n").unwrap();
    assert!(load_sample(&rec, &s).is_err());
    fs::write(&rec.scene, "3\n").unwrap();
    assert_eq!(load_sample(&rec, &s).unwrap().scene, 3);
    mtscene_core::dataset::write_label_png(&rec.semantic, &LabelMap::filled(32, 32, 200), false).unwrap();
    assert!(load_sample(&rec, &s).is_err());
}

#[test]
fn spectra_round_trip_through_json() {
    for s in [ClassSpectrum::nyuv2_40(), ClassSpectrum::sunrgbd_37()] {
        assert_eq!(ClassSpectrum::from_json(&s.to_json()).unwrap(), s);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.json");
        s.save(&path).unwrap();
        assert_eq!(ClassSpectrum::load(path.to_str().unwrap()).unwrap(), s);
    }
    let scenes = SceneSpectrum::indoor();
    assert_eq!(SceneSpectrum::from_json(&scenes.to_json()).unwrap(), scenes);
    assert!(ClassSpectrum::from_json("{}").is_err());
}
