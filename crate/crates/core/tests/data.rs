use std::collections::{BTreeMap, HashSet};

use gaborcnn::data::pnm::{image_to_pgm, quantize};
use gaborcnn::data::{
    decode_pnm, encode_pgm, encode_ppm, load_image, make_scenes, make_synthetic_orientation_set, parse_manifest,
    read_manifest, split_folds, write_manifest, ManifestEntry, OrientationSpec, SceneSpec,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn decode_examples() {
    let mut p5 = b"P5\n2 2\n255\n".to_vec();
    p5.extend_from_slice(&[0, 255, 128, 64]);
    let img = decode_pnm(&p5).unwrap();
    let want = [0.0, 1.0, 0.50196, 0.25098];
    for (a, b) in img.pixels().iter().zip(want) {
        assert!((a - b).abs() < 1e-5);
    }
    assert!((decode_pnm(b"P3 1 1 255 255 255 255").unwrap().pixels()[0] - 1.0).abs() < 1e-12);
    let mut red = b"P6 1 1 255\n".to_vec();
    red.extend_from_slice(&[255, 0, 0]);
    assert!((decode_pnm(&red).unwrap().pixels()[0] - 0.299).abs() < 1e-12);
}

#[test]
fn binary_round_trips_are_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(61);
    for _ in 0..50 {
        let (h, w) = (rng.random_range(1..20), rng.random_range(1..20));
        let bytes: Vec<u8> = (0..h * w).map(|_| rng.random()).collect();
        let img = decode_pnm(&encode_pgm(w, h, &bytes).unwrap()).unwrap();
        assert_eq!((img.height(), img.width()), (h, w));
        assert_eq!(quantize(&img), bytes);
        assert_eq!(image_to_pgm(&img), encode_pgm(w, h, &bytes).unwrap());

        let rgb: Vec<u8> = (0..h * w * 3).map(|_| rng.random()).collect();
        let img = decode_pnm(&encode_ppm(w, h, &rgb).unwrap()).unwrap();
        for (p, c) in img.pixels().iter().zip(rgb.chunks(3)) {
            let luma = (0.299 * c[0] as f64 + 0.587 * c[1] as f64 + 0.114 * c[2] as f64) / 255.0;
            assert!((p - luma).abs() < 1e-12);
        }
        let gray: Vec<u8> = bytes.iter().flat_map(|&b| [b, b, b]).collect();
        assert_eq!(quantize(&decode_pnm(&encode_ppm(w, h, &gray).unwrap()).unwrap()), bytes);
    }
}

#[test]
fn malformed_inputs_are_rejected() {
    for bad in [
        &b""[..],
        b"P4 1 1\n\0",
        b"P5 2 2 255\n\0",
        b"P5 1 1 0\n\0",
        b"P5 1 1 65536\n\0\0",
        b"P5 0 1 255\n",
        b"P2 1 1 3 4",
        b"P5 1 1 255",
    ] {
        assert!(decode_pnm(bad).is_err());
    }
    assert!(encode_pgm(2, 2, &[0; 3]).is_err());
}

#[test]
fn load_image_from_disk() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a.pgm");
    std::fs::write(&path, encode_pgm(3, 1, &[0, 51, 255]).unwrap()).unwrap();
    let img = load_image(&path).unwrap();
    assert_eq!(img.pixels(), &[0.0, 0.2, 1.0]);
    let err = load_image(dir.path().join("missing.pgm")).unwrap_err().to_string();
    assert!(err.contains("missing.pgm"));
}

fn subjects(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("subj{i}")).collect()
}

#[test]
fn fold_examples() {
    let s = subjects(10);
    let plan = split_folds(s.iter().map(String::as_str), 5, 3).unwrap();
    for f in 0..5 {
        assert_eq!(plan.subjects_in(f).len(), 2);
    }
    let lopo = split_folds(s.iter().map(String::as_str), 10, 3).unwrap();
    for f in 0..10 {
        assert_eq!(lopo.subjects_in(f).len(), 1);
    }
    assert!(split_folds(s.iter().take(3).map(String::as_str), 5, 3).is_err());
    assert!(split_folds(s.iter().map(String::as_str), 1, 3).is_err());
}

#[test]
fn folds_are_subject_exclusive_for_every_seed() {
    let mut rng = ChaCha8Rng::seed_from_u64(62);
    // several images per subject, in shuffled order
    let mut samples: Vec<String> = (0..37).flat_map(|i| vec![format!("p{i}"); 1 + i % 4]).collect();
    for i in (1..samples.len()).rev() {
        samples.swap(i, rng.random_range(0..=i));
    }
    for seed in 0..100 {
        let plan = split_folds(samples.iter().map(String::as_str), 5, seed).unwrap();
        let mut fold_of: BTreeMap<&str, usize> = BTreeMap::new();
        for s in &samples {
            let f = plan.fold_of(s).unwrap();
            assert!(f < 5);
            assert_eq!(*fold_of.entry(s).or_insert(f), f);
        }
        let mut sizes = [0usize; 5];
        for f in fold_of.values() {
            sizes[*f] += 1;
        }
        assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        for fold in 0..5 {
            let (train, val) = plan.partition(samples.iter().map(String::as_str), fold).unwrap();
            assert_eq!(train.len() + val.len(), samples.len());
            let tv: HashSet<&str> = val.iter().map(|&i| samples[i].as_str()).collect();
            assert!(train.iter().all(|&i| !tv.contains(samples[i].as_str())));
        }
    }
    let a = split_folds(samples.iter().map(String::as_str), 5, 9).unwrap();
    let b = split_folds(samples.iter().map(String::as_str), 5, 9).unwrap();
    assert_eq!(a, b);
}

#[test]
fn manifest_round_trip() {
    let entries = vec![
        ManifestEntry { path: "img/a.pgm".into(), subject: "s1".into(), label: 3.0 },
        ManifestEntry { path: "/abs/b.pgm".into(), subject: "s2".into(), label: 27.5 },
    ];
    let mut buf = Vec::new();
    write_manifest(&mut buf, &entries).unwrap();
    assert_eq!(parse_manifest(std::str::from_utf8(&buf).unwrap()).unwrap(), entries);
    assert_eq!(entries[0].class().unwrap(), 3);
    assert!(entries[1].class().is_err());

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.jsonl");
    std::fs::write(&path, &buf).unwrap();
    let read = read_manifest(&path).unwrap();
    assert_eq!(read[0].0, dir.path().join("img/a.pgm"));
    assert_eq!(read[1].0, std::path::PathBuf::from("/abs/b.pgm"));

    assert!(parse_manifest("{\"path\":\"a\",\"subject\":\"\",\"label\":1}").is_err());
    assert!(parse_manifest("not json").is_err());
}

#[test]
fn orientation_set_properties() {
    let spec = OrientationSpec::new(400, 16, 0.3, 7);
    let a = make_synthetic_orientation_set(&spec).unwrap();
    let b = make_synthetic_orientation_set(&spec).unwrap();
    assert_eq!(a, b);
    let mut counts = [0; 4];
    for s in &a {
        counts[s.label] += 1;
        assert!(!s.subject.is_empty());
    }
    assert_eq!(counts, [100; 4]);
    let c = make_synthetic_orientation_set(&OrientationSpec::new(400, 16, 0.3, 8)).unwrap();
    assert_ne!(a, c);
    assert!(make_synthetic_orientation_set(&OrientationSpec::new(0, 16, 0.3, 7)).is_err());
}

#[test]
fn noiseless_stripes_repeat_with_the_wavelength() {
    let mut spec = OrientationSpec::new(8, 20, 0.0, 3);
    spec.patch = 20;
    spec.wavelength = 4.0;
    for s in make_synthetic_orientation_set(&spec).unwrap() {
        let img = &s.image;
        for y in 1..16 {
            for x in 1..16 {
                // one full period across the stripes, or one step along them
                let (ny, nx) = match s.label {
                    0 => (y, x + 4),
                    1 => (y + 1, x - 1),
                    2 => (y + 4, x),
                    _ => (y + 1, x + 1),
                };
                assert!((img.at(y, x) - img.at(ny, nx)).abs() < 1e-12, "label {}", s.label);
            }
        }
    }
}

#[test]
fn scenes_hold_one_face_inside_the_frame() {
    let spec = SceneSpec::default();
    let scenes = make_scenes(&spec, 30, 5).unwrap();
    assert_eq!(scenes, make_scenes(&spec, 30, 5).unwrap());
    for s in &scenes {
        assert_eq!(s.faces.len(), 1);
        let f = s.faces[0];
        assert!(f.x >= 0.0 && f.y >= 0.0 && f.right() <= 64.0 && f.bottom() <= 64.0);
        assert!(f.w >= spec.min_face && f.w <= spec.max_face);
        assert_eq!((s.image.height(), s.image.width()), (64, 64));
    }
}
