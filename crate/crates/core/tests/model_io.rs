use gsplat_codec::model::{decode_native, encode_native, sidecar_path};
use gsplat_codec::synth::{generate, Geometry, SynthSpec};
use gsplat_codec::{load_scene, save_scene, Error, Scene, SceneFormat};

fn fixture() -> Scene {
    generate(&SynthSpec::new(Geometry::Sphere, 2, 6, 5, 2, 3).noise(0.3)).unwrap()
}

#[test]
fn native_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.gsmap");
    let s = fixture();
    let n = save_scene(&s, &path, SceneFormat::Native).unwrap();
    assert_eq!(n, std::fs::metadata(&path).unwrap().len());
    let back: Scene = load_scene(&path, SceneFormat::from_path(&path)).unwrap();
    assert_eq!(back, s);
}

#[test]
fn native_bytes_are_stable() {
    let s = fixture();
    let bytes = encode_native(&s).unwrap();
    assert_eq!(encode_native(&decode_native::<f32>(&bytes).unwrap()).unwrap(), bytes);
}

#[test]
fn ply_round_trip_within_float_precision() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.ply");
    let s = fixture();
    save_scene(&s, &path, SceneFormat::from_path(&path)).unwrap();
    assert!(sidecar_path(&path).exists());
    let back: Scene = load_scene(&path, SceneFormat::Ply).unwrap();
    assert_eq!(back.sh_degree, s.sh_degree);
    assert_eq!(back.cameras(), s.cameras());
    for (a, b) in s.records().zip(back.records()) {
        for i in 0..3 {
            assert!((a.mu[i] - b.mu[i]).abs() < 1e-6);
            assert!((a.s[i] - b.s[i]).abs() <= 1e-5 * a.s[i]);
        }
        for i in 0..4 {
            assert!((a.q[i] - b.q[i]).abs() < 1e-6);
        }
        for (x, y) in a.sh.iter().zip(&b.sh) {
            assert!((x - y).abs() < 1e-6);
        }
        assert!((a.sigma - b.sigma).abs() < 1e-5);
    }
}

#[test]
fn missing_file_is_an_io_error() {
    let err = load_scene::<f32>("/nonexistent/x.gsmap".as_ref(), SceneFormat::Native).unwrap_err();
    assert!(matches!(err, Error::Io { .. }));
}
