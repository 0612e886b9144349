mod common;

use std::fs;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sparsewarp::output::{decode_ply, encode_ply, read_ply, write_ply, PointCloud};
use sparsewarp::scene::annotations::PointsFile;
use sparsewarp::scene::{load_scene, save_scene};
use sparsewarp::synthetic::SyntheticSpec;
use tempfile::TempDir;

#[test]
fn saved_scene_reloads_unchanged() {
    let (scene, _) = common::synthetic(SyntheticSpec {
        width: 64,
        height: 48,
        n_cameras: 4,
        n_correspondences: 15,
        seed: 11,
        ..SyntheticSpec::default()
    });
    let tmp = TempDir::new().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    save_scene(&scene, &a).unwrap();
    let first = load_scene(&a).unwrap();
    save_scene(&first, &b).unwrap();
    let second = load_scene(&b).unwrap();
    assert_eq!(first.correspondences, second.correspondences);
    for (x, y) in first.images.iter().zip(&second.images) {
        assert_eq!(x.rgb, y.rgb);
        assert_eq!(x.mask, y.mask);
        let bits = |r: &sparsewarp::scene::raster::Raster<f64>| {
            r.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        };
        assert_eq!(bits(&x.depth), bits(&y.depth));
    }
    assert_eq!(common::tree_hashes(&a), common::tree_hashes(&b));
}

#[test]
fn annotation_fixture_survives_rewrite() {
    let text = fs::read_to_string("tests/fixtures/points.json").unwrap();
    let parsed = PointsFile::from_json(&text).unwrap();
    assert_eq!(parsed.images, ["0.png", "1.png", "2.png"]);
    assert_eq!(
        parsed.points.iter().map(|p| p.id).collect::<Vec<_>>(),
        [0, 7, 9]
    );
    assert_eq!(parsed.points[0].obs[1].u, Some(24.0));
    assert_eq!(parsed.points[0].obs[2].u, None);

    let written = parsed.to_json();
    let reparsed = PointsFile::from_json(&written).unwrap();
    assert_eq!(reparsed, parsed);
    assert_eq!(reparsed.to_json(), written);
    assert!(!written.contains("null"));
}

#[test]
fn million_point_ply_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 1_000_000;
    let cloud = PointCloud {
        positions: (0..n)
            .map(|_| {
                [
                    rng.gen_range(-1e3..1e3),
                    rng.gen_range(-1e3..1e3),
                    rng.gen_range(-1e3..1e3),
                ]
            })
            .collect(),
        colors: (0..n).map(|_| rng.gen()).collect(),
        source_image: vec![0; n],
    };
    let bytes = encode_ply(&cloud);
    let back = decode_ply(&bytes).unwrap();
    assert_eq!(back.colors, cloud.colors);
    let bits = |c: &PointCloud| {
        c.positions
            .iter()
            .flatten()
            .map(|v| v.to_bits())
            .collect::<Vec<_>>()
    };
    assert_eq!(bits(&back), bits(&cloud));

    let tmp = TempDir::new().unwrap();
    let path = tmp.path().join("cloud.ply");
    write_ply(&cloud, &path).unwrap();
    assert_eq!(fs::read(&path).unwrap(), bytes);
    assert_eq!(read_ply(&path).unwrap().positions.len(), n);
}
