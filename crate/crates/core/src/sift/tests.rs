use super::*;
use crate::multiscale::{blur, GaussianKernel, Octave};
use crate::raster::{mosaic, rotate_image, CfaPattern};
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Normal};

fn blob(size: usize, sigma: f64, cx: f64, cy: f64) -> PlanarImage {
    PlanarImage::from_fn(size, size, |x, y| {
        let d2 = (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2);
        (-d2 / (2.0 * sigma * sigma)).exp()
    })
}

fn texture(w: usize, h: usize, seed: u64) -> PlanarImage {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let noise = PlanarImage::from_fn(w, h, |_, _| rng.random());
    let b = blur(&noise, &GaussianKernel::for_sigma(2.5).unwrap());
    let (lo, hi) = b.min_max();
    b.map(|v| (v - lo) / (hi - lo))
}

fn gray3(g: &PlanarImage) -> PlanarImage {
    PlanarImage::from_planes(&[g.clone(), g.clone(), g.clone()]).unwrap()
}

/// A one-octave space whose Gaussian levels are all `img`.
fn flat_space(img: PlanarImage) -> ScaleSpace {
    let z = img.map(|_| 0.0);
    ScaleSpace {
        domain: ScaleDomain::Gray,
        config: ScaleSpaceConfig { octaves: 1, ..Default::default() },
        octaves: vec![Octave {
            gaussians: vec![img; 6],
            dogs: vec![z; 5],
        }],
    }
}

fn center_kp(x: f64, y: f64, sigma: f64) -> Keypoint {
    Keypoint {
        x,
        y,
        octave: 0,
        level: 1.0,
        scale: sigma,
        orientation: 0.0,
        response: 0.0,
        ox: x,
        oy: y,
        sigma_oct: sigma,
    }
}

#[test]
fn constant_image_has_no_keypoints() {
    let cfg = SiftConfig::default();
    let g = PlanarImage::filled(96, 96, &[0.5]);
    assert!(detect(&gray_space(&g, &cfg).unwrap(), &cfg).unwrap().is_empty());
    let b = BayerImage::new(128, 128, CfaPattern::Rggb, vec![0.5; 128 * 128]).unwrap();
    assert!(detect(&bayer_space(&b, &cfg).unwrap(), &cfg).unwrap().is_empty());
}

fn assert_blob_found(kps: &[Keypoint], cx: f64, cy: f64, sigma: f64) {
    let hit = kps.iter().any(|k| {
        (k.x - cx).hypot(k.y - cy) <= 2.0 && k.scale / sigma < 1.6 && sigma / k.scale < 1.6
    });
    assert!(hit, "no keypoint near the blob: {kps:?}");
}

#[test]
fn gaussian_blob_is_detected_at_its_scale() {
    let cfg = SiftConfig::default();
    let g = blob(128, 4.0, 64.0, 63.0);
    let kps = detect(&gray_space(&g, &cfg).unwrap(), &cfg).unwrap();
    assert_blob_found(&kps, 64.0, 63.0, 4.0);
    // the lattice pyramid starts at twice the pixel sigma, so σ = 4 sits on
    // its lower edge
    let g = blob(128, 6.0, 64.0, 63.0);
    let b = mosaic(&gray3(&g), CfaPattern::Grbg).unwrap();
    let kps = detect(&bayer_space(&b, &cfg).unwrap(), &cfg).unwrap();
    assert_blob_found(&kps, 64.0, 63.0, 6.0);
}

#[test]
fn ramp_orientation_points_east() {
    let img = PlanarImage::from_fn(64, 64, |x, _| 0.01 * x as f64);
    let space = flat_space(img);
    let out = orient(&center_kp(32.0, 32.0, 2.0), &space, &SiftConfig::default());
    assert_eq!(out.len(), 1);
    let a = out[0].orientation;
    assert!(a.min(360.0 - a) <= 5.0, "{a}");
}

#[test]
fn two_equal_edge_populations_give_two_orientations() {
    let img = PlanarImage::from_fn(64, 64, |x, y| 0.01 * x.max(y) as f64);
    let space = flat_space(img);
    let mut a: Vec<f64> = orient(&center_kp(32.0, 32.0, 2.0), &space, &SiftConfig::default())
        .iter()
        .map(|k| k.orientation)
        .collect();
    a.sort_by(f64::total_cmp);
    assert_eq!(a.len(), 2, "{a:?}");
    assert!(a[0].min(360.0 - a[0]) <= 5.0 || (a[1] - 360.0).abs() <= 5.0);
    assert!(a.iter().any(|v| (v - 90.0).abs() <= 5.0));
}

fn dominant(space: &ScaleSpace, kp: &Keypoint) -> f64 {
    // callers use ramp-dominated textures so only one peak survives
    let out = orient(kp, space, &SiftConfig::default());
    assert_eq!(out.len(), 1, "{out:?}");
    out[0].orientation
}

#[test]
fn orientation_follows_rotation() {
    let tex = texture(81, 81, 4);
    let img = PlanarImage::from_fn(81, 81, |x, y| 0.3 * tex.get(x, y, 0) + 0.012 * x as f64);
    let rotated = rotate_image(&img, 30.0);
    let kp = center_kp(40.0, 40.0, 2.0);
    let a0 = dominant(&flat_space(img), &kp);
    let a1 = dominant(&flat_space(rotated), &kp);
    let diff = (a1 - a0).rem_euclid(360.0);
    assert!((diff - 30.0).abs() <= 5.0, "{a0} -> {a1}");
}

#[test]
fn descriptors_basic_properties() {
    let cfg = SiftConfig::default();
    let flat = flat_space(PlanarImage::filled(64, 64, &[0.2]));
    assert!(describe(&center_kp(32.0, 32.0, 2.0), &flat, &cfg).is_none());

    let space = flat_space(texture(64, 64, 1));
    let kp = center_kp(32.0, 32.0, 2.0);
    let a = describe(&kp, &space, &cfg).unwrap();
    let b = describe(&kp, &space, &cfg).unwrap();
    assert_eq!(a.values.len(), 128);
    assert_eq!(a.distance(&b), 0.0);
    let norm: f64 = a.values.iter().map(|v| v * v).sum::<f64>().sqrt();
    assert!((norm - 1.0).abs() < 1e-12);
    assert!(a.values.iter().all(|&v| v >= 0.0));
}

#[test]
fn orientation_assignment_gives_rotation_invariance() {
    let cfg = SiftConfig::default();
    let img = texture(81, 81, 2);
    let rotated = rotate_image(&img, 90.0);
    let (s0, s1) = (flat_space(img), flat_space(rotated));
    let kp = center_kp(40.0, 40.0, 2.0);
    let o0 = orient(&kp, &s0, &cfg);
    let o1 = orient(&kp, &s1, &cfg);
    let best = o0
        .iter()
        .flat_map(|a| o1.iter().map(move |b| (a, b)))
        .map(|(a, b)| describe(a, &s0, &cfg).unwrap().distance(&describe(b, &s1, &cfg).unwrap()))
        .fold(f64::INFINITY, f64::min);
    let unaligned = describe(&kp, &s0, &cfg).unwrap().distance(&describe(&kp, &s1, &cfg).unwrap());
    assert!(best < unaligned, "{best} vs {unaligned}");
    assert!(best < 0.2, "{best}");
}

fn random_descriptors(n: usize, seed: u64) -> Vec<SiftDescriptor> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let mut v: Vec<f64> = (0..128).map(|_| rng.random::<f64>()).collect();
            let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            v.iter_mut().for_each(|a| *a /= n);
            SiftDescriptor {
                keypoint: center_kp(0.0, 0.0, 1.0),
                values: v,
            }
        })
        .collect()
}

#[test]
fn matching_identity_and_random() {
    let a = random_descriptors(50, 1);
    let m = match_descriptors(&a, &a, 0.8);
    assert_eq!(m.pairs.len(), 50);
    assert!(m.pairs.iter().all(|p| p.distance == 0.0 && p.i1 == p.i2));
    let b = random_descriptors(50, 2);
    let m = match_descriptors(&a, &b, 0.8);
    assert!(m.pairs.len() < 5, "{}", m.pairs.len());
    let mut seen = std::collections::HashSet::new();
    assert!(m.pairs.iter().all(|p| seen.insert(p.i2)));
    assert!(match_descriptors(&[], &b, 0.8).pairs.is_empty());
}

#[test]
fn rotation_homography_cases() {
    let id = rotation_homography(0.0, (10.0, 7.0));
    assert_eq!(id.project(3.0, 4.0), (3.0, 4.0));
    let r = rotation_homography(90.0, (0.0, 0.0));
    let (x, y) = r.project(1.0, 0.0);
    assert!(x.abs() < 1e-12 && (y - 1.0).abs() < 1e-12);
    let c = rotation_homography(37.0, (5.0, 5.0));
    let (x, y) = c.project(5.0, 5.0);
    assert!((x - 5.0).abs() < 1e-12 && (y - 5.0).abs() < 1e-12);
}

#[test]
fn rotation_homography_matches_resampler() {
    // a bright dot moved by rotate_image lands where the matrix sends it
    let (w, h) = (41, 31);
    let (px, py) = (30.0, 9.0);
    let img = PlanarImage::from_fn(w, h, |x, y| if (x as f64, y as f64) == (px, py) { 1.0 } else { 0.0 });
    let r = rotate_image(&img, 20.0);
    let hm = rotation_homography(20.0, ((w - 1) as f64 / 2.0, (h - 1) as f64 / 2.0));
    let (ex, ey) = hm.project(px, py);
    let (mut sx, mut sy, mut sw) = (0.0, 0.0, 0.0);
    for y in 0..h {
        for x in 0..w {
            let v = r.get(x, y, 0);
            sx += v * x as f64;
            sy += v * y as f64;
            sw += v;
        }
    }
    assert!((sx / sw - ex).abs() < 0.5 && (sy / sw - ey).abs() < 0.5);
}

#[test]
fn homography_recovery() {
    let truth = rotation_homography(20.0, (0.0, 0.0));
    let pts: Vec<(f64, f64)> = (0..20).map(|i| ((i * 7 % 13) as f64 * 10.0, (i * 5 % 11) as f64 * 12.0)).collect();
    let pairs: Vec<_> = pts.iter().map(|&p| (p, truth.project(p.0, p.1))).collect();
    let fit = estimate_homography(&pairs).unwrap();
    for i in 0..3 {
        for j in 0..3 {
            assert!((fit.homography.entry(i, j) - truth.entry(i, j)).abs() <= 1e-6);
        }
    }
    let ident: Vec<_> = pts.iter().map(|&p| (p, p)).collect();
    let fit = estimate_homography(&ident).unwrap();
    assert!((fit.homography.rotation_deg()).abs() < 1e-9);

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    let noise = Normal::new(0.0, 0.5).unwrap();
    for _ in 0..50 {
        let noisy: Vec<_> = pairs
            .iter()
            .map(|&(a, (x, y))| (a, (x + noise.sample(&mut rng), y + noise.sample(&mut rng))))
            .collect();
        let fit = estimate_homography(&noisy).unwrap();
        assert!((fit.homography.rotation_deg() - 20.0).abs() <= 1.0);
    }

    let collinear: Vec<_> = (0..5).map(|i| ((i as f64, 2.0 * i as f64), (i as f64, 0.0))).collect();
    assert!(estimate_homography(&collinear).is_err());
    assert!(estimate_homography(&pairs[..2]).is_err());
}

#[test]
fn repeatability_cases() {
    let h = rotation_homography(20.0, (50.0, 50.0));
    let kps1: Vec<Keypoint> = (0..10).map(|i| center_kp(10.0 * i as f64, 5.0 * i as f64, 1.0)).collect();
    let kps2: Vec<Keypoint> = kps1
        .iter()
        .map(|k| {
            let (x, y) = h.project(k.x, k.y);
            center_kp(x, y, 1.0)
        })
        .collect();
    assert_eq!(repeatability(&kps1, &kps2, &h, 3.0).unwrap(), 1.0);
    assert_eq!(repeatability(&kps1, &[], &h, 3.0).unwrap(), 0.0);
    let half = &kps2[..5];
    let r12 = repeatability(&kps1, half, &h, 3.0).unwrap();
    let r21 = repeatability(half, &kps1, &h.inverse().unwrap(), 3.0).unwrap();
    assert_eq!(r12, r21);
    let singular = Homography::from_rows([[1.0, 2.0, 0.0], [2.0, 4.0, 0.0], [0.0, 0.0, 1.0]]);
    assert!(singular.is_err());
}

#[test]
fn bayer_keypoints_follow_even_translations() {
    let cfg = SiftConfig::default();
    let src = texture(200, 200, 9);
    let color = PlanarImage::from_planes(&[
        src.clone(),
        src.map(|v| 0.8 * v + 0.1),
        src.map(|v| 0.6 * v + 0.2),
    ])
    .unwrap();
    let shift = 8usize;
    let a = mosaic(&color.crop(shift, shift, 160, 160).unwrap(), CfaPattern::Rggb).unwrap();
    let b = mosaic(&color.crop(0, 0, 160, 160).unwrap(), CfaPattern::Rggb).unwrap();
    let ka = detect(&bayer_space(&a, &cfg).unwrap(), &cfg).unwrap();
    let kb = detect(&bayer_space(&b, &cfg).unwrap(), &cfg).unwrap();
    let interior: Vec<&Keypoint> = ka
        .iter()
        .filter(|k| k.octave <= 2 && k.x > 30.0 && k.y > 30.0 && k.x < 130.0 && k.y < 130.0)
        .collect();
    assert!(!interior.is_empty());
    let found = interior
        .iter()
        .filter(|k| {
            kb.iter().any(|m| {
                (m.x - k.x - shift as f64).abs() <= 0.5 && (m.y - k.y - shift as f64).abs() <= 0.5
            })
        })
        .count();
    assert!(found as f64 >= 0.9 * interior.len() as f64, "{found}/{}", interior.len());
}
