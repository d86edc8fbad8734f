mod common;

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use qpix::data::load_idx;
use qpix::metrics::{
    export_images, feature_vector, frechet_from_moments, frechet_gaussian, intensity_stats, mmd_poly, montage,
    read_pgm, ImageFormat,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn cloud<R: Rng>(rng: &mut R, n: usize, dim: usize, shift: f64) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..dim).map(|_| rng.random::<f64>() + shift).collect()).collect()
}

/// Unbiased MMD² from explicit Gram matrices.
fn mmd_brute(x: &[Vec<f64>], y: &[Vec<f64>]) -> f64 {
    let dim = x[0].len() as f64;
    let k = |a: &[f64], b: &[f64]| (a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>() / dim + 1.0).powi(3);
    let gram = |s: &[Vec<f64>], t: &[Vec<f64>]| DMatrix::from_fn(s.len(), t.len(), |i, j| k(&s[i], &t[j]));
    let (kxx, kyy, kxy) = (gram(x, x), gram(y, y), gram(x, y));
    let (m, n) = (x.len() as f64, y.len() as f64);
    let off = |g: &DMatrix<f64>| g.sum() - g.trace();
    off(&kxx) / (m * (m - 1.0)) + off(&kyy) / (n * (n - 1.0)) - 2.0 * kxy.sum() / (m * n)
}

#[test]
fn mmd_matches_gram_matrix_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for (m, n, dim, shift) in [(5, 7, 3, 0.0), (20, 20, 18, 0.3), (50, 40, 51, -0.2)] {
        let x = cloud(&mut rng, m, dim, 0.0);
        let y = cloud(&mut rng, n, dim, shift);
        let got = mmd_poly(&x, &y).unwrap();
        let want = mmd_brute(&x, &y);
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
    }
}

#[test]
fn frechet_matches_diagonal_closed_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for dim in [1, 4, 18] {
        let mu1 = DVector::from_fn(dim, |_, _| rng.random_range(-1.0..1.0));
        let mu2 = DVector::from_fn(dim, |_, _| rng.random_range(-1.0..1.0));
        let v1: Vec<f64> = (0..dim).map(|_| rng.random_range(0.01..2.0)).collect();
        let v2: Vec<f64> = (0..dim).map(|_| rng.random_range(0.01..2.0)).collect();
        let s1 = DMatrix::from_diagonal(&DVector::from_vec(v1.clone()));
        let s2 = DMatrix::from_diagonal(&DVector::from_vec(v2.clone()));
        let want = (&mu1 - &mu2).norm_squared()
            + v1.iter().zip(&v2).map(|(a, b)| (a.sqrt() - b.sqrt()).powi(2)).sum::<f64>();
        let got = frechet_from_moments(&mu1, &s1, &mu2, &s2).unwrap();
        assert!((got - want).abs() < 1e-8, "dim {dim}: {got} vs {want}");
    }
}

#[test]
fn frechet_is_zero_on_itself_and_symmetric() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x = cloud(&mut rng, 60, 18, 0.0);
    let y = cloud(&mut rng, 50, 18, 0.1);
    assert!(frechet_gaussian(&x, &x).unwrap().abs() < 1e-8);
    let (a, b) = (frechet_gaussian(&x, &y).unwrap(), frechet_gaussian(&y, &x).unwrap());
    assert!((a - b).abs() < 1e-8);
    assert!(a > 0.0);
}

#[test]
fn export_round_trip_within_quantization() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let images = cloud(&mut rng, 1000, 16, 0.0);
    let paths = export_images(&images, 4, 4, dir.path(), "img", ImageFormat::Pgm, true).unwrap();
    assert_eq!(paths.len(), 1001);
    for (img, path) in images.iter().zip(&paths) {
        let back = read_pgm(path).unwrap().to_pixels();
        for (a, b) in img.iter().zip(&back) {
            assert!((a - b).abs() <= 0.5 / 255.0 + 1e-12);
        }
    }
    let m = read_pgm(&paths[1000]).unwrap();
    assert_eq!((m.width, m.height), (32 * 4, 32 * 4));
}

#[test]
fn png_export_decodes_to_same_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let images = cloud(&mut rng, 25, 6, 0.0);
    let paths = export_images(&images, 2, 3, dir.path(), "s", ImageFormat::Png, true).unwrap();
    let decoder = png::Decoder::new(std::io::BufReader::new(std::fs::File::open(&paths[25]).unwrap()));
    let mut reader = decoder.read_info().unwrap();
    let mut buf = vec![0; reader.output_buffer_size().unwrap()];
    let info = reader.next_frame(&mut buf).unwrap();
    assert_eq!((info.width, info.height), (15, 10));
    assert_eq!(&buf[..info.buffer_size()], &montage(&images, 2, 3).unwrap().bytes[..]);
}

#[test]
fn real_digit_seven_statistics_are_plausible() {
    let fx = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data");
    let raw = load_idx(&fx.join("mnist-07-images-idx3-ubyte"), &fx.join("mnist-07-labels-idx1-ubyte")).unwrap();
    let sevens: Vec<Vec<f64>> = raw
        .images
        .iter()
        .zip(&raw.labels)
        .filter(|(_, &l)| l == 7)
        .map(|(im, _)| im.clone())
        .collect();
    let s = intensity_stats(&sevens).unwrap();
    let (b, c) = (s.brightness_summary.mean, s.contrast_summary.mean);
    assert!((10.0..80.0).contains(&b), "brightness {b}");
    assert!((30.0..130.0).contains(&c), "contrast {c}");
}

#[test]
fn pooled_features_of_a_ramp() {
    let img: Vec<f64> = (0..64).map(|i| (i % 8) as f64 / 7.0).collect();
    let f = feature_vector(&img, 8, 8).unwrap();
    assert_eq!(f.len(), 6);
    assert!((f[0] - 1.5 / 7.0).abs() < 1e-15 && (f[1] - 5.5 / 7.0).abs() < 1e-15);
    assert!((f[4] - 0.5).abs() < 1e-15);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn mmd_symmetric_and_permutation_invariant(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = cloud(&mut rng, 8, 5, 0.0);
        let mut y = cloud(&mut rng, 6, 5, 0.2);
        let a = mmd_poly(&x, &y).unwrap();
        prop_assert!((a - mmd_poly(&y, &x).unwrap()).abs() < 1e-12);
        y.reverse();
        prop_assert!((a - mmd_poly(&x, &y).unwrap()).abs() < 1e-12);
    }
}
