use std::f64::consts::{PI, TAU};

use fringefree::image::Image;
use fringefree::phase::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn cfg(period: f64, steps: usize, extent: usize) -> FringeConfig {
    FringeConfig::new(period, steps, extent, FringeOrientation::Vertical).unwrap()
}

/// Stack of `K` frames `A + B cos(phi - 2 pi k / K)` for per-pixel (A, B, phi).
fn synthesize(w: usize, h: usize, k: usize, pix: impl Fn(usize, usize) -> (f64, f64, f64)) -> ImageStack {
    let frames = (0..k)
        .map(|i| {
            Image::from_fn(w, h, |x, y| {
                let (a, b, phi) = pix(x, y);
                a + b * (phi - TAU * i as f64 / k as f64).cos()
            })
        })
        .collect();
    ImageStack::new(frames).unwrap()
}

fn angle_error(a: f64, b: f64) -> f64 {
    wrap_to_pi(a - b).abs()
}

#[test]
fn four_step_zero_phase() {
    let stack = ImageStack::new([0.9, 0.5, 0.1, 0.5].iter().map(|&v| Image::new(1, 1, v)).collect()).unwrap();
    let m = decode_phase(&stack, &cfg(16.0, 4, 1024), DEFAULT_MODULATION_THRESHOLD).unwrap();
    assert!(angle_error(m.phase(0, 0), 0.0) < 1e-12);
    assert!((m.modulation(0, 0) - 0.4).abs() < 1e-12);
    assert!(m.is_valid(0, 0));
}

#[test]
fn eight_step_known_phase() {
    let stack = synthesize(1, 1, 8, |_, _| (0.5, 0.3, 1.0));
    let m = decode_phase(&stack, &cfg(16.0, 8, 1024), DEFAULT_MODULATION_THRESHOLD).unwrap();
    assert!((m.phase(0, 0) - 1.0).abs() < 1e-12);
    assert!((m.modulation(0, 0) - 0.3).abs() < 1e-12);
}

#[test]
fn flat_frames_are_invalid() {
    let stack = synthesize(2, 2, 4, |_, _| (0.5, 0.0, 0.0));
    let m = decode_phase(&stack, &cfg(16.0, 4, 1024), DEFAULT_MODULATION_THRESHOLD).unwrap();
    assert_eq!(m.valid_count(), 0);
    assert!(m.modulation(1, 1) < 1e-12);
}

#[test]
fn stack_size_must_match_steps() {
    let stack = synthesize(1, 1, 4, |_, _| (0.5, 0.3, 0.0));
    assert!(matches!(
        decode_phase(&stack, &cfg(16.0, 8, 1024), DEFAULT_MODULATION_THRESHOLD),
        Err(PhaseError::StackSizeMismatch { .. })
    ));
}

#[test]
fn noiseless_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let n = 1000;
    let params: Vec<(f64, f64, f64)> = (0..n)
        .map(|_| (rng.random_range(0.3..0.6), rng.random_range(0.1..0.4), rng.random_range(0.0..TAU)))
        .collect();
    for k in [4, 8, 16] {
        let stack = synthesize(n, 1, k, |x, _| params[x]);
        let m = decode_phase(&stack, &cfg(16.0, k, 1024), DEFAULT_MODULATION_THRESHOLD).unwrap();
        for (x, &(_, b, phi)) in params.iter().enumerate() {
            assert!(angle_error(m.phase(x, 0), phi) < 1e-10, "K={k}");
            assert!((m.modulation(x, 0) - b).abs() < 1e-10);
            assert!((0.0..TAU).contains(&m.phase(x, 0)));
        }
    }
}

#[test]
fn noise_propagation_matches_formula() {
    let (w, h) = (1000, 100);
    let (a, b, sigma) = (0.5, 0.3, 0.01);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let noise = Normal::new(0.0, sigma).unwrap();
    let phases: Vec<f64> = (0..w * h).map(|_| rng.random_range(0.0..TAU)).collect();
    for k in [4, 8, 16] {
        let frames = (0..k)
            .map(|i| {
                Image::from_fn(w, h, |x, y| {
                    let phi = phases[y * w + x];
                    a + b * (phi - TAU * i as f64 / k as f64).cos() + noise.sample(&mut rng)
                })
            })
            .collect();
        let m = decode_phase(&ImageStack::new(frames).unwrap(), &cfg(16.0, k, 1024), 0.0).unwrap();
        let errs: Vec<f64> = phases.iter().enumerate().map(|(i, &p)| wrap_to_pi(m.phases()[i] - p)).collect();
        let mean = errs.iter().sum::<f64>() / errs.len() as f64;
        let std = (errs.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / errs.len() as f64).sqrt();
        let expected = sigma * (2.0 / k as f64).sqrt() / b;
        assert!((std / expected - 1.0).abs() < 0.2, "K={k}: {std} vs {expected}");
    }
}

#[test]
fn offset_invariance() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let params: Vec<(f64, f64, f64)> = (0..200)
        .map(|_| (rng.random_range(0.3..0.5), rng.random_range(0.1..0.3), rng.random_range(0.0..TAU)))
        .collect();
    let c = cfg(16.0, 8, 1024);
    let base = decode_phase(&synthesize(200, 1, 8, |x, _| params[x]), &c, 0.0).unwrap();
    let lifted = synthesize(200, 1, 8, |x, _| {
        let (a, b, p) = params[x];
        (a + 0.17, b, p)
    });
    let shifted = decode_phase(&lifted, &c, 0.0).unwrap();
    for x in 0..200 {
        assert!(angle_error(base.phase(x, 0), shifted.phase(x, 0)) < 1e-12);
    }
}

#[test]
fn gray_code_bijection() {
    for n in 1..=64u32 {
        let mut seen = vec![false; n as usize];
        for m in 0..n {
            let g = gray_encode(m);
            assert_eq!(gray_decode(g), m);
            assert!(!seen[m as usize]);
            seen[m as usize] = true;
            if m > 0 {
                assert_eq!((g ^ gray_encode(m - 1)).count_ones(), 1);
            }
        }
    }
}

fn bit_frames(bits: &[bool]) -> (Vec<Image>, Image) {
    let frames = bits.iter().map(|&b| Image::new(1, 1, if b { 0.8 } else { 0.2 })).collect();
    (frames, Image::new(1, 1, 0.5))
}

#[test]
fn textbook_gray_decode() {
    let (frames, reference) = bit_frames(&[false, false, false]);
    let map = decode_graycode(&frames, &reference, 8, 0.05).unwrap();
    assert_eq!(map.index(0, 0), Some(0));
    // Reflected-binary 110 is binary 100.
    let (frames, reference) = bit_frames(&[true, true, false]);
    let map = decode_graycode(&frames, &reference, 8, 0.05).unwrap();
    assert_eq!(map.index(0, 0), Some(4));
}

#[test]
fn gray_planes_round_trip() {
    for words in [2usize, 8, 40, 64, 80, 128] {
        let bits = graycode_bit_count(words);
        for m in 0..words as u32 {
            let (frames, reference) = bit_frames(&graycode_bits_of(m, bits));
            let map = decode_graycode(&frames, &reference, words, 0.05).unwrap();
            assert_eq!(map.index(0, 0), Some(m));
        }
    }
}

#[test]
fn gray_plane_count_and_contrast_checked() {
    let (frames, reference) = bit_frames(&[true, false]);
    assert!(matches!(
        decode_graycode(&frames, &reference, 8, 0.05),
        Err(PhaseError::BitPlaneCountMismatch { expected: 3, found: 2 })
    ));
    let frames = vec![Image::new(1, 1, 0.51); 3];
    let map = decode_graycode(&frames, &Image::new(1, 1, 0.5), 8, 0.05).unwrap();
    assert_eq!(map.index(0, 0), None);
}

#[test]
fn projector_coordinate_examples() {
    let c = cfg(16.0, 16, 1024);
    assert_eq!(absolute_projector_x(0.0, 0, &c).unwrap(), 0.0);
    assert_eq!(absolute_projector_x(PI, 3, &c).unwrap(), 56.0);
    let top = absolute_projector_x(TAU - 1e-9, 63, &c).unwrap();
    assert!(top < 1024.0 && top > 1024.0 - 1e-6);
    assert!(matches!(absolute_projector_x(0.0, 64, &c), Err(PhaseError::IndexOutOfRange { .. })));
    assert!(absolute_projector_x(0.0, -1, &c).is_err());
}

#[test]
fn fringe_config_limits() {
    assert!(FringeConfig::new(1.0, 4, 64, FringeOrientation::Vertical).is_err());
    assert!(FringeConfig::new(16.0, 2, 64, FringeOrientation::Vertical).is_err());
    assert!(FringeConfig::new(16.0, 4, 0, FringeOrientation::Vertical).is_err());
    assert_eq!(cfg(16.0, 4, 8).fringe_count, 1);
    let c = cfg(16.0, 16, 640);
    assert_eq!(c.fringe_count, 40);
    assert_eq!(c.graycode_word_count(), 80);
    assert_eq!(c.graycode_bits(), 7);
    assert!((c.coordinate_to_phase(24.0) - 3.0 * PI).abs() < 1e-12);
}

/// Half-period Gray code plus wrapped phase recovers the absolute coordinate
/// even where the binarization edge sits right at a phase wrap.
#[test]
fn absolute_decode_of_a_ramp() {
    let c = cfg(16.0, 8, 640);
    let w = 640;
    let xs: Vec<f64> = (0..w).map(|i| i as f64 + 0.37).collect();
    let stack = synthesize(w, 1, 8, |x, _| (0.5, 0.3, c.coordinate_to_phase(xs[x])));
    let words = c.graycode_word_count();
    let half = c.period_px / 2.0;
    let bits: Vec<Image> = (0..c.graycode_bits())
        .map(|b| {
            Image::from_fn(w, 1, |x, _| {
                let word = (xs[x] / half).floor() as u32;
                let on = graycode_bits_of(word, c.graycode_bits())[b];
                if on { 0.8 } else { 0.2 }
            })
        })
        .collect();
    let (_, coords) = decode_absolute(&stack, &bits, &c, DEFAULT_MODULATION_THRESHOLD, 0.05).unwrap();
    assert_eq!(words, 80);
    for (x, &truth) in xs.iter().enumerate() {
        let got = coords.get(x, 0).unwrap();
        assert!((got - truth).abs() < 1e-9, "{x}: {got} vs {truth}");
    }
}
