mod oracle;

use bsdb_core::baselines::{eigen_background, frame_diff, mean_threshold, temporal_median, EigenBackground};
use bsdb_core::Datacube;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn bits(masks: &[bsdb_core::BinaryMask]) -> Vec<Vec<bool>> {
    masks.iter().map(|m| m.bits().to_vec()).collect()
}

/// Integer-valued so that equality against thresholds is exercised.
fn integer_frames(rng: &mut ChaCha8Rng, n: usize, pixels: usize) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..pixels).map(|_| rng.gen_range(0..=255) as f64).collect()).collect()
}

#[test]
fn direct_loop_baselines_are_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..20 {
        let frames = integer_frames(&mut rng, 10, 256);
        let train = integer_frames(&mut rng, 10, 256);
        let threshold = rng.gen_range(0..120) as f64;
        let history = rng.gen_range(1..=8);
        let cube = Datacube::new(16, 16, 1, frames.clone()).unwrap();
        let train_cube = Datacube::new(16, 16, 1, train.clone()).unwrap();
        assert_eq!(bits(&frame_diff(&cube, threshold).unwrap()), oracle::frame_diff(&frames, threshold));
        assert_eq!(
            bits(&mean_threshold(&train_cube, &cube, threshold).unwrap()),
            oracle::mean_threshold(&train, &frames, threshold)
        );
        assert_eq!(
            bits(&temporal_median(&cube, history, threshold).unwrap()),
            oracle::temporal_median(&frames, history, threshold)
        );
    }
}

/// Frames `mean + Σ a_k(t) · s_k` with three fixed random shapes.
fn rank3_frames(rng: &mut ChaCha8Rng, n: usize, pixels: usize) -> Vec<Vec<f64>> {
    let mean: Vec<f64> = (0..pixels).map(|_| rng.gen_range(50.0..200.0)).collect();
    let shapes: Vec<Vec<f64>> = (0..3).map(|_| (0..pixels).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    (0..n)
        .map(|_| {
            let a: Vec<f64> = (0..3).map(|k| rng.gen_range(-40.0..40.0) / (k + 1) as f64).collect();
            (0..pixels).map(|p| mean[p] + (0..3).map(|k| a[k] * shapes[k][p]).sum::<f64>()).collect()
        })
        .collect()
}

#[test]
fn eigen_background_matches_dense_covariance_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for _ in 0..10 {
        let train = rank3_frames(&mut rng, 10, 256);
        let cube = Datacube::new(16, 16, 1, train.clone()).unwrap();
        let model = EigenBackground::fit(&cube, 3).unwrap();
        assert_eq!(model.basis.len(), 3);
        let dense = oracle::EigenModel::fit(&train, 3);
        let probes = integer_frames(&mut rng, 3, 256);
        for probe in probes.iter().chain(&train) {
            let got = model.reconstruct(probe);
            let want = dense.reconstruct(probe);
            let err = got.iter().zip(&want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(err <= 1e-8, "reconstruction differs by {err}");
        }
        // Training frames lie in the span, so they reconstruct to themselves.
        let masks = eigen_background(&cube, &cube, 3, 1e-6).unwrap();
        assert!(masks.iter().all(|m| m.count() == 0));
    }
}

#[test]
fn constant_video_gives_empty_masks() {
    let cube = Datacube::new(4, 4, 1, vec![vec![77.0; 16]; 6]).unwrap();
    for masks in [
        frame_diff(&cube, 0.0).unwrap(),
        mean_threshold(&cube, &cube, 0.0).unwrap(),
        temporal_median(&cube, 3, 0.0).unwrap(),
        eigen_background(&cube, &cube, 2, 0.0).unwrap(),
    ] {
        assert!(masks.iter().all(|m| m.count() == 0));
    }
}
