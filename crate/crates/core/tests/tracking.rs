use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use topg_core::evaluation::{synth_sequence, SynthSpec};
use topg_core::imaging::{BoundingBox, ImageBuffer, IntegralImage};
use topg_core::proposals::TargetSpec;
use topg_core::ranking::SizeMode;
use topg_core::tracking::{
    augment_positives, format_track_csv, init_tracker, track_frames, FeatureContext, TrackError,
    TrackerConfig, FEATURE_BINS, HIST_LEN,
};

fn static_spec(length: usize) -> SynthSpec {
    SynthSpec {
        length,
        target_color: [0, 200, 255],
        target_size: (26, 22),
        start: (60.0, 45.0),
        velocity: (0.0, 0.0),
        background_seed: 5,
        ..SynthSpec::default()
    }
}

fn frames(spec: &SynthSpec) -> (Vec<ImageBuffer>, Vec<BoundingBox>) {
    let seq = synth_sequence(spec, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    (seq.frames, seq.ground_truth)
}

fn sample_std(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

#[test]
fn initialized_scorer_separates_target_from_background() {
    let (frames, gt) = frames(&static_spec(2));
    let state = init_tracker(&frames[0], &gt[0], TrackerConfig::default()).unwrap();
    let on_target = state.score_box(&frames[0], &gt[0]).unwrap();
    let far = state.score_box(&frames[0], &BoundingBox::new(2, 2, 26, 22)).unwrap();
    assert!(on_target >= 0.9, "target scored {on_target}");
    assert!(far <= 0.1, "background scored {far}");
}

#[test]
fn init_rejects_bad_inputs() {
    let (frames, gt) = frames(&static_spec(2));
    let config = TrackerConfig {
        phi: 0.5,
        ..TrackerConfig::default()
    };
    assert!(matches!(init_tracker(&frames[0], &gt[0], config), Err(TrackError::Config(_))));
    let tiny = BoundingBox::new(10, 10, 3, 8);
    assert_eq!(
        init_tracker(&frames[0], &tiny, TrackerConfig::default()).unwrap_err(),
        TrackError::DegenerateTarget(tiny)
    );
}

#[test]
fn init_without_jittered_positives() {
    let (frames, gt) = frames(&static_spec(2));
    let config = TrackerConfig {
        n_tilde: 0,
        ..TrackerConfig::default()
    };
    match init_tracker(&frames[0], &gt[0], config) {
        Ok(_) | Err(TrackError::NoPositives) => {}
        Err(e) => panic!("unexpected error {e}"),
    }
}

#[test]
fn augmentation_spread_matches_requested_deviation() {
    let target = BoundingBox::new(200, 100, 100, 60);
    let boxes = augment_positives(&target, 10_000, &mut ChaCha8Rng::seed_from_u64(3), 1.0, false);
    assert_eq!(boxes.len(), 10_000);
    let column = |f: fn(&BoundingBox) -> i32| -> Vec<f64> { boxes.iter().map(|b| f(b) as f64).collect() };
    let checks = [
        (sample_std(&column(|b| b.x)), 10.0),
        (sample_std(&column(|b| b.y)), 6.0),
        (sample_std(&column(|b| b.w)), 10.0),
        (sample_std(&column(|b| b.h)), 10.0),
    ];
    for (got, want) in checks {
        assert!((got - want).abs() <= 0.05 * want, "std {got} vs {want}");
    }
    let by_h = augment_positives(&target, 10_000, &mut ChaCha8Rng::seed_from_u64(3), 1.0, true);
    let h: Vec<f64> = by_h.iter().map(|b| b.h as f64).collect();
    assert!((sample_std(&h) - 6.0).abs() <= 0.3);
}

#[test]
fn augmentation_is_seeded() {
    let target = BoundingBox::new(5, 5, 20, 10);
    let a = augment_positives(&target, 50, &mut ChaCha8Rng::seed_from_u64(9), 1.0, false);
    let b = augment_positives(&target, 50, &mut ChaCha8Rng::seed_from_u64(9), 1.0, false);
    assert_eq!(a, b);
    assert!(augment_positives(&target, 0, &mut ChaCha8Rng::seed_from_u64(9), 1.0, false).is_empty());
}

/// Histogram of `bbox` by visiting each pixel, with 32-level channel bins.
fn naive_histogram(frame: &ImageBuffer, bbox: &BoundingBox) -> Vec<f64> {
    let mut h = vec![0.0; HIST_LEN];
    let mut n = 0.0;
    for y in bbox.y.max(0)..bbox.bottom().min(frame.height() as i32) {
        for x in bbox.x.max(0)..bbox.right().min(frame.width() as i32) {
            let p = frame.pixel(x as usize, y as usize);
            let cell = ((p[0] >> 5) as usize * 8 + (p[1] >> 5) as usize) * 8 + (p[2] >> 5) as usize;
            h[cell] += 1.0;
            n += 1.0;
        }
    }
    h.iter().map(|v| v / n).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn feature_histogram_matches_pixel_count(
        seed in any::<u64>(),
        x in -10i32..40,
        y in -10i32..30,
        w in 1i32..40,
        h in 1i32..30,
    ) {
        assert_eq!(FEATURE_BINS, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data: Vec<u8> = (0..40 * 30 * 3).map(|_| rand::Rng::random(&mut rng)).collect();
        let frame = ImageBuffer::new(40, 30, 3, data).unwrap();
        let bbox = BoundingBox::new(x, y, w, h);
        prop_assume!(bbox.clip(40, 30).is_some());
        let context = FeatureContext::new(&frame, IntegralImage::new(40, 30, &vec![0.5; 1200]));
        let target = TargetSpec::new(BoundingBox::new(10, 10, 12, 8), 0.1);
        let f = context.extract(&bbox, 0.2, &target).unwrap();
        let sum: f64 = f.histogram().iter().sum();
        prop_assert!((sum - 1.0).abs() <= 1e-9);
        for (a, b) in f.histogram().iter().zip(naive_histogram(&frame, &bbox)) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
        prop_assert!((f.mean_response() - 0.5).abs() <= 1e-12);
        prop_assert!(f.0.iter().all(|v| v.is_finite()));
    }
}

#[test]
fn static_target_is_held() {
    let spec = static_spec(12);
    let (frames, gt) = frames(&spec);
    let track = track_frames(&frames, &gt[0], TrackerConfig::default()).unwrap();
    for (r, g) in track.iter().zip(&gt) {
        assert!(r.bbox.iou(g) >= 0.7, "frame {}: {} vs {}", r.frame_id, r.bbox, g);
        assert!(!r.lost);
    }
}

#[test]
fn black_frame_is_reported_lost() {
    let (frames, gt) = frames(&static_spec(2));
    let mut state = init_tracker(&frames[0], &gt[0], TrackerConfig::default()).unwrap();
    let black = ImageBuffer::filled(frames[0].width(), frames[0].height(), &[0, 0, 0]).unwrap();
    let r = state.step(&black).unwrap();
    assert!(r.lost);
    assert_eq!(r.bbox, gt[0]);
    assert_eq!(state.target(), gt[0]);
    assert!(!r.updated);
}

#[test]
fn wrong_frame_size_is_rejected() {
    let (frames, gt) = frames(&static_spec(2));
    let mut state = init_tracker(&frames[0], &gt[0], TrackerConfig::default()).unwrap();
    let small = ImageBuffer::filled(20, 20, &[0, 0, 0]).unwrap();
    assert!(matches!(state.step(&small), Err(TrackError::FrameSize(20, 20, _, _))));
}

#[test]
fn model_refreshes_on_cadence_only() {
    let spec = static_spec(9);
    let (frames, gt) = frames(&spec);
    let config = TrackerConfig {
        kappa: 3,
        ..TrackerConfig::default()
    };
    let mut state = init_tracker(&frames[0], &gt[0], config).unwrap();
    let mut model = state.model().clone();
    for frame in &frames[1..] {
        let r = state.step(frame).unwrap();
        let m = state.frame_index();
        assert!(!r.lost);
        assert_eq!(r.updated, (m - 1).is_multiple_of(3), "frame {m}");
        if r.updated {
            assert_eq!(state.model().last_update_frame, m);
        } else {
            assert_eq!(state.model(), &model, "model changed on frame {m}");
        }
        model = state.model().clone();
    }
}

#[test]
fn trajectories_are_reproducible() {
    let spec = SynthSpec {
        velocity: (0.8, 0.4),
        ..static_spec(8)
    };
    let (frames, gt) = frames(&spec);
    let a = track_frames(&frames, &gt[0], TrackerConfig::default()).unwrap();
    let b = track_frames(&frames, &gt[0], TrackerConfig::default()).unwrap();
    assert_eq!(format_track_csv(&a), format_track_csv(&b));
    assert_eq!(a.len(), 8);
    assert_eq!(a[0].bbox, gt[0]);
}

#[test]
fn literal_size_mode_still_tracks() {
    let (frames, gt) = frames(&static_spec(5));
    let mut config = TrackerConfig::default();
    config.pipeline.affinity.size_mode = SizeMode::Literal;
    let track = track_frames(&frames, &gt[0], config).unwrap();
    assert!(track.iter().all(|r| r.bbox.w > 0 && r.bbox.h > 0 && r.score.is_finite()));
}
