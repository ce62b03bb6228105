mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use topg_core::edges::detect_edges;
use topg_core::evaluation::{synth_sequence, SynthSpec};
use topg_core::imaging::{decode_pnm, integral_image, quantize_pixel, BoundingBox, ImageBuffer};
use topg_core::tracking::{
    CandidateScorer, FeatureVector, LogisticScorer, Sample, SampleLabel, TrainSchedule, FEATURE_LEN,
};

fn small_box() -> impl Strategy<Value = BoundingBox> {
    (-4i32..12, -4i32..12, 0i32..10, 0i32..10).prop_map(|(x, y, w, h)| BoundingBox::new(x, y, w, h))
}

proptest! {
    #[test]
    fn iou_is_symmetric_bounded_and_rasterizable(a in small_box(), b in small_box()) {
        let ab = a.iou(&b);
        prop_assert_eq!(ab, b.iou(&a));
        prop_assert!((0.0..=1.0).contains(&ab));
        let shift = |r: &BoundingBox| r.translate(4, 4);
        prop_assert!((ab - common::naive_iou(&shift(&a), &shift(&b), 28)).abs() <= 1e-12);
    }

    #[test]
    fn box_sums_match_naive(
        values in prop::collection::vec(-5.0f64..5.0, 9 * 7),
        x in 0i32..9, y in 0i32..7, w in 0i32..9, h in 0i32..7,
    ) {
        let b = BoundingBox::new(x, y, w.min(9 - x), h.min(7 - y));
        let integral = integral_image(9, 7, &values);
        prop_assert!((integral.box_sum(&b) - common::naive_box_sum(&values, 9, &b)).abs() <= 1e-9);
    }

    #[test]
    fn pnm_round_trip_is_byte_identical(
        gray in any::<bool>(),
        w in 1usize..12,
        h in 1usize..12,
        seed in any::<u64>(),
    ) {
        let channels = if gray { 1 } else { 3 };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data: Vec<u8> = (0..w * h * channels).map(|_| rand::Rng::random(&mut rng)).collect();
        let img = ImageBuffer::new(w, h, channels, data).unwrap();
        let bytes = img.encode_pnm();
        let back = decode_pnm(&bytes).unwrap();
        prop_assert_eq!(&back, &img);
        prop_assert_eq!(back.encode_pnm(), bytes);
    }

    #[test]
    fn quantizer_is_monotone_per_channel(bins in 2usize..=256, a in any::<u8>(), b in any::<u8>()) {
        let (lo, hi) = (a.min(b), a.max(b));
        let qa = quantize_pixel(&[lo], bins).unwrap();
        let qb = quantize_pixel(&[hi], bins).unwrap();
        prop_assert!(qa <= qb && qb < bins);
    }

    #[test]
    fn scorer_outputs_stay_probabilities(
        seed in any::<u64>(),
        probe in prop::collection::vec(-1e6f64..1e6, FEATURE_LEN),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let samples: Vec<Sample> = (0..20)
            .map(|i| {
                let label = if i % 2 == 0 { SampleLabel::Positive } else { SampleLabel::Negative };
                let feature: Vec<f64> = (0..FEATURE_LEN)
                    .map(|_| rand::Rng::random_range(&mut rng, 0.0..1.0))
                    .collect();
                Sample { bbox: BoundingBox::new(0, 0, 1, 1), label, feature: FeatureVector(feature) }
            })
            .collect();
        let mut scorer = LogisticScorer::new(FEATURE_LEN);
        let schedule = TrainSchedule { max_epochs: 30, learning_rate: 0.1, loss_tolerance: 1e-6 };
        scorer.train(&samples, &schedule, &mut rng);
        prop_assert!(scorer.weights().iter().all(|w| w.is_finite()));
        let p = scorer.score(&FeatureVector(probe));
        prop_assert!((0.0..=1.0).contains(&p));
    }
}

#[test]
fn low_contrast_target_loses_its_frame_edges() {
    let spec = |contrast: f64| SynthSpec {
        length: 2,
        contrast,
        target_color: [255, 0, 255],
        target_size: (26, 20),
        start: (60.0, 50.0),
        velocity: (0.0, 0.0),
        background_seed: 21,
        ..SynthSpec::default()
    };
    // whole-frame detection: the untouched clutter fixes the normalization
    let mass = |contrast: f64| {
        let seq = synth_sequence(&spec(contrast), &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        let gt = seq.ground_truth[0];
        let edges = detect_edges(&seq.frames[0]);
        let mut sum = 0.0;
        for y in gt.y - 2..gt.bottom() + 2 {
            for x in gt.x - 2..gt.right() + 2 {
                sum += edges.magnitude_at(x as usize, y as usize);
            }
        }
        sum
    };
    let full = mass(1.0);
    let weak = mass(0.1);
    assert!(full > 0.0);
    assert!(weak < 0.1 * full, "edge mass {weak} vs {full}");
}
