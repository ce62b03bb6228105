//! Shared fixtures for the benchmarks: one synthetic scene and the
//! per-frame state the pipeline stages consume.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use topg_core::evaluation::{synth_sequence, SynthSequence, SynthSpec};
use topg_core::pipeline::{analyze_frame, fit_model, FrameAnalysis, PipelineConfig};
use topg_core::proposals::TargetSpec;

pub struct Scene {
    pub sequence: SynthSequence,
    pub config: PipelineConfig,
    pub analysis: FrameAnalysis,
    pub target: TargetSpec,
}

/// A 160x120 noisy sequence of `length` frames with the model fitted on
/// frame 1 and frame 2 analyzed around the first ground-truth box.
pub fn scene(length: usize) -> Scene {
    let spec = SynthSpec {
        length: length.max(2),
        noise_sigma: 4.0,
        ..SynthSpec::preset("plain", 7).expect("known preset")
    };
    let sequence = synth_sequence(&spec, &mut ChaCha8Rng::seed_from_u64(7)).expect("valid spec");
    let config = PipelineConfig::default();
    let first = sequence.ground_truth[0];
    let model = fit_model(&sequence.frames[0], &first, &config).expect("target inside frame");
    let analysis =
        analyze_frame(&sequence.frames[1], &model, &first, &config).expect("target inside frame");
    let target = TargetSpec::new(first, analysis.frame_rho(&first));
    Scene {
        sequence,
        config,
        analysis,
        target,
    }
}
