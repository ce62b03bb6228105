//! Tracking by detection over target-specific proposals: candidates are the
//! ranked proposals around the last target, a trainable scorer picks one,
//! and the color model and scorer are refreshed on a fixed cadence.

mod features;
mod scorer;

pub use features::{EmptyBox, FeatureContext, FeatureVector, FEATURE_BINS, FEATURE_LEN, HIST_LEN};
pub use scorer::{
    CandidateScorer, LogisticScorer, Sample, SampleLabel, TrainReport, TrainSchedule,
};

use std::cmp::Ordering;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::density::{update_model, DensityError, ForegroundModel};
use crate::imaging::{BoundingBox, ImageBuffer};
use crate::pipeline::{analyze_frame, fit_model, FrameAnalysis, PipelineConfig, PipelineError};
use crate::proposals::{Proposal, TargetSpec};

#[derive(Debug, Error, PartialEq)]
pub enum TrackError {
    #[error("invalid tracker configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error("target {0} must lie inside the frame and be at least 4x4")]
    DegenerateTarget(BoundingBox),
    #[error("no positives")]
    NoPositives,
    #[error("frame is {0}x{1} but the sequence is {2}x{3}")]
    FrameSize(usize, usize, usize, usize),
}

impl From<DensityError> for TrackError {
    fn from(e: DensityError) -> Self {
        TrackError::Pipeline(PipelineError::Density(e))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackerConfig {
    pub pipeline: PipelineConfig,
    /// Ranked candidates kept per frame.
    pub top_k: usize,
    /// Candidates overlapping the target by more than this are positives.
    pub phi: f64,
    /// Candidates overlapping the target by less than this are negatives.
    pub omega: f64,
    /// Gaussian-jittered positives added per training round.
    pub n_tilde: usize,
    /// Frames between model and scorer refreshes.
    pub kappa: usize,
    /// Color model learning rate.
    pub lambda: f64,
    pub seed: u64,
    /// Use `0.1 h` rather than `0.1 w` as the height jitter.
    pub height_var_uses_h: bool,
    /// Multiplier on the jitter standard deviations.
    pub augment_scale: f64,
    pub init_epochs: usize,
    pub learning_rate: f64,
    pub update_epochs: usize,
    /// Negatives kept per positive, hardest first.
    pub negative_ratio: usize,
    /// Best candidate scores below this mark the frame as lost.
    pub min_score: f64,
    /// Candidates scoring within this of the best count as tied; ties go
    /// to the highest combined affinity, then the smallest box.
    pub score_tolerance: f64,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            pipeline: PipelineConfig::default(),
            top_k: 500,
            phi: 0.7,
            omega: 0.5,
            n_tilde: 100,
            kappa: ForegroundModel::DEFAULT_KAPPA,
            lambda: ForegroundModel::DEFAULT_LAMBDA,
            seed: 0,
            height_var_uses_h: false,
            augment_scale: 1.0,
            init_epochs: 200,
            learning_rate: 0.1,
            update_epochs: 20,
            negative_ratio: 10,
            min_score: 0.5,
            score_tolerance: 0.01,
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<(), TrackError> {
        let bad = |m: &str| Err(TrackError::Config(m.to_string()));
        if self.phi <= self.omega {
            return bad("phi must exceed omega");
        }
        if self.omega < 0.0 {
            return bad("omega must be non-negative");
        }
        if self.phi > 1.0 {
            return bad("phi must not exceed 1");
        }
        if self.top_k == 0 {
            return bad("top_k must be positive");
        }
        if self.kappa == 0 {
            return bad("kappa must be positive");
        }
        if !(self.lambda > 0.0 && self.lambda <= 1.0) {
            return bad("lambda must lie in (0, 1]");
        }
        if !(self.augment_scale >= 0.0 && self.augment_scale.is_finite()) {
            return bad("augment_scale must be finite and non-negative");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if self.init_epochs == 0 {
            return bad("init_epochs must be positive");
        }
        if !(0.0..=1.0).contains(&self.min_score) {
            return bad("min_score must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.score_tolerance) {
            return bad("score_tolerance must lie in [0, 1]");
        }
        self.pipeline.validate()?;
        Ok(())
    }
}

/// Split proposals into positives (IoU above `phi`) and negatives (IoU
/// below `omega`); the rest are dropped.
pub fn label_samples(
    proposals: &[Proposal],
    target: &BoundingBox,
    phi: f64,
    omega: f64,
) -> (Vec<Proposal>, Vec<Proposal>) {
    let mut positives = Vec::new();
    let mut negatives = Vec::new();
    for p in proposals {
        let overlap = p.bbox.iou(target);
        if overlap > phi {
            positives.push(*p);
        } else if overlap < omega {
            negatives.push(*p);
        }
    }
    (positives, negatives)
}

/// `n` boxes whose `(x, y, w, h)` are drawn independently around the
/// target with standard deviations `scale * (0.1w, 0.1h, 0.1w, 0.1w)`, or
/// `0.1h` for the height when `height_uses_h` is set. Dimensions are kept
/// at least 1.
pub fn augment_positives<R: Rng + ?Sized>(
    target: &BoundingBox,
    n: usize,
    rng: &mut R,
    scale: f64,
    height_uses_h: bool,
) -> Vec<BoundingBox> {
    let (w, h) = (target.w as f64, target.h as f64);
    let std = [
        0.1 * w * scale,
        0.1 * h * scale,
        0.1 * w * scale,
        if height_uses_h { 0.1 * h } else { 0.1 * w } * scale,
    ];
    let mean = [target.x as f64, target.y as f64, w, h];
    (0..n)
        .map(|_| {
            let v: [f64; 4] = std::array::from_fn(|i| {
                let z: f64 = rng.sample(StandardNormal);
                mean[i] + std[i] * z
            });
            BoundingBox::new(
                v[0].round() as i32,
                v[1].round() as i32,
                (v[2].round() as i32).max(1),
                (v[3].round() as i32).max(1),
            )
        })
        .collect()
}

/// Outcome of tracking one frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepResult {
    pub bbox: BoundingBox,
    pub score: f64,
    pub lost: bool,
    /// Whether the color model and scorer were refreshed on this frame.
    pub updated: bool,
}

pub struct TrackerState {
    config: TrackerConfig,
    target: BoundingBox,
    model: ForegroundModel,
    rho_t: f64,
    scorer: Box<dyn CandidateScorer + Send>,
    /// 1-based index of the last processed frame.
    frame: usize,
    rng: ChaCha8Rng,
    width: usize,
    height: usize,
}

impl std::fmt::Debug for TrackerState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TrackerState")
            .field("target", &self.target)
            .field("frame", &self.frame)
            .field("rho_t", &self.rho_t)
            .finish_non_exhaustive()
    }
}

pub fn init_tracker(
    frame: &ImageBuffer,
    target: &BoundingBox,
    config: TrackerConfig,
) -> Result<TrackerState, TrackError> {
    TrackerState::with_scorer(frame, target, config, Box::new(LogisticScorer::new(FEATURE_LEN)))
}

/// One training sample per candidate plus jittered positives, with
/// negatives capped at `negative_ratio` per positive (highest current
/// score first).
fn build_samples(
    scorer: &dyn CandidateScorer,
    candidates: &[Proposal],
    analysis: &FeatureSource<'_>,
    label_box: &BoundingBox,
    config: &TrackerConfig,
    rng: &mut ChaCha8Rng,
) -> Vec<Sample> {
    let (pos, neg) = label_samples(candidates, label_box, config.phi, config.omega);
    let mut positives: Vec<Sample> = pos
        .iter()
        .filter_map(|p| analysis.sample(&p.bbox, SampleLabel::Positive))
        .collect();
    let jittered = augment_positives(
        label_box,
        config.n_tilde,
        rng,
        config.augment_scale,
        config.height_var_uses_h,
    );
    positives.extend(
        jittered
            .iter()
            .filter_map(|b| analysis.sample(b, SampleLabel::Positive)),
    );
    if positives.is_empty() {
        return positives;
    }
    let mut negatives: Vec<(f64, Sample)> = neg
        .iter()
        .filter_map(|p| analysis.sample(&p.bbox, SampleLabel::Negative))
        .map(|s| (scorer.score(&s.feature), s))
        .collect();
    negatives.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(Ordering::Equal));
    negatives.truncate(config.negative_ratio * positives.len());
    positives.extend(negatives.into_iter().map(|(_, s)| s));
    positives
}

/// Feature extraction for one analyzed frame relative to a reference
/// target.
struct FeatureSource<'a> {
    analysis: &'a FrameAnalysis,
    context: FeatureContext,
    reference: TargetSpec,
}

impl<'a> FeatureSource<'a> {
    fn new(frame: &ImageBuffer, analysis: &'a FrameAnalysis, reference: TargetSpec) -> Self {
        Self {
            analysis,
            context: FeatureContext::new(frame, analysis.response.integral()),
            reference,
        }
    }

    fn feature(&self, bbox: &BoundingBox) -> Option<FeatureVector> {
        let rho = self.analysis.response_rho(bbox);
        self.context.extract(bbox, rho, &self.reference).ok()
    }

    fn sample(&self, bbox: &BoundingBox, label: SampleLabel) -> Option<Sample> {
        self.feature(bbox).map(|feature| Sample {
            bbox: *bbox,
            label,
            feature,
        })
    }
}

impl TrackerState {
    /// Initialize with a caller-supplied scorer.
    pub fn with_scorer(
        frame: &ImageBuffer,
        target: &BoundingBox,
        config: TrackerConfig,
        mut scorer: Box<dyn CandidateScorer + Send>,
    ) -> Result<Self, TrackError> {
        config.validate()?;
        if target.w < 4 || target.h < 4 || !frame.bounds().contains(target) {
            return Err(TrackError::DegenerateTarget(*target));
        }
        let model = fit_model(frame, target, &config.pipeline)?
            .with_schedule(config.lambda, config.kappa)
            .at_frame(1);
        let analysis = analyze_frame(frame, &model, target, &config.pipeline)?;
        let rho_t = analysis.frame_rho(target);
        let spec = TargetSpec::new(*target, rho_t);
        let mut candidates = analysis.rank(
            &analysis.fused(&spec, &config.pipeline.gen),
            &spec,
            &config.pipeline.affinity,
        );
        candidates.truncate(config.top_k);

        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let source = FeatureSource::new(frame, &analysis, spec);
        let samples = build_samples(scorer.as_ref(), &candidates, &source, target, &config, &mut rng);
        if samples.is_empty() {
            return Err(TrackError::NoPositives);
        }
        let schedule = TrainSchedule {
            max_epochs: config.init_epochs,
            learning_rate: config.learning_rate,
            loss_tolerance: 1e-6,
        };
        scorer.train(&samples, &schedule, &mut rng);
        Ok(Self {
            target: *target,
            model,
            rho_t,
            scorer,
            frame: 1,
            rng,
            width: frame.width(),
            height: frame.height(),
            config,
        })
    }

    pub fn target(&self) -> BoundingBox {
        self.target
    }

    pub fn model(&self) -> &ForegroundModel {
        &self.model
    }

    pub fn frame_index(&self) -> usize {
        self.frame
    }

    pub fn target_rho(&self) -> f64 {
        self.rho_t
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.config
    }

    /// Score of `bbox` under the current scorer, with features taken
    /// relative to the current target.
    pub fn score_box(&self, frame: &ImageBuffer, bbox: &BoundingBox) -> Result<f64, TrackError> {
        let analysis = analyze_frame(frame, &self.model, &self.target, &self.config.pipeline)?;
        let source =
            FeatureSource::new(frame, &analysis, TargetSpec::new(self.target, self.rho_t));
        Ok(source.feature(bbox).map_or(0.0, |f| self.scorer.score(&f)))
    }

    /// Ranked candidates for `frame` around the current target.
    fn candidates(&self, analysis: &FrameAnalysis) -> Vec<Proposal> {
        let spec = TargetSpec::new(self.target, self.rho_t);
        let gen = &self.config.pipeline.gen;
        let mut ranked = analysis.rank(&analysis.fused(&spec, gen), &spec, &self.config.pipeline.affinity);
        ranked.truncate(self.config.top_k);
        ranked
    }

    pub fn step(&mut self, frame: &ImageBuffer) -> Result<StepResult, TrackError> {
        if frame.width() != self.width || frame.height() != self.height {
            return Err(TrackError::FrameSize(frame.width(), frame.height(), self.width, self.height));
        }
        self.frame += 1;
        let analysis = analyze_frame(frame, &self.model, &self.target, &self.config.pipeline)?;
        let candidates = self.candidates(&analysis);
        let source = FeatureSource::new(frame, &analysis, TargetSpec::new(self.target, self.rho_t));

        let scored: Vec<(f64, &Proposal)> = candidates
            .iter()
            .filter_map(|p| source.feature(&p.bbox).map(|f| (self.scorer.score(&f), p)))
            .collect();
        let top = scored.iter().map(|(s, _)| *s).fold(f64::NEG_INFINITY, f64::max);
        let best = scored
            .iter()
            .filter(|(s, _)| *s >= top - self.config.score_tolerance)
            .max_by(|(_, a), (_, b)| {
                a.a.partial_cmp(&b.a)
                    .unwrap_or(Ordering::Equal)
                    .then_with(|| b.bbox.cmp(&a.bbox))
            })
            .map(|(s, p)| (*s, **p));
        let Some((score, chosen)) = best else {
            return Ok(StepResult {
                bbox: self.target,
                score: 0.0,
                lost: true,
                updated: false,
            });
        };
        if score < self.config.min_score {
            return Ok(StepResult {
                bbox: self.target,
                score,
                lost: true,
                updated: false,
            });
        }
        self.target = chosen.bbox;

        let updated = (self.frame - 1).is_multiple_of(self.config.kappa);
        if updated {
            self.refresh(frame, &analysis, &candidates, &source)?;
        }
        Ok(StepResult {
            bbox: chosen.bbox,
            score,
            lost: false,
            updated,
        })
    }

    fn refresh(
        &mut self,
        frame: &ImageBuffer,
        analysis: &FrameAnalysis,
        candidates: &[Proposal],
        source: &FeatureSource<'_>,
    ) -> Result<(), TrackError> {
        let fresh = fit_model(frame, &self.target, &self.config.pipeline)?;
        self.model = update_model(&fresh, &self.model, self.config.lambda)?
            .with_schedule(self.config.lambda, self.config.kappa)
            .at_frame(self.frame);
        self.rho_t = analysis.frame_rho(&self.target);
        let samples = build_samples(
            self.scorer.as_ref(),
            candidates,
            source,
            &self.target,
            &self.config,
            &mut self.rng,
        );
        let schedule = TrainSchedule {
            max_epochs: self.config.update_epochs,
            learning_rate: self.config.learning_rate,
            loss_tolerance: 1e-6,
        };
        self.scorer.train(&samples, &schedule, &mut self.rng);
        Ok(())
    }
}

/// One row of a trajectory: 1-based frame id, box, score, lost flag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackRecord {
    pub frame_id: usize,
    pub bbox: BoundingBox,
    pub score: f64,
    pub lost: bool,
}

/// Track `frames` from `init` on the first frame. The first record is the
/// initial box with score 1.
pub fn track_frames<'a, I>(
    frames: I,
    init: &BoundingBox,
    config: TrackerConfig,
) -> Result<Vec<TrackRecord>, TrackError>
where
    I: IntoIterator<Item = &'a ImageBuffer>,
{
    let mut frames = frames.into_iter();
    let Some(first) = frames.next() else {
        return Ok(Vec::new());
    };
    let mut state = init_tracker(first, init, config)?;
    let mut records = vec![TrackRecord {
        frame_id: 1,
        bbox: *init,
        score: 1.0,
        lost: false,
    }];
    for frame in frames {
        let r = state.step(frame)?;
        records.push(TrackRecord {
            frame_id: state.frame_index(),
            bbox: r.bbox,
            score: r.score,
            lost: r.lost,
        });
    }
    Ok(records)
}

/// `frame_id,x,y,w,h,score,lost` with a header row.
pub fn format_track_csv(records: &[TrackRecord]) -> String {
    let mut out = String::from("frame_id,x,y,w,h,score,lost\n");
    for r in records {
        let b = r.bbox;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.frame_id, b.x, b.y, b.w, b.h, r.score, r.lost as u8
        );
    }
    out
}
