//! Per-frame proposal pipeline shared by the tracker and the command-line
//! tools: color model fitting around a target, response map, edge
//! summaries of the search window, fused proposals and ranking.

use thiserror::Error;

use crate::density::{
    build_trimap, estimate_model, response_map, DensityError, ForegroundModel, ResponseMap,
};
use crate::imaging::{BoundingBox, ImageBuffer};
use crate::proposals::{
    merge_sources, single_source_proposals, EdgeSummary, GenParams, Proposal, ProposalError, Source,
    TargetSpec,
};
use crate::ranking::{rank_proposals, AffinityConfig};

#[derive(Debug, Error, PartialEq)]
pub enum PipelineError {
    #[error(transparent)]
    Density(#[from] DensityError),
    #[error(transparent)]
    Proposal(#[from] ProposalError),
    #[error("target {0} does not overlap the {1}x{2} frame")]
    TargetOutside(BoundingBox, usize, usize),
    #[error("invalid configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    /// Histogram bins per color channel.
    pub bins: usize,
    /// Relative width of the blended tri-map band.
    pub gamma_margin: f64,
    /// Search window size as a multiple of the target size.
    pub search_factor: f64,
    pub gen: GenParams,
    pub affinity: AffinityConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            bins: 32,
            gamma_margin: 0.4,
            search_factor: 5.0,
            gen: GenParams::default(),
            affinity: AffinityConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: &str| Err(PipelineError::Config(m.to_string()));
        if !(2..=256).contains(&self.bins) {
            return bad("bins must lie in 2..=256");
        }
        if !(0.0..1.0).contains(&self.gamma_margin) {
            return bad("gamma_margin must lie in [0, 1)");
        }
        if !(self.search_factor > 1.0 && self.search_factor.is_finite()) {
            return bad("search_factor must exceed 1");
        }
        self.gen.validate()?;
        Ok(())
    }
}

/// Window of `factor` times the target size centered on it, clipped to
/// the frame.
pub fn search_window(
    target: &BoundingBox,
    factor: f64,
    width: usize,
    height: usize,
) -> Option<BoundingBox> {
    let (cx, cy) = target.center();
    BoundingBox::from_center(cx, cy, target.w as f64 * factor, target.h as f64 * factor)
        .clip(width, height)
}

/// Color model estimated from the tri-map of `target` inside its search
/// window.
pub fn fit_model(
    frame: &ImageBuffer,
    target: &BoundingBox,
    config: &PipelineConfig,
) -> Result<ForegroundModel, PipelineError> {
    let outside = || PipelineError::TargetOutside(*target, frame.width(), frame.height());
    let search = search_window(target, config.search_factor, frame.width(), frame.height())
        .ok_or_else(outside)?;
    let crop = frame.crop(&search).ok_or_else(outside)?;
    let local = target.translate(-search.x, -search.y);
    let trimap = build_trimap(crop.width(), crop.height(), &local, config.gamma_margin)?;
    Ok(estimate_model(&crop, &trimap, config.bins)?)
}

/// Everything derived from one frame around one target estimate.
pub struct FrameAnalysis {
    pub search: BoundingBox,
    pub response: ResponseMap,
    pub frame_edges: EdgeSummary,
    pub response_edges: EdgeSummary,
}

pub fn analyze_frame(
    frame: &ImageBuffer,
    model: &ForegroundModel,
    around: &BoundingBox,
    config: &PipelineConfig,
) -> Result<FrameAnalysis, PipelineError> {
    let outside = || PipelineError::TargetOutside(*around, frame.width(), frame.height());
    let search = search_window(around, config.search_factor, frame.width(), frame.height())
        .ok_or_else(outside)?;
    let response = response_map(frame, model)?;
    let frame_edges =
        EdgeSummary::of_frame(frame, &search, &config.gen.edges).ok_or_else(outside)?;
    let response_edges =
        EdgeSummary::of_response(&response, &search, &config.gen.edges).ok_or_else(outside)?;
    Ok(FrameAnalysis {
        search,
        response,
        frame_edges,
        response_edges,
    })
}

impl FrameAnalysis {
    /// Contour score of `bbox` on the frame edges.
    pub fn frame_rho(&self, bbox: &BoundingBox) -> f64 {
        self.frame_edges.scorer().score(bbox)
    }

    /// Contour score of `bbox` on the response-map edges.
    pub fn response_rho(&self, bbox: &BoundingBox) -> f64 {
        self.response_edges.scorer().score(bbox)
    }

    /// Proposals from both sources, each suppressed and truncated to the
    /// per-source budget, then deduplicated across sources.
    pub fn fused(&self, target: &TargetSpec, gen: &GenParams) -> Vec<Proposal> {
        let budget = gen.per_source_budget;
        let a = single_source_proposals(
            &self.frame_edges,
            &self.search,
            target,
            gen,
            Source::FrameEdges,
            budget,
        );
        let b = single_source_proposals(
            &self.response_edges,
            &self.search,
            target,
            gen,
            Source::ResponseEdges,
            budget,
        );
        merge_sources(a, b, gen.dedup_iou)
    }

    /// Frame-edge proposals alone with the given budget.
    pub fn frame_only(&self, target: &TargetSpec, gen: &GenParams, budget: usize) -> Vec<Proposal> {
        single_source_proposals(
            &self.frame_edges,
            &self.search,
            target,
            gen,
            Source::FrameEdges,
            budget,
        )
    }

    pub fn rank(&self, proposals: &[Proposal], target: &TargetSpec, affinity: &AffinityConfig) -> Vec<Proposal> {
        rank_proposals(proposals, target, &self.response, affinity)
    }
}
