//! Target-specific object proposals: color density maps, edge-group box
//! scoring, two-source proposal fusion, affinity ranking, a
//! proposal-driven tracker and the evaluation harness around them.

pub mod density;
pub mod edges;
pub mod evaluation;
pub mod imaging;
pub mod pipeline;
pub mod proposals;
pub mod ranking;
pub mod tracking;

pub use density::{
    build_trimap, estimate_model, response_map, update_model, DensityError, ForegroundModel, Label,
    ResponseMap, TriMap,
};
pub use edges::{
    detect_edges, detect_response_edges, group_affinities, group_edges, AffinityTable, EdgeGroup,
    EdgeGroups, EdgeMap, EdgeParams,
};
pub use imaging::{
    decode_pnm, integral_image, load_image, quantize_pixel, BoundingBox, ImageBuffer, ImageError,
    IntegralImage,
};
pub use proposals::{
    generate_topg, merge_sources, nms, score_box, GenParams, Proposal, ProposalError, Source,
    TargetSpec,
};
pub use ranking::{rank_proposals, AffinityConfig, RankingError, SizeMode};
pub use pipeline::{analyze_frame, fit_model, search_window, FrameAnalysis, PipelineConfig, PipelineError};
pub use tracking::{init_tracker, track_frames, TrackError, TrackerConfig, TrackerState};
