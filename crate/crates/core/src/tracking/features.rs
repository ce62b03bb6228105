//! Fixed-length candidate descriptors: a coarse joint color histogram plus
//! response, contour and geometry terms relative to the target.

use thiserror::Error;

use crate::imaging::{BoundingBox, ImageBuffer, IntegralImage};
use crate::proposals::TargetSpec;

/// Bins per channel of the descriptor histogram.
pub const FEATURE_BINS: usize = 8;
pub const HIST_LEN: usize = FEATURE_BINS * FEATURE_BINS * FEATURE_BINS;
/// Histogram, mean response, contour score, two log size ratios and the
/// normalized center offset.
pub const FEATURE_LEN: usize = HIST_LEN + 5;

#[derive(Debug, Error, PartialEq)]
#[error("box {0} has no pixels inside the {1}x{2} frame")]
pub struct EmptyBox(pub BoundingBox, pub usize, pub usize);

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector(pub Vec<f64>);

impl FeatureVector {
    pub fn histogram(&self) -> &[f64] {
        &self.0[..HIST_LEN]
    }

    pub fn mean_response(&self) -> f64 {
        self.0[HIST_LEN]
    }

    pub fn rho(&self) -> f64 {
        self.0[HIST_LEN + 1]
    }

    pub fn log_width_ratio(&self) -> f64 {
        self.0[HIST_LEN + 2]
    }

    pub fn log_height_ratio(&self) -> f64 {
        self.0[HIST_LEN + 3]
    }

    pub fn center_offset(&self) -> f64 {
        self.0[HIST_LEN + 4]
    }
}

/// Per-frame tables that make descriptor extraction cheap: the coarse
/// color bin of every pixel and the response summed-area table.
pub struct FeatureContext {
    width: usize,
    height: usize,
    bins: Vec<u16>,
    response: IntegralImage,
}

impl FeatureContext {
    pub fn new(frame: &ImageBuffer, response: IntegralImage) -> Self {
        let rgb = frame.to_rgb();
        let bins = rgb
            .data()
            .chunks_exact(3)
            .map(|p| {
                let b = |v: u8| v as usize * FEATURE_BINS / 256;
                (b(p[0]) * FEATURE_BINS * FEATURE_BINS + b(p[1]) * FEATURE_BINS + b(p[2])) as u16
            })
            .collect();
        Self {
            width: frame.width(),
            height: frame.height(),
            bins,
            response,
        }
    }

    /// Descriptor of `bbox` (clipped to the frame) with contour score
    /// `rho`, relative to `target`.
    pub fn extract(
        &self,
        bbox: &BoundingBox,
        rho: f64,
        target: &TargetSpec,
    ) -> Result<FeatureVector, EmptyBox> {
        let clipped = bbox
            .clip(self.width, self.height)
            .ok_or(EmptyBox(*bbox, self.width, self.height))?;
        let mut v = vec![0.0; FEATURE_LEN];
        for y in clipped.y as usize..clipped.bottom() as usize {
            let row = &self.bins[y * self.width..(y + 1) * self.width];
            for &b in &row[clipped.x as usize..clipped.right() as usize] {
                v[b as usize] += 1.0;
            }
        }
        let area = clipped.area() as f64;
        for h in &mut v[..HIST_LEN] {
            *h /= area;
        }
        v[HIST_LEN] = self.response.box_sum(&clipped) / area;
        v[HIST_LEN + 1] = rho;
        v[HIST_LEN + 2] = (clipped.w as f64 / target.width()).ln();
        v[HIST_LEN + 3] = (clipped.h as f64 / target.height()).ln();
        let (cx, cy) = clipped.center();
        let (tx, ty) = target.bbox.center();
        v[HIST_LEN + 4] = ((cx - tx) / target.width()).hypot((cy - ty) / target.height());
        Ok(FeatureVector(v))
    }
}
