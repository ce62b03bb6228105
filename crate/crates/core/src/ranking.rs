//! Target-specific ranking of proposals by shape, color and size
//! affinity to the tracked target.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::density::ResponseMap;
use crate::imaging::{BoundingBox, IntegralImage};
use crate::proposals::{Proposal, TargetSpec};

#[derive(Debug, Error, PartialEq)]
pub enum RankingError {
    #[error("box {0} lies outside the {1}x{2} response map")]
    BoxOutside(BoundingBox, usize, usize),
}

/// How size differences enter the size affinity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SizeMode {
    /// Raw pixel differences.
    Literal,
    /// Differences relative to the target dimensions.
    #[default]
    Normalized,
}

impl fmt::Display for SizeMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SizeMode::Literal => "literal",
            SizeMode::Normalized => "normalized",
        })
    }
}

impl FromStr for SizeMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "literal" => Ok(SizeMode::Literal),
            "normalized" => Ok(SizeMode::Normalized),
            other => Err(format!("unknown size mode {other:?} (literal|normalized)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct AffinityConfig {
    pub size_mode: SizeMode,
}

pub fn shape_affinity(rho_i: f64, rho_t: f64) -> f64 {
    (-(rho_i - rho_t).abs()).exp()
}

/// Mean response inside the box, via a prebuilt summed-area table of the
/// response map.
pub fn color_affinity_with(integral: &IntegralImage, bbox: &BoundingBox) -> Result<f64, RankingError> {
    let clipped = bbox
        .clip(integral.width(), integral.height())
        .ok_or(RankingError::BoxOutside(*bbox, integral.width(), integral.height()))?;
    Ok(integral.box_sum(&clipped) / clipped.area() as f64)
}

pub fn color_affinity(response: &ResponseMap, bbox: &BoundingBox) -> Result<f64, RankingError> {
    color_affinity_with(&response.integral(), bbox)
}

pub fn size_affinity(bbox: &BoundingBox, target: &TargetSpec, config: &AffinityConfig) -> f64 {
    let dw = (bbox.w as f64 - target.width()).abs();
    let dh = (bbox.h as f64 - target.height()).abs();
    match config.size_mode {
        SizeMode::Literal => (-dw).exp() * (-dh).exp(),
        SizeMode::Normalized => (-dw / target.width()).exp() * (-dh / target.height()).exp(),
    }
}

pub fn combined_affinity(s: f64, c: f64, z: f64) -> f64 {
    s * c * z
}

/// Fill `s`, `c`, `z`, `a` on every proposal and stably sort by `a`
/// descending. Proposals entirely outside the response map get `c = 0`.
pub fn rank_proposals(
    proposals: &[Proposal],
    target: &TargetSpec,
    response: &ResponseMap,
    config: &AffinityConfig,
) -> Vec<Proposal> {
    let integral = response.integral();
    let mut ranked: Vec<Proposal> = proposals
        .iter()
        .map(|p| {
            let mut p = *p;
            p.s = shape_affinity(p.rho, target.rho);
            p.c = color_affinity_with(&integral, &p.bbox).unwrap_or(0.0);
            p.z = size_affinity(&p.bbox, target, config);
            p.a = combined_affinity(p.s, p.c, p.z);
            p
        })
        .collect();
    ranked.sort_by(|x, y| y.a.partial_cmp(&x.a).unwrap_or(std::cmp::Ordering::Equal));
    ranked
}
