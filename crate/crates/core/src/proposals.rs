//! Edge-group box scoring, sliding-window candidate generation,
//! non-maximum suppression and the two-source proposal fusion.

use std::cell::RefCell;
use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::density::ResponseMap;
use crate::edges::{
    detect_edges, detect_response_edges, group_affinities, group_edges, AffinityTable, EdgeGroups,
    EdgeMap, EdgeParams,
};
use crate::imaging::{BoundingBox, ImageBuffer, IntegralImage};

#[derive(Debug, Error, PartialEq)]
pub enum ProposalError {
    #[error("search region {0} does not overlap the frame")]
    SearchOutside(BoundingBox),
    #[error("response map is {0}x{1} but frame is {2}x{3}")]
    ResponseSize(usize, usize, usize, usize),
    #[error("invalid generation parameter: {0}")]
    Params(String),
}

/// Which edge map a proposal was generated from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Source {
    FrameEdges,
    ResponseEdges,
}

impl Source {
    pub fn as_str(&self) -> &'static str {
        match self {
            Source::FrameEdges => "frame",
            Source::ResponseEdges => "response",
        }
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Source {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "frame" => Ok(Source::FrameEdges),
            "response" => Ok(Source::ResponseEdges),
            other => Err(format!("unknown proposal source {other:?}")),
        }
    }
}

/// A scored candidate box. Affinity fields hold `-1.0` until ranked.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Proposal {
    pub bbox: BoundingBox,
    pub rho: f64,
    pub source: Source,
    pub s: f64,
    pub c: f64,
    pub z: f64,
    pub a: f64,
}

impl Proposal {
    pub const UNSET: f64 = -1.0;

    pub fn new(bbox: BoundingBox, rho: f64, source: Source) -> Self {
        Self {
            bbox,
            rho,
            source,
            s: Self::UNSET,
            c: Self::UNSET,
            z: Self::UNSET,
            a: Self::UNSET,
        }
    }

    pub fn is_ranked(&self) -> bool {
        self.a != Self::UNSET
    }
}

/// Descending contour score, then box coordinates.
pub fn by_rho_desc(a: &Proposal, b: &Proposal) -> Ordering {
    b.rho
        .partial_cmp(&a.rho)
        .unwrap_or(Ordering::Equal)
        .then_with(|| a.bbox.cmp(&b.bbox))
}

/// Window grid and budget for candidate generation.
#[derive(Debug, Clone, PartialEq)]
pub struct GenParams {
    /// Window sizes relative to the target dimensions.
    pub scales: Vec<f64>,
    /// Multipliers on the target aspect ratio.
    pub aspect_perturbations: Vec<f64>,
    /// Adjacent windows overlap at least this much.
    pub step_iou: f64,
    pub nms_iou: f64,
    pub per_source_budget: usize,
    /// Cross-source duplicates at or above this IoU are merged.
    pub dedup_iou: f64,
    /// Rounds of greedy coordinate refinement per window.
    pub refine_rounds: usize,
    pub edges: EdgeParams,
}

impl Default for GenParams {
    fn default() -> Self {
        Self {
            scales: vec![0.5, 0.7, 1.0, 1.4, 2.0],
            aspect_perturbations: vec![0.75, 1.0, 1.33],
            step_iou: 0.65,
            nms_iou: 0.75,
            per_source_budget: 500,
            dedup_iou: 0.95,
            refine_rounds: 10,
            edges: EdgeParams::default(),
        }
    }
}

impl GenParams {
    pub fn validate(&self) -> Result<(), ProposalError> {
        let bad = |m: &str| Err(ProposalError::Params(m.to_string()));
        if self.scales.is_empty() || self.scales.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return bad("scales must be non-empty and positive");
        }
        if self.aspect_perturbations.is_empty()
            || self.aspect_perturbations.iter().any(|&s| !(s > 0.0 && s.is_finite()))
        {
            return bad("aspect perturbations must be non-empty and positive");
        }
        if !(self.step_iou > 0.0 && self.step_iou < 1.0) {
            return bad("step_iou must lie in (0, 1)");
        }
        if !(self.nms_iou > 0.0 && self.nms_iou < 1.0) {
            return bad("nms_iou must lie in (0, 1)");
        }
        if !(self.dedup_iou > 0.0 && self.dedup_iou <= 1.0) {
            return bad("dedup_iou must lie in (0, 1]");
        }
        if self.edges.mag_threshold <= 0.0 || self.edges.curve_threshold <= 0.0 {
            return bad("edge thresholds must be positive");
        }
        if self.edges.affinity_gamma.is_nan() || self.edges.affinity_gamma <= 0.0 {
            return bad("affinity_gamma must be positive");
        }
        if self.edges.distance_cutoff.is_nan() || self.edges.distance_cutoff < 1.0 {
            return bad("distance_cutoff must be at least 1");
        }
        if self.per_source_budget == 0 {
            return bad("per_source_budget must be positive");
        }
        Ok(())
    }
}

/// What the generator and ranker know about the target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetSpec {
    /// Last known target box.
    pub bbox: BoundingBox,
    /// Contour score of that box.
    pub rho: f64,
}

impl TargetSpec {
    pub fn new(bbox: BoundingBox, rho: f64) -> Self {
        Self { bbox, rho }
    }

    pub fn width(&self) -> f64 {
        self.bbox.w as f64
    }

    pub fn height(&self) -> f64 {
        self.bbox.h as f64
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Placement {
    Unseen,
    Outside,
    Inside,
    Straddling,
}

struct Scratch {
    stamp: Vec<u32>,
    placement: Vec<Placement>,
    best: Vec<f64>,
    generation: u32,
    touched: Vec<usize>,
}

/// Scores boxes against a fixed set of edge groups.
///
/// Groups live in the local coordinates of the grid they were computed
/// on; `origin` maps that grid into frame coordinates, and boxes passed to
/// [`BoxScorer::score`] are in frame coordinates.
pub struct BoxScorer<'a> {
    groups: &'a EdgeGroups,
    affinities: &'a AffinityTable,
    origin: (i32, i32),
    mass: IntegralImage,
    cell: i32,
    cols: usize,
    rows: usize,
    buckets: Vec<Vec<u32>>,
    scratch: RefCell<Scratch>,
}

impl<'a> BoxScorer<'a> {
    const CELL: i32 = 8;

    pub fn new(groups: &'a EdgeGroups, affinities: &'a AffinityTable) -> Self {
        Self::with_origin(groups, affinities, (0, 0))
    }

    pub fn with_origin(
        groups: &'a EdgeGroups,
        affinities: &'a AffinityTable,
        origin: (i32, i32),
    ) -> Self {
        let cell = Self::CELL;
        let cols = groups.width.div_ceil(cell as usize).max(1);
        let rows = groups.height.div_ceil(cell as usize).max(1);
        let mut buckets = vec![Vec::new(); cols * rows];
        for (gi, g) in groups.groups.iter().enumerate() {
            let (x0, y0, x1, y1) = g.extent;
            for cy in (y0 / cell)..=((y1 - 1) / cell) {
                for cx in (x0 / cell)..=((x1 - 1) / cell) {
                    buckets[cy as usize * cols + cx as usize].push(gi as u32);
                }
            }
        }
        let n = groups.len();
        Self {
            groups,
            affinities,
            origin,
            mass: IntegralImage::new(groups.width, groups.height, &groups.grouped_magnitude),
            cell,
            cols,
            rows,
            buckets,
            scratch: RefCell::new(Scratch {
                stamp: vec![0; n],
                placement: vec![Placement::Unseen; n],
                best: vec![0.0; n],
                generation: 0,
                touched: Vec::new(),
            }),
        }
    }

    pub fn origin(&self) -> (i32, i32) {
        self.origin
    }

    /// Frame-coordinate rectangle covered by the scorer's grid.
    pub fn extent(&self) -> BoundingBox {
        BoundingBox::new(
            self.origin.0,
            self.origin.1,
            self.groups.width as i32,
            self.groups.height as i32,
        )
    }

    /// Contour score of a box.
    ///
    /// Every group wholly inside the box contributes its magnitude weighted
    /// by how weakly it is chained (through inside groups, by the product
    /// of pairwise affinities) to a group crossing the box boundary. Edge
    /// mass in the central half-size box is subtracted and the result is
    /// divided by the perimeter raised to 1.5.
    pub fn score(&self, bbox: &BoundingBox) -> f64 {
        let local = bbox.translate(-self.origin.0, -self.origin.1);
        let Some(b) = local.clip(self.groups.width, self.groups.height) else {
            return 0.0;
        };
        let mut guard = self.scratch.borrow_mut();
        let sc = &mut *guard;
        sc.generation = sc.generation.wrapping_add(1);
        if sc.generation == 0 {
            sc.stamp.iter_mut().for_each(|s| *s = 0);
            sc.generation = 1;
        }
        let gen = sc.generation;
        sc.touched.clear();

        let (bx0, by0, bx1, by1) = (b.x, b.y, b.right(), b.bottom());
        let cx0 = (bx0 / self.cell) as usize;
        let cy0 = (by0 / self.cell) as usize;
        let cx1 = (((bx1 - 1) / self.cell) as usize).min(self.cols - 1);
        let cy1 = (((by1 - 1) / self.cell) as usize).min(self.rows - 1);
        for cy in cy0..=cy1 {
            for cx in cx0..=cx1 {
                for &gi in &self.buckets[cy * self.cols + cx] {
                    let gi = gi as usize;
                    if sc.stamp[gi] == gen {
                        continue;
                    }
                    sc.stamp[gi] = gen;
                    let g = &self.groups.groups[gi];
                    let (x0, y0, x1, y1) = g.extent;
                    let placement = if x0 >= bx0 && y0 >= by0 && x1 <= bx1 && y1 <= by1 {
                        Placement::Inside
                    } else if x1 <= bx0 || y1 <= by0 || x0 >= bx1 || y0 >= by1 {
                        Placement::Outside
                    } else {
                        let inside = g
                            .pixels
                            .iter()
                            .filter(|&&(x, y)| b.contains_point(x as i32, y as i32))
                            .count();
                        if inside == 0 {
                            Placement::Outside
                        } else if inside == g.pixels.len() {
                            Placement::Inside
                        } else {
                            Placement::Straddling
                        }
                    };
                    sc.placement[gi] = placement;
                    sc.best[gi] = if placement == Placement::Straddling { 1.0 } else { 0.0 };
                    sc.touched.push(gi);
                }
            }
        }

        // strongest chain from each inside group to the boundary
        let mut heap = BinaryHeap::new();
        for &gi in &sc.touched {
            if sc.placement[gi] == Placement::Straddling {
                heap.push(Chain(1.0, gi));
            }
        }
        while let Some(Chain(value, gi)) = heap.pop() {
            if value < sc.best[gi] {
                continue;
            }
            for &(gj, aff) in self.affinities.neighbors(gi) {
                if sc.stamp[gj] != gen || sc.placement[gj] != Placement::Inside {
                    continue;
                }
                let v = value * aff;
                if v > sc.best[gj] {
                    sc.best[gj] = v;
                    heap.push(Chain(v, gj));
                }
            }
        }

        let mut total = 0.0;
        for &gi in &sc.touched {
            if sc.placement[gi] == Placement::Inside {
                total += (1.0 - sc.best[gi]) * self.groups.groups[gi].magnitude;
            }
        }
        total -= self.mass.box_sum(&center_box(&b));
        let perimeter = 2.0 * (b.w + b.h) as f64;
        (total / perimeter.powf(1.5)).max(0.0)
    }
}

/// Central box with half the width and height.
pub fn center_box(b: &BoundingBox) -> BoundingBox {
    let w = (b.w / 2).max(1);
    let h = (b.h / 2).max(1);
    BoundingBox::new(b.x + (b.w - w) / 2, b.y + (b.h - h) / 2, w, h)
}

#[derive(PartialEq)]
struct Chain(f64, usize);

impl Eq for Chain {}

impl PartialOrd for Chain {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Chain {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0
            .partial_cmp(&other.0)
            .unwrap_or(Ordering::Equal)
            .then_with(|| other.1.cmp(&self.1))
    }
}

/// One-off contour score of a box over groups computed on a grid anchored
/// at the frame origin.
pub fn score_box(bbox: &BoundingBox, groups: &EdgeGroups, affinities: &AffinityTable) -> f64 {
    BoxScorer::new(groups, affinities).score(bbox)
}

/// Edge groups and affinities for one intensity source.
pub struct EdgeSummary {
    pub edges: EdgeMap,
    pub groups: EdgeGroups,
    pub affinities: AffinityTable,
    pub origin: (i32, i32),
}

impl EdgeSummary {
    pub fn from_edges(edges: EdgeMap, params: &EdgeParams, origin: (i32, i32)) -> Self {
        let groups = group_edges(&edges, params.mag_threshold, params.curve_threshold);
        let affinities = group_affinities(&groups, params.affinity_gamma, params.distance_cutoff);
        Self {
            edges,
            groups,
            affinities,
            origin,
        }
    }

    /// Edges of the frame's luma plane inside `region`.
    pub fn of_frame(frame: &ImageBuffer, region: &BoundingBox, params: &EdgeParams) -> Option<Self> {
        let r = region.clip(frame.width(), frame.height())?;
        let crop = frame.crop(&r)?;
        Some(Self::from_edges(detect_edges(&crop), params, (r.x, r.y)))
    }

    /// Edges of the response map inside `region`.
    pub fn of_response(
        response: &ResponseMap,
        region: &BoundingBox,
        params: &EdgeParams,
    ) -> Option<Self> {
        let r = region.clip(response.width(), response.height())?;
        let crop = response.crop(&r)?;
        Some(Self::from_edges(detect_response_edges(&crop), params, (r.x, r.y)))
    }

    pub fn scorer(&self) -> BoxScorer<'_> {
        BoxScorer::with_origin(&self.groups, &self.affinities, self.origin)
    }
}

/// Window dimensions for every (scale, aspect) pair, duplicates removed.
pub fn window_sizes(target: &TargetSpec, params: &GenParams) -> Vec<(i32, i32)> {
    let mut sizes = Vec::new();
    for &s in &params.scales {
        for &a in &params.aspect_perturbations {
            let r = a.sqrt();
            let w = (target.width() * s * r).round().max(1.0) as i32;
            let h = (target.height() * s / r).round().max(1.0) as i32;
            if !sizes.contains(&(w, h)) {
                sizes.push((w, h));
            }
        }
    }
    sizes
}

/// Largest translation keeping the IoU of a length-`len` window with its
/// shifted copy at or above `step_iou`.
pub fn stride(len: i32, step_iou: f64) -> i32 {
    ((len as f64 * (1.0 - step_iou) / (1.0 + step_iou)).floor() as i32).max(1)
}

/// Slide every window size over `search`, score each window, refine the
/// strongest ones by greedy coordinate moves and return all distinct
/// windows sorted by descending contour score.
pub fn generate_candidates(
    scorer: &BoxScorer<'_>,
    search: &BoundingBox,
    target: &TargetSpec,
    params: &GenParams,
    source: Source,
) -> Vec<Proposal> {
    let mut scored: HashMap<BoundingBox, f64> = HashMap::new();
    let mut windows: Vec<(BoundingBox, (i32, i32))> = Vec::new();
    for (w, h) in window_sizes(target, params) {
        if w > search.w || h > search.h {
            continue;
        }
        let (sx, sy) = (stride(w, params.step_iou), stride(h, params.step_iou));
        let mut y = search.y;
        while y + h <= search.bottom() {
            let mut x = search.x;
            while x + w <= search.right() {
                let b = BoundingBox::new(x, y, w, h);
                if let std::collections::hash_map::Entry::Vacant(e) = scored.entry(b) {
                    e.insert(scorer.score(&b));
                    windows.push((b, (sx, sy)));
                }
                x += sx;
            }
            y += sy;
        }
    }

    // refine the coarse windows most likely to survive the budget
    let mut order: Vec<usize> = (0..windows.len()).collect();
    order.sort_by(|&i, &j| {
        scored[&windows[j].0]
            .partial_cmp(&scored[&windows[i].0])
            .unwrap_or(Ordering::Equal)
            .then_with(|| windows[i].0.cmp(&windows[j].0))
    });
    let budget = params.per_source_budget.max(1);
    for &i in order.iter().take(budget) {
        let (start, (sx, sy)) = windows[i];
        if scored[&start] <= 0.0 {
            continue;
        }
        refine(scorer, search, start, (sx, sy), params.refine_rounds, &mut scored);
    }

    let mut out: Vec<Proposal> = scored
        .into_iter()
        .map(|(b, rho)| Proposal::new(b, rho, source))
        .collect();
    out.sort_by(by_rho_desc);
    out
}

fn refine(
    scorer: &BoxScorer<'_>,
    search: &BoundingBox,
    start: BoundingBox,
    (sx, sy): (i32, i32),
    rounds: usize,
    scored: &mut HashMap<BoundingBox, f64>,
) {
    let (mut dx, mut dy) = ((sx / 2).max(1), (sy / 2).max(1));
    let mut current = start;
    let mut current_score = scored[&start];
    let mut moved = 0;
    while moved < rounds {
        // each side moves independently: left, right, top, bottom
        let moves = [
            (dx, 0, -dx, 0),
            (-dx, 0, dx, 0),
            (0, 0, dx, 0),
            (0, 0, -dx, 0),
            (0, dy, 0, -dy),
            (0, -dy, 0, dy),
            (0, 0, 0, dy),
            (0, 0, 0, -dy),
        ];
        let mut best = (current, current_score);
        for (mx, my, mw, mh) in moves {
            let b = BoundingBox::new(
                current.x + mx,
                current.y + my,
                current.w + mw,
                current.h + mh,
            );
            if !b.is_valid() || !search.contains(&b) {
                continue;
            }
            let s = *scored.entry(b).or_insert_with(|| scorer.score(&b));
            if s > best.1 {
                best = (b, s);
            }
        }
        if best.0 == current {
            if dx == 1 && dy == 1 {
                break;
            }
            dx = (dx / 2).max(1);
            dy = (dy / 2).max(1);
            continue;
        }
        (current, current_score) = best;
        moved += 1;
    }
}

/// Greedy suppression: keep a proposal iff its IoU with every proposal
/// already kept is below `nms_iou`. Input order is preserved.
pub fn nms(proposals: &[Proposal], nms_iou: f64) -> Vec<Proposal> {
    nms_top(proposals, nms_iou, usize::MAX)
}

/// [`nms`] that stops once `limit` proposals are kept.
///
/// Kept boxes are bucketed by center. Two boxes with IoU at least `t`
/// have centers closer than `(1 - t)` times the larger dimension along
/// each axis, so only nearby buckets need checking.
pub fn nms_top(proposals: &[Proposal], nms_iou: f64, limit: usize) -> Vec<Proposal> {
    let mut kept: Vec<Proposal> = Vec::new();
    if proposals.is_empty() || limit == 0 {
        return kept;
    }
    if nms_iou <= 0.0 {
        kept.push(proposals[0]);
        return kept;
    }
    let max_w = proposals.iter().map(|p| p.bbox.w).max().unwrap_or(1) as f64;
    let max_h = proposals.iter().map(|p| p.bbox.h).max().unwrap_or(1) as f64;
    let reach_x = ((1.0 - nms_iou).max(0.0) * max_w).ceil() as i64 + 1;
    let reach_y = ((1.0 - nms_iou).max(0.0) * max_h).ceil() as i64 + 1;
    let cell = reach_x.max(reach_y).max(4);
    let key = |b: &BoundingBox| {
        let (cx, cy) = (2 * b.x as i64 + b.w as i64, 2 * b.y as i64 + b.h as i64);
        (cx.div_euclid(2 * cell), cy.div_euclid(2 * cell))
    };
    let (rx, ry) = (reach_x.div_euclid(cell) + 1, reach_y.div_euclid(cell) + 1);
    let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for p in proposals {
        let (kx, ky) = key(&p.bbox);
        let clash = (kx - rx..=kx + rx).any(|gx| {
            (ky - ry..=ky + ry).any(|gy| {
                grid.get(&(gx, gy))
                    .is_some_and(|ids| ids.iter().any(|&i| kept[i].bbox.iou(&p.bbox) >= nms_iou))
            })
        });
        if !clash {
            grid.entry((kx, ky)).or_default().push(kept.len());
            kept.push(*p);
            if kept.len() >= limit {
                break;
            }
        }
    }
    kept
}

/// Candidates from one edge source with a positive contour score,
/// suppressed and truncated to `budget`.
pub fn single_source_proposals(
    summary: &EdgeSummary,
    search: &BoundingBox,
    target: &TargetSpec,
    params: &GenParams,
    source: Source,
    budget: usize,
) -> Vec<Proposal> {
    let scorer = summary.scorer();
    let mut candidates = generate_candidates(&scorer, search, target, params, source);
    candidates.retain(|p| p.rho > 0.0);
    nms_top(&candidates, params.nms_iou, budget)
}

/// Fused proposals: frame-edge and response-edge candidates generated
/// independently (each capped at `per_source_budget`), concatenated, with
/// near-identical cross-source pairs merged into the higher-scoring copy.
pub fn generate_topg(
    frame: &ImageBuffer,
    response: &ResponseMap,
    search: &BoundingBox,
    target: &TargetSpec,
    params: &GenParams,
) -> Result<Vec<Proposal>, ProposalError> {
    params.validate()?;
    if response.width() != frame.width() || response.height() != frame.height() {
        return Err(ProposalError::ResponseSize(
            response.width(),
            response.height(),
            frame.width(),
            frame.height(),
        ));
    }
    let search = search
        .clip(frame.width(), frame.height())
        .ok_or(ProposalError::SearchOutside(*search))?;
    let frame_edges = EdgeSummary::of_frame(frame, &search, &params.edges)
        .ok_or(ProposalError::SearchOutside(search))?;
    let response_edges = EdgeSummary::of_response(response, &search, &params.edges)
        .ok_or(ProposalError::SearchOutside(search))?;
    let budget = params.per_source_budget;
    let from_frame =
        single_source_proposals(&frame_edges, &search, target, params, Source::FrameEdges, budget);
    let from_response = single_source_proposals(
        &response_edges,
        &search,
        target,
        params,
        Source::ResponseEdges,
        budget,
    );
    Ok(merge_sources(from_frame, from_response, params.dedup_iou))
}

/// Concatenate two source lists, dropping the lower-scoring member of any
/// cross-source pair with IoU at or above `dedup_iou`.
pub fn merge_sources(first: Vec<Proposal>, second: Vec<Proposal>, dedup_iou: f64) -> Vec<Proposal> {
    let mut drop_first = vec![false; first.len()];
    let mut drop_second = vec![false; second.len()];
    for (i, a) in first.iter().enumerate() {
        for (j, b) in second.iter().enumerate() {
            if drop_second[j] || a.bbox.iou(&b.bbox) < dedup_iou {
                continue;
            }
            if b.rho > a.rho {
                drop_first[i] = true;
                break;
            }
            drop_second[j] = true;
        }
    }
    first
        .into_iter()
        .zip(drop_first)
        .chain(second.into_iter().zip(drop_second))
        .filter_map(|(p, dropped)| (!dropped).then_some(p))
        .collect()
}

/// Contour score of the target box on the frame's own edges inside
/// `search`.
pub fn target_contour_score(
    frame: &ImageBuffer,
    target: &BoundingBox,
    search: &BoundingBox,
    params: &EdgeParams,
) -> f64 {
    EdgeSummary::of_frame(frame, search, params)
        .map(|s| s.scorer().score(target))
        .unwrap_or(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::edges::EdgeMap;

    fn proposal(x: i32, y: i32, w: i32, h: i32, rho: f64) -> Proposal {
        Proposal::new(BoundingBox::new(x, y, w, h), rho, Source::FrameEdges)
    }

    #[test]
    fn nms_examples() {
        let same = [proposal(0, 0, 10, 10, 2.0), proposal(0, 0, 10, 10, 1.0)];
        assert_eq!(nms(&same, 0.75).len(), 1);
        let apart = [proposal(0, 0, 10, 10, 2.0), proposal(20, 20, 10, 10, 1.0)];
        assert_eq!(nms(&apart, 0.75).len(), 2);
    }

    #[test]
    fn empty_box_scores_zero() {
        let edges = EdgeMap::zeros(16, 16);
        let groups = group_edges(&edges, 0.1, 1.0);
        let aff = group_affinities(&groups, 2.0, 2.0);
        assert_eq!(score_box(&BoundingBox::new(2, 2, 8, 8), &groups, &aff), 0.0);
    }

    #[test]
    fn stride_keeps_overlap() {
        for len in 1..200 {
            let s = stride(len, 0.65);
            let a = BoundingBox::new(0, 0, len, 10);
            if s > 1 {
                assert!(a.iou(&a.translate(s, 0)) >= 0.65, "len={len}");
            }
        }
    }

    #[test]
    fn merge_prefers_higher_score() {
        let f = vec![proposal(0, 0, 20, 20, 1.0)];
        let mut r = proposal(0, 0, 20, 20, 2.0);
        r.source = Source::ResponseEdges;
        let merged = merge_sources(f.clone(), vec![r], 0.95);
        assert_eq!(merged.len(), 1);
        assert_eq!(merged[0].source, Source::ResponseEdges);
        r.rho = 0.5;
        let merged = merge_sources(f, vec![r], 0.95);
        assert_eq!(merged.len(), 1);
        assert_eq!(merged[0].source, Source::FrameEdges);
    }

    #[test]
    fn params_validation() {
        assert!(GenParams::default().validate().is_ok());
        let bad = GenParams {
            step_iou: 1.0,
            ..GenParams::default()
        };
        assert!(bad.validate().is_err());
        let bad = GenParams {
            scales: vec![],
            ..GenParams::default()
        };
        assert!(bad.validate().is_err());
    }
}
