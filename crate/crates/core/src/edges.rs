//! Gradient edge detection, orientation-coherent edge grouping and the
//! pairwise group affinities consumed by the box scorer.

use std::collections::BTreeSet;
use std::f64::consts::{FRAC_PI_2, PI};

use crate::density::ResponseMap;
use crate::imaging::ImageBuffer;

/// Thresholds used when turning an edge map into scored groups.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeParams {
    /// Normalized magnitude an edge pixel must exceed to be grouped.
    pub mag_threshold: f64,
    /// Accumulated orientation change (radians) that closes a group.
    pub curve_threshold: f64,
    /// Exponent applied to the pairwise orientation agreement.
    pub affinity_gamma: f64,
    /// Groups whose nearest pixels are farther apart get no affinity.
    pub distance_cutoff: f64,
}

impl Default for EdgeParams {
    fn default() -> Self {
        Self {
            mag_threshold: 0.1,
            curve_threshold: FRAC_PI_2,
            affinity_gamma: 2.0,
            distance_cutoff: 2.0,
        }
    }
}

/// Thinned edge magnitude (normalized to `[0, 1]`) and gradient
/// orientation in `[0, pi)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeMap {
    pub width: usize,
    pub height: usize,
    pub magnitude: Vec<f64>,
    pub orientation: Vec<f64>,
}

impl EdgeMap {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            magnitude: vec![0.0; width * height],
            orientation: vec![0.0; width * height],
        }
    }

    #[inline]
    pub fn magnitude_at(&self, x: usize, y: usize) -> f64 {
        self.magnitude[y * self.width + x]
    }

    #[inline]
    pub fn orientation_at(&self, x: usize, y: usize) -> f64 {
        self.orientation[y * self.width + x]
    }

    /// Total magnitude of the map.
    pub fn mass(&self) -> f64 {
        self.magnitude.iter().sum()
    }

    /// Magnitude as an 8-bit gray image (x255, rounded).
    pub fn to_image(&self) -> ImageBuffer {
        let data = self
            .magnitude
            .iter()
            .map(|m| (m * 255.0).round().clamp(0.0, 255.0) as u8)
            .collect();
        ImageBuffer::new(self.width, self.height, 1, data).expect("non-empty edge map")
    }
}

/// Anything that turns a scalar intensity plane into an [`EdgeMap`].
pub trait EdgeDetector {
    fn detect(&self, width: usize, height: usize, plane: &[f64]) -> EdgeMap;
}

/// Scharr gradients followed by non-maximum suppression along the
/// gradient direction. When a step's two sides tie, the edge pixel goes
/// to the darker side, or to the brighter side with `bright_side`.
#[derive(Debug, Clone, Copy, Default)]
pub struct ScharrDetector {
    pub bright_side: bool,
}

impl EdgeDetector for ScharrDetector {
    fn detect(&self, width: usize, height: usize, plane: &[f64]) -> EdgeMap {
        let (gx, gy) = scharr_gradients(width, height, plane);
        let raw: Vec<f64> = gx.iter().zip(&gy).map(|(a, b)| a.hypot(*b)).collect();
        let mut magnitude = vec![0.0; width * height];
        let mut orientation = vec![0.0; width * height];
        let mut max = 0.0f64;
        for y in 0..height {
            for x in 0..width {
                let i = y * width + x;
                let m = raw[i];
                if m <= 0.0 {
                    continue;
                }
                orientation[i] = wrap_pi(gy[i].atan2(gx[i]));
                let (dx, dy) = gradient_step(gx[i], gy[i]);
                let behind = sample(&raw, width, height, x as i64 - dx, y as i64 - dy);
                let ahead = sample(&raw, width, height, x as i64 + dx, y as i64 + dy);
                // the gradient points towards the brighter neighbour
                let keep = if self.bright_side {
                    m >= behind && m > ahead
                } else {
                    m > behind && m >= ahead
                };
                if keep {
                    magnitude[i] = m;
                    max = max.max(m);
                }
            }
        }
        if max > 0.0 {
            magnitude.iter_mut().for_each(|m| *m /= max);
        }
        EdgeMap {
            width,
            height,
            magnitude,
            orientation,
        }
    }
}

fn sample(values: &[f64], width: usize, height: usize, x: i64, y: i64) -> f64 {
    if x < 0 || y < 0 || x >= width as i64 || y >= height as i64 {
        0.0
    } else {
        values[y as usize * width + x as usize]
    }
}

/// Unit pixel step along the signed gradient, quantized to 8 directions.
fn gradient_step(gx: f64, gy: f64) -> (i64, i64) {
    const TAN_22_5: f64 = 0.414_213_562_373_095_1;
    let (ax, ay) = (gx.abs(), gy.abs());
    let sx = if gx > 0.0 { 1 } else { -1 };
    let sy = if gy > 0.0 { 1 } else { -1 };
    if ay <= TAN_22_5 * ax {
        (sx, 0)
    } else if ax <= TAN_22_5 * ay {
        (0, sy)
    } else {
        (sx, sy)
    }
}

/// Raw Scharr derivatives with replicated borders.
pub fn scharr_gradients(width: usize, height: usize, plane: &[f64]) -> (Vec<f64>, Vec<f64>) {
    assert_eq!(plane.len(), width * height, "grid size mismatch");
    let at = |x: i64, y: i64| -> f64 {
        let xc = x.clamp(0, width as i64 - 1) as usize;
        let yc = y.clamp(0, height as i64 - 1) as usize;
        plane[yc * width + xc]
    };
    let mut gx = vec![0.0; width * height];
    let mut gy = vec![0.0; width * height];
    for y in 0..height as i64 {
        for x in 0..width as i64 {
            let i = y as usize * width + x as usize;
            gx[i] = 3.0 * (at(x + 1, y - 1) - at(x - 1, y - 1))
                + 10.0 * (at(x + 1, y) - at(x - 1, y))
                + 3.0 * (at(x + 1, y + 1) - at(x - 1, y + 1));
            gy[i] = 3.0 * (at(x - 1, y + 1) - at(x - 1, y - 1))
                + 10.0 * (at(x, y + 1) - at(x, y - 1))
                + 3.0 * (at(x + 1, y + 1) - at(x + 1, y - 1));
        }
    }
    (gx, gy)
}

/// Edge map of an image's luma plane.
pub fn detect_edges(image: &ImageBuffer) -> EdgeMap {
    ScharrDetector::default().detect(image.width(), image.height(), &image.to_luma())
}

/// Edge map of a response map, read as a gray image scaled by 255. Edge
/// pixels sit on the high-response side, so a box tight around a
/// foreground region contains its contour.
pub fn detect_response_edges(response: &ResponseMap) -> EdgeMap {
    let plane: Vec<f64> = response.values().iter().map(|v| v * 255.0).collect();
    ScharrDetector { bright_side: true }.detect(response.width(), response.height(), &plane)
}

pub(crate) fn wrap_pi(theta: f64) -> f64 {
    let t = theta.rem_euclid(PI);
    if t >= PI {
        0.0
    } else {
        t
    }
}

/// Smallest difference between two orientations taken modulo pi.
pub fn orientation_diff(a: f64, b: f64) -> f64 {
    let d = (a - b).abs().rem_euclid(PI);
    d.min(PI - d)
}

/// One connected, orientation-coherent run of edge pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeGroup {
    /// Member pixels as `(x, y)`.
    pub pixels: Vec<(u32, u32)>,
    pub mean_x: f64,
    pub mean_y: f64,
    /// Magnitude-weighted mean edge direction (tangent), in `[0, pi)`.
    pub orientation: f64,
    pub magnitude: f64,
    /// Inclusive-exclusive pixel extent `(x0, y0, x1, y1)`.
    pub extent: (i32, i32, i32, i32),
}

/// Group assignment for every pixel of an edge map.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeGroups {
    pub width: usize,
    pub height: usize,
    /// Group id per pixel, `0` for no group, otherwise `index + 1`.
    pub ids: Vec<u32>,
    pub groups: Vec<EdgeGroup>,
    /// Magnitude of every grouped pixel (zero elsewhere).
    pub grouped_magnitude: Vec<f64>,
}

impl EdgeGroups {
    /// Build group summaries from an explicit id grid (`0` = ungrouped,
    /// ids `1..=n` contiguous).
    pub fn from_ids(edges: &EdgeMap, ids: Vec<u32>) -> Self {
        assert_eq!(ids.len(), edges.width * edges.height);
        let n = ids.iter().copied().max().unwrap_or(0) as usize;
        let mut pixels: Vec<Vec<(u32, u32)>> = vec![Vec::new(); n];
        for y in 0..edges.height {
            for x in 0..edges.width {
                let id = ids[y * edges.width + x];
                if id > 0 {
                    pixels[id as usize - 1].push((x as u32, y as u32));
                }
            }
        }
        let groups = pixels
            .into_iter()
            .map(|px| summarize(edges, px))
            .collect();
        let grouped_magnitude = ids
            .iter()
            .zip(&edges.magnitude)
            .map(|(&id, &m)| if id > 0 { m } else { 0.0 })
            .collect();
        Self {
            width: edges.width,
            height: edges.height,
            ids,
            groups,
            grouped_magnitude,
        }
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    /// Group index (0-based) at a pixel.
    #[inline]
    pub fn group_at(&self, x: usize, y: usize) -> Option<usize> {
        match self.ids[y * self.width + x] {
            0 => None,
            id => Some(id as usize - 1),
        }
    }
}

fn summarize(edges: &EdgeMap, pixels: Vec<(u32, u32)>) -> EdgeGroup {
    let (mut sm, mut sx, mut sy, mut s2, mut c2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let mut extent = (i32::MAX, i32::MAX, i32::MIN, i32::MIN);
    for &(x, y) in &pixels {
        let i = y as usize * edges.width + x as usize;
        let m = edges.magnitude[i];
        let o = edges.orientation[i];
        sm += m;
        sx += x as f64;
        sy += y as f64;
        s2 += m * (2.0 * o).sin();
        c2 += m * (2.0 * o).cos();
        extent.0 = extent.0.min(x as i32);
        extent.1 = extent.1.min(y as i32);
        extent.2 = extent.2.max(x as i32 + 1);
        extent.3 = extent.3.max(y as i32 + 1);
    }
    let n = pixels.len().max(1) as f64;
    let normal = wrap_pi(s2.atan2(c2) / 2.0);
    EdgeGroup {
        mean_x: sx / n,
        mean_y: sy / n,
        orientation: wrap_pi(normal + FRAC_PI_2),
        magnitude: sm,
        extent,
        pixels,
    }
}

const NEIGHBORS_8: [(i64, i64); 8] = [
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
    (-1, 0),
    (-1, -1),
    (0, -1),
    (1, -1),
];

/// Greedy 8-connected grouping in raster seed order. A group stops
/// absorbing neighbors once the orientation change it has accumulated
/// would exceed `curve_threshold`.
pub fn group_edges(edges: &EdgeMap, mag_threshold: f64, curve_threshold: f64) -> EdgeGroups {
    let (w, h) = (edges.width, edges.height);
    let mut ids = vec![0u32; w * h];
    let mut next = 0u32;
    let mut stack = Vec::new();
    for seed in 0..w * h {
        if ids[seed] != 0 || edges.magnitude[seed] <= mag_threshold {
            continue;
        }
        next += 1;
        ids[seed] = next;
        let mut accumulated = 0.0;
        stack.clear();
        stack.push(seed);
        while let Some(p) = stack.pop() {
            let (px, py) = ((p % w) as i64, (p / w) as i64);
            for (dx, dy) in NEIGHBORS_8 {
                let (qx, qy) = (px + dx, py + dy);
                if qx < 0 || qy < 0 || qx >= w as i64 || qy >= h as i64 {
                    continue;
                }
                let q = qy as usize * w + qx as usize;
                if ids[q] != 0 || edges.magnitude[q] <= mag_threshold {
                    continue;
                }
                let d = orientation_diff(edges.orientation[p], edges.orientation[q]);
                if accumulated + d <= curve_threshold {
                    accumulated += d;
                    ids[q] = next;
                    stack.push(q);
                }
            }
        }
    }
    EdgeGroups::from_ids(edges, ids)
}

/// Sparse symmetric table of group-to-group affinities.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AffinityTable {
    neighbors: Vec<Vec<(usize, f64)>>,
}

impl AffinityTable {
    pub const MIN_AFFINITY: f64 = 0.05;

    pub fn empty(groups: usize) -> Self {
        Self {
            neighbors: vec![Vec::new(); groups],
        }
    }

    pub fn insert(&mut self, i: usize, j: usize, value: f64) {
        self.neighbors[i].push((j, value));
        self.neighbors[j].push((i, value));
    }

    /// Affinity between two groups; zero when absent.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.neighbors[i]
            .iter()
            .find(|(k, _)| *k == j)
            .map_or(0.0, |&(_, v)| v)
    }

    pub fn neighbors(&self, i: usize) -> &[(usize, f64)] {
        &self.neighbors[i]
    }

    pub fn groups(&self) -> usize {
        self.neighbors.len()
    }

    /// Number of stored unordered pairs.
    pub fn pairs(&self) -> usize {
        self.neighbors.iter().map(Vec::len).sum::<usize>() / 2
    }
}

/// `|cos(theta_i - theta_ij) * cos(theta_j - theta_ij)|^gamma` for every
/// pair of groups whose nearest pixels lie within `distance_cutoff`, where
/// `theta_ij` is the direction between the group means.
pub fn group_affinities(groups: &EdgeGroups, gamma: f64, distance_cutoff: f64) -> AffinityTable {
    let r = distance_cutoff.floor() as i64;
    let r2 = distance_cutoff * distance_cutoff;
    let (w, h) = (groups.width as i64, groups.height as i64);
    let mut pairs = BTreeSet::new();
    for (gi, g) in groups.groups.iter().enumerate() {
        for &(x, y) in &g.pixels {
            for dy in -r..=r {
                for dx in -r..=r {
                    if (dx * dx + dy * dy) as f64 > r2 {
                        continue;
                    }
                    let (qx, qy) = (x as i64 + dx, y as i64 + dy);
                    if qx < 0 || qy < 0 || qx >= w || qy >= h {
                        continue;
                    }
                    if let Some(gj) = groups.group_at(qx as usize, qy as usize) {
                        if gj > gi {
                            pairs.insert((gi, gj));
                        }
                    }
                }
            }
        }
    }
    let mut table = AffinityTable::empty(groups.len());
    for (i, j) in pairs {
        let value = pair_affinity(&groups.groups[i], &groups.groups[j], gamma);
        if value >= AffinityTable::MIN_AFFINITY {
            table.insert(i, j, value);
        }
    }
    table
}

/// Orientation agreement of two groups relative to the line joining their
/// means.
pub fn pair_affinity(a: &EdgeGroup, b: &EdgeGroup, gamma: f64) -> f64 {
    let theta = (b.mean_y - a.mean_y).atan2(b.mean_x - a.mean_x);
    ((a.orientation - theta).cos() * (b.orientation - theta).cos())
        .abs()
        .powf(gamma)
}
