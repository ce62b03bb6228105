//! Slow, obviously-correct reference implementations used as oracles.

#![allow(dead_code)]

use rand::Rng;

use topg_core::edges::{AffinityTable, EdgeGroups};
use topg_core::imaging::{BoundingBox, ImageBuffer};
use topg_core::proposals::{Proposal, TargetSpec};
use topg_core::ranking::SizeMode;
use topg_core::ResponseMap;

fn covers(b: &BoundingBox, x: i32, y: i32) -> bool {
    x >= b.x && x < b.x + b.w && y >= b.y && y < b.y + b.h
}

/// IoU by counting pixels of a `grid` x `grid` raster.
pub fn naive_iou(a: &BoundingBox, b: &BoundingBox, grid: i32) -> f64 {
    let (mut inter, mut union) = (0u32, 0u32);
    for y in 0..grid {
        for x in 0..grid {
            let (ia, ib) = (covers(a, x, y), covers(b, x, y));
            inter += (ia && ib) as u32;
            union += (ia || ib) as u32;
        }
    }
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

pub fn naive_box_sum(values: &[f64], width: usize, b: &BoundingBox) -> f64 {
    let mut s = 0.0;
    for y in b.y..b.y + b.h {
        for x in b.x..b.x + b.w {
            s += values[y as usize * width + x as usize];
        }
    }
    s
}

/// Small RGB image with a few random solid rectangles on a flat field.
pub fn random_edge_image<R: Rng>(rng: &mut R, w: usize, h: usize) -> ImageBuffer {
    let base: [u8; 3] = [rng.random(), rng.random(), rng.random()];
    let mut img = ImageBuffer::filled(w, h, &base).unwrap();
    for _ in 0..rng.random_range(2..=5) {
        let color: [u8; 3] = [rng.random(), rng.random(), rng.random()];
        let rw = rng.random_range(2..w / 2);
        let rh = rng.random_range(2..h / 2);
        let x0 = rng.random_range(0..w - rw);
        let y0 = rng.random_range(0..h - rh);
        for y in y0..y0 + rh {
            for x in x0..x0 + rw {
                img.pixel_mut(x, y).copy_from_slice(&color);
            }
        }
    }
    img
}

/// Contour score by walking every pixel: classify groups from the id
/// grid, propagate boundary chains by repeated relaxation over all group
/// pairs, subtract the central half-box mass, normalize by perimeter^1.5.
pub fn naive_score_box(b: &BoundingBox, groups: &EdgeGroups, aff: &AffinityTable) -> f64 {
    let n = groups.len();
    let (w, h) = (groups.width, groups.height);
    let mut total_px = vec![0usize; n];
    let mut inside_px = vec![0usize; n];
    let mut mass = vec![0.0; n];
    for y in 0..h {
        for x in 0..w {
            let id = groups.ids[y * w + x] as usize;
            if id == 0 {
                continue;
            }
            total_px[id - 1] += 1;
            mass[id - 1] += groups.grouped_magnitude[y * w + x];
            if covers(b, x as i32, y as i32) {
                inside_px[id - 1] += 1;
            }
        }
    }
    let inside: Vec<bool> = (0..n).map(|g| inside_px[g] == total_px[g]).collect();
    let straddling: Vec<bool> = (0..n)
        .map(|g| inside_px[g] > 0 && inside_px[g] < total_px[g])
        .collect();
    let mut chain: Vec<f64> = (0..n).map(|g| if straddling[g] { 1.0 } else { 0.0 }).collect();
    for _ in 0..n {
        let mut changed = false;
        for i in 0..n {
            if !inside[i] {
                continue;
            }
            for j in 0..n {
                if i == j || !(inside[j] || straddling[j]) {
                    continue;
                }
                let v = chain[j] * aff.get(i, j);
                if v > chain[i] {
                    chain[i] = v;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    let mut total: f64 = (0..n)
        .filter(|&g| inside[g])
        .map(|g| (1.0 - chain[g]) * mass[g])
        .sum();
    let cw = (b.w / 2).max(1);
    let ch = (b.h / 2).max(1);
    let center = BoundingBox::new(b.x + (b.w - cw) / 2, b.y + (b.h - ch) / 2, cw, ch);
    for y in 0..h {
        for x in 0..w {
            if covers(&center, x as i32, y as i32) {
                total -= groups.grouped_magnitude[y * w + x];
            }
        }
    }
    let perimeter = 2.0 * (b.w + b.h) as f64;
    (total / perimeter.powf(1.5)).max(0.0)
}

/// Greedy suppression written as the classic "mark everything a keeper
/// overlaps" double loop.
pub fn reference_nms(sorted: &[Proposal], thr: f64) -> Vec<BoundingBox> {
    let mut suppressed = vec![false; sorted.len()];
    let mut kept = Vec::new();
    for i in 0..sorted.len() {
        if suppressed[i] {
            continue;
        }
        kept.push(sorted[i].bbox);
        for j in i + 1..sorted.len() {
            if naive_iou(&sorted[i].bbox, &sorted[j].bbox, 128) >= thr {
                suppressed[j] = true;
            }
        }
    }
    kept
}

/// Affinities computed per pixel, then a stable descending sort.
pub fn naive_rank(
    proposals: &[Proposal],
    target: &TargetSpec,
    response: &ResponseMap,
    mode: SizeMode,
) -> Vec<Proposal> {
    let mut out: Vec<(usize, Proposal)> = proposals
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let mut p = *p;
            let (mut sum, mut count) = (0.0, 0usize);
            for y in 0..response.height() {
                for x in 0..response.width() {
                    if covers(&p.bbox, x as i32, y as i32) {
                        sum += response.value(x, y);
                        count += 1;
                    }
                }
            }
            p.c = if count == 0 { 0.0 } else { sum / count as f64 };
            p.s = (-(p.rho - target.rho).abs()).exp();
            let dw = (p.bbox.w - target.bbox.w).abs() as f64;
            let dh = (p.bbox.h - target.bbox.h).abs() as f64;
            p.z = match mode {
                SizeMode::Literal => (-dw).exp() * (-dh).exp(),
                SizeMode::Normalized => {
                    (-dw / target.bbox.w as f64).exp() * (-dh / target.bbox.h as f64).exp()
                }
            };
            p.a = p.s * p.c * p.z;
            (i, p)
        })
        .collect();
    out.sort_by(|(i, a), (j, b)| b.a.total_cmp(&a.a).then(i.cmp(j)));
    out.into_iter().map(|(_, p)| p).collect()
}
