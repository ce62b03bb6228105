//! Foreground/background color models and the per-pixel foreground
//! probability map derived from them.

use thiserror::Error;

use crate::imaging::{histogram_cells, joint_bin, BoundingBox, ImageBuffer, IntegralImage};

#[derive(Debug, Error, PartialEq)]
pub enum DensityError {
    #[error("band margin {0} outside [0, 1)")]
    Margin(f64),
    #[error("target box {0} does not overlap the {1}x{2} region")]
    TargetOutside(BoundingBox, usize, usize),
    #[error("tri-map is {tri_w}x{tri_h} but frame is {frame_w}x{frame_h}")]
    Misaligned {
        tri_w: usize,
        tri_h: usize,
        frame_w: usize,
        frame_h: usize,
    },
    #[error("definite foreground region is empty")]
    EmptyForeground,
    #[error("definite background region is empty")]
    EmptyBackground,
    #[error("bin count {0} outside [2, 256]")]
    Bins(usize),
    #[error("histogram layout mismatch: {0} vs {1} cells")]
    CellMismatch(usize, usize),
    #[error("learning rate {0} outside (0, 1]")]
    LearningRate(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Label {
    DefiniteForeground,
    DefiniteBackground,
    Blended,
}

/// Three-way partition of a region around a target box.
#[derive(Debug, Clone)]
pub struct TriMap {
    width: usize,
    height: usize,
    target: BoundingBox,
    gamma_margin: f64,
    outer: BoundingBox,
    inner: BoundingBox,
    labels: Vec<Label>,
}

impl TriMap {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn target(&self) -> BoundingBox {
        self.target
    }

    pub fn gamma_margin(&self) -> f64 {
        self.gamma_margin
    }

    /// Outer edge of the blended band, clipped to the region.
    pub fn outer(&self) -> BoundingBox {
        self.outer
    }

    /// Definite-foreground rectangle, clipped to the region.
    pub fn inner(&self) -> BoundingBox {
        self.inner
    }

    pub fn label(&self, x: usize, y: usize) -> Label {
        self.labels[y * self.width + x]
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn count(&self, label: Label) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }
}

fn scale_about_center(target: &BoundingBox, factor: f64) -> (i32, i32, i32, i32) {
    let (cx, cy) = target.center();
    let hw = target.w as f64 * factor / 2.0;
    let hh = target.h as f64 * factor / 2.0;
    (
        (cx - hw).round() as i32,
        (cy - hh).round() as i32,
        (cx + hw).round() as i32,
        (cy + hh).round() as i32,
    )
}

/// Partition a `width` x `height` region into definite foreground, blended
/// band and definite background around `target`.
///
/// The band spans the target scaled by `1 + gamma_margin` (outside) down to
/// the target scaled by `1 - gamma_margin` (inside). An inner rectangle
/// that would be thinner than one pixel collapses to the target's center
/// pixel.
pub fn build_trimap(
    width: usize,
    height: usize,
    target: &BoundingBox,
    gamma_margin: f64,
) -> Result<TriMap, DensityError> {
    if !(0.0..1.0).contains(&gamma_margin) {
        return Err(DensityError::Margin(gamma_margin));
    }
    let target = target
        .clip(width, height)
        .ok_or(DensityError::TargetOutside(*target, width, height))?;

    let (ox0, oy0, ox1, oy1) = scale_about_center(&target, 1.0 + gamma_margin);
    let outer = BoundingBox::new(ox0, oy0, ox1 - ox0, oy1 - oy0)
        .clip(width, height)
        .unwrap_or(target);

    let (ix0, iy0, ix1, iy1) = scale_about_center(&target, 1.0 - gamma_margin);
    let inner = if ix1 - ix0 < 1 || iy1 - iy0 < 1 {
        let (cx, cy) = target.center();
        let px = (cx.floor() as i32).clamp(target.x, target.right() - 1);
        let py = (cy.floor() as i32).clamp(target.y, target.bottom() - 1);
        BoundingBox::new(px, py, 1, 1)
    } else {
        BoundingBox::new(ix0, iy0, ix1 - ix0, iy1 - iy0)
            .clip(width, height)
            .unwrap_or(target)
    };

    let mut labels = vec![Label::DefiniteBackground; width * height];
    for y in outer.y..outer.bottom() {
        for x in outer.x..outer.right() {
            labels[y as usize * width + x as usize] = if inner.contains_point(x, y) {
                Label::DefiniteForeground
            } else {
                Label::Blended
            };
        }
    }
    // inner may poke out of a clipped outer only in the degenerate case
    for y in inner.y..inner.bottom() {
        for x in inner.x..inner.right() {
            labels[y as usize * width + x as usize] = Label::DefiniteForeground;
        }
    }

    Ok(TriMap {
        width,
        height,
        target,
        gamma_margin,
        outer,
        inner,
        labels,
    })
}

/// Normalized foreground and background color histograms plus the update
/// schedule that governs them.
#[derive(Debug, Clone, PartialEq)]
pub struct ForegroundModel {
    pub fg_hist: Vec<f64>,
    pub bg_hist: Vec<f64>,
    pub bins: usize,
    pub channels: usize,
    /// Learning rate for blending a fresh estimate into the stored one.
    pub lambda: f64,
    /// Frames between model refreshes.
    pub kappa: usize,
    /// 1-based frame index of the most recent estimate folded in.
    pub last_update_frame: usize,
}

impl ForegroundModel {
    pub const DEFAULT_LAMBDA: f64 = 0.01;
    pub const DEFAULT_KAPPA: usize = 30;

    pub fn cells(&self) -> usize {
        self.fg_hist.len()
    }

    pub fn with_schedule(mut self, lambda: f64, kappa: usize) -> Self {
        self.lambda = lambda;
        self.kappa = kappa;
        self
    }

    pub fn at_frame(mut self, frame: usize) -> Self {
        self.last_update_frame = frame;
        self
    }

    /// `p_f / (p_f + p_b)` for every color cell, 0.5 where both are zero.
    pub fn foreground_lut(&self) -> Vec<f64> {
        self.fg_hist
            .iter()
            .zip(&self.bg_hist)
            .map(|(&f, &b)| {
                let denom = f + b;
                if denom > 0.0 {
                    f / denom
                } else {
                    0.5
                }
            })
            .collect()
    }
}

/// Histogram the definite-foreground and definite-background pixels of
/// `frame`; blended pixels contribute to neither.
pub fn estimate_model(
    frame: &ImageBuffer,
    trimap: &TriMap,
    bins: usize,
) -> Result<ForegroundModel, DensityError> {
    if !(2..=256).contains(&bins) {
        return Err(DensityError::Bins(bins));
    }
    if trimap.width != frame.width() || trimap.height != frame.height() {
        return Err(DensityError::Misaligned {
            tri_w: trimap.width,
            tri_h: trimap.height,
            frame_w: frame.width(),
            frame_h: frame.height(),
        });
    }
    let cells = histogram_cells(frame.channels(), bins);
    let mut fg = vec![0.0; cells];
    let mut bg = vec![0.0; cells];
    let (mut nf, mut nb) = (0usize, 0usize);
    for (pixel, label) in frame.data().chunks_exact(frame.channels()).zip(&trimap.labels) {
        match label {
            Label::DefiniteForeground => {
                fg[joint_bin(pixel, bins)] += 1.0;
                nf += 1;
            }
            Label::DefiniteBackground => {
                bg[joint_bin(pixel, bins)] += 1.0;
                nb += 1;
            }
            Label::Blended => {}
        }
    }
    if nf == 0 {
        return Err(DensityError::EmptyForeground);
    }
    if nb == 0 {
        return Err(DensityError::EmptyBackground);
    }
    fg.iter_mut().for_each(|v| *v /= nf as f64);
    bg.iter_mut().for_each(|v| *v /= nb as f64);
    Ok(ForegroundModel {
        fg_hist: fg,
        bg_hist: bg,
        bins,
        channels: frame.channels(),
        lambda: ForegroundModel::DEFAULT_LAMBDA,
        kappa: ForegroundModel::DEFAULT_KAPPA,
        last_update_frame: 1,
    })
}

/// Per-pixel foreground probability grid, values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseMap {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl ResponseMap {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), width * height, "grid size mismatch");
        Self {
            width,
            height,
            values,
        }
    }

    /// All-`value` map, mostly useful for tests and blank inputs.
    pub fn constant(width: usize, height: usize, value: f64) -> Self {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn value(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    pub fn integral(&self) -> IntegralImage {
        IntegralImage::new(self.width, self.height, &self.values)
    }

    /// Sub-grid covered by `region` (clipped), or `None` if disjoint.
    pub fn crop(&self, region: &BoundingBox) -> Option<ResponseMap> {
        let r = region.clip(self.width, self.height)?;
        let mut values = Vec::with_capacity(r.area() as usize);
        for y in r.y..r.bottom() {
            let row = y as usize * self.width;
            values.extend_from_slice(&self.values[row + r.x as usize..row + r.right() as usize]);
        }
        Some(ResponseMap::new(r.w as usize, r.h as usize, values))
    }

    /// Gray image with values scaled by 255 and rounded.
    pub fn to_image(&self) -> ImageBuffer {
        let data = self
            .values
            .iter()
            .map(|v| (v * 255.0).round().clamp(0.0, 255.0) as u8)
            .collect();
        ImageBuffer::new(self.width, self.height, 1, data).expect("non-empty response map")
    }
}

/// Foreground probability of every pixel of `frame` under `model`.
pub fn response_map(
    frame: &ImageBuffer,
    model: &ForegroundModel,
) -> Result<ResponseMap, DensityError> {
    let cells = histogram_cells(frame.channels(), model.bins);
    if cells != model.cells() {
        return Err(DensityError::CellMismatch(cells, model.cells()));
    }
    let lut = model.foreground_lut();
    let values = frame
        .data()
        .chunks_exact(frame.channels())
        .map(|p| lut[joint_bin(p, model.bins)])
        .collect();
    Ok(ResponseMap::new(frame.width(), frame.height(), values))
}

/// Blend a freshly estimated model into the stored one:
/// `lambda * fresh + (1 - lambda) * previous`, cell by cell, for both
/// histograms.
pub fn update_model(
    fresh: &ForegroundModel,
    previous: &ForegroundModel,
    lambda: f64,
) -> Result<ForegroundModel, DensityError> {
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(DensityError::LearningRate(lambda));
    }
    if fresh.cells() != previous.cells() || fresh.bins != previous.bins {
        return Err(DensityError::CellMismatch(fresh.cells(), previous.cells()));
    }
    let blend = |a: &[f64], b: &[f64]| -> Vec<f64> {
        a.iter()
            .zip(b)
            .map(|(&f, &p)| lambda * f + (1.0 - lambda) * p)
            .collect()
    };
    Ok(ForegroundModel {
        fg_hist: blend(&fresh.fg_hist, &previous.fg_hist),
        bg_hist: blend(&fresh.bg_hist, &previous.bg_hist),
        bins: previous.bins,
        channels: previous.channels,
        lambda: previous.lambda,
        kappa: previous.kappa,
        last_update_frame: fresh.last_update_frame,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model_with(fg: Vec<f64>, bg: Vec<f64>) -> ForegroundModel {
        ForegroundModel {
            fg_hist: fg,
            bg_hist: bg,
            bins: 2,
            channels: 1,
            lambda: 0.01,
            kappa: 30,
            last_update_frame: 1,
        }
    }

    #[test]
    fn trimap_rectangles() {
        let t = build_trimap(100, 100, &BoundingBox::new(40, 40, 20, 20), 0.4).unwrap();
        assert_eq!(t.outer(), BoundingBox::new(36, 36, 28, 28));
        assert_eq!(t.inner(), BoundingBox::new(44, 44, 12, 12));
        assert_eq!(t.count(Label::DefiniteForeground), 144);
        assert_eq!(t.count(Label::Blended), 28 * 28 - 144);
        assert_eq!(t.count(Label::DefiniteBackground), 10_000 - 28 * 28);
    }

    #[test]
    fn trimap_zero_margin_has_no_band() {
        let target = BoundingBox::new(3, 2, 4, 5);
        let t = build_trimap(10, 10, &target, 0.0).unwrap();
        assert_eq!(t.count(Label::Blended), 0);
        assert_eq!(t.inner(), target);
        assert_eq!(t.count(Label::DefiniteBackground), 100 - 20);
    }

    #[test]
    fn trimap_small_target_collapses_to_center() {
        let t = build_trimap(10, 10, &BoundingBox::new(4, 4, 1, 1), 0.6).unwrap();
        assert_eq!(t.inner(), BoundingBox::new(4, 4, 1, 1));
        assert_eq!(t.count(Label::DefiniteForeground), 1);
    }

    #[test]
    fn trimap_rejects_bad_margin() {
        let b = BoundingBox::new(0, 0, 2, 2);
        assert_eq!(build_trimap(4, 4, &b, 1.0).unwrap_err(), DensityError::Margin(1.0));
        assert!(build_trimap(4, 4, &b, -0.1).is_err());
        assert!(build_trimap(4, 4, &BoundingBox::new(9, 9, 2, 2), 0.4).is_err());
    }

    #[test]
    fn whole_region_target_has_no_background() {
        let frame = ImageBuffer::filled(10, 10, &[7]).unwrap();
        let t = build_trimap(10, 10, &frame.bounds(), 0.4).unwrap();
        assert_eq!(t.count(Label::DefiniteBackground), 0);
        assert_eq!(estimate_model(&frame, &t, 32).unwrap_err(), DensityError::EmptyBackground);
    }

    #[test]
    fn two_color_histograms() {
        let mut frame = ImageBuffer::filled(20, 20, &[0, 0, 255]).unwrap();
        for y in 5..15 {
            for x in 5..15 {
                frame.pixel_mut(x, y).copy_from_slice(&[255, 0, 0]);
            }
        }
        let t = build_trimap(20, 20, &BoundingBox::new(5, 5, 10, 10), 0.4).unwrap();
        let m = estimate_model(&frame, &t, 32).unwrap();
        let red = quantize(&[255, 0, 0]);
        let blue = quantize(&[0, 0, 255]);
        assert_eq!(m.fg_hist[red], 1.0);
        assert_eq!(m.bg_hist[blue], 1.0);
        assert_eq!(m.fg_hist.iter().sum::<f64>(), 1.0);

        let r = response_map(&frame, &m).unwrap();
        for y in 0..20 {
            for x in 0..20 {
                let expect = match t.label(x, y) {
                    Label::DefiniteForeground => Some(1.0),
                    Label::DefiniteBackground => Some(0.0),
                    Label::Blended => None,
                };
                if let Some(e) = expect {
                    assert_eq!(r.value(x, y), e);
                }
            }
        }
    }

    fn quantize(p: &[u8]) -> usize {
        crate::imaging::quantize_pixel(p, 32).unwrap()
    }

    #[test]
    fn uniform_frame_gives_equal_histograms() {
        let frame = ImageBuffer::filled(12, 12, &[90, 90, 90]).unwrap();
        let t = build_trimap(12, 12, &BoundingBox::new(3, 3, 6, 6), 0.4).unwrap();
        let m = estimate_model(&frame, &t, 32).unwrap();
        assert_eq!(m.fg_hist, m.bg_hist);
        assert_eq!(m.fg_hist[quantize(&[90, 90, 90])], 1.0);
    }

    #[test]
    fn response_lut_values() {
        let m = model_with(vec![0.3, 0.0, 0.4, 0.3], vec![0.1, 0.5, 0.4, 0.0]);
        let lut = m.foreground_lut();
        assert_eq!(lut[0], 0.3 / 0.4);
        assert!((lut[0] - 0.75).abs() < 1e-15);
        assert_eq!(lut[1], 0.0);
        assert_eq!(lut[2], 0.5);
        assert_eq!(lut[3], 1.0);
        let unseen = model_with(vec![1.0, 0.0], vec![1.0, 0.0]);
        assert_eq!(unseen.foreground_lut()[1], 0.5);
    }

    #[test]
    fn update_rule() {
        let fresh = model_with(vec![0.5, 0.5], vec![0.2, 0.8]);
        let prev = model_with(vec![0.3, 0.7], vec![0.6, 0.4]);
        let same = update_model(&fresh, &prev, 1.0).unwrap();
        assert_eq!(same.fg_hist, fresh.fg_hist);
        assert_eq!(same.bg_hist, fresh.bg_hist);

        let blended = update_model(&fresh, &prev, 0.01).unwrap();
        assert!((blended.fg_hist[0] - 0.302).abs() < 1e-15);
        assert!((blended.fg_hist.iter().sum::<f64>() - 1.0).abs() < 1e-12);

        let fixed = update_model(&fresh, &fresh, 0.37).unwrap();
        for (a, b) in fixed.fg_hist.iter().zip(&fresh.fg_hist) {
            assert!((a - b).abs() < 1e-15);
        }

        assert_eq!(update_model(&fresh, &prev, 0.0).unwrap_err(), DensityError::LearningRate(0.0));
        let other = ForegroundModel {
            bins: 3,
            fg_hist: vec![1.0, 0.0, 0.0],
            bg_hist: vec![1.0, 0.0, 0.0],
            ..prev.clone()
        };
        assert!(matches!(update_model(&fresh, &other, 0.5), Err(DensityError::CellMismatch(..))));
    }
}
