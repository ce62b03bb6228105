//! Synthetic sequences with exact ground truth: a solid rectangle moving
//! over a textured, cluttered background, with optional blur, target
//! contrast reduction, sensor noise and a static occluder.

use std::fs;
use std::io;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::dataset::{format_groundtruth, GROUNDTRUTH_FILE};
use super::EvalError;
use crate::imaging::{BoundingBox, ImageBuffer};

/// A solid rectangle drawn over frames `first..=last` (0-based).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Occluder {
    pub bbox: BoundingBox,
    pub color: [u8; 3],
    pub first: usize,
    pub last: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub width: usize,
    pub height: usize,
    pub length: usize,
    pub target_color: [u8; 3],
    pub target_size: (i32, i32),
    /// Top-left corner at frame 0.
    pub start: (f64, f64),
    /// Pixels per frame; the target bounces off the frame borders.
    pub velocity: (f64, f64),
    pub background_seed: u64,
    /// Per-channel amplitude of the smooth background texture around 128.
    pub texture_amplitude: f64,
    /// Number of neutral high-contrast rectangles in the background.
    pub clutter: usize,
    /// Box-filter radius applied to the whole frame (0 = none).
    pub blur_radius: usize,
    /// Scale of the target color's deviation from mid-gray (1 = none).
    pub contrast: f64,
    /// Standard deviation of additive Gaussian noise (0 = none).
    pub noise_sigma: f64,
    pub occluder: Option<Occluder>,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            width: 160,
            height: 120,
            length: 50,
            target_color: [255, 0, 255],
            target_size: (24, 24),
            start: (40.0, 40.0),
            velocity: (1.0, 0.5),
            background_seed: 1,
            texture_amplitude: 6.0,
            clutter: 18,
            blur_radius: 0,
            contrast: 1.0,
            noise_sigma: 0.0,
            occluder: None,
        }
    }
}

/// Rendered frames and their 0-based ground-truth boxes.
#[derive(Debug, Clone)]
pub struct SynthSequence {
    pub frames: Vec<ImageBuffer>,
    pub ground_truth: Vec<BoundingBox>,
}

impl SynthSequence {
    /// Write `img/0001.ppm ...` and a 1-based `groundtruth_rect.txt`.
    pub fn write_otb(&self, dir: impl AsRef<Path>) -> io::Result<()> {
        let dir = dir.as_ref();
        let img = dir.join("img");
        fs::create_dir_all(&img)?;
        for (i, f) in self.frames.iter().enumerate() {
            fs::write(img.join(format!("{:04}.ppm", i + 1)), f.encode_pnm())?;
        }
        fs::write(dir.join(GROUNDTRUTH_FILE), format_groundtruth(&self.ground_truth))
    }
}

const PRIMARY_COLORS: [[u8; 3]; 4] = [[255, 0, 255], [0, 255, 0], [255, 0, 0], [0, 255, 255]];

impl SynthSpec {
    pub fn validate(&self) -> Result<(), EvalError> {
        let bad = |m: &str| Err(EvalError::InvalidSpec(m.to_string()));
        if self.length < 2 {
            return bad("sequence length must be at least 2");
        }
        let (tw, th) = self.target_size;
        if tw < 1 || th < 1 || tw as usize > self.width || th as usize > self.height {
            return bad("target size must be positive and fit in the frame");
        }
        if !(self.contrast >= 0.0 && self.contrast.is_finite()) {
            return bad("contrast must be a finite non-negative scale");
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad("noise sigma must be finite and non-negative");
        }
        let start = BoundingBox::new(self.start.0.round() as i32, self.start.1.round() as i32, tw, th);
        let visible = start.clip(self.width, self.height).map_or(0, |b| b.area());
        if 2 * visible < start.area() {
            return bad("target must start at least half inside the frame");
        }
        Ok(())
    }

    /// Named single-degradation presets used by the command-line generator.
    pub fn preset(kind: &str, seed: u64) -> Option<SynthSpec> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let base = SynthSpec {
            target_color: PRIMARY_COLORS[rng.random_range(0..PRIMARY_COLORS.len())],
            start: (rng.random_range(20.0..110.0), rng.random_range(20.0..70.0)),
            velocity: (rng.random_range(-1.5..1.5), rng.random_range(-1.0..1.0)),
            target_size: (rng.random_range(20..=30), rng.random_range(20..=30)),
            background_seed: seed,
            ..SynthSpec::default()
        };
        Some(match kind {
            "plain" => base,
            "low-contrast" => SynthSpec {
                contrast: 0.1,
                ..base
            },
            "blur" => SynthSpec {
                blur_radius: 2,
                ..base
            },
            "noise" => SynthSpec {
                noise_sigma: 6.0,
                ..base
            },
            "occlusion" => {
                let (tw, th) = base.target_size;
                let gt = base.box_at(10);
                SynthSpec {
                    occluder: Some(Occluder {
                        bbox: BoundingBox::new(gt.x - 6, gt.y - 6, tw + 12, th + 12),
                        color: [128, 128, 128],
                        first: 10,
                        last: 14,
                    }),
                    velocity: (base.velocity.0 * 0.5, base.velocity.1 * 0.5),
                    ..base
                }
            }
            _ => return None,
        })
    }

    /// Twenty sequences split between low-contrast, blur and noise
    /// degradations, 50 frames each.
    pub fn degradation_suite(seed: u64) -> Vec<SynthSpec> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..20)
            .map(|i| {
                let base = SynthSpec {
                    target_color: PRIMARY_COLORS[i % PRIMARY_COLORS.len()],
                    start: (rng.random_range(20.0..110.0), rng.random_range(20.0..70.0)),
                    velocity: (rng.random_range(-1.5..1.5), rng.random_range(-1.0..1.0)),
                    target_size: (rng.random_range(20..=30), rng.random_range(20..=30)),
                    background_seed: seed.wrapping_mul(1000).wrapping_add(i as u64),
                    ..SynthSpec::default()
                };
                match i % 3 {
                    0 => SynthSpec {
                        contrast: rng.random_range(0.1..0.2),
                        ..base
                    },
                    1 => SynthSpec {
                        blur_radius: rng.random_range(1..=2),
                        ..base
                    },
                    _ => SynthSpec {
                        noise_sigma: rng.random_range(3.0..8.0),
                        ..base
                    },
                }
            })
            .collect()
    }

    /// Ground-truth box at frame `t` (0-based).
    pub fn box_at(&self, t: usize) -> BoundingBox {
        let (tw, th) = self.target_size;
        let x = reflect(self.start.0 + self.velocity.0 * t as f64, (self.width as i32 - tw) as f64);
        let y = reflect(self.start.1 + self.velocity.1 * t as f64, (self.height as i32 - th) as f64);
        BoundingBox::new(x.round() as i32, y.round() as i32, tw, th)
    }

    /// Target fill color after contrast scaling about 128.
    pub fn rendered_target_color(&self) -> [u8; 3] {
        self.target_color
            .map(|c| (128.0 + self.contrast * (c as f64 - 128.0)).round().clamp(0.0, 255.0) as u8)
    }
}

/// Position bounced back and forth inside `[0, limit]`.
fn reflect(u: f64, limit: f64) -> f64 {
    if limit <= 0.0 {
        return 0.0;
    }
    let m = u.rem_euclid(2.0 * limit);
    if m > limit {
        2.0 * limit - m
    } else {
        m
    }
}

fn render_background(spec: &SynthSpec) -> ImageBuffer {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.background_seed);
    let (w, h) = (spec.width, spec.height);
    const CELL: usize = 16;
    let (gw, gh) = (w / CELL + 2, h / CELL + 2);
    let nodes: Vec<[f64; 3]> = (0..gw * gh)
        .map(|_| std::array::from_fn(|_| rng.random_range(-1.0..=1.0) * spec.texture_amplitude))
        .collect();
    let mut data = Vec::with_capacity(w * h * 3);
    for y in 0..h {
        let fy = y as f64 / CELL as f64;
        let (y0, ty) = (fy.floor() as usize, fy.fract());
        for x in 0..w {
            let fx = x as f64 / CELL as f64;
            let (x0, tx) = (fx.floor() as usize, fx.fract());
            for c in 0..3 {
                let n = |gx: usize, gy: usize| nodes[gy * gw + gx][c];
                let top = n(x0, y0) * (1.0 - tx) + n(x0 + 1, y0) * tx;
                let bot = n(x0, y0 + 1) * (1.0 - tx) + n(x0 + 1, y0 + 1) * tx;
                let v = 128.0 + top * (1.0 - ty) + bot * ty;
                data.push(v.round().clamp(0.0, 255.0) as u8);
            }
        }
    }
    let mut img = ImageBuffer::new(w, h, 3, data).expect("valid background dims");

    // neutral clutter, kept clear of the target's starting neighbourhood
    let start = spec.box_at(0).scaled(2.0, 2.0);
    let (tw, th) = spec.target_size;
    let mut placed = 0;
    let mut attempts = 0;
    while placed < spec.clutter && attempts < spec.clutter * 50 {
        attempts += 1;
        let cw = rng.random_range(4..=(2 * tw).max(5));
        let ch = rng.random_range(4..=(2 * th).max(5));
        let cx = rng.random_range(-(cw / 2)..w as i32 - cw / 2);
        let cy = rng.random_range(-(ch / 2)..h as i32 - ch / 2);
        let b = BoundingBox::new(cx, cy, cw, ch);
        if b.intersect(&start).is_some() {
            continue;
        }
        let level = if rng.random_bool(0.5) {
            rng.random_range(30..=70u8)
        } else {
            rng.random_range(190..=230u8)
        };
        fill(&mut img, &b, [level; 3]);
        placed += 1;
    }
    img
}

fn fill(img: &mut ImageBuffer, b: &BoundingBox, color: [u8; 3]) {
    let Some(c) = b.clip(img.width(), img.height()) else {
        return;
    };
    for y in c.y..c.bottom() {
        for x in c.x..c.right() {
            img.pixel_mut(x as usize, y as usize).copy_from_slice(&color);
        }
    }
}

/// Separable box filter of radius `r` with replicated borders.
pub(crate) fn box_blur(img: &ImageBuffer, r: usize) -> ImageBuffer {
    if r == 0 {
        return img.clone();
    }
    let (w, h, ch) = (img.width(), img.height(), img.channels());
    let src: Vec<f64> = img.data().iter().map(|&v| v as f64).collect();
    let norm = (2 * r + 1) as f64;
    let mut tmp = vec![0.0; src.len()];
    for y in 0..h {
        for x in 0..w {
            for c in 0..ch {
                let mut s = 0.0;
                for k in -(r as i64)..=r as i64 {
                    let xx = (x as i64 + k).clamp(0, w as i64 - 1) as usize;
                    s += src[(y * w + xx) * ch + c];
                }
                tmp[(y * w + x) * ch + c] = s / norm;
            }
        }
    }
    let mut data = vec![0u8; src.len()];
    for y in 0..h {
        for x in 0..w {
            for c in 0..ch {
                let mut s = 0.0;
                for k in -(r as i64)..=r as i64 {
                    let yy = (y as i64 + k).clamp(0, h as i64 - 1) as usize;
                    s += tmp[(yy * w + x) * ch + c];
                }
                data[(y * w + x) * ch + c] = (s / norm).round().clamp(0.0, 255.0) as u8;
            }
        }
    }
    ImageBuffer::new(w, h, ch, data).expect("same dims")
}

/// Render every frame of `spec`. The background depends only on
/// `spec.background_seed`; `rng` drives the sensor noise.
pub fn synth_sequence<R: Rng + ?Sized>(
    spec: &SynthSpec,
    rng: &mut R,
) -> Result<SynthSequence, EvalError> {
    spec.validate()?;
    let background = render_background(spec);
    let color = spec.rendered_target_color();
    let noise = (spec.noise_sigma > 0.0)
        .then(|| Normal::new(0.0, spec.noise_sigma).expect("finite sigma"));
    let mut frames = Vec::with_capacity(spec.length);
    let mut ground_truth = Vec::with_capacity(spec.length);
    for t in 0..spec.length {
        let gt = spec.box_at(t);
        let mut frame = background.clone();
        fill(&mut frame, &gt, color);
        if let Some(o) = spec.occluder.filter(|o| (o.first..=o.last).contains(&t)) {
            fill(&mut frame, &o.bbox, o.color);
        }
        let mut frame = box_blur(&frame, spec.blur_radius);
        if let Some(dist) = &noise {
            for v in frame.data_mut() {
                let n: f64 = dist.sample(rng);
                *v = (*v as f64 + n).round().clamp(0.0, 255.0) as u8;
            }
        }
        frames.push(frame);
        ground_truth.push(gt);
    }
    Ok(SynthSequence {
        frames,
        ground_truth,
    })
}
