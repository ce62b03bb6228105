//! Pixel-grid primitives: 8-bit images, rectangle algebra, color
//! quantization and summed-area tables.

use std::fmt;
use std::fs;
use std::io;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("image file not found: {0}")]
    NotFound(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("malformed header: {0}")]
    Header(String),
    #[error("invalid dimensions {width}x{height}")]
    Dimensions { width: usize, height: usize },
    #[error("truncated pixel data: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("unsupported channel count {0} (expected 1 or 3)")]
    Channels(usize),
    #[error("bin count {0} outside [2, 256]")]
    Bins(usize),
    #[error("unsupported image format: {0}")]
    Unsupported(String),
}

/// Row-major 8-bit image with one (gray) or three (RGB) channels.
#[derive(Clone, PartialEq, Eq)]
pub struct ImageBuffer {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<u8>,
}

impl fmt::Debug for ImageBuffer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ImageBuffer")
            .field("width", &self.width)
            .field("height", &self.height)
            .field("channels", &self.channels)
            .finish_non_exhaustive()
    }
}

impl ImageBuffer {
    pub fn new(
        width: usize,
        height: usize,
        channels: usize,
        data: Vec<u8>,
    ) -> Result<Self, ImageError> {
        if width == 0 || height == 0 {
            return Err(ImageError::Dimensions { width, height });
        }
        if channels != 1 && channels != 3 {
            return Err(ImageError::Channels(channels));
        }
        let expected = width * height * channels;
        if data.len() != expected {
            return Err(ImageError::Truncated {
                expected,
                found: data.len(),
            });
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    /// Image filled with a single pixel value.
    pub fn filled(width: usize, height: usize, pixel: &[u8]) -> Result<Self, ImageError> {
        let data = pixel
            .iter()
            .copied()
            .cycle()
            .take(width * height * pixel.len())
            .collect();
        Self::new(width, height, pixel.len(), data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> &[u8] {
        let i = (y * self.width + x) * self.channels;
        &self.data[i..i + self.channels]
    }

    #[inline]
    pub fn pixel_mut(&mut self, x: usize, y: usize) -> &mut [u8] {
        let i = (y * self.width + x) * self.channels;
        &mut self.data[i..i + self.channels]
    }

    /// Full-image rectangle at the origin.
    pub fn bounds(&self) -> BoundingBox {
        BoundingBox::new(0, 0, self.width as i32, self.height as i32)
    }

    /// Copy of the part of the image covered by `region`. Returns `None`
    /// when the region does not overlap the image.
    pub fn crop(&self, region: &BoundingBox) -> Option<ImageBuffer> {
        let r = region.clip(self.width, self.height)?;
        let (x0, y0) = (r.x as usize, r.y as usize);
        let (w, h) = (r.w as usize, r.h as usize);
        let mut data = Vec::with_capacity(w * h * self.channels);
        for y in y0..y0 + h {
            let start = (y * self.width + x0) * self.channels;
            data.extend_from_slice(&self.data[start..start + w * self.channels]);
        }
        Some(ImageBuffer {
            width: w,
            height: h,
            channels: self.channels,
            data,
        })
    }

    /// Luma plane (BT.601 weights for RGB, identity for gray).
    pub fn to_luma(&self) -> Vec<f64> {
        match self.channels {
            1 => self.data.iter().map(|&v| v as f64).collect(),
            _ => self
                .data
                .chunks_exact(3)
                .map(|p| 0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64)
                .collect(),
        }
    }

    /// Three-channel copy; gray samples are replicated.
    pub fn to_rgb(&self) -> ImageBuffer {
        if self.channels == 3 {
            return self.clone();
        }
        let data = self.data.iter().flat_map(|&v| [v, v, v]).collect();
        ImageBuffer {
            width: self.width,
            height: self.height,
            channels: 3,
            data,
        }
    }

    /// Binary PGM (gray) or PPM (RGB) encoding, maxval 255.
    pub fn encode_pnm(&self) -> Vec<u8> {
        let magic = if self.channels == 1 { "P5" } else { "P6" };
        let mut out = format!("{}\n{} {}\n255\n", magic, self.width, self.height).into_bytes();
        out.extend_from_slice(&self.data);
        out
    }

    pub fn save_pnm(&self, path: impl AsRef<Path>) -> Result<(), ImageError> {
        let path = path.as_ref();
        fs::write(path, self.encode_pnm()).map_err(|source| ImageError::Io {
            path: path.display().to_string(),
            source,
        })
    }
}

/// Parse a binary P5/P6 file held in memory.
pub fn decode_pnm(bytes: &[u8]) -> Result<ImageBuffer, ImageError> {
    let mut cursor = 0usize;
    let magic = next_token(bytes, &mut cursor)
        .ok_or_else(|| ImageError::Header("missing magic number".into()))?;
    let channels = match magic {
        b"P5" => 1,
        b"P6" => 3,
        other => {
            return Err(ImageError::Header(format!(
                "unsupported magic {:?}",
                String::from_utf8_lossy(other)
            )))
        }
    };
    let width = parse_header_field(bytes, &mut cursor, "width")?;
    let height = parse_header_field(bytes, &mut cursor, "height")?;
    if width == 0 || height == 0 {
        return Err(ImageError::Dimensions { width, height });
    }
    let maxval = parse_header_field(bytes, &mut cursor, "maxval")?;
    if maxval != 255 {
        return Err(ImageError::Header(format!("maxval {maxval} (only 255 supported)")));
    }
    // exactly one whitespace byte separates the header from the raster
    if cursor >= bytes.len() || !bytes[cursor].is_ascii_whitespace() {
        return Err(ImageError::Truncated {
            expected: width * height * channels,
            found: 0,
        });
    }
    cursor += 1;
    let expected = width * height * channels;
    let payload = &bytes[cursor..];
    if payload.len() < expected {
        return Err(ImageError::Truncated {
            expected,
            found: payload.len(),
        });
    }
    ImageBuffer::new(width, height, channels, payload[..expected].to_vec())
}

fn next_token<'a>(bytes: &'a [u8], cursor: &mut usize) -> Option<&'a [u8]> {
    loop {
        while *cursor < bytes.len() && bytes[*cursor].is_ascii_whitespace() {
            *cursor += 1;
        }
        if *cursor < bytes.len() && bytes[*cursor] == b'#' {
            while *cursor < bytes.len() && bytes[*cursor] != b'\n' {
                *cursor += 1;
            }
            continue;
        }
        break;
    }
    let start = *cursor;
    while *cursor < bytes.len() && !bytes[*cursor].is_ascii_whitespace() && bytes[*cursor] != b'#'
    {
        *cursor += 1;
    }
    (*cursor > start).then(|| &bytes[start..*cursor])
}

fn parse_header_field(bytes: &[u8], cursor: &mut usize, name: &str) -> Result<usize, ImageError> {
    let token =
        next_token(bytes, cursor).ok_or_else(|| ImageError::Header(format!("missing {name}")))?;
    std::str::from_utf8(token)
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| {
            ImageError::Header(format!(
                "bad {name} field {:?}",
                String::from_utf8_lossy(token)
            ))
        })
}

/// Load a PGM/PPM image, or a PNG/JPEG through the `image` crate.
pub fn load_image(path: impl AsRef<Path>) -> Result<ImageBuffer, ImageError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| {
        if source.kind() == io::ErrorKind::NotFound {
            ImageError::NotFound(path.display().to_string())
        } else {
            ImageError::Io {
                path: path.display().to_string(),
                source,
            }
        }
    })?;
    if bytes.starts_with(b"P5") || bytes.starts_with(b"P6") {
        return decode_pnm(&bytes);
    }
    let decoded = image::load_from_memory(&bytes)
        .map_err(|e| ImageError::Unsupported(format!("{}: {e}", path.display())))?;
    let rgb = decoded.to_rgb8();
    let (w, h) = rgb.dimensions();
    ImageBuffer::new(w as usize, h as usize, 3, rgb.into_raw())
}

/// Joint color-bin index of one pixel.
///
/// Each channel maps to `floor(c * bins / 256)`; RGB cells are laid out as
/// `r * bins^2 + g * bins + b`.
pub fn quantize_pixel(pixel: &[u8], bins: usize) -> Result<usize, ImageError> {
    if !(2..=256).contains(&bins) {
        return Err(ImageError::Bins(bins));
    }
    match pixel.len() {
        1 => Ok(channel_bin(pixel[0], bins)),
        3 => Ok(joint_bin(pixel, bins)),
        n => Err(ImageError::Channels(n)),
    }
}

#[inline]
pub(crate) fn channel_bin(sample: u8, bins: usize) -> usize {
    sample as usize * bins / 256
}

#[inline]
pub(crate) fn joint_bin(pixel: &[u8], bins: usize) -> usize {
    if pixel.len() == 1 {
        return channel_bin(pixel[0], bins);
    }
    (channel_bin(pixel[0], bins) * bins + channel_bin(pixel[1], bins)) * bins
        + channel_bin(pixel[2], bins)
}

/// Number of histogram cells for a channel count and per-channel bin count.
pub fn histogram_cells(channels: usize, bins: usize) -> usize {
    bins.pow(channels as u32)
}

/// Axis-aligned pixel rectangle covering columns `x..x+w` and rows `y..y+h`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BoundingBox {
    pub x: i32,
    pub y: i32,
    pub w: i32,
    pub h: i32,
}

impl BoundingBox {
    pub const fn new(x: i32, y: i32, w: i32, h: i32) -> Self {
        Self { x, y, w, h }
    }

    /// Rectangle from a center and real-valued extent, rounded to pixels,
    /// with both dimensions kept at least 1.
    pub fn from_center(cx: f64, cy: f64, w: f64, h: f64) -> Self {
        let w = w.round().max(1.0);
        let h = h.round().max(1.0);
        Self::new(
            (cx - w / 2.0).round() as i32,
            (cy - h / 2.0).round() as i32,
            w as i32,
            h as i32,
        )
    }

    pub fn right(&self) -> i32 {
        self.x + self.w
    }

    pub fn bottom(&self) -> i32 {
        self.y + self.h
    }

    pub fn area(&self) -> i64 {
        self.w.max(0) as i64 * self.h.max(0) as i64
    }

    pub fn center(&self) -> (f64, f64) {
        (
            self.x as f64 + self.w as f64 / 2.0,
            self.y as f64 + self.h as f64 / 2.0,
        )
    }

    pub fn is_valid(&self) -> bool {
        self.w >= 1 && self.h >= 1
    }

    pub fn contains_point(&self, x: i32, y: i32) -> bool {
        x >= self.x && x < self.right() && y >= self.y && y < self.bottom()
    }

    pub fn contains(&self, other: &BoundingBox) -> bool {
        other.x >= self.x
            && other.y >= self.y
            && other.right() <= self.right()
            && other.bottom() <= self.bottom()
    }

    pub fn intersect(&self, other: &BoundingBox) -> Option<BoundingBox> {
        let x0 = self.x.max(other.x);
        let y0 = self.y.max(other.y);
        let x1 = self.right().min(other.right());
        let y1 = self.bottom().min(other.bottom());
        (x1 > x0 && y1 > y0).then(|| BoundingBox::new(x0, y0, x1 - x0, y1 - y0))
    }

    pub fn intersection_area(&self, other: &BoundingBox) -> i64 {
        self.intersect(other).map_or(0, |b| b.area())
    }

    pub fn union_area(&self, other: &BoundingBox) -> i64 {
        self.area() + other.area() - self.intersection_area(other)
    }

    /// Intersection over union; 0 when the union is empty.
    pub fn iou(&self, other: &BoundingBox) -> f64 {
        let union = self.union_area(other);
        if union <= 0 {
            return 0.0;
        }
        self.intersection_area(other) as f64 / union as f64
    }

    /// Part of the box inside a `width` x `height` grid.
    pub fn clip(&self, width: usize, height: usize) -> Option<BoundingBox> {
        self.intersect(&BoundingBox::new(0, 0, width as i32, height as i32))
    }

    pub fn translate(&self, dx: i32, dy: i32) -> BoundingBox {
        BoundingBox::new(self.x + dx, self.y + dy, self.w, self.h)
    }

    /// Box scaled about its center by independent factors.
    pub fn scaled(&self, sx: f64, sy: f64) -> BoundingBox {
        let (cx, cy) = self.center();
        BoundingBox::from_center(cx, cy, self.w as f64 * sx, self.h as f64 * sy)
    }
}

impl fmt::Display for BoundingBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{},{}", self.x, self.y, self.w, self.h)
    }
}

impl std::str::FromStr for BoundingBox {
    type Err = String;

    /// Parses `x,y,w,h` (commas, tabs or spaces as separators).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<f64> = s
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|p| !p.is_empty())
            .map(|p| p.parse::<f64>().map_err(|e| format!("bad coordinate {p:?}: {e}")))
            .collect::<Result<_, _>>()?;
        if parts.len() != 4 {
            return Err(format!("expected 4 values x,y,w,h, got {}", parts.len()));
        }
        let b = BoundingBox::new(
            parts[0].round() as i32,
            parts[1].round() as i32,
            parts[2].round() as i32,
            parts[3].round() as i32,
        );
        if !b.is_valid() {
            return Err(format!("box {b} has non-positive dimensions"));
        }
        Ok(b)
    }
}

/// Summed-area table over a scalar grid.
///
/// Entry `(i, j)` holds the sum of all source values in rows `< j` and
/// columns `< i`; row 0 and column 0 are zero.
#[derive(Debug, Clone)]
pub struct IntegralImage {
    width: usize,
    height: usize,
    sums: Vec<f64>,
}

impl IntegralImage {
    pub fn new(width: usize, height: usize, values: &[f64]) -> Self {
        assert_eq!(values.len(), width * height, "grid size mismatch");
        let stride = width + 1;
        let mut sums = vec![0.0; stride * (height + 1)];
        for y in 0..height {
            let mut row = 0.0;
            for x in 0..width {
                row += values[y * width + x];
                sums[(y + 1) * stride + x + 1] = sums[y * stride + x + 1] + row;
            }
        }
        Self {
            width,
            height,
            sums,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Cumulative sum at grid corner `(x, y)`, `0 <= x <= width`.
    #[inline]
    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.sums[y * (self.width + 1) + x]
    }

    /// Sum over columns `x0..x1` and rows `y0..y1` (exclusive ends, already
    /// inside the grid).
    #[inline]
    pub fn rect_sum(&self, x0: usize, y0: usize, x1: usize, y1: usize) -> f64 {
        self.at(x1, y1) - self.at(x0, y1) - self.at(x1, y0) + self.at(x0, y0)
    }

    /// Sum over the part of `b` inside the grid; zero when fully outside.
    pub fn box_sum(&self, b: &BoundingBox) -> f64 {
        match b.clip(self.width, self.height) {
            Some(c) => self.rect_sum(
                c.x as usize,
                c.y as usize,
                c.right() as usize,
                c.bottom() as usize,
            ),
            None => 0.0,
        }
    }
}

/// Summed-area table over the samples of an image (gray, or per-pixel mean
/// of channels).
pub fn integral_image(width: usize, height: usize, values: &[f64]) -> IntegralImage {
    IntegralImage::new(width, height, values)
}
