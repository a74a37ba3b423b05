//! PathSet rendering, PNG I/O and binary inked-pixel masks.
//!
//! World coordinates are auto-fitted: uniformly scaled and centered so the
//! path bounds fill the canvas minus a margin, y pointing up. Strokes are
//! hard 1-px lines, so the mask does not depend on the stroke color.

use std::fmt;
use std::io::Cursor;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::turtle::{PathSet, Point};

pub const DEFAULT_SIZE: u32 = 1024;
pub const DEFAULT_DPI: u32 = 128;
/// A channel strictly below this value marks a pixel as inked.
pub const INK_THRESHOLD: u8 = 250;

/// Sub-pixel fixed-point resolution used to snap projected coordinates.
const SUBPIXEL: f64 = 256.0;

#[derive(Debug, Error)]
pub enum RasterError {
    #[error("image is {actual_w}x{actual_h}, expected {expected_w}x{expected_h}")]
    Dimension {
        expected_w: u32,
        expected_h: u32,
        actual_w: u32,
        actual_h: u32,
    },
    #[error("png decode failed: {0}")]
    Decode(String),
    #[error("png encode failed: {0}")]
    Encode(String),
    #[error("invalid render config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LineColor {
    Black,
    Red,
    Blue,
    Green,
    Purple,
}

impl LineColor {
    pub const ALL: [LineColor; 5] = [
        LineColor::Black,
        LineColor::Red,
        LineColor::Blue,
        LineColor::Green,
        LineColor::Purple,
    ];

    pub const fn rgb(self) -> [u8; 3] {
        match self {
            LineColor::Black => [0, 0, 0],
            LineColor::Red => [255, 0, 0],
            LineColor::Blue => [0, 0, 255],
            LineColor::Green => [0, 128, 0],
            LineColor::Purple => [128, 0, 128],
        }
    }

    pub const fn as_str(self) -> &'static str {
        match self {
            LineColor::Black => "black",
            LineColor::Red => "red",
            LineColor::Blue => "blue",
            LineColor::Green => "green",
            LineColor::Purple => "purple",
        }
    }
}

impl fmt::Display for LineColor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LineColor {
    type Err = RasterError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        LineColor::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| RasterError::Config(format!("unknown color `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderConfig {
    pub width: u32,
    pub height: u32,
    pub dpi: u32,
    pub line_color: LineColor,
    /// Nominal stroke width; strokes are always rasterized 1 px wide.
    pub line_width: f64,
    pub margin_fraction: f64,
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self {
            width: DEFAULT_SIZE,
            height: DEFAULT_SIZE,
            dpi: DEFAULT_DPI,
            line_color: LineColor::Black,
            line_width: 0.5,
            margin_fraction: 0.05,
        }
    }
}

impl RenderConfig {
    pub fn with_color(color: LineColor) -> Self {
        Self {
            line_color: color,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), RasterError> {
        if self.width == 0 || self.height == 0 {
            return Err(RasterError::Config(
                "width and height must be positive".into(),
            ));
        }
        if !(0.0..=0.25).contains(&self.margin_fraction) {
            return Err(RasterError::Config(format!(
                "margin_fraction {} outside [0, 0.25]",
                self.margin_fraction
            )));
        }
        Ok(())
    }
}

/// 8-bit RGB image, row-major, origin top-left.
#[derive(Clone, PartialEq, Eq)]
pub struct Image {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
}

impl fmt::Debug for Image {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Image")
            .field("width", &self.width)
            .field("height", &self.height)
            .finish_non_exhaustive()
    }
}

impl Image {
    pub fn blank(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            pixels: vec![255; width as usize * height as usize * 3],
        }
    }

    pub fn from_rgb(width: u32, height: u32, pixels: Vec<u8>) -> Option<Self> {
        (pixels.len() == width as usize * height as usize * 3).then_some(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn as_rgb(&self) -> &[u8] {
        &self.pixels
    }

    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    pub fn put_pixel(&mut self, x: u32, y: u32, rgb: [u8; 3]) {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        self.pixels[i..i + 3].copy_from_slice(&rgb);
    }

    fn plot(&mut self, x: i64, y: i64, rgb: [u8; 3]) {
        if x >= 0 && y >= 0 && x < i64::from(self.width) && y < i64::from(self.height) {
            self.put_pixel(x as u32, y as u32, rgb);
        }
    }
}

/// World-to-pixel transform derived from path bounds.
#[derive(Debug, Clone, Copy)]
pub struct Viewport {
    scale: f64,
    center: Point,
    half_w: f64,
    half_h: f64,
}

impl Viewport {
    pub fn fit(paths: &PathSet, cfg: &RenderConfig) -> Option<Self> {
        let b = paths.bounds()?;
        let avail_w = f64::from(cfg.width) * (1.0 - 2.0 * cfg.margin_fraction);
        let avail_h = f64::from(cfg.height) * (1.0 - 2.0 * cfg.margin_fraction);
        let sx = if b.width() > 0.0 {
            avail_w / b.width()
        } else {
            f64::INFINITY
        };
        let sy = if b.height() > 0.0 {
            avail_h / b.height()
        } else {
            f64::INFINITY
        };
        let mut scale = sx.min(sy);
        if !scale.is_finite() {
            scale = 1.0;
        }
        Some(Self {
            scale,
            center: b.center(),
            half_w: f64::from(cfg.width) / 2.0,
            half_h: f64::from(cfg.height) / 2.0,
        })
    }

    /// Pixel-space position in 1/256 px fixed point.
    fn project(&self, p: Point) -> (i64, i64) {
        let px = self.half_w + (p.x - self.center.x) * self.scale;
        let py = self.half_h - (p.y - self.center.y) * self.scale;
        (
            (px * SUBPIXEL).round() as i64,
            (py * SUBPIXEL).round() as i64,
        )
    }
}

/// Renders `paths` onto a white canvas.
pub fn render(paths: &PathSet, cfg: &RenderConfig) -> Image {
    let mut img = Image::blank(cfg.width, cfg.height);
    let Some(view) = Viewport::fit(paths, cfg) else {
        return img;
    };
    let rgb = cfg.line_color.rgb();
    let sub = SUBPIXEL as i64;
    for (a, b) in paths.segments() {
        let (ax, ay) = view.project(a);
        let (bx, by) = view.project(b);
        draw_line(
            &mut img,
            (ax.div_euclid(sub), ay.div_euclid(sub)),
            (bx.div_euclid(sub), by.div_euclid(sub)),
            rgb,
        );
    }
    img
}

/// Integer Bresenham between two pixel positions, endpoints inclusive.
fn draw_line(img: &mut Image, from: (i64, i64), to: (i64, i64), rgb: [u8; 3]) {
    let (mut x0, mut y0) = from;
    let (x1, y1) = to;
    let dx = (x1 - x0).abs();
    let dy = -(y1 - y0).abs();
    let sx = if x0 < x1 { 1 } else { -1 };
    let sy = if y0 < y1 { 1 } else { -1 };
    let mut err = dx + dy;
    loop {
        img.plot(x0, y0, rgb);
        if x0 == x1 && y0 == y1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x0 += sx;
        }
        if e2 <= dx {
            err += dx;
            y0 += sy;
        }
    }
}

/// Row-major bit grid of inked pixels, packed into 64-bit words.
#[derive(Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: u32,
    height: u32,
    words: Vec<u64>,
    popcount: u64,
}

impl fmt::Debug for BinaryMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BinaryMask")
            .field("width", &self.width)
            .field("height", &self.height)
            .field("popcount", &self.popcount)
            .finish()
    }
}

impl BinaryMask {
    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> bool) -> Self {
        let n = width as usize * height as usize;
        let mut words = vec![0u64; n.div_ceil(64)];
        for y in 0..height {
            for x in 0..width {
                if f(x, y) {
                    let i = y as usize * width as usize + x as usize;
                    words[i / 64] |= 1 << (i % 64);
                }
            }
        }
        let popcount = words.iter().map(|w| u64::from(w.count_ones())).sum();
        Self {
            width,
            height,
            words,
            popcount,
        }
    }

    pub fn empty(width: u32, height: u32) -> Self {
        Self::from_fn(width, height, |_, _| false)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn popcount(&self) -> u64 {
        self.popcount
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn get(&self, x: u32, y: u32) -> bool {
        let i = y as usize * self.width as usize + x as usize;
        self.words[i / 64] >> (i % 64) & 1 == 1
    }
}

/// Marks every pixel with any channel below [`INK_THRESHOLD`].
pub fn to_mask(img: &Image, cfg: &RenderConfig) -> Result<BinaryMask, RasterError> {
    if img.width != cfg.width || img.height != cfg.height {
        return Err(RasterError::Dimension {
            expected_w: cfg.width,
            expected_h: cfg.height,
            actual_w: img.width,
            actual_h: img.height,
        });
    }
    Ok(mask_of(img))
}

/// Mask of an image of any size.
pub fn mask_of(img: &Image) -> BinaryMask {
    let w = img.width as usize;
    BinaryMask::from_fn(img.width, img.height, |x, y| {
        let i = (y as usize * w + x as usize) * 3;
        img.pixels[i..i + 3].iter().any(|&c| c < INK_THRESHOLD)
    })
}

/// Convenience: render and mask in one step.
pub fn rasterize_mask(paths: &PathSet, cfg: &RenderConfig) -> BinaryMask {
    mask_of(&render(paths, cfg))
}

/// Encodes an RGB PNG with the configured DPI recorded in pHYs.
pub fn write_png(img: &Image, dpi: u32) -> Result<Vec<u8>, RasterError> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, img.width, img.height);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        enc.set_compression(png::Compression::Fast);
        let per_meter = (f64::from(dpi) / 0.0254).round() as u32;
        enc.set_pixel_dims(Some(png::PixelDimensions {
            xppu: per_meter,
            yppu: per_meter,
            unit: png::Unit::Meter,
        }));
        let mut writer = enc
            .write_header()
            .map_err(|e| RasterError::Encode(e.to_string()))?;
        writer
            .write_image_data(&img.pixels)
            .map_err(|e| RasterError::Encode(e.to_string()))?;
        writer
            .finish()
            .map_err(|e| RasterError::Encode(e.to_string()))?;
    }
    Ok(out)
}

/// Decodes any 8/16-bit PNG to RGB; alpha is composited over white.
pub fn read_png(bytes: &[u8]) -> Result<Image, RasterError> {
    let decode = |e: png::DecodingError| RasterError::Decode(e.to_string());
    let mut dec = png::Decoder::new(Cursor::new(bytes));
    dec.set_transformations(png::Transformations::EXPAND | png::Transformations::STRIP_16);
    let mut reader = dec.read_info().map_err(decode)?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| RasterError::Decode("image too large".into()))?;
    let mut buf = vec![0; size];
    let info = reader.next_frame(&mut buf).map_err(decode)?;
    let (w, h) = (info.width, info.height);
    let n = w as usize * h as usize;
    let data = &buf[..info.buffer_size()];
    let channels = info.color_type.samples();
    let stride = info.line_size;
    let mut pixels = Vec::with_capacity(n * 3);
    for row in data.chunks(stride).take(h as usize) {
        for px in row[..w as usize * channels].chunks(channels) {
            let (rgb, alpha) = match channels {
                1 => ([px[0]; 3], 255),
                2 => ([px[0]; 3], px[1]),
                3 => ([px[0], px[1], px[2]], 255),
                4 => ([px[0], px[1], px[2]], px[3]),
                c => {
                    return Err(RasterError::Decode(format!(
                        "unsupported channel count {c}"
                    )))
                }
            };
            for c in rgb {
                pixels.push(over_white(c, alpha));
            }
        }
    }
    Ok(Image {
        width: w,
        height: h,
        pixels,
    })
}

fn over_white(c: u8, alpha: u8) -> u8 {
    let (c, a) = (u32::from(c), u32::from(alpha));
    ((c * a + 255 * (255 - a) + 127) / 255) as u8
}
