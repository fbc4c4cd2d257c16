//! Dense row-major rasters and the sampling/morphology helpers shared by the
//! geometry and mask stages.

use crate::error::{Error, Result};

/// Row-major 2D raster.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

/// Binary mask, `true` marks the object.
pub type Mask = Grid<bool>;
/// 8-bit RGB image.
pub type RgbImage = Grid<[u8; 3]>;
/// Floating point RGB image with channels normalized to `[0, 1]`.
pub type RgbFloat = Grid<[f64; 3]>;

impl<T: Clone> Grid<T> {
    pub fn new(width: usize, height: usize, fill: T) -> Self {
        Self {
            width,
            height,
            data: vec![fill; width * height],
        }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::config(format!(
                "raster buffer has {} elements, expected {}x{}",
                data.len(),
                width,
                height
            )));
        }
        Ok(Self { width, height, data })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self { width, height, data }
    }

    pub fn map<U: Clone>(&self, mut f: impl FnMut(&T) -> U) -> Grid<U> {
        Grid {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(&mut f).collect(),
        }
    }

    pub fn set(&mut self, x: usize, y: usize, value: T) {
        let idx = self.index(x, y);
        self.data[idx] = value;
    }
}

impl<T> Grid<T> {
    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize) -> usize {
        debug_assert!(x < self.width && y < self.height);
        y * self.width + x
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> &T {
        &self.data[y * self.width + x]
    }

    #[inline]
    pub fn get_mut(&mut self, x: usize, y: usize) -> &mut T {
        let idx = self.index(x, y);
        &mut self.data[idx]
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn same_dims<U>(&self, other: &Grid<U>) -> bool {
        self.width == other.width && self.height == other.height
    }

    /// Iterates `(x, y, &value)` in row-major order.
    pub fn pixels(&self) -> impl Iterator<Item = (usize, usize, &T)> {
        let w = self.width.max(1);
        self.data.iter().enumerate().map(move |(i, v)| (i % w, i / w, v))
    }
}

pub(crate) fn ensure_same_dims<A, B>(a: &Grid<A>, b: &Grid<B>, what: &str) -> Result<()> {
    if a.same_dims(b) {
        Ok(())
    } else {
        Err(Error::config(format!(
            "{what}: dimension mismatch {}x{} vs {}x{}",
            a.width, a.height, b.width, b.height
        )))
    }
}

/// The four bilinear taps `(x, y, weight)` around a continuous pixel position.
///
/// Valid positions are `[0, width) x [0, height)`; taps beyond the last
/// row/column are clamped onto it.
pub fn bilinear_taps(width: usize, height: usize, u: f64, v: f64) -> Option<[(usize, usize, f64); 4]> {
    if !(u >= 0.0 && v >= 0.0 && u < width as f64 && v < height as f64) {
        return None;
    }
    let x0 = u.floor();
    let y0 = v.floor();
    let ax = u - x0;
    let ay = v - y0;
    let x0 = x0 as usize;
    let y0 = y0 as usize;
    let x1 = (x0 + 1).min(width - 1);
    let y1 = (y0 + 1).min(height - 1);
    Some([
        (x0, y0, (1.0 - ax) * (1.0 - ay)),
        (x1, y0, ax * (1.0 - ay)),
        (x0, y1, (1.0 - ax) * ay),
        (x1, y1, ax * ay),
    ])
}

/// Nearest pixel to a continuous position, `None` outside `[0, width) x [0, height)`.
pub fn nearest_pixel(width: usize, height: usize, u: f64, v: f64) -> Option<(usize, usize)> {
    if !(u >= 0.0 && v >= 0.0 && u < width as f64 && v < height as f64) {
        return None;
    }
    let x = ((u + 0.5).floor() as usize).min(width - 1);
    let y = ((v + 0.5).floor() as usize).min(height - 1);
    Some((x, y))
}

impl Grid<f64> {
    pub fn sample_bilinear(&self, u: f64, v: f64) -> Option<f64> {
        let taps = bilinear_taps(self.width, self.height, u, v)?;
        Some(taps.iter().map(|&(x, y, w)| w * self.get(x, y)).sum())
    }

    pub fn min_max(&self) -> Option<(f64, f64)> {
        self.data.iter().fold(None, |acc, &v| match acc {
            None => Some((v, v)),
            Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
        })
    }
}

impl Grid<[u8; 3]> {
    /// Bilinear sample with channels normalized to `[0, 1]`.
    pub fn sample_bilinear(&self, u: f64, v: f64) -> Option<[f64; 3]> {
        let taps = bilinear_taps(self.width, self.height, u, v)?;
        let mut out = [0.0; 3];
        for &(x, y, w) in &taps {
            let px = self.get(x, y);
            for c in 0..3 {
                out[c] += w * px[c] as f64;
            }
        }
        Some(out.map(|c| c / 255.0))
    }

    /// Rec. 601 luma in `[0, 1]`.
    pub fn luminance(&self) -> Grid<f64> {
        self.map(|p| (0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64) / 255.0)
    }

    pub fn to_float(&self) -> RgbFloat {
        self.map(|p| p.map(|c| c as f64 / 255.0))
    }
}

impl Grid<[f64; 3]> {
    /// Quantizes normalized channels to 8 bits, rounding half up.
    pub fn to_u8(&self) -> RgbImage {
        self.map(|p| p.map(quantize_unit))
    }
}

/// Maps a normalized intensity to 8 bits with round-half-up.
#[inline]
pub fn quantize_unit(value: f64) -> u8 {
    quantize_level(value * 255.0)
}

/// Rounds an 8-bit-scale intensity half up and clamps to `[0, 255]`.
#[inline]
pub fn quantize_level(level: f64) -> u8 {
    (level + 0.5).floor().clamp(0.0, 255.0) as u8
}

impl Grid<bool> {
    pub fn sample_nearest(&self, u: f64, v: f64) -> Option<bool> {
        nearest_pixel(self.width, self.height, u, v).map(|(x, y)| *self.get(x, y))
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn any(&self) -> bool {
        self.data.iter().any(|&b| b)
    }

    pub fn and(&self, other: &Mask) -> Mask {
        self.zip_with(other, |a, b| a && b)
    }

    pub fn or(&self, other: &Mask) -> Mask {
        self.zip_with(other, |a, b| a || b)
    }

    pub fn and_not(&self, other: &Mask) -> Mask {
        self.zip_with(other, |a, b| a && !b)
    }

    pub fn is_subset_of(&self, other: &Mask) -> bool {
        self.data.iter().zip(&other.data).all(|(&a, &b)| !a || b)
    }

    fn zip_with(&self, other: &Mask, f: impl Fn(bool, bool) -> bool) -> Mask {
        assert!(self.same_dims(other), "mask dimension mismatch");
        Grid {
            width: self.width,
            height: self.height,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    /// Intersection over union; two empty masks have IoU 1.
    pub fn iou(&self, other: &Mask) -> f64 {
        let inter = self.and(other).count();
        let union = self.or(other).count();
        if union == 0 {
            1.0
        } else {
            inter as f64 / union as f64
        }
    }

    /// Dilation with a `(2r+1)^2` square structuring element.
    pub fn dilate(&self, radius: usize) -> Mask {
        self.square_filter(radius, true)
    }

    /// Erosion with a `(2r+1)^2` square structuring element; the window is
    /// clipped at the image border.
    pub fn erode(&self, radius: usize) -> Mask {
        self.square_filter(radius, false)
    }

    pub fn close(&self, radius: usize) -> Mask {
        self.dilate(radius).erode(radius)
    }

    // Separable min/max. `dilate = true` computes OR over the window, else AND.
    fn square_filter(&self, radius: usize, dilate: bool) -> Mask {
        if radius == 0 {
            return self.clone();
        }
        let (w, h) = self.dims();
        let pass = |src: &[bool], len: usize, stride: usize, lines: usize, line_stride: usize| {
            let mut out = vec![false; src.len()];
            for line in 0..lines {
                let base = line * line_stride;
                for i in 0..len {
                    let lo = i.saturating_sub(radius);
                    let hi = (i + radius).min(len - 1);
                    let mut acc = !dilate;
                    for j in lo..=hi {
                        let v = src[base + j * stride];
                        if dilate && v {
                            acc = true;
                            break;
                        }
                        if !dilate && !v {
                            acc = false;
                            break;
                        }
                    }
                    out[base + i * stride] = acc;
                }
            }
            out
        };
        let rows = pass(&self.data, w, 1, h, w);
        let cols = pass(&rows, h, w, w, 1);
        Grid {
            width: w,
            height: h,
            data: cols,
        }
    }

    /// 8-bit rendering, 255 for object and 0 for background.
    pub fn to_gray(&self) -> Grid<u8> {
        self.map(|&b| if b { 255 } else { 0 })
    }

    pub fn to_float(&self) -> Grid<f64> {
        self.map(|&b| if b { 1.0 } else { 0.0 })
    }
}
