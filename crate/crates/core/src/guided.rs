//! Guided filter (local linear model of the output on a grayscale guide).
//!
//! Box means use clipped windows: near the border the mean is taken over the
//! in-bounds pixels only.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{ensure_same_dims, Grid, Mask, RgbImage};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GuidedFilterParams {
    pub radius: usize,
    pub eps: f64,
    pub threshold: f64,
}

impl Default for GuidedFilterParams {
    fn default() -> Self {
        Self {
            radius: 8,
            eps: 1e-4,
            threshold: 0.5,
        }
    }
}

impl GuidedFilterParams {
    pub fn validate(&self) -> Result<()> {
        if self.radius < 1 {
            return Err(Error::config("guided filter radius must be >= 1"));
        }
        if !(self.eps > 0.0) {
            return Err(Error::config("guided filter eps must be > 0"));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::config("guided filter threshold must be in (0, 1)"));
        }
        Ok(())
    }
}

/// Mean over the `(2r+1)^2` window clipped to the image, via a summed-area table.
pub fn box_mean(grid: &Grid<f64>, radius: usize) -> Grid<f64> {
    let (w, h) = grid.dims();
    let stride = w + 1;
    let mut sat = vec![0.0f64; stride * (h + 1)];
    for y in 0..h {
        let mut row = 0.0;
        for x in 0..w {
            row += grid.get(x, y);
            sat[(y + 1) * stride + x + 1] = sat[y * stride + x + 1] + row;
        }
    }
    Grid::from_fn(w, h, |x, y| {
        let x0 = x.saturating_sub(radius);
        let y0 = y.saturating_sub(radius);
        let x1 = (x + radius + 1).min(w);
        let y1 = (y + radius + 1).min(h);
        let sum = sat[y1 * stride + x1] - sat[y0 * stride + x1] - sat[y1 * stride + x0] + sat[y0 * stride + x0];
        sum / ((x1 - x0) * (y1 - y0)) as f64
    })
}

/// Edge-preserving smoothing of `input` steered by `guide`.
pub fn guided_filter(input: &Grid<f64>, guide: &Grid<f64>, radius: usize, eps: f64) -> Result<Grid<f64>> {
    ensure_same_dims(input, guide, "guided filter input vs guide")?;
    let mean_i = box_mean(guide, radius);
    let mean_p = box_mean(input, radius);
    let corr_ip = box_mean(&zip(guide, input, |i, p| i * p), radius);
    let corr_ii = box_mean(&guide.map(|&i| i * i), radius);

    let a = Grid::from_fn(guide.width(), guide.height(), |x, y| {
        let mi = mean_i.get(x, y);
        let var = corr_ii.get(x, y) - mi * mi;
        let cov = corr_ip.get(x, y) - mi * mean_p.get(x, y);
        cov / (var + eps)
    });
    let b = Grid::from_fn(guide.width(), guide.height(), |x, y| {
        mean_p.get(x, y) - a.get(x, y) * mean_i.get(x, y)
    });
    let mean_a = box_mean(&a, radius);
    let mean_b = box_mean(&b, radius);
    Ok(Grid::from_fn(guide.width(), guide.height(), |x, y| {
        mean_a.get(x, y) * guide.get(x, y) + mean_b.get(x, y)
    }))
}

fn zip(a: &Grid<f64>, b: &Grid<f64>, f: impl Fn(f64, f64) -> f64) -> Grid<f64> {
    Grid::from_fn(a.width(), a.height(), |x, y| f(*a.get(x, y), *b.get(x, y)))
}

/// Filters a raw float mask with the luminance of `guide`, then binarizes
/// (`value >= threshold`). Returns the pre-threshold output and the mask.
pub fn guided_filter_refine(
    raw_mask: &Grid<f64>,
    guide: &RgbImage,
    params: &GuidedFilterParams,
) -> Result<(Grid<f64>, Mask)> {
    params.validate()?;
    ensure_same_dims(raw_mask, guide, "guided filter mask vs guide")?;
    let filtered = guided_filter(raw_mask, &guide.luminance(), params.radius, params.eps)?;
    let mask = filtered.map(|&v| v >= params.threshold);
    Ok((filtered, mask))
}
