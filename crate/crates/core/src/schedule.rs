//! Per-step inpainting mask schedules.
//!
//! A schedule assigns one mask to every denoising step in `[0, T)`. The
//! hybrid schedule first inpaints only the disoccluded region `M & !M_vis`
//! for `N` steps, keeping reprojected pixels fixed, and then inpaints the
//! full object mask `M` for the remaining steps.

use crate::error::{Error, Result};
use crate::raster::{ensure_same_dims, Grid, Mask};

#[derive(Clone, Debug, PartialEq)]
pub struct ScheduleEntry {
    /// First step, inclusive.
    pub lo: usize,
    /// Last step, exclusive.
    pub hi: usize,
    pub mask: Mask,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MaskSchedule {
    total_steps: usize,
    entries: Vec<ScheduleEntry>,
}

impl MaskSchedule {
    /// Validates that the entries partition `[0, total_steps)` in order and
    /// share one raster size.
    pub fn new(total_steps: usize, entries: Vec<ScheduleEntry>) -> Result<Self> {
        if total_steps == 0 {
            return Err(Error::config("schedule needs at least one step"));
        }
        let mut next = 0;
        for e in &entries {
            if e.lo != next || e.hi <= e.lo {
                return Err(Error::config(format!(
                    "schedule entry [{}, {}) does not continue partition at step {next}",
                    e.lo, e.hi
                )));
            }
            ensure_same_dims(&e.mask, &entries[0].mask, "schedule masks")?;
            next = e.hi;
        }
        if next != total_steps {
            return Err(Error::config(format!(
                "schedule covers [0, {next}) but has {total_steps} steps"
            )));
        }
        Ok(Self { total_steps, entries })
    }

    /// Single entry covering every step.
    pub fn full(mask: Mask, total_steps: usize) -> Result<Self> {
        Self::new(
            total_steps,
            vec![ScheduleEntry {
                lo: 0,
                hi: total_steps,
                mask,
            }],
        )
    }

    pub fn total_steps(&self) -> usize {
        self.total_steps
    }

    pub fn entries(&self) -> &[ScheduleEntry] {
        &self.entries
    }

    pub fn dims(&self) -> (usize, usize) {
        self.entries[0].mask.dims()
    }

    /// Number of steps whose mask covers each pixel.
    pub fn active_steps(&self) -> Grid<usize> {
        let (w, h) = self.dims();
        let mut k = Grid::new(w, h, 0usize);
        for e in &self.entries {
            let span = e.hi - e.lo;
            for (dst, &m) in k.data_mut().iter_mut().zip(e.mask.data()) {
                if m {
                    *dst += span;
                }
            }
        }
        k
    }

    /// Pixels covered by at least one entry.
    pub fn union(&self) -> Mask {
        self.entries[1..]
            .iter()
            .fold(self.entries[0].mask.clone(), |acc, e| acc.or(&e.mask))
    }
}

/// `[(0, N, M & !M_vis), (N, T, M)]`, collapsing to one entry when `N = 0`
/// (plain inpainting of `M`) or `N = T` (projection kept throughout).
pub fn build_hybrid_schedule(
    mask: &Mask,
    visible: &Mask,
    preserve_steps: usize,
    total_steps: usize,
) -> Result<MaskSchedule> {
    if preserve_steps > total_steps {
        return Err(Error::config(format!(
            "preserve steps {preserve_steps} exceed total steps {total_steps}"
        )));
    }
    ensure_same_dims(mask, visible, "schedule mask vs visibility")?;
    let inpaint = mask.and_not(visible);
    if preserve_steps == 0 {
        return MaskSchedule::full(mask.clone(), total_steps);
    }
    if preserve_steps == total_steps {
        return MaskSchedule::full(inpaint, total_steps);
    }
    MaskSchedule::new(
        total_steps,
        vec![
            ScheduleEntry {
                lo: 0,
                hi: preserve_steps,
                mask: inpaint,
            },
            ScheduleEntry {
                lo: preserve_steps,
                hi: total_steps,
                mask: mask.clone(),
            },
        ],
    )
}
