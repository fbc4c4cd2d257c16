//! Independent oracles shared by integration tests. Everything here is
//! written from first principles and deliberately avoids the library's own
//! sampling, projection and filtering code paths.

#![allow(dead_code)]

use mvedit::synth::{MaskObject, SceneSpec};
use mvedit::{CameraModel, CameraView, DepthTolerance, Grid, Mask, ViewId};
use nalgebra::{Matrix3, Point3, Vector3};

/// First positive hit of a unit ray against the analytic scene:
/// `(t, hit_sphere)`.
pub fn trace(spec: &SceneSpec, o: &Point3<f64>, d: &Vector3<f64>) -> Option<(f64, bool)> {
    let plane = spec.geometry.plane();
    let n = Vector3::from(plane.normal);
    let scale = n.norm();
    let n = n / scale;
    let off = plane.offset / scale;
    let mut best: Option<(f64, bool)> = None;
    let dn = n.dot(d);
    if dn.abs() > 1e-15 {
        let t = (off - n.dot(&o.coords)) / dn;
        if t > 0.0 {
            best = Some((t, false));
        }
    }
    if let Some(s) = spec.geometry.sphere() {
        let c = Vector3::from(s.center);
        let oc = o.coords - c;
        let b = 2.0 * oc.dot(d);
        let cc = oc.dot(&oc) - s.radius * s.radius;
        let disc = b * b - 4.0 * cc;
        if disc >= 0.0 {
            let r = disc.sqrt();
            for t in [(-b - r) / 2.0, (-b + r) / 2.0] {
                if t > 0.0 {
                    if best.is_none_or(|(bt, _)| t < bt) {
                        best = Some((t, true));
                    }
                    break;
                }
            }
        }
    }
    best
}

/// Pinhole pieces rebuilt from the raw 3x4 matrix and intrinsics.
pub struct RawCam {
    pub r: Matrix3<f64>,
    pub t: Vector3<f64>,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub w: usize,
    pub h: usize,
}

impl RawCam {
    pub fn new(cam: &CameraModel) -> Self {
        let m = cam.world_to_camera();
        Self {
            r: Matrix3::new(m[0], m[1], m[2], m[4], m[5], m[6], m[8], m[9], m[10]),
            t: Vector3::new(m[3], m[7], m[11]),
            fx: cam.fx(),
            fy: cam.fy(),
            cx: cam.cx(),
            cy: cam.cy(),
            w: cam.width(),
            h: cam.height(),
        }
    }

    pub fn center(&self) -> Point3<f64> {
        Point3::from(-(self.r.transpose() * self.t))
    }

    pub fn ray(&self, x: f64, y: f64) -> Vector3<f64> {
        let d = Vector3::new((x - self.cx) / self.fx, (y - self.cy) / self.fy, 1.0);
        self.r.transpose() * d / d.norm()
    }

    /// `(u, v, z)` of a world point.
    pub fn project(&self, p: &Point3<f64>) -> (f64, f64, f64) {
        let q = self.r * p.coords + self.t;
        (self.fx * q.x / q.z + self.cx, self.fy * q.y / q.z + self.cy, q.z)
    }

    pub fn inside(&self, u: f64, v: f64, z: f64) -> bool {
        z > 0.0 && u >= 0.0 && v >= 0.0 && u < self.w as f64 && v < self.h as f64
    }
}

/// Bilinear interpolation written out longhand, clamping the far taps.
pub fn bilerp(g: &Grid<f64>, u: f64, v: f64) -> f64 {
    let x0 = u.floor() as usize;
    let y0 = v.floor() as usize;
    let x1 = (x0 + 1).min(g.width() - 1);
    let y1 = (y0 + 1).min(g.height() - 1);
    let fx = u - x0 as f64;
    let fy = v - y0 as f64;
    let top = g.get(x0, y0) * (1.0 - fx) + g.get(x1, y0) * fx;
    let bottom = g.get(x0, y1) * (1.0 - fx) + g.get(x1, y1) * fx;
    top * (1.0 - fy) + bottom * fy
}

/// Masked pixels of `from` surviving projection and the depth test in `to`,
/// recomputed naively.
pub fn naive_count(from: &CameraView, to: &CameraView, tol: &DepthTolerance) -> usize {
    let a = RawCam::new(&from.camera);
    let b = RawCam::new(&to.camera);
    let da = from.distance.as_ref().unwrap();
    let db = to.distance.as_ref().unwrap();
    let mask = from.mask.as_ref().unwrap();
    let cb = b.center();
    let mut count = 0;
    for y in 0..a.h {
        for x in 0..a.w {
            if !*mask.get(x, y) {
                continue;
            }
            let p = a.center() + a.ray(x as f64, y as f64) * *da.get(x, y);
            let (u, v, z) = b.project(&p);
            if !b.inside(u, v, z) {
                continue;
            }
            let expected = (p - cb).norm();
            let sampled = bilerp(db, u, v);
            if (sampled - expected).abs() <= tol.abs + tol.rel * expected {
                count += 1;
            }
        }
    }
    count
}

/// Brute-force greedy order: recompute every count at every step, pick the
/// maximum, prefer the smaller id on ties.
pub fn naive_order(views: &[CameraView], reference: ViewId, tol: &DepthTolerance) -> Vec<ViewId> {
    let mut order = vec![reference];
    let mut current = views.iter().position(|v| v.id == reference).unwrap();
    let mut left: Vec<usize> = (0..views.len()).filter(|&i| i != current).collect();
    while !left.is_empty() {
        let scored: Vec<(usize, usize)> = left
            .iter()
            .map(|&i| (i, naive_count(&views[current], &views[i], tol)))
            .collect();
        let max = scored.iter().map(|s| s.1).max().unwrap();
        let pick = scored
            .iter()
            .filter(|s| s.1 == max)
            .min_by_key(|s| views[s.0].id)
            .unwrap()
            .0;
        order.push(views[pick].id);
        left.retain(|&i| i != pick);
        current = pick;
    }
    order
}

/// Guided filter evaluated window by window, no summed-area tables.
pub fn naive_guided(p: &Grid<f64>, guide: &Grid<f64>, r: usize, eps: f64) -> Grid<f64> {
    let (w, h) = p.dims();
    let window = |x: usize, y: usize| {
        let xs = x.saturating_sub(r)..=(x + r).min(w - 1);
        let ys = y.saturating_sub(r)..=(y + r).min(h - 1);
        (xs, ys)
    };
    let mut a = Grid::new(w, h, 0.0);
    let mut b = Grid::new(w, h, 0.0);
    for y in 0..h {
        for x in 0..w {
            let (xs, ys) = window(x, y);
            let (mut n, mut si, mut sp, mut sii, mut sip) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for yy in ys {
                for xx in xs.clone() {
                    let i = *guide.get(xx, yy);
                    let q = *p.get(xx, yy);
                    n += 1.0;
                    si += i;
                    sp += q;
                    sii += i * i;
                    sip += i * q;
                }
            }
            let mi = si / n;
            let mp = sp / n;
            let var = sii / n - mi * mi;
            let cov = sip / n - mi * mp;
            let ak = cov / (var + eps);
            a.set(x, y, ak);
            b.set(x, y, mp - ak * mi);
        }
    }
    Grid::from_fn(w, h, |x, y| {
        let (xs, ys) = window(x, y);
        let (mut n, mut sa, mut sb) = (0.0, 0.0, 0.0);
        for yy in ys {
            for xx in xs.clone() {
                n += 1.0;
                sa += a.get(xx, yy);
                sb += b.get(xx, yy);
            }
        }
        (sa / n) * guide.get(x, y) + sb / n
    })
}

/// Per-pixel mutual visibility of `dst`'s surface from `src`, by ray casting.
pub fn visibility_oracle(spec: &SceneSpec, dst: &CameraModel, src: &CameraModel) -> Mask {
    let d = RawCam::new(dst);
    let s = RawCam::new(src);
    let cd = d.center();
    let cs = s.center();
    Grid::from_fn(d.w, d.h, |x, y| {
        let Some((t, _)) = trace(spec, &cd, &d.ray(x as f64, y as f64)) else {
            return false;
        };
        let p = cd + d.ray(x as f64, y as f64) * t;
        let (u, v, z) = s.project(&p);
        if !s.inside(u, v, z) {
            return false;
        }
        let to_p = p - cs;
        let dist = to_p.norm();
        match trace(spec, &cs, &(to_p / dist)) {
            Some((hit, _)) => hit >= dist * (1.0 - 1e-9),
            None => false,
        }
    })
}

/// Ground-truth object mask of a camera, by ray casting.
pub fn object_oracle(spec: &SceneSpec, cam: &CameraModel) -> Mask {
    let c = RawCam::new(cam);
    let o = c.center();
    Grid::from_fn(c.w, c.h, |x, y| {
        let d = c.ray(x as f64, y as f64);
        match (trace(spec, &o, &d), &spec.mask_object) {
            (Some((_, true)), MaskObject::Sphere) => true,
            (Some((t, false)), MaskObject::Disk { center, radius, .. }) => {
                ((o + d * t) - Point3::from(*center)).norm() <= *radius
            }
            _ => false,
        }
    })
}
