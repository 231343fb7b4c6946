//! Planar helpers shared by the simulator, perception and the fact builder.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Axis-aligned box given by two corners, `(c1x, c1y)` the minimum and
/// `(c2x, c2y)` the maximum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub c1x: f64,
    pub c1y: f64,
    pub c2x: f64,
    pub c2y: f64,
}

impl Aabb {
    pub fn new(c1x: f64, c1y: f64, c2x: f64, c2y: f64) -> Self {
        Aabb {
            c1x: c1x.min(c2x),
            c1y: c1y.min(c2y),
            c2x: c1x.max(c2x),
            c2y: c1y.max(c2y),
        }
    }

    /// Box enclosing a `length` x `width` rectangle centred at `(x, y)` and
    /// rotated by `heading`.
    pub fn oriented(x: f64, y: f64, heading: f64, length: f64, width: f64) -> Self {
        let (s, c) = heading.sin_cos();
        let hx = 0.5 * (length * c.abs() + width * s.abs());
        let hy = 0.5 * (length * s.abs() + width * c.abs());
        Aabb::new(x - hx, y - hy, x + hx, y + hy)
    }

    pub fn from_points(points: impl IntoIterator<Item = (f64, f64)>) -> Option<Self> {
        let mut it = points.into_iter();
        let (x0, y0) = it.next()?;
        let mut b = Aabb::new(x0, y0, x0, y0);
        for (x, y) in it {
            b.c1x = b.c1x.min(x);
            b.c1y = b.c1y.min(y);
            b.c2x = b.c2x.max(x);
            b.c2y = b.c2y.max(y);
        }
        Some(b)
    }

    pub fn center(&self) -> (f64, f64) {
        (0.5 * (self.c1x + self.c2x), 0.5 * (self.c1y + self.c2y))
    }

    pub fn width(&self) -> f64 {
        self.c2x - self.c1x
    }

    pub fn height(&self) -> f64 {
        self.c2y - self.c1y
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.c1x && x <= self.c2x && y >= self.c1y && y <= self.c2y
    }

    pub fn overlaps(&self, other: &Aabb) -> bool {
        self.c1x <= other.c2x && other.c1x <= self.c2x && self.c1y <= other.c2y && other.c1y <= self.c2y
    }

    pub fn inflate(&self, margin: f64) -> Aabb {
        Aabb::new(self.c1x - margin, self.c1y - margin, self.c2x + margin, self.c2y + margin)
    }

    /// Euclidean distance from a point to the box (zero inside).
    pub fn distance_to_point(&self, x: f64, y: f64) -> f64 {
        let dx = (self.c1x - x).max(0.0).max(x - self.c2x);
        let dy = (self.c1y - y).max(0.0).max(y - self.c2y);
        dx.hypot(dy)
    }

    /// Euclidean distance between two boxes (zero when they overlap).
    pub fn distance_to_box(&self, other: &Aabb) -> f64 {
        let dx = (self.c1x - other.c2x).max(0.0).max(other.c1x - self.c2x);
        let dy = (self.c1y - other.c2y).max(0.0).max(other.c1y - self.c2y);
        dx.hypot(dy)
    }

    /// Slab test: does the closed segment `a -> b` touch the box?
    pub fn intersects_segment(&self, a: (f64, f64), b: (f64, f64)) -> bool {
        let mut t0 = 0.0_f64;
        let mut t1 = 1.0_f64;
        let d = (b.0 - a.0, b.1 - a.1);
        for (origin, dir, lo, hi) in [(a.0, d.0, self.c1x, self.c2x), (a.1, d.1, self.c1y, self.c2y)] {
            if dir.abs() < 1e-12 {
                if origin < lo || origin > hi {
                    return false;
                }
            } else {
                let mut ta = (lo - origin) / dir;
                let mut tb = (hi - origin) / dir;
                if ta > tb {
                    std::mem::swap(&mut ta, &mut tb);
                }
                t0 = t0.max(ta);
                t1 = t1.min(tb);
                if t0 > t1 {
                    return false;
                }
            }
        }
        true
    }
}

/// Wraps an angle into `(-pi, pi]`.
pub fn normalize_angle(a: f64) -> f64 {
    let mut r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r -= 2.0 * PI;
    }
    r
}

/// Smallest signed difference `b - a` between two headings.
pub fn angle_diff(a: f64, b: f64) -> f64 {
    normalize_angle(b - a)
}

/// Expresses the offset `(dx, dy)` in a frame whose x axis points along
/// `heading`: returns `(longitudinal, lateral)` with lateral positive to the left.
pub fn to_local(dx: f64, dy: f64, heading: f64) -> (f64, f64) {
    let (s, c) = heading.sin_cos();
    (dx * c + dy * s, -dx * s + dy * c)
}

/// Circular mean of a set of headings; `None` for an empty set.
pub fn mean_heading(headings: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (mut sx, mut sy, mut n) = (0.0, 0.0, 0usize);
    for h in headings {
        sx += h.cos();
        sy += h.sin();
        n += 1;
    }
    (n > 0).then(|| sy.atan2(sx))
}
