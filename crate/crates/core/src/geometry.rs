//! BEV grid geometry, box types and rotated BEV IoU.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{snapped_floor, Real};

/// Which point of a cell stands in for the cell in distance computations.
///
/// `Origin` is `x_min + j * dx`; `Midpoint` adds half a cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellAnchor {
    #[default]
    Origin,
    Midpoint,
}

/// Axis-aligned BEV raster: extents in meters and cell sizes `dx`, `dy`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec<T> {
    x_min: T,
    x_max: T,
    y_min: T,
    y_max: T,
    dx: T,
    dy: T,
    nx: usize,
    ny: usize,
}

impl<T: Real> GridSpec<T> {
    pub fn new(x_min: T, x_max: T, y_min: T, y_max: T, dx: T, dy: T) -> Result<Self> {
        let all = [x_min, x_max, y_min, y_max, dx, dy];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("grid", "non-finite extent or cell size"));
        }
        if !(x_max > x_min) || !(y_max > y_min) {
            return Err(Error::invalid("grid", "extents must satisfy max > min"));
        }
        if !(dx > T::zero()) || !(dy > T::zero()) {
            return Err(Error::invalid("grid", "cell sizes must be positive"));
        }
        let nx = ((x_max - x_min) / dx).round().to_usize().unwrap_or(0);
        let ny = ((y_max - y_min) / dy).round().to_usize().unwrap_or(0);
        if nx == 0 || ny == 0 {
            return Err(Error::invalid("grid", "extent is smaller than half a cell"));
        }
        Ok(Self {
            x_min,
            x_max,
            y_min,
            y_max,
            dx,
            dy,
            nx,
            ny,
        })
    }

    /// Detection range used for evaluation: x in [-96, 96], y in [-48, 48],
    /// at 0.6 m cells.
    pub fn detection_range() -> Self {
        Self::new(
            T::lit(-96.0),
            T::lit(96.0),
            T::lit(-48.0),
            T::lit(48.0),
            T::lit(0.6),
            T::lit(0.6),
        )
        .expect("static grid is valid")
    }

    pub fn x_min(&self) -> T {
        self.x_min
    }
    pub fn x_max(&self) -> T {
        self.x_max
    }
    pub fn y_min(&self) -> T {
        self.y_min
    }
    pub fn y_max(&self) -> T {
        self.y_max
    }
    pub fn dx(&self) -> T {
        self.dx
    }
    pub fn dy(&self) -> T {
        self.dy
    }
    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn ny(&self) -> usize {
        self.ny
    }
    pub fn cell_count(&self) -> usize {
        self.nx * self.ny
    }

    pub fn contains(&self, x: T, y: T) -> bool {
        self.quantize(x, y).is_ok()
    }

    /// Cell indices `(floor((x - x_min)/dx), floor((y - y_min)/dy))`.
    ///
    /// Points outside the raster are an error, never clamped.
    pub fn quantize(&self, x: T, y: T) -> Result<(usize, usize)> {
        let oob = || Error::OutOfBounds {
            x: x.to_f64_lossy(),
            y: y.to_f64_lossy(),
            x_min: self.x_min.to_f64_lossy(),
            x_max: self.x_max.to_f64_lossy(),
            y_min: self.y_min.to_f64_lossy(),
            y_max: self.y_max.to_f64_lossy(),
        };
        if !x.is_finite() || !y.is_finite() {
            return Err(oob());
        }
        let j = snapped_floor(x - self.x_min, self.dx);
        let k = snapped_floor(y - self.y_min, self.dy);
        if j < T::zero() || k < T::zero() {
            return Err(oob());
        }
        let (j, k) = (j.to_usize().ok_or_else(oob)?, k.to_usize().ok_or_else(oob)?);
        if j >= self.nx || k >= self.ny {
            return Err(oob());
        }
        Ok((j, k))
    }

    /// Cell origin `(x_min + j*dx, y_min + k*dy)`, the point the BEV distance
    /// of the density weights is measured from.
    pub fn cell_center(&self, j: usize, k: usize) -> Result<(T, T)> {
        self.cell_point(j, k, CellAnchor::Origin)
    }

    pub fn cell_point(&self, j: usize, k: usize, anchor: CellAnchor) -> Result<(T, T)> {
        if j >= self.nx || k >= self.ny {
            return Err(Error::IndexOutOfRange {
                j,
                k,
                nx: self.nx,
                ny: self.ny,
            });
        }
        Ok(self.cell_point_unchecked(j, k, anchor))
    }

    #[inline]
    pub(crate) fn cell_point_unchecked(&self, j: usize, k: usize, anchor: CellAnchor) -> (T, T) {
        let shift = match anchor {
            CellAnchor::Origin => T::zero(),
            CellAnchor::Midpoint => T::lit(0.5),
        };
        (
            self.x_min + (T::from_usize_lossy(j) + shift) * self.dx,
            self.y_min + (T::from_usize_lossy(k) + shift) * self.dy,
        )
    }
}

/// Wraps an angle into `[-pi, pi)`.
pub fn normalize_yaw<T: Real>(yaw: T) -> T {
    let two_pi = T::TAU();
    let mut y = yaw - two_pi * ((yaw + T::PI()) / two_pi).floor();
    if y >= T::PI() {
        y -= two_pi;
    }
    if y < -T::PI() {
        y = -T::PI();
    }
    y
}

/// Rotated rectangle footprint on the ground plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxBev<T> {
    pub cx: T,
    pub cy: T,
    pub length: T,
    pub width: T,
    pub yaw: T,
}

impl<T: Real> BoxBev<T> {
    pub fn new(cx: T, cy: T, length: T, width: T, yaw: T) -> Result<Self> {
        if !(length > T::zero()) || !(width > T::zero()) {
            return Err(Error::invalid("box", "length and width must be positive"));
        }
        if !cx.is_finite() || !cy.is_finite() || !yaw.is_finite() || !length.is_finite() || !width.is_finite() {
            return Err(Error::invalid("box", "non-finite field"));
        }
        Ok(Self {
            cx,
            cy,
            length,
            width,
            yaw: normalize_yaw(yaw),
        })
    }

    pub fn area(&self) -> T {
        self.length * self.width
    }

    /// Corners in counter-clockwise order.
    pub fn corners(&self) -> [[T; 2]; 4] {
        let half = T::lit(0.5);
        let (hl, hw) = (self.length * half, self.width * half);
        let (s, c) = self.yaw.sin_cos();
        let local = [[hl, -hw], [hl, hw], [-hl, hw], [-hl, -hw]];
        local.map(|[u, v]| [self.cx + u * c - v * s, self.cy + u * s + v * c])
    }
}

/// Upright 3D box: center, size and heading about +z.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Box3D<T> {
    pub cx: T,
    pub cy: T,
    pub cz: T,
    pub length: T,
    pub width: T,
    pub height: T,
    pub yaw: T,
}

impl<T: Real> Box3D<T> {
    pub fn new(cx: T, cy: T, cz: T, length: T, width: T, height: T, yaw: T) -> Result<Self> {
        if !(length > T::zero()) || !(width > T::zero()) || !(height > T::zero()) {
            return Err(Error::invalid("box", "all sizes must be positive"));
        }
        let fields = [cx, cy, cz, length, width, height, yaw];
        if fields.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("box", "non-finite field"));
        }
        Ok(Self {
            cx,
            cy,
            cz,
            length,
            width,
            height,
            yaw: normalize_yaw(yaw),
        })
    }

    pub fn bev(&self) -> BoxBev<T> {
        BoxBev {
            cx: self.cx,
            cy: self.cy,
            length: self.length,
            width: self.width,
            yaw: self.yaw,
        }
    }

    pub fn center_bev(&self) -> [T; 2] {
        [self.cx, self.cy]
    }
}

/// Overlap area below this is treated as no overlap.
pub const AREA_EPS: f64 = 1e-12;

/// Rotated BEV intersection over union via convex polygon clipping.
pub fn bev_iou<T: Real>(a: &BoxBev<T>, b: &BoxBev<T>) -> T {
    if a == b {
        return T::one();
    }
    // Boxes whose circumscribed circles are apart cannot overlap.
    let half = T::lit(0.5);
    let ra = half * a.length.hypot(a.width);
    let rb = half * b.length.hypot(b.width);
    if (a.cx - b.cx).hypot(a.cy - b.cy) > ra + rb {
        return T::zero();
    }
    let inter = polygon_area(&clip_convex(&a.corners(), &b.corners()));
    if inter <= T::lit(AREA_EPS) {
        return T::zero();
    }
    let union = a.area() + b.area() - inter;
    (inter / union).max(T::zero()).min(T::one())
}

fn cross<T: Real>(o: [T; 2], a: [T; 2], b: [T; 2]) -> T {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

fn line_intersection<T: Real>(p: [T; 2], q: [T; 2], a: [T; 2], b: [T; 2]) -> [T; 2] {
    // Point on segment p->q crossing the line through a->b.
    let dp = cross(a, b, p);
    let dq = cross(a, b, q);
    let t = dp / (dp - dq);
    [p[0] + (q[0] - p[0]) * t, p[1] + (q[1] - p[1]) * t]
}

/// Sutherland–Hodgman: clips `subject` against the convex CCW polygon `clip`.
pub fn clip_convex<T: Real>(subject: &[[T; 2]], clip: &[[T; 2]]) -> Vec<[T; 2]> {
    let mut output: Vec<[T; 2]> = subject.to_vec();
    for i in 0..clip.len() {
        if output.is_empty() {
            break;
        }
        let a = clip[i];
        let b = clip[(i + 1) % clip.len()];
        let input = std::mem::take(&mut output);
        let mut prev = *input.last().expect("non-empty");
        let mut prev_in = cross(a, b, prev) >= T::zero();
        for &cur in &input {
            let cur_in = cross(a, b, cur) >= T::zero();
            if cur_in {
                if !prev_in {
                    output.push(line_intersection(prev, cur, a, b));
                }
                output.push(cur);
            } else if prev_in {
                output.push(line_intersection(prev, cur, a, b));
            }
            prev = cur;
            prev_in = cur_in;
        }
    }
    output
}

/// Shoelace area (absolute value).
pub fn polygon_area<T: Real>(poly: &[[T; 2]]) -> T {
    if poly.len() < 3 {
        return T::zero();
    }
    let mut acc = T::zero();
    for i in 0..poly.len() {
        let p = poly[i];
        let q = poly[(i + 1) % poly.len()];
        acc += p[0] * q[1] - q[0] * p[1];
    }
    (acc * T::lit(0.5)).abs()
}
