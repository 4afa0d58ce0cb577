//! Rotated-cuboid geometry: corners, bird's-eye-view polygons, convex
//! clipping, IoU and point-in-box counting.
//!
//! Yaw is measured counter-clockwise from the +x axis and `l` runs along the
//! rotated local x axis. Boxes never pitch or roll.

use crate::model::{Box3D, Point3, PointCloud};

/// Vertices closer than this (meters) are merged after clipping.
pub const MERGE_EPS: f64 = 1e-9;
/// Clipped polygons with less area than this (m²) are reported empty.
pub const AREA_EPS: f64 = 1e-12;
/// Slack on the half-extents in [`contains_point`].
pub const BOUNDARY_EPS: f64 = 1e-9;

pub type Point2 = [f64; 2];

fn cross(o: Point2, a: Point2, b: Point2) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

fn signed_area(vertices: &[Point2]) -> f64 {
    let n = vertices.len();
    let mut twice = 0.0;
    for i in 0..n {
        let [x0, y0] = vertices[i];
        let [x1, y1] = vertices[(i + 1) % n];
        twice += x0 * y1 - x1 * y0;
    }
    twice / 2.0
}

/// Convex polygon with counter-clockwise vertices, or the empty polygon.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConvexPolygon2 {
    vertices: Vec<Point2>,
}

impl ConvexPolygon2 {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Builds a polygon from the vertices of a convex outline in either
    /// orientation. Near-duplicate vertices are merged; outlines with fewer
    /// than three distinct vertices or negligible area become empty.
    pub fn from_vertices(vertices: Vec<Point2>) -> Self {
        let mut merged: Vec<Point2> = Vec::with_capacity(vertices.len());
        for v in vertices {
            if let Some(last) = merged.last() {
                if (v[0] - last[0]).hypot(v[1] - last[1]) < MERGE_EPS {
                    continue;
                }
            }
            merged.push(v);
        }
        while merged.len() > 1 {
            let (first, last) = (merged[0], merged[merged.len() - 1]);
            if (first[0] - last[0]).hypot(first[1] - last[1]) < MERGE_EPS {
                merged.pop();
            } else {
                break;
            }
        }
        if merged.len() < 3 {
            return Self::empty();
        }
        let area = signed_area(&merged);
        if area.abs() < AREA_EPS {
            return Self::empty();
        }
        if area < 0.0 {
            merged.reverse();
        }
        Self { vertices: merged }
    }

    /// Axis-aligned rectangle `[x0, x1] × [y0, y1]`.
    pub fn rectangle(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self::from_vertices(vec![[x0, y0], [x1, y0], [x1, y1], [x0, y1]])
    }

    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn area(&self) -> f64 {
        if self.is_empty() {
            0.0
        } else {
            signed_area(&self.vertices).abs()
        }
    }

    /// Sutherland–Hodgman clip of `self` against every edge of `other`.
    pub fn intersection(&self, other: &ConvexPolygon2) -> ConvexPolygon2 {
        if self.is_empty() || other.is_empty() {
            return Self::empty();
        }
        let mut subject = self.vertices.clone();
        let clip = &other.vertices;
        for i in 0..clip.len() {
            if subject.is_empty() {
                break;
            }
            let (a, b) = (clip[i], clip[(i + 1) % clip.len()]);
            let input = std::mem::take(&mut subject);
            for j in 0..input.len() {
                let s = input[(j + input.len() - 1) % input.len()];
                let e = input[j];
                let ds = cross(a, b, s);
                let de = cross(a, b, e);
                if de >= 0.0 {
                    if ds < 0.0 {
                        subject.push(edge_crossing(s, e, ds, de));
                    }
                    subject.push(e);
                } else if ds >= 0.0 {
                    subject.push(edge_crossing(s, e, ds, de));
                }
            }
        }
        Self::from_vertices(subject)
    }
}

fn edge_crossing(s: Point2, e: Point2, ds: f64, de: f64) -> Point2 {
    let t = ds / (ds - de);
    [s[0] + (e[0] - s[0]) * t, s[1] + (e[1] - s[1]) * t]
}

/// Corner `k` of the footprint in the box's local frame, counter-clockwise
/// starting at `(+l/2, +w/2)`.
fn local_footprint(b: &Box3D) -> [Point2; 4] {
    let (hl, hw) = (b.l / 2.0, b.w / 2.0);
    [[hl, hw], [-hl, hw], [-hl, -hw], [hl, -hw]]
}

/// The eight corners of `b`. Corners `0..4` lie on the bottom face and `4..8`
/// on the top face; within each face the order is counter-clockwise seen from
/// above, starting at local `(+l/2, +w/2)`. Corner `k + 4` sits above `k`.
pub fn box_corners(b: &Box3D) -> [[f64; 3]; 8] {
    let (sin, cos) = b.yaw.sin_cos();
    let mut out = [[0.0; 3]; 8];
    for (k, [lx, ly]) in local_footprint(b).into_iter().enumerate() {
        let x = b.cx + cos * lx - sin * ly;
        let y = b.cy + sin * lx + cos * ly;
        out[k] = [x, y, b.bottom()];
        out[k + 4] = [x, y, b.top()];
    }
    out
}

/// Bird's-eye-view footprint of `b`.
pub fn bev_polygon(b: &Box3D) -> ConvexPolygon2 {
    let c = box_corners(b);
    ConvexPolygon2::from_vertices(vec![
        [c[0][0], c[0][1]],
        [c[1][0], c[1][1]],
        [c[2][0], c[2][1]],
        [c[3][0], c[3][1]],
    ])
}

/// Footprint intersection area, clamped to the smaller footprint.
pub fn bev_intersection_area(a: &Box3D, b: &Box3D) -> f64 {
    let inter = bev_polygon(a).intersection(&bev_polygon(b)).area();
    inter.min(a.l * a.w).min(b.l * b.w)
}

fn ratio(inter: f64, total_a: f64, total_b: f64) -> f64 {
    let union = total_a + total_b - inter;
    if union <= 0.0 || inter <= 0.0 {
        0.0
    } else {
        (inter / union).clamp(0.0, 1.0)
    }
}

pub fn iou_bev(a: &Box3D, b: &Box3D) -> f64 {
    if a == b {
        return 1.0;
    }
    ratio(bev_intersection_area(a, b), a.l * a.w, b.l * b.w)
}

/// Vertical overlap of the two boxes' z-extents.
pub fn overlap_z(a: &Box3D, b: &Box3D) -> f64 {
    (a.top().min(b.top()) - a.bottom().max(b.bottom())).max(0.0)
}

pub fn iou_3d(a: &Box3D, b: &Box3D) -> f64 {
    if a == b {
        return 1.0;
    }
    let dz = overlap_z(a, b);
    if dz <= 0.0 {
        return 0.0;
    }
    let inter = (bev_intersection_area(a, b) * dz)
        .min(a.volume())
        .min(b.volume());
    ratio(inter, a.volume(), b.volume())
}

/// Expresses `(x, y, z)` in the box's local frame, relative to its center.
pub fn to_box_frame(b: &Box3D, x: f64, y: f64, z: f64) -> [f64; 3] {
    let (sin, cos) = b.yaw.sin_cos();
    let dx = x - b.cx;
    let dy = y - b.cy;
    [cos * dx + sin * dy, -sin * dx + cos * dy, z - b.cz]
}

/// Inside-or-on-boundary test.
pub fn contains_point(b: &Box3D, x: f64, y: f64, z: f64) -> bool {
    let [lx, ly, lz] = to_box_frame(b, x, y, z);
    lx.abs() <= b.l / 2.0 + BOUNDARY_EPS
        && ly.abs() <= b.w / 2.0 + BOUNDARY_EPS
        && lz.abs() <= b.h / 2.0 + BOUNDARY_EPS
}

pub fn point_in_box(b: &Box3D, p: &Point3) -> bool {
    contains_point(b, p.x as f64, p.y as f64, p.z as f64)
}

pub fn points_in_box(cloud: &PointCloud, b: &Box3D) -> usize {
    cloud.points.iter().filter(|p| point_in_box(b, p)).count()
}

/// Entry parameter `t ∈ [0, 1]` at which the segment `p0 → p1` first meets
/// the box, if it does.
pub fn segment_box_entry(b: &Box3D, p0: [f64; 3], p1: [f64; 3]) -> Option<f64> {
    let a = to_box_frame(b, p0[0], p0[1], p0[2]);
    let c = to_box_frame(b, p1[0], p1[1], p1[2]);
    let half = [b.l / 2.0, b.w / 2.0, b.h / 2.0];
    let (mut t0, mut t1) = (0.0f64, 1.0f64);
    for axis in 0..3 {
        let d = c[axis] - a[axis];
        if d.abs() < 1e-15 {
            if a[axis].abs() > half[axis] {
                return None;
            }
            continue;
        }
        let mut lo = (-half[axis] - a[axis]) / d;
        let mut hi = (half[axis] - a[axis]) / d;
        if lo > hi {
            std::mem::swap(&mut lo, &mut hi);
        }
        t0 = t0.max(lo);
        t1 = t1.min(hi);
        if t0 > t1 {
            return None;
        }
    }
    Some(t0)
}
