//! Recorded trajectories and the geometry shared by every stage.
//!
//! Coordinates are read from plain comma-separated text, one point per line,
//! exactly as the robot controller dumps them:
//!
//! ```text
//! # x, y
//! -0.253, 0.341
//! -0.255, 0.345
//! ```
//!
//! Samples are taken at a fixed rate (10 Hz by default), so the timestamp of
//! point `i` is implicit: `i / sample_rate_hz`.

use std::fmt;
use std::io::{BufRead, Write};
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Nominal acquisition rate of the hand-guided recordings.
pub const DEFAULT_SAMPLE_RATE_HZ: f64 = 10.0;

/// Common vector operations over 2D and 3D points.
pub trait Point:
    Copy
    + fmt::Debug
    + PartialEq
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<f64, Output = Self>
    + Neg<Output = Self>
{
    const DIM: usize;

    fn coord(&self, axis: usize) -> f64;

    /// Builds a point from exactly `DIM` coordinates.
    fn from_coords(coords: &[f64]) -> Self;

    fn dot(self, other: Self) -> f64;

    fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    fn distance(self, other: Self) -> f64 {
        (self - other).norm()
    }

    fn lerp(self, other: Self, t: f64) -> Self {
        self + (other - self) * t
    }

    fn is_finite(&self) -> bool {
        (0..Self::DIM).all(|i| self.coord(i).is_finite())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    /// z-component of the 2D cross product.
    pub fn cross(self, other: Self) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn normalized(self) -> Option<Self> {
        let n = self.norm();
        (n > 0.0 && n.is_finite()).then(|| self * (1.0 / n))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn cross(self, o: Self) -> Self {
        Self::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn xy(self) -> Point2 {
        Point2::new(self.x, self.y)
    }
}

macro_rules! impl_point_ops {
    ($ty:ident, $dim:expr, $($field:ident),+) => {
        impl Add for $ty {
            type Output = Self;
            fn add(self, o: Self) -> Self {
                Self { $($field: self.$field + o.$field),+ }
            }
        }

        impl Sub for $ty {
            type Output = Self;
            fn sub(self, o: Self) -> Self {
                Self { $($field: self.$field - o.$field),+ }
            }
        }

        impl Mul<f64> for $ty {
            type Output = Self;
            fn mul(self, s: f64) -> Self {
                Self { $($field: self.$field * s),+ }
            }
        }

        impl Neg for $ty {
            type Output = Self;
            fn neg(self) -> Self {
                Self { $($field: -self.$field),+ }
            }
        }

        impl Point for $ty {
            const DIM: usize = $dim;

            fn coord(&self, axis: usize) -> f64 {
                [$(self.$field),+][axis]
            }

            fn from_coords(c: &[f64]) -> Self {
                let mut it = c.iter().copied();
                Self { $($field: it.next().expect("coordinate count")),+ }
            }

            fn dot(self, o: Self) -> f64 {
                0.0 $(+ self.$field * o.$field)+
            }
        }
    };
}

impl_point_ops!(Point2, 2, x, y);
impl_point_ops!(Point3, 3, x, y, z);

/// How a trajectory should be drawn when exported.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum RenderHint {
    #[default]
    Stroke,
    Dotted,
}

/// An ordered, fixed-rate sequence of recorded positions.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory<P = Point2> {
    points: Vec<P>,
    sample_rate_hz: f64,
    label: Option<String>,
    render: RenderHint,
}

impl<P: Point> Trajectory<P> {
    /// Validates and wraps a point sequence sampled at [`DEFAULT_SAMPLE_RATE_HZ`].
    pub fn new(points: Vec<P>) -> Result<Self> {
        Self::with_rate(points, DEFAULT_SAMPLE_RATE_HZ)
    }

    pub fn with_rate(points: Vec<P>, sample_rate_hz: f64) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InsufficientPoints {
                needed: 2,
                got: points.len(),
            });
        }
        if !points.iter().all(Point::is_finite) {
            return Err(Error::NonFinite);
        }
        if !(sample_rate_hz > 0.0 && sample_rate_hz.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "sample rate must be positive, got {sample_rate_hz}"
            )));
        }
        Ok(Self {
            points,
            sample_rate_hz,
            label: None,
            render: RenderHint::Stroke,
        })
    }

    pub fn labeled(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn rendered_as(mut self, render: RenderHint) -> Self {
        self.render = render;
        self
    }

    pub fn points(&self) -> &[P] {
        &self.points
    }

    pub fn into_points(self) -> Vec<P> {
        self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    /// Always false; kept for the `len`/`is_empty` convention.
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn label(&self) -> Option<&str> {
        self.label.as_deref()
    }

    pub fn render(&self) -> RenderHint {
        self.render
    }

    pub fn first(&self) -> P {
        self.points[0]
    }

    pub fn last(&self) -> P {
        self.points[self.points.len() - 1]
    }

    /// Acquisition time of sample `index`, in seconds.
    pub fn time_of(&self, index: usize) -> f64 {
        index as f64 / self.sample_rate_hz
    }

    /// Total polyline length.
    pub fn arc_length(&self) -> f64 {
        self.points.windows(2).map(|w| w[0].distance(w[1])).sum()
    }

    /// Maps every point, keeping rate, label and render hint.
    pub fn map<Q: Point>(&self, f: impl FnMut(&P) -> Q) -> Result<Trajectory<Q>> {
        let points = self.points.iter().map(f).collect();
        let mut out = Trajectory::with_rate(points, self.sample_rate_hz)?;
        out.label.clone_from(&self.label);
        out.render = self.render;
        Ok(out)
    }

    fn derived(&self, points: Vec<P>) -> Result<Self> {
        let mut out = Self::with_rate(points, self.sample_rate_hz)?;
        out.label.clone_from(&self.label);
        out.render = self.render;
        Ok(out)
    }
}

/// Cumulative polyline length at every vertex; starts at 0.
pub fn cumulative_lengths<P: Point>(points: &[P]) -> Vec<f64> {
    let mut acc = 0.0;
    let mut out = Vec::with_capacity(points.len());
    out.push(0.0);
    for w in points.windows(2) {
        acc += w[0].distance(w[1]);
        out.push(acc);
    }
    out
}

/// Removes consecutive exact duplicates (dwell samples).
pub fn collapse_dwell<P: Point>(points: &[P]) -> Vec<P> {
    let mut out: Vec<P> = Vec::with_capacity(points.len());
    for &p in points {
        if out.last() != Some(&p) {
            out.push(p);
        }
    }
    out
}

/// Distance from `p` to the closed segment `a`–`b`.
pub fn point_segment_distance<P: Point>(p: P, a: P, b: P) -> f64 {
    let ab = b - a;
    let len2 = ab.dot(ab);
    if len2 == 0.0 {
        return p.distance(a);
    }
    let t = ((p - a).dot(ab) / len2).clamp(0.0, 1.0);
    // The endpoint terms keep the distance exactly zero at a vertex.
    p.distance(a.lerp(b, t))
        .min(p.distance(a))
        .min(p.distance(b))
}

/// Distance from `p` to the nearest point of a polyline.
pub fn point_polyline_distance<P: Point>(p: P, line: &[P]) -> f64 {
    match line {
        [] => f64::INFINITY,
        [only] => p.distance(*only),
        _ => line
            .windows(2)
            .map(|w| point_segment_distance(p, w[0], w[1]))
            .fold(f64::INFINITY, f64::min),
    }
}

/// Reads a trajectory from comma-separated text.
///
/// Blank lines and `#` comments are skipped. A first data line with no
/// numeric field at all is taken as a column header. Dwell points are kept.
pub fn parse_trajectory<P: Point>(source: impl BufRead) -> Result<Trajectory<P>> {
    let mut points = Vec::new();
    let mut seen_data = false;
    for (idx, line) in source.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let text = line.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = text.split(',').map(str::trim).collect();
        let parsed: Vec<Option<f64>> = fields.iter().map(|f| f.parse::<f64>().ok()).collect();
        if !seen_data && parsed.iter().all(Option::is_none) {
            seen_data = true;
            continue;
        }
        seen_data = true;
        if fields.len() != P::DIM {
            return Err(Error::Parse {
                line: lineno,
                message: format!("expected {} values, found {}", P::DIM, fields.len()),
            });
        }
        let mut coords = Vec::with_capacity(P::DIM);
        for (field, value) in fields.iter().zip(&parsed) {
            match value {
                Some(v) if v.is_finite() => coords.push(*v),
                Some(_) => {
                    return Err(Error::Parse {
                        line: lineno,
                        message: format!("non-finite value `{field}`"),
                    })
                }
                None => {
                    return Err(Error::Parse {
                        line: lineno,
                        message: format!("not a number: `{field}`"),
                    })
                }
            }
        }
        points.push(P::from_coords(&coords));
    }
    Trajectory::new(points)
}

pub fn parse_trajectory_str<P: Point>(text: &str) -> Result<Trajectory<P>> {
    parse_trajectory(text.as_bytes())
}

/// Writes one point per line as `x, y` (or `x, y, z`), shortest round-trip decimals.
pub fn write_trajectory<P: Point>(t: &Trajectory<P>, mut out: impl Write) -> Result<()> {
    for p in t.points() {
        for axis in 0..P::DIM {
            if axis > 0 {
                out.write_all(b", ")?;
            }
            write!(out, "{}", p.coord(axis))?;
        }
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn trajectory_to_string<P: Point>(t: &Trajectory<P>) -> String {
    let mut buf = Vec::new();
    write_trajectory(t, &mut buf).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("ascii output")
}

/// Resamples to `m` points equally spaced along the polyline.
///
/// Endpoints are copied exactly; interior points are linearly interpolated.
/// Dwell samples contribute no length and so disappear.
pub fn resample_by_arclength<P: Point>(t: &Trajectory<P>, m: usize) -> Result<Trajectory<P>> {
    if m < 2 {
        return Err(Error::InvalidArgument(format!(
            "resample length must be at least 2, got {m}"
        )));
    }
    let pts = t.points();
    let cum = cumulative_lengths(pts);
    let total = cum[cum.len() - 1];
    if total <= 0.0 {
        return Err(Error::ZeroLength);
    }
    let mut out = Vec::with_capacity(m);
    out.push(t.first());
    let mut seg = 0;
    for i in 1..m - 1 {
        let s = total * i as f64 / (m - 1) as f64;
        while seg + 2 < cum.len() && cum[seg + 1] < s {
            seg += 1;
        }
        let len = cum[seg + 1] - cum[seg];
        let p = if len > 0.0 {
            pts[seg].lerp(pts[seg + 1], ((s - cum[seg]) / len).clamp(0.0, 1.0))
        } else {
            pts[seg + 1]
        };
        out.push(p);
    }
    out.push(t.last());
    t.derived(out)
}

/// Axis-aligned bounding box in the plane.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundingBox {
    pub min: Point2,
    pub max: Point2,
}

impl BoundingBox {
    pub fn from_points(points: impl IntoIterator<Item = Point2>) -> Option<Self> {
        let mut it = points.into_iter();
        let first = it.next()?;
        let mut bb = BoundingBox {
            min: first,
            max: first,
        };
        for p in it {
            bb.include(p);
        }
        Some(bb)
    }

    pub fn include(&mut self, p: Point2) {
        self.min.x = self.min.x.min(p.x);
        self.min.y = self.min.y.min(p.y);
        self.max.x = self.max.x.max(p.x);
        self.max.y = self.max.y.max(p.y);
    }

    pub fn union(&self, other: &Self) -> Self {
        let mut out = *self;
        out.include(other.min);
        out.include(other.max);
        out
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }

    pub fn center(&self) -> Point2 {
        Point2::new(
            0.5 * (self.min.x + self.max.x),
            0.5 * (self.min.y + self.max.y),
        )
    }

    pub fn diagonal(&self) -> f64 {
        self.width().hypot(self.height())
    }

    /// Grows the box by `margin` on every side.
    pub fn expanded(&self, margin: f64) -> Self {
        Self {
            min: Point2::new(self.min.x - margin, self.min.y - margin),
            max: Point2::new(self.max.x + margin, self.max.y + margin),
        }
    }
}

pub fn bounding_box(t: &Trajectory<Point2>) -> BoundingBox {
    BoundingBox::from_points(t.points().iter().copied()).expect("trajectory has points")
}

/// True iff every coordinate lies in the closed interval [-1, 1].
pub fn check_unit_range<P: Point>(t: &Trajectory<P>) -> bool {
    t.points()
        .iter()
        .all(|p| (0..P::DIM).all(|a| (-1.0..=1.0).contains(&p.coord(a))))
}

/// Centers the bounding box on the origin and scales uniformly so the larger
/// half-extent becomes 1.
pub fn normalize_to_unit(t: &Trajectory<Point2>) -> Result<Trajectory<Point2>> {
    let bb = bounding_box(t);
    let half = 0.5 * bb.width().max(bb.height());
    if half <= 0.0 {
        return Err(Error::Degenerate(
            "single-point trajectory cannot be normalized",
        ));
    }
    let c = bb.center();
    let scale = 1.0 / half;
    let pts = t
        .points()
        .iter()
        .map(|&p| {
            let q = (p - c) * scale;
            Point2::new(q.x.clamp(-1.0, 1.0), q.y.clamp(-1.0, 1.0))
        })
        .collect();
    t.derived(pts)
}
