//! Cubic Bézier vectorization and SVG output.

use std::fmt::Write as _;
use std::io::Write;

use crate::error::{Error, Result};
use crate::trajectory::{collapse_dwell, BoundingBox, Point, Point2, Trajectory};

/// Control-point distance for a quarter circle drawn with one cubic.
pub const CIRCLE_KAPPA: f64 = 0.552_284_749_830_793_4;

/// Decimal places used for coordinates in emitted SVG.
pub const SVG_DECIMALS: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CubicBez {
    pub p0: Point2,
    pub p1: Point2,
    pub p2: Point2,
    pub p3: Point2,
}

impl CubicBez {
    pub const fn new(p0: Point2, p1: Point2, p2: Point2, p3: Point2) -> Self {
        Self { p0, p1, p2, p3 }
    }

    /// Straight segment with inner control points at the thirds.
    pub fn line(a: Point2, b: Point2) -> Self {
        Self::new(a, a.lerp(b, 1.0 / 3.0), a.lerp(b, 2.0 / 3.0), b)
    }

    pub fn eval(&self, t: f64) -> Point2 {
        let mt = 1.0 - t;
        self.p0 * (mt * mt * mt)
            + self.p1 * (3.0 * mt * mt * t)
            + self.p2 * (3.0 * mt * t * t)
            + self.p3 * (t * t * t)
    }

    pub fn deriv(&self, t: f64) -> Point2 {
        let mt = 1.0 - t;
        (self.p1 - self.p0) * (3.0 * mt * mt)
            + (self.p2 - self.p1) * (6.0 * mt * t)
            + (self.p3 - self.p2) * (3.0 * t * t)
    }

    pub fn deriv2(&self, t: f64) -> Point2 {
        (self.p2 - self.p1 * 2.0 + self.p0) * (6.0 * (1.0 - t))
            + (self.p3 - self.p2 * 2.0 + self.p1) * (6.0 * t)
    }

    pub fn control_points(&self) -> [Point2; 4] {
        [self.p0, self.p1, self.p2, self.p3]
    }

    /// Nearest distance from `p` to the curve: coarse scan, then Newton refinement.
    pub fn distance_to(&self, p: Point2) -> f64 {
        const SCAN: usize = 64;
        let mut best_t = 0.0;
        let mut best = f64::INFINITY;
        for i in 0..=SCAN {
            let t = i as f64 / SCAN as f64;
            let d = self.eval(t).distance(p);
            if d < best {
                best = d;
                best_t = t;
            }
        }
        let mut t = best_t;
        for _ in 0..8 {
            t = newton_step(self, p, t);
            best = best.min(self.eval(t).distance(p));
        }
        best
    }
}

/// Stroke/fill styling for an exported path.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PathStyle {
    pub stroke_width: f64,
    pub dotted: bool,
    pub dot_radius: f64,
}

impl Default for PathStyle {
    fn default() -> Self {
        Self {
            stroke_width: 0.01,
            dotted: false,
            dot_radius: 0.01,
        }
    }
}

/// One or more continuous runs of cubic segments, drawn as a single SVG `path`.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorPath {
    subpaths: Vec<Vec<CubicBez>>,
    pub style: PathStyle,
}

impl VectorPath {
    /// Builds a path, checking that every run is connected end to start.
    pub fn new(subpaths: Vec<Vec<CubicBez>>, style: PathStyle) -> Result<Self> {
        for run in &subpaths {
            if run.is_empty() {
                return Err(Error::InvalidArgument("empty subpath".into()));
            }
            if run.windows(2).any(|w| w[0].p3 != w[1].p0) {
                return Err(Error::Invariant(
                    "subpath segments are not connected".into(),
                ));
            }
            if run
                .iter()
                .flat_map(CubicBez::control_points)
                .any(|p| !p.is_finite())
            {
                return Err(Error::NonFinite);
            }
        }
        Ok(Self { subpaths, style })
    }

    pub fn subpaths(&self) -> &[Vec<CubicBez>] {
        &self.subpaths
    }

    pub fn segments(&self) -> impl Iterator<Item = &CubicBez> {
        self.subpaths.iter().flatten()
    }

    pub fn is_continuous(&self) -> bool {
        self.subpaths
            .iter()
            .all(|run| run.windows(2).all(|w| w[0].p3 == w[1].p0))
    }

    /// Box around all control points (which contains the curve).
    pub fn bounding_box(&self) -> Option<BoundingBox> {
        BoundingBox::from_points(self.segments().flat_map(CubicBez::control_points))
    }

    /// Applies `f` to every control point.
    pub fn transformed(&self, f: impl Fn(Point2) -> Point2) -> Self {
        let subpaths = self
            .subpaths
            .iter()
            .map(|run| {
                run.iter()
                    .map(|c| CubicBez::new(f(c.p0), f(c.p1), f(c.p2), f(c.p3)))
                    .collect()
            })
            .collect();
        Self {
            subpaths,
            style: self.style,
        }
    }

    /// Polyline through the points as straight cubic segments.
    pub fn polyline(points: &[Point2], style: PathStyle) -> Result<Self> {
        let pts = collapse_dwell(points);
        if pts.len() < 2 {
            return Err(Error::Degenerate("polyline needs two distinct points"));
        }
        let run = pts.windows(2).map(|w| CubicBez::line(w[0], w[1])).collect();
        Self::new(vec![run], style)
    }

    /// SVG path data with the y axis negated.
    pub fn to_path_data(&self) -> String {
        let mut d = String::new();
        for (i, run) in self.subpaths.iter().enumerate() {
            if i > 0 {
                d.push(' ');
            }
            let start = run[0].p0;
            write!(d, "M {} {}", fmt_coord(start.x), fmt_coord(-start.y)).unwrap();
            for c in run {
                write!(
                    d,
                    " C {} {} {} {} {} {}",
                    fmt_coord(c.p1.x),
                    fmt_coord(-c.p1.y),
                    fmt_coord(c.p2.x),
                    fmt_coord(-c.p2.y),
                    fmt_coord(c.p3.x),
                    fmt_coord(-c.p3.y)
                )
                .unwrap();
            }
            if self.style.dotted {
                d.push_str(" Z");
            }
        }
        d
    }
}

fn fmt_coord(v: f64) -> String {
    let s = format!("{v:.SVG_DECIMALS$}");
    if s.starts_with('-') && s[1..].bytes().all(|b| b == b'0' || b == b'.') {
        s[1..].to_owned()
    } else {
        s
    }
}

/// Parses path data written by [`VectorPath::to_path_data`] (absolute `M`,
/// `C`, `Z`), undoing the y flip.
pub fn parse_path_data(d: &str) -> Result<Vec<Vec<CubicBez>>> {
    let mut tokens = d.split_whitespace().peekable();
    let mut subpaths: Vec<Vec<CubicBez>> = Vec::new();
    let mut cursor: Option<Point2> = None;
    let number = |tokens: &mut std::iter::Peekable<std::str::SplitWhitespace<'_>>| -> Result<f64> {
        tokens
            .next()
            .and_then(|t| t.parse::<f64>().ok())
            .ok_or_else(|| Error::Format("expected a number in path data".into()))
    };
    while let Some(cmd) = tokens.next() {
        match cmd {
            "M" => {
                let x = number(&mut tokens)?;
                let y = -number(&mut tokens)?;
                cursor = Some(Point2::new(x, y));
                subpaths.push(Vec::new());
            }
            "C" => {
                let p0 = cursor.ok_or_else(|| Error::Format("`C` before `M`".into()))?;
                let mut pts = [Point2::default(); 3];
                for p in &mut pts {
                    let x = number(&mut tokens)?;
                    let y = -number(&mut tokens)?;
                    *p = Point2::new(x, y);
                }
                subpaths
                    .last_mut()
                    .expect("M precedes C")
                    .push(CubicBez::new(p0, pts[0], pts[1], pts[2]));
                cursor = Some(pts[2]);
            }
            "Z" | "z" => {}
            other => return Err(Error::Format(format!("unsupported path command `{other}`"))),
        }
    }
    Ok(subpaths)
}

/// Draws one filled circle per point, each as four quarter-circle cubics.
pub fn to_dotted(points: &[Point2], dot_radius: f64) -> Result<VectorPath> {
    if points.is_empty() {
        return Err(Error::InsufficientPoints { needed: 1, got: 0 });
    }
    if !(dot_radius > 0.0 && dot_radius.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "dot radius must be positive, got {dot_radius}"
        )));
    }
    let subpaths = points.iter().map(|&c| circle(c, dot_radius)).collect();
    VectorPath::new(
        subpaths,
        PathStyle {
            dotted: true,
            dot_radius,
            ..PathStyle::default()
        },
    )
}

fn circle(c: Point2, r: f64) -> Vec<CubicBez> {
    let k = CIRCLE_KAPPA * r;
    let dirs = [
        Point2::new(1.0, 0.0),
        Point2::new(0.0, 1.0),
        Point2::new(-1.0, 0.0),
        Point2::new(0.0, -1.0),
    ];
    (0..4)
        .map(|i| {
            let a = dirs[i];
            let b = dirs[(i + 1) % 4];
            CubicBez::new(c + a * r, c + a * r + b * k, c + b * r + a * k, c + b * r)
        })
        .collect()
}

/// Fits a piecewise cubic Bézier to the points.
///
/// Each span gets a least-squares fit with fixed end tangents; if some input
/// point lies farther than `tolerance` from the fitted segment, the span is
/// split at the worst point and both halves are fitted again.
pub fn fit_bezier(t: &Trajectory<Point2>, tolerance: f64) -> Result<VectorPath> {
    fit_bezier_points(t.points(), tolerance)
}

pub fn fit_bezier_points(points: &[Point2], tolerance: f64) -> Result<VectorPath> {
    if !(tolerance > 0.0 && tolerance.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "tolerance must be positive, got {tolerance}"
        )));
    }
    let pts = collapse_dwell(points);
    if pts.len() < 2 {
        return Err(Error::Degenerate("all points are identical"));
    }
    if pts.len() == 2 {
        return VectorPath::polyline(&pts, PathStyle::default());
    }
    let left = end_tangent(pts.iter().copied());
    let right = end_tangent(pts.iter().rev().copied());
    let mut run = Vec::new();
    fit_span(&pts, left, right, tolerance, &mut run);
    VectorPath::new(vec![run], PathStyle::default())
}

fn fit_span(pts: &[Point2], left: Point2, right: Point2, tol: f64, out: &mut Vec<CubicBez>) {
    let (first, last) = (pts[0], pts[pts.len() - 1]);
    if pts.len() == 2 {
        let d = first.distance(last) / 3.0;
        out.push(CubicBez::new(
            first,
            first + left * d,
            last + right * d,
            last,
        ));
        return;
    }

    let mut u = chord_parameters(pts);
    let mut bez = generate_bezier(pts, &u, left, right);
    let (mut err, mut split) = max_error(pts, &bez, &u);
    if err <= tol {
        out.push(bez);
        return;
    }
    // Chord-length parameters are only a first guess; Newton passes move each
    // point toward its nearest curve parameter.
    for _ in 0..REPARAM_PASSES {
        let u2 = reparameterize(pts, &bez, &u);
        let bez2 = generate_bezier(pts, &u2, left, right);
        let (err2, split2) = max_error(pts, &bez2, &u2);
        if !(err2 < err * 0.999) {
            break;
        }
        (u, bez, err, split) = (u2, bez2, err2, split2);
        if err <= tol {
            out.push(bez);
            return;
        }
    }

    let split = split.clamp(1, pts.len() - 2);
    let center = (pts[split - 1] - pts[split + 1])
        .normalized()
        .or_else(|| {
            let d = pts[split] - pts[split - 1];
            Point2::new(-d.y, d.x).normalized()
        })
        .unwrap_or(left);
    fit_span(&pts[..=split], left, center, tol, out);
    fit_span(&pts[split..], -center, right, tol, out);
}

const REPARAM_PASSES: usize = 200;

/// Unit tangent at the first point: derivative of the chord-parameterized
/// interpolant through the first few points, or the first chord if that
/// turns back on itself.
fn end_tangent(pts: impl Iterator<Item = Point2>) -> Point2 {
    let head: Vec<Point2> = pts.take(3).collect();
    let chord = (head[1] - head[0])
        .normalized()
        .expect("distinct neighbours");
    if head.len() < 3 {
        return chord;
    }
    let s1 = head[0].distance(head[1]);
    let s2 = s1 + head[1].distance(head[2]);
    let d = head[0] * (-(s1 + s2) / (s1 * s2))
        + head[1] * (s2 / (s1 * (s2 - s1)))
        + head[2] * (-s1 / (s2 * (s2 - s1)));
    match d.normalized() {
        Some(t) if t.dot(chord) > 0.5 => t,
        _ => chord,
    }
}

fn chord_parameters(pts: &[Point2]) -> Vec<f64> {
    let mut u = Vec::with_capacity(pts.len());
    u.push(0.0);
    for w in pts.windows(2) {
        u.push(u[u.len() - 1] + w[0].distance(w[1]));
    }
    let total = u[u.len() - 1];
    u.iter_mut().for_each(|v| *v /= total);
    u
}

/// Least-squares tangent magnitudes for fixed endpoints and tangent directions.
fn generate_bezier(pts: &[Point2], u: &[f64], left: Point2, right: Point2) -> CubicBez {
    let (first, last) = (pts[0], pts[pts.len() - 1]);
    let (mut c00, mut c01, mut c11, mut x0, mut x1) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (&p, &t) in pts.iter().zip(u) {
        let mt = 1.0 - t;
        let b0 = mt * mt * mt;
        let b1 = 3.0 * mt * mt * t;
        let b2 = 3.0 * mt * t * t;
        let b3 = t * t * t;
        let a0 = left * b1;
        let a1 = right * b2;
        c00 += a0.dot(a0);
        c01 += a0.dot(a1);
        c11 += a1.dot(a1);
        let tmp = p - (first * (b0 + b1) + last * (b2 + b3));
        x0 += a0.dot(tmp);
        x1 += a1.dot(tmp);
    }
    let det = c00 * c11 - c01 * c01;
    let (mut alpha_l, mut alpha_r) = if det.abs() > 1e-12 * (c00 * c11).abs().max(f64::MIN_POSITIVE)
    {
        ((x0 * c11 - x1 * c01) / det, (c00 * x1 - c01 * x0) / det)
    } else {
        (0.0, 0.0)
    };
    let seg_len = first.distance(last);
    let eps = 1e-6 * seg_len;
    // Handles longer than twice the chord mean a looped or cusped solution.
    let long = 2.0 * seg_len;
    if alpha_l < eps || alpha_r < eps || alpha_l > long || alpha_r > long {
        alpha_l = seg_len / 3.0;
        alpha_r = seg_len / 3.0;
    }
    CubicBez::new(first, first + left * alpha_l, last + right * alpha_r, last)
}

fn max_error(pts: &[Point2], bez: &CubicBez, u: &[f64]) -> (f64, usize) {
    let mut worst = (0.0, pts.len() / 2);
    for i in 1..pts.len() - 1 {
        let d = bez.eval(u[i]).distance(pts[i]);
        if d > worst.0 {
            worst = (d, i);
        }
    }
    worst
}

fn reparameterize(pts: &[Point2], bez: &CubicBez, u: &[f64]) -> Vec<f64> {
    pts.iter()
        .zip(u)
        .map(|(&p, &t)| newton_step(bez, p, t))
        .collect()
}

fn newton_step(bez: &CubicBez, p: Point2, t: f64) -> f64 {
    let d = bez.eval(t) - p;
    let d1 = bez.deriv(t);
    let d2 = bez.deriv2(t);
    let num = d.dot(d1);
    let den = d1.dot(d1) + d.dot(d2);
    if den.abs() < 1e-18 {
        return t;
    }
    (t - num / den).clamp(0.0, 1.0)
}

/// Writes an SVG 1.1 document with one `path` element per input path.
///
/// Workspace y points up; the document negates y and uses a matching viewBox,
/// so the drawing appears upright.
pub fn export_svg(paths: &[VectorPath], canvas: &BoundingBox, mut out: impl Write) -> Result<()> {
    out.write_all(svg_document(paths, canvas)?.as_bytes())?;
    Ok(())
}

pub fn svg_document(paths: &[VectorPath], canvas: &BoundingBox) -> Result<String> {
    if paths.is_empty() {
        return Err(Error::InvalidArgument("nothing to export".into()));
    }
    let (vx, vy, vw, vh) = outward_grid(view_box(canvas));
    let mut s = String::new();
    s.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" viewBox=\"{} {} {} {}\">",
        fmt_coord(vx),
        fmt_coord(vy),
        fmt_coord(vw),
        fmt_coord(vh)
    )
    .unwrap();
    for p in paths {
        let style = if p.style.dotted {
            "fill=\"black\" stroke=\"none\"".to_owned()
        } else {
            format!(
                "fill=\"none\" stroke=\"black\" stroke-width=\"{}\" stroke-linecap=\"round\" stroke-linejoin=\"round\"",
                fmt_coord(p.style.stroke_width)
            )
        };
        writeln!(s, "  <path {style} d=\"{}\"/>", p.to_path_data()).unwrap();
    }
    s.push_str("</svg>\n");
    Ok(s)
}

/// viewBox `(x, y, width, height)` in flipped SVG coordinates; zero extents
/// are widened so the box is never empty.
pub fn view_box(canvas: &BoundingBox) -> (f64, f64, f64, f64) {
    let mut w = canvas.width();
    let mut h = canvas.height();
    let fallback = w.max(h).max(1e-3);
    let mut min = canvas.min;
    if !(w > 0.0) {
        min.x -= fallback / 2.0;
        w = fallback;
    }
    if !(h > 0.0) {
        min.y -= fallback / 2.0;
        h = fallback;
    }
    (min.x, -(min.y + h), w, h)
}

/// Snaps a viewBox outward to the written precision so the printed box still
/// holds every printed coordinate.
fn outward_grid((x, y, w, h): (f64, f64, f64, f64)) -> (f64, f64, f64, f64) {
    let unit = 10f64.powi(SVG_DECIMALS as i32);
    // The slack keeps already-snapped values from moving by one unit.
    let lo = |v: f64| (v * unit + 1e-6).floor();
    let hi = |v: f64| (v * unit - 1e-6).ceil();
    let (x0, y0) = (lo(x), lo(y));
    let (x1, y1) = (hi(x + w).max(x0 + 1.0), hi(y + h).max(y0 + 1.0));
    (x0 / unit, y0 / unit, (x1 - x0) / unit, (y1 - y0) / unit)
}

/// Reads back the paths of a document produced by [`export_svg`].
pub fn import_svg(text: &str) -> Result<(Vec<VectorPath>, BoundingBox)> {
    let doc = roxmltree::Document::parse(text).map_err(|e| Error::Format(e.to_string()))?;
    let root = doc.root_element();
    if root.tag_name().name() != "svg" {
        return Err(Error::Format("root element is not `svg`".into()));
    }
    let vb: Vec<f64> = root
        .attribute("viewBox")
        .ok_or_else(|| Error::Format("missing viewBox".into()))?
        .split_whitespace()
        .map(str::parse)
        .collect::<Result<_, _>>()
        .map_err(|e: std::num::ParseFloatError| Error::Format(e.to_string()))?;
    let [vx, vy, vw, vh] = vb[..] else {
        return Err(Error::Format("viewBox needs four numbers".into()));
    };
    let canvas = BoundingBox {
        min: Point2::new(vx, -(vy + vh)),
        max: Point2::new(vx + vw, -vy),
    };
    let mut paths = Vec::new();
    for node in root.children().filter(|n| n.has_tag_name("path")) {
        let d = node
            .attribute("d")
            .ok_or_else(|| Error::Format("path without `d`".into()))?;
        let dotted = node.attribute("fill") == Some("black");
        let stroke_width = node
            .attribute("stroke-width")
            .and_then(|w| w.parse().ok())
            .unwrap_or(PathStyle::default().stroke_width);
        let subpaths = parse_path_data(d)?;
        let dot_radius = if dotted {
            subpaths
                .first()
                .and_then(|run| run.first())
                .map(|c| c.p0.distance(c.p3) / std::f64::consts::SQRT_2)
                .unwrap_or(PathStyle::default().dot_radius)
        } else {
            PathStyle::default().dot_radius
        };
        paths.push(VectorPath::new(
            subpaths,
            PathStyle {
                stroke_width,
                dotted,
                dot_radius,
            },
        )?);
    }
    Ok((paths, canvas))
}
