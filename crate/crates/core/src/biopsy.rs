//! Surgical trajectory to vector art: interpolate, flatten, simplify.

use std::str::FromStr;

use nalgebra::{Matrix3, SymmetricEigen, Vector3};

use crate::error::{Error, Result};
use crate::trajectory::{
    collapse_dwell, point_segment_distance, Point, Point2, Point3, Trajectory,
};

/// Natural cubic spline through 3D points, parameterized by cumulative chord length.
#[derive(Clone, Debug, PartialEq)]
pub struct SplineCurve {
    knots: Vec<f64>,
    points: Vec<Point3>,
    /// Second derivatives at the knots.
    moments: Vec<Point3>,
}

impl SplineCurve {
    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    pub fn total_length(&self) -> f64 {
        self.knots[self.knots.len() - 1]
    }

    /// Evaluates the curve; `s` is clamped to `[0, total_length]`.
    pub fn eval(&self, s: f64) -> Point3 {
        let s = s.clamp(0.0, self.total_length());
        let seg = match self.knots.partition_point(|&k| k <= s) {
            0 => 0,
            i => (i - 1).min(self.knots.len() - 2),
        };
        let (t0, t1) = (self.knots[seg], self.knots[seg + 1]);
        let h = t1 - t0;
        let a = (t1 - s) / h;
        let b = (s - t0) / h;
        let (y0, y1) = (self.points[seg], self.points[seg + 1]);
        let (m0, m1) = (self.moments[seg], self.moments[seg + 1]);
        y0 * a + y1 * b + (m0 * (a * a * a - a) + m1 * (b * b * b - b)) * (h * h / 6.0)
    }
}

/// Interpolates the recorded samples with a natural cubic spline.
///
/// Consecutive duplicate samples are collapsed first; at least four distinct
/// samples must remain.
pub fn interpolate_spline(t: &Trajectory<Point3>) -> Result<SplineCurve> {
    let points = collapse_dwell(t.points());
    if points.len() < 4 {
        return Err(Error::InsufficientPoints {
            needed: 4,
            got: points.len(),
        });
    }
    let n = points.len();
    let mut knots = Vec::with_capacity(n);
    knots.push(0.0);
    for w in points.windows(2) {
        knots.push(knots[knots.len() - 1] + w[0].distance(w[1]));
    }

    // Tridiagonal system for interior moments, natural ends (M0 = Mn-1 = 0).
    // h[i-1] M[i-1] + 2 (h[i-1] + h[i]) M[i] + h[i] M[i+1] = 6 (d[i] - d[i-1])
    let h: Vec<f64> = knots.windows(2).map(|w| w[1] - w[0]).collect();
    let slope: Vec<Point3> = (0..n - 1)
        .map(|i| (points[i + 1] - points[i]) * (1.0 / h[i]))
        .collect();
    let m = n - 2;
    let mut diag = vec![0.0; m];
    let mut rhs = vec![Point3::default(); m];
    for r in 0..m {
        let i = r + 1;
        diag[r] = 2.0 * (h[i - 1] + h[i]);
        rhs[r] = (slope[i] - slope[i - 1]) * 6.0;
    }
    // Thomas algorithm; sub- and super-diagonals are h[i-1] and h[i].
    for r in 1..m {
        let factor = h[r] / diag[r - 1];
        diag[r] -= factor * h[r];
        rhs[r] = rhs[r] - rhs[r - 1] * factor;
    }
    let mut moments = vec![Point3::default(); n];
    for r in (0..m).rev() {
        let upper = if r + 1 < m {
            moments[r + 2] * h[r + 1]
        } else {
            Point3::default()
        };
        moments[r + 1] = (rhs[r] - upper) * (1.0 / diag[r]);
    }

    Ok(SplineCurve {
        knots,
        points,
        moments,
    })
}

/// `m` samples at uniform parameter spacing, both endpoints included.
pub fn sample_curve(c: &SplineCurve, m: usize) -> Result<Trajectory<Point3>> {
    if m < 2 {
        return Err(Error::InvalidArgument(format!(
            "sample count must be at least 2, got {m}"
        )));
    }
    let total = c.total_length();
    let mut pts: Vec<Point3> = (0..m)
        .map(|i| c.eval(total * i as f64 / (m - 1) as f64))
        .collect();
    pts[0] = c.points[0];
    pts[m - 1] = c.points[c.points.len() - 1];
    Trajectory::new(pts)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ProjectionPlane {
    Xy,
    Xz,
    Yz,
    /// Least-squares plane through the points.
    #[default]
    Fitted,
}

impl FromStr for ProjectionPlane {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "xy" => Ok(Self::Xy),
            "xz" => Ok(Self::Xz),
            "yz" => Ok(Self::Yz),
            "fit" | "fitted" => Ok(Self::Fitted),
            other => Err(Error::InvalidArgument(format!("unknown plane `{other}`"))),
        }
    }
}

/// A plane through `origin` with orthonormal in-plane axes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlaneFrame {
    pub origin: Point3,
    pub u: Point3,
    pub v: Point3,
    pub normal: Point3,
}

impl PlaneFrame {
    pub fn project(&self, p: Point3) -> Point2 {
        let d = p - self.origin;
        Point2::new(d.dot(self.u), d.dot(self.v))
    }
}

/// Fits the least-squares plane through `points`.
///
/// The normal is the direction of least variance, oriented so its largest
/// component is positive. The first in-plane axis follows the start→end
/// chord projected into the plane (or the main spread direction if the
/// chord is perpendicular to the plane).
pub fn fit_plane(points: &[Point3]) -> Result<PlaneFrame> {
    if points.len() < 3 {
        return Err(Error::Collinear);
    }
    let n = points.len() as f64;
    let centroid = points.iter().fold(Point3::default(), |a, &p| a + p) * (1.0 / n);
    let mut cov = Matrix3::<f64>::zeros();
    for &p in points {
        let d = p - centroid;
        let v = Vector3::new(d.x, d.y, d.z);
        cov += v * v.transpose();
    }
    cov /= n;
    let eig = SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let (largest, middle) = (eig.eigenvalues[order[0]], eig.eigenvalues[order[1]]);
    if !(largest > 0.0) || middle <= 1e-12 * largest {
        return Err(Error::Collinear);
    }
    let col = |i: usize| {
        let c = eig.eigenvectors.column(i);
        Point3::new(c[0], c[1], c[2])
    };
    let mut normal = col(order[2]);
    let dominant = (0..3)
        .max_by(|&a, &b| normal.coord(a).abs().total_cmp(&normal.coord(b).abs()))
        .unwrap();
    if normal.coord(dominant) < 0.0 {
        normal = -normal;
    }
    normal = normal * (1.0 / normal.norm());

    let chord = points[points.len() - 1] - points[0];
    let in_plane = chord - normal * chord.dot(normal);
    let u = if in_plane.norm() > 1e-9 * largest.sqrt().max(f64::MIN_POSITIVE) {
        in_plane
    } else {
        let spread = col(order[0]);
        spread - normal * spread.dot(normal)
    };
    let u = u * (1.0 / u.norm());
    let v = normal.cross(u);
    Ok(PlaneFrame {
        origin: centroid,
        u,
        v,
        normal,
    })
}

/// Orthogonal projection onto a principal or fitted plane.
pub fn project(t: &Trajectory<Point3>, plane: ProjectionPlane) -> Result<Trajectory<Point2>> {
    match plane {
        ProjectionPlane::Xy => t.map(|p| Point2::new(p.x, p.y)),
        ProjectionPlane::Xz => t.map(|p| Point2::new(p.x, p.z)),
        ProjectionPlane::Yz => t.map(|p| Point2::new(p.y, p.z)),
        ProjectionPlane::Fitted => {
            let frame = fit_plane(t.points())?;
            t.map(|&p| frame.project(p))
        }
    }
}

/// Ramer–Douglas–Peucker simplification.
///
/// Keeps both endpoints and every point farther than `epsilon` from the
/// chord of its current span. `epsilon == 0` returns the input unchanged.
pub fn simplify_rdp<P: Point>(t: &Trajectory<P>, epsilon: f64) -> Result<Trajectory<P>> {
    if !(epsilon >= 0.0) || !epsilon.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "epsilon must be a finite non-negative number, got {epsilon}"
        )));
    }
    if epsilon == 0.0 {
        return Ok(t.clone());
    }
    let pts = t.points();
    let keep = rdp_keep(pts, epsilon);
    t.map_subset(&keep)
}

/// Indices retained by RDP, ascending, always including the endpoints.
pub fn rdp_keep<P: Point>(pts: &[P], epsilon: f64) -> Vec<usize> {
    let last = pts.len() - 1;
    let mut keep = vec![false; pts.len()];
    keep[0] = true;
    keep[last] = true;
    let mut stack = vec![(0usize, last)];
    while let Some((start, end)) = stack.pop() {
        if end <= start + 1 {
            continue;
        }
        let (mut worst, mut worst_d) = (start, -1.0);
        for (i, &p) in pts.iter().enumerate().take(end).skip(start + 1) {
            let d = point_segment_distance(p, pts[start], pts[end]);
            if d > worst_d {
                worst = i;
                worst_d = d;
            }
        }
        if worst_d > epsilon {
            keep[worst] = true;
            stack.push((worst, end));
            stack.push((start, worst));
        }
    }
    keep.iter()
        .enumerate()
        .filter_map(|(i, &k)| k.then_some(i))
        .collect()
}

impl<P: Point> Trajectory<P> {
    fn map_subset(&self, indices: &[usize]) -> Result<Self> {
        let pts = self.points();
        let mut out = Trajectory::with_rate(
            indices.iter().map(|&i| pts[i]).collect(),
            self.sample_rate_hz(),
        )?
        .rendered_as(self.render());
        if let Some(l) = self.label() {
            out = out.labeled(l);
        }
        Ok(out)
    }
}
