//! Gaussian mixture generalization of several demonstrations of one letter.
//!
//! All demonstration points are pooled into a single planar point cloud and a
//! `k`-component mixture is fitted by expectation-maximization. Each component
//! pulls nearby samples toward its center; the ordered centers then form the
//! generalized stroke.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::trajectory::{cumulative_lengths, resample_by_arclength, Point, Point2, Trajectory};

/// Eigenvalue floor relative to the global per-axis data variance.
pub const COVARIANCE_FLOOR_RATIO: f64 = 1e-6;

const MODEL_HEADER: &str = "trajart-gmm";
const MODEL_VERSION: u32 = 1;

/// Symmetric 2×2 matrix `[[xx, xy], [xy, yy]]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cov2 {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl Cov2 {
    pub const fn new(xx: f64, xy: f64, yy: f64) -> Self {
        Self { xx, xy, yy }
    }

    pub const fn isotropic(var: f64) -> Self {
        Self::new(var, 0.0, var)
    }

    pub fn det(&self) -> f64 {
        self.xx * self.yy - self.xy * self.xy
    }

    /// Eigenvalues, largest first.
    pub fn eigenvalues(&self) -> (f64, f64) {
        let mid = 0.5 * (self.xx + self.yy);
        let rad = (0.5 * (self.xx - self.yy)).hypot(self.xy);
        (mid + rad, mid - rad)
    }

    /// Squared Mahalanobis length of `d`.
    pub fn mahalanobis2(&self, d: Point2) -> f64 {
        (self.yy * d.x * d.x - 2.0 * self.xy * d.x * d.y + self.xx * d.y * d.y) / self.det()
    }

    /// Raises every eigenvalue below `floor` up to `floor`, keeping eigenvectors.
    pub fn clamp_eigenvalues(&self, floor: f64) -> Self {
        let (hi, lo) = self.eigenvalues();
        if lo >= floor {
            return *self;
        }
        if hi <= floor {
            return Self::isotropic(floor);
        }
        // Eigenvector of the large eigenvalue; pick the better-conditioned form.
        let a = Point2::new(self.xy, hi - self.xx);
        let b = Point2::new(hi - self.yy, self.xy);
        let v = if a.norm() >= b.norm() { a } else { b };
        let v = v.normalized().unwrap_or(Point2::new(1.0, 0.0));
        let w = Point2::new(-v.y, v.x);
        Self::new(
            hi * v.x * v.x + floor * w.x * w.x,
            hi * v.x * v.y + floor * w.x * w.y,
            hi * v.y * v.y + floor * w.y * w.y,
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianComponent {
    pub weight: f64,
    pub mean: Point2,
    pub covariance: Cov2,
}

impl GaussianComponent {
    /// log N(p; mean, covariance)
    pub fn log_density(&self, p: Point2) -> f64 {
        -(2.0 * PI).ln()
            - 0.5 * self.covariance.det().ln()
            - 0.5 * self.covariance.mahalanobis2(p - self.mean)
    }
}

/// A fitted planar mixture.
#[derive(Clone, Debug, PartialEq)]
pub struct GmmModel {
    components: Vec<GaussianComponent>,
}

impl GmmModel {
    pub fn new(components: Vec<GaussianComponent>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::Degenerate("a mixture needs at least one component"));
        }
        for c in &components {
            let finite = c.weight.is_finite()
                && c.mean.is_finite()
                && [c.covariance.xx, c.covariance.xy, c.covariance.yy]
                    .iter()
                    .all(|v| v.is_finite());
            if !finite {
                return Err(Error::NonFinite);
            }
            if !(c.weight > 0.0 && c.weight <= 1.0) {
                return Err(Error::Format(format!("weight {} outside (0, 1]", c.weight)));
            }
            if c.covariance.eigenvalues().1 <= 0.0 {
                return Err(Error::Format("covariance is not positive definite".into()));
            }
        }
        let total: f64 = components.iter().map(|c| c.weight).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Format(format!("weights sum to {total}, expected 1")));
        }
        Ok(Self { components })
    }

    pub fn components(&self) -> &[GaussianComponent] {
        &self.components
    }

    pub fn k(&self) -> usize {
        self.components.len()
    }

    pub fn means(&self) -> impl Iterator<Item = Point2> + '_ {
        self.components.iter().map(|c| c.mean)
    }

    /// Serializes to the versioned plain-text model format.
    pub fn to_text(&self) -> String {
        let mut s = format!("{MODEL_HEADER} {MODEL_VERSION}\nk {}\n", self.k());
        s.push_str("# weight mean_x mean_y cov_xx cov_xy cov_yy\n");
        for c in &self.components {
            let cv = c.covariance;
            writeln!(
                s,
                "component {} {} {} {} {} {}",
                c.weight, c.mean.x, c.mean.y, cv.xx, cv.xy, cv.yy
            )
            .unwrap();
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        let header = lines
            .next()
            .ok_or_else(|| Error::Format("empty model".into()))?;
        match header.split_whitespace().collect::<Vec<_>>()[..] {
            [MODEL_HEADER, v] if v.parse() == Ok(MODEL_VERSION) => {}
            _ => return Err(Error::Format(format!("unsupported header `{header}`"))),
        }
        let k: usize = lines
            .next()
            .and_then(|l| l.strip_prefix("k "))
            .and_then(|v| v.trim().parse().ok())
            .ok_or_else(|| Error::Format("missing `k` line".into()))?;
        let mut components = Vec::with_capacity(k);
        for line in lines {
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.first() != Some(&"component") || fields.len() != 7 {
                return Err(Error::Format(format!("bad component line `{line}`")));
            }
            let v: Vec<f64> = fields[1..]
                .iter()
                .map(|f| f.parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| Error::Format(e.to_string()))?;
            components.push(GaussianComponent {
                weight: v[0],
                mean: Point2::new(v[1], v[2]),
                covariance: Cov2::new(v[3], v[4], v[5]),
            });
        }
        if components.len() != k {
            return Err(Error::Format(format!(
                "declared {k} components, found {}",
                components.len()
            )));
        }
        Self::new(components)
    }
}

/// Fitting parameters; defaults are ten components, 500 iterations and an
/// absolute log-likelihood tolerance of 1e-8.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GmmConfig {
    pub k: usize,
    pub seed: u64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for GmmConfig {
    fn default() -> Self {
        Self {
            k: 10,
            seed: 0,
            max_iter: 500,
            tol: 1e-8,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitReport {
    /// Log-likelihood of the data under the model entering each iteration,
    /// followed by the final model's value.
    pub log_likelihood_trace: Vec<f64>,
    pub iterations_run: usize,
    pub converged: bool,
}

/// Snapshot handed to a [`fit_gmm_observed`] observer after every M-step.
pub struct EmStep<'a> {
    pub iteration: usize,
    /// Row-major `n × k` responsibilities used by this M-step.
    pub responsibilities: &'a [f64],
    pub model: &'a GmmModel,
    pub covariance_floor: f64,
}

/// Sum over points of the log mixture density.
pub fn log_likelihood(model: &GmmModel, points: &[Point2]) -> f64 {
    let mut scratch = vec![0.0; model.k()];
    points
        .iter()
        .map(|&p| log_mixture_density(model, p, &mut scratch))
        .sum()
}

fn log_mixture_density(model: &GmmModel, p: Point2, scratch: &mut [f64]) -> f64 {
    for (slot, c) in scratch.iter_mut().zip(&model.components) {
        *slot = c.weight.ln() + c.log_density(p);
    }
    log_sum_exp(scratch)
}

fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// E-step: row-major `n × k` posterior component probabilities and the
/// log-likelihood of `points` under `model`.
pub fn responsibilities(model: &GmmModel, points: &[Point2]) -> (Vec<f64>, f64) {
    let k = model.k();
    let mut resp = vec![0.0; points.len() * k];
    let mut ll = 0.0;
    for (row, &p) in resp.chunks_exact_mut(k).zip(points) {
        let lse = log_mixture_density(model, p, row);
        for r in row.iter_mut() {
            *r = (*r - lse).exp();
        }
        ll += lse;
    }
    (resp, ll)
}

/// Per-axis variance averaged over x and y.
fn global_variance(points: &[Point2]) -> f64 {
    let n = points.len() as f64;
    let mean = points.iter().fold(Point2::default(), |a, &p| a + p) * (1.0 / n);
    let ss: f64 = points.iter().map(|&p| (p - mean).dot(p - mean)).sum();
    ss / n / 2.0
}

/// k-means++ seeding over distinct points, each weighted by its multiplicity.
///
/// Working on the deduplicated set makes the seeding invariant to repeating
/// the whole data set, and keeps dwell samples from dominating the draw.
fn seed_means(points: &[Point2], k: usize, rng: &mut ChaCha8Rng) -> Vec<Point2> {
    let mut index: HashMap<(u64, u64), usize> = HashMap::new();
    let mut distinct: Vec<Point2> = Vec::new();
    let mut mult: Vec<f64> = Vec::new();
    for &p in points {
        let key = (p.x.to_bits(), p.y.to_bits());
        match index.get(&key) {
            Some(&i) => mult[i] += 1.0,
            None => {
                index.insert(key, distinct.len());
                distinct.push(p);
                mult.push(1.0);
            }
        }
    }

    let pick = |weights: &[f64], rng: &mut ChaCha8Rng| -> usize {
        let total: f64 = weights.iter().sum();
        let target = rng.random::<f64>() * total;
        let mut acc = 0.0;
        for (i, w) in weights.iter().enumerate() {
            acc += w;
            if target < acc {
                return i;
            }
        }
        weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
    };

    let mut means = Vec::with_capacity(k);
    means.push(distinct[pick(&mult, rng)]);
    let mut d2: Vec<f64> = distinct
        .iter()
        .map(|&p| (p - means[0]).dot(p - means[0]))
        .collect();
    while means.len() < k {
        let weights: Vec<f64> = d2.iter().zip(&mult).map(|(d, m)| d * m).collect();
        let chosen = if weights.iter().any(|&w| w > 0.0) {
            distinct[pick(&weights, rng)]
        } else {
            distinct[pick(&mult, rng)]
        };
        means.push(chosen);
        for (d, &p) in d2.iter_mut().zip(&distinct) {
            *d = d.min((p - chosen).dot(p - chosen));
        }
    }
    means
}

/// Fits a `k`-component mixture by expectation-maximization.
pub fn fit_gmm(points: &[Point2], cfg: &GmmConfig) -> Result<(GmmModel, FitReport)> {
    fit_gmm_observed(points, cfg, |_| {})
}

/// [`fit_gmm`] with a callback after every M-step, for diagnostics.
pub fn fit_gmm_observed(
    points: &[Point2],
    cfg: &GmmConfig,
    mut observe: impl FnMut(&EmStep<'_>),
) -> Result<(GmmModel, FitReport)> {
    let k = cfg.k;
    if k == 0 {
        return Err(Error::InvalidArgument("k must be positive".into()));
    }
    if points.len() < k {
        return Err(Error::InvalidArgument(format!(
            "k = {k} exceeds the number of points ({})",
            points.len()
        )));
    }
    if cfg.max_iter == 0 || !(cfg.tol > 0.0) {
        return Err(Error::InvalidArgument(
            "max_iter and tol must be positive".into(),
        ));
    }
    if !points.iter().all(Point::is_finite) {
        return Err(Error::NonFinite);
    }
    let variance = global_variance(points);
    if points.iter().all(|&p| p == points[0]) || !(variance > 0.0) {
        return Err(Error::Degenerate("all points are identical"));
    }
    let floor = COVARIANCE_FLOOR_RATIO * variance;
    let n = points.len() as f64;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = GmmModel {
        components: seed_means(points, k, &mut rng)
            .into_iter()
            .map(|mean| GaussianComponent {
                weight: 1.0 / k as f64,
                mean,
                covariance: Cov2::isotropic(variance),
            })
            .collect(),
    };

    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < cfg.max_iter {
        let (resp, ll) = responsibilities(&model, points);
        if let Some(&prev) = trace.last() {
            if ll - prev < cfg.tol {
                trace.push(ll);
                converged = true;
                break;
            }
        }
        trace.push(ll);

        for (j, comp) in model.components.iter_mut().enumerate() {
            let mut mass = 0.0;
            let mut sum = Point2::default();
            for (row, &p) in resp.chunks_exact(k).zip(points) {
                mass += row[j];
                sum = sum + p * row[j];
            }
            comp.weight = (mass / n).max(f64::MIN_POSITIVE);
            if mass <= f64::MIN_POSITIVE {
                // Empty component: nothing to re-estimate from.
                continue;
            }
            let mean = sum * (1.0 / mass);
            let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
            for (row, &p) in resp.chunks_exact(k).zip(points) {
                let d = p - mean;
                sxx += row[j] * d.x * d.x;
                sxy += row[j] * d.x * d.y;
                syy += row[j] * d.y * d.y;
            }
            comp.mean = mean;
            comp.covariance =
                Cov2::new(sxx / mass, sxy / mass, syy / mass).clamp_eigenvalues(floor);
        }
        iterations += 1;
        observe(&EmStep {
            iteration: iterations,
            responsibilities: &resp,
            model: &model,
            covariance_floor: floor,
        });
    }
    if !converged {
        trace.push(log_likelihood(&model, points));
    }
    if model.components.iter().any(|c| !c.mean.is_finite()) {
        return Err(Error::Invariant("EM produced a non-finite mean".into()));
    }

    Ok((
        model,
        FitReport {
            log_likelihood_trace: trace,
            iterations_run: iterations,
            converged,
        },
    ))
}

/// Orders the component means along `reference` and returns them as a polyline.
///
/// Each mean is projected onto the nearest point of the reference polyline and
/// takes that point's arc-length fraction; means are sorted by fraction, then
/// by position, then by component index.
pub fn extract_generalized_curve(
    model: &GmmModel,
    reference: &Trajectory<Point2>,
) -> Result<Trajectory<Point2>> {
    if model.k() < 2 {
        return Err(Error::Degenerate(
            "a curve needs at least two component means",
        ));
    }
    let fractions = arc_fractions(model.means(), reference.points())?;
    let mut order: Vec<usize> = (0..model.k()).collect();
    let means: Vec<Point2> = model.means().collect();
    order.sort_by(|&a, &b| {
        fractions[a]
            .total_cmp(&fractions[b])
            .then(means[a].x.total_cmp(&means[b].x))
            .then(means[a].y.total_cmp(&means[b].y))
            .then(a.cmp(&b))
    });
    let curve = Trajectory::with_rate(
        order.into_iter().map(|i| means[i]).collect(),
        reference.sample_rate_hz(),
    )?;
    Ok(match reference.label() {
        Some(l) => curve.labeled(l),
        None => curve,
    })
}

/// Arc-length fraction of the nearest point on `line` for each query.
pub fn arc_fractions(
    queries: impl IntoIterator<Item = Point2>,
    line: &[Point2],
) -> Result<Vec<f64>> {
    let cum = cumulative_lengths(line);
    let total = cum[cum.len() - 1];
    if !(total > 0.0) {
        return Err(Error::ZeroLength);
    }
    Ok(queries
        .into_iter()
        .map(|q| {
            let mut best = (f64::INFINITY, 0.0);
            for (i, w) in line.windows(2).enumerate() {
                let ab = w[1] - w[0];
                let len2 = ab.dot(ab);
                let t = if len2 > 0.0 {
                    ((q - w[0]).dot(ab) / len2).clamp(0.0, 1.0)
                } else {
                    0.0
                };
                let d = q.distance(w[0].lerp(w[1], t));
                if d < best.0 {
                    best = (d, (cum[i] + t * (cum[i + 1] - cum[i])) / total);
                }
            }
            best.1
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GeneralizeConfig {
    pub gmm: GmmConfig,
    /// Every demonstration is resampled to this many points before pooling.
    pub resample_len: usize,
}

impl Default for GeneralizeConfig {
    fn default() -> Self {
        Self {
            gmm: GmmConfig::default(),
            resample_len: 100,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Generalized {
    pub curve: Trajectory<Point2>,
    pub model: GmmModel,
    pub report: FitReport,
}

/// Pools resampled demonstrations, fits the mixture and orders its means
/// along the first demonstration.
pub fn generalize_letter(
    demonstrations: &[Trajectory<Point2>],
    cfg: &GeneralizeConfig,
) -> Result<Generalized> {
    let first = demonstrations
        .first()
        .ok_or_else(|| Error::InvalidArgument("no demonstrations given".into()))?;
    let resampled = demonstrations
        .iter()
        .map(|d| resample_by_arclength(d, cfg.resample_len))
        .collect::<Result<Vec<_>>>()?;
    let pooled: Vec<Point2> = resampled
        .iter()
        .flat_map(|t| t.points().iter().copied())
        .collect();
    let (model, report) = fit_gmm(&pooled, &cfg.gmm)?;
    let curve = extract_generalized_curve(&model, &resampled[0])?;
    let curve = match first.label() {
        Some(l) => curve.labeled(l),
        None => curve,
    };
    Ok(Generalized {
        curve,
        model,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_model() -> GmmModel {
        GmmModel::new(vec![GaussianComponent {
            weight: 1.0,
            mean: Point2::new(0.0, 0.0),
            covariance: Cov2::isotropic(1.0),
        }])
        .unwrap()
    }

    #[test]
    fn log_likelihood_of_standard_normal() {
        let m = unit_model();
        let at_mean = log_likelihood(&m, &[Point2::new(0.0, 0.0)]);
        assert!((at_mean - (1.0 / (2.0 * PI)).ln()).abs() < 1e-12);
        assert!((at_mean + 1.837877).abs() < 1e-6);
        let off = log_likelihood(&m, &[Point2::new(3.0, 4.0)]);
        assert!((off - (at_mean - 12.5)).abs() < 1e-12);
        assert_eq!(log_likelihood(&m, &[]), 0.0);
    }

    #[test]
    fn single_component_is_sample_moments() {
        let pts: Vec<Point2> = (0..50)
            .map(|i| {
                let t = i as f64 * 0.37;
                Point2::new(t.sin() * 2.0 + 0.1 * t, t.cos() - 0.05 * t)
            })
            .collect();
        let (m, report) = fit_gmm(
            &pts,
            &GmmConfig {
                k: 1,
                ..Default::default()
            },
        )
        .unwrap();
        let n = pts.len() as f64;
        let mean = pts.iter().fold(Point2::default(), |a, &p| a + p) * (1.0 / n);
        let cxx = pts.iter().map(|p| (p.x - mean.x).powi(2)).sum::<f64>() / n;
        let cxy = pts
            .iter()
            .map(|p| (p.x - mean.x) * (p.y - mean.y))
            .sum::<f64>()
            / n;
        let cyy = pts.iter().map(|p| (p.y - mean.y).powi(2)).sum::<f64>() / n;
        let c = m.components()[0];
        assert!(report.converged);
        assert_eq!(c.weight, 1.0);
        assert!(c.mean.distance(mean) < 1e-12);
        assert!((c.covariance.xx - cxx).abs() < 1e-12);
        assert!((c.covariance.xy - cxy).abs() < 1e-12);
        assert!((c.covariance.yy - cyy).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_inputs() {
        let pts = vec![Point2::new(0.0, 0.0), Point2::new(1.0, 1.0)];
        assert!(fit_gmm(
            &pts,
            &GmmConfig {
                k: 3,
                ..Default::default()
            }
        )
        .is_err());
        let same = vec![Point2::new(0.2, 0.2); 10];
        assert!(matches!(
            fit_gmm(
                &same,
                &GmmConfig {
                    k: 2,
                    ..Default::default()
                }
            ),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn clamp_keeps_orientation() {
        let c = Cov2::new(1.0, 1.0, 1.0); // eigenvalues 2 and 0
        let f = c.clamp_eigenvalues(0.01);
        let (hi, lo) = f.eigenvalues();
        assert!((hi - 2.0).abs() < 1e-12);
        assert!((lo - 0.01).abs() < 1e-12);
        assert!((f.xx - f.yy).abs() < 1e-12);
        assert_eq!(
            Cov2::isotropic(1e-9).clamp_eigenvalues(1e-6),
            Cov2::isotropic(1e-6)
        );
        let ok = Cov2::new(2.0, 0.3, 1.0);
        assert_eq!(ok.clamp_eigenvalues(0.1), ok);
    }

    #[test]
    fn curve_needs_two_means() {
        let reference =
            Trajectory::new(vec![Point2::new(0.0, 0.0), Point2::new(1.0, 0.0)]).unwrap();
        assert!(matches!(
            extract_generalized_curve(&unit_model(), &reference),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn means_sorted_along_reference() {
        let comp = |x: f64| GaussianComponent {
            weight: 1.0 / 3.0,
            mean: Point2::new(x, 0.0),
            covariance: Cov2::isotropic(0.01),
        };
        let model = GmmModel::new(vec![comp(0.9), comp(0.1), comp(0.5)]).unwrap();
        let reference =
            Trajectory::new(vec![Point2::new(0.0, 0.0), Point2::new(1.0, 0.0)]).unwrap();
        let curve = extract_generalized_curve(&model, &reference).unwrap();
        let xs: Vec<f64> = curve.points().iter().map(|p| p.x).collect();
        assert_eq!(xs, vec![0.1, 0.5, 0.9]);
    }

    #[test]
    fn text_round_trip() {
        let model = GmmModel::new(vec![
            GaussianComponent {
                weight: 0.3,
                mean: Point2::new(-0.1234567890123, 0.5),
                covariance: Cov2::new(0.1, 0.01 / 3.0, 0.2),
            },
            GaussianComponent {
                weight: 0.7,
                mean: Point2::new(1e-17, -3.0),
                covariance: Cov2::isotropic(1.0 / 7.0),
            },
        ])
        .unwrap();
        let text = model.to_text();
        assert_eq!(GmmModel::from_text(&text).unwrap(), model);
        assert!(GmmModel::from_text("trajart-gmm 2\nk 1\n").is_err());
        assert!(GmmModel::from_text(&text.replace("k 2", "k 3")).is_err());
    }
}
