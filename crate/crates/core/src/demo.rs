//! Seeded synthetic recordings standing in for hand-guided sessions.
//!
//! Letters imitate a controller dump: three-decimal coordinates at 10 Hz, a
//! run of identical dwell samples while the operator settles before moving,
//! a minimum-jerk speed profile and a small hand tremor.

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::trajectory::{Point, Point2, Point3, Trajectory};

pub const DEFAULT_LETTER_COUNT: usize = 9;

fn round_to(v: f64, decimals: i32) -> f64 {
    let s = 10f64.powi(decimals);
    (v * s).round() / s
}

/// 10τ³ − 15τ⁴ + 6τ⁵
fn min_jerk(tau: f64) -> f64 {
    tau * tau * tau * (10.0 - 15.0 * tau + 6.0 * tau * tau)
}

/// `count` perturbed letter "C" strokes, drawn counter-clockwise from the
/// upper right. Each has 80–200 samples and all coordinates lie in [-1, 1].
pub fn demo_letters(seed: u64, count: usize) -> Vec<Trajectory<Point2>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| demo_letter(&mut rng).labeled(format!("letter_{:02}", i + 1)))
        .collect()
}

fn demo_letter(rng: &mut ChaCha8Rng) -> Trajectory<Point2> {
    let center = Point2::new(
        -0.40 + rng.random_range(-0.03..0.03),
        0.27 + rng.random_range(-0.03..0.03),
    );
    let radius = 0.15 * rng.random_range(0.85..1.15);
    let aspect = rng.random_range(0.9..1.1);
    let tilt: f64 = rng.random_range(-0.12..0.12);
    let start = (55.0 + rng.random_range(-10.0..10.0)) * PI / 180.0;
    let end = (305.0 + rng.random_range(-10.0..10.0)) * PI / 180.0;
    let tremor: Vec<(f64, f64, f64)> = (1..=3)
        .map(|j| {
            (
                j as f64 * rng.random_range(1.5..3.0),
                rng.random_range(0.0..TAU),
                0.006 / j as f64,
            )
        })
        .collect();
    let moving = rng.random_range(75..=180);
    let dwell_start = rng.random_range(5..=12);
    let dwell_end = rng.random_range(2..=6);

    let at = |tau: f64| {
        let phi = start + (end - start) * min_jerk(tau);
        let wobble: f64 = tremor
            .iter()
            .map(|&(freq, phase, amp)| amp * (freq * phi + phase).sin())
            .sum();
        let r = radius + wobble;
        let (x, y) = (r * phi.cos(), aspect * r * phi.sin());
        let (s, c) = tilt.sin_cos();
        Point2::new(
            round_to(center.x + c * x - s * y, 3),
            round_to(center.y + s * x + c * y, 3),
        )
    };

    let mut pts = Vec::with_capacity(dwell_start + moving + dwell_end);
    pts.extend(std::iter::repeat_n(at(0.0), dwell_start));
    for i in 1..moving {
        pts.push(at(i as f64 / (moving - 1) as f64));
    }
    pts.extend(std::iter::repeat_n(at(1.0), dwell_end + 1));
    Trajectory::new(pts).expect("generated letter is valid")
}

/// A biopsy-like 3D path: approach, a fiducial scanning loop, alignment at
/// the entry point, needle insertion with a dwell at the target, retraction.
/// Coordinates are rounded to 0.1 mm (in metres) and sampled at 10 Hz.
pub fn demo_biopsy(seed: u64) -> Trajectory<Point3> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut jitter = |s: f64| rng.random_range(-s..s);
    let home = Point3::new(0.30 + jitter(0.02), -0.20 + jitter(0.02), 0.45);
    let scan_center = Point3::new(0.0 + jitter(0.01), 0.0 + jitter(0.01), 0.26);
    let entry = Point3::new(0.02 + jitter(0.005), 0.01 + jitter(0.005), 0.15);
    let target = Point3::new(0.035 + jitter(0.005), 0.025 + jitter(0.005), 0.08);
    let scan_radius = 0.06;

    let mut pts: Vec<Point3> = Vec::new();
    let scan_start = scan_center + Point3::new(scan_radius, 0.0, 0.0);

    // Approach on a bowed path.
    let approach = 60;
    for i in 0..approach {
        let tau = min_jerk(i as f64 / approach as f64);
        let bow = (PI * tau).sin() * 0.08;
        pts.push(home.lerp(scan_start, tau) + Point3::new(0.0, bow, bow * 0.5));
    }
    // Scanning loop, 1.5 turns with slight descent.
    let scan = 120;
    for i in 0..scan {
        let tau = i as f64 / scan as f64;
        let a = 1.5 * TAU * tau;
        pts.push(
            scan_center + Point3::new(scan_radius * a.cos(), scan_radius * a.sin(), -0.02 * tau),
        );
    }
    let scan_end = *pts.last().expect("non-empty");
    let align = 40;
    for i in 0..=align {
        pts.push(scan_end.lerp(entry, min_jerk(i as f64 / align as f64)));
    }
    pts.extend(std::iter::repeat_n(entry, 15));
    let insert = 50;
    for i in 1..=insert {
        pts.push(entry.lerp(target, i as f64 / insert as f64));
    }
    pts.extend(std::iter::repeat_n(target, 20));
    for i in 1..=insert / 2 {
        pts.push(target.lerp(entry, i as f64 / (insert / 2) as f64));
    }
    let retreat = 40;
    let park = entry + Point3::new(-0.1, 0.12, 0.2);
    for i in 1..=retreat {
        pts.push(entry.lerp(park, min_jerk(i as f64 / retreat as f64)));
    }

    let pts = pts
        .into_iter()
        .map(|p| Point3::new(round_to(p.x, 4), round_to(p.y, 4), round_to(p.z, 4)))
        .collect();
    Trajectory::new(pts).expect("generated path is valid")
}

/// Uniformly sampled helix around the z axis.
pub fn helix(radius: f64, rise_per_turn: f64, turns: f64, samples: usize) -> Trajectory<Point3> {
    let pts = (0..samples)
        .map(|i| {
            let a = TAU * turns * i as f64 / (samples - 1) as f64;
            Point3::new(radius * a.cos(), radius * a.sin(), rise_per_turn * a / TAU)
        })
        .collect();
    Trajectory::new(pts).expect("helix has at least two samples")
}
