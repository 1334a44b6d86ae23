use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use trajart_core::vector::{import_svg, parse_path_data, svg_document, CIRCLE_KAPPA};
use trajart_core::{
    fit_bezier, to_dotted, BoundingBox, CubicBez, PathStyle, Point, Point2, Trajectory, VectorPath,
};

/// Nearest distance to the path by dense sampling and local ternary refinement.
fn brute_force_distance(path: &VectorPath, p: Point2) -> f64 {
    const N: usize = 2000;
    path.segments()
        .map(|c| {
            let (mut best_t, mut best) = (0.0, f64::INFINITY);
            for i in 0..=N {
                let t = i as f64 / N as f64;
                let d = c.eval(t).distance(p);
                if d < best {
                    (best_t, best) = (t, d);
                }
            }
            let (mut lo, mut hi) = (
                (best_t - 1.0 / N as f64).max(0.0),
                (best_t + 1.0 / N as f64).min(1.0),
            );
            for _ in 0..100 {
                let m1 = lo + (hi - lo) / 3.0;
                let m2 = hi - (hi - lo) / 3.0;
                if c.eval(m1).distance(p) < c.eval(m2).distance(p) {
                    hi = m2;
                } else {
                    lo = m1;
                }
            }
            best.min(c.eval((lo + hi) / 2.0).distance(p))
        })
        .fold(f64::INFINITY, f64::min)
}

fn random_polyline(rng: &mut ChaCha8Rng) -> Trajectory<Point2> {
    let n = rng.random_range(3..80);
    let mut heading: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let mut p = Point2::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    let mut pts = vec![p];
    for _ in 1..n {
        heading += rng.random_range(-1.2..1.2);
        let step = rng.random_range(0.005..0.08);
        p = p + Point2::new(heading.cos(), heading.sin()) * step;
        pts.push(p);
    }
    Trajectory::new(pts).unwrap()
}

#[test]
fn recovers_a_sampled_cubic() {
    let truth = CubicBez::new(
        Point2::new(0.0, 0.0),
        Point2::new(0.3, 0.8),
        Point2::new(0.9, 0.9),
        Point2::new(1.0, 0.1),
    );
    let samples: Vec<Point2> = (0..50).map(|i| truth.eval(i as f64 / 49.0)).collect();
    let path = fit_bezier(&Trajectory::new(samples.clone()).unwrap(), 1e-6).unwrap();
    for &p in &samples {
        assert!(brute_force_distance(&path, p) <= 1e-6);
    }
    // Fitted curve stays on the generating cubic between samples too.
    for c in path.segments() {
        for i in 0..=20 {
            let q = c.eval(i as f64 / 20.0);
            assert!(truth.distance_to(q) < 1e-5, "{q:?}");
        }
    }
    assert!(path.segments().count() < samples.len() - 1);
    let coarse = fit_bezier(&Trajectory::new(samples).unwrap(), 1e-3).unwrap();
    assert_eq!(coarse.segments().count(), 1);
}

#[test]
fn random_polylines_stay_within_tolerance() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..100 {
        let t = random_polyline(&mut rng);
        let tol = [1e-3, 5e-3, 2e-2][case % 3];
        let path = fit_bezier(&t, tol).unwrap();
        assert!(path.is_continuous());
        assert_eq!(path.segments().next().unwrap().p0, t.first());
        assert_eq!(path.segments().last().unwrap().p3, t.last());
        for &p in t.points() {
            let d = brute_force_distance(&path, p);
            assert!(d <= tol, "case {case}: {d} > {tol}");
        }
    }
}

#[test]
fn dots_are_round() {
    let r = 0.37;
    let centre = Point2::new(0.2, -0.4);
    let path = to_dotted(&[centre], r).unwrap();
    assert_eq!(path.subpaths().len(), 1);
    assert_eq!(path.subpaths()[0].len(), 4);
    let mut worst: f64 = 0.0;
    for c in path.segments() {
        for i in 0..=1000 {
            let d = c.eval(i as f64 / 1000.0).distance(centre);
            worst = worst.max((d - r).abs());
        }
    }
    assert!(worst < 0.00028 * r, "{worst}");
    assert!((CIRCLE_KAPPA - 4.0 / 3.0 * (2f64.sqrt() - 1.0)).abs() < 1e-15);
}

#[test]
fn path_data_round_trips() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let t = random_polyline(&mut rng);
    let path = fit_bezier(&t, 1e-3).unwrap();
    let back = parse_path_data(&path.to_path_data()).unwrap();
    let orig: Vec<&CubicBez> = path.segments().collect();
    let parsed: Vec<&CubicBez> = back.iter().flatten().collect();
    assert_eq!(orig.len(), parsed.len());
    for (a, b) in orig.iter().zip(parsed) {
        for (p, q) in a.control_points().iter().zip(b.control_points()) {
            assert!((p.x - q.x).abs() <= 0.5e-4 + 1e-12 && (p.y - q.y).abs() <= 0.5e-4 + 1e-12);
        }
    }
}

#[test]
fn negative_zero_is_not_written() {
    let path = VectorPath::polyline(
        &[Point2::new(-0.0, 0.0), Point2::new(1.0, -0.00001)],
        PathStyle::default(),
    )
    .unwrap();
    let d = path.to_path_data();
    assert!(!d.contains("-0.0000"), "{d}");
    assert!(d.starts_with("M 0.0000 0.0000 C"));
}

fn random_paths(seed: u64) -> (Vec<VectorPath>, BoundingBox) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let count = rng.random_range(1..5);
    let mut paths = Vec::new();
    for _ in 0..count {
        let t = random_polyline(&mut rng);
        if rng.random_bool(0.3) {
            paths.push(to_dotted(t.points(), rng.random_range(0.001..0.05)).unwrap());
        } else {
            paths.push(fit_bezier(&t, 0.01).unwrap());
        }
    }
    let canvas = paths
        .iter()
        .filter_map(VectorPath::bounding_box)
        .reduce(|a, b| a.union(&b))
        .unwrap();
    (paths, canvas)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn svg_is_well_formed(seed in any::<u64>()) {
        let (paths, canvas) = random_paths(seed);
        let doc = svg_document(&paths, &canvas).unwrap();
        let xml = roxmltree::Document::parse(&doc).unwrap();
        let root = xml.root_element();
        prop_assert_eq!(root.tag_name().name(), "svg");
        let vb: Vec<f64> = root.attribute("viewBox").unwrap().split(' ').map(|v| v.parse().unwrap()).collect();
        prop_assert_eq!(vb.len(), 4);
        prop_assert!(vb[2] > 0.0 && vb[3] > 0.0);
        prop_assert_eq!(root.children().filter(|n| n.has_tag_name("path")).count(), paths.len());
        // Every endpoint in flipped coordinates lies inside the viewBox.
        for p in &paths {
            for c in p.segments() {
                for q in [c.p0, c.p3] {
                    prop_assert!(q.x >= vb[0] - 1e-4 && q.x <= vb[0] + vb[2] + 1e-4);
                    prop_assert!(-q.y >= vb[1] - 1e-4 && -q.y <= vb[1] + vb[3] + 1e-4);
                }
            }
        }
    }

    #[test]
    fn export_import_export_is_stable(seed in any::<u64>()) {
        let (paths, canvas) = random_paths(seed);
        let first = svg_document(&paths, &canvas).unwrap();
        let (back, back_canvas) = import_svg(&first).unwrap();
        prop_assert!(back.iter().all(VectorPath::is_continuous));
        let second = svg_document(&back, &back_canvas).unwrap();
        prop_assert_eq!(first, second);
    }
}
