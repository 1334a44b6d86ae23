use proptest::prelude::*;
use trajart_core::biopsy::rdp_keep;
use trajart_core::demo::{demo_biopsy, helix};
use trajart_core::trajectory::point_polyline_distance;
use trajart_core::{
    interpolate_spline, project, sample_curve, simplify_rdp, Point, Point2, Point3,
    ProjectionPlane, Trajectory,
};

#[test]
fn helix_knots_are_reproduced() {
    let h = helix(0.5, 0.2, 1.3, 10);
    let c = interpolate_spline(&h).unwrap();
    for (&s, &p) in c.knots().iter().zip(h.points()) {
        assert!(c.eval(s).distance(p) < 1e-9);
    }
}

#[test]
fn line_spline_samples_are_equally_spaced() {
    let t = Trajectory::new(vec![
        Point3::new(0.0, 0.0, 0.0),
        Point3::new(0.5, 0.0, 0.0),
        Point3::new(2.0, 0.0, 0.0),
        Point3::new(4.0, 0.0, 0.0),
    ])
    .unwrap();
    let s = sample_curve(&interpolate_spline(&t).unwrap(), 5).unwrap();
    for (i, p) in s.points().iter().enumerate() {
        assert!(
            (p.x - i as f64).abs() < 1e-9 && p.y == 0.0 && p.z == 0.0,
            "{p:?}"
        );
    }
}

#[test]
fn sampling_refines_consistently() {
    let c = interpolate_spline(&helix(0.5, 0.2, 2.0, 40)).unwrap();
    let coarse = sample_curve(&c, 200).unwrap();
    let fine = sample_curve(&c, 400).unwrap();
    let worst = coarse
        .points()
        .iter()
        .map(|&p| point_polyline_distance(p, fine.points()))
        .fold(0.0, f64::max);
    assert!(worst < 1e-3, "{worst}");
}

#[test]
fn helix_projects_to_circle() {
    let radius = 0.5;
    let h = helix(radius, 0.05, 3.0, 301);
    let flat = project(&h, ProjectionPlane::Fitted).unwrap();
    let n = flat.len() as f64;
    let centre = flat.points().iter().fold(Point2::default(), |a, &p| a + p) * (1.0 / n);
    let mean_r = flat
        .points()
        .iter()
        .map(|p| p.distance(centre))
        .sum::<f64>()
        / n;
    assert!((mean_r - radius).abs() < 0.01 * radius, "{mean_r}");
    for p in flat.points() {
        assert!((p.distance(centre) - radius).abs() < 0.01 * radius);
    }
}

#[test]
fn principal_projection_is_idempotent_on_planar_data() {
    let t = Trajectory::new(
        (0..20)
            .map(|i| Point3::new((i as f64 * 0.3).cos(), (i as f64 * 0.7).sin(), 0.0))
            .collect(),
    )
    .unwrap();
    let once = project(&t, ProjectionPlane::Xy).unwrap();
    let lifted = once.map(|p| Point3::new(p.x, p.y, 0.0)).unwrap();
    assert_eq!(lifted, t);
    assert_eq!(project(&lifted, ProjectionPlane::Xy).unwrap(), once);
}

fn square_perimeter() -> Trajectory<Point2> {
    let corners = [
        Point2::new(0.0, 0.0),
        Point2::new(1.0, 0.0),
        Point2::new(1.0, 1.0),
        Point2::new(0.0, 1.0),
    ];
    let pts = (0..400)
        .map(|k| {
            let side = k / 100;
            let f = (k % 100) as f64 / 100.0;
            corners[side].lerp(corners[(side + 1) % 4], f)
        })
        .collect();
    Trajectory::new(pts).unwrap()
}

fn assert_within_epsilon(input: &Trajectory<Point2>, simplified: &Trajectory<Point2>, eps: f64) {
    for p in input.points() {
        let d = point_polyline_distance(*p, simplified.points());
        assert!(d <= eps, "point {p:?} is {d} from the simplified polyline");
    }
}

#[test]
fn square_keeps_corners() {
    let sq = square_perimeter();
    let s = simplify_rdp(&sq, 0.01).unwrap();
    assert_eq!(
        s.points(),
        &[
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(0.0, 1.0),
            sq.last(),
        ]
    );
    assert_within_epsilon(&sq, &s, 0.01);
}

#[test]
fn demo_pipeline_is_deterministic() {
    let run = || {
        let c = interpolate_spline(&demo_biopsy(1)).unwrap();
        let sampled = sample_curve(&c, 400).unwrap();
        let flat = project(&sampled, ProjectionPlane::Fitted).unwrap();
        simplify_rdp(&flat, 0.002).unwrap()
    };
    let (a, b) = (run(), run());
    assert_eq!(a, b);
    assert!(a.len() < 400);
}

fn wiggle() -> impl Strategy<Value = Trajectory<Point2>> {
    proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 2..120).prop_map(|v| {
        let mut acc = Point2::default();
        Trajectory::new(
            v.into_iter()
                .map(|(dx, dy)| {
                    acc = acc + Point2::new(dx, dy * 0.5);
                    acc
                })
                .collect(),
        )
        .unwrap()
    })
}

proptest! {
    #[test]
    fn rdp_discards_only_close_points(t in wiggle(), eps in 0.001f64..2.0) {
        let s = simplify_rdp(&t, eps).unwrap();
        prop_assert_eq!(s.first(), t.first());
        prop_assert_eq!(s.last(), t.last());
        let keep = rdp_keep(t.points(), eps);
        prop_assert!(keep.windows(2).all(|w| w[0] < w[1]));
        for p in t.points() {
            prop_assert!(point_polyline_distance(*p, s.points()) <= eps);
        }
    }

    #[test]
    fn rdp_count_is_monotone(t in wiggle()) {
        let ladder = [0.0, 0.01, 0.05, 0.1, 0.3, 0.7, 1.5, 4.0];
        let counts: Vec<usize> = ladder.iter().map(|&e| simplify_rdp(&t, e).unwrap().len()).collect();
        prop_assert!(counts.windows(2).all(|w| w[0] >= w[1]), "{:?}", counts);
    }

    #[test]
    fn spline_hits_every_knot(
        pts in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0), 4..40)
    ) {
        let t = Trajectory::new(pts.into_iter().map(|(x, y, z)| Point3::new(x, y, z)).collect()).unwrap();
        let c = interpolate_spline(&t).unwrap();
        for (&s, &p) in c.knots().iter().zip(c.points()) {
            prop_assert!(c.eval(s).distance(p) < 1e-9);
        }
    }
}
