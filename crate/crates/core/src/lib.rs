//! Robot-recorded strokes turned into vector artwork.
//!
//! Three pipelines share one trajectory vocabulary:
//!
//! * [`gmm`] pools several hand-guided demonstrations of a letter, fits a
//!   Gaussian mixture and orders its component centers into one generalized
//!   stroke;
//! * [`neural`] trains a 2-10-10-2 `tanh` network on every ordered pair of
//!   distinct demonstrations and maps a letter onto a new letterform;
//! * [`biopsy`] interpolates a recorded 3D tool path, flattens it onto a plane
//!   and simplifies it.
//!
//! [`vector`] turns any of the resulting polylines into cubic Bézier paths and
//! SVG documents.

pub mod biopsy;
pub mod demo;
pub mod error;
pub mod gmm;
pub mod neural;
pub mod trajectory;
pub mod vector;

pub use biopsy::{
    interpolate_spline, project, sample_curve, simplify_rdp, ProjectionPlane, SplineCurve,
};
pub use error::{Error, Result};
pub use gmm::{
    extract_generalized_curve, fit_gmm, generalize_letter, log_likelihood, FitReport,
    GaussianComponent, GeneralizeConfig, GmmConfig, GmmModel,
};
pub use neural::{
    build_pairs, extrude_z, forward, generate_letter, init_mlp, init_mlp_with, split_train_test,
    train, train_cost, InitScheme, MlpModel, PairDataset, TrainConfig, TrainReport,
};
pub use trajectory::{
    bounding_box, check_unit_range, normalize_to_unit, parse_trajectory, resample_by_arclength,
    write_trajectory, BoundingBox, Point, Point2, Point3, RenderHint, Trajectory,
};
pub use vector::{export_svg, fit_bezier, to_dotted, CubicBez, PathStyle, VectorPath};
