use std::fs;
use std::path::{Path, PathBuf};

use trajart_core::demo::{demo_biopsy, demo_letters, helix};
use trajart_core::gmm::GeneralizeConfig;
use trajart_core::trajectory::{parse_trajectory_str, trajectory_to_string};
use trajart_core::vector::svg_document;
use trajart_core::{
    bounding_box, build_pairs, extrude_z, fit_bezier, generalize_letter, generate_letter,
    init_mlp_with, interpolate_spline, project, resample_by_arclength, sample_curve, simplify_rdp,
    split_train_test, to_dotted, train, BoundingBox, GmmConfig, InitScheme, MlpModel, PairDataset,
    PathStyle, Point2, Point3, TrainConfig, Trajectory, VectorPath,
};

use crate::error::CliError;
use crate::manifest::{sha256_hex, Run, RunManifest};
use crate::{
    BiopsyArgs, Cli, Command, DemoArgs, Epsilon, GeneralizeArgs, GenerateArgs, InitArg, PairsArgs,
    ReplayArgs, TrainArgs,
};

/// Fraction of the bounding-box diagonal used as the Bézier fit tolerance.
const FIT_TOLERANCE_RATIO: f64 = 0.005;
const EPSILON_RATIO: f64 = 0.01;
const CANVAS_MARGIN_RATIO: f64 = 0.05;

pub fn run(cli: &Cli, argv: &[String]) -> Result<(), CliError> {
    let out_dir = cli.out_dir.clone().unwrap_or_else(|| PathBuf::from("."));
    let name = match &cli.command {
        Command::Demo(_) => "demo",
        Command::Generalize(_) => "generalize",
        Command::Pairs(_) => "pairs",
        Command::Train(_) => "train",
        Command::Generate(_) => "generate",
        Command::Biopsy(_) => "biopsy",
        Command::Replay(args) => return replay(cli, args),
    };
    let mut run = Run::new(name, argv, &out_dir, cli.quiet);
    run.seed("seed", cli.seed);
    match &cli.command {
        Command::Demo(a) => demo(&mut run, cli.seed, a)?,
        Command::Generalize(a) => generalize(&mut run, cli.seed, a)?,
        Command::Pairs(a) => pairs(&mut run, a)?,
        Command::Train(a) => train_cmd(&mut run, cli.seed, a)?,
        Command::Generate(a) => generate(&mut run, cli.seed, a)?,
        Command::Biopsy(a) => biopsy(&mut run, a)?,
        Command::Replay(_) => unreachable!("handled above"),
    }
    run.finish()?;
    Ok(())
}

fn demo(run: &mut Run, seed: u64, a: &DemoArgs) -> Result<(), CliError> {
    run.param("count", a.count);
    for letter in demo_letters(seed, a.count) {
        let name = format!("{}.csv", letter.label().expect("demo letters are labeled"));
        run.write(
            &Path::new("letters").join(name),
            trajectory_to_string(&letter),
        )?;
    }
    run.write(
        Path::new("biopsy.csv"),
        trajectory_to_string(&demo_biopsy(seed)),
    )?;
    run.write(
        Path::new("helix.csv"),
        trajectory_to_string(&helix(0.05, 0.01, 3.0, 240)),
    )?;
    Ok(())
}

/// Reads one letter file, or every `.csv` file of a directory in name order.
fn read_letters(run: &mut Run, input: &Path) -> Result<Vec<Trajectory<Point2>>, CliError> {
    let files = if input.is_dir() {
        let mut files: Vec<PathBuf> = fs::read_dir(input)
            .map_err(|e| CliError::user(format!("{}: {e}", input.display())))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "csv"))
            .collect();
        files.sort();
        files
    } else if input.is_file() {
        vec![input.to_owned()]
    } else {
        return Err(CliError::user(format!(
            "{}: no such file or directory",
            input.display()
        )));
    };
    if files.is_empty() {
        return Err(CliError::user(format!(
            "no trajectories found in {}",
            input.display()
        )));
    }
    files
        .iter()
        .map(|f| {
            let text = run.read_string(f)?;
            let t: Trajectory<Point2> = parse_trajectory_str(&text)
                .map_err(|e| CliError::user(format!("{}: {e}", f.display())))?;
            let label = f.file_stem().map(|s| s.to_string_lossy().into_owned());
            Ok(match label {
                Some(l) => t.labeled(l),
                None => t,
            })
        })
        .collect()
}

fn read_3d(run: &mut Run, input: &Path) -> Result<Trajectory<Point3>, CliError> {
    let text = run.read_string(input)?;
    parse_trajectory_str(&text).map_err(|e| CliError::user(format!("{}: {e}", input.display())))
}

fn canvas(paths: &[VectorPath]) -> BoundingBox {
    let bb = paths
        .iter()
        .filter_map(VectorPath::bounding_box)
        .reduce(|a, b| a.union(&b))
        .expect("at least one path");
    bb.expanded(CANVAS_MARGIN_RATIO * bb.diagonal())
}

fn svg(paths: &[VectorPath]) -> Result<String, CliError> {
    Ok(svg_document(paths, &canvas(paths))?)
}

fn fit_tolerance(t: &Trajectory<Point2>, explicit: Option<f64>) -> Result<f64, CliError> {
    let tol = explicit.unwrap_or_else(|| FIT_TOLERANCE_RATIO * bounding_box(t).diagonal());
    if tol > 0.0 && tol.is_finite() {
        Ok(tol)
    } else {
        Err(CliError::user(format!(
            "fit tolerance must be positive, got {tol}"
        )))
    }
}

fn generalize(run: &mut Run, seed: u64, a: &GeneralizeArgs) -> Result<(), CliError> {
    run.param("k", a.k);
    run.param("resample", a.resample);
    run.param("max_iter", a.max_iter);
    run.param("tol", a.tol);
    run.param("tolerance", a.tolerance);
    let letters = read_letters(run, &a.input)?;
    run.log(format!("{} demonstrations", letters.len()));
    let cfg = GeneralizeConfig {
        gmm: GmmConfig {
            k: a.k,
            seed,
            max_iter: a.max_iter,
            tol: a.tol,
        },
        resample_len: a.resample,
    };
    let g = generalize_letter(&letters, &cfg)?;
    let ll = g
        .report
        .log_likelihood_trace
        .last()
        .copied()
        .unwrap_or(f64::NAN);
    run.log(format!(
        "EM stopped after {} iterations ({}), log-likelihood {ll}",
        g.report.iterations_run,
        if g.report.converged {
            "converged"
        } else {
            "iteration cap"
        }
    ));
    let tol = fit_tolerance(&g.curve, a.tolerance)?;
    let path = fit_bezier(&g.curve, tol)?;
    run.write(&a.out, g.model.to_text())?;
    run.write(&a.curve, trajectory_to_string(&g.curve))?;
    run.write(&a.svg, svg(&[path])?)?;
    Ok(())
}

fn load_letters_for_pairs(
    run: &mut Run,
    input: &Path,
    max_letters: usize,
) -> Result<Vec<Trajectory<Point2>>, CliError> {
    let mut letters = read_letters(run, input)?;
    if max_letters > 0 {
        letters.truncate(max_letters);
    }
    Ok(letters)
}

fn pairs(run: &mut Run, a: &PairsArgs) -> Result<(), CliError> {
    run.param("m", a.m);
    run.param("max_letters", a.max_letters);
    let letters = load_letters_for_pairs(run, &a.input, a.max_letters)?;
    let d = build_pairs(&letters, a.m)?;
    run.log(format!("{} letters, {} pairs", letters.len(), d.len()));
    run.write(&a.out, d.to_json() + "\n")?;
    Ok(())
}

fn train_cmd(run: &mut Run, seed: u64, a: &TrainArgs) -> Result<(), CliError> {
    let split_seed = a.split_seed.unwrap_or(seed);
    run.seed("split_seed", split_seed);
    run.param("lr", a.lr);
    run.param("iters", a.iters);
    run.param("log_every", a.log_every);
    run.param("init", format!("{:?}", a.init).to_lowercase());
    run.param("dot_radius", a.dot_radius);
    let dataset = match (&a.pairs, &a.input) {
        (Some(p), _) => {
            let text = run.read_string(p)?;
            PairDataset::from_json(&text)
                .map_err(|e| CliError::user(format!("{}: {e}", p.display())))?
        }
        (None, Some(dir)) => {
            run.param("m", a.m);
            run.param("max_letters", a.max_letters);
            let letters = load_letters_for_pairs(run, dir, a.max_letters)?;
            build_pairs(&letters, a.m)?
        }
        (None, None) => return Err(CliError::user("either --pairs or --in is required")),
    };
    let (train_set, test_set) = split_train_test(&dataset, split_seed)?;
    let held = test_set.pairs()[0];
    run.log(format!(
        "{} pairs: {} train, held out {} -> {}",
        dataset.len(),
        train_set.len(),
        held.input,
        held.output
    ));
    let scheme = match a.init {
        InitArg::Positive => InitScheme::Positive,
        InitArg::Symmetric => InitScheme::Symmetric,
    };
    let init = init_mlp_with(seed, scheme);
    let cfg = TrainConfig {
        learning_rate: a.lr,
        iterations: a.iters,
        seed,
        log_every: a.log_every,
    };
    let (model, report) = train(&init, &train_set, &cfg)?;
    run.log(format!(
        "train cost {} -> {}",
        report.initial_cost(),
        report.final_cost
    ));
    let input = test_set.input(held);
    let generated = generate_letter(&model, input)?;
    run.log(format!("held-out cost {}", test_set.total_cost(&model)));

    run.write(&a.out, model.to_json() + "\n")?;
    run.write(&a.report, report.to_csv())?;
    run.write(&a.test_input, trajectory_to_string(input))?;
    run.write(&a.test_target, trajectory_to_string(test_set.output(held)))?;
    run.write(&a.test_output, trajectory_to_string(&generated))?;
    run.write(
        &a.svg,
        svg(&[to_dotted(generated.points(), a.dot_radius)?])?,
    )?;
    Ok(())
}

fn generate(run: &mut Run, seed: u64, a: &GenerateArgs) -> Result<(), CliError> {
    run.param("m", a.m);
    run.param("extrude", a.extrude);
    run.param("zlo", a.zlo);
    run.param("zhi", a.zhi);
    run.param("dot_radius", a.dot_radius);
    let text = run.read_string(&a.model)?;
    let model = MlpModel::from_json(&text)
        .map_err(|e| CliError::user(format!("{}: {e}", a.model.display())))?;
    let letters = read_letters(run, &a.input)?;
    let [letter] = &letters[..] else {
        return Err(CliError::user("--in must name a single letter file"));
    };
    let letter = if a.m > 0 {
        resample_by_arclength(letter, a.m)?
    } else {
        letter.clone()
    };
    let generated = generate_letter(&model, &letter)?;
    if a.extrude {
        run.write(
            &a.out,
            trajectory_to_string(&extrude_z(&generated, seed, (a.zlo, a.zhi))?),
        )?;
    } else {
        run.write(&a.out, trajectory_to_string(&generated))?;
    }
    if let Some(path) = &a.svg {
        run.write(path, svg(&[to_dotted(generated.points(), a.dot_radius)?])?)?;
    }
    Ok(())
}

/// Oblique view used to draw a 3D curve on the page.
fn isometric(p: Point3) -> Point2 {
    let (s, c) = std::f64::consts::FRAC_PI_6.sin_cos();
    Point2::new((p.x - p.y) * c, p.z + (p.x + p.y) * s)
}

/// Scales a path into a unit-height cell `slot` cells to the right.
fn into_panel(path: &VectorPath, slot: usize) -> VectorPath {
    let bb = path.bounding_box().expect("non-empty path");
    let scale = 1.0 / bb.width().max(bb.height()).max(f64::MIN_POSITIVE);
    let offset = Point2::new(1.25 * slot as f64, 0.0);
    let mut out = path.transformed(|p| (p - bb.min) * scale + offset);
    out.style.stroke_width = 0.006;
    out
}

fn biopsy(run: &mut Run, a: &BiopsyArgs) -> Result<(), CliError> {
    run.param("plane", format!("{:?}", a.plane).to_lowercase());
    run.param(
        "epsilon",
        match a.epsilon {
            Epsilon::Auto => serde_json::Value::from("auto"),
            Epsilon::Value(v) => serde_json::Value::from(v),
        },
    );
    run.param("samples", a.samples);
    let raw = read_3d(run, &a.input)?;
    let curve = interpolate_spline(&raw)?;
    let sampled = sample_curve(&curve, a.samples)?;
    let flat = project(&sampled, a.plane)?;
    let epsilon = match a.epsilon {
        Epsilon::Auto => EPSILON_RATIO * bounding_box(&flat).diagonal(),
        Epsilon::Value(v) => v,
    };
    let simplified = simplify_rdp(&flat, epsilon)?;
    run.log(format!(
        "{} recorded, {} sampled, {} after simplification (epsilon {epsilon})",
        raw.len(),
        sampled.len(),
        simplified.len()
    ));

    let view = sampled.map(|&p| isometric(p))?;
    let panels = [
        fit_bezier(&view, fit_tolerance(&view, None)?)?,
        fit_bezier(&flat, fit_tolerance(&flat, None)?)?,
        VectorPath::polyline(simplified.points(), PathStyle::default())?,
    ];
    let panels: Vec<VectorPath> = panels
        .iter()
        .enumerate()
        .map(|(i, p)| into_panel(p, i))
        .collect();

    run.write(&a.curve, trajectory_to_string(&sampled))?;
    run.write(&a.projected, trajectory_to_string(&flat))?;
    run.write(&a.out, trajectory_to_string(&simplified))?;
    run.write(&a.svg, svg(&panels)?)?;
    Ok(())
}

fn replay(cli: &Cli, a: &ReplayArgs) -> Result<(), CliError> {
    let recorded = RunManifest::read(&a.manifest)?;
    for input in &recorded.inputs {
        let bytes =
            fs::read(&input.path).map_err(|e| CliError::user(format!("{}: {e}", input.path)))?;
        if sha256_hex(&bytes) != input.sha256 {
            return Err(CliError::user(format!(
                "input {} changed since the recorded run",
                input.path
            )));
        }
    }
    let args = std::iter::once("trajart".to_owned()).chain(recorded.argv.iter().cloned());
    let mut again = <Cli as clap::Parser>::try_parse_from(args)
        .map_err(|e| CliError::user(format!("recorded arguments: {e}")))?;
    if matches!(again.command, Command::Replay(_)) {
        return Err(CliError::user("a replay manifest cannot be replayed"));
    }
    if cli.out_dir.is_some() {
        again.out_dir = cli.out_dir.clone();
    }
    again.quiet |= cli.quiet;
    let out_dir = again.out_dir.clone().unwrap_or_else(|| PathBuf::from("."));
    run(&again, &recorded.argv)?;
    for output in &recorded.outputs {
        let path = out_dir.join(&output.path);
        let bytes =
            fs::read(&path).map_err(|e| CliError::user(format!("{}: {e}", path.display())))?;
        if sha256_hex(&bytes) != output.sha256 {
            return Err(CliError::Invariant(format!(
                "replayed output {} differs from the recorded run",
                output.path
            )));
        }
    }
    if !cli.quiet {
        eprintln!(
            "replayed {}: {} outputs identical",
            recorded.subcommand,
            recorded.outputs.len()
        );
    }
    Ok(())
}
