//! Letterform synthesis with a small feedforward network.
//!
//! The network maps one planar coordinate to another through two `tanh`
//! hidden layers of ten units and a linear output layer:
//!
//! ```text
//! a1 = tanh(x · W1 + b1)
//! a2 = tanh(a1 · W2 + b2)
//! y  = a2 · W3 + b3
//! ```
//!
//! Training data comes from a handful of demonstrations enlarged to every
//! ordered pair of distinct letters. Letters are resampled to a common length
//! so that point `i` of the input letter is trained toward point `i` of the
//! output letter. One pair is drawn per SGD step and the step follows the
//! exact gradient of `Σ (y_pred − y_actual)² / 2` over that pair.

use rand::distr::{Distribution, Uniform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trajectory::{resample_by_arclength, Point2, Point3, RenderHint, Trajectory};

pub const INPUT: usize = 2;
pub const HIDDEN: usize = 10;
pub const OUTPUT: usize = 2;

/// Shapes of `w1, b1, w2, b2, w3, b3`, in flattening order.
pub const PARAMETER_SHAPES: [&[usize]; 6] = [
    &[INPUT, HIDDEN],
    &[HIDDEN],
    &[HIDDEN, HIDDEN],
    &[HIDDEN],
    &[HIDDEN, OUTPUT],
    &[OUTPUT],
];

pub const PARAMETER_COUNT: usize =
    INPUT * HIDDEN + HIDDEN + HIDDEN * HIDDEN + HIDDEN + HIDDEN * OUTPUT + OUTPUT;

const MODEL_FORMAT: &str = "trajart-mlp";
const PAIRS_FORMAT: &str = "trajart-pairs";
const FORMAT_VERSION: u32 = 1;

/// Weights and biases of the 2-10-10-2 network. Row-vector convention:
/// `w1[i][j]` connects input `i` to hidden unit `j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub w1: [[f64; HIDDEN]; INPUT],
    pub b1: [f64; HIDDEN],
    pub w2: [[f64; HIDDEN]; HIDDEN],
    pub b2: [f64; HIDDEN],
    pub w3: [[f64; OUTPUT]; HIDDEN],
    pub b3: [f64; OUTPUT],
}

/// Intermediate values of one forward pass.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Activations {
    pub a1: [f64; HIDDEN],
    pub a2: [f64; HIDDEN],
    pub output: [f64; OUTPUT],
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitScheme {
    /// Weights U[0, 1], biases U[0, 0.1].
    #[default]
    Positive,
    /// Weights U[-1, 1], biases U[-0.1, 0.1].
    Symmetric,
}

impl MlpModel {
    pub fn zeros() -> Self {
        Self {
            w1: [[0.0; HIDDEN]; INPUT],
            b1: [0.0; HIDDEN],
            w2: [[0.0; HIDDEN]; HIDDEN],
            b2: [0.0; HIDDEN],
            w3: [[0.0; OUTPUT]; HIDDEN],
            b3: [0.0; OUTPUT],
        }
    }

    /// Visits every parameter in flattening order: w1 row-major, b1, w2, b2, w3, b3.
    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.w1
            .iter_mut()
            .flatten()
            .chain(self.b1.iter_mut())
            .chain(self.w2.iter_mut().flatten())
            .chain(self.b2.iter_mut())
            .chain(self.w3.iter_mut().flatten())
            .chain(self.b3.iter_mut())
    }

    pub fn params(&self) -> impl Iterator<Item = f64> + '_ {
        self.w1
            .iter()
            .flatten()
            .chain(&self.b1)
            .chain(self.w2.iter().flatten())
            .chain(&self.b2)
            .chain(self.w3.iter().flatten())
            .chain(&self.b3)
            .copied()
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.params().collect()
    }

    pub fn from_flat(values: &[f64]) -> Result<Self> {
        if values.len() != PARAMETER_COUNT {
            return Err(Error::InvalidArgument(format!(
                "expected {PARAMETER_COUNT} parameters, got {}",
                values.len()
            )));
        }
        let mut m = Self::zeros();
        for (slot, v) in m.params_mut().zip(values) {
            *slot = *v;
        }
        Ok(m)
    }

    pub fn is_finite(&self) -> bool {
        self.params().all(f64::is_finite)
    }

    pub fn forward_trace(&self, x: Point2) -> Activations {
        let input = [x.x, x.y];
        let mut a1 = self.b1;
        for (xi, row) in input.iter().zip(&self.w1) {
            for (acc, w) in a1.iter_mut().zip(row) {
                *acc += xi * w;
            }
        }
        a1.iter_mut().for_each(|v| *v = v.tanh());

        let mut a2 = self.b2;
        for (ai, row) in a1.iter().zip(&self.w2) {
            for (acc, w) in a2.iter_mut().zip(row) {
                *acc += ai * w;
            }
        }
        a2.iter_mut().for_each(|v| *v = v.tanh());

        let mut output = self.b3;
        for (ai, row) in a2.iter().zip(&self.w3) {
            for (acc, w) in output.iter_mut().zip(row) {
                *acc += ai * w;
            }
        }
        Activations { a1, a2, output }
    }

    fn add_scaled(&mut self, scale: f64, other: &Self) {
        for (p, g) in self.params_mut().zip(other.params()) {
            *p += scale * g;
        }
    }

    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct File<'a> {
            format: &'a str,
            version: u32,
            #[serde(flatten)]
            model: &'a MlpModel,
        }
        serde_json::to_string_pretty(&File {
            format: MODEL_FORMAT,
            version: FORMAT_VERSION,
            model: self,
        })
        .expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct File {
            format: String,
            version: u32,
            #[serde(flatten)]
            model: MlpModel,
        }
        let f: File = serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
        if f.format != MODEL_FORMAT || f.version != FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported model `{}` v{}",
                f.format, f.version
            )));
        }
        if !f.model.is_finite() {
            return Err(Error::NonFinite);
        }
        Ok(f.model)
    }
}

/// Draws a model with non-negative ranges (weights U[0,1], biases U[0,0.1]).
pub fn init_mlp(seed: u64) -> MlpModel {
    init_mlp_with(seed, InitScheme::Positive)
}

pub fn init_mlp_with(seed: u64, scheme: InitScheme) -> MlpModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (weights, biases) = match scheme {
        InitScheme::Positive => (
            Uniform::new_inclusive(0.0, 1.0),
            Uniform::new_inclusive(0.0, 0.1),
        ),
        InitScheme::Symmetric => (
            Uniform::new_inclusive(-1.0, 1.0),
            Uniform::new_inclusive(-0.1, 0.1),
        ),
    };
    let (weights, biases) = (weights.expect("valid range"), biases.expect("valid range"));
    let mut m = MlpModel::zeros();
    m.w1.iter_mut()
        .flatten()
        .for_each(|v| *v = weights.sample(&mut rng));
    m.b1.iter_mut().for_each(|v| *v = biases.sample(&mut rng));
    m.w2.iter_mut()
        .flatten()
        .for_each(|v| *v = weights.sample(&mut rng));
    m.b2.iter_mut().for_each(|v| *v = biases.sample(&mut rng));
    m.w3.iter_mut()
        .flatten()
        .for_each(|v| *v = weights.sample(&mut rng));
    m.b3.iter_mut().for_each(|v| *v = biases.sample(&mut rng));
    m
}

pub fn forward(model: &MlpModel, x: Point2) -> Point2 {
    let [ox, oy] = model.forward_trace(x).output;
    Point2::new(ox, oy)
}

/// Σ (predicted − actual)² / 2 over every coordinate of every point.
pub fn train_cost(predicted: &[Point2], actual: &[Point2]) -> Result<f64> {
    if predicted.len() != actual.len() {
        return Err(Error::InvalidArgument(format!(
            "length mismatch: {} predicted vs {} actual",
            predicted.len(),
            actual.len()
        )));
    }
    Ok(predicted
        .iter()
        .zip(actual)
        .map(|(p, a)| {
            let d = *p - *a;
            d.x * d.x + d.y * d.y
        })
        .sum::<f64>()
        / 2.0)
}

/// Cost of mapping `input` onto `target` point by point, with its gradient
/// with respect to every parameter.
pub fn cost_and_gradient(model: &MlpModel, input: &[Point2], target: &[Point2]) -> (f64, MlpModel) {
    let mut grad = MlpModel::zeros();
    let mut cost = 0.0;
    for (&x, &t) in input.iter().zip(target) {
        let act = model.forward_trace(x);
        let dy = [act.output[0] - t.x, act.output[1] - t.y];
        cost += 0.5 * (dy[0] * dy[0] + dy[1] * dy[1]);

        // Output layer.
        let mut dz2 = [0.0; HIDDEN];
        for h in 0..HIDDEN {
            let mut da2 = 0.0;
            for o in 0..OUTPUT {
                grad.w3[h][o] += act.a2[h] * dy[o];
                da2 += model.w3[h][o] * dy[o];
            }
            dz2[h] = da2 * (1.0 - act.a2[h] * act.a2[h]);
        }
        for o in 0..OUTPUT {
            grad.b3[o] += dy[o];
        }

        // Second hidden layer.
        let mut dz1 = [0.0; HIDDEN];
        for i in 0..HIDDEN {
            let mut da1 = 0.0;
            for j in 0..HIDDEN {
                grad.w2[i][j] += act.a1[i] * dz2[j];
                da1 += model.w2[i][j] * dz2[j];
            }
            dz1[i] = da1 * (1.0 - act.a1[i] * act.a1[i]);
        }
        for j in 0..HIDDEN {
            grad.b2[j] += dz2[j];
        }

        // First hidden layer.
        let xin = [x.x, x.y];
        for i in 0..INPUT {
            for j in 0..HIDDEN {
                grad.w1[i][j] += xin[i] * dz1[j];
            }
        }
        for j in 0..HIDDEN {
            grad.b1[j] += dz1[j];
        }
    }
    (cost, grad)
}

/// Input and output letter indices of one training pair, 1-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LetterPair {
    pub input: usize,
    pub output: usize,
}

/// Ordered pairs of distinct letters, all resampled to a common length.
#[derive(Clone, Debug, PartialEq)]
pub struct PairDataset {
    letters: Vec<Trajectory<Point2>>,
    pairs: Vec<LetterPair>,
    common_length: usize,
}

impl PairDataset {
    pub fn pairs(&self) -> &[LetterPair] {
        &self.pairs
    }

    pub fn letters(&self) -> &[Trajectory<Point2>] {
        &self.letters
    }

    pub fn common_length(&self) -> usize {
        self.common_length
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn letter(&self, index: usize) -> &Trajectory<Point2> {
        &self.letters[index - 1]
    }

    pub fn input(&self, pair: LetterPair) -> &Trajectory<Point2> {
        self.letter(pair.input)
    }

    pub fn output(&self, pair: LetterPair) -> &Trajectory<Point2> {
        self.letter(pair.output)
    }

    fn with_pairs(&self, pairs: Vec<LetterPair>) -> Self {
        Self {
            letters: self.letters.clone(),
            pairs,
            common_length: self.common_length,
        }
    }

    /// Total train cost of `model` over every pair.
    pub fn total_cost(&self, model: &MlpModel) -> f64 {
        self.pairs
            .iter()
            .map(|&pair| {
                let predicted: Vec<Point2> = self
                    .input(pair)
                    .points()
                    .iter()
                    .map(|&p| forward(model, p))
                    .collect();
                train_cost(&predicted, self.output(pair).points()).expect("equal lengths")
            })
            .sum()
    }

    pub fn to_json(&self) -> String {
        let file = PairsFile {
            format: PAIRS_FORMAT.into(),
            version: FORMAT_VERSION,
            common_length: self.common_length,
            letters: self
                .letters
                .iter()
                .map(|t| LetterRecord {
                    label: t.label().map(str::to_owned),
                    points: t.points().iter().map(|p| [p.x, p.y]).collect(),
                })
                .collect(),
            pairs: self.pairs.iter().map(|p| [p.input, p.output]).collect(),
        };
        serde_json::to_string_pretty(&file).expect("pairs serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: PairsFile =
            serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
        if file.format != PAIRS_FORMAT || file.version != FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported pairs file `{}` v{}",
                file.format, file.version
            )));
        }
        let mut letters = Vec::with_capacity(file.letters.len());
        for rec in file.letters {
            if rec.points.len() != file.common_length {
                return Err(Error::Format(
                    "letter length differs from common_length".into(),
                ));
            }
            let t = Trajectory::new(rec.points.iter().map(|&[x, y]| Point2::new(x, y)).collect())?;
            letters.push(match rec.label {
                Some(l) => t.labeled(l),
                None => t,
            });
        }
        let mut pairs = Vec::with_capacity(file.pairs.len());
        for [input, output] in file.pairs {
            let in_range = |i: usize| (1..=letters.len()).contains(&i);
            if input == output || !in_range(input) || !in_range(output) {
                return Err(Error::Format(format!("invalid pair ({input}, {output})")));
            }
            pairs.push(LetterPair { input, output });
        }
        Ok(Self {
            letters,
            pairs,
            common_length: file.common_length,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct LetterRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<String>,
    points: Vec<[f64; 2]>,
}

#[derive(Serialize, Deserialize)]
struct PairsFile {
    format: String,
    version: u32,
    common_length: usize,
    letters: Vec<LetterRecord>,
    pairs: Vec<[usize; 2]>,
}

/// Builds all `n·(n−1)` ordered pairs of distinct letters, input-major.
pub fn build_pairs(letters: &[Trajectory<Point2>], m: usize) -> Result<PairDataset> {
    if letters.len() < 2 {
        return Err(Error::InsufficientPoints {
            needed: 2,
            got: letters.len(),
        });
    }
    let letters = letters
        .iter()
        .map(|t| resample_by_arclength(t, m))
        .collect::<Result<Vec<_>>>()?;
    let n = letters.len();
    let pairs = (1..=n)
        .flat_map(|i| {
            (1..=n).filter(move |&j| j != i).map(move |j| LetterPair {
                input: i,
                output: j,
            })
        })
        .collect();
    Ok(PairDataset {
        letters,
        pairs,
        common_length: m,
    })
}

/// Holds out exactly one seed-chosen pair as the test set.
pub fn split_train_test(d: &PairDataset, seed: u64) -> Result<(PairDataset, PairDataset)> {
    if d.len() < 2 {
        return Err(Error::InvalidArgument(
            "need at least two pairs to split".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let held = rng.random_range(0..d.len());
    let train = d
        .pairs
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != held)
        .map(|(_, p)| *p)
        .collect();
    Ok((d.with_pairs(train), d.with_pairs(vec![d.pairs[held]])))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub iterations: usize,
    pub seed: u64,
    /// Cost over the whole training set is recorded every this many steps.
    pub log_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            iterations: 10_000,
            seed: 0,
            log_every: 100,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostSample {
    pub iteration: usize,
    pub cost: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainReport {
    /// Training-set cost before the first step, every `log_every` steps, and
    /// after the last step.
    pub cost_trace: Vec<CostSample>,
    pub final_cost: f64,
}

impl TrainReport {
    pub fn initial_cost(&self) -> f64 {
        self.cost_trace[0].cost
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("iteration,cost\n");
        for c in &self.cost_trace {
            s.push_str(&format!("{},{}\n", c.iteration, c.cost));
        }
        s
    }
}

/// Stochastic gradient descent, one uniformly drawn pair per step.
pub fn train(
    model: &MlpModel,
    train_set: &PairDataset,
    cfg: &TrainConfig,
) -> Result<(MlpModel, TrainReport)> {
    if !(cfg.learning_rate >= 0.0 && cfg.learning_rate.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "learning rate must be non-negative, got {}",
            cfg.learning_rate
        )));
    }
    if train_set.is_empty() {
        return Err(Error::InvalidArgument("empty training set".into()));
    }
    let log_every = cfg.log_every.max(1);
    let mut model = model.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut trace = Vec::with_capacity(cfg.iterations / log_every + 2);

    let log = |iteration: usize, model: &MlpModel, trace: &mut Vec<CostSample>| {
        let cost = train_set.total_cost(model);
        if !cost.is_finite() {
            return Err(Error::NonFiniteCost { iteration });
        }
        trace.push(CostSample { iteration, cost });
        Ok(())
    };

    log(0, &model, &mut trace)?;
    for iteration in 1..=cfg.iterations {
        let pair = train_set.pairs[rng.random_range(0..train_set.len())];
        let (cost, grad) = cost_and_gradient(
            &model,
            train_set.input(pair).points(),
            train_set.output(pair).points(),
        );
        if !cost.is_finite() {
            return Err(Error::NonFiniteCost { iteration });
        }
        model.add_scaled(-cfg.learning_rate, &grad);
        if iteration % log_every == 0 || iteration == cfg.iterations {
            log(iteration, &model, &mut trace)?;
        }
    }
    if !model.is_finite() {
        return Err(Error::NonFiniteCost {
            iteration: cfg.iterations,
        });
    }
    let final_cost = trace.last().expect("initial sample").cost;
    Ok((
        model,
        TrainReport {
            cost_trace: trace,
            final_cost,
        },
    ))
}

/// Runs every point of `input` through the network; the result is marked
/// for dotted rendering.
pub fn generate_letter(model: &MlpModel, input: &Trajectory<Point2>) -> Result<Trajectory<Point2>> {
    let out = input.map(|&p| forward(model, p))?;
    Ok(out.rendered_as(RenderHint::Dotted))
}

/// Lifts a planar trajectory into 3D with i.i.d. uniform z in `[low, high]`.
pub fn extrude_z(
    t: &Trajectory<Point2>,
    seed: u64,
    z_range: (f64, f64),
) -> Result<Trajectory<Point3>> {
    let (low, high) = z_range;
    if !(low <= high) || !low.is_finite() || !high.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "invalid z range [{low}, {high}]"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z = Uniform::new_inclusive(low, high).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    t.map(|p| Point3::new(p.x, p.y, z.sample(&mut rng)))
}
