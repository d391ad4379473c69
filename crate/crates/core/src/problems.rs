//! Convex test problems with known optima.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{check_positive, Error, Result};
use crate::schedule::Schedule;
use crate::sgd::{noise_stream, run_sgd, Domain, Oracle, Problem, RunOptions, StepsizePlan};

/// Noise model of [`AbsProblem`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AbsNoise {
    None,
    /// `g = G sign(x) + G r` with `r` uniform on `{-1, +1}`: unbiased, with
    /// second moment `2 G^2`.
    Rademacher,
}

/// `f(x) = G |x|` on `[-D/2, D/2]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AbsProblem {
    grad_scale: f64,
    diameter: f64,
    noise: AbsNoise,
    domain: Domain,
}

impl AbsProblem {
    pub fn new(grad_scale: f64, diameter: f64, noise: AbsNoise) -> Result<Self> {
        check_positive("G", grad_scale)?;
        check_positive("D", diameter)?;
        Ok(Self {
            grad_scale,
            diameter,
            noise,
            domain: Domain::interval(-diameter / 2.0, diameter / 2.0)?,
        })
    }

    pub fn grad_scale(&self) -> f64 {
        self.grad_scale
    }

    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    pub fn noise(&self) -> AbsNoise {
        self.noise
    }

    /// Square root of the oracle's second-moment bound: `G`, or `sqrt(2) G`
    /// with Rademacher noise.
    pub fn declared_grad_bound(&self) -> f64 {
        match self.noise {
            AbsNoise::None => self.grad_scale,
            AbsNoise::Rademacher => std::f64::consts::SQRT_2 * self.grad_scale,
        }
    }
}

/// `(G |x|, G sign(x))` with `sign(0) = +1`.
pub fn abs_value_and_subgradient(p: &AbsProblem, x: f64) -> (f64, f64) {
    let g = if x >= 0.0 {
        p.grad_scale
    } else {
        -p.grad_scale
    };
    (p.grad_scale * x.abs(), g)
}

struct AbsOracle<'a> {
    problem: &'a AbsProblem,
    rng: ChaCha8Rng,
}

impl Oracle for AbsOracle<'_> {
    fn sample(&mut self, x: &[f64], out: &mut [f64]) {
        let (_, g) = abs_value_and_subgradient(self.problem, x[0]);
        out[0] = match self.problem.noise {
            AbsNoise::None => g,
            AbsNoise::Rademacher => {
                let r = if self.rng.gen::<bool>() { 1.0 } else { -1.0 };
                g + self.problem.grad_scale * r
            }
        };
    }
}

impl Problem for AbsProblem {
    fn dim(&self) -> usize {
        1
    }
    fn domain(&self) -> &Domain {
        &self.domain
    }
    fn value(&self, x: &[f64]) -> f64 {
        self.grad_scale * x[0].abs()
    }
    fn oracle(&self, seed: u64) -> Box<dyn Oracle + '_> {
        Box::new(AbsOracle {
            problem: self,
            rng: noise_stream(seed),
        })
    }
    fn minimizer(&self) -> Option<Vec<f64>> {
        Some(vec![0.0])
    }
    fn optimal_value(&self) -> Option<f64> {
        Some(0.0)
    }
}

/// `f(x) = (beta / 2) ||x - x*||^2` on a ball, with additive Gaussian
/// gradient noise of total variance `sigma^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadProblem {
    beta: f64,
    sigma: f64,
    x_star: Vec<f64>,
    domain: Domain,
}

impl QuadProblem {
    /// `x_star` must lie in the ball of radius `radius` around the origin.
    pub fn new(beta: f64, sigma: f64, x_star: Vec<f64>, radius: f64) -> Result<Self> {
        check_positive("beta", beta)?;
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::Domain {
                name: "sigma",
                value: sigma,
                expected: "[0, inf)",
            });
        }
        if x_star.is_empty() {
            return Err(Error::InvalidArgument("dimension must be positive".into()));
        }
        let domain = Domain::ball(vec![0.0; x_star.len()], radius)?;
        if !domain.contains(&x_star, 0.0) {
            return Err(Error::InvalidArgument(
                "minimizer lies outside the ball".into(),
            ));
        }
        Ok(Self {
            beta,
            sigma,
            x_star,
            domain,
        })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// `beta (x - x*)`.
    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.x_star)
            .map(|(a, b)| self.beta * (a - b))
            .collect()
    }
}

struct QuadOracle<'a> {
    problem: &'a QuadProblem,
    rng: ChaCha8Rng,
}

impl Oracle for QuadOracle<'_> {
    fn sample(&mut self, x: &[f64], out: &mut [f64]) {
        let p = self.problem;
        let per_coord = p.sigma / (x.len() as f64).sqrt();
        for ((o, a), b) in out.iter_mut().zip(x).zip(&p.x_star) {
            let z: f64 = StandardNormal.sample(&mut self.rng);
            *o = p.beta * (a - b) + per_coord * z;
        }
    }
}

impl Problem for QuadProblem {
    fn dim(&self) -> usize {
        self.x_star.len()
    }
    fn domain(&self) -> &Domain {
        &self.domain
    }
    fn value(&self, x: &[f64]) -> f64 {
        let d2: f64 = x
            .iter()
            .zip(&self.x_star)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        0.5 * self.beta * d2
    }
    fn oracle(&self, seed: u64) -> Box<dyn Oracle + '_> {
        Box::new(QuadOracle {
            problem: self,
            rng: noise_stream(seed),
        })
    }
    fn minimizer(&self) -> Option<Vec<f64>> {
        Some(self.x_star.clone())
    }
    fn optimal_value(&self) -> Option<f64> {
        Some(0.0)
    }
}

/// Default minibatch size of a generated instance.
pub const DEFAULT_BATCH: usize = 1000;

/// Minibatch size of the desk-scale experiment.
pub const DESK_BATCH: usize = 200;

/// Binary classification data and a minibatch cross-entropy objective.
///
/// Features are i.i.d. standard normal, `P(y = 1 | x) = sigmoid(w . x)` for a
/// standard-normal `w`, each label is drawn from that probability and then
/// flipped with probability `flip`. The test set is drawn the same way,
/// independently.
#[derive(Debug, Clone, PartialEq)]
pub struct LogRegProblem {
    n: usize,
    dim: usize,
    flip: f64,
    seed: u64,
    batch: usize,
    true_weights: Vec<f64>,
    train_x: Vec<f64>,
    train_y: Vec<f64>,
    test_x: Vec<f64>,
    test_y: Vec<f64>,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^z) - y z`, computed without overflow.
fn cross_entropy(z: f64, y: f64) -> f64 {
    let softplus = if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    };
    softplus - y * z
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_flip(flip: f64) -> Result<()> {
    if (0.0..=1.0).contains(&flip) {
        Ok(())
    } else {
        Err(Error::Domain {
            name: "flip",
            value: flip,
            expected: "[0, 1]",
        })
    }
}

/// Generates a seed-deterministic logistic-regression instance.
pub fn make_logreg(n: usize, dim: usize, flip: f64, seed: u64) -> Result<LogRegProblem> {
    check_flip(flip)?;
    if n == 0 || dim == 0 {
        return Err(Error::InvalidArgument("n and dim must be positive".into()));
    }
    let mut rng = noise_stream(seed);
    let normal = |rng: &mut ChaCha8Rng| -> f64 { StandardNormal.sample(rng) };
    let true_weights: Vec<f64> = (0..dim).map(|_| normal(&mut rng)).collect();
    let draw = |rng: &mut ChaCha8Rng| {
        let mut xs = Vec::with_capacity(n * dim);
        let mut ys = Vec::with_capacity(n);
        for _ in 0..n {
            let row: Vec<f64> = (0..dim).map(|_| normal(rng)).collect();
            let p = sigmoid(dot(&row, &true_weights));
            let mut y = rng.gen::<f64>() < p;
            if rng.gen::<f64>() < flip {
                y = !y;
            }
            xs.extend(row);
            ys.push(if y { 1.0 } else { 0.0 });
        }
        (xs, ys)
    };
    let (train_x, train_y) = draw(&mut rng);
    let (test_x, test_y) = draw(&mut rng);
    Ok(LogRegProblem {
        n,
        dim,
        flip,
        seed,
        batch: DEFAULT_BATCH.min(n),
        true_weights,
        train_x,
        train_y,
        test_x,
        test_y,
    })
}

impl LogRegProblem {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn flip(&self) -> f64 {
        self.flip
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn batch(&self) -> usize {
        self.batch
    }

    pub fn true_weights(&self) -> &[f64] {
        &self.true_weights
    }

    pub fn with_batch(mut self, batch: usize) -> Result<Self> {
        if batch == 0 || batch > self.n {
            return Err(Error::InvalidArgument(format!(
                "batch size {batch} outside 1..={}",
                self.n
            )));
        }
        self.batch = batch;
        Ok(self)
    }

    /// Minibatches per pass over the training set; a trailing partial batch
    /// is dropped.
    pub fn batches_per_epoch(&self) -> usize {
        self.n / self.batch
    }

    fn mean_loss(&self, xs: &[f64], ys: &[f64], w: &[f64]) -> f64 {
        let total: f64 = xs
            .chunks_exact(self.dim)
            .zip(ys)
            .map(|(row, y)| cross_entropy(dot(row, w), *y))
            .sum();
        total / ys.len() as f64
    }

    pub fn train_loss(&self, w: &[f64]) -> f64 {
        self.mean_loss(&self.train_x, &self.train_y, w)
    }

    pub fn test_loss(&self, w: &[f64]) -> f64 {
        self.mean_loss(&self.test_x, &self.test_y, w)
    }

    /// Mean loss over the given training rows.
    pub fn batch_loss(&self, rows: &[usize], w: &[f64]) -> f64 {
        let total: f64 = rows
            .iter()
            .map(|&i| cross_entropy(dot(self.train_row(i), w), self.train_y[i]))
            .sum();
        total / rows.len() as f64
    }

    /// Mean gradient over the given training rows.
    pub fn batch_gradient(&self, rows: &[usize], w: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for &i in rows {
            let row = self.train_row(i);
            let r = sigmoid(dot(row, w)) - self.train_y[i];
            for (o, x) in out.iter_mut().zip(row) {
                *o += r * x;
            }
        }
        let k = rows.len() as f64;
        for o in out.iter_mut() {
            *o /= k;
        }
    }

    /// Fraction of test points classified correctly by `sign(w . x)`.
    pub fn test_accuracy(&self, w: &[f64]) -> f64 {
        let hits = self
            .test_x
            .chunks_exact(self.dim)
            .zip(&self.test_y)
            .filter(|(row, y)| (dot(row, w) > 0.0) == (**y > 0.5))
            .count();
        hits as f64 / self.n as f64
    }

    fn train_row(&self, i: usize) -> &[f64] {
        &self.train_x[i * self.dim..(i + 1) * self.dim]
    }
}

/// Walks through a fresh random permutation of the training set each epoch.
struct MinibatchOracle<'a> {
    problem: &'a LogRegProblem,
    rng: ChaCha8Rng,
    order: Vec<usize>,
    next_batch: usize,
}

impl Oracle for MinibatchOracle<'_> {
    fn sample(&mut self, x: &[f64], out: &mut [f64]) {
        let p = self.problem;
        if self.next_batch == p.batches_per_epoch() {
            self.order.shuffle(&mut self.rng);
            self.next_batch = 0;
        }
        let start = self.next_batch * p.batch;
        self.next_batch += 1;
        p.batch_gradient(&self.order[start..start + p.batch], x, out);
    }
}

impl Problem for LogRegProblem {
    fn dim(&self) -> usize {
        self.dim
    }
    fn domain(&self) -> &Domain {
        &Domain::Unconstrained
    }
    fn value(&self, x: &[f64]) -> f64 {
        self.train_loss(x)
    }
    fn oracle(&self, seed: u64) -> Box<dyn Oracle + '_> {
        let mut rng = noise_stream(seed);
        let mut order: Vec<usize> = (0..self.n).collect();
        order.shuffle(&mut rng);
        Box::new(MinibatchOracle {
            problem: self,
            rng,
            order,
            next_batch: 0,
        })
    }
}

const DATASET_FORMAT: &str = "anneal-lab-logreg";
const DATASET_VERSION: u32 = 1;
/// Upper bound on the JSON header length.
const MAX_HEADER: usize = 1 << 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DatasetHeader {
    format: String,
    version: u32,
    n: u64,
    dim: u64,
    seed: u64,
    flip: f64,
    /// Hex SHA-256 of the payload.
    checksum: String,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Serializes a dataset as `u32 LE header length | JSON header | payload`.
///
/// The payload holds, as little-endian `f64`: the true weights, the training
/// features (row-major) and labels, then the test features and labels.
pub fn encode_dataset(p: &LogRegProblem) -> Vec<u8> {
    let mut payload = Vec::with_capacity(8 * (p.dim + 2 * p.n * (p.dim + 1)));
    for v in p
        .true_weights
        .iter()
        .chain(&p.train_x)
        .chain(&p.train_y)
        .chain(&p.test_x)
        .chain(&p.test_y)
    {
        payload.extend_from_slice(&v.to_le_bytes());
    }
    let header = DatasetHeader {
        format: DATASET_FORMAT.into(),
        version: DATASET_VERSION,
        n: p.n as u64,
        dim: p.dim as u64,
        seed: p.seed,
        flip: p.flip,
        checksum: hex(&Sha256::digest(&payload)),
    };
    let json = serde_json::to_vec(&header).expect("header serializes");
    let mut out = Vec::with_capacity(4 + json.len() + payload.len());
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    out.extend_from_slice(&payload);
    out
}

/// Inverse of [`encode_dataset`]. Sizes are validated against the input
/// length before anything is allocated.
pub fn decode_dataset(bytes: &[u8]) -> Result<LogRegProblem> {
    let bad = |m: String| Error::Dataset(m);
    let len_bytes: [u8; 4] = bytes
        .get(..4)
        .and_then(|b| b.try_into().ok())
        .ok_or_else(|| bad("truncated header length".into()))?;
    let header_len = u32::from_le_bytes(len_bytes) as usize;
    if header_len > MAX_HEADER {
        return Err(bad(format!(
            "header length {header_len} exceeds {MAX_HEADER}"
        )));
    }
    let rest = &bytes[4..];
    if rest.len() < header_len {
        return Err(bad("truncated header".into()));
    }
    let (head, payload) = rest.split_at(header_len);
    let header: DatasetHeader =
        serde_json::from_slice(head).map_err(|e| bad(format!("header: {e}")))?;
    if header.format != DATASET_FORMAT || header.version != DATASET_VERSION {
        return Err(bad(format!(
            "unsupported format {} v{}",
            header.format, header.version
        )));
    }
    check_flip(header.flip).map_err(|e| bad(e.to_string()))?;
    let (n, dim) = (header.n, header.dim);
    if n == 0 || dim == 0 {
        return Err(bad("n and dim must be positive".into()));
    }
    // dim + 2 n (dim + 1) values of 8 bytes each.
    let expected = dim
        .checked_add(1)
        .and_then(|d1| {
            n.checked_mul(d1)?
                .checked_mul(2)?
                .checked_add(dim)?
                .checked_mul(8)
        })
        .ok_or_else(|| bad("dataset size overflows".into()))?;
    if payload.len() as u64 != expected {
        return Err(bad(format!(
            "payload has {} bytes, header implies {expected}",
            payload.len()
        )));
    }
    if hex(&Sha256::digest(payload)) != header.checksum {
        return Err(bad("checksum mismatch".into()));
    }
    let (n, dim) = (n as usize, dim as usize);
    let mut values = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")));
    let mut take = |k: usize| -> Vec<f64> { values.by_ref().take(k).collect() };
    let true_weights = take(dim);
    let train_x = take(n * dim);
    let train_y = take(n);
    let test_x = take(n * dim);
    let test_y = take(n);
    let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
    if !(finite(&true_weights) && finite(&train_x) && finite(&test_x)) {
        return Err(bad("non-finite feature or weight".into()));
    }
    if train_y
        .iter()
        .chain(&test_y)
        .any(|y| *y != 0.0 && *y != 1.0)
    {
        return Err(bad("labels must be 0 or 1".into()));
    }
    Ok(LogRegProblem {
        n,
        dim,
        flip: header.flip,
        seed: header.seed,
        batch: DEFAULT_BATCH.min(n),
        true_weights,
        train_x,
        train_y,
        test_x,
        test_y,
    })
}

/// Which lower-bound construction a demo ran.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdversaryKind {
    Fixed,
    Invsqrt,
}

/// One step of a deterministic adversarial run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdversaryStep {
    pub t: u64,
    pub eta: f64,
    pub x: f64,
    pub value: f64,
}

/// Record of an adversarial construction and the checks made on it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdversaryDemo {
    pub kind: AdversaryKind,
    pub diameter: f64,
    pub grad_scale: f64,
    pub steps: u64,
    pub rho: f64,
    /// Base stepsize.
    pub eta: f64,
    /// First step of the projection-free regime (inverse-sqrt only).
    pub t0: Option<u64>,
    /// Measured suboptimality being lower-bounded.
    pub suboptimality: f64,
    pub lower_bound: f64,
    /// Named structural checks, each `true` when it held at every step.
    pub checks: Vec<(String, bool)>,
    pub trajectory: Vec<AdversaryStep>,
}

impl AdversaryDemo {
    /// All checks passed and the lower bound holds up to `1e-12`.
    pub fn verdict(&self) -> bool {
        self.checks.iter().all(|(_, ok)| *ok) && self.suboptimality >= self.lower_bound - 1e-12
    }

    pub fn trajectory_csv(&self) -> String {
        let mut out = String::from("t,eta_t,x_t,f_x_t\n");
        for s in &self.trajectory {
            out.push_str(&format!("{},{},{},{}\n", s.t, s.eta, s.x, s.value));
        }
        out
    }

    /// `f` at a weighted average of `x_1..x_T`, with weights normalized to
    /// sum to one.
    pub fn weighted_value(&self, weights: &[f64]) -> Result<f64> {
        if weights.len() != self.trajectory.len() {
            return Err(Error::InvalidArgument(format!(
                "expected {} weights, got {}",
                self.trajectory.len(),
                weights.len()
            )));
        }
        if weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(Error::InvalidArgument(
                "weights must be non-negative".into(),
            ));
        }
        let total: f64 = weights.iter().sum();
        check_positive("total weight", total)?;
        let x: f64 = weights
            .iter()
            .zip(&self.trajectory)
            .map(|(w, s)| w * s.x)
            .sum::<f64>()
            / total;
        Ok(self.grad_scale * x.abs())
    }
}

fn check_open_range(rho: f64, hi: f64, label: &str) -> Result<()> {
    if rho > 1.0 && rho < hi {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "rho = {rho} is outside the valid interval (1, {hi}) = (1, {label})"
        )))
    }
}

fn deterministic_run(
    problem: &AbsProblem,
    plan: &StepsizePlan,
    x1: f64,
) -> Result<Vec<AdversaryStep>> {
    let opts = RunOptions {
        record_trajectory: true,
        ..RunOptions::default()
    };
    let run = run_sgd(problem, plan, &[x1], 0, &opts)?;
    Ok(run
        .trajectory
        .expect("trajectory requested")
        .into_iter()
        .map(|p| AdversaryStep {
            t: p.t,
            eta: p.eta,
            x: p.x[0],
            value: p.value,
        })
        .collect())
}

/// Fixed stepsize `eta = rho D / (G sqrt(T))` started at `x_1 = 3 G eta / 4`
/// on `G |x|`: the iterates alternate between `3 G eta / 4` and
/// `-G eta / 4`, so any average putting at least as much weight on odd
/// steps as on even ones has suboptimality at least `eta G^2 / 4`.
pub fn fixed_step_adversary(d: f64, g: f64, steps: u64, rho: f64) -> Result<AdversaryDemo> {
    let problem = AbsProblem::new(g, d, AbsNoise::None)?;
    let t = steps as f64;
    check_open_range(rho, t.sqrt() / 2.0, "sqrt(T)/2")?;
    let eta = rho * d / (g * t.sqrt());
    let plan = StepsizePlan::new(eta, Schedule::constant(), steps)?;
    let (hi, lo) = (0.75 * g * eta, -0.25 * g * eta);
    let trajectory = deterministic_run(&problem, &plan, hi)?;
    let tol = 1e-12 * (1.0 + g * eta);
    let alternates = trajectory.iter().all(|s| {
        let want = if s.t % 2 == 1 { hi } else { lo };
        (s.x - want).abs() <= tol
    });
    let mean = trajectory.iter().map(|s| s.x).sum::<f64>() / t;
    Ok(AdversaryDemo {
        kind: AdversaryKind::Fixed,
        diameter: d,
        grad_scale: g,
        steps,
        rho,
        eta,
        t0: None,
        suboptimality: g * mean.abs(),
        lower_bound: eta * g * g / 4.0,
        checks: vec![("alternation".into(), alternates)],
        trajectory,
    })
}

/// Stepsizes `eta_t = rho D / (G sqrt(t))` from `x_1 = D / 2` on `G |x|`:
/// after `T0 = ceil(4 rho^2)` the projection is inactive and consecutive
/// iterates straddle the minimizer, so the running mean of `f(x_t)` stays
/// above `rho D G (sqrt(T) - sqrt(T0)) / T`.
pub fn invsqrt_adversary(d: f64, g: f64, steps: u64, rho: f64) -> Result<AdversaryDemo> {
    let problem = AbsProblem::new(g, d, AbsNoise::None)?;
    let t = steps as f64;
    check_open_range(rho, (t / 16.0).sqrt(), "sqrt(T/16)")?;
    let eta = rho * d / g;
    let plan = StepsizePlan::new(eta, Schedule::inverse_sqrt(), steps)?;
    let trajectory = deterministic_run(&problem, &plan, d / 2.0)?;
    let t0 = (4.0 * rho * rho).ceil() as u64;
    let tol = 1e-12 * (1.0 + d);
    let mut straddle = true;
    let mut free = true;
    for w in trajectory.windows(2) {
        let (a, b) = (w[0], w[1]);
        if a.t < t0 {
            continue;
        }
        straddle &= a.x.abs() + b.x.abs() >= g * a.eta - tol;
        let (_, sg) = abs_value_and_subgradient(&problem, a.x);
        free &= (a.x - a.eta * sg).abs() <= d / 2.0 + tol;
    }
    let mean = trajectory.iter().map(|s| s.value).sum::<f64>() / t;
    Ok(AdversaryDemo {
        kind: AdversaryKind::Invsqrt,
        diameter: d,
        grad_scale: g,
        steps,
        rho,
        eta,
        t0: Some(t0),
        suboptimality: mean,
        lower_bound: rho * d * g * (t.sqrt() - (t0 as f64).sqrt()) / t,
        checks: vec![
            ("straddle".into(), straddle),
            ("projection_inactive".into(), free),
        ],
        trajectory,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn abs_examples() {
        let p = AbsProblem::new(2.0, 10.0, AbsNoise::None).unwrap();
        assert_eq!(abs_value_and_subgradient(&p, -3.0), (6.0, -2.0));
        let q = AbsProblem::new(1.0, 1.0, AbsNoise::None).unwrap();
        assert_eq!(abs_value_and_subgradient(&q, 0.0), (0.0, 1.0));
        assert!(AbsProblem::new(0.0, 1.0, AbsNoise::None).is_err());
        let r = AbsProblem::new(3.0, 1.0, AbsNoise::Rademacher).unwrap();
        assert!((r.declared_grad_bound() - 3.0 * 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn logreg_rejects_bad_flip() {
        assert!(make_logreg(10, 2, 1.5, 0).is_err());
        assert!(make_logreg(10, 2, -0.1, 0).is_err());
        assert!(make_logreg(0, 2, 0.1, 0).is_err());
    }

    #[test]
    fn logreg_is_seed_deterministic() {
        let a = make_logreg(50, 3, 0.1, 9).unwrap();
        let b = make_logreg(50, 3, 0.1, 9).unwrap();
        let c = make_logreg(50, 3, 0.1, 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn noiseless_labels_favour_true_weights() {
        let p = make_logreg(4000, 5, 0.0, 3).unwrap();
        assert!(p.test_accuracy(p.true_weights()) >= 0.5);
    }

    #[test]
    fn cross_entropy_is_stable() {
        assert!((cross_entropy(0.0, 1.0) - 2f64.ln()).abs() < 1e-15);
        assert!(cross_entropy(800.0, 1.0).abs() < 1e-12);
        assert!((cross_entropy(-800.0, 1.0) - 800.0).abs() < 1e-9);
        assert!(sigmoid(-800.0) >= 0.0 && sigmoid(800.0) <= 1.0);
    }

    #[test]
    fn dataset_round_trip() {
        let p = make_logreg(30, 4, 0.1, 2).unwrap();
        let bytes = encode_dataset(&p);
        assert_eq!(decode_dataset(&bytes).unwrap(), p);
    }

    #[test]
    fn dataset_corruption_is_rejected() {
        let p = make_logreg(8, 2, 0.1, 2).unwrap();
        let bytes = encode_dataset(&p);
        assert!(decode_dataset(&bytes[..3]).is_err());
        assert!(decode_dataset(&bytes[..bytes.len() - 1]).is_err());
        let mut flipped = bytes.clone();
        *flipped.last_mut().unwrap() ^= 1;
        assert!(matches!(decode_dataset(&flipped), Err(Error::Dataset(_))));
        let mut huge = bytes.clone();
        huge[..4].copy_from_slice(&u32::MAX.to_le_bytes());
        assert!(decode_dataset(&huge).is_err());
    }

    #[test]
    fn adversary_ranges() {
        assert!(fixed_step_adversary(1.0, 1.0, 400, 10.0).is_err());
        assert!(fixed_step_adversary(1.0, 1.0, 400, 1.0).is_err());
        assert!(invsqrt_adversary(1.0, 1.0, 10_000, 25.0).is_err());
        let e = invsqrt_adversary(1.0, 1.0, 100, 3.0).unwrap_err();
        assert!(e.to_string().contains("(1, 2.5)"), "{e}");
    }

    #[test]
    fn fixed_adversary_second_iterate() {
        let demo = fixed_step_adversary(1.0, 1.0, 400, 4.0).unwrap();
        assert!((demo.trajectory[1].x + 0.25 * demo.eta).abs() <= 1e-15);
        assert!(demo.verdict());
        // Odd-heavy weights keep the bound.
        let w: Vec<f64> = (1..=400)
            .map(|t| if t % 2 == 1 { 2.0 } else { 1.0 })
            .collect();
        assert!(demo.weighted_value(&w).unwrap() >= demo.lower_bound - 1e-12);
    }
}
