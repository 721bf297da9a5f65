//! Monte-Carlo walks, their restriction to the observable set, and the
//! empirical estimate of `Λ_K` from a single long observation stream.
//!
//! The generator is ChaCha8 seeded through `seed_from_u64`; each step draws
//! one uniform `f64` in `[0, 1)` and inverts the cumulative row of `P`.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::par::Execution;
use crate::walk::ObservationData;

/// Steps discarded before recording by [`simulate_observations`].
pub const DEFAULT_BURN_IN: usize = 1000;

/// Cumulative rows of a transition matrix.
#[derive(Debug, Clone)]
pub struct WalkSampler {
    n: usize,
    cumulative: Vec<f64>,
}

impl WalkSampler {
    pub fn new(p: &Matrix) -> Result<Self> {
        if !p.is_square() || p.nrows() == 0 {
            return Err(Error::DimensionMismatch(format!("transition matrix {:?}", p.shape())));
        }
        let n = p.nrows();
        let mut cumulative = Vec::with_capacity(n * n);
        for x in 0..n {
            let mut acc = 0.0;
            for y in 0..n {
                let v = p[(x, y)];
                if !(v >= 0.0 && v.is_finite()) {
                    return Err(Error::InvalidParameter(format!("P({x},{y}) = {v} is not a probability")));
                }
                acc += v;
                cumulative.push(acc);
            }
            if acc.is_nan() || acc <= 0.0 {
                return Err(Error::ZeroRowSum(x));
            }
        }
        Ok(Self { n, cumulative })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Next state from `x` given a uniform draw `u ∈ [0, 1)`.
    pub fn step(&self, x: usize, u: f64) -> usize {
        let row = &self.cumulative[x * self.n..(x + 1) * self.n];
        let target = u * row[self.n - 1];
        row.partition_point(|&c| c <= target).min(self.n - 1)
    }

    pub fn walk<R: Rng>(&self, x0: usize, steps: usize, rng: &mut R) -> Vec<usize> {
        let mut traj = Vec::with_capacity(steps + 1);
        let mut x = x0;
        traj.push(x);
        for _ in 0..steps {
            x = self.step(x, rng.random::<f64>());
            traj.push(x);
        }
        traj
    }
}

/// Trajectory `H_0 = x0, ..., H_steps`, fully determined by `seed`.
pub fn simulate_walk(p: &Matrix, x0: usize, steps: usize, seed: u64) -> Result<Vec<usize>> {
    let sampler = WalkSampler::new(p)?;
    if x0 >= sampler.n() {
        return Err(Error::InvalidStart { start: x0, n: sampler.n() });
    }
    if steps == 0 {
        return Err(Error::InvalidParameter("need at least one step".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(sampler.walk(x0, steps, &mut rng))
}

/// Independent walks, one per `(start, seed)` job, returned in job order.
pub fn simulate_many(
    p: &Matrix,
    jobs: &[(usize, u64)],
    steps: usize,
    exec: Execution,
) -> Result<Vec<Vec<usize>>> {
    exec.map_slice(jobs, |&(x0, seed)| simulate_walk(p, x0, steps, seed))
        .into_iter()
        .collect()
}

/// One observed time step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Observation {
    Hidden,
    Seen(usize),
}

impl fmt::Display for Observation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Observation::Hidden => f.write_str("-"),
            Observation::Seen(v) => write!(f, "{v}"),
        }
    }
}

impl FromStr for Observation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "-" => Ok(Observation::Hidden),
            t => t
                .parse()
                .map(Observation::Seen)
                .map_err(|_| Error::Parse(format!("bad observation {t:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObservationStream {
    pub observable: usize,
    pub steps: Vec<Observation>,
}

impl ObservationStream {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// One line per step: the vertex id, or `-` when hidden.
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(self.steps.len() * 3);
        for s in &self.steps {
            out.push_str(&s.to_string());
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str, observable: usize) -> Result<Self> {
        if observable == 0 {
            return Err(Error::EmptyObservableSet);
        }
        let steps = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(str::parse)
            .collect::<Result<Vec<Observation>>>()?;
        if let Some(Observation::Seen(v)) = steps
            .iter()
            .find(|s| matches!(s, Observation::Seen(v) if *v >= observable))
        {
            return Err(Error::Parse(format!("observed id {v} outside 0..{observable}")));
        }
        Ok(Self { observable, steps })
    }
}

/// Hides every vertex with id `>= observable`.
pub fn observe(traj: &[usize], observable: usize) -> Result<ObservationStream> {
    if observable == 0 {
        return Err(Error::EmptyObservableSet);
    }
    let steps = traj
        .iter()
        .map(|&v| if v < observable { Observation::Seen(v) } else { Observation::Hidden })
        .collect();
    Ok(ObservationStream { observable, steps })
}

/// Runs `burn_in + steps` steps and keeps the last `steps + 1` states,
/// restricted to the observable set.
pub fn simulate_observations(
    p: &Matrix,
    observable: usize,
    x0: usize,
    steps: usize,
    burn_in: usize,
    seed: u64,
) -> Result<ObservationStream> {
    let traj = simulate_walk(p, x0, steps + burn_in, seed)?;
    observe(&traj[burn_in..], observable)
}

/// Counting estimate of `Λ_K` together with the number of usable visits per
/// observable vertex. Rows of unvisited vertices are NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalData {
    pub estimate: ObservationData,
    pub visit_counts: Vec<u64>,
    pub horizon: usize,
}

impl EmpiricalData {
    pub fn undefined_rows(&self) -> Vec<usize> {
        self.visit_counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c == 0)
            .map(|(x, _)| x)
            .collect()
    }

    /// `1 / sqrt(min visits)`: the order of the binomial standard error of
    /// the least visited row. Infinite when some row is unvisited.
    pub fn noise_floor(&self) -> f64 {
        match self.visit_counts.iter().min() {
            Some(&c) if c > 0 => 1.0 / (c as f64).sqrt(),
            _ => f64::INFINITY,
        }
    }
}

struct Tally {
    visits: Vec<u64>,
    // counts[k][x * n + y] for lag k + 1
    counts: Vec<Vec<u64>>,
}

impl Tally {
    fn new(n: usize, horizon: usize) -> Self {
        Self {
            visits: vec![0; n],
            counts: vec![vec![0; n * n]; horizon],
        }
    }

    fn merge(mut self, other: Tally) -> Tally {
        for (a, b) in self.visits.iter_mut().zip(other.visits) {
            *a += b;
        }
        for (ka, kb) in self.counts.iter_mut().zip(other.counts) {
            for (a, b) in ka.iter_mut().zip(kb) {
                *a += b;
            }
        }
        self
    }
}

const CHUNK: usize = 1 << 16;

/// Estimates `(P^k)₁₁(x, y)` as the fraction of times `t ≤ T − K` with `x`
/// seen at `t` for which `y` is seen at `t + k`. The window is the same for
/// every lag, so one visit count serves all `k`.
pub fn estimate_observation_data(stream: &ObservationStream, horizon: usize) -> Result<EmpiricalData> {
    estimate_observation_data_with(stream, horizon, Execution::default())
}

pub fn estimate_observation_data_with(
    stream: &ObservationStream,
    horizon: usize,
    exec: Execution,
) -> Result<EmpiricalData> {
    if horizon == 0 {
        return Err(Error::InvalidParameter("horizon must be at least 1".into()));
    }
    if stream.observable == 0 {
        return Err(Error::EmptyObservableSet);
    }
    if stream.len() <= horizon {
        return Err(Error::InsufficientData(format!(
            "stream of length {} is too short for horizon {horizon}",
            stream.len()
        )));
    }
    let n = stream.observable;
    let steps = &stream.steps;
    let window = steps.len() - horizon;
    let chunks = window.div_ceil(CHUNK);
    let tally = exec
        .map(chunks, |c| {
            let mut t = Tally::new(n, horizon);
            for s in c * CHUNK..((c + 1) * CHUNK).min(window) {
                if let Observation::Seen(x) = steps[s] {
                    t.visits[x] += 1;
                    for k in 1..=horizon {
                        if let Observation::Seen(y) = steps[s + k] {
                            t.counts[k - 1][x * n + y] += 1;
                        }
                    }
                }
            }
            t
        })
        .into_iter()
        .fold(Tally::new(n, horizon), Tally::merge);

    let mats = tally
        .counts
        .iter()
        .map(|counts| {
            Matrix::from_fn(n, n, |x, y| match tally.visits[x] {
                0 => f64::NAN,
                v => counts[x * n + y] as f64 / v as f64,
            })
        })
        .collect();
    Ok(EmpiricalData {
        estimate: ObservationData { observable: n, mats },
        visit_counts: tally.visits,
        horizon,
    })
}
