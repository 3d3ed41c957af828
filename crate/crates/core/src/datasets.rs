//! Synthetic multi-modal tasks with exact mode oracles.
//!
//! Each [`SyntheticTask`] knows every valid target for a condition. The oracle
//! drives data synthesis, negative-sample rejection and mode-coverage scoring.

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::rng::{SeededRng, Stream};

pub const HYPERBOLA_A: f64 = 0.1;
pub const HYPERBOLA_B: f64 = 1.0;
pub const LINES_SLOPE: f64 = 1.0;
pub const LINK_1: f64 = 3.0;
pub const LINK_2: f64 = 3.0;
/// Standard deviation of the Gaussian noise on hyperbola and lines targets.
pub const TARGET_NOISE_STD: f64 = 0.02;
/// Negatives closer than this to a true mode are redrawn.
pub const NEGATIVE_REJECTION_RADIUS: f64 = 0.05;
pub const NEGATIVE_MAX_RETRIES: usize = 100;
/// Half-width of the hyperbola/lines target box: covers sqrt(1.01) plus noise.
pub const SCALAR_TARGET_BOUND: f64 = 1.05;

pub const DEFAULT_TRAIN_SIZE: usize = 500;
pub const DEFAULT_IK_TRAIN_SIZE: usize = 512;
pub const DEFAULT_VALIDATION_SIZE: usize = 100;
pub const DEFAULT_GRID_SIZE: usize = 100;
pub const DEFAULT_IK_TARGETS: usize = 50;

/// Seed of the IK evaluation targets, shared by every run and model.
const IK_TEST_SEED: u64 = 0x1_c211;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Hyperbola,
    Lines,
    Ik2link,
}

impl TaskKind {
    pub fn name(self) -> &'static str {
        match self {
            TaskKind::Hyperbola => "hyperbola",
            TaskKind::Lines => "lines",
            TaskKind::Ik2link => "ik2link",
        }
    }
}

impl std::str::FromStr for TaskKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hyperbola" => Ok(TaskKind::Hyperbola),
            "lines" => Ok(TaskKind::Lines),
            "ik2link" | "ik_2link" | "ik" => Ok(TaskKind::Ik2link),
            other => Err(Error::Usage(format!("unknown task `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub c: Vec<f64>,
    pub x: Vec<f64>,
}

/// A test condition together with its noiseless modes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestPoint {
    pub condition: Vec<f64>,
    pub modes: Vec<Vec<f64>>,
}

/// Divisors taking raw conditions and targets to the coordinates a network sees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Units {
    pub condition_scale: f64,
    pub target_scale: f64,
}

impl Default for Units {
    fn default() -> Self {
        Self::RAW
    }
}

impl Units {
    pub const RAW: Units = Units {
        condition_scale: 1.0,
        target_scale: 1.0,
    };

    pub fn is_raw(&self) -> bool {
        *self == Self::RAW
    }

    pub fn condition_in(&self, raw: &[f64]) -> Vec<f64> {
        raw.iter().map(|v| v / self.condition_scale).collect()
    }

    pub fn condition_out(&self, c: &[f64]) -> Vec<f64> {
        c.iter().map(|v| v * self.condition_scale).collect()
    }

    pub fn target_in(&self, raw: &[f64]) -> Vec<f64> {
        raw.iter().map(|v| v / self.target_scale).collect()
    }

    pub fn target_out(&self, x: &[f64]) -> Vec<f64> {
        x.iter().map(|v| v * self.target_scale).collect()
    }
}

/// A task expressed in some [`Units`]. Constructors give raw units; every
/// method (conditions, modes, bounds, negatives) works in `self.units`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticTask {
    pub kind: TaskKind,
    /// Target noise in raw units.
    pub noise_std: f64,
    #[serde(default)]
    pub units: Units,
}

impl SyntheticTask {
    pub fn new(kind: TaskKind) -> Self {
        let noise_std = match kind {
            TaskKind::Hyperbola | TaskKind::Lines => TARGET_NOISE_STD,
            TaskKind::Ik2link => 0.0,
        };
        Self {
            kind,
            noise_std,
            units: Units::RAW,
        }
    }

    /// Units the networks train in: the arm workspace and joint angles are
    /// mapped onto the unit box, the scalar tasks already live there.
    pub fn network_units(&self) -> Units {
        match self.kind {
            TaskKind::Hyperbola | TaskKind::Lines => Units::RAW,
            TaskKind::Ik2link => Units {
                condition_scale: LINK_1 + LINK_2,
                target_scale: PI,
            },
        }
    }

    pub fn with_units(self, units: Units) -> Self {
        Self { units, ..self }
    }

    pub fn hyperbola() -> Self {
        Self::new(TaskKind::Hyperbola)
    }

    pub fn lines() -> Self {
        Self::new(TaskKind::Lines)
    }

    pub fn ik2link() -> Self {
        Self::new(TaskKind::Ik2link)
    }

    pub fn cond_dim(&self) -> usize {
        match self.kind {
            TaskKind::Hyperbola | TaskKind::Lines => 1,
            TaskKind::Ik2link => 2,
        }
    }

    pub fn target_dim(&self) -> usize {
        self.cond_dim()
    }

    /// Axis-aligned box containing every valid (and noisy) target.
    pub fn target_bounds(&self) -> Vec<(f64, f64)> {
        let s = self.units.target_scale;
        let raw = match self.kind {
            TaskKind::Hyperbola | TaskKind::Lines => vec![(-SCALAR_TARGET_BOUND, SCALAR_TARGET_BOUND)],
            TaskKind::Ik2link => vec![(-PI, PI); 2],
        };
        raw.into_iter().map(|(lo, hi)| (lo / s, hi / s)).collect()
    }

    pub fn condition_bounds(&self) -> Vec<(f64, f64)> {
        let s = self.units.condition_scale;
        let raw = match self.kind {
            TaskKind::Hyperbola | TaskKind::Lines => vec![(-1.0, 1.0)],
            TaskKind::Ik2link => vec![(-(LINK_1 + LINK_2), LINK_1 + LINK_2); 2],
        };
        raw.into_iter().map(|(lo, hi)| (lo / s, hi / s)).collect()
    }

    pub fn default_train_size(&self) -> usize {
        match self.kind {
            TaskKind::Hyperbola | TaskKind::Lines => DEFAULT_TRAIN_SIZE,
            TaskKind::Ik2link => DEFAULT_IK_TRAIN_SIZE,
        }
    }

    /// Every exact target for condition `c`.
    pub fn modes(&self, c: &[f64]) -> Result<Vec<Vec<f64>>> {
        check_len("task condition", self.cond_dim(), c.len())?;
        if self.units.is_raw() {
            return self.raw_modes(c);
        }
        let modes = self.raw_modes(&self.units.condition_out(c))?;
        Ok(modes.iter().map(|m| self.units.target_in(m)).collect())
    }

    fn raw_modes(&self, c: &[f64]) -> Result<Vec<Vec<f64>>> {
        Ok(match self.kind {
            TaskKind::Hyperbola => {
                let r = (HYPERBOLA_A * HYPERBOLA_A + HYPERBOLA_B * HYPERBOLA_B * c[0] * c[0]).sqrt();
                vec![vec![r], vec![-r]]
            }
            TaskKind::Lines => {
                let m = LINES_SLOPE * c[0];
                vec![vec![m], vec![-m], vec![0.0]]
            }
            TaskKind::Ik2link => ik2link_solve([c[0], c[1]])?
                .into_iter()
                .map(|q| q.to_vec())
                .collect(),
        })
    }

    pub fn sample_condition(&self, rng: &mut SeededRng) -> Vec<f64> {
        let raw = self.raw_condition(rng);
        if self.units.is_raw() {
            raw
        } else {
            self.units.condition_in(&raw)
        }
    }

    fn raw_condition(&self, rng: &mut SeededRng) -> Vec<f64> {
        match self.kind {
            TaskKind::Hyperbola | TaskKind::Lines => vec![rng.uniform(-1.0, 1.0)],
            TaskKind::Ik2link => {
                let reach = LINK_1 + LINK_2;
                loop {
                    let (px, py) = (rng.uniform(-reach, reach), rng.uniform(-reach, reach));
                    let r = px.hypot(py);
                    if r <= reach && r >= (LINK_1 - LINK_2).abs() {
                        return vec![px, py];
                    }
                }
            }
        }
    }

    /// Draws `n` training samples: uniform conditions, a uniformly chosen mode, additive noise.
    pub fn generate(&self, n: usize, rng: &mut SeededRng) -> Result<Vec<Sample>> {
        (0..n)
            .map(|_| {
                let c = self.sample_condition(rng);
                let modes = self.modes(&c)?;
                let mut x = modes[rng.index(modes.len())].clone();
                if self.noise_std > 0.0 {
                    for v in &mut x {
                        *v += self.noise_std / self.units.target_scale * rng.normal();
                    }
                }
                Ok(Sample { c, x })
            })
            .collect()
    }

    /// Uniform draws over the target box that avoid the true modes of `c`.
    pub fn sample_negatives(&self, c: &[f64], n: usize, rng: &mut SeededRng) -> Result<Vec<Vec<f64>>> {
        let modes = self.modes(c)?;
        let mut flat = Vec::with_capacity(n * self.target_dim());
        self.fill_negatives(&modes, n, rng, &mut flat);
        Ok(flat.chunks(self.target_dim()).map(<[f64]>::to_vec).collect())
    }

    /// Appends `n` negatives for the given mode list to `out`, row-major.
    pub fn fill_negatives(&self, modes: &[Vec<f64>], n: usize, rng: &mut SeededRng, out: &mut Vec<f64>) {
        let bounds = self.target_bounds();
        let mut draw = vec![0.0; bounds.len()];
        for _ in 0..n {
            for _ in 0..=NEGATIVE_MAX_RETRIES {
                for (d, (lo, hi)) in draw.iter_mut().zip(&bounds) {
                    *d = rng.uniform(*lo, *hi);
                }
                if modes.iter().all(|m| euclidean(m, &draw) > NEGATIVE_REJECTION_RADIUS) {
                    break;
                }
            }
            out.extend_from_slice(&draw);
        }
    }

    /// Fixed evaluation conditions with their exact modes.
    ///
    /// Scalar tasks use `count` equally spaced conditions on [-1, 1]. The arm
    /// task uses `count` reachable targets from a fixed seed.
    pub fn test_grid(&self, count: usize) -> Result<Vec<TestPoint>> {
        let conditions: Vec<Vec<f64>> = match self.kind {
            TaskKind::Hyperbola | TaskKind::Lines => {
                if count < 2 {
                    return Err(Error::Config(format!("test grid needs at least 2 points, got {count}")));
                }
                linspace(-1.0, 1.0, count)
                    .into_iter()
                    .map(|c| vec![c / self.units.condition_scale])
                    .collect()
            }
            TaskKind::Ik2link => {
                if count == 0 {
                    return Err(Error::Config("test grid needs at least 1 target".into()));
                }
                let mut rng = SeededRng::stream(IK_TEST_SEED, Stream::TestGrid);
                (0..count).map(|_| self.sample_condition(&mut rng)).collect()
            }
        };
        conditions
            .into_iter()
            .map(|condition| {
                let modes = self.modes(&condition)?;
                Ok(TestPoint { condition, modes })
            })
            .collect()
    }

    pub fn default_grid_size(&self) -> usize {
        match self.kind {
            TaskKind::Hyperbola | TaskKind::Lines => DEFAULT_GRID_SIZE,
            TaskKind::Ik2link => DEFAULT_IK_TARGETS,
        }
    }
}

pub fn make_test_grid(task: &SyntheticTask, count: usize) -> Result<Vec<TestPoint>> {
    task.test_grid(count)
}

pub fn generate_hyperbola(n: usize, rng: &mut SeededRng) -> Vec<Sample> {
    SyntheticTask::hyperbola().generate(n, rng).expect("scalar oracle is total")
}

pub fn generate_lines(n: usize, rng: &mut SeededRng) -> Vec<Sample> {
    SyntheticTask::lines().generate(n, rng).expect("scalar oracle is total")
}

pub fn generate_ik2link(n: usize, rng: &mut SeededRng) -> Vec<Sample> {
    SyntheticTask::ik2link()
        .generate(n, rng)
        .expect("sampled targets are reachable")
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetSplits {
    pub task: SyntheticTask,
    pub train: Vec<Sample>,
    pub validation: Vec<Sample>,
    pub test: Vec<TestPoint>,
}

impl DatasetSplits {
    /// Default-sized splits drawn from the data stream of `seed`. The test grid does not depend on the seed.
    pub fn generate(task: SyntheticTask, seed: u64) -> Result<Self> {
        Self::with_sizes(
            task,
            seed,
            task.default_train_size(),
            DEFAULT_VALIDATION_SIZE,
            task.default_grid_size(),
        )
    }

    pub fn with_sizes(task: SyntheticTask, seed: u64, train: usize, validation: usize, grid: usize) -> Result<Self> {
        let mut rng = SeededRng::stream(seed, Stream::Data);
        let train = task.generate(train, &mut rng)?;
        let validation = task.generate(validation, &mut rng)?;
        Ok(Self {
            task,
            train,
            validation,
            test: task.test_grid(grid)?,
        })
    }

    /// The same splits re-expressed in `units`.
    pub fn to_units(&self, units: Units) -> Self {
        let (from, task) = (self.task.units, self.task.with_units(units));
        let sample = |s: &Sample| Sample {
            c: units.condition_in(&from.condition_out(&s.c)),
            x: units.target_in(&from.target_out(&s.x)),
        };
        let point = |p: &TestPoint| TestPoint {
            condition: units.condition_in(&from.condition_out(&p.condition)),
            modes: p.modes.iter().map(|m| units.target_in(&from.target_out(m))).collect(),
        };
        Self {
            task,
            train: self.train.iter().map(sample).collect(),
            validation: self.validation.iter().map(sample).collect(),
            test: self.test.iter().map(point).collect(),
        }
    }
}

/// Forward kinematics of the two-link arm: joint angles to end-effector position.
pub fn ik2link_forward(q: [f64; 2]) -> [f64; 2] {
    let (t1, t12) = (q[0], q[0] + q[1]);
    [
        LINK_1 * t1.cos() + LINK_2 * t12.cos(),
        LINK_1 * t1.sin() + LINK_2 * t12.sin(),
    ]
}

/// Closed-form inverse kinematics. Returns the elbow-up and elbow-down
/// solutions, or a single one when they coincide.
pub fn ik2link_solve(target: [f64; 2]) -> Result<Vec<[f64; 2]>> {
    let [px, py] = target;
    let r2 = px * px + py * py;
    let r = r2.sqrt();
    let tol = 1e-12;
    if !r.is_finite() || r > LINK_1 + LINK_2 + tol || r < (LINK_1 - LINK_2).abs() - tol {
        return Err(Error::Unreachable { x: px, y: py });
    }
    let cos_t2 = ((r2 - LINK_1 * LINK_1 - LINK_2 * LINK_2) / (2.0 * LINK_1 * LINK_2)).clamp(-1.0, 1.0);
    let t2 = cos_t2.acos();
    let solve = |t2: f64| {
        let t1 = py.atan2(px) - (LINK_2 * t2.sin()).atan2(LINK_1 + LINK_2 * t2.cos());
        [wrap_angle(t1), wrap_angle(t2)]
    };
    let up = solve(t2);
    if t2 == 0.0 || cos_t2 == -1.0 {
        return Ok(vec![up]);
    }
    Ok(vec![up, solve(-t2)])
}

/// Wraps an angle into (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    let w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w - 2.0 * PI
    } else {
        w
    }
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt()
}

pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let step = (hi - lo) / (n - 1) as f64;
    (0..n)
        .map(|i| if i + 1 == n { hi } else { lo + step * i as f64 })
        .collect()
}

/// Writes samples as CSV with header `c_0,..,x_0,..`.
pub fn write_samples_csv<W: Write>(samples: &[Sample], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if let Some(first) = samples.first() {
        let header: Vec<String> = (0..first.c.len())
            .map(|i| format!("c_{i}"))
            .chain((0..first.x.len()).map(|i| format!("x_{i}")))
            .collect();
        w.write_record(&header)?;
    }
    for s in samples {
        w.write_record(s.c.iter().chain(&s.x).map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_samples_csv(samples: &[Sample], path: &Path) -> Result<()> {
    write_samples_csv(samples, std::fs::File::create(path)?)
}
