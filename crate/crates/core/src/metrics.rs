//! Mode-coverage, histogram-divergence and task-success metrics.

use serde::{Deserialize, Serialize};

use crate::datasets::{euclidean, ik2link_forward};
use crate::error::{Error, Result};

pub const DEFAULT_EPSILON: f64 = 0.07;
pub const DEFAULT_SAMPLES: usize = 10;
pub const DEFAULT_BINS: usize = 50;
pub const KL_DELTA: f64 = 1e-10;
pub const DEFAULT_SUCCESS_TOLERANCE: f64 = 0.2;

fn captured_per_condition(samples: &[Vec<Vec<f64>>], modes: &[Vec<Vec<f64>>], epsilon: f64) -> Result<Vec<(usize, usize)>> {
    if modes.is_empty() {
        return Err(Error::Empty("test set"));
    }
    if samples.len() != modes.len() {
        return Err(Error::Shape {
            context: "samples per condition",
            expected: modes.len(),
            got: samples.len(),
        });
    }
    Ok(samples
        .iter()
        .zip(modes)
        .map(|(xs, ms)| {
            let hit = ms
                .iter()
                .filter(|m| xs.iter().any(|x| euclidean(x, m) <= epsilon))
                .count();
            (hit, ms.len())
        })
        .collect())
}

/// Percentage of conditions whose every mode has a sample within `epsilon`.
pub fn total_mode_coverage(samples: &[Vec<Vec<f64>>], modes: &[Vec<Vec<f64>>], epsilon: f64) -> Result<f64> {
    let per = captured_per_condition(samples, modes, epsilon)?;
    let full = per.iter().filter(|(hit, total)| hit == total).count();
    Ok(100.0 * full as f64 / per.len() as f64)
}

/// Mean number of modes with a sample within `epsilon`.
pub fn avg_modes_captured(samples: &[Vec<Vec<f64>>], modes: &[Vec<Vec<f64>>], epsilon: f64) -> Result<f64> {
    let per = captured_per_condition(samples, modes, epsilon)?;
    Ok(per.iter().map(|(hit, _)| *hit as f64).sum::<f64>() / per.len() as f64)
}

/// Equal-width histogram with densities normalized so that `sum * width = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub densities: Vec<f64>,
}

impl Histogram {
    pub fn new(values: &[f64], lo: f64, hi: f64, bins: usize) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Empty("histogram values"));
        }
        if bins == 0 || !(hi > lo) {
            return Err(Error::Config(format!("invalid histogram binning: {bins} bins over [{lo}, {hi}]")));
        }
        let width = (hi - lo) / bins as f64;
        let mut counts = vec![0usize; bins];
        for v in values {
            let b = (((v - lo) / width).floor() as isize).clamp(0, bins as isize - 1) as usize;
            counts[b] += 1;
        }
        let norm = values.len() as f64 * width;
        Ok(Self {
            lo,
            hi,
            densities: counts.into_iter().map(|c| c as f64 / norm).collect(),
        })
    }

    pub fn bin_width(&self) -> f64 {
        (self.hi - self.lo) / self.densities.len() as f64
    }

    /// Probability mass per bin.
    pub fn probabilities(&self) -> Vec<f64> {
        let w = self.bin_width();
        self.densities.iter().map(|d| d * w).collect()
    }
}

/// Range covering both sets; a degenerate range is widened to unit width.
pub fn shared_range(p: &[f64], q: &[f64]) -> (f64, f64) {
    let lo = p.iter().chain(q).copied().fold(f64::INFINITY, f64::min);
    let hi = p.iter().chain(q).copied().fold(f64::NEG_INFINITY, f64::max);
    if hi > lo {
        (lo, hi)
    } else {
        (lo - 0.5, lo + 0.5)
    }
}

fn paired(p: &[f64], q: &[f64], bins: usize) -> Result<(Histogram, Histogram)> {
    if p.is_empty() || q.is_empty() {
        return Err(Error::Empty("histogram values"));
    }
    let (lo, hi) = shared_range(p, q);
    Ok((Histogram::new(p, lo, hi, bins)?, Histogram::new(q, lo, hi, bins)?))
}

/// `Σ_b (p_b + δ) ln((p_b + δ) / (q_b + δ))` over the normalized densities
/// of the shared binning. Densities are not multiplied by the bin width, so
/// the value scales with `1 / width`.
pub fn kl_divergence_hist(p: &[f64], q: &[f64], bins: usize, delta: f64) -> Result<f64> {
    let (hp, hq) = paired(p, q, bins)?;
    Ok(hp
        .densities
        .iter()
        .zip(&hq.densities)
        .map(|(a, b)| (a + delta) * ((a + delta) / (b + delta)).ln())
        .sum::<f64>()
        .max(0.0))
}

/// `Σ_b |CDF_p(b) - CDF_q(b)| * width` over the shared binning.
pub fn wasserstein_hist(p: &[f64], q: &[f64], bins: usize) -> Result<f64> {
    let (hp, hq) = paired(p, q, bins)?;
    let w = hp.bin_width();
    let (mut cp, mut cq, mut total) = (0.0, 0.0, 0.0);
    for (a, b) in hp.probabilities().iter().zip(hq.probabilities()) {
        cp += a;
        cq += b;
        total += (cp - cq).abs() * w;
    }
    Ok(total)
}

/// Flattens 1-D target vectors; multi-dimensional targets are not supported by the histogram metrics.
pub fn scalar_targets(targets: &[Vec<f64>]) -> Result<Vec<f64>> {
    targets
        .iter()
        .map(|t| match t.as_slice() {
            [v] => Ok(*v),
            other => Err(Error::Unsupported(format!(
                "histogram metrics need 1-D targets, got dimension {}",
                other.len()
            ))),
        })
        .collect()
}

/// Best and mean success of sampled joint angles reaching their targets.
///
/// `samples[i]` holds the actions drawn for `targets[i]`. Best is the
/// fraction of targets with at least one success, mean the average success
/// fraction per target.
pub fn ik_success_rates(samples: &[Vec<Vec<f64>>], targets: &[Vec<f64>], tolerance: f64) -> Result<(f64, f64)> {
    if targets.is_empty() {
        return Err(Error::Empty("targets"));
    }
    if samples.len() != targets.len() {
        return Err(Error::Shape {
            context: "samples per target",
            expected: targets.len(),
            got: samples.len(),
        });
    }
    let (mut best, mut mean) = (0.0, 0.0);
    for (actions, target) in samples.iter().zip(targets) {
        if actions.is_empty() {
            continue;
        }
        let hits = actions
            .iter()
            .filter(|q| q.len() == 2 && euclidean(&ik2link_forward([q[0], q[1]]), target) <= tolerance)
            .count();
        if hits > 0 {
            best += 1.0;
        }
        mean += hits as f64 / actions.len() as f64;
    }
    let n = targets.len() as f64;
    Ok((best / n, mean / n))
}

/// Metrics of one run; entries that do not apply to the task are `None`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub tmc_percent: Option<f64>,
    pub amc: Option<f64>,
    pub kl: Option<f64>,
    pub wasserstein: Option<f64>,
    pub success_best: Option<f64>,
    pub success_mean: Option<f64>,
}

pub const METRIC_COLUMNS: [&str; 6] = ["tmc_percent", "amc", "kl", "wasserstein", "success_best", "success_mean"];

impl MetricsReport {
    pub fn values(&self) -> [Option<f64>; 6] {
        [
            self.tmc_percent,
            self.amc,
            self.kl,
            self.wasserstein,
            self.success_best,
            self.success_mean,
        ]
    }

    pub fn from_values(v: [Option<f64>; 6]) -> Self {
        Self {
            tmc_percent: v[0],
            amc: v[1],
            kl: v[2],
            wasserstein: v[3],
            success_best: v[4],
            success_mean: v[5],
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    /// Cells for one CSV row, empty where a metric is absent.
    pub fn csv_cells(&self) -> Vec<String> {
        self.values()
            .iter()
            .map(|v| v.map(|x| x.to_string()).unwrap_or_default())
            .collect()
    }
}

/// Mean and population standard deviation (denominator n) of each metric across runs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean: MetricsReport,
    pub std: MetricsReport,
}

pub fn mean_std(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    Some((mean, var.sqrt()))
}

pub fn aggregate(reports: &[MetricsReport]) -> Aggregate {
    let mut mean = [None; 6];
    let mut std = [None; 6];
    for k in 0..6 {
        let vals: Vec<f64> = reports.iter().filter_map(|r| r.values()[k]).collect();
        if vals.len() == reports.len() {
            if let Some((m, s)) = mean_std(&vals) {
                mean[k] = Some(m);
                std[k] = Some(s);
            }
        }
    }
    Aggregate {
        mean: MetricsReport::from_values(mean),
        std: MetricsReport::from_values(std),
    }
}
