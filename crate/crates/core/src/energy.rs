//! Energy network and contrastive objectives.
//!
//! Lower energy means a more plausible `(c, x)` pair. The InfoNCE loss for one
//! positive is the negative log softmax probability of the positive among
//! itself, the negatives and (optionally, weighted by α) generator samples:
//!
//! `E(c, x+) + ln[ e^{-E(c, x+)} + Σ_j e^{-E(c, x_j)} + α Σ_k e^{-E(c, g_k)} ]`.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::datasets::linspace;
use crate::error::{check_len, Error, Result};
use crate::mdn::log_sum_exp;
use crate::nn::{Activation, DenseNet};
use crate::rng::SeededRng;

/// Floor of the dynamic α schedule.
pub const ALPHA_MIN: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyNet {
    net: DenseNet,
    cond_dim: usize,
    target_dim: usize,
}

impl EnergyNet {
    pub fn new(cond_dim: usize, target_dim: usize, hidden: &[usize], activation: Activation, rng: &mut SeededRng) -> Result<Self> {
        let dims = Self::dims(cond_dim, target_dim, hidden);
        Ok(Self {
            net: DenseNet::new(&dims, activation, rng)?,
            cond_dim,
            target_dim,
        })
    }

    pub fn zeros(cond_dim: usize, target_dim: usize, hidden: &[usize], activation: Activation) -> Result<Self> {
        let dims = Self::dims(cond_dim, target_dim, hidden);
        Ok(Self {
            net: DenseNet::zeros(&dims, activation)?,
            cond_dim,
            target_dim,
        })
    }

    pub fn from_net(net: DenseNet, cond_dim: usize, target_dim: usize) -> Result<Self> {
        check_len("energy input", cond_dim + target_dim, net.input_dim())?;
        check_len("energy output", 1, net.output_dim())?;
        Ok(Self {
            net,
            cond_dim,
            target_dim,
        })
    }

    fn dims(cond_dim: usize, target_dim: usize, hidden: &[usize]) -> Vec<usize> {
        let mut dims = vec![cond_dim + target_dim];
        dims.extend_from_slice(hidden);
        dims.push(1);
        dims
    }

    pub fn net(&self) -> &DenseNet {
        &self.net
    }

    pub fn net_mut(&mut self) -> &mut DenseNet {
        &mut self.net
    }

    pub fn cond_dim(&self) -> usize {
        self.cond_dim
    }

    pub fn target_dim(&self) -> usize {
        self.target_dim
    }

    pub fn energy(&self, c: &[f64], x: &[f64]) -> Result<f64> {
        check_len("energy condition", self.cond_dim, c.len())?;
        check_len("energy target", self.target_dim, x.len())?;
        let input: Vec<f64> = c.iter().chain(x).copied().collect();
        Ok(self.net.forward(&input)?[0])
    }

    /// Energies of the rows of a `(rows, d_c + d_x)` matrix.
    pub fn energies(&self, inputs: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
        Ok(self.net.forward_batch(inputs)?.column(0).to_vec())
    }
}

pub fn energy(e: &EnergyNet, c: &[f64], x: &[f64]) -> Result<f64> {
    e.energy(c, x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InfonceMode {
    NoGenerator,
    StandardInclusion,
    EqualRatio,
    DynamicScaling,
}

impl InfonceMode {
    pub const ALL: [InfonceMode; 4] = [
        InfonceMode::NoGenerator,
        InfonceMode::StandardInclusion,
        InfonceMode::EqualRatio,
        InfonceMode::DynamicScaling,
    ];

    /// Number of generator samples in the denominator per positive.
    pub fn generator_terms(self, negatives: usize) -> usize {
        match self {
            InfonceMode::NoGenerator => 0,
            InfonceMode::StandardInclusion | InfonceMode::DynamicScaling => 1,
            InfonceMode::EqualRatio => negatives,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            InfonceMode::NoGenerator => "no_generator",
            InfonceMode::StandardInclusion => "standard_inclusion",
            InfonceMode::EqualRatio => "equal_ratio",
            InfonceMode::DynamicScaling => "dynamic_scaling",
        }
    }
}

impl fmt::Display for InfonceMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for InfonceMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .or(match s {
                "standard" => Some(InfonceMode::StandardInclusion),
                "dynamic" => Some(InfonceMode::DynamicScaling),
                "none" => Some(InfonceMode::NoGenerator),
                _ => None,
            })
            .ok_or_else(|| Error::Usage(format!("unknown InfoNCE mode `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InfonceConfig {
    pub mode: InfonceMode,
    pub negatives: usize,
    pub alpha_min: f64,
    pub total_epochs: usize,
}

impl InfonceConfig {
    /// α used during epoch `t` (0-based): the schedule under dynamic scaling, 1 otherwise.
    pub fn alpha(&self, t: usize) -> f64 {
        match self.mode {
            InfonceMode::DynamicScaling => alpha_schedule(t, self.total_epochs, self.alpha_min),
            _ => 1.0,
        }
    }

    pub fn generator_terms(&self) -> usize {
        self.mode.generator_terms(self.negatives)
    }

    /// Entries in the softmax denominator: positive, negatives, generator samples.
    pub fn denominator_count(&self) -> usize {
        1 + self.negatives + self.generator_terms()
    }
}

/// `max(1 - t / T, a_min)`.
pub fn alpha_schedule(t: usize, total: usize, alpha_min: f64) -> f64 {
    (1.0 - t as f64 / total.max(1) as f64).max(alpha_min)
}

/// `ln(count) - loss`, the InfoNCE lower bound on mutual information.
pub fn mi_lower_bound(loss: f64, denominator_count: usize) -> f64 {
    (denominator_count.max(1) as f64).ln() - loss
}

/// InfoNCE loss from precomputed energies with gradients with respect to each energy.
#[derive(Debug, Clone, PartialEq)]
pub struct InfonceTerms {
    pub loss: f64,
    pub d_positive: f64,
    pub d_negatives: Vec<f64>,
    pub d_generated: Vec<f64>,
}

pub fn infonce_from_energies(e_pos: f64, e_neg: &[f64], e_gen: &[f64], alpha: f64) -> InfonceTerms {
    let use_gen = alpha > 0.0 && !e_gen.is_empty();
    let ln_alpha = alpha.ln();
    let mut logits = Vec::with_capacity(1 + e_neg.len() + e_gen.len());
    logits.push(-e_pos);
    logits.extend(e_neg.iter().map(|e| -e));
    if use_gen {
        logits.extend(e_gen.iter().map(|e| ln_alpha - e));
    }
    let lse = log_sum_exp(&logits);
    let p = |logit: f64| (logit - lse).exp();
    InfonceTerms {
        loss: e_pos + lse,
        d_positive: 1.0 - p(-e_pos),
        d_negatives: e_neg.iter().map(|e| -p(-e)).collect(),
        d_generated: if use_gen {
            e_gen.iter().map(|e| -p(ln_alpha - e)).collect()
        } else {
            vec![0.0; e_gen.len()]
        },
    }
}

/// InfoNCE loss of a single positive. Generator samples are constants here.
pub fn infonce_loss(
    e: &EnergyNet,
    c: &[f64],
    x_pos: &[f64],
    negatives: &[Vec<f64>],
    gen_samples: &[Vec<f64>],
    alpha: f64,
) -> Result<f64> {
    if x_pos.is_empty() {
        return Err(Error::Usage("InfoNCE needs a positive sample".into()));
    }
    let e_pos = e.energy(c, x_pos)?;
    let e_neg = negatives.iter().map(|x| e.energy(c, x)).collect::<Result<Vec<_>>>()?;
    let e_gen = gen_samples.iter().map(|x| e.energy(c, x)).collect::<Result<Vec<_>>>()?;
    Ok(infonce_from_energies(e_pos, &e_neg, &e_gen, alpha).loss)
}

/// A batch of contrastive sets, flattened row-major.
#[derive(Debug, Clone)]
pub struct ContrastiveBatch<'a> {
    /// `B x d_c`
    pub conditions: &'a [f64],
    /// `B x d_x`
    pub positives: &'a [f64],
    /// `B x N x d_x`
    pub negatives: &'a [f64],
    /// `B x G x d_x`
    pub generated: &'a [f64],
    pub negatives_per_positive: usize,
    pub generated_per_positive: usize,
    pub alpha: f64,
}

/// Mean InfoNCE loss over the batch and its gradient with respect to the energy parameters.
pub fn infonce_batch_grad(e: &EnergyNet, batch: &ContrastiveBatch<'_>) -> Result<(f64, Vec<f64>)> {
    let (dc, dx) = (e.cond_dim, e.target_dim);
    let b = batch.conditions.len() / dc;
    if b == 0 {
        return Err(Error::Empty("contrastive batch"));
    }
    let (n, g) = (batch.negatives_per_positive, batch.generated_per_positive);
    check_len("positives", b * dx, batch.positives.len())?;
    check_len("negatives", b * n * dx, batch.negatives.len())?;
    check_len("generator samples", b * g * dx, batch.generated.len())?;
    let per = 1 + n + g;
    let mut input = Array2::zeros((b * per, dc + dx));
    for i in 0..b {
        let c = &batch.conditions[i * dc..(i + 1) * dc];
        let targets = std::iter::once(&batch.positives[i * dx..(i + 1) * dx])
            .chain(batch.negatives[i * n * dx..(i + 1) * n * dx].chunks(dx))
            .chain(batch.generated[i * g * dx..(i + 1) * g * dx].chunks(dx));
        for (k, x) in targets.enumerate() {
            let mut row = input.row_mut(i * per + k);
            for (j, v) in c.iter().chain(x).enumerate() {
                row[j] = *v;
            }
        }
    }
    let (out, cache) = e.net.forward_cached(input.view())?;
    let energies = out.column(0);
    let mut out_grad = Array2::zeros((b * per, 1));
    let scale = 1.0 / b as f64;
    let mut loss = 0.0;
    for i in 0..b {
        let base = i * per;
        let e_row: Vec<f64> = (0..per).map(|k| energies[base + k]).collect();
        let terms = infonce_from_energies(e_row[0], &e_row[1..1 + n], &e_row[1 + n..], batch.alpha);
        loss += terms.loss * scale;
        out_grad[[base, 0]] = terms.d_positive * scale;
        for (k, d) in terms.d_negatives.iter().chain(&terms.d_generated).enumerate() {
            out_grad[[base + 1 + k, 0]] = d * scale;
        }
    }
    let bw = e.net.backward(&cache, out_grad.view())?;
    Ok((loss, bw.params))
}

/// Scalar field over a (condition, target) grid, rows indexed by condition.
#[derive(Debug, Clone, PartialEq)]
pub struct Landscape {
    pub c_axis: Vec<f64>,
    pub x_axis: Vec<f64>,
    /// `c_axis.len() x x_axis.len()`, row-major.
    pub values: Vec<f64>,
}

impl Landscape {
    pub fn get(&self, ci: usize, xi: usize) -> f64 {
        self.values[ci * self.x_axis.len() + xi]
    }

    /// First row holds the x axis, first column the c axis.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let header = std::iter::once("c\\x".to_string()).chain(self.x_axis.iter().map(|x| x.to_string()));
        w.write_record(header)?;
        for (ci, c) in self.c_axis.iter().enumerate() {
            let row = &self.values[ci * self.x_axis.len()..(ci + 1) * self.x_axis.len()];
            w.write_record(std::iter::once(c.to_string()).chain(row.iter().map(|v| v.to_string())))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

/// Evaluates `sign * net(c, x)` on a grid; the network must take one condition and one target dimension.
pub fn scalar_net_landscape(
    net: &DenseNet,
    sign: f64,
    c_range: (f64, f64),
    x_range: (f64, f64),
    resolution: (usize, usize),
) -> Result<Landscape> {
    if net.input_dim() != 2 || net.output_dim() != 1 {
        return Err(Error::Unsupported(format!(
            "landscape export needs a scalar network over 1-D conditions and targets, got {} inputs",
            net.input_dim()
        )));
    }
    let (rc, rx) = resolution;
    if rc < 2 || rx < 2 {
        return Err(Error::Config(format!("landscape resolution must be at least 2, got {rc} x {rx}")));
    }
    let c_axis = linspace(c_range.0, c_range.1, rc);
    let x_axis = linspace(x_range.0, x_range.1, rx);
    let mut input = Array2::zeros((rc * rx, 2));
    for (ci, c) in c_axis.iter().enumerate() {
        for (xi, x) in x_axis.iter().enumerate() {
            input[[ci * rx + xi, 0]] = *c;
            input[[ci * rx + xi, 1]] = *x;
        }
    }
    let values = net.forward_batch(input.view())?.column(0).iter().map(|v| sign * v).collect();
    Ok(Landscape { c_axis, x_axis, values })
}

pub fn energy_landscape_grid(
    e: &EnergyNet,
    c_range: (f64, f64),
    x_range: (f64, f64),
    resolution: (usize, usize),
) -> Result<Landscape> {
    if e.cond_dim != 1 || e.target_dim != 1 {
        return Err(Error::Unsupported(format!(
            "landscape export needs 1-D conditions and targets, got {} and {}",
            e.cond_dim, e.target_dim
        )));
    }
    scalar_net_landscape(&e.net, 1.0, c_range, x_range, resolution)
}
