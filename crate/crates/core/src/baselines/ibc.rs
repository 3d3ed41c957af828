use ndarray::Array2;

use crate::adam::AdamState;
use crate::config::TrainConfig;
use crate::datasets::{DatasetSplits, Sample};
use crate::energy::{mi_lower_bound, EnergyNet};
use crate::error::{check_len, Error, Result};
use crate::mdn::softmax;
use crate::rng::{SeededRng, Stream};
use crate::trainer::{contrastive_step, EpochRecord, LossTrace};

use super::{shuffled_batches, MlpGenerator};

pub const IBC_CANDIDATES: usize = 64;
pub const IBC_ROUNDS: usize = 3;
/// Initial perturbation scale as a fraction of each target range; halved every round.
pub const IBC_INITIAL_SCALE: f64 = 0.2;

/// Energy model trained with plain InfoNCE against uniform negatives.
pub fn train_ibc(config: &TrainConfig, data: &DatasetSplits, seed: u64) -> Result<(EnergyNet, LossTrace)> {
    config.validate()?;
    let task = data.task;
    let mut energy = EnergyNet::new(
        task.cond_dim(),
        task.target_dim(),
        &config.energy_hidden(),
        config.activation,
        &mut SeededRng::stream(seed, Stream::Init),
    )?;
    let mut opt = AdamState::new(energy.net().num_params(), config.lr_energy);
    let mut rng = SeededRng::stream(seed, Stream::Train);
    let mut trace = LossTrace::default();
    for epoch in 0..config.epochs {
        let (mut total, mut steps) = (0.0, 0usize);
        for idx in shuffled_batches(data.train.len(), config.batch_size, &mut rng) {
            let batch: Vec<&Sample> = idx.iter().map(|&i| &data.train[i]).collect();
            for _ in 0..config.inner_steps {
                total += contrastive_step::<MlpGenerator>(
                    &task,
                    &mut energy,
                    &mut opt,
                    None,
                    &batch,
                    config.negatives,
                    0,
                    1.0,
                    &mut rng,
                )?;
                steps += 1;
            }
        }
        let em_loss = total / steps.max(1) as f64;
        trace.records.push(EpochRecord {
            epoch,
            em_loss,
            gen_energy: f64::NAN,
            gen_nll: f64::NAN,
            alpha: f64::NAN,
            mi_bound: mi_lower_bound(em_loss, 1 + config.negatives),
        });
    }
    Ok((energy, trace))
}

/// Reflects `v` into `[lo, hi]`.
fn reflect(mut v: f64, lo: f64, hi: f64) -> f64 {
    let w = hi - lo;
    if w <= 0.0 {
        return lo;
    }
    v = (v - lo).rem_euclid(2.0 * w);
    if v > w {
        v = 2.0 * w - v;
    }
    lo + v
}

/// Derivative-free inference: `k` independent runs of iterated
/// resample-and-perturb over uniform candidates, each returning its
/// lowest-energy candidate.
pub fn ibc_infer(e: &EnergyNet, c: &[f64], k: usize, bounds: &[(f64, f64)], rng: &mut SeededRng) -> Result<Vec<Vec<f64>>> {
    check_len("target bounds", e.target_dim(), bounds.len())?;
    check_len("energy condition", e.cond_dim(), c.len())?;
    if bounds.iter().any(|(lo, hi)| !(lo.is_finite() && hi.is_finite() && lo < hi)) {
        return Err(Error::Config("derivative-free inference needs finite target bounds".into()));
    }
    let (dc, dx, m) = (c.len(), bounds.len(), IBC_CANDIDATES);
    let rows = k * m;
    let mut input = Array2::zeros((rows, dc + dx));
    for r in 0..rows {
        for (j, v) in c.iter().enumerate() {
            input[[r, j]] = *v;
        }
        for (d, (lo, hi)) in bounds.iter().enumerate() {
            input[[r, dc + d]] = rng.uniform(*lo, *hi);
        }
    }
    let mut scale = IBC_INITIAL_SCALE;
    for _ in 0..IBC_ROUNDS {
        let energies = e.energies(input.view())?;
        let mut next = input.clone();
        for run in 0..k {
            let logits: Vec<f64> = energies[run * m..(run + 1) * m].iter().map(|v| -v).collect();
            let probs = softmax(&logits);
            for slot in 0..m {
                let src = run * m + rng.categorical(&probs);
                for (d, (lo, hi)) in bounds.iter().enumerate() {
                    let v = input[[src, dc + d]] + scale * (hi - lo) * rng.normal();
                    next[[run * m + slot, dc + d]] = reflect(v, *lo, *hi);
                }
            }
        }
        input = next;
        scale *= 0.5;
    }
    let energies = e.energies(input.view())?;
    Ok((0..k)
        .map(|run| {
            let best = (0..m)
                .min_by(|&a, &b| energies[run * m + a].total_cmp(&energies[run * m + b]))
                .expect("candidate set is nonempty");
            (0..dx).map(|d| input[[run * m + best, dc + d]]).collect()
        })
        .collect())
}
