use ndarray::Array2;

use crate::adam::AdamState;
use crate::config::TrainConfig;
use crate::datasets::{DatasetSplits, Sample};
use crate::error::{check_len, Error, Result};
use crate::nn::DenseNet;
use crate::rng::{SeededRng, Stream};
use crate::trainer::{EpochRecord, LossTrace};

use super::shuffled_batches;

/// Mean squared error over batch and target dimensions, with the parameter gradient.
pub fn mse_loss_and_grad(net: &DenseNet, batch: &[&Sample]) -> Result<(f64, Vec<f64>)> {
    if batch.is_empty() {
        return Err(Error::Empty("regression batch"));
    }
    let (dc, dx) = (net.input_dim(), net.output_dim());
    let b = batch.len();
    let mut input = Array2::zeros((b, dc));
    for (r, s) in batch.iter().enumerate() {
        check_len("regression condition", dc, s.c.len())?;
        check_len("regression target", dx, s.x.len())?;
        for (j, v) in s.c.iter().enumerate() {
            input[[r, j]] = *v;
        }
    }
    let (out, cache) = net.forward_cached(input.view())?;
    let n = (b * dx) as f64;
    let mut grad = Array2::zeros((b, dx));
    let mut loss = 0.0;
    for (r, s) in batch.iter().enumerate() {
        for d in 0..dx {
            let diff = out[[r, d]] - s.x[d];
            loss += diff * diff / n;
            grad[[r, d]] = 2.0 * diff / n;
        }
    }
    Ok((loss, net.backward(&cache, grad.view())?.params))
}

/// Regressor `c -> x` trained with mean squared error.
pub fn train_explicit_bc(config: &TrainConfig, data: &DatasetSplits, seed: u64) -> Result<(DenseNet, LossTrace)> {
    config.validate()?;
    let task = &data.task;
    let mut dims = vec![task.cond_dim()];
    dims.extend(config.generator_hidden());
    dims.push(task.target_dim());
    let mut net = DenseNet::new(&dims, config.activation, &mut SeededRng::stream(seed, Stream::Init))?;
    let mut opt = AdamState::new(net.num_params(), config.lr_generator);
    let mut rng = SeededRng::stream(seed, Stream::Train);
    let mut trace = LossTrace::default();
    for epoch in 0..config.epochs {
        let mut total = 0.0;
        let batches = shuffled_batches(data.train.len(), config.batch_size, &mut rng);
        for idx in &batches {
            let batch: Vec<&Sample> = idx.iter().map(|&i| &data.train[i]).collect();
            let (loss, grad) = mse_loss_and_grad(&net, &batch)?;
            opt.step(net.params_mut(), &grad)?;
            total += loss;
        }
        trace.records.push(EpochRecord {
            epoch,
            em_loss: f64::NAN,
            gen_energy: f64::NAN,
            gen_nll: total / batches.len() as f64,
            alpha: f64::NAN,
            mi_bound: f64::NAN,
        });
    }
    Ok((net, trace))
}
