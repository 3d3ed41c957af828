//! Property checks that hold regardless of training outcomes.

use std::path::Path;

use ndarray::Array2;

use mmbc::baselines::{discriminator_loss_and_grad, generator_nonsaturating_loss_and_grad, mse_loss_and_grad, MlpGenerator};
use mmbc::datasets::{ik2link_forward, ik2link_solve, LINK_1, LINK_2};
use mmbc::energy::{alpha_schedule, infonce_batch_grad, infonce_from_energies, mi_lower_bound, ContrastiveBatch, ALPHA_MIN};
use mmbc::mdn::{gmm_nll, mdn_loss_and_grad, softplus, SCALE_FLOOR};
use mmbc::metrics::{avg_modes_captured, kl_divergence_hist, total_mode_coverage, wasserstein_hist, KL_DELTA};
use mmbc::trainer::{generator_loss_batch, AdversarialGenerator, FrozenDraw};
use mmbc::{
    Activation, EnergyNet, ExperimentConfig, GmmParams, InfonceConfig, InfonceMode, MdnGenerator, MixtureLayout, ModelKind,
    NoiseModel, Sample, SeededRng, TaskKind,
};

use super::{activation_for, ensure, fd_check, random_net, random_vec, with_params, Check, INSTANCES};

pub const NOISE_MODELS: [NoiseModel; 5] = [
    NoiseModel::Diagonal,
    NoiseModel::Isotropic,
    NoiseModel::IsotropicAcrossClusters,
    NoiseModel::Fixed(0.1),
    NoiseModel::LaplaceDiagonal,
];

fn random_samples(n: usize, dc: usize, dx: usize, rng: &mut SeededRng) -> Vec<Sample> {
    (0..n)
        .map(|_| Sample {
            c: random_vec(dc, 1.0, rng),
            x: random_vec(dx, 1.0, rng),
        })
        .collect()
}

fn refs(samples: &[Sample]) -> Vec<&Sample> {
    samples.iter().collect()
}

fn first_failure(results: impl IntoIterator<Item = Check>) -> Check {
    let errs: Vec<String> = results.into_iter().filter_map(Result::err).collect();
    match errs.len() {
        0 => Ok(()),
        n => Err(format!("{n} failing instance(s), first: {}", errs[0])),
    }
}

// ---- criterion 10: gradients -------------------------------------------------

pub fn dense_net_gradients() -> Check {
    first_failure((0..INSTANCES).map(|i| {
        let mut rng = SeededRng::new(100 + i);
        let dims = [3, 2 + (i as usize % 4), 4, 2];
        let net = random_net(&dims, activation_for(i), &mut rng);
        let rows = 3;
        let input = Array2::from_shape_vec((rows, 3), random_vec(rows * 3, 1.0, &mut rng)).unwrap();
        let out_grad = Array2::from_shape_vec((rows, 2), random_vec(rows * 2, 1.0, &mut rng)).unwrap();
        let (_, cache) = net.forward_cached(input.view()).unwrap();
        let bw = net.backward(&cache, out_grad.view()).unwrap();
        let objective = |n: &mmbc::DenseNet, x: &Array2<f64>| (n.forward_batch(x.view()).unwrap() * &out_grad).sum();
        fd_check(
            &format!("dense params #{i}"),
            &bw.params,
            |p| objective(&with_params(&net, p), &input),
            net.params(),
        )?;
        fd_check(
            &format!("dense input #{i}"),
            bw.input.as_slice().unwrap(),
            |x| objective(&net, &Array2::from_shape_vec((rows, 3), x.to_vec()).unwrap()),
            input.as_slice().unwrap(),
        )
    }))
}

pub fn mse_gradients() -> Check {
    first_failure((0..INSTANCES).map(|i| {
        let mut rng = SeededRng::new(200 + i);
        let net = random_net(&[2, 6, 3], activation_for(i), &mut rng);
        let samples = random_samples(5, 2, 3, &mut rng);
        let batch = refs(&samples);
        let (_, grad) = mse_loss_and_grad(&net, &batch).unwrap();
        fd_check(
            &format!("mse #{i}"),
            &grad,
            |p| mse_loss_and_grad(&with_params(&net, p), &batch).unwrap().0,
            net.params(),
        )
    }))
}

pub fn bce_gradients() -> Check {
    first_failure((0..INSTANCES).map(|i| {
        let mut rng = SeededRng::new(300 + i);
        let (dc, dz, dx) = (1, 2, 1);
        let disc = random_net(&[dc + dx, 5, 1], activation_for(i), &mut rng);
        let real = Array2::from_shape_vec((4, dc + dx), random_vec(4 * (dc + dx), 1.0, &mut rng)).unwrap();
        let fake = Array2::from_shape_vec((3, dc + dx), random_vec(3 * (dc + dx), 1.0, &mut rng)).unwrap();
        let (_, grad) = discriminator_loss_and_grad(&disc, &real, &fake).unwrap();
        fd_check(
            &format!("discriminator bce #{i}"),
            &grad,
            |p| discriminator_loss_and_grad(&with_params(&disc, p), &real, &fake).unwrap().0,
            disc.params(),
        )?;
        let gen_net = random_net(&[dc + dz, 5, dx], activation_for(i + 1), &mut rng);
        let generator = MlpGenerator::from_net(gen_net.clone(), dc, dz).unwrap();
        let inputs = Array2::from_shape_vec((4, dc + dz), random_vec(4 * (dc + dz), 1.0, &mut rng)).unwrap();
        let (_, grad) = generator_nonsaturating_loss_and_grad(&generator, &disc, &inputs).unwrap();
        fd_check(
            &format!("generator bce #{i}"),
            &grad,
            |p| {
                let g = MlpGenerator::from_net(with_params(&gen_net, p), dc, dz).unwrap();
                generator_nonsaturating_loss_and_grad(&g, &disc, &inputs).unwrap().0
            },
            gen_net.params(),
        )
    }))
}

fn random_layout(noise: NoiseModel, i: u64, rng: &mut SeededRng) -> MixtureLayout {
    let components = 1 + (i as usize % 3);
    let dim = 1 + (i as usize / 3) % 2;
    MixtureLayout::new(components, dim, noise)
        .unwrap()
        .with_temperature(rng.uniform(0.5, 2.0))
        .unwrap()
}

pub fn gmm_nll_gradients(noise: NoiseModel) -> Check {
    first_failure((0..INSTANCES).map(|i| {
        let mut rng = SeededRng::new(400 + i);
        let layout = random_layout(noise, i, &mut rng);
        let raw = random_vec(layout.raw_len(), 1.0, &mut rng);
        let x = random_vec(layout.dim, 1.0, &mut rng);
        let (_, grad) = layout.nll_and_grad(&raw, &x).unwrap();
        fd_check(
            &format!("{noise} nll raw #{i}"),
            &grad,
            |r| layout.nll_and_grad(r, &x).unwrap().0,
            &raw,
        )?;
        let (dc, dz) = (2, (i % 2) as usize);
        let generator = MdnGenerator::new(dc, dz, &[6], activation_for(i), layout, &mut rng).unwrap();
        let net = random_net(generator.net().dims(), activation_for(i), &mut rng);
        let generator = MdnGenerator::from_net(net.clone(), dc, dz, layout).unwrap();
        let samples = random_samples(4, dc, layout.dim, &mut rng);
        let batch = refs(&samples);
        let seed = 4000 + i;
        let (_, grad) = mdn_loss_and_grad(&generator, &batch, &mut SeededRng::new(seed)).unwrap();
        fd_check(
            &format!("{noise} mdn loss #{i}"),
            &grad,
            |p| {
                let g = MdnGenerator::from_net(with_params(&net, p), dc, dz, layout).unwrap();
                mdn_loss_and_grad(&g, &batch, &mut SeededRng::new(seed)).unwrap().0
            },
            net.params(),
        )
    }))
}

pub fn infonce_gradients(mode: InfonceMode) -> Check {
    first_failure((0..INSTANCES).map(|i| {
        let mut rng = SeededRng::new(500 + i);
        let n = 2 + (i as usize % 4);
        let g = mode.generator_terms(n);
        let alpha = match mode {
            InfonceMode::NoGenerator => 0.0,
            InfonceMode::DynamicScaling => rng.uniform(ALPHA_MIN, 1.0),
            _ => 1.0,
        };
        let e_pos = rng.normal();
        let e_neg = random_vec(n, 1.5, &mut rng);
        let e_gen = random_vec(g, 1.5, &mut rng);
        let terms = infonce_from_energies(e_pos, &e_neg, &e_gen, alpha);
        let mut analytic = vec![terms.d_positive];
        analytic.extend(&terms.d_negatives);
        analytic.extend(&terms.d_generated);
        let mut all = vec![e_pos];
        all.extend(&e_neg);
        all.extend(&e_gen);
        fd_check(
            &format!("{mode} energies #{i}"),
            &analytic,
            |e| infonce_from_energies(e[0], &e[1..1 + n], &e[1 + n..], alpha).loss,
            &all,
        )?;

        let (dc, dx, b) = (1 + (i as usize % 2), 1 + (i as usize / 2) % 2, 3);
        let net = random_net(&[dc + dx, 6, 5, 1], activation_for(i), &mut rng);
        let conditions = random_vec(b * dc, 1.0, &mut rng);
        let positives = random_vec(b * dx, 1.0, &mut rng);
        let negatives = random_vec(b * n * dx, 1.0, &mut rng);
        let generated = random_vec(b * g * dx, 1.0, &mut rng);
        let batch = ContrastiveBatch {
            conditions: &conditions,
            positives: &positives,
            negatives: &negatives,
            generated: &generated,
            negatives_per_positive: n,
            generated_per_positive: g,
            alpha,
        };
        let energy = EnergyNet::from_net(net.clone(), dc, dx).unwrap();
        let (_, grad) = infonce_batch_grad(&energy, &batch).unwrap();
        fd_check(
            &format!("{mode} batch #{i}"),
            &grad,
            |p| {
                let e = EnergyNet::from_net(with_params(&net, p), dc, dx).unwrap();
                infonce_batch_grad(&e, &batch).unwrap().0
            },
            net.params(),
        )
    }))
}

pub fn generator_loss_gradients(noise: NoiseModel) -> Check {
    first_failure((0..INSTANCES).map(|i| {
        let mut rng = SeededRng::new(600 + i);
        let layout = random_layout(noise, i, &mut rng);
        let (dc, dz, dx) = (1 + (i as usize % 2), 2, layout.dim);
        let template = MdnGenerator::new(dc, dz, &[7], activation_for(i), layout, &mut rng).unwrap();
        let net = random_net(template.net().dims(), activation_for(i), &mut rng);
        let generator = MdnGenerator::from_net(net.clone(), dc, dz, layout).unwrap();
        let energy = EnergyNet::from_net(random_net(&[dc + dx, 6, 1], activation_for(i + 1), &mut rng), dc, dx).unwrap();
        let samples = random_samples(3, dc, dx, &mut rng);
        let batch = refs(&samples);
        let draws: Vec<FrozenDraw> = (0..batch.len())
            .map(|_| FrozenDraw {
                z: random_vec(dz, 1.0, &mut rng),
                component: rng.index(layout.components),
                eps: if noise.is_laplace() {
                    (0..dx).map(|_| rng.laplace()).collect()
                } else {
                    random_vec(dx, 1.0, &mut rng)
                },
            })
            .collect();
        let loss = generator_loss_batch(&energy, &generator, &batch, &draws).unwrap();
        fd_check(
            &format!("{noise} generator loss #{i}"),
            &loss.grad,
            |p| {
                let g = MdnGenerator::from_net(with_params(&net, p), dc, dz, layout).unwrap();
                generator_loss_batch(&energy, &g, &batch, &draws).unwrap().total
            },
            net.params(),
        )?;
        // The trait method draws its own randomness; a reseeded stream freezes it.
        let seed = 6000 + i;
        let loss = generator.loss_and_grad(&energy, &batch, &mut SeededRng::new(seed)).unwrap();
        fd_check(
            &format!("{noise} generator loss (seeded) #{i}"),
            &loss.grad,
            |p| {
                let g = MdnGenerator::from_net(with_params(&net, p), dc, dz, layout).unwrap();
                g.loss_and_grad(&energy, &batch, &mut SeededRng::new(seed)).unwrap().total
            },
            net.params(),
        )
    }))
}

pub fn ebgan_generator_gradients() -> Check {
    first_failure((0..INSTANCES).map(|i| {
        let mut rng = SeededRng::new(700 + i);
        let (dc, dz, dx) = (1, 2, 1 + (i as usize % 2));
        let net = random_net(&[dc + dz, 6, dx], activation_for(i), &mut rng);
        let energy = EnergyNet::from_net(random_net(&[dc + dx, 6, 1], activation_for(i + 2), &mut rng), dc, dx).unwrap();
        let samples = random_samples(4, dc, dx, &mut rng);
        let batch = refs(&samples);
        let seed = 7000 + i;
        let generator = MlpGenerator::from_net(net.clone(), dc, dz).unwrap();
        let loss = generator.loss_and_grad(&energy, &batch, &mut SeededRng::new(seed)).unwrap();
        fd_check(
            &format!("ebgan generator #{i}"),
            &loss.grad,
            |p| {
                let g = MlpGenerator::from_net(with_params(&net, p), dc, dz).unwrap();
                g.loss_and_grad(&energy, &batch, &mut SeededRng::new(seed)).unwrap().total
            },
            net.params(),
        )
    }))
}

pub fn gradient_suite() -> Vec<(String, Check)> {
    let mut out = vec![
        ("dense net".to_string(), dense_net_gradients()),
        ("mse".to_string(), mse_gradients()),
        ("bce with logits".to_string(), bce_gradients()),
        ("ebgan generator".to_string(), ebgan_generator_gradients()),
    ];
    for noise in NOISE_MODELS {
        out.push((format!("gmm nll {noise}"), gmm_nll_gradients(noise)));
        out.push((format!("generator loss {noise}"), generator_loss_gradients(noise)));
    }
    for mode in InfonceMode::ALL {
        out.push((format!("infonce {mode}"), infonce_gradients(mode)));
    }
    out
}

// ---- criterion 11: InfoNCE identities ----------------------------------------

pub fn infonce_identities() -> Check {
    // (negatives, generator terms) giving denominator counts 2, 32, 34, 65
    for (n, g) in [(1usize, 0usize), (31, 0), (32, 1), (64, 0)] {
        let count = 1 + n + g;
        for e in [-3.0, 0.0, 2.5] {
            let loss = infonce_from_energies(e, &vec![e; n], &vec![e; g], 1.0).loss;
            let want = (count as f64).ln();
            ensure((loss - want).abs() < 1e-12, || format!("count {count}: loss {loss} != ln {count}"))?;
        }
        let energy = EnergyNet::zeros(1, 1, &[8], Activation::Relu).unwrap();
        let negs = vec![vec![0.3]; n];
        let gens = vec![vec![-0.2]; g];
        let loss = mmbc::energy::infonce_loss(&energy, &[0.1], &[0.5], &negs, &gens, 1.0).unwrap();
        ensure((loss - (count as f64).ln()).abs() < 1e-12, || format!("zero net, count {count}: {loss}"))?;
    }
    ensure(mi_lower_bound(32f64.ln(), 32).abs() < 1e-12, || "uniform bound is not 0".into())?;

    let mut rng = SeededRng::new(11);
    for _ in 0..200 {
        let e_pos = 3.0 * rng.normal();
        let loss = infonce_from_energies(e_pos, &[], &[], 1.0).loss;
        ensure(loss.abs() < 1e-12, || format!("no negatives: loss {loss}"))?;

        let n = 1 + rng.index(10);
        let g = rng.index(4);
        let e_neg = random_vec(n, 2.0, &mut rng);
        let e_gen = random_vec(g, 2.0, &mut rng);
        let alpha = rng.uniform(0.0, 1.0);
        let base = infonce_from_energies(e_pos, &e_neg, &e_gen, alpha).loss;
        let shift = 50.0 * rng.normal();
        let moved = |v: &[f64]| v.iter().map(|x| x + shift).collect::<Vec<_>>();
        let shifted = infonce_from_energies(e_pos + shift, &moved(&e_neg), &moved(&e_gen), alpha).loss;
        ensure((base - shifted).abs() < 1e-9, || format!("shift {shift}: {base} vs {shifted}"))?;

        let mut prev = f64::NEG_INFINITY;
        for k in 0..=10 {
            let a = k as f64 / 10.0;
            let l = infonce_from_energies(e_pos, &e_neg, &e_gen, a).loss;
            ensure(l >= prev - 1e-12, || format!("loss decreased in alpha at {a}"))?;
            if g > 0 && k > 0 {
                ensure(l > prev, || format!("loss not strictly increasing in alpha at {a}"))?;
            }
            prev = l;
        }
    }
    Ok(())
}

// ---- criterion 12: alpha schedule --------------------------------------------

pub fn alpha_schedule_check() -> Check {
    let total = 100;
    for (t, want) in [(0, 1.0), (50, 0.5), (95, 0.1)] {
        let a = alpha_schedule(t, total, ALPHA_MIN);
        ensure((a - want).abs() < 1e-15, || format!("alpha({t}) = {a}, expected {want}"))?;
    }
    ensure(alpha_schedule(total, total, ALPHA_MIN) == ALPHA_MIN, || "alpha_T is not clamped".into())?;
    let mut prev = f64::INFINITY;
    for t in 0..=total {
        let a = alpha_schedule(t, total, ALPHA_MIN);
        ensure(a <= prev, || format!("alpha increased at t = {t}"))?;
        ensure((ALPHA_MIN..=1.0).contains(&a), || format!("alpha({t}) = {a} out of range"))?;
        prev = a;
    }
    for mode in InfonceMode::ALL {
        let config = InfonceConfig {
            mode,
            negatives: 32,
            alpha_min: ALPHA_MIN,
            total_epochs: total,
        };
        for t in [0, 30, 99] {
            let want = if mode == InfonceMode::DynamicScaling {
                alpha_schedule(t, total, ALPHA_MIN)
            } else {
                1.0
            };
            ensure(config.alpha(t) == want, || format!("{mode}: alpha({t}) = {}", config.alpha(t)))?;
        }
    }
    Ok(())
}

// ---- criterion 13: metric oracles --------------------------------------------

/// Independent count: for each condition, which modes have any sample within `eps`.
fn matched_by_exhaustion(samples: &[Vec<Vec<f64>>], modes: &[Vec<Vec<f64>>], eps: f64) -> Vec<usize> {
    let mut out = Vec::new();
    for (xs, ms) in samples.iter().zip(modes) {
        let mut count = 0;
        for m in ms {
            let mut hit = false;
            for x in xs {
                let d: f64 = x.iter().zip(m).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
                if d <= eps {
                    hit = true;
                }
            }
            if hit {
                count += 1;
            }
        }
        out.push(count);
    }
    out
}

fn scalars(v: &[f64]) -> Vec<Vec<f64>> {
    v.iter().map(|x| vec![*x]).collect()
}

pub fn metric_case_table() -> Vec<(Vec<Vec<Vec<f64>>>, Vec<Vec<Vec<f64>>>)> {
    vec![
        // exact samples
        (
            vec![scalars(&[1.0, -1.0]), scalars(&[0.3, -0.3])],
            vec![scalars(&[1.0, -1.0]), scalars(&[0.3, -0.3])],
        ),
        // one-sided collapse
        (vec![scalars(&[1.0; 10])], vec![scalars(&[1.0, -1.0])]),
        // two of three conditions covered
        (
            vec![scalars(&[1.0, -1.0]), scalars(&[1.05, -0.95]), scalars(&[0.0, 0.5])],
            vec![scalars(&[1.0, -1.0]); 3],
        ),
        // mixed {2, 1, 0} with three-mode conditions
        (
            vec![scalars(&[0.5, -0.5, 0.4]), scalars(&[0.0, 0.9]), scalars(&[0.2])],
            vec![scalars(&[0.5, -0.5, 0.0]), scalars(&[0.5, -0.5, 0.0]), scalars(&[0.5, -0.5, 0.0])],
        ),
        // vector targets with Euclidean matching
        (
            vec![vec![vec![0.0, 0.0], vec![1.0, 1.05]], vec![vec![2.0, 2.0]]],
            vec![vec![vec![0.05, 0.0], vec![1.0, 1.0]], vec![vec![2.06, 2.06], vec![0.0, 0.0]]],
        ),
    ]
}

pub fn metric_oracles() -> Check {
    let eps = 0.07;
    for (k, (samples, modes)) in metric_case_table().into_iter().enumerate() {
        let counts = matched_by_exhaustion(&samples, &modes, eps);
        let full = counts.iter().zip(&modes).filter(|(c, m)| **c == m.len()).count();
        let want_tmc = 100.0 * full as f64 / modes.len() as f64;
        let want_amc = counts.iter().sum::<usize>() as f64 / modes.len() as f64;
        let tmc = total_mode_coverage(&samples, &modes, eps).map_err(|e| e.to_string())?;
        let amc = avg_modes_captured(&samples, &modes, eps).map_err(|e| e.to_string())?;
        ensure((tmc - want_tmc).abs() < 1e-9, || format!("case {k}: TMC {tmc} vs {want_tmc}"))?;
        ensure((amc - want_amc).abs() < 1e-12, || format!("case {k}: AMC {amc} vs {want_amc}"))?;
    }

    let mut rng = SeededRng::new(13);
    for trial in 0..1000 {
        let n = 1 + rng.index(200);
        let m = 1 + rng.index(200);
        let p: Vec<f64> = (0..n).map(|_| rng.uniform(-2.0, 2.0).powi(3)).collect();
        let q: Vec<f64> = (0..m).map(|_| rng.normal()).collect();
        let same = kl_divergence_hist(&p, &p, 50, KL_DELTA).unwrap();
        ensure(same.abs() < 1e-9, || format!("trial {trial}: KL(p, p) = {same}"))?;
        let kl = kl_divergence_hist(&p, &q, 50, KL_DELTA).unwrap();
        ensure(kl >= 0.0 && kl.is_finite(), || format!("trial {trial}: KL = {kl}"))?;
        let (w_pq, w_qp) = (wasserstein_hist(&p, &q, 50).unwrap(), wasserstein_hist(&q, &p, 50).unwrap());
        ensure((w_pq - w_qp).abs() < 1e-12, || format!("trial {trial}: W asymmetric {w_pq} vs {w_qp}"))?;
        ensure(w_pq >= 0.0, || format!("trial {trial}: W negative"))?;
        ensure(wasserstein_hist(&p, &p, 50).unwrap() == 0.0, || format!("trial {trial}: W(p, p) != 0"))?;
    }

    // Bin probabilities one at [0, 1) and one at [1, 2): unit width, so densities equal probabilities.
    let kl = kl_divergence_hist(&[0.0; 4], &[0.0, 0.0, 2.0, 2.0], 2, KL_DELTA).unwrap();
    ensure((kl - 2f64.ln()).abs() < 1e-8, || format!("two-bin KL {kl}"))?;

    // Point masses one bin apart over a fixed hull [0, 10] with 10 bins of width 1.
    let p = [0.5, 0.0, 10.0];
    let q = [1.5, 0.0, 10.0];
    let w = wasserstein_hist(&p, &q, 10).unwrap();
    ensure((w - 1.0 / 3.0).abs() < 1e-12, || format!("one-bin shift W = {w}"))?;
    let w = wasserstein_hist(&[0.0, 1.0], &[0.0, 1.0], 50).unwrap();
    ensure(w == 0.0, || format!("identity W = {w}"))
}

// ---- criterion 14: mixture correctness ---------------------------------------

fn gmm(weights: &[f64], means: &[f64], scales: &[f64], dim: usize, noise: NoiseModel) -> GmmParams {
    GmmParams {
        weights: weights.to_vec(),
        means: means.to_vec(),
        scales: scales.to_vec(),
        dim,
        noise,
    }
}

pub fn gmm_correctness() -> Check {
    let mut rng = SeededRng::new(14);
    for _ in 0..100 {
        let (mu, s, x) = (rng.normal(), rng.uniform(0.05, 3.0), rng.normal());
        let gauss = 0.5 * (2.0 * std::f64::consts::PI).ln() + s.ln() + 0.5 * ((x - mu) / s).powi(2);
        let nll = gmm_nll(&gmm(&[1.0], &[mu], &[s], 1, NoiseModel::Diagonal), &[x]).unwrap();
        ensure((nll - gauss).abs() < 1e-12 * gauss.abs().max(1.0), || format!("gaussian nll {nll} vs {gauss}"))?;
        let lap = (2.0 * s).ln() + (x - mu).abs() / s;
        let nll = gmm_nll(&gmm(&[1.0], &[mu], &[s], 1, NoiseModel::LaplaceDiagonal), &[x]).unwrap();
        ensure((nll - lap).abs() < 1e-12 * lap.abs().max(1.0), || format!("laplace nll {nll} vs {lap}"))?;
        let twin = gmm(&[0.5, 0.5], &[mu, mu], &[s, s], 1, NoiseModel::Diagonal);
        let nll2 = gmm_nll(&twin, &[x]).unwrap();
        ensure((nll2 - gauss).abs() < 1e-12 * gauss.abs().max(1.0), || "mixture collapse identity".into())?;
    }
    let unit = gmm_nll(&gmm(&[1.0], &[0.4], &[1.0], 1, NoiseModel::Diagonal), &[0.4]).unwrap();
    ensure((unit - 0.918_938_533_204_672_7).abs() < 1e-12, || format!("unit nll {unit}"))?;

    // two well separated clusters
    let two = gmm(&[0.5, 0.5], &[-1.0, 1.0], &[0.01, 0.01], 1, NoiseModel::Diagonal);
    let draws: Vec<f64> = (0..10_000).map(|_| mmbc::mdn::gmm_sample(&two, &mut rng)[0]).collect();
    let upper: Vec<f64> = draws.iter().copied().filter(|v| *v > 0.0).collect();
    let lower: Vec<f64> = draws.iter().copied().filter(|v| *v <= 0.0).collect();
    let frac = upper.len() as f64 / draws.len() as f64;
    ensure((0.47..=0.53).contains(&frac), || format!("upper cluster frequency {frac}"))?;
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    ensure((mean(&upper) - 1.0).abs() < 0.01, || format!("upper mean {}", mean(&upper)))?;
    ensure((mean(&lower) + 1.0).abs() < 0.01, || format!("lower mean {}", mean(&lower)))?;

    // degenerate mixture at the scale floor
    let point = gmm(&[1.0, 0.0], &[0.7, -3.0], &[SCALE_FLOOR, SCALE_FLOOR], 1, NoiseModel::Diagonal);
    for _ in 0..1000 {
        let v = mmbc::mdn::gmm_sample(&point, &mut rng)[0];
        ensure((v - 0.7).abs() <= 6.0 * SCALE_FLOOR, || format!("degenerate draw {v}"))?;
    }

    // Laplace variance 2 b^2
    let b = 0.3;
    let lap = gmm(&[1.0], &[0.0], &[b], 1, NoiseModel::LaplaceDiagonal);
    let draws: Vec<f64> = (0..100_000).map(|_| mmbc::mdn::gmm_sample(&lap, &mut rng)[0]).collect();
    let m = mean(&draws);
    let var = draws.iter().map(|v| (v - m).powi(2)).sum::<f64>() / draws.len() as f64;
    ensure((var / (2.0 * b * b) - 1.0).abs() < 0.1, || format!("laplace variance {var}"))?;

    // simplex and floor invariants over random raw outputs
    for k in 0..1000 {
        let noise = NOISE_MODELS[k % NOISE_MODELS.len()];
        let layout = MixtureLayout::new(1 + rng.index(5), 1 + rng.index(3), noise)
            .unwrap()
            .with_temperature(rng.uniform(0.1, 5.0))
            .unwrap();
        let raw: Vec<f64> = (0..layout.raw_len()).map(|_| 30.0 * rng.normal()).collect();
        let p = layout.decode(&raw).unwrap();
        let total: f64 = p.weights.iter().sum();
        ensure((total - 1.0).abs() < 1e-9, || format!("weights sum {total}"))?;
        ensure(p.weights.iter().all(|w| *w >= 0.0), || "negative weight".into())?;
        ensure(p.scales.iter().all(|s| *s >= SCALE_FLOOR && s.is_finite()), || "scale below floor".into())?;
    }

    // zero head and temperature limit
    let layout = MixtureLayout::new(4, 2, NoiseModel::Diagonal).unwrap();
    let p = layout.decode(&vec![0.0; layout.raw_len()]).unwrap();
    ensure(p.weights.iter().all(|w| (w - 0.25).abs() < 1e-15), || "zero head weights".into())?;
    ensure(
        p.scales.iter().all(|s| (s - softplus(0.0) - SCALE_FLOOR).abs() < 1e-15),
        || "zero head scales".into(),
    )?;
    let hot = MixtureLayout::new(3, 1, NoiseModel::Diagonal).unwrap().with_temperature(1e3).unwrap();
    let mut raw = vec![0.0; hot.raw_len()];
    raw[..3].copy_from_slice(&[2.0, -1.0, 0.5]);
    let w = hot.decode(&raw).unwrap().weights;
    let spread = w.iter().cloned().fold(f64::MIN, f64::max) - w.iter().cloned().fold(f64::MAX, f64::min);
    ensure(spread < 1e-3, || format!("weights at high temperature spread {spread}"))
}

// ---- criterion 15: inverse kinematics ----------------------------------------

pub fn ik_oracle() -> Check {
    let mut rng = SeededRng::new(15);
    let reach = LINK_1 + LINK_2;
    for k in 0..1000 {
        let r = reach * rng.uniform(0.0, 1.0).sqrt();
        let phi = rng.uniform(-std::f64::consts::PI, std::f64::consts::PI);
        let target = [r * phi.cos(), r * phi.sin()];
        let sols = ik2link_solve(target).map_err(|e| format!("target {k}: {e}"))?;
        for q in &sols {
            let p = ik2link_forward(*q);
            let err = ((p[0] - target[0]).powi(2) + (p[1] - target[1]).powi(2)).sqrt();
            ensure(err <= 1e-9, || format!("target {target:?}: FK error {err:e}"))?;
        }
        let interior = r > 1e-6 && r < reach - 1e-6;
        if interior {
            ensure(sols.len() == 2, || format!("interior target {target:?} gave {} solutions", sols.len()))?;
            let d = ((sols[0][0] - sols[1][0]).powi(2) + (sols[0][1] - sols[1][1]).powi(2)).sqrt();
            ensure(d > 1e-9, || format!("interior target {target:?}: duplicate solutions"))?;
        }
    }
    let edge = ik2link_solve([6.0, 0.0]).map_err(|e| e.to_string())?;
    ensure(edge.len() == 1 && edge[0][0].abs() < 1e-12 && edge[0][1].abs() < 1e-12, || {
        format!("(6, 0) gave {edge:?}")
    })?;
    ensure(ik2link_solve([7.0, 0.0]).is_err(), || "(7, 0) should be unreachable".into())?;
    let mut sols = ik2link_solve([3.0, 3.0]).map_err(|e| e.to_string())?;
    sols.sort_by(|a, b| a[0].total_cmp(&b[0]));
    let want = [[0.0, std::f64::consts::FRAC_PI_2], [std::f64::consts::FRAC_PI_2, -std::f64::consts::FRAC_PI_2]];
    for (s, w) in sols.iter().zip(want) {
        ensure((s[0] - w[0]).abs() < 1e-12 && (s[1] - w[1]).abs() < 1e-12, || format!("(3, 3) gave {sols:?}"))?;
    }
    Ok(())
}

// ---- criterion 16: determinism ----------------------------------------------

/// Short runs of every model; each is executed twice and the metric CSVs compared byte for byte.
pub fn determinism(scratch: &Path) -> Check {
    let mut configs: Vec<ExperimentConfig> = ModelKind::ALL
        .iter()
        .map(|&m| {
            let mut c = ExperimentConfig::preset(TaskKind::Hyperbola, m);
            c.train.epochs = 3;
            c.seeds = vec![0, 1];
            c
        })
        .collect();
    let mut ik = ExperimentConfig::preset(TaskKind::Ik2link, ModelKind::EbganMdn);
    ik.train.epochs = 1;
    ik.seeds = vec![2];
    configs.push(ik);
    for (k, config) in configs.into_iter().enumerate() {
        let mut texts = Vec::new();
        for rep in 0..2 {
            let mut c = config.clone();
            let dir = scratch.join(format!("det_{k}_{rep}"));
            c.out = Some(dir.clone());
            mmbc::run_experiment(&c).map_err(|e| e.to_string())?;
            texts.push(std::fs::read(dir.join("metrics.csv")).map_err(|e| e.to_string())?);
        }
        ensure(texts[0] == texts[1], || {
            format!("{} / {}: metric CSVs differ", config.task.name(), config.model.name())
        })?;
    }
    Ok(())
}
