//! Coverage and distribution metrics on synthetic predictions: a sampler
//! that hits both hyperbola branches, one that averages them, and one that
//! collapses onto the upper branch.

use mmbc::metrics::{avg_modes_captured, kl_divergence_hist, total_mode_coverage, wasserstein_hist};
use mmbc::{SeededRng, SyntheticTask};

fn main() -> mmbc::Result<()> {
    let task = SyntheticTask::hyperbola();
    let grid = task.test_grid(100)?;
    let modes: Vec<Vec<Vec<f64>>> = grid.iter().map(|t| t.modes.clone()).collect();
    let mut rng = SeededRng::new(3);

    let mut sampler = |pick: &mut dyn FnMut(&[Vec<f64>], &mut SeededRng) -> f64| -> Vec<Vec<Vec<f64>>> {
        modes.iter().map(|m| (0..10).map(|_| vec![pick(m, &mut rng)]).collect()).collect()
    };
    let covering = sampler(&mut |m, r| m[r.index(m.len())][0] + 0.02 * r.normal());
    let averaging = sampler(&mut |_, r| 0.02 * r.normal());
    let collapsed = sampler(&mut |m, r| m[0][0] + 0.02 * r.normal());

    let reference: Vec<f64> = modes
        .iter()
        .flat_map(|m| (0..5).flat_map(move |_| m.iter().map(|x| x[0])))
        .collect();
    for (name, samples) in [("covering", &covering), ("averaging", &averaging), ("collapsed", &collapsed)] {
        let flat: Vec<f64> = samples.iter().flatten().map(|x| x[0]).collect();
        println!(
            "{name:<10} TMC {:>5.1}%  AMC {:.2}  KL {:>7.3}  W {:.4}",
            total_mode_coverage(samples, &modes, 0.07)?,
            avg_modes_captured(samples, &modes, 0.07)?,
            kl_divergence_hist(&flat, &reference, 50, 1e-10)?,
            wasserstein_hist(&flat, &reference, 50)?
        );
    }
    Ok(())
}
