//! Every model on the lines task with one seed. Takes a few minutes in
//! release mode; pass an epoch count to shorten it.
//!
//!     cargo run --release --example baselines_comparison -- 20

use mmbc::{run_experiment, ExperimentConfig, ModelKind, TaskKind};

fn main() -> mmbc::Result<()> {
    let epochs: Option<usize> = std::env::args().nth(1).and_then(|a| a.parse().ok());
    println!("{:<12} {:>7} {:>6} {:>8} {:>8}", "model", "TMC %", "AMC", "KL", "W");
    for model in ModelKind::ALL {
        let mut config = ExperimentConfig::preset(TaskKind::Lines, model);
        config.seeds = vec![0];
        if let Some(e) = epochs {
            config.train.epochs = e;
        }
        let r = run_experiment(&config)?.per_seed[0].metrics;
        println!(
            "{:<12} {:>7.1} {:>6.2} {:>8.3} {:>8.4}",
            model.display_name(),
            r.tmc_percent.unwrap_or(f64::NAN),
            r.amc.unwrap_or(f64::NAN),
            r.kl.unwrap_or(f64::NAN),
            r.wasserstein.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
