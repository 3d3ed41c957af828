//! Trains EBGAN-MDN on the hyperbola task for one seed and prints the
//! coverage metrics and a few sampled actions.
//!
//!     cargo run --release --example hyperbola_ebgan_mdn

use mmbc::experiment::evaluate;
use mmbc::trainer::train_ebgan_mdn;
use mmbc::{DatasetSplits, EvalConfig, ModelKind, ModelNets, SeededRng, SyntheticTask, TaskKind, TrainConfig, TrainedModel};

fn main() -> mmbc::Result<()> {
    let seed = 0;
    let task = SyntheticTask::hyperbola();
    let data = DatasetSplits::generate(task, seed)?;
    let config = TrainConfig::preset(TaskKind::Hyperbola, ModelKind::EbganMdn);

    let (model, trace) = train_ebgan_mdn(&config, &data, seed)?;
    let last = trace.records.last().expect("at least one epoch");
    println!(
        "epoch {}: energy loss {:.3}, generator energy {:.3}, generator NLL {:.3}",
        last.epoch, last.em_loss, last.gen_energy, last.gen_nll
    );

    let mut rng = SeededRng::new(42);
    for c in [-0.8, 0.0, 0.5] {
        let xs = model.generator.sample_actions(&[c], 6, &mut rng)?;
        let shown: Vec<String> = xs.iter().map(|x| format!("{:+.3}", x[0])).collect();
        println!("c = {c:+.1}: modes {:?} samples [{}]", task.modes(&[c])?, shown.join(", "));
    }

    let trained = TrainedModel::from(ModelNets::EbganMdn(model));
    let (report, _) = evaluate(&trained, &task, &data.test, &EvalConfig::default(), seed)?;
    println!("{}", report.to_json()?);
    Ok(())
}
