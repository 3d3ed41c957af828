//! Trains IBC on the hyperbola and prints a coarse view of its energy
//! landscape: rows are conditions, `#` marks the lowest-energy targets.
//! Pass a path to also write the full grid as CSV.

use mmbc::{train_model, DatasetSplits, ModelKind, SyntheticTask, TaskKind, TrainConfig};

fn main() -> mmbc::Result<()> {
    let task = SyntheticTask::hyperbola();
    let data = DatasetSplits::generate(task, 0)?;
    let mut config = TrainConfig::preset(TaskKind::Hyperbola, ModelKind::Ibc);
    config.epochs = 30;
    let (model, _) = train_model(&config, &data, 0)?;
    let land = model.landscape(&task, 40)?.expect("IBC has an energy model");

    for ci in (0..land.c_axis.len()).step_by(4) {
        let row: Vec<f64> = (0..land.x_axis.len()).map(|xi| land.get(ci, xi)).collect();
        let lo = row.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let line: String = row
            .iter()
            .map(|e| match (e - lo) / (hi - lo).max(1e-12) {
                v if v < 0.1 => '#',
                v if v < 0.4 => '+',
                _ => '.',
            })
            .collect();
        println!("c = {:+.2} |{line}|", land.c_axis[ci]);
    }
    if let Some(path) = std::env::args().nth(1) {
        land.save_csv(path.as_ref())?;
        println!("wrote {path}");
    }
    Ok(())
}
