//! The two-link arm: analytic inverse kinematics, then a short MDN fit
//! scored by how often sampled joint angles reach the target.

use mmbc::datasets::{ik2link_forward, ik2link_solve};
use mmbc::experiment::evaluate;
use mmbc::{train_model, DatasetSplits, EvalConfig, ModelKind, SyntheticTask, TaskKind, TrainConfig};

fn main() -> mmbc::Result<()> {
    let target = [2.0, 3.5];
    for q in ik2link_solve(target)? {
        let p = ik2link_forward(q);
        println!("q = ({:+.4}, {:+.4}) reaches ({:.6}, {:.6})", q[0], q[1], p[0], p[1]);
    }

    let task = SyntheticTask::ik2link();
    let data = DatasetSplits::generate(task, 0)?;
    let config = TrainConfig::preset(TaskKind::Ik2link, ModelKind::Mdn);
    let (model, _) = train_model(&config, &data, 0)?;
    let (report, _) = evaluate(&model, &task, &data.test, &EvalConfig::default(), 0)?;
    println!(
        "MDN on {} targets: best success {:.3}, mean success {:.3}",
        data.test.len(),
        report.success_best.unwrap_or(f64::NAN),
        report.success_mean.unwrap_or(f64::NAN)
    );
    Ok(())
}
