//! Decodes one raw network output under every noise model and compares the
//! resulting scales, densities and samples.

use mmbc::mdn::gmm_nll;
use mmbc::{MixtureLayout, NoiseModel, SeededRng};

fn main() -> mmbc::Result<()> {
    let noises = [
        NoiseModel::Diagonal,
        NoiseModel::Isotropic,
        NoiseModel::IsotropicAcrossClusters,
        NoiseModel::Fixed(1e-2),
        NoiseModel::LaplaceDiagonal,
    ];
    for noise in noises {
        let layout = MixtureLayout::new(2, 2, noise)?;
        let mut rng = SeededRng::new(1);
        let raw: Vec<f64> = (0..layout.raw_len()).map(|_| rng.normal()).collect();
        let gmm = layout.decode(&raw)?;
        let draws: Vec<String> = (0..3)
            .map(|_| {
                let x = gmm.draw(&mut rng).x;
                format!("({:+.2}, {:+.2})", x[0], x[1])
            })
            .collect();
        println!(
            "{:<28} raw len {:>2}  weights {:.3?}  scales {:.3?}  NLL at origin {:.3}  draws {}",
            noise.to_string(),
            layout.raw_len(),
            gmm.weights,
            gmm.scales,
            gmm_nll(&gmm, &[0.0, 0.0])?,
            draws.join(" ")
        );
    }
    Ok(())
}
