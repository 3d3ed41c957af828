//! The contrastive loss on hand-picked energies: the uniform case, an empty
//! denominator, shift invariance and the effect of the generator weight.

use mmbc::energy::{alpha_schedule, infonce_from_energies, mi_lower_bound, ALPHA_MIN};

fn main() {
    for count in [2usize, 32, 34, 65] {
        let t = infonce_from_energies(0.0, &vec![0.0; count - 1], &[], 1.0);
        println!("{count} equal energies: loss {:.6}, ln(count) {:.6}", t.loss, (count as f64).ln());
    }

    println!("no negatives: loss {}", infonce_from_energies(1.3, &[], &[], 1.0).loss);

    let neg = [0.4, -0.2, 1.1];
    let a = infonce_from_energies(0.1, &neg, &[0.3], 1.0).loss;
    let shifted: Vec<f64> = neg.iter().map(|e| e + 5.0).collect();
    let b = infonce_from_energies(5.1, &shifted, &[5.3], 1.0).loss;
    println!("shift by 5: {a:.12} vs {b:.12}");

    // A smaller alpha weakens the generator sample in the denominator.
    for t in [0, 25, 50, 75, 95, 100] {
        let alpha = alpha_schedule(t, 100, ALPHA_MIN);
        let loss = infonce_from_energies(0.1, &neg, &[0.3], alpha).loss;
        println!("epoch {t:>3}: alpha {alpha:.2} loss {loss:.4} MI bound {:.4}", mi_lower_bound(loss, 5));
    }
}
