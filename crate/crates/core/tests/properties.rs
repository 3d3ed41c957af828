use mmbc::datasets::{ik2link_forward, ik2link_solve, linspace, wrap_angle};
use mmbc::energy::{alpha_schedule, infonce_from_energies};
use mmbc::mdn::{log_sum_exp, softmax};
use mmbc::metrics::{avg_modes_captured, kl_divergence_hist, total_mode_coverage, wasserstein_hist, Histogram};
use mmbc::{AdamState, DenseNet, MixtureLayout, NoiseModel, SeededRng};
use mmbc::nn::Activation;
use proptest::prelude::*;

fn finite_vec(len: std::ops::Range<usize>) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-20.0..20.0f64, len)
}

fn noise_model() -> impl Strategy<Value = NoiseModel> {
    prop_oneof![
        Just(NoiseModel::Diagonal),
        Just(NoiseModel::Isotropic),
        Just(NoiseModel::IsotropicAcrossClusters),
        Just(NoiseModel::Fixed(0.1)),
        Just(NoiseModel::LaplaceDiagonal),
    ]
}

proptest! {
    #[test]
    fn softmax_is_a_shift_invariant_distribution(v in finite_vec(1..12), shift in -50.0..50.0f64) {
        let p = softmax(&v);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(p.iter().all(|&x| x >= 0.0));
        let shifted: Vec<f64> = v.iter().map(|x| x + shift).collect();
        for (a, b) in p.iter().zip(softmax(&shifted)) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn log_sum_exp_is_bounded_by_max(v in finite_vec(1..12)) {
        let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let l = log_sum_exp(&v);
        prop_assert!(l >= m - 1e-12);
        prop_assert!(l <= m + (v.len() as f64).ln() + 1e-12);
    }

    #[test]
    fn alpha_stays_in_range_and_never_rises(total in 1usize..300, a_min in 0.0..1.0f64) {
        let mut prev = f64::INFINITY;
        for t in 0..=total {
            let a = alpha_schedule(t, total, a_min);
            prop_assert!(a <= 1.0 && a >= a_min);
            prop_assert!(a <= prev);
            prev = a;
        }
    }

    #[test]
    fn infonce_is_nonnegative_and_shift_invariant(
        pos in -5.0..5.0f64,
        neg in finite_vec(0..8),
        gen in finite_vec(0..4),
        alpha in 0.05..1.0f64,
        shift in -10.0..10.0f64,
    ) {
        let t = infonce_from_energies(pos, &neg, &gen, alpha);
        prop_assert!(t.loss >= -1e-12);
        let moved = |v: &[f64]| v.iter().map(|e| e + shift).collect::<Vec<_>>();
        let s = infonce_from_energies(pos + shift, &moved(&neg), &moved(&gen), alpha);
        prop_assert!((t.loss - s.loss).abs() < 1e-9);
        // Gradients of a log-softmax sum to zero over all logits.
        let total = t.d_positive + t.d_negatives.iter().sum::<f64>() + t.d_generated.iter().sum::<f64>();
        prop_assert!(total.abs() < 1e-9);
    }

    #[test]
    fn shrinking_alpha_lowers_the_loss(pos in -3.0..3.0f64, neg in finite_vec(1..6), gen in finite_vec(1..4), a in 0.05..1.0f64) {
        let hi = infonce_from_energies(pos, &neg, &gen, a).loss;
        let lo = infonce_from_energies(pos, &neg, &gen, a * 0.5).loss;
        prop_assert!(lo <= hi + 1e-12);
    }

    #[test]
    fn histogram_densities_integrate_to_one(v in prop::collection::vec(-3.0..3.0f64, 1..200), bins in 1usize..60) {
        let h = Histogram::new(&v, -3.0, 3.0, bins).unwrap();
        prop_assert!((h.probabilities().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn kl_and_wasserstein_basic_laws(
        p in prop::collection::vec(-2.0..2.0f64, 2..80),
        q in prop::collection::vec(-2.0..2.0f64, 2..80),
        bins in 2usize..60,
    ) {
        prop_assert!(kl_divergence_hist(&p, &p, bins, 1e-10).unwrap().abs() < 1e-12);
        prop_assert!(kl_divergence_hist(&p, &q, bins, 1e-10).unwrap() >= 0.0);
        prop_assert_eq!(wasserstein_hist(&p, &p, bins).unwrap(), 0.0);
        let pq = wasserstein_hist(&p, &q, bins).unwrap();
        let qp = wasserstein_hist(&q, &p, bins).unwrap();
        prop_assert!((pq - qp).abs() < 1e-12);
        prop_assert!((0.0..=4.0 + 1e-12).contains(&pq));
    }

    #[test]
    fn coverage_metrics_are_ordered(
        modes in prop::collection::vec(prop::collection::vec(-1.0..1.0f64, 1..4), 1..10),
        samples in prop::collection::vec(prop::collection::vec(-1.0..1.0f64, 1..12), 1..10),
    ) {
        let n = modes.len().min(samples.len());
        let wrap = |v: &[Vec<f64>]| -> Vec<Vec<Vec<f64>>> { v[..n].iter().map(|c| c.iter().map(|&x| vec![x]).collect()).collect() };
        let (m, s) = (wrap(&modes), wrap(&samples));
        let tmc = total_mode_coverage(&s, &m, 0.07).unwrap();
        let amc = avg_modes_captured(&s, &m, 0.07).unwrap();
        prop_assert!((0.0..=100.0).contains(&tmc));
        let max_modes = m.iter().map(|c| c.len()).max().unwrap() as f64;
        prop_assert!(amc >= 0.0 && amc <= max_modes);
        // Every fully covered condition contributes all its modes.
        let min_modes = m.iter().map(|c| c.len()).min().unwrap() as f64;
        prop_assert!(amc + 1e-12 >= tmc / 100.0 * min_modes);
        // Sampling the modes themselves covers everything.
        prop_assert_eq!(total_mode_coverage(&m, &m, 0.07).unwrap(), 100.0);
    }

    #[test]
    fn ik_solutions_round_trip(r in 0.05..5.95f64, theta in -3.1..3.1f64) {
        let target = [r * theta.cos(), r * theta.sin()];
        let solutions = ik2link_solve(target).unwrap();
        prop_assert_eq!(solutions.len(), 2);
        for q in solutions {
            let p = ik2link_forward(q);
            prop_assert!((p[0] - target[0]).hypot(p[1] - target[1]) < 1e-9);
            prop_assert!(q.iter().all(|a| (-std::f64::consts::PI..=std::f64::consts::PI).contains(a)));
        }
    }

    #[test]
    fn wrapped_angles_land_in_half_open_range(a in -100.0..100.0f64) {
        let w = wrap_angle(a);
        prop_assert!(w > -std::f64::consts::PI && w <= std::f64::consts::PI);
        let turns = (a - w) / std::f64::consts::TAU;
        prop_assert!((turns - turns.round()).abs() < 1e-9);
    }

    #[test]
    fn linspace_hits_both_ends(lo in -5.0..0.0f64, hi in 0.1..5.0f64, n in 2usize..200) {
        let v = linspace(lo, hi, n);
        prop_assert_eq!(v.len(), n);
        prop_assert_eq!(v[0], lo);
        prop_assert_eq!(v[n - 1], hi);
        prop_assert!(v.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn decoded_mixtures_respect_simplex_and_floor(noise in noise_model(), comps in 1usize..5, dim in 1usize..3, seed in 0u64..1000) {
        let layout = MixtureLayout::new(comps, dim, noise).unwrap();
        let mut rng = SeededRng::new(seed);
        let raw: Vec<f64> = (0..layout.raw_len()).map(|_| 8.0 * rng.normal()).collect();
        let g = layout.decode(&raw).unwrap();
        prop_assert!((g.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(g.weights.iter().all(|&w| w >= 0.0));
        prop_assert!(g.scales.iter().all(|&s| s >= mmbc::mdn::SCALE_FLOOR));
        prop_assert_eq!(g.means.len(), comps * dim);
    }

    #[test]
    fn adam_ignores_zero_gradients(params in finite_vec(1..20), steps in 1usize..10) {
        let mut p = params.clone();
        let mut opt = AdamState::new(p.len(), 1e-3);
        let zeros = vec![0.0; p.len()];
        for _ in 0..steps {
            opt.step(&mut p, &zeros).unwrap();
        }
        prop_assert_eq!(p, params);
    }

    #[test]
    fn params_round_trip_through_from_params(h in 1usize..8, seed in 0u64..500) {
        let net = DenseNet::new(&[2, h, 3], Activation::LeakyRelu, &mut SeededRng::new(seed)).unwrap();
        let back = DenseNet::from_params(net.dims(), net.activation(), net.params().to_vec()).unwrap();
        let x = [0.3, -0.7];
        prop_assert_eq!(net.forward(&x).unwrap(), back.forward(&x).unwrap());
    }
}
