//! Oracles and checks shared by the integration tests and the acceptance runner.
#![allow(dead_code)]

pub mod checks;

use mmbc::{Activation, DenseNet, SeededRng};

pub const FD_STEP: f64 = 1e-5;
pub const FD_TOLERANCE: f64 = 1e-4;
pub const INSTANCES: u64 = 20;

pub type Check = Result<(), String>;

pub fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Check {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Central differences of `f` at `x` with step `h`.
pub fn central_diff(mut f: impl FnMut(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + h;
            let up = f(&probe);
            probe[i] = orig - h;
            let down = f(&probe);
            probe[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// `‖a - b‖ / max(‖a‖, ‖b‖)`, or the absolute error when both are tiny.
pub fn rel_error(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let scale = norm(a).max(norm(b));
    if scale < 1e-8 {
        norm(&diff)
    } else {
        norm(&diff) / scale
    }
}

/// Compares an analytic gradient against central differences of `f`.
pub fn fd_check(label: &str, analytic: &[f64], f: impl FnMut(&[f64]) -> f64, x: &[f64]) -> Check {
    let numeric = central_diff(f, x, FD_STEP);
    let err = rel_error(analytic, &numeric);
    ensure(err <= FD_TOLERANCE, || format!("{label}: relative error {err:.3e}"))
}

pub fn random_vec(n: usize, scale: f64, rng: &mut SeededRng) -> Vec<f64> {
    (0..n).map(|_| scale * rng.normal()).collect()
}

/// A net with every parameter (biases included) drawn at random.
pub fn random_net(dims: &[usize], activation: Activation, rng: &mut SeededRng) -> DenseNet {
    let mut net = DenseNet::new(dims, activation, rng).unwrap();
    for p in net.params_mut() {
        *p = 0.6 * rng.normal();
    }
    net
}

pub fn with_params(net: &DenseNet, params: &[f64]) -> DenseNet {
    DenseNet::from_params(net.dims(), net.activation(), params.to_vec()).unwrap()
}

pub fn activation_for(i: u64) -> Activation {
    match i % 3 {
        0 => Activation::Relu,
        1 => Activation::LeakyRelu,
        _ => Activation::Identity,
    }
}

/// Prints one line per check and returns how many failed.
pub fn report(results: &[(String, Check)]) -> usize {
    let mut failed = 0;
    for (name, r) in results {
        match r {
            Ok(()) => println!("PASS {name}"),
            Err(e) => {
                failed += 1;
                println!("FAIL {name}: {e}");
            }
        }
    }
    failed
}
