//! The trained classifier is compared against an independent primal solver:
//! full-batch subgradient descent on `1/2 |w|^2 + C sum hinge`, keeping the
//! best iterate. That oracle only ever overestimates the optimum, so the
//! trained objective must not exceed it by more than 0.1%.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use roadside::classifier::{primal_objective, train};
use roadside::{FeatureVector, Hyper};

fn blobs(n: usize, gap: f64, seed: u64) -> (Vec<FeatureVector>, Vec<i8>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut xs = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    for i in 0..n {
        let y: i8 = if i % 2 == 0 { 1 } else { -1 };
        let shift = f64::from(y) * gap / 2.0;
        let a: f64 = StandardNormal.sample(&mut rng);
        let b: f64 = StandardNormal.sample(&mut rng);
        xs.push(FeatureVector::new(format!("p{i}"), vec![a + shift, 0.5 * b - shift + rng.random::<f64>()]));
        ys.push(y);
    }
    (xs, ys)
}

fn oracle_objective(xs: &[FeatureVector], ys: &[i8], c: f64) -> f64 {
    let rows: Vec<&[f64]> = xs.iter().map(|x| x.values.as_slice()).collect();
    let d = rows[0].len();
    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let mut best = primal_objective(&w, b, &rows, ys, c);
    for t in 1..=200_000usize {
        let mut gw = w.clone();
        let mut gb = 0.0;
        for (x, &y) in rows.iter().zip(ys) {
            let y = f64::from(y);
            let margin = y * (x.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() + b);
            if margin < 1.0 {
                for k in 0..d {
                    gw[k] -= c * y * x[k];
                }
                gb -= c * y;
            }
        }
        let step = 1.0 / (c * rows.len() as f64 * (t as f64).sqrt() + 1.0);
        for k in 0..d {
            w[k] -= step * gw[k];
        }
        b -= step * gb;
        best = best.min(primal_objective(&w, b, &rows, ys, c));
    }
    best
}

#[test]
fn objective_matches_independent_solver() {
    for (seed, c) in [(1, 0.1), (2, 1.0), (3, 10.0)] {
        let (xs, ys) = blobs(40, 1.5, seed);
        let hyper = Hyper {
            c,
            tol: 1e-6,
            ..Hyper::default()
        };
        let model = train(&xs, &ys, &hyper).unwrap();
        assert!(model.stats.converged);
        let oracle = oracle_objective(&xs, &ys, c);
        assert!(
            model.stats.objective <= oracle * 1.001 + 1e-9,
            "C = {c}: trained {} vs oracle {oracle}",
            model.stats.objective
        );
    }
}

#[test]
fn reported_objective_is_the_primal_value() {
    let (xs, ys) = blobs(60, 1.0, 9);
    let model = train(&xs, &ys, &Hyper::default()).unwrap();
    let rows: Vec<&[f64]> = xs.iter().map(|x| x.values.as_slice()).collect();
    let direct = primal_objective(&model.weights, model.bias, &rows, &ys, 1.0);
    assert!((direct - model.stats.objective).abs() <= 1e-9 * direct.max(1.0));
}

#[test]
fn separated_blobs_are_classified_perfectly() {
    let (xs, ys) = blobs(100, 12.0, 4);
    let model = train(&xs, &ys, &Hyper { c: 10.0, ..Hyper::default() }).unwrap();
    assert_eq!(model.stats.training_errors, 0);
    for (x, &y) in xs.iter().zip(&ys) {
        assert_eq!(model.predict(x).unwrap().0, y);
    }
}
