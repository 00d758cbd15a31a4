mod common;

use common::{gaussian_clusters, hinge, vector};
use kirelex::corpus::RelationLabel;
use kirelex::embedding::EmbeddingVector;
use kirelex::metric::{
    gradient_check, loss_and_gradient, train, Activation, ExampleVector, MetricModel, TrainConfig,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn gaussian_examples(seed: u64) -> Vec<ExampleVector> {
    examples_from(seed, 0.3, 3.0)
}

fn examples_from(seed: u64, sigma: f64, separation: f64) -> Vec<ExampleVector> {
    let (points, labels) = gaussian_clusters(seed, 3, 20, 10, sigma, separation);
    points
        .into_iter()
        .zip(labels)
        .enumerate()
        .map(|(i, (input, c))| ExampleVector {
            tweet_id: format!("g{i:02}"),
            input,
            label: RelationLabel::ALL[c],
        })
        .collect()
}

fn small_config(seed: u64) -> TrainConfig {
    TrainConfig {
        seed,
        hidden_dim: 16,
        output_dim: 8,
        learning_rate: 1e-2,
        ..TrainConfig::default()
    }
}

fn random_vec(rng: &mut ChaCha8Rng, d: usize) -> EmbeddingVector {
    vector((0..d).map(|_| StandardNormal.sample(rng)).collect())
}

#[test]
fn zero_learning_rate_keeps_initialization() {
    let ex = gaussian_examples(1);
    let cfg = TrainConfig {
        learning_rate: 0.0,
        ..small_config(4)
    };
    let (a, _) = train(&ex, &TrainConfig { epochs: 1, ..cfg.clone() }).unwrap();
    let (b, _) = train(&ex, &TrainConfig { epochs: 7, ..cfg }).unwrap();
    let fresh = MetricModel::init(10, 16, 8, Activation::Tanh, &mut ChaCha8Rng::seed_from_u64(4));
    let bits = |m: &MetricModel| m.params().iter().map(|p| p.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a), bits(&fresh));
    assert_eq!(bits(&b), bits(&fresh));
}

#[test]
fn history_has_one_entry_per_epoch() {
    let (_, h) = train(&gaussian_examples(2), &small_config(0)).unwrap();
    assert_eq!(h.epoch_loss.len(), 50);
    assert!(h.epoch_loss.iter().all(|l| l.is_finite() && *l >= 0.0));
}

#[test]
fn training_is_bit_reproducible() {
    let ex = gaussian_examples(3);
    let (a, ha) = train(&ex, &small_config(9)).unwrap();
    let (b, hb) = train(&ex, &small_config(9)).unwrap();
    assert_eq!(
        a.params().iter().map(|p| p.to_bits()).collect::<Vec<_>>(),
        b.params().iter().map(|p| p.to_bits()).collect::<Vec<_>>()
    );
    assert_eq!(ha, hb);
}

#[test]
fn separated_gaussians_reach_low_loss() {
    let (_, h) = train(&gaussian_examples(0), &small_config(0)).unwrap();
    let last = h.final_loss().unwrap();
    assert!(last < 0.05, "final loss {last}");
}

#[test]
fn loss_decreases_over_seeds() {
    // Overlapping clusters, so the initial loss is well above zero.
    for seed in 0..5 {
        let (_, h) = train(&examples_from(10 + seed, 1.0, 1.0), &small_config(seed)).unwrap();
        assert!(h.epoch_loss[0] > 0.01, "seed {seed}: {:?}", h.epoch_loss);
        assert!(h.final_loss().unwrap() < h.epoch_loss[0], "seed {seed}: {:?}", h.epoch_loss);
    }
}

#[test]
fn single_class_has_no_triplets() {
    let ex: Vec<ExampleVector> = gaussian_examples(0)
        .into_iter()
        .filter(|e| e.label == RelationLabel::Reason)
        .collect();
    assert!(train(&ex, &small_config(0)).is_err());
}

/// Loss of the model on one triple computed only through the public forward
/// pass and a separately written hinge.
fn oracle_loss(m: &MetricModel, t: &[EmbeddingVector; 3], margin: f64) -> f64 {
    let out: Vec<EmbeddingVector> = t.iter().map(|x| m.forward(x).unwrap()).collect();
    hinge(out[0].values(), out[1].values(), out[2].values(), margin)
}

fn active_case(rng: &mut ChaCha8Rng, margin: f64) -> (MetricModel, [EmbeddingVector; 3]) {
    loop {
        let m = MetricModel::init(8, 6, 4, Activation::Tanh, rng);
        let t = [random_vec(rng, 8), random_vec(rng, 8), random_vec(rng, 8)];
        if oracle_loss(&m, &t, margin) > 1e-3 {
            return (m, t);
        }
    }
}

#[test]
fn analytic_gradient_matches_independent_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..10 {
        let (m, t) = active_case(&mut rng, 0.2);
        let (loss, grad) = loss_and_gradient(&m, [&t[0], &t[1], &t[2]], 0.2).unwrap();
        assert!((loss - oracle_loss(&m, &t, 0.2)).abs() < 1e-12);
        let h = 1e-6;
        let mut probe = m.clone();
        for (i, &g) in grad.iter().enumerate() {
            let p0 = probe.params()[i];
            probe.params_mut()[i] = p0 + h;
            let up = oracle_loss(&probe, &t, 0.2);
            probe.params_mut()[i] = p0 - h;
            let down = oracle_loss(&probe, &t, 0.2);
            probe.params_mut()[i] = p0;
            let numeric = (up - down) / (2.0 * h);
            assert!((numeric - g).abs() <= 1e-6 * (1.0 + g.abs()), "param {i}: {numeric} vs {g}");
        }
    }
}

#[test]
fn gradient_check_is_stable_across_steps() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..5 {
        let (m, t) = active_case(&mut rng, 0.2);
        let coarse = gradient_check(&m, [&t[0], &t[1], &t[2]], 0.2, 1e-5).unwrap();
        let fine = gradient_check(&m, [&t[0], &t[1], &t[2]], 0.2, 1e-6).unwrap();
        assert!(coarse <= 1e-4 && fine <= 1e-4, "{coarse} {fine}");
    }
}
