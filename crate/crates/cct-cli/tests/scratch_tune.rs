//! Temporary tuning scan (deleted before release).

use cct::data::{gen_gaussian_clusters, inject_noise, split, NoiseKind, NoiseSpec};
use cct::train::{train, TrainConfig};
use cct::Dataset;

fn data(noise_seed: u64, rate: f64) -> (Dataset, Dataset) {
    let full = gen_gaussian_clusters(4, 2, 1250, 1.0, 9).unwrap();
    let (train_clean, val, _) = split(&full, (0.8, 0.2, 0.0), 7).unwrap();
    let spec = NoiseSpec { kind: NoiseKind::Symmetric, rate, pair_map: None, seed: noise_seed };
    (inject_noise(&train_clean, &spec).unwrap(), val)
}

#[test]
#[ignore]
fn scan() {
    // (lr, batch, lr_decay, noise_rate)
    let combos: &[(f64, usize, f64, f64)] = &[
        (0.01, 4, 1.0, 0.4),
        (0.01, 16, 1.0, 0.4),
        (0.01, 16, 1.0, 0.6),
        (0.003, 16, 1.0, 0.4),
        (0.001, 64, 0.95, 0.6),
        (0.001, 64, 1.0, 0.4),
    ];
    for &(lr, batch, decay, rate) in combos {
        let mut ov_cons = vec![];
        let mut ov_plain = vec![];
        for seed in [11u64, 12, 13, 14, 15] {
            let (tr, va) = data(3 ^ seed, rate);
            let base = TrainConfig {
                networks: 3,
                arch: vec![2, 16, 16, 4],
                lambda_max: 0.9,
                beta: 4.0,
                ramp_epochs: 30,
                epochs: 60,
                learning_rate: lr,
                lr_decay: decay,
                batch_size: batch,
                seed,
                ..TrainConfig::default()
            };
            let plain = TrainConfig { consistency: false, ..base.clone() };
            let oc = train(&base, &tr, &va).unwrap();
            let op = train(&plain, &tr, &va).unwrap();
            ov_cons.push(oc.history.records.last().unwrap().val_overall);
            ov_plain.push(op.history.records.last().unwrap().val_overall);
        }
        let m = |v: &Vec<f64>| v.iter().sum::<f64>() / v.len() as f64;
        let wins = ov_cons.iter().zip(&ov_plain).filter(|(c, p)| c >= p).count();
        println!(
            "lr {lr:<6} batch {batch:<3} decay {decay} rate {rate} | cons {:.4} plain {:.4} margin {:+.4} wins {wins}/5",
            m(&ov_cons), m(&ov_plain), m(&ov_cons) - m(&ov_plain)
        );
    }
}
