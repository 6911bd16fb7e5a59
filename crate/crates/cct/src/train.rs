//! Co-training of M identically-shaped, differently-initialized networks.
//!
//! Each epoch: shuffle deterministically by `(seed, epoch)`, then for every
//! mini-batch run all M forward passes, evaluate the combined loss at the
//! epoch's balance factor, backpropagate per network, and apply one Adam
//! step per network with the epoch's decayed learning rate. Per-epoch
//! validation metrics, the balance factor, and the memorization rate are
//! recorded in a [`TrainHistory`].
//!
//! Inference averages the M probability vectors (`Ensemble::infer`); any
//! single network can be used instead (`Ensemble::infer_single`).
//!
//! Determinism: given identical config and datasets the run is bit-identical,
//! regardless of the execution strategy — parallel loops map independent
//! items in index order and reduce sequentially.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{Dataset, NoiseSpec};
use crate::error::{Error, Result};
use crate::exec::{map_indexed, Parallelism};
use crate::loss::{combined_loss, combined_loss_grad, BalanceSchedule};
use crate::metrics::{self, MetricReport};
use crate::net::{decayed_lr, AdamState, ForwardTrace, Network};

/// Hyperparameters for one training run.
///
/// `noise` and `oversample` describe dataset preparation and are consumed by
/// the harness before training; the trainer itself never corrupts labels.
/// An empty `arch` means "derive `[dim, 16, 16, classes]` from the dataset".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// Number of co-trained networks (M).
    pub networks: usize,
    /// Full layer sizes, input through output; empty = derive from data.
    pub arch: Vec<usize>,
    pub lambda_max: f64,
    pub beta: f64,
    /// Epoch at which the balance factor reaches `lambda_max`.
    pub ramp_epochs: u32,
    pub epochs: u32,
    pub learning_rate: f64,
    /// Per-epoch exponential decay factor for the learning rate.
    pub lr_decay: f64,
    pub batch_size: usize,
    pub seed: u64,
    /// Treat KL targets as constants (stop-gradient) in the consistency term.
    pub detach_targets: bool,
    /// When false, train with supervision loss only (balance factor pinned to 0).
    pub consistency: bool,
    /// Balance observed-label class counts by duplication before training.
    pub oversample: bool,
    pub noise: NoiseSpec,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            networks: 3,
            arch: Vec::new(),
            lambda_max: 0.9,
            beta: 4.0,
            ramp_epochs: 30,
            epochs: 60,
            learning_rate: 0.001,
            lr_decay: crate::net::DEFAULT_LR_DECAY,
            batch_size: 64,
            seed: 1,
            detach_targets: true,
            consistency: true,
            oversample: false,
            noise: NoiseSpec::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.networks == 0 {
            return Err(Error::Config("networks must be >= 1".into()));
        }
        if !(self.lambda_max > 0.0 && self.lambda_max <= 1.0) {
            return Err(Error::Config(format!(
                "lambda_max must be in (0, 1], got {}",
                self.lambda_max
            )));
        }
        if !(self.beta > 0.0) {
            return Err(Error::Config(format!("beta must be > 0, got {}", self.beta)));
        }
        if self.ramp_epochs == 0 {
            return Err(Error::Config("ramp_epochs must be >= 1".into()));
        }
        if self.epochs > 0 && self.ramp_epochs > self.epochs {
            return Err(Error::Config(format!(
                "ramp_epochs ({}) must not exceed epochs ({})",
                self.ramp_epochs, self.epochs
            )));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config(format!(
                "learning_rate must be > 0, got {}",
                self.learning_rate
            )));
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return Err(Error::Config(format!(
                "lr_decay must be in (0, 1], got {}",
                self.lr_decay
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        if !self.arch.is_empty() && self.arch.len() < 2 {
            return Err(Error::Config(format!(
                "arch needs input and output sizes, got {:?}",
                self.arch
            )));
        }
        Ok(())
    }

    /// The architecture this config uses on `ds`: either the explicit `arch`
    /// (validated against the dataset) or the default `[dim, 16, 16, classes]`.
    pub fn resolved_arch(&self, ds: &Dataset) -> Result<Vec<usize>> {
        if self.arch.is_empty() {
            return Ok(vec![ds.dim(), 16, 16, ds.classes()]);
        }
        if self.arch[0] != ds.dim() {
            return Err(Error::Shape(format!(
                "arch input size {} does not match dataset dimension {}",
                self.arch[0],
                ds.dim()
            )));
        }
        let out = *self.arch.last().expect("arch non-empty");
        if out != ds.classes() {
            return Err(Error::Shape(format!(
                "arch output size {out} does not match {} classes",
                ds.classes()
            )));
        }
        Ok(self.arch.clone())
    }

    pub fn schedule(&self) -> Result<BalanceSchedule> {
        BalanceSchedule::new(
            self.lambda_max,
            self.beta,
            self.ramp_epochs as f64,
            self.epochs.max(self.ramp_epochs),
        )
    }

    /// SHA-256 over the canonical JSON form, for checkpoint provenance.
    pub fn digest(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let mut hasher = Sha256::new();
        hasher.update(json.as_bytes());
        let out = hasher.finalize();
        out.iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

const DOMAIN_NET_INIT: u64 = 0x6e65_7473; // "nets"
const DOMAIN_SHUFFLE: u64 = 0x7368_7566; // "shuf"

/// Initialization seed for network `index` of a run. Distinct indices give
/// distinct seeds, so the networks start on different learning paths.
pub fn net_init_seed(run_seed: u64, index: usize) -> u64 {
    splitmix64(run_seed ^ splitmix64(DOMAIN_NET_INIT ^ index as u64))
}

/// The deterministic sample order for one epoch: a seeded permutation of
/// `0..n` derived from `(run_seed, epoch)`.
pub fn epoch_shuffle(run_seed: u64, epoch: u32, n: usize) -> Vec<usize> {
    let seed = splitmix64(run_seed ^ splitmix64(DOMAIN_SHUFFLE ^ epoch as u64));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    order
}

/// M networks plus their optimizer states. All networks share one
/// architecture; their initialization seeds are pairwise distinct.
#[derive(Debug, Clone)]
pub struct Ensemble {
    networks: Vec<Network>,
    adam: Vec<AdamState>,
}

impl Ensemble {
    /// Freshly initialized ensemble with per-network seeds derived from
    /// `run_seed`.
    pub fn init(arch: &[usize], count: usize, run_seed: u64) -> Result<Self> {
        if count == 0 {
            return Err(Error::Config("ensemble needs at least one network".into()));
        }
        let networks: Vec<Network> = (0..count)
            .map(|j| Network::init(arch, net_init_seed(run_seed, j)))
            .collect::<Result<_>>()?;
        Ensemble::from_networks(networks)
    }

    pub fn from_networks(networks: Vec<Network>) -> Result<Self> {
        if networks.is_empty() {
            return Err(Error::Config("ensemble needs at least one network".into()));
        }
        let arch = networks[0].arch();
        for net in &networks[1..] {
            if net.arch() != arch {
                return Err(Error::Config("ensemble networks must share one architecture".into()));
            }
        }
        for (a, na) in networks.iter().enumerate() {
            for nb in networks.iter().skip(a + 1) {
                if na.seed() == nb.seed() {
                    return Err(Error::Config(format!(
                        "ensemble seeds must be pairwise distinct ({} repeats)",
                        na.seed()
                    )));
                }
            }
        }
        let adam = networks.iter().map(AdamState::new).collect();
        Ok(Ensemble { networks, adam })
    }

    pub fn size(&self) -> usize {
        self.networks.len()
    }

    pub fn networks(&self) -> &[Network] {
        &self.networks
    }

    pub fn network(&self, index: usize) -> Option<&Network> {
        self.networks.get(index)
    }

    pub fn arch(&self) -> Vec<usize> {
        self.networks[0].arch()
    }

    pub fn input_dim(&self) -> usize {
        self.networks[0].input_dim()
    }

    pub fn classes(&self) -> usize {
        self.networks[0].output_dim()
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::Shape(format!(
                "input has {} features, network expects {}",
                x.len(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    /// Mean of the M probability vectors for `x`.
    fn mean_probs(&self, x: &[f64]) -> Vec<f64> {
        let classes = self.classes();
        let mut mean = vec![0.0; classes];
        for net in &self.networks {
            let probs = net.forward_one(x).expect("dims pre-validated");
            for (m, p) in mean.iter_mut().zip(&probs) {
                *m += p;
            }
        }
        let scale = 1.0 / self.networks.len() as f64;
        for m in &mut mean {
            *m *= scale;
        }
        mean
    }

    /// Ensemble inference: argmax of the arithmetic mean of the M
    /// probability vectors. Ties break toward the lowest class index.
    pub fn infer(&self, x: &[f64]) -> Result<(usize, Vec<f64>)> {
        self.check_input(x)?;
        let mean = self.mean_probs(x);
        Ok((argmax_tie_low(&mean), mean))
    }

    /// Single-network inference with the same tie-break rule.
    pub fn infer_single(&self, index: usize, x: &[f64]) -> Result<(usize, Vec<f64>)> {
        let net = self.networks.get(index).ok_or_else(|| {
            Error::Config(format!(
                "network index {index} out of range for ensemble of {}",
                self.networks.len()
            ))
        })?;
        self.check_input(x)?;
        let probs = net.forward_one(x)?;
        Ok((argmax_tie_low(&probs), probs))
    }
}

/// Index of the largest value; the first one wins on ties.
pub fn argmax_tie_low(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Fraction of corrupted training samples on which ensemble inference
/// returns the corrupted observed label.
pub fn memorization_rate(ens: &Ensemble, ds: &Dataset) -> Result<f64> {
    memorization_rate_with(ens, ds, Parallelism::auto())
}

pub fn memorization_rate_with(ens: &Ensemble, ds: &Dataset, par: Parallelism) -> Result<f64> {
    if ds.dim() != ens.input_dim() {
        return Err(Error::Shape(format!(
            "dataset dimension {} does not match ensemble input {}",
            ds.dim(),
            ens.input_dim()
        )));
    }
    let corrupted: Vec<usize> = ds
        .samples()
        .iter()
        .enumerate()
        .filter_map(|(i, s)| s.corrupted.then_some(i))
        .collect();
    if corrupted.is_empty() {
        return Err(Error::UndefinedMetric(
            "memorization rate needs at least one corrupted sample".into(),
        ));
    }
    let hits = map_indexed(par, corrupted.len(), |k| {
        let s = ds.sample(corrupted[k]);
        let label = argmax_tie_low(&ens.mean_probs(&s.features));
        u64::from(label == s.observed_label)
    });
    Ok(hits.iter().sum::<u64>() as f64 / corrupted.len() as f64)
}

/// Ensemble predictions over a whole dataset.
pub fn predict_dataset(ens: &Ensemble, ds: &Dataset) -> Result<Vec<usize>> {
    predict_dataset_with(ens, ds, Parallelism::auto())
}

pub fn predict_dataset_with(ens: &Ensemble, ds: &Dataset, par: Parallelism) -> Result<Vec<usize>> {
    if ds.dim() != ens.input_dim() {
        return Err(Error::Shape(format!(
            "dataset dimension {} does not match ensemble input {}",
            ds.dim(),
            ens.input_dim()
        )));
    }
    Ok(map_indexed(par, ds.len(), |i| {
        argmax_tie_low(&ens.mean_probs(ds.sample(i).features.as_slice()))
    }))
}

/// One row of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: u32,
    /// Balance factor used this epoch (0 when consistency is disabled).
    pub lambda: f64,
    pub lr: f64,
    /// Epoch means (per sample) of the loss terms.
    pub l_sup: f64,
    pub l_cons: f64,
    pub l_total: f64,
    /// Per-network mean training cross-entropy.
    pub train_ce: Vec<f64>,
    pub val_accuracy: f64,
    pub val_f1: f64,
    pub val_overall: f64,
    /// Validation accuracy of each individual network.
    pub val_net_accuracy: Vec<f64>,
    /// Memorization rate on the training set; absent when it has no
    /// corrupted samples.
    pub memorization: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainHistory {
    pub records: Vec<EpochRecord>,
}

/// Final state of a run: the last-epoch ensemble, the snapshot with the best
/// validation overall score, and the per-epoch log.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub ensemble: Ensemble,
    pub best_ensemble: Ensemble,
    pub best_epoch: Option<u32>,
    pub history: TrainHistory,
}

/// Incremental training driver; lets callers persist each epoch record as it
/// is produced (partial logs survive a mid-run numeric failure).
pub struct TrainSession<'a> {
    cfg: TrainConfig,
    schedule: Option<BalanceSchedule>,
    train_ds: &'a Dataset,
    val_ds: &'a Dataset,
    ensemble: Ensemble,
    best: Option<(u32, f64, Ensemble)>,
    history: Vec<EpochRecord>,
    epoch: u32,
    par: Parallelism,
}

impl<'a> TrainSession<'a> {
    pub fn new(
        cfg: &TrainConfig,
        train_ds: &'a Dataset,
        val_ds: &'a Dataset,
        init: Option<Ensemble>,
        par: Parallelism,
    ) -> Result<Self> {
        cfg.validate()?;
        if train_ds.is_empty() || val_ds.is_empty() {
            return Err(Error::Data("training and validation sets must be nonempty".into()));
        }
        if val_ds.dim() != train_ds.dim() || val_ds.classes() != train_ds.classes() {
            return Err(Error::Shape(
                "training and validation sets disagree on dimension or classes".into(),
            ));
        }
        let arch = cfg.resolved_arch(train_ds)?;
        let schedule = if cfg.epochs > 0 && cfg.consistency {
            Some(cfg.schedule()?)
        } else {
            None
        };
        let ensemble = match init {
            Some(ens) => {
                if ens.arch() != arch {
                    return Err(Error::Shape(format!(
                        "warm-start architecture {:?} does not match configured {:?}",
                        ens.arch(),
                        arch
                    )));
                }
                if ens.size() != cfg.networks {
                    return Err(Error::Config(format!(
                        "warm-start has {} networks, config wants {}",
                        ens.size(),
                        cfg.networks
                    )));
                }
                ens
            }
            None => Ensemble::init(&arch, cfg.networks, cfg.seed)?,
        };
        Ok(TrainSession {
            cfg: cfg.clone(),
            schedule,
            train_ds,
            val_ds,
            ensemble,
            best: None,
            history: Vec::new(),
            epoch: 0,
            par,
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn ensemble(&self) -> &Ensemble {
        &self.ensemble
    }

    /// Runs one epoch and returns its record, or `None` once all epochs are
    /// done.
    pub fn step_epoch(&mut self) -> Result<Option<&EpochRecord>> {
        if self.epoch >= self.cfg.epochs {
            return Ok(None);
        }
        let epoch = self.epoch;
        let lambda = match &self.schedule {
            Some(s) => s.lambda_at(epoch as f64),
            None => 0.0,
        };
        let lr = decayed_lr(self.cfg.learning_rate, self.cfg.lr_decay, epoch);

        let m = self.ensemble.size();
        let dim = self.train_ds.dim();
        let classes = self.train_ds.classes();
        let n = self.train_ds.len();
        let order = epoch_shuffle(self.cfg.seed, epoch, n);

        let mut sum_sup = 0.0;
        let mut sum_cons = 0.0;
        let mut sum_total = 0.0;
        let mut sum_ce = vec![0.0; m];

        for (batch_idx, chunk) in order.chunks(self.cfg.batch_size).enumerate() {
            let b = chunk.len();
            let mut inputs = Vec::with_capacity(b * dim);
            let mut labels = Vec::with_capacity(b);
            for &i in chunk {
                let s = self.train_ds.sample(i);
                inputs.extend_from_slice(&s.features);
                labels.push(s.observed_label);
            }

            let at = |err: Error| match err {
                Error::Numeric(msg) => {
                    Error::Numeric(format!("epoch {epoch}, batch {batch_idx}: {msg}"))
                }
                other => other,
            };

            // All M forward passes; independent given the batch.
            let traces: Vec<ForwardTrace> = {
                let nets = &self.ensemble.networks;
                map_indexed(self.par, m, |j| nets[j].forward(&inputs, b))
                    .into_iter()
                    .collect::<Result<_>>()?
            };

            // Per-sample loss terms and probability-space gradients.
            let detach = self.cfg.detach_targets;
            let per_sample = {
                let traces = &traces;
                let labels = &labels;
                map_indexed(self.par, b, move |r| {
                    let preds: Vec<&[f64]> = traces.iter().map(|t| t.prob_row(r)).collect();
                    let breakdown = combined_loss(&preds, labels[r], lambda)?;
                    let grads = combined_loss_grad(&preds, labels[r], lambda, detach)?;
                    Ok::<_, Error>((breakdown, grads))
                })
            };

            // Mean-over-batch reduction, accumulated in sample order.
            let scale = 1.0 / b as f64;
            let mut d_probs = vec![vec![0.0; b * classes]; m];
            for (r, res) in per_sample.into_iter().enumerate() {
                let (breakdown, grads) = res.map_err(at)?;
                if !breakdown.total.is_finite() {
                    return Err(Error::Numeric(format!(
                        "epoch {epoch}, batch {batch_idx}: non-finite loss"
                    )));
                }
                sum_sup += breakdown.supervision;
                sum_cons += breakdown.consistency;
                sum_total += breakdown.total;
                for (acc, ce) in sum_ce.iter_mut().zip(&breakdown.ce_terms) {
                    *acc += ce;
                }
                for (dp, g) in d_probs.iter_mut().zip(&grads) {
                    for (slot, gc) in dp[r * classes..(r + 1) * classes].iter_mut().zip(g) {
                        *slot = gc * scale;
                    }
                }
            }

            // Backprop and one Adam step per network.
            match self.par {
                Parallelism::Sequential => {
                    for j in 0..m {
                        let grads = self.ensemble.networks[j]
                            .backward(&traces[j], &d_probs[j])
                            .map_err(at)?;
                        self.ensemble.networks[j]
                            .adam_step(&mut self.ensemble.adam[j], &grads, lr)
                            .map_err(at)?;
                    }
                }
                #[cfg(feature = "parallel")]
                Parallelism::Parallel => {
                    use rayon::prelude::*;
                    let results: Vec<Result<()>> = self
                        .ensemble
                        .networks
                        .par_iter_mut()
                        .zip(self.ensemble.adam.par_iter_mut())
                        .zip(traces.par_iter().zip(d_probs.par_iter()))
                        .map(|((net, state), (trace, dp))| {
                            let grads = net.backward(trace, dp)?;
                            net.adam_step(state, &grads, lr)
                        })
                        .collect();
                    for r in results {
                        r.map_err(at)?;
                    }
                }
            }
        }

        let n_f = n as f64;
        let (report, val_net_accuracy) = self.validate()?;
        let memorization = if self.train_ds.corrupted_count() > 0 {
            Some(memorization_rate_with(&self.ensemble, self.train_ds, self.par)?)
        } else {
            None
        };

        let record = EpochRecord {
            epoch,
            lambda,
            lr,
            l_sup: sum_sup / n_f,
            l_cons: sum_cons / n_f,
            l_total: sum_total / n_f,
            train_ce: sum_ce.iter().map(|s| s / n_f).collect(),
            val_accuracy: report.accuracy,
            val_f1: report.f1_macro,
            val_overall: report.overall,
            val_net_accuracy,
            memorization,
        };

        let improved = self.best.as_ref().map_or(true, |(_, best, _)| record.val_overall > *best);
        if improved {
            self.best = Some((epoch, record.val_overall, self.ensemble.clone()));
        }

        self.history.push(record);
        self.epoch += 1;
        Ok(self.history.last())
    }

    /// Ensemble and per-network predictions on the validation set.
    fn validate(&self) -> Result<(MetricReport, Vec<f64>)> {
        let ds = self.val_ds;
        let m = self.ensemble.size();
        let labels: Vec<(usize, Vec<usize>)> = map_indexed(self.par, ds.len(), |i| {
            let x = ds.sample(i).features.as_slice();
            let per_net: Vec<usize> = self
                .ensemble
                .networks
                .iter()
                .map(|net| argmax_tie_low(&net.forward_one(x).expect("dims pre-validated")))
                .collect();
            (argmax_tie_low(&self.ensemble.mean_probs(x)), per_net)
        });

        let truths: Vec<usize> = ds.samples().iter().map(|s| s.observed_label).collect();
        let ens_preds: Vec<usize> = labels.iter().map(|(e, _)| *e).collect();
        let report = metrics::evaluate(&ens_preds, &truths, ds.classes())?;

        let mut correct = vec![0usize; m];
        for ((_, per_net), truth) in labels.iter().zip(&truths) {
            for (c, &p) in correct.iter_mut().zip(per_net) {
                if p == *truth {
                    *c += 1;
                }
            }
        }
        let per_net_acc = correct.iter().map(|&c| c as f64 / ds.len() as f64).collect();
        Ok((report, per_net_acc))
    }

    /// Consumes the session, yielding the final and best ensembles plus the
    /// full history.
    pub fn finish(self) -> TrainOutcome {
        let (best_epoch, best_ensemble) = match self.best {
            Some((epoch, _, ens)) => (Some(epoch), ens),
            None => (None, self.ensemble.clone()),
        };
        TrainOutcome {
            ensemble: self.ensemble,
            best_ensemble,
            best_epoch,
            history: TrainHistory { records: self.history },
        }
    }
}

/// Runs a full training session with the build's default execution strategy.
pub fn train(cfg: &TrainConfig, train_ds: &Dataset, val_ds: &Dataset) -> Result<TrainOutcome> {
    train_with(cfg, train_ds, val_ds, None, Parallelism::auto())
}

/// Full-control variant: optional warm-start ensemble and explicit execution
/// strategy.
pub fn train_with(
    cfg: &TrainConfig,
    train_ds: &Dataset,
    val_ds: &Dataset,
    init: Option<Ensemble>,
    par: Parallelism,
) -> Result<TrainOutcome> {
    let mut session = TrainSession::new(cfg, train_ds, val_ds, init, par)?;
    while session.step_epoch()?.is_some() {}
    Ok(session.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{gen_gaussian_clusters, inject_noise, LabeledSample, NoiseKind};
    use crate::net::Network;

    fn small_cfg() -> TrainConfig {
        TrainConfig {
            networks: 2,
            arch: vec![2, 6, 3],
            epochs: 4,
            ramp_epochs: 2,
            batch_size: 16,
            seed: 42,
            ..TrainConfig::default()
        }
    }

    fn small_data() -> (Dataset, Dataset) {
        let ds = gen_gaussian_clusters(3, 2, 40, 0.8, 5).unwrap();
        let (train, val, _) = crate::data::split(&ds, (0.8, 0.2, 0.0), 7).unwrap();
        (train, val)
    }

    #[test]
    fn epoch_shuffle_is_a_permutation() {
        for epoch in 0..5 {
            let mut order = epoch_shuffle(9, epoch, 101);
            order.sort_unstable();
            assert_eq!(order, (0..101).collect::<Vec<_>>());
        }
        assert_ne!(epoch_shuffle(9, 0, 101), epoch_shuffle(9, 1, 101));
        assert_eq!(epoch_shuffle(9, 3, 101), epoch_shuffle(9, 3, 101));
    }

    #[test]
    fn net_init_seeds_are_distinct() {
        let seeds: Vec<u64> = (0..8).map(|j| net_init_seed(123, j)).collect();
        for (i, a) in seeds.iter().enumerate() {
            for b in seeds.iter().skip(i + 1) {
                assert_ne!(a, b);
            }
        }
    }

    #[test]
    fn zero_epochs_returns_fresh_ensemble_and_empty_history() {
        let (train_ds, val) = small_data();
        let cfg = TrainConfig { epochs: 0, ..small_cfg() };
        let outcome = train(&cfg, &train_ds, &val).unwrap();
        assert!(outcome.history.records.is_empty());
        assert!(outcome.best_epoch.is_none());
        let fresh = Ensemble::init(&cfg.arch, cfg.networks, cfg.seed).unwrap();
        for (a, b) in outcome.ensemble.networks().iter().zip(fresh.networks()) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn training_is_deterministic() {
        let (train_ds, val) = small_data();
        let cfg = small_cfg();
        let a = train_with(&cfg, &train_ds, &val, None, Parallelism::Sequential).unwrap();
        let b = train_with(&cfg, &train_ds, &val, None, Parallelism::Sequential).unwrap();
        assert_eq!(a.history, b.history);
        for (x, y) in a.ensemble.networks().iter().zip(b.ensemble.networks()) {
            assert_eq!(x, y);
        }
    }

    #[cfg(feature = "parallel")]
    #[test]
    fn parallel_and_sequential_runs_are_bit_identical() {
        let (train_ds, val) = small_data();
        let cfg = small_cfg();
        let seq = train_with(&cfg, &train_ds, &val, None, Parallelism::Sequential).unwrap();
        let par = train_with(&cfg, &train_ds, &val, None, Parallelism::Parallel).unwrap();
        assert_eq!(seq.history, par.history);
        for (x, y) in seq.ensemble.networks().iter().zip(par.ensemble.networks()) {
            assert_eq!(x, y);
        }
    }

    #[test]
    fn lambda_column_matches_schedule_bit_for_bit() {
        let (train_ds, val) = small_data();
        let cfg = TrainConfig { epochs: 6, ramp_epochs: 3, ..small_cfg() };
        let outcome = train(&cfg, &train_ds, &val).unwrap();
        let sched = cfg.schedule().unwrap();
        assert_eq!(outcome.history.records.len(), 6);
        for rec in &outcome.history.records {
            assert_eq!(rec.lambda, sched.lambda_at(rec.epoch as f64));
        }
    }

    #[test]
    fn single_network_degenerates_to_supervision_only() {
        let (train_ds, val) = small_data();
        let cfg = TrainConfig { networks: 1, ..small_cfg() };
        let outcome = train(&cfg, &train_ds, &val).unwrap();
        for rec in &outcome.history.records {
            assert_eq!(rec.l_cons, 0.0);
            let expect = (1.0 - rec.lambda) * rec.l_sup;
            assert!((rec.l_total - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn consistency_off_pins_lambda_to_zero() {
        let (train_ds, val) = small_data();
        let cfg = TrainConfig { consistency: false, ..small_cfg() };
        let outcome = train(&cfg, &train_ds, &val).unwrap();
        for rec in &outcome.history.records {
            assert_eq!(rec.lambda, 0.0);
            assert!((rec.l_total - rec.l_sup).abs() < 1e-12);
        }
    }

    #[test]
    fn training_never_reads_clean_labels() {
        // Same observed labels, different clean labels: the optimization
        // path must be identical.
        let base = gen_gaussian_clusters(3, 2, 60, 0.9, 11).unwrap();
        let spec = NoiseSpec { kind: NoiseKind::Symmetric, rate: 0.4, pair_map: None, seed: 3 };
        let noisy = inject_noise(&base, &spec).unwrap();
        let flattened: Vec<LabeledSample> = noisy
            .samples()
            .iter()
            .map(|s| LabeledSample {
                features: s.features.clone(),
                clean_label: s.observed_label,
                observed_label: s.observed_label,
                corrupted: false,
            })
            .collect();
        let flat = Dataset::new(flattened, noisy.classes(), noisy.dim()).unwrap();

        let (_, val) = small_data();
        let cfg = TrainConfig { epochs: 3, ..small_cfg() };
        let a = train(&cfg, &noisy, &val).unwrap();
        let b = train(&cfg, &flat, &val).unwrap();
        for (x, y) in a.history.records.iter().zip(&b.history.records) {
            assert_eq!(x.l_total, y.l_total);
            assert_eq!(x.train_ce, y.train_ce);
            assert!(x.memorization.is_some());
            assert!(y.memorization.is_none());
        }
        for (x, y) in a.ensemble.networks().iter().zip(b.ensemble.networks()) {
            assert_eq!(x, y);
        }
    }

    #[test]
    fn infer_examples() {
        // Two zero networks with crafted output biases.
        let mut n0 = Network::zeros(&[2, 2]).unwrap();
        let mut n1 = Network::zeros(&[2, 2]).unwrap();
        // p0 = softmax([ln 3, ln 2]) = [0.6, 0.4]
        n0.layer_mut(0).set_bias(0, 3f64.ln());
        n0.layer_mut(0).set_bias(1, 2f64.ln());
        // p1 = softmax([ln 1, ln 4]) = [0.2, 0.8]
        n1.layer_mut(0).set_bias(1, 4f64.ln());
        let ens = Ensemble::from_networks(vec![n0.with_seed(1), n1.with_seed(2)]).unwrap();

        let (label, mean) = ens.infer(&[0.0, 0.0]).unwrap();
        assert_eq!(label, 1);
        assert!((mean[0] - 0.4).abs() < 1e-12);
        assert!((mean[1] - 0.6).abs() < 1e-12);

        // Single-network inference disagrees with the ensemble here.
        let (l0, _) = ens.infer_single(0, &[0.0, 0.0]).unwrap();
        assert_eq!(l0, 0);
        assert!(ens.infer_single(2, &[0.0, 0.0]).is_err());

        // Uniform mean ties break to class 0.
        let uniform = Ensemble::from_networks(vec![
            Network::zeros(&[2, 2]).unwrap().with_seed(3),
            Network::zeros(&[2, 2]).unwrap().with_seed(4),
        ])
        .unwrap();
        let (label, mean) = uniform.infer(&[1.0, -1.0]).unwrap();
        assert_eq!(label, 0);
        assert_eq!(mean, vec![0.5, 0.5]);
    }

    #[test]
    fn memorization_rate_extremes() {
        // One-layer nets whose bias pins the prediction to a fixed class.
        let mut to_clean = Network::zeros(&[2, 2]).unwrap();
        to_clean.layer_mut(0).set_bias(0, 5.0);
        let mut to_observed = Network::zeros(&[2, 2]).unwrap();
        to_observed.layer_mut(0).set_bias(1, 5.0);

        let samples = vec![LabeledSample {
            features: vec![0.1, 0.2],
            clean_label: 0,
            observed_label: 1,
            corrupted: true,
        }];
        let ds = Dataset::new(samples, 2, 2).unwrap();

        let clean_ens = Ensemble::from_networks(vec![to_clean.with_seed(1)]).unwrap();
        assert_eq!(memorization_rate(&clean_ens, &ds).unwrap(), 0.0);

        let memo_ens = Ensemble::from_networks(vec![to_observed.with_seed(1)]).unwrap();
        assert_eq!(memorization_rate(&memo_ens, &ds).unwrap(), 1.0);

        let clean_only = gen_gaussian_clusters(2, 2, 3, 0.5, 1).unwrap();
        assert!(matches!(
            memorization_rate(&memo_ens, &clean_only),
            Err(Error::UndefinedMetric(_))
        ));
    }

    #[test]
    fn ensemble_rejects_duplicate_seeds_and_mixed_archs() {
        let a = Network::init(&[2, 3], 1).unwrap();
        let b = Network::init(&[2, 3], 1).unwrap();
        assert!(matches!(
            Ensemble::from_networks(vec![a.clone(), b]),
            Err(Error::Config(_))
        ));
        let c = Network::init(&[2, 4], 2).unwrap();
        assert!(matches!(
            Ensemble::from_networks(vec![a, c]),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn config_validation_names_fields() {
        let bad = TrainConfig { lambda_max: 1.5, ..TrainConfig::default() };
        let msg = bad.validate().unwrap_err().to_string();
        assert!(msg.contains("lambda_max"));

        let bad = TrainConfig { ramp_epochs: 61, epochs: 60, ..TrainConfig::default() };
        assert!(bad.validate().is_err());

        // epochs == 0 is a legal degenerate run.
        let ok = TrainConfig { epochs: 0, ..TrainConfig::default() };
        assert!(ok.validate().is_ok());
    }
}
