//! Loss, optimizer, early stopping and the epoch/batch training loop.

mod adam;
mod loss;

pub use adam::{AdamConfig, AdamState};
pub use loss::{sparse_ce_from_logits, sparse_ce_loss};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::{Mode, SequentialModel};
use crate::tensor::Scalar;

/// Training hyperparameters. The monitored quantity is always validation loss.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub max_epochs: usize,
    pub batch_size: usize,
    pub validation_fraction: f64,
    pub patience: usize,
    pub restore_best: bool,
    pub seed: u64,
    pub adam: AdamConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            max_epochs: 30,
            batch_size: 64,
            validation_fraction: 0.2,
            patience: 5,
            restore_best: true,
            seed: 0,
            adam: AdamConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "validation fraction must be in (0, 1), got {}",
                self.validation_fraction
            )));
        }
        if self.patience == 0 {
            return Err(Error::InvalidConfig("patience must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch size must be at least 1".into()));
        }
        if !(self.adam.learning_rate > 0.0 && self.adam.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "learning rate must be positive, got {}",
                self.adam.learning_rate
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainingHistory {
    pub records: Vec<EpochRecord>,
    /// 1-based epoch with the lowest validation loss (first on ties).
    pub best_epoch: Option<usize>,
    pub stopped_early: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopDecision {
    Continue,
    Stop,
}

/// Patience-based early stopping on a monitored loss.
///
/// An epoch improves only if its loss is strictly below the best so far.
#[derive(Clone, Debug)]
pub struct EarlyStopping {
    patience: usize,
    best: f64,
    best_epoch: Option<usize>,
    epochs_seen: usize,
    since_best: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping {
            patience,
            best: f64::INFINITY,
            best_epoch: None,
            epochs_seen: 0,
            since_best: 0,
        }
    }

    /// Records the next epoch's loss. Returns the decision and whether this epoch
    /// became the new best.
    pub fn update(&mut self, loss: f64) -> (StopDecision, bool) {
        self.epochs_seen += 1;
        let improved = loss < self.best;
        if improved {
            self.best = loss;
            self.best_epoch = Some(self.epochs_seen);
            self.since_best = 0;
        } else {
            self.since_best += 1;
        }
        let decision = if self.since_best >= self.patience {
            StopDecision::Stop
        } else {
            StopDecision::Continue
        };
        (decision, improved)
    }

    pub fn best_epoch(&self) -> Option<usize> {
        self.best_epoch
    }

    pub fn best_loss(&self) -> f64 {
        self.best
    }
}

/// Seeded shuffle, then the last `ceil(fraction · N)` samples become validation.
pub fn split_train_val(dataset: &Dataset, fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "validation fraction must be in (0, 1), got {fraction}"
        )));
    }
    let n = dataset.len();
    let exact = fraction * n as f64;
    // 0.2 · 27455 lands a hair above 5491 in binary; treat near-integers as exact.
    let n_val = if (exact - exact.round()).abs() < 1e-9 * n as f64 {
        exact.round() as usize
    } else {
        exact.ceil() as usize
    };
    if n_val == 0 || n_val >= n {
        return Err(Error::EmptyPartition { fraction, total: n });
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (train, val) = idx.split_at(n - n_val);
    Ok((dataset.subset(train), dataset.subset(val)))
}

/// Mean loss and accuracy of the model on a dataset, inference mode.
pub fn loss_and_accuracy<T: Scalar>(model: &SequentialModel<T>, dataset: &Dataset) -> Result<(f64, f64)> {
    const CHUNK: usize = 256;
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let idx: Vec<usize> = (0..dataset.len()).collect();
    let (mut loss_sum, mut correct) = (0.0, 0usize);
    for chunk in idx.chunks(CHUNK) {
        let (x, y) = dataset.batch::<T>(chunk)?;
        let logits = model.forward_logits(&x)?;
        let (loss, _) = sparse_ce_from_logits(&logits, &y)?;
        loss_sum += loss * chunk.len() as f64;
        correct += count_correct(logits.data(), &y, model.num_classes());
    }
    Ok((loss_sum / dataset.len() as f64, correct as f64 / dataset.len() as f64))
}

/// Argmax hits; ties resolve to the lowest class index.
pub(crate) fn count_correct<T: Scalar>(rows: &[T], labels: &[usize], k: usize) -> usize {
    rows.chunks(k)
        .zip(labels)
        .filter(|(row, &l)| argmax(row) == l)
        .count()
}

pub(crate) fn argmax<T: Scalar>(row: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Splits `dataset` per `config` and trains. See [`fit`].
pub fn train<T: Scalar>(
    model: &mut SequentialModel<T>,
    dataset: &Dataset,
    config: &TrainConfig,
) -> Result<TrainingHistory> {
    train_with(model, dataset, config, |_| {})
}

/// [`train`] with a callback after every epoch.
pub fn train_with<T: Scalar>(
    model: &mut SequentialModel<T>,
    dataset: &Dataset,
    config: &TrainConfig,
    on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainingHistory> {
    config.validate()?;
    if config.max_epochs == 0 {
        model.set_mode(Mode::Inference);
        return Ok(TrainingHistory::default());
    }
    let (train_set, val_set) = split_train_val(dataset, config.validation_fraction, config.seed)?;
    fit(model, &train_set, &val_set, config, on_epoch)
}

/// Mini-batch Adam training with early stopping on validation loss.
///
/// Batches are drawn from a fresh seeded shuffle each epoch; the final partial
/// batch is kept. On return the best-epoch weights are restored (when
/// `restore_best` is set), the optimizer state is attached to the model and the
/// model is in inference mode.
pub fn fit<T: Scalar>(
    model: &mut SequentialModel<T>,
    train_set: &Dataset,
    val_set: &Dataset,
    config: &TrainConfig,
    on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainingHistory> {
    if val_set.is_empty() {
        return Err(Error::EmptyDataset);
    }
    fit_monitored(model, train_set, config, |m, _| loss_and_accuracy(m, val_set), on_epoch)
}

/// [`fit`] with the validation step supplied by the caller.
///
/// `monitor` receives the model (inference mode) and the 1-based epoch after
/// each epoch's updates and returns `(val_loss, val_accuracy)`; early stopping
/// and best-weight restoration follow the returned loss.
pub fn fit_monitored<T: Scalar>(
    model: &mut SequentialModel<T>,
    train_set: &Dataset,
    config: &TrainConfig,
    mut monitor: impl FnMut(&SequentialModel<T>, usize) -> Result<(f64, f64)>,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainingHistory> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut history = TrainingHistory::default();
    if config.max_epochs == 0 {
        model.set_mode(Mode::Inference);
        return Ok(history);
    }

    let mut adam = model
        .take_optimizer()
        .unwrap_or_else(|| AdamState::new(config.adam, &model.parameters()));
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(config.seed);
    dropout_rng.set_stream(1);
    let mut stopper = EarlyStopping::new(config.patience);
    let mut best: Option<Vec<crate::tensor::Tensor<T>>> = None;
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    model.set_mode(Mode::Training);
    let outcome = (|| -> Result<()> {
        for epoch in 1..=config.max_epochs {
            order.shuffle(&mut shuffle_rng);
            let (mut loss_sum, mut correct) = (0.0, 0usize);
            for (b, chunk) in order.chunks(config.batch_size).enumerate() {
                let (x, y) = train_set.batch::<T>(chunk)?;
                let pass = model.forward_train(&x, &mut dropout_rng)?;
                if !pass.logits().all_finite() {
                    return Err(Error::NonFiniteLoss { epoch, batch: b + 1 });
                }
                let (loss, dlogits) = sparse_ce_from_logits(pass.logits(), &y)?;
                if !loss.is_finite() {
                    return Err(Error::NonFiniteLoss { epoch, batch: b + 1 });
                }
                correct += count_correct(pass.logits().data(), &y, model.num_classes());
                loss_sum += loss * chunk.len() as f64;
                let grads = model.backward(pass, &dlogits)?;
                adam.step(&mut model.parameters_mut(), &grads.params())?;
            }
            model.set_mode(Mode::Inference);
            let monitored = monitor(model, epoch);
            model.set_mode(Mode::Training);
            let (val_loss, val_accuracy) = monitored?;
            let record = EpochRecord {
                epoch,
                train_loss: loss_sum / train_set.len() as f64,
                train_accuracy: correct as f64 / train_set.len() as f64,
                val_loss,
                val_accuracy,
            };
            on_epoch(&record);
            history.records.push(record);

            let (decision, improved) = stopper.update(val_loss);
            if improved && config.restore_best {
                best = Some(model.snapshot());
            }
            if decision == StopDecision::Stop {
                history.stopped_early = true;
                break;
            }
        }
        Ok(())
    })();

    history.best_epoch = stopper.best_epoch();
    if let Some(snapshot) = &best {
        model.restore(snapshot)?;
    }
    model.attach_optimizer(adam);
    model.set_mode(Mode::Inference);
    outcome.map(|_| history)
}
