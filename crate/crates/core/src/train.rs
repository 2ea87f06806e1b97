//! Minibatch training of the embedding network against the fixed centers.
//!
//! Every epoch shuffles the known training set with a generator derived from
//! `(seed, epoch)`, pairs each known batch with a background batch drawn from
//! an independently shuffled, cycled background order, and applies one
//! RMSprop step on the weighted loss. Because the per-epoch randomness only
//! depends on the seed and the epoch number, a run resumed from a checkpoint
//! continues exactly like an uninterrupted one.

use alloc::format;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::LabeledDataset;
use crate::etf::{build_centers, dynamic_margins, uniform_margins};
use crate::eval::nearest_center;
use crate::loss::{total_loss, FeatureBatch};
use crate::net::{backward, embed, forward, init, NetConfig, NetParams};
use crate::optim::{RmsProp, RmsPropConfig};
use crate::{EtfCenters, Error, MarginSchedule, Result};

/// How per-class margins are derived from the training counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MarginMode {
    /// Frequency-adaptive margins.
    #[default]
    Dynamic,
    /// The midpoint `(m_min + m_max) / 2` for every class.
    Uniform,
}

impl MarginMode {
    pub fn name(self) -> &'static str {
        match self {
            MarginMode::Dynamic => "dynamic",
            MarginMode::Uniform => "uniform",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "dynamic" => Some(MarginMode::Dynamic),
            "uniform" => Some(MarginMode::Uniform),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size_known: usize,
    pub batch_size_bg: usize,
    pub learning_rate: f64,
    pub rms_decay: f64,
    pub rms_epsilon: f64,
    pub lambda_inter: f64,
    pub lambda_bg: f64,
    pub m_min: f64,
    pub m_max: f64,
    pub radius: f64,
    pub seed: u64,
    pub eval_every: usize,
    pub margin_mode: MarginMode,
    /// Square each margin before it enters the losses.
    pub square_margins: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size_known: 64,
            batch_size_bg: 64,
            learning_rate: 1e-3,
            rms_decay: 0.9,
            rms_epsilon: 1e-8,
            lambda_inter: 0.1,
            lambda_bg: 0.1,
            m_min: 35.0,
            m_max: 55.0,
            radius: 100.0,
            seed: 0,
            eval_every: 1,
            margin_mode: MarginMode::Dynamic,
            square_margins: false,
        }
    }
}

impl TrainConfig {
    pub fn optimizer(&self) -> RmsPropConfig {
        RmsPropConfig {
            learning_rate: self.learning_rate,
            decay: self.rms_decay,
            epsilon: self.rms_epsilon,
        }
    }

    pub fn validate(&self) -> Result<()> {
        crate::etf::check_margin_range(self.m_min, self.m_max, self.radius)?;
        self.optimizer().validate()?;
        if self.epochs == 0 || self.batch_size_known == 0 || self.batch_size_bg == 0 || self.eval_every == 0 {
            return Err(Error::InvalidParameter(
                "epochs, batch sizes and eval_every must be positive".into(),
            ));
        }
        for (name, v) in [("lambda_inter", self.lambda_inter), ("lambda_bg", self.lambda_bg)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }

    /// Margin schedule for the given per-class training counts.
    pub fn margins(&self, class_counts: &[u64]) -> Result<MarginSchedule> {
        let m = match self.margin_mode {
            MarginMode::Dynamic => dynamic_margins(class_counts, self.m_min, self.m_max, self.radius)?,
            MarginMode::Uniform => uniform_margins(class_counts, self.m_min, self.m_max, self.radius)?,
        };
        Ok(if self.square_margins { m.squared() } else { m })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub intra: f64,
    pub inter: f64,
    pub bg: f64,
    pub total: f64,
    /// Closed-set accuracy on the training set; only computed every
    /// `eval_every` epochs and at the last epoch.
    pub train_acc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainLog {
    pub records: Vec<EpochRecord>,
}

/// Everything needed to evaluate a model or resume training it.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub net_config: NetConfig,
    pub params: NetParams,
    pub centers: EtfCenters,
    pub margins: MarginSchedule,
    pub train_config: TrainConfig,
    /// Number of completed epochs.
    pub epoch: usize,
    pub optimizer_state: Vec<f64>,
}

/// Per-class counts of a training set labelled `1..=C`.
///
/// Fails when fewer than two classes are present or any class in `1..=C` is
/// missing.
pub fn training_class_counts(train: &LabeledDataset) -> Result<Vec<u64>> {
    if train.is_empty() {
        return Err(Error::Empty("training set"));
    }
    let num_classes = train.max_label() as usize;
    if train.labels().contains(&0) {
        return Err(Error::InvalidParameter(
            "training labels must be 1-based; found label 0".into(),
        ));
    }
    if num_classes < 2 {
        return Err(Error::InvalidParameter("training set needs at least 2 classes".into()));
    }
    let mut counts = alloc::vec![0u64; num_classes];
    for &y in train.labels() {
        counts[y as usize - 1] += 1;
    }
    if let Some(c) = counts.iter().position(|&n| n == 0) {
        return Err(Error::InvalidParameter(format!(
            "class {} has no training samples",
            c + 1
        )));
    }
    Ok(counts)
}

/// Stateful training loop over one dataset.
#[derive(Debug)]
pub struct Trainer<'a> {
    train: &'a LabeledDataset,
    background: Option<&'a LabeledDataset>,
    classes: Vec<usize>,
    config: TrainConfig,
    net_config: NetConfig,
    params: NetParams,
    optimizer: RmsProp,
    centers: EtfCenters,
    margins: MarginSchedule,
    epoch: usize,
}

impl<'a> Trainer<'a> {
    pub fn new(
        train: &'a LabeledDataset,
        background: Option<&'a LabeledDataset>,
        net_config: &NetConfig,
        config: &TrainConfig,
    ) -> Result<Self> {
        config.validate()?;
        net_config.validate()?;
        let counts = training_class_counts(train)?;
        let centers = build_centers(counts.len(), net_config.embed_dim, config.radius)?;
        let margins = config.margins(&counts)?;
        let params = init(net_config)?;
        let optimizer = RmsProp::new(config.optimizer(), params.len())?;
        Self::assemble(train, background, net_config.clone(), config.clone(), params, optimizer, centers, margins, 0)
    }

    /// Continues a run from a checkpoint, using its stored configuration.
    pub fn resume(
        checkpoint: &Checkpoint,
        train: &'a LabeledDataset,
        background: Option<&'a LabeledDataset>,
    ) -> Result<Self> {
        let optimizer = RmsProp {
            config: checkpoint.train_config.optimizer(),
            mean_sq: checkpoint.optimizer_state.clone(),
        };
        if optimizer.mean_sq.len() != checkpoint.params.len() {
            return Err(Error::ShapeMismatch("optimizer state does not match the parameters".into()));
        }
        Self::assemble(
            train,
            background,
            checkpoint.net_config.clone(),
            checkpoint.train_config.clone(),
            checkpoint.params.clone(),
            optimizer,
            checkpoint.centers.clone(),
            checkpoint.margins.clone(),
            checkpoint.epoch,
        )
    }

    #[allow(clippy::too_many_arguments)]
    fn assemble(
        train: &'a LabeledDataset,
        background: Option<&'a LabeledDataset>,
        net_config: NetConfig,
        config: TrainConfig,
        params: NetParams,
        optimizer: RmsProp,
        centers: EtfCenters,
        margins: MarginSchedule,
        epoch: usize,
    ) -> Result<Self> {
        if train.dim() != net_config.input_dim {
            return Err(Error::ShapeMismatch(format!(
                "training data has {} features, network expects {}",
                train.dim(),
                net_config.input_dim
            )));
        }
        let num_classes = training_class_counts(train)?.len();
        if num_classes != centers.num_classes() {
            return Err(Error::ShapeMismatch(format!(
                "training data has {num_classes} classes, model has {}",
                centers.num_classes()
            )));
        }
        let background = if config.lambda_bg > 0.0 {
            match background {
                Some(bg) if !bg.is_empty() => {
                    if bg.dim() != net_config.input_dim {
                        return Err(Error::ShapeMismatch(format!(
                            "background data has {} features, network expects {}",
                            bg.dim(),
                            net_config.input_dim
                        )));
                    }
                    Some(bg)
                }
                _ => return Err(Error::MissingBackground),
            }
        } else {
            None
        };
        let classes = train.labels().iter().map(|&y| y as usize - 1).collect();
        Ok(Self {
            train,
            background,
            classes,
            config,
            net_config,
            params,
            optimizer,
            centers,
            margins,
            epoch,
        })
    }

    pub fn params(&self) -> &NetParams {
        &self.params
    }

    pub fn centers(&self) -> &EtfCenters {
        &self.centers
    }

    pub fn margins(&self) -> &MarginSchedule {
        &self.margins
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            net_config: self.net_config.clone(),
            params: self.params.clone(),
            centers: self.centers.clone(),
            margins: self.margins.clone(),
            train_config: self.config.clone(),
            epoch: self.epoch,
            optimizer_state: self.optimizer.mean_sq.clone(),
        }
    }

    fn epoch_rng(&self, epoch: usize, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        rng.set_stream(2 * epoch as u64 + stream);
        rng
    }

    /// Runs one epoch and returns its mean batch losses.
    pub fn run_epoch(&mut self) -> Result<EpochRecord> {
        let epoch = self.epoch + 1;
        let mut rng = self.epoch_rng(epoch, 0);
        let mut order: Vec<usize> = (0..self.train.len()).collect();
        order.shuffle(&mut rng);

        let mut bg_rng = self.epoch_rng(epoch, 1);
        let mut bg_order: Vec<usize> = (0..self.background.map_or(0, |b| b.len())).collect();
        bg_order.shuffle(&mut bg_rng);
        let mut bg_cursor = 0;

        let (mut intra, mut inter, mut bg, mut total) = (0.0, 0.0, 0.0, 0.0);
        let mut batches = 0usize;
        for (batch, chunk) in order.chunks(self.config.batch_size_known).enumerate() {
            let x = self.train.features().select_rows(chunk);
            let y: Vec<usize> = chunk.iter().map(|&i| self.classes[i]).collect();
            let (features, tape) = forward(&self.params, &x)?;

            let bg_pass = match self.background {
                Some(bgset) => {
                    let mut idx = Vec::with_capacity(self.config.batch_size_bg);
                    while idx.len() < self.config.batch_size_bg {
                        if bg_cursor == bg_order.len() {
                            bg_order.shuffle(&mut bg_rng);
                            bg_cursor = 0;
                        }
                        idx.push(bg_order[bg_cursor]);
                        bg_cursor += 1;
                    }
                    Some(forward(&self.params, &bgset.features().select_rows(&idx))?)
                }
                None => None,
            };

            let known = FeatureBatch::known(&features, &y);
            let bg_batch = bg_pass.as_ref().map(|(f, _)| FeatureBatch::background(f));
            let (breakdown, grads) = total_loss(
                &known,
                bg_batch.as_ref(),
                &self.centers,
                &self.margins,
                self.config.lambda_inter,
                self.config.lambda_bg,
            )?;
            if !breakdown.total.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch });
            }

            let mut param_grads = backward(&self.params, &tape, &grads.known)?;
            if let (Some((_, bg_tape)), Some(g)) = (&bg_pass, &grads.background) {
                param_grads.add_assign(&backward(&self.params, bg_tape, g)?)?;
            }
            if param_grads.as_slice().iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteLoss { epoch, batch });
            }
            self.optimizer.step(self.params.as_mut_slice(), param_grads.as_slice())?;

            intra += breakdown.intra;
            inter += breakdown.inter;
            bg += breakdown.bg;
            total += breakdown.total;
            batches += 1;
        }
        self.epoch = epoch;

        let n = batches as f64;
        let evaluate = epoch % self.config.eval_every == 0 || epoch >= self.config.epochs;
        let train_acc = if evaluate { Some(self.train_accuracy()?) } else { None };
        Ok(EpochRecord {
            epoch,
            intra: intra / n,
            inter: inter / n,
            bg: bg / n,
            total: total / n,
            train_acc,
        })
    }

    /// Nearest-center accuracy of the current model on the training set.
    pub fn train_accuracy(&self) -> Result<f64> {
        let features = embed(&self.params, self.train.features())?;
        let correct = features
            .iter_rows()
            .zip(&self.classes)
            .filter(|(f, &y)| nearest_center(f, &self.centers).0 == y)
            .count();
        Ok(correct as f64 / self.classes.len() as f64)
    }

    /// Runs the remaining epochs up to `config.epochs`.
    pub fn run(&mut self) -> Result<TrainLog> {
        let mut log = TrainLog::default();
        while self.epoch < self.config.epochs {
            log.records.push(self.run_epoch()?);
        }
        Ok(log)
    }
}

/// Trains a fresh network and returns the final checkpoint with the log.
pub fn train(
    train: &LabeledDataset,
    background: Option<&LabeledDataset>,
    net_config: &NetConfig,
    config: &TrainConfig,
) -> Result<(Checkpoint, TrainLog)> {
    let mut trainer = Trainer::new(train, background, net_config, config)?;
    let log = trainer.run()?;
    Ok((trainer.checkpoint(), log))
}
