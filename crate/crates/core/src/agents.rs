//! Sender and receiver networks joined by a continuous message bottleneck.
//!
//! The sender reads the flattened context followed by the one-hot function
//! selector and emits a `latent_dim` message through an identity output layer.
//! The receiver reads the message followed by its own flattened context and
//! emits an object feature vector. Both are trained jointly on the MSE between
//! that vector and the target object `f(c')`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{
    apply_function, make_receiver_context, one_hot, recovery_correct, sample_context, Context, FunctionSpec, GameConfig,
};
use crate::nn::{mse, mse_grad, Activation, AdamConfig, AdamState, Gradients, Mlp};
use crate::seed::{stream_rng, Stream};

pub const HIDDEN_UNITS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub steps: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            steps: 5000,
            batch_size: 64,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.adam().validate()?;
        if self.batch_size == 0 {
            return Err(Error::config("batch_size", "must be at least 1"));
        }
        Ok(())
    }
}

/// A point in the continuous message space.
#[derive(Debug, Clone, PartialEq)]
pub struct Message(pub Vec<f64>);

impl Message {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// `a + b - c` componentwise.
    pub fn add_sub(a: &Message, b: &Message, c: &Message) -> Message {
        Message(a.0.iter().zip(&b.0).zip(&c.0).map(|((x, y), z)| x + y - z).collect())
    }
}

impl AsRef<[f64]> for Message {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// One play of the game: sender context, function, receiver context and the
/// index of `f(c')` in the receiver context.
#[derive(Debug, Clone)]
pub struct Play {
    pub context: Context,
    pub function: FunctionSpec,
    pub receiver_context: Context,
    pub target: usize,
}

impl Play {
    pub fn target_object(&self) -> &[f64] {
        self.receiver_context.object(self.target)
    }
}

/// Nature's move: `f` uniform over the family, fresh contexts.
pub fn sample_play<R: Rng + ?Sized>(cfg: &GameConfig, rng: &mut R) -> Result<Play> {
    let context = sample_context(cfg, rng)?;
    let function = FunctionSpec::from_selector(rng.gen_range(0..cfg.n_functions()), cfg.n_dims)?;
    let receiver_context = make_receiver_context(&context, cfg, rng)?;
    let target = apply_function(function, &receiver_context)?;
    Ok(Play {
        context,
        function,
        receiver_context,
        target,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignalingModel {
    game: GameConfig,
    sender: Mlp,
    receiver: Mlp,
}

impl SignalingModel {
    pub fn sender_dims(game: &GameConfig) -> [usize; 4] {
        [
            game.n_objects * game.n_dims + game.n_functions(),
            HIDDEN_UNITS,
            HIDDEN_UNITS,
            game.latent_dim,
        ]
    }

    pub fn receiver_dims(game: &GameConfig) -> [usize; 4] {
        [
            game.latent_dim + game.n_objects * game.n_dims,
            HIDDEN_UNITS,
            HIDDEN_UNITS,
            game.n_dims,
        ]
    }

    pub fn init<R: Rng + ?Sized>(game: GameConfig, rng: &mut R) -> Result<Self> {
        game.validate()?;
        let acts = [Activation::Relu, Activation::Relu, Activation::Identity];
        let sender = Mlp::init(&Self::sender_dims(&game), &acts, rng)?;
        let receiver = Mlp::init(&Self::receiver_dims(&game), &acts, rng)?;
        Ok(SignalingModel { game, sender, receiver })
    }

    /// The untrained model a trial with this seed starts from.
    pub fn init_for_seed(game: GameConfig, seed: u64) -> Result<Self> {
        Self::init(game, &mut stream_rng(seed, Stream::Init))
    }

    pub fn from_parts(game: GameConfig, sender: Mlp, receiver: Mlp) -> Result<Self> {
        game.validate()?;
        let s = Self::sender_dims(&game);
        let r = Self::receiver_dims(&game);
        if sender.in_dim() != s[0] {
            return Err(Error::shape("sender input", s[0], sender.in_dim()));
        }
        if sender.out_dim() != game.latent_dim {
            return Err(Error::shape("sender output", game.latent_dim, sender.out_dim()));
        }
        if receiver.in_dim() != r[0] {
            return Err(Error::shape("receiver input", r[0], receiver.in_dim()));
        }
        if receiver.out_dim() != game.n_dims {
            return Err(Error::shape("receiver output", game.n_dims, receiver.out_dim()));
        }
        if sender.layers().last().map(|l| l.activation()) != Some(Activation::Identity) {
            return Err(Error::config("sender", "message layer must have identity activation"));
        }
        Ok(SignalingModel { game, sender, receiver })
    }

    pub fn game(&self) -> &GameConfig {
        &self.game
    }

    pub fn sender(&self) -> &Mlp {
        &self.sender
    }

    pub fn receiver(&self) -> &Mlp {
        &self.receiver
    }

    pub fn sender_mut(&mut self) -> &mut Mlp {
        &mut self.sender
    }

    pub fn receiver_mut(&mut self) -> &mut Mlp {
        &mut self.receiver
    }

    fn check_context(&self, c: &Context) -> Result<()> {
        if c.n_dims() != self.game.n_dims {
            return Err(Error::shape("context dims", self.game.n_dims, c.n_dims()));
        }
        if c.n_objects() != self.game.n_objects {
            return Err(Error::shape("context objects", self.game.n_objects, c.n_objects()));
        }
        Ok(())
    }

    /// Flattened context followed by the one-hot selector.
    pub fn sender_input(&self, c: &Context, f: FunctionSpec) -> Result<Vec<f64>> {
        self.check_context(c)?;
        if f.n_dims() != self.game.n_dims {
            return Err(Error::shape("function dims", self.game.n_dims, f.n_dims()));
        }
        let mut x = Vec::with_capacity(self.sender.in_dim());
        x.extend_from_slice(c.as_flat());
        x.extend(one_hot(f, self.game.n_functions())?);
        Ok(x)
    }

    /// Message followed by the flattened receiver context.
    pub fn receiver_input(&self, msg: &Message, c_prime: &Context) -> Result<Vec<f64>> {
        self.check_context(c_prime)?;
        if msg.dim() != self.game.latent_dim {
            return Err(Error::shape("message", self.game.latent_dim, msg.dim()));
        }
        let mut x = Vec::with_capacity(self.receiver.in_dim());
        x.extend_from_slice(msg.as_slice());
        x.extend_from_slice(c_prime.as_flat());
        Ok(x)
    }

    pub fn sender_forward(&self, c: &Context, f: FunctionSpec) -> Result<Message> {
        Ok(Message(self.sender.forward(&self.sender_input(c, f)?)?))
    }

    pub fn receiver_forward(&self, msg: &Message, c_prime: &Context) -> Result<Vec<f64>> {
        self.receiver.forward(&self.receiver_input(msg, c_prime)?)
    }

    /// Whether the receiver, given `msg`, picks out `f(c')`.
    pub fn recovers(&self, msg: &Message, c_prime: &Context, f: FunctionSpec) -> Result<bool> {
        let out = self.receiver_forward(msg, c_prime)?;
        Ok(recovery_correct(&out, c_prime, apply_function(f, c_prime)?))
    }

    /// Mean MSE over `plays`, adding its gradient into `sender_grads` and
    /// `receiver_grads`.
    pub fn loss_and_grads(
        &self,
        plays: &[Play],
        sender_grads: &mut Gradients,
        receiver_grads: &mut Gradients,
    ) -> Result<f64> {
        if plays.is_empty() {
            return Err(Error::Empty("batch"));
        }
        let scale = 1.0 / plays.len() as f64;
        let latent = self.game.latent_dim;
        let mut total = 0.0;
        for play in plays {
            let (msg, s_cache) = self
                .sender
                .forward_cached(&self.sender_input(&play.context, play.function)?)?;
            let r_in = self.receiver_input(&Message(msg), &play.receiver_context)?;
            let (pred, r_cache) = self.receiver.forward_cached(&r_in)?;
            let target = play.target_object();
            total += mse(&pred, target)?;
            let out_grad = mse_grad(&pred, target, scale)?;
            let r_in_grad = self.receiver.backward_into(&r_cache, &out_grad, receiver_grads)?;
            self.sender
                .backward_into(&s_cache, &r_in_grad[..latent], sender_grads)?;
        }
        Ok(total * scale)
    }

    /// Mean MSE over `plays` without gradients.
    pub fn loss(&self, plays: &[Play]) -> Result<f64> {
        let mut total = 0.0;
        for play in plays {
            let msg = self.sender_forward(&play.context, play.function)?;
            total += mse(
                &self.receiver_forward(&msg, &play.receiver_context)?,
                play.target_object(),
            )?;
        }
        Ok(total / plays.len() as f64)
    }
}

#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub model: SignalingModel,
    pub train: TrainConfig,
    /// Mean batch loss at every step.
    pub loss_history: Vec<f64>,
}

impl TrainedModel {
    pub fn final_loss(&self) -> Option<f64> {
        self.loss_history.last().copied()
    }
}

/// Trains a fresh sender/receiver pair for `train.steps` Adam steps on fresh
/// batches. Deterministic in `train.seed`.
pub fn train_trial(game: GameConfig, train: TrainConfig) -> Result<TrainedModel> {
    game.validate()?;
    train.validate()?;
    let model = SignalingModel::init_for_seed(game, train.seed)?;
    train_model(model, train)
}

/// Continues training an existing model, drawing data from the seed's
/// training stream.
pub fn train_model(mut model: SignalingModel, train: TrainConfig) -> Result<TrainedModel> {
    train.validate()?;
    let game = model.game;
    let mut rng = stream_rng(train.seed, Stream::Train);
    let mut sender_opt = AdamState::new(&model.sender, train.adam())?;
    let mut receiver_opt = AdamState::new(&model.receiver, train.adam())?;
    let mut sender_grads = Gradients::zeros_like(&model.sender);
    let mut receiver_grads = Gradients::zeros_like(&model.receiver);
    let mut loss_history = Vec::with_capacity(train.steps);
    let mut batch = Vec::with_capacity(train.batch_size);

    for _ in 0..train.steps {
        batch.clear();
        for _ in 0..train.batch_size {
            batch.push(sample_play(&game, &mut rng)?);
        }
        sender_grads.zero();
        receiver_grads.zero();
        let loss = model.loss_and_grads(&batch, &mut sender_grads, &mut receiver_grads)?;
        sender_opt.step(&mut model.sender, &sender_grads)?;
        receiver_opt.step(&mut model.receiver, &receiver_grads)?;
        loss_history.push(loss);
    }
    if !(model.sender.is_finite() && model.receiver.is_finite()) {
        return Err(Error::config(
            "learning_rate",
            "training diverged to non-finite parameters",
        ));
    }
    Ok(TrainedModel {
        model,
        train,
        loss_history,
    })
}

/// Fraction of plays recovered over `n_contexts` fresh contexts times every
/// function.
pub fn evaluate_accuracy<R: Rng + ?Sized>(model: &SignalingModel, n_contexts: usize, rng: &mut R) -> Result<f64> {
    let game = *model.game();
    let functions = game.functions();
    let mut hits = 0usize;
    let mut total = 0usize;
    for _ in 0..n_contexts {
        let c = sample_context(&game, rng)?;
        let c_prime = make_receiver_context(&c, &game, rng)?;
        for &f in &functions {
            let msg = model.sender_forward(&c, f)?;
            hits += usize::from(model.recovers(&msg, &c_prime, f)?);
            total += 1;
        }
    }
    if total == 0 {
        return Ok(0.0);
    }
    Ok(hits as f64 / total as f64)
}
