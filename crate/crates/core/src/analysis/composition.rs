//! Compositionality probes over argmax/argmin message pairs.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::agents::{Message, SignalingModel, HIDDEN_UNITS};
use crate::error::{Error, Result};
use crate::game::{make_receiver_context, sample_context, Context, FunctionSpec};
use crate::nn::{mse_grad, Activation, AdamConfig, AdamState, Gradients, Mlp};

fn messages_for(model: &SignalingModel, c: &Context) -> Result<Vec<Message>> {
    model
        .game()
        .functions()
        .into_iter()
        .map(|f| model.sender_forward(c, f))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalogyReport {
    /// Mean recovery over all ordered pairs `i != j` and contexts.
    pub accuracy: f64,
    /// Mean over `j` and contexts for each target dimension `i`.
    pub per_dim: Vec<f64>,
    /// The `i == j` case, where the offset cancels algebraically.
    pub identity_accuracy: f64,
    /// Recovery with the sender's own `argmax_i` messages on the same plays.
    pub baseline_accuracy: f64,
}

/// Feeds the receiver `m(argmax_j) - m(argmin_j) + m(argmin_i)` in place of
/// `m(argmax_i)` and scores recovery of `argmax_i(c')`.
pub fn analogy_probe<R: Rng + ?Sized>(model: &SignalingModel, n_contexts: usize, rng: &mut R) -> Result<AnalogyReport> {
    let game = *model.game();
    let n = game.n_dims;
    if n < 2 {
        return Err(Error::config(
            "n_dims",
            "the analogy probe needs at least two dimensions",
        ));
    }
    let mut per_dim_hits = vec![0usize; n];
    let mut identity_hits = 0usize;
    let mut baseline_hits = 0usize;
    for _ in 0..n_contexts {
        let c = sample_context(&game, rng)?;
        let c_prime = make_receiver_context(&c, &game, rng)?;
        let msgs = messages_for(model, &c)?;
        let max = |d: usize| &msgs[FunctionSpec::argmax(d, n).selector_index()];
        let min = |d: usize| &msgs[FunctionSpec::argmin(d, n).selector_index()];
        for i in 0..n {
            let target = FunctionSpec::argmax(i, n);
            baseline_hits += usize::from(model.recovers(max(i), &c_prime, target)?);
            for j in 0..n {
                let rhs = Message::add_sub(max(j), min(i), min(j));
                let hit = usize::from(model.recovers(&rhs, &c_prime, target)?);
                if i == j {
                    identity_hits += hit;
                } else {
                    per_dim_hits[i] += hit;
                }
            }
        }
    }
    let denom = n_contexts.max(1) as f64;
    let per_dim: Vec<f64> = per_dim_hits
        .iter()
        .map(|&h| h as f64 / (denom * (n - 1) as f64))
        .collect();
    Ok(AnalogyReport {
        accuracy: per_dim.iter().sum::<f64>() / n as f64,
        per_dim,
        identity_accuracy: identity_hits as f64 / (denom * n as f64),
        baseline_accuracy: baseline_hits as f64 / (denom * n as f64),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CompositionConfig {
    pub n_train_contexts: usize,
    pub n_test_contexts: usize,
    pub steps: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
}

impl Default for CompositionConfig {
    fn default() -> Self {
        CompositionConfig {
            n_train_contexts: 100,
            n_test_contexts: 100,
            steps: 2000,
            batch_size: 64,
            adam: AdamConfig::default(),
        }
    }
}

/// Test-time input to a composition predictor.
#[derive(Debug)]
pub struct CompositionQuery<'a> {
    pub context: &'a Context,
    pub held_out: usize,
    pub j: usize,
    /// `m(argmax_j) ++ m(argmin_j) ++ m(argmin_held_out)`.
    pub input: Vec<f64>,
}

fn composition_input(msgs: &[Message], n: usize, i: usize, j: usize) -> Vec<f64> {
    let mut x = Vec::new();
    x.extend_from_slice(msgs[FunctionSpec::argmax(j, n).selector_index()].as_slice());
    x.extend_from_slice(msgs[FunctionSpec::argmin(j, n).selector_index()].as_slice());
    x.extend_from_slice(msgs[FunctionSpec::argmin(i, n).selector_index()].as_slice());
    x
}

/// Scores a predictor of `m(c, argmax_{i0})` by receiver recovery, averaged over
/// every `j != i0` and `n_contexts` fresh contexts.
pub fn score_composition<R, F>(
    model: &SignalingModel,
    held_out: usize,
    n_contexts: usize,
    mut predictor: F,
    rng: &mut R,
) -> Result<f64>
where
    R: Rng + ?Sized,
    F: FnMut(&CompositionQuery) -> Result<Message>,
{
    let game = *model.game();
    let n = game.n_dims;
    if held_out >= n {
        return Err(Error::config(
            "held_out",
            format!("{held_out} out of range for {n} dims"),
        ));
    }
    let target = FunctionSpec::argmax(held_out, n);
    let mut hits = 0usize;
    let mut total = 0usize;
    for _ in 0..n_contexts {
        let c = sample_context(&game, rng)?;
        let c_prime = make_receiver_context(&c, &game, rng)?;
        let msgs = messages_for(model, &c)?;
        for j in (0..n).filter(|&j| j != held_out) {
            let query = CompositionQuery {
                context: &c,
                held_out,
                j,
                input: composition_input(&msgs, n, held_out, j),
            };
            let predicted = predictor(&query)?;
            hits += usize::from(model.recovers(&predicted, &c_prime, target)?);
            total += 1;
        }
    }
    Ok(if total == 0 { 0.0 } else { hits as f64 / total as f64 })
}

/// Trains a composition network with dimension `held_out` left out, then
/// scores its predictions of `m(c, argmax_held_out)`.
pub fn composition_probe<R: Rng + ?Sized>(
    model: &SignalingModel,
    held_out: usize,
    cfg: &CompositionConfig,
    rng: &mut R,
) -> Result<f64> {
    let net = train_composition_net(model, held_out, cfg, rng)?;
    score_composition(
        model,
        held_out,
        cfg.n_test_contexts,
        |q| Ok(Message(net.forward(&q.input)?)),
        rng,
    )
}

/// Trains the composition MLP on tuples
/// `(m(argmax_j), m(argmin_j), m(argmin_i)) -> m(argmax_i)` with `i != held_out`
/// and `j` outside `{i, held_out}`.
pub fn train_composition_net<R: Rng + ?Sized>(
    model: &SignalingModel,
    held_out: usize,
    cfg: &CompositionConfig,
    rng: &mut R,
) -> Result<Mlp> {
    let game = *model.game();
    let n = game.n_dims;
    let latent = game.latent_dim;
    if held_out >= n {
        return Err(Error::config(
            "held_out",
            format!("{held_out} out of range for {n} dims"),
        ));
    }
    if cfg.batch_size == 0 {
        return Err(Error::config("batch_size", "must be at least 1"));
    }
    let mut inputs = Vec::new();
    let mut targets = Vec::new();
    for _ in 0..cfg.n_train_contexts {
        let c = sample_context(&game, rng)?;
        let msgs = messages_for(model, &c)?;
        for i in (0..n).filter(|&i| i != held_out) {
            for j in (0..n).filter(|&j| j != i && j != held_out) {
                inputs.push(composition_input(&msgs, n, i, j));
                targets.push(msgs[FunctionSpec::argmax(i, n).selector_index()].0.clone());
            }
        }
    }
    if inputs.is_empty() {
        return Err(Error::Empty("composition training set (needs n_dims >= 3)"));
    }

    let acts = [Activation::Relu, Activation::Relu, Activation::Identity];
    let mut net = Mlp::init(&[3 * latent, HIDDEN_UNITS, HIDDEN_UNITS, latent], &acts, rng)?;
    let mut opt = AdamState::new(&net, cfg.adam)?;
    let mut grads = Gradients::zeros_like(&net);
    let scale = 1.0 / cfg.batch_size as f64;
    for _ in 0..cfg.steps {
        grads.zero();
        for _ in 0..cfg.batch_size {
            let k = rng.gen_range(0..inputs.len());
            let (pred, cache) = net.forward_cached(&inputs[k])?;
            net.backward_into(&cache, &mse_grad(&pred, &targets[k], scale)?, &mut grads)?;
        }
        opt.step(&mut net, &grads)?;
    }
    Ok(net)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositionReport {
    pub per_held_out: Vec<f64>,
    pub accuracy: f64,
}

/// [`composition_probe`] for every held-out dimension.
pub fn composition_probe_all<R: Rng + ?Sized>(
    model: &SignalingModel,
    cfg: &CompositionConfig,
    rng: &mut R,
) -> Result<CompositionReport> {
    let per_held_out = (0..model.game().n_dims)
        .map(|i0| composition_probe(model, i0, cfg, rng))
        .collect::<Result<Vec<_>>>()?;
    let accuracy = per_held_out.iter().sum::<f64>() / per_held_out.len() as f64;
    Ok(CompositionReport { per_held_out, accuracy })
}
