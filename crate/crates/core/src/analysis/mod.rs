//! Post-training analyses of the message space.
//!
//! * production: cluster sender messages with DBSCAN and score the clusters
//!   against the functions that produced them ([`dbscan`], [`cluster_f1`]);
//! * perception: feed the receiver cluster averages it has never seen
//!   ([`artificial_messages`], [`perception_accuracy`]);
//! * compositionality: vector offsets and a learned composition network
//!   ([`analogy_probe`], [`composition_probe`]);
//! * category boundaries: interpolate between two messages and watch which
//!   object the receiver picks ([`cp_sweep`]).

mod clustering;
mod composition;
mod cp;

pub use clustering::{cluster_f1, dbscan, Clustering, DEFAULT_EPS, DEFAULT_MIN_PTS};
pub use composition::{
    analogy_probe, composition_probe, composition_probe_all, score_composition, AnalogyReport, CompositionConfig,
    CompositionQuery, CompositionReport,
};
pub use cp::{cp_sweep, cp_sweep_averaged, default_t_grid, interpolate, CpCurve, CpDraw, CpReport};

use rand::seq::index;
use rand::Rng;

use crate::agents::{Message, SignalingModel};
use crate::error::{Error, Result};
use crate::game::{sample_context, Context, FunctionSpec};

/// Sender output for every (context, function) pair of a sample of contexts.
#[derive(Debug, Clone)]
pub struct LabeledMessageSet {
    pub messages: Vec<Message>,
    /// Selector index of the function behind each message.
    pub labels: Vec<usize>,
    /// Index into `contexts` of each message's source context.
    pub context_ids: Vec<usize>,
    pub contexts: Vec<Context>,
    pub n_functions: usize,
}

impl LabeledMessageSet {
    pub fn len(&self) -> usize {
        self.messages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }
}

pub fn collect_messages<R: Rng + ?Sized>(
    model: &SignalingModel,
    n_contexts: usize,
    rng: &mut R,
) -> Result<LabeledMessageSet> {
    let game = *model.game();
    let functions = game.functions();
    let mut set = LabeledMessageSet {
        messages: Vec::with_capacity(n_contexts * functions.len()),
        labels: Vec::with_capacity(n_contexts * functions.len()),
        context_ids: Vec::with_capacity(n_contexts * functions.len()),
        contexts: Vec::with_capacity(n_contexts),
        n_functions: functions.len(),
    };
    for ci in 0..n_contexts {
        let c = sample_context(&game, rng)?;
        for &f in &functions {
            set.messages.push(model.sender_forward(&c, f)?);
            set.labels.push(f.selector_index());
            set.context_ids.push(ci);
        }
        set.contexts.push(c);
    }
    Ok(set)
}

/// Mean of `k` members drawn without replacement. When the cluster is smaller
/// than `k`, all members are averaged and the flag is set.
pub fn artificial_message<R: Rng + ?Sized>(members: &[&Message], k: usize, rng: &mut R) -> Result<(Message, bool)> {
    let Some(first) = members.first() else {
        return Err(Error::Empty("artificial message from an empty cluster"));
    };
    if k == 0 {
        return Err(Error::config("k", "must be at least 1"));
    }
    let dim = first.dim();
    let truncated = members.len() < k;
    let picks: Vec<usize> = if truncated {
        (0..members.len()).collect()
    } else {
        index::sample(rng, members.len(), k).into_vec()
    };
    let mut mean = vec![0.0; dim];
    for &p in &picks {
        for (acc, v) in mean.iter_mut().zip(members[p].as_slice()) {
            *acc += v;
        }
    }
    let n = picks.len() as f64;
    for v in &mut mean {
        *v /= n;
    }
    Ok((Message(mean), truncated))
}

/// A cluster's averaged message, labelled with the cluster's majority function.
#[derive(Debug, Clone)]
pub struct ArtificialMessage {
    pub cluster: usize,
    pub function: FunctionSpec,
    pub message: Message,
    /// Fewer than `k` members were available.
    pub truncated: bool,
}

/// One artificial message per cluster.
pub fn artificial_messages<R: Rng + ?Sized>(
    set: &LabeledMessageSet,
    clustering: &Clustering,
    k: usize,
    n_dims: usize,
    rng: &mut R,
) -> Result<Vec<ArtificialMessage>> {
    let majority = clustering.majority_labels(&set.labels, set.n_functions);
    let mut out = Vec::with_capacity(clustering.n_clusters());
    for (cluster, &label) in majority.iter().enumerate() {
        let members: Vec<&Message> = clustering
            .members(cluster)
            .into_iter()
            .map(|i| &set.messages[i])
            .collect();
        let (message, truncated) = artificial_message(&members, k, rng)?;
        out.push(ArtificialMessage {
            cluster,
            function: FunctionSpec::from_selector(label, n_dims)?,
            message,
            truncated,
        });
    }
    Ok(out)
}

/// Receiver recovery rate for fixed messages over `n_contexts` fresh receiver
/// contexts. Every message is scored against every context.
pub fn perception_accuracy<R: Rng + ?Sized>(
    model: &SignalingModel,
    messages: &[(FunctionSpec, Message)],
    n_contexts: usize,
    rng: &mut R,
) -> Result<f64> {
    if messages.is_empty() || n_contexts == 0 {
        return Ok(0.0);
    }
    let game = *model.game();
    let mut hits = 0usize;
    for _ in 0..n_contexts {
        let c_prime = sample_context(&game, rng)?;
        for (f, msg) in messages {
            hits += usize::from(model.recovers(msg, &c_prime, *f)?);
        }
    }
    Ok(hits as f64 / (n_contexts * messages.len()) as f64)
}
