//! Interpolation sweeps between two messages.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::agents::{Message, SignalingModel};
use crate::error::{Error, Result};
use crate::game::{make_receiver_context, sample_context, Context, FunctionSpec};

/// `((1 - t) m_minus + (1 + t) m_plus) / 2`: `m_minus` at `t = -1`, `m_plus` at `t = +1`.
pub fn interpolate(m_minus: &Message, m_plus: &Message, t: f64) -> Message {
    Message(
        m_minus
            .as_slice()
            .iter()
            .zip(m_plus.as_slice())
            .map(|(a, b)| ((1.0 - t) * a + (1.0 + t) * b) / 2.0)
            .collect(),
    )
}

/// `t` from -2 to +2 in steps of 0.05. Each point is `k / 20`, so -1, 0 and +1
/// are hit exactly.
pub fn default_t_grid() -> Vec<f64> {
    (-40i32..=40).map(|k| k as f64 / 20.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CpCurve {
    pub t: Vec<f64>,
    /// Recovery of `f_minus(c')`.
    pub acc_f_minus: Vec<f64>,
    /// Recovery of `f_plus(c')`.
    pub acc_f_plus: Vec<f64>,
}

impl CpCurve {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn at(&self, t: f64) -> Option<(f64, f64)> {
        self.t
            .iter()
            .position(|&x| x == t)
            .map(|k| (self.acc_f_minus[k], self.acc_f_plus[k]))
    }

    /// Number of grid intervals within `[-1, +1]` where `acc_f_minus - acc_f_plus`
    /// goes from positive to non-positive or from non-negative to negative.
    pub fn crossings_inside(&self) -> usize {
        let inside: Vec<f64> = self
            .t
            .iter()
            .zip(self.acc_f_minus.iter().zip(&self.acc_f_plus))
            .filter(|(t, _)| (-1.0..=1.0).contains(*t))
            .map(|(_, (a, b))| a - b)
            .collect();
        inside
            .windows(2)
            .filter(|w| (w[0] > 0.0 && w[1] <= 0.0) || (w[0] >= 0.0 && w[1] < 0.0))
            .count()
    }

    /// The `f_minus` curve starts above the `f_plus` curve at `t = -1` and ends
    /// below it at `t = +1`.
    pub fn crosses_inside(&self) -> bool {
        match (self.at(-1.0), self.at(1.0)) {
            (Some((a0, b0)), Some((a1, b1))) => a0 > b0 && a1 < b1 && self.crossings_inside() >= 1,
            _ => false,
        }
    }

    fn mean(curves: &[&CpCurve]) -> Option<CpCurve> {
        let first = curves.first()?;
        let n = curves.len() as f64;
        let avg = |pick: fn(&CpCurve) -> &Vec<f64>| -> Vec<f64> {
            (0..first.len())
                .map(|k| curves.iter().map(|c| pick(c)[k]).sum::<f64>() / n)
                .collect()
        };
        Some(CpCurve {
            t: first.t.clone(),
            acc_f_minus: avg(|c| &c.acc_f_minus),
            acc_f_plus: avg(|c| &c.acc_f_plus),
        })
    }
}

/// One sweep: a sender context, the function pair, its two endpoint messages,
/// the receiver contexts used at every `t`, and the resulting curve.
#[derive(Debug, Clone)]
pub struct CpDraw {
    pub f_minus: FunctionSpec,
    pub f_plus: FunctionSpec,
    pub context: Context,
    pub receiver_contexts: Vec<Context>,
    pub m_minus: Message,
    pub m_plus: Message,
    pub curve: CpCurve,
}

/// Sweeps `t` between the sender's messages for `f_minus` and `f_plus` on one
/// sampled context, scoring each interpolated message on the same
/// `n_contexts` receiver contexts.
pub fn cp_sweep<R: Rng + ?Sized>(
    model: &SignalingModel,
    f_minus: FunctionSpec,
    f_plus: FunctionSpec,
    t_grid: &[f64],
    n_contexts: usize,
    rng: &mut R,
) -> Result<CpDraw> {
    if f_minus == f_plus {
        return Err(Error::config("f_plus", "must differ from f_minus"));
    }
    if n_contexts == 0 {
        return Err(Error::config("n_contexts", "must be at least 1"));
    }
    if t_grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::config("t_grid", "must be sorted ascending"));
    }
    let game = *model.game();
    let context = sample_context(&game, rng)?;
    let m_minus = model.sender_forward(&context, f_minus)?;
    let m_plus = model.sender_forward(&context, f_plus)?;
    let receiver_contexts = (0..n_contexts)
        .map(|_| make_receiver_context(&context, &game, rng))
        .collect::<Result<Vec<_>>>()?;

    let mut acc_f_minus = Vec::with_capacity(t_grid.len());
    let mut acc_f_plus = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let msg = interpolate(&m_minus, &m_plus, t);
        let (mut hits_minus, mut hits_plus) = (0usize, 0usize);
        for c_prime in &receiver_contexts {
            hits_minus += usize::from(model.recovers(&msg, c_prime, f_minus)?);
            hits_plus += usize::from(model.recovers(&msg, c_prime, f_plus)?);
        }
        acc_f_minus.push(hits_minus as f64 / n_contexts as f64);
        acc_f_plus.push(hits_plus as f64 / n_contexts as f64);
    }
    Ok(CpDraw {
        f_minus,
        f_plus,
        context,
        receiver_contexts,
        m_minus,
        m_plus,
        curve: CpCurve {
            t: t_grid.to_vec(),
            acc_f_minus,
            acc_f_plus,
        },
    })
}

#[derive(Debug, Clone)]
pub struct CpReport {
    pub mean: CpCurve,
    pub draws: Vec<CpDraw>,
}

impl CpReport {
    /// Fraction of draws whose curves cross inside `(-1, +1)`.
    pub fn crossing_fraction(&self) -> f64 {
        if self.draws.is_empty() {
            return 0.0;
        }
        self.draws.iter().filter(|d| d.curve.crosses_inside()).count() as f64 / self.draws.len() as f64
    }
}

/// Averages [`cp_sweep`] over `n_draws` function pairs drawn uniformly
/// without replacement from the function family.
pub fn cp_sweep_averaged<R: Rng + ?Sized>(
    model: &SignalingModel,
    t_grid: &[f64],
    n_draws: usize,
    n_contexts: usize,
    rng: &mut R,
) -> Result<CpReport> {
    if n_draws == 0 {
        return Err(Error::config("n_draws", "must be at least 1"));
    }
    let n_dims = model.game().n_dims;
    let n_functions = model.game().n_functions();
    if n_functions < 2 {
        return Err(Error::config("n_dims", "need at least two functions"));
    }
    let mut draws = Vec::with_capacity(n_draws);
    for _ in 0..n_draws {
        let pair = index::sample(rng, n_functions, 2);
        let f_minus = FunctionSpec::from_selector(pair.index(0), n_dims)?;
        let f_plus = FunctionSpec::from_selector(pair.index(1), n_dims)?;
        draws.push(cp_sweep(model, f_minus, f_plus, t_grid, n_contexts, rng)?);
    }
    let curves: Vec<&CpCurve> = draws.iter().map(|d| &d.curve).collect();
    let mean = CpCurve::mean(&curves).expect("at least one draw");
    Ok(CpReport { mean, draws })
}
