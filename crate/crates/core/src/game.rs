//! Function games and the Extremity game instance.
//!
//! A context is a matrix of objects (rows) by feature dimensions (columns).
//! The function family is `{argmax_d, argmin_d : d < n_dims}`; applying a
//! function to a context picks the object that extremizes one column.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strictness {
    /// Every function picks a different object, and every object is picked.
    Strict,
    NonStrict,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sharing {
    /// The receiver sees a row permutation of the sender's context.
    Shared,
    /// The receiver sees an independently drawn context.
    NonShared,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameConfig {
    pub n_dims: usize,
    pub n_objects: usize,
    pub strictness: Strictness,
    pub sharing: Sharing,
    pub latent_dim: usize,
}

impl GameConfig {
    /// Five feature dimensions and a two-dimensional message space.
    pub fn extremity(strictness: Strictness, sharing: Sharing, n_objects: usize) -> Self {
        GameConfig {
            n_dims: 5,
            n_objects,
            strictness,
            sharing,
            latent_dim: 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_dims == 0 {
            return Err(Error::config("n_dims", "must be at least 1"));
        }
        if self.n_objects == 0 {
            return Err(Error::config("n_objects", "must be at least 1"));
        }
        if self.latent_dim == 0 {
            return Err(Error::config("latent_dim", "must be at least 1"));
        }
        if self.strictness == Strictness::Strict && self.n_objects != 2 * self.n_dims {
            return Err(Error::config(
                "n_objects",
                format!(
                    "strict contexts need exactly 2 * n_dims = {} objects, got {}",
                    2 * self.n_dims,
                    self.n_objects
                ),
            ));
        }
        Ok(())
    }

    pub fn n_functions(&self) -> usize {
        2 * self.n_dims
    }

    pub fn functions(&self) -> Vec<FunctionSpec> {
        all_functions(self.n_dims)
    }

    /// Short identifier such as `strict-shared-10`.
    pub fn label(&self) -> String {
        let s = match self.strictness {
            Strictness::Strict => "strict",
            Strictness::NonStrict => "nonstrict",
        };
        let h = match self.sharing {
            Sharing::Shared => "shared",
            Sharing::NonShared => "nonshared",
        };
        format!("{s}-{h}-{}", self.n_objects)
    }
}

/// Objects by features, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Context {
    n_dims: usize,
    data: Vec<f64>,
}

impl Context {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let Some(first) = rows.first() else {
            return Err(Error::Empty("context without objects"));
        };
        let n_dims = first.len();
        if n_dims == 0 {
            return Err(Error::Empty("objects without features"));
        }
        let mut data = Vec::with_capacity(rows.len() * n_dims);
        for r in rows {
            if r.len() != n_dims {
                return Err(Error::shape("context row", n_dims, r.len()));
            }
            if r.iter().any(|v| !v.is_finite()) {
                return Err(Error::config("context", "object features must be finite"));
            }
            data.extend_from_slice(r);
        }
        Ok(Context { n_dims, data })
    }

    pub fn n_objects(&self) -> usize {
        self.data.len() / self.n_dims
    }

    pub fn n_dims(&self) -> usize {
        self.n_dims
    }

    pub fn object(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_dims..(i + 1) * self.n_dims]
    }

    pub fn objects(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.n_dims)
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.objects().map(|r| r.to_vec()).collect()
    }

    /// Row-major flattening, the layout the networks consume.
    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    pub fn column(&self, d: usize) -> Vec<f64> {
        self.objects().map(|r| r[d]).collect()
    }

    fn swap_in_column(&mut self, d: usize, a: usize, b: usize) {
        self.data.swap(a * self.n_dims + d, b * self.n_dims + d);
    }

    /// Reorders rows so that new row `i` is old row `perm[i]`.
    pub fn permute_rows(&self, perm: &[usize]) -> Context {
        let mut data = Vec::with_capacity(self.data.len());
        for &p in perm {
            data.extend_from_slice(self.object(p));
        }
        Context {
            n_dims: self.n_dims,
            data,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    ArgMax,
    ArgMin,
}

/// One choice function: the object that extremizes feature `dim`.
///
/// Selector indices put every argmax first: `argmax_d -> d`, `argmin_d -> n_dims + d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FunctionSpec {
    pub direction: Direction,
    pub dim: usize,
    n_dims: usize,
}

impl FunctionSpec {
    pub fn new(direction: Direction, dim: usize, n_dims: usize) -> Result<Self> {
        if dim >= n_dims {
            return Err(Error::config("dim", format!("{dim} out of range for {n_dims} dims")));
        }
        Ok(FunctionSpec { direction, dim, n_dims })
    }

    pub fn argmax(dim: usize, n_dims: usize) -> Self {
        Self::new(Direction::ArgMax, dim, n_dims).expect("dim < n_dims")
    }

    pub fn argmin(dim: usize, n_dims: usize) -> Self {
        Self::new(Direction::ArgMin, dim, n_dims).expect("dim < n_dims")
    }

    pub fn from_selector(index: usize, n_dims: usize) -> Result<Self> {
        if index < n_dims {
            Self::new(Direction::ArgMax, index, n_dims)
        } else if index < 2 * n_dims {
            Self::new(Direction::ArgMin, index - n_dims, n_dims)
        } else {
            Err(Error::config(
                "selector_index",
                format!("{index} out of range for {} functions", 2 * n_dims),
            ))
        }
    }

    pub fn selector_index(&self) -> usize {
        match self.direction {
            Direction::ArgMax => self.dim,
            Direction::ArgMin => self.n_dims + self.dim,
        }
    }

    pub fn n_dims(&self) -> usize {
        self.n_dims
    }

    pub fn name(&self) -> String {
        match self.direction {
            Direction::ArgMax => format!("argmax{}", self.dim),
            Direction::ArgMin => format!("argmin{}", self.dim),
        }
    }
}

/// Every function over `n_dims` features, in selector order.
pub fn all_functions(n_dims: usize) -> Vec<FunctionSpec> {
    (0..2 * n_dims)
        .map(|i| FunctionSpec::from_selector(i, n_dims).expect("in range"))
        .collect()
}

/// Row index picked by `f`. Ties go to the lowest index.
pub fn apply_function(f: FunctionSpec, c: &Context) -> Result<usize> {
    if c.n_objects() == 0 {
        return Err(Error::Empty("apply_function on an empty context"));
    }
    if f.dim >= c.n_dims() {
        return Err(Error::shape("function dim", c.n_dims(), f.dim));
    }
    let mut best = 0;
    let mut best_val = c.object(0)[f.dim];
    for (i, row) in c.objects().enumerate().skip(1) {
        let v = row[f.dim];
        let better = match f.direction {
            Direction::ArgMax => v > best_val,
            Direction::ArgMin => v < best_val,
        };
        if better {
            best = i;
            best_val = v;
        }
    }
    Ok(best)
}

/// Unit vector at `f`'s selector index.
pub fn one_hot(f: FunctionSpec, size: usize) -> Result<Vec<f64>> {
    let idx = f.selector_index();
    if idx >= size {
        return Err(Error::shape("one-hot size", idx + 1, size));
    }
    let mut v = vec![0.0; size];
    v[idx] = 1.0;
    Ok(v)
}

fn uniform_context<R: Rng + ?Sized>(n_objects: usize, n_dims: usize, rng: &mut R) -> Context {
    let data = (0..n_objects * n_dims).map(|_| rng.gen::<f64>()).collect();
    Context { n_dims, data }
}

/// Draws a sender context: i.i.d. uniform `[0, 1)` features, or the strict
/// construction when the config asks for it.
pub fn sample_context<R: Rng + ?Sized>(cfg: &GameConfig, rng: &mut R) -> Result<Context> {
    cfg.validate()?;
    match cfg.strictness {
        Strictness::Strict => sample_strict_context(cfg, rng),
        Strictness::NonStrict => Ok(uniform_context(cfg.n_objects, cfg.n_dims, rng)),
    }
}

/// Uniform context rearranged so that `f -> f(c)` is a bijection onto the rows.
///
/// For each column `d`, the column maximum is swapped into row `d` and then the
/// column minimum into row `n_dims + d`. Only values within that column move.
/// A uniformly random row permutation is applied last.
pub fn sample_strict_context<R: Rng + ?Sized>(cfg: &GameConfig, rng: &mut R) -> Result<Context> {
    let n = cfg.n_dims;
    if n == 0 || cfg.n_objects != 2 * n {
        return Err(Error::config(
            "n_objects",
            format!(
                "strict contexts need 2 * n_dims = {} objects, got {}",
                2 * n,
                cfg.n_objects
            ),
        ));
    }
    let mut c = uniform_context(2 * n, n, rng);
    for d in 0..n {
        let max_row = apply_function(FunctionSpec::argmax(d, n), &c)?;
        c.swap_in_column(d, max_row, d);
        let min_row = apply_function(FunctionSpec::argmin(d, n), &c)?;
        c.swap_in_column(d, min_row, n + d);
    }
    let mut perm: Vec<usize> = (0..2 * n).collect();
    perm.shuffle(rng);
    Ok(c.permute_rows(&perm))
}

/// True when every function selects a distinct object.
pub fn is_strict(c: &Context) -> bool {
    let n = c.n_dims();
    if c.n_objects() == 0 {
        return false;
    }
    let mut seen = vec![false; c.n_objects()];
    for f in all_functions(n) {
        let idx = apply_function(f, c).expect("non-empty context");
        if seen[idx] {
            return false;
        }
        seen[idx] = true;
    }
    true
}

/// The receiver's view: a row shuffle of `c` when shared, otherwise a fresh draw.
pub fn make_receiver_context<R: Rng + ?Sized>(c: &Context, cfg: &GameConfig, rng: &mut R) -> Result<Context> {
    match cfg.sharing {
        Sharing::Shared => {
            let mut perm: Vec<usize> = (0..c.n_objects()).collect();
            perm.shuffle(rng);
            Ok(c.permute_rows(&perm))
        }
        Sharing::NonShared => sample_context(cfg, rng),
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Whether `output` is strictly closer (Euclidean) to the target row than to
/// every other row. Ties count as failures.
pub fn recovery_correct(output: &[f64], c_prime: &Context, target_index: usize) -> bool {
    if output.len() != c_prime.n_dims() || target_index >= c_prime.n_objects() {
        return false;
    }
    let target = sq_dist(output, c_prime.object(target_index));
    c_prime
        .objects()
        .enumerate()
        .all(|(i, row)| i == target_index || target < sq_dist(output, row))
}
