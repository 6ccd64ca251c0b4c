#![allow(dead_code)]

use fgame::nn::Mlp;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Worst relative disagreement between backprop and central differences for
/// `L(net) = sum_k probe[k] * net(input)[k]`. Components where both values are
/// below `1e-8` are compared absolutely.
pub fn fd_max_rel_error(net: &Mlp, input: &[f64], probe: &[f64], h: f64) -> f64 {
    let functional = |n: &Mlp| -> f64 { n.forward(input).unwrap().iter().zip(probe).map(|(o, p)| o * p).sum() };
    let (_, cache) = net.forward_cached(input).unwrap();
    let (grads, _) = net.backward(&cache, probe).unwrap();
    let mut worst: f64 = 0.0;
    let mut probe_net = net.clone();
    for (l, g) in grads.layers().iter().enumerate() {
        for (k, &analytic) in g.weights.iter().enumerate() {
            let numeric = central(&mut probe_net, &functional, h, |n| {
                &mut n.layers_mut()[l].weights_mut()[k]
            });
            worst = worst.max(rel_error(analytic, numeric));
        }
        for (k, &analytic) in g.biases.iter().enumerate() {
            let numeric = central(&mut probe_net, &functional, h, |n| {
                &mut n.layers_mut()[l].biases_mut()[k]
            });
            worst = worst.max(rel_error(analytic, numeric));
        }
    }
    worst
}

pub fn central<T: Clone>(subject: &mut T, f: &dyn Fn(&T) -> f64, h: f64, param: impl Fn(&mut T) -> &mut f64) -> f64 {
    let orig = *param(subject);
    *param(subject) = orig + h;
    let plus = f(subject);
    *param(subject) = orig - h;
    let minus = f(subject);
    *param(subject) = orig;
    (plus - minus) / (2.0 * h)
}

pub fn rel_error(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale < 1e-8 {
        (a - b).abs()
    } else {
        (a - b).abs() / scale
    }
}

/// Brute-force density-reachability partition.
///
/// Core points (self-inclusive count >= min_pts) are grouped by the transitive
/// closure of core-to-core eps links. Components are numbered by their lowest
/// core index; a border point takes the lowest-numbered component among its
/// core neighbors; everything else is noise.
pub fn dbscan_oracle(points: &[Vec<f64>], eps: f64, min_pts: usize) -> Vec<Option<usize>> {
    let n = points.len();
    let near = |i: usize, j: usize| -> bool {
        points[i]
            .iter()
            .zip(&points[j])
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            <= eps * eps
    };
    let core: Vec<bool> = (0..n)
        .map(|i| (0..n).filter(|&j| near(i, j)).count() >= min_pts)
        .collect();

    let mut comp: Vec<usize> = (0..n).collect();
    fn root(comp: &mut [usize], mut i: usize) -> usize {
        while comp[i] != i {
            comp[i] = comp[comp[i]];
            i = comp[i];
        }
        i
    }
    for i in 0..n {
        for j in 0..n {
            if core[i] && core[j] && near(i, j) {
                let (a, b) = (root(&mut comp, i), root(&mut comp, j));
                comp[a.max(b)] = a.min(b);
            }
        }
    }
    // Roots are the minimum index of each component, so ordering roots orders components.
    let mut roots: Vec<usize> = (0..n).filter(|&i| core[i]).map(|i| root(&mut comp, i)).collect();
    roots.sort_unstable();
    roots.dedup();
    let id = |r: usize| roots.binary_search(&r).unwrap();

    (0..n)
        .map(|i| {
            if core[i] {
                Some(id(root(&mut comp, i)))
            } else {
                (0..n)
                    .filter(|&j| core[j] && near(i, j))
                    .map(|j| id(root(&mut comp, j)))
                    .min()
            }
        })
        .collect()
}

/// Relabels clusters in order of first appearance.
pub fn canonical(assignment: &[Option<usize>]) -> Vec<Option<usize>> {
    let mut map = std::collections::HashMap::new();
    assignment
        .iter()
        .map(|a| {
            a.map(|c| {
                let next = map.len();
                *map.entry(c).or_insert(next)
            })
        })
        .collect()
}

/// Planar blobs plus uniform clutter, so core, border and noise points all occur.
pub fn random_planar(rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = rng.gen_range(1..=300);
    let n_blobs = rng.gen_range(1..=6);
    let centers: Vec<(f64, f64)> = (0..n_blobs)
        .map(|_| (rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)))
        .collect();
    let spread = rng.gen_range(0.05..0.8);
    (0..n)
        .map(|_| {
            if rng.gen_bool(0.2) {
                vec![rng.gen_range(-6.0..6.0), rng.gen_range(-6.0..6.0)]
            } else {
                let (cx, cy) = centers[rng.gen_range(0..n_blobs)];
                vec![cx + rng.gen_range(-spread..spread), cy + rng.gen_range(-spread..spread)]
            }
        })
        .collect()
}
