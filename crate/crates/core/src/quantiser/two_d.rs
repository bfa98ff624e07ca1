//! 2-D Gaussian quantisers by Lloyd's fixed point on a deterministic
//! low-discrepancy node set.
//!
//! Integration nodes are a Halton (2, 3) sequence pushed through the polar
//! Box–Muller map, each node carrying weight `1/M`. The seed shifts the
//! starting index of the sequence, so distinct seeds integrate on disjoint
//! node sets while every run with the same seed is bit-for-bit identical.
//!
//! Iterations start from a golden-angle spiral and run on growing prefixes
//! of the node set, coarse to fine. On the full set a few basin-hopping
//! trials (jitter, relax, keep if better) escape the shallow local minima
//! that otherwise make the result depend on the node set.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

use super::kdtree::{dist2, KdTree};
use super::QuantiserGrid;

#[derive(Debug, Clone, Copy)]
pub struct Lloyd2dOptions {
    /// Number of integration nodes.
    pub nodes: usize,
    pub max_iterations: usize,
    /// Basin-hopping trials on the full node set.
    pub hops: usize,
}

impl Default for Lloyd2dOptions {
    fn default() -> Self {
        Self {
            nodes: 1 << 20,
            max_iterations: 20_000,
            hops: 16,
        }
    }
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += f * (i % base) as f64;
        i /= base;
        f *= inv;
    }
    r
}

pub(crate) fn gaussian_nodes(count: usize, seed: u64) -> Vec<[f64; 2]> {
    let offset = 1 + seed.wrapping_mul(count as u64);
    (0..count as u64)
        .map(|i| {
            let k = offset + i;
            let u = radical_inverse(k, 2);
            let v = radical_inverse(k, 3);
            let r = (-2.0 * u.ln()).sqrt();
            let a = 2.0 * PI * v;
            [r * a.cos(), r * a.sin()]
        })
        .collect()
}

const OVER_RELAXATION: f64 = 1.8;
/// Jitter half-width in units of `2 e_N`.
const HOP_JITTER: f64 = 0.3;
/// Trial relaxations stop at this multiple of the final tolerance.
const HOP_TOL_FACTOR: f64 = 10.0;
const HOP_STREAM: u64 = 0x5eed;
const MIN_NODES_PER_CELL: usize = 16;

/// Golden-angle spiral following the asymptotically optimal point density,
/// the Gaussian density to the power one half (`N(0, 2I)`): locally close to
/// hexagonal, with the right radial profile.
fn density_init(n: usize) -> Vec<[f64; 2]> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|k| {
            let q = (k as f64 + 0.5) / n as f64;
            let r = 2.0 * (-(1.0 - q).ln()).sqrt();
            let a = golden * k as f64;
            [r * a.cos(), r * a.sin()]
        })
        .collect()
}

struct Assignment {
    sum: Vec<[f64; 2]>,
    count: Vec<u64>,
    sq_error: f64,
}

fn assign(codebook: &[[f64; 2]], nodes: &[[f64; 2]], owner: &mut [u32]) -> Assignment {
    let tree = KdTree::new(codebook);
    let mut sum = vec![[0.0; 2]; codebook.len()];
    let mut count = vec![0u64; codebook.len()];
    let mut sq_error = 0.0;
    for (q, o) in nodes.iter().zip(owner.iter_mut()) {
        let j = tree.nearest(*q, *o as usize);
        *o = j as u32;
        sum[j][0] += q[0];
        sum[j][1] += q[1];
        count[j] += 1;
        sq_error += dist2(codebook[j], *q);
    }
    Assignment {
        sum,
        count,
        sq_error,
    }
}

/// `n`-point quantiser of the standard bivariate normal law.
///
/// Lloyd iterations stop once no codeword moves by more than `tol`.
pub fn build_gaussian_2d(n: usize, tol: f64, seed: u64) -> Result<QuantiserGrid> {
    build_gaussian_2d_with(n, tol, seed, &Lloyd2dOptions::default())
}

pub fn build_gaussian_2d_with(
    n: usize,
    tol: f64,
    seed: u64,
    opts: &Lloyd2dOptions,
) -> Result<QuantiserGrid> {
    if n == 0 {
        return Err(Error::domain("quantiser needs at least one point"));
    }
    if !(tol > 0.0) {
        return Err(Error::domain(format!("tolerance {tol} must be positive")));
    }
    if opts.nodes < n {
        return Err(Error::domain(format!(
            "{} integration nodes cannot resolve {n} cells",
            opts.nodes
        )));
    }
    if n == 1 {
        return QuantiserGrid::from_parts(2, vec![0.0, 0.0], vec![1.0], 2f64.sqrt());
    }
    let nodes = gaussian_nodes(opts.nodes, seed);
    let mut codebook = density_init(n);
    let mut owner = vec![0u32; nodes.len()];
    let mut iterations = 0;
    let mut shift = f64::INFINITY;
    // coarse levels are prefixes of the full node set
    let mut levels: Vec<usize> = (1..=3)
        .rev()
        .map(|s| opts.nodes >> (2 * s))
        .filter(|&m| m >= MIN_NODES_PER_CELL * n)
        .collect();
    levels.push(opts.nodes);
    let mut rng = ChaCha8Rng::seed_from_u64(HOP_STREAM ^ seed);
    for &count in &levels {
        let level_tol = tol * ((opts.nodes / count) as f64).sqrt();
        let set = &nodes[..count];
        let own = &mut owner[..count];
        let (s, mut best) = relax(
            &mut codebook,
            set,
            own,
            level_tol,
            &mut iterations,
            opts.max_iterations,
        )?;
        shift = s;
        log::debug!("2-D quantiser n={n}: level {count} done after {iterations} iterations");
        if count < opts.nodes || opts.hops == 0 {
            continue;
        }
        // basin hopping: jitter, relax loosely, keep strict improvements
        let jitter = HOP_JITTER * 2.0 * (best / count as f64).sqrt();
        let mut trial_owner = own.to_vec();
        for _ in 0..opts.hops {
            let mut trial = codebook.clone();
            for p in trial.iter_mut() {
                p[0] += jitter * rng.random_range(-1.0..1.0);
                p[1] += jitter * rng.random_range(-1.0..1.0);
            }
            trial_owner.copy_from_slice(own);
            let (_, d) = relax(
                &mut trial,
                set,
                &mut trial_owner,
                HOP_TOL_FACTOR * tol,
                &mut iterations,
                opts.max_iterations,
            )?;
            if d < best {
                best = d;
                codebook = trial;
                own.copy_from_slice(&trial_owner);
            }
        }
        let (s, _) = relax(
            &mut codebook,
            set,
            own,
            tol,
            &mut iterations,
            opts.max_iterations,
        )?;
        shift = s;
    }
    // weights and distortion from the final codebook
    let m = nodes.len() as f64;
    let fin = assign(&codebook, &nodes, &mut owner);
    if let Some(j) = fin.count.iter().position(|&c| c == 0) {
        return Err(Error::Convergence {
            what: "2-D Lloyd iteration (empty Voronoi cell)",
            iterations,
            residual: j as f64,
        });
    }
    log::debug!(
        "2-D quantiser n={n} seed={seed}: {iterations} Lloyd iterations, final shift {shift:e}"
    );
    let mut probs: Vec<f64> = fin.count.iter().map(|&c| c as f64 / m).collect();
    super::one_d::normalise(&mut probs);
    let points = codebook.iter().flat_map(|p| [p[0], p[1]]).collect();
    QuantiserGrid::from_parts(2, points, probs, (fin.sq_error / m).sqrt())
}

/// Lloyd iterations on one node set until no codeword moves more than `tol`;
/// returns the last shift and the squared error of the last partition.
fn relax(
    codebook: &mut [[f64; 2]],
    nodes: &[[f64; 2]],
    owner: &mut [u32],
    tol: f64,
    iterations: &mut usize,
    max_iterations: usize,
) -> Result<(f64, f64)> {
    loop {
        let mut a = assign(codebook, nodes, owner);
        *iterations += 1;
        let shift = lloyd_step(codebook, &mut a, OVER_RELAXATION);
        if shift <= tol {
            return Ok((shift, a.sq_error));
        }
        if *iterations >= max_iterations {
            return Err(Error::Convergence {
                what: "2-D Lloyd iteration",
                iterations: *iterations,
                residual: shift,
            });
        }
    }
}

/// Moves every codeword `beta` of the way to its cell centroid and returns
/// the largest move. Any `beta` in `(0, 2)` decreases the distortion for the
/// current partition, so fixed points are those of plain Lloyd.
#[allow(clippy::needless_range_loop)]
fn lloyd_step(codebook: &mut [[f64; 2]], a: &mut Assignment, beta: f64) -> f64 {
    let n = codebook.len();
    let mut shift = 0.0f64;
    let mut empty = Vec::new();
    for j in 0..n {
        if a.count[j] == 0 {
            empty.push(j);
            continue;
        }
        let c = a.count[j] as f64;
        let cur = codebook[j];
        let next = [
            cur[0] + beta * (a.sum[j][0] / c - cur[0]),
            cur[1] + beta * (a.sum[j][1] / c - cur[1]),
        ];
        shift = shift.max(dist2(next, cur).sqrt());
        codebook[j] = next;
    }
    for j in empty {
        // reseed next to the most populated cell
        let big = (0..n)
            .max_by_key(|&i| (a.count[i], std::cmp::Reverse(i)))
            .unwrap();
        let c = codebook[big];
        codebook[j] = [c[0] + 1e-3 * (1.0 + c[0].abs()), c[1]];
        a.count[big] /= 2;
        shift = f64::INFINITY;
    }
    shift
}

/// `e_N` of an arbitrary 2-D codebook, integrated on the default node set.
pub(crate) fn distortion_2d(points: &[f64]) -> f64 {
    let codebook: Vec<[f64; 2]> = points.chunks_exact(2).map(|c| [c[0], c[1]]).collect();
    let nodes = gaussian_nodes(Lloyd2dOptions::default().nodes, 0);
    let mut owner = vec![0u32; nodes.len()];
    let a = assign(&codebook, &nodes, &mut owner);
    (a.sq_error / nodes.len() as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn halton_polar_nodes_are_centred() {
        let nodes = gaussian_nodes(1 << 16, 0);
        let m = nodes.len() as f64;
        let mean = nodes
            .iter()
            .fold([0.0; 2], |s, q| [s[0] + q[0], s[1] + q[1]]);
        assert!((mean[0] / m).abs() < 1e-3 && (mean[1] / m).abs() < 1e-3);
        let var = nodes.iter().map(|q| q[0] * q[0]).sum::<f64>() / m;
        assert!((var - 1.0).abs() < 5e-3);
        // distinct seeds give disjoint sets
        assert_ne!(gaussian_nodes(4, 0), gaussian_nodes(4, 1));
    }

    #[test]
    fn tiny_grids() {
        let opts = Lloyd2dOptions {
            nodes: 1 << 16,
            ..Default::default()
        };
        let g = build_gaussian_2d_with(1, 1e-9, 0, &opts).unwrap();
        assert_eq!(g.points(), &[0.0, 0.0]);
        let g = build_gaussian_2d_with(4, 1e-9, 0, &opts).unwrap();
        // any rotation of the square (±√(2/π), ±√(2/π)) is optimal; the flat
        // rotational direction leaves the orientation to the node set
        let r = 2.0 / PI.sqrt();
        for j in 0..4 {
            let p = g.point(j);
            assert!((p[0].hypot(p[1]) - r).abs() < 3e-2, "{p:?}");
            assert!((g.probs()[j] - 0.25).abs() < 5e-3);
        }
        assert!((g.distortion() - (2.0 - 4.0 / PI).sqrt()).abs() < 1e-4);
        assert!(g.expectation(|p| p[0]).abs() < 1e-3 && g.expectation(|p| p[1]).abs() < 1e-3);
        let s: f64 = g.probs().iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
    }
}
