//! Deterministic graph families for the test corpus.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sparsekit::{Error, Result, WeightedGraph};

/// Resample budget for random families that may come out disconnected.
pub const MAX_RESAMPLES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Family {
    Complete,
    Path,
    Grid,
    Barbell,
    RandomGnp,
    ExpanderLike,
}

#[derive(Debug, Clone, Copy)]
pub struct GenParams {
    /// Edge probability for `random-gnp`.
    pub p: f64,
    /// Number of random Hamiltonian cycles for `expander-like`.
    pub cycles: usize,
}

impl Default for GenParams {
    fn default() -> Self {
        Self { p: 0.25, cycles: 3 }
    }
}

fn check_n(n: usize, min: usize) -> Result<()> {
    if n < min {
        return Err(Error::Config(format!("n must be at least {min}, got {n}")));
    }
    Ok(())
}

pub fn complete(n: usize) -> Result<WeightedGraph> {
    check_n(n, 2)?;
    WeightedGraph::new(
        n,
        (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j, 1.0))),
    )
}

pub fn path(n: usize) -> Result<WeightedGraph> {
    check_n(n, 2)?;
    WeightedGraph::new(n, (0..n - 1).map(|i| (i, i + 1, 1.0)))
}

/// `side × side` grid graph.
pub fn grid(side: usize) -> Result<WeightedGraph> {
    check_n(side, 2)?;
    let id = |r: usize, c: usize| r * side + c;
    let mut edges = Vec::new();
    for r in 0..side {
        for c in 0..side {
            if c + 1 < side {
                edges.push((id(r, c), id(r, c + 1), 1.0));
            }
            if r + 1 < side {
                edges.push((id(r, c), id(r + 1, c), 1.0));
            }
        }
    }
    WeightedGraph::new(side * side, edges)
}

/// Two cliques on `⌊n/2⌋` and `⌈n/2⌉` vertices joined by one bridge edge.
pub fn barbell(n: usize) -> Result<WeightedGraph> {
    check_n(n, 4)?;
    let half = n / 2;
    let mut edges = Vec::new();
    for (lo, hi) in [(0, half), (half, n)] {
        for i in lo..hi {
            for j in (i + 1)..hi {
                edges.push((i, j, 1.0));
            }
        }
    }
    edges.push((half - 1, half, 1.0));
    WeightedGraph::new(n, edges)
}

/// Erdős–Rényi `G(n, p)`, resampled until connected.
pub fn random_gnp(n: usize, p: f64, seed: u64) -> Result<WeightedGraph> {
    check_n(n, 2)?;
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::Config(format!("p must lie in (0, 1], got {p}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MAX_RESAMPLES {
        let mut edges = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                if rng.random_bool(p) {
                    edges.push((i, j, 1.0));
                }
            }
        }
        if edges.is_empty() {
            continue;
        }
        let g = WeightedGraph::from_parts(n, edges)?;
        if g.is_connected() {
            return Ok(g);
        }
    }
    Err(Error::Disconnected)
}

/// Union of `cycles` random Hamiltonian cycles (duplicate edges merged by weight).
pub fn expander_like(n: usize, cycles: usize, seed: u64) -> Result<WeightedGraph> {
    check_n(n, 3)?;
    if cycles == 0 {
        return Err(Error::Config("cycles must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    let mut order: Vec<usize> = (0..n).collect();
    for _ in 0..cycles {
        order.shuffle(&mut rng);
        for k in 0..n {
            let (a, b) = (order[k], order[(k + 1) % n]);
            edges.push((a.min(b), a.max(b), 1.0));
        }
    }
    WeightedGraph::new(n, edges)
}

pub fn generate(family: Family, n: usize, params: GenParams, seed: u64) -> Result<WeightedGraph> {
    match family {
        Family::Complete => complete(n),
        Family::Path => path(n),
        Family::Grid => grid(n),
        Family::Barbell => barbell(n),
        Family::RandomGnp => random_gnp(n, params.p, seed),
        Family::ExpanderLike => expander_like(n, params.cycles, seed),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn family_sizes() {
        assert_eq!(complete(4).unwrap().m(), 6);
        assert_eq!(path(5).unwrap().m(), 4);
        assert_eq!(grid(3).unwrap().m(), 12);
        let b = barbell(8).unwrap();
        assert_eq!(b.m(), 2 * 6 + 1);
        assert!(b.is_connected());
    }

    #[test]
    fn random_families_are_connected_and_seeded() {
        let a = random_gnp(64, 0.2, 7).unwrap();
        let b = random_gnp(64, 0.2, 7).unwrap();
        assert_eq!(a, b);
        assert!(a.is_connected());
        let e = expander_like(20, 3, 1).unwrap();
        assert!(e.is_connected());
    }

    #[test]
    fn hopeless_gnp_gives_up() {
        assert!(matches!(random_gnp(50, 1e-6, 1), Err(Error::Disconnected)));
    }
}
