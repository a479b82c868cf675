//! Exact laws of the shuffle over all `n!` decks.
//!
//! Distributions are vectors indexed by [`Deck::rank`]. One step averages
//! over the `n²` moves; the kernel is stored as predecessor lists so each
//! target's mass is a fixed-order sum, which keeps parallel evolution
//! bit-reproducible.

use rayon::prelude::*;

use crate::deck::{factorial, Card, Deck, Shuffle};
use crate::error::{usage, Error, Result};
use crate::stats::{compensated_sum, KahanSum};

pub const DEFAULT_MAX_N: usize = 8;
/// Horizon after which [`mixing_time_exact`] gives up.
pub const MAX_MIXING_STEPS: usize = 100_000;

#[derive(Clone, Debug, PartialEq)]
pub struct DistOverSn {
    n: usize,
    weights: Vec<f64>,
}

impl DistOverSn {
    pub fn point_mass(deck: &Deck) -> Self {
        let n = deck.n();
        let mut weights = vec![0.0; factorial(n) as usize];
        weights[deck.rank() as usize] = 1.0;
        DistOverSn { n, weights }
    }

    pub fn uniform(n: usize) -> Self {
        let size = factorial(n) as usize;
        DistOverSn { n, weights: vec![1.0 / size as f64; size] }
    }

    pub fn from_weights(n: usize, weights: Vec<f64>) -> Result<Self> {
        if weights.len() as u64 != factorial(n) {
            return usage(format!("expected {} weights for n = {n}, got {}", factorial(n), weights.len()));
        }
        if weights.iter().any(|&w| !(w >= 0.0)) {
            return usage("weights must be nonnegative");
        }
        Ok(DistOverSn { n, weights })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn mass(&self) -> f64 {
        compensated_sum(self.weights.iter().copied())
    }

    pub fn prob(&self, deck: &Deck) -> f64 {
        self.weights[deck.rank() as usize]
    }
}

/// Total variation distance `½ Σ |μ(x) - ν(x)|`.
pub fn tv(mu: &DistOverSn, nu: &DistOverSn) -> Result<f64> {
    if mu.n != nu.n {
        return usage(format!("distributions over S_{} and S_{}", mu.n, nu.n));
    }
    let mut acc = KahanSum::default();
    for (a, b) in mu.weights.iter().zip(&nu.weights) {
        acc.add((a - b).abs());
    }
    Ok(0.5 * acc.value())
}

/// One-step kernel as predecessor lists: target rank → source ranks, one
/// entry per move (so multiplicities are explicit).
#[derive(Clone, Debug)]
pub struct ShuffleKernel {
    n: usize,
    offsets: Vec<usize>,
    sources: Vec<u32>,
}

impl ShuffleKernel {
    pub fn new(n: usize) -> Result<Self> {
        Self::with_cap(n, DEFAULT_MAX_N)
    }

    /// Builds the kernel, refusing `n > max_n`.
    pub fn with_cap(n: usize, max_n: usize) -> Result<Self> {
        if n == 0 {
            return usage("deck size must be positive");
        }
        if n > max_n {
            return Err(Error::Resource(format!("exact evolution over S_{n} exceeds the cap n <= {max_n}")));
        }
        if n > 12 {
            return Err(Error::Resource("n! does not fit the kernel index type".into()));
        }
        let size = factorial(n) as usize;
        let moves: Vec<Shuffle> = Shuffle::all(n).collect();
        let targets: Vec<Vec<u32>> = (0..size)
            .into_par_iter()
            .map(|r| {
                let d = Deck::unrank(r as u64, n).expect("rank in range");
                moves.iter().map(|&s| d.apply(s).expect("valid move").rank() as u32).collect()
            })
            .collect();
        let mut counts = vec![0usize; size + 1];
        for row in &targets {
            for &t in row {
                counts[t as usize + 1] += 1;
            }
        }
        for i in 0..size {
            counts[i + 1] += counts[i];
        }
        let offsets = counts.clone();
        let mut fill = counts;
        let mut sources = vec![0u32; offsets[size]];
        for (src, row) in targets.iter().enumerate() {
            for &t in row {
                sources[fill[t as usize]] = src as u32;
                fill[t as usize] += 1;
            }
        }
        Ok(ShuffleKernel { n, offsets, sources })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Applies the averaging operator once.
    pub fn step(&self, d: &DistOverSn) -> Result<DistOverSn> {
        if d.n != self.n {
            return usage(format!("kernel is for n = {}, distribution for n = {}", self.n, d.n));
        }
        let scale = 1.0 / (self.n * self.n) as f64;
        let weights = (0..d.weights.len())
            .into_par_iter()
            .map(|t| {
                let preds = &self.sources[self.offsets[t]..self.offsets[t + 1]];
                preds.iter().map(|&s| d.weights[s as usize]).sum::<f64>() * scale
            })
            .collect();
        Ok(DistOverSn { n: self.n, weights })
    }

    pub fn evolve(&self, d: &DistOverSn, steps: usize) -> Result<DistOverSn> {
        let mut cur = d.clone();
        for _ in 0..steps {
            cur = self.step(&cur)?;
        }
        Ok(cur)
    }

    /// `tv(law_t, uniform)` for `t = 0..=t_max` from `start`.
    pub fn distance_to_uniform_series(&self, start: &Deck, t_max: usize) -> Result<Vec<f64>> {
        let uni = DistOverSn::uniform(self.n);
        let mut cur = DistOverSn::point_mass(start);
        let mut out = Vec::with_capacity(t_max + 1);
        out.push(tv(&cur, &uni)?);
        for _ in 0..t_max {
            cur = self.step(&cur)?;
            out.push(tv(&cur, &uni)?);
        }
        Ok(out)
    }

    /// `tv(P^t(x,·), P^t((i,j)x,·))` for `t = 0..=t_max`, with `x` the identity.
    /// TV between the laws started from `[i, j, rest ascending]` and the same
    /// deck with `i` and `j` exchanged. This is the image of the `(1, 2)` pair
    /// on the identity under a relabelling, so the series is independent of
    /// the pair. With a fixed base deck it is not; see
    /// [`ShuffleKernel::adjacent_series_from`].
    pub fn adjacent_series(&self, i: Card, j: Card, t_max: usize) -> Result<Vec<f64>> {
        if i == j || i == 0 || j == 0 || i as usize > self.n || j as usize > self.n {
            return usage(format!("need distinct cards in 1..={}, got ({i}, {j})", self.n));
        }
        let mut order = vec![i, j];
        order.extend((1..=self.n as Card).filter(|&c| c != i && c != j));
        self.adjacent_series_from(&Deck::from_order(order)?, i, j, t_max)
    }

    /// TV between the laws started from `x` and from `x` with cards `i`, `j`
    /// exchanged, for `t = 0..=t_max`.
    pub fn adjacent_series_from(&self, x: &Deck, i: Card, j: Card, t_max: usize) -> Result<Vec<f64>> {
        let mut a = DistOverSn::point_mass(x);
        let mut b = DistOverSn::point_mass(&x.swap_cards(i, j)?);
        let mut out = Vec::with_capacity(t_max + 1);
        out.push(tv(&a, &b)?);
        for _ in 0..t_max {
            a = self.step(&a)?;
            b = self.step(&b)?;
            out.push(tv(&a, &b)?);
        }
        Ok(out)
    }
}

/// `n`-card law after `steps` moves.
pub fn evolve(d: &DistOverSn, steps: usize) -> Result<DistOverSn> {
    if steps == 0 {
        return Ok(d.clone());
    }
    ShuffleKernel::new(d.n)?.evolve(d, steps)
}

/// `d(t)`, computed from the identity deck; the law from any other start is
/// a relabelling, so the distance to uniform does not depend on the start.
pub fn d_exact(n: usize, t: usize) -> Result<f64> {
    Ok(*d_series(n, t)?.last().expect("non-empty"))
}

pub fn d_series(n: usize, t_max: usize) -> Result<Vec<f64>> {
    ShuffleKernel::new(n)?.distance_to_uniform_series(&Deck::identity(n), t_max)
}

/// Distance between the laws from the identity and from the identity with
/// cards 1 and 2 exchanged.
pub fn adjacent_tv_exact(n: usize, t: usize) -> Result<f64> {
    Ok(*adjacent_series(n, t)?.last().expect("non-empty"))
}

pub fn adjacent_series(n: usize, t_max: usize) -> Result<Vec<f64>> {
    if n < 2 {
        return usage("adjacent decks need n >= 2");
    }
    ShuffleKernel::new(n)?.adjacent_series(1, 2, t_max)
}

/// Least `t` with `d(t) ≤ ε`.
pub fn mixing_time_exact(n: usize, eps: f64) -> Result<usize> {
    if !(eps > 0.0 && eps < 1.0) {
        return usage(format!("epsilon must lie in (0, 1), got {eps}"));
    }
    let kernel = ShuffleKernel::new(n)?;
    let uni = DistOverSn::uniform(n);
    let mut cur = DistOverSn::point_mass(&Deck::identity(n));
    for t in 0..=MAX_MIXING_STEPS {
        if tv(&cur, &uni)? <= eps {
            return Ok(t);
        }
        cur = kernel.step(&cur)?;
    }
    Err(Error::Numerical(format!("d(t) stayed above {eps} for {MAX_MIXING_STEPS} steps")))
}
