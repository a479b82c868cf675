//! Decks of labelled cards and insertion moves.
//!
//! A [`Deck`] stores the left-to-right sequence of card labels `1..=n`.
//! The position of card `c` (the permutation value `π(c)`) is recovered by
//! lookup. A [`Shuffle`] `M(a,b)` removes card `a` and reinserts it directly
//! to the right of card `b` (positions measured after the removal), or at the
//! leftmost position when `a == b`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{usage, Error, Result};

/// Card label, always in `1..=n` for the ambient deck size.
pub type Card = u32;

/// Largest deck size that can be ranked into a `u64`.
pub const MAX_RANK_N: usize = 20;

#[derive(Clone, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Deck {
    order: Vec<Card>,
}

impl Deck {
    /// The deck `1, 2, ..., n`.
    pub fn identity(n: usize) -> Self {
        Deck { order: (1..=n as Card).collect() }
    }

    /// Builds a deck from a left-to-right label sequence, checking that it is
    /// a permutation of `1..=n`.
    pub fn from_order(order: Vec<Card>) -> Result<Self> {
        let n = order.len();
        let mut seen = vec![false; n + 1];
        for &c in &order {
            let idx = c as usize;
            if c == 0 || idx > n {
                return usage(format!("card {c} out of range 1..={n}"));
            }
            if seen[idx] {
                return usage(format!("card {c} appears twice"));
            }
            seen[idx] = true;
        }
        Ok(Deck { order })
    }

    pub fn n(&self) -> usize {
        self.order.len()
    }

    pub fn order(&self) -> &[Card] {
        &self.order
    }

    pub fn into_order(self) -> Vec<Card> {
        self.order
    }

    /// Zero-based position of `card`, i.e. `π(card) - 1`.
    pub fn position(&self, card: Card) -> Option<usize> {
        self.order.iter().position(|&c| c == card)
    }

    fn check_card(&self, card: Card) -> Result<()> {
        if card == 0 || card as usize > self.n() {
            return usage(format!("card {card} out of range 1..={}", self.n()));
        }
        Ok(())
    }

    /// Applies `s` in place.
    pub fn apply_mut(&mut self, s: Shuffle) -> Result<()> {
        self.check_card(s.card)?;
        self.check_card(s.anchor)?;
        let from = self.position(s.card).expect("valid deck contains every card");
        self.order.remove(from);
        let to = if s.card == s.anchor { 0 } else { self.position(s.anchor).expect("anchor still present") + 1 };
        self.order.insert(to, s.card);
        Ok(())
    }

    /// Returns the deck after applying `s`.
    pub fn apply(&self, s: Shuffle) -> Result<Deck> {
        let mut out = self.clone();
        out.apply_mut(s)?;
        Ok(out)
    }

    /// Trajectory `x_0 = self, x_1, ..., x_k` under the moves of `path`.
    pub fn apply_path(&self, path: &ShufflePath) -> Result<Vec<Deck>> {
        let mut traj = Vec::with_capacity(path.len() + 1);
        let mut cur = self.clone();
        traj.push(cur.clone());
        for &s in path.moves() {
            cur.apply_mut(s)?;
            traj.push(cur.clone());
        }
        Ok(traj)
    }

    /// Final deck under `path` without materialising the trajectory.
    pub fn apply_path_final(&self, path: &ShufflePath) -> Result<Deck> {
        let mut cur = self.clone();
        for &s in path.moves() {
            cur.apply_mut(s)?;
        }
        Ok(cur)
    }

    /// Exchanges the positions of cards `i` and `j`: the adjacent deck `(i,j)x`.
    pub fn swap_cards(&self, i: Card, j: Card) -> Result<Deck> {
        self.check_card(i)?;
        self.check_card(j)?;
        if i == j {
            return usage("swap_cards needs two distinct cards");
        }
        let pi = self.position(i).expect("present");
        let pj = self.position(j).expect("present");
        let mut out = self.clone();
        out.order.swap(pi, pj);
        Ok(out)
    }

    /// Lexicographic index of the order sequence in `0..n!`.
    pub fn rank(&self) -> u64 {
        let n = self.n();
        assert!(n <= MAX_RANK_N, "rank supports n <= {MAX_RANK_N}");
        let mut rank = 0u64;
        // Lehmer digit at position p: count of later cards smaller than order[p].
        for p in 0..n {
            let smaller = self.order[p + 1..].iter().filter(|&&c| c < self.order[p]).count() as u64;
            rank = rank * (n - p) as u64 + smaller;
        }
        rank
    }

    /// Inverse of [`Deck::rank`].
    pub fn unrank(mut r: u64, n: usize) -> Result<Deck> {
        if n > MAX_RANK_N {
            return usage(format!("unrank supports n <= {MAX_RANK_N}"));
        }
        let total = factorial(n);
        if r >= total {
            return usage(format!("rank {r} out of range for n = {n} (n! = {total})"));
        }
        let mut digits = vec![0usize; n];
        for p in (0..n).rev() {
            let base = (n - p) as u64;
            digits[p] = (r % base) as usize;
            r /= base;
        }
        let mut pool: Vec<Card> = (1..=n as Card).collect();
        let order = digits.into_iter().map(|d| pool.remove(d)).collect();
        Ok(Deck { order })
    }
}

pub fn factorial(n: usize) -> u64 {
    (1..=n as u64).product()
}

impl TryFrom<String> for Deck {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Deck> for String {
    fn from(d: Deck) -> Self {
        d.to_string()
    }
}

impl fmt::Display for Deck {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (idx, c) in self.order.iter().enumerate() {
            if idx > 0 {
                f.write_str(",")?;
            }
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

impl FromStr for Deck {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() {
            return Deck::from_order(Vec::new());
        }
        let order = s
            .split(',')
            .map(|tok| tok.trim().parse::<Card>().map_err(|e| Error::Parse(format!("card {tok:?}: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        Deck::from_order(order)
    }
}

/// The move `M(card, anchor)`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Shuffle {
    /// Card removed from the deck.
    pub card: Card,
    /// Card the removed card is reinserted after; equal to `card` for leftmost.
    pub anchor: Card,
}

impl Shuffle {
    pub const fn new(card: Card, anchor: Card) -> Self {
        Shuffle { card, anchor }
    }

    pub fn is_valid_for(&self, n: usize) -> bool {
        (1..=n as Card).contains(&self.card) && (1..=n as Card).contains(&self.anchor)
    }

    /// `M(π(a), π(b))` where `π` swaps `i` and `j`.
    pub fn transpose_relabel(self, i: Card, j: Card) -> Shuffle {
        let swap = |c: Card| {
            if c == i {
                j
            } else if c == j {
                i
            } else {
                c
            }
        };
        Shuffle { card: swap(self.card), anchor: swap(self.anchor) }
    }

    /// Draws one of the `n²` moves uniformly.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Shuffle {
        debug_assert!(n >= 1);
        let n = n as Card;
        let card = rng.random_range(1..=n);
        let anchor = rng.random_range(1..=n);
        Shuffle { card, anchor }
    }

    /// Iterates all `n²` moves, card-major.
    pub fn all(n: usize) -> impl Iterator<Item = Shuffle> {
        let n = n as Card;
        (1..=n).flat_map(move |a| (1..=n).map(move |b| Shuffle::new(a, b)))
    }
}

impl TryFrom<String> for Shuffle {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Shuffle> for String {
    fn from(s: Shuffle) -> Self {
        s.to_string()
    }
}

impl fmt::Display for Shuffle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}>{}", self.card, self.anchor)
    }
}

impl FromStr for Shuffle {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let (a, b) = s.trim().split_once('>').ok_or_else(|| Error::Parse(format!("shuffle {s:?}: expected a>b")))?;
        let parse = |tok: &str| tok.trim().parse::<Card>().map_err(|e| Error::Parse(format!("shuffle {s:?}: {e}")));
        let out = Shuffle::new(parse(a)?, parse(b)?);
        if out.card == 0 || out.anchor == 0 {
            return Err(Error::Parse(format!("shuffle {s:?}: cards are 1-based")));
        }
        Ok(out)
    }
}

/// A `k`-path: a finite sequence of moves, applied left to right.
#[derive(Clone, PartialEq, Eq, Hash, Debug, Default, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ShufflePath {
    moves: Vec<Shuffle>,
}

impl ShufflePath {
    pub fn new(moves: Vec<Shuffle>) -> Self {
        ShufflePath { moves }
    }

    /// Uniform random `k`-path over `n` cards.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, n: usize, k: usize) -> Self {
        ShufflePath { moves: (0..k).map(|_| Shuffle::random(rng, n)).collect() }
    }

    pub fn moves(&self) -> &[Shuffle] {
        &self.moves
    }

    pub fn len(&self) -> usize {
        self.moves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.moves.is_empty()
    }

    /// Move at 1-based time `t`.
    pub fn at(&self, t: usize) -> Shuffle {
        self.moves[t - 1]
    }

    pub fn is_valid_for(&self, n: usize) -> bool {
        self.moves.iter().all(|s| s.is_valid_for(n))
    }
}

impl From<Vec<Shuffle>> for ShufflePath {
    fn from(moves: Vec<Shuffle>) -> Self {
        ShufflePath { moves }
    }
}

impl TryFrom<String> for ShufflePath {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<ShufflePath> for String {
    fn from(p: ShufflePath) -> Self {
        p.to_string()
    }
}

impl fmt::Display for ShufflePath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (idx, s) in self.moves.iter().enumerate() {
            if idx > 0 {
                f.write_str(";")?;
            }
            write!(f, "{s}")?;
        }
        Ok(())
    }
}

impl FromStr for ShufflePath {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() {
            return Ok(ShufflePath::default());
        }
        s.split(';').map(str::parse).collect::<Result<Vec<_>>>().map(ShufflePath::new)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedSpec;
    use proptest::prelude::*;
    use std::collections::HashMap;

    fn deck(s: &str) -> Deck {
        s.parse().unwrap()
    }

    fn m(a: Card, b: Card) -> Shuffle {
        Shuffle::new(a, b)
    }

    #[test]
    fn apply_examples() {
        assert_eq!(deck("1,2,3").apply(m(1, 3)).unwrap(), deck("2,3,1"));
        assert_eq!(deck("1,2,3").apply(m(2, 2)).unwrap(), deck("2,1,3"));
        assert_eq!(deck("1,3,4,2").apply(m(1, 2)).unwrap(), deck("3,4,2,1"));
    }

    #[test]
    fn apply_rejects_bad_labels() {
        assert!(matches!(deck("1,2,3").apply(m(4, 1)), Err(Error::Usage(_))));
        assert!(matches!(deck("1,2,3").apply(m(1, 0)), Err(Error::Usage(_))));
    }

    #[test]
    fn path_examples() {
        let p: ShufflePath = "1>1;1>4;2>3".parse().unwrap();
        let traj = deck("1,3,4,2").apply_path(&p).unwrap();
        assert_eq!(traj.len(), 4);
        assert_eq!(traj[3], deck("3,2,4,1"));

        let traj = deck("4,1,3,2").apply_path(&ShufflePath::default()).unwrap();
        assert_eq!(traj, vec![deck("4,1,3,2")]);

        let p: ShufflePath = "1>2".parse().unwrap();
        assert_eq!(deck("1,2").apply_path_final(&p).unwrap(), deck("2,1"));
    }

    #[test]
    fn relabel_examples() {
        assert_eq!(m(1, 4).transpose_relabel(1, 2), m(2, 4));
        assert_eq!(m(1, 2).transpose_relabel(1, 2), m(2, 1));
        assert_eq!(m(3, 3).transpose_relabel(1, 2), m(3, 3));
    }

    #[test]
    fn swap_examples() {
        assert_eq!(deck("1,2,3").swap_cards(1, 2).unwrap(), deck("2,1,3"));
        assert_eq!(deck("1,3,4,2").swap_cards(1, 2).unwrap(), deck("2,3,4,1"));
        let d = deck("5,1,3,2,4");
        assert_eq!(d.swap_cards(3, 4).unwrap().swap_cards(3, 4).unwrap(), d);
        assert!(d.swap_cards(2, 2).is_err());
    }

    #[test]
    fn rank_examples() {
        assert_eq!(deck("1,2,3").rank(), 0);
        assert_eq!(deck("2,1,3").rank(), 2);
        assert_eq!(Deck::unrank(5, 3).unwrap(), deck("3,2,1"));
        assert!(matches!(Deck::unrank(6, 3), Err(Error::Usage(_))));
    }

    #[test]
    fn rank_is_bijection_up_to_5() {
        for n in 0..=5 {
            let total = factorial(n);
            let mut seen = std::collections::HashSet::new();
            for r in 0..total {
                let d = Deck::unrank(r, n).unwrap();
                assert_eq!(d.rank(), r);
                assert!(seen.insert(d));
            }
        }
    }

    #[test]
    fn rank_matches_lexicographic_enumeration_n4() {
        // Oracle: sort all orders lexicographically and compare indices.
        let mut all: Vec<Vec<Card>> = Vec::new();
        for r in 0..24 {
            all.push(Deck::unrank(r, 4).unwrap().into_order());
        }
        let mut sorted = all.clone();
        sorted.sort();
        assert_eq!(all, sorted);
    }

    #[test]
    fn one_step_kernel_is_doubly_stochastic() {
        for n in 1..=4 {
            let total = factorial(n);
            let mut column = vec![0usize; total as usize];
            for r in 0..total {
                let d = Deck::unrank(r, n).unwrap();
                let mut count = 0;
                for s in Shuffle::all(n) {
                    column[d.apply(s).unwrap().rank() as usize] += 1;
                    count += 1;
                }
                assert_eq!(count, n * n);
            }
            assert!(column.iter().all(|&c| c == n * n), "n = {n}: {column:?}");
        }
    }

    #[test]
    fn random_shuffle_n1_and_determinism() {
        let mut rng = SeedSpec::new(3).stream(0);
        for _ in 0..10 {
            assert_eq!(Shuffle::random(&mut rng, 1), m(1, 1));
        }
        let a = ShufflePath::random(&mut SeedSpec::new(9).stream(4), 6, 50);
        let b = ShufflePath::random(&mut SeedSpec::new(9).stream(4), 6, 50);
        assert_eq!(a, b);
    }

    #[test]
    fn random_shuffle_is_uniform_n5() {
        let draws = 1_000_000usize;
        let mut rng = SeedSpec::new(2024).stream(0);
        let mut counts: HashMap<Shuffle, usize> = HashMap::new();
        for _ in 0..draws {
            *counts.entry(Shuffle::random(&mut rng, 5)).or_default() += 1;
        }
        assert_eq!(counts.len(), 25);
        let p = 1.0 / 25.0;
        let se = (p * (1.0 - p) / draws as f64).sqrt();
        let mut chi2 = 0.0;
        for &c in counts.values() {
            let freq = c as f64 / draws as f64;
            assert!((freq - p).abs() < 4.0 * se, "freq {freq}");
            let expected = p * draws as f64;
            chi2 += (c as f64 - expected).powi(2) / expected;
        }
        // 24 degrees of freedom; 99.9% quantile is about 51.2.
        assert!(chi2 < 51.2, "chi2 = {chi2}");
    }

    #[test]
    fn text_forms_round_trip() {
        assert_eq!(deck("3,1,4,2").to_string(), "3,1,4,2");
        let p: ShufflePath = "1>1;1>4;2>3".parse().unwrap();
        assert_eq!(p.to_string(), "1>1;1>4;2>3");
        assert!("1-2".parse::<Shuffle>().is_err());
        assert!("1,1,2".parse::<Deck>().is_err());
    }

    proptest! {
        #[test]
        fn apply_preserves_permutation(r in 0u64..40320, a in 1u32..=8, b in 1u32..=8) {
            let d = Deck::unrank(r, 8).unwrap();
            let out = d.apply(m(a, b)).unwrap();
            prop_assert!(Deck::from_order(out.order().to_vec()).is_ok());
            if a == b {
                prop_assert_eq!(out.order()[0], a);
            } else {
                let pb = out.position(b).unwrap();
                prop_assert_eq!(out.position(a), Some(pb + 1));
            }
            // Relative order of the other cards is unchanged.
            let rest = |x: &Deck| x.order().iter().copied().filter(|&c| c != a).collect::<Vec<_>>();
            prop_assert_eq!(rest(&d), rest(&out));
        }

        #[test]
        fn rank_unrank_round_trip(r in 0u64..40320) {
            prop_assert_eq!(Deck::unrank(r, 8).unwrap().rank(), r);
        }
    }
}
