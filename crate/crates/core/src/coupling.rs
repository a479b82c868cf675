//! Non-Markovian coupling of the shuffle started from two adjacent decks.
//!
//! For a special pair `(i, j)` and a path `P`, the *queue* tracks the cards
//! whose relative placement differs between the two coupled decks once the
//! last `i`-or-`j` move has aligned everything else. A *good time* is an
//! `i`-or-`j` move followed by an opposite special move while the queue is a
//! singleton. With `T` the last good time, the second deck follows `θP`,
//! which is `P` with `i` and `j` exchanged in every move strictly before `T`.
//!
//! Two readings of the construction are configurable through
//! [`CouplingVariant`]; the defaults are the ones under which the decks
//! provably coalesce whenever `T` is finite.

use std::fmt;

use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};

use crate::deck::{Card, Deck, Shuffle, ShufflePath};
use crate::error::{usage, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SpecialPair {
    pub i: Card,
    pub j: Card,
}

impl SpecialPair {
    pub fn new(i: Card, j: Card) -> Result<Self> {
        if i == j {
            return usage(format!("special pair needs distinct cards, got ({i}, {j})"));
        }
        if i == 0 || j == 0 {
            return usage("cards are 1-based");
        }
        Ok(SpecialPair { i, j })
    }

    pub fn contains(&self, c: Card) -> bool {
        c == self.i || c == self.j
    }

    /// The other special card.
    pub fn partner(&self, c: Card) -> Card {
        debug_assert!(self.contains(c));
        if c == self.i {
            self.j
        } else {
            self.i
        }
    }

    /// True for `M(i,j)` and `M(j,i)`: a special card inserted right after
    /// the other one.
    pub fn is_cross_move(&self, s: Shuffle) -> bool {
        (s.card == self.i && s.anchor == self.j) || (s.card == self.j && s.anchor == self.i)
    }

    fn relabel(&self, c: Card) -> Card {
        if c == self.i {
            self.j
        } else if c == self.j {
            self.i
        } else {
            c
        }
    }

    fn check_for(&self, n: usize) -> Result<()> {
        if self.i as usize > n || self.j as usize > n {
            return usage(format!("special pair ({}, {}) out of range for n = {n}", self.i, self.j));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GoodTimeRule {
    /// The good-time predicate exactly as displayed.
    Strict,
    /// Additionally rejects a time-`t` move `M(i,j)` or `M(j,i)`.
    #[default]
    Amended,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueueMembership {
    /// Grow when `b ∈ Q`.
    Literal,
    /// Grow when `b ∈ Q \ {a}`; a leftmost reinsertion of a queue member
    /// removes it.
    #[default]
    SelfExclusive,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct CouplingVariant {
    pub good_time_rule: GoodTimeRule,
    pub queue_membership: QueueMembership,
}

impl CouplingVariant {
    pub const STRICT: CouplingVariant =
        CouplingVariant { good_time_rule: GoodTimeRule::Strict, queue_membership: QueueMembership::SelfExclusive };
    pub const AMENDED: CouplingVariant =
        CouplingVariant { good_time_rule: GoodTimeRule::Amended, queue_membership: QueueMembership::SelfExclusive };

    pub fn with_membership(mut self, m: QueueMembership) -> Self {
        self.queue_membership = m;
        self
    }
}

/// Set of cards with O(1) membership, indexed by label.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct QueueState {
    flags: Vec<bool>,
    len: usize,
}

impl QueueState {
    pub fn empty(n: usize) -> Self {
        QueueState { flags: vec![false; n + 1], len: 0 }
    }

    pub fn from_cards(n: usize, cards: &[Card]) -> Self {
        let mut q = QueueState::empty(n);
        for &c in cards {
            q.insert(c);
        }
        q
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn contains(&self, c: Card) -> bool {
        self.flags.get(c as usize).copied().unwrap_or(false)
    }

    fn insert(&mut self, c: Card) {
        let slot = &mut self.flags[c as usize];
        if !*slot {
            *slot = true;
            self.len += 1;
        }
    }

    fn remove(&mut self, c: Card) {
        let slot = &mut self.flags[c as usize];
        if *slot {
            *slot = false;
            self.len -= 1;
        }
    }

    fn reset_to(&mut self, c: Card) {
        self.flags.iter_mut().for_each(|f| *f = false);
        self.flags[c as usize] = true;
        self.len = 1;
    }

    /// Sorted member list.
    pub fn members(&self) -> Vec<Card> {
        self.flags.iter().enumerate().filter(|(_, &f)| f).map(|(c, _)| c as Card).collect()
    }

    /// Empty, or holding exactly one of the two special cards.
    pub fn is_consistent(&self, pair: SpecialPair) -> bool {
        self.is_empty() || (self.contains(pair.i) != self.contains(pair.j))
    }

    /// One queue transition under move `s`, in place.
    pub fn step_mut(&mut self, s: Shuffle, pair: SpecialPair, membership: QueueMembership) {
        let (a, b) = (s.card, s.anchor);
        if a == pair.j {
            self.reset_to(pair.i);
        } else if a == pair.i {
            self.reset_to(pair.j);
        } else {
            let grows = match membership {
                QueueMembership::Literal => self.contains(b),
                QueueMembership::SelfExclusive => b != a && self.contains(b),
            };
            if grows {
                self.insert(a);
            } else {
                self.remove(a);
            }
        }
    }

    /// Relabels `i ↔ j`.
    pub fn relabeled(&self, pair: SpecialPair) -> QueueState {
        let n = self.flags.len() - 1;
        let cards: Vec<Card> = self.members().into_iter().map(|c| pair.relabel(c)).collect();
        QueueState::from_cards(n, &cards)
    }
}

impl Serialize for QueueState {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        self.members().serialize(ser)
    }
}

/// Functional form of [`QueueState::step_mut`].
pub fn queue_step(q: &QueueState, s: Shuffle, pair: SpecialPair, v: CouplingVariant) -> QueueState {
    let mut out = q.clone();
    out.step_mut(s, pair, v.queue_membership);
    out
}

/// `Q_0 = ∅, Q_1, ..., Q_k` along `path`.
pub fn queue_trajectory(path: &ShufflePath, pair: SpecialPair, v: CouplingVariant, n: usize) -> Vec<QueueState> {
    let mut out = Vec::with_capacity(path.len() + 1);
    let mut q = QueueState::empty(n);
    out.push(q.clone());
    for &s in path.moves() {
        q.step_mut(s, pair, v.queue_membership);
        out.push(q.clone());
    }
    out
}

/// Last good time: a 1-based time index, or `Never` (written `∞`/`"inf"`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LastGoodTime {
    At(usize),
    Never,
}

impl LastGoodTime {
    pub fn is_finite(&self) -> bool {
        matches!(self, LastGoodTime::At(_))
    }

    pub fn finite(&self) -> Option<usize> {
        match *self {
            LastGoodTime::At(t) => Some(t),
            LastGoodTime::Never => None,
        }
    }

    /// `T ≥ k`, counting `∞` as larger than every horizon.
    pub fn at_least(&self, k: usize) -> bool {
        match *self {
            LastGoodTime::At(t) => t >= k,
            LastGoodTime::Never => true,
        }
    }
}

impl fmt::Display for LastGoodTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LastGoodTime::At(t) => write!(f, "{t}"),
            LastGoodTime::Never => f.write_str("inf"),
        }
    }
}

impl Serialize for LastGoodTime {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        match *self {
            LastGoodTime::At(t) => ser.serialize_u64(t as u64),
            LastGoodTime::Never => ser.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for LastGoodTime {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = LastGoodTime;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a time index or \"inf\"")
            }
            fn visit_u64<E: de::Error>(self, t: u64) -> std::result::Result<LastGoodTime, E> {
                Ok(LastGoodTime::At(t as usize))
            }
            fn visit_str<E: de::Error>(self, s: &str) -> std::result::Result<LastGoodTime, E> {
                if s == "inf" {
                    Ok(LastGoodTime::Never)
                } else {
                    Err(E::invalid_value(de::Unexpected::Str(s), &self))
                }
            }
        }
        de.deserialize_any(V)
    }
}

/// All good times of `path`, ascending.
///
/// Works from the materialised queue trajectory: pairs each special move
/// with the next one and checks the predicate directly.
pub fn good_times(path: &ShufflePath, pair: SpecialPair, v: CouplingVariant, n: usize) -> Vec<usize> {
    let queues = queue_trajectory(path, pair, v, n);
    let special: Vec<usize> = (1..=path.len()).filter(|&t| pair.contains(path.at(t).card)).collect();
    special
        .windows(2)
        .filter(|w| {
            let (t, next) = (w[0], w[1]);
            let (mv, next_mv) = (path.at(t), path.at(next));
            queues[next - 1].len() == 1
                && mv.card != next_mv.card
                && (v.good_time_rule == GoodTimeRule::Strict || !pair.is_cross_move(mv))
        })
        .map(|w| w[0])
        .collect()
}

pub fn last_good_time(path: &ShufflePath, pair: SpecialPair, v: CouplingVariant, n: usize) -> LastGoodTime {
    good_times(path, pair, v, n).last().map_or(LastGoodTime::Never, |&t| LastGoodTime::At(t))
}

/// Online good-time detector that only keeps the queue. Feeding it the moves
/// of a path one by one yields the same last good time as [`last_good_time`].
#[derive(Clone, Debug)]
pub struct GoodTimeScanner {
    pair: SpecialPair,
    variant: CouplingVariant,
    queue: QueueState,
    t: usize,
    last_special: Option<(usize, Shuffle)>,
    last_good: LastGoodTime,
    good_count: usize,
}

impl GoodTimeScanner {
    pub fn new(n: usize, pair: SpecialPair, variant: CouplingVariant) -> Self {
        GoodTimeScanner {
            pair,
            variant,
            queue: QueueState::empty(n),
            t: 0,
            last_special: None,
            last_good: LastGoodTime::Never,
            good_count: 0,
        }
    }

    pub fn push(&mut self, s: Shuffle) {
        self.t += 1;
        if self.pair.contains(s.card) {
            if let Some((prev_t, prev)) = self.last_special {
                let eligible = self.variant.good_time_rule == GoodTimeRule::Strict || !self.pair.is_cross_move(prev);
                if eligible && self.queue.len() == 1 && prev.card != s.card {
                    self.last_good = LastGoodTime::At(prev_t);
                    self.good_count += 1;
                }
            }
            self.last_special = Some((self.t, s));
        }
        self.queue.step_mut(s, self.pair, self.variant.queue_membership);
    }

    pub fn last_good_time(&self) -> LastGoodTime {
        self.last_good
    }

    pub fn good_count(&self) -> usize {
        self.good_count
    }

    pub fn queue(&self) -> &QueueState {
        &self.queue
    }

    pub fn time(&self) -> usize {
        self.t
    }
}

/// `θP`: exchange `i` and `j` in every move strictly before the last good
/// time, or in every move when there is none.
pub fn theta(path: &ShufflePath, pair: SpecialPair, v: CouplingVariant, n: usize) -> ShufflePath {
    let cutoff = match last_good_time(path, pair, v, n) {
        LastGoodTime::At(t) => t - 1,
        LastGoodTime::Never => path.len(),
    };
    path.moves()
        .iter()
        .enumerate()
        .map(|(idx, &s)| if idx < cutoff { s.transpose_relabel(pair.i, pair.j) } else { s })
        .collect::<Vec<_>>()
        .into()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoupledOutcome {
    #[serde(rename = "T")]
    pub last_good_time: LastGoodTime,
    pub coalesced: bool,
    pub good_times: Vec<usize>,
    pub x_final: Deck,
    pub x_prime_final: Deck,
}

impl CoupledOutcome {
    /// Time-`T` move, when `T` is finite.
    pub fn move_at_t(&self, path: &ShufflePath) -> Option<Shuffle> {
        self.last_good_time.finite().map(|t| path.at(t))
    }
}

/// Runs `x` under `path` and `(i,j)x` under `θ(path)`.
pub fn run_coupled(x: &Deck, pair: SpecialPair, path: &ShufflePath, v: CouplingVariant) -> Result<CoupledOutcome> {
    let n = x.n();
    pair.check_for(n)?;
    if !path.is_valid_for(n) {
        return usage(format!("path contains moves invalid for n = {n}"));
    }
    let goods = good_times(path, pair, v, n);
    let cutoff = goods.last().map_or(path.len(), |&t| t - 1);

    let mut x_run = x.clone();
    let mut x_prime = x.swap_cards(pair.i, pair.j)?;
    for (idx, &s) in path.moves().iter().enumerate() {
        x_run.apply_mut(s)?;
        let s_prime = if idx < cutoff { s.transpose_relabel(pair.i, pair.j) } else { s };
        x_prime.apply_mut(s_prime)?;
    }
    Ok(CoupledOutcome {
        last_good_time: goods.last().map_or(LastGoodTime::Never, |&t| LastGoodTime::At(t)),
        coalesced: x_run == x_prime,
        good_times: goods,
        x_final: x_run,
        x_prime_final: x_prime,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedSpec;
    use proptest::prelude::*;

    const PAIR: SpecialPair = SpecialPair { i: 1, j: 2 };

    fn path(s: &str) -> ShufflePath {
        s.parse().unwrap()
    }

    fn q(n: usize, cards: &[Card]) -> QueueState {
        QueueState::from_cards(n, cards)
    }

    #[test]
    fn queue_step_examples() {
        let v = CouplingVariant::default();
        assert_eq!(queue_step(&q(5, &[2]), Shuffle::new(3, 2), PAIR, v), q(5, &[2, 3]));
        assert_eq!(queue_step(&q(5, &[2, 3]), Shuffle::new(1, 5), PAIR, v), q(5, &[2]));
        assert_eq!(queue_step(&q(5, &[2, 3]), Shuffle::new(3, 3), PAIR, v), q(5, &[2]));
        let lit = v.with_membership(QueueMembership::Literal);
        assert_eq!(queue_step(&q(5, &[2, 3]), Shuffle::new(3, 3), PAIR, lit), q(5, &[2, 3]));
    }

    #[test]
    fn queue_trajectory_examples() {
        let v = CouplingVariant::default();
        assert_eq!(queue_trajectory(&path("3>3"), PAIR, v, 4), vec![q(4, &[]), q(4, &[])]);
        assert_eq!(
            queue_trajectory(&path("1>1;1>4;2>3"), PAIR, v, 4),
            vec![q(4, &[]), q(4, &[2]), q(4, &[2]), q(4, &[1])]
        );
        assert_eq!(
            queue_trajectory(&path("1>3;4>2;4>4"), PAIR, v, 4),
            vec![q(4, &[]), q(4, &[2]), q(4, &[2, 4]), q(4, &[2])]
        );
    }

    #[test]
    fn good_time_examples() {
        let v = CouplingVariant::default();
        assert_eq!(good_times(&path("1>3;2>4"), PAIR, v, 4), vec![1]);
        assert_eq!(good_times(&path("1>1;1>4;2>3"), PAIR, v, 4), vec![2]);
        assert_eq!(good_times(&path("3>3"), PAIR, v, 4), Vec::<usize>::new());

        assert_eq!(last_good_time(&path("1>3;2>4"), PAIR, v, 4), LastGoodTime::At(1));
        assert_eq!(last_good_time(&path("3>3"), PAIR, v, 4), LastGoodTime::Never);
        assert_eq!(last_good_time(&path("1>1;1>4;2>3"), PAIR, v, 4), LastGoodTime::At(2));
    }

    #[test]
    fn cross_move_only_counts_under_strict() {
        let p = path("1>2;2>3;3>3");
        assert_eq!(good_times(&p, PAIR, CouplingVariant::STRICT, 4), vec![1]);
        assert!(good_times(&p, PAIR, CouplingVariant::AMENDED, 4).is_empty());
    }

    #[test]
    fn theta_examples() {
        let v = CouplingVariant::default();
        assert_eq!(theta(&path("1>1;1>4;2>3"), PAIR, v, 4), path("2>2;1>4;2>3"));
        assert_eq!(theta(&path("1>3;2>4"), PAIR, v, 4), path("1>3;2>4"));
        assert_eq!(theta(&path("1>3"), PAIR, v, 4), path("2>3"));
    }

    #[test]
    fn run_coupled_examples() {
        let x: Deck = "1,3,4,2".parse().unwrap();
        let out = run_coupled(&x, PAIR, &path("1>1;1>4;2>3"), CouplingVariant::AMENDED).unwrap();
        assert_eq!(out.last_good_time, LastGoodTime::At(2));
        assert_eq!(out.x_final, "3,2,4,1".parse().unwrap());
        assert_eq!(out.x_prime_final, "3,2,4,1".parse().unwrap());
        assert!(out.coalesced);

        // T = 1 < k under the strict rule, yet the decks differ.
        let p = path("1>2;2>3;3>3");
        let out = run_coupled(&x, PAIR, &p, CouplingVariant::STRICT).unwrap();
        assert_eq!(out.last_good_time, LastGoodTime::At(1));
        assert_eq!(out.x_final, "3,2,4,1".parse().unwrap());
        assert_eq!(out.x_prime_final, "3,1,2,4".parse().unwrap());
        assert!(!out.coalesced);
        assert_eq!(out.move_at_t(&p), Some(Shuffle::new(1, 2)));

        let out = run_coupled(&"1,2".parse().unwrap(), PAIR, &path("2>2"), CouplingVariant::default()).unwrap();
        assert_eq!(out.last_good_time, LastGoodTime::Never);
        assert!(!out.coalesced);
    }

    #[test]
    fn run_coupled_rejects_bad_inputs() {
        let x = Deck::identity(3);
        assert!(run_coupled(&x, SpecialPair { i: 1, j: 4 }, &path("1>1"), CouplingVariant::default()).is_err());
        assert!(run_coupled(&x, PAIR, &path("1>5"), CouplingVariant::default()).is_err());
        assert!(SpecialPair::new(2, 2).is_err());
    }

    #[test]
    fn outcome_json_shape() {
        let out = run_coupled(&"1,2".parse().unwrap(), PAIR, &path("2>2"), CouplingVariant::default()).unwrap();
        let v = serde_json::to_value(&out).unwrap();
        assert_eq!(v["T"], "inf");
        assert_eq!(v["coalesced"], false);
        assert_eq!(v["x_final"], "2,1");
        assert_eq!(v["x_prime_final"], "1,2");
        assert!(v["good_times"].as_array().unwrap().is_empty());
        let back: CoupledOutcome = serde_json::from_value(v).unwrap();
        assert_eq!(back, out);
    }

    fn variants() -> [CouplingVariant; 4] {
        [
            CouplingVariant::STRICT,
            CouplingVariant::AMENDED,
            CouplingVariant::STRICT.with_membership(QueueMembership::Literal),
            CouplingVariant::AMENDED.with_membership(QueueMembership::Literal),
        ]
    }

    #[test]
    fn theta_is_bijection_on_all_short_paths_n3() {
        let n = 3;
        for v in variants() {
            for k in 0..=3u32 {
                let total = 9usize.pow(k);
                let mut hit = vec![false; total];
                for code in 0..total {
                    let p = decode_path(code, n, k as usize);
                    let img = theta(&p, PAIR, v, n);
                    let idx = encode_path(&img, n);
                    assert!(!hit[idx], "collision at k = {k}");
                    hit[idx] = true;
                }
                assert!(hit.iter().all(|&h| h));
            }
        }
    }

    fn decode_path(mut code: usize, n: usize, k: usize) -> ShufflePath {
        let mut moves = Vec::with_capacity(k);
        for _ in 0..k {
            let cell = code % (n * n);
            code /= n * n;
            moves.push(Shuffle::new((cell / n) as Card + 1, (cell % n) as Card + 1));
        }
        moves.into()
    }

    fn encode_path(p: &ShufflePath, n: usize) -> usize {
        p.moves().iter().rev().fold(0, |acc, s| acc * n * n + (s.card as usize - 1) * n + (s.anchor as usize - 1))
    }

    proptest! {
        #[test]
        fn theta_properties(seed in any::<u64>(), n in 3usize..=10, k in 0usize..=60, vi in 0usize..4) {
            let v = variants()[vi];
            let p = ShufflePath::random(&mut SeedSpec::new(seed).stream(0), n, k);
            let img = theta(&p, PAIR, v, n);
            prop_assert_eq!(&theta(&img, PAIR, v, n), &p);
            let t = last_good_time(&p, PAIR, v, n);
            prop_assert_eq!(last_good_time(&img, PAIR, v, n), t);

            let special = |q: &ShufflePath| (1..=k).filter(|&s| PAIR.contains(q.at(s).card)).collect::<Vec<_>>();
            prop_assert_eq!(special(&p), special(&img));

            let qa = queue_trajectory(&p, PAIR, v, n);
            let qb = queue_trajectory(&img, PAIR, v, n);
            let split = t.finite().unwrap_or(k + 1);
            for s in 0..=k {
                prop_assert!(qa[s].is_consistent(PAIR));
                if s >= split {
                    prop_assert_eq!(&qa[s], &qb[s]);
                } else {
                    prop_assert_eq!(&qa[s].relabeled(PAIR), &qb[s]);
                }
            }

            let mut scan = GoodTimeScanner::new(n, PAIR, v);
            p.moves().iter().for_each(|&s| scan.push(s));
            prop_assert_eq!(scan.last_good_time(), t);
            prop_assert_eq!(scan.good_count(), good_times(&p, PAIR, v, n).len());
        }

        #[test]
        fn amended_coalesces_when_t_finite(seed in any::<u64>(), n in 3usize..=9, k in 1usize..=80) {
            let mut rng = SeedSpec::new(seed).stream(1);
            let p = ShufflePath::random(&mut rng, n, k);
            let x = Deck::unrank(seed % crate::deck::factorial(n), n).unwrap();
            for v in [CouplingVariant::AMENDED, CouplingVariant::AMENDED.with_membership(QueueMembership::Literal)] {
                let out = run_coupled(&x, PAIR, &p, v).unwrap();
                if out.last_good_time.is_finite() {
                    prop_assert!(out.coalesced, "path {} variant {:?}", p, v);
                }
            }
        }
    }
}
