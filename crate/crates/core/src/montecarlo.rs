//! Seeded batch estimators.
//!
//! Trajectory `idx` always draws from `SeedSpec::stream(idx)`, and results
//! are reduced as integer counts, so any thread count or schedule gives the
//! same numbers.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chain::{p_rate, q_rate, reset_rate, BoundConstants};
use crate::coupling::{run_coupled, CouplingVariant, GoodTimeScanner, QueueMembership, QueueState, SpecialPair};
use crate::deck::{Deck, Shuffle, ShufflePath};
use crate::error::{usage, Result};
use crate::rng::{SeedSpec, StreamRng};
use crate::stats::EstimateWithCI;

/// Pair used by every estimator: cards 1 and 2, started from the identity.
pub const DEFAULT_PAIR: SpecialPair = SpecialPair { i: 1, j: 2 };

/// Runs `f` once per trajectory and adds up its counters.
pub fn par_tally<const K: usize, F>(samples: u64, seed: SeedSpec, f: F) -> [u64; K]
where
    F: Fn(&mut StreamRng) -> [u64; K] + Sync,
{
    (0..samples).into_par_iter().map(|idx| f(&mut seed.stream(idx))).reduce(
        || [0u64; K],
        |mut a, b| {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
            a
        },
    )
}

fn check_n(n: usize) -> Result<()> {
    if n < 3 {
        return usage(format!("estimators need n >= 3, got {n}"));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailEstimate {
    pub n: usize,
    pub k: usize,
    pub samples: u64,
    pub seed: u64,
    pub variant: CouplingVariant,
    /// `P(T ≥ k)`, counting `T = ∞`.
    pub estimate: EstimateWithCI,
}

/// `P(T ≥ k)` from the queue process alone.
pub fn estimate_t_tail(n: usize, k: usize, samples: u64, seed: u64, variant: CouplingVariant) -> Result<TailEstimate> {
    check_n(n)?;
    if samples == 0 {
        return usage("samples must be positive");
    }
    let [hits] = par_tally(samples, SeedSpec::new(seed), |rng| {
        let mut scan = GoodTimeScanner::new(n, DEFAULT_PAIR, variant);
        for _ in 0..k {
            scan.push(Shuffle::random(rng, n));
        }
        [scan.last_good_time().at_least(k) as u64]
    });
    Ok(TailEstimate {
        n,
        k,
        samples,
        seed,
        variant,
        estimate: EstimateWithCI::wilson(hits, samples).expect("samples > 0"),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoncoalescenceEstimate {
    pub n: usize,
    pub k: usize,
    pub samples: u64,
    pub seed: u64,
    pub variant: CouplingVariant,
    /// `P(x_k ≠ x'_k)`.
    pub overall: EstimateWithCI,
    /// `P(x_k ≠ x'_k | T < k)`; `None` when no trajectory had `T < k`.
    pub conditional_given_t_lt_k: Option<EstimateWithCI>,
    pub t_finite: u64,
    pub failures_given_t_finite: u64,
    /// Failures with `T < k` whose time-`T` move was `M(i,j)` or `M(j,i)`.
    pub failures_with_cross_move_at_t: u64,
}

/// Full deck runs of the coupling from the identity and its `(1,2)` swap.
pub fn estimate_noncoalescence(
    n: usize,
    k: usize,
    samples: u64,
    seed: u64,
    variant: CouplingVariant,
) -> Result<NoncoalescenceEstimate> {
    check_n(n)?;
    if samples == 0 {
        return usage("samples must be positive");
    }
    let x = Deck::identity(n);
    let [failed, finite, failed_finite, failed_cross] = par_tally(samples, SeedSpec::new(seed), |rng| {
        let path = ShufflePath::random(rng, n, k);
        let out = run_coupled(&x, DEFAULT_PAIR, &path, variant).expect("valid inputs");
        let fin = out.last_good_time.is_finite();
        let fail = !out.coalesced;
        let cross = out.move_at_t(&path).is_some_and(|s| DEFAULT_PAIR.is_cross_move(s));
        [fail as u64, fin as u64, (fail && fin) as u64, (fail && fin && cross) as u64]
    });
    Ok(NoncoalescenceEstimate {
        n,
        k,
        samples,
        seed,
        variant,
        overall: EstimateWithCI::wilson(failed, samples).expect("samples > 0"),
        conditional_given_t_lt_k: EstimateWithCI::wilson(failed_finite, finite),
        t_finite: finite,
        failures_given_t_finite: failed_finite,
        failures_with_cross_move_at_t: failed_cross,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QueueRateRow {
    pub l: usize,
    pub visits: u64,
    pub q_hat: f64,
    pub q: f64,
    pub p_hat: f64,
    pub p: f64,
    /// Resets to size 1 by a special move; tracked separately only for `l ≥ 3`.
    pub reset_hat: Option<f64>,
    pub reset: Option<f64>,
    #[serde(serialize_with = "crate::report::ser_f64")]
    pub z_q: f64,
    #[serde(serialize_with = "crate::report::ser_f64")]
    pub z_p: f64,
    #[serde(serialize_with = "crate::report::ser_opt_f64")]
    pub z_reset: Option<f64>,
}

impl QueueRateRow {
    /// Plug-in standard error of `q_hat`.
    pub fn se_q(&self) -> f64 {
        binomial_se(self.q_hat, self.visits)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QueueStats {
    pub n: usize,
    pub steps: u64,
    pub seed: u64,
    pub membership: QueueMembership,
    pub rows: Vec<QueueRateRow>,
}

fn binomial_se(p: f64, visits: u64) -> f64 {
    (p * (1.0 - p) / visits as f64).sqrt()
}

fn z_score(hat: f64, want: f64, visits: u64) -> f64 {
    let se = binomial_se(want, visits);
    if se == 0.0 {
        if hat == want {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (hat - want) / se
    }
}

/// Tallies queue-size transitions along one long uniform shuffle stream.
///
/// For `l = 1` a "down" event is the lone queued card being moved (the
/// queue then restarts as the other singleton). For `l = 2` both ways back to
/// size 1 count as down. For `l ≥ 3`, special moves are tallied as resets.
pub fn queue_transition_stats(n: usize, steps: u64, seed: u64, membership: QueueMembership) -> Result<QueueStats> {
    if n < 9 {
        return usage(format!("queue statistics need n >= 9, got {n}"));
    }
    let pair = DEFAULT_PAIR;
    let mut rng = SeedSpec::new(seed).stream(0);
    let mut queue = QueueState::empty(n);
    // [visits, down, up, reset] per size.
    let mut tally = vec![[0u64; 4]; n];
    for _ in 0..steps {
        let s = Shuffle::random(&mut rng, n);
        let before = queue.len();
        let lone_moved = before == 1 && queue.contains(s.card);
        queue.step_mut(s, pair, membership);
        if before == 0 {
            continue;
        }
        let after = queue.len();
        let row = &mut tally[before];
        row[0] += 1;
        if before == 1 {
            if lone_moved {
                row[1] += 1;
            } else if after == 2 {
                row[2] += 1;
            }
        } else if before >= 3 && pair.contains(s.card) {
            row[3] += 1;
        } else if after + 1 == before {
            row[1] += 1;
        } else if after == before + 1 {
            row[2] += 1;
        }
    }
    let rows = (1..n)
        .filter(|&l| tally[l][0] > 0)
        .map(|l| {
            let [visits, down, up, reset] = tally[l];
            let v = visits as f64;
            let (q_hat, p_hat) = (down as f64 / v, up as f64 / v);
            let q = q_rate(l, n).expect("size in range");
            let p = p_rate(l, n).expect("size in range");
            let (reset_hat, reset_p) =
                if l >= 3 { (Some(reset as f64 / v), Some(reset_rate(n))) } else { (None, None) };
            QueueRateRow {
                l,
                visits,
                q_hat,
                q,
                p_hat,
                p,
                reset_hat,
                reset: reset_p,
                z_q: z_score(q_hat, q, visits),
                z_p: z_score(p_hat, p, visits),
                z_reset: reset_hat.zip(reset_p).map(|(h, w)| z_score(h, w, visits)),
            }
        })
        .collect();
    Ok(QueueStats { n, steps, seed, membership, rows })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub k: usize,
    /// `(n-1) · P̂(x_k ≠ x'_k)`.
    pub empirical: f64,
    /// Standard error of `empirical`.
    pub empirical_se: f64,
    /// `(n-1) e^{-ak/n}`.
    pub analytic: f64,
    pub estimate: EstimateWithCI,
}

/// Path-coupling upper bound on `d(k)` next to the analytic bound.
pub fn coupling_bound_curve(
    n: usize,
    k_list: &[usize],
    samples: u64,
    seed: u64,
    variant: CouplingVariant,
    constants: &BoundConstants,
) -> Result<Vec<CurveRow>> {
    let scale = n as f64 - 1.0;
    k_list
        .iter()
        .map(|&k| {
            let est = estimate_noncoalescence(n, k, samples, seed, variant)?;
            Ok(CurveRow {
                k,
                empirical: scale * est.overall.point,
                empirical_se: scale * est.overall.std_err(),
                analytic: crate::chain::analytic_tv_bound(n, k, constants),
                estimate: est.overall,
            })
        })
        .collect()
}
