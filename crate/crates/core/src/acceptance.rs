//! End-to-end verification criteria.
//!
//! Each criterion is a function returning a [`CriterionResult`]. The same
//! functions back the `verify` subcommand and the `acceptance` test target.
//! Quick mode divides every sample count by ten.

use std::time::{Duration, Instant};

use serde::Serialize;

use crate::chain::{
    analytic_tv_bound, build_c, build_ktilde, dominance_check, mixing_bound, scaled_generator,
    second_largest_eigenvalue, verify_limit, ytilde_series, BoundConstants, CROSS_CHECK_TOL,
};
use crate::coupling::QueueMembership;
use crate::coupling::{last_good_time, run_coupled, theta, CouplingVariant, SpecialPair};
use crate::deck::{factorial, Deck, Shuffle, ShufflePath};
use crate::error::Result;
use crate::exact::{adjacent_series, ShuffleKernel};
use crate::montecarlo::{estimate_noncoalescence, estimate_t_tail, par_tally, queue_transition_stats, DEFAULT_PAIR};
use crate::rng::SeedSpec;
use crate::stats::compensated_sum;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Profile {
    pub quick: bool,
    pub seed: u64,
    pub constants: BoundConstants,
}

impl Default for Profile {
    fn default() -> Self {
        Profile { quick: false, seed: 0, constants: BoundConstants::default() }
    }
}

impl Profile {
    pub fn quick() -> Self {
        Profile { quick: true, ..Profile::default() }
    }

    fn samples(&self, full: u64) -> u64 {
        if self.quick {
            full / 10
        } else {
            full
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CriterionResult {
    pub id: u32,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed_secs: f64,
    pub time_limit_secs: f64,
}

impl CriterionResult {
    pub fn line(&self) -> String {
        format!(
            "[{}] C{:02} {} ({:.2}s): {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.elapsed_secs,
            self.detail
        )
    }
}

fn timed(
    id: u32,
    name: &'static str,
    limit: Duration,
    body: impl FnOnce() -> Result<(bool, String)>,
) -> CriterionResult {
    let start = Instant::now();
    let outcome = body();
    let elapsed = start.elapsed();
    let (ok, detail) = match outcome {
        Ok(pair) => pair,
        Err(e) => (false, format!("error: {e}")),
    };
    let in_time = elapsed <= limit;
    let detail = if in_time { detail } else { format!("{detail}; exceeded time limit {:?}", limit) };
    CriterionResult {
        id,
        name,
        passed: ok && in_time,
        detail,
        elapsed_secs: elapsed.as_secs_f64(),
        time_limit_secs: limit.as_secs_f64(),
    }
}

fn sci(xs: &[f64]) -> Vec<String> {
    xs.iter().map(|x| format!("{x:.3e}")).collect()
}

const SECOND: Duration = Duration::from_secs(1);
const MINUTE: Duration = Duration::from_secs(60);

pub fn c01_eigenvalue(p: &Profile) -> CriterionResult {
    timed(1, "eigenvalue reproduction", SECOND, || {
        let r = second_largest_eigenvalue(&build_c())?;
        let ok = r.lambda < -p.constants.a && r.agreement <= CROSS_CHECK_TOL;
        Ok((
            ok,
            format!(
                "lambda(C) = {:.12} (poly {:.12}, |diff| {:.1e}, {} iters)",
                r.lambda, r.cross_check, r.agreement, r.iterations
            ),
        ))
    })
}

pub fn c02_constants(p: &Profile) -> CriterionResult {
    timed(2, "1/|lambda(C)| < c_mix consistency", SECOND, || {
        let c = &p.constants;
        let lambda = second_largest_eigenvalue(&build_c())?.lambda;
        let inv = 1.0 / lambda.abs();
        let ok = inv < c.c_mix && c.c_mix * c.a > 1.0 && lambda < -c.a;
        Ok((ok, format!("1/|lambda| = {inv:.6} vs c_mix {}; c_mix*a = {:.6}; a = {}", c.c_mix, c.c_mix * c.a, c.a)))
    })
}

pub fn c03_generator_convergence(_p: &Profile) -> CriterionResult {
    timed(3, "generator convergence", SECOND, || {
        let limit = second_largest_eigenvalue(&build_c())?.lambda;
        let ns = [100usize, 1000, 10_000];
        let mut errs = Vec::new();
        let mut gaps = Vec::new();
        for &n in &ns {
            errs.push(verify_limit(n)?);
            gaps.push((second_largest_eigenvalue(&scaled_generator(n)?)?.lambda - limit).abs());
        }
        let bounded = errs.iter().zip(&ns).all(|(e, &n)| *e <= 100.0 / n as f64);
        let decreasing = errs.windows(2).all(|w| w[1] < w[0]) && gaps.windows(2).all(|w| w[1] < w[0]);
        Ok((bounded && decreasing, format!("max-entry errors {:?}; eigen gaps {:?}", sci(&errs), sci(&gaps))))
    })
}

pub fn c04_exact_tv(_p: &Profile) -> CriterionResult {
    timed(4, "exact-TV oracle", MINUTE, || {
        let d2 = ShuffleKernel::new(2)?.distance_to_uniform_series(&Deck::identity(2), 1)?[1];
        let k3 = ShuffleKernel::new(3)?;
        let d3 = k3.distance_to_uniform_series(&Deck::identity(3), 1)?[1];
        let adj3 = k3.adjacent_series(1, 2, 1)?[1];
        let k5 = ShuffleKernel::new(5)?;
        let d5 = k5.distance_to_uniform_series(&Deck::identity(5), 100)?;
        let monotone = d5.windows(2).all(|w| w[1] <= w[0] + 1e-12);

        let k4 = ShuffleKernel::new(4)?;
        let base = k4.distance_to_uniform_series(&Deck::identity(4), 20)?;
        let mut rng = SeedSpec::new(4).stream(0);
        let mut invariance = 0.0f64;
        for _ in 0..5 {
            use rand::Rng;
            let start = Deck::unrank(rng.random_range(0..factorial(4)), 4)?;
            let other = k4.distance_to_uniform_series(&start, 20)?;
            invariance = base.iter().zip(&other).map(|(a, b)| (a - b).abs()).fold(invariance, f64::max);
        }
        let ok = d2.abs() <= 1e-12
            && (d3 - 5.0 / 18.0).abs() <= 1e-12
            && (adj3 - 1.0 / 3.0).abs() <= 1e-12
            && monotone
            && invariance <= 1e-12;
        Ok((ok, format!("d2(1) = {d2:.3e}, d3(1) = {d3:.15}, adj3(1) = {adj3:.15}, d5 monotone {monotone}, start-state spread {invariance:.1e}")))
    })
}

pub fn c05_coupling_validity(p: &Profile) -> CriterionResult {
    timed(5, "coupling validity", 5 * MINUTE, || {
        let exact = adjacent_series(5, 20)?;
        let samples = p.samples(100_000);
        let mut ok = true;
        let mut parts = Vec::new();
        for t in [5usize, 10, 20] {
            let e = estimate_noncoalescence(5, t, samples, p.seed, CouplingVariant::default())?;
            let upper = e.overall.point + 3.0 * e.overall.std_err();
            ok &= upper >= exact[t];
            parts.push(format!("t={t}: {:.5}+3se={upper:.5} vs tv {:.5}", e.overall.point, exact[t]));
        }
        Ok((ok, parts.join("; ")))
    })
}

pub fn c06_bijection(p: &Profile) -> CriterionResult {
    timed(6, "bijection suite", 5 * MINUTE, || {
        let samples = p.samples(10_000);
        let mut bad = 0u64;
        let mut checked = 0u64;
        for (vi, v) in [CouplingVariant::STRICT, CouplingVariant::AMENDED].into_iter().enumerate() {
            for n in [4usize, 8, 16] {
                let k = 5 * n;
                let spec = SeedSpec::new(p.seed ^ ((vi as u64) << 32) ^ n as u64);
                let [failures] = par_tally(samples, spec, |rng| {
                    let path = ShufflePath::random(rng, n, k);
                    let img = theta(&path, DEFAULT_PAIR, v, n);
                    let ok = theta(&img, DEFAULT_PAIR, v, n) == path
                        && last_good_time(&img, DEFAULT_PAIR, v, n) == last_good_time(&path, DEFAULT_PAIR, v, n);
                    [(!ok) as u64]
                });
                bad += failures;
                checked += samples;
            }
        }
        let mut exhaustive_ok = true;
        for v in [CouplingVariant::STRICT, CouplingVariant::AMENDED] {
            for k in 0..=3usize {
                exhaustive_ok &= theta_is_bijection_n3(k, v, DEFAULT_PAIR);
            }
        }
        Ok((
            bad == 0 && exhaustive_ok,
            format!("{bad} failures in {checked} random paths; exhaustive n=3,k<=3 bijective: {exhaustive_ok}"),
        ))
    })
}

fn theta_is_bijection_n3(k: usize, v: CouplingVariant, pair: SpecialPair) -> bool {
    let n = 3usize;
    let cells = n * n;
    let total = cells.pow(k as u32);
    let mut hit = vec![false; total];
    for code in 0..total {
        let mut c = code;
        let moves: Vec<Shuffle> = (0..k)
            .map(|_| {
                let cell = c % cells;
                c /= cells;
                Shuffle::new((cell / n) as u32 + 1, (cell % n) as u32 + 1)
            })
            .collect();
        let img = theta(&ShufflePath::new(moves), pair, v, n);
        let idx = img
            .moves()
            .iter()
            .rev()
            .fold(0usize, |acc, s| acc * cells + (s.card as usize - 1) * n + (s.anchor as usize - 1));
        if hit[idx] {
            return false;
        }
        hit[idx] = true;
    }
    hit.into_iter().all(|h| h)
}

pub fn c07_coalescence(p: &Profile) -> CriterionResult {
    timed(7, "coalescence after a good time", 10 * MINUTE, || {
        let samples = p.samples(100_000);
        let mut parts = Vec::new();
        let mut ok = true;
        for n in [4usize, 8] {
            let e = estimate_noncoalescence(n, 8 * n, samples, p.seed, CouplingVariant::AMENDED)?;
            ok &= e.failures_given_t_finite == 0;
            parts.push(format!("amended n={n}: {} failures among {} with T<k", e.failures_given_t_finite, e.t_finite));
        }
        let strict = estimate_noncoalescence(4, 12, samples, p.seed, CouplingVariant::STRICT)?;
        ok &= strict.failures_given_t_finite >= 1;
        let rate = strict.conditional_given_t_lt_k.map_or(f64::NAN, |e| e.point);
        parts.push(format!(
            "strict n=4,k=12: {} failures among {} with T<k (rate {rate:.5}, {} with cross move at T)",
            strict.failures_given_t_finite, strict.t_finite, strict.failures_with_cross_move_at_t
        ));
        // The hand-traced witness.
        let x: Deck = "1,3,4,2".parse()?;
        let path: ShufflePath = "1>2;2>3;3>3".parse()?;
        let w = run_coupled(&x, DEFAULT_PAIR, &path, CouplingVariant::STRICT)?;
        let witness = w.last_good_time.is_finite() && !w.coalesced;
        ok &= witness;
        parts.push(format!("witness 1,3,4,2 / 1>2;2>3;3>3 reproduces: {witness}"));
        Ok((ok, parts.join("; ")))
    })
}

pub fn c08_queue_rates(p: &Profile) -> CriterionResult {
    timed(8, "queue-rate identification", MINUTE, || {
        let n = 10;
        let steps = p.samples(1_000_000);
        let stats = queue_transition_stats(n, steps, p.seed, QueueMembership::SelfExclusive)?;
        let mut ok = true;
        let mut worst: f64 = 0.0;
        for l in 1..=5 {
            let Some(row) = stats.rows.iter().find(|r| r.l == l) else {
                ok = false;
                continue;
            };
            worst = worst.max(row.z_q.abs()).max(row.z_p.abs());
        }
        ok &= worst < 4.0;
        let r2 = stats.rows.iter().find(|r| r.l == 2);
        let literal = (3.0 * n as f64 - 2.0) / (n * n) as f64;
        let sep = r2.map_or(0.0, |r| (r.q_hat - literal).abs() / r.se_q());
        ok &= sep > 10.0;
        Ok((
            ok,
            format!(
                "max |z| over l<=5 = {worst:.2}; q_hat(2) = {:.5} ({} visits) is {sep:.2} SE from the literal value {literal}",
                r2.map_or(f64::NAN, |r| r.q_hat),
                r2.map_or(0, |r| r.visits)
            ),
        ))
    })
}

pub fn c09_tail(p: &Profile) -> CriterionResult {
    timed(9, "coupling-time tail vs truncated chain", 5 * MINUTE, || {
        let (n, k) = (50usize, 392usize);
        let samples = p.samples(100_000);
        let e = estimate_t_tail(n, k, samples, p.seed, CouplingVariant::default())?;
        let lambda = second_largest_eigenvalue(&build_ktilde(n)?)?.lambda;
        let chain_bound = p.constants.cs_factor * lambda.powi(k as i32);
        let asymptotic = crate::chain::survival_bound(n, k, &p.constants);
        let se = e.estimate.std_err();
        let ok = e.estimate.point <= chain_bound + 3.0 * se;
        Ok((
            ok,
            format!(
                "P(T>=k) = {:.6} (se {se:.2e}); sqrt8*lambda^k = {chain_bound:.6}; ratio to e^(-ak/n) = {asymptotic:.6} is {:.3}",
                e.estimate.point,
                e.estimate.point / asymptotic
            ),
        ))
    })
}

pub fn c10_dominance(p: &Profile) -> CriterionResult {
    timed(10, "stochastic dominance", 2 * MINUTE, || {
        let r = dominance_check(20, 200, p.samples(100_000), p.seed)?;
        let series = ytilde_series(20, 10_000)?;
        let drift = series.iter().map(|d| (compensated_sum(d.iter().copied()) - 1.0).abs()).fold(0.0, f64::max);
        let ok = r.within(3.0) && r.absorbed_mass_ok && drift <= 1e-12;
        Ok((
            ok,
            format!(
                "worst violation {:.2e} ({:.2} SE) at t={}, m={}; mass drift {drift:.1e}",
                r.worst_violation, r.worst_z, r.worst_t, r.worst_m
            ),
        ))
    })
}

pub fn c11_bound_calculator(p: &Profile) -> CriterionResult {
    timed(11, "bound calculator", SECOND, || {
        let c = &p.constants;
        let t = mixing_bound(52, 0.25, c)?;
        let value = analytic_tv_bound(52, t, c);
        let closed = 51.0 * (-c.a * t as f64 / 52.0).exp();
        let ok = t == 424 && (value - closed).abs() <= 1e-9 && value <= 0.25;
        Ok((ok, format!("t* = {t}, (n-1)e^(-at/n) = {value:.10}")))
    })
}

/// Every criterion, in order.
pub fn run_all(p: &Profile) -> Vec<CriterionResult> {
    type Criterion = fn(&Profile) -> CriterionResult;
    const ALL: [Criterion; 11] = [
        c01_eigenvalue,
        c02_constants,
        c03_generator_convergence,
        c04_exact_tv,
        c05_coupling_validity,
        c06_bijection,
        c07_coalescence,
        c08_queue_rates,
        c09_tail,
        c10_dominance,
        c11_bound_calculator,
    ];
    ALL.iter().map(|c| c(p)).collect()
}
