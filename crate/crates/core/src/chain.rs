//! Queue-size chains and the spectral bound on the coupling time.
//!
//! `Y` is the queue-size process: it starts at `∞` (no special move yet),
//! jumps to `1` at the first `i`-or-`j` move, and is absorbed at `0` when the
//! card in a singleton queue is moved. `Ỹ` lives on `{0,…,7,∞}` and sends
//! the birth move out of `7` to `∞` instead of `8`. `Ỹ` stochastically
//! dominates `Y`, so the Perron root of its transient block bounds the decay
//! of `P(Y_k > 0)`.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eigen::{largest_real_eigenvalue, power_iteration, DenseMatrix, POWER_MAX_ITER, POWER_TOL};
use crate::error::{usage, Error, Result};
use crate::rng::SeedSpec;
use crate::stats::compensated_sum;

/// Smallest deck size for which every listed transition probability lies in `[0, 1]`.
pub const MIN_CHAIN_N: usize = 9;
/// Number of states of `Ỹ`.
pub const STATES: usize = 9;
/// Index of `∞` in the state order `[0, 1, …, 7, ∞]`.
pub const INF_INDEX: usize = 8;

/// Required agreement between the two eigenvalue routes.
pub const CROSS_CHECK_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundConstants {
    /// Decay rate of the coupling tail, per `n` steps.
    pub a: f64,
    /// Mixing-time constant in front of `n log n`.
    pub c_mix: f64,
    /// Size at which `Ỹ` is truncated.
    pub truncation_level: usize,
    /// Shift used to make the generator block nonnegative.
    pub shift: f64,
    /// Cauchy–Schwarz factor over the eight transient states.
    pub cs_factor: f64,
}

impl Default for BoundConstants {
    fn default() -> Self {
        BoundConstants { a: 0.6526, c_mix: 1.5324, truncation_level: 8, shift: 1.0 / 16.0, cs_factor: 8f64.sqrt() }
    }
}

impl BoundConstants {
    pub fn consistent(&self) -> bool {
        self.c_mix * self.a > 1.0
    }
}

/// State of the untruncated chain `Y`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum YState {
    Size(usize),
    Infinity,
}

impl YState {
    pub const ABSORBED: YState = YState::Size(0);

    /// Projection onto the ordered states of `Ỹ`; sizes `≥ 8` share the top slot with `∞`.
    pub fn truncated(self) -> TruncatedState {
        match self {
            YState::Size(l) if l < INF_INDEX => TruncatedState(l as u8),
            _ => TruncatedState::INFINITY,
        }
    }
}

/// State of `Ỹ`: `0 < 1 < … < 7 < ∞`, stored as an index `0..=8`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TruncatedState(pub u8);

impl TruncatedState {
    pub const INFINITY: TruncatedState = TruncatedState(INF_INDEX as u8);

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn label(self) -> String {
        if self == TruncatedState::INFINITY {
            "inf".into()
        } else {
            self.0.to_string()
        }
    }

    pub fn all() -> impl Iterator<Item = TruncatedState> {
        (0..STATES as u8).map(TruncatedState)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixKind {
    /// Row-stochastic transition matrix.
    Stochastic,
    /// Rate matrix: rows sum to zero, off-diagonals nonnegative.
    Generator,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransitionMatrix {
    pub kind: MatrixKind,
    /// Deck size; `None` for limit objects.
    pub n: Option<usize>,
    pub entries: DenseMatrix,
}

impl TransitionMatrix {
    pub fn new(kind: MatrixKind, n: Option<usize>, entries: DenseMatrix) -> Self {
        TransitionMatrix { kind, n, entries }
    }

    pub fn dim(&self) -> usize {
        self.entries.dim()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| compensated_sum(self.entries.row(i).iter().copied())).collect()
    }

    /// Row sums within `tol` of 1 (stochastic) or 0 (generator), with the
    /// matching sign constraints.
    pub fn is_well_formed(&self, tol: f64) -> bool {
        let target = match self.kind {
            MatrixKind::Stochastic => 1.0,
            MatrixKind::Generator => 0.0,
        };
        let sums_ok = self.row_sums().iter().all(|s| (s - target).abs() <= tol);
        let d = self.dim();
        let signs_ok = (0..d).all(|i| {
            (0..d).all(|j| match self.kind {
                MatrixKind::Stochastic => self.entries[(i, j)] >= 0.0,
                MatrixKind::Generator => i == j || self.entries[(i, j)] >= 0.0,
            })
        });
        sums_ok && signs_ok
    }

    pub fn state_labels(&self) -> Vec<String> {
        if self.dim() == STATES {
            TruncatedState::all().map(TruncatedState::label).collect()
        } else {
            (0..self.dim()).map(|i| i.to_string()).collect()
        }
    }

    /// CSV with a header row of state labels followed by one line per row.
    pub fn to_csv(&self) -> String {
        let mut out = self.state_labels().join(",");
        out.push('\n');
        for i in 0..self.dim() {
            let row: Vec<String> = self.entries.row(i).iter().map(|&x| crate::report::fmt_f64(x)).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "kind": self.kind,
            "n": self.n,
            "states": self.state_labels(),
            "entries": self.entries.rows().iter()
                .map(|r| r.iter().map(|&x| crate::report::round_sig(x)).collect::<Vec<_>>())
                .collect::<Vec<_>>(),
        })
    }
}

fn check_rate_args(l: usize, n: usize) -> Result<()> {
    if n < 3 {
        return usage(format!("queue rates need n >= 3, got {n}"));
    }
    if l < 1 || l >= n {
        return usage(format!("queue size {l} outside 1..={}", n - 1));
    }
    Ok(())
}

/// Probability that a queue of size `l` shrinks by one (for `l = 1`, that
/// the lone queued card is moved).
pub fn q_rate(l: usize, n: usize) -> Result<f64> {
    check_rate_args(l, n)?;
    let nf = n as f64;
    let lf = l as f64;
    Ok(match l {
        1 => 1.0 / nf,
        2 => (3.0 * nf - 1.0) / (nf * nf),
        _ => (lf - 1.0) * (nf - lf + 1.0) / (nf * nf),
    })
}

/// Probability that a queue of size `l` grows by one.
pub fn p_rate(l: usize, n: usize) -> Result<f64> {
    check_rate_args(l, n)?;
    let nf = n as f64;
    let lf = l as f64;
    Ok(match l {
        1 => (nf - 2.0) / (nf * nf),
        2 => (2.0 * nf - 6.0) / (nf * nf),
        _ => lf * (nf - lf - 1.0) / (nf * nf),
    })
}

/// Probability of a reset to size 1 from size `l ≥ 3`.
pub fn reset_rate(n: usize) -> f64 {
    2.0 / n as f64
}

/// One transition of `Y`.
pub fn y_step<R: Rng + ?Sized>(s: YState, rng: &mut R, n: usize) -> YState {
    let nf = n as f64;
    match s {
        YState::Size(0) => YState::ABSORBED,
        YState::Infinity => {
            if rng.random::<f64>() < 2.0 / nf {
                YState::Size(1)
            } else {
                YState::Infinity
            }
        }
        YState::Size(l) => {
            let down = q_rate(l, n).expect("reachable size");
            let up = p_rate(l, n).expect("reachable size");
            let reset = if l >= 3 { reset_rate(n) } else { 0.0 };
            let u = rng.random::<f64>();
            if u < down {
                YState::Size(l - 1)
            } else if u < down + up {
                YState::Size(l + 1)
            } else if u < down + up + reset {
                YState::Size(1)
            } else {
                YState::Size(l)
            }
        }
    }
}

fn check_chain_n(n: usize) -> Result<()> {
    if n < MIN_CHAIN_N {
        return usage(format!("chain construction needs n >= {MIN_CHAIN_N}, got {n}"));
    }
    Ok(())
}

/// Transition matrix of `Ỹ` on `[0, 1, …, 7, ∞]`.
pub fn build_ktilde(n: usize) -> Result<TransitionMatrix> {
    check_chain_n(n)?;
    let mut k = DenseMatrix::zeros(STATES);
    k[(0, 0)] = 1.0;
    let two_over_n = reset_rate(n);
    k[(INF_INDEX, 1)] = two_over_n;
    k[(INF_INDEX, INF_INDEX)] = 1.0 - two_over_n;
    for l in 1..INF_INDEX {
        let up_to = if l + 1 == INF_INDEX { INF_INDEX } else { l + 1 };
        k[(l, l - 1)] += q_rate(l, n)?;
        k[(l, up_to)] += p_rate(l, n)?;
        if l >= 3 {
            k[(l, 1)] += two_over_n;
        }
        let off: f64 = (0..STATES).filter(|&m| m != l).map(|m| k[(l, m)]).sum();
        k[(l, l)] = 1.0 - off;
    }
    Ok(TransitionMatrix::new(MatrixKind::Stochastic, Some(n), k))
}

/// `n (K̃ₙ - I)`.
pub fn scaled_generator(n: usize) -> Result<TransitionMatrix> {
    let k = build_ktilde(n)?;
    let nf = n as f64;
    // Diagonal from the off-diagonal rates so rows sum to zero exactly.
    let mut g = k.entries.map(|i, j, v| if i == j { 0.0 } else { nf * v });
    for i in 0..STATES {
        let off: f64 = (0..STATES).filter(|&j| j != i).map(|j| g[(i, j)]).sum();
        g[(i, i)] = -off;
    }
    Ok(TransitionMatrix::new(MatrixKind::Generator, Some(n), g))
}

/// Entrywise limit of `n (K̃ₙ - I)` as `n → ∞`.
pub fn build_c() -> TransitionMatrix {
    const C: [[f64; STATES]; STATES] = [
        [0., 0., 0., 0., 0., 0., 0., 0., 0.],
        [1., -2., 1., 0., 0., 0., 0., 0., 0.],
        [0., 3., -5., 2., 0., 0., 0., 0., 0.],
        [0., 2., 2., -7., 3., 0., 0., 0., 0.],
        [0., 2., 0., 3., -9., 4., 0., 0., 0.],
        [0., 2., 0., 0., 4., -11., 5., 0., 0.],
        [0., 2., 0., 0., 0., 5., -13., 6., 0.],
        [0., 2., 0., 0., 0., 0., 6., -15., 7.],
        [0., 2., 0., 0., 0., 0., 0., 0., -2.],
    ];
    let rows: Vec<Vec<f64>> = C.iter().map(|r| r.to_vec()).collect();
    TransitionMatrix::new(MatrixKind::Generator, None, DenseMatrix::from_rows(&rows).expect("square"))
}

/// Max entrywise gap between `n (K̃ₙ - I)` and the limit matrix.
pub fn verify_limit(n: usize) -> Result<f64> {
    Ok(scaled_generator(n)?.entries.max_abs_diff(&build_c().entries))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenReport {
    /// Second largest eigenvalue: Perron root of the transient block for a
    /// stochastic input, its rate-scale counterpart for a generator.
    pub lambda: f64,
    pub method: String,
    pub iterations: usize,
    pub residual: f64,
    /// Same quantity from the characteristic polynomial.
    pub cross_check: f64,
    pub agreement: f64,
    /// Shift `h` used to form `I + h·G`.
    pub shift: f64,
}

/// Second largest eigenvalue of an absorbing chain with state 0 absorbing.
///
/// The absorbing row and column are removed; the remaining rate block `G`
/// (`M - I` for a stochastic `M`) is turned into the nonnegative matrix
/// `I + hG`, whose Perron root `r` gives `λ = (r - 1)/h` on the rate scale.
/// Generators use `h = 1/16`; stochastic inputs use `h = 1/max|G_ii|` and
/// report `1 + λ`. The result is cross-checked against the largest real root
/// of `det(xI - G)`.
pub fn second_largest_eigenvalue(m: &TransitionMatrix) -> Result<EigenReport> {
    let d = m.dim();
    if d < 2 {
        return usage("need at least one transient state");
    }
    let first_row_ok = match m.kind {
        MatrixKind::Stochastic => m.entries[(0, 0)] == 1.0 && (1..d).all(|j| m.entries[(0, j)] == 0.0),
        MatrixKind::Generator => (0..d).all(|j| m.entries[(0, j)] == 0.0),
    };
    if !first_row_ok {
        return usage("state 0 is not absorbing");
    }
    let block = m.entries.minor(0);
    let gen = match m.kind {
        MatrixKind::Stochastic => block.map(|i, j, v| if i == j { v - 1.0 } else { v }),
        MatrixKind::Generator => block,
    };
    let max_diag = (0..gen.dim()).map(|i| gen[(i, i)].abs()).fold(0.0, f64::max);
    let shift = match m.kind {
        MatrixKind::Generator => BoundConstants::default().shift,
        MatrixKind::Stochastic if max_diag > 0.0 => 1.0 / max_diag,
        MatrixKind::Stochastic => 1.0,
    };
    let shifted = gen.map(|i, j, v| if i == j { 1.0 + shift * v } else { shift * v });
    if shifted.min_entry() < 0.0 {
        return Err(Error::Numerical(format!(
            "shifted block I + {shift}·G has a negative entry {}; Perron iteration not applicable",
            shifted.min_entry()
        )));
    }
    let power = power_iteration(&shifted, POWER_TOL, POWER_MAX_ITER)?;
    let rate = (power.value - 1.0) / shift;
    let poly = largest_real_eigenvalue(&gen)?;
    let agreement = (rate - poly).abs();
    if agreement > CROSS_CHECK_TOL {
        return Err(Error::Numerical(format!(
            "eigenvalue routes disagree: power {rate} vs characteristic polynomial {poly}"
        )));
    }
    let (lambda, cross_check) = match m.kind {
        MatrixKind::Generator => (rate, poly),
        MatrixKind::Stochastic => (1.0 + rate, 1.0 + poly),
    };
    Ok(EigenReport {
        lambda,
        method: "power+poly".into(),
        iterations: power.iterations,
        residual: power.residual,
        cross_check,
        agreement,
        shift,
    })
}

/// Law of `Ỹ_t` started at `∞`.
pub fn ytilde_distribution(n: usize, t: usize) -> Result<Vec<f64>> {
    let k = build_ktilde(n)?;
    let mut v = vec![0.0; STATES];
    v[INF_INDEX] = 1.0;
    for _ in 0..t {
        v = k.entries.vec_mul(&v);
    }
    Ok(v)
}

/// Laws of `Ỹ_0, …, Ỹ_{t_max}`.
pub fn ytilde_series(n: usize, t_max: usize) -> Result<Vec<Vec<f64>>> {
    let k = build_ktilde(n)?;
    let mut v = vec![0.0; STATES];
    v[INF_INDEX] = 1.0;
    let mut out = Vec::with_capacity(t_max + 1);
    out.push(v.clone());
    for _ in 0..t_max {
        v = k.entries.vec_mul(&v);
        out.push(v.clone());
    }
    Ok(out)
}

/// Euclidean norm of the law restricted to the transient states `1..=7, ∞`.
pub fn restricted_l2(dist: &[f64]) -> f64 {
    dist[1..].iter().map(|p| p * p).sum::<f64>().sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct L2Diagnostic {
    pub n: usize,
    pub k_max: usize,
    pub lambda: f64,
    /// `sup_k ‖restricted law‖₂ / λ^k`.
    pub sup_ratio: f64,
    pub argsup: usize,
    /// Cauchy–Schwarz step `P(Ỹ_k > 0) ≤ √8 ‖·‖₂` held for every `k`.
    pub cauchy_schwarz_holds: bool,
}

/// Measures how far the restricted ℓ² norm of `Ỹ_k` departs from `λ(K̃ₙ)^k`.
pub fn l2_diagnostic(n: usize, k_max: usize) -> Result<L2Diagnostic> {
    let lambda = second_largest_eigenvalue(&build_ktilde(n)?)?.lambda;
    let series = ytilde_series(n, k_max)?;
    let cs = BoundConstants::default().cs_factor;
    let mut sup_ratio = 0.0;
    let mut argsup = 0;
    let mut cs_ok = true;
    for (k, dist) in series.iter().enumerate().skip(1) {
        let l2 = restricted_l2(dist);
        let ratio = l2 / lambda.powi(k as i32);
        if ratio > sup_ratio {
            sup_ratio = ratio;
            argsup = k;
        }
        let alive = compensated_sum(dist[1..].iter().copied());
        cs_ok &= alive <= cs * l2 * (1.0 + 1e-12);
    }
    Ok(L2Diagnostic { n, k_max, lambda, sup_ratio, argsup, cauchy_schwarz_holds: cs_ok })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DominanceReport {
    pub n: usize,
    pub t_max: usize,
    pub samples: u64,
    pub seed: u64,
    pub grid: Vec<usize>,
    /// Largest `P̂(Y_t > m) - P(Ỹ_t > m)` over the grid and `m ∈ 0..=7`.
    pub worst_violation: f64,
    pub worst_t: usize,
    pub worst_m: usize,
    /// Largest violation in standard-error units.
    pub worst_z: f64,
    /// `P̂(Y_t = 0) ≥ P(Ỹ_t = 0) - 3 SE` on the whole grid.
    pub absorbed_mass_ok: bool,
}

impl DominanceReport {
    pub fn within(&self, z: f64) -> bool {
        self.worst_z <= z
    }
}

/// Grid of times probed by [`dominance_check`]: 21 evenly spaced points.
pub fn dominance_grid(t_max: usize) -> Vec<usize> {
    let mut grid: Vec<usize> = (0..=20).map(|s| s * t_max / 20).collect();
    grid.dedup();
    grid
}

/// Monte Carlo tails of `Y_t` against the exact tails of `Ỹ_t`.
pub fn dominance_check(n: usize, t_max: usize, samples: u64, seed: u64) -> Result<DominanceReport> {
    check_chain_n(n)?;
    let grid = dominance_grid(t_max);
    let exact = ytilde_series(n, t_max)?;
    let spec = SeedSpec::new(seed);
    // counts[g][s]: trajectories in truncated state s at grid time g.
    let zero = || vec![[0u64; STATES]; grid.len()];
    let counts = (0..samples)
        .into_par_iter()
        .fold(zero, |mut acc, idx| {
            let mut rng = spec.stream(idx);
            let mut state = YState::Infinity;
            let mut g = 0;
            for t in 0..=t_max {
                if t > 0 {
                    state = y_step(state, &mut rng, n);
                }
                if grid[g] == t {
                    acc[g][state.truncated().index()] += 1;
                    g += 1;
                    if g == grid.len() {
                        break;
                    }
                }
            }
            acc
        })
        .reduce(zero, |mut a, b| {
            for (ra, rb) in a.iter_mut().zip(&b) {
                for (x, y) in ra.iter_mut().zip(rb) {
                    *x += y;
                }
            }
            a
        });

    let nf = samples as f64;
    let mut report = DominanceReport {
        n,
        t_max,
        samples,
        seed,
        grid: grid.clone(),
        worst_violation: f64::NEG_INFINITY,
        worst_t: 0,
        worst_m: 0,
        worst_z: f64::NEG_INFINITY,
        absorbed_mass_ok: true,
    };
    for (g, &t) in grid.iter().enumerate() {
        for m in 0..INF_INDEX {
            let above: u64 = counts[g][m + 1..].iter().sum();
            let p_hat = above as f64 / nf;
            let p_exact = compensated_sum(exact[t][m + 1..].iter().copied());
            let se = std_err_floor(p_hat, nf);
            let violation = p_hat - p_exact;
            let z = violation / se;
            if violation > report.worst_violation {
                report.worst_violation = violation;
                report.worst_t = t;
                report.worst_m = m;
            }
            report.worst_z = report.worst_z.max(z);
            if m == 0 && violation > 3.0 * se {
                report.absorbed_mass_ok = false;
            }
        }
    }
    Ok(report)
}

/// Plug-in standard error, floored at the one-event level so that empty
/// cells do not produce zero.
fn std_err_floor(p: f64, n: f64) -> f64 {
    let p = p.clamp(1.0 / n, 1.0 - 1.0 / n);
    (p * (1.0 - p) / n).sqrt()
}

/// `e^{-a k / n}`.
pub fn survival_bound(n: usize, k: usize, c: &BoundConstants) -> f64 {
    (-c.a * k as f64 / n as f64).exp()
}

/// `(n - 1) e^{-a t / n}`.
pub fn analytic_tv_bound(n: usize, t: usize, c: &BoundConstants) -> f64 {
    (n as f64 - 1.0) * survival_bound(n, t, c)
}

/// Least `t` with `(n - 1) e^{-a t/n} ≤ ε`.
pub fn mixing_bound(n: usize, eps: f64, c: &BoundConstants) -> Result<usize> {
    if n < 2 {
        return usage(format!("mixing bound needs n >= 2, got {n}"));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return usage(format!("epsilon must lie in (0, 1), got {eps}"));
    }
    Ok(first_time_below(n, eps, c))
}

fn first_time_below(n: usize, eps: f64, c: &BoundConstants) -> usize {
    let guess = (n as f64 / c.a) * ((n as f64 - 1.0) / eps).ln();
    let mut t = guess.ceil().max(0.0) as usize;
    // Guard against rounding at the boundary.
    while t > 0 && analytic_tv_bound(n, t - 1, c) <= eps {
        t -= 1;
    }
    while analytic_tv_bound(n, t, c) > eps {
        t += 1;
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    const TOL: f64 = 1e-12;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn rate_examples() {
        assert!(close(q_rate(1, 10).unwrap(), 0.1));
        assert!(close(q_rate(2, 10).unwrap(), 0.29));
        assert!(close(p_rate(2, 10).unwrap(), 0.14));
        assert!(close(q_rate(3, 10).unwrap(), 0.16));
        assert!(close(p_rate(3, 10).unwrap(), 0.18));
        assert!(matches!(q_rate(0, 10), Err(Error::Usage(_))));
        assert!(matches!(p_rate(10, 10), Err(Error::Usage(_))));
    }

    #[test]
    fn ktilde_rows() {
        let k = build_ktilde(10).unwrap();
        let row3 = [0.0, 0.2, 0.16, 0.46, 0.18, 0.0, 0.0, 0.0, 0.0];
        for (j, &want) in row3.iter().enumerate() {
            assert!(close(k.entries[(3, j)], want), "row 3 col {j}");
        }
        assert!(close(k.entries[(INF_INDEX, 1)], 0.2));
        assert!(close(k.entries[(INF_INDEX, INF_INDEX)], 0.8));
        assert!(close(k.entries[(7, 6)], 0.24));
        assert!(close(k.entries[(7, 1)], 0.2));
        assert!(close(k.entries[(7, INF_INDEX)], 0.14));
        assert!(close(k.entries[(7, 7)], 0.42));
        assert!(matches!(build_ktilde(8), Err(Error::Usage(_))));
    }

    #[test]
    fn ktilde_is_stochastic() {
        for n in [9, 10, 13, 50, 100, 1000, 10_000] {
            let k = build_ktilde(n).unwrap();
            assert!(k.is_well_formed(TOL), "n = {n}");
            assert!(scaled_generator(n).unwrap().is_well_formed(TOL), "n = {n}");
        }
        assert!(build_c().is_well_formed(0.0));
    }

    #[test]
    fn scaled_generator_entries() {
        for n in [9, 57, 1000] {
            assert_eq!(scaled_generator(n).unwrap().entries[(1, 0)], 1.0);
        }
        let g = scaled_generator(100).unwrap();
        assert!((g.entries[(2, 1)] - 2.99).abs() < 1e-12);
        assert!((g.entries[(3, 2)] - 1.96).abs() < 1e-12);
    }

    #[test]
    fn c_entries() {
        let c = build_c();
        assert!(c.entries.row(0).iter().all(|&x| x == 0.0));
        assert_eq!(c.entries[(4, 5)], 4.0);
        assert_eq!(c.entries[(7, 7)], -15.0);
        assert_eq!(c.entries[(INF_INDEX, 1)], 2.0);
        assert_eq!(c.entries[(INF_INDEX, INF_INDEX)], -2.0);
    }

    #[test]
    fn limit_error_decays() {
        let e100 = verify_limit(100).unwrap();
        let e1000 = verify_limit(1000).unwrap();
        let e10k = verify_limit(10_000).unwrap();
        // Largest symbolic error term is 92/n on the diagonal of state 7.
        assert!((e100 - 0.92).abs() < 1e-9, "{e100}");
        assert!(e100 <= 1.0);
        assert!(e10k <= 0.01);
        assert!(e1000 < e100 && e10k < e1000);
    }

    #[test]
    fn two_state_eigenvalue() {
        let q = 0.3;
        let m = DenseMatrix::from_rows(&[vec![1.0, 0.0], vec![q, 1.0 - q]]).unwrap();
        let r = second_largest_eigenvalue(&TransitionMatrix::new(MatrixKind::Stochastic, None, m)).unwrap();
        assert!((r.lambda - 0.7).abs() < 1e-12);
    }

    #[test]
    fn rejects_non_absorbing() {
        let m = DenseMatrix::from_rows(&[vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        let r = second_largest_eigenvalue(&TransitionMatrix::new(MatrixKind::Stochastic, None, m));
        assert!(matches!(r, Err(Error::Usage(_))));
    }

    #[test]
    fn limit_eigenvalue_below_threshold() {
        let r = second_largest_eigenvalue(&build_c()).unwrap();
        assert!(r.lambda < -0.6526, "{}", r.lambda);
        assert!(r.agreement <= CROSS_CHECK_TOL);
        assert!(1.0 / r.lambda.abs() < 1.5324);
        // Shifted block I + C_sub/16 is nonnegative with smallest diagonal 1/16.
        let shifted = build_c().entries.minor(0).map(|i, j, v| if i == j { 1.0 + v / 16.0 } else { v / 16.0 });
        assert!(shifted.min_entry() >= 0.0);
        assert_eq!((0..8).map(|i| shifted[(i, i)]).fold(f64::INFINITY, f64::min), 1.0 / 16.0);
    }

    #[test]
    fn ktilde_eigenvalue_routes_agree() {
        for n in [10, 100, 1000] {
            let r = second_largest_eigenvalue(&build_ktilde(n).unwrap()).unwrap();
            assert!(r.agreement <= CROSS_CHECK_TOL, "n = {n}");
            assert!(r.lambda > 0.0 && r.lambda < 1.0);
            // Same number on the rate scale.
            let g = second_largest_eigenvalue(&scaled_generator(n).unwrap()).unwrap();
            assert!((n as f64 * (r.lambda - 1.0) - g.lambda).abs() < 1e-7, "n = {n}");
        }
    }

    #[test]
    fn generator_eigenvalue_converges_to_limit() {
        let limit = second_largest_eigenvalue(&build_c()).unwrap().lambda;
        let gaps: Vec<f64> = [100, 1000, 10_000]
            .iter()
            .map(|&n| (second_largest_eigenvalue(&scaled_generator(n).unwrap()).unwrap().lambda - limit).abs())
            .collect();
        for (gap, n) in gaps.iter().zip([100.0, 1000.0, 10_000.0]) {
            assert!(*gap <= 10.0 / n, "gap {gap} at n = {n}");
        }
        assert!(gaps[1] < gaps[0] && gaps[2] < gaps[1]);
    }

    #[test]
    fn ytilde_examples() {
        let d0 = ytilde_distribution(10, 0).unwrap();
        assert_eq!(d0[INF_INDEX], 1.0);
        let d1 = ytilde_distribution(10, 1).unwrap();
        assert!(close(d1[1], 0.2) && close(d1[INF_INDEX], 0.8));
        for d in ytilde_series(20, 10_000).unwrap().iter().step_by(500) {
            assert!((compensated_sum(d.iter().copied()) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn y_step_from_three_matches_rates() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let draws = 200_000;
        let mut tally = std::collections::HashMap::new();
        for _ in 0..draws {
            *tally.entry(y_step(YState::Size(3), &mut rng, 10)).or_insert(0usize) += 1;
        }
        for (state, p) in
            [(YState::Size(2), 0.16), (YState::Size(4), 0.18), (YState::Size(1), 0.2), (YState::Size(3), 0.46)]
        {
            let f = tally[&state] as f64 / draws as f64;
            let se = (p * (1.0 - p) / draws as f64).sqrt();
            assert!((f - p).abs() < 4.0 * se, "{state:?}: {f}");
        }
        assert_eq!(y_step(YState::ABSORBED, &mut rng, 10), YState::ABSORBED);
        let from_inf = (0..draws).filter(|_| y_step(YState::Infinity, &mut rng, 10) == YState::Size(1)).count();
        let f = from_inf as f64 / draws as f64;
        assert!((f - 0.2).abs() < 4.0 * (0.16f64 / draws as f64).sqrt());
    }

    #[test]
    fn dominance_at_time_zero_and_small_run() {
        let r = dominance_check(20, 0, 100, 1).unwrap();
        assert_eq!(r.worst_violation, 0.0);
        let r = dominance_check(20, 100, 5_000, 2).unwrap();
        assert!(r.within(3.0), "{r:?}");
        assert!(r.absorbed_mass_ok);
    }

    #[test]
    fn dominance_is_reproducible() {
        let a = dominance_check(12, 40, 2_000, 9).unwrap();
        let b = dominance_check(12, 40, 2_000, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn l2_diagnostic_runs() {
        let d = l2_diagnostic(50, 1000).unwrap();
        assert!(d.cauchy_schwarz_holds);
        assert!(d.sup_ratio.is_finite() && d.sup_ratio > 0.0);
    }

    #[test]
    fn bound_examples() {
        let c = BoundConstants::default();
        let s = survival_bound(50, 391, &c);
        assert!((s - (-0.6526f64 * 391.0 / 50.0).exp()).abs() < 1e-15);
        assert!((s - 0.006076466012).abs() < 1e-12);
        let t = mixing_bound(52, 0.25, &c).unwrap();
        assert_eq!(t, 424);
        let value = 51.0 * (-0.6526f64 * 424.0 / 52.0).exp();
        assert!((analytic_tv_bound(52, t, &c) - value).abs() < 1e-9);
        assert!(value <= 0.25 && 51.0 * (-0.6526f64 * 423.0 / 52.0).exp() > 0.25);
        assert_eq!(first_time_below(5, 4.0, &c), 0);
        assert!(mixing_bound(52, 1.0, &c).is_err());
        assert!(mixing_bound(52, 0.0, &c).is_err());
        assert!(c.consistent());
    }

    #[test]
    fn csv_and_json_forms() {
        let k = build_ktilde(10).unwrap();
        let csv = k.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 10);
        assert_eq!(lines[0], "0,1,2,3,4,5,6,7,inf");
        assert_eq!(lines[4], "0,0.2,0.16,0.46,0.18,0,0,0,0");
        let j = k.to_json();
        assert_eq!(j["states"][8], "inf");
        assert_eq!(j["n"], 10);
    }
}
