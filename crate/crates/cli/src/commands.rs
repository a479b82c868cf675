use std::fmt;
use std::io;

use rtr_core::acceptance::{run_all, Profile};
use rtr_core::chain::{
    analytic_tv_bound, build_c, build_ktilde, dominance_check, mixing_bound, scaled_generator,
    second_largest_eigenvalue, survival_bound,
};
use rtr_core::exact::{mixing_time_exact, ShuffleKernel};
use rtr_core::montecarlo::{estimate_noncoalescence, estimate_t_tail, queue_transition_stats};
use rtr_core::report::{fmt_f64, round_json};
use rtr_core::{BoundConstants, CouplingVariant, Deck, Error, EstimateWithCI, MatrixKind};
use serde_json::{json, Map, Value};

use crate::output::{write, Cell, Report, Table};
use crate::{membership, Cli, Command, Format, Outcome};

#[derive(Debug)]
pub enum CliError {
    Core(Error),
    Io(io::Error),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e)
    }
}

type CliResult<T> = Result<T, CliError>;

fn usage_err(msg: impl Into<String>) -> CliError {
    CliError::Core(Error::Usage(msg.into()))
}

fn constants(decay_rate: Option<f64>) -> CliResult<BoundConstants> {
    let mut c = BoundConstants::default();
    if let Some(a) = decay_rate {
        if !(a.is_finite() && a > 0.0) {
            return Err(usage_err(format!("decay rate must be positive, got {a}")));
        }
        c.a = a;
    }
    Ok(c)
}

fn object(v: Value) -> Map<String, Value> {
    match v {
        Value::Object(m) => m,
        other => {
            let mut m = Map::new();
            m.insert("value".into(), other);
            m
        }
    }
}

fn variant_json(v: CouplingVariant) -> Value {
    serde_json::to_value(v).expect("variant serializes")
}

fn estimate_json(e: &EstimateWithCI) -> Value {
    json!({
        "point": e.point,
        "ci": [e.lo, e.hi],
        "se": e.std_err(),
        "samples": e.samples,
        "successes": e.successes,
        "method": e.method,
    })
}

pub fn run(cli: &Cli) -> CliResult<Outcome> {
    let format = cli.common.format;
    let threads = cli.common.threads.unwrap_or_else(rayon::current_num_threads);
    let report = match &cli.command {
        Command::Eig { limit, n, generator, matrix, decay_rate } => {
            eig(*limit, *n, *generator, *matrix, constants(*decay_rate)?)?
        }
        Command::Tv { n, t_min, t_max, eps } => tv(*n, *t_min, *t_max, *eps)?,
        Command::Couple { n, k, samples, seed, variant, tail_only, decay_rate } => {
            couple(*n, k, *samples, *seed, variant.resolve(), *tail_only, constants(*decay_rate)?)?
        }
        Command::QueueStats { n, samples, seed, membership: m } => queue_stats(*n, *samples, *seed, membership(*m))?,
        Command::Dominance { n, t_max, samples, seed } => dominance(*n, *t_max, *samples, *seed)?,
        Command::Bound { n, eps, k, decay_rate } => bound(*n, *eps, k, constants(*decay_rate)?)?,
        Command::Verify { quick, seed, decay_rate } => {
            let profile = Profile { quick: *quick, seed: *seed, constants: constants(*decay_rate)? };
            return verify(profile, threads, format, cli.common.out.as_deref());
        }
    };
    let mut report = report;
    if let Value::Object(cfg) = &mut report.config {
        cfg.insert("threads".into(), json!(threads));
    }
    write(&report.render(format), cli.common.out.as_deref())?;
    Ok(Outcome::Ok)
}

fn eig(limit: bool, n: Option<usize>, generator: bool, matrix: bool, c: BoundConstants) -> CliResult<Report> {
    let (m, target) = match (limit, n) {
        (true, _) => (build_c(), "limit"),
        (false, Some(n)) if generator => (scaled_generator(n)?, "generator"),
        (false, Some(n)) => (build_ktilde(n)?, "ktilde"),
        (false, None) => return Err(usage_err("eig needs --limit or --n")),
    };
    let config = json!({"subcommand": "eig", "matrix": target, "n": n, "a": c.a});
    if matrix {
        let labels = m.state_labels();
        let mut header = vec!["from".to_string()];
        header.extend(labels.iter().cloned());
        let rows = m
            .entries
            .rows()
            .into_iter()
            .zip(&labels)
            .map(|(r, l)| std::iter::once(Cell::Text(l.clone())).chain(r.into_iter().map(Cell::from)).collect())
            .collect();
        let body = object(json!({"kind": m.kind, "states": labels, "entries": m.entries.rows()}));
        return Ok(Report { config, body, table: Table { header, rows } });
    }
    let r = second_largest_eigenvalue(&m)?;
    let rate = match (m.kind, m.n) {
        (MatrixKind::Stochastic, Some(n)) => n as f64 * (r.lambda - 1.0),
        _ => r.lambda,
    };
    let threshold = -c.a;
    let below = rate < threshold;
    let body = object(json!({
        "lambda": r.lambda,
        "rate_lambda": rate,
        "method": r.method,
        "residual": r.residual,
        "iterations": r.iterations,
        "cross_check": r.cross_check,
        "agreement": r.agreement,
        "shift": r.shift,
        "threshold": threshold,
        "below_threshold": below,
    }));
    let table = Table::new(
        &["lambda", "rate_lambda", "residual", "iterations", "cross_check", "agreement", "below_threshold"],
        vec![vec![
            r.lambda.into(),
            rate.into(),
            r.residual.into(),
            r.iterations.into(),
            r.cross_check.into(),
            r.agreement.into(),
            Cell::Text(below.to_string()),
        ]],
    );
    Ok(Report { config, body, table })
}

fn tv(n: usize, t_min: usize, t_max: usize, eps: Option<f64>) -> CliResult<Report> {
    if t_min > t_max {
        return Err(usage_err(format!("--t-min {t_min} exceeds --t-max {t_max}")));
    }
    if n < 2 {
        return Err(usage_err("tv needs n >= 2"));
    }
    let kernel = ShuffleKernel::new(n)?;
    let d = kernel.distance_to_uniform_series(&Deck::identity(n), t_max)?;
    let adj = kernel.adjacent_series(1, 2, t_max)?;
    let mixing = eps.map(|e| mixing_time_exact(n, e)).transpose()?;
    let config = json!({"subcommand": "tv", "n": n, "t_min": t_min, "t_max": t_max, "eps": eps});
    let ts = t_min..=t_max;
    let rows_json: Vec<Value> = ts.clone().map(|t| json!({"t": t, "d_exact": d[t], "adjacent_tv": adj[t]})).collect();
    let mut body = object(json!({"rows": rows_json}));
    if let Some(m) = mixing {
        body.insert("mixing_time".into(), json!(m));
    }
    let table =
        Table::new(&["t", "d_exact", "adjacent_tv"], ts.map(|t| vec![t.into(), d[t].into(), adj[t].into()]).collect());
    Ok(Report { config, body, table })
}

fn couple(
    n: usize,
    ks: &[usize],
    samples: u64,
    seed: u64,
    variant: CouplingVariant,
    tail_only: bool,
    c: BoundConstants,
) -> CliResult<Report> {
    if ks.is_empty() {
        return Err(usage_err("--k needs at least one value"));
    }
    if samples == 0 {
        return Err(usage_err("--samples must be positive"));
    }
    let config = json!({
        "subcommand": "couple", "n": n, "k": ks, "samples": samples, "seed": seed,
        "variant": variant_json(variant), "tail_only": tail_only, "a": c.a,
    });
    let scale = n as f64 - 1.0;
    let mut rows_json = Vec::new();
    let mut rows = Vec::new();
    for &k in ks {
        let tail = estimate_t_tail(n, k, samples, seed, variant)?.estimate;
        let analytic = analytic_tv_bound(n, k, &c);
        let survival = survival_bound(n, k, &c);
        let mut row = json!({
            "k": k,
            "t_tail": estimate_json(&tail),
            "survival_bound": survival,
            "analytic_bound": analytic,
        });
        let mut cells: Vec<Cell> = vec![k.into(), tail.point.into(), tail.lo.into(), tail.hi.into()];
        if tail_only {
            cells.extend((0..8).map(|_| Cell::Empty));
        } else {
            let est = estimate_noncoalescence(n, k, samples, seed, variant)?;
            let o = &est.overall;
            row["noncoalescence"] = estimate_json(o);
            row["conditional_given_t_lt_k"] =
                est.conditional_given_t_lt_k.as_ref().map_or(json!("undefined"), estimate_json);
            row["t_finite"] = json!(est.t_finite);
            row["failures_given_t_finite"] = json!(est.failures_given_t_finite);
            row["failures_with_cross_move_at_t"] = json!(est.failures_with_cross_move_at_t);
            row["path_bound"] = json!(scale * o.point);
            row["path_bound_se"] = json!(scale * o.std_err());
            cells.extend([o.point.into(), o.lo.into(), o.hi.into()]);
            match &est.conditional_given_t_lt_k {
                Some(cond) => cells.push(cond.point.into()),
                None => cells.push(Cell::Text("undefined".into())),
            }
            cells.extend([est.t_finite.into(), est.failures_given_t_finite.into()]);
            cells.extend([(scale * o.point).into(), (scale * o.std_err()).into()]);
        }
        cells.push(analytic.into());
        rows_json.push(row);
        rows.push(cells);
    }
    let table = Table::new(
        &[
            "k",
            "t_tail",
            "t_tail_lo",
            "t_tail_hi",
            "noncoalescence",
            "noncoalescence_lo",
            "noncoalescence_hi",
            "conditional_given_t_lt_k",
            "t_finite",
            "failures_given_t_finite",
            "path_bound",
            "path_bound_se",
            "analytic_bound",
        ],
        rows,
    );
    Ok(Report { config, body: object(json!({"rows": rows_json})), table })
}

fn queue_stats(n: usize, steps: u64, seed: u64, m: rtr_core::QueueMembership) -> CliResult<Report> {
    let stats = queue_transition_stats(n, steps, seed, m)?;
    let config = json!({"subcommand": "queue-stats", "n": n, "steps": steps, "seed": seed, "membership": m});
    let rows = stats
        .rows
        .iter()
        .map(|r| {
            vec![
                r.l.into(),
                r.visits.into(),
                r.q_hat.into(),
                r.q.into(),
                r.p_hat.into(),
                r.p.into(),
                r.reset_hat.into(),
                r.reset.into(),
                r.z_q.into(),
                r.z_p.into(),
                r.z_reset.into(),
            ]
        })
        .collect();
    let table =
        Table::new(&["l", "visits", "q_hat", "q", "p_hat", "p", "reset_hat", "reset", "z_q", "z_p", "z_reset"], rows);
    let body = object(json!({"rows": serde_json::to_value(&stats.rows).expect("rows serialize")}));
    Ok(Report { config, body, table })
}

fn dominance(n: usize, t_max: usize, samples: u64, seed: u64) -> CliResult<Report> {
    if samples == 0 {
        return Err(usage_err("--samples must be positive"));
    }
    let r = dominance_check(n, t_max, samples, seed)?;
    let config = json!({"subcommand": "dominance", "n": n, "t_max": t_max, "samples": samples, "seed": seed});
    let within = r.within(3.0) && r.absorbed_mass_ok;
    let mut body = object(serde_json::to_value(&r).expect("report serializes"));
    for key in ["n", "t_max", "samples", "seed"] {
        body.remove(key);
    }
    body.insert("within_3se".into(), json!(within));
    let table = Table::new(
        &["worst_violation", "worst_t", "worst_m", "worst_z", "absorbed_mass_ok", "within_3se"],
        vec![vec![
            r.worst_violation.into(),
            r.worst_t.into(),
            r.worst_m.into(),
            r.worst_z.into(),
            Cell::Text(r.absorbed_mass_ok.to_string()),
            Cell::Text(within.to_string()),
        ]],
    );
    Ok(Report { config, body, table })
}

fn bound(n: usize, eps: f64, ks: &[usize], c: BoundConstants) -> CliResult<Report> {
    let t_star = mixing_bound(n, eps, &c)?;
    let at_star = analytic_tv_bound(n, t_star, &c);
    let config = json!({"subcommand": "bound", "n": n, "eps": eps, "k": ks, "a": c.a});
    let evals: Vec<Value> = ks
        .iter()
        .map(|&k| json!({"k": k, "survival_bound": survival_bound(n, k, &c), "analytic_bound": analytic_tv_bound(n, k, &c)}))
        .collect();
    let mut body = object(json!({"t_star": t_star, "analytic_bound_at_t_star": at_star}));
    if !evals.is_empty() {
        body.insert("evaluations".into(), Value::Array(evals));
    }
    let mut rows = vec![vec![t_star.into(), survival_bound(n, t_star, &c).into(), at_star.into()]];
    rows.extend(
        ks.iter().map(|&k| vec![k.into(), survival_bound(n, k, &c).into(), analytic_tv_bound(n, k, &c).into()]),
    );
    let table = Table::new(&["t", "survival_bound", "analytic_bound"], rows);
    Ok(Report { config, body, table })
}

fn verify(profile: Profile, threads: usize, format: Format, out: Option<&std::path::Path>) -> CliResult<Outcome> {
    let results = run_all(&profile);
    let all_passed = results.iter().all(|r| r.passed);
    let failed: Vec<String> = results.iter().filter(|r| !r.passed).map(|r| format!("C{:02}", r.id)).collect();
    let mut lines = format!(
        "# subcommand=verify quick={} seed={} a={} threads={threads}\n",
        profile.quick, profile.seed, profile.constants.a
    );
    for r in &results {
        lines.push_str(&r.line());
        lines.push('\n');
    }
    if failed.is_empty() {
        lines.push_str(&format!("all {} criteria passed\n", results.len()));
    } else {
        lines.push_str(&format!("{} of {} criteria failed: {}\n", failed.len(), results.len(), failed.join(", ")));
    }
    write(&lines, None)?;
    // The machine-readable report goes only to --out.
    if let Some(path) = out {
        let text = match format {
            Format::Json => {
                let v = json!({
                    "config": {"subcommand": "verify", "quick": profile.quick, "seed": profile.seed,
                               "a": profile.constants.a, "threads": threads},
                    "criteria": results,
                    "passed": all_passed,
                });
                let mut s = serde_json::to_string_pretty(&round_json(v)).expect("JSON values serialize");
                s.push('\n');
                s
            }
            Format::Csv => {
                let mut s = lines.lines().next().map(|l| format!("{l}\n")).unwrap_or_default();
                s.push_str("id,name,passed,elapsed_secs,time_limit_secs\n");
                for r in &results {
                    s.push_str(&format!(
                        "{},{},{},{},{}\n",
                        r.id,
                        r.name.replace(',', ";"),
                        r.passed,
                        fmt_f64(r.elapsed_secs),
                        fmt_f64(r.time_limit_secs)
                    ));
                }
                s
            }
        };
        write(&text, Some(path))?;
    }
    Ok(if all_passed { Outcome::Ok } else { Outcome::VerifyFailed })
}
