use std::fs;
use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use serde_json::{json, Value};

use subgap::brute::{brute_opt, Feasibility, BRUTE_CAP};
use subgap::checks::run_suite;
use subgap::extension::{default_samples, multilinear_exact, multilinear_sample, Evaluator};
use subgap::hardness::{distinguish_experiment, gap_report, refine, ExperimentConfig, RefineMode, SmoothedPair, Strategy};
use subgap::localsearch::{local_search_bases, local_search_independence, SearchConfig, Slack};
use subgap::matroid::parse_matroid;
use subgap::pipage::pipage_round;
use subgap::rng::{derive_seed, stream};
use subgap::scalar::format_rational;
use subgap::setfn::parse_family;
use subgap::symmetry::{bundled, check_strong_symmetry, describe_exact, parse_instance, symmetry_gap, GapOptions, SymmetricInstance};
use subgap::{gen, parse_rational, Error, Verdict};

use crate::report::{Format, Output};
use crate::{BenchArgs, CheckArgs, GapArgs, HardenArgs, InstanceArg, SolveArgs};

/// A property suite reported failures; maps to exit status 1.
#[derive(Debug)]
pub struct CheckFailed(pub usize);

impl std::fmt::Display for CheckFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} propert{} failed", self.0, if self.0 == 1 { "y" } else { "ies" })
    }
}

impl std::error::Error for CheckFailed {}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_instance(src: &InstanceArg) -> Result<SymmetricInstance> {
    match (&src.name, &src.instance) {
        (Some(name), _) => Ok(bundled(name)?),
        (None, Some(path)) => {
            let text = read(path)?;
            Ok(parse_instance(&text).with_context(|| format!("instance {}", path.display()))?)
        }
        (None, None) => bail!(Error::Invalid("give a bundled name or --instance FILE".into())),
    }
}

fn parse_evaluator(s: &str, n: usize, seed: u64) -> Result<Evaluator> {
    let seed = derive_seed(seed, 2);
    match s.split_once(':') {
        None if s == "exact" => Ok(Evaluator::Exact),
        None if s == "sample" => Ok(Evaluator::Sampled { samples: default_samples(n), seed }),
        Some(("sample", count)) => match count.parse::<u64>() {
            Ok(samples) if samples > 0 => Ok(Evaluator::Sampled { samples, seed }),
            _ => bail!(Error::Invalid(format!("bad sample count {count:?}"))),
        },
        _ => bail!(Error::Invalid(format!("evaluator must be exact or sample:COUNT, got {s:?}"))),
    }
}

fn parse_slack(s: &str) -> Result<Slack> {
    match s {
        "zero" => Ok(Slack::Zero),
        "relaxed" => Ok(Slack::Relaxed),
        v => match v.parse::<f64>() {
            Ok(x) if x >= 0.0 && x.is_finite() => Ok(Slack::Fixed(x)),
            _ => bail!(Error::Invalid(format!("slack must be zero, relaxed or a nonnegative number, got {v:?}"))),
        },
    }
}

pub fn solve(a: &SolveArgs, seed: u64, format: Format) -> Result<()> {
    let mut out = Output::new(format);
    let f = parse_family(&read(&a.instance)?).with_context(|| format!("function {}", a.instance.display()))?;
    let m = parse_matroid(&read(&a.constraint)?).with_context(|| format!("constraint {}", a.constraint.display()))?;
    if f.n() != m.n() {
        bail!(Error::Invalid(format!("function has n = {} but the matroid has n = {}", f.n(), m.n())));
    }
    let t = parse_rational(&a.t)?;
    let mut cfg = SearchConfig::new(t)?;
    cfg.evaluator = parse_evaluator(&a.evaluator, f.n(), seed)?;
    cfg.slack = parse_slack(&a.slack)?;
    cfg.steepest = a.steepest;
    cfg.max_steps = a.max_steps;
    cfg.round_seed = derive_seed(seed, 1);
    let sol = if a.bases { local_search_bases(&f, &m, &cfg)? } else { local_search_independence(&f, &m, &cfg)? };
    let mode = if a.bases { "bases" } else { "independence" };
    out.say(format!("{} on {} (n = {}), {mode}, t = {}", f.kind().name(), m.kind().name(), f.n(), format_rational(&t)));
    out.say(format!("fractional value F(x) = {} after {} step(s) (converged: {})", sol.value, sol.trace.len(), sol.converged));
    match (sol.rounded, sol.rounded_value) {
        (Some(s), Some(v)) => out.say(format!("rounded set {s} with f = {v}")),
        _ => out.say("rounding skipped"),
    }
    let opt = if f.n() <= BRUTE_CAP {
        let feas = if a.bases { Feasibility::Bases(m.clone()) } else { Feasibility::Independence(m.clone()) };
        Some(brute_opt(&f, &feas)?)
    } else {
        None
    };
    let ratio = |v: f64| opt.as_ref().filter(|o| o.best_value > 0.0).map(|o| v / o.best_value);
    if let Some(o) = &opt {
        out.say(format!("brute-force OPT = {} at {}; ratio {}", o.best_value, o.best_set, ratio(sol.value).map_or("n/a".into(), |r| r.to_string())));
    }
    for w in &sol.warnings {
        out.say(format!("warning: {w}"));
    }
    let results = json!({
        "mode": mode,
        "value": sol.value,
        "x": sol.x,
        "steps": sol.trace.len(),
        "converged": sol.converged,
        "opt_estimate": sol.opt_estimate,
        "threshold": sol.threshold,
        "rounded": sol.rounded,
        "rounded_value": sol.rounded_value,
        "opt": opt.as_ref().map(|o| o.best_value),
        "opt_set": opt.as_ref().map(|o| o.best_set),
        "ratio": ratio(sol.value),
        "rounded_ratio": sol.rounded_value.and_then(ratio),
        "warnings": sol.warnings,
    });
    let config = json!({
        "instance": a.instance,
        "constraint": a.constraint,
        "t": format_rational(&t),
        "search": cfg,
    });
    out.finish("solve", config, results, seed)
}

pub fn gap(a: &GapArgs, seed: u64, format: Format) -> Result<()> {
    let mut out = Output::new(format);
    let inst = load_instance(&a.source)?;
    let opts = GapOptions { grid_tol: a.grid_tol, grid_points: a.grid_points };
    let res = symmetry_gap(&inst, &opts)?;
    out.say(format!("instance {} (n = {}, {}, group order {})", inst.name, inst.n(), inst.feasibility.name(), inst.group.order()));
    out.say(format!("OPT = {} at {} (exact, brute force)", res.opt, res.opt_set));
    let method = match res.method {
        subgap::symmetry::GapMethod::ClosedForm => "closed form",
        subgap::symmetry::GapMethod::UniquePoint => "exact, unique symmetric point",
        subgap::symmetry::GapMethod::Grid => "grid",
    };
    out.say(format!("OPT_bar = {} ({method}; numeric {} over dimension {})", res.opt_bar, res.numeric_opt_bar, res.dimension));
    out.say(format!("gamma = {}", res.gamma));
    if let Some(e) = &res.exact {
        out.say(format!("closed form: {}", describe_exact(e)));
    }
    if res.discrepancy {
        out.say(format!("note: the continuous optimum {} exceeds the discrete OPT", res.opt_continuous.unwrap_or(f64::NAN)));
    }
    let config = json!({ "instance": inst.name, "options": opts });
    out.finish("gap", config, serde_json::to_value(&res)?, seed)
}

pub fn harden(a: &HardenArgs, seed: u64, format: Format) -> Result<()> {
    let mut out = Output::new(format);
    let inst = load_instance(&a.source)?;
    if let Verdict::Fail(w) = check_strong_symmetry(&inst.feasibility, &inst.group)? {
        bail!(Error::NotStronglySymmetric(w));
    }
    let strategy: Strategy = a.strategy.parse()?;
    let pair = SmoothedPair::from_instance(&inst, a.eps)?;
    let constants = pair.constants();
    out.say(format!(
        "{}: eps = {}, M = {}, alpha = {:e}, beta = {:e}, delta = {:e} (ln delta = {:e})",
        inst.name, constants.epsilon, constants.m_bound, constants.alpha, constants.beta, constants.delta, constants.ln_delta
    ));

    let refined = refine(&pair, a.n, derive_seed(seed, 10), RefineMode::Blind)?;
    let report = match gap_report(&refined) {
        Ok(r) => {
            out.say(format!(
                "refinement n = {}: max f-hat = {}, max g-hat = {}, ratio = {} ({}, {} evaluations)",
                a.n, r.max_f_hat, r.max_g_hat, r.ratio, serde_json::to_value(r.method)?.as_str().unwrap_or("?"), r.evaluations
            ));
            serde_json::to_value(&r)?
        }
        Err(Error::SizeCap { what, size, cap }) => {
            out.say(format!("gap report skipped: {what} size {size} exceeds {cap}"));
            json!({ "skipped": format!("{what}: size {size} exceeds cap {cap}") })
        }
        Err(e) => return Err(e.into()),
    };

    let gap = symmetry_gap(&inst, &GapOptions::default())?;
    let threshold = a.threshold.unwrap_or((gap.opt_bar + gap.opt) / 2.0);
    let experiment = if a.trials > 0 {
        let cfg = ExperimentConfig { strategy, query_budget: a.queries, trials: a.trials, n: a.n, seed: derive_seed(seed, 11), threshold };
        let rep = distinguish_experiment(&pair, &cfg)?;
        for t in &rep.trials {
            out.row(json!({ "table": "trial", "trial": t }))?;
        }
        out.say(format!(
            "experiment ({}, {} trials x {} queries, n = {}): exceed rate {} per query (bound {:.4e}), {} per trial; regime {}",
            a.strategy,
            a.trials,
            a.queries,
            a.n,
            rep.query_exceed_rate,
            rep.per_query_bound,
            rep.trial_exceed_rate,
            serde_json::to_value(rep.regime)?.as_str().unwrap_or("?")
        ));
        out.say(format!(
            "distinguishing success: threshold rule {}, consistency rule {}",
            rep.success_rate, rep.consistency_success_rate
        ));
        let mut v = serde_json::to_value(&rep)?;
        if let Some(obj) = v.as_object_mut() {
            obj.remove("trials");
        }
        v
    } else {
        Value::Null
    };
    let config = json!({
        "instance": inst.name,
        "eps": pair.epsilon,
        "n": a.n,
        "trials": a.trials,
        "queries": a.queries,
        "strategy": strategy,
        "threshold": threshold,
    });
    let results = json!({
        "constants": constants,
        "gamma": gap.gamma,
        "opt": gap.opt,
        "opt_bar": gap.opt_bar,
        "gap_report": report,
        "experiment": experiment,
    });
    out.finish("harden", config, results, seed)
}

pub fn check(a: &CheckArgs, seed: u64, format: Format) -> Result<()> {
    let mut out = Output::new(format);
    let reports = run_suite(&a.suite, seed)?;
    for r in &reports {
        out.row(json!({ "table": "property", "property": r }))?;
        out.say(r.to_string());
    }
    let failed = reports.iter().filter(|r| !r.ok()).count();
    let results = json!({
        "properties": reports.len(),
        "failed": failed,
        "passed": reports.iter().all(|r| r.ok()),
    });
    out.finish("check", json!({ "suite": a.suite }), results, seed)?;
    if failed > 0 {
        return Err(CheckFailed(failed).into());
    }
    Ok(())
}

fn time_it<T>(reps: usize, mut f: impl FnMut() -> Result<T>) -> Result<f64> {
    let start = Instant::now();
    for _ in 0..reps.max(1) {
        std::hint::black_box(f()?);
    }
    Ok(start.elapsed().as_secs_f64() / reps.max(1) as f64)
}

pub fn bench(a: &BenchArgs, seed: u64, format: Format) -> Result<()> {
    if a.max_n < 2 || a.max_n > subgap::extension::EXACT_CAP {
        bail!(Error::Invalid(format!("--max-n must lie in 2..={}", subgap::extension::EXACT_CAP)));
    }
    let mut out = Output::new(format);
    let mut rows = Vec::new();
    let mut rng = stream(seed, 0);
    let mut n = 4;
    while n <= a.max_n {
        let f = gen::submodular(n, &mut rng)?;
        let table = subgap::setfn::tabulate(&f)?;
        let x = gen::point(n, &mut rng);
        let exact = time_it(a.reps, || Ok(multilinear_exact(&table, &x)?))?;
        let samples = default_samples(n);
        let sampled = time_it(a.reps, || Ok(multilinear_sample(&table, &x, samples, seed)?))?;
        let row = json!({ "table": "bench", "kernel": "multilinear", "n": n, "exact_s": exact, "sampled_s": sampled, "samples": samples });
        out.say(format!("multilinear n = {n:>2}: exact {exact:.3e} s, {samples} samples {sampled:.3e} s"));
        out.row(&row)?;
        rows.push(row);
        n += 2;
    }
    for n in [6, 8, 10] {
        let f = gen::submodular(n, &mut rng)?;
        let m = gen::loopless_matroid(n, &mut rng)?;
        let cfg = SearchConfig::new(subgap::Rational::new(3, 8))?;
        let search = time_it(a.reps, || Ok(local_search_independence(&f, &m, &cfg)?))?;
        let y = gen::base_point(&m, 8, &mut rng)?;
        let rounding = time_it(a.reps, || Ok(pipage_round(&m, &y, seed)?))?;
        let row = json!({ "table": "bench", "kernel": "search+round", "n": n, "local_search_s": search, "pipage_s": rounding });
        out.say(format!("local search n = {n:>2}: {search:.3e} s; pipage {rounding:.3e} s"));
        out.row(&row)?;
        rows.push(row);
    }
    out.finish("bench", json!({ "max_n": a.max_n, "reps": a.reps }), json!({ "rows": rows.len() }), seed)
}
