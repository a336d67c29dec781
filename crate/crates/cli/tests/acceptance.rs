//! Acceptance run: one line per criterion, nonzero exit if any fails.

use std::process::Command;
use std::time::{Duration, Instant};

use rand::Rng;
use serde_json::Value;
use subgap::checks::{self, PropertyReport};
use subgap::hardness::SmoothedPair;
use subgap::rng::stream;
use subgap::symmetry::bundled;

const SEED: u64 = 20_240_601;

struct Outcome {
    ok: bool,
    detail: String,
}

fn from_reports(reports: &[PropertyReport]) -> Outcome {
    let ok = reports.iter().all(PropertyReport::ok);
    let detail = reports.iter().map(|r| r.to_string()).collect::<Vec<_>>().join("; ");
    Outcome { ok, detail }
}

fn report(cmd: &[&str]) -> Value {
    let out = Command::new(env!("CARGO_BIN_EXE_subgap"))
        .args(["--seed", &SEED.to_string()])
        .args(cmd)
        .output()
        .expect("run subgap");
    assert!(out.status.success(), "subgap {cmd:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).expect("utf-8 output");
    serde_json::from_str(stdout.lines().last().expect("a report line")).expect("JSON report")
}

fn gaps() -> Outcome {
    let cases = [
        ("k2cut", 0.5),
        ("cardinality:2", 0.75),
        ("cardinality:3", 19.0 / 27.0),
        ("dircut-bases:2", 0.5),
        ("dircut-bases:3", 1.0 / 3.0),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, want) in cases {
        let start = Instant::now();
        let r = report(&["gap", name]);
        let took = start.elapsed();
        let gamma = r["results"]["gamma"].as_f64().unwrap_or(f64::NAN);
        ok &= (gamma - want).abs() <= 1e-12 && took < Duration::from_secs(1);
        parts.push(format!("{name} γ = {gamma} ({:.3} s)", took.as_secs_f64()));
    }
    Outcome { ok, detail: parts.join(", ") }
}

fn independence() -> Outcome {
    from_reports(&[checks::independence_guarantee(SEED, 50).unwrap()])
}

fn bases() -> Outcome {
    from_reports(&[checks::base_guarantee(SEED, 50).unwrap(), checks::symmetric_start_ratio().unwrap()])
}

fn pipage() -> Outcome {
    from_reports(&[checks::martingale(SEED, 200).unwrap(), checks::rounding_expectation(SEED, 20, 1000).unwrap()])
}

fn ordering() -> Outcome {
    from_reports(&[checks::extension_ordering(SEED, 1000).unwrap()])
}

fn phi() -> Outcome {
    from_reports(&[checks::phi_certificates(20, 100_000).unwrap()])
}

/// `F̂ = Ĝ` on symmetrized points, where `D = 0 ≤ δ` holds exactly.
fn symmetric_agreement(pair: &SmoothedPair, cases: usize) -> Outcome {
    let mut rng = stream(SEED, pair.k() as u64);
    let mut bad = 0;
    for _ in 0..cases {
        let x: Vec<f64> = (0..pair.k()).map(|_| rng.random()).collect();
        let xbar = pair.xbar(&x);
        if pair.d(&xbar) > pair.delta() || pair.f_hat(&xbar).unwrap() != pair.g_hat(&xbar).unwrap() {
            bad += 1;
        }
    }
    Outcome { ok: bad == 0, detail: format!("F-hat = G-hat at symmetric points: {}/{cases} pass", cases - bad) }
}

fn smoothed() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for name in ["k2cut", "dircut-bases:2"] {
        let pair = SmoothedPair::from_instance(&bundled(name).unwrap(), Some(0.01)).unwrap();
        let a = symmetric_agreement(&pair, 1000);
        let rest = from_reports(&[
            checks::hat_agreement(name, &pair, SEED, 1000).unwrap(),
            checks::smoothing_error(name, &pair, SEED, 1000).unwrap(),
            checks::refined_submodular(name, &pair, SEED, 4).unwrap(),
        ]);
        ok &= a.ok && rest.ok;
        parts.push(format!("[{name}] {}; {}", a.detail, rest.detail));
    }
    Outcome { ok, detail: parts.join(" ") }
}

fn realized_gap() -> Outcome {
    let r = report(&["harden", "k2cut", "--eps", "0.01", "--n", "5", "--trials", "0"]);
    let g = &r["results"]["gap_report"];
    let (f, gh, ratio) = (g["max_f_hat"].as_f64().unwrap(), g["max_g_hat"].as_f64().unwrap(), g["ratio"].as_f64().unwrap());
    Outcome {
        ok: f >= 0.98 && gh <= 0.51 && (0.47..=0.53).contains(&ratio),
        detail: format!("max f-hat = {f}, max g-hat = {gh}, ratio = {ratio}"),
    }
}

fn concentration() -> Outcome {
    let r = report(&["harden", "k2cut", "--eps", "0.01", "--n", "200", "--trials", "100", "--queries", "1000"]);
    let e = &r["results"]["experiment"];
    let rate = e["query_exceed_rate"].as_f64().unwrap();
    let bound = e["per_query_bound"].as_f64().unwrap();
    let success = e["success_rate"].as_f64().unwrap();
    Outcome {
        ok: rate <= bound && (success - 0.5).abs() <= 0.05,
        detail: format!(
            "exceed rate {rate} vs bound {bound} ({}), success {success}",
            e["regime"].as_str().unwrap_or("?")
        ),
    }
}

fn value_bounds() -> Outcome {
    from_reports(&[checks::value_bounds(SEED, 100).unwrap(), checks::bipartite_family().unwrap()])
}

fn symmetric_theorems() -> Outcome {
    from_reports(&[checks::transitive_half(SEED, 20).unwrap(), checks::center_bound(SEED, 20).unwrap()])
}

fn main() {
    let criteria: [(&str, u64, fn() -> Outcome); 11] = [
        ("symmetry gaps", 5, gaps),
        ("independence guarantee", 120, independence),
        ("base guarantee", 120, bases),
        ("pipage martingale", 60, pipage),
        ("extension ordering", 30, ordering),
        ("phi certification", 10, phi),
        ("smoothed pair", 120, smoothed),
        ("realized gap", 60, realized_gap),
        ("concentration", 300, concentration),
        ("value bounds", 60, value_bounds),
        ("symmetric instances", 120, symmetric_theorems),
    ];
    let mut failed = 0;
    for (i, (name, limit, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let out = run();
        let took = start.elapsed().as_secs_f64();
        let ok = out.ok && took < *limit as f64;
        failed += usize::from(!ok);
        println!("criterion {:>2} {:<24} {} ({took:.2} s / {limit} s): {}", i + 1, name, if ok { "PASS" } else { "FAIL" }, out.detail);
    }
    println!("acceptance: {}/{} criteria pass", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
