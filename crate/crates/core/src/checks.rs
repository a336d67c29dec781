//! Randomized property suites behind `subgap check` and the acceptance run.
//!
//! Every property draws its cases from counter-based streams keyed by
//! `(seed, property, case)`, runs them in parallel and reports in case order,
//! so a report is reproducible from its seed alone.

use std::fmt;
use std::time::Instant;

use num_traits::One;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::brute::{bipartite_tightness, brute_opt, value_bound_check, BoundMode, Feasibility};
use crate::error::{Error, Result};
use crate::extension::{gradient_exact, lovasz_eval, multilinear_exact, multilinear_sample, partial_derivative_exact};
use crate::gen;
use crate::hardness::{certify_phi, refine, PhiFunction, RefineMode, SmoothedPair, Which};
use crate::localsearch::{local_opt_violation, local_search_bases, local_search_independence, SearchConfig, Slack};
use crate::matroid::{box_meets_base_polytope, Matroid};
use crate::pipage::{pipage_round, round_matroid};
use crate::point::Point;
use crate::rng::{derive_seed, stream};
use crate::scalar::{format_rational, Rational, Scalar};
use crate::setfn::{check_monotone, check_submodular, tabulate, SetFunction};
use crate::subset::{lex_subsets, Subset};
use crate::symmetry::{bundled, check_invariance, symmetrize, PermGroup};

pub const SUITES: &[&str] = &["structure", "extensions", "pipage", "localsearch", "hardness", "bounds", "symmetry"];

#[derive(Clone, Debug, Serialize)]
pub struct PropertyReport {
    pub suite: &'static str,
    pub property: String,
    pub cases: usize,
    pub passed: usize,
    /// First failing case in case order.
    pub counterexample: Option<String>,
    pub seconds: f64,
}

impl PropertyReport {
    pub fn ok(&self) -> bool {
        self.passed == self.cases
    }
}

impl fmt::Display for PropertyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.ok() { "pass" } else { "FAIL" };
        write!(f, "{}: {}/{} {verdict}", self.property, self.passed, self.cases)?;
        if let Some(c) = &self.counterexample {
            write!(f, " (first failure: {c})")?;
        }
        Ok(())
    }
}

/// Outcome of one case: `None` when it holds.
type Case = Result<Option<String>>;

fn tally<F>(suite: &'static str, property: impl Into<String>, salt: u64, seed: u64, cases: usize, case: F) -> Result<PropertyReport>
where
    F: Fn(usize, &mut ChaCha8Rng) -> Case + Sync,
{
    let start = Instant::now();
    let key = derive_seed(seed, salt);
    let outcomes: Vec<Option<String>> = (0..cases)
        .into_par_iter()
        .map(|c| case(c, &mut stream(key, c as u64)))
        .collect::<Result<_>>()?;
    let counterexample = outcomes.iter().enumerate().find_map(|(c, o)| o.as_ref().map(|m| format!("case {c}: {m}")));
    Ok(PropertyReport {
        suite,
        property: property.into(),
        cases,
        passed: outcomes.iter().filter(|o| o.is_none()).count(),
        counterexample,
        seconds: start.elapsed().as_secs_f64(),
    })
}

fn fail(cond: bool, msg: impl FnOnce() -> String) -> Option<String> {
    if cond {
        None
    } else {
        Some(msg())
    }
}

fn ratio_point(x: &Point<Rational>) -> Point<f64> {
    Point::from_vec_unchecked(x.coords().iter().map(Scalar::to_f64).collect())
}

fn random_table(n: usize, rng: &mut impl Rng) -> Result<SetFunction> {
    SetFunction::table(n, (0..1usize << n).map(|_| rng.random_range(0..8) as f64).collect())
}

/// Runs one named suite (or `all`) with the default case counts.
pub fn run_suite(name: &str, seed: u64) -> Result<Vec<PropertyReport>> {
    match name {
        "all" => {
            let mut out = Vec::new();
            for s in SUITES {
                out.extend(run_suite(s, seed)?);
            }
            Ok(out)
        }
        "structure" => Ok(vec![
            pair_form_agreement(seed, 200)?,
            rank_is_submodular(seed, 100)?,
            packing_agreement(seed, 100)?,
            base_polytope_emptiness(seed, 100)?,
        ]),
        "extensions" => Ok(vec![
            extension_ordering(seed, 1000)?,
            vertex_agreement(seed, 200)?,
            derivative_agreement(seed, 200)?,
            swap_convexity(seed, 200)?,
            sampling_agreement(seed, 50)?,
        ]),
        "pipage" => Ok(vec![
            martingale(seed, 200)?,
            rounding_expectation(seed, 5, 1000)?,
            rounding_marginals(seed, 3, 10_000)?,
        ]),
        "localsearch" => Ok(vec![
            independence_guarantee(seed, 50)?,
            base_guarantee(seed, 50)?,
            symmetric_start_ratio()?,
            relaxed_step_bound(seed, 30)?,
        ]),
        "hardness" => {
            let mut out = vec![phi_certificates(20, 100_000)?];
            for inst in ["k2cut", "dircut-bases:2"] {
                let pair = SmoothedPair::from_instance(&bundled(inst)?, Some(0.01))?;
                out.push(hat_agreement(inst, &pair, seed, 1000)?);
                out.push(smoothing_error(inst, &pair, seed, 1000)?);
                out.push(hat_nonnegative(inst, &pair, seed, 1000)?);
                out.push(h_bounds(inst, &pair, seed, 1000)?);
                out.push(refined_submodular(inst, &pair, seed, 4)?);
                out.push(cluster_feasibility(inst, &pair, seed, 1000)?);
            }
            let monotone = SmoothedPair::from_instance(&bundled("cardinality:2")?, Some(0.01))?;
            out.push(monotone_partials(&monotone, seed, 1000)?);
            Ok(out)
        }
        "bounds" => Ok(vec![value_bounds(seed, 100)?, bipartite_family()?, base_opt_below_independence(seed, 100)?]),
        "symmetry" => Ok(vec![
            symmetrize_idempotent(seed, 200)?,
            gradient_symmetry(seed, 200)?,
            transitive_half(seed, 20)?,
            center_bound(seed, 20)?,
        ]),
        _ => Err(Error::invalid(format!("unknown suite {name}; known: {}, all", SUITES.join(", ")))),
    }
}

// ---- structure -----------------------------------------------------------

/// `check_submodular` against the pair form over all `(S, T)`, on random
/// submodular functions and unstructured tables alike.
pub fn pair_form_agreement(seed: u64, cases: usize) -> Result<PropertyReport> {
    tally("structure", "check_submodular = pair form", 1, seed, cases, |c, rng| {
        let n = 1 + c % 8;
        let f = if c % 2 == 0 { gen::submodular(n, rng)? } else { random_table(n, rng)? };
        let t = tabulate(&f)?;
        let v = t.values();
        let tol = 1e-12 * t.max().max(1.0);
        let pair = (0..v.len()).all(|s| (0..v.len()).all(|u| v[s | u] + v[s & u] <= v[s] + v[u] + tol));
        let marginal = check_submodular(&f)?.is_pass();
        Ok(fail(pair == marginal, || format!("n = {n}: pair form {pair}, marginal form {marginal}")))
    })
}

pub fn rank_is_submodular(seed: u64, cases: usize) -> Result<PropertyReport> {
    tally("structure", "rank is monotone and submodular", 2, seed, cases, |c, rng| {
        let n = 1 + c % 10;
        let m = gen::loopless_matroid(n, rng)?;
        let ranks = m.rank_table()?;
        let r = SetFunction::table(n, ranks.iter().map(|&v| v as f64).collect())?;
        let ok = check_submodular(&r)?.is_pass() && check_monotone(&r)?.is_pass();
        Ok(fail(ok, || format!("{:?}", m.to_spec())))
    })
}

/// Analytic `ν` of partition matroids equals the LP value, and every
/// certificate re-validates exactly.
pub fn packing_agreement(seed: u64, cases: usize) -> Result<PropertyReport> {
    tally("structure", "partition nu = LP nu", 3, seed, cases, |c, rng| {
        let n = 1 + c % 12;
        let m = gen::loopless_matroid(n, rng)?;
        let a = m.fractional_base_packing()?;
        a.validate(&m)?;
        if n > 8 {
            return Ok(None);
        }
        let lp = m.fractional_base_packing_lp()?;
        lp.validate(&m)?;
        Ok(fail(a.nu == lp.nu, || format!("{:?}: {} vs {}", m.to_spec(), format_rational(&a.nu), format_rational(&lp.nu))))
    })
}

/// `B_t(M) ≠ ∅ ⇔ ν ≥ 1/t` over `t = r/q` with `q ≤ 6`.
pub fn base_polytope_emptiness(seed: u64, cases: usize) -> Result<PropertyReport> {
    tally("structure", "B_t nonempty iff nu >= 1/t", 4, seed, cases, |c, rng| {
        let m = gen::loopless_matroid(1 + c % 8, rng)?;
        let nu = m.fractional_base_packing()?.nu;
        for q in 1..=6i128 {
            for r in 1..=q {
                let t = Rational::new(r, q);
                let expect = nu * t >= Rational::one();
                if box_meets_base_polytope(&m, t)? != expect {
                    return Ok(Some(format!("{:?} at t = {}", m.to_spec(), format_rational(&t))));
                }
            }
        }
        Ok(None)
    })
}

// ---- extensions ----------------------------------------------------------

/// `F(x) ≥ f^L(x)` for submodular `f`.
pub fn extension_ordering(seed: u64, cases: usize) -> Result<PropertyReport> {
    tally("extensions", "F ≥ Lovász", 10, seed, cases, |c, rng| {
        let n = 1 + c % 8;
        let f = gen::submodular(n, rng)?;
        let x = gen::point(n, rng);
        let (ml, lv) = (multilinear_exact(&f, &x)?, lovasz_eval(&f, &x));
        Ok(fail(ml >= lv - 1e-12, || format!("n = {n}, x = {:?}: F = {ml}, Lovász = {lv}", x.coords())))
    })
}

pub fn vertex_agreement(seed: u64, cases: usize) -> Result<PropertyReport> {
    tally("extensions", "extensions agree with f at vertices", 11, seed, cases, |c, rng| {
        let n = 1 + c % 6;
        let f = if c % 2 == 0 { gen::submodular(n, rng)? } else { random_table(n, rng)? };
        for s in lex_subsets(n) {
            let x = Point::<f64>::indicator(n, s);
            let (ml, lv, v) = (multilinear_exact(&f, &x)?, lovasz_eval(&f, &x), f.eval(s));
            if (ml - v).abs() > 1e-12 || (lv - v).abs() > 1e-12 {
                return Ok(Some(format!("n = {n}, S = {s}: f = {v}, F = {ml}, Lovász = {lv}")));
            }
        }
        Ok(None)
    })
}

/// Exact partials against central differences with `h = 1e−4`.
pub fn derivative_agreement(seed: u64, cases: usize) -> Result<PropertyReport> {
    tally("extensions", "partials match finite differences", 12, seed, cases, |c, rng| {
        let n = 1 + c % 8;
        let f = gen::submodular(n, rng)?;
        let h = 1e-4;
        let x = Point::from_vec_unchecked((0..n).map(|_| rng.random_range(h..1.0 - h)).collect());
        for i in 0..n {
            let exact: f64 = partial_derivative_exact(&f, &x, i)?;
            let up = multilinear_exact(&f, &x.with_coord(i, x[i] + h))?;
            let down = multilinear_exact(&f, &x.with_coord(i, x[i] - h))?;
            let fd = (up - down) / (2.0 * h);
            if (exact - fd).abs() > 1e-6 {
                return Ok(Some(format!("n = {n}, i = {i}: exact {exact}, difference {fd}")));
            }
        }
        Ok(None)
    })
}

/// `λ ↦ F(x + λ(e_j − e_i))` has nonnegative second differences.
pub fn swap_convexity(seed: u64, cases: usize) -> Result<PropertyReport> {
    tally("extensions", "F convex along e_j - e_i", 13, seed, cases, |c, rng| {
        let n = 2 + c % 7;
        let f = gen::submodular(n, rng)?;
        let x = gen::point(n, rng);
        let i = rng.random_range(0..n);
        let j = (i + rng.random_range(1..n)) % n;
        let (lo, hi) = (-(x[j].min(1.0 - x[i])), x[i].min(1.0 - x[j]));
        if hi - lo < 1e-6 {
            return Ok(None);
        }
        let g = |l: f64| {
            let mut y = x.clone().into_coords();
            y[j] += l;
            y[i] -= l;
            multilinear_exact(&f, &Point::from_vec_unchecked(y))
        };
        let steps = 20;
        let vals = (0..=steps).map(|s| g(lo + (hi - lo) * s as f64 / steps as f64)).collect::<Result<Vec<_>>>()?;
        let worst = vals.windows(3).map(|w| w[0] - 2.0 * w[1] + w[2]).fold(f64::INFINITY, f64::min);
        Ok(fail(worst >= -1e-9, || format!("n = {n}, i = {i}, j = {j}: second difference {worst}")))
    })
}

/// The sampling estimator lands within 5 standard errors of the exact value.
pub fn sampling_agreement(seed: u64, cases: usize) -> Result<PropertyReport> {
    tally("extensions", "sampled F within 5 stderr", 14, seed, cases, |c, rng| {
        let n = 1 + c % 8;
        let f = gen::submodular(n, rng)?;
        let x = gen::point(n, rng);
        let exact = multilinear_exact(&f, &x)?;
        let est = multilinear_sample(&f, &x, 4000, rng.random())?;
        let ok = (est.mean - exact).abs() <= 5.0 * est.stderr + 1e-9;
        Ok(fail(ok, || format!("exact {exact}, estimate {} ± {}", est.mean, est.stderr)))
    })
}

// ---- pipage --------------------------------------------------------------

fn rounding_instance(c: usize, rng: &mut ChaCha8Rng) -> Result<(SetFunction, Matroid, Point<Rational>, bool)> {
    let n = 2 + c % 7;
    let f = gen::submodular(n, rng)?;
    let m = gen::loopless_matroid(n, rng)?;
    let q = rng.random_range(2..=6);
    let base_mode = c % 2 == 0;
    let x = if base_mode { gen::base_point(&m, q, rng)? } else { gen::independent_point(&m, q, rng)? };
    Ok((f, m, x, base_mode))
}

fn round(m: &Matroid, x: &Point<Rational>, base_mode: bool, seed: u64) -> Result<crate::pipage::RoundingOutcome> {
    if base_mode {
        pipage_round(m, x, seed)
    } else {
        round_matroid(m, x, seed)
    }
}

/// Every randomized branch satisfies `p·y⁻ + (1−p)·y⁺ = y` exactly, and the
/// output is a base (pipage) or independent set (Adjust + pipage).
pub fn martingale(seed: u64, cases: usize) -> Result<PropertyReport> {
    tally("pipage", "martingale per branch (exact)", 20, seed, cases, |c, rng| {
        let (_, m, x, base_mode) = rounding_instance(c, rng)?;
        let out = round(&m, &x, base_mode, rng.random())?;
        if let Some(b) = out.branches.iter().find(|b| !b.martingale_holds()) {
            return Ok(Some(format!("branch {:?} with p = {}", b.step, format_rational(&b.p))));
        }
        let feasible = m.is_independent(out.set) && (!base_mode || out.set.len() == m.full_rank());
        Ok(fail(feasible, || format!("{} is infeasible for {:?}", out.set, m.to_spec())))
    })
}

/// `mean f(R) ≥ F(y) − 3·stderr` over `seeds` roundings per instance.
pub fn rounding_expectation(seed: u64, instances: usize, seeds: u64) -> Result<PropertyReport> {
    tally("pipage", "E f(rounded) ≥ F(y) - 3 stderr", 21, seed, instances, |c, rng| {
        let (f, m, x, base_mode) = rounding_instance(c, rng)?;
        let key: u64 = rng.random();
        let values = (0..seeds)
            .into_par_iter()
            .map(|s| Ok(f.eval(round(&m, &x, base_mode, derive_seed(key, s))?.set)))
            .collect::<Result<Vec<f64>>>()?;
        let (mean, se) = crate::extension::mean_stderr(&values);
        let target = multilinear_exact(&f, &ratio_point(&x))?;
        Ok(fail(mean >= target - 3.0 * se - 1e-9, || format!("mean {mean} ± {se} below F(y) = {target}")))
    })
}

/// Empirical inclusion frequencies within 4σ of `x_i`, exact at 0 and 1.
pub fn rounding_marginals(seed: u64, instances: usize, seeds: u64) -> Result<PropertyReport> {
    tally("pipage", "marginals within 4 sigma", 22, seed, instances, |c, rng| {
        let (_, m, x, base_mode) = rounding_instance(c, rng)?;
        let key: u64 = rng.random();
        let sets = (0..seeds)
            .into_par_iter()
            .map(|s| Ok(round(&m, &x, base_mode, derive_seed(key, s))?.set))
            .collect::<Result<Vec<Subset>>>()?;
        let n = seeds as f64;
        for (i, xi) in ratio_point(&x).coords().iter().enumerate() {
            let freq = sets.iter().filter(|s| s.contains(i)).count() as f64 / n;
            let sigma = (xi * (1.0 - xi) / n).sqrt();
            if (freq - xi).abs() > 4.0 * sigma + 1e-12 {
                return Ok(Some(format!("element {i}: frequency {freq} vs x = {xi}")));
            }
        }
        Ok(None)
    })
}

// ---- local search --------------------------------------------------------

fn exact_config(t: Rational) -> Result<SearchConfig> {
    SearchConfig::new(t)
}

/// `F(x) ≥ (t − t²/2)·OPT` at `t = 3/8`, first-order local optimality, and
/// `2F(x) ≥ F(x ∨ 1_C') + F(x ∧ 1_C)` for the brute-force optimum `C`.
pub fn independence_guarantee(seed: u64, cases: usize) -> Result<PropertyReport> {
    tally("localsearch", "independence: F(x) ≥ (t - t²/2) OPT", 30, seed, cases, |c, rng| {
        let n = 2 + c % 9;
        let f = gen::submodular(n, rng)?;
        let m = gen::loopless_matroid(n, rng)?;
        let t = Rational::new(3, 8);
        let sol = local_search_independence(&f, &m, &exact_config(t)?)?;
        let opt = brute_opt(&f, &Feasibility::Independence(m.clone()))?;
        let tf = Scalar::to_f64(&t);
        let bound = (tf - tf * tf / 2.0) * opt.best_value;
        if sol.value < bound - 1e-9 {
            return Ok(Some(format!("value {} below {bound} (OPT {})", sol.value, opt.best_value)));
        }
        let viol = local_opt_violation(&f, &m, &sol.x, t, false)?;
        if viol > 1e-9 {
            return Ok(Some(format!("local optimality violated by {viol}")));
        }
        let x = ratio_point(&sol.x);
        let join: Vec<f64> =
            x.coords().iter().enumerate().map(|(i, &v)| if opt.best_set.contains(i) && v < tf { 1.0 } else { v }).collect();
        let meet: Vec<f64> = x.coords().iter().enumerate().map(|(i, &v)| if opt.best_set.contains(i) { v } else { 0.0 }).collect();
        let rhs = multilinear_exact(&f, &Point::from_vec_unchecked(join))? + multilinear_exact(&f, &Point::from_vec_unchecked(meet))?;
        Ok(fail(2.0 * sol.value >= rhs - 1e-9 * f.bound().max(1.0), || {
            format!("2F(x) = {} below F(x∨1_C') + F(x∧1_C) = {rhs}", 2.0 * sol.value)
        }))
    })
}

/// `F(x) ≥ ½(1−t)·OPT` at `t = ½` over matroids whose bases pack twice.
pub fn base_guarantee(seed: u64, cases: usize) -> Result<PropertyReport> {
    tally("localsearch", "bases: F(x) ≥ (1-t)/2 OPT", 31, seed, cases, |c, rng| {
        let n = 2 * (1 + c % 5);
        let f = gen::submodular(n, rng)?;
        let m = gen::nu_two_matroid(n, rng)?;
        let sol = local_search_bases(&f, &m, &exact_config(Rational::new(1, 2))?)?;
        let opt = brute_opt(&f, &Feasibility::Bases(m.clone()))?;
        let bound = 0.25 * opt.best_value;
        Ok(fail(sol.value >= bound - 1e-9, || format!("value {} below {bound} on {:?}", sol.value, m.to_spec())))
    })
}

/// On the two-arc directed cut over bases the search keeps at least the
/// symmetric value ½ = ½·OPT.
pub fn symmetric_start_ratio() -> Result<PropertyReport> {
    tally("localsearch", "dircut-bases:2 ratio ≥ 1/2", 32, 0, 1, |_, _| {
        let inst = bundled("dircut-bases:2")?;
        let Feasibility::Bases(m) = &inst.feasibility else {
            return Err(Error::Contract("bundled base instance lost its matroid".into()));
        };
        let sol = local_search_bases(&inst.f, m, &exact_config(Rational::new(1, 2))?)?;
        let opt = brute_opt(&inst.f, &inst.feasibility)?.best_value;
        Ok(fail(sol.value / opt >= 0.5 - 1e-12, || format!("ratio {}", sol.value / opt)))
    })
}

/// With the relaxed threshold each accepted step gains at least
/// `δ·OPT_est/n²`, so there are at most `n²·q·M/OPT_est` of them.
pub fn relaxed_step_bound(seed: u64, cases: usize) -> Result<PropertyReport> {
    tally("localsearch", "relaxed steps ≤ n² q M / OPT_est", 33, seed, cases, |c, rng| {
        let n = 2 + c % 7;
        let f = gen::submodular(n, rng)?;
        let m = gen::loopless_matroid(n, rng)?;
        let mut cfg = exact_config(Rational::new(1, 4))?;
        cfg.slack = Slack::Relaxed;
        let sol = local_search_independence(&f, &m, &cfg)?;
        if sol.opt_estimate <= 0.0 {
            return Ok(None);
        }
        let cap = (n * n) as f64 * cfg.q() as f64 * f.bound() / sol.opt_estimate;
        Ok(fail(sol.trace.len() as f64 <= cap + 1e-9 && sol.trace.len() <= cfg.max_steps, || {
            format!("{} steps above {cap}", sol.trace.len())
        }))
    })
}

// ---- hardness ------------------------------------------------------------

/// `|tφ′| ≤ 4α`, `|t²φ″| ≤ 10α`, `φ(β) < e^{−1/α}` and continuity at the
/// breakpoints, over a spread of `(α, β)`.
pub fn phi_certificates(pairs: usize, points: usize) -> Result<PropertyReport> {
    tally("hardness", "phi certificate", 40, 0, pairs, |c, _| {
        let alphas = [0.12, 0.01, 1e-3, 6.25e-7, 7.8125e-8];
        let betas = [1.0, 0.5, 1e-3, 3.125e-4];
        let (alpha, beta) = (alphas[c % alphas.len()], betas[(c / alphas.len()) % betas.len()]);
        let cert = certify_phi(&PhiFunction::new(alpha, beta)?, points);
        Ok(fail(cert.passes(), || format!("{cert:?}")))
    })
}

fn pair_point(pair: &SmoothedPair, rng: &mut impl Rng) -> Vec<f64> {
    (0..pair.k()).map(|_| rng.random::<f64>()).collect()
}

/// `F̂(x) = Ĝ(x)` bit for bit wherever `D(x) ≤ δ`.
pub fn hat_agreement(name: &str, pair: &SmoothedPair, seed: u64, cases: usize) -> Result<PropertyReport> {
    tally("hardness", format!("F-hat = G-hat where D ≤ delta [{name}]"), 41 + 100 * pair.k() as u64, seed, cases, |_, rng| {
        let mut x = pair.xbar(&pair_point(pair, rng));
        // Nudge inside the D ≤ δ ball when δ is representable.
        let delta = pair.delta();
        if delta > 0.0 {
            let r = (delta / pair.k() as f64).sqrt() * 0.5;
            x.iter_mut().for_each(|v| *v = (*v + rng.random_range(-r..=r)).clamp(0.0, 1.0));
        }
        if pair.d(&x) > delta {
            return Ok(None);
        }
        let (f, g) = (pair.f_hat(&x)?, pair.g_hat(&x)?);
        Ok(fail(f == g, || format!("at {x:?}: {f} vs {g}")))
    })
}

/// `|F̂ − F| ≤ ε`.
pub fn smoothing_error(name: &str, pair: &SmoothedPair, seed: u64, cases: usize) -> Result<PropertyReport> {
    tally("hardness", format!("|F-hat - F| ≤ eps [{name}]"), 42 + 100 * pair.k() as u64, seed, cases, |_, rng| {
        let x = pair_point(pair, rng);
        let gap = (pair.f_hat(&x)? - pair.big_f(&x)?).abs();
        Ok(fail(gap <= pair.epsilon, || format!("at {x:?}: {gap}")))
    })
}

pub fn hat_nonnegative(name: &str, pair: &SmoothedPair, seed: u64, cases: usize) -> Result<PropertyReport> {
    tally("hardness", format!("F-hat, G-hat ≥ 0 [{name}]"), 43 + 100 * pair.k() as u64, seed, cases, |_, rng| {
        let x = pair_point(pair, rng);
        let (f, g) = (pair.f_hat(&x)?, pair.g_hat(&x)?);
        Ok(fail(f >= 0.0 && g >= 0.0, || format!("at {x:?}: {f}, {g}")))
    })
}

/// `|H| ≤ 8M|X|·D` and `‖∇H‖ ≤ 8M|X|·√D` with `H = F − G`, using
/// `∇G(x) = ∇F(x̄)`.
pub fn h_bounds(name: &str, pair: &SmoothedPair, seed: u64, cases: usize) -> Result<PropertyReport> {
    tally("hardness", format!("H bounds [{name}]"), 44 + 100 * pair.k() as u64, seed, cases, |_, rng| {
        let x = pair_point(pair, rng);
        let d = pair.d(&x);
        let c = 8.0 * pair.m_bound * pair.k() as f64;
        let h = pair.eval(&x, Which::H)?;
        let gf = gradient_exact(&pair.f, &Point::from_vec_unchecked(x.clone()))?;
        let gg = gradient_exact(&pair.f, &Point::from_vec_unchecked(pair.xbar(&x)))?;
        let norm = gf.iter().zip(&gg).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let ok = h.abs() <= c * d + 1e-12 && norm <= c * d.sqrt() + 1e-12;
        Ok(fail(ok, || format!("at {x:?}: |H| = {}, |grad H| = {norm}, D = {d}", h.abs())))
    })
}

/// `f̂` and `ĝ` on refinements with `n = 1..=max_n` pass the exhaustive
/// submodularity check.
pub fn refined_submodular(name: &str, pair: &SmoothedPair, seed: u64, max_n: usize) -> Result<PropertyReport> {
    tally("hardness", format!("refined f-hat, g-hat submodular [{name}]"), 45 + 100 * pair.k() as u64, seed, max_n, |c, rng| {
        let n = c + 1;
        let refined = refine(pair, n, rng.random(), RefineMode::Blind)?;
        for which in [Which::FHat, Which::GHat] {
            if let Some(w) = check_submodular(&refined.oracle(which)?)?.witness() {
                return Ok(Some(format!("n = {n}, {which:?}: {w}")));
            }
        }
        Ok(None)
    })
}

/// Moving membership between copies of the same element never changes
/// refined feasibility.
pub fn cluster_feasibility(name: &str, pair: &SmoothedPair, seed: u64, cases: usize) -> Result<PropertyReport> {
    tally("hardness", format!("refined feasibility depends on cluster fractions [{name}]"), 46 + 100 * pair.k() as u64, seed, cases, |_, rng| {
        let n = 3;
        let k = pair.k();
        let refined = refine(pair, n, rng.random(), RefineMode::Blind)?;
        let set: Vec<bool> = (0..n * k).map(|_| rng.random()).collect();
        let mut moved = set.clone();
        let j = rng.random_range(0..k);
        let (a, b) = (rng.random_range(0..n), rng.random_range(0..n));
        moved.swap(a * k + j, b * k + j);
        let (p, q) = (refined.is_feasible(&set)?, refined.is_feasible(&moved)?);
        Ok(fail(p == q, || format!("swapping copies {a}, {b} of {j}: {p} vs {q}")))
    })
}

/// Monotone `f` gives `∂F̂/∂x_i ≥ 0` (central differences at interior points).
pub fn monotone_partials(pair: &SmoothedPair, seed: u64, cases: usize) -> Result<PropertyReport> {
    tally("hardness", "monotone f: partials of F-hat ≥ 0 [cardinality:2]", 47, seed, cases, |_, rng| {
        let h = 1e-6;
        let x: Vec<f64> = (0..pair.k()).map(|_| rng.random_range(h..1.0 - h)).collect();
        for i in 0..pair.k() {
            let (mut up, mut down) = (x.clone(), x.clone());
            up[i] += h;
            down[i] -= h;
            let d = (pair.f_hat(&up)? - pair.f_hat(&down)?) / (2.0 * h);
            if d < -1e-9 {
                return Ok(Some(format!("at {x:?}, i = {i}: {d}")));
            }
        }
        Ok(None)
    })
}

// ---- value bounds --------------------------------------------------------

/// `OPT ≥ M/n` over independent sets and `OPT ≥ M/n²` over bases (after
/// coloop contraction) for loopless matroids.
pub fn value_bounds(seed: u64, cases: usize) -> Result<PropertyReport> {
    tally("bounds", "OPT ≥ M/n (independence), ≥ M/n² (bases)", 50, seed, cases, |c, rng| {
        let n = 1 + c % 8;
        let f = if c % 3 == 2 { random_table(n, rng)? } else { gen::submodular(n, rng)? };
        let m = gen::loopless_matroid(n, rng)?;
        for mode in [BoundMode::Independence, BoundMode::Bases] {
            if let Some(w) = value_bound_check(&f, &m, mode)?.witness() {
                return Ok(Some(format!("{mode:?} on {:?}: {w}", m.to_spec())));
            }
        }
        Ok(None)
    })
}

/// The complete bipartite digraph family: every base has value 1 while
/// `M = n²/4`, for `n ∈ {4, 6, 8}`.
pub fn bipartite_family() -> Result<PropertyReport> {
    tally("bounds", "bipartite tightness OPT = 1, M = n²/4", 51, 0, 3, |c, _| {
        let n = 4 + 2 * c;
        let (f, m) = bipartite_tightness(n)?;
        let feas = Feasibility::Bases(m.clone());
        let all_one = feas.feasible_sets()?.iter().all(|&b| f.eval(b) == 1.0);
        let opt = brute_opt(&f, &feas)?.best_value;
        let big_m = tabulate(&f)?.max();
        let ok = all_one && opt == 1.0 && big_m == (n * n / 4) as f64 && value_bound_check(&f, &m, BoundMode::Bases)?.is_pass();
        Ok(fail(ok, || format!("n = {n}: OPT {opt}, M {big_m}")))
    })
}

pub fn base_opt_below_independence(seed: u64, cases: usize) -> Result<PropertyReport> {
    tally("bounds", "base OPT ≤ independence OPT", 52, seed, cases, |c, rng| {
        let n = 1 + c % 8;
        let f = gen::submodular(n, rng)?;
        let m = gen::loopless_matroid(n, rng)?;
        let (b, i) = (brute_opt(&f, &Feasibility::Bases(m.clone()))?, brute_opt(&f, &Feasibility::Independence(m.clone()))?);
        let counts = b.evaluations == m.enumerate_bases()?.len() as u64
            && i.evaluations == lex_subsets(n).filter(|&s| m.is_independent(s)).count() as u64;
        Ok(fail(b.best_value <= i.best_value && counts, || format!("{} vs {}", b.best_value, i.best_value)))
    })
}

// ---- symmetry ------------------------------------------------------------

pub fn symmetrize_idempotent(seed: u64, cases: usize) -> Result<PropertyReport> {
    tally("symmetry", "symmetrize idempotent (exact)", 60, seed, cases, |c, rng| {
        let n = 2 + c % 6;
        let g = match c % 3 {
            0 => PermGroup::cyclic(n)?,
            1 => PermGroup::symmetric(n.min(5))?,
            _ => bundled(&format!("dircut-bases:{}", 2 + c % 3))?.group,
        };
        let n = g.n();
        let x = Point::from_vec_unchecked((0..n).map(|_| Rational::new(rng.random_range(0..=12), 12)).collect());
        let once = symmetrize(&x, &g);
        Ok(fail(symmetrize(&once, &g) == once, || format!("{:?}", x.coords())))
    })
}

/// `∇G(x)` by central differences equals `∇F(x̄)` on the bundled instances.
pub fn gradient_symmetry(seed: u64, cases: usize) -> Result<PropertyReport> {
    let names = ["k2cut", "cardinality:3", "dircut-bases:2", "dircut-bases:3", "cyclic4"];
    let insts = names.iter().map(|n| bundled(n)).collect::<Result<Vec<_>>>()?;
    tally("symmetry", "grad G(x) = grad F(x-bar)", 61, seed, cases, |c, rng| {
        let inst = &insts[c % insts.len()];
        let n = inst.n();
        let h = 1e-5;
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(h..1.0 - h)).collect();
        let g = |y: &[f64]| multilinear_exact(&inst.f, &symmetrize(&Point::from_vec_unchecked(y.to_vec()), &inst.group));
        let xbar = symmetrize(&Point::from_vec_unchecked(x.clone()), &inst.group);
        let grad = gradient_exact(&inst.f, &xbar)?;
        for i in 0..n {
            let (mut up, mut down) = (x.clone(), x.clone());
            up[i] += h;
            down[i] -= h;
            let fd = (g(&up)? - g(&down)?) / (2.0 * h);
            if (fd - grad[i]).abs() > 1e-6 {
                return Ok(Some(format!("{} coordinate {i}: {fd} vs {}", inst.name, grad[i])));
            }
        }
        Ok(None)
    })
}

/// `OPT_bar ≥ ½·OPT` for independence instances invariant under a
/// transitive (cyclic) group.
pub fn transitive_half(seed: u64, cases: usize) -> Result<PropertyReport> {
    tally("symmetry", "element-transitive: OPT_bar ≥ OPT/2", 62, seed, cases, |c, rng| {
        let n = 2 + c % 7;
        let g = PermGroup::cyclic(n)?;
        let f = gen::group_average(&gen::submodular(n, rng)?, &g)?;
        let divisors: Vec<usize> = (1..=n).filter(|d| n % d == 0).collect();
        let m = if c % 2 == 0 {
            Matroid::uniform(n, rng.random_range(1..=n))?
        } else {
            // Residue classes mod d with a common cap: rotations permute them.
            let d = divisors[rng.random_range(0..divisors.len())];
            let parts = (0..d).map(|r| (r..n).step_by(d).collect()).collect();
            Matroid::partition(n, parts, vec![rng.random_range(1..=n / d); d])?
        };
        if let Some(w) = check_invariance(&f, &g)?.witness() {
            return Ok(Some(format!("averaged function not invariant: {w}")));
        }
        // Under a transitive group the symmetric points of P(M) are exactly
        // c·1 with c ≤ r(X)/n, strongly symmetric or not. A grid on that
        // segment under-estimates OPT_bar, so the test only gets stricter.
        let top = m.full_rank() as f64 / n as f64;
        let mut opt_bar = 0.0f64;
        for s in 0..=1000 {
            let c = top * s as f64 / 1000.0;
            opt_bar = opt_bar.max(multilinear_exact(&f, &Point::constant(n, c))?);
        }
        let opt = brute_opt(&f, &Feasibility::Independence(m))?.best_value;
        Ok(fail(opt_bar >= 0.5 * opt - 1e-9, || format!("n = {n}: OPT_bar {opt_bar} vs OPT {opt}")))
    })
}

/// Welfare-type totally symmetric base instances:
/// `F(c) ≥ (1 − 1/(2ν) − 1/(2ν*))·OPT` at the center `c`.
pub fn center_bound(seed: u64, cases: usize) -> Result<PropertyReport> {
    tally("symmetry", "totally symmetric: F(center) bound", 63, seed, cases, |c, rng| {
        let shapes = [(2, 2), (2, 3), (3, 2), (3, 3), (2, 4), (4, 2), (3, 4), (4, 3)];
        let (items, players) = shapes[c % shapes.len()];
        let v = gen::submodular(items, rng)?;
        let caps: Vec<usize> = (0..items).map(|_| rng.random_range(1..players)).collect();
        let (f, m, g) = gen::welfare(&v, players, &caps)?;
        let nu = m.fractional_base_packing()?.nu;
        let nu_star = m.dual()?.fractional_base_packing()?.nu;
        let bases = m.enumerate_bases()?;
        let base = bases[rng.random_range(0..bases.len())];
        let center = symmetrize(&Point::<Rational>::indicator(m.n(), base), &g);
        let fc = multilinear_exact(&f, &ratio_point(&center))?;
        let opt = brute_opt(&f, &Feasibility::Bases(m))?.best_value;
        let two = Rational::from_integer(2);
        let factor = Rational::one() - Rational::one() / (two * nu) - Rational::one() / (two * nu_star);
        let bound = Scalar::to_f64(&factor) * opt;
        Ok(fail(fc >= bound - 1e-9, || format!("{items}x{players}, caps {caps:?}: F(c) = {fc}, bound {bound}")))
    })
}
