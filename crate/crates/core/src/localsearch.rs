//! Fractional local search over `P_t(M)` and `B_t(M)`.
//!
//! The iterate is kept as integer units `u` with `x = u/q`, so feasibility of
//! a step reduces to integer slacks `q·r(S) − u(S)` over all subsets.

use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extension::{gradient_exact, Evaluator};
use crate::matroid::{Matroid, ENUM_CAP, RANK_TABLE_CAP};
use crate::pipage::{pipage_round, round_matroid};
use crate::point::Point;
use crate::rng::derive_seed;
use crate::scalar::{format_rational, Rational};
use crate::setfn::ValueOracle;
use crate::subset::Subset;

/// Threshold that an improving step must beat.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "value", rename_all = "lowercase")]
pub enum Slack {
    /// Any strict improvement (up to float noise).
    Zero,
    /// `δ·OPT_est/n²`.
    Relaxed,
    Fixed(f64),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SearchConfig {
    #[serde(with = "crate::scalar::serde_rational")]
    pub t: Rational,
    pub evaluator: Evaluator,
    pub slack: Slack,
    pub max_steps: usize,
    pub steepest: bool,
    pub round_seed: u64,
}

impl SearchConfig {
    pub fn new(t: Rational) -> Result<Self> {
        if t <= Rational::zero() || t > Rational::from_integer(1) {
            return Err(Error::invalid(format!("t must lie in (0,1], got {}", format_rational(&t))));
        }
        Ok(SearchConfig {
            t,
            evaluator: Evaluator::Exact,
            slack: Slack::Zero,
            max_steps: 100_000,
            steepest: false,
            round_seed: 0,
        })
    }

    pub fn q(&self) -> i64 {
        self.t.denom().to_i64().expect("small denominator")
    }

    pub fn r(&self) -> i64 {
        self.t.numer().to_i64().expect("small numerator")
    }

    pub fn delta(&self) -> Rational {
        Rational::new(1, *self.t.denom())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "move", rename_all = "lowercase")]
pub enum Direction {
    Add { j: usize },
    Remove { i: usize },
    /// `+e_j − e_i`.
    Swap { i: usize, j: usize },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Step {
    pub direction: Direction,
    pub gain: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct FractionalSolution {
    pub x: Point<Rational>,
    pub value: f64,
    pub trace: Vec<Step>,
    pub converged: bool,
    pub opt_estimate: f64,
    /// Per-step threshold that was used, before any sampling widening.
    pub threshold: f64,
    pub rounded: Option<Subset>,
    pub rounded_value: Option<f64>,
    pub warnings: Vec<String>,
}

/// `(3 − √5)/2`, the largest `t` covered by the independence guarantee.
pub fn golden_t() -> f64 {
    (3.0 - 5f64.sqrt()) / 2.0
}

/// `t − t²/2`.
pub fn independence_factor(t: f64) -> f64 {
    t - t * t / 2.0
}

/// `(1 − t)/2`.
pub fn base_factor(t: f64) -> f64 {
    (1.0 - t) / 2.0
}

struct State<'a> {
    n: usize,
    q: i64,
    cap: i64,
    ranks: std::sync::Arc<Vec<u8>>,
    units: Vec<i64>,
    slack: Vec<i64>,
    m: &'a Matroid,
}

impl<'a> State<'a> {
    fn new(m: &'a Matroid, q: i64, cap: i64, units: Vec<i64>) -> Result<Self> {
        let ranks = m.rank_table()?;
        let n = m.n();
        let mut slack = vec![0i64; 1 << n];
        for (s, v) in slack.iter_mut().enumerate() {
            let used: i64 = Subset(s as u64).iter().map(|i| units[i]).sum();
            *v = q * ranks[s] as i64 - used;
        }
        Ok(State { n, q, cap, ranks, units, slack, m })
    }

    fn point(&self) -> Point<Rational> {
        Point::from_vec_unchecked(self.units.iter().map(|&u| Rational::new(u as i128, self.q as i128)).collect())
    }

    fn point_f64(&self, dir: Option<Direction>) -> Point<f64> {
        let mut u = self.units.clone();
        match dir {
            Some(Direction::Add { j }) => u[j] += 1,
            Some(Direction::Remove { i }) => u[i] -= 1,
            Some(Direction::Swap { i, j }) => {
                u[i] -= 1;
                u[j] += 1;
            }
            None => {}
        }
        Point::from_vec_unchecked(u.iter().map(|&v| v as f64 / self.q as f64).collect())
    }

    /// `min_{S ∋ j} slack(S)` for every `j`.
    fn min_slack_containing(&self) -> Vec<i64> {
        let mut out = vec![i64::MAX; self.n];
        for (s, &v) in self.slack.iter().enumerate() {
            for (j, o) in out.iter_mut().enumerate() {
                if s >> j & 1 == 1 && v < *o {
                    *o = v;
                }
            }
        }
        out
    }

    fn swap_feasible(&self, i: usize, j: usize, min_with_j: i64) -> bool {
        if self.units[i] < 1 || self.units[j] >= self.cap || !self.m.active().contains(j) {
            return false;
        }
        if min_with_j >= 1 {
            return true;
        }
        self.slack
            .iter()
            .enumerate()
            .all(|(s, &v)| v >= 1 || s >> j & 1 == 0 || s >> i & 1 == 1)
    }

    fn feasible_moves(&self, base_mode: bool) -> Vec<Direction> {
        let minc = self.min_slack_containing();
        let mut out = Vec::new();
        if !base_mode {
            for j in 0..self.n {
                if self.m.active().contains(j) && self.units[j] < self.cap && minc[j] >= 1 {
                    out.push(Direction::Add { j });
                }
            }
            for i in 0..self.n {
                if self.units[i] >= 1 {
                    out.push(Direction::Remove { i });
                }
            }
        }
        for i in 0..self.n {
            for j in 0..self.n {
                if i != j && self.swap_feasible(i, j, minc[j]) {
                    out.push(Direction::Swap { i, j });
                }
            }
        }
        out
    }

    fn apply(&mut self, dir: Direction) {
        let (plus, minus) = match dir {
            Direction::Add { j } => (Some(j), None),
            Direction::Remove { i } => (None, Some(i)),
            Direction::Swap { i, j } => (Some(j), Some(i)),
        };
        if let Some(j) = plus {
            self.units[j] += 1;
            for (s, v) in self.slack.iter_mut().enumerate() {
                if s >> j & 1 == 1 {
                    *v -= 1;
                }
            }
        }
        if let Some(i) = minus {
            self.units[i] -= 1;
            for (s, v) in self.slack.iter_mut().enumerate() {
                if s >> i & 1 == 1 {
                    *v += 1;
                }
            }
        }
        debug_assert!(self.slack.iter().all(|&v| v >= 0));
        debug_assert!(self.units.iter().all(|&u| (0..=self.cap).contains(&u)));
        let _ = &self.ranks;
    }
}

fn check_inputs<O: ValueOracle>(f: &O, m: &Matroid) -> Result<()> {
    if f.ground_size() != m.n() {
        return Err(Error::invalid("function and matroid have different ground sets"));
    }
    Error::check_size("local search", m.n(), RANK_TABLE_CAP)
}

/// `n · max_i f({i})` over non-loops.
pub fn opt_estimate_independence<O: ValueOracle>(f: &O, m: &Matroid) -> f64 {
    let n = m.n();
    let best = (0..n)
        .filter(|&i| m.is_independent(Subset::singleton(i)))
        .map(|i| f.value(Subset::singleton(i)))
        .fold(0.0, f64::max);
    best * n as f64
}

/// Value of the greedy base (largest value gain first, lowest index on ties).
pub fn opt_estimate_bases<O: ValueOracle>(f: &O, m: &Matroid) -> f64 {
    let mut s = Subset::EMPTY;
    loop {
        let mut best: Option<(f64, usize)> = None;
        for i in m.active().difference(s).iter() {
            if m.is_independent(s.with(i)) {
                let v = f.value(s.with(i));
                if best.is_none_or(|(b, _)| v > b) {
                    best = Some((v, i));
                }
            }
        }
        match best {
            Some((_, i)) => s = s.with(i),
            None => break,
        }
    }
    let v = f.value(s);
    if v > 0.0 {
        v
    } else {
        opt_estimate_independence(f, m)
    }
}

fn run<O: ValueOracle>(f: &O, m: &Matroid, cfg: &SearchConfig, start: Vec<i64>, base_mode: bool, opt_est: f64) -> Result<FractionalSolution> {
    let n = m.n();
    let mut state = State::new(m, cfg.q(), cfg.r(), start)?;
    let delta = 1.0 / cfg.q() as f64;
    let threshold = match cfg.slack {
        Slack::Zero => 0.0,
        Slack::Relaxed => delta * opt_est / (n * n).max(1) as f64,
        Slack::Fixed(v) => v,
    };
    let mut trace = Vec::new();
    let mut converged = false;
    for step in 0..cfg.max_steps {
        let ev = match cfg.evaluator {
            Evaluator::Exact => Evaluator::Exact,
            Evaluator::Sampled { samples, seed } => Evaluator::Sampled { samples, seed: derive_seed(seed, step as u64) },
        };
        let (fx, se_x) = ev.evaluate(f, &state.point_f64(None))?;
        let noise = 1e-12 * fx.abs().max(1.0);
        let mut chosen: Option<(Direction, f64)> = None;
        for dir in state.feasible_moves(base_mode) {
            let (fy, se_y) = ev.evaluate(f, &state.point_f64(Some(dir)))?;
            let gain = fy - fx;
            let bar = threshold + noise + 5.0 * (se_x * se_x + se_y * se_y).sqrt();
            if gain > bar && chosen.is_none_or(|(_, g)| gain > g) {
                chosen = Some((dir, gain));
                if !cfg.steepest {
                    break;
                }
            }
        }
        match chosen {
            Some((direction, gain)) => {
                state.apply(direction);
                debug_assert!(m.in_polytope(&state.point(), &cfg.t, base_mode));
                trace.push(Step { direction, gain });
            }
            None => {
                converged = true;
                break;
            }
        }
    }
    let x = state.point();
    let (value, _) = cfg.evaluator.evaluate(f, &x.to_f64())?;
    let mut warnings = Vec::new();
    if !converged {
        warnings.push(format!("step cap {} reached; returning the last iterate", cfg.max_steps));
    }
    let (rounded, rounded_value) = if n <= ENUM_CAP {
        let out = if base_mode { pipage_round(m, &x, cfg.round_seed)? } else { round_matroid(m, &x, cfg.round_seed)? };
        (Some(out.set), Some(f.value(out.set)))
    } else {
        warnings.push(format!("rounding skipped: n = {n} exceeds {ENUM_CAP}"));
        (None, None)
    };
    Ok(FractionalSolution { x, value, trace, converged, opt_estimate: opt_est, threshold, rounded, rounded_value, warnings })
}

/// Local search over `P_t(M)` starting from `0`, moving along `+e_j`, `−e_i`
/// and `e_j − e_i` by `δ = 1/q`, then extended pipage rounding.
pub fn local_search_independence<O: ValueOracle>(f: &O, m: &Matroid, cfg: &SearchConfig) -> Result<FractionalSolution> {
    check_inputs(f, m)?;
    let mut sol = run(f, m, cfg, vec![0; m.n()], false, opt_estimate_independence(f, m))?;
    if crate::scalar::Scalar::to_f64(&cfg.t) > golden_t() {
        sol.warnings
            .push(format!("t = {} exceeds (3 - sqrt 5)/2; no approximation guarantee applies", format_rational(&cfg.t)));
    }
    Ok(sol)
}

/// Swap-only local search over `B_t(M)` from [`find_base_start`], then
/// pipage rounding to a base.
pub fn local_search_bases<O: ValueOracle>(f: &O, m: &Matroid, cfg: &SearchConfig) -> Result<FractionalSolution> {
    check_inputs(f, m)?;
    let start = find_base_start(m, cfg.t)?;
    let q = Rational::from_integer(cfg.q() as i128);
    let units = start.x.coords().iter().map(|c| (c * q).to_integer() as i64).collect();
    run(f, m, cfg, units, true, opt_estimate_bases(f, m))
}

#[derive(Clone, Debug, Serialize)]
pub struct BaseStart {
    pub x: Point<Rational>,
    /// `q` bases, each element in at most `r` of them; `x` is their average.
    pub bases: Vec<Subset>,
}

/// Are there `k` bases using element `i` at most `caps[i]` times?
/// Equivalent to `k·r(T) + caps(X∖T) ≥ k·r(X)` for every `T`.
fn packable(ranks: &[u8], caps: &[i64], k: i64) -> bool {
    let n = caps.len();
    let total: i64 = caps.iter().sum();
    let full = ranks[(1usize << n) - 1] as i64;
    (0..1usize << n).all(|t| {
        let inside: i64 = Subset(t as u64).iter().map(|i| caps[i]).sum();
        k * ranks[t] as i64 + total - inside >= k * full
    })
}

/// A point of `B_t(M)` with coordinates in `(1/q)ℤ`, written as the average
/// of `q` bases that use each element at most `r` times (`t = r/q`).
pub fn find_base_start(m: &Matroid, t: Rational) -> Result<BaseStart> {
    Error::check_size("base start", m.n(), ENUM_CAP)?;
    let cfg = SearchConfig::new(t)?;
    let (q, r) = (cfg.q(), cfg.r());
    let n = m.n();
    let ranks = m.rank_table()?;
    let mut caps: Vec<i64> = (0..n).map(|i| if m.active().contains(i) { r } else { 0 }).collect();
    if !packable(&ranks, &caps, q) {
        let nu = m
            .fractional_base_packing()
            .map(|c| format_rational(&c.nu))
            .unwrap_or_else(|e| format!("unknown ({e})"));
        return Err(Error::Infeasible { nu, inv_t: format_rational(&(Rational::from_integer(1) / t)) });
    }
    let all = m.enumerate_bases()?;
    let mut bases = Vec::with_capacity(q as usize);
    for k in (0..q).rev() {
        let pick = all
            .iter()
            .copied()
            .find(|b| {
                b.iter().all(|i| caps[i] > 0) && {
                    let mut rest = caps.clone();
                    b.iter().for_each(|i| rest[i] -= 1);
                    packable(&ranks, &rest, k)
                }
            })
            .ok_or_else(|| Error::Contract("base packing lost feasibility".into()))?;
        pick.iter().for_each(|i| caps[i] -= 1);
        bases.push(pick);
    }
    let mut units = vec![0i128; n];
    for b in &bases {
        b.iter().for_each(|i| units[i] += 1);
    }
    let x = Point::from_vec_unchecked(units.into_iter().map(|u| Rational::new(u, q as i128)).collect());
    debug_assert!(m.in_polytope(&x, &t, true));
    Ok(BaseStart { x, bases })
}

/// Largest violation of the first-order local optimality conditions at `x`:
/// `∂_i F ≥ 0` where `−e_i` is feasible, `∂_j F ≤ 0` where `+e_j` is, and
/// `∂_j F − ∂_i F ≤ 0` where `e_j − e_i` is. Only swaps in base mode.
pub fn local_opt_violation<O: ValueOracle>(f: &O, m: &Matroid, x: &Point<Rational>, t: Rational, base_mode: bool) -> Result<f64> {
    check_inputs(f, m)?;
    let cfg = SearchConfig::new(t)?;
    let q = Rational::from_integer(cfg.q() as i128);
    let units: Vec<i64> = x.coords().iter().map(|c| (c * q).to_integer() as i64).collect();
    let state = State::new(m, cfg.q(), cfg.r(), units)?;
    let grad = gradient_exact(f, &x.to_f64())?;
    Ok(state
        .feasible_moves(base_mode)
        .into_iter()
        .map(|d| match d {
            Direction::Add { j } => grad[j],
            Direction::Remove { i } => -grad[i],
            Direction::Swap { i, j } => grad[j] - grad[i],
        })
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extension::multilinear_exact;
    use crate::setfn::SetFunction;

    fn q(p: i128, d: i128) -> Rational {
        Rational::new(p, d)
    }

    fn hard_bases(k: usize) -> Matroid {
        Matroid::partition(2 * k, vec![(0..k).collect(), (k..2 * k).collect()], vec![1, k - 1]).unwrap()
    }

    fn dicut(k: usize) -> SetFunction {
        SetFunction::directed_cut(2 * k, (0..k).map(|i| (i, k + i, 1.0)).collect()).unwrap()
    }

    #[test]
    fn k2_cut_on_free_matroid() {
        let f = SetFunction::cut(2, vec![(0, 1, 1.0)]).unwrap();
        let m = Matroid::free(2).unwrap();
        let sol = local_search_independence(&f, &m, &SearchConfig::new(q(1, 2)).unwrap()).unwrap();
        assert_eq!(sol.x, Point::from_vec_unchecked(vec![q(1, 2), q(0, 1)]));
        assert!((sol.value - 0.5).abs() < 1e-12);
        assert!(sol.converged);
        assert_eq!(sol.trace.len(), 1);
        assert!(m.is_independent(sol.rounded.unwrap()));
        assert!(sol.warnings.iter().any(|w| w.contains("guarantee")));
    }

    #[test]
    fn base_start_examples() {
        let s = find_base_start(&hard_bases(2), q(1, 2)).unwrap();
        assert_eq!(s.x, Point::constant(4, q(1, 2)));
        let s = find_base_start(&Matroid::uniform(4, 2).unwrap(), q(1, 2)).unwrap();
        assert_eq!(s.x, Point::constant(4, q(1, 2)));
        assert_eq!(s.bases, vec![Subset::from_indices([0, 1]), Subset::from_indices([2, 3])]);
        let s = find_base_start(&Matroid::uniform(4, 2).unwrap(), q(1, 1)).unwrap();
        assert_eq!(s.bases, vec![Subset::from_indices([0, 1])]);
        let e = find_base_start(&Matroid::uniform(4, 2).unwrap(), q(1, 3)).unwrap_err();
        assert!(matches!(e, Error::Infeasible { ref nu, .. } if nu == "2"), "{e}");
    }

    #[test]
    fn base_search_on_hard_instance() {
        let f = dicut(2);
        let sol = local_search_bases(&f, &hard_bases(2), &SearchConfig::new(q(1, 2)).unwrap()).unwrap();
        assert!(sol.value >= 0.25 - 1e-12);
        let sym = multilinear_exact(&f, &Point::constant(4, 0.5)).unwrap();
        assert!((sym - 0.5f64).abs() < 1e-12);
        assert!(hard_bases(2).enumerate_bases().unwrap().contains(&sol.rounded.unwrap()));
    }

    #[test]
    fn single_base_matroid() {
        let f = SetFunction::cut(3, vec![(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
        let m = Matroid::free(3).unwrap();
        let sol = local_search_bases(&f, &m, &SearchConfig::new(q(1, 1)).unwrap()).unwrap();
        assert_eq!(sol.rounded, Some(Subset::full(3)));
        assert!(sol.trace.is_empty());
    }

    #[test]
    fn local_optimum_conditions_hold() {
        let f = SetFunction::coverage(&[vec![0, 1], vec![1, 2], vec![3], vec![0, 3]], None).unwrap();
        let m = Matroid::uniform(4, 2).unwrap();
        let t = q(1, 3);
        let sol = local_search_independence(&f, &m, &SearchConfig::new(t).unwrap()).unwrap();
        assert!(local_opt_violation(&f, &m, &sol.x, t, false).unwrap() <= 1e-9);
    }

    #[test]
    fn step_cap_returns_flagged_iterate() {
        let f = SetFunction::threshold(3, 3).unwrap();
        let m = Matroid::free(3).unwrap();
        let mut cfg = SearchConfig::new(q(1, 4)).unwrap();
        cfg.max_steps = 1;
        let sol = local_search_independence(&f, &m, &cfg).unwrap();
        assert!(!sol.converged);
        assert_eq!(sol.trace.len(), 1);
    }
}
