//! The smoothing construction behind the symmetry-gap hardness argument:
//! the cutoff `φ`, the pair `(F̂, Ĝ)`, refined discrete instances and the
//! indistinguishability experiment.

use std::collections::HashMap;

use num_traits::Float;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::brute::Feasibility;
use crate::error::{Error, Result};
use crate::extension::multilinear_exact;
use crate::point::Point;
use crate::rng::{derive_seed, stream};
use crate::scalar::Rational;
use crate::setfn::{tabulate, SetFunction, Table, ValueOracle, Verdict};
use crate::subset::Subset;
use crate::symmetry::{check_invariance, check_strong_symmetry, Perm, PermGroup, SymmetricInstance, STRONG_CAP};

/// Exact `F` underneath every smoothed evaluation.
pub const SMOOTH_CAP: usize = 10;
/// Largest `(n+1)^|X|` enumerated by the count-vector fallback.
pub const COUNT_VECTOR_CAP: usize = 10_000_000;

/// The cutoff `φ`: `1` on `[0, δ]`, `1 − α(s−1)²` up to `δ₂`, then
/// `(1+α)^{−1−α}(s−1)^{−2α}`, where `s = t/scale` and
/// `scale = β/(e^{1/(2α²)} + 1)`. Everything is evaluated through
/// `ln s`, so tiny `α` (with an astronomically small scale) stays finite.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PhiFunction<T> {
    alpha: T,
    ln_beta: T,
    ln_scale: T,
}

fn c<T: Float>(v: f64) -> T {
    T::from(v).expect("representable constant")
}

impl<T: Float> PhiFunction<T> {
    /// `α` is clamped just below `1/8`.
    pub fn new(alpha: T, beta: T) -> Result<Self> {
        if !(alpha > T::zero()) || !(beta > T::zero()) || !alpha.is_finite() || !beta.is_finite() {
            return Err(Error::invalid("phi needs positive finite alpha and beta"));
        }
        let alpha = Self::clamp(alpha);
        let ln_beta = beta.ln();
        Ok(PhiFunction { alpha, ln_beta, ln_scale: ln_beta - Self::ln_unscaled_beta(alpha) })
    }

    /// Scale 1, so `δ = 1`, `δ₂ = 1 + (1+α)^{−1/2}` and `β = e^{1/(2α²)} + 1`.
    pub fn unscaled(alpha: T) -> Result<Self> {
        if !(alpha > T::zero()) {
            return Err(Error::invalid("phi needs positive alpha"));
        }
        let alpha = Self::clamp(alpha);
        Ok(PhiFunction { alpha, ln_beta: Self::ln_unscaled_beta(alpha), ln_scale: T::zero() })
    }

    fn clamp(alpha: T) -> T {
        alpha.min(c::<T>(0.125) - T::epsilon())
    }

    /// `ln(e^K + 1)` with `K = 1/(2α²)`.
    fn ln_unscaled_beta(alpha: T) -> T {
        let k = T::one() / (c::<T>(2.0) * alpha * alpha);
        k + (-k).exp().ln_1p()
    }

    pub fn alpha(&self) -> T {
        self.alpha
    }

    pub fn beta(&self) -> T {
        self.ln_beta.exp()
    }

    pub fn ln_beta(&self) -> T {
        self.ln_beta
    }

    pub fn ln_scale(&self) -> T {
        self.ln_scale
    }

    /// `δ = scale`; underflows to zero when `1/(2α²)` is large.
    pub fn delta(&self) -> T {
        self.ln_scale.exp()
    }

    pub fn delta2(&self) -> T {
        self.ln_scale.exp() * self.s2()
    }

    pub fn s2(&self) -> T {
        T::one() + (T::one() + self.alpha).powf(c(-0.5))
    }

    /// `(s, ln s)` for `t > 0`.
    fn unscale(&self, t: T) -> (T, T) {
        if self.ln_scale == T::zero() {
            (t, t.ln())
        } else {
            let ln_s = t.ln() - self.ln_scale;
            (ln_s.exp(), ln_s)
        }
    }

    /// `(φ, tφ′, t²φ″)` at `t ≥ 0`. Breakpoints belong to the piece on
    /// their right, so `φ″` there is the right limit.
    pub fn eval_scaled_derivatives(&self, t: T) -> (T, T, T) {
        if !(t > T::zero()) {
            return (T::one(), T::zero(), T::zero());
        }
        self.scaled_derivatives_at(self.unscale(t).1)
    }

    /// `(φ, tφ′, t²φ″)` as functions of `ln s = ln t − ln δ`, which stays
    /// representable where `t` itself underflows.
    pub fn scaled_derivatives_at(&self, ln_s: T) -> (T, T, T) {
        let (zero, one, two) = (T::zero(), T::one(), c::<T>(2.0));
        let a = self.alpha;
        let s = ln_s.exp();
        if ln_s < zero {
            return (one, zero, zero);
        }
        if s < self.s2() {
            let u = s - one;
            return (one - a * u * u, -two * a * u * s, -two * a * s * s);
        }
        let phi = self.ln_phi_tail(ln_s).exp();
        // s/(s−1) = 1/(1 − e^{−ln s})
        let ratio = one / -(-ln_s).exp_m1();
        (phi, -two * a * phi * ratio, two * a * (one + two * a) * phi * ratio * ratio)
    }

    fn ln_phi_tail(&self, ln_s: T) -> T {
        let a = self.alpha;
        let ln_s_minus_1 = ln_s + (-(-ln_s).exp()).ln_1p();
        -(T::one() + a) * a.ln_1p() - c::<T>(2.0) * a * ln_s_minus_1
    }

    /// `ln φ(t)`, finite even where `φ` underflows.
    pub fn ln_phi(&self, t: T) -> T {
        if !(t > T::zero()) {
            return T::zero();
        }
        self.ln_phi_at(self.unscale(t).1)
    }

    /// `ln φ` as a function of `ln s`.
    pub fn ln_phi_at(&self, ln_s: T) -> T {
        let (zero, one) = (T::zero(), T::one());
        let s = ln_s.exp();
        if ln_s < zero {
            zero
        } else if s < self.s2() {
            (-self.alpha * (s - one) * (s - one)).ln_1p()
        } else {
            self.ln_phi_tail(ln_s)
        }
    }

    /// `φ`, `φ′` or `φ″` for `order` 0, 1, 2.
    pub fn eval(&self, t: T, order: u8) -> T {
        let (p, tp, ttp) = self.eval_scaled_derivatives(t);
        match order {
            0 => p,
            1 if t > T::zero() => tp / t,
            2 if t > T::zero() => ttp / (t * t),
            1 | 2 => T::zero(),
            _ => panic!("phi derivative order {order} not supported"),
        }
    }
}

/// Which smoothed quantity to evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Which {
    F,
    G,
    D,
    H,
    J,
    FTilde,
    FHat,
    GHat,
}

/// `(F̂, Ĝ)` built from a symmetric instance with
/// `β = ε/(16M|X|)` and `α = ε/(2000M|X|³)`.
#[derive(Clone, Debug)]
pub struct SmoothedPair {
    pub f: SetFunction,
    pub group: PermGroup,
    pub feasibility: Feasibility,
    pub epsilon: f64,
    pub m_bound: f64,
    pub alpha: f64,
    pub beta: f64,
    pub phi: PhiFunction<f64>,
    table: Table,
}

#[derive(Clone, Debug, Serialize)]
pub struct PairConstants {
    pub epsilon: f64,
    pub m_bound: f64,
    pub alpha: f64,
    pub beta: f64,
    pub delta: f64,
    pub ln_delta: f64,
    pub delta2: f64,
    pub j_coefficient: f64,
}

impl SmoothedPair {
    /// `epsilon` defaults to `0.01·M`.
    pub fn new(f: SetFunction, group: PermGroup, feasibility: Feasibility, epsilon: Option<f64>) -> Result<Self> {
        let k = f.n();
        Error::check_size("smoothed pair", k, SMOOTH_CAP)?;
        if group.n() != k || feasibility.n() != k {
            return Err(Error::invalid("function, group and feasibility must share the ground set"));
        }
        if let Verdict::Fail(w) = check_invariance(&f, &group)? {
            return Err(Error::NotInvariant(w));
        }
        let m_bound = f.bound();
        if !(m_bound > 0.0) {
            return Err(Error::invalid("smoothing needs a positive value bound M"));
        }
        let epsilon = epsilon.unwrap_or(0.01 * m_bound);
        if !(epsilon > 0.0) {
            return Err(Error::invalid("epsilon must be positive"));
        }
        let kx = k as f64;
        let beta = epsilon / (16.0 * m_bound * kx);
        let alpha = epsilon / (2000.0 * m_bound * kx.powi(3));
        let phi = PhiFunction::new(alpha, beta)?;
        let table = tabulate(&f)?;
        Ok(SmoothedPair { f, group, feasibility, epsilon, m_bound, alpha: phi.alpha(), beta, phi, table })
    }

    pub fn from_instance(inst: &SymmetricInstance, epsilon: Option<f64>) -> Result<Self> {
        Self::new(inst.f.clone(), inst.group.clone(), inst.feasibility.clone(), epsilon)
    }

    pub fn k(&self) -> usize {
        self.f.n()
    }

    pub fn delta(&self) -> f64 {
        self.phi.delta()
    }

    pub fn constants(&self) -> PairConstants {
        PairConstants {
            epsilon: self.epsilon,
            m_bound: self.m_bound,
            alpha: self.alpha,
            beta: self.beta,
            delta: self.delta(),
            ln_delta: self.phi.ln_scale(),
            delta2: self.phi.delta2(),
            j_coefficient: self.j_coefficient(),
        }
    }

    /// `256·M·|X|·α`.
    pub fn j_coefficient(&self) -> f64 {
        256.0 * self.m_bound * self.k() as f64 * self.alpha
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.k() {
            return Err(Error::invalid(format!("point has {} coordinates, expected {}", x.len(), self.k())));
        }
        Ok(())
    }

    /// Orbit means; an orbit whose coordinates already agree is kept as is,
    /// so symmetric points are fixed exactly.
    pub fn xbar(&self, x: &[f64]) -> Vec<f64> {
        let mut out = x.to_vec();
        for o in self.group.orbits() {
            let first = x[o.iter().next().expect("nonempty orbit")];
            if o.iter().all(|i| x[i] == first) {
                continue;
            }
            let mean = o.iter().map(|i| x[i]).sum::<f64>() / o.len() as f64;
            o.iter().for_each(|i| out[i] = mean);
        }
        out
    }

    pub fn big_f(&self, x: &[f64]) -> Result<f64> {
        self.check(x)?;
        multilinear_exact(&self.table, &Point::from_vec_unchecked(x.to_vec()))
    }

    pub fn big_g(&self, x: &[f64]) -> Result<f64> {
        self.big_f(&self.xbar(x))
    }

    /// `‖x − x̄‖²`.
    pub fn d(&self, x: &[f64]) -> f64 {
        x.iter().zip(self.xbar(x)).map(|(a, b)| (a - b) * (a - b)).sum()
    }

    /// `∇D = 2(x − x̄)`.
    pub fn grad_d(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(self.xbar(x)).map(|(a, b)| 2.0 * (a - b)).collect()
    }

    /// `|X|² + 3|X|Σx − (Σx)²`.
    pub fn j(&self, x: &[f64]) -> f64 {
        let k = self.k() as f64;
        let s: f64 = x.iter().sum();
        k * k + 3.0 * k * s - s * s
    }

    /// `(1 − φ(D))F + φ(D)G`, returning `G` or `F` exactly at the extremes.
    pub fn f_tilde(&self, x: &[f64]) -> Result<f64> {
        let p = self.phi.eval(self.d(x), 0);
        if p == 1.0 {
            self.big_g(x)
        } else if p == 0.0 {
            self.big_f(x)
        } else {
            Ok((1.0 - p) * self.big_f(x)? + p * self.big_g(x)?)
        }
    }

    pub fn eval(&self, x: &[f64], which: Which) -> Result<f64> {
        self.check(x)?;
        Ok(match which {
            Which::F => self.big_f(x)?,
            Which::G => self.big_g(x)?,
            Which::D => self.d(x),
            Which::H => self.big_f(x)? - self.big_g(x)?,
            Which::J => self.j(x),
            Which::FTilde => self.f_tilde(x)?,
            Which::FHat => self.f_tilde(x)? + self.j_coefficient() * self.j(x),
            Which::GHat => self.big_g(x)? + self.j_coefficient() * self.j(x),
        })
    }

    pub fn f_hat(&self, x: &[f64]) -> Result<f64> {
        self.eval(x, Which::FHat)
    }

    pub fn g_hat(&self, x: &[f64]) -> Result<f64> {
        self.eval(x, Which::GHat)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RefineMode {
    /// Permutations stay hidden.
    Blind,
    /// Permutations are exposed for testing.
    Planted,
}

/// Discrete instances on `N × X`; element `(i, x)` has index `i·|X| + x`.
#[derive(Clone, Debug)]
pub struct RefinedPair {
    pair: SmoothedPair,
    n: usize,
    sigma: Vec<Perm>,
    mode: RefineMode,
    seed: u64,
}

/// Draws `σ^(i)` uniformly from the closure with one counter-based stream
/// per index, so both modes see the same permutations for a seed. Rejects
/// feasibility that is not strongly symmetric.
pub fn refine(pair: &SmoothedPair, n: usize, seed: u64, mode: RefineMode) -> Result<RefinedPair> {
    if n == 0 {
        return Err(Error::invalid("refinement size must be at least 1"));
    }
    if pair.k() <= STRONG_CAP {
        if let Verdict::Fail(w) = check_strong_symmetry(&pair.feasibility, &pair.group)? {
            return Err(Error::NotStronglySymmetric(w));
        }
    }
    let order = pair.group.order();
    let sigma = (0..n)
        .map(|i| pair.group.elements()[stream(seed, i as u64).random_range(0..order)].clone())
        .collect();
    Ok(RefinedPair { pair: pair.clone(), n, sigma, mode, seed })
}

impl RefinedPair {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.pair.k()
    }

    pub fn ground_size(&self) -> usize {
        self.n * self.k()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn pair(&self) -> &SmoothedPair {
        &self.pair
    }

    pub fn sigma(&self) -> Option<&[Perm]> {
        match self.mode {
            RefineMode::Planted => Some(&self.sigma),
            RefineMode::Blind => None,
        }
    }

    fn check(&self, set: &[bool]) {
        assert_eq!(set.len(), self.ground_size(), "query has the wrong ground size");
    }

    /// `n·ξ_j(S) = |{i : (i, σ^(i)(j)) ∈ S}|`.
    pub fn xi_counts(&self, set: &[bool]) -> Vec<usize> {
        self.check(set);
        let k = self.k();
        let mut c = vec![0; k];
        for (i, sigma) in self.sigma.iter().enumerate() {
            for (j, cj) in c.iter_mut().enumerate() {
                *cj += set[i * k + sigma[j]] as usize;
            }
        }
        c
    }

    /// `n·x_j(S) = |S ∩ (N × {j})|`, the unpermuted cluster counts.
    pub fn cluster_counts(&self, set: &[bool]) -> Vec<usize> {
        self.check(set);
        let k = self.k();
        let mut c = vec![0; k];
        for (e, &b) in set.iter().enumerate() {
            c[e % k] += b as usize;
        }
        c
    }

    fn fractions(&self, counts: &[usize]) -> Vec<f64> {
        counts.iter().map(|&c| c as f64 / self.n as f64).collect()
    }

    pub fn xi(&self, set: &[bool]) -> Vec<f64> {
        self.fractions(&self.xi_counts(set))
    }

    pub fn f_hat(&self, set: &[bool]) -> f64 {
        self.pair.f_hat(&self.xi(set)).expect("sizes checked at construction")
    }

    pub fn g_hat(&self, set: &[bool]) -> f64 {
        self.pair.g_hat(&self.xi(set)).expect("sizes checked at construction")
    }

    /// `ξ(S) ∈ P(𝓕)`.
    pub fn is_feasible(&self, set: &[bool]) -> Result<bool> {
        self.counts_feasible(&self.xi_counts(set))
    }

    fn counts_feasible(&self, counts: &[usize]) -> Result<bool> {
        let x = Point::from_vec_unchecked(counts.iter().map(|&c| Rational::new(c as i128, self.n as i128)).collect());
        self.pair.feasibility.contains_point(&x)
    }

    pub fn oracle(&self, which: Which) -> Result<RefinedOracle<'_>> {
        if !matches!(which, Which::FHat | Which::GHat) {
            return Err(Error::invalid("refined oracles exist for f-hat and g-hat only"));
        }
        Error::check_size("refined subset oracle", self.ground_size(), 64)?;
        Ok(RefinedOracle { refined: self, which })
    }
}

/// `f̂` or `ĝ` as a [`ValueOracle`] on at most 64 refined elements.
pub struct RefinedOracle<'a> {
    refined: &'a RefinedPair,
    which: Which,
}

impl ValueOracle for RefinedOracle<'_> {
    fn ground_size(&self) -> usize {
        self.refined.ground_size()
    }

    fn value(&self, s: Subset) -> f64 {
        let set: Vec<bool> = (0..self.ground_size()).map(|e| s.contains(e)).collect();
        match self.which {
            Which::FHat => self.refined.f_hat(&set),
            _ => self.refined.g_hat(&set),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GapMethodUsed {
    BruteForce,
    /// Every achievable `ξ` is `c/n` for a count vector `c ∈ {0..n}^X`,
    /// and both oracles and feasibility depend on `ξ` alone.
    CountVectors,
}

#[derive(Clone, Debug, Serialize)]
pub struct GapReport {
    pub max_f_hat: f64,
    pub max_g_hat: f64,
    pub ratio: f64,
    /// `n·ξ` at the maximizers.
    pub argmax_f_hat: Vec<usize>,
    pub argmax_g_hat: Vec<usize>,
    pub method: GapMethodUsed,
    pub evaluations: u64,
}

/// Maxima of `f̂` and `ĝ` over the refined family, by brute force when
/// `n·|X| ≤ 20`, otherwise over count vectors.
pub fn gap_report(refined: &RefinedPair) -> Result<GapReport> {
    let k = refined.k();
    let n = refined.n;
    let mut cache: HashMap<Vec<usize>, Option<(f64, f64)>> = HashMap::new();
    let mut best_f = (f64::NEG_INFINITY, Vec::new());
    let mut best_g = (f64::NEG_INFINITY, Vec::new());
    let mut evaluations = 0;
    let mut visit = |counts: Vec<usize>| -> Result<()> {
        let entry = match cache.get(&counts) {
            Some(e) => *e,
            None => {
                let e = if refined.counts_feasible(&counts)? {
                    let xi = refined.fractions(&counts);
                    Some((refined.pair.f_hat(&xi)?, refined.pair.g_hat(&xi)?))
                } else {
                    None
                };
                cache.insert(counts.clone(), e);
                e
            }
        };
        if let Some((fv, gv)) = entry {
            evaluations += 1;
            if fv > best_f.0 {
                best_f = (fv, counts.clone());
            }
            if gv > best_g.0 {
                best_g = (gv, counts);
            }
        }
        Ok(())
    };
    let method = if n * k <= 20 {
        for mask in 0..1u64 << (n * k) {
            let set: Vec<bool> = (0..n * k).map(|e| mask >> e & 1 == 1).collect();
            visit(refined.xi_counts(&set))?;
        }
        GapMethodUsed::BruteForce
    } else {
        let total = (n as f64 + 1.0).powi(k as i32);
        if total > COUNT_VECTOR_CAP as f64 {
            return Err(Error::SizeCap { what: "count vectors (n+1)^|X|", size: total as usize, cap: COUNT_VECTOR_CAP });
        }
        let mut c = vec![0usize; k];
        loop {
            visit(c.clone())?;
            let Some(p) = (0..k).find(|&p| c[p] < n) else { break };
            c[p] += 1;
            c[..p].iter_mut().for_each(|v| *v = 0);
        }
        GapMethodUsed::CountVectors
    };
    if best_f.1.is_empty() {
        return Err(Error::invalid("refined family has no feasible set"));
    }
    Ok(GapReport {
        max_f_hat: best_f.0,
        max_g_hat: best_g.0,
        ratio: best_g.0 / best_f.0,
        argmax_f_hat: best_f.1,
        argmax_g_hat: best_g.1,
        method,
        evaluations,
    })
}

/// Query policies for the experiment.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    /// Each element independently with probability ½.
    Random,
    /// Every copy picks a random union of orbits, so `ξ` is symmetric.
    Symmetric,
    /// Grow a set by the best of a few random candidate additions.
    Greedy,
    /// Flip single elements of a random set, keeping improvements.
    LocalProbe,
}

impl std::str::FromStr for Strategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(Strategy::Random),
            "symmetric" => Ok(Strategy::Symmetric),
            "greedy" => Ok(Strategy::Greedy),
            "local" | "local-probe" => Ok(Strategy::LocalProbe),
            _ => Err(Error::invalid(format!("unknown strategy {s}; use random, symmetric, greedy or local-probe"))),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ExperimentConfig {
    pub strategy: Strategy,
    pub query_budget: usize,
    pub trials: usize,
    pub n: usize,
    pub seed: u64,
    /// Guess `f̂` once an answer exceeds this; `(OPT_bar + OPT)/2` is the
    /// natural choice.
    pub threshold: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Faced {
    F,
    G,
}

#[derive(Clone, Debug, Serialize)]
pub struct TrialLog {
    pub trial: usize,
    pub faced: Faced,
    pub max_d: f64,
    pub exceed_count: usize,
    pub best_value: f64,
    pub guess: Faced,
    /// Guess of the rule that compares each answer with `Ĝ(x̄)`.
    pub consistency_guess: Faced,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    /// The bound times the budget is below 1.
    Concentrated,
    /// The bound is at least 1 per query budget, so it certifies nothing.
    Vacuous,
    /// `n = 1`: no averaging over copies at all.
    SmallN,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub delta: f64,
    /// `2|X|e^{−2nδ/|X|}`.
    pub per_query_bound: f64,
    /// The per-query bound times the budget.
    pub per_trial_bound: f64,
    pub query_exceed_rate: f64,
    pub trial_exceed_rate: f64,
    pub bound_holds: bool,
    pub success_rate: f64,
    pub consistency_success_rate: f64,
    pub regime: Regime,
    pub trials: Vec<TrialLog>,
}

fn random_set(rng: &mut impl Rng, len: usize) -> Vec<bool> {
    (0..len).map(|_| rng.random::<bool>()).collect()
}

/// Runs `trials` independent refinements (alternating `f̂`, `ĝ`), each
/// probed by `strategy` for `query_budget` queries.
pub fn distinguish_experiment(pair: &SmoothedPair, cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    if cfg.trials == 0 || cfg.query_budget == 0 {
        return Err(Error::invalid("trials and query budget must be positive"));
    }
    let k = pair.k() as f64;
    let delta = pair.delta();
    let per_query_bound = 2.0 * k * (-2.0 * cfg.n as f64 * delta / k).exp();
    let logs: Vec<TrialLog> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| run_trial(pair, cfg, t))
        .collect::<Result<_>>()?;
    let total_queries = (cfg.trials * cfg.query_budget) as f64;
    let query_exceed_rate = logs.iter().map(|l| l.exceed_count).sum::<usize>() as f64 / total_queries;
    let trial_exceed_rate = logs.iter().filter(|l| l.exceed_count > 0).count() as f64 / cfg.trials as f64;
    let success_rate = logs.iter().filter(|l| l.guess == l.faced).count() as f64 / cfg.trials as f64;
    let consistency_success_rate = logs.iter().filter(|l| l.consistency_guess == l.faced).count() as f64 / cfg.trials as f64;
    let per_trial_bound = per_query_bound * cfg.query_budget as f64;
    let regime = if cfg.n == 1 {
        Regime::SmallN
    } else if per_trial_bound >= 1.0 {
        Regime::Vacuous
    } else {
        Regime::Concentrated
    };
    Ok(ExperimentReport {
        config: cfg.clone(),
        delta,
        per_query_bound,
        per_trial_bound,
        query_exceed_rate,
        trial_exceed_rate,
        bound_holds: query_exceed_rate <= per_query_bound && trial_exceed_rate <= per_trial_bound,
        success_rate,
        consistency_success_rate,
        regime,
        trials: logs,
    })
}

fn run_trial(pair: &SmoothedPair, cfg: &ExperimentConfig, t: usize) -> Result<TrialLog> {
    let trial_seed = derive_seed(cfg.seed, t as u64);
    let refined = refine(pair, cfg.n, trial_seed, RefineMode::Blind)?;
    let faced = if t % 2 == 0 { Faced::F } else { Faced::G };
    let mut rng = stream(trial_seed, u64::MAX);
    let len = refined.ground_size();
    let delta = pair.delta();
    let mut max_d = 0.0f64;
    let mut exceed_count = 0;
    let mut best_value = f64::NEG_INFINITY;
    let mut inconsistent = false;
    let mut asked = 0;
    let mut ask = |set: &[bool]| -> Result<f64> {
        asked += 1;
        let xi = refined.xi(set);
        let d = pair.d(&xi);
        max_d = max_d.max(d);
        exceed_count += (d > delta) as usize;
        let answer = match faced {
            Faced::F => pair.f_hat(&xi)?,
            Faced::G => pair.g_hat(&xi)?,
        };
        // The prober knows the unpermuted fractions, whose symmetrization
        // equals that of ξ; under ĝ the answer is determined by them.
        let expected = pair.g_hat(&refined.fractions(&refined.cluster_counts(set)))?;
        if (answer - expected).abs() > 1e-12 * expected.abs().max(1.0) {
            inconsistent = true;
        }
        best_value = best_value.max(answer);
        Ok(answer)
    };
    let budget = cfg.query_budget;
    match cfg.strategy {
        Strategy::Random => {
            for _ in 0..budget {
                ask(&random_set(&mut rng, len))?;
            }
        }
        Strategy::Symmetric => {
            let k = pair.k();
            for _ in 0..budget {
                let mut set = vec![false; len];
                for i in 0..cfg.n {
                    for o in pair.group.orbits() {
                        if rng.random::<bool>() {
                            o.iter().for_each(|x| set[i * k + x] = true);
                        }
                    }
                }
                ask(&set)?;
            }
        }
        Strategy::Greedy => {
            let mut left = budget;
            while left > 0 {
                let mut set = vec![false; len];
                let mut cur = ask(&set)?;
                left -= 1;
                while left > 0 {
                    let mut best: Option<(f64, usize)> = None;
                    for _ in 0..16.min(left) {
                        let e = rng.random_range(0..len);
                        if set[e] {
                            continue;
                        }
                        set[e] = true;
                        let v = ask(&set)?;
                        set[e] = false;
                        left -= 1;
                        if best.is_none_or(|(b, _)| v > b) {
                            best = Some((v, e));
                        }
                    }
                    match best {
                        Some((v, e)) if v > cur => {
                            set[e] = true;
                            cur = v;
                        }
                        _ => break,
                    }
                }
            }
        }
        Strategy::LocalProbe => {
            let mut set = random_set(&mut rng, len);
            let mut cur = ask(&set)?;
            for _ in 1..budget {
                let e = rng.random_range(0..len);
                set[e] = !set[e];
                let v = ask(&set)?;
                if v > cur {
                    cur = v;
                } else {
                    set[e] = !set[e];
                }
            }
        }
    }
    let guess = if best_value > cfg.threshold { Faced::F } else { Faced::G };
    let consistency_guess = if inconsistent { Faced::F } else { Faced::G };
    Ok(TrialLog { trial: t, faced, max_d, exceed_count, best_value, guess, consistency_guess })
}

/// Worst-case ratios on a grid: `max |tφ′|/α`, `max |t²φ″|/α`, and
/// `ln φ(β) + 1/α` (negative when `φ(β) < e^{−1/α}`).
#[derive(Clone, Debug, Serialize)]
pub struct PhiCertificate {
    pub alpha: f64,
    pub beta: f64,
    pub max_t_dphi_over_alpha: f64,
    pub max_t2_ddphi_over_alpha: f64,
    pub ln_phi_beta_plus_inv_alpha: f64,
    /// Largest jump of `φ` and of `tφ′` across `δ` and `δ₂`.
    pub jump_phi: f64,
    pub jump_t_dphi: f64,
    /// Whether the margin above exceeds its own rounding error.
    pub margin_resolved: bool,
}

impl PhiCertificate {
    pub fn passes(&self) -> bool {
        self.max_t_dphi_over_alpha <= 4.0
            && self.max_t2_ddphi_over_alpha <= 10.0
            && self.ln_phi_beta_plus_inv_alpha < 0.0
            && self.margin_resolved
            && self.jump_phi <= 1e-9
            && self.jump_t_dphi <= 1e-9
    }
}

/// Samples `points` values of `ln s = ln t − ln δ`: half evenly between
/// `−3` and `ln(β/δ) + 3`, half in `[−3, ln(δ₂/δ) + 3]` where the pieces
/// meet (for small `α` the first range is astronomically wide). Working in
/// `ln s` keeps the grid meaningful when `δ` underflows. The breakpoints
/// themselves are skipped.
///
/// The margin in `φ(β) < e^{−1/α}` is about `α` next to terms of size
/// `1/α`; below `α ≈ 3·10⁻⁸` it drops under f64 resolution and the
/// certificate fails rather than claim it.
pub fn certify_phi(phi: &PhiFunction<f64>, points: usize) -> PhiCertificate {
    let a = phi.alpha();
    let ln_s2 = phi.s2().ln();
    let ln_s_beta = phi.ln_beta() - phi.ln_scale();
    let wide = (-3.0, ln_s_beta + 3.0);
    let dense = (-3.0, ln_s2 + 3.0);
    let half = points / 2;
    let (mut m1, mut m2) = (0.0f64, 0.0f64);
    for k in 0..points {
        let ((lo, hi), idx, len) = if k < half { (wide, k, half) } else { (dense, k - half, points - half) };
        let u = lo + (hi - lo) * (idx as f64 + 0.5) / len as f64;
        if u.abs() < 1e-12 || (u - ln_s2).abs() < 1e-12 {
            continue;
        }
        let (_, d1, d2) = phi.scaled_derivatives_at(u);
        m1 = m1.max(d1.abs() / a);
        m2 = m2.max(d2.abs() / a);
    }
    let jump = |ln_b: f64| {
        let h = 1e-12;
        let (p0, d0, _) = phi.scaled_derivatives_at(ln_b - h);
        let (p1, d1, _) = phi.scaled_derivatives_at(ln_b + h);
        ((p1 - p0).abs(), (d1 - d0).abs())
    };
    let (j1, j2) = (jump(0.0), jump(ln_s2));
    let margin = phi.ln_phi_at(ln_s_beta) + 1.0 / a;
    let rounding = 4.0 * (2.0 * a * ln_s_beta.abs() + 1.0 / a) * f64::EPSILON;
    PhiCertificate {
        alpha: a,
        beta: phi.beta(),
        max_t_dphi_over_alpha: m1,
        max_t2_ddphi_over_alpha: m2,
        ln_phi_beta_plus_inv_alpha: margin,
        jump_phi: j1.0.max(j2.0),
        jump_t_dphi: j1.1.max(j2.1),
        margin_resolved: margin.abs() > rounding,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symmetry::bundled;

    fn k2_pair() -> SmoothedPair {
        SmoothedPair::from_instance(&bundled("k2cut").unwrap(), Some(0.01)).unwrap()
    }

    #[test]
    fn unscaled_phi_values() {
        let phi = PhiFunction::<f64>::unscaled(0.1).unwrap();
        assert_eq!(phi.eval(1.0, 0), 1.0);
        assert_eq!(phi.eval(1.0 - 1e-9, 1), 0.0);
        assert!(phi.eval(1.0, 1).abs() < 1e-15);
        let d2 = 1.0 + 1.1f64.powf(-0.5);
        assert!((phi.eval(d2, 0) - 1.0 / 1.1).abs() < 1e-12);
        assert!((phi.eval(d2, 1) + 0.2 * 1.1f64.powf(-0.5)).abs() < 1e-9);
        assert!(phi.ln_phi(phi.beta()) <= -1.0 / 0.1);
        assert_eq!(phi.delta(), 1.0);
    }

    #[test]
    fn phi_f32_agrees() {
        let p64 = PhiFunction::<f64>::new(0.1, 0.5).unwrap();
        let p32 = PhiFunction::<f32>::new(0.1, 0.5).unwrap();
        for t in [1e-30, 1e-22, 1e-21, 1e-10, 0.01, 0.5, 3.0] {
            let (a, b) = (p64.eval(t, 0), p32.eval(t as f32, 0) as f64);
            assert!((a - b).abs() < 1e-4, "{t}: {a} vs {b}");
        }
    }

    #[test]
    fn alpha_is_clamped() {
        let phi = PhiFunction::<f64>::new(0.5, 1.0).unwrap();
        assert!(phi.alpha() < 0.125);
        assert!(certify_phi(&phi, 1000).passes());
    }

    #[test]
    fn k2_constants_underflow_delta() {
        let p = k2_pair();
        assert!((p.alpha - 6.25e-7).abs() < 1e-18);
        assert!((p.beta - 0.01 / 32.0).abs() < 1e-15);
        assert_eq!(p.delta(), 0.0);
        assert!(p.phi.ln_scale() < -1e12);
    }

    #[test]
    fn smoothed_k2_at_origin() {
        let p = k2_pair();
        let v = p.f_hat(&[0.0, 0.0]).unwrap();
        assert!((v - 2048.0 * p.alpha).abs() < 1e-15);
        assert_eq!(p.eval(&[0.0, 0.0], Which::J).unwrap(), 4.0);
        assert_eq!(p.f_hat(&[0.3, 0.3]).unwrap(), p.g_hat(&[0.3, 0.3]).unwrap());
        assert_eq!(p.d(&[1.0, 0.0]), 0.5);
        assert_eq!(p.grad_d(&[1.0, 0.0]), vec![1.0, -1.0]);
    }

    #[test]
    fn refinement_basics() {
        let p = k2_pair();
        let r = refine(&p, 1, 7, RefineMode::Planted).unwrap();
        let sigma = &r.sigma().unwrap()[0];
        let set = vec![true, false];
        let mut xi = vec![0.0; 2];
        xi[sigma.iter().position(|&v| v == 0).unwrap()] = 1.0;
        assert_eq!(r.f_hat(&set), p.f_hat(&xi).unwrap());
        assert!(refine(&p, 3, 7, RefineMode::Blind).unwrap().sigma().is_none());
        let r3 = refine(&p, 3, 1, RefineMode::Planted).unwrap();
        for which in [Which::FHat, Which::GHat] {
            assert!(crate::setfn::check_submodular(&r3.oracle(which).unwrap()).unwrap().is_pass());
        }
    }

    #[test]
    fn planted_and_blind_share_sigma() {
        let p = k2_pair();
        let a = refine(&p, 10, 3, RefineMode::Planted).unwrap();
        let b = refine(&p, 10, 3, RefineMode::Blind).unwrap();
        let set: Vec<bool> = (0..20).map(|e| e % 3 == 0).collect();
        assert_eq!(a.xi(&set), b.xi(&set));
    }

    #[test]
    fn gap_report_k2() {
        let p = k2_pair();
        let r = gap_report(&refine(&p, 5, 0, RefineMode::Blind).unwrap()).unwrap();
        assert_eq!(r.method, GapMethodUsed::BruteForce);
        assert!(r.max_f_hat >= 0.98 && r.max_g_hat <= 0.51, "{r:?}");
        let c = gap_report(&refine(&p, 11, 0, RefineMode::Blind).unwrap()).unwrap();
        assert_eq!(c.method, GapMethodUsed::CountVectors);
        assert!(c.max_f_hat >= 0.98 && c.max_g_hat <= 0.51);
    }

    #[test]
    fn cyclic_family_is_rejected() {
        let inst = bundled("cyclic4").unwrap();
        let p = SmoothedPair::from_instance(&inst, None).unwrap();
        assert!(matches!(refine(&p, 2, 0, RefineMode::Blind), Err(Error::NotStronglySymmetric(_))));
    }

    #[test]
    fn symmetric_strategy_is_blind() {
        let p = k2_pair();
        let cfg = ExperimentConfig { strategy: Strategy::Symmetric, query_budget: 50, trials: 20, n: 20, seed: 4, threshold: 0.75 };
        let rep = distinguish_experiment(&p, &cfg).unwrap();
        assert_eq!(rep.success_rate, 0.5);
        assert_eq!(rep.consistency_success_rate, 0.5);
        assert_eq!(rep.query_exceed_rate, 0.0);
    }
}
