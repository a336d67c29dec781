//! Exact reference optima by enumeration and the value-bound checks that
//! relate `OPT` to `M = max_S f(S)`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lp::convex_combination;
use crate::matroid::Matroid;
use crate::point::Point;
use crate::scalar::Rational;
use crate::setfn::{SetFunction, ValueOracle, Verdict, Witness};
use crate::subset::{lex_subsets, Subset};

pub const BRUTE_CAP: usize = 20;

/// The feasible family `𝓕` of an instance.
#[derive(Clone, Debug, PartialEq)]
pub enum Feasibility {
    Unconstrained { n: usize },
    Independence(Matroid),
    Bases(Matroid),
    /// Listed sets, kept in lexicographic order.
    Family { n: usize, sets: Vec<Subset> },
}

impl Feasibility {
    pub fn family(n: usize, mut sets: Vec<Subset>) -> Result<Self> {
        if sets.is_empty() {
            return Err(Error::invalid("feasible family is empty"));
        }
        if let Some(s) = sets.iter().find(|s| s.max_element().is_some_and(|m| m >= n)) {
            return Err(Error::invalid(format!("family set {s} leaves the ground set of size {n}")));
        }
        sets.sort_by(|a, b| a.lex_cmp(*b));
        sets.dedup();
        Ok(Feasibility::Family { n, sets })
    }

    pub fn n(&self) -> usize {
        match self {
            Feasibility::Unconstrained { n } | Feasibility::Family { n, .. } => *n,
            Feasibility::Independence(m) | Feasibility::Bases(m) => m.n(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Feasibility::Unconstrained { .. } => "unconstrained",
            Feasibility::Independence(_) => "independence",
            Feasibility::Bases(_) => "bases",
            Feasibility::Family { .. } => "family",
        }
    }

    pub fn contains(&self, s: Subset) -> bool {
        match self {
            Feasibility::Unconstrained { n } => s.is_subset_of(Subset::full(*n)),
            Feasibility::Independence(m) => m.is_independent(s),
            Feasibility::Bases(m) => m.is_independent(s) && s.len() == m.full_rank(),
            Feasibility::Family { sets, .. } => sets.contains(&s),
        }
    }

    /// Feasible sets in lexicographic order.
    pub fn feasible_sets(&self) -> Result<Vec<Subset>> {
        Error::check_size("feasible-set enumeration", self.n(), BRUTE_CAP)?;
        let mut out = Vec::new();
        match self {
            Feasibility::Family { sets, .. } => out.clone_from(sets),
            Feasibility::Unconstrained { n } => out.extend(lex_subsets(*n)),
            Feasibility::Independence(m) => dfs(m, Subset::EMPTY, 0, &mut |s| out.push(s)),
            Feasibility::Bases(m) => {
                let r = m.full_rank();
                dfs(m, Subset::EMPTY, 0, &mut |s| {
                    if s.len() == r {
                        out.push(s)
                    }
                })
            }
        }
        Ok(out)
    }

    /// `x ∈ P(𝓕)`: the matroid polytopes for matroid kinds, the cube when
    /// unconstrained, and an exact convex-combination LP for families.
    pub fn contains_point(&self, x: &Point<Rational>) -> Result<bool> {
        if x.len() != self.n() {
            return Err(Error::invalid("point dimension differs from the ground set"));
        }
        let one = Rational::from_integer(1);
        Ok(match self {
            Feasibility::Unconstrained { .. } => x.coords().iter().all(|c| *c >= Rational::from_integer(0) && *c <= one),
            Feasibility::Independence(m) => m.in_polytope(x, &one, false),
            Feasibility::Bases(m) => m.in_polytope(x, &one, true),
            Feasibility::Family { n, sets } => {
                let pts: Vec<Vec<Rational>> = sets.iter().map(|s| Point::indicator(*n, *s).into_coords()).collect();
                convex_combination(&pts, x.coords()).is_some()
            }
        })
    }
}

/// Preorder DFS over independent sets, extending by larger elements only;
/// this visits sorted element lists in lexicographic order.
fn dfs(m: &Matroid, s: Subset, from: usize, visit: &mut impl FnMut(Subset)) {
    visit(s);
    for i in from..m.n() {
        let t = s.with(i);
        if m.is_independent(t) {
            dfs(m, t, i + 1, visit);
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BruteResult {
    pub best_set: Subset,
    pub best_value: f64,
    /// Number of feasible sets evaluated.
    pub evaluations: u64,
}

/// `max{f(S): S ∈ 𝓕}`, first maximizer in lexicographic order.
pub fn brute_opt<O: ValueOracle>(f: &O, feas: &Feasibility) -> Result<BruteResult> {
    if f.ground_size() != feas.n() {
        return Err(Error::invalid("function and feasibility have different ground sets"));
    }
    let mut best: Option<(Subset, f64)> = None;
    let mut evaluations = 0;
    for s in feas.feasible_sets()? {
        evaluations += 1;
        let v = f.value(s);
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((s, v));
        }
    }
    let (best_set, best_value) = best.ok_or_else(|| Error::invalid("no feasible set"))?;
    Ok(BruteResult { best_set, best_value, evaluations })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundMode {
    Independence,
    Bases,
}

/// `OPT ≥ M/n` over independent sets of a loopless matroid, or `OPT ≥ M/n²`
/// over bases once coloops are removed too. Loops are deleted and coloops
/// contracted (`f'(S) = f(S ∪ C)`) before the comparison; `n` counts the
/// remaining elements. A failure reports `[argmax M, argmax OPT]` with
/// `lhs = OPT` and `rhs = M/n` (or `M/n²`).
pub fn value_bound_check<O: ValueOracle>(f: &O, m: &Matroid, mode: BoundMode) -> Result<Verdict> {
    Error::check_size("value bound check", m.n(), BRUTE_CAP)?;
    let stripped = m.strip_loops_and_coloops();
    let (matroid, contracted) = match mode {
        BoundMode::Independence => {
            let loops = Subset::from_indices(stripped.loops.iter().copied());
            (m.restrict(m.active().difference(loops)), Subset::EMPTY)
        }
        BoundMode::Bases => (stripped.matroid.clone(), Subset::from_indices(stripped.coloops.iter().copied())),
    };
    let ground = matroid.active();
    let n = ground.len();
    if n == 0 {
        return Ok(Verdict::Pass);
    }
    let g = crate::setfn::FnOracle::new(m.n(), |s: Subset| f.value(s.union(contracted)));
    let (mut m_set, mut m_val) = (Subset::EMPTY, f64::NEG_INFINITY);
    for s in lex_subsets(m.n()).filter(|s| s.is_subset_of(ground)) {
        let v = g.value(s);
        if v > m_val {
            (m_set, m_val) = (s, v);
        }
    }
    let feas = match mode {
        BoundMode::Independence => Feasibility::Independence(matroid),
        BoundMode::Bases => Feasibility::Bases(matroid),
    };
    let opt = brute_opt(&g, &feas)?;
    let divisor = match mode {
        BoundMode::Independence => n as f64,
        BoundMode::Bases => (n * n) as f64,
    };
    let rhs = m_val / divisor;
    let tol = 1e-12 * m_val.abs().max(1.0);
    Ok(if opt.best_value + tol >= rhs {
        Verdict::Pass
    } else {
        Verdict::Fail(Witness {
            sets: vec![m_set.union(contracted), opt.best_set.union(contracted)],
            lhs: opt.best_value,
            rhs,
        })
    })
}

/// Complete bipartite digraph `X₁ → X₂` with `|X₁| = |X₂| = n/2`, and the
/// partition matroid whose bases take one element of `X₁` and `n/2 − 1` of
/// `X₂`. Every base has value 1 while `f(X₁) = n²/4`.
pub fn bipartite_tightness(n: usize) -> Result<(SetFunction, Matroid)> {
    if n < 4 || n % 2 == 1 {
        return Err(Error::invalid("bipartite tightness family needs an even n ≥ 4"));
    }
    let h = n / 2;
    let arcs = (0..h).flat_map(|a| (h..n).map(move |b| (a, b, 1.0))).collect();
    let f = SetFunction::directed_cut(n, arcs)?;
    let m = Matroid::partition(n, vec![(0..h).collect(), (h..n).collect()], vec![1, h - 1])?;
    Ok((f, m))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dicut(k: usize) -> SetFunction {
        SetFunction::directed_cut(2 * k, (0..k).map(|i| (i, k + i, 1.0)).collect()).unwrap()
    }

    fn hard_bases(k: usize) -> Matroid {
        Matroid::partition(2 * k, vec![(0..k).collect(), (k..2 * k).collect()], vec![1, k - 1]).unwrap()
    }

    #[test]
    fn examples() {
        let k2 = SetFunction::cut(2, vec![(0, 1, 1.0)]).unwrap();
        let r = brute_opt(&k2, &Feasibility::Unconstrained { n: 2 }).unwrap();
        assert_eq!((r.best_set, r.best_value, r.evaluations), (Subset::singleton(0), 1.0, 4));

        let r = brute_opt(&dicut(2), &Feasibility::Bases(hard_bases(2))).unwrap();
        assert_eq!(r.best_value, 1.0);
        assert_eq!(r.best_set, Subset::from_indices([0, 3]));
        assert_eq!(r.evaluations, 4);

        let zero = SetFunction::threshold(3, 0).unwrap();
        let r = brute_opt(&zero, &Feasibility::Independence(Matroid::uniform(3, 2).unwrap())).unwrap();
        assert_eq!((r.best_set, r.best_value, r.evaluations), (Subset::EMPTY, 0.0, 7));
    }

    #[test]
    fn lexicographic_enumeration() {
        let m = Matroid::uniform(3, 2).unwrap();
        let sets = Feasibility::Independence(m).feasible_sets().unwrap();
        let mut sorted = sets.clone();
        sorted.sort_by(|a, b| a.lex_cmp(*b));
        assert_eq!(sets, sorted);
    }

    #[test]
    fn tightness_family() {
        for n in [4, 6, 8] {
            let (f, m) = bipartite_tightness(n).unwrap();
            let bases = m.enumerate_bases().unwrap();
            assert!(bases.iter().all(|&b| f.eval(b) == 1.0));
            let x1 = Subset::full(n / 2);
            assert_eq!(f.eval(x1), (n * n / 4) as f64);
            assert!(value_bound_check(&f, &m, BoundMode::Bases).unwrap().is_pass());
        }
    }

    #[test]
    fn bound_check_strips_loops() {
        let f = SetFunction::cut(1, vec![]).unwrap();
        assert!(value_bound_check(&f, &Matroid::free(1).unwrap(), BoundMode::Independence).unwrap().is_pass());
        let f = SetFunction::cut(3, vec![(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
        let m = Matroid::partition(3, vec![vec![0, 1], vec![2]], vec![1, 0]).unwrap();
        assert!(value_bound_check(&f, &m, BoundMode::Independence).unwrap().is_pass());
        assert!(value_bound_check(&f, &m, BoundMode::Bases).unwrap().is_pass());
    }

    #[test]
    fn family_membership() {
        let fam = Feasibility::family(4, vec![Subset::from_indices([0, 1]), Subset::from_indices([2, 3])]).unwrap();
        let half = Point::constant(4, Rational::new(1, 2));
        assert!(fam.contains_point(&half).unwrap());
        let skew = Point::from_vec_unchecked(vec![Rational::new(1, 2), Rational::new(1, 4), Rational::new(1, 2), Rational::new(3, 4)]);
        assert!(!fam.contains_point(&skew).unwrap());
    }
}
