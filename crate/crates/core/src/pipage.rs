//! Randomized pipage rounding in the base polytope, the Adjust step for the
//! independence polytope, and their composition. All arithmetic is exact.

use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::extension::multilinear_exact;
use crate::matroid::{subset_sums, Matroid, ENUM_CAP};
use crate::point::Point;
use crate::scalar::Rational;
use crate::setfn::ValueOracle;
use crate::subset::Subset;

/// One randomized choice: with probability `p` the point moves to `first`,
/// otherwise to `second`; `p·first + (1−p)·second = before` holds exactly.
#[derive(Clone, Debug, Serialize)]
pub struct Branch {
    pub step: BranchKind,
    #[serde(with = "crate::scalar::serde_rational")]
    pub p: Rational,
    pub before: Point<Rational>,
    pub first: Point<Rational>,
    pub second: Point<Rational>,
    pub took_first: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BranchKind {
    Adjust { i: usize },
    Pipage { i: usize, j: usize },
}

impl Branch {
    pub fn martingale_holds(&self) -> bool {
        let one = Rational::one();
        (0..self.before.len())
            .all(|k| self.p * self.first[k] + (one - self.p) * self.second[k] == self.before[k])
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RoundingOutcome {
    pub set: Subset,
    /// `F` after every randomized step, when an objective was supplied.
    pub intermediate_values: Vec<f64>,
    pub seed: u64,
    pub branches: Vec<Branch>,
    /// Elements deleted by Adjust.
    pub deleted: Subset,
}

fn check_size(m: &Matroid) -> Result<()> {
    Error::check_size("pipage rounding", m.n(), ENUM_CAP)
}

fn point(y: &[Rational]) -> Point<Rational> {
    Point::from_vec_unchecked(y.to_vec())
}

/// Draws `true` with exact probability `p ∈ [0,1]`.
fn bernoulli(rng: &mut ChaCha8Rng, p: Rational) -> bool {
    if p.is_zero() {
        return false;
    }
    if p >= Rational::one() {
        return true;
    }
    match (p.numer().to_u64(), p.denom().to_u64()) {
        (Some(a), Some(b)) => rng.random_range(0..b) < a,
        _ => rng.random::<f64>() < p.numer().to_f64().unwrap() / p.denom().to_f64().unwrap(),
    }
}

/// Move mass from `j` to `i` until a rank constraint `A ∋ i, A ∌ j` becomes
/// tight or `y_j` hits zero. Ties among minimizing `A` go to the
/// lexicographically smallest set. `A = {j}` when `y_j` is below the
/// minimum or already zero.
pub fn hit_constraint(m: &Matroid, y: &[Rational], i: usize, j: usize) -> Result<(Vec<Rational>, Subset)> {
    check_size(m)?;
    assert_ne!(i, j);
    let ranks = m.rank_table()?;
    let sums = subset_sums(y);
    let mut best: Option<(Rational, Subset)> = None;
    for mask in 0..1u64 << m.n() {
        let a = Subset(mask);
        if !a.contains(i) || a.contains(j) {
            continue;
        }
        let slack = Rational::from_integer(ranks[mask as usize] as i128) - sums[mask as usize];
        let better = match &best {
            None => true,
            Some((d, b)) => slack < *d || (slack == *d && a.lex_cmp(*b).is_lt()),
        };
        if better {
            best = Some((slack, a));
        }
    }
    let (mut delta, mut a) = best.expect("some set contains i but not j");
    if y[j] < delta || y[j].is_zero() {
        delta = y[j];
        a = Subset::singleton(j);
    }
    let mut out = y.to_vec();
    out[i] += delta;
    out[j] -= delta;
    Ok((out, a))
}

fn is_fractional(v: &Rational) -> bool {
    !v.is_integer()
}

struct Rounder<'a, O> {
    f: Option<&'a O>,
    rng: ChaCha8Rng,
    branches: Vec<Branch>,
    values: Vec<f64>,
}

impl<O: ValueOracle> Rounder<'_, O> {
    fn record(&mut self, step: BranchKind, p: Rational, before: &[Rational], first: &[Rational], second: &[Rational]) -> bool {
        let took_first = bernoulli(&mut self.rng, p);
        self.branches.push(Branch {
            step,
            p,
            before: point(before),
            first: point(first),
            second: point(second),
            took_first,
        });
        if let Some(f) = self.f {
            let chosen = if took_first { first } else { second };
            let v = multilinear_exact(f, &point(chosen).to_f64()).unwrap_or(f64::NAN);
            self.values.push(v);
        }
        took_first
    }

    fn pipage(&mut self, m: &Matroid, y: &mut Vec<Rational>) -> Result<()> {
        let n = m.n();
        let guard = 4 * n * n + 16;
        let mut iterations = 0;
        while y.iter().any(is_fractional) {
            let mut t = Subset::full(n);
            loop {
                let frac: Vec<usize> = t.iter().filter(|&k| is_fractional(&y[k])).collect();
                if frac.len() < 2 {
                    break;
                }
                iterations += 1;
                if iterations > guard {
                    return Err(Error::Contract("pipage rounding did not terminate".into()));
                }
                let (i, j) = (frac[0], frac[1]);
                let (y_plus, a_plus) = hit_constraint(m, y, i, j)?;
                let (y_minus, a_minus) = hit_constraint(m, y, j, i)?;
                let d_plus = y_plus[i] - y[i];
                let d_minus = y_minus[j] - y[j];
                let p = if (d_plus + d_minus).is_zero() { Rational::zero() } else { d_plus / (d_plus + d_minus) };
                let before = y.clone();
                if self.record(BranchKind::Pipage { i, j }, p, &before, &y_minus, &y_plus) {
                    *y = y_minus;
                    t = t.intersection(a_minus);
                } else {
                    *y = y_plus;
                    t = t.intersection(a_plus);
                }
                debug_assert!(m.in_polytope(&point(y), &Rational::one(), true));
            }
            if t == Subset::full(n) && y.iter().filter(|v| is_fractional(v)).count() == 1 {
                return Err(Error::Contract("a single fractional coordinate in a base point".into()));
            }
        }
        Ok(())
    }

    fn adjust(&mut self, m: &Matroid, x: &mut [Rational]) -> Result<Matroid> {
        let n = m.n();
        let one = Rational::one();
        let mut cur = m.clone();
        let guard = 4 * n * n + 16;
        for _ in 0..guard {
            if cur.in_polytope(&point(x), &one, true) {
                return Ok(cur);
            }
            let ranks = cur.rank_table()?;
            let sums = subset_sums(x);
            let headroom = |i: usize| {
                (0..1usize << n)
                    .filter(|&s| s >> i & 1 == 1)
                    .map(|s| Rational::from_integer(ranks[s] as i128) - sums[s])
                    .min()
                    .expect("nonempty")
            };
            if let Some((i, h)) = cur.active().iter().map(|i| (i, headroom(i))).find(|(_, h)| h.is_positive()) {
                let x_max = x[i] + h;
                let p = x[i] / x_max;
                let before = x.to_vec();
                let mut up = before.clone();
                up[i] = x_max;
                let mut down = before.clone();
                down[i] = Rational::zero();
                let chosen = if self.record(BranchKind::Adjust { i }, p, &before, &up, &down) { up } else { down };
                x.copy_from_slice(&chosen);
            }
            if let Some(i) = cur.active().iter().find(|&i| x[i].is_zero()) {
                cur = cur.delete(i);
            }
            debug_assert!(cur.in_polytope(&point(x), &one, false));
        }
        Err(Error::Contract("adjust did not terminate".into()))
    }
}

fn rounder<O: ValueOracle>(f: Option<&O>, seed: u64) -> Rounder<'_, O> {
    Rounder { f, rng: ChaCha8Rng::seed_from_u64(seed), branches: Vec::new(), values: Vec::new() }
}

fn coords(m: &Matroid, y: &Point<Rational>) -> Result<Vec<Rational>> {
    check_size(m)?;
    if y.len() != m.n() {
        return Err(Error::invalid("point dimension differs from the matroid"));
    }
    Ok(y.coords().to_vec())
}

/// Rounds `y ∈ B(M)` to a random base with `E[f(B)] ≥ F(y)`.
pub fn pipage_round(m: &Matroid, y: &Point<Rational>, seed: u64) -> Result<RoundingOutcome> {
    pipage_round_traced::<crate::setfn::Table>(m, y, seed, None)
}

pub fn pipage_round_traced<O: ValueOracle>(m: &Matroid, y: &Point<Rational>, seed: u64, f: Option<&O>) -> Result<RoundingOutcome> {
    let mut y = coords(m, y)?;
    if !m.in_polytope(&point(&y), &Rational::one(), true) {
        return Err(Error::Contract("pipage rounding needs a point of the base polytope".into()));
    }
    let mut r = rounder(f, seed);
    r.pipage(m, &mut y)?;
    Ok(RoundingOutcome {
        set: point(&y).support_of_ones(),
        intermediate_values: r.values,
        seed,
        branches: r.branches,
        deleted: Subset::EMPTY,
    })
}

/// Moves `x ∈ P(M)` into the base polytope of a restriction of `M`.
pub fn adjust(m: &Matroid, x: &Point<Rational>, seed: u64) -> Result<(Matroid, Point<Rational>, Vec<Branch>)> {
    let mut x = coords(m, x)?;
    if !m.in_polytope(&point(&x), &Rational::one(), false) {
        return Err(Error::Contract("adjust needs a point of the matroid polytope".into()));
    }
    let mut r = rounder::<crate::setfn::Table>(None, seed);
    let restricted = r.adjust(m, &mut x)?;
    Ok((restricted, point(&x), r.branches))
}

/// Extended pipage rounding: Adjust followed by pipage rounding, one seed.
pub fn round_matroid(m: &Matroid, x: &Point<Rational>, seed: u64) -> Result<RoundingOutcome> {
    round_matroid_traced::<crate::setfn::Table>(m, x, seed, None)
}

pub fn round_matroid_traced<O: ValueOracle>(m: &Matroid, x: &Point<Rational>, seed: u64, f: Option<&O>) -> Result<RoundingOutcome> {
    let mut x = coords(m, x)?;
    if !m.in_polytope(&point(&x), &Rational::one(), false) {
        return Err(Error::Contract("rounding needs a point of the matroid polytope".into()));
    }
    let mut r = rounder(f, seed);
    let restricted = r.adjust(m, &mut x)?;
    r.pipage(&restricted, &mut x)?;
    let set = point(&x).support_of_ones();
    debug_assert!(m.is_independent(set));
    Ok(RoundingOutcome {
        set,
        intermediate_values: r.values,
        seed,
        branches: r.branches,
        deleted: m.active().difference(restricted.active()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(p: i128, d: i128) -> Rational {
        Rational::new(p, d)
    }

    #[test]
    fn hit_constraint_examples() {
        let u = Matroid::uniform(2, 1).unwrap();
        let (y, a) = hit_constraint(&u, &[q(1, 2), q(1, 2)], 0, 1).unwrap();
        assert_eq!(y, vec![q(1, 1), q(0, 1)]);
        assert_eq!(a, Subset::singleton(0));
        let (y, a) = hit_constraint(&u, &[q(1, 1), q(0, 1)], 0, 1).unwrap();
        assert_eq!(y, vec![q(1, 1), q(0, 1)]);
        assert_eq!(a, Subset::singleton(1));
        let p = Matroid::partition(3, vec![vec![0, 1], vec![2]], vec![1, 1]).unwrap();
        let (y, a) = hit_constraint(&p, &[q(1, 2), q(1, 2), q(1, 1)], 0, 1).unwrap();
        assert_eq!(y[0], q(1, 1));
        assert_eq!(a, Subset::singleton(0));
    }

    #[test]
    fn uniform_two_one_is_a_coin() {
        let u = Matroid::uniform(2, 1).unwrap();
        let y = Point::constant(2, q(1, 2));
        let mut zeros = 0;
        for seed in 0..400 {
            let out = pipage_round(&u, &y, seed).unwrap();
            assert_eq!(out.set.len(), 1);
            assert!(out.branches.iter().all(Branch::martingale_holds));
            zeros += out.set.contains(0) as usize;
        }
        assert!((150..250).contains(&zeros), "{zeros}");
    }

    #[test]
    fn integral_points_are_fixed() {
        let u = Matroid::uniform(3, 2).unwrap();
        let y = Point::indicator(3, Subset::from_indices([0, 2]));
        let out = pipage_round(&u, &y, 1).unwrap();
        assert_eq!(out.set, Subset::from_indices([0, 2]));
        assert!(out.branches.is_empty());
        let out = round_matroid(&u, &Point::indicator(3, Subset::singleton(1)), 1).unwrap();
        assert_eq!(out.set, Subset::singleton(1));
    }

    #[test]
    fn adjust_on_a_single_free_element() {
        let m = Matroid::free(1).unwrap();
        let x = Point::constant(1, q(1, 2));
        let mut kept = 0;
        for seed in 0..200 {
            let (m2, y, br) = adjust(&m, &x, seed).unwrap();
            assert_eq!(br[0].p, q(1, 2));
            if y[0] == q(1, 1) {
                kept += 1;
                assert_eq!(m2.active(), Subset::full(1));
            } else {
                assert_eq!(m2.active(), Subset::EMPTY);
            }
        }
        assert!((70..130).contains(&kept));
        let u = Matroid::uniform(2, 1).unwrap();
        let (m2, y, br) = adjust(&u, &Point::constant(2, q(1, 2)), 0).unwrap();
        assert!(br.is_empty());
        assert_eq!(m2, u);
        assert_eq!(y, Point::constant(2, q(1, 2)));
    }

    #[test]
    fn contract_violations() {
        let u = Matroid::uniform(2, 1).unwrap();
        assert!(matches!(pipage_round(&u, &Point::constant(2, q(1, 4)), 0), Err(Error::Contract(_))));
        assert!(matches!(adjust(&u, &Point::constant(2, q(3, 4)), 0), Err(Error::Contract(_))));
    }
}
