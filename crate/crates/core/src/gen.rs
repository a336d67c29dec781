//! Random instances for the property suites: nonnegative submodular
//! functions, loopless matroids, and symmetric instances built from them.

use rand::seq::IndexedRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::matroid::Matroid;
use crate::point::Point;
use crate::scalar::Rational;
use crate::setfn::{tabulate, SetFunction, ValueOracle};
use crate::subset::Subset;
use crate::symmetry::{apply_set, PermGroup};

/// Weights on a 1/16 grid keep tables exactly representable.
fn weight(rng: &mut impl Rng) -> f64 {
    rng.random_range(1..=16) as f64 / 16.0
}

/// A nonnegative combination of an undirected cut, a directed cut and a
/// weighted coverage function; nonmonotone in general.
pub fn submodular(n: usize, rng: &mut impl Rng) -> Result<SetFunction> {
    if n == 0 {
        return Err(Error::invalid("random instances need n ≥ 1"));
    }
    let mut edges = Vec::new();
    let mut arcs = Vec::new();
    for u in 0..n {
        for v in 0..n {
            if u < v && rng.random_bool(0.4) {
                edges.push((u, v, weight(rng)));
            }
            if u != v && rng.random_bool(0.2) {
                arcs.push((u, v, weight(rng)));
            }
        }
    }
    let universe = n + 2;
    let sets: Vec<Vec<usize>> = (0..n)
        .map(|_| (0..universe).filter(|_| rng.random_bool(0.3)).collect())
        .collect();
    let weights = (0..universe).map(|_| weight(rng)).collect();
    let mut parts = vec![
        (weight(rng), SetFunction::cut(n, edges)?),
        (weight(rng), SetFunction::directed_cut(n, arcs)?),
    ];
    if rng.random_bool(0.5) {
        parts.push((weight(rng), SetFunction::coverage(&sets, Some(weights))?));
    }
    SetFunction::composed(parts)
}

/// Uniform or partition matroid with every cap at least 1, hence loopless.
pub fn loopless_matroid(n: usize, rng: &mut impl Rng) -> Result<Matroid> {
    if rng.random_bool(0.5) {
        return Matroid::uniform(n, rng.random_range(1..=n));
    }
    let blocks = rng.random_range(1..=n.min(3));
    let mut parts = vec![Vec::new(); blocks];
    for i in 0..n {
        // The first `blocks` elements seed one block each.
        let b = if i < blocks { i } else { rng.random_range(0..blocks) };
        parts[b].push(i);
    }
    let caps = parts.iter().map(|p| rng.random_range(1..=p.len())).collect();
    Matroid::partition(n, parts, caps)
}

/// A matroid on an even ground set whose bases pack exactly twice:
/// `U(n, n/2)` or a partition into even blocks with half caps.
pub fn nu_two_matroid(n: usize, rng: &mut impl Rng) -> Result<Matroid> {
    if n < 2 || n % 2 == 1 {
        return Err(Error::invalid("packing-number-2 matroids need an even n ≥ 2"));
    }
    if n == 2 || rng.random_bool(0.4) {
        return Matroid::uniform(n, n / 2);
    }
    let mut parts = Vec::new();
    let mut next = 0;
    while next < n {
        let size = 2 * rng.random_range(1..=(n - next) / 2);
        parts.push((next..next + size).collect::<Vec<_>>());
        next += size;
    }
    let caps = parts.iter().map(|p| p.len() / 2).collect();
    Matroid::partition(n, parts, caps)
}

/// Uniform coordinates with about a fifth snapped to 0 or 1.
pub fn point(n: usize, rng: &mut impl Rng) -> Point<f64> {
    let coords = (0..n)
        .map(|_| {
            if rng.random_bool(0.2) {
                rng.random_range(0..=1) as f64
            } else {
                rng.random::<f64>()
            }
        })
        .collect();
    Point::from_vec_unchecked(coords)
}

/// Average of `q` random bases, a rational point of `B(M)`.
pub fn base_point(m: &Matroid, q: usize, rng: &mut impl Rng) -> Result<Point<Rational>> {
    let bases = m.enumerate_bases()?;
    let picks: Vec<Subset> = (0..q).map(|_| *bases.choose(rng).expect("a matroid has a base")).collect();
    Ok(average(m.n(), &picks))
}

/// Average of `q` random independent sets (random subsets of random bases).
pub fn independent_point(m: &Matroid, q: usize, rng: &mut impl Rng) -> Result<Point<Rational>> {
    let bases = m.enumerate_bases()?;
    let picks: Vec<Subset> = (0..q)
        .map(|_| {
            let b = *bases.choose(rng).expect("a matroid has a base");
            Subset::from_indices(b.iter().filter(|_| rng.random_bool(0.6)))
        })
        .collect();
    Ok(average(m.n(), &picks))
}

fn average(n: usize, sets: &[Subset]) -> Point<Rational> {
    let q = sets.len() as i128;
    let coords = (0..n)
        .map(|i| Rational::new(sets.iter().filter(|s| s.contains(i)).count() as i128, q))
        .collect();
    Point::from_vec_unchecked(coords)
}

/// `f_G(S) = mean over σ ∈ G of f(σ(S))`, tabulated; invariant under `G`.
pub fn group_average<O: ValueOracle>(f: &O, g: &PermGroup) -> Result<SetFunction> {
    let n = f.ground_size();
    let t = tabulate(f)?;
    let order = g.order() as f64;
    let values = (0..1u64 << n)
        .map(|mask| g.elements().iter().map(|s| t.values()[apply_set(s, Subset(mask)).0 as usize]).sum::<f64>() / order)
        .collect();
    SetFunction::table(n, values)
}

/// Welfare instance: items `j < m`, players `i < k`, element `j·k + i`
/// gives item `j` to player `i`, and `f(S) = Σ_i v({j: (j,i) ∈ S})`.
/// Returns `f`, the partition matroid with one block per item (each block
/// of size `k` with cap `caps[j]`), and the player-permutation group.
pub fn welfare(v: &SetFunction, k: usize, caps: &[usize]) -> Result<(SetFunction, Matroid, PermGroup)> {
    let m = v.n();
    if caps.len() != m || k == 0 {
        return Err(Error::invalid("welfare instance needs one cap per item and k ≥ 1"));
    }
    let n = m * k;
    let values = (0..1u64 << n)
        .map(|mask| {
            (0..k)
                .map(|i| v.eval(Subset::from_indices((0..m).filter(|j| mask >> (j * k + i) & 1 == 1))))
                .sum()
        })
        .collect();
    let f = SetFunction::table(n, values)?;
    let parts = (0..m).map(|j| (j * k..(j + 1) * k).collect()).collect();
    let matroid = Matroid::partition(n, parts, caps.to_vec())?;
    let mut gens = Vec::new();
    if k >= 2 {
        let shift = |i: usize| -> Vec<usize> { (0..n).map(|e| e - e % k + (e % k + i) % k).collect() };
        let mut swap: Vec<usize> = (0..n).collect();
        for j in 0..m {
            swap.swap(j * k, j * k + 1);
        }
        gens = vec![shift(1), swap];
    }
    Ok((f, matroid, PermGroup::new(n, gens)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use crate::setfn::check_submodular;
    use crate::symmetry::check_invariance;

    #[test]
    fn generated_functions_are_submodular_and_nonnegative() {
        for s in 0..20 {
            let mut rng = stream(7, s);
            let f = submodular(1 + s as usize % 8, &mut rng).unwrap();
            assert!(check_submodular(&f).unwrap().is_pass());
            assert!(tabulate(&f).unwrap().values().iter().all(|v| *v >= 0.0));
        }
    }

    #[test]
    fn nu_two_packs_twice() {
        for s in 0..10 {
            let mut rng = stream(3, s);
            let m = nu_two_matroid(2 * (1 + s as usize % 4), &mut rng).unwrap();
            assert_eq!(m.fractional_base_packing().unwrap().nu, Rational::from_integer(2));
        }
    }

    #[test]
    fn welfare_is_invariant_and_transitive_per_block() {
        let mut rng = stream(1, 0);
        let v = submodular(3, &mut rng).unwrap();
        let (f, m, g) = welfare(&v, 3, &[1, 2, 1]).unwrap();
        assert!(check_invariance(&f, &g).unwrap().is_pass());
        assert_eq!(g.orbits().len(), 3);
        assert_eq!(m.full_rank(), 4);
        assert!(check_submodular(&f).unwrap().is_pass());
    }
}
