//! Multilinear and Lovász extensions, threshold sets, partial derivatives.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::point::Point;
use crate::rng;
use crate::scalar::Scalar;
use crate::setfn::ValueOracle;
use crate::subset::Subset;

/// Exact evaluation enumerates `2^n` sets.
pub const EXACT_CAP: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub samples: u64,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum Evaluator {
    Exact,
    Sampled { samples: u64, seed: u64 },
}

impl Evaluator {
    /// Value and standard error (zero when exact).
    pub fn evaluate<O: ValueOracle>(&self, f: &O, x: &Point<f64>) -> Result<(f64, f64)> {
        match *self {
            Evaluator::Exact => Ok((multilinear_exact(f, x)?, 0.0)),
            Evaluator::Sampled { samples, seed } => {
                let e = multilinear_sample(f, x, samples, seed)?;
                Ok((e.mean, e.stderr))
            }
        }
    }
}

pub fn default_samples(n: usize) -> u64 {
    (n as u64).pow(3).max(10_000)
}

/// `F(x) = Σ_S f(S) Π_{i∈S} x_i Π_{j∉S} (1 − x_j)`.
///
/// Depth-first over elements carrying the running product, so each of the
/// `2^n` weights costs one multiplication and zero-probability branches are
/// skipped (integral points cost `O(n)`).
pub fn multilinear_exact<T: Scalar, O: ValueOracle>(f: &O, x: &Point<T>) -> Result<T> {
    let n = f.ground_size();
    Error::check_size("exact multilinear evaluation", n, EXACT_CAP)?;
    if x.len() != n {
        return Err(Error::invalid(format!("point has {} coordinates, ground set {n}", x.len())));
    }
    let comp: Vec<T> = x.coords().iter().map(|c| T::one() - c.clone()).collect();
    fn walk<T: Scalar, O: ValueOracle>(
        f: &O,
        x: &[T],
        comp: &[T],
        i: usize,
        mask: u64,
        weight: T,
        acc: &mut T,
    ) {
        if weight.is_zero() {
            return;
        }
        if i == x.len() {
            *acc = acc.clone() + weight * T::from_f64(f.value(Subset(mask)));
            return;
        }
        walk(f, x, comp, i + 1, mask | 1 << i, weight.clone() * x[i].clone(), acc);
        walk(f, x, comp, i + 1, mask, weight * comp[i].clone(), acc);
    }
    let mut acc = T::zero();
    walk(f, x.coords(), &comp, 0, 0, T::one(), &mut acc);
    Ok(acc)
}

/// Set containing each `i` independently with probability `x_i`, drawn from
/// stream `index` of `seed`.
pub fn sample_independent_set(x: &Point<f64>, seed: u64, index: u64) -> Subset {
    let mut r = rng::stream(seed, index);
    Subset::from_indices((0..x.len()).filter(|&i| r.random::<f64>() < x[i]))
}

/// Monte Carlo estimate of `F(x)`; a pure function of `(f, x, samples, seed)`.
pub fn multilinear_sample<O: ValueOracle>(f: &O, x: &Point<f64>, samples: u64, seed: u64) -> Result<Estimate> {
    if samples == 0 {
        return Err(Error::invalid("need at least one sample"));
    }
    let values: Vec<f64> = (0..samples)
        .into_par_iter()
        .map(|k| f.value(sample_independent_set(x, seed, k)))
        .collect();
    let (mean, stderr) = mean_stderr(&values);
    Ok(Estimate { mean, stderr, samples, seed })
}

/// Sample mean and `sd/√N` (zero for a single value).
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// `∂F/∂x_i = F(x | x_i = 1) − F(x | x_i = 0)`.
pub fn partial_derivative_exact<T: Scalar, O: ValueOracle>(f: &O, x: &Point<T>, i: usize) -> Result<T> {
    Ok(multilinear_exact(f, &x.with_coord(i, T::one()))? - multilinear_exact(f, &x.with_coord(i, T::zero()))?)
}

/// `∂²F/∂x_i∂x_j` by inclusion–exclusion over the four corner settings.
pub fn second_partial_exact<T: Scalar, O: ValueOracle>(f: &O, x: &Point<T>, i: usize, j: usize) -> Result<T> {
    if i == j {
        return Ok(T::zero());
    }
    let at = |a: bool, b: bool| {
        let v = |s: bool| if s { T::one() } else { T::zero() };
        multilinear_exact(f, &x.with_coord(i, v(a)).with_coord(j, v(b)))
    };
    Ok(at(true, true)? - at(true, false)? - at(false, true)? + at(false, false)?)
}

pub fn gradient_exact<T: Scalar, O: ValueOracle>(f: &O, x: &Point<T>) -> Result<Vec<T>> {
    (0..x.len()).map(|i| partial_derivative_exact(f, x, i)).collect()
}

/// First partial with either evaluator; sampled mode reuses the seed for both
/// endpoints so the difference has low variance.
pub fn partial_derivative<O: ValueOracle>(f: &O, x: &Point<f64>, i: usize, ev: &Evaluator) -> Result<f64> {
    let hi = ev.evaluate(f, &x.with_coord(i, 1.0))?.0;
    let lo = ev.evaluate(f, &x.with_coord(i, 0.0))?.0;
    Ok(hi - lo)
}

pub fn second_partial<O: ValueOracle>(f: &O, x: &Point<f64>, i: usize, j: usize, ev: &Evaluator) -> Result<f64> {
    if i == j {
        return Ok(0.0);
    }
    let at = |a: f64, b: f64| ev.evaluate(f, &x.with_coord(i, a).with_coord(j, b)).map(|e| e.0);
    Ok(at(1.0, 1.0)? - at(1.0, 0.0)? - at(0.0, 1.0)? + at(0.0, 0.0)?)
}

/// Lovász extension. Coordinates are sorted decreasingly with ties broken by
/// element index; the value does not depend on the tie order.
pub fn lovasz_eval<T: Scalar, O: ValueOracle>(f: &O, x: &Point<T>) -> T {
    let n = x.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| x[b].partial_cmp(&x[a]).expect("comparable coordinates").then(a.cmp(&b)));
    let coord = |k: usize| -> T {
        if k == 0 {
            T::one()
        } else if k > n {
            T::zero()
        } else {
            x[order[k - 1]].clone()
        }
    };
    let mut acc = T::zero();
    let mut prefix = Subset::EMPTY;
    for k in 0..=n {
        if k > 0 {
            prefix = prefix.with(order[k - 1]);
        }
        let w = coord(k) - coord(k + 1);
        if !w.is_zero() {
            acc = acc + w * T::from_f64(f.value(prefix));
        }
    }
    acc
}

/// `T(x) = {i : x_i > λ}` for a single uniform `λ`.
pub fn sample_threshold_set(x: &Point<f64>, seed: u64) -> Subset {
    let lambda: f64 = rng::stream(seed, 0).random();
    threshold_set(x, lambda)
}

pub fn threshold_set(x: &Point<f64>, lambda: f64) -> Subset {
    Subset::from_indices((0..x.len()).filter(|&i| x[i] > lambda))
}

/// `f((T₁(x) ∩ X₁) ∪ (T₂(x) ∩ X₂))` with independent thresholds, where
/// `X₂` is the complement of `part`.
pub fn split_threshold_value<O: ValueOracle>(f: &O, x: &Point<f64>, part: Subset, seed: u64) -> f64 {
    let mut r = rng::stream(seed, 0);
    let (l1, l2): (f64, f64) = (r.random(), r.random());
    let s1 = threshold_set(x, l1).intersection(part);
    let s2 = threshold_set(x, l2).difference(part);
    f.value(s1.union(s2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::setfn::SetFunction;
    use crate::Rational;

    fn k2() -> SetFunction {
        SetFunction::cut(2, vec![(0, 1, 1.0)]).unwrap()
    }

    #[test]
    fn worked_values() {
        let half = Point::constant(2, 0.5);
        assert_eq!(multilinear_exact(&k2(), &half).unwrap(), 0.5);
        assert_eq!(lovasz_eval(&k2(), &half), 0.0);
        let th = SetFunction::threshold(2, 1).unwrap();
        assert_eq!(lovasz_eval(&th, &Point::new(vec![0.25, 0.75]).unwrap()), 0.75);
        let d = SetFunction::directed_cut(4, vec![(0, 2, 1.0), (1, 3, 1.0)]).unwrap();
        assert_eq!(multilinear_exact(&d, &Point::constant(4, 0.5)).unwrap(), 0.5);
    }

    #[test]
    fn exact_rational_evaluation() {
        let th = SetFunction::threshold(3, 1).unwrap();
        let third = Point::constant(3, Rational::new(1, 3));
        assert_eq!(multilinear_exact(&th, &third).unwrap(), Rational::new(19, 27));
        let f32v = multilinear_exact(&k2(), &Point::constant(2, 0.5f32)).unwrap();
        assert_eq!(f32v, 0.5f32);
    }

    #[test]
    fn derivatives_of_k2() {
        let p = Point::new(vec![0.3f64, 0.5]).unwrap();
        assert!(partial_derivative_exact(&k2(), &p, 0).unwrap().abs() < 1e-15);
        let p = Point::new(vec![0.3, 0.0]).unwrap();
        assert_eq!(partial_derivative_exact(&k2(), &p, 0).unwrap(), 1.0);
        assert_eq!(second_partial_exact(&k2(), &p, 0, 1).unwrap(), -2.0);
    }

    #[test]
    fn sampling_is_reproducible_and_accurate() {
        let half = Point::constant(2, 0.5);
        let a = multilinear_sample(&k2(), &half, 100_000, 7).unwrap();
        let b = multilinear_sample(&k2(), &half, 100_000, 7).unwrap();
        assert_eq!(a, b);
        assert!((a.mean - 0.5).abs() <= 5.0 * a.stderr);
        let c = multilinear_sample(&k2(), &Point::new(vec![1.0, 0.0]).unwrap(), 100, 1).unwrap();
        assert_eq!((c.mean, c.stderr), (1.0, 0.0));
    }

    #[test]
    fn thresholds() {
        let x = Point::new(vec![1.0, 1.0, 0.0]).unwrap();
        assert_eq!(sample_threshold_set(&x, 3), Subset::from_indices([0, 1]));
    }
}
