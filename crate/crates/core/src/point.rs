use std::ops::Index;

use serde::ser::{Serialize, SerializeSeq, Serializer};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::subset::Subset;

/// A vector in `[0,1]^n`.
#[derive(Clone, Debug, PartialEq)]
pub struct Point<T> {
    coords: Vec<T>,
}

impl<T: Scalar> Point<T> {
    pub fn new(coords: Vec<T>) -> Result<Self> {
        let (zero, one) = (T::zero(), T::one());
        if let Some((i, c)) = coords
            .iter()
            .enumerate()
            .find(|(_, c)| **c < zero || **c > one)
        {
            return Err(Error::invalid(format!("coordinate {i} = {c} outside [0,1]")));
        }
        Ok(Point { coords })
    }

    /// Skips the range check; callers guarantee `[0,1]` membership.
    pub fn from_vec_unchecked(coords: Vec<T>) -> Self {
        Point { coords }
    }

    pub fn zeros(n: usize) -> Self {
        Point { coords: vec![T::zero(); n] }
    }

    pub fn constant(n: usize, v: T) -> Self {
        Point { coords: vec![v; n] }
    }

    pub fn indicator(n: usize, s: Subset) -> Self {
        Point {
            coords: (0..n)
                .map(|i| if s.contains(i) { T::one() } else { T::zero() })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn coords(&self) -> &[T] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<T> {
        self.coords
    }

    pub fn with_coord(&self, i: usize, v: T) -> Self {
        let mut c = self.coords.clone();
        c[i] = v;
        Point { coords: c }
    }

    pub fn sum(&self) -> T {
        self.coords.iter().fold(T::zero(), |a, b| a + b.clone())
    }

    pub fn sum_over(&self, s: Subset) -> T {
        s.iter().fold(T::zero(), |a, i| a + self.coords[i].clone())
    }

    pub fn is_integral(&self) -> bool {
        self.coords.iter().all(|c| c.is_zero() || c.is_one())
    }

    /// Indices whose coordinate equals one.
    pub fn support_of_ones(&self) -> Subset {
        Subset::from_indices((0..self.len()).filter(|&i| self.coords[i].is_one()))
    }

    pub fn to_f64(&self) -> Point<f64> {
        Point { coords: self.coords.iter().map(Scalar::to_f64).collect() }
    }
}

impl<T> Index<usize> for Point<T> {
    type Output = T;
    fn index(&self, i: usize) -> &T {
        &self.coords[i]
    }
}

impl<T: Scalar> Serialize for Point<T> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(self.coords.len()))?;
        for c in &self.coords {
            seq.serialize_element(&c.to_json())?;
        }
        seq.end()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Rational;

    #[test]
    fn rejects_out_of_range() {
        assert!(Point::new(vec![0.5, 1.5]).is_err());
        assert!(Point::new(vec![Rational::new(1, 2)]).is_ok());
    }

    #[test]
    fn rational_points_serialize_as_strings() {
        let p = Point::new(vec![Rational::new(1, 2), Rational::from_integer(1)]).unwrap();
        assert_eq!(serde_json::to_string(&p).unwrap(), r#"["1/2","1"]"#);
    }
}
